//! Deterministic synthetic datasets and targeted rule violations.
//!
//! Everything is drawn from a ChaCha8 stream seeded by the config, so the
//! same config always yields the same store, byte for byte.

use chrono::{Datelike, Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraint::{force_apply, RuleId, Transaction};
use crate::model::*;
use crate::store::{CanonicalStore, Sequence};
use crate::time::Timestamp;

/// Probabilities of each delivery type; must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeliveryMix {
    pub programmed_c_section: f64,
    pub natural: f64,
    pub operative: f64,
    pub emergency_c_section: f64,
}

impl Default for DeliveryMix {
    fn default() -> Self {
        DeliveryMix { programmed_c_section: 0.15, natural: 0.6, operative: 0.1, emergency_c_section: 0.15 }
    }
}

impl DeliveryMix {
    pub fn weights(&self) -> [(DeliveryType, f64); 4] {
        [
            (DeliveryType::ProgrammedCSection, self.programmed_c_section),
            (DeliveryType::Natural, self.natural),
            (DeliveryType::Operative, self.operative),
            (DeliveryType::EmergencyCSection, self.emergency_c_section),
        ]
    }

    fn draw(&self, rng: &mut impl Rng) -> DeliveryType {
        let x: f64 = rng.gen();
        let mut acc = 0.0;
        for (kind, p) in self.weights() {
            acc += p;
            if x < acc {
                return kind;
            }
        }
        DeliveryType::Natural
    }
}

/// Per-field probability that an optional value is left empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissingRates {
    pub ph: f64,
    pub length_cm: f64,
    pub apgar_10: f64,
    pub art_used: f64,
    pub analgesia: f64,
    pub completion_rate: f64,
    pub maternal_heart_rate: f64,
    pub maternal_tocography: f64,
    pub fetal_heart_rate: f64,
}

impl Default for MissingRates {
    fn default() -> Self {
        MissingRates {
            ph: 0.2,
            length_cm: 0.1,
            apgar_10: 0.7,
            art_used: 0.3,
            analgesia: 0.4,
            completion_rate: 0.3,
            maternal_heart_rate: 0.1,
            maternal_tocography: 0.1,
            fetal_heart_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_patients: usize,
    /// Relative weights for 1, 2, 3, ... pregnancies per patient.
    pub pregnancies_per_patient: Vec<f64>,
    pub delivery_mix: DeliveryMix,
    /// Probability that a labor delivery was induced.
    pub induction_probability: f64,
    pub twin_probability: f64,
    /// Probability that a delivery has a CTG tracing.
    pub ctg_probability: f64,
    /// Tracing duration range in minutes, sampled at 4 Hz.
    pub ctg_minutes: (f64, f64),
    pub missing: MissingRates,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            n_patients: 200,
            pregnancies_per_patient: vec![0.7, 0.25, 0.05],
            delivery_mix: DeliveryMix::default(),
            induction_probability: 0.25,
            twin_probability: 0.03,
            ctg_probability: 0.3,
            ctg_minutes: (0.1, 0.5),
            missing: MissingRates::default(),
        }
    }
}

impl SynthConfig {
    pub fn new(seed: u64, n_patients: usize) -> Self {
        SynthConfig { seed, n_patients, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let m = &self.missing;
        let probabilities = [
            ("induction_probability", self.induction_probability),
            ("twin_probability", self.twin_probability),
            ("ctg_probability", self.ctg_probability),
            ("missing.ph", m.ph),
            ("missing.length_cm", m.length_cm),
            ("missing.apgar_10", m.apgar_10),
            ("missing.art_used", m.art_used),
            ("missing.analgesia", m.analgesia),
            ("missing.completion_rate", m.completion_rate),
            ("missing.maternal_heart_rate", m.maternal_heart_rate),
            ("missing.maternal_tocography", m.maternal_tocography),
            ("missing.fetal_heart_rate", m.fetal_heart_rate),
        ];
        for (name, p) in probabilities.into_iter().chain(self.delivery_mix.weights().map(|(k, p)| (k.as_str(), p))) {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::InvalidConfig(format!("{name} = {p} is not in [0, 1]")));
            }
        }
        let total: f64 = self.delivery_mix.weights().iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(SynthError::InvalidConfig(format!("delivery mix sums to {total}, not 1")));
        }
        if self.pregnancies_per_patient.is_empty() || self.pregnancies_per_patient.iter().any(|w| *w < 0.0 || !w.is_finite())
        {
            return Err(SynthError::InvalidConfig("pregnancies_per_patient needs non-negative weights".into()));
        }
        if self.pregnancies_per_patient.iter().sum::<f64>() <= 0.0 {
            return Err(SynthError::InvalidConfig("pregnancies_per_patient weights sum to 0".into()));
        }
        let (lo, hi) = self.ctg_minutes;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(SynthError::InvalidConfig(format!("ctg_minutes ({lo}, {hi}) is not a range")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("store too small to host a {rule} violation: {reason}")]
    StoreTooSmall { rule: RuleId, reason: String },
}

const FIRST_NAMES: &[&str] = &[
    "Maria", "Giulia", "Laura", "Francesca", "Sara", "Chiara", "Anna", "Elena", "Martina", "Valentina", "Alessia",
    "Federica", "Silvia", "Paola", "Roberta", "Ilaria", "Marta", "Beatrice", "Camilla", "Giorgia",
];
const SURNAMES: &[&str] = &[
    "Rossi", "Bianchi", "Verdi", "Russo", "Ferrari", "Esposito", "Romano", "Colombo", "Ricci", "Marino", "Greco",
    "Bruno", "Gallo", "Conti", "De Luca", "Costa", "Giordano", "Mancini", "Rizzo", "Lombardi",
];
const CONDITIONS: &[&str] =
    &["Gestational diabetes", "Pregnancy-induced hypertension", "Thyropathy", "Preeclampsia", "Anemia", "Cholestasis"];
const THERAPIES: &[&str] = &["insulin", "labetalol", "levothyroxine", "iron supplementation", "ursodeoxycholic acid"];
const PCS_MOTIVATIONS: &[&str] = &[
    "breech presentation",
    "previous caesarean",
    "placenta previa",
    "maternal request",
    "suspicious CTG at admission",
    "macrosomia",
];
const LABOR_MOTIVATIONS: &[&str] = &[
    "non-reassuring CTG",
    "failure to progress",
    "prolonged second stage",
    "maternal exhaustion",
    "pathological CTG",
    "fetal distress",
];
const ANALGESIA: &[&str] = &["epidural", "spinal", "nitrous oxide", "remifentanil"];
const INDUCTION_METHODS: &[(&str, &str)] = &[
    ("dinoprostone", "10 mg"),
    ("oxytocin", "2 mU/min"),
    ("misoprostol", "25 mcg"),
    ("Foley catheter", ""),
    ("amniotomy", ""),
];

const TESTS: &[(&str, &[&str])] = &[
    ("Nuchal translucency", &["numeric"]),
    ("Combined test", &["low_risk", "high_risk"]),
    ("NIPT", &["negative", "positive"]),
    ("Karyotype", &["string"]),
    ("Hemoglobin", &["numeric"]),
];

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

fn tax_code(surname: &str, name: &str, birth: NaiveDate, index: usize) -> TaxCode {
    let letters = |s: &str| -> String {
        let mut out: String = s.chars().filter(|c| c.is_ascii_alphabetic()).take(3).collect::<String>().to_uppercase();
        while out.len() < 3 {
            out.push('X');
        }
        out
    };
    const MONTHS: &[u8] = b"ABCDEHLMPRST";
    const DIGITS: &[u8] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
    let mut serial = String::new();
    let mut n = index;
    for _ in 0..5 {
        serial.insert(0, DIGITS[n % 36] as char);
        n /= 36;
    }
    TaxCode::new(format!(
        "{}{}{:02}{}{:02}{}",
        letters(surname),
        letters(name),
        birth.year() % 100,
        MONTHS[birth.month0() as usize] as char,
        birth.day() + 40,
        serial
    ))
}

fn years_between(birth: NaiveDate, at: NaiveDate) -> i32 {
    let mut years = at.year() - birth.year();
    if (at.month(), at.day()) < (birth.month(), birth.day()) {
        years -= 1;
    }
    years
}

fn maybe<T>(rng: &mut impl Rng, missing: f64, value: impl FnOnce(&mut ChaCha8Rng) -> T) -> Option<T> {
    // Draw the coin first so the stream advances identically either way.
    let keep = !rng.gen_bool(missing);
    let mut sub = ChaCha8Rng::seed_from_u64(rng.gen());
    keep.then(|| value(&mut sub))
}

fn round_to(x: f64, digits: i32) -> f64 {
    let f = 10f64.powi(digits);
    (x * f).round() / f
}

fn at(day: NaiveDate, minute_of_day: i64) -> Timestamp {
    Timestamp::at_midnight(day).plus_millis(minute_of_day * 60_000)
}

/// Fixed reference data: tests and conditions.
pub fn reference_transaction() -> Transaction {
    let mut tx = Transaction::new();
    for (i, (name, ty)) in TESTS.iter().enumerate() {
        tx.insert(Test { id: i as i64 + 1, name: name.to_string(), result_type: ty.iter().map(|s| s.to_string()).collect() });
    }
    for (i, name) in CONDITIONS.iter().enumerate() {
        tx.insert(Condition { id: i as i64 + 1, name: name.to_string() });
    }
    tx
}

struct Ids {
    pregnancy: i64,
    examination: i64,
    tracing: i64,
}

/// The generated dataset as a sequence of transactions: reference data
/// first, then one per patient. Each commits cleanly on top of the previous.
pub fn transactions(config: &SynthConfig) -> Result<Vec<Transaction>, SynthError> {
    config.validate()?;
    if config.n_patients == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = vec![reference_transaction()];
    let mut ids = Ids { pregnancy: 0, examination: 0, tracing: 0 };
    for index in 0..config.n_patients {
        out.push(patient_transaction(config, &mut rng, &mut ids, index));
    }
    Ok(out)
}

/// Generates a constraint-valid store. Same config, same store.
pub fn generate(config: &SynthConfig) -> Result<CanonicalStore, SynthError> {
    let mut store = CanonicalStore::new();
    for tx in transactions(config)? {
        store = force_apply(&store, &tx).expect("generated transactions are well formed");
    }
    Ok(store)
}

fn draw_pregnancy_count(config: &SynthConfig, rng: &mut impl Rng) -> usize {
    let total: f64 = config.pregnancies_per_patient.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in config.pregnancies_per_patient.iter().enumerate() {
        if x < *w {
            return i + 1;
        }
        x -= w;
    }
    config.pregnancies_per_patient.len()
}

fn patient_transaction(config: &SynthConfig, rng: &mut ChaCha8Rng, ids: &mut Ids, index: usize) -> Transaction {
    let mut tx = Transaction::new();
    let name = *FIRST_NAMES.choose(rng).unwrap();
    let surname = *SURNAMES.choose(rng).unwrap();
    let birth = date(1976, 1, 1) + Duration::days(rng.gen_range(0..26 * 365));
    let tc = tax_code(surname, name, birth, index);
    tx.insert(Patient { tc: tc.clone(), name: name.into(), surname: surname.into(), birth_date: birth });

    let n = draw_pregnancy_count(config, rng);
    let mut first_exam = date(2021, 3, 1) + Duration::days(rng.gen_range(0..4 * 365));
    let mut prior_births = 0;
    for k in 0..n {
        if k > 0 {
            first_exam += Duration::days(rng.gen_range(420..700));
        }
        if first_exam > date(2025, 9, 30) {
            break;
        }
        ids.pregnancy += 1;
        let pid = ids.pregnancy;
        let ga_first = rng.gen_range(70..96);
        let lmp = first_exam - Duration::days(ga_first as i64);
        let art_used = maybe(rng, config.missing.art_used, |r| r.gen_bool(0.08));
        tx.insert(Pregnancy {
            id: pid,
            patient_tc: tc.clone(),
            first_exam_date: first_exam,
            parity_full_term: prior_births,
            parity_premature: 0,
            parity_abortions: rng.gen_range(0..2),
            parity_live_births: prior_births,
            maternal_age_at_conception: years_between(birth, lmp),
            art_used,
            prior_pregnancy_conditions: (prior_births > 0 && rng.gen_bool(0.2)).then(|| "previous caesarean".into()),
            last_menstruation_date: Some(lmp),
            expected_delivery_date: Some(lmp + Duration::days(280)),
        });
        for i in 0..CONDITIONS.len() {
            if rng.gen_bool(0.06) {
                let therapy = rng.gen_bool(0.5).then(|| THERAPIES.choose(rng).unwrap().to_string());
                tx.insert(ConditionLink { pregnancy_id: pid, condition_id: i as i64 + 1, therapy });
            }
        }

        // Examinations.
        let mut exam = |tx: &mut Transaction, kind, offset: i64, rng: &mut ChaCha8Rng| {
            ids.examination += 1;
            let mut details = std::collections::BTreeMap::new();
            if kind == ExaminationKind::BiometricUltrasound {
                details.insert("estimated_weight_g".to_string(), rng.gen_range(1500..3500).to_string());
            }
            tx.insert(Examination {
                id: ids.examination,
                pregnancy_id: pid,
                examination_kind: kind,
                exam_date: first_exam + Duration::days(offset),
                gestational_age_days: ga_first + offset as i32,
                details,
            });
            ids.examination
        };
        let first = exam(&mut tx, ExaminationKind::FirstTrimester, 0, rng);
        let nt = format!("{:.1}", rng.gen_range(0.8..3.2));
        tx.insert(ExaminationTest { examination_id: first, test_id: 1, result: nt });
        let risk = if rng.gen_bool(0.1) { "high_risk" } else { "low_risk" };
        tx.insert(ExaminationTest { examination_id: first, test_id: 2, result: risk.into() });
        if rng.gen_bool(0.3) {
            let nipt = if rng.gen_bool(0.05) { "positive" } else { "negative" };
            tx.insert(ExaminationTest { examination_id: first, test_id: 3, result: nipt.into() });
        }
        if rng.gen_bool(0.7) {
            let second = exam(&mut tx, ExaminationKind::SecondTrimester, rng.gen_range(80..110), rng);
            let hb = format!("{:.1}", rng.gen_range(9.5..14.0));
            tx.insert(ExaminationTest { examination_id: second, test_id: 5, result: hb });
        }
        if rng.gen_bool(0.4) {
            exam(&mut tx, ExaminationKind::BiometricUltrasound, rng.gen_range(120..170), rng);
        }

        // Delivery.
        let ga_delivery: i32 = rng.gen_range(245..295);
        let delivery_date = lmp + Duration::days(ga_delivery as i64);
        let delivered = delivery_date <= date(2025, 12, 31) && rng.gen_bool(0.95);
        if !delivered {
            continue;
        }
        let delivery_type = config.delivery_mix.draw(rng);
        let twins = rng.gen_bool(config.twin_probability);
        let analgesia = maybe(rng, config.missing.analgesia, |r| ANALGESIA.choose(r).unwrap().to_string());
        tx.insert(Delivery {
            pregnancy_id: pid,
            delivery_date,
            gestational_age_days: ga_delivery,
            robson_score: rng.gen_range(1..=10),
            placental_expulsion: *PlacentalExpulsion::ALL.choose(rng).unwrap(),
            analgesia,
            estimated_blood_loss_ml: rng.gen_range(150..1500),
            delivery_type,
        });
        #[allow(clippy::needless_late_init)]
        let first_birth;
        if delivery_type == DeliveryType::ProgrammedCSection {
            tx.insert(ProgrammedCSection { pregnancy_id: pid, motivation: PCS_MOTIVATIONS.choose(rng).unwrap().to_string() });
            first_birth = at(delivery_date, rng.gen_range(8 * 60..14 * 60));
        } else {
            let subtype = match delivery_type {
                DeliveryType::Operative => DeliverySubtype::Operative,
                DeliveryType::EmergencyCSection => DeliverySubtype::EmergencyCSection,
                _ => DeliverySubtype::Natural,
            };
            let expulsion = at(delivery_date, rng.gen_range(0..24 * 60));
            let labor_minutes = rng.gen_range(90..14 * 60);
            let labor_start = expulsion.plus_millis(-labor_minutes * 60_000);
            let motivation = match subtype {
                DeliverySubtype::Natural => None,
                _ => Some(LABOR_MOTIVATIONS.choose(rng).unwrap().to_string()),
            };
            let episiotomy = subtype != DeliverySubtype::EmergencyCSection && rng.gen_bool(0.15);
            let laceration = if subtype == DeliverySubtype::EmergencyCSection {
                Laceration::None
            } else {
                *Laceration::ALL.choose(rng).unwrap()
            };
            tx.insert(DeliveryWithLabor {
                pregnancy_id: pid,
                delivery_subtype: subtype,
                motivation,
                laceration,
                episiotomy,
                episiotomy_motivation: (episiotomy && rng.gen_bool(0.7)).then(|| "rigid perineum".into()),
                labor_start_time: labor_start,
                expulsion_time: expulsion,
                operative_instrument: (subtype == DeliverySubtype::Operative)
                    .then(|| *OperativeInstrument::ALL.choose(rng).unwrap()),
            });
            if rng.gen_bool(config.induction_probability) {
                let count = rng.gen_range(1..=3);
                let mut minutes_before: Vec<i64> = (0..count).map(|_| rng.gen_range(30..36 * 60)).collect();
                minutes_before.sort_unstable();
                minutes_before.dedup();
                for m in minutes_before {
                    let (method, dosage) = *INDUCTION_METHODS.choose(rng).unwrap();
                    let completion = maybe(rng, config.missing.completion_rate, |r| round_to(r.gen_range(0.0..=1.0), 2));
                    tx.insert(Induction {
                        pregnancy_id: pid,
                        administration_time: labor_start.plus_millis(-m * 60_000),
                        method: method.into(),
                        drug_dosage: (!dosage.is_empty()).then(|| dosage.into()),
                        completion_rate: completion,
                    });
                }
            }
            first_birth = expulsion;
        }

        let mut births = vec![first_birth];
        if twins {
            births.push(first_birth.plus_millis(rng.gen_range(2..25) * 60_000));
        }
        for birth_time in &births {
            let (lo, hi) = if twins { (1600, 3300) } else { (2300, 4600) };
            let apgar_1 = rng.gen_range(3..=10);
            let apgar_5 = (apgar_1 + rng.gen_range(0..=2)).min(10);
            tx.insert(Newborn {
                pregnancy_id: pid,
                birth_time: *birth_time,
                weight_g: rng.gen_range(lo..hi),
                length_cm: maybe(rng, config.missing.length_cm, |r| round_to(r.gen_range(44.0..56.0), 1)),
                apgar_1,
                apgar_5,
                apgar_10: maybe(rng, config.missing.apgar_10, |r| (apgar_5 + r.gen_range(0..=1)).min(10)),
                ph: maybe(rng, config.missing.ph, |r| round_to(r.gen_range(6.95..7.45), 2)),
            });
        }
        prior_births += 1;

        if rng.gen_bool(config.ctg_probability) {
            ids.tracing += 1;
            let (lo, hi) = config.ctg_minutes;
            let minutes = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            let samples = (minutes * 60.0 * 4.0).round() as i64;
            let start = first_birth.plus_millis(-samples * 250 - 60_000);
            tx.insert(Tracing { tracing_id: ids.tracing, pregnancy_id: pid, start_time: start });
            let mut mhr: i32 = rng.gen_range(70..100);
            let mut fhr: Vec<i32> = births.iter().map(|_| rng.gen_range(120..155)).collect();
            for s in 0..samples {
                let ts = start.plus_millis(s * 250);
                mhr = (mhr + rng.gen_range(-2..=2)).clamp(55, 140);
                let maternal_heart_rate = (!rng.gen_bool(config.missing.maternal_heart_rate)).then_some(mhr);
                let toco = (!rng.gen_bool(config.missing.maternal_tocography))
                    .then(|| round_to(rng.gen_range(0.0..60.0), 1));
                let mut fetal = Vec::new();
                for (i, birth_time) in births.iter().enumerate() {
                    fhr[i] = (fhr[i] + rng.gen_range(-3..=3)).clamp(90, 190);
                    if !rng.gen_bool(config.missing.fetal_heart_rate) {
                        fetal.push(NewbornMeasurement {
                            tracing_id: ids.tracing,
                            ts,
                            pregnancy_id: pid,
                            birth_time: *birth_time,
                            fetal_heart_rate: fhr[i],
                        });
                    }
                }
                if maternal_heart_rate.is_none() && toco.is_none() && fetal.is_empty() {
                    continue;
                }
                tx.insert(Measurement { tracing_id: ids.tracing, ts, maternal_heart_rate, maternal_tocography: toco });
                for f in fetal {
                    tx.insert(f);
                }
            }
        }
    }
    tx
}

fn too_small(rule: RuleId, reason: &str) -> SynthError {
    SynthError::StoreTooSmall { rule, reason: reason.into() }
}

/// A fresh pregnancy (with one first-trimester examination unless
/// `bare`) for some patient, on a date no existing pregnancy uses.
fn fresh_pregnancy(
    store: &CanonicalStore,
    rng: &mut ChaCha8Rng,
    rule: RuleId,
    bare: bool,
) -> Result<(Transaction, PregnancyId, NaiveDate), SynthError> {
    let patients: Vec<&Patient> = store.patients().values().collect();
    let patient = *patients.choose(rng).ok_or_else(|| too_small(rule, "no patients"))?;
    let mut first_exam = date(2026, 1, 10) + Duration::days(rng.gen_range(0..200));
    while store.pregnancy_by_natural_key(&patient.tc, first_exam).is_some() {
        first_exam += Duration::days(1);
    }
    let id = store.next_id(Sequence::Pregnancy);
    let mut tx = Transaction::new();
    tx.insert(Pregnancy {
        id,
        patient_tc: patient.tc.clone(),
        first_exam_date: first_exam,
        parity_full_term: 0,
        parity_premature: 0,
        parity_abortions: 0,
        parity_live_births: 0,
        maternal_age_at_conception: years_between(patient.birth_date, first_exam).clamp(10, 60),
        art_used: None,
        prior_pregnancy_conditions: None,
        last_menstruation_date: None,
        expected_delivery_date: None,
    });
    if !bare {
        tx.insert(Examination {
            id: store.next_id(Sequence::Examination),
            pregnancy_id: id,
            examination_kind: ExaminationKind::FirstTrimester,
            exam_date: first_exam,
            gestational_age_days: 84,
            details: Default::default(),
        });
    }
    Ok((tx, id, first_exam))
}

fn build(store: &CanonicalStore, rule: RuleId, seed: u64, violating: bool) -> Result<Transaction, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match rule {
        RuleId::Cr1PregnancyFollowup => Ok(fresh_pregnancy(store, &mut rng, rule, violating)?.0),
        RuleId::Cr2TrimesterUniqueness => {
            let candidates: Vec<&Examination> = store
                .examinations()
                .values()
                .filter(|e| e.examination_kind == ExaminationKind::FirstTrimester)
                .collect();
            let target = *candidates.choose(&mut rng).ok_or_else(|| too_small(rule, "no first-trimester examination"))?;
            let kind = if violating { ExaminationKind::FirstTrimester } else { ExaminationKind::Other };
            let mut tx = Transaction::new();
            tx.insert(Examination {
                id: store.next_id(Sequence::Examination),
                pregnancy_id: target.pregnancy_id,
                examination_kind: kind,
                exam_date: target.exam_date + Duration::days(7),
                gestational_age_days: target.gestational_age_days + 7,
                details: Default::default(),
            });
            Ok(tx)
        }
        RuleId::Cr3ResultTypeCoherence => {
            let candidates: Vec<&ExaminationTest> = store
                .examination_tests()
                .values()
                .filter(|et| store.tests().get(&et.test_id).is_some_and(|t| t.result_type == ["numeric"]))
                .collect();
            let target = *candidates.choose(&mut rng).ok_or_else(|| too_small(rule, "no numeric test result"))?;
            let mut updated = target.clone();
            updated.result = if violating { "abc".into() } else { "2.5".into() };
            let mut tx = Transaction::new();
            tx.update(updated);
            Ok(tx)
        }
        RuleId::Cr4DeliverySpecialization => {
            let (mut tx, id, first_exam) = fresh_pregnancy(store, &mut rng, rule, false)?;
            let day = first_exam + Duration::days(200);
            tx.insert(Delivery {
                pregnancy_id: id,
                delivery_date: day,
                gestational_age_days: 280,
                robson_score: 2,
                placental_expulsion: PlacentalExpulsion::Spontaneous,
                analgesia: None,
                estimated_blood_loss_ml: 400,
                delivery_type: DeliveryType::ProgrammedCSection,
            })
            .insert(ProgrammedCSection { pregnancy_id: id, motivation: "breech presentation".into() });
            if violating {
                tx.insert(DeliveryWithLabor {
                    pregnancy_id: id,
                    delivery_subtype: DeliverySubtype::Natural,
                    motivation: None,
                    laceration: Laceration::None,
                    episiotomy: false,
                    episiotomy_motivation: None,
                    labor_start_time: at(day, 60),
                    expulsion_time: at(day, 300),
                    operative_instrument: None,
                });
            }
            Ok(tx)
        }
        RuleId::Cr5MeasurementNonempty => {
            let tracings: Vec<&Tracing> = store.tracings().values().collect();
            let tracing = *tracings.choose(&mut rng).ok_or_else(|| too_small(rule, "no tracing"))?;
            let last = store.measurements_of(tracing.tracing_id).map(|m| m.ts).max().unwrap_or(tracing.start_time);
            let mut tx = Transaction::new();
            tx.insert(Measurement {
                tracing_id: tracing.tracing_id,
                ts: last.plus_millis(250),
                maternal_heart_rate: (!violating).then_some(85),
                maternal_tocography: None,
            });
            Ok(tx)
        }
    }
}

/// A transaction that breaks exactly `rule` when applied to `store`.
pub fn inject_violation(store: &CanonicalStore, rule: RuleId, seed: u64) -> Result<Transaction, SynthError> {
    build(store, rule, seed, true)
}

/// The same shape of change as [`inject_violation`], adjusted to conform.
pub fn conforming_counterpart(store: &CanonicalStore, rule: RuleId, seed: u64) -> Result<Transaction, SynthError> {
    build(store, rule, seed, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{apply_transaction, full_scan, Check};

    #[test]
    fn empty_config_gives_empty_store() {
        assert!(generate(&SynthConfig::new(1, 0)).unwrap().is_empty());
    }

    #[test]
    fn generated_store_is_clean_and_deterministic() {
        let config = SynthConfig::new(42, 200);
        let a = generate(&config).unwrap();
        assert!(a.pregnancies().len() >= 200);
        assert_eq!(full_scan(&a), vec![]);
        assert_eq!(a.to_json(), generate(&config).unwrap().to_json());
        let years: std::collections::BTreeSet<i32> = a.deliveries().values().map(|d| d.delivery_date.year()).collect();
        assert!(years.len() >= 3, "{years:?}");
    }

    #[test]
    fn transactions_commit_one_by_one() {
        let mut store = CanonicalStore::new();
        for tx in transactions(&SynthConfig::new(7, 30)).unwrap() {
            store = apply_transaction(&store, &tx).unwrap();
        }
        assert_eq!(store, generate(&SynthConfig::new(7, 30)).unwrap());
    }

    #[test]
    fn invalid_configs_are_refused() {
        let mut c = SynthConfig::new(1, 5);
        c.delivery_mix.natural = 0.9;
        assert!(matches!(generate(&c), Err(SynthError::InvalidConfig(_))));
        let mut c = SynthConfig::new(1, 5);
        c.twin_probability = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn delivery_mix_is_respected() {
        let config = SynthConfig::new(3, 600);
        let store = generate(&config).unwrap();
        let n = store.deliveries().len() as f64;
        assert!(n >= 500.0);
        for (kind, p) in config.delivery_mix.weights() {
            let observed = store.deliveries().values().filter(|d| d.delivery_type == kind).count() as f64 / n;
            assert!((observed - p).abs() <= 0.05, "{kind}: {observed} vs {p}");
        }
    }

    #[test]
    fn injected_violations_hit_exactly_their_rule() {
        let store = generate(&SynthConfig::new(11, 40)).unwrap();
        for rule in RuleId::ALL {
            for seed in 0..3 {
                let tx = inject_violation(&store, rule, seed).unwrap();
                let err = apply_transaction(&store, &tx).unwrap_err();
                let rules: Vec<Check> = err.violations().iter().map(|v| v.rule).collect();
                assert_eq!(rules, vec![Check::Rule(rule)], "{rule} seed {seed}");

                let broken = force_apply(&store, &tx).unwrap();
                let scan: Vec<Check> = full_scan(&broken).iter().map(|v| v.rule).collect();
                assert_eq!(scan, vec![Check::Rule(rule)]);

                let ok = conforming_counterpart(&store, rule, seed).unwrap();
                apply_transaction(&store, &ok).unwrap();
            }
        }
    }

    #[test]
    fn tiny_store_cannot_host_violations() {
        let err = inject_violation(&CanonicalStore::new(), RuleId::Cr5MeasurementNonempty, 0).unwrap_err();
        assert!(matches!(err, SynthError::StoreTooSmall { .. }));
    }
}
