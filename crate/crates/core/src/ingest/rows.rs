//! Row mapping for the tabular sources.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use super::cells::{
    normalize_cell, reconcile_flag_value, Apgar, BoolEncoding, ColumnPolicy, Episode, Flag, Normalized, Typed,
    ValueKind, Vocabulary,
};
use super::realign::{realign_ehr_row, Domain, Realigned};
use super::{ConflictRecord, IngestError, SourceConfig, SourceKind};
use crate::constraint::Transaction;
use crate::model::*;
use crate::store::{CanonicalStore, Record, Sequence};
use crate::time::Timestamp;

pub(crate) struct ColumnSpec {
    pub target: &'static str,
    pub policy: ColumnPolicy,
    pub synonyms: &'static [&'static str],
}

fn spec(target: &'static str, kind: ValueKind, synonyms: &'static [&'static str]) -> ColumnSpec {
    ColumnSpec { target, policy: ColumnPolicy::new(kind), synonyms }
}

const ZERO_ONE: ValueKind = ValueKind::Flag { encoding: BoolEncoding::ZeroOne };
const PRESENCE: ValueKind = ValueKind::Flag { encoding: BoolEncoding::PresenceInteger };

fn identity() -> Vec<ColumnSpec> {
    vec![
        spec("patient_tc", ValueKind::Text, &["tax code", "codice fiscale", "cf", "tc", "patient tc"]),
        spec(
            "first_exam_date",
            ValueKind::Date,
            &["date of first exam", "first exam date", "data primo esame", "data prima visita"],
        ),
    ]
}

/// Every target a source kind understands, with its default policy and
/// header synonyms (English and Italian).
pub(crate) fn columns(kind: SourceKind) -> Vec<ColumnSpec> {
    use ValueKind::*;
    let mut out = identity();
    match kind {
        SourceKind::FirstTrimesterSheet => out.extend([
            spec("name", Text, &["nome", "first name"]),
            spec("surname", Text, &["cognome", "last name"]),
            spec("birth_date", Date, &["birth date", "date of birth", "data di nascita"]),
            spec("gestational_age_days", Integer, &["gestational age days", "ga days", "epoca gestazionale giorni"]),
            spec("maternal_age", Integer, &["maternal age", "eta materna", "age at conception"]),
            spec("parity_full_term", Integer, &["full term births", "parti a termine"]),
            spec("parity_premature", Integer, &["premature births", "parti pretermine"]),
            spec("parity_abortions", Integer, &["abortions", "aborti"]),
            spec("parity_live_births", Integer, &["live births", "living children", "figli viventi"]),
            spec("art", ZERO_ONE, &["art", "pma"]),
            spec("last_menstruation_date", Date, &["last menstruation", "lmp", "ultima mestruazione"]),
            spec("nuchal_translucency", Decimal, &["nt", "nuchal translucency", "translucenza nucale"]),
            ColumnSpec {
                target: "genetic_tests_outcome",
                policy: ColumnPolicy::new(Text).missing(&["0"]),
                synonyms: &["outcome of genetic tests", "esito test genetici"],
            },
            spec(
                "premorphological_indicated",
                FlagWithReason { encoding: BoolEncoding::ZeroOne },
                &["premorph ultr indicated", "premorphological ultrasound indicated", "ecografia premorfologica indicata"],
            ),
            spec("nipt", ZERO_ONE, &["nipt"]),
            ColumnSpec {
                target: "nipt_outcome",
                policy: ColumnPolicy::new(Text).missing(&["0"]),
                synonyms: &["outcome", "nipt outcome", "esito", "esito nipt"],
            },
        ]),
        SourceKind::DeliverySheet => out.extend([
            spec("delivery_date", Date, &["delivery date", "data parto"]),
            spec("gestational_age_days", Integer, &["gestational age days", "ga days", "epoca gestazionale giorni"]),
            spec("robson_score", Integer, &["robson", "robson class", "classe di robson"]),
            spec(
                "placental_expulsion",
                Choice { vocabulary: Vocabulary::PlacentalExpulsion },
                &["placental expulsion", "secondamento"],
            ),
            spec("blood_loss_ml", Integer, &["blood loss ml", "blood loss", "perdita ematica ml", "perdite ematiche"]),
            spec("delivery_mode", Choice { vocabulary: Vocabulary::DeliveryMode }, &["mode", "delivery mode", "modalita parto"]),
            spec("delivery_motivation", Text, &["indication", "delivery motivation", "indicazione"]),
            spec("operative_instrument", Choice { vocabulary: Vocabulary::Instrument }, &["instrument", "strumento"]),
            spec("labor_start_time", Timestamp, &["labor start", "labour start", "inizio travaglio"]),
            spec("expulsion_time", Timestamp, &["expulsion", "expulsion time", "espulsione"]),
            spec("laceration", Choice { vocabulary: Vocabulary::Laceration }, &["laceration", "lacerazione"]),
            spec("episiotomy", ZERO_ONE, &["episiotomy", "episiotomia"]),
            spec("episiotomy_motivation", Text, &["motivation", "episiotomy motivation", "motivazione"]),
            spec("analgesia", ValueKind::Flag { encoding: BoolEncoding::YesNo }, &["analgesia", "parto analgesia"]),
            spec("analgesia_type", Text, &["type", "analgesia type", "tipo"]),
            spec("apgar", Apgar, &["apgar score", "apgar"]),
            spec("birth_time", Timestamp, &["birth time", "ora nascita", "time of birth"]),
            spec("weight_g", Integer, &["weight g", "weight gr", "weight", "peso", "peso g"]),
            spec("length_cm", Decimal, &["length cm", "length", "lunghezza", "lunghezza cm"]),
            spec("ph", Decimal, &["ph", "arterial ph", "ph arterioso"]),
        ]),
        SourceKind::EhrExport => out.extend([
            spec("exam_date", Date, &["exam date", "visit date", "data visita"]),
            spec("gestational_age_days", Integer, &["gestational age days", "ga days", "epoca gestazionale giorni"]),
            spec("outcome", Coded, &["outcome", "esito"]),
            spec("pih", PRESENCE, &["pih"]),
            spec("art", PRESENCE, &["art", "pma"]),
            spec("gdm", PRESENCE, &["gdm"]),
            spec("thyropathy", PRESENCE, &["thyropathy", "tireopatia"]),
            spec("birth_time", Timestamp, &["birth time", "ora nascita", "time of birth"]),
            spec("newborn_section", Marker, &["newborn section", "sezione neonato"]),
            spec("apgar_1", Integer, &["apgar 1", "apgar1"]),
            spec("apgar_5", Integer, &["apgar 5", "apgar5"]),
            spec("apgar_10", Integer, &["apgar 10", "apgar10"]),
            spec("weight_g", Integer, &["weight gr", "weight g", "weight", "peso"]),
        ]),
        SourceKind::CtgExport => {
            out.clear();
            out.extend([
                spec("time", Text, &["time", "t", "seconds", "timestamp", "tempo"]),
                spec("maternal_heart_rate", Integer, &["mhr", "maternal heart rate", "fc materna"]),
                spec("maternal_tocography", Decimal, &["toco", "uc", "maternal tocography", "tocografia"]),
            ]);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Layout {
    FirstTrimester,
    Delivery,
    EhrOutcomes,
    EhrNewborn,
}

const NEWBORN_SECTION: [&str; 5] = ["newborn_section", "apgar_1", "apgar_5", "apgar_10", "weight_g"];

pub(crate) fn layout(kind: SourceKind, columns: &BTreeMap<String, usize>) -> Result<Layout, IngestError> {
    let (layout, required): (Layout, &[&str]) = match kind {
        SourceKind::FirstTrimesterSheet => (
            Layout::FirstTrimester,
            &[
                "patient_tc",
                "first_exam_date",
                "name",
                "surname",
                "birth_date",
                "gestational_age_days",
                "maternal_age",
                "parity_full_term",
                "parity_premature",
                "parity_abortions",
                "parity_live_births",
            ],
        ),
        SourceKind::DeliverySheet => (
            Layout::Delivery,
            &[
                "patient_tc",
                "first_exam_date",
                "delivery_date",
                "gestational_age_days",
                "robson_score",
                "placental_expulsion",
                "blood_loss_ml",
                "delivery_mode",
                "apgar",
                "birth_time",
                "weight_g",
            ],
        ),
        SourceKind::EhrExport if columns.contains_key("newborn_section") => (
            Layout::EhrNewborn,
            &["patient_tc", "first_exam_date", "birth_time", "newborn_section", "apgar_1", "apgar_5", "apgar_10", "weight_g"],
        ),
        SourceKind::EhrExport => {
            (Layout::EhrOutcomes, &["patient_tc", "first_exam_date", "exam_date", "gestational_age_days"])
        }
        SourceKind::CtgExport => unreachable!("CTG exports are handled column-wise"),
    };
    let missing: Vec<&str> = required.iter().copied().filter(|t| !columns.contains_key(*t)).collect();
    if !missing.is_empty() {
        return Err(IngestError::UnknownLayout(format!("{kind} source lacks columns for {}", missing.join(", "))));
    }
    if layout == Layout::EhrNewborn {
        let first = columns[NEWBORN_SECTION[0]];
        if NEWBORN_SECTION.iter().enumerate().any(|(i, t)| columns[*t] != first + i) {
            return Err(IngestError::UnknownLayout(
                "newborn section columns must be adjacent and in order: section, apgar 1, apgar 5, apgar 10, weight".into(),
            ));
        }
    }
    Ok(layout)
}

pub(crate) struct Row<'a> {
    pub cells: &'a [String],
    pub columns: &'a BTreeMap<String, usize>,
    pub config: &'a SourceConfig,
}

fn mismatch(target: &str, got: &Typed) -> String {
    format!("{target}: configured column kind yields {got:?}, which this field cannot hold")
}

impl Row<'_> {
    fn raw(&self, target: &str) -> Option<&str> {
        self.columns.get(target).map(|&i| self.cells.get(i).map(String::as_str).unwrap_or(""))
    }

    fn get(&self, target: &str) -> Result<Option<Typed>, String> {
        let Some(raw) = self.raw(target) else { return Ok(None) };
        let policy = self.config.column_policies.get(target).ok_or_else(|| format!("{target}: no column policy"))?;
        match normalize_cell(raw, policy) {
            Normalized::Missing => Ok(None),
            Normalized::Value(v) => Ok(Some(v)),
            Normalized::Conflict { token, reason } => Err(format!("{target}: `{token}` {reason}")),
        }
    }

    fn text(&self, target: &str) -> Result<Option<String>, String> {
        match self.get(target)? {
            None => Ok(None),
            Some(Typed::Text(s) | Typed::Code(s)) => Ok(Some(s)),
            Some(Typed::Int(i)) => Ok(Some(i.to_string())),
            Some(other) => Err(mismatch(target, &other)),
        }
    }

    fn int(&self, target: &str) -> Result<Option<i32>, String> {
        match self.get(target)? {
            None => Ok(None),
            Some(Typed::Int(i)) => i32::try_from(i).map(Some).map_err(|_| format!("{target}: {i} out of range")),
            Some(other) => Err(mismatch(target, &other)),
        }
    }

    fn decimal(&self, target: &str) -> Result<Option<f64>, String> {
        match self.get(target)? {
            None => Ok(None),
            Some(Typed::Decimal(x)) => Ok(Some(x)),
            Some(Typed::Int(i)) => Ok(Some(i as f64)),
            Some(other) => Err(mismatch(target, &other)),
        }
    }

    fn date(&self, target: &str) -> Result<Option<NaiveDate>, String> {
        match self.get(target)? {
            None => Ok(None),
            Some(Typed::Date(d)) => Ok(Some(d)),
            Some(Typed::Timestamp(t)) => Ok(Some(t.date())),
            Some(other) => Err(mismatch(target, &other)),
        }
    }

    fn timestamp(&self, target: &str) -> Result<Option<Timestamp>, String> {
        match self.get(target)? {
            None => Ok(None),
            Some(Typed::Timestamp(t)) => Ok(Some(t)),
            Some(other) => Err(mismatch(target, &other)),
        }
    }

    fn flag(&self, target: &str) -> Result<Option<Flag>, String> {
        match self.get(target)? {
            None => Ok(None),
            Some(Typed::Flag(f)) => Ok(Some(f)),
            Some(other) => Err(mismatch(target, &other)),
        }
    }

    fn apgar(&self, target: &str) -> Result<Option<Apgar>, String> {
        match self.get(target)? {
            None => Ok(None),
            Some(Typed::Apgar(a)) => Ok(Some(a)),
            Some(other) => Err(mismatch(target, &other)),
        }
    }

    fn choice<T: std::str::FromStr>(&self, target: &str) -> Result<Option<T>, String> {
        match self.get(target)? {
            None => Ok(None),
            Some(Typed::Choice(c)) => c.parse().map(Some).map_err(|_| format!("{target}: `{c}` not applicable")),
            Some(other) => Err(mismatch(target, &other)),
        }
    }
}

fn required<T>(target: &str, v: Result<Option<T>, String>) -> Result<T, String> {
    v?.ok_or_else(|| format!("{target} is missing"))
}

/// Result of mapping one row, before the constraint engine sees it.
pub(crate) struct Mapped {
    pub tx: Transaction,
    pub repairs: Vec<String>,
    pub conflicts: Vec<ConflictRecord>,
}

/// Accumulates an upsert transaction against a fixed store.
struct Builder<'s> {
    store: &'s CanonicalStore,
    tx: Transaction,
    next: BTreeMap<Sequence, i64>,
    tests: BTreeMap<String, TestId>,
    conditions: BTreeMap<String, ConditionId>,
    repairs: Vec<String>,
    conflicts: Vec<ConflictRecord>,
}

impl<'s> Builder<'s> {
    fn new(store: &'s CanonicalStore) -> Self {
        Builder {
            store,
            tx: Transaction::new(),
            next: BTreeMap::new(),
            tests: BTreeMap::new(),
            conditions: BTreeMap::new(),
            repairs: Vec::new(),
            conflicts: Vec::new(),
        }
    }

    /// Insert when new, update when changed, nothing when identical.
    fn upsert(&mut self, record: impl Into<Record>) {
        let record = record.into();
        match self.store.get(&record.key()) {
            Some(old) if old == record => {}
            Some(_) => {
                self.tx.update(record);
            }
            None => {
                self.tx.insert(record);
            }
        }
    }

    fn fresh(&mut self, seq: Sequence) -> i64 {
        let store = self.store;
        let n = self.next.entry(seq).or_insert_with(|| store.next_id(seq));
        let id = *n;
        *n += 1;
        id
    }

    fn test(&mut self, name: &str, result_type: &[&str]) -> TestId {
        if let Some(t) = self.store.test_by_name(name) {
            return t.id;
        }
        if let Some(&id) = self.tests.get(name) {
            return id;
        }
        let id = self.fresh(Sequence::Test);
        self.tests.insert(name.to_string(), id);
        self.tx.insert(Test { id, name: name.into(), result_type: result_type.iter().map(|s| s.to_string()).collect() });
        id
    }

    fn condition(&mut self, name: &str) -> ConditionId {
        if let Some(c) = self.store.condition_by_name(name) {
            return c.id;
        }
        if let Some(&id) = self.conditions.get(name) {
            return id;
        }
        let id = self.fresh(Sequence::Condition);
        self.conditions.insert(name.to_string(), id);
        self.tx.insert(Condition { id, name: name.into() });
        id
    }

    fn conflict(&mut self, field: &str, values: Vec<String>) {
        self.conflicts.push(ConflictRecord { row: 0, field: field.into(), values });
    }

    fn finish(self) -> Mapped {
        Mapped { tx: self.tx, repairs: self.repairs, conflicts: self.conflicts }
    }
}

pub(crate) const GENETIC_TEST: &str = "Genetic tests";
pub(crate) const NIPT_OUTCOME_TEST: &str = "NIPT outcome";
pub(crate) const NIPT_OUTCOMES: [&str; 2] = ["A", "B"];
pub(crate) const NT_TEST: &str = "Nuchal translucency";

pub(crate) fn map_row(layout: Layout, row: &Row<'_>, store: &CanonicalStore) -> Result<Mapped, String> {
    match layout {
        Layout::FirstTrimester => first_trimester(row, store),
        Layout::Delivery => delivery(row, store),
        Layout::EhrOutcomes => ehr_outcomes(row, store),
        Layout::EhrNewborn => ehr_newborn(row, store),
    }
}

fn identity_of(row: &Row<'_>) -> Result<(TaxCode, NaiveDate), String> {
    let tc = TaxCode::new(required("patient_tc", row.text("patient_tc"))?);
    let first = required("first_exam_date", row.date("first_exam_date"))?;
    Ok((tc, first))
}

fn existing_pregnancy<'s>(store: &'s CanonicalStore, tc: &TaxCode, first: NaiveDate) -> Result<&'s Pregnancy, String> {
    store
        .pregnancy_by_natural_key(tc, first)
        .ok_or_else(|| format!("no pregnancy for patient {tc} with first exam on {first}"))
}

fn flag_text(f: bool) -> String {
    f.to_string()
}

fn first_trimester(row: &Row<'_>, store: &CanonicalStore) -> Result<Mapped, String> {
    let mut b = Builder::new(store);
    let (tc, first) = identity_of(row)?;

    b.upsert(Patient {
        tc: tc.clone(),
        name: required("name", row.text("name"))?,
        surname: required("surname", row.text("surname"))?,
        birth_date: required("birth_date", row.date("birth_date"))?,
    });

    let art = row.flag("art")?.map(|f| f.value);
    let lmp = row.date("last_menstruation_date")?;
    let counts = (
        required("parity_full_term", row.int("parity_full_term"))?,
        required("parity_premature", row.int("parity_premature"))?,
        required("parity_abortions", row.int("parity_abortions"))?,
        required("parity_live_births", row.int("parity_live_births"))?,
    );
    let age = required("maternal_age", row.int("maternal_age"))?;
    let pregnancy = match store.pregnancy_by_natural_key(&tc, first) {
        Some(p) => Pregnancy {
            parity_full_term: counts.0,
            parity_premature: counts.1,
            parity_abortions: counts.2,
            parity_live_births: counts.3,
            maternal_age_at_conception: age,
            art_used: art.or(p.art_used),
            last_menstruation_date: lmp.or(p.last_menstruation_date),
            ..p.clone()
        },
        None => Pregnancy {
            id: b.fresh(Sequence::Pregnancy),
            patient_tc: tc.clone(),
            first_exam_date: first,
            parity_full_term: counts.0,
            parity_premature: counts.1,
            parity_abortions: counts.2,
            parity_live_births: counts.3,
            maternal_age_at_conception: age,
            art_used: art,
            prior_pregnancy_conditions: None,
            last_menstruation_date: lmp,
            expected_delivery_date: None,
        },
    };
    let pregnancy_id = pregnancy.id;
    b.upsert(pregnancy);

    let old = store.examinations_of(pregnancy_id).find(|e| e.examination_kind == ExaminationKind::FirstTrimester);
    let mut exam = match old {
        Some(e) => e.clone(),
        None => Examination {
            id: b.fresh(Sequence::Examination),
            pregnancy_id,
            examination_kind: ExaminationKind::FirstTrimester,
            exam_date: first,
            gestational_age_days: 0,
            details: BTreeMap::new(),
        },
    };
    exam.gestational_age_days = required("gestational_age_days", row.int("gestational_age_days"))?;

    if let Some(f) = row.flag("premorphological_indicated")? {
        exam.details.insert("premorphological_ultrasound_indicated".into(), flag_text(f.value));
        if let Some(reason) = f.note {
            exam.details.insert("premorphological_ultrasound_reason".into(), reason);
        }
    }
    let nipt = row.flag("nipt")?.map(|f| f.value);
    if let Some(v) = nipt {
        exam.details.insert("nipt_performed".into(), flag_text(v));
    }
    let outcome = row.text("nipt_outcome")?;
    let reconciled = reconcile_flag_value(nipt, outcome.as_deref());
    match reconciled.episode {
        Episode::Conflict => b.conflict(
            "nipt",
            vec![
                format!("NIPT={}", nipt.map(|v| if v { "1" } else { "0" }).unwrap_or("missing")),
                format!("Outcome={}", reconciled.value.clone().unwrap_or_default()),
            ],
        ),
        Episode::FlagOnly => {
            exam.details.insert("nipt_outcome".into(), "pending".into());
        }
        Episode::Consistent => {}
    }
    let exam_id = exam.id;
    b.upsert(exam);

    if let (Episode::Consistent, Some(result)) = (reconciled.episode, reconciled.value) {
        let test_id = b.test(NIPT_OUTCOME_TEST, &NIPT_OUTCOMES);
        b.upsert(ExaminationTest { examination_id: exam_id, test_id, result });
    }
    if let Some(result) = row.text("genetic_tests_outcome")? {
        let test_id = b.test(GENETIC_TEST, &["string"]);
        b.upsert(ExaminationTest { examination_id: exam_id, test_id, result });
    }
    if let Some(nt) = row.decimal("nuchal_translucency")? {
        let test_id = b.test(NT_TEST, &["numeric"]);
        b.upsert(ExaminationTest { examination_id: exam_id, test_id, result: crate::value::format_float(nt) });
    }
    Ok(b.finish())
}

fn delivery(row: &Row<'_>, store: &CanonicalStore) -> Result<Mapped, String> {
    let mut b = Builder::new(store);
    let (tc, first) = identity_of(row)?;
    let pregnancy_id = existing_pregnancy(store, &tc, first)?.id;
    let mode: DeliveryType = required("delivery_mode", row.choice("delivery_mode"))?;

    let analgesia_flag = row.flag("analgesia")?.map(|f| f.value);
    let analgesia_type = row.text("analgesia_type")?;
    let analgesia = reconcile_flag_value(analgesia_flag, analgesia_type.as_deref());
    let analgesia = match analgesia.episode {
        Episode::Conflict => {
            b.conflict(
                "analgesia",
                vec![
                    format!("Analgesia={}", row.raw("analgesia").unwrap_or("").trim()),
                    format!("Type={}", analgesia.value.unwrap_or_default()),
                ],
            );
            None
        }
        Episode::FlagOnly => {
            b.repairs.push("analgesia: flag set without a type, recorded as `unspecified`".into());
            Some("unspecified".to_string())
        }
        Episode::Consistent => analgesia.value,
    };

    b.upsert(Delivery {
        pregnancy_id,
        delivery_date: required("delivery_date", row.date("delivery_date"))?,
        gestational_age_days: required("gestational_age_days", row.int("gestational_age_days"))?,
        robson_score: required("robson_score", row.int("robson_score"))?,
        placental_expulsion: required("placental_expulsion", row.choice("placental_expulsion"))?,
        analgesia,
        estimated_blood_loss_ml: required("blood_loss_ml", row.int("blood_loss_ml"))?,
        delivery_type: mode,
    });

    let motivation = row.text("delivery_motivation")?;
    let subtype = match mode {
        DeliveryType::ProgrammedCSection => None,
        DeliveryType::Natural => Some(DeliverySubtype::Natural),
        DeliveryType::Operative => Some(DeliverySubtype::Operative),
        DeliveryType::EmergencyCSection => Some(DeliverySubtype::EmergencyCSection),
    };
    match subtype {
        None => b.upsert(ProgrammedCSection {
            pregnancy_id,
            motivation: motivation.ok_or("a programmed C-section needs delivery_motivation")?,
        }),
        Some(subtype) => {
            let flag = row.flag("episiotomy")?.map(|f| f.value);
            let why = row.text("episiotomy_motivation")?;
            let ep = reconcile_flag_value(flag, why.as_deref());
            let (episiotomy, episiotomy_motivation) = match ep.episode {
                Episode::Conflict => {
                    b.conflict(
                        "episiotomy",
                        vec![
                            format!("Episiotomy={}", row.raw("episiotomy").unwrap_or("").trim()),
                            format!("Motivation={}", ep.value.clone().unwrap_or_default()),
                        ],
                    );
                    (false, None)
                }
                Episode::FlagOnly => (true, None),
                Episode::Consistent if flag.is_none() => {
                    b.repairs.push("episiotomy: flag and motivation both blank, recorded as no episiotomy".into());
                    (false, None)
                }
                Episode::Consistent => (ep.value.is_some(), ep.value),
            };
            let instrument = row.choice::<OperativeInstrument>("operative_instrument")?;
            let mut dwl = DeliveryWithLabor {
                pregnancy_id,
                delivery_subtype: subtype,
                motivation,
                laceration: row.choice("laceration")?.unwrap_or(Laceration::None),
                episiotomy,
                episiotomy_motivation,
                labor_start_time: required("labor_start_time", row.timestamp("labor_start_time"))?,
                expulsion_time: required("expulsion_time", row.timestamp("expulsion_time"))?,
                operative_instrument: instrument,
            };
            // Twins arrive as two rows; keep the most interventional subtype.
            if let Some(old) = store.deliveries_with_labor().get(&pregnancy_id) {
                if old.delivery_subtype > dwl.delivery_subtype {
                    return Err(format!(
                        "delivery mode {subtype} disagrees with the recorded {} for this pregnancy",
                        old.delivery_subtype
                    ));
                }
                dwl.episiotomy |= old.episiotomy;
                dwl.episiotomy_motivation = dwl.episiotomy_motivation.or(old.episiotomy_motivation.clone());
            }
            b.upsert(dwl);
        }
    }

    let apgar = required("apgar", row.apgar("apgar"))?;
    b.upsert(Newborn {
        pregnancy_id,
        birth_time: required("birth_time", row.timestamp("birth_time"))?,
        weight_g: required("weight_g", row.int("weight_g"))?,
        length_cm: row.decimal("length_cm")?,
        apgar_1: apgar.apgar_1,
        apgar_5: apgar.apgar_5,
        apgar_10: apgar.apgar_10,
        ph: row.decimal("ph")?,
    });
    Ok(b.finish())
}

const EHR_CONDITIONS: [(&str, &str); 3] =
    [("pih", "Pregnancy-induced hypertension"), ("gdm", "Gestational diabetes"), ("thyropathy", "Thyropathy")];

fn ehr_outcomes(row: &Row<'_>, store: &CanonicalStore) -> Result<Mapped, String> {
    let mut b = Builder::new(store);
    let (tc, first) = identity_of(row)?;
    let pregnancy = existing_pregnancy(store, &tc, first)?;
    let exam_date = required("exam_date", row.date("exam_date"))?;

    // The presence integers are the export's own pregnancy identifier, so
    // every set flag in a row must carry the same one.
    let mut flags: BTreeMap<&str, Flag> = BTreeMap::new();
    for name in ["pih", "art", "gdm", "thyropathy"] {
        if let Some(f) = row.flag(name)? {
            flags.insert(name, f);
        }
    }
    let refs: std::collections::BTreeSet<&str> = flags.values().filter_map(|f| f.note.as_deref()).collect();
    if refs.len() > 1 {
        b.conflict(
            "pregnancy_ref",
            flags.iter().filter_map(|(k, f)| f.note.as_ref().map(|n| format!("{}={n}", k.to_uppercase()))).collect(),
        );
    }

    let old = store
        .examinations_of(pregnancy.id)
        .find(|e| e.examination_kind == ExaminationKind::Other && e.exam_date == exam_date && e.details.get("source").map(String::as_str) == Some("ehr_export"));
    let mut exam = match old {
        Some(e) => e.clone(),
        None => Examination {
            id: b.fresh(Sequence::Examination),
            pregnancy_id: pregnancy.id,
            examination_kind: ExaminationKind::Other,
            exam_date,
            gestational_age_days: 0,
            details: BTreeMap::from([("source".to_string(), "ehr_export".to_string())]),
        },
    };
    exam.gestational_age_days = required("gestational_age_days", row.int("gestational_age_days"))?;
    if let Some(code) = row.text("outcome")? {
        exam.details.insert("outcome".into(), code);
    }
    if let Some(r) = refs.iter().next() {
        exam.details.insert("ehr_pregnancy_ref".into(), r.to_string());
    }
    b.upsert(exam);

    for (column, name) in EHR_CONDITIONS {
        if flags.get(column).is_some_and(|f| f.value) {
            let condition_id = b.condition(name);
            let therapy = store
                .condition_links()
                .get(&(pregnancy.id, condition_id))
                .and_then(|l| l.therapy.clone());
            b.upsert(ConditionLink { pregnancy_id: pregnancy.id, condition_id, therapy });
        }
    }
    if let Some(art) = flags.get("art") {
        b.upsert(Pregnancy { art_used: Some(art.value), ..pregnancy.clone() });
    }
    Ok(b.finish())
}

fn ehr_newborn(row: &Row<'_>, store: &CanonicalStore) -> Result<Mapped, String> {
    let start = row.columns["newborn_section"];
    let section: Vec<String> =
        (start..start + NEWBORN_SECTION.len()).map(|i| row.cells.get(i).cloned().unwrap_or_default()).collect();
    let domains = [
        Domain::Marker,
        Domain::Int { min: 0, max: 10, required: true },
        Domain::Int { min: 0, max: 10, required: true },
        Domain::Int { min: 0, max: 10, required: false },
        Domain::Int { min: 200, max: 7000, required: true },
    ];
    let (cells, shift) = match realign_ehr_row(&section, &row.config.section_marker, &domains) {
        Realigned::Aligned { cells, shift } => (cells, shift),
        Realigned::Quarantine { reason } => return Err(reason),
    };

    let mut b = Builder::new(store);
    if shift != 0 {
        b.repairs.push(format!("newborn section: cells shifted by {shift:+} to realign with the section label"));
    }
    let (tc, first) = identity_of(row)?;
    let pregnancy_id = existing_pregnancy(store, &tc, first)?.id;
    let birth_time = required("birth_time", row.timestamp("birth_time"))?;
    if !store.deliveries().contains_key(&pregnancy_id) {
        return Err(format!("pregnancy id={pregnancy_id} has no delivery to attach a newborn to"));
    }
    let int = |i: usize| cells[i].as_deref().map(|c| c.parse::<i32>().expect("domain-checked integer"));
    let (apgar_1, apgar_5, apgar_10, weight) = (int(1), int(2), int(3), int(4));
    let newborn = match store.newborns().get(&(pregnancy_id, birth_time)) {
        Some(n) => Newborn {
            apgar_1: apgar_1.unwrap_or(n.apgar_1),
            apgar_5: apgar_5.unwrap_or(n.apgar_5),
            apgar_10: apgar_10.or(n.apgar_10),
            weight_g: weight.unwrap_or(n.weight_g),
            ..n.clone()
        },
        None => Newborn {
            pregnancy_id,
            birth_time,
            weight_g: weight.ok_or("weight_g is missing")?,
            length_cm: None,
            apgar_1: apgar_1.ok_or("apgar_1 is missing")?,
            apgar_5: apgar_5.ok_or("apgar_5 is missing")?,
            apgar_10,
            ph: None,
        },
    };
    b.upsert(newborn);
    Ok(b.finish())
}
