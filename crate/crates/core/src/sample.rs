//! A small, valid, hand-built store touching every relation.
//!
//! Three patients, four pregnancies: a programmed C-section (2024), an
//! induced labor ending in an emergency C-section (2024), a natural twin
//! delivery (2023), and an ongoing pregnancy with examinations only.

use chrono::NaiveDate;

use crate::constraint::{force_apply, Transaction};
use crate::model::*;
use crate::store::CanonicalStore;
use crate::time::Timestamp;

fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).expect("valid sample date")
}

fn ts(y: i32, m: u32, day: u32, h: u32, min: u32) -> Timestamp {
    Timestamp::from_ymd_hms(y, m, day, h, min, 0).expect("valid sample timestamp")
}

pub const TC_ROSSI: &str = "RSSMRA80A41L483X";
pub const TC_BIANCHI: &str = "BNCGLI85C50F205Z";
pub const TC_VERDI: &str = "VRDLRA90E60H501Y";

fn pregnancy(id: i64, tc: &str, first_exam: NaiveDate, age: i32) -> Pregnancy {
    Pregnancy {
        id,
        patient_tc: TaxCode::new(tc),
        first_exam_date: first_exam,
        parity_full_term: 0,
        parity_premature: 0,
        parity_abortions: 0,
        parity_live_births: 0,
        maternal_age_at_conception: age,
        art_used: Some(false),
        prior_pregnancy_conditions: None,
        last_menstruation_date: None,
        expected_delivery_date: None,
    }
}

fn exam(id: i64, pregnancy_id: i64, kind: ExaminationKind, date: NaiveDate, ga: i32) -> Examination {
    Examination { id, pregnancy_id, examination_kind: kind, exam_date: date, gestational_age_days: ga, details: Default::default() }
}

fn et(examination_id: i64, test_id: i64, result: &str) -> ExaminationTest {
    ExaminationTest { examination_id, test_id, result: result.into() }
}

fn newborn(pregnancy_id: i64, birth_time: Timestamp, weight_g: i32, ph: Option<f64>) -> Newborn {
    Newborn {
        pregnancy_id,
        birth_time,
        weight_g,
        length_cm: Some(50.0),
        apgar_1: 8,
        apgar_5: 9,
        apgar_10: None,
        ph,
    }
}

/// Every sample record in one transaction.
pub fn sample_transaction() -> Transaction {
    let mut tx = Transaction::new();
    for (tc, name, surname, birth) in [
        (TC_ROSSI, "Maria", "Rossi", d(1980, 1, 1)),
        (TC_BIANCHI, "Giulia", "Bianchi", d(1985, 3, 10)),
        (TC_VERDI, "Laura", "Verdi", d(1990, 5, 20)),
    ] {
        tx.insert(Patient { tc: TaxCode::new(tc), name: name.into(), surname: surname.into(), birth_date: birth });
    }
    tx.insert(Condition { id: 1, name: "Gestational diabetes".into() })
        .insert(Condition { id: 2, name: "Pregnancy-induced hypertension".into() })
        .insert(Test { id: 1, name: "Nuchal translucency".into(), result_type: vec!["numeric".into()] })
        .insert(Test { id: 2, name: "Combined test".into(), result_type: vec!["low_risk".into(), "high_risk".into()] })
        .insert(Test { id: 3, name: "Notes".into(), result_type: vec!["string".into()] });

    let mut p1 = pregnancy(1, TC_ROSSI, d(2023, 11, 2), 43);
    p1.last_menstruation_date = Some(d(2023, 9, 10));
    p1.expected_delivery_date = Some(d(2024, 6, 16));
    let mut p2 = pregnancy(2, TC_BIANCHI, d(2023, 12, 5), 38);
    p2.parity_full_term = 1;
    p2.parity_live_births = 1;
    let mut p3 = pregnancy(3, TC_VERDI, d(2022, 10, 3), 32);
    p3.art_used = Some(true);
    let mut p4 = pregnancy(4, TC_ROSSI, d(2025, 1, 15), 44);
    p4.parity_full_term = 1;
    p4.parity_live_births = 1;
    p4.prior_pregnancy_conditions = Some("previous caesarean".into());
    tx.insert(p1).insert(p2).insert(p3).insert(p4);

    tx.insert(ConditionLink { pregnancy_id: 2, condition_id: 2, therapy: Some("labetalol".into()) })
        .insert(ConditionLink { pregnancy_id: 3, condition_id: 1, therapy: None });

    let mut biometric = exam(5, 3, ExaminationKind::BiometricUltrasound, d(2023, 2, 10), 210);
    biometric.details.insert("fetal_count".into(), "2".into());
    tx.insert(exam(1, 1, ExaminationKind::FirstTrimester, d(2023, 11, 2), 84))
        .insert(exam(2, 1, ExaminationKind::SecondTrimester, d(2024, 1, 20), 163))
        .insert(exam(3, 2, ExaminationKind::FirstTrimester, d(2023, 12, 5), 90))
        .insert(exam(4, 3, ExaminationKind::FirstTrimester, d(2022, 10, 3), 86))
        .insert(biometric)
        .insert(exam(6, 4, ExaminationKind::FirstTrimester, d(2025, 1, 15), 80));
    tx.insert(et(1, 1, "1.8"))
        .insert(et(1, 2, "low_risk"))
        .insert(et(3, 1, "2.1"))
        .insert(et(4, 3, "twin pregnancy"))
        .insert(et(6, 1, "1.5"));

    // Pregnancy 1: programmed C-section.
    tx.insert(Delivery {
        pregnancy_id: 1,
        delivery_date: d(2024, 6, 14),
        gestational_age_days: 274,
        robson_score: 5,
        placental_expulsion: PlacentalExpulsion::Manual,
        analgesia: Some("spinal".into()),
        estimated_blood_loss_ml: 600,
        delivery_type: DeliveryType::ProgrammedCSection,
    })
    .insert(ProgrammedCSection { pregnancy_id: 1, motivation: "breech presentation".into() })
    .insert(newborn(1, ts(2024, 6, 14, 9, 30), 3250, Some(7.31)));

    // Pregnancy 2: induced labor, emergency C-section.
    tx.insert(Delivery {
        pregnancy_id: 2,
        delivery_date: d(2024, 7, 20),
        gestational_age_days: 287,
        robson_score: 4,
        placental_expulsion: PlacentalExpulsion::Manual,
        analgesia: Some("epidural".into()),
        estimated_blood_loss_ml: 800,
        delivery_type: DeliveryType::EmergencyCSection,
    })
    .insert(DeliveryWithLabor {
        pregnancy_id: 2,
        delivery_subtype: DeliverySubtype::EmergencyCSection,
        motivation: Some("non-reassuring CTG".into()),
        laceration: Laceration::None,
        episiotomy: false,
        episiotomy_motivation: None,
        labor_start_time: ts(2024, 7, 19, 22, 0),
        expulsion_time: ts(2024, 7, 20, 4, 10),
        operative_instrument: None,
    })
    .insert(Induction {
        pregnancy_id: 2,
        administration_time: ts(2024, 7, 19, 8, 0),
        method: "dinoprostone".into(),
        drug_dosage: Some("10 mg".into()),
        completion_rate: Some(0.5),
    })
    .insert(Induction {
        pregnancy_id: 2,
        administration_time: ts(2024, 7, 19, 20, 0),
        method: "oxytocin".into(),
        drug_dosage: Some("2 mU/min".into()),
        completion_rate: Some(1.0),
    })
    .insert(newborn(2, ts(2024, 7, 20, 4, 10), 3480, Some(7.05)))
    .insert(Tracing { tracing_id: 1, pregnancy_id: 2, start_time: ts(2024, 7, 20, 2, 0) });
    let start = ts(2024, 7, 20, 2, 0);
    for i in 0..8 {
        let t = start.plus_millis(250 * i);
        tx.insert(Measurement {
            tracing_id: 1,
            ts: t,
            maternal_heart_rate: Some(88 + i as i32),
            maternal_tocography: Some(12.5),
        })
        .insert(NewbornMeasurement {
            tracing_id: 1,
            ts: t,
            pregnancy_id: 2,
            birth_time: ts(2024, 7, 20, 4, 10),
            fetal_heart_rate: 140 - i as i32,
        });
    }

    // Pregnancy 3: natural twin delivery.
    let twin_a = ts(2023, 5, 2, 11, 0);
    let twin_b = ts(2023, 5, 2, 11, 12);
    tx.insert(Delivery {
        pregnancy_id: 3,
        delivery_date: d(2023, 5, 2),
        gestational_age_days: 252,
        robson_score: 8,
        placental_expulsion: PlacentalExpulsion::Spontaneous,
        analgesia: None,
        estimated_blood_loss_ml: 450,
        delivery_type: DeliveryType::Natural,
    })
    .insert(DeliveryWithLabor {
        pregnancy_id: 3,
        delivery_subtype: DeliverySubtype::Natural,
        motivation: None,
        laceration: Laceration::SecondDegree,
        episiotomy: false,
        episiotomy_motivation: None,
        labor_start_time: ts(2023, 5, 2, 3, 30),
        expulsion_time: twin_b,
        operative_instrument: None,
    })
    .insert(newborn(3, twin_a, 2450, Some(7.22)))
    .insert(newborn(3, twin_b, 2300, None))
    .insert(Tracing { tracing_id: 2, pregnancy_id: 3, start_time: ts(2023, 5, 2, 9, 0) });
    let start = ts(2023, 5, 2, 9, 0);
    for i in 0..4 {
        let t = start.plus_millis(250 * i);
        // The last sample carries fetal values only.
        let maternal = (i < 3).then_some(92);
        tx.insert(Measurement { tracing_id: 2, ts: t, maternal_heart_rate: maternal, maternal_tocography: None });
        for (birth, fhr) in [(twin_a, 135), (twin_b, 150)] {
            tx.insert(NewbornMeasurement { tracing_id: 2, ts: t, pregnancy_id: 3, birth_time: birth, fetal_heart_rate: fhr });
        }
    }
    tx
}

/// The sample store.
pub fn sample_store() -> CanonicalStore {
    force_apply(&CanonicalStore::new(), &sample_transaction()).expect("sample transaction is well formed")
}
