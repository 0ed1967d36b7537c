//! Executor behaviour on hand-built fixtures: NULL handling, set operations,
//! ordering, joins and the row cap.

use peripartum_core::model::*;
use peripartum_core::sample::sample_store;
use peripartum_core::synth::{generate, SynthConfig};
use peripartum_core::{apply_transaction, build_catalog, CanonicalStore, Timestamp, Transaction, Value};
use peripartum_sql::corpus;
use peripartum_sql::guardrail::Limits;
use peripartum_sql::stored::{find, Args};
use proptest::prelude::*;

fn rows(sql: &str, store: &CanonicalStore) -> Vec<Vec<Value>> {
    peripartum_sql::run(sql, &build_catalog(), store, Limits::default()).unwrap_or_else(|e| panic!("{sql}: {e}")).1.rows
}

fn single(sql: &str, store: &CanonicalStore) -> Value {
    let r = rows(sql, store);
    assert_eq!(r.len(), 1, "{sql}");
    r[0][0].clone()
}

fn ts(h: u32, m: u32) -> Timestamp {
    Timestamp::from_ymd_hms(2024, 3, 10, h, m, 0).unwrap()
}

/// One labor delivery at 12:00 with inductions 2 h and 4 h before expulsion.
fn two_inductions() -> CanonicalStore {
    let mut tx = Transaction::new();
    let date = chrono::NaiveDate::from_ymd_opt(2024, 3, 10).unwrap();
    tx.insert(Patient {
        tc: TaxCode::new("RSSMRA80A41L483X"),
        name: "Maria".into(),
        surname: "Rossi".into(),
        birth_date: chrono::NaiveDate::from_ymd_opt(1980, 1, 1).unwrap(),
    })
    .insert(Pregnancy {
        id: 1,
        patient_tc: TaxCode::new("RSSMRA80A41L483X"),
        first_exam_date: chrono::NaiveDate::from_ymd_opt(2023, 7, 1).unwrap(),
        parity_full_term: 0,
        parity_premature: 0,
        parity_abortions: 0,
        parity_live_births: 0,
        maternal_age_at_conception: 43,
        art_used: None,
        prior_pregnancy_conditions: None,
        last_menstruation_date: None,
        expected_delivery_date: None,
    })
    .insert(Delivery {
        pregnancy_id: 1,
        delivery_date: date,
        gestational_age_days: 280,
        robson_score: 1,
        placental_expulsion: PlacentalExpulsion::Spontaneous,
        analgesia: None,
        estimated_blood_loss_ml: 300,
        delivery_type: DeliveryType::Natural,
    })
    .insert(DeliveryWithLabor {
        pregnancy_id: 1,
        delivery_subtype: DeliverySubtype::Natural,
        motivation: None,
        laceration: Laceration::None,
        episiotomy: false,
        episiotomy_motivation: None,
        labor_start_time: ts(11, 0),
        expulsion_time: ts(12, 0),
        operative_instrument: None,
    });
    for hour in [8, 10] {
        tx.insert(Induction {
            pregnancy_id: 1,
            administration_time: ts(hour, 0),
            method: "oxytocin".into(),
            drug_dosage: None,
            completion_rate: None,
        });
    }
    apply_transaction(&CanonicalStore::default(), &tx).expect("fixture is valid")
}

#[test]
fn average_interval_of_two_and_four_hours_is_three() {
    let store = two_inductions();
    assert_eq!(single(corpus::AVG_INDUCTION_INTERVAL, &store), Value::Float(3.0));
    let stored = find("avg_induction_interval").unwrap().run(&Args::new(), &build_catalog(), &store, None).unwrap();
    assert_eq!(stored.rows, [[Value::Float(3.0)]]);
}

#[test]
fn empty_store_counts_zero_c_sections() {
    let empty = CanonicalStore::default();
    assert_eq!(rows(corpus::C_SECTIONS_2024, &empty), [[Value::Int(0)]]);
    assert_eq!(single("SELECT AVG(weight_g) FROM newborn", &empty), Value::Null);
    // Percentages over nothing are NULL rather than an error.
    let t = find("induced_deliveries").unwrap().run(&Args::new(), &build_catalog(), &empty, None).unwrap();
    assert_eq!(t.rows, [[Value::Int(0), Value::Null]]);
}

#[test]
fn null_discipline() {
    let s = sample_store();
    assert_eq!(single("SELECT AVG(ph) FROM newborn WHERE weight_g < 0", &s), Value::Null);
    assert_eq!(single("SELECT SUM(weight_g) FROM newborn WHERE weight_g < 0", &s), Value::Null);
    assert_eq!(single("SELECT COUNT(ph) FROM newborn WHERE ph IS NULL", &s), Value::Int(0));
    assert_eq!(single("SELECT COUNT(*) FROM newborn WHERE ph IS NULL", &s), Value::Int(1));
    // Aggregates skip NULLs: three of four newborns have a pH.
    assert_eq!(single("SELECT COUNT(ph) FROM newborn", &s), Value::Int(3));
    assert!(rows("SELECT 1 FROM patient WHERE NULL = NULL", &s).is_empty());
    assert!(rows("SELECT tc FROM patient WHERE NOT (NULL = 1)", &s).is_empty());
    assert_eq!(single("SELECT NULL IS NULL", &s), Value::Bool(true));
    assert!(rows("SELECT laceration, COUNT(*) FROM delivery_with_labor WHERE FALSE GROUP BY laceration", &s).is_empty());
    // NOT IN over a list containing NULL is never true.
    assert!(rows("SELECT tc FROM patient WHERE 1 NOT IN (2, NULL)", &s).is_empty());
}

#[test]
fn union_removes_duplicates_and_union_all_keeps_them() {
    let s = sample_store();
    let all = rows("SELECT motivation FROM programmed_c_section UNION ALL SELECT motivation FROM programmed_c_section", &s);
    let distinct = rows("SELECT motivation FROM programmed_c_section UNION SELECT motivation FROM programmed_c_section", &s);
    assert_eq!(all.len(), 2);
    assert_eq!(distinct.len(), 1);
    // Equal numerics of different representation collapse.
    assert_eq!(rows("SELECT 1 UNION SELECT 1.0", &s).len(), 1);
}

#[test]
fn nulls_sort_last_ascending_and_first_descending() {
    let s = sample_store();
    let asc = rows("SELECT ph FROM newborn ORDER BY ph", &s);
    assert_eq!(asc.last().unwrap()[0], Value::Null);
    assert_eq!(asc[0][0], Value::Float(7.05));
    let desc = rows("SELECT ph FROM newborn ORDER BY ph DESC", &s);
    assert_eq!(desc[0][0], Value::Null);
    assert_eq!(desc[1][0], Value::Float(7.31));
}

#[test]
fn order_by_hidden_expression_and_limit() {
    let s = sample_store();
    let r = rows("SELECT name FROM patient ORDER BY birth_date DESC LIMIT 2", &s);
    assert_eq!(r, [[Value::text("Laura")], [Value::text("Giulia")]]);
}

#[test]
fn row_cap_marks_truncation() {
    let s = sample_store();
    let limits = Limits { max_rows: 2, max_depth: 3 };
    let (_, t) = peripartum_sql::run("SELECT tc FROM patient", &build_catalog(), &s, limits).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert!(t.truncated);
    let (_, t) = peripartum_sql::run("SELECT tc FROM patient LIMIT 2", &build_catalog(), &s, limits).unwrap();
    assert!(!t.truncated);
    assert!(!t.to_json().contains("truncated"));
}

#[test]
fn mismatched_join_keys_run_and_match_nothing() {
    // The integer-to-tax-code join is legal SQL here and simply finds no rows.
    assert!(rows(corpus::PH_BELOW, &sample_store()).is_empty());
}

#[test]
fn scalar_subquery_with_many_rows_is_an_execution_error() {
    let err = peripartum_sql::run("SELECT (SELECT tc FROM patient)", &build_catalog(), &sample_store(), Limits::default())
        .unwrap_err();
    assert_eq!(err.stage(), peripartum_sql::Stage::Execute);
}

#[test]
fn arithmetic_and_temporal_functions() {
    let s = sample_store();
    assert_eq!(single("SELECT 7 / 2", &s), Value::Int(3));
    assert_eq!(single("SELECT 7 / 0", &s), Value::Null);
    assert_eq!(single("SELECT ROUND(2.675, 2)", &s), Value::Decimal("2.68".parse().unwrap()));
    assert_eq!(single("SELECT ROUND(-0.5)", &s), Value::Decimal("-1".parse().unwrap()));
    assert_eq!(single("SELECT EXTRACT(YEAR FROM DATE '2024-06-14')", &s), Value::Int(2024));
    assert_eq!(single("SELECT EXTRACT(EPOCH FROM INTERVAL '2 hours')", &s), Value::Float(7200.0));
    assert_eq!(single("SELECT COUNT(*) FROM delivery WHERE delivery_date >= '2024-01-01'", &s), Value::Int(2));
    assert_eq!(single("SELECT COALESCE(NULL, 'x')", &s), Value::text("x"));
    assert_eq!(single("SELECT CASE WHEN 1 > 2 THEN 'a' ELSE 'b' END", &s), Value::text("b"));
    assert_eq!(single("SELECT 'abc' ILIKE 'A_C'", &s), Value::Bool(true));
}

fn multiset(mut r: Vec<Vec<Value>>) -> Vec<String> {
    let mut out: Vec<String> = r.drain(..).map(|row| format!("{row:?}")).collect();
    out.sort();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every left row survives a LEFT JOIN, once per match or once padded.
    #[test]
    fn left_join_preserves_left_rows(seed in 0u64..10_000, n in 1usize..25) {
        let store = generate(&SynthConfig::new(seed, n)).unwrap();
        let joined = rows(
            "SELECT d.pregnancy_id, i.method FROM delivery d LEFT JOIN induction i ON i.pregnancy_id = d.pregnancy_id",
            &store,
        );
        let expected: usize = store
            .deliveries()
            .keys()
            .map(|pid| store.inductions().values().filter(|i| i.pregnancy_id == *pid).count().max(1))
            .sum();
        prop_assert_eq!(joined.len(), expected);
        for pid in store.deliveries().keys() {
            prop_assert!(joined.iter().any(|r| r[0] == Value::Int(*pid)));
        }
    }

    /// The equality fast path and the plain nested loop agree.
    #[test]
    fn hashed_and_nested_joins_agree(seed in 0u64..10_000, n in 1usize..25) {
        let store = generate(&SynthConfig::new(seed, n)).unwrap();
        let hashed = rows(
            "SELECT p.tc, d.delivery_date FROM patient p JOIN pregnancy pr ON p.tc = pr.patient_tc \
             LEFT JOIN delivery d ON d.pregnancy_id = pr.id",
            &store,
        );
        let nested = rows(
            "SELECT p.tc, d.delivery_date FROM patient p JOIN pregnancy pr ON p.tc = pr.patient_tc OR FALSE \
             LEFT JOIN delivery d ON d.pregnancy_id = pr.id OR FALSE",
            &store,
        );
        prop_assert_eq!(multiset(hashed), multiset(nested));
    }
}
