use std::fmt::Write as _;
use std::path::PathBuf;

use peripartum_core::ingest::{run_ingestion, run_ingestion_file, IngestionReport, SourceConfig, SourceKind};
use peripartum_core::model::{ExaminationKind, TaxCode};
use peripartum_core::time::Timestamp;
use peripartum_core::{full_scan, CanonicalStore};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/legacy").join(name)
}

fn ingest(store: &CanonicalStore, kind: SourceKind, file: &str) -> (CanonicalStore, IngestionReport) {
    let (next, report) = run_ingestion_file(&fixture(file), &SourceConfig::for_kind(kind), store).unwrap();
    assert!(report.reconciles(), "{file}: {report:?}");
    assert!(full_scan(&next).is_empty(), "{file}: {:?}", full_scan(&next));
    (next, report)
}

fn chain() -> (CanonicalStore, Vec<IngestionReport>) {
    let s0 = CanonicalStore::new();
    let (s1, r1) = ingest(&s0, SourceKind::FirstTrimesterSheet, "first_trimester.csv");
    let (s2, r2) = ingest(&s1, SourceKind::DeliverySheet, "delivery.csv");
    let (s3, r3) = ingest(&s2, SourceKind::EhrExport, "ehr_outcomes.csv");
    let (s4, r4) = ingest(&s3, SourceKind::EhrExport, "ehr_newborn.csv");
    (s4, vec![r1, r2, r3, r4])
}

fn tc(s: &str) -> TaxCode {
    TaxCode::new(s)
}

#[test]
fn first_trimester_sheet() {
    let (store, reports) = chain();
    let r = &reports[0];
    assert_eq!((r.rows, r.accepted, r.repaired, r.quarantined.len()), (6, 6, 0, 0));
    assert_eq!(store.patients().len(), 6);

    let p = store.pregnancy_by_natural_key(&tc("CLMFNC91H46D612U"), "2024-04-02".parse().unwrap()).unwrap();
    let exam = store.examinations_of(p.id).find(|e| e.examination_kind == ExaminationKind::FirstTrimester).unwrap();
    assert_eq!(exam.details["premorphological_ultrasound_indicated"], "true");
    assert_eq!(exam.details["premorphological_ultrasound_reason"], "because of FHR < 5°P");
    assert_eq!(exam.details["nipt_performed"], "false");

    // `//` and `0` in the genetic column are both missing; the one real value is kept verbatim.
    let genetic = store.test_by_name("Genetic tests").unwrap().id;
    let results: Vec<&str> =
        store.examination_tests().values().filter(|et| et.test_id == genetic).map(|et| et.result.as_str()).collect();
    assert_eq!(results, ["amniocentesis: normal karyotype"]);

    let nipt = store.test_by_name("NIPT outcome").unwrap().id;
    assert_eq!(store.examination_tests().values().filter(|et| et.test_id == nipt && et.result == "B").count(), 3);
}

#[test]
fn delivery_sheet() {
    let (store, reports) = chain();
    let r = &reports[1];
    assert_eq!((r.rows, r.accepted, r.repaired, r.quarantined.len()), (5, 4, 1, 0), "{:?}", r.quarantined);
    assert_eq!(r.repairs[0].row, 5);
    assert!(r.repairs[0].notes[0].contains("episiotomy"), "{:?}", r.repairs);

    let p1 = store.pregnancy_by_natural_key(&tc("RSSMRA90A41H501Z"), "2024-01-10".parse().unwrap()).unwrap().id;
    let dwl = &store.deliveries_with_labor()[&p1];
    assert!(dwl.episiotomy);
    assert_eq!(dwl.episiotomy_motivation.as_deref(), Some("rigid perineum"));
    assert_eq!(store.deliveries()[&p1].analgesia, None);

    let p5 = store.pregnancy_by_natural_key(&tc("RSSCHR95E45A944V"), "2024-03-18".parse().unwrap()).unwrap().id;
    assert!(!store.deliveries_with_labor()[&p5].episiotomy);
    assert_eq!(store.deliveries()[&p5].analgesia.as_deref(), Some("epidural"));
    let n = store.newborns_of(p5).next().unwrap();
    assert_eq!((n.apgar_1, n.apgar_5, n.apgar_10), (6, 8, Some(9)));
    let two_scores = store.newborns().values().filter(|n| n.apgar_10.is_none()).count();
    assert_eq!(two_scores, 5, "four two-score rows plus the EHR newborn with a missing tenth-minute score");
}

#[test]
fn conflicting_flag_and_value_are_quarantined() {
    let (store, _) = chain();
    let (next, r) = run_ingestion_file(
        &fixture("delivery_conflicts.csv"),
        &SourceConfig::for_kind(SourceKind::DeliverySheet),
        &store,
    )
    .unwrap();
    assert!(r.reconciles());
    assert_eq!((r.accepted, r.quarantined.len()), (1, 2));
    let fields: Vec<&str> = r.conflicts.iter().map(|c| c.field.as_str()).collect();
    assert_eq!(fields, ["episiotomy", "analgesia"]);
    assert_eq!(r.conflicts[0].values, ["Episiotomy=0", "Motivation=rigid perineum"]);
    assert!(r.quarantined[0].reason.contains("episiotomy conflict"));
    assert!(full_scan(&next).is_empty());

    let csv = r.quarantine_csv();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().ends_with(",reason"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn ehr_presence_integers_decode_to_booleans() {
    let (store, reports) = chain();
    let r = &reports[2];
    assert_eq!((r.rows, r.accepted, r.quarantined.len()), (4, 4, 0));

    let gdm = store.condition_by_name("Gestational diabetes").unwrap().id;
    let pih = store.condition_by_name("Pregnancy-induced hypertension").unwrap().id;
    let thyro = store.condition_by_name("Thyropathy").unwrap().id;
    let id = |t: &str, d: &str| store.pregnancy_by_natural_key(&tc(t), d.parse().unwrap()).unwrap().id;
    let (p1, p2, p3, p4) = (
        id("RSSMRA90A41H501Z", "2024-01-10"),
        id("BNCGLI88B52F205X", "2024-02-03"),
        id("VRDLRA92C63L219Y", "2024-02-20"),
        id("FRRSRA85D44G273W", "2024-03-05"),
    );
    let links: Vec<(i64, i64)> = store.condition_links().keys().copied().collect();
    let mut expected = vec![(p1, gdm), (p2, pih), (p3, thyro), (p4, gdm)];
    expected.sort();
    assert_eq!(links, expected);
    assert_eq!(store.pregnancies()[&p4].art_used, Some(true));
    assert_eq!(store.pregnancies()[&p1].art_used, None);

    let other = store.examinations_of(p4).find(|e| e.examination_kind == ExaminationKind::Other).unwrap();
    assert_eq!(other.details["outcome"], "code:6");
    assert_eq!(other.details["ehr_pregnancy_ref"], "859");
}

#[test]
fn ehr_newborn_rows_realign_or_quarantine() {
    let (store, reports) = chain();
    let r = &reports[3];
    assert_eq!((r.rows, r.accepted, r.repaired), (6, 1, 0));
    let rows: Vec<usize> = r.quarantined.iter().map(|q| q.row).collect();
    assert_eq!(rows, [1, 2, 3, 5, 6]);
    assert!(r.quarantined.iter().all(|q| q.reason.contains("section label found")), "{:?}", r.quarantined);

    let p1 = store.pregnancy_by_natural_key(&tc("RSSMRA90A41H501Z"), "2024-01-10".parse().unwrap()).unwrap().id;
    let twin = store.newborns()[&(p1, Timestamp::from_ymd_hms(2024, 7, 18, 8, 52, 0).unwrap())].clone();
    assert_eq!((twin.apgar_1, twin.apgar_5, twin.apgar_10, twin.weight_g), (8, 9, None, 3300));
    assert_eq!(store.newborns_of(p1).count(), 2);
}

#[test]
fn reingestion_is_idempotent() {
    let (store, _) = chain();
    let before = store.to_json();
    for (kind, file) in [
        (SourceKind::FirstTrimesterSheet, "first_trimester.csv"),
        (SourceKind::DeliverySheet, "delivery.csv"),
        (SourceKind::EhrExport, "ehr_outcomes.csv"),
        (SourceKind::EhrExport, "ehr_newborn.csv"),
    ] {
        let (again, r) = ingest(&store, kind, file);
        assert_eq!(r.records_written(), 0, "{file}");
        assert_eq!(again.to_json(), before, "{file}");
    }
}

fn ctg_config() -> SourceConfig {
    serde_json::from_str(&std::fs::read_to_string(fixture("ctg_twins.json")).unwrap()).unwrap()
}

#[test]
fn ctg_columns_and_blank_rows() {
    let (store, _) = chain();
    let (next, r) = run_ingestion_file(&fixture("ctg_twins.csv"), &ctg_config(), &store).unwrap();
    assert!(r.reconciles());
    assert_eq!((r.rows, r.accepted, r.skipped_empty), (6, 6, 2));
    assert_eq!(r.quarantined_columns.len(), 1);
    assert_eq!(r.quarantined_columns[0].column, "FHR3");
    assert_eq!(next.measurements().len(), 4);
    assert_eq!(next.newborn_measurements().len(), 6);
    assert!(full_scan(&next).is_empty());

    let (again, r2) = run_ingestion_file(&fixture("ctg_twins.csv"), &ctg_config(), &next).unwrap();
    assert_eq!(r2.records_written(), 0);
    assert_eq!(again.to_json(), next.to_json());
}

#[test]
fn ctg_ten_minutes_at_four_hertz() {
    let (store, _) = chain();
    let mut csv = String::from("Time;MHR;TOCO;FHR1\n");
    for i in 0..2400 {
        let t = i as f64 / 4.0;
        writeln!(csv, "{t};{};{:.1};{}", 80 + i % 7, 10.0 + (i % 30) as f64 / 10.0, 135 + i % 11).unwrap();
    }
    let (next, r) = run_ingestion(&csv, &ctg_config(), &store).unwrap();
    assert_eq!((r.rows, r.accepted, r.quarantined.len()), (2400, 2400, 0));
    assert_eq!(next.measurements().len(), 2400);
    let start = Timestamp::from_ymd_hms(2024, 7, 18, 6, 0, 0).unwrap();
    let last = next.measurements().keys().map(|(_, ts)| *ts).max().unwrap();
    assert_eq!(last.millis_since(start), 2399 * 250);
}

#[test]
fn unknown_layout_is_an_error() {
    let err = run_ingestion("foo,bar\n1,2\n", &SourceConfig::for_kind(SourceKind::DeliverySheet), &CanonicalStore::new())
        .unwrap_err();
    assert!(err.to_string().contains("lacks columns"), "{err}");
}
