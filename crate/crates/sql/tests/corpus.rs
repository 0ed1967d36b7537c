use peripartum_core::build_catalog;
use peripartum_sql::corpus::{self, ENTRIES};
use peripartum_sql::guardrail::{check_script, Limits};
use peripartum_sql::lint::{lint, LintRule};
use peripartum_sql::parser::{parse_sql, parse_statements};
use peripartum_sql::resolve::resolve;

fn rules(sql: &str) -> Vec<LintRule> {
    let plan = resolve(&parse_sql(sql).unwrap(), &build_catalog()).unwrap();
    lint(&plan, &build_catalog()).into_iter().map(|f| f.rule).collect()
}

#[test]
fn every_entry_parses_resolves_and_passes_guardrails() {
    let catalog = build_catalog();
    for e in ENTRIES {
        let verdict = check_script(&parse_statements(e.sql).unwrap(), Limits::default());
        assert!(verdict.accepted, "{}: {:?}", e.id, verdict.reasons);
        let q = parse_sql(e.sql).unwrap_or_else(|err| panic!("{}: {err}", e.id));
        resolve(&q, &catalog).unwrap_or_else(|err| panic!("{}: {err}", e.id));
    }
}

#[test]
fn print_parse_fixpoint_on_corpus() {
    for e in ENTRIES {
        let q = parse_sql(e.sql).unwrap();
        let printed = q.to_string();
        assert_eq!(parse_sql(&printed).unwrap(), q, "{}: {printed}", e.id);
        assert_eq!(parse_sql(&printed).unwrap().to_string(), printed);
    }
}

#[test]
fn c_section_query_shape() {
    use peripartum_sql::ast::{SetExpr, TableFactor};
    let q = parse_sql(corpus::C_SECTIONS_2024).unwrap();
    let SetExpr::Select(outer) = &q.body else { panic!() };
    let TableFactor::Derived { subquery, alias } = &outer.from[0].factor else { panic!() };
    assert_eq!(alias.value, "c_sections");
    assert!(matches!(subquery.body, SetExpr::Union { all: true, .. }));
}

#[test]
fn missing_subtype_filter_fires_only_on_the_incorrect_motivations_query() {
    let l1: Vec<&str> = ENTRIES
        .iter()
        .filter(|e| rules(e.sql).contains(&LintRule::MissingSubtypeFilter))
        .map(|e| e.id)
        .collect();
    assert_eq!(l1, ["c_section_motivations"]);
}

#[test]
fn key_mismatch_fires_on_the_ph_join() {
    let catalog = build_catalog();
    let plan = resolve(&parse_sql(corpus::PH_BELOW).unwrap(), &catalog).unwrap();
    let findings: Vec<_> = lint(&plan, &catalog).into_iter().filter(|f| f.rule == LintRule::JoinKeyTypeMismatch).collect();
    assert_eq!(findings.len(), 1);
    let span = findings[0].location;
    assert_eq!(&corpus::PH_BELOW[span.start..span.end], "d.pregnancy_id = p.tc");
    for e in ENTRIES.iter().filter(|e| e.id != "ph_below_7_1") {
        assert!(!rules(e.sql).contains(&LintRule::JoinKeyTypeMismatch), "{}", e.id);
    }
}

#[test]
fn exists_on_foreign_key_fires_on_the_c_section_query() {
    let found = rules(corpus::C_SECTIONS_2024);
    assert_eq!(found, [LintRule::ExistsReplaceableByJoin, LintRule::ExistsReplaceableByJoin]);
    let catalog = build_catalog();
    let plan = resolve(&parse_sql(corpus::C_SECTIONS_2024).unwrap(), &catalog).unwrap();
    for f in lint(&plan, &catalog) {
        assert!(corpus::C_SECTIONS_2024[f.location.start..f.location.end].starts_with("EXISTS (SELECT 1"));
    }
}

#[test]
fn exists_with_extra_correlation_is_not_flagged() {
    let sql = "SELECT 1 FROM programmed_c_section pcs WHERE EXISTS (SELECT 1 FROM delivery d \
               WHERE pcs.pregnancy_id = d.pregnancy_id AND pcs.motivation = d.analgesia)";
    assert!(!rules(sql).contains(&LintRule::ExistsReplaceableByJoin));
    let sql = "SELECT 1 FROM patient p WHERE NOT EXISTS (SELECT 1 FROM pregnancy pr WHERE pr.patient_tc = p.tc)";
    assert!(rules(sql).is_empty());
}
