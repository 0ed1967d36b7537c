use peripartum_core::{build_catalog, emit_ddl};
use peripartum_sql::ddl::parse_ddl;

#[test]
fn emitted_ddl_reads_back_to_the_catalog() {
    let catalog = build_catalog();
    let ddl = emit_ddl(&catalog).unwrap();
    assert_eq!(parse_ddl(&ddl).unwrap(), catalog);
}

#[test]
fn restricted_catalogs_round_trip() {
    let catalog = build_catalog().restrict(&["patient", "pregnancy", "delivery", "newborn"]).unwrap();
    assert_eq!(parse_ddl(&emit_ddl(&catalog).unwrap()).unwrap(), catalog);
}
