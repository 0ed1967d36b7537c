//! DDL plus INSERT script for loading a store into PostgreSQL.

use std::fmt::Write as _;

use peripartum_core::catalog::CatalogError;
use peripartum_core::{emit_ddl, CanonicalStore, Catalog};

/// One transaction: the schema, every row in dependency order, then
/// identity sequences advanced past the loaded ids.
pub fn export_sql(catalog: &Catalog, store: &CanonicalStore) -> Result<String, CatalogError> {
    let mut out = String::from("BEGIN;\n\n");
    out.push_str(&emit_ddl(catalog)?);
    let order = catalog.dependency_order()?;
    for rel in &order {
        let Some(rows) = store.rows(&rel.name) else { continue };
        if rows.is_empty() {
            continue;
        }
        let columns: Vec<&str> = rel.columns.iter().map(|c| c.name.as_str()).collect();
        let _ = writeln!(out, "\n-- {} ({} rows)", rel.name, rows.len());
        for row in rows {
            let values: Vec<String> = row.iter().map(|v| v.to_sql_literal()).collect();
            let _ = writeln!(out, "INSERT INTO {} ({}) VALUES ({});", rel.name, columns.join(", "), values.join(", "));
        }
    }
    let mut wrote_header = false;
    for rel in &order {
        for col in rel.columns.iter().filter(|c| c.identity) {
            if !wrote_header {
                out.push('\n');
                wrote_header = true;
            }
            let _ = writeln!(
                out,
                "SELECT setval(pg_get_serial_sequence('{0}', '{1}'), COALESCE(MAX({1}), 0) + 1, false) FROM {0};",
                rel.name, col.name
            );
        }
    }
    out.push_str("\nCOMMIT;\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use peripartum_core::build_catalog;
    use peripartum_core::sample::sample_store;

    #[test]
    fn one_insert_per_record() {
        let store = sample_store();
        let script = export_sql(&build_catalog(), &store).unwrap();
        assert_eq!(script.matches("INSERT INTO ").count(), store.total_records());
        assert!(script.starts_with("BEGIN;") && script.ends_with("COMMIT;\n"));
    }

    #[test]
    fn parents_are_loaded_first() {
        let script = export_sql(&build_catalog(), &sample_store()).unwrap();
        let first = |rel: &str| script.find(&format!("INSERT INTO {rel} ")).unwrap();
        assert!(first("patient") < first("pregnancy"));
        assert!(first("pregnancy") < first("delivery"));
    }
}
