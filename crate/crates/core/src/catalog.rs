//! Relation catalog: the single description of every relation, column and key,
//! used for DDL emission, SQL name resolution and field validation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicalType {
    Integer,
    Numeric,
    Boolean,
    Char(u16),
    Varchar,
    Text,
    Date,
    Timestamp,
    VarcharArray,
    Jsonb,
}

impl LogicalType {
    pub fn sql_name(self) -> String {
        match self {
            LogicalType::Integer => "INTEGER".into(),
            LogicalType::Numeric => "NUMERIC".into(),
            LogicalType::Boolean => "BOOLEAN".into(),
            LogicalType::Char(n) => format!("CHAR({n})"),
            LogicalType::Varchar => "VARCHAR".into(),
            LogicalType::Text => "TEXT".into(),
            LogicalType::Date => "DATE".into(),
            LogicalType::Timestamp => "TIMESTAMP(3)".into(),
            LogicalType::VarcharArray => "VARCHAR[]".into(),
            LogicalType::Jsonb => "JSONB".into(),
        }
    }

    pub fn is_textual(self) -> bool {
        matches!(self, LogicalType::Char(_) | LogicalType::Varchar | LogicalType::Text | LogicalType::Jsonb)
    }
}

/// Which identifier space a column's values come from. Comparing columns of
/// different non-plain families is almost always a join mistake.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyFamily {
    SyntheticId,
    TaxCode,
    Timestamp,
    Plain,
}

impl KeyFamily {
    pub const ALL: [KeyFamily; 4] = [KeyFamily::SyntheticId, KeyFamily::TaxCode, KeyFamily::Timestamp, KeyFamily::Plain];

    pub fn as_str(self) -> &'static str {
        match self {
            KeyFamily::SyntheticId => "synthetic_id",
            KeyFamily::TaxCode => "tax_code",
            KeyFamily::Timestamp => "timestamp",
            KeyFamily::Plain => "plain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ColumnCheck {
    OneOf { values: Vec<String> },
    Range { min: Option<f64>, max: Option<f64> },
    Pattern { regex: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub ty: LogicalType,
    pub nullable: bool,
    /// Surrogate key drawn from a sequence.
    pub identity: bool,
    pub key_family: KeyFamily,
    pub check: Option<ColumnCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForeignKey {
    pub columns: Vec<String>,
    pub references: String,
    pub referenced_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    pub columns: Vec<Column>,
    pub primary_key: Vec<String>,
    pub foreign_keys: Vec<ForeignKey>,
    pub unique: Vec<Vec<String>>,
}

impl Relation {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub relations: Vec<Relation>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogError {
    #[error("foreign keys form a cycle through: {0:?}")]
    ForeignKeyCycle(Vec<String>),
    #[error("relation `{relation}` references unknown relation `{target}`")]
    DanglingReference { relation: String, target: String },
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
}

impl Catalog {
    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn column(&self, relation: &str, column: &str) -> Option<&Column> {
        self.relation(relation)?.column(column)
    }

    /// Sub-catalog holding only the named relations (in catalog order).
    /// Foreign keys pointing outside the subset are dropped.
    pub fn restrict(&self, names: &[&str]) -> Result<Catalog, CatalogError> {
        for name in names {
            if self.relation(name).is_none() {
                return Err(CatalogError::UnknownRelation((*name).to_string()));
            }
        }
        let relations = self
            .relations
            .iter()
            .filter(|r| names.contains(&r.name.as_str()))
            .map(|r| {
                let mut r = r.clone();
                r.foreign_keys.retain(|fk| names.contains(&fk.references.as_str()));
                r
            })
            .collect();
        Ok(Catalog { relations })
    }

    /// True if `from.from_col` directly references `to.to_col` by a
    /// single-column foreign key.
    pub fn is_foreign_key(&self, from: &str, from_col: &str, to: &str, to_col: &str) -> bool {
        self.relation(from).is_some_and(|r| {
            r.foreign_keys.iter().any(|fk| {
                fk.references == to
                    && fk.columns.len() == 1
                    && fk.columns[0] == from_col
                    && fk.referenced_columns[0] == to_col
            })
        })
    }

    /// The key family a column gets without an explicit annotation: identity
    /// columns are synthetic ids, foreign-key columns inherit from their
    /// target, timestamps are timestamps, everything else is plain.
    pub fn derived_key_family(&self, relation: &Relation, column: &Column) -> KeyFamily {
        if column.identity {
            return KeyFamily::SyntheticId;
        }
        for fk in &relation.foreign_keys {
            if let Some(i) = fk.columns.iter().position(|c| *c == column.name) {
                if let Some(target) = self.column(&fk.references, &fk.referenced_columns[i]) {
                    return target.key_family;
                }
            }
        }
        if column.ty == LogicalType::Timestamp {
            KeyFamily::Timestamp
        } else {
            KeyFamily::Plain
        }
    }

    /// Relations ordered so every foreign-key target precedes its referrers;
    /// ties keep catalog order.
    pub fn dependency_order(&self) -> Result<Vec<&Relation>, CatalogError> {
        let index: BTreeMap<&str, usize> =
            self.relations.iter().enumerate().map(|(i, r)| (r.name.as_str(), i)).collect();
        let mut deps: Vec<Vec<usize>> = Vec::with_capacity(self.relations.len());
        for r in &self.relations {
            let mut d = Vec::new();
            for fk in &r.foreign_keys {
                let target = *index.get(fk.references.as_str()).ok_or_else(|| CatalogError::DanglingReference {
                    relation: r.name.clone(),
                    target: fk.references.clone(),
                })?;
                if target != index[r.name.as_str()] {
                    d.push(target);
                }
            }
            deps.push(d);
        }
        let mut placed = vec![false; self.relations.len()];
        let mut order = Vec::with_capacity(self.relations.len());
        while order.len() < self.relations.len() {
            let next = (0..self.relations.len()).find(|&i| !placed[i] && deps[i].iter().all(|&d| placed[d]));
            match next {
                Some(i) => {
                    placed[i] = true;
                    order.push(&self.relations[i]);
                }
                None => {
                    let stuck = (0..self.relations.len())
                        .filter(|&i| !placed[i])
                        .map(|i| self.relations[i].name.clone())
                        .collect();
                    return Err(CatalogError::ForeignKeyCycle(stuck));
                }
            }
        }
        Ok(order)
    }
}

struct RelationBuilder {
    relation: Relation,
}

impl RelationBuilder {
    fn new(name: &str) -> Self {
        RelationBuilder {
            relation: Relation {
                name: name.into(),
                columns: Vec::new(),
                primary_key: Vec::new(),
                foreign_keys: Vec::new(),
                unique: Vec::new(),
            },
        }
    }

    fn col(mut self, name: &str, ty: LogicalType, nullable: bool) -> Self {
        let key_family = if ty == LogicalType::Timestamp { KeyFamily::Timestamp } else { KeyFamily::Plain };
        self.relation.columns.push(Column {
            name: name.into(),
            ty,
            nullable,
            identity: false,
            key_family,
            check: None,
        });
        self
    }

    fn last(&mut self) -> &mut Column {
        self.relation.columns.last_mut().expect("column declared")
    }

    fn identity(mut self) -> Self {
        let c = self.last();
        c.identity = true;
        c.key_family = KeyFamily::SyntheticId;
        self
    }

    fn family(mut self, family: KeyFamily) -> Self {
        self.last().key_family = family;
        self
    }

    fn range(mut self, min: Option<f64>, max: Option<f64>) -> Self {
        self.last().check = Some(ColumnCheck::Range { min, max });
        self
    }

    fn one_of(mut self, values: &[&str]) -> Self {
        self.last().check = Some(ColumnCheck::OneOf { values: values.iter().map(|s| s.to_string()).collect() });
        self
    }

    fn pattern(mut self, regex: &str) -> Self {
        self.last().check = Some(ColumnCheck::Pattern { regex: regex.into() });
        self
    }

    fn pk(mut self, cols: &[&str]) -> Self {
        self.relation.primary_key = cols.iter().map(|s| s.to_string()).collect();
        self
    }

    fn unique(mut self, cols: &[&str]) -> Self {
        self.relation.unique.push(cols.iter().map(|s| s.to_string()).collect());
        self
    }

    fn fk(mut self, cols: &[&str], target: &str, target_cols: &[&str]) -> Self {
        self.relation.foreign_keys.push(ForeignKey {
            columns: cols.iter().map(|s| s.to_string()).collect(),
            references: target.into(),
            referenced_columns: target_cols.iter().map(|s| s.to_string()).collect(),
        });
        self
    }

    fn build(self) -> Relation {
        self.relation
    }
}

fn variants<T: Copy>(all: &[T], text: impl Fn(T) -> &'static str) -> Vec<&'static str> {
    all.iter().map(|v| text(*v)).collect()
}

/// The canonical catalog. Relations are declared in dependency order.
pub fn build_catalog() -> Catalog {
    use crate::model::{
        DeliverySubtype, DeliveryType, ExaminationKind, Laceration, OperativeInstrument, PlacentalExpulsion,
    };
    use KeyFamily::{SyntheticId, TaxCode};
    use LogicalType::*;

    let exam_kinds = variants(ExaminationKind::ALL, ExaminationKind::as_str);
    let expulsions = variants(PlacentalExpulsion::ALL, PlacentalExpulsion::as_str);
    let delivery_types = variants(DeliveryType::ALL, DeliveryType::as_str);
    let subtypes = variants(DeliverySubtype::ALL, DeliverySubtype::as_str);
    let lacerations = variants(Laceration::ALL, Laceration::as_str);
    let instruments = variants(OperativeInstrument::ALL, OperativeInstrument::as_str);
    let non_negative = (Some(0.0), None);

    let relations = vec![
        RelationBuilder::new("patient")
            .col("tc", Char(16), false).family(TaxCode).pattern("^[A-Z0-9]{16}$")
            .col("name", Varchar, false)
            .col("surname", Varchar, false)
            .col("birth_date", Date, false)
            .pk(&["tc"])
            .build(),
        RelationBuilder::new("condition")
            .col("id", Integer, false).identity()
            .col("name", Varchar, false)
            .pk(&["id"])
            .unique(&["name"])
            .build(),
        RelationBuilder::new("test")
            .col("id", Integer, false).identity()
            .col("name", Varchar, false)
            .col("type", VarcharArray, false)
            .pk(&["id"])
            .unique(&["name"])
            .build(),
        RelationBuilder::new("pregnancy")
            .col("id", Integer, false).identity()
            .col("patient_tc", Char(16), false).family(TaxCode)
            .col("first_exam_date", Date, false)
            .col("parity_full_term", Integer, false).range(non_negative.0, non_negative.1)
            .col("parity_premature", Integer, false).range(non_negative.0, non_negative.1)
            .col("parity_abortions", Integer, false).range(non_negative.0, non_negative.1)
            .col("parity_live_births", Integer, false).range(non_negative.0, non_negative.1)
            .col("maternal_age_at_conception", Integer, false).range(Some(10.0), Some(60.0))
            .col("art_used", Boolean, true)
            .col("prior_pregnancy_conditions", Text, true)
            .col("last_menstruation_date", Date, true)
            .col("expected_delivery_date", Date, true)
            .pk(&["id"])
            .unique(&["patient_tc", "first_exam_date"])
            .fk(&["patient_tc"], "patient", &["tc"])
            .build(),
        RelationBuilder::new("pregnancy_condition")
            .col("pregnancy_id", Integer, false).family(SyntheticId)
            .col("condition_id", Integer, false).family(SyntheticId)
            .col("therapy", Text, true)
            .pk(&["pregnancy_id", "condition_id"])
            .fk(&["pregnancy_id"], "pregnancy", &["id"])
            .fk(&["condition_id"], "condition", &["id"])
            .build(),
        RelationBuilder::new("examination")
            .col("id", Integer, false).identity()
            .col("pregnancy_id", Integer, false).family(SyntheticId)
            .col("examination_kind", Varchar, false).one_of(&exam_kinds)
            .col("exam_date", Date, false)
            .col("gestational_age_days", Integer, false).range(Some(0.0), Some(320.0))
            .col("details", Jsonb, false)
            .pk(&["id"])
            .fk(&["pregnancy_id"], "pregnancy", &["id"])
            .build(),
        RelationBuilder::new("examination_test")
            .col("examination_id", Integer, false).family(SyntheticId)
            .col("test_id", Integer, false).family(SyntheticId)
            .col("result", Varchar, false)
            .pk(&["examination_id", "test_id"])
            .fk(&["examination_id"], "examination", &["id"])
            .fk(&["test_id"], "test", &["id"])
            .build(),
        RelationBuilder::new("delivery")
            .col("pregnancy_id", Integer, false).family(SyntheticId)
            .col("delivery_date", Date, false)
            .col("gestational_age_days", Integer, false).range(Some(0.0), Some(320.0))
            .col("robson_score", Integer, false).range(Some(1.0), Some(10.0))
            .col("placental_expulsion", Varchar, false).one_of(&expulsions)
            .col("analgesia", Varchar, true)
            .col("estimated_blood_loss_ml", Integer, false).range(non_negative.0, non_negative.1)
            .col("delivery_type", Varchar, false).one_of(&delivery_types)
            .pk(&["pregnancy_id"])
            .fk(&["pregnancy_id"], "pregnancy", &["id"])
            .build(),
        RelationBuilder::new("programmed_c_section")
            .col("pregnancy_id", Integer, false).family(SyntheticId)
            .col("motivation", Text, false)
            .pk(&["pregnancy_id"])
            .fk(&["pregnancy_id"], "delivery", &["pregnancy_id"])
            .build(),
        RelationBuilder::new("delivery_with_labor")
            .col("pregnancy_id", Integer, false).family(SyntheticId)
            .col("delivery_subtype", Varchar, false).one_of(&subtypes)
            .col("motivation", Text, true)
            .col("laceration", Varchar, false).one_of(&lacerations)
            .col("episiotomy", Boolean, false)
            .col("episiotomy_motivation", Text, true)
            .col("labor_start_time", Timestamp, false)
            .col("expulsion_time", Timestamp, false)
            .col("operative_instrument", Varchar, true).one_of(&instruments)
            .pk(&["pregnancy_id"])
            .fk(&["pregnancy_id"], "delivery", &["pregnancy_id"])
            .build(),
        RelationBuilder::new("induction")
            .col("pregnancy_id", Integer, false).family(SyntheticId)
            .col("administration_time", Timestamp, false)
            .col("method", Varchar, false)
            .col("drug_dosage", Varchar, true)
            .col("completion_rate", Numeric, true).range(Some(0.0), Some(1.0))
            .pk(&["pregnancy_id", "administration_time"])
            .fk(&["pregnancy_id"], "delivery_with_labor", &["pregnancy_id"])
            .build(),
        RelationBuilder::new("newborn")
            .col("pregnancy_id", Integer, false).family(SyntheticId)
            .col("birth_time", Timestamp, false)
            .col("weight_g", Integer, false).range(Some(200.0), Some(7000.0))
            .col("length_cm", Numeric, true).range(Some(20.0), Some(70.0))
            .col("apgar_1", Integer, false).range(Some(0.0), Some(10.0))
            .col("apgar_5", Integer, false).range(Some(0.0), Some(10.0))
            .col("apgar_10", Integer, true).range(Some(0.0), Some(10.0))
            .col("ph", Numeric, true).range(Some(6.5), Some(7.8))
            .pk(&["pregnancy_id", "birth_time"])
            .fk(&["pregnancy_id"], "delivery", &["pregnancy_id"])
            .build(),
        RelationBuilder::new("tracing")
            .col("tracing_id", Integer, false).identity()
            .col("pregnancy_id", Integer, false).family(SyntheticId)
            .col("start_time", Timestamp, false)
            .pk(&["tracing_id"])
            .unique(&["pregnancy_id", "tracing_id"])
            .fk(&["pregnancy_id"], "delivery", &["pregnancy_id"])
            .build(),
        RelationBuilder::new("measurement")
            .col("tracing_id", Integer, false).family(SyntheticId)
            .col("ts", Timestamp, false)
            .col("maternal_heart_rate", Integer, true).range(Some(20.0), Some(250.0))
            .col("maternal_tocography", Numeric, true).range(non_negative.0, non_negative.1)
            .pk(&["tracing_id", "ts"])
            .fk(&["tracing_id"], "tracing", &["tracing_id"])
            .build(),
        RelationBuilder::new("newborn_measurement")
            .col("tracing_id", Integer, false).family(SyntheticId)
            .col("ts", Timestamp, false)
            .col("pregnancy_id", Integer, false).family(SyntheticId)
            .col("birth_time", Timestamp, false)
            .col("fetal_heart_rate", Integer, false).range(Some(30.0), Some(300.0))
            .pk(&["tracing_id", "ts", "pregnancy_id", "birth_time"])
            .fk(&["tracing_id", "ts"], "measurement", &["tracing_id", "ts"])
            .fk(&["pregnancy_id", "birth_time"], "newborn", &["pregnancy_id", "birth_time"])
            .fk(&["pregnancy_id", "tracing_id"], "tracing", &["pregnancy_id", "tracing_id"])
            .build(),
    ];
    Catalog { relations }
}

fn format_bound(v: f64) -> String {
    crate::value::format_float(v).trim_end_matches(".0").to_string()
}

fn check_sql(column: &str, check: &ColumnCheck) -> String {
    match check {
        ColumnCheck::OneOf { values } => {
            let quoted: Vec<String> = values.iter().map(|v| format!("'{v}'")).collect();
            format!("CHECK ({column} IN ({}))", quoted.join(", "))
        }
        ColumnCheck::Range { min: Some(lo), max: Some(hi) } => {
            format!("CHECK ({column} BETWEEN {} AND {})", format_bound(*lo), format_bound(*hi))
        }
        ColumnCheck::Range { min: Some(lo), max: None } => format!("CHECK ({column} >= {})", format_bound(*lo)),
        ColumnCheck::Range { min: None, max: Some(hi) } => format!("CHECK ({column} <= {})", format_bound(*hi)),
        ColumnCheck::Range { min: None, max: None } => String::new(),
        ColumnCheck::Pattern { regex } => format!("CHECK ({column} ~ '{regex}')"),
    }
}

/// PostgreSQL `CREATE TABLE` statements, one block per relation, separated by
/// a blank line, in dependency order. Byte-stable for a given catalog.
///
/// Key families that cannot be derived from the table structure (see
/// [`Catalog::derived_key_family`]) follow their table as
/// `COMMENT ON COLUMN t.c IS 'key_family=...';` lines.
pub fn emit_ddl(catalog: &Catalog) -> Result<String, CatalogError> {
    let mut out = String::new();
    for (i, relation) in catalog.dependency_order()?.into_iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let mut lines = Vec::new();
        for col in &relation.columns {
            let mut line = format!("    {} {}", col.name, col.ty.sql_name());
            if col.identity {
                line.push_str(" GENERATED BY DEFAULT AS IDENTITY");
            }
            if !col.nullable {
                line.push_str(" NOT NULL");
            }
            if let Some(check) = &col.check {
                let sql = check_sql(&col.name, check);
                if !sql.is_empty() {
                    line.push(' ');
                    line.push_str(&sql);
                }
            }
            lines.push(line);
        }
        lines.push(format!("    PRIMARY KEY ({})", relation.primary_key.join(", ")));
        for unique in &relation.unique {
            lines.push(format!("    UNIQUE ({})", unique.join(", ")));
        }
        for fk in &relation.foreign_keys {
            lines.push(format!(
                "    FOREIGN KEY ({}) REFERENCES {} ({})",
                fk.columns.join(", "),
                fk.references,
                fk.referenced_columns.join(", ")
            ));
        }
        let _ = writeln!(out, "CREATE TABLE {} (\n{}\n);", relation.name, lines.join(",\n"));
        for col in &relation.columns {
            if col.key_family != catalog.derived_key_family(relation, col) {
                let _ = writeln!(
                    out,
                    "COMMENT ON COLUMN {}.{} IS 'key_family={}';",
                    relation.name,
                    col.name,
                    col.key_family.as_str()
                );
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pregnancy_has_synthetic_key() {
        let catalog = build_catalog();
        let pregnancy = catalog.relation("pregnancy").unwrap();
        assert_eq!(pregnancy.primary_key, vec!["id"]);
        assert!(pregnancy.column("id").unwrap().identity);
    }

    #[test]
    fn examinations_consolidated_into_one_relation() {
        let catalog = build_catalog();
        let exams: Vec<_> = catalog.relations.iter().filter(|r| r.name.contains("examination")).collect();
        // examination plus the examination_test link table
        assert_eq!(exams.len(), 2);
        assert!(catalog.column("examination", "examination_kind").is_some());
        assert!(catalog.relation("first_trimester_examination").is_none());
    }

    #[test]
    fn catalog_is_deterministic() {
        assert_eq!(build_catalog(), build_catalog());
        assert_eq!(emit_ddl(&build_catalog()).unwrap(), emit_ddl(&build_catalog()).unwrap());
    }

    #[test]
    fn every_relation_appears_once_and_fks_resolve() {
        let catalog = build_catalog();
        assert_eq!(catalog.relations.len(), 15);
        let mut names: Vec<_> = catalog.relations.iter().map(|r| r.name.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 15);
        for r in &catalog.relations {
            for fk in &r.foreign_keys {
                let target = catalog.relation(&fk.references).expect("fk target");
                for (c, t) in fk.columns.iter().zip(&fk.referenced_columns) {
                    assert!(r.column(c).is_some(), "{}.{c}", r.name);
                    assert!(target.column(t).is_some(), "{}.{t}", target.name);
                }
            }
        }
    }

    #[test]
    fn paper_sql_columns_exist() {
        let catalog = build_catalog();
        let needed = [
            ("patient", "tc"),
            ("patient", "name"),
            ("patient", "surname"),
            ("pregnancy", "id"),
            ("pregnancy", "patient_tc"),
            ("delivery", "pregnancy_id"),
            ("delivery", "delivery_date"),
            ("delivery", "delivery_type"),
            ("programmed_c_section", "motivation"),
            ("delivery_with_labor", "motivation"),
            ("delivery_with_labor", "laceration"),
            ("delivery_with_labor", "delivery_subtype"),
            ("delivery_with_labor", "expulsion_time"),
            ("induction", "pregnancy_id"),
            ("induction", "administration_time"),
            ("newborn", "ph"),
        ];
        for (r, c) in needed {
            assert!(catalog.column(r, c).is_some(), "{r}.{c}");
        }
    }

    #[test]
    fn ddl_orders_targets_first() {
        let ddl = emit_ddl(&build_catalog()).unwrap();
        let pos = |name: &str| ddl.find(&format!("CREATE TABLE {name} (")).unwrap();
        assert!(pos("patient") < pos("pregnancy"));
        assert!(pos("delivery") < pos("delivery_with_labor"));
        assert!(pos("delivery_with_labor") < pos("induction"));
        assert!(pos("newborn") < pos("newborn_measurement"));
        assert_eq!(ddl.matches("CREATE TABLE").count(), 15);
        assert!(!ddl.contains('\r'));
    }

    #[test]
    fn restricted_patient_ddl() {
        let catalog = build_catalog().restrict(&["patient"]).unwrap();
        let ddl = emit_ddl(&catalog).unwrap();
        assert_eq!(ddl.matches("CREATE TABLE").count(), 1);
        assert!(ddl.contains("tc CHAR(16) NOT NULL"));
        assert!(ddl.contains("PRIMARY KEY (tc)"));
    }

    #[test]
    fn only_the_tax_code_root_needs_an_annotation() {
        let ddl = emit_ddl(&build_catalog()).unwrap();
        let comments: Vec<&str> = ddl.lines().filter(|l| l.starts_with("COMMENT")).collect();
        assert_eq!(comments, ["COMMENT ON COLUMN patient.tc IS 'key_family=tax_code';"]);
    }

    #[test]
    fn cycle_is_reported() {
        let mut catalog = build_catalog().restrict(&["patient", "pregnancy"]).unwrap();
        catalog.relations[0].foreign_keys.push(ForeignKey {
            columns: vec!["tc".into()],
            references: "pregnancy".into(),
            referenced_columns: vec!["patient_tc".into()],
        });
        assert!(matches!(emit_ddl(&catalog), Err(CatalogError::ForeignKeyCycle(_))));
    }
}
