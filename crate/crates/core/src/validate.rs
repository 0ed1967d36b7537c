//! Field-level validation of single records.
//!
//! Column checks (nullability, enumerations, numeric ranges, patterns) come
//! from the catalog; record-local rules that involve several fields of the
//! same record are written out per type below.

use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;

use crate::catalog::{build_catalog, Catalog, ColumnCheck};
use crate::model::DeliverySubtype;
use crate::store::Record;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub rule: String,
    pub value: String,
}

impl FieldError {
    fn new(field: &str, rule: impl Into<String>, value: impl ToString) -> Self {
        FieldError { field: field.into(), rule: rule.into(), value: value.to_string() }
    }
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {} (got `{}`)", self.field, self.rule, self.value)
    }
}

fn catalog() -> &'static Catalog {
    static CATALOG: OnceLock<Catalog> = OnceLock::new();
    CATALOG.get_or_init(build_catalog)
}

fn pattern(regex: &str) -> &'static Regex {
    static COMPILED: OnceLock<HashMap<String, Regex>> = OnceLock::new();
    let compiled = COMPILED.get_or_init(|| {
        catalog()
            .relations
            .iter()
            .flat_map(|r| &r.columns)
            .filter_map(|c| match &c.check {
                Some(ColumnCheck::Pattern { regex }) => {
                    Some((regex.clone(), Regex::new(regex).expect("catalog patterns are valid")))
                }
                _ => None,
            })
            .collect()
    });
    &compiled[regex]
}

fn non_empty(errors: &mut Vec<FieldError>, field: &str, text: &str) {
    if text.trim().is_empty() {
        errors.push(FieldError::new(field, "must be non-empty", text));
    }
}

/// Returns every field rule the record breaks; empty means valid. Pure.
pub fn validate_fields(record: &Record) -> Vec<FieldError> {
    let relation = catalog().relation(record.relation()).expect("every record type is cataloged");
    let mut errors = Vec::new();

    for (column, value) in relation.columns.iter().zip(record.to_row()) {
        if value.is_null() {
            if !column.nullable {
                errors.push(FieldError::new(&column.name, "must be present", "NULL"));
            }
            continue;
        }
        match &column.check {
            Some(ColumnCheck::Range { min, max }) => {
                if let Some(x) = value.as_f64() {
                    let below = min.is_some_and(|lo| x < lo);
                    let above = max.is_some_and(|hi| x > hi);
                    if below || above {
                        let rule = match (min, max) {
                            (Some(lo), Some(hi)) => format!("out of range {lo}–{hi}"),
                            (Some(lo), None) => format!("must be ≥ {lo}"),
                            (None, Some(hi)) => format!("must be ≤ {hi}"),
                            (None, None) => unreachable!(),
                        };
                        errors.push(FieldError::new(&column.name, rule, &value));
                    }
                }
            }
            Some(ColumnCheck::Pattern { regex }) => {
                if let Value::Text(text) = &value {
                    if !pattern(regex).is_match(text) {
                        let rule = if column.name == "tc" && text.chars().count() != 16 {
                            "length ≠ 16".to_string()
                        } else {
                            format!("must match {regex}")
                        };
                        errors.push(FieldError::new(&column.name, rule, text));
                    }
                }
            }
            // Enumerated columns are Rust enums; they cannot hold other values.
            Some(ColumnCheck::OneOf { .. }) | None => {}
        }
    }

    match record {
        Record::Patient(p) => {
            non_empty(&mut errors, "name", &p.name);
            non_empty(&mut errors, "surname", &p.surname);
        }
        Record::Pregnancy(p) => {
            if let (Some(lmp), Some(edd)) = (p.last_menstruation_date, p.expected_delivery_date) {
                if edd <= lmp {
                    errors.push(FieldError::new(
                        "expected_delivery_date",
                        "must be after last_menstruation_date",
                        edd,
                    ));
                }
            }
        }
        Record::Condition(c) => non_empty(&mut errors, "name", &c.name),
        Record::Test(t) => {
            non_empty(&mut errors, "name", &t.name);
            if t.result_type.is_empty() {
                errors.push(FieldError::new("type", "must be non-empty", "[]"));
            }
            let distinct: BTreeSet<&String> = t.result_type.iter().collect();
            if distinct.len() != t.result_type.len() {
                errors.push(FieldError::new("type", "enumerated values must be distinct", t.result_type.join(",")));
            }
        }
        Record::DeliveryWithLabor(d) => {
            if d.labor_start_time >= d.expulsion_time {
                errors.push(FieldError::new("expulsion_time", "must be after labor_start_time", d.expulsion_time));
            }
            if !d.episiotomy && d.episiotomy_motivation.is_some() {
                errors.push(FieldError::new(
                    "episiotomy_motivation",
                    "only allowed when episiotomy is true",
                    d.episiotomy_motivation.as_deref().unwrap_or_default(),
                ));
            }
            let operative = d.delivery_subtype == DeliverySubtype::Operative;
            if operative != d.operative_instrument.is_some() {
                let shown = d.operative_instrument.map_or("NULL", |i| i.as_str());
                errors.push(FieldError::new(
                    "operative_instrument",
                    "present iff delivery_subtype is operative",
                    shown,
                ));
            }
            let has_motivation = d.motivation.as_deref().is_some_and(|m| !m.trim().is_empty());
            if d.delivery_subtype != DeliverySubtype::Natural && !has_motivation {
                errors.push(FieldError::new("motivation", "required unless delivery_subtype is natural", "NULL"));
            }
        }
        Record::Induction(i) => non_empty(&mut errors, "method", &i.method),
        _ => {}
    }
    errors
}
