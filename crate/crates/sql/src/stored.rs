//! Named, parameterised queries for recurring clinical questions.
//!
//! Parameters appear in the text as `$name` and are replaced by typed
//! literals in the parsed tree, never by string splicing.

use std::collections::BTreeMap;

use peripartum_core::{CanonicalStore, Catalog};
use serde::Serialize;

use crate::ast::*;
use crate::exec::{execute, ResultTable};
use crate::guardrail::{check_query, Limits};
use crate::parser::parse_sql;
use crate::pipeline::PipelineError;
use crate::resolve::resolve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    Integer,
    Number,
    Text,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub default: &'static str,
    pub description: &'static str,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StoredQuery {
    pub name: &'static str,
    pub description: &'static str,
    pub params: &'static [ParamSpec],
    pub sql: &'static str,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum StoredError {
    #[error("no stored query named \"{0}\"")]
    UnknownQuery(String),
    #[error("stored query {query} has no parameter \"{param}\"")]
    UnknownParam { query: String, param: String },
    #[error("parameter {param} expects {expected:?}, got \"{value}\"")]
    InvalidParam { param: String, expected: ParamType, value: String },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

const YEAR_2024: ParamSpec =
    ParamSpec { name: "year", ty: ParamType::Integer, default: "2024", description: "Calendar year of delivery" };

pub const STORED_QUERIES: [StoredQuery; 8] = [
    StoredQuery {
        name: "c_sections_in_year",
        description: "Number of C-sections, programmed and emergency, with delivery in the given year",
        params: &[YEAR_2024],
        sql: "SELECT COUNT(*) AS total_c_sections
FROM (SELECT 1
      FROM programmed_c_section AS pcs
      WHERE EXISTS (SELECT 1 FROM delivery AS d
                    WHERE pcs.pregnancy_id = d.pregnancy_id
                      AND EXTRACT(YEAR FROM d.delivery_date) = $year)
      UNION ALL
      SELECT 1
      FROM delivery_with_labor AS dwl
      WHERE EXISTS (SELECT 1 FROM delivery AS d
                    WHERE dwl.pregnancy_id = d.pregnancy_id
                      AND EXTRACT(YEAR FROM d.delivery_date) = $year
                      AND d.delivery_type = 'emergency_c_section')) AS c_sections",
    },
    StoredQuery {
        name: "ph_below",
        description: "Mother's name and delivery date for newborns with umbilical pH below the threshold",
        params: &[ParamSpec {
            name: "threshold",
            ty: ParamType::Number,
            default: "7.1",
            description: "Exclusive upper bound on newborn pH",
        }],
        sql: "SELECT p.name, d.delivery_date
FROM delivery d
  JOIN newborn n ON d.pregnancy_id = n.pregnancy_id
  JOIN pregnancy pr ON d.pregnancy_id = pr.id
  JOIN patient p ON pr.patient_tc = p.tc
WHERE n.ph < $threshold
ORDER BY d.delivery_date, p.name",
    },
    StoredQuery {
        name: "c_section_motivations",
        description: "Distinct motivations of programmed and emergency C-sections",
        params: &[],
        sql: "SELECT motivation FROM programmed_c_section
UNION
SELECT motivation FROM delivery_with_labor
WHERE delivery_subtype = 'emergency_c_section'",
    },
    StoredQuery {
        name: "laceration_stats",
        description: "Count and percentage of labor deliveries per laceration degree",
        params: &[],
        sql: "SELECT laceration,
       COUNT(*),
       ROUND((COUNT(*) * 100.0 / (SELECT COUNT(*) FROM delivery_with_labor)), 2)
FROM delivery_with_labor
GROUP BY laceration
ORDER BY count DESC, laceration",
    },
    StoredQuery {
        name: "induced_deliveries",
        description: "Deliveries with at least one induction, as a count and as a share of all deliveries",
        params: &[],
        sql: "SELECT COUNT(DISTINCT i.pregnancy_id) AS induced_deliveries_count,
       ROUND((COUNT(DISTINCT i.pregnancy_id) * 100.0
              / COUNT(DISTINCT d.pregnancy_id)), 2) AS induced_deliveries_percentage
FROM delivery d
  LEFT JOIN induction i ON i.pregnancy_id = d.pregnancy_id",
    },
    StoredQuery {
        name: "avg_induction_interval",
        description: "Mean hours from induction administration to expulsion",
        params: &[],
        sql: "SELECT AVG(EXTRACT(EPOCH FROM (d.expulsion_time - i.administration_time))) / 3600
         AS average_interval_hours
FROM induction i
  JOIN delivery_with_labor d ON i.pregnancy_id = d.pregnancy_id",
    },
    StoredQuery {
        name: "inductions_per_patient",
        description: "Inductions per patient for deliveries in the given year",
        params: &[ParamSpec {
            name: "year",
            ty: ParamType::Integer,
            default: "2025",
            description: "Calendar year of delivery",
        }],
        sql: "SELECT p.tc AS patient_tc,
       p.name AS patient_name,
       p.surname AS patient_surname,
       COUNT(i.pregnancy_id) AS number_of_inductions
FROM patient p
  JOIN delivery d ON p.tc = (SELECT patient_tc FROM pregnancy WHERE id = d.pregnancy_id)
  JOIN induction i ON d.pregnancy_id = i.pregnancy_id
WHERE EXTRACT(YEAR FROM d.delivery_date) = $year
GROUP BY p.tc, p.name, p.surname
ORDER BY p.tc",
    },
    StoredQuery {
        name: "ctg_related_patients",
        description: "Patients and pregnancies whose C-section or labor motivation matches a pattern",
        params: &[ParamSpec {
            name: "pattern",
            ty: ParamType::Text,
            default: "%CTG%",
            description: "Case-insensitive LIKE pattern for the motivation",
        }],
        sql: "SELECT p.*, pr.*
FROM patient p
  JOIN pregnancy pr ON p.tc = pr.patient_tc
  JOIN delivery d ON pr.id = d.pregnancy_id
  LEFT JOIN programmed_c_section pcs ON d.pregnancy_id = pcs.pregnancy_id
  LEFT JOIN delivery_with_labor dwl ON d.pregnancy_id = dwl.pregnancy_id
WHERE pcs.motivation ILIKE $pattern OR dwl.motivation ILIKE $pattern
ORDER BY p.tc, pr.id",
    },
];

pub fn find(name: &str) -> Option<&'static StoredQuery> {
    STORED_QUERIES.iter().find(|q| q.name == name)
}

pub type Args = BTreeMap<String, String>;

impl StoredQuery {
    fn literal(&self, spec: &ParamSpec, raw: &str) -> Result<Literal, StoredError> {
        let bad = || StoredError::InvalidParam { param: spec.name.into(), expected: spec.ty, value: raw.into() };
        let raw_trim = raw.trim();
        Ok(match spec.ty {
            ParamType::Integer => Literal::Number(raw_trim.parse::<i64>().map_err(|_| bad())?.to_string()),
            ParamType::Number => {
                let x: f64 = raw_trim.parse().map_err(|_| bad())?;
                if !x.is_finite() {
                    return Err(bad());
                }
                // Decimal text keeps the literal exact.
                let text = raw_trim.parse::<rust_decimal::Decimal>().map(|d| d.to_string()).unwrap_or(x.to_string());
                Literal::Number(if text.contains('.') { text } else { format!("{text}.0") })
            }
            ParamType::Text => Literal::String(raw.to_string()),
        })
    }

    /// Parsed query with every parameter replaced by a literal. Missing
    /// arguments take their defaults.
    pub fn bind(&self, args: &Args) -> Result<Query, StoredError> {
        for name in args.keys() {
            if !self.params.iter().any(|p| p.name == name) {
                return Err(StoredError::UnknownParam { query: self.name.into(), param: name.clone() });
            }
        }
        let mut values = BTreeMap::new();
        for spec in self.params {
            let raw = args.get(spec.name).map_or(spec.default, String::as_str);
            values.insert(spec.name.to_string(), self.literal(spec, raw)?);
        }
        let mut query = parse_sql(self.sql).map_err(|e| StoredError::Pipeline(PipelineError::Syntax(e)))?;
        substitute_query(&mut query, &values);
        Ok(query)
    }

    /// Canonical SQL text after binding.
    pub fn sql_with(&self, args: &Args) -> Result<String, StoredError> {
        Ok(self.bind(args)?.to_string())
    }

    pub fn run(
        &self,
        args: &Args,
        catalog: &Catalog,
        store: &CanonicalStore,
        max_rows: Option<usize>,
    ) -> Result<ResultTable, StoredError> {
        let query = self.bind(args)?;
        let verdict = check_query(&query, Limits { max_rows: max_rows.unwrap_or(usize::MAX), ..Limits::default() });
        if !verdict.accepted {
            return Err(PipelineError::Guardrail(verdict).into());
        }
        let plan = resolve(&query, catalog).map_err(PipelineError::Resolve)?;
        Ok(execute(&plan, store, max_rows).map_err(PipelineError::Execute)?)
    }
}

fn substitute_query(q: &mut Query, values: &BTreeMap<String, Literal>) {
    substitute_set(&mut q.body, values);
    for o in &mut q.order_by {
        substitute_expr(&mut o.expr, values);
    }
}

fn substitute_set(s: &mut SetExpr, values: &BTreeMap<String, Literal>) {
    match s {
        SetExpr::Select(sel) => {
            for item in &mut sel.items {
                if let SelectItem::Expr { expr, .. } = item {
                    substitute_expr(expr, values);
                }
            }
            for t in &mut sel.from {
                substitute_factor(&mut t.factor, values);
                for j in &mut t.joins {
                    substitute_factor(&mut j.factor, values);
                    if let Some(on) = &mut j.on {
                        substitute_expr(on, values);
                    }
                }
            }
            if let Some(w) = &mut sel.selection {
                substitute_expr(w, values);
            }
            for g in &mut sel.group_by {
                substitute_expr(g, values);
            }
        }
        SetExpr::Union { left, right, .. } => {
            substitute_set(left, values);
            substitute_set(right, values);
        }
        SetExpr::Query(q) => substitute_query(q, values),
    }
}

fn substitute_factor(f: &mut TableFactor, values: &BTreeMap<String, Literal>) {
    if let TableFactor::Derived { subquery, .. } = f {
        substitute_query(subquery, values);
    }
}

fn substitute_expr(e: &mut Expr, values: &BTreeMap<String, Literal>) {
    match e {
        Expr::Param(p) => {
            // Unknown names stay and surface as unbound at resolution.
            if let Some(lit) = values.get(&p.value) {
                *e = Expr::Literal(lit.clone());
            }
        }
        Expr::Column { .. } | Expr::Literal(_) => {}
        Expr::Unary { expr, .. }
        | Expr::Nested(expr)
        | Expr::Extract { expr, .. }
        | Expr::Cast { expr, .. }
        | Expr::IsNull { expr, .. } => substitute_expr(expr, values),
        Expr::Binary { left, right, .. } => {
            substitute_expr(left, values);
            substitute_expr(right, values);
        }
        Expr::Function { args, .. } => args.iter_mut().for_each(|a| substitute_expr(a, values)),
        Expr::Exists { subquery, .. } | Expr::Subquery(subquery) => substitute_query(subquery, values),
        Expr::InList { expr, list, .. } => {
            substitute_expr(expr, values);
            list.iter_mut().for_each(|a| substitute_expr(a, values));
        }
        Expr::InSubquery { expr, subquery, .. } => {
            substitute_expr(expr, values);
            substitute_query(subquery, values);
        }
        Expr::Between { expr, low, high, .. } => {
            substitute_expr(expr, values);
            substitute_expr(low, values);
            substitute_expr(high, values);
        }
        Expr::Like { expr, pattern, .. } => {
            substitute_expr(expr, values);
            substitute_expr(pattern, values);
        }
        Expr::Case { operand, branches, else_result } => {
            if let Some(o) = operand {
                substitute_expr(o, values);
            }
            for (w, t) in branches {
                substitute_expr(w, values);
                substitute_expr(t, values);
            }
            if let Some(x) = else_result {
                substitute_expr(x, values);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use peripartum_core::build_catalog;

    #[test]
    fn every_stored_query_binds_and_resolves() {
        let cat = build_catalog();
        for q in &STORED_QUERIES {
            let bound = q.bind(&Args::new()).unwrap();
            assert!(!bound.to_string().contains('$'), "{}", q.name);
            resolve(&bound, &cat).unwrap_or_else(|e| panic!("{}: {e}", q.name));
        }
    }

    #[test]
    fn parameters_become_literals() {
        let q = find("c_sections_in_year").unwrap();
        let args = Args::from([("year".to_string(), "2023".to_string())]);
        let sql = q.sql_with(&args).unwrap();
        assert_eq!(sql.matches("= 2023").count(), 2);
        let q = find("ctg_related_patients").unwrap();
        let args = Args::from([("pattern".to_string(), "%it's%".to_string())]);
        assert!(q.sql_with(&args).unwrap().contains("'%it''s%'"));
    }

    #[test]
    fn bad_arguments_are_rejected() {
        let q = find("c_sections_in_year").unwrap();
        let bad = Args::from([("year".to_string(), "2024; DROP TABLE patient".to_string())]);
        assert!(matches!(q.bind(&bad), Err(StoredError::InvalidParam { .. })));
        let unknown = Args::from([("month".to_string(), "3".to_string())]);
        assert!(matches!(q.bind(&unknown), Err(StoredError::UnknownParam { .. })));
        assert!(find("nope").is_none());
    }
}
