//! Read-only guardrail: a single SELECT, bounded subquery nesting and a row
//! cap applied at execution.

use serde::{Deserialize, Serialize};

use crate::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_rows: usize,
    pub max_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_rows: 1000, max_depth: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub accepted: bool,
    /// Uppercase statement keywords in order (`SELECT`, `DROP`, ...).
    pub statements: Vec<String>,
    pub subquery_depth: usize,
    pub max_depth: usize,
    pub row_limit: usize,
    /// Whether execution will cap the result at `row_limit` rows.
    pub row_limit_applied: bool,
    pub reasons: Vec<String>,
}

/// Nesting depth of subqueries (derived tables, EXISTS, IN and scalar
/// subqueries). A query without subqueries has depth 0.
pub fn subquery_depth(q: &Query) -> usize {
    let mut depth = 0;
    for e in &q.order_by {
        depth = depth.max(expr_depth(&e.expr));
    }
    depth.max(set_depth(&q.body))
}

fn set_depth(s: &SetExpr) -> usize {
    match s {
        SetExpr::Select(sel) => select_depth(sel),
        SetExpr::Union { left, right, .. } => set_depth(left).max(set_depth(right)),
        SetExpr::Query(q) => subquery_depth(q),
    }
}

fn select_depth(s: &Select) -> usize {
    let mut depth = 0;
    let factor = |f: &TableFactor| match f {
        TableFactor::Derived { subquery, .. } => 1 + subquery_depth(subquery),
        TableFactor::Table { .. } => 0,
    };
    for t in &s.from {
        depth = depth.max(factor(&t.factor));
        for j in &t.joins {
            depth = depth.max(factor(&j.factor));
            if let Some(on) = &j.on {
                depth = depth.max(expr_depth(on));
            }
        }
    }
    for item in &s.items {
        if let SelectItem::Expr { expr, .. } = item {
            depth = depth.max(expr_depth(expr));
        }
    }
    for e in s.selection.iter().chain(&s.group_by) {
        depth = depth.max(expr_depth(e));
    }
    depth
}

fn expr_depth(e: &Expr) -> usize {
    e.subqueries().into_iter().map(|q| 1 + subquery_depth(q)).max().unwrap_or(0)
}

fn verdict(statements: Vec<String>, depth: usize, limit: Option<u64>, limits: Limits, mut reasons: Vec<String>) -> Verdict {
    if depth > limits.max_depth {
        reasons.push(format!("subquery nesting depth {depth} exceeds the limit of {}", limits.max_depth));
    }
    Verdict {
        accepted: reasons.is_empty(),
        statements,
        subquery_depth: depth,
        max_depth: limits.max_depth,
        row_limit: limits.max_rows,
        row_limit_applied: limit.is_none_or(|n| n > limits.max_rows as u64),
        reasons,
    }
}

/// Verdict for a single parsed query.
pub fn check_query(q: &Query, limits: Limits) -> Verdict {
    verdict(vec!["SELECT".into()], subquery_depth(q), q.limit, limits, Vec::new())
}

/// Verdict for a whole script: exactly one statement, and it must be a query.
pub fn check_script(script: &Script, limits: Limits) -> Verdict {
    let mut reasons = Vec::new();
    let statements: Vec<String> = script
        .statements
        .iter()
        .map(|s| match s {
            Statement::Query(_) => "SELECT".to_string(),
            Statement::Unsupported { keyword, .. } => keyword.clone(),
        })
        .collect();
    for s in &script.statements {
        if let Statement::Unsupported { keyword, .. } = s {
            reasons.push(format!("{keyword} statements are not allowed; only read-only SELECT queries are accepted"));
        }
    }
    match script.statements.len() {
        0 => reasons.push("no statement to run".into()),
        1 => {}
        n => reasons.push(format!("expected a single statement, found {n}")),
    }
    let (depth, limit) = match script.statements.as_slice() {
        [Statement::Query(q)] => (subquery_depth(q), q.limit),
        _ => (
            script
                .statements
                .iter()
                .filter_map(|s| match s {
                    Statement::Query(q) => Some(subquery_depth(q)),
                    _ => None,
                })
                .max()
                .unwrap_or(0),
            None,
        ),
    };
    verdict(statements, depth, limit, limits, reasons)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_sql, parse_statements};

    #[test]
    fn multi_statement_is_rejected() {
        let v = check_script(&parse_statements("SELECT 1; SELECT 2").unwrap(), Limits::default());
        assert!(!v.accepted);
        assert_eq!(v.statements, ["SELECT", "SELECT"]);
    }

    #[test]
    fn modification_is_rejected() {
        let v = check_script(&parse_statements("DELETE FROM patient").unwrap(), Limits::default());
        assert!(!v.accepted);
        assert!(v.reasons[0].contains("DELETE"));
    }

    #[test]
    fn nesting_depth() {
        let mut sql = String::from("SELECT 1 FROM patient p0 WHERE ");
        for i in 1..=5 {
            sql.push_str(&format!("EXISTS (SELECT 1 FROM patient p{i} WHERE "));
        }
        sql.push_str("TRUE");
        sql.push_str(&")".repeat(5));
        let q = parse_sql(&sql).unwrap();
        assert_eq!(subquery_depth(&q), 5);
        let v = check_query(&q, Limits { max_rows: 1000, max_depth: 3 });
        assert!(!v.accepted);
        assert!(v.reasons[0].contains("depth 5"));
    }

    #[test]
    fn row_limit_flag() {
        let limits = Limits::default();
        assert!(check_query(&parse_sql("SELECT 1").unwrap(), limits).row_limit_applied);
        assert!(!check_query(&parse_sql("SELECT 1 LIMIT 10").unwrap(), limits).row_limit_applied);
    }
}
