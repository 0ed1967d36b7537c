//! Nested-loop evaluator for resolved plans.
//!
//! Semantics follow PostgreSQL for the supported subset: three-valued logic,
//! NULLs sorting last ascending and first descending, aggregates ignoring
//! NULLs, integer division truncating, and division by zero yielding NULL.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::rc::Rc;

use chrono::{Datelike, Timelike};
use peripartum_core::time::{parse_date, Timestamp};
use peripartum_core::{CanonicalStore, Value};
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::{Decimal, RoundingStrategy};
use serde::Serialize;

use crate::ast::{BinaryOp, DateField, UnaryOp};
use crate::plan::*;
use crate::resolve::{parse_interval, subquery_of, walk_bound, ResolvedPlan};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
pub enum ExecError {
    #[error("more than one row returned by a subquery used as an expression")]
    ScalarSubqueryRows,
    #[error("{0}")]
    Type(String),
    #[error("{0}")]
    InvalidInput(String),
    #[error("numeric value out of range")]
    Overflow,
    #[error("relation \"{0}\" does not exist in the store")]
    UnknownRelation(String),
}

type Result<T> = std::result::Result<T, ExecError>;

/// Query output. Row order is meaningful only when the query has ORDER BY.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Set when the row cap cut the result short.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
}

impl ResultTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("result tables serialize")
    }

    /// RFC 4180 CSV with a header row; NULL is the empty field.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            let cells: Vec<String> =
                row.iter().map(|v| if v.is_null() { String::new() } else { v.to_string() }).collect();
            w.write_record(&cells).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// Plain aligned text for terminals.
    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|v| if v.is_null() { String::new() } else { v.to_string() }).collect())
            .collect();
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |items: &[String]| {
            items
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:<w$}", w = *w))
                .collect::<Vec<_>>()
                .join(" | ")
                .trim_end()
                .to_string()
        };
        let mut out = line(&self.columns);
        out.push('\n');
        out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
        out.push('\n');
        for row in &cells {
            out.push_str(&line(row));
            out.push('\n');
        }
        let n = self.rows.len();
        let _ = writeln!(out, "({n} row{})", if n == 1 { "" } else { "s" });
        if self.truncated {
            out.push_str("(result truncated at the row limit)\n");
        }
        out
    }
}

/// Runs a resolved plan against a store snapshot. With `max_rows`, results
/// longer than the cap are cut and flagged as truncated.
pub fn execute(plan: &ResolvedPlan, store: &CanonicalStore, max_rows: Option<usize>) -> Result<ResultTable> {
    execute_query(&plan.query, store, max_rows)
}

pub fn execute_query(query: &BoundQuery, store: &CanonicalStore, max_rows: Option<usize>) -> Result<ResultTable> {
    let exec = Exec { store, tables: RefCell::default(), memo: RefCell::default(), indexes: RefCell::default() };
    let rows = exec.query(query, None)?;
    let mut rows = Rc::try_unwrap(rows).unwrap_or_else(|rc| (*rc).clone());
    let mut truncated = false;
    if let Some(max) = max_rows {
        if rows.len() > max {
            rows.truncate(max);
            truncated = true;
        }
    }
    Ok(ResultTable { columns: query.columns.iter().map(|c| c.name.clone()).collect(), rows, truncated })
}

/// Evaluation environment: the current row, the current group's aggregate
/// values and the enclosing query's environment.
struct Env<'a> {
    row: &'a [Value],
    aggs: &'a [Value],
    parent: Option<&'a Env<'a>>,
}

impl Env<'_> {
    fn get(&self, c: ColumnRef) -> &Value {
        let mut env = self;
        for _ in 0..c.depth {
            env = env.parent.expect("resolver bounds depth");
        }
        &env.row[c.index]
    }
}

type Rows = Rc<Vec<Vec<Value>>>;

/// Row positions grouped by encoded key.
type Buckets = HashMap<String, Vec<usize>>;

struct Exec<'s> {
    store: &'s CanonicalStore,
    tables: RefCell<HashMap<String, Rows>>,
    /// Subquery results keyed by plan node and the outer values it reads.
    memo: RefCell<HashMap<(usize, String), Rows>>,
    /// Equality indexes over base tables, keyed by select node and column.
    indexes: RefCell<HashMap<(usize, usize), Buckets>>,
}

fn truthy(v: &Value) -> bool {
    matches!(v, Value::Bool(true))
}

/// Injective text encoding used for grouping, DISTINCT and UNION. Numerics
/// of equal value share an encoding regardless of representation.
fn encode(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push('N'),
        Value::Bool(b) => out.push(if *b { 'T' } else { 'F' }),
        Value::Int(i) => {
            let _ = write!(out, "n{i}");
        }
        Value::Decimal(d) => {
            let _ = write!(out, "n{}", d.normalize());
        }
        Value::Float(f) => match to_decimal(v) {
            Some(d) if f.is_finite() => {
                let _ = write!(out, "n{}", d.normalize());
            }
            _ => {
                let _ = write!(out, "f{f}");
            }
        },
        Value::Text(s) => {
            let _ = write!(out, "t{}:{s}", s.len());
        }
        Value::Date(d) => {
            let _ = write!(out, "d{d}");
        }
        Value::Timestamp(t) => {
            let _ = write!(out, "s{}", t.epoch_millis());
        }
        Value::Interval(ms) => {
            let _ = write!(out, "i{ms}");
        }
        Value::TextArray(items) => {
            out.push('a');
            for s in items {
                let _ = write!(out, "{}:{s}", s.len());
            }
        }
    }
    out.push('\u{1}');
}

fn row_key(values: &[Value]) -> String {
    let mut key = String::new();
    for v in values {
        encode(v, &mut key);
    }
    key
}

fn dedup(rows: Vec<Vec<Value>>, width: usize) -> Vec<Vec<Value>> {
    let mut seen = std::collections::HashSet::new();
    rows.into_iter().filter(|r| seen.insert(row_key(&r[..width.min(r.len())]))).collect()
}

fn to_decimal(v: &Value) -> Option<Decimal> {
    match v {
        Value::Int(i) => Some(Decimal::from(*i)),
        Value::Decimal(d) => Some(*d),
        // Shortest round-trip text, so 2.675 stays 2.675.
        Value::Float(f) => f.to_string().parse().ok().or_else(|| Decimal::try_from(*f).ok()),
        _ => None,
    }
}

fn parse_temporal(s: &str) -> Option<Value> {
    if let Some(d) = parse_date(s) {
        return Some(Value::Date(d));
    }
    Timestamp::parse(s).ok().map(Value::Timestamp)
}

fn as_timestamp(v: &Value) -> Option<Timestamp> {
    match v {
        Value::Timestamp(t) => Some(*t),
        Value::Date(d) => Some(Timestamp::at_midnight(*d)),
        _ => None,
    }
}

/// SQL comparison. `None` when either side is NULL.
fn compare(a: &Value, b: &Value) -> Result<Option<Ordering>> {
    use Value::*;
    Ok(Some(match (a, b) {
        (Null, _) | (_, Null) => return Ok(None),
        (Int(x), Int(y)) => x.cmp(y),
        (Float(_), _) | (_, Float(_)) if a.as_f64().is_some() && b.as_f64().is_some() => {
            let (x, y) = (a.as_f64().unwrap_or_default(), b.as_f64().unwrap_or_default());
            x.partial_cmp(&y).unwrap_or(Ordering::Equal)
        }
        (Int(_) | Decimal(_), Int(_) | Decimal(_)) => {
            to_decimal(a).unwrap_or_default().cmp(&to_decimal(b).unwrap_or_default())
        }
        (Text(x), Text(y)) => x.cmp(y),
        (Bool(x), Bool(y)) => x.cmp(y),
        (Date(x), Date(y)) => x.cmp(y),
        (Date(_) | Timestamp(_), Date(_) | Timestamp(_)) => as_timestamp(a).cmp(&as_timestamp(b)),
        (Date(_) | Timestamp(_), Text(s)) => {
            let parsed = parse_temporal(s)
                .ok_or_else(|| ExecError::InvalidInput(format!("invalid input syntax for type timestamp: \"{s}\"")))?;
            return compare(a, &parsed);
        }
        (Text(_), Date(_) | Timestamp(_)) => return Ok(compare(b, a)?.map(Ordering::reverse)),
        (Interval(x), Interval(y)) => x.cmp(y),
        (TextArray(x), TextArray(y)) => x.cmp(y),
        // Mismatched kinds (an integer key against a tax code, say) compare
        // by text so the query still runs.
        _ => a.to_string().cmp(&b.to_string()),
    }))
}

/// Total order for sorting; NULL handling is left to the caller.
fn sort_cmp(a: &Value, b: &Value) -> Ordering {
    match compare(a, b) {
        Ok(Some(o)) => o,
        _ => a.to_string().cmp(&b.to_string()),
    }
}

fn order_values(a: &Value, b: &Value, desc: bool) -> Ordering {
    // ASC puts NULLs last, DESC puts them first.
    match (a.is_null(), b.is_null()) {
        (true, true) => Ordering::Equal,
        (true, false) => {
            if desc {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        }
        (false, true) => {
            if desc {
                Ordering::Greater
            } else {
                Ordering::Less
            }
        }
        (false, false) => {
            let o = sort_cmp(a, b);
            if desc {
                o.reverse()
            } else {
                o
            }
        }
    }
}

fn type_error(op: BinaryOp, l: &Value, r: &Value) -> ExecError {
    ExecError::Type(format!("operator {} cannot be applied to {l} and {r}", op.as_str()))
}

fn arith(op: BinaryOp, l: &Value, r: &Value) -> Result<Value> {
    use Value::*;
    if op == BinaryOp::Concat {
        return Ok(match (l, r) {
            (Null, _) | (_, Null) => Null,
            _ => Text(format!("{l}{r}")),
        });
    }
    if l.is_null() || r.is_null() {
        return Ok(Null);
    }
    let numeric = |v: &Value| matches!(v, Int(_) | Float(_) | Decimal(_));
    if numeric(l) && numeric(r) {
        return match (l, r) {
            (Int(a), Int(b)) => {
                let v = match op {
                    BinaryOp::Plus => a.checked_add(*b),
                    BinaryOp::Minus => a.checked_sub(*b),
                    BinaryOp::Multiply => a.checked_mul(*b),
                    BinaryOp::Divide | BinaryOp::Modulo if *b == 0 => return Ok(Null),
                    BinaryOp::Divide => a.checked_div(*b),
                    BinaryOp::Modulo => a.checked_rem(*b),
                    _ => return Err(type_error(op, l, r)),
                };
                v.map(Int).ok_or(ExecError::Overflow)
            }
            (Float(_), _) | (_, Float(_)) => {
                let (a, b) = (l.as_f64().unwrap_or_default(), r.as_f64().unwrap_or_default());
                Ok(match op {
                    BinaryOp::Plus => Float(a + b),
                    BinaryOp::Minus => Float(a - b),
                    BinaryOp::Multiply => Float(a * b),
                    BinaryOp::Divide | BinaryOp::Modulo if b == 0.0 => Null,
                    BinaryOp::Divide => Float(a / b),
                    BinaryOp::Modulo => Float(a % b),
                    _ => return Err(type_error(op, l, r)),
                })
            }
            _ => {
                let (a, b) = (to_decimal(l).unwrap_or_default(), to_decimal(r).unwrap_or_default());
                let v = match op {
                    BinaryOp::Plus => a.checked_add(b),
                    BinaryOp::Minus => a.checked_sub(b),
                    BinaryOp::Multiply => a.checked_mul(b),
                    BinaryOp::Divide | BinaryOp::Modulo if b.is_zero() => return Ok(Null),
                    BinaryOp::Divide => a.checked_div(b),
                    BinaryOp::Modulo => a.checked_rem(b),
                    _ => return Err(type_error(op, l, r)),
                };
                v.map(Decimal).ok_or(ExecError::Overflow)
            }
        };
    }
    let scale = |ms: i64, f: f64| Interval((ms as f64 * f).round() as i64);
    Ok(match (op, l, r) {
        (BinaryOp::Minus, Timestamp(_) | Date(_), Timestamp(_)) | (BinaryOp::Minus, Timestamp(_), Date(_)) => {
            let (a, b) = (as_timestamp(l).expect("temporal"), as_timestamp(r).expect("temporal"));
            Interval(a.millis_since(b))
        }
        (BinaryOp::Minus, Date(a), Date(b)) => Int((*a - *b).num_days()),
        (BinaryOp::Plus, Timestamp(_) | Date(_), Interval(ms)) | (BinaryOp::Plus, Interval(ms), Timestamp(_) | Date(_)) => {
            let t = as_timestamp(if matches!(l, Interval(_)) { r } else { l }).expect("temporal");
            Timestamp(t.plus_millis(*ms))
        }
        (BinaryOp::Minus, Timestamp(_) | Date(_), Interval(ms)) => {
            Timestamp(as_timestamp(l).expect("temporal").plus_millis(-ms))
        }
        (BinaryOp::Plus, Date(d), Int(n)) | (BinaryOp::Plus, Int(n), Date(d)) => {
            Date(*d + chrono::Duration::days(*n))
        }
        (BinaryOp::Minus, Date(d), Int(n)) => Date(*d - chrono::Duration::days(*n)),
        (BinaryOp::Plus, Interval(a), Interval(b)) => Interval(a + b),
        (BinaryOp::Minus, Interval(a), Interval(b)) => Interval(a - b),
        (BinaryOp::Multiply, Interval(ms), n) | (BinaryOp::Multiply, n, Interval(ms)) if numeric(n) => {
            scale(*ms, n.as_f64().unwrap_or_default())
        }
        (BinaryOp::Divide, Interval(ms), n) if numeric(n) => match n.as_f64() {
            Some(f) if f != 0.0 => scale(*ms, 1.0 / f),
            _ => Null,
        },
        _ => return Err(type_error(op, l, r)),
    })
}

fn split_and<'a>(e: &'a BExpr, out: &mut Vec<&'a BExpr>) {
    match e {
        BExpr::Binary { op: BinaryOp::And, left, right, .. } => {
            split_and(left, out);
            split_and(right, out);
        }
        other => out.push(other),
    }
}

/// Whether an expression reads the left part (`< split`) and the right part
/// of the current row, counting columns reached through subqueries.
/// Aggregates count as both, which keeps them off the hash path.
fn sides(e: &BExpr, split: usize) -> (bool, bool) {
    let (mut left, mut right) = (false, false);
    let mut mark = |index: usize| {
        if index < split {
            left = true;
        } else {
            right = true;
        }
    };
    walk_bound(e, &mut |x| match x {
        BExpr::Column(c) if c.depth == 0 => mark(c.index),
        BExpr::Agg(_) => {
            mark(0);
            mark(split);
        }
        other => {
            if let Some(q) = subquery_of(other) {
                q.outer_refs.iter().filter(|r| r.depth == 0).for_each(|r| mark(r.index));
            }
        }
    });
    (left, right)
}

fn like(text: &str, pattern: &str, case_insensitive: bool) -> bool {
    let (t, p): (Vec<char>, Vec<char>) = if case_insensitive {
        (text.to_lowercase().chars().collect(), pattern.to_lowercase().chars().collect())
    } else {
        (text.chars().collect(), pattern.chars().collect())
    };
    // Iterative wildcard match with backtracking to the last `%`.
    let (mut ti, mut pi) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && p[pi] == '\\' && pi + 1 < p.len() {
            if t[ti] == p[pi + 1] {
                ti += 1;
                pi += 2;
                continue;
            }
        } else if pi < p.len() && p[pi] == '%' {
            star = Some((pi, ti));
            pi += 1;
            continue;
        } else if pi < p.len() && (p[pi] == '_' || p[pi] == t[ti]) {
            ti += 1;
            pi += 1;
            continue;
        }
        match star {
            Some((sp, st)) => {
                pi = sp + 1;
                ti = st + 1;
                star = Some((sp, st + 1));
            }
            None => return false,
        }
    }
    while pi < p.len() && p[pi] == '%' {
        pi += 1;
    }
    pi == p.len()
}

fn extract(field: DateField, v: &Value) -> Result<Value> {
    use DateField::*;
    Ok(match v {
        Value::Null => Value::Null,
        Value::Date(d) => match field {
            Year => Value::Int(d.year().into()),
            Month => Value::Int(d.month().into()),
            Day => Value::Int(d.day().into()),
            Hour | Minute => Value::Int(0),
            Second => Value::Float(0.0),
            Epoch => Value::Float(Timestamp::at_midnight(*d).epoch_millis() as f64 / 1000.0),
        },
        Value::Timestamp(t) => {
            let n = t.naive();
            match field {
                Year => Value::Int(n.year().into()),
                Month => Value::Int(n.month().into()),
                Day => Value::Int(n.day().into()),
                Hour => Value::Int(n.hour().into()),
                Minute => Value::Int(n.minute().into()),
                Second => Value::Float(n.second() as f64 + (n.nanosecond() / 1_000_000) as f64 / 1000.0),
                Epoch => Value::Float(t.epoch_millis() as f64 / 1000.0),
            }
        }
        Value::Interval(ms) => match field {
            Epoch => Value::Float(*ms as f64 / 1000.0),
            Year | Month => Value::Int(0),
            Day => Value::Int(ms / 86_400_000),
            Hour => Value::Int((ms / 3_600_000) % 24),
            Minute => Value::Int((ms / 60_000) % 60),
            Second => Value::Float((ms % 60_000) as f64 / 1000.0),
        },
        other => return Err(ExecError::Type(format!("EXTRACT({}) is not defined for {other}", field.as_str()))),
    })
}

fn cast(v: &Value, ty: SqlType) -> Result<Value> {
    let bad = || ExecError::InvalidInput(format!("invalid input syntax for type {}: \"{v}\"", ty.name()));
    Ok(match (v, ty) {
        (Value::Null, _) => Value::Null,
        (_, SqlType::Text) => Value::Text(v.to_string()),
        (Value::Int(_), SqlType::Int) => v.clone(),
        (Value::Float(f), SqlType::Int) => Value::Int(f.round() as i64),
        (Value::Decimal(d), SqlType::Int) => Value::Int(
            d.round_dp_with_strategy(0, RoundingStrategy::MidpointAwayFromZero).to_i64().ok_or(ExecError::Overflow)?,
        ),
        (Value::Text(s), SqlType::Int) => Value::Int(s.trim().parse().map_err(|_| bad())?),
        (Value::Bool(b), SqlType::Int) => Value::Int(i64::from(*b)),
        (Value::Int(_) | Value::Float(_) | Value::Decimal(_), SqlType::Numeric) => {
            Value::Decimal(to_decimal(v).ok_or_else(bad)?)
        }
        (Value::Text(s), SqlType::Numeric) => Value::Decimal(s.trim().parse().map_err(|_| bad())?),
        (Value::Date(_), SqlType::Date) => v.clone(),
        (Value::Timestamp(t), SqlType::Date) => Value::Date(t.date()),
        (Value::Text(s), SqlType::Date) => match parse_temporal(s).ok_or_else(bad)? {
            Value::Timestamp(t) => Value::Date(t.date()),
            d => d,
        },
        (Value::Timestamp(_), SqlType::Timestamp) => v.clone(),
        (Value::Date(d), SqlType::Timestamp) => Value::Timestamp(Timestamp::at_midnight(*d)),
        (Value::Text(s), SqlType::Timestamp) => match parse_temporal(s).ok_or_else(bad)? {
            Value::Date(d) => Value::Timestamp(Timestamp::at_midnight(d)),
            t => t,
        },
        (Value::Interval(_), SqlType::Interval) => v.clone(),
        (Value::Text(s), SqlType::Interval) => Value::Interval(parse_interval(s).ok_or_else(bad)?),
        _ => return Err(ExecError::Type(format!("cannot cast {v} to {}", ty.name()))),
    })
}

impl<'s> Exec<'s> {
    fn table(&self, relation: &str) -> Result<Rows> {
        if let Some(rows) = self.tables.borrow().get(relation) {
            return Ok(rows.clone());
        }
        let rows = Rc::new(self.store.rows(relation).ok_or_else(|| ExecError::UnknownRelation(relation.into()))?);
        self.tables.borrow_mut().insert(relation.to_string(), rows.clone());
        Ok(rows)
    }

    fn query(&self, q: &BoundQuery, env: Option<&Env<'_>>) -> Result<Rows> {
        let mut key = String::new();
        if let Some(env) = env {
            for r in &q.outer_refs {
                encode(env.get(*r), &mut key);
            }
        }
        let memo_key = (q as *const BoundQuery as usize, key);
        if let Some(rows) = self.memo.borrow().get(&memo_key) {
            return Ok(rows.clone());
        }
        let rows = Rc::new(self.query_uncached(q, env)?);
        self.memo.borrow_mut().insert(memo_key, rows.clone());
        Ok(rows)
    }

    fn query_uncached(&self, q: &BoundQuery, env: Option<&Env<'_>>) -> Result<Vec<Vec<Value>>> {
        let width = q.columns.len();
        let extra: Vec<&BExpr> = q
            .order_by
            .iter()
            .filter_map(|o| match &o.key {
                OrderKey::Expr(e) => Some(e),
                OrderKey::Output(_) => None,
            })
            .collect();
        let mut rows = self.set(&q.body, env, &extra)?;
        if !q.order_by.is_empty() {
            let mut positions = Vec::new();
            let mut next_extra = width;
            for o in &q.order_by {
                match o.key {
                    OrderKey::Output(i) => positions.push((i, o.desc)),
                    OrderKey::Expr(_) => {
                        positions.push((next_extra, o.desc));
                        next_extra += 1;
                    }
                }
            }
            rows.sort_by(|a, b| {
                positions
                    .iter()
                    .map(|&(i, desc)| order_values(&a[i], &b[i], desc))
                    .find(|o| *o != Ordering::Equal)
                    .unwrap_or(Ordering::Equal)
            });
        }
        for r in &mut rows {
            r.truncate(width);
        }
        if let Some(n) = q.limit {
            rows.truncate(usize::try_from(n).unwrap_or(usize::MAX));
        }
        Ok(rows)
    }

    fn set(&self, s: &BoundSet, env: Option<&Env<'_>>, extra: &[&BExpr]) -> Result<Vec<Vec<Value>>> {
        match s {
            BoundSet::Select(sel) => self.select(sel, env, extra),
            BoundSet::Query(q) => Ok(self.query(q, env)?.as_ref().clone()),
            BoundSet::Union { all, left, right } => {
                let mut rows = self.set(left, env, &[])?;
                rows.extend(self.set(right, env, &[])?);
                if *all {
                    Ok(rows)
                } else {
                    let width = rows.first().map_or(0, Vec::len);
                    Ok(dedup(rows, width))
                }
            }
        }
    }

    fn factor(&self, f: &BoundFactor, env: Option<&Env<'_>>) -> Result<Rows> {
        match f {
            BoundFactor::Table { relation, .. } => self.table(relation),
            BoundFactor::Derived(q) => self.query(q, env),
        }
    }

    fn from(&self, s: &BoundSelect, env: Option<&Env<'_>>) -> Result<Vec<Vec<Value>>> {
        let mut acc: Vec<Vec<Value>> = vec![Vec::new()];
        for item in &s.from {
            let right = self.factor(&item.factor, env)?;
            acc = acc
                .iter()
                .flat_map(|l| right.iter().map(move |r| l.iter().chain(r).cloned().collect::<Vec<_>>()))
                .collect();
            for join in &item.joins {
                let right = self.factor(&join.factor, env)?;
                let right_width = join.factor.width();
                let left_width = acc.first().map_or(0, Vec::len);
                let index = match &join.on {
                    Some(on) => self.hash_index(on, left_width, right_width, &right, env)?,
                    None => None,
                };
                let all: Vec<usize> = if index.is_none() { (0..right.len()).collect() } else { Vec::new() };
                let mut next = Vec::new();
                for l in &acc {
                    let mut matched = false;
                    let candidates: &[usize] = match &index {
                        Some((keys, buckets)) => {
                            let e = Env { row: l, aggs: &[], parent: env };
                            let mut key = String::new();
                            let mut null = false;
                            for k in keys {
                                let v = self.eval(k, &e)?;
                                null |= v.is_null();
                                encode(&v, &mut key);
                            }
                            if null {
                                &[]
                            } else {
                                buckets.get(&key).map_or(&[], Vec::as_slice)
                            }
                        }
                        None => &all,
                    };
                    for &ri in candidates {
                        let r = &right[ri];
                        let row: Vec<Value> = l.iter().chain(r).cloned().collect();
                        let keep = match &join.on {
                            Some(on) => {
                                let e = Env { row: &row, aggs: &[], parent: env };
                                truthy(&self.eval(on, &e)?)
                            }
                            None => true,
                        };
                        if keep {
                            matched = true;
                            next.push(row);
                        }
                    }
                    if join.kind == BoundJoinKind::Left && !matched {
                        let mut row = l.clone();
                        row.extend(std::iter::repeat_n(Value::Null, right_width));
                        next.push(row);
                    }
                }
                acc = next;
            }
        }
        Ok(acc)
    }

    /// For an ON clause with equality conjuncts that pair a left-only
    /// expression with a right-only one, buckets the right rows by key.
    /// Returns the left key expressions and the buckets. Candidates still
    /// go through the full ON predicate, so this only prunes pairs.
    fn hash_index<'q>(
        &self,
        on: &'q BExpr,
        left_width: usize,
        right_width: usize,
        right: &[Vec<Value>],
        env: Option<&Env<'_>>,
    ) -> Result<Option<(Vec<&'q BExpr>, Buckets)>> {
        let mut conjuncts = Vec::new();
        split_and(on, &mut conjuncts);
        let mut left_keys = Vec::new();
        let mut right_keys = Vec::new();
        for c in conjuncts {
            let BExpr::Binary { op: BinaryOp::Eq, left, right, left_ty, right_ty } = c else { continue };
            let compatible = left_ty == right_ty && *left_ty != SqlType::Null
                || left_ty.is_numeric() && right_ty.is_numeric();
            if !compatible {
                continue;
            }
            match (sides(left, left_width), sides(right, left_width)) {
                ((true, false), (false, true)) => {
                    left_keys.push(left.as_ref());
                    right_keys.push(right.as_ref());
                }
                ((false, true), (true, false)) => {
                    left_keys.push(right.as_ref());
                    right_keys.push(left.as_ref());
                }
                _ => {}
            }
        }
        if left_keys.is_empty() {
            return Ok(None);
        }
        let mut buckets = Buckets::new();
        let mut padded = vec![Value::Null; left_width + right_width];
        'rows: for (i, r) in right.iter().enumerate() {
            padded[left_width..].clone_from_slice(r);
            let e = Env { row: &padded, aggs: &[], parent: env };
            let mut key = String::new();
            for k in &right_keys {
                let v = self.eval(k, &e)?;
                if v.is_null() {
                    continue 'rows;
                }
                encode(&v, &mut key);
            }
            buckets.entry(key).or_default().push(i);
        }
        Ok(Some((left_keys, buckets)))
    }

    /// Correlated lookups such as `WHERE t.fk = outer.id` over a single base
    /// table: rows whose column equals the outer value, via an index built
    /// once per select. The caller still applies the whole filter.
    fn probe(&self, s: &BoundSelect, env: Option<&Env<'_>>) -> Result<Option<Vec<Vec<Value>>>> {
        let (Some(filter), [item]) = (&s.filter, s.from.as_slice()) else { return Ok(None) };
        let BoundFactor::Table { relation, .. } = &item.factor else { return Ok(None) };
        if !item.joins.is_empty() {
            return Ok(None);
        }
        let Some(env) = env else { return Ok(None) };
        let mut conjuncts = Vec::new();
        split_and(filter, &mut conjuncts);
        let probe = conjuncts.iter().find_map(|c| match c {
            BExpr::Binary { op: BinaryOp::Eq, left, right, left_ty, right_ty }
                if left_ty == right_ty || left_ty.is_numeric() && right_ty.is_numeric() =>
            {
                match (left.as_ref(), right.as_ref()) {
                    (BExpr::Column(c), other) | (other, BExpr::Column(c))
                        if c.depth == 0 && sides(other, 0) == (false, false) =>
                    {
                        Some((c.index, other))
                    }
                    _ => None,
                }
            }
            _ => None,
        });
        let Some((column, outer)) = probe else { return Ok(None) };
        // The outer side reads no current-row column, so any row will do.
        let blank = vec![Value::Null; s.width];
        let wanted = self.eval(outer, &Env { row: &blank, aggs: &[], parent: Some(env) })?;
        if wanted.is_null() {
            return Ok(Some(Vec::new()));
        }
        let table = self.table(relation)?;
        let id = (s as *const BoundSelect as usize, column);
        let mut indexes = self.indexes.borrow_mut();
        let index = indexes.entry(id).or_insert_with(|| {
            let mut map = Buckets::new();
            for (i, row) in table.iter().enumerate() {
                if !row[column].is_null() {
                    map.entry(row_key(std::slice::from_ref(&row[column]))).or_default().push(i);
                }
            }
            map
        });
        let hits = index.get(&row_key(std::slice::from_ref(&wanted))).map_or(&[][..], Vec::as_slice);
        Ok(Some(hits.iter().map(|&i| table[i].clone()).collect()))
    }

    fn select(&self, s: &BoundSelect, env: Option<&Env<'_>>, extra: &[&BExpr]) -> Result<Vec<Vec<Value>>> {
        let mut rows = match self.probe(s, env)? {
            Some(rows) => rows,
            None => self.from(s, env)?,
        };
        if let Some(filter) = &s.filter {
            let mut kept = Vec::with_capacity(rows.len());
            for row in rows {
                let keep = truthy(&self.eval(filter, &Env { row: &row, aggs: &[], parent: env })?);
                if keep {
                    kept.push(row);
                }
            }
            rows = kept;
        }

        let project = |row: &[Value], aggs: &[Value]| -> Result<Vec<Value>> {
            let e = Env { row, aggs, parent: env };
            let mut out = Vec::with_capacity(s.projection.len() + extra.len());
            for p in s.projection.iter().chain(extra.iter().copied()) {
                out.push(self.eval(p, &e)?);
            }
            Ok(out)
        };

        let mut out = Vec::new();
        if s.grouped {
            let mut groups: Vec<Vec<usize>> = Vec::new();
            if s.group_by.is_empty() {
                groups.push((0..rows.len()).collect());
            } else {
                let mut index: HashMap<String, usize> = HashMap::new();
                for (i, row) in rows.iter().enumerate() {
                    let e = Env { row, aggs: &[], parent: env };
                    let mut key = String::new();
                    for g in &s.group_by {
                        encode(&self.eval(g, &e)?, &mut key);
                    }
                    let slot = *index.entry(key).or_insert_with(|| {
                        groups.push(Vec::new());
                        groups.len() - 1
                    });
                    groups[slot].push(i);
                }
            }
            let nulls = vec![Value::Null; s.width];
            for group in groups {
                let members: Vec<&[Value]> = group.iter().map(|&i| rows[i].as_slice()).collect();
                let aggs = self.aggregates(&s.aggregates, &members, env)?;
                let rep = members.first().copied().unwrap_or(&nulls);
                out.push(project(rep, &aggs)?);
            }
        } else {
            for row in &rows {
                out.push(project(row, &[])?);
            }
        }
        if s.distinct {
            out = dedup(out, s.projection.len());
        }
        Ok(out)
    }

    fn aggregates(&self, aggs: &[Aggregate], rows: &[&[Value]], env: Option<&Env<'_>>) -> Result<Vec<Value>> {
        let mut out = Vec::with_capacity(aggs.len());
        for agg in aggs {
            let Some(arg) = &agg.arg else {
                out.push(Value::Int(rows.len() as i64));
                continue;
            };
            let mut values = Vec::new();
            for row in rows {
                let v = self.eval(arg, &Env { row, aggs: &[], parent: env })?;
                if !v.is_null() {
                    values.push(v);
                }
            }
            if agg.distinct {
                let mut seen = std::collections::HashSet::new();
                values.retain(|v| seen.insert(row_key(std::slice::from_ref(v))));
            }
            let result = match agg.func {
                AggFunc::Count => Value::Int(values.len() as i64),
                _ if values.is_empty() => Value::Null,
                AggFunc::Sum => {
                    let mut acc = values[0].clone();
                    for v in &values[1..] {
                        acc = arith(BinaryOp::Plus, &acc, v)?;
                    }
                    acc
                }
                AggFunc::Avg => match &values[0] {
                    Value::Interval(_) => {
                        let total: i64 = values.iter().map(|v| if let Value::Interval(ms) = v { *ms } else { 0 }).sum();
                        Value::Interval((total as f64 / values.len() as f64).round() as i64)
                    }
                    _ => {
                        let total: f64 = values.iter().map(|v| v.as_f64().unwrap_or_default()).sum();
                        Value::Float(total / values.len() as f64)
                    }
                },
                AggFunc::Min => values.into_iter().min_by(sort_cmp).unwrap_or(Value::Null),
                AggFunc::Max => values.into_iter().max_by(sort_cmp).unwrap_or(Value::Null),
            };
            out.push(result);
        }
        Ok(out)
    }

    fn scalar_rows(&self, q: &BoundQuery, env: &Env<'_>) -> Result<Rows> {
        self.query(q, Some(env))
    }

    fn eval(&self, e: &BExpr, env: &Env<'_>) -> Result<Value> {
        Ok(match e {
            BExpr::Column(c) => env.get(*c).clone(),
            BExpr::Literal(v) => v.clone(),
            BExpr::Agg(i) => env.aggs[*i].clone(),
            BExpr::Unary { op, expr } => {
                let v = self.eval(expr, env)?;
                match (op, v) {
                    (_, Value::Null) => Value::Null,
                    (UnaryOp::Not, Value::Bool(b)) => Value::Bool(!b),
                    (UnaryOp::Plus, v) => v,
                    (UnaryOp::Minus, Value::Int(i)) => Value::Int(i.checked_neg().ok_or(ExecError::Overflow)?),
                    (UnaryOp::Minus, Value::Float(f)) => Value::Float(-f),
                    (UnaryOp::Minus, Value::Decimal(d)) => Value::Decimal(-d),
                    (UnaryOp::Minus, Value::Interval(ms)) => Value::Interval(-ms),
                    (op, v) => return Err(ExecError::Type(format!("operator {op:?} cannot be applied to {v}"))),
                }
            }
            BExpr::Binary { op: BinaryOp::And, left, right, .. } => {
                let l = self.eval(left, env)?;
                if l == Value::Bool(false) {
                    return Ok(l);
                }
                let r = self.eval(right, env)?;
                match (l, r) {
                    (_, Value::Bool(false)) => Value::Bool(false),
                    (Value::Bool(true), Value::Bool(true)) => Value::Bool(true),
                    _ => Value::Null,
                }
            }
            BExpr::Binary { op: BinaryOp::Or, left, right, .. } => {
                let l = self.eval(left, env)?;
                if l == Value::Bool(true) {
                    return Ok(l);
                }
                let r = self.eval(right, env)?;
                match (l, r) {
                    (_, Value::Bool(true)) => Value::Bool(true),
                    (Value::Bool(false), Value::Bool(false)) => Value::Bool(false),
                    _ => Value::Null,
                }
            }
            BExpr::Binary { op, left, right, .. } if op.is_comparison() => {
                let (l, r) = (self.eval(left, env)?, self.eval(right, env)?);
                match compare(&l, &r)? {
                    None => Value::Null,
                    Some(o) => Value::Bool(match op {
                        BinaryOp::Eq => o == Ordering::Equal,
                        BinaryOp::NotEq => o != Ordering::Equal,
                        BinaryOp::Lt => o == Ordering::Less,
                        BinaryOp::LtEq => o != Ordering::Greater,
                        BinaryOp::Gt => o == Ordering::Greater,
                        _ => o != Ordering::Less,
                    }),
                }
            }
            BExpr::Binary { op, left, right, .. } => arith(*op, &self.eval(left, env)?, &self.eval(right, env)?)?,
            BExpr::Func { func, args } => self.func(*func, args, env)?,
            BExpr::Extract { field, expr } => extract(*field, &self.eval(expr, env)?)?,
            BExpr::Cast { expr, ty } => cast(&self.eval(expr, env)?, *ty)?,
            BExpr::Exists { query, negated } => Value::Bool(self.scalar_rows(query, env)?.is_empty() == *negated),
            BExpr::Subquery(query) => {
                let rows = self.scalar_rows(query, env)?;
                match rows.len() {
                    0 => Value::Null,
                    1 => rows[0][0].clone(),
                    _ => return Err(ExecError::ScalarSubqueryRows),
                }
            }
            BExpr::InSubquery { expr, query, negated } => {
                let v = self.eval(expr, env)?;
                let rows = self.scalar_rows(query, env)?;
                self.membership(&v, rows.iter().map(|r| Ok(r[0].clone())), *negated)?
            }
            BExpr::InList { expr, list, negated } => {
                let v = self.eval(expr, env)?;
                self.membership(&v, list.iter().map(|item| self.eval(item, env)), *negated)?
            }
            BExpr::Between { expr, low, high, negated } => {
                let v = self.eval(expr, env)?;
                let lo = compare(&v, &self.eval(low, env)?)?.map(|o| o != Ordering::Less);
                let hi = compare(&v, &self.eval(high, env)?)?.map(|o| o != Ordering::Greater);
                let inside = match (lo, hi) {
                    (Some(false), _) | (_, Some(false)) => Some(false),
                    (Some(true), Some(true)) => Some(true),
                    _ => None,
                };
                inside.map_or(Value::Null, |b| Value::Bool(b != *negated))
            }
            BExpr::Like { expr, pattern, negated, case_insensitive } => {
                match (self.eval(expr, env)?, self.eval(pattern, env)?) {
                    (Value::Null, _) | (_, Value::Null) => Value::Null,
                    (t, p) => Value::Bool(like(&t.to_string(), &p.to_string(), *case_insensitive) != *negated),
                }
            }
            BExpr::IsNull { expr, negated } => Value::Bool(self.eval(expr, env)?.is_null() != *negated),
            BExpr::Case { operand, branches, else_result } => {
                let subject = match operand {
                    Some(o) => Some(self.eval(o, env)?),
                    None => None,
                };
                for (when, then) in branches {
                    let w = self.eval(when, env)?;
                    let hit = match &subject {
                        Some(s) => compare(s, &w)? == Some(Ordering::Equal),
                        None => truthy(&w),
                    };
                    if hit {
                        return self.eval(then, env);
                    }
                }
                match else_result {
                    Some(e) => self.eval(e, env)?,
                    None => Value::Null,
                }
            }
        })
    }

    fn membership(
        &self,
        v: &Value,
        candidates: impl Iterator<Item = Result<Value>>,
        negated: bool,
    ) -> Result<Value> {
        let mut saw_null = false;
        let mut any = false;
        for c in candidates {
            let c = c?;
            any = true;
            match compare(v, &c)? {
                Some(Ordering::Equal) => return Ok(Value::Bool(!negated)),
                None => saw_null = true,
                Some(_) => {}
            }
        }
        if !any {
            return Ok(Value::Bool(negated));
        }
        Ok(if saw_null { Value::Null } else { Value::Bool(negated) })
    }

    fn func(&self, func: ScalarFunc, args: &[BExpr], env: &Env<'_>) -> Result<Value> {
        if func == ScalarFunc::Coalesce {
            for a in args {
                let v = self.eval(a, env)?;
                if !v.is_null() {
                    return Ok(v);
                }
            }
            return Ok(Value::Null);
        }
        let mut values = Vec::with_capacity(args.len());
        for a in args {
            values.push(self.eval(a, env)?);
        }
        if values.iter().any(Value::is_null) {
            return Ok(Value::Null);
        }
        Ok(match func {
            ScalarFunc::Round => {
                let d = to_decimal(&values[0])
                    .ok_or_else(|| ExecError::Type(format!("round is not defined for {}", values[0])))?;
                let places = match values.get(1) {
                    Some(Value::Int(n)) => *n,
                    _ => 0,
                };
                let places = u32::try_from(places.clamp(0, 28)).unwrap_or(0);
                // Like numeric rounding, the result carries exactly `places` digits.
                let mut r = d.round_dp_with_strategy(places, RoundingStrategy::MidpointAwayFromZero);
                r.rescale(places);
                Value::Decimal(r)
            }
            ScalarFunc::Lower => Value::Text(values[0].to_string().to_lowercase()),
            ScalarFunc::Upper => Value::Text(values[0].to_string().to_uppercase()),
            ScalarFunc::Length => Value::Int(values[0].to_string().chars().count() as i64),
            ScalarFunc::Abs => match &values[0] {
                Value::Int(i) => Value::Int(i.checked_abs().ok_or(ExecError::Overflow)?),
                Value::Float(f) => Value::Float(f.abs()),
                Value::Decimal(d) => Value::Decimal(d.abs()),
                other => return Err(ExecError::Type(format!("abs is not defined for {other}"))),
            },
            ScalarFunc::Coalesce => unreachable!("handled above"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn like_patterns() {
        assert!(like("Abnormal CTG trace", "%CTG%", false));
        assert!(like("abnormal ctg", "%CTG%", true));
        assert!(!like("abnormal ctg", "%CTG%", false));
        assert!(like("abc", "a_c", false));
        assert!(!like("abcd", "a_c", false));
        assert!(like("", "%", false));
        assert!(like("100%", "100\\%", false));
        assert!(like("aXbXc", "%b%c", false));
    }

    #[test]
    fn integer_division_truncates_and_zero_divides_to_null() {
        assert_eq!(arith(BinaryOp::Divide, &Value::Int(7), &Value::Int(2)).unwrap(), Value::Int(3));
        assert_eq!(arith(BinaryOp::Divide, &Value::Int(7), &Value::Int(0)).unwrap(), Value::Null);
        let d = arith(BinaryOp::Multiply, &Value::Int(3), &Value::Decimal("100.0".parse().unwrap())).unwrap();
        assert_eq!(d, Value::Decimal("300.0".parse().unwrap()));
    }

    #[test]
    fn mismatched_kinds_compare_as_text() {
        assert_eq!(compare(&Value::Int(5), &Value::text("RSSMRA")).unwrap(), Some(Ordering::Less));
        assert_eq!(compare(&Value::Int(5), &Value::Null).unwrap(), None);
    }

    #[test]
    fn nulls_sort_last_ascending_first_descending() {
        let mut v = vec![Value::Int(2), Value::Null, Value::Int(1)];
        v.sort_by(|a, b| order_values(a, b, false));
        assert_eq!(v, [Value::Int(1), Value::Int(2), Value::Null]);
        v.sort_by(|a, b| order_values(a, b, true));
        assert_eq!(v, [Value::Null, Value::Int(2), Value::Int(1)]);
    }

    #[test]
    fn interval_extraction() {
        let two_hours = Value::Interval(7_200_000);
        assert_eq!(extract(DateField::Epoch, &two_hours).unwrap(), Value::Float(7200.0));
        assert_eq!(extract(DateField::Hour, &two_hours).unwrap(), Value::Int(2));
    }

    #[test]
    fn numerics_share_group_keys() {
        assert_eq!(row_key(&[Value::Int(1)]), row_key(&[Value::Decimal("1.00".parse().unwrap())]));
        assert_ne!(row_key(&[Value::text("1")]), row_key(&[Value::Int(1)]));
    }
}
