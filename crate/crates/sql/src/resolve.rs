//! Name resolution and type inference.
//!
//! Binds every column reference to exactly one relation in scope, assigns a
//! type to every expression, checks aggregate/GROUP BY consistency and
//! records the facts the lints need (projected columns, predicate columns,
//! comparisons and EXISTS correlations).

use peripartum_core::catalog::{Catalog, KeyFamily};
use peripartum_core::time::{parse_date, Timestamp};
use peripartum_core::Value;
use rust_decimal::Decimal;
use serde::Serialize;

use crate::ast::*;
use crate::plan::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolveErrorKind {
    UnknownTable,
    UnknownColumn,
    AmbiguousColumn,
    DuplicateAlias,
    AggregateMisuse,
    TypeMismatch,
    UnknownFunction,
    UnboundParameter,
    InvalidLiteral,
}

#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{message}")]
pub struct ResolveError {
    pub kind: ResolveErrorKind,
    pub message: String,
    pub span: Option<Span>,
}

fn err<T>(kind: ResolveErrorKind, message: impl Into<String>, span: Option<Span>) -> Result<T, ResolveError> {
    Err(ResolveError { kind, message: message.into(), span })
}

/// One identifier occurrence and what it bound to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnBinding {
    pub span: Span,
    /// Catalog relation, or the alias of a derived table.
    pub relation: String,
    pub column: String,
    pub ty: SqlType,
    pub key_family: KeyFamily,
}

pub type Origin = (String, String);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedColumn {
    pub span: Span,
    pub origin: Origin,
}

/// Per-SELECT facts: which catalog columns it outputs and which appear in
/// its WHERE and ON predicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectFacts {
    pub span: Span,
    pub projected: Vec<ProjectedColumn>,
    pub predicate_columns: Vec<Origin>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperandFact {
    pub text: String,
    pub ty: SqlType,
    pub key_family: KeyFamily,
    /// No column references and no subqueries.
    pub constant: bool,
}

/// A comparison appearing in a WHERE or ON predicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonFact {
    pub span: Span,
    pub op: BinaryOp,
    pub left: OperandFact,
    pub right: OperandFact,
}

/// A WHERE conjunct of an EXISTS subquery that reads outer columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelatedConjunct {
    /// Set when the conjunct is `inner_col = outer_col` on plain columns.
    pub equality: Option<(Origin, Origin)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExistsFact {
    pub span: Span,
    pub negated: bool,
    /// `None` when the subquery body is not a single SELECT.
    pub correlated: Option<Vec<CorrelatedConjunct>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LintFacts {
    pub selects: Vec<SelectFacts>,
    pub comparisons: Vec<ComparisonFact>,
    pub exists: Vec<ExistsFact>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedPlan {
    pub query: BoundQuery,
    pub bindings: Vec<ColumnBinding>,
    pub facts: LintFacts,
}

impl ResolvedPlan {
    pub fn columns(&self) -> &[OutputColumn] {
        &self.query.columns
    }
}

/// Resolves a parsed query against the catalog.
pub fn resolve(query: &Query, catalog: &Catalog) -> Result<ResolvedPlan, ResolveError> {
    let mut r = Resolver {
        catalog,
        scopes: Vec::new(),
        aggs: Vec::new(),
        frames: Vec::new(),
        in_predicate: false,
        bindings: Vec::new(),
        facts: LintFacts::default(),
    };
    let (query, _) = r.query(query)?;
    Ok(ResolvedPlan { query, bindings: r.bindings, facts: r.facts })
}

#[derive(Debug, Clone)]
struct ScopeColumn {
    name: String,
    ty: SqlType,
    family: KeyFamily,
    origin: Option<Origin>,
}

#[derive(Debug, Clone)]
struct ScopeTable {
    name: String,
    /// Catalog relation or derived alias, for bindings.
    source: String,
    columns: Vec<ScopeColumn>,
    offset: usize,
}

#[derive(Debug, Clone, Default)]
struct Scope {
    tables: Vec<ScopeTable>,
    width: usize,
}

impl Scope {
    fn column_at(&self, index: usize) -> Option<(&ScopeTable, &ScopeColumn)> {
        self.tables
            .iter()
            .find(|t| index >= t.offset && index < t.offset + t.columns.len())
            .map(|t| (t, &t.columns[index - t.offset]))
    }
}

enum AggContext {
    Allowed(Vec<Aggregate>),
    Forbidden(&'static str),
}

struct Frame {
    level: usize,
    outer_refs: Vec<ColumnRef>,
}

struct Resolver<'c> {
    catalog: &'c Catalog,
    scopes: Vec<Scope>,
    aggs: Vec<AggContext>,
    frames: Vec<Frame>,
    in_predicate: bool,
    bindings: Vec<ColumnBinding>,
    facts: LintFacts,
}

/// Result of resolving one expression.
struct Typed {
    expr: BExpr,
    ty: SqlType,
    family: KeyFamily,
    /// Plain column reference: depth and catalog origin.
    column: Option<(usize, Option<Origin>)>,
}

impl Typed {
    fn new(expr: BExpr, ty: SqlType) -> Self {
        Typed { expr, ty, family: KeyFamily::Plain, column: None }
    }
}

fn output_name(expr: &Expr) -> String {
    match expr {
        Expr::Column { name, .. } => name.value.clone(),
        Expr::Function { name, .. } => name.value.to_lowercase(),
        Expr::Extract { .. } => "extract".into(),
        Expr::Nested(e) | Expr::Cast { expr: e, .. } => match e.as_ref() {
            Expr::Column { .. } | Expr::Function { .. } | Expr::Nested(_) => output_name(e),
            _ => "?column?".into(),
        },
        Expr::Case { .. } => "case".into(),
        Expr::Exists { .. } => "exists".into(),
        Expr::Subquery(q) => {
            let selects = q.body.selects();
            match selects.first().and_then(|s| s.items.first()) {
                Some(SelectItem::Expr { alias: Some(a), .. }) => a.value.clone(),
                Some(SelectItem::Expr { expr, .. }) => output_name(expr),
                _ => "?column?".into(),
            }
        }
        _ => "?column?".into(),
    }
}

/// Walks a bound expression without entering subqueries.
pub(crate) fn walk_bound<'a>(e: &'a BExpr, f: &mut dyn FnMut(&'a BExpr)) {
    f(e);
    match e {
        BExpr::Column(_) | BExpr::Literal(_) | BExpr::Agg(_) | BExpr::Exists { .. } | BExpr::Subquery(_) => {}
        BExpr::Unary { expr, .. } | BExpr::Extract { expr, .. } | BExpr::Cast { expr, .. } => walk_bound(expr, f),
        BExpr::IsNull { expr, .. } | BExpr::InSubquery { expr, .. } => walk_bound(expr, f),
        BExpr::Binary { left, right, .. } => {
            walk_bound(left, f);
            walk_bound(right, f);
        }
        BExpr::Func { args, .. } => args.iter().for_each(|a| walk_bound(a, f)),
        BExpr::InList { expr, list, .. } => {
            walk_bound(expr, f);
            list.iter().for_each(|a| walk_bound(a, f));
        }
        BExpr::Between { expr, low, high, .. } => {
            walk_bound(expr, f);
            walk_bound(low, f);
            walk_bound(high, f);
        }
        BExpr::Like { expr, pattern, .. } => {
            walk_bound(expr, f);
            walk_bound(pattern, f);
        }
        BExpr::Case { operand, branches, else_result } => {
            if let Some(o) = operand {
                walk_bound(o, f);
            }
            for (w, t) in branches {
                walk_bound(w, f);
                walk_bound(t, f);
            }
            if let Some(e) = else_result {
                walk_bound(e, f);
            }
        }
    }
}

pub(crate) fn subquery_of(e: &BExpr) -> Option<&BoundQuery> {
    match e {
        BExpr::Exists { query, .. } | BExpr::Subquery(query) | BExpr::InSubquery { query, .. } => Some(query),
        _ => None,
    }
}

fn is_constant(e: &BExpr) -> bool {
    let mut constant = true;
    walk_bound(e, &mut |x| {
        if matches!(x, BExpr::Column(_) | BExpr::Agg(_)) || subquery_of(x).is_some() {
            constant = false;
        }
    });
    constant
}

/// Reads columns of an enclosing query: a direct outer reference, or a
/// subquery that itself reaches beyond this level.
fn is_correlated(e: &BExpr) -> bool {
    let mut correlated = false;
    walk_bound(e, &mut |x| match x {
        BExpr::Column(c) if c.depth > 0 => correlated = true,
        other => {
            if let Some(q) = subquery_of(other) {
                if q.outer_refs.iter().any(|r| r.depth > 0) {
                    correlated = true;
                }
            }
        }
    });
    correlated
}

fn conjuncts(e: &BExpr, out: &mut Vec<BExpr>) {
    match e {
        BExpr::Binary { op: BinaryOp::And, left, right, .. } => {
            conjuncts(left, out);
            conjuncts(right, out);
        }
        other => out.push(other.clone()),
    }
}

fn numeric_result(l: SqlType, r: SqlType) -> SqlType {
    use SqlType::*;
    match (l, r) {
        (Float, _) | (_, Float) => Float,
        (Numeric, _) | (_, Numeric) => Numeric,
        (Null, Null) => Null,
        _ => Int,
    }
}

fn arithmetic_type(op: BinaryOp, l: SqlType, r: SqlType) -> Option<SqlType> {
    use SqlType::*;
    let num = |t: SqlType| t.is_numeric() || t == Null;
    Some(match op {
        BinaryOp::Concat => Text,
        BinaryOp::Plus => match (l, r) {
            _ if num(l) && num(r) => numeric_result(l, r),
            (Timestamp, Interval) | (Interval, Timestamp) => Timestamp,
            (Date, Interval) | (Interval, Date) => Timestamp,
            (Date, Int) | (Int, Date) => Date,
            (Interval, Interval) => Interval,
            (Null, x) | (x, Null) => x,
            _ => return None,
        },
        BinaryOp::Minus => match (l, r) {
            _ if num(l) && num(r) => numeric_result(l, r),
            (Timestamp, Timestamp) | (Timestamp, Date) | (Date, Timestamp) => Interval,
            (Date, Date) => Int,
            (Timestamp, Interval) | (Date, Interval) => Timestamp,
            (Date, Int) => Date,
            (Interval, Interval) => Interval,
            (Null, x) | (x, Null) => x,
            _ => return None,
        },
        BinaryOp::Multiply => match (l, r) {
            _ if num(l) && num(r) => numeric_result(l, r),
            (Interval, x) | (x, Interval) if num(x) => Interval,
            _ => return None,
        },
        BinaryOp::Divide => match (l, r) {
            _ if num(l) && num(r) => numeric_result(l, r),
            (Interval, x) if num(x) => Interval,
            _ => return None,
        },
        BinaryOp::Modulo if num(l) && num(r) => numeric_result(l, r),
        _ => return None,
    })
}

/// Parses `'2 hours'`, `'90 minutes 30 seconds'`, `'1 day'` into milliseconds.
pub(crate) fn parse_interval(text: &str) -> Option<i64> {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() || !words.len().is_multiple_of(2) {
        return None;
    }
    let mut total = 0f64;
    for pair in words.chunks(2) {
        let n: f64 = pair[0].parse().ok()?;
        let unit = pair[1].to_ascii_lowercase();
        let ms = match unit.trim_end_matches('s') {
            "millisecond" | "m" => 1.0,
            "second" | "sec" => 1_000.0,
            "minute" | "min" => 60_000.0,
            "hour" | "h" => 3_600_000.0,
            "day" | "d" => 86_400_000.0,
            "week" => 604_800_000.0,
            _ => return None,
        };
        total += n * ms;
    }
    Some(total.round() as i64)
}

pub(crate) fn number_literal(text: &str) -> Option<Value> {
    if text.contains(['.', 'e', 'E']) {
        Decimal::from_str_exact(text).or_else(|_| Decimal::from_scientific(text)).ok().map(Value::Decimal)
    } else {
        match text.parse::<i64>() {
            Ok(i) => Some(Value::Int(i)),
            Err(_) => Decimal::from_str_exact(text).ok().map(Value::Decimal),
        }
    }
}

fn type_of_value(v: &Value) -> SqlType {
    match v {
        Value::Null => SqlType::Null,
        Value::Bool(_) => SqlType::Bool,
        Value::Int(_) => SqlType::Int,
        Value::Float(_) => SqlType::Float,
        Value::Decimal(_) => SqlType::Numeric,
        Value::Text(_) => SqlType::Text,
        Value::Date(_) => SqlType::Date,
        Value::Timestamp(_) => SqlType::Timestamp,
        Value::Interval(_) => SqlType::Interval,
        Value::TextArray(_) => SqlType::TextArray,
    }
}

pub(crate) fn literal_value(lit: &Literal) -> Result<Value, String> {
    Ok(match lit {
        Literal::Number(n) => number_literal(n).ok_or_else(|| format!("invalid number {n}"))?,
        Literal::String(s) => Value::Text(s.clone()),
        Literal::Bool(b) => Value::Bool(*b),
        Literal::Null => Value::Null,
        Literal::Typed { ty, value } => match ty {
            CastType::Date => {
                Value::Date(parse_date(value).ok_or_else(|| format!("invalid input syntax for type date: '{value}'"))?)
            }
            CastType::Timestamp => Value::Timestamp(
                Timestamp::parse(value).map_err(|_| format!("invalid input syntax for type timestamp: '{value}'"))?,
            ),
            CastType::Interval => Value::Interval(
                parse_interval(value).ok_or_else(|| format!("invalid input syntax for type interval: '{value}'"))?,
            ),
            CastType::Integer => {
                Value::Int(value.trim().parse().map_err(|_| format!("invalid input syntax for type integer: '{value}'"))?)
            }
            CastType::Numeric => Value::Decimal(
                value.trim().parse().map_err(|_| format!("invalid input syntax for type numeric: '{value}'"))?,
            ),
            CastType::Text => Value::Text(value.clone()),
        },
    })
}

impl<'c> Resolver<'c> {
    fn level(&self) -> usize {
        self.scopes.len() - 1
    }

    // ---- queries ----------------------------------------------------------

    /// Returns the bound query and, when its body is a single SELECT, the
    /// correlated conjuncts of that SELECT's WHERE clause.
    fn query(&mut self, q: &Query) -> Result<(BoundQuery, Option<Vec<CorrelatedConjunct>>), ResolveError> {
        self.frames.push(Frame { level: self.scopes.len(), outer_refs: Vec::new() });
        let result = self.query_inner(q);
        let frame = self.frames.pop().expect("frame pushed");
        let (body, order_by, columns, correlated) = result?;
        let query = BoundQuery { body, order_by, limit: q.limit, columns, outer_refs: frame.outer_refs };
        Ok((query, correlated))
    }

    #[allow(clippy::type_complexity)]
    fn query_inner(
        &mut self,
        q: &Query,
    ) -> Result<(BoundSet, Vec<BoundOrder>, Vec<OutputColumn>, Option<Vec<CorrelatedConjunct>>), ResolveError> {
        if let SetExpr::Select(select) = &q.body {
            let out = self.select(select, &q.order_by)?;
            return Ok((BoundSet::Select(Box::new(out.select)), out.order_by, out.columns, Some(out.correlated)));
        }
        let (body, columns) = self.set_expr(&q.body)?;
        let mut order_by = Vec::new();
        for item in &q.order_by {
            let key = match &item.expr {
                Expr::Column { qualifier: None, name } => {
                    let hits: Vec<usize> =
                        columns.iter().enumerate().filter(|(_, c)| c.name == name.value).map(|(i, _)| i).collect();
                    match hits.as_slice() {
                        [i] => *i,
                        [] => {
                            return err(
                                ResolveErrorKind::UnknownColumn,
                                format!("ORDER BY column \"{}\" is not an output column of the UNION", name.value),
                                Some(name.span),
                            )
                        }
                        _ => {
                            return err(
                                ResolveErrorKind::AmbiguousColumn,
                                format!("ORDER BY \"{}\" is ambiguous", name.value),
                                Some(name.span),
                            )
                        }
                    }
                }
                Expr::Literal(Literal::Number(n)) => match n.parse::<usize>() {
                    Ok(p) if p >= 1 && p <= columns.len() => p - 1,
                    _ => {
                        return err(
                            ResolveErrorKind::UnknownColumn,
                            format!("ORDER BY position {n} is not in select list"),
                            None,
                        )
                    }
                },
                other => {
                    return err(
                        ResolveErrorKind::UnknownColumn,
                        "ORDER BY on a UNION must name an output column or position",
                        other.span(),
                    )
                }
            };
            order_by.push(BoundOrder { key: OrderKey::Output(key), desc: item.desc });
        }
        Ok((body, order_by, columns, None))
    }

    fn set_expr(&mut self, s: &SetExpr) -> Result<(BoundSet, Vec<OutputColumn>), ResolveError> {
        match s {
            SetExpr::Select(select) => {
                let out = self.select(select, &[])?;
                Ok((BoundSet::Select(Box::new(out.select)), out.columns))
            }
            SetExpr::Query(q) => {
                let (bq, _) = self.query(q)?;
                // The nested query's outer references are ours too.
                let refs = bq.outer_refs.clone();
                if let Some(frame) = self.frames.last_mut() {
                    for r in refs {
                        if !frame.outer_refs.contains(&r) {
                            frame.outer_refs.push(r);
                        }
                    }
                }
                let columns = bq.columns.clone();
                Ok((BoundSet::Query(Box::new(bq)), columns))
            }
            SetExpr::Union { all, left, right } => {
                let (l, lc) = self.set_expr(left)?;
                let (r, rc) = self.set_expr(right)?;
                if lc.len() != rc.len() {
                    return err(
                        ResolveErrorKind::TypeMismatch,
                        format!("each UNION query must have the same number of columns ({} vs {})", lc.len(), rc.len()),
                        None,
                    );
                }
                let mut columns = Vec::with_capacity(lc.len());
                for (a, b) in lc.into_iter().zip(rc) {
                    let Some(ty) = SqlType::unify(a.ty, b.ty) else {
                        return err(
                            ResolveErrorKind::TypeMismatch,
                            format!("UNION types {} and {} cannot be matched", a.ty.name(), b.ty.name()),
                            None,
                        );
                    };
                    let same = a.key_family == b.key_family;
                    columns.push(OutputColumn {
                        name: a.name,
                        ty,
                        key_family: if same { a.key_family } else { KeyFamily::Plain },
                        origin: if a.origin == b.origin { a.origin } else { None },
                    });
                }
                Ok((BoundSet::Union { all: *all, left: Box::new(l), right: Box::new(r) }, columns))
            }
        }
    }

    fn select(&mut self, s: &Select, order_by: &[OrderItem]) -> Result<SelectOut, ResolveError> {
        self.scopes.push(Scope::default());
        self.aggs.push(AggContext::Forbidden("aggregate functions are not allowed in FROM or ON"));
        let saved_predicate = self.in_predicate;
        let result = self.select_inner(s, order_by);
        self.in_predicate = saved_predicate;
        self.aggs.pop();
        self.scopes.pop();
        result
    }

    fn select_inner(&mut self, s: &Select, order_by: &[OrderItem]) -> Result<SelectOut, ResolveError> {
        let mut predicate_exprs: Vec<BExpr> = Vec::new();

        let mut from = Vec::new();
        for tref in &s.from {
            let factor = self.factor(&tref.factor)?;
            let mut joins = Vec::new();
            for join in &tref.joins {
                let jf = self.factor(&join.factor)?;
                let on = match &join.on {
                    Some(e) => {
                        let b = self.predicate(e, "JOIN/ON")?;
                        predicate_exprs.push(b.clone());
                        Some(b)
                    }
                    None => None,
                };
                let kind = match join.kind {
                    JoinKind::Inner => BoundJoinKind::Inner,
                    JoinKind::Left => BoundJoinKind::Left,
                    JoinKind::Cross => BoundJoinKind::Cross,
                };
                joins.push(BoundJoin { kind, factor: jf, on });
            }
            from.push(BoundFrom { factor, joins });
        }

        let filter = match &s.selection {
            Some(e) => {
                let b = self.predicate(e, "WHERE")?;
                predicate_exprs.push(b.clone());
                Some(b)
            }
            None => None,
        };

        self.in_predicate = false;
        *self.aggs.last_mut().expect("agg context") =
            AggContext::Forbidden("aggregate functions are not allowed in GROUP BY");
        let mut group_by = Vec::new();
        for g in &s.group_by {
            group_by.push(self.expr(g)?.expr);
        }

        *self.aggs.last_mut().expect("agg context") = AggContext::Allowed(Vec::new());
        let mut projection = Vec::new();
        let mut columns = Vec::new();
        let mut projected = Vec::new();
        let mut item_spans = Vec::new();
        for item in &s.items {
            match item {
                SelectItem::Wildcard(span) => {
                    let scope = self.scopes.last().expect("scope");
                    if scope.tables.is_empty() {
                        return err(ResolveErrorKind::UnknownColumn, "SELECT * with no tables specified", Some(*span));
                    }
                    let tables: Vec<ScopeTable> = scope.tables.clone();
                    for t in &tables {
                        self.expand_table(t, *span, &mut projection, &mut columns, &mut projected);
                    }
                }
                SelectItem::QualifiedWildcard(q) => {
                    let scope = self.scopes.last().expect("scope");
                    let Some(t) = scope.tables.iter().find(|t| t.name == q.value).cloned() else {
                        return err(
                            ResolveErrorKind::UnknownTable,
                            format!("missing FROM-clause entry for table \"{}\"", q.value),
                            Some(q.span),
                        );
                    };
                    self.expand_table(&t, q.span, &mut projection, &mut columns, &mut projected);
                }
                SelectItem::Expr { expr, alias } => {
                    let typed = self.expr(expr)?;
                    let span = expr.span().unwrap_or(s.span);
                    walk_bound(&typed.expr, &mut |e| {
                        if let BExpr::Column(c) = e {
                            if c.depth == 0 {
                                if let Some(origin) = self.origin_at(c.index) {
                                    projected.push(ProjectedColumn { span, origin });
                                }
                            }
                        }
                    });
                    let name = alias.as_ref().map_or_else(|| output_name(expr), |a| a.value.clone());
                    let origin = match &typed.column {
                        Some((0, origin)) => origin.clone(),
                        _ => None,
                    };
                    columns.push(OutputColumn { name, ty: typed.ty, key_family: typed.family, origin });
                    projection.push(typed.expr);
                    item_spans.push(span);
                }
            }
        }

        let mut bound_order = Vec::new();
        let mut order_spans = Vec::new();
        for item in order_by {
            let key = self.order_key(&item.expr, &columns, &projection)?;
            order_spans.push(item.expr.span());
            bound_order.push(BoundOrder { key, desc: item.desc });
        }

        let AggContext::Allowed(aggregates) =
            std::mem::replace(self.aggs.last_mut().expect("agg context"), AggContext::Forbidden(""))
        else {
            unreachable!("projection context allows aggregates")
        };
        let grouped = !group_by.is_empty() || !aggregates.is_empty();
        if grouped {
            for e in &projection {
                self.check_grouped(e, &group_by)?;
            }
            for o in &bound_order {
                if let OrderKey::Expr(e) = &o.key {
                    self.check_grouped(e, &group_by)?;
                }
            }
        }

        let mut predicate_columns = Vec::new();
        for e in &predicate_exprs {
            walk_bound(e, &mut |x| {
                if let BExpr::Column(c) = x {
                    if c.depth == 0 {
                        if let Some(origin) = self.origin_at(c.index) {
                            predicate_columns.push(origin);
                        }
                    }
                }
            });
        }
        self.facts.selects.push(SelectFacts { span: s.span, projected, predicate_columns });

        let mut correlated = Vec::new();
        if let Some(f) = &filter {
            let mut parts = Vec::new();
            conjuncts(f, &mut parts);
            for part in parts.iter().filter(|p| is_correlated(p)) {
                let equality = match part {
                    BExpr::Binary { op: BinaryOp::Eq, left, right, .. } => match (left.as_ref(), right.as_ref()) {
                        (BExpr::Column(a), BExpr::Column(b)) => {
                            let (inner, outer) = match (a.depth, b.depth) {
                                (0, 1) => (a, b),
                                (1, 0) => (b, a),
                                _ => (a, a),
                            };
                            if inner.depth == 0 && outer.depth == 1 {
                                match (self.origin_at(inner.index), self.origin_at_depth(1, outer.index)) {
                                    (Some(i), Some(o)) => Some((i, o)),
                                    _ => None,
                                }
                            } else {
                                None
                            }
                        }
                        _ => None,
                    },
                    _ => None,
                };
                correlated.push(CorrelatedConjunct { equality });
            }
        }

        let width = self.scopes.last().expect("scope").width;
        let select = BoundSelect {
            from,
            filter,
            projection,
            group_by,
            aggregates,
            grouped,
            distinct: s.distinct,
            width,
        };
        Ok(SelectOut { select, columns, order_by: bound_order, correlated })
    }

    fn expand_table(
        &mut self,
        t: &ScopeTable,
        span: Span,
        projection: &mut Vec<BExpr>,
        columns: &mut Vec<OutputColumn>,
        projected: &mut Vec<ProjectedColumn>,
    ) {
        for (i, c) in t.columns.iter().enumerate() {
            projection.push(BExpr::Column(ColumnRef { depth: 0, index: t.offset + i }));
            columns.push(OutputColumn { name: c.name.clone(), ty: c.ty, key_family: c.family, origin: c.origin.clone() });
            if let Some(origin) = &c.origin {
                projected.push(ProjectedColumn { span, origin: origin.clone() });
            }
        }
    }

    fn origin_at(&self, index: usize) -> Option<Origin> {
        self.origin_at_depth(0, index)
    }

    fn origin_at_depth(&self, depth: usize, index: usize) -> Option<Origin> {
        let scope = self.scopes.get(self.level().checked_sub(depth)?)?;
        scope.column_at(index).and_then(|(_, c)| c.origin.clone())
    }

    fn order_key(&mut self, e: &Expr, columns: &[OutputColumn], projection: &[BExpr]) -> Result<OrderKey, ResolveError> {
        if let Expr::Column { qualifier: None, name } = e {
            let hits: Vec<usize> =
                columns.iter().enumerate().filter(|(_, c)| c.name == name.value).map(|(i, _)| i).collect();
            match hits.as_slice() {
                [i] => return Ok(OrderKey::Output(*i)),
                [] => {}
                _ => {
                    return err(
                        ResolveErrorKind::AmbiguousColumn,
                        format!("ORDER BY \"{}\" is ambiguous", name.value),
                        Some(name.span),
                    )
                }
            }
        }
        if let Expr::Literal(Literal::Number(n)) = e {
            return match n.parse::<usize>() {
                Ok(p) if p >= 1 && p <= columns.len() => Ok(OrderKey::Output(p - 1)),
                _ => err(ResolveErrorKind::UnknownColumn, format!("ORDER BY position {n} is not in select list"), None),
            };
        }
        let typed = self.expr(e)?;
        if let Some(i) = projection.iter().position(|p| *p == typed.expr) {
            return Ok(OrderKey::Output(i));
        }
        Ok(OrderKey::Expr(typed.expr))
    }

    fn check_grouped(&self, e: &BExpr, group_by: &[BExpr]) -> Result<(), ResolveError> {
        if group_by.contains(e) {
            return Ok(());
        }
        match e {
            BExpr::Column(c) if c.depth == 0 => {
                let scope = self.scopes.last().expect("scope");
                let name = scope
                    .column_at(c.index)
                    .map_or_else(|| "?".to_string(), |(t, col)| format!("{}.{}", t.name, col.name));
                err(
                    ResolveErrorKind::AggregateMisuse,
                    format!("column \"{name}\" must appear in the GROUP BY clause or be used in an aggregate function"),
                    None,
                )
            }
            BExpr::Column(_) | BExpr::Literal(_) | BExpr::Agg(_) => Ok(()),
            BExpr::Exists { .. } | BExpr::Subquery(_) => Ok(()),
            BExpr::InSubquery { expr, .. } => self.check_grouped(expr, group_by),
            other => {
                for child in direct_children(other) {
                    self.check_grouped(child, group_by)?;
                }
                Ok(())
            }
        }
    }

    fn factor(&mut self, f: &TableFactor) -> Result<BoundFactor, ResolveError> {
        let (bound, table) = match f {
            TableFactor::Table { name, alias } => {
                let Some(rel) = self.catalog.relation(&name.value) else {
                    return err(
                        ResolveErrorKind::UnknownTable,
                        format!("relation \"{}\" does not exist", name.value),
                        Some(name.span),
                    );
                };
                let columns = rel
                    .columns
                    .iter()
                    .map(|c| ScopeColumn {
                        name: c.name.clone(),
                        ty: SqlType::from_logical(c.ty),
                        family: c.key_family,
                        origin: Some((rel.name.clone(), c.name.clone())),
                    })
                    .collect::<Vec<_>>();
                let exposed = alias.as_ref().unwrap_or(name).value.clone();
                let width = columns.len();
                (
                    BoundFactor::Table { relation: rel.name.clone(), width },
                    ScopeTable { name: exposed, source: rel.name.clone(), columns, offset: 0 },
                )
            }
            TableFactor::Derived { subquery, alias } => {
                // A derived table cannot see the FROM list it appears in.
                let current = self.scopes.pop().expect("scope");
                let saved_aggs = self.aggs.pop().expect("agg context");
                let saved_predicate = self.in_predicate;
                self.in_predicate = false;
                let result = self.query(subquery);
                self.in_predicate = saved_predicate;
                self.aggs.push(saved_aggs);
                self.scopes.push(current);
                let (bq, _) = result?;
                self.propagate_outer_refs(&bq.outer_refs);
                let columns = bq
                    .columns
                    .iter()
                    .map(|c| ScopeColumn { name: c.name.clone(), ty: c.ty, family: c.key_family, origin: c.origin.clone() })
                    .collect();
                (
                    BoundFactor::Derived(Box::new(bq)),
                    ScopeTable { name: alias.value.clone(), source: alias.value.clone(), columns, offset: 0 },
                )
            }
        };
        let scope = self.scopes.last_mut().expect("scope");
        if scope.tables.iter().any(|t| t.name == table.name) {
            return err(
                ResolveErrorKind::DuplicateAlias,
                format!("table name \"{}\" specified more than once", table.name),
                Some(f.exposed_name().span),
            );
        }
        let mut table = table;
        table.offset = scope.width;
        scope.width += table.columns.len();
        scope.tables.push(table);
        Ok(bound)
    }

    /// A derived table is evaluated in the environment of the select that
    /// contains it, so its outer references are that select's as well.
    fn propagate_outer_refs(&mut self, refs: &[ColumnRef]) {
        let level = self.scopes.len() - 1;
        for r in refs {
            // `r.depth` is relative to this select's parent (level - 1).
            let k = level - 1 - r.depth;
            self.record_ref(k, r.index);
        }
    }

    fn record_ref(&mut self, k: usize, index: usize) {
        for frame in &mut self.frames {
            if frame.level > k {
                let r = ColumnRef { depth: frame.level - 1 - k, index };
                if !frame.outer_refs.contains(&r) {
                    frame.outer_refs.push(r);
                }
            }
        }
    }

    fn predicate(&mut self, e: &Expr, clause: &'static str) -> Result<BExpr, ResolveError> {
        let message = if clause == "WHERE" {
            "aggregate functions are not allowed in WHERE"
        } else {
            "aggregate functions are not allowed in JOIN conditions"
        };
        *self.aggs.last_mut().expect("agg context") = AggContext::Forbidden(message);
        self.in_predicate = true;
        let typed = self.expr(e)?;
        self.in_predicate = false;
        if !matches!(typed.ty, SqlType::Bool | SqlType::Null) {
            return err(
                ResolveErrorKind::TypeMismatch,
                format!("argument of {clause} must be type boolean, not type {}", typed.ty.name()),
                e.span(),
            );
        }
        Ok(typed.expr)
    }

    // ---- expressions ------------------------------------------------------

    fn column(&mut self, qualifier: Option<&Ident>, name: &Ident) -> Result<Typed, ResolveError> {
        let span = qualifier.map_or(name.span, |q| q.span.to(name.span));
        let display = match qualifier {
            Some(q) => format!("{}.{}", q.value, name.value),
            None => name.value.clone(),
        };
        for k in (0..self.scopes.len()).rev() {
            let scope = &self.scopes[k];
            let hit = match qualifier {
                Some(q) => {
                    let Some(table) = scope.tables.iter().find(|t| t.name == q.value) else { continue };
                    match table.columns.iter().position(|c| c.name == name.value) {
                        Some(i) => Some((table, i)),
                        None => {
                            return err(
                                ResolveErrorKind::UnknownColumn,
                                format!("column {display} does not exist"),
                                Some(span),
                            )
                        }
                    }
                }
                None => {
                    let mut hits = scope.tables.iter().flat_map(|t| {
                        t.columns.iter().enumerate().filter(|(_, c)| c.name == name.value).map(move |(i, _)| (t, i))
                    });
                    let first = hits.next();
                    if first.is_some() && hits.next().is_some() {
                        return err(
                            ResolveErrorKind::AmbiguousColumn,
                            format!("column reference \"{}\" is ambiguous", name.value),
                            Some(span),
                        );
                    }
                    first
                }
            };
            let Some((table, i)) = hit else { continue };
            let col = &table.columns[i];
            let index = table.offset + i;
            let depth = self.level() - k;
            let typed = Typed {
                expr: BExpr::Column(ColumnRef { depth, index }),
                ty: col.ty,
                family: col.family,
                column: Some((depth, col.origin.clone())),
            };
            self.bindings.push(ColumnBinding {
                span,
                relation: table.source.clone(),
                column: col.name.clone(),
                ty: col.ty,
                key_family: col.family,
            });
            self.record_ref(k, index);
            return Ok(typed);
        }
        match qualifier {
            Some(q) => err(
                ResolveErrorKind::UnknownTable,
                format!("missing FROM-clause entry for table \"{}\"", q.value),
                Some(q.span),
            ),
            None => err(ResolveErrorKind::UnknownColumn, format!("column \"{display}\" does not exist"), Some(span)),
        }
    }

    fn subquery(&mut self, q: &Query) -> Result<(BoundQuery, Option<Vec<CorrelatedConjunct>>), ResolveError> {
        let saved = self.in_predicate;
        self.in_predicate = false;
        let result = self.query(q);
        self.in_predicate = saved;
        result
    }

    fn expr(&mut self, e: &Expr) -> Result<Typed, ResolveError> {
        use ResolveErrorKind::*;
        Ok(match e {
            Expr::Column { qualifier, name } => self.column(qualifier.as_ref(), name)?,
            Expr::Literal(lit) => {
                let v = literal_value(lit).map_err(|m| ResolveError { kind: InvalidLiteral, message: m, span: None })?;
                let ty = type_of_value(&v);
                Typed::new(BExpr::Literal(v), ty)
            }
            Expr::Param(p) => {
                return err(UnboundParameter, format!("parameter ${} has no value", p.value), Some(p.span));
            }
            Expr::Nested(inner) => self.expr(inner)?,
            Expr::Unary { op, expr } => {
                let t = self.expr(expr)?;
                let ok = match op {
                    UnaryOp::Not => matches!(t.ty, SqlType::Bool | SqlType::Null),
                    _ => t.ty.is_numeric() || matches!(t.ty, SqlType::Interval | SqlType::Null),
                };
                if !ok {
                    return err(
                        TypeMismatch,
                        format!("operator {op:?} is not defined for type {}", t.ty.name()),
                        expr.span(),
                    );
                }
                let ty = if *op == UnaryOp::Not { SqlType::Bool } else { t.ty };
                Typed::new(BExpr::Unary { op: *op, expr: Box::new(t.expr) }, ty)
            }
            Expr::Binary { op, left, right, span } => {
                let l = self.expr(left)?;
                let r = self.expr(right)?;
                let ty = match op {
                    BinaryOp::And | BinaryOp::Or => {
                        for (side, t) in [(left, &l), (right, &r)] {
                            if !matches!(t.ty, SqlType::Bool | SqlType::Null) {
                                return err(
                                    TypeMismatch,
                                    format!("argument of {} must be type boolean, not type {}", op.as_str(), t.ty.name()),
                                    side.span(),
                                );
                            }
                        }
                        SqlType::Bool
                    }
                    // Comparisons are permissive: mismatched operands compare
                    // by their text forms at run time and the lints report them.
                    op if op.is_comparison() => SqlType::Bool,
                    op => match arithmetic_type(*op, l.ty, r.ty) {
                        Some(t) => t,
                        None => {
                            return err(
                                TypeMismatch,
                                format!("operator does not exist: {} {} {}", l.ty.name(), op.as_str(), r.ty.name()),
                                Some(*span),
                            )
                        }
                    },
                };
                if op.is_comparison() && self.in_predicate {
                    let operand = |side: &Expr, t: &Typed| OperandFact {
                        text: side.to_string(),
                        ty: t.ty,
                        key_family: t.family,
                        constant: is_constant(&t.expr),
                    };
                    let fact =
                        ComparisonFact { span: *span, op: *op, left: operand(left, &l), right: operand(right, &r) };
                    self.facts.comparisons.push(fact);
                }
                Typed::new(
                    BExpr::Binary {
                        op: *op,
                        left: Box::new(l.expr),
                        right: Box::new(r.expr),
                        left_ty: l.ty,
                        right_ty: r.ty,
                    },
                    ty,
                )
            }
            Expr::Function { name, distinct, star, args } => self.function(name, *distinct, *star, args)?,
            Expr::Extract { field, expr } => {
                let t = self.expr(expr)?;
                if !matches!(t.ty, SqlType::Date | SqlType::Timestamp | SqlType::Interval | SqlType::Null) {
                    return err(
                        TypeMismatch,
                        format!("EXTRACT({}) is not defined for type {}", field.as_str(), t.ty.name()),
                        expr.span(),
                    );
                }
                let ty = match field {
                    DateField::Second | DateField::Epoch => SqlType::Float,
                    _ => SqlType::Int,
                };
                Typed::new(BExpr::Extract { field: *field, expr: Box::new(t.expr) }, ty)
            }
            Expr::Cast { expr, ty } => {
                let t = self.expr(expr)?;
                let ty = SqlType::from_cast(*ty);
                Typed::new(BExpr::Cast { expr: Box::new(t.expr), ty }, ty)
            }
            Expr::Exists { subquery, negated, span } => {
                let (q, correlated) = self.subquery(subquery)?;
                self.facts.exists.push(ExistsFact { span: *span, negated: *negated, correlated });
                Typed::new(BExpr::Exists { query: Box::new(q), negated: *negated }, SqlType::Bool)
            }
            Expr::Subquery(subquery) => {
                let (q, _) = self.subquery(subquery)?;
                if q.columns.len() != 1 {
                    return err(TypeMismatch, "subquery must return only one column", None);
                }
                let col = &q.columns[0];
                let (ty, family) = (col.ty, col.key_family);
                Typed { expr: BExpr::Subquery(Box::new(q)), ty, family, column: None }
            }
            Expr::InSubquery { expr, subquery, negated } => {
                let t = self.expr(expr)?;
                let (q, _) = self.subquery(subquery)?;
                if q.columns.len() != 1 {
                    return err(TypeMismatch, "subquery has too many columns", None);
                }
                Typed::new(
                    BExpr::InSubquery { expr: Box::new(t.expr), query: Box::new(q), negated: *negated },
                    SqlType::Bool,
                )
            }
            Expr::InList { expr, list, negated } => {
                let t = self.expr(expr)?;
                let mut items = Vec::new();
                for item in list {
                    items.push(self.expr(item)?.expr);
                }
                Typed::new(BExpr::InList { expr: Box::new(t.expr), list: items, negated: *negated }, SqlType::Bool)
            }
            Expr::Between { expr, low, high, negated } => {
                let t = self.expr(expr)?;
                let lo = self.expr(low)?;
                let hi = self.expr(high)?;
                Typed::new(
                    BExpr::Between {
                        expr: Box::new(t.expr),
                        low: Box::new(lo.expr),
                        high: Box::new(hi.expr),
                        negated: *negated,
                    },
                    SqlType::Bool,
                )
            }
            Expr::Like { expr, pattern, negated, case_insensitive } => {
                let t = self.expr(expr)?;
                let p = self.expr(pattern)?;
                for (side, ty) in [(expr, t.ty), (pattern, p.ty)] {
                    if !matches!(ty.class(), TypeClass::Text | TypeClass::Null) {
                        let kw = if *case_insensitive { "ILIKE" } else { "LIKE" };
                        return err(
                            TypeMismatch,
                            format!("operator does not exist: {} {kw} text", ty.name()),
                            side.span(),
                        );
                    }
                }
                Typed::new(
                    BExpr::Like {
                        expr: Box::new(t.expr),
                        pattern: Box::new(p.expr),
                        negated: *negated,
                        case_insensitive: *case_insensitive,
                    },
                    SqlType::Bool,
                )
            }
            Expr::IsNull { expr, negated } => {
                let t = self.expr(expr)?;
                Typed::new(BExpr::IsNull { expr: Box::new(t.expr), negated: *negated }, SqlType::Bool)
            }
            Expr::Case { operand, branches, else_result } => {
                let operand = match operand {
                    Some(o) => Some(Box::new(self.expr(o)?.expr)),
                    None => None,
                };
                let mut ty = SqlType::Null;
                let mut bound = Vec::new();
                for (w, t) in branches {
                    let wb = self.expr(w)?;
                    if operand.is_none() && !matches!(wb.ty, SqlType::Bool | SqlType::Null) {
                        return err(
                            TypeMismatch,
                            format!("argument of CASE/WHEN must be type boolean, not type {}", wb.ty.name()),
                            w.span(),
                        );
                    }
                    let tb = self.expr(t)?;
                    ty = self.unify_case(ty, tb.ty)?;
                    bound.push((wb.expr, tb.expr));
                }
                let else_result = match else_result {
                    Some(e) => {
                        let eb = self.expr(e)?;
                        ty = self.unify_case(ty, eb.ty)?;
                        Some(Box::new(eb.expr))
                    }
                    None => None,
                };
                Typed::new(BExpr::Case { operand, branches: bound, else_result }, ty)
            }
        })
    }

    fn unify_case(&self, a: SqlType, b: SqlType) -> Result<SqlType, ResolveError> {
        SqlType::unify(a, b).ok_or_else(|| ResolveError {
            kind: ResolveErrorKind::TypeMismatch,
            message: format!("CASE types {} and {} cannot be matched", a.name(), b.name()),
            span: None,
        })
    }

    fn function(&mut self, name: &Ident, distinct: bool, star: bool, args: &[Expr]) -> Result<Typed, ResolveError> {
        use ResolveErrorKind::*;
        let lname = name.value.to_lowercase();
        if let Some(func) = AggFunc::lookup(&lname) {
            let message = match self.aggs.last().expect("agg context") {
                AggContext::Forbidden(m) => Some(*m),
                AggContext::Allowed(_) => None,
            };
            if let Some(m) = message {
                return err(AggregateMisuse, m, Some(name.span));
            }
            let (arg, arg_ty) = if star {
                if func != AggFunc::Count {
                    return err(TypeMismatch, format!("{}(*) is not supported", lname.to_uppercase()), Some(name.span));
                }
                (None, SqlType::Null)
            } else {
                if args.len() != 1 {
                    return err(
                        TypeMismatch,
                        format!("{} takes exactly one argument", lname.to_uppercase()),
                        Some(name.span),
                    );
                }
                let ctx = std::mem::replace(
                    self.aggs.last_mut().expect("agg context"),
                    AggContext::Forbidden("aggregate function calls cannot be nested"),
                );
                let result = self.expr(&args[0]);
                *self.aggs.last_mut().expect("agg context") = ctx;
                let t = result?;
                (Some(t.expr), t.ty)
            };
            let ty = match func {
                AggFunc::Count => SqlType::Int,
                AggFunc::Sum | AggFunc::Avg => match arg_ty {
                    SqlType::Interval => SqlType::Interval,
                    t if func == AggFunc::Avg && (t.is_numeric() || t == SqlType::Null) => SqlType::Float,
                    t if t.is_numeric() => t,
                    SqlType::Null => SqlType::Int,
                    t => {
                        return err(
                            TypeMismatch,
                            format!("function {}({}) does not exist", lname, t.name()),
                            Some(name.span),
                        )
                    }
                },
                AggFunc::Min | AggFunc::Max => arg_ty,
            };
            let AggContext::Allowed(list) = self.aggs.last_mut().expect("agg context") else { unreachable!() };
            let agg = Aggregate { func, distinct, arg, ty };
            let index = match list.iter().position(|a| *a == agg) {
                Some(i) => i,
                None => {
                    list.push(agg);
                    list.len() - 1
                }
            };
            return Ok(Typed::new(BExpr::Agg(index), ty));
        }

        let Some(func) = ScalarFunc::lookup(&lname) else {
            return err(UnknownFunction, format!("function {lname} does not exist"), Some(name.span));
        };
        if distinct || star {
            return err(UnknownFunction, format!("{} is not an aggregate function", lname), Some(name.span));
        }
        let mut typed = Vec::new();
        for a in args {
            typed.push(self.expr(a)?);
        }
        let arity_error =
            |n: &str| err(TypeMismatch, format!("function {lname} expects {n} argument(s)"), Some(name.span));
        let ty = match func {
            ScalarFunc::Round => {
                if typed.is_empty() || typed.len() > 2 {
                    return arity_error("1 or 2");
                }
                if !(typed[0].ty.is_numeric() || typed[0].ty == SqlType::Null) {
                    return err(
                        TypeMismatch,
                        format!("function round({}) does not exist", typed[0].ty.name()),
                        Some(name.span),
                    );
                }
                if typed.len() == 2 && !matches!(typed[1].ty, SqlType::Int | SqlType::Null) {
                    return err(TypeMismatch, "round precision must be an integer", Some(name.span));
                }
                SqlType::Numeric
            }
            ScalarFunc::Coalesce => {
                if typed.is_empty() {
                    return arity_error("at least 1");
                }
                let mut ty = SqlType::Null;
                for t in &typed {
                    ty = SqlType::unify(ty, t.ty).ok_or_else(|| ResolveError {
                        kind: TypeMismatch,
                        message: format!("COALESCE types {} and {} cannot be matched", ty.name(), t.ty.name()),
                        span: Some(name.span),
                    })?;
                }
                ty
            }
            ScalarFunc::Lower | ScalarFunc::Upper | ScalarFunc::Length => {
                if typed.len() != 1 {
                    return arity_error("1");
                }
                if !matches!(typed[0].ty.class(), TypeClass::Text | TypeClass::Null) {
                    return err(
                        TypeMismatch,
                        format!("function {lname}({}) does not exist", typed[0].ty.name()),
                        Some(name.span),
                    );
                }
                if func == ScalarFunc::Length {
                    SqlType::Int
                } else {
                    SqlType::Text
                }
            }
            ScalarFunc::Abs => {
                if typed.len() != 1 {
                    return arity_error("1");
                }
                if !(typed[0].ty.is_numeric() || typed[0].ty == SqlType::Null) {
                    return err(
                        TypeMismatch,
                        format!("function abs({}) does not exist", typed[0].ty.name()),
                        Some(name.span),
                    );
                }
                typed[0].ty
            }
        };
        Ok(Typed::new(BExpr::Func { func, args: typed.into_iter().map(|t| t.expr).collect() }, ty))
    }
}

struct SelectOut {
    select: BoundSelect,
    columns: Vec<OutputColumn>,
    order_by: Vec<BoundOrder>,
    correlated: Vec<CorrelatedConjunct>,
}

fn direct_children(e: &BExpr) -> Vec<&BExpr> {
    match e {
        BExpr::Column(_) | BExpr::Literal(_) | BExpr::Agg(_) | BExpr::Exists { .. } | BExpr::Subquery(_) => vec![],
        BExpr::Unary { expr, .. } | BExpr::Extract { expr, .. } | BExpr::Cast { expr, .. } => vec![expr],
        BExpr::IsNull { expr, .. } | BExpr::InSubquery { expr, .. } => vec![expr],
        BExpr::Binary { left, right, .. } => vec![left, right],
        BExpr::Func { args, .. } => args.iter().collect(),
        BExpr::InList { expr, list, .. } => std::iter::once(expr.as_ref()).chain(list).collect(),
        BExpr::Between { expr, low, high, .. } => vec![expr, low, high],
        BExpr::Like { expr, pattern, .. } => vec![expr, pattern],
        BExpr::Case { operand, branches, else_result } => {
            let mut v: Vec<&BExpr> = operand.iter().map(|o| o.as_ref()).collect();
            for (w, t) in branches {
                v.push(w);
                v.push(t);
            }
            v.extend(else_result.iter().map(|e| e.as_ref()));
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use peripartum_core::build_catalog;

    use super::*;
    use crate::parser::parse_sql;

    fn plan(sql: &str) -> Result<ResolvedPlan, ResolveError> {
        resolve(&parse_sql(sql).unwrap(), &build_catalog())
    }

    #[test]
    fn unknown_column() {
        let e = plan("SELECT foo FROM patient").unwrap_err();
        assert_eq!(e.kind, ResolveErrorKind::UnknownColumn);
    }

    #[test]
    fn unique_unqualified_name_binds_across_tables() {
        let p = plan("SELECT name FROM patient, pregnancy").unwrap();
        assert_eq!(p.bindings[0].relation, "patient");
        assert_eq!(p.bindings[0].column, "name");
    }

    #[test]
    fn ambiguous_column() {
        let e = plan("SELECT pregnancy_id FROM delivery d JOIN newborn n ON d.pregnancy_id = n.pregnancy_id").unwrap_err();
        assert_eq!(e.kind, ResolveErrorKind::AmbiguousColumn);
    }

    #[test]
    fn ungrouped_column_is_rejected() {
        let e = plan("SELECT name, COUNT(*) FROM patient").unwrap_err();
        assert_eq!(e.kind, ResolveErrorKind::AggregateMisuse);
        assert!(plan("SELECT name, COUNT(*) FROM patient GROUP BY name").is_ok());
        let e = plan("SELECT name FROM patient WHERE COUNT(*) > 1").unwrap_err();
        assert_eq!(e.kind, ResolveErrorKind::AggregateMisuse);
    }

    #[test]
    fn output_names_follow_postgres() {
        let p = plan("SELECT laceration, COUNT(*), ROUND(1.0, 2), EXTRACT(YEAR FROM labor_start_time), 1 FROM delivery_with_labor GROUP BY laceration, labor_start_time").unwrap();
        let names: Vec<&str> = p.columns().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["laceration", "count", "round", "extract", "?column?"]);
    }

    #[test]
    fn correlated_subquery_records_outer_refs() {
        let p = plan("SELECT 1 FROM delivery d WHERE EXISTS (SELECT 1 FROM newborn n WHERE n.pregnancy_id = d.pregnancy_id)")
            .unwrap();
        let BoundSet::Select(s) = &p.query.body else { panic!() };
        let Some(BExpr::Exists { query, .. }) = &s.filter else { panic!() };
        assert_eq!(query.outer_refs, [ColumnRef { depth: 0, index: 0 }]);
        assert!(p.query.outer_refs.is_empty());
    }

    #[test]
    fn interval_text() {
        assert_eq!(parse_interval("2 hours"), Some(7_200_000));
        assert_eq!(parse_interval("1 day 30 minutes"), Some(88_200_000));
        assert_eq!(parse_interval("soon"), None);
    }
}
