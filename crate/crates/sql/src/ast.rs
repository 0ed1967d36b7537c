//! Parse tree of the supported SELECT subset.
//!
//! Spans are byte ranges into the original text. They never take part in
//! equality, so a tree parsed from pretty-printed text compares equal to the
//! tree it was printed from.

use serde::Serialize;

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn to(self, other: Span) -> Span {
        Span { start: self.start.min(other.start), end: self.end.max(other.end) }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ident {
    pub value: String,
    pub span: Span,
}

impl Ident {
    pub fn new(value: impl Into<String>) -> Self {
        Ident { value: value.into(), span: Span::default() }
    }
}

/// A parsed script: zero or more statements separated by `;`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Script {
    pub statements: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Statement {
    Query(Query),
    /// A recognised but unsupported statement (DDL, DML, ...). Kept so the
    /// guardrail can name it.
    Unsupported { keyword: String, span: Span },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Query {
    pub body: SetExpr,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SetExpr {
    Select(Box<Select>),
    Union { all: bool, left: Box<SetExpr>, right: Box<SetExpr> },
    /// A parenthesised query used as a set operand.
    Query(Box<Query>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Select {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
    pub from: Vec<TableRef>,
    pub selection: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SelectItem {
    Wildcard(Span),
    QualifiedWildcard(Ident),
    Expr { expr: Expr, alias: Option<Ident> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRef {
    pub factor: TableFactor,
    pub joins: Vec<Join>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TableFactor {
    Table { name: Ident, alias: Option<Ident> },
    Derived { subquery: Box<Query>, alias: Ident },
}

impl TableFactor {
    /// The name rows of this factor are qualified by.
    pub fn exposed_name(&self) -> &Ident {
        match self {
            TableFactor::Table { name, alias } => alias.as_ref().unwrap_or(name),
            TableFactor::Derived { alias, .. } => alias,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum JoinKind {
    Inner,
    Left,
    Cross,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Join {
    pub kind: JoinKind,
    pub factor: TableFactor,
    pub on: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderItem {
    pub expr: Expr,
    pub desc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Plus,
    Minus,
    Multiply,
    Divide,
    Modulo,
    Concat,
}

impl BinaryOp {
    pub fn as_str(self) -> &'static str {
        match self {
            BinaryOp::Or => "OR",
            BinaryOp::And => "AND",
            BinaryOp::Eq => "=",
            BinaryOp::NotEq => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::LtEq => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::GtEq => ">=",
            BinaryOp::Plus => "+",
            BinaryOp::Minus => "-",
            BinaryOp::Multiply => "*",
            BinaryOp::Divide => "/",
            BinaryOp::Modulo => "%",
            BinaryOp::Concat => "||",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinaryOp::Eq | BinaryOp::NotEq | BinaryOp::Lt | BinaryOp::LtEq | BinaryOp::Gt | BinaryOp::GtEq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UnaryOp {
    Not,
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DateField {
    Year,
    Month,
    Day,
    Hour,
    Minute,
    Second,
    Epoch,
}

impl DateField {
    pub const ALL: [DateField; 7] = [
        DateField::Year,
        DateField::Month,
        DateField::Day,
        DateField::Hour,
        DateField::Minute,
        DateField::Second,
        DateField::Epoch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DateField::Year => "YEAR",
            DateField::Month => "MONTH",
            DateField::Day => "DAY",
            DateField::Hour => "HOUR",
            DateField::Minute => "MINUTE",
            DateField::Second => "SECOND",
            DateField::Epoch => "EPOCH",
        }
    }
}

/// Type names accepted in typed literals and casts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CastType {
    Date,
    Timestamp,
    Interval,
    Integer,
    Numeric,
    Text,
}

impl CastType {
    pub fn as_str(self) -> &'static str {
        match self {
            CastType::Date => "DATE",
            CastType::Timestamp => "TIMESTAMP",
            CastType::Interval => "INTERVAL",
            CastType::Integer => "INTEGER",
            CastType::Numeric => "NUMERIC",
            CastType::Text => "TEXT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Literal {
    /// Numeric text as written; integers have no `.` or exponent.
    Number(String),
    String(String),
    Bool(bool),
    Null,
    /// `DATE '2024-01-01'`, `INTERVAL '2 hours'`, ...
    Typed { ty: CastType, value: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Expr {
    Column { qualifier: Option<Ident>, name: Ident },
    Literal(Literal),
    /// A named stored-query parameter (`$name`).
    Param(Ident),
    Unary { op: UnaryOp, expr: Box<Expr> },
    Binary { op: BinaryOp, left: Box<Expr>, right: Box<Expr>, span: Span },
    Nested(Box<Expr>),
    Function { name: Ident, distinct: bool, star: bool, args: Vec<Expr> },
    Extract { field: DateField, expr: Box<Expr> },
    Cast { expr: Box<Expr>, ty: CastType },
    Exists { subquery: Box<Query>, negated: bool, span: Span },
    Subquery(Box<Query>),
    InList { expr: Box<Expr>, list: Vec<Expr>, negated: bool },
    InSubquery { expr: Box<Expr>, subquery: Box<Query>, negated: bool },
    Between { expr: Box<Expr>, low: Box<Expr>, high: Box<Expr>, negated: bool },
    Like { expr: Box<Expr>, pattern: Box<Expr>, negated: bool, case_insensitive: bool },
    IsNull { expr: Box<Expr>, negated: bool },
    Case { operand: Option<Box<Expr>>, branches: Vec<(Expr, Expr)>, else_result: Option<Box<Expr>> },
}

impl Expr {
    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Expr {
        Expr::Binary { op, left: Box::new(left), right: Box::new(right), span: Span::default() }
    }

    /// Every subquery directly inside this expression (not inside nested
    /// subqueries).
    pub fn subqueries(&self) -> Vec<&Query> {
        let mut out = Vec::new();
        self.walk(&mut |e| match e {
            Expr::Exists { subquery, .. } | Expr::Subquery(subquery) | Expr::InSubquery { subquery, .. } => {
                out.push(subquery.as_ref())
            }
            _ => {}
        });
        out
    }

    /// Pre-order visit of this expression tree, not descending into subqueries.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Column { .. } | Expr::Literal(_) | Expr::Param(_) => {}
            Expr::Exists { .. } | Expr::Subquery(_) => {}
            Expr::Unary { expr, .. } | Expr::Nested(expr) | Expr::Extract { expr, .. } | Expr::Cast { expr, .. } => {
                expr.walk(f)
            }
            Expr::IsNull { expr, .. } | Expr::InSubquery { expr, .. } => expr.walk(f),
            Expr::Binary { left, right, .. } => {
                left.walk(f);
                right.walk(f);
            }
            Expr::Function { args, .. } => args.iter().for_each(|a| a.walk(f)),
            Expr::InList { expr, list, .. } => {
                expr.walk(f);
                list.iter().for_each(|a| a.walk(f));
            }
            Expr::Between { expr, low, high, .. } => {
                expr.walk(f);
                low.walk(f);
                high.walk(f);
            }
            Expr::Like { expr, pattern, .. } => {
                expr.walk(f);
                pattern.walk(f);
            }
            Expr::Case { operand, branches, else_result } => {
                if let Some(o) = operand {
                    o.walk(f);
                }
                for (w, t) in branches {
                    w.walk(f);
                    t.walk(f);
                }
                if let Some(e) = else_result {
                    e.walk(f);
                }
            }
        }
    }

    /// Byte range of this expression when the parser recorded one.
    pub fn span(&self) -> Option<Span> {
        match self {
            Expr::Column { qualifier, name } => Some(qualifier.as_ref().map_or(name.span, |q| q.span.to(name.span))),
            Expr::Binary { span, .. } | Expr::Exists { span, .. } => Some(*span),
            Expr::Param(i) => Some(i.span),
            Expr::Function { name, .. } => Some(name.span),
            Expr::Nested(e) | Expr::Unary { expr: e, .. } => e.span(),
            _ => None,
        }
    }
}

impl SetExpr {
    /// The SELECT blocks of this set expression, left to right.
    pub fn selects(&self) -> Vec<&Select> {
        match self {
            SetExpr::Select(s) => vec![s],
            SetExpr::Union { left, right, .. } => {
                let mut v = left.selects();
                v.extend(right.selects());
                v
            }
            SetExpr::Query(q) => q.body.selects(),
        }
    }
}

pub const AGGREGATES: [&str; 5] = ["count", "sum", "avg", "min", "max"];

pub fn is_aggregate(name: &str) -> bool {
    AGGREGATES.contains(&name.to_ascii_lowercase().as_str())
}
