//! Bound query trees produced by the resolver and consumed by the executor.
//!
//! Column references are positional: `depth` counts enclosing query levels
//! (0 is the select being evaluated) and `index` is the offset in that
//! level's concatenated FROM row.

use peripartum_core::catalog::{KeyFamily, LogicalType};
use peripartum_core::Value;
use serde::Serialize;

use crate::ast::{BinaryOp, CastType, DateField, UnaryOp};

/// Inferred type of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SqlType {
    Null,
    Bool,
    Int,
    /// Exact decimal.
    Numeric,
    /// Double precision.
    Float,
    Text,
    Json,
    Date,
    Timestamp,
    Interval,
    TextArray,
}

/// Coarse grouping used by the join-key lint and comparison checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeClass {
    Null,
    Bool,
    Numeric,
    Text,
    Temporal,
    Interval,
    Array,
}

impl SqlType {
    pub fn from_logical(ty: LogicalType) -> SqlType {
        match ty {
            LogicalType::Integer => SqlType::Int,
            // Stored as doubles in the canonical model.
            LogicalType::Numeric => SqlType::Float,
            LogicalType::Boolean => SqlType::Bool,
            LogicalType::Char(_) | LogicalType::Varchar | LogicalType::Text => SqlType::Text,
            LogicalType::Jsonb => SqlType::Json,
            LogicalType::Date => SqlType::Date,
            LogicalType::Timestamp => SqlType::Timestamp,
            LogicalType::VarcharArray => SqlType::TextArray,
        }
    }

    pub fn from_cast(ty: CastType) -> SqlType {
        match ty {
            CastType::Date => SqlType::Date,
            CastType::Timestamp => SqlType::Timestamp,
            CastType::Interval => SqlType::Interval,
            CastType::Integer => SqlType::Int,
            CastType::Numeric => SqlType::Numeric,
            CastType::Text => SqlType::Text,
        }
    }

    pub fn class(self) -> TypeClass {
        match self {
            SqlType::Null => TypeClass::Null,
            SqlType::Bool => TypeClass::Bool,
            SqlType::Int | SqlType::Numeric | SqlType::Float => TypeClass::Numeric,
            SqlType::Text | SqlType::Json => TypeClass::Text,
            SqlType::Date | SqlType::Timestamp => TypeClass::Temporal,
            SqlType::Interval => TypeClass::Interval,
            SqlType::TextArray => TypeClass::Array,
        }
    }

    pub fn is_numeric(self) -> bool {
        self.class() == TypeClass::Numeric
    }

    pub fn name(self) -> &'static str {
        match self {
            SqlType::Null => "unknown",
            SqlType::Bool => "boolean",
            SqlType::Int => "integer",
            SqlType::Numeric => "numeric",
            SqlType::Float => "double precision",
            SqlType::Text => "text",
            SqlType::Json => "jsonb",
            SqlType::Date => "date",
            SqlType::Timestamp => "timestamp",
            SqlType::Interval => "interval",
            SqlType::TextArray => "varchar[]",
        }
    }

    /// Common type of two union or CASE branches.
    pub fn unify(a: SqlType, b: SqlType) -> Option<SqlType> {
        use SqlType::*;
        Some(match (a, b) {
            (x, y) if x == y => x,
            (Null, x) | (x, Null) => x,
            (Float, y) | (y, Float) if y.is_numeric() => Float,
            (Numeric, y) | (y, Numeric) if y.is_numeric() => Numeric,
            (Text, Json) | (Json, Text) => Text,
            (Date, Timestamp) | (Timestamp, Date) => Timestamp,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ColumnRef {
    pub depth: usize,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarFunc {
    Round,
    Coalesce,
    Lower,
    Upper,
    Length,
    Abs,
}

impl ScalarFunc {
    pub fn lookup(name: &str) -> Option<ScalarFunc> {
        Some(match name {
            "round" => ScalarFunc::Round,
            "coalesce" => ScalarFunc::Coalesce,
            "lower" => ScalarFunc::Lower,
            "upper" => ScalarFunc::Upper,
            "length" => ScalarFunc::Length,
            "abs" => ScalarFunc::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub fn lookup(name: &str) -> Option<AggFunc> {
        Some(match name {
            "count" => AggFunc::Count,
            "sum" => AggFunc::Sum,
            "avg" => AggFunc::Avg,
            "min" => AggFunc::Min,
            "max" => AggFunc::Max,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub func: AggFunc,
    pub distinct: bool,
    /// `None` for `COUNT(*)`.
    pub arg: Option<BExpr>,
    pub ty: SqlType,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BExpr {
    Column(ColumnRef),
    Literal(Value),
    Unary { op: UnaryOp, expr: Box<BExpr> },
    Binary { op: BinaryOp, left: Box<BExpr>, right: Box<BExpr>, left_ty: SqlType, right_ty: SqlType },
    Func { func: ScalarFunc, args: Vec<BExpr> },
    /// Value of the n-th aggregate of the enclosing grouped select.
    Agg(usize),
    Extract { field: DateField, expr: Box<BExpr> },
    Cast { expr: Box<BExpr>, ty: SqlType },
    Exists { query: Box<BoundQuery>, negated: bool },
    Subquery(Box<BoundQuery>),
    InList { expr: Box<BExpr>, list: Vec<BExpr>, negated: bool },
    InSubquery { expr: Box<BExpr>, query: Box<BoundQuery>, negated: bool },
    Between { expr: Box<BExpr>, low: Box<BExpr>, high: Box<BExpr>, negated: bool },
    Like { expr: Box<BExpr>, pattern: Box<BExpr>, negated: bool, case_insensitive: bool },
    IsNull { expr: Box<BExpr>, negated: bool },
    Case { operand: Option<Box<BExpr>>, branches: Vec<(BExpr, BExpr)>, else_result: Option<Box<BExpr>> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputColumn {
    pub name: String,
    pub ty: SqlType,
    pub key_family: KeyFamily,
    /// Catalog column this output passes through unchanged, if any.
    pub origin: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum OrderKey {
    /// Position in the output row.
    Output(usize),
    /// Expression over the select's input, computed alongside the projection.
    Expr(BExpr),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundOrder {
    pub key: OrderKey,
    pub desc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundQuery {
    pub body: BoundSet,
    pub order_by: Vec<BoundOrder>,
    pub limit: Option<u64>,
    pub columns: Vec<OutputColumn>,
    /// Outer columns this query reads, relative to the environment it is
    /// evaluated in. Empty for uncorrelated queries, which can be cached.
    pub outer_refs: Vec<ColumnRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BoundSet {
    Select(Box<BoundSelect>),
    Union { all: bool, left: Box<BoundSet>, right: Box<BoundSet> },
    Query(Box<BoundQuery>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSelect {
    pub from: Vec<BoundFrom>,
    pub filter: Option<BExpr>,
    pub projection: Vec<BExpr>,
    pub group_by: Vec<BExpr>,
    pub aggregates: Vec<Aggregate>,
    /// Grouped evaluation (GROUP BY or any aggregate).
    pub grouped: bool,
    pub distinct: bool,
    /// Width of the concatenated FROM row.
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundFrom {
    pub factor: BoundFactor,
    pub joins: Vec<BoundJoin>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BoundFactor {
    Table { relation: String, width: usize },
    Derived(Box<BoundQuery>),
}

impl BoundFactor {
    pub fn width(&self) -> usize {
        match self {
            BoundFactor::Table { width, .. } => *width,
            BoundFactor::Derived(q) => q.columns.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundJoinKind {
    Inner,
    Left,
    Cross,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundJoin {
    pub kind: BoundJoinKind,
    pub factor: BoundFactor,
    pub on: Option<BExpr>,
}
