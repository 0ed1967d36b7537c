//! Dynamically typed cell values, shared by row projection and query results.

use std::fmt;

use chrono::NaiveDate;
use rust_decimal::Decimal;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    /// Double precision.
    Float(f64),
    /// Exact decimal (numeric literals and ROUND results).
    Decimal(Decimal),
    Text(String),
    Date(NaiveDate),
    Timestamp(Timestamp),
    /// Elapsed milliseconds.
    Interval(i64),
    TextArray(Vec<String>),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    pub fn opt<T: Into<Value>>(v: Option<T>) -> Self {
        v.map_or(Value::Null, Into::into)
    }

    /// Numeric view, if the value is numeric.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            Value::Decimal(d) => d.to_string().parse().ok(),
            _ => None,
        }
    }

    /// Postgres-style literal for INSERT scripts.
    pub fn to_sql_literal(&self) -> String {
        match self {
            Value::Null => "NULL".into(),
            Value::Bool(b) => if *b { "TRUE" } else { "FALSE" }.into(),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => format_float(*f),
            Value::Decimal(d) => d.to_string(),
            Value::Text(s) => quote(s),
            Value::Date(d) => format!("DATE {}", quote(&d.to_string())),
            Value::Timestamp(t) => format!("TIMESTAMP {}", quote(&t.naive().format("%Y-%m-%d %H:%M:%S%.3f").to_string())),
            Value::Interval(ms) => format!("INTERVAL '{} milliseconds'", ms),
            Value::TextArray(items) => {
                let inner: Vec<String> = items.iter().map(|s| quote(s)).collect();
                format!("ARRAY[{}]::VARCHAR[]", inner.join(", "))
            }
        }
    }
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

pub(crate) fn format_float(f: f64) -> String {
    if f.is_finite() && f.fract() == 0.0 && f.abs() < 1e15 {
        format!("{f:.1}")
    } else {
        f.to_string()
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => f.write_str(&format_float(*x)),
            Value::Decimal(d) => write!(f, "{d}"),
            Value::Text(s) => f.write_str(s),
            Value::Date(d) => write!(f, "{d}"),
            Value::Timestamp(t) => write!(f, "{t}"),
            Value::Interval(ms) => write!(f, "{} seconds", *ms as f64 / 1000.0),
            Value::TextArray(items) => write!(f, "{{{}}}", items.join(",")),
        }
    }
}

/// JSON form: numbers for integers and doubles, strings for exact decimals
/// (so `12.50` keeps its scale), RFC 3339 for timestamps, seconds for intervals.
impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Null => serializer.serialize_none(),
            Value::Bool(b) => serializer.serialize_bool(*b),
            Value::Int(i) => serializer.serialize_i64(*i),
            Value::Float(x) => serializer.serialize_f64(*x),
            Value::Decimal(d) => serializer.serialize_str(&d.to_string()),
            Value::Text(s) => serializer.serialize_str(s),
            Value::Date(d) => serializer.serialize_str(&d.to_string()),
            Value::Timestamp(t) => t.serialize(serializer),
            Value::Interval(ms) => serializer.serialize_f64(*ms as f64 / 1000.0),
            Value::TextArray(items) => {
                let mut seq = serializer.serialize_seq(Some(items.len()))?;
                for item in items {
                    seq.serialize_element(item)?;
                }
                seq.end()
            }
        }
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}
impl From<i32> for Value {
    fn from(v: i32) -> Self {
        Value::Int(v.into())
    }
}
impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}
impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}
impl From<Decimal> for Value {
    fn from(v: Decimal) -> Self {
        Value::Decimal(v)
    }
}
impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}
impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}
impl From<NaiveDate> for Value {
    fn from(v: NaiveDate) -> Self {
        Value::Date(v)
    }
}
impl From<Timestamp> for Value {
    fn from(v: Timestamp) -> Self {
        Value::Timestamp(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_escape_quotes() {
        assert_eq!(Value::text("O'Neil").to_sql_literal(), "'O''Neil'");
        assert_eq!(Value::Float(7.0).to_sql_literal(), "7.0");
        assert_eq!(Value::opt::<i32>(None).to_sql_literal(), "NULL");
    }

    #[test]
    fn decimals_serialize_with_scale() {
        let d = Decimal::new(1250, 2);
        assert_eq!(serde_json::to_string(&Value::Decimal(d)).unwrap(), "\"12.50\"");
    }
}
