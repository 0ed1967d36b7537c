//! Cell-level normalization of legacy spreadsheet tokens.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::{DeliveryType, Laceration, OperativeInstrument, PlacentalExpulsion};
use crate::time::{parse_date, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoolEncoding {
    /// `1` true, `0` false.
    ZeroOne,
    /// `YES`/`NO` (also `SI`/`SÌ`), case-insensitive.
    YesNo,
    /// Blank when false, some integer when true; the integer is kept as a note.
    PresenceInteger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vocabulary {
    DeliveryMode,
    Laceration,
    PlacentalExpulsion,
    Instrument,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueKind {
    Text,
    Integer,
    Decimal,
    Date,
    Timestamp,
    Flag { encoding: BoolEncoding },
    /// A flag optionally followed by free text, e.g. `1 because of ...`.
    FlagWithReason { encoding: BoolEncoding },
    Apgar,
    /// Opaque integer category code, stored as `code:N`.
    Coded,
    Choice { vocabulary: Vocabulary },
    /// The realignment sentinel column.
    Marker,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnPolicy {
    #[serde(default)]
    pub missing_markers: BTreeSet<String>,
    pub value_kind: ValueKind,
}

impl ColumnPolicy {
    pub fn new(value_kind: ValueKind) -> Self {
        ColumnPolicy { missing_markers: BTreeSet::new(), value_kind }
    }

    pub fn missing(mut self, markers: &[&str]) -> Self {
        self.missing_markers.extend(markers.iter().map(|m| m.to_string()));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Apgar {
    pub apgar_1: i32,
    pub apgar_5: i32,
    pub apgar_10: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Flag {
    pub value: bool,
    /// Provenance carried by the token (presence integer or trailing reason).
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Typed {
    Text(String),
    Int(i64),
    Decimal(f64),
    Date(NaiveDate),
    Timestamp(Timestamp),
    Flag(Flag),
    Apgar(Apgar),
    Code(String),
    Choice(&'static str),
    Marker,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Normalized {
    Missing,
    Value(Typed),
    /// The token is outside the column's domain; carried upstream as a
    /// quarantine reason, never coerced.
    Conflict { token: String, reason: String },
}

impl Normalized {
    fn conflict(token: &str, reason: impl Into<String>) -> Self {
        Normalized::Conflict { token: token.to_string(), reason: reason.into() }
    }
}

/// Tokens that mean "no value" regardless of column.
pub fn is_universal_missing(token: &str) -> bool {
    let t = token.trim();
    t.is_empty() || t == "//" || t.eq_ignore_ascii_case("missing")
}

/// Parses a boolean token. `Ok(None)` is missing; `Err` is an
/// out-of-domain token (the value is then missing and the reason reported).
pub fn parse_bool(token: &str, encoding: BoolEncoding) -> Result<Option<Flag>, String> {
    let t = token.trim();
    let flag = |value: bool| Ok(Some(Flag { value, note: None }));
    match encoding {
        BoolEncoding::ZeroOne => match t {
            "" => Ok(None),
            "1" => flag(true),
            "0" => flag(false),
            other => Err(format!("`{other}` is not 0 or 1")),
        },
        BoolEncoding::YesNo => match t.to_uppercase().as_str() {
            "" => Ok(None),
            "YES" | "Y" | "SI" | "SÌ" => flag(true),
            "NO" | "N" => flag(false),
            _ => Err(format!("`{t}` is not YES or NO")),
        },
        BoolEncoding::PresenceInteger => {
            if t.is_empty() {
                flag(false)
            } else if t.parse::<i64>().is_ok() {
                Ok(Some(Flag { value: true, note: Some(t.to_string()) }))
            } else {
                Err(format!("`{t}` is neither blank nor an integer"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid Apgar `{text}`: {reason}")]
pub struct ApgarError {
    pub text: String,
    pub reason: String,
}

/// `a1-a5` or `a1-a5-a10`, each 0–10.
pub fn parse_apgar(text: &str) -> Result<Apgar, ApgarError> {
    let err = |reason: String| ApgarError { text: text.to_string(), reason };
    let parts: Vec<&str> = text.trim().split('-').map(str::trim).collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(err(format!("expected 2 or 3 scores, found {}", parts.len())));
    }
    let mut scores = Vec::with_capacity(3);
    for p in &parts {
        let score: i32 = p.parse().map_err(|_| err(format!("`{p}` is not an integer")))?;
        if !(0..=10).contains(&score) {
            return Err(err(format!("{score} is outside 0–10")));
        }
        scores.push(score);
    }
    Ok(Apgar { apgar_1: scores[0], apgar_5: scores[1], apgar_10: scores.get(2).copied() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Episode {
    Consistent,
    Conflict,
    FlagOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reconciled {
    pub value: Option<String>,
    pub episode: Episode,
}

/// Reconciles a presence flag with the companion value column.
pub fn reconcile_flag_value(flag: Option<bool>, value: Option<&str>) -> Reconciled {
    let value = value.map(str::trim).filter(|v| !v.is_empty()).map(str::to_string);
    match (flag, value) {
        (Some(true), Some(v)) => Reconciled { value: Some(v), episode: Episode::Consistent },
        (_, Some(v)) => Reconciled { value: Some(v), episode: Episode::Conflict },
        (Some(true), None) => Reconciled { value: None, episode: Episode::FlagOnly },
        (_, None) => Reconciled { value: None, episode: Episode::Consistent },
    }
}

fn choice(vocabulary: Vocabulary, token: &str) -> Option<&'static str> {
    let t = token.trim().to_lowercase().replace(['-', '_'], " ");
    let t = t.split_whitespace().collect::<Vec<_>>().join(" ");
    let out = match vocabulary {
        Vocabulary::DeliveryMode => match t.as_str() {
            "natural" | "spontaneous" | "spontaneo" | "vaginal" => DeliveryType::Natural.as_str(),
            "operative" | "operativo" => DeliveryType::Operative.as_str(),
            "emergency c section" | "urgent c section" | "tc urgente" | "emergency caesarean" => {
                DeliveryType::EmergencyCSection.as_str()
            }
            "programmed c section" | "elective c section" | "tc elettivo" | "elective caesarean" => {
                DeliveryType::ProgrammedCSection.as_str()
            }
            _ => return None,
        },
        Vocabulary::Laceration => match t.as_str() {
            "none" | "no" | "0" | "intact" | "integro" => Laceration::None.as_str(),
            "1" | "first degree" | "i" | "1st" => Laceration::FirstDegree.as_str(),
            "2" | "second degree" | "ii" | "2nd" => Laceration::SecondDegree.as_str(),
            "3" | "third degree" | "iii" | "3rd" => Laceration::ThirdDegree.as_str(),
            "4" | "fourth degree" | "iv" | "4th" => Laceration::FourthDegree.as_str(),
            _ => return None,
        },
        Vocabulary::PlacentalExpulsion => match t.as_str() {
            "spontaneous" | "spontanea" => PlacentalExpulsion::Spontaneous.as_str(),
            "manual" | "manuale" => PlacentalExpulsion::Manual.as_str(),
            "curettage" | "revisione" => PlacentalExpulsion::Curettage.as_str(),
            _ => return None,
        },
        Vocabulary::Instrument => match t.as_str() {
            "vacuum" | "ventosa" => OperativeInstrument::Vacuum.as_str(),
            "forceps" | "forcipe" => OperativeInstrument::Forceps.as_str(),
            _ => return None,
        },
    };
    Some(out)
}

/// Maps one raw token to a typed value under the column's policy.
pub fn normalize_cell(token: &str, policy: &ColumnPolicy) -> Normalized {
    let t = token.trim();
    if is_universal_missing(t) || policy.missing_markers.contains(t) {
        return Normalized::Missing;
    }
    match policy.value_kind {
        ValueKind::Text => Normalized::Value(Typed::Text(t.to_string())),
        ValueKind::Integer => match t.parse::<i64>() {
            Ok(i) => Normalized::Value(Typed::Int(i)),
            Err(_) => Normalized::conflict(t, "not an integer"),
        },
        ValueKind::Decimal => match t.replace(',', ".").parse::<f64>() {
            Ok(x) if x.is_finite() => Normalized::Value(Typed::Decimal(x)),
            _ => Normalized::conflict(t, "not a decimal number"),
        },
        ValueKind::Date => match parse_date(t) {
            Some(d) => Normalized::Value(Typed::Date(d)),
            None => Normalized::conflict(t, "not a date"),
        },
        ValueKind::Timestamp => match Timestamp::parse(t) {
            Ok(ts) => Normalized::Value(Typed::Timestamp(ts)),
            Err(e) => Normalized::conflict(t, e.to_string()),
        },
        ValueKind::Flag { encoding } => match parse_bool(t, encoding) {
            Ok(Some(f)) => Normalized::Value(Typed::Flag(f)),
            Ok(None) => Normalized::Missing,
            Err(reason) => Normalized::conflict(t, reason),
        },
        ValueKind::FlagWithReason { encoding } => {
            let (head, rest) = match t.split_once(char::is_whitespace) {
                Some((h, r)) => (h, Some(r.trim())),
                None => (t, None),
            };
            match parse_bool(head, encoding) {
                Ok(Some(mut f)) => {
                    if let Some(reason) = rest.filter(|r| !r.is_empty()) {
                        f.note = Some(reason.to_string());
                    }
                    Normalized::Value(Typed::Flag(f))
                }
                Ok(None) => Normalized::Missing,
                Err(reason) => Normalized::conflict(t, reason),
            }
        }
        ValueKind::Apgar => match parse_apgar(t) {
            Ok(a) => Normalized::Value(Typed::Apgar(a)),
            Err(e) => Normalized::conflict(t, e.reason),
        },
        ValueKind::Coded => match t.parse::<i64>() {
            Ok(i) => Normalized::Value(Typed::Code(format!("code:{i}"))),
            Err(_) => Normalized::conflict(t, "not an integer category code"),
        },
        ValueKind::Choice { vocabulary } => match choice(vocabulary, t) {
            Some(c) => Normalized::Value(Typed::Choice(c)),
            None => Normalized::conflict(t, format!("not a known {vocabulary:?} value")),
        },
        ValueKind::Marker => Normalized::Value(Typed::Marker),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy(kind: ValueKind) -> ColumnPolicy {
        ColumnPolicy::new(kind)
    }

    #[test]
    fn double_slash_and_blank_are_missing() {
        let text = policy(ValueKind::Text).missing(&["0"]);
        assert_eq!(normalize_cell("//", &text), Normalized::Missing);
        assert_eq!(normalize_cell("", &text), Normalized::Missing);
        assert_eq!(normalize_cell("0", &text), Normalized::Missing);
        assert_eq!(normalize_cell("missing", &policy(ValueKind::Integer)), Normalized::Missing);
    }

    #[test]
    fn zero_is_false_unless_listed_as_missing() {
        let flag = policy(ValueKind::Flag { encoding: BoolEncoding::ZeroOne });
        assert_eq!(normalize_cell("0", &flag), Normalized::Value(Typed::Flag(Flag { value: false, note: None })));
    }

    #[test]
    fn bool_encodings() {
        assert_eq!(
            parse_bool("616", BoolEncoding::PresenceInteger),
            Ok(Some(Flag { value: true, note: Some("616".into()) }))
        );
        assert_eq!(parse_bool("", BoolEncoding::PresenceInteger), Ok(Some(Flag { value: false, note: None })));
        assert_eq!(parse_bool("NO", BoolEncoding::YesNo), Ok(Some(Flag { value: false, note: None })));
        assert_eq!(parse_bool("yes", BoolEncoding::YesNo), Ok(Some(Flag { value: true, note: None })));
        assert!(parse_bool("2", BoolEncoding::ZeroOne).is_err());
    }

    #[test]
    fn flag_with_reason_keeps_reason() {
        let p = policy(ValueKind::FlagWithReason { encoding: BoolEncoding::ZeroOne });
        assert_eq!(
            normalize_cell("1 because of FHR < 5°P", &p),
            Normalized::Value(Typed::Flag(Flag { value: true, note: Some("because of FHR < 5°P".into()) }))
        );
        assert_eq!(normalize_cell("0", &p), Normalized::Value(Typed::Flag(Flag { value: false, note: None })));
    }

    #[test]
    fn apgar_forms() {
        assert_eq!(parse_apgar("9-10").unwrap(), Apgar { apgar_1: 9, apgar_5: 10, apgar_10: None });
        assert_eq!(parse_apgar("6-8-9").unwrap(), Apgar { apgar_1: 6, apgar_5: 8, apgar_10: Some(9) });
        let e = parse_apgar("11-9").unwrap_err();
        assert_eq!(e.text, "11-9");
        assert!(parse_apgar("9").is_err());
        assert!(parse_apgar("9-9-9-9").is_err());
    }

    #[test]
    fn flag_value_reconciliation() {
        assert_eq!(
            reconcile_flag_value(Some(true), Some("epidural")),
            Reconciled { value: Some("epidural".into()), episode: Episode::Consistent }
        );
        assert_eq!(reconcile_flag_value(Some(false), Some("epidural")).episode, Episode::Conflict);
        assert_eq!(reconcile_flag_value(None, None), Reconciled { value: None, episode: Episode::Consistent });
        assert_eq!(reconcile_flag_value(Some(true), None).episode, Episode::FlagOnly);
        assert_eq!(reconcile_flag_value(None, Some("rigid perineum")).episode, Episode::Conflict);
    }

    #[test]
    fn coded_values_are_prefixed() {
        assert_eq!(normalize_cell("6", &policy(ValueKind::Coded)), Normalized::Value(Typed::Code("code:6".into())));
    }

    #[test]
    fn vocabulary_synonyms() {
        let mode = policy(ValueKind::Choice { vocabulary: Vocabulary::DeliveryMode });
        assert_eq!(normalize_cell("TC urgente", &mode), Normalized::Value(Typed::Choice("emergency_c_section")));
        assert!(matches!(normalize_cell("unknown", &mode), Normalized::Conflict { .. }));
    }
}
