//! Canonical record types of the peripartum schema.
//!
//! One struct per relation. Field names match catalog column names except
//! where a column name is a Rust keyword (`test.type` is `result_type`).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

pub type PregnancyId = i64;
pub type ConditionId = i64;
pub type ExaminationId = i64;
pub type TestId = i64;
pub type TracingId = i64;

/// Italian tax code. Construction uppercases and trims; well-formedness is a
/// validation concern so malformed codes can still be reported by value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaxCode(String);

impl TaxCode {
    pub const LEN: usize = 16;

    pub fn new(raw: impl AsRef<str>) -> Self {
        TaxCode(raw.as_ref().trim().to_ascii_uppercase())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_well_formed(&self) -> bool {
        self.0.len() == Self::LEN && self.0.bytes().all(|b| b.is_ascii_uppercase() || b.is_ascii_digit())
    }
}

impl fmt::Display for TaxCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{value}` is not a valid {kind}")]
pub struct UnknownVariant {
    pub kind: &'static str,
    pub value: String,
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident, $kind:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = UnknownVariant;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim() {
                    $($text => Ok($name::$variant),)+
                    other => Err(UnknownVariant { kind: $kind, value: other.to_string() }),
                }
            }
        }
    };
}

string_enum!(ExaminationKind, "examination kind" {
    FirstTrimester => "first_trimester",
    SecondTrimester => "second_trimester",
    BiometricUltrasound => "biometric_ultrasound",
    Other => "other",
});

string_enum!(PlacentalExpulsion, "placental expulsion" {
    Spontaneous => "spontaneous",
    Manual => "manual",
    Curettage => "curettage",
});

string_enum!(
    /// Top-level delivery classification stored on `delivery`.
    DeliveryType, "delivery type" {
    ProgrammedCSection => "programmed_c_section",
    Natural => "natural",
    Operative => "operative",
    EmergencyCSection => "emergency_c_section",
});

string_enum!(
    /// Ordered by intervention: when subtypes overlap (twins) the highest is stored.
    DeliverySubtype, "delivery subtype" {
    Natural => "natural",
    Operative => "operative",
    EmergencyCSection => "emergency_c_section",
});

string_enum!(Laceration, "laceration" {
    None => "none",
    FirstDegree => "first_degree",
    SecondDegree => "second_degree",
    ThirdDegree => "third_degree",
    FourthDegree => "fourth_degree",
});

string_enum!(OperativeInstrument, "operative instrument" {
    Vacuum => "vacuum",
    Forceps => "forceps",
});

impl DeliverySubtype {
    pub fn delivery_type(self) -> DeliveryType {
        match self {
            DeliverySubtype::Natural => DeliveryType::Natural,
            DeliverySubtype::Operative => DeliveryType::Operative,
            DeliverySubtype::EmergencyCSection => DeliveryType::EmergencyCSection,
        }
    }

    /// Collapses overlapping per-newborn modes to the single stored subtype.
    pub fn highest(modes: impl IntoIterator<Item = DeliverySubtype>) -> Option<DeliverySubtype> {
        modes.into_iter().max()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patient {
    pub tc: TaxCode,
    pub name: String,
    pub surname: String,
    pub birth_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pregnancy {
    pub id: PregnancyId,
    pub patient_tc: TaxCode,
    pub first_exam_date: NaiveDate,
    pub parity_full_term: i32,
    pub parity_premature: i32,
    pub parity_abortions: i32,
    pub parity_live_births: i32,
    pub maternal_age_at_conception: i32,
    pub art_used: Option<bool>,
    pub prior_pregnancy_conditions: Option<String>,
    pub last_menstruation_date: Option<NaiveDate>,
    pub expected_delivery_date: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub id: ConditionId,
    pub name: String,
}

/// A condition concurrent with a pregnancy, with the therapy if treated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionLink {
    pub pregnancy_id: PregnancyId,
    pub condition_id: ConditionId,
    pub therapy: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Examination {
    pub id: ExaminationId,
    pub pregnancy_id: PregnancyId,
    pub examination_kind: ExaminationKind,
    pub exam_date: NaiveDate,
    pub gestational_age_days: i32,
    #[serde(default)]
    pub details: BTreeMap<String, String>,
}

/// A test definition. `result_type` is `["string"]`, `["numeric"]`, or the
/// list of admissible enumerated results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Test {
    pub id: TestId,
    pub name: String,
    #[serde(rename = "type")]
    pub result_type: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExaminationTest {
    pub examination_id: ExaminationId,
    pub test_id: TestId,
    pub result: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delivery {
    pub pregnancy_id: PregnancyId,
    pub delivery_date: NaiveDate,
    pub gestational_age_days: i32,
    pub robson_score: i32,
    pub placental_expulsion: PlacentalExpulsion,
    pub analgesia: Option<String>,
    pub estimated_blood_loss_ml: i32,
    pub delivery_type: DeliveryType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgrammedCSection {
    pub pregnancy_id: PregnancyId,
    pub motivation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryWithLabor {
    pub pregnancy_id: PregnancyId,
    pub delivery_subtype: DeliverySubtype,
    pub motivation: Option<String>,
    pub laceration: Laceration,
    pub episiotomy: bool,
    pub episiotomy_motivation: Option<String>,
    pub labor_start_time: Timestamp,
    pub expulsion_time: Timestamp,
    pub operative_instrument: Option<OperativeInstrument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Induction {
    pub pregnancy_id: PregnancyId,
    pub administration_time: Timestamp,
    pub method: String,
    pub drug_dosage: Option<String>,
    pub completion_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Newborn {
    pub pregnancy_id: PregnancyId,
    pub birth_time: Timestamp,
    pub weight_g: i32,
    pub length_cm: Option<f64>,
    pub apgar_1: i32,
    pub apgar_5: i32,
    pub apgar_10: Option<i32>,
    pub ph: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracing {
    pub tracing_id: TracingId,
    pub pregnancy_id: PregnancyId,
    pub start_time: Timestamp,
}

/// One CTG sample. Only observed values are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub tracing_id: TracingId,
    pub ts: Timestamp,
    pub maternal_heart_rate: Option<i32>,
    pub maternal_tocography: Option<f64>,
}

/// Fetal heart rate of one newborn at one CTG sample. The composite
/// references tie the sample's tracing and the newborn to the same delivery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewbornMeasurement {
    pub tracing_id: TracingId,
    pub ts: Timestamp,
    pub pregnancy_id: PregnancyId,
    pub birth_time: Timestamp,
    pub fetal_heart_rate: i32,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tax_code_is_uppercased() {
        let tc = TaxCode::new(" rssmra80a41l483x ");
        assert_eq!(tc.as_str(), "RSSMRA80A41L483X");
        assert!(tc.is_well_formed());
        assert!(!TaxCode::new("SHORT").is_well_formed());
        assert!(!TaxCode::new("RSSMRA80A41L483-").is_well_formed());
    }

    #[test]
    fn enum_text_round_trips() {
        for kind in DeliveryType::ALL {
            assert_eq!(kind.as_str().parse::<DeliveryType>().unwrap(), *kind);
        }
        assert!("c_section".parse::<DeliveryType>().is_err());
    }

    #[test]
    fn highest_subtype_wins() {
        let modes = [DeliverySubtype::Natural, DeliverySubtype::EmergencyCSection, DeliverySubtype::Operative];
        assert_eq!(DeliverySubtype::highest(modes), Some(DeliverySubtype::EmergencyCSection));
        assert_eq!(DeliverySubtype::highest([]), None);
    }
}
