//! UTC timestamps with millisecond resolution.
//!
//! Every timestamp in the system is a naive UTC instant. On the wire it is
//! always RFC 3339 with a literal `Z` and exactly three fractional digits.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, NaiveTime, SubsecRound, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(NaiveDateTime);

impl Timestamp {
    pub const MIN: Timestamp = Timestamp(NaiveDateTime::MIN);
    pub const MAX: Timestamp = Timestamp(NaiveDateTime::MAX);

    /// Truncates to whole milliseconds.
    pub fn new(dt: NaiveDateTime) -> Self {
        Timestamp(dt.trunc_subsecs(3))
    }

    pub fn from_ymd_hms(y: i32, mo: u32, d: u32, h: u32, mi: u32, s: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(y, mo, d)
            .and_then(|date| date.and_hms_opt(h, mi, s))
            .map(Timestamp)
    }

    pub fn now() -> Self {
        Timestamp::new(Utc::now().naive_utc())
    }

    pub fn at_midnight(date: NaiveDate) -> Self {
        Timestamp(date.and_time(NaiveTime::MIN))
    }

    pub fn naive(self) -> NaiveDateTime {
        self.0
    }

    pub fn date(self) -> NaiveDate {
        self.0.date()
    }

    pub fn epoch_millis(self) -> i64 {
        self.0.and_utc().timestamp_millis()
    }

    pub fn from_epoch_millis(ms: i64) -> Option<Self> {
        DateTime::<Utc>::from_timestamp_millis(ms).map(|dt| Timestamp(dt.naive_utc()))
    }

    pub fn plus_millis(self, ms: i64) -> Self {
        Timestamp(self.0 + Duration::milliseconds(ms))
    }

    /// Milliseconds from `earlier` to `self` (negative if `self` is earlier).
    pub fn millis_since(self, earlier: Timestamp) -> i64 {
        (self.0 - earlier.0).num_milliseconds()
    }

    pub fn to_rfc3339(self) -> String {
        self.0.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
    }

    /// Accepts RFC 3339 (any offset, converted to UTC) and the space-separated
    /// `YYYY-MM-DD HH:MM[:SS[.fff]]` form common in spreadsheet exports.
    pub fn parse(text: &str) -> Result<Self, TimestampParseError> {
        let text = text.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
            return Ok(Timestamp::new(dt.with_timezone(&Utc).naive_utc()));
        }
        for fmt in [
            "%Y-%m-%dT%H:%M:%S%.f",
            "%Y-%m-%d %H:%M:%S%.f",
            "%Y-%m-%d %H:%M",
            "%Y-%m-%dT%H:%M",
            "%d/%m/%Y %H:%M:%S",
            "%d/%m/%Y %H:%M",
        ] {
            if let Ok(dt) = NaiveDateTime::parse_from_str(text, fmt) {
                return Ok(Timestamp::new(dt));
            }
        }
        Err(TimestampParseError(text.to_string()))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_rfc3339())
    }
}

impl FromStr for Timestamp {
    type Err = TimestampParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Timestamp::parse(s)
    }
}

impl From<NaiveDateTime> for Timestamp {
    fn from(dt: NaiveDateTime) -> Self {
        Timestamp::new(dt)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_rfc3339())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Timestamp::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognised timestamp `{0}`")]
pub struct TimestampParseError(pub String);

/// Parses ISO dates plus the `dd/mm/yyyy` form used in the legacy sheets.
pub fn parse_date(text: &str) -> Option<NaiveDate> {
    let text = text.trim();
    ["%Y-%m-%d", "%d/%m/%Y", "%d-%m-%Y", "%d.%m.%Y"]
        .iter()
        .find_map(|fmt| NaiveDate::parse_from_str(text, fmt).ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rfc3339_has_millis_and_z() {
        let ts = Timestamp::from_ymd_hms(2024, 3, 1, 10, 0, 0).unwrap().plus_millis(250);
        assert_eq!(ts.to_rfc3339(), "2024-03-01T10:00:00.250Z");
        assert_eq!(Timestamp::parse("2024-03-01T10:00:00.250Z").unwrap(), ts);
    }

    #[test]
    fn offsets_are_normalised_to_utc() {
        let ts = Timestamp::parse("2024-03-01T12:00:00+02:00").unwrap();
        assert_eq!(ts.to_rfc3339(), "2024-03-01T10:00:00.000Z");
    }

    #[test]
    fn sub_millisecond_precision_is_truncated() {
        let ts = Timestamp::parse("2024-03-01T10:00:00.123456Z").unwrap();
        assert_eq!(ts.to_rfc3339(), "2024-03-01T10:00:00.123Z");
    }

    #[test]
    fn legacy_date_forms() {
        assert_eq!(parse_date("05/11/2024"), NaiveDate::from_ymd_opt(2024, 11, 5));
        assert_eq!(parse_date("2024-11-05"), NaiveDate::from_ymd_opt(2024, 11, 5));
        assert_eq!(parse_date("yesterday"), None);
    }
}
