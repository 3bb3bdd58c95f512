//! Timestamps and durations.
//!
//! Everything is UTC at millisecond resolution. The wire form is
//! `YYYY-MM-DDTHH:MM:SS.mmmZ`, which is what makes log lines byte-stable
//! across a parse/serialize round trip.

use chrono::{DateTime, Duration, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serializer};

pub type Timestamp = DateTime<Utc>;

const WIRE_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.3fZ";

pub const MS_PER_HOUR: i64 = 3_600_000;
pub const MS_PER_DAY: i64 = 24 * MS_PER_HOUR;

pub fn format(t: &Timestamp) -> String {
    t.format(WIRE_FORMAT).to_string()
}

pub fn parse(s: &str) -> Result<Timestamp, chrono::ParseError> {
    NaiveDateTime::parse_from_str(s, WIRE_FORMAT).map(|n| Utc.from_utc_datetime(&n))
}

/// Parses the wire form, falling back to any RFC 3339 string (config files
/// are hand-edited).
pub fn parse_lenient(s: &str) -> Result<Timestamp, chrono::ParseError> {
    parse(s).or_else(|_| DateTime::parse_from_rfc3339(s).map(|t| t.with_timezone(&Utc)))
}

pub fn from_millis(ms: i64) -> Timestamp {
    Utc.timestamp_millis_opt(ms).single().expect("timestamp in range")
}

pub fn hours(h: i64) -> Duration {
    Duration::milliseconds(h * MS_PER_HOUR)
}

pub fn days(d: i64) -> Duration {
    Duration::milliseconds(d * MS_PER_DAY)
}

/// Truncates to whole milliseconds, the resolution the log keeps.
pub fn truncate(t: Timestamp) -> Timestamp {
    from_millis(t.timestamp_millis())
}

/// serde adapter for [`Timestamp`] fields.
pub mod wire {
    use super::*;

    pub fn serialize<S: Serializer>(t: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        let raw = String::deserialize(d)?;
        parse_lenient(&raw).map_err(serde::de::Error::custom)
    }
}

/// serde adapter for optional [`Timestamp`] fields.
pub mod wire_opt {
    use super::*;

    pub fn serialize<S: Serializer>(t: &Option<Timestamp>, s: S) -> Result<S::Ok, S::Error> {
        match t {
            Some(t) => s.serialize_some(&format(t)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Timestamp>, D::Error> {
        let raw = Option::<String>::deserialize(d)?;
        raw.map(|r| parse_lenient(&r).map_err(serde::de::Error::custom))
            .transpose()
    }
}
