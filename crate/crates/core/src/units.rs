//! Time base: every time is seconds relative to a dataset epoch. Interface
//! parameters given in days or hours are converted here, once.

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const SECONDS_PER_HOUR: f64 = 3600.0;
pub const SECONDS_PER_DAY: f64 = 86_400.0;

pub fn days<T: Scalar>(d: f64) -> T {
    T::lit(d * SECONDS_PER_DAY)
}

pub fn hours<T: Scalar>(h: f64) -> T {
    T::lit(h * SECONDS_PER_HOUR)
}

pub fn to_days<T: Scalar>(seconds: T) -> f64 {
    seconds.as_f64() / SECONDS_PER_DAY
}

pub fn to_hours<T: Scalar>(seconds: T) -> f64 {
    seconds.as_f64() / SECONDS_PER_HOUR
}

/// Parses an ISO-8601 UTC timestamp. Accepts RFC 3339 with any offset, or a
/// naive `YYYY-MM-DD[T ]HH:MM:SS[.fff]` which is taken as UTC.
pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.with_timezone(&Utc));
    }
    let trimmed = s.strip_suffix('Z').unwrap_or(s);
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(trimmed, fmt) {
            return Ok(Utc.from_utc_datetime(&naive));
        }
    }
    if let Ok(date) = NaiveDate::parse_from_str(trimmed, "%Y-%m-%d") {
        return Ok(Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).unwrap()));
    }
    Err(Error::Parse(format!("invalid timestamp {s:?}")))
}

/// Formats an instant as RFC 3339 UTC, with fractional seconds only when
/// they are non-zero.
pub fn format_timestamp(dt: &DateTime<Utc>) -> String {
    if dt.nanosecond() == 0 {
        dt.format("%Y-%m-%dT%H:%M:%SZ").to_string()
    } else {
        dt.format("%Y-%m-%dT%H:%M:%S%.fZ").to_string()
    }
}

pub fn midnight(dt: &DateTime<Utc>) -> DateTime<Utc> {
    Utc.from_utc_datetime(&dt.date_naive().and_hms_opt(0, 0, 0).unwrap())
}

/// Seconds of `dt` after `epoch`.
pub fn seconds_since(epoch: &DateTime<Utc>, dt: &DateTime<Utc>) -> f64 {
    let d = *dt - *epoch;
    match d.num_nanoseconds() {
        Some(ns) => ns as f64 / 1e9,
        None => d.num_milliseconds() as f64 / 1e3,
    }
}

/// Instant `seconds` after `epoch`, rounded to the nanosecond.
pub fn instant(epoch: &DateTime<Utc>, seconds: f64) -> DateTime<Utc> {
    *epoch + Duration::nanoseconds((seconds * 1e9).round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        let a = parse_timestamp("2012-03-18T02:38:16Z").unwrap();
        let b = parse_timestamp("2012-03-18 02:38:16").unwrap();
        let c = parse_timestamp("2012-03-18T05:08:16+02:30").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(parse_timestamp("yesterday").is_err());
    }

    #[test]
    fn instant_round_trips_milliseconds() {
        let epoch = parse_timestamp("2012-03-15T00:00:00Z").unwrap();
        for ms in [0_i64, 1, 999, 12_345_678, 9_876_543_210] {
            let s = ms as f64 / 1000.0;
            let back = seconds_since(&epoch, &instant(&epoch, s));
            assert_eq!(back, s);
        }
        assert_eq!(format_timestamp(&instant(&epoch, 1.5)), "2012-03-15T00:00:01.500Z");
        assert_eq!(format_timestamp(&epoch), "2012-03-15T00:00:00Z");
    }
}
