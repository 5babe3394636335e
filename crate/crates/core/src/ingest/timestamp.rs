//! Issuance-header parsing.
//!
//! Recognized header lines look like `330 PM MST Tue Jan 7 2025`: a 1-4 digit
//! clock time (`H`, `HH`, `HMM` or `HHMM`), AM/PM, a zone abbreviation, the
//! weekday, month, day of month and year, alone on their line and matched
//! case-insensitively. The first such line wins. Unknown zone abbreviations
//! and impossible clock times are errors, and a weekday that disagrees with
//! the date is logged but tolerated.

use std::sync::OnceLock;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate, TimeZone, Timelike, Utc, Weekday};
use regex::Regex;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TimestampError {
    #[error("no issuance timestamp found")]
    NotFound,
    #[error("unknown time zone `{0}`")]
    UnknownZone(String),
    #[error("invalid issuance time `{0}`")]
    InvalidTime(String),
}

/// Zone abbreviations and their offsets from UTC in hours.
pub const ZONES: &[(&str, i32)] = &[
    ("UTC", 0),
    ("GMT", 0),
    ("EST", -5),
    ("EDT", -4),
    ("CST", -6),
    ("CDT", -5),
    ("MST", -7),
    ("MDT", -6),
    ("PST", -8),
    ("PDT", -7),
    ("AKST", -9),
    ("AKDT", -8),
    ("HST", -10),
    ("AST", -4),
    ("ADT", -3),
    ("CHST", 10),
    ("SST", -11),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssueHeader {
    pub utc: DateTime<Utc>,
    pub offset: FixedOffset,
    pub zone: String,
    /// Byte range of the header line in the product text.
    pub span: (usize, usize),
}

fn header_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?mi)^[ \t]*(\d{1,4})[ \t]+(AM|PM)[ \t]+([A-Z]{2,5})[ \t]+(SUN|MON|TUE|WED|THU|FRI|SAT)[ \t]+(JAN|FEB|MAR|APR|MAY|JUN|JUL|AUG|SEP|OCT|NOV|DEC)[ \t]+(\d{1,2})[ \t]+(\d{4})[ \t]*\r?$",
        )
        .expect("header regex compiles")
    })
}

pub fn zone_offset(abbrev: &str) -> Option<FixedOffset> {
    let upper = abbrev.to_ascii_uppercase();
    ZONES
        .iter()
        .find(|(z, _)| *z == upper)
        .and_then(|&(_, h)| FixedOffset::east_opt(h * 3600))
}

fn month_number(m: &str) -> u32 {
    const MONTHS: [&str; 12] = [
        "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
    ];
    let m = m.to_ascii_lowercase();
    MONTHS.iter().position(|x| *x == m).expect("regex restricts months") as u32 + 1
}

pub fn parse_issue_time(raw_text: &str) -> Result<DateTime<Utc>, TimestampError> {
    parse_issue_header(raw_text).map(|h| h.utc)
}

pub fn parse_issue_header(raw_text: &str) -> Result<IssueHeader, TimestampError> {
    let caps = header_regex()
        .captures(raw_text)
        .ok_or(TimestampError::NotFound)?;
    let whole = caps.get(0).expect("group 0");
    let line = whole.as_str().trim().to_string();
    let invalid = || TimestampError::InvalidTime(line.clone());

    let clock = &caps[1];
    let (hour, minute): (u32, u32) = if clock.len() <= 2 {
        (clock.parse().map_err(|_| invalid())?, 0)
    } else {
        let split = clock.len() - 2;
        (
            clock[..split].parse().map_err(|_| invalid())?,
            clock[split..].parse().map_err(|_| invalid())?,
        )
    };
    if !(1..=12).contains(&hour) || minute > 59 {
        return Err(invalid());
    }
    let pm = caps[2].eq_ignore_ascii_case("PM");
    let hour24 = hour % 12 + if pm { 12 } else { 0 };

    let zone = caps[3].to_ascii_uppercase();
    let offset = zone_offset(&zone).ok_or_else(|| TimestampError::UnknownZone(zone.clone()))?;

    let day: u32 = caps[6].parse().map_err(|_| invalid())?;
    let year: i32 = caps[7].parse().map_err(|_| invalid())?;
    let date = NaiveDate::from_ymd_opt(year, month_number(&caps[5]), day).ok_or_else(invalid)?;
    let local = offset
        .from_local_datetime(&date.and_hms_opt(hour24, minute, 0).ok_or_else(invalid)?)
        .single()
        .ok_or_else(invalid)?;

    let stated: Weekday = caps[4].parse().map_err(|_| invalid())?;
    if stated != date.weekday() {
        log::warn!("header `{line}` names {stated} but the date is a {}", date.weekday());
    }

    Ok(IssueHeader {
        utc: local.with_timezone(&Utc),
        offset,
        zone,
        span: (whole.start(), whole.end()),
    })
}

/// Renders `utc` as a header line in `zone`, the inverse of
/// [`parse_issue_header`].
pub fn format_issue_header(utc: DateTime<Utc>, zone: &str) -> Option<String> {
    let local = utc.with_timezone(&zone_offset(zone)?);
    let (pm, hour12) = local.hour12();
    Some(format!(
        "{hour12}{:02} {} {} {}",
        local.minute(),
        if pm { "PM" } else { "AM" },
        zone.to_ascii_uppercase(),
        local.format("%a %b %-d %Y")
    ))
}
