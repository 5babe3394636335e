use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Timelike, Utc};
use thiserror::Error;

/// A 6-hourly model initialization, written `YYYYMMDDHH`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ForecastCycle {
    pub date: NaiveDate,
    pub hour: u8,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid forecast id `{0}`: expected YYYYMMDDHH with HH in 00/06/12/18")]
pub struct CycleParseError(pub String);

pub const CYCLE_HOURS: [u8; 4] = [0, 6, 12, 18];

impl ForecastCycle {
    pub fn init_time(&self) -> DateTime<Utc> {
        Utc.from_utc_datetime(
            &self
                .date
                .and_hms_opt(u32::from(self.hour), 0, 0)
                .expect("cycle hour is valid"),
        )
    }

    fn from_time(t: DateTime<Utc>) -> Self {
        Self {
            date: t.date_naive(),
            hour: t.hour() as u8,
        }
    }
}

impl fmt::Display for ForecastCycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:02}", self.date.format("%Y%m%d"), self.hour)
    }
}

impl FromStr for ForecastCycle {
    type Err = CycleParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || CycleParseError(s.to_string());
        if s.len() != 10 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let date = NaiveDate::parse_from_str(&s[..8], "%Y%m%d").map_err(|_| err())?;
        let hour: u8 = s[8..].parse().map_err(|_| err())?;
        if !CYCLE_HOURS.contains(&hour) {
            return Err(err());
        }
        Ok(Self { date, hour })
    }
}

/// Nearest 00/06/12/18Z cycle; an exact midpoint goes to the earlier cycle.
pub fn pair_to_cycle(issue_time: DateTime<Utc>) -> Option<ForecastCycle> {
    let midnight = Utc.from_utc_datetime(&issue_time.date_naive().and_hms_opt(0, 0, 0)?);
    let since = issue_time - midnight;
    let six = Duration::hours(6);
    let slot = since.num_seconds() / six.num_seconds();
    let earlier = midnight + six * slot as i32;
    let later = earlier + six;
    let nearest = if issue_time - earlier <= later - issue_time {
        earlier
    } else {
        later
    };
    ((issue_time - nearest).abs() <= Duration::hours(12)).then(|| ForecastCycle::from_time(nearest))
}
