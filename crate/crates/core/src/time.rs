//! Hour-grid arithmetic on timezone-naive local time.
//!
//! Instants are represented as whole hours since 1970-01-01T00:00.

use chrono::{Datelike, NaiveDate, NaiveDateTime, NaiveTime, Timelike};

const EPOCH: NaiveDate = match NaiveDate::from_ymd_opt(1970, 1, 1) {
    Some(d) => d,
    None => panic!(),
};

/// Hours since the epoch, truncating minutes and seconds.
pub fn hour_index(ts: NaiveDateTime) -> i64 {
    let days = (ts.date() - EPOCH).num_days();
    days * 24 + i64::from(ts.hour())
}

pub fn date_hour(date: NaiveDate) -> i64 {
    (date - EPOCH).num_days() * 24
}

pub fn from_hour_index(h: i64) -> NaiveDateTime {
    let date = EPOCH + chrono::Days::new(h.div_euclid(24) as u64);
    let hour = h.rem_euclid(24) as u32;
    date.and_time(NaiveTime::from_hms_opt(hour, 0, 0).unwrap())
}

pub fn date_of_hour(h: i64) -> NaiveDate {
    from_hour_index(h).date()
}

pub fn days_in_year(year: i32) -> u32 {
    if NaiveDate::from_ymd_opt(year, 2, 29).is_some() {
        366
    } else {
        365
    }
}

/// Half-open range of hour indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HourRange {
    pub start: i64,
    pub end: i64,
}

impl HourRange {
    pub fn new(start: i64, end: i64) -> Self {
        HourRange { start, end }
    }

    pub fn from_dates(first: NaiveDate, end_exclusive: NaiveDate) -> Self {
        HourRange::new(date_hour(first), date_hour(end_exclusive))
    }

    pub fn len(&self) -> usize {
        (self.end - self.start).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, other: &HourRange) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Calendar days whose 24 hours lie entirely in the range.
    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        let first = (self.start + 23).div_euclid(24);
        let last = self.end.div_euclid(24);
        (first..last).map(|d| date_of_hour(d * 24))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quarter {
    Q1,
    Q2,
    Q3,
    Q4,
}

impl Quarter {
    pub const ALL: [Quarter; 4] = [Quarter::Q1, Quarter::Q2, Quarter::Q3, Quarter::Q4];

    pub fn first_month(self) -> u32 {
        match self {
            Quarter::Q1 => 1,
            Quarter::Q2 => 4,
            Quarter::Q3 => 7,
            Quarter::Q4 => 10,
        }
    }

    pub fn start(self, year: i32) -> NaiveDate {
        NaiveDate::from_ymd_opt(year, self.first_month(), 1).unwrap()
    }

    pub fn end_exclusive(self, year: i32) -> NaiveDate {
        match self {
            Quarter::Q4 => NaiveDate::from_ymd_opt(year + 1, 1, 1).unwrap(),
            q => NaiveDate::from_ymd_opt(year, q.first_month() + 3, 1).unwrap(),
        }
    }

    pub fn of(date: NaiveDate) -> Quarter {
        Quarter::ALL[((date.month() - 1) / 3) as usize]
    }

    pub fn name(self) -> &'static str {
        match self {
            Quarter::Q1 => "Q1",
            Quarter::Q2 => "Q2",
            Quarter::Q3 => "Q3",
            Quarter::Q4 => "Q4",
        }
    }

    pub fn parse(s: &str) -> Option<Quarter> {
        Quarter::ALL.into_iter().find(|q| q.name().eq_ignore_ascii_case(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hour_index_round_trips() {
        let ts = NaiveDate::from_ymd_opt(2013, 10, 1)
            .unwrap()
            .and_hms_opt(5, 30, 0)
            .unwrap();
        let h = hour_index(ts);
        assert_eq!(from_hour_index(h), ts.with_minute(0).unwrap());
        assert_eq!(h % 24, 5);
    }

    #[test]
    fn quarter_bounds() {
        assert_eq!(Quarter::Q4.start(2013), NaiveDate::from_ymd_opt(2013, 10, 1).unwrap());
        assert_eq!(
            Quarter::Q4.end_exclusive(2013),
            NaiveDate::from_ymd_opt(2014, 1, 1).unwrap()
        );
        let r = HourRange::from_dates(Quarter::Q4.start(2013), Quarter::Q4.end_exclusive(2013));
        assert_eq!(r.days().count(), 92);
    }
}
