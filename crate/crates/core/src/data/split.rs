use chrono::{Datelike, Months, NaiveDate};

use crate::error::{Error, Result};
use crate::time::{date_hour, HourRange, Quarter};

/// Train range immediately followed by a test quarter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataSplit {
    pub train: HourRange,
    pub test: HourRange,
    pub test_quarter: Quarter,
    pub test_year: i32,
    pub train_months: u32,
}

impl DataSplit {
    pub fn train_start(&self) -> NaiveDate {
        crate::time::date_of_hour(self.train.start)
    }

    pub fn test_start(&self) -> NaiveDate {
        crate::time::date_of_hour(self.test.start)
    }
}

fn months_between(from: NaiveDate, to: NaiveDate) -> u32 {
    // whole or partial months from `from` up to `to`
    let mut months = (to.year() - from.year()) * 12 + to.month() as i32 - from.month() as i32;
    if to.day() > from.day() {
        months += 1;
    }
    months.max(1) as u32
}

/// Test set = the named quarter; training set = the `train_months` calendar
/// months ending where the quarter starts. `coverage` is the span of
/// available data.
pub fn make_split(
    coverage: HourRange,
    test_quarter: Quarter,
    test_year: i32,
    train_months: u32,
) -> Result<DataSplit> {
    if train_months == 0 {
        return Err(Error::InvalidArgument("train_months must be positive".into()));
    }
    let test_start = test_quarter.start(test_year);
    let test_end = test_quarter.end_exclusive(test_year);
    let train_start = test_start
        .checked_sub_months(Months::new(train_months))
        .ok_or_else(|| Error::InvalidArgument("training start out of calendar range".into()))?;
    let train = HourRange::new(date_hour(train_start), date_hour(test_start));
    let test = HourRange::new(date_hour(test_start), date_hour(test_end));
    if coverage.start > train.start {
        let have_from = crate::time::date_of_hour(coverage.start);
        return Err(Error::InsufficientHistory {
            missing_months: months_between(train_start, have_from),
            needed_from: train_start,
        });
    }
    if coverage.end < test.end {
        return Err(Error::Contract(alloc::format!(
            "data ends at {} before the end of the test quarter {}",
            crate::time::from_hour_index(coverage.end),
            test_end
        )));
    }
    Ok(DataSplit {
        train,
        test,
        test_quarter,
        test_year,
        train_months,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn corpus_coverage() -> HourRange {
        HourRange::from_dates(d(2012, 7, 1), d(2014, 3, 1))
    }

    #[test]
    fn q4_twelve_months() {
        let s = make_split(corpus_coverage(), Quarter::Q4, 2013, 12).unwrap();
        assert_eq!(s.train_start(), d(2012, 10, 1));
        assert_eq!(s.test_start(), d(2013, 10, 1));
        assert_eq!(s.test, HourRange::from_dates(d(2013, 10, 1), d(2014, 1, 1)));
        assert_eq!(s.train.end, s.test.start);
    }

    #[test]
    fn q4_two_months() {
        let s = make_split(corpus_coverage(), Quarter::Q4, 2013, 2).unwrap();
        assert_eq!(s.train_start(), d(2013, 8, 1));
    }

    #[test]
    fn q1_twelve_months_needs_2012() {
        let full = HourRange::from_dates(d(2012, 1, 1), d(2014, 3, 1));
        let s = make_split(full, Quarter::Q1, 2013, 12).unwrap();
        assert_eq!(s.train, HourRange::from_dates(d(2012, 1, 1), d(2013, 1, 1)));
        let err = make_split(corpus_coverage(), Quarter::Q1, 2013, 12).unwrap_err();
        assert_eq!(
            err,
            Error::InsufficientHistory {
                missing_months: 6,
                needed_from: d(2012, 1, 1)
            }
        );
    }

    #[test]
    fn fifteen_months_is_maximum_for_q4() {
        assert!(make_split(corpus_coverage(), Quarter::Q4, 2013, 15).is_ok());
        assert!(make_split(corpus_coverage(), Quarter::Q4, 2013, 16).is_err());
    }
}
