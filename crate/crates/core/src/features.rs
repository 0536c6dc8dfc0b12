//! Fixed 24×20 model inputs for one forecast day.
//!
//! Column order (stable, part of the checkpoint and dump formats):
//!
//! | columns | content |
//! |---------|---------|
//! | 0..7    | day of week one-hot, Monday..Sunday; holidays map to Sunday |
//! | 7, 8    | hour of day sin, cos (period 24) |
//! | 9, 10   | day of year sin, cos (period = days in that year) |
//! | 11..14  | load at t−168 h, t−336 h, t−504 h (kW) |
//! | 14..20  | weather at t−24 h: temperature, dew point, wind direction, wind speed, pressure, humidity |

use alloc::format;
use alloc::vec::Vec;
use chrono::{Datelike, NaiveDate};
use core::f64::consts::PI;

use crate::data::{DataSplit, HolidayCalendar, LoadSeries, WeatherSeries};
use crate::error::{Error, Result};
use crate::math;
use crate::time::{date_hour, date_of_hour, days_in_year};

pub const HOURS: usize = 24;
pub const N_FEATURES: usize = 20;
pub const ONE_HOT: core::ops::Range<usize> = 0..7;
pub const LAG_COLUMNS: core::ops::Range<usize> = 11..14;
pub const WEATHER: core::ops::Range<usize> = 14..20;
pub const LAG_HOURS: [i64; 3] = [168, 336, 504];
/// Days at the start of a training range that lack the three-week lag.
pub const LAG_DAYS: usize = 21;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "dow_mon",
    "dow_tue",
    "dow_wed",
    "dow_thu",
    "dow_fri",
    "dow_sat",
    "dow_sun",
    "hour_sin",
    "hour_cos",
    "doy_sin",
    "doy_cos",
    "load_lag_168h",
    "load_lag_336h",
    "load_lag_504h",
    "temperature",
    "dew_point",
    "wind_direction",
    "wind_speed",
    "pressure",
    "humidity",
];

pub type InputMatrix = [[f64; N_FEATURES]; HOURS];

pub fn encode_day_of_week(date: NaiveDate, calendar: &HolidayCalendar) -> [f64; 7] {
    let mut v = [0.0; 7];
    let idx = if calendar.is_holiday(date) {
        6
    } else {
        date.weekday().num_days_from_monday() as usize
    };
    v[idx] = 1.0;
    v
}

/// Maps `value` onto the unit circle with the given period.
pub fn encode_cyclic(value: f64, period: f64) -> (f64, f64) {
    let angle = 2.0 * PI * value / period;
    (math::sin(angle), math::cos(angle))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub day: NaiveDate,
    pub x: InputMatrix,
    /// Actual load (kW) for the 24 hours of `day`.
    pub y: [f64; HOURS],
}

/// First day whose inputs can be built from the given series.
pub fn earliest_buildable_day(load: &LoadSeries, weather: &WeatherSeries) -> NaiveDate {
    let need = (load.start() + LAG_HOURS[2]).max(weather.start() + 24);
    date_of_hour(need + (24 - need.rem_euclid(24)) % 24)
}

/// Model inputs for `day` from history only.
pub fn build_inputs(
    day: NaiveDate,
    load: &LoadSeries,
    weather: &WeatherSeries,
    calendar: &HolidayCalendar,
) -> Result<InputMatrix> {
    let start = date_hour(day);
    let missing = || Error::MissingHistory {
        day,
        earliest: Some(earliest_buildable_day(load, weather)),
    };
    let dow = encode_day_of_week(day, calendar);
    let (doy_sin, doy_cos) =
        encode_cyclic(f64::from(day.ordinal0()), f64::from(days_in_year(day.year())));
    let mut x = [[0.0; N_FEATURES]; HOURS];
    for (k, row) in x.iter_mut().enumerate() {
        let t = start + k as i64;
        row[ONE_HOT].copy_from_slice(&dow);
        let (hs, hc) = encode_cyclic(k as f64, 24.0);
        row[7] = hs;
        row[8] = hc;
        row[9] = doy_sin;
        row[10] = doy_cos;
        for (j, lag) in LAG_HOURS.iter().enumerate() {
            row[LAG_COLUMNS.start + j] = load.at(t - lag).ok_or_else(missing)?;
        }
        row[WEATHER].copy_from_slice(weather.at(t - 24).ok_or_else(missing)?);
    }
    Ok(x)
}

pub fn build_window(
    day: NaiveDate,
    load: &LoadSeries,
    weather: &WeatherSeries,
    calendar: &HolidayCalendar,
) -> Result<FeatureWindow> {
    let x = build_inputs(day, load, weather, calendar)?;
    let target = load.window(date_hour(day), HOURS).ok_or(Error::MissingHistory {
        day,
        earliest: None,
    })?;
    let mut y = [0.0; HOURS];
    y.copy_from_slice(target);
    Ok(FeatureWindow { day, x, y })
}

/// Per-column z-score statistics. One-hot columns pass through unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mean: [f64; N_FEATURES],
    pub std: [f64; N_FEATURES],
}

impl Normalization {
    pub fn identity() -> Self {
        Normalization {
            mean: [0.0; N_FEATURES],
            std: [1.0; N_FEATURES],
        }
    }

    pub fn fit(windows: &[FeatureWindow]) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::EmptyDataset("cannot fit normalization on no windows".into()));
        }
        let n = (windows.len() * HOURS) as f64;
        let mut norm = Normalization::identity();
        for c in 0..N_FEATURES {
            if ONE_HOT.contains(&c) {
                continue;
            }
            let mean = windows.iter().flat_map(|w| w.x.iter().map(move |r| r[c])).sum::<f64>() / n;
            let var = windows
                .iter()
                .flat_map(|w| w.x.iter().map(move |r| (r[c] - mean) * (r[c] - mean)))
                .sum::<f64>()
                / n;
            let std = math::sqrt(var);
            norm.mean[c] = mean;
            norm.std[c] = if std > 1e-12 && std.is_finite() { std } else { 1.0 };
        }
        Ok(norm)
    }

    pub fn apply(&self, x: &InputMatrix) -> InputMatrix {
        let mut out = *x;
        for row in out.iter_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[c]) / self.std[c];
            }
        }
        out
    }
}

/// Ordered forecast days with shared normalization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub windows: Vec<FeatureWindow>,
    pub normalization: Normalization,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn normalized(&self, i: usize) -> InputMatrix {
        self.normalization.apply(&self.windows[i].x)
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    /// Mean of all targets (kW).
    pub fn target_mean(&self) -> f64 {
        if self.windows.is_empty() {
            return 0.0;
        }
        self.windows.iter().flat_map(|w| w.y.iter()).sum::<f64>() / (self.windows.len() * HOURS) as f64
    }
}

/// Windows for every buildable day of `days`, in order.
pub fn build_windows(
    days: impl Iterator<Item = NaiveDate>,
    load: &LoadSeries,
    weather: &WeatherSeries,
    calendar: &HolidayCalendar,
) -> Result<Vec<FeatureWindow>> {
    days.map(|d| build_window(d, load, weather, calendar)).collect()
}

/// Train and test datasets for one split. The first [`LAG_DAYS`] days of the
/// training range are skipped; normalization is fit on the training windows.
pub fn build_dataset(
    split: &DataSplit,
    load: &LoadSeries,
    weather: &WeatherSeries,
    calendar: &HolidayCalendar,
) -> Result<(Dataset, Dataset)> {
    let train = build_windows(split.train.days().skip(LAG_DAYS), load, weather, calendar)?;
    if train.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "training range of {} month(s) leaves no windows after dropping {LAG_DAYS} lag days",
            split.train_months
        )));
    }
    let test = build_windows(split.test.days(), load, weather, calendar)?;
    let normalization = Normalization::fit(&train)?;
    Ok((
        Dataset {
            windows: train,
            normalization: normalization.clone(),
        },
        Dataset {
            windows: test,
            normalization,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_split;
    use crate::time::{HourRange, Quarter};

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn flat_weather(start: i64, hours: usize) -> WeatherSeries {
        let rows = (0..hours).map(|i| [i as f64, 1.0, 2.0, 3.0, 4.0, 50.0]).collect();
        WeatherSeries::new(start, rows).unwrap()
    }

    #[test]
    fn day_of_week_encoding() {
        let cal = HolidayCalendar::new("x", [d(2013, 12, 25)]);
        assert_eq!(encode_day_of_week(d(2013, 10, 7), &cal), [1., 0., 0., 0., 0., 0., 0.]);
        assert_eq!(encode_day_of_week(d(2013, 12, 25), &cal), [0., 0., 0., 0., 0., 0., 1.]);
        assert_eq!(encode_day_of_week(d(2013, 10, 6), &cal), [0., 0., 0., 0., 0., 0., 1.]);
    }

    #[test]
    fn cyclic_encoding() {
        let (s, c) = encode_cyclic(0.0, 24.0);
        assert!(s.abs() < 1e-15 && (c - 1.0).abs() < 1e-15);
        let (s, c) = encode_cyclic(6.0, 24.0);
        assert!((s - 1.0).abs() < 1e-15 && c.abs() < 1e-15);
        let (s, c) = encode_cyclic(0.0, 365.0);
        assert!(s.abs() < 1e-15 && (c - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lag_and_weather_alignment() {
        // load(t) = hour index relative to start, 4-week fixture plus target day
        let start = date_hour(d(2013, 1, 1));
        let hours = 24 * 30;
        let load = LoadSeries::new("l", start, (0..hours).map(|i| i as f64).collect()).unwrap();
        let weather = flat_weather(start, hours);
        let day = d(2013, 1, 22);
        let w = build_window(day, &load, &weather, &HolidayCalendar::default()).unwrap();
        let t0 = (date_hour(day) - start) as f64;
        for k in 0..24 {
            let t = t0 + k as f64;
            assert_eq!(w.x[k][11], t - 168.0);
            assert_eq!(w.x[k][12], t - 336.0);
            assert_eq!(w.x[k][13], t - 504.0);
            assert_eq!(w.x[k][14], t - 24.0);
            assert_eq!(w.y[k], t);
        }
    }

    #[test]
    fn weekly_periodic_load_has_equal_lags() {
        let start = date_hour(d(2013, 1, 1));
        let load = LoadSeries::new("l", start, (0..24 * 28).map(|i| (i % 168) as f64).collect()).unwrap();
        let weather = flat_weather(start, 24 * 28);
        let w = build_window(d(2013, 1, 25), &load, &weather, &HolidayCalendar::default()).unwrap();
        for row in &w.x {
            assert_eq!(row[11], row[12]);
            assert_eq!(row[12], row[13]);
        }
    }

    #[test]
    fn short_history_names_earliest_day() {
        let start = date_hour(d(2013, 1, 1));
        let load = LoadSeries::new("l", start, alloc::vec![1.0; 24 * 40]).unwrap();
        let weather = flat_weather(start, 24 * 40);
        let err = build_window(d(2013, 1, 15), &load, &weather, &HolidayCalendar::default()).unwrap_err();
        assert_eq!(
            err,
            Error::MissingHistory {
                day: d(2013, 1, 15),
                earliest: Some(d(2013, 1, 22))
            }
        );
    }

    #[test]
    fn dataset_sizes_and_normalization() {
        let first = d(2012, 7, 1);
        let end = d(2014, 3, 1);
        let start = date_hour(first);
        let hours = (date_hour(end) - start) as usize;
        let load = LoadSeries::new(
            "l",
            start,
            (0..hours).map(|i| 1.0 + math::sin(i as f64 * 0.1) + (i % 7) as f64 * 0.1).collect(),
        )
        .unwrap();
        let weather = WeatherSeries::new(
            start,
            (0..hours)
                .map(|i| {
                    let t = i as f64;
                    [math::sin(t / 50.0) * 10.0, t % 13.0, 180.0, 5.0 + t % 3.0, 1000.0, 60.0]
                })
                .collect(),
        )
        .unwrap();
        let split = make_split(HourRange::from_dates(first, end), Quarter::Q4, 2013, 12).unwrap();
        let (train, test) = build_dataset(&split, &load, &weather, &HolidayCalendar::default()).unwrap();
        assert_eq!(train.len(), 344);
        assert_eq!(test.len(), 92);
        let n = (train.len() * HOURS) as f64;
        for c in 7..N_FEATURES {
            let col: Vec<f64> = (0..train.len()).flat_map(|i| train.normalized(i).map(|r| r[c])).collect();
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-6, "column {c} mean {mean}");
            let constant = train.normalization.std[c] == 1.0 && var < 1e-12;
            assert!(constant || (var.sqrt() - 1.0).abs() < 1e-6, "column {c} sd {}", var.sqrt());
        }
    }
}
