use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use chrono::{NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};
use crate::time::{from_hour_index, HourRange};

/// Hourly mean power (kW) of one household, community or synthetic profile.
///
/// The series lives on a gap-free one-hour grid starting at `start`
/// (hours since the epoch), so timestamps are implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSeries {
    pub id: String,
    start: i64,
    values: Vec<f64>,
}

impl LoadSeries {
    pub fn new(id: impl Into<String>, start: i64, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if let Some(pos) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Contract(format!(
                "load series {id}: value {} at {} is negative or non-finite",
                values[pos],
                from_hour_index(start + pos as i64)
            )));
        }
        Ok(LoadSeries { id, start, values })
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn range(&self) -> HourRange {
        HourRange::new(self.start, self.start + self.values.len() as i64)
    }

    pub fn timestamps(&self) -> impl Iterator<Item = NaiveDateTime> + '_ {
        (0..self.values.len() as i64).map(move |i| from_hour_index(self.start + i))
    }

    pub fn at(&self, hour: i64) -> Option<f64> {
        let i = hour - self.start;
        if i < 0 {
            return None;
        }
        self.values.get(i as usize).copied()
    }

    /// Borrow `len` consecutive values starting at `hour`.
    pub fn window(&self, hour: i64, len: usize) -> Option<&[f64]> {
        let i = hour - self.start;
        if i < 0 || i as usize + len > self.values.len() {
            return None;
        }
        Some(&self.values[i as usize..i as usize + len])
    }

    pub fn slice(&self, range: HourRange) -> Result<LoadSeries> {
        let vals = self.window(range.start, range.len()).ok_or_else(|| {
            Error::Contract(format!("load series {} does not cover requested range", self.id))
        })?;
        Ok(LoadSeries {
            id: self.id.clone(),
            start: range.start,
            values: vals.to_vec(),
        })
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

pub const WEATHER_COLUMNS: [&str; 6] = [
    "temperature",
    "dew_point",
    "wind_direction",
    "wind_speed",
    "pressure",
    "humidity",
];

/// Hourly weather observations: temperature (°C), dew point (°C), wind
/// direction (deg), wind speed (km/h), air pressure (hPa), relative humidity (%).
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    start: i64,
    rows: Vec<[f64; 6]>,
}

impl WeatherSeries {
    pub fn new(start: i64, rows: Vec<[f64; 6]>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Contract(format!(
                    "weather row at {} has non-finite values",
                    from_hour_index(start + i as i64)
                )));
            }
            if !(0.0..=100.0).contains(&row[5]) {
                return Err(Error::Contract(format!(
                    "relative humidity {} at {} outside [0, 100]",
                    row[5],
                    from_hour_index(start + i as i64)
                )));
            }
        }
        Ok(WeatherSeries { start, rows })
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn rows(&self) -> &[[f64; 6]] {
        &self.rows
    }

    pub fn range(&self) -> HourRange {
        HourRange::new(self.start, self.start + self.rows.len() as i64)
    }

    pub fn at(&self, hour: i64) -> Option<&[f64; 6]> {
        let i = hour - self.start;
        if i < 0 {
            return None;
        }
        self.rows.get(i as usize)
    }
}

/// Hourly tariff or spot price in €/kWh. Negative values are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    start: i64,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(start: i64, prices: Vec<f64>) -> Result<Self> {
        if let Some(pos) = prices.iter().position(|p| !p.is_finite()) {
            return Err(Error::Contract(format!(
                "price at {} is not finite",
                from_hour_index(start + pos as i64)
            )));
        }
        Ok(PriceSeries { start, prices })
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn range(&self) -> HourRange {
        HourRange::new(self.start, self.start + self.prices.len() as i64)
    }

    pub fn window(&self, hour: i64, len: usize) -> Option<&[f64]> {
        let i = hour - self.start;
        if i < 0 || i as usize + len > self.prices.len() {
            return None;
        }
        Some(&self.prices[i as usize..i as usize + len])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HolidayCalendar {
    pub region: String,
    dates: BTreeSet<NaiveDate>,
}

impl HolidayCalendar {
    pub fn new(region: impl Into<String>, dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        HolidayCalendar {
            region: region.into(),
            dates: dates.into_iter().collect(),
        }
    }

    pub fn is_holiday(&self, date: NaiveDate) -> bool {
        self.dates.contains(&date)
    }

    pub fn dates(&self) -> impl Iterator<Item = &NaiveDate> {
        self.dates.iter()
    }

    pub fn insert(&mut self, date: NaiveDate) -> bool {
        self.dates.insert(date)
    }
}

/// Virtual energy community: a set of households and their summed load.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityProfile {
    pub household_ids: Vec<String>,
    pub aggregate: LoadSeries,
}

impl CommunityProfile {
    pub fn size(&self) -> usize {
        self.household_ids.len()
    }
}
