use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use chrono::NaiveDate;

use super::battery::BatteryParams;
use super::milp::{solve_milp, DispatchSchedule, MilpInstance};
use crate::data::{LoadSeries, PriceSeries};
use crate::error::{Error, Result};
use crate::features::HOURS;
use crate::harness::nmae;
use crate::time::date_hour;

/// Cost of a schedule applied to the actual load. Grid power is
/// `P_ch − P_dis + P_load`; feed-in (negative grid power) earns nothing.
pub fn realized_cost(schedule: &DispatchSchedule, actual: &[f64], prices: &[f64]) -> Result<f64> {
    let n = schedule.p_ch.len();
    if actual.len() != n || prices.len() != n {
        return Err(Error::InvalidArgument(format!(
            "schedule has {n} periods, actual load {} and prices {}",
            actual.len(),
            prices.len()
        )));
    }
    Ok(realized_grid(schedule, actual)
        .iter()
        .zip(prices)
        .map(|(g, p)| g.max(0.0) * p)
        .sum())
}

/// Grid power when the schedule meets the actual load.
pub fn realized_grid(schedule: &DispatchSchedule, actual: &[f64]) -> Vec<f64> {
    (0..actual.len())
        .map(|p| schedule.p_ch[p] - schedule.p_dis[p] + actual[p])
        .collect()
}

fn no_battery_cost(actual: &[f64], prices: &[f64]) -> f64 {
    actual.iter().zip(prices).map(|(l, p)| l.max(0.0) * p).sum()
}

/// Source of the 24-hour load forecast used to plan one day.
pub trait DayAheadForecaster {
    fn forecast(&self, day: NaiveDate) -> Result<[f64; HOURS]>;

    /// The perfect oracle plans without the grid floor.
    fn is_perfect(&self) -> bool {
        false
    }
}

/// Knows the actual load in advance.
#[derive(Debug, Clone, Copy)]
pub struct PerfectForecaster<'a> {
    pub load: &'a LoadSeries,
}

impl DayAheadForecaster for PerfectForecaster<'_> {
    fn forecast(&self, day: NaiveDate) -> Result<[f64; HOURS]> {
        day_slice(self.load.window(date_hour(day), HOURS), day, "load")
    }

    fn is_perfect(&self) -> bool {
        true
    }
}

/// Forecasts computed ahead of time, keyed by day.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrecomputedForecasts {
    pub by_day: BTreeMap<NaiveDate, [f64; HOURS]>,
}

impl PrecomputedForecasts {
    pub fn new(days: impl IntoIterator<Item = (NaiveDate, [f64; HOURS])>) -> Self {
        PrecomputedForecasts {
            by_day: days.into_iter().collect(),
        }
    }
}

impl DayAheadForecaster for PrecomputedForecasts {
    fn forecast(&self, day: NaiveDate) -> Result<[f64; HOURS]> {
        self.by_day
            .get(&day)
            .copied()
            .ok_or_else(|| Error::Contract(format!("no forecast for {day}")))
    }
}

fn day_slice(window: Option<&[f64]>, day: NaiveDate, what: &str) -> Result<[f64; HOURS]> {
    window
        .and_then(|w| <[f64; HOURS]>::try_from(w).ok())
        .ok_or_else(|| Error::Contract(format!("{what} does not cover {day}")))
}

/// Outcome of planning and operating one day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayResult {
    pub date: NaiveDate,
    pub forecast: [f64; HOURS],
    pub actual: [f64; HOURS],
    pub prices: [f64; HOURS],
    pub schedule: DispatchSchedule,
    /// Grid power after applying the schedule to the actual load.
    pub realized_grid: Vec<f64>,
    pub unoptimized: f64,
    pub optimized: f64,
    /// nMAE (%) of the day's forecast; `None` when the day's mean load is not positive.
    pub nmae: Option<f64>,
}

/// Plans one day from the forecast and settles it against the actual load.
pub fn run_day(
    forecaster: &dyn DayAheadForecaster,
    load: &LoadSeries,
    prices: &PriceSeries,
    battery: BatteryParams,
    date: NaiveDate,
) -> Result<DayResult> {
    let wrap = |e: Error| Error::DayFailed {
        date,
        source: Box::new(e),
    };
    let h = date_hour(date);
    let actual = day_slice(load.window(h, HOURS), date, "load").map_err(wrap)?;
    let pi = day_slice(prices.window(h, HOURS), date, "tariff").map_err(wrap)?;
    let forecast = forecaster.forecast(date).map_err(wrap)?;
    let inst = MilpInstance::new(&forecast, &pi, battery, !forecaster.is_perfect()).map_err(wrap)?;
    let schedule = solve_milp(&inst).map_err(wrap)?;
    let optimized = realized_cost(&schedule, &actual, &pi).map_err(wrap)?;
    Ok(DayResult {
        date,
        forecast,
        actual,
        prices: pi,
        realized_grid: realized_grid(&schedule, &actual),
        schedule,
        unoptimized: no_battery_cost(&actual, &pi),
        optimized,
        nmae: nmae(&forecast, &actual).ok(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub days: Vec<DayResult>,
    pub unoptimized: f64,
    pub optimized: f64,
    pub savings: f64,
    pub savings_pct: f64,
}

impl CostReport {
    /// Totals over days given in date order.
    pub fn from_days(days: Vec<DayResult>) -> Self {
        let unoptimized: f64 = days.iter().map(|d| d.unoptimized).sum();
        let optimized: f64 = days.iter().map(|d| d.optimized).sum();
        let savings = unoptimized - optimized;
        let savings_pct = if unoptimized > 0.0 {
            savings / unoptimized * 100.0
        } else {
            0.0
        };
        CostReport {
            days,
            unoptimized,
            optimized,
            savings,
            savings_pct,
        }
    }

    /// Mean of the defined per-day nMAE values.
    pub fn mean_nmae(&self) -> Option<f64> {
        let v: Vec<f64> = self.days.iter().filter_map(|d| d.nmae).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Day-by-day receding-horizon simulation over `days`. Each day starts and
/// ends at the same state of charge, so days are independent.
pub fn simulate_mpc(
    forecaster: &dyn DayAheadForecaster,
    load: &LoadSeries,
    prices: &PriceSeries,
    battery: BatteryParams,
    days: &[NaiveDate],
) -> Result<CostReport> {
    let results = days
        .iter()
        .map(|&d| run_day(forecaster, load, prices, battery, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(CostReport::from_days(results))
}
