//! Seeded synthetic smart-meter pool and weather, used for desk-scale
//! experiments and tests when the measured datasets are not at hand.

use alloc::format;
use alloc::vec::Vec;
use chrono::NaiveDate;
use core::f64::consts::PI;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::series::{HolidayCalendar, LoadSeries, WeatherSeries};
use crate::error::{Error, Result};
use crate::math;
use crate::synthgen::{ProfileKind, ProfileTables};
use crate::time::{date_hour, date_of_hour};

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub first_day: NaiveDate,
    pub end_day: NaiveDate,
    pub households: usize,
    pub seed: u64,
    /// Mean household consumption level (kW) before heating.
    pub mean_household_kw: f64,
    /// Heating demand per degree below `heating_base_temp`, relative to a
    /// household's level (kW per °C per kW of level).
    pub heating_sensitivity: f64,
    pub heating_base_temp: f64,
    /// Log-scale standard deviation of the hourly multiplicative noise.
    pub hourly_noise: f64,
    /// Standard deviation of the per-day level factor.
    pub daily_noise: f64,
    /// Standard deviation (°C) of the day-to-day temperature anomaly.
    pub anomaly_sd: f64,
    pub calendar: HolidayCalendar,
}

impl WorldConfig {
    /// July 2012 to February 2014 with a moderately weather-sensitive pool.
    pub fn reference(households: usize, seed: u64) -> Self {
        let first = NaiveDate::from_ymd_opt(2012, 7, 1).unwrap();
        let end = NaiveDate::from_ymd_opt(2014, 3, 1).unwrap();
        WorldConfig {
            first_day: first,
            end_day: end,
            households,
            seed,
            mean_household_kw: 0.45,
            heating_sensitivity: 0.06,
            heating_base_temp: 15.5,
            hourly_noise: 0.45,
            daily_noise: 0.15,
            anomaly_sd: 3.0,
            calendar: fixed_holidays("synthetic", 2012..=2014, &[(1, 1), (12, 25), (12, 26)]),
        }
    }
}

/// Calendar with the same month/day holidays every year.
pub fn fixed_holidays(
    region: &str,
    years: core::ops::RangeInclusive<i32>,
    month_days: &[(u32, u32)],
) -> HolidayCalendar {
    let dates = years.flat_map(|y| {
        month_days
            .iter()
            .filter_map(move |&(m, d)| NaiveDate::from_ymd_opt(y, m, d))
    });
    HolidayCalendar::new(region, dates)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub weather: WeatherSeries,
    pub households: Vec<LoadSeries>,
    /// Weather-driven part of each household's load (same grid).
    pub heating: Vec<LoadSeries>,
    pub calendar: HolidayCalendar,
}

struct Ar1 {
    phi: f64,
    noise: Normal<f64>,
    state: f64,
}

impl Ar1 {
    fn new(phi: f64, innovation_sd: f64) -> Self {
        Ar1 {
            phi,
            noise: Normal::new(0.0, innovation_sd.max(0.0)).unwrap(),
            state: 0.0,
        }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        self.state = self.phi * self.state + self.noise.sample(rng);
        self.state
    }
}

fn generate_weather(cfg: &WorldConfig, rng: &mut ChaCha8Rng) -> Result<WeatherSeries> {
    let start = date_hour(cfg.first_day);
    let hours = (date_hour(cfg.end_day) - start) as usize;
    let days = hours / 24 + 2;
    // Day-level anomaly, interpolated within the day.
    let mut anomaly = Ar1::new(0.7, cfg.anomaly_sd * math::sqrt(1.0 - 0.49));
    let daily: Vec<f64> = (0..days).map(|_| anomaly.next(rng)).collect();
    let mut dew_gap = Ar1::new(0.97, 0.25);
    let mut wind = Ar1::new(0.95, 1.5);
    let mut pressure = Ar1::new(0.99, 0.8);
    let mut direction = 220.0;
    let jitter = Normal::new(0.0, 0.6).unwrap();
    let mut rows = Vec::with_capacity(hours);
    for i in 0..hours {
        let h = start + i as i64;
        let date = date_of_hour(h);
        let doy = f64::from(chrono::Datelike::ordinal0(&date));
        let hour = h.rem_euclid(24) as f64;
        let day = i / 24;
        let frac = hour / 24.0;
        let a = daily[day] * (1.0 - frac) + daily[day + 1] * frac;
        let temp = 10.5 - 7.5 * math::cos(2.0 * PI * (doy - 20.0) / 365.25)
            + 3.5 * math::sin(2.0 * PI * (hour - 9.0) / 24.0)
            + a
            + jitter.sample(rng);
        let gap = 1.0 + 3.0 * (0.5 + 0.5 * math::tanh(dew_gap.next(rng))) + 0.1 * (hour - 12.0).abs();
        let dew = temp - gap;
        let humidity = (100.0 - 5.0 * gap).clamp(0.0, 100.0);
        let speed = (12.0 + wind.next(rng)).abs();
        direction = (direction + rng.random_range(-8.0..8.0) + 360.0) % 360.0;
        let p = 1013.0 + pressure.next(rng) * 3.0;
        rows.push([temp, dew, direction, speed, p, humidity]);
    }
    WeatherSeries::new(start, rows)
}

/// Generates weather and a pool of households whose load combines a
/// standard-profile shape, day-level and hourly noise, and a heating term
/// driven by the temperature 24 hours earlier.
pub fn generate_world(cfg: &WorldConfig, tables: &ProfileTables) -> Result<SyntheticWorld> {
    if cfg.end_day <= cfg.first_day {
        return Err(Error::InvalidArgument("synthetic world range is empty".into()));
    }
    if !(cfg.mean_household_kw > 0.0) || cfg.hourly_noise < 0.0 || cfg.daily_noise < 0.0 {
        return Err(Error::InvalidArgument("invalid synthetic world parameters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let weather = generate_weather(cfg, &mut rng)?;
    let start = weather.start();
    let hours = weather.rows().len();

    // Unit-mean household shape over the whole range.
    let mut shape = Vec::with_capacity(hours);
    let mut day = cfg.first_day;
    while day < cfg.end_day {
        shape.extend(tables.day_values(ProfileKind::Household, day, &cfg.calendar)?);
        day = day.succ_opt().unwrap();
    }
    let mean_shape = shape.iter().sum::<f64>() / shape.len() as f64;
    shape.iter_mut().for_each(|v| *v /= mean_shape);

    let level_dist = Normal::new(0.0, 0.35).unwrap();
    let day_dist = Normal::new(1.0, cfg.daily_noise).unwrap();
    let hour_dist = Normal::new(0.0, cfg.hourly_noise).unwrap();
    let mut households = Vec::with_capacity(cfg.households);
    let mut heating = Vec::with_capacity(cfg.households);
    for k in 0..cfg.households {
        let level = cfg.mean_household_kw * math::exp(level_dist.sample(&mut rng) - 0.35 * 0.35 / 2.0);
        let sensitivity = cfg.heating_sensitivity * level * rng.random_range(0.5..1.5);
        let mut load = Vec::with_capacity(hours);
        let mut heat = Vec::with_capacity(hours);
        let mut day_factor = 1.0;
        for i in 0..hours {
            if i % 24 == 0 {
                day_factor = day_dist.sample(&mut rng).max(0.2);
            }
            let lagged_temp = weather.rows()[i.saturating_sub(24)][0];
            let hterm = sensitivity * (cfg.heating_base_temp - lagged_temp).max(0.0);
            let eps = hour_dist.sample(&mut rng);
            let noise = math::exp(eps - cfg.hourly_noise * cfg.hourly_noise / 2.0);
            load.push(level * shape[i] * day_factor * noise + hterm);
            heat.push(hterm);
        }
        households.push(LoadSeries::new(format!("syn{k:04}"), start, load)?);
        heating.push(LoadSeries::new(format!("syn{k:04}-heat"), start, heat)?);
    }
    Ok(SyntheticWorld {
        weather,
        households,
        heating,
        calendar: cfg.calendar.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> WorldConfig {
        let mut c = WorldConfig::reference(3, 5);
        c.end_day = NaiveDate::from_ymd_opt(2012, 9, 1).unwrap();
        c
    }

    #[test]
    fn world_is_deterministic_and_aligned() {
        let t = ProfileTables::builtin();
        let a = generate_world(&small(), &t).unwrap();
        let b = generate_world(&small(), &t).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.households[0].range(), a.weather.range());
        assert!(a.households.iter().all(|h| h.values().iter().all(|v| *v >= 0.0)));
    }
}
