//! Assembles households, weather, holidays and the tariff from the configured
//! source.

use chrono::{Datelike, NaiveDate};
use ecload_core::data::synthetic::{fixed_holidays, generate_world, WorldConfig};
use ecload_core::data::{
    build_tariff, load_smart_meter, HolidayCalendar, LoadSeries, PriceSeries, Rejection, SourceResolution, SpotSource,
    SyntheticSpot, WeatherSeries,
};
use ecload_core::synthgen::ProfileTables;
use ecload_core::time::date_of_hour;

use crate::config::{DataSource, ExperimentConfig, SpotKind};
use crate::error::{AppError, Result};
use crate::io;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for a named stream under the master seed.
pub fn derive_seed(master: u64, tag: &str, parts: &[u64]) -> u64 {
    let mut h = mix(master);
    for b in tag.bytes() {
        h = mix(h ^ u64::from(b));
    }
    for &p in parts {
        h = mix(h ^ p);
    }
    h
}

#[derive(Debug, Clone)]
pub struct DataBundle {
    pub pool: Vec<LoadSeries>,
    pub weather: WeatherSeries,
    pub calendar: HolidayCalendar,
    /// Spot prices before fees and taxes.
    pub spot: PriceSeries,
    /// Retail tariff (€/kWh).
    pub tariff: PriceSeries,
    pub rejected: Vec<Rejection>,
    pub tables: ProfileTables,
}

impl DataBundle {
    /// First and one-past-last day covered by the weather.
    pub fn day_span(&self) -> (NaiveDate, NaiveDate) {
        let r = self.weather.range();
        (date_of_hour(r.start), date_of_hour(r.end))
    }
}

pub fn world_config(cfg: &ExperimentConfig, households: usize) -> WorldConfig {
    let s = &cfg.data.synthetic;
    let years = s.first_day.year()..=s.end_day.year();
    WorldConfig {
        first_day: s.first_day,
        end_day: s.end_day,
        households,
        seed: derive_seed(cfg.seed, "world", &[]),
        mean_household_kw: s.mean_household_kw,
        heating_sensitivity: s.heating_sensitivity,
        heating_base_temp: s.heating_base_temp,
        hourly_noise: s.hourly_noise,
        daily_noise: s.daily_noise,
        anomaly_sd: s.anomaly_sd,
        calendar: fixed_holidays("synthetic", years, &s.holidays),
    }
}

/// Spot prices and the retail tariff built from them.
fn tariff_for(cfg: &ExperimentConfig, weather: &WeatherSeries) -> Result<(PriceSeries, PriceSeries)> {
    let t = &cfg.tariff;
    let spot = match t.spot {
        SpotKind::File => {
            let path = t.path.as_ref().ok_or_else(|| AppError::Usage("tariff.path missing".into()))?;
            SpotSource::Series(io::read_prices(path)?)
        }
        SpotKind::Synthetic => SpotSource::Synthetic(SyntheticSpot {
            start: weather.start(),
            hours: weather.rows().len(),
            base: t.base,
            amplitude: t.amplitude,
            phase: t.phase,
            noise_sd: t.noise_sd,
            seed: derive_seed(cfg.seed, "tariff", &[]),
        }),
    };
    let tariff = build_tariff(&spot, t.network_fee, t.tax_rate)?;
    let spot = match spot {
        SpotSource::Series(s) => s,
        SpotSource::Synthetic(spec) => spec.generate()?,
    };
    Ok((spot, tariff))
}

/// Loads or generates the data. A synthetic pool without a configured size
/// gets `min_households` members.
pub fn load_data(cfg: &ExperimentConfig, min_households: usize) -> Result<DataBundle> {
    let tables = ProfileTables::builtin();
    match cfg.data.source {
        DataSource::Synthetic => {
            let n = cfg.data.synthetic.households.unwrap_or(min_households.max(1));
            let world = generate_world(&world_config(cfg, n), &tables)?;
            let (spot, tariff) = tariff_for(cfg, &world.weather)?;
            Ok(DataBundle {
                pool: world.households,
                weather: world.weather,
                calendar: world.calendar,
                spot,
                tariff,
                rejected: Vec::new(),
                tables,
            })
        }
        DataSource::Files => {
            let f = cfg
                .data
                .files
                .as_ref()
                .ok_or_else(|| AppError::Usage("data.files missing".into()))?;
            let resolution = SourceResolution::from_minutes(f.resolution_minutes)
                .ok_or_else(|| AppError::Usage(format!("resolution must be 30 or 60 minutes, got {}", f.resolution_minutes)))?;
            let outcome = load_smart_meter(io::read_meter_readings(&f.loads)?, resolution)?;
            let weather = io::read_weather(&f.weather)?;
            let calendar = match &f.holidays {
                Some(p) => io::read_holidays(p, &f.region)?,
                None => HolidayCalendar::new(f.region.clone(), []),
            };
            let (spot, tariff) = tariff_for(cfg, &weather)?;
            Ok(DataBundle {
                pool: outcome.series,
                weather,
                calendar,
                spot,
                tariff,
                rejected: outcome.rejected,
                tables,
            })
        }
    }
}
