use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::series::PriceSeries;
use crate::error::{Error, Result};
use crate::math;

/// Sinusoidal day-ahead spot price with seeded Gaussian noise, used when no
/// market data is available.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpot {
    pub start: i64,
    pub hours: usize,
    pub base: f64,
    pub amplitude: f64,
    /// Hour of day at which the sine crosses upward through `base`.
    pub phase: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SyntheticSpot {
    pub fn generate(&self) -> Result<PriceSeries> {
        if !(self.noise_sd >= 0.0) {
            return Err(Error::InvalidArgument("noise_sd must be non-negative".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.noise_sd)
            .map_err(|e| Error::InvalidArgument(alloc::format!("{e}")))?;
        let prices: Vec<f64> = (0..self.hours)
            .map(|i| {
                let hour = (self.start + i as i64).rem_euclid(24) as f64;
                self.base
                    + self.amplitude * math::sin(2.0 * PI * (hour - self.phase) / 24.0)
                    + noise.sample(&mut rng)
            })
            .collect();
        PriceSeries::new(self.start, prices)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpotSource {
    Series(PriceSeries),
    Synthetic(SyntheticSpot),
}

/// Retail tariff: `(spot + network_fee) * (1 + tax_rate)` in €/kWh.
pub fn build_tariff(spot: &SpotSource, network_fee: f64, tax_rate: f64) -> Result<PriceSeries> {
    if !(network_fee >= 0.0) || !(tax_rate >= 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "network fee ({network_fee}) and tax rate ({tax_rate}) must be non-negative"
        )));
    }
    let spot = match spot {
        SpotSource::Series(s) => s.clone(),
        SpotSource::Synthetic(spec) => spec.generate()?,
    };
    let prices = spot
        .prices()
        .iter()
        .map(|p| (p + network_fee) * (1.0 + tax_rate))
        .collect();
    PriceSeries::new(spot.start(), prices)
}
