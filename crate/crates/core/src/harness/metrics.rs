use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::{Dataset, N_FEATURES};
use crate::math;

fn check_lengths(forecast: &[f64], actual: &[f64]) -> Result<()> {
    if forecast.len() != actual.len() || actual.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "forecast ({}) and actual ({}) must have the same non-zero length",
            forecast.len(),
            actual.len()
        )));
    }
    Ok(())
}

pub fn mae(forecast: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(forecast, actual)?;
    let s: f64 = forecast.iter().zip(actual).map(|(f, a)| (f - a).abs()).sum();
    Ok(s / actual.len() as f64)
}

/// Mean absolute error as a percentage of the mean actual value.
pub fn nmae(forecast: &[f64], actual: &[f64]) -> Result<f64> {
    let err = mae(forecast, actual)?;
    let m = mean(actual);
    if !(m > 0.0) {
        return Err(Error::UndefinedNormalization(m));
    }
    Ok(100.0 * err / m)
}

/// nMAE of each 24-value day, normalized by that day's own mean.
pub fn per_day_nmae(forecast: &[[f64; 24]], actual: &[[f64; 24]]) -> Result<Vec<f64>> {
    if forecast.len() != actual.len() {
        return Err(Error::InvalidArgument("forecast and actual day counts differ".into()));
    }
    forecast.iter().zip(actual).map(|(f, a)| nmae(f, a)).collect()
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n − 1); zero for a single value.
pub fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return if v.len() == 1 { 0.0 } else { f64::NAN };
    }
    let m = mean(v);
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    math::sqrt(ss / (v.len() - 1) as f64)
}

/// Pearson r of one column; `defined` is false when either side is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub r: f64,
    pub defined: bool,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_lengths(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Ok(Correlation { r: 0.0, defined: false });
    }
    let r = (sxy / math::sqrt(sxx * syy)).clamp(-1.0, 1.0);
    Ok(Correlation { r, defined: true })
}

/// Correlation of every raw input column with the target over all window-hours.
pub fn correlate(data: &Dataset) -> Result<Vec<Correlation>> {
    if data.windows.is_empty() {
        return Err(Error::EmptyDataset("no windows to correlate".into()));
    }
    let y: Vec<f64> = data.windows.iter().flat_map(|w| w.y).collect();
    (0..N_FEATURES)
        .map(|j| {
            let x: Vec<f64> = data.windows.iter().flat_map(|w| w.x.iter().map(move |row| row[j])).collect();
            pearson(&x, &y)
        })
        .collect()
}
