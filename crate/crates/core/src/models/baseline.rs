use alloc::format;
use alloc::vec::Vec;
use chrono::{Duration, NaiveDate};

use crate::data::LoadSeries;
use crate::error::{Error, Result};
use crate::features::{Dataset, HOURS, N_FEATURES};
use crate::time::{date_hour, date_of_hour};

/// Neighbors used by the KNN baseline.
pub const KNN_K: usize = 40;

/// Seasonal naive forecast: the same hours one week earlier.
pub fn persistence_forecast(history: &LoadSeries, day: NaiveDate) -> Result<[f64; HOURS]> {
    let start = date_hour(day) - 168;
    let window = history.window(start, HOURS).ok_or_else(|| Error::MissingHistory {
        day,
        earliest: Some(date_of_hour(history.start()) + Duration::days(7)),
    })?;
    let mut out = [0.0; HOURS];
    out.copy_from_slice(window);
    Ok(out)
}

/// Distance-weighted k-nearest-neighbor regression over hourly rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    k: usize,
    dim: usize,
    rows: Vec<f64>,
    targets: Vec<f64>,
}

impl Knn {
    /// `rows` holds `targets.len()` points of `dim` coordinates each.
    pub fn from_rows(dim: usize, rows: Vec<f64>, targets: Vec<f64>, k: usize) -> Result<Self> {
        if dim == 0 || rows.len() != dim * targets.len() {
            return Err(Error::ShapeMismatch {
                op: "knn",
                left: alloc::vec![targets.len(), dim],
                right: alloc::vec![rows.len()],
            });
        }
        if k == 0 || targets.len() < k {
            return Err(Error::EmptyDataset(format!(
                "KNN needs at least k = {k} training rows, got {}",
                targets.len()
            )));
        }
        Ok(Knn { k, dim, rows, targets })
    }

    /// One row per training hour, in normalized feature space.
    pub fn fit(train: &Dataset, k: usize) -> Result<Self> {
        let mut rows = Vec::with_capacity(train.len() * HOURS * N_FEATURES);
        let mut targets = Vec::with_capacity(train.len() * HOURS);
        for i in 0..train.len() {
            let x = train.normalized(i);
            for (h, row) in x.iter().enumerate() {
                rows.extend_from_slice(row);
                targets.push(train.windows[i].y[h]);
            }
        }
        Knn::from_rows(N_FEATURES, rows, targets, k)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// The `k` nearest rows as `(distance, target)`, nearest first; ties
    /// resolve to the earlier training row.
    pub fn neighbors(&self, query: &[f64]) -> Vec<(f64, f64)> {
        let mut d: Vec<(f64, usize)> = self
            .rows
            .chunks(self.dim)
            .enumerate()
            .map(|(i, r)| (r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(sq, i)| (crate::math::sqrt(sq), self.targets[i])).collect()
    }

    pub fn predict_row(&self, query: &[f64]) -> f64 {
        let nb = self.neighbors(query);
        let zeros: Vec<f64> = nb.iter().filter(|(d, _)| *d == 0.0).map(|(_, y)| *y).collect();
        if !zeros.is_empty() {
            return zeros.iter().sum::<f64>() / zeros.len() as f64;
        }
        let (num, den) = nb.iter().fold((0.0, 0.0), |(n, s), (d, y)| (n + y / d, s + 1.0 / d));
        num / den
    }
}
