use alloc::vec::Vec;

use super::baseline::{Knn, KNN_K};
use super::preset::{Family, ModelPreset};
use super::train::{train, DeepModel, TrainConfig};
use crate::error::Result;
use crate::features::{Dataset, InputMatrix, Normalization, HOURS, LAG_COLUMNS};

/// Any of the five forecasters, fitted and ready to predict from raw windows.
#[derive(Debug, Clone, PartialEq)]
pub enum Forecaster {
    Persistence,
    Knn { model: Knn, normalization: Normalization },
    Deep(DeepModel),
}

impl Forecaster {
    pub fn family(&self) -> Family {
        match self {
            Forecaster::Persistence => Family::Persistence,
            Forecaster::Knn { .. } => Family::Knn,
            Forecaster::Deep(m) => m.preset.family,
        }
    }

    /// Trainable parameter count for deep families.
    pub fn param_count(&self) -> Option<usize> {
        match self {
            Forecaster::Deep(m) => Some(m.param_count()),
            _ => None,
        }
    }

    /// Fits a baseline or trains a deep preset from scratch; returns the loss
    /// curve for deep families (empty otherwise).
    pub fn fit(family: Family, preset: Option<ModelPreset>, train_set: &Dataset, config: &TrainConfig) -> Result<(Self, Vec<f64>)> {
        match family {
            Family::Persistence => Ok((Forecaster::Persistence, Vec::new())),
            Family::Knn => Ok((
                Forecaster::Knn {
                    model: Knn::fit(train_set, KNN_K)?,
                    normalization: train_set.normalization.clone(),
                },
                Vec::new(),
            )),
            _ => {
                let preset = match preset {
                    Some(p) => p,
                    None => ModelPreset::table(family, super::SizeClass::K5)?,
                };
                let mut model = DeepModel::new(preset, config.seed)?;
                let curve = train(&mut model, train_set, config)?;
                Ok((Forecaster::Deep(model), curve))
            }
        }
    }

    pub fn predict(&self, inputs: &[InputMatrix]) -> Result<Vec<[f64; HOURS]>> {
        match self {
            Forecaster::Persistence => Ok(inputs
                .iter()
                .map(|x| core::array::from_fn(|h| x[h][LAG_COLUMNS.start]))
                .collect()),
            Forecaster::Knn { model, normalization } => Ok(inputs
                .iter()
                .map(|x| {
                    let z = normalization.apply(x);
                    core::array::from_fn(|h| model.predict_row(&z[h]))
                })
                .collect()),
            Forecaster::Deep(m) => m.predict(inputs),
        }
    }

    /// Forecasts for every window of a dataset.
    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<[f64; HOURS]>> {
        let inputs: Vec<InputMatrix> = data.windows.iter().map(|w| w.x).collect();
        self.predict(&inputs)
    }
}
