use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::Architecture;
use super::preset::{Family, ModelPreset, SizeClass};
use crate::error::{Error, Result};
use crate::features::{Dataset, InputMatrix, Normalization, HOURS, N_FEATURES};
use crate::neural::{adam_step, AdamState, Graph, ParamSet, Tensor};

pub const DEFAULT_EPOCHS: usize = 100;
pub const DEFAULT_BATCH: usize = 256;
pub const DEFAULT_LR_STAGES: [f64; 4] = [0.01, 0.005, 0.001, 0.0005];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Learning rates applied over equal spans of epochs.
    pub lr_stages: Vec<f64>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        TrainConfig {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH,
            lr_stages: DEFAULT_LR_STAGES.to_vec(),
            seed,
        }
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        let n = self.lr_stages.len();
        self.lr_stages[(epoch * n / self.epochs.max(1)).min(n - 1)]
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.lr_stages.is_empty() {
            return Err(Error::InvalidArgument(
                "epochs, batch size and learning-rate stages must be non-empty".into(),
            ));
        }
        Ok(())
    }
}

/// A deep forecaster: architecture, weights, input normalization, and the
/// output scale (kW) the network's unit-range output is multiplied by.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepModel {
    pub preset: ModelPreset,
    pub params: ParamSet,
    pub normalization: Normalization,
    pub output_scale: f64,
}

const INIT_STREAM: u64 = 0x1417_a11c_e5ee_d001;

impl DeepModel {
    /// Freshly initialized weights for `preset`, seeded.
    pub fn new(preset: ModelPreset, seed: u64) -> Result<Self> {
        preset.arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ INIT_STREAM);
        let params = preset.arch.init_params(&mut rng);
        Ok(DeepModel {
            preset,
            params,
            normalization: Normalization::identity(),
            output_scale: 1.0,
        })
    }

    pub fn with_params(preset: ModelPreset, params: ParamSet) -> Result<Self> {
        preset.arch.validate()?;
        preset.arch.check_params(&params)?;
        Ok(DeepModel {
            preset,
            params,
            normalization: Normalization::identity(),
            output_scale: 1.0,
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.preset.arch
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Forecasts (kW) for raw, un-normalized input windows.
    pub fn predict(&self, inputs: &[InputMatrix]) -> Result<Vec<[f64; HOURS]>> {
        let normalized: Vec<InputMatrix> = inputs.iter().map(|x| self.normalization.apply(x)).collect();
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in normalized.chunks(DEFAULT_BATCH) {
            let mut g = Graph::new();
            let vars = self.params.bind_frozen(&mut g);
            let x = g.constant(batch_tensor(chunk));
            let y = self.preset.arch.forward(&mut g, &vars, x)?;
            for row in g.value(y).data().chunks(HOURS) {
                let mut f = [0.0; HOURS];
                for (o, v) in f.iter_mut().zip(row) {
                    *o = v * self.output_scale;
                }
                out.push(f);
            }
        }
        Ok(out)
    }
}

fn batch_tensor(inputs: &[InputMatrix]) -> Tensor {
    let mut data = Vec::with_capacity(inputs.len() * HOURS * N_FEATURES);
    for x in inputs {
        for row in x {
            data.extend_from_slice(row);
        }
    }
    Tensor::new(vec![inputs.len(), HOURS, N_FEATURES], data).expect("batch shape")
}

/// Output scale for a training set: its mean target, or 1 when not positive.
pub fn output_scale_for(data: &Dataset) -> f64 {
    let m = data.target_mean();
    if m > 0.0 && m.is_finite() {
        m
    } else {
        1.0
    }
}

/// Runs the full schedule on `data` using the model's current normalization
/// and output scale. Returns the mean training MAE (kW) of every epoch.
pub fn fit(model: &mut DeepModel, data: &Dataset, config: &TrainConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset("no training windows".into()));
    }
    let inputs: Vec<InputMatrix> = data.windows.iter().map(|w| model.normalization.apply(&w.x)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(&model.params);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (bi, idx) in order.chunks(config.batch_size).enumerate() {
            let xs: Vec<InputMatrix> = idx.iter().map(|&i| inputs[i]).collect();
            let ys: Vec<f64> = idx.iter().flat_map(|&i| data.windows[i].y).collect();
            let mut g = Graph::new();
            let vars = model.params.bind(&mut g);
            let x = g.constant(batch_tensor(&xs));
            let y = g.constant(Tensor::new(vec![idx.len(), HOURS, 1], ys)?);
            let out = model.preset.arch.forward(&mut g, &vars, x)?;
            let pred = g.scale(out, model.output_scale);
            let loss = g.mae(pred, y)?;
            let lv = g.value(loss).item().unwrap_or(f64::NAN);
            if !lv.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: bi });
            }
            g.backward(loss)?;
            let zero: Vec<Vec<f64>> = vars
                .iter()
                .map(|&v| if g.grad(v).is_some() { Vec::new() } else { vec![0.0; g.value(v).len()] })
                .collect();
            let grads: Vec<&[f64]> = vars
                .iter()
                .zip(&zero)
                .map(|(&v, z)| g.grad(v).unwrap_or(z.as_slice()))
                .collect();
            adam_step(&mut model.params, &grads, &mut adam, lr)?;
            total += lv * idx.len() as f64;
        }
        curve.push(total / data.len() as f64);
    }
    Ok(curve)
}

/// Trains from the current weights, adopting the dataset's normalization and
/// output scale first.
pub fn train(model: &mut DeepModel, data: &Dataset, config: &TrainConfig) -> Result<Vec<f64>> {
    model.normalization = data.normalization.clone();
    model.output_scale = output_scale_for(data);
    fit(model, data, config)
}

/// Pretrains on `synth`, then fine-tunes every layer on `target` with the same
/// schedule. Fine-tuning keeps the pretraining normalization and switches the
/// output scale to the target's mean. Returns both loss curves.
pub fn pretrain_finetune(
    preset: ModelPreset,
    synth: &Dataset,
    target: &Dataset,
    config: &TrainConfig,
) -> Result<(DeepModel, Vec<f64>, Vec<f64>)> {
    if synth.is_empty() || target.is_empty() {
        return Err(Error::EmptyDataset("pretraining and fine-tuning need windows".into()));
    }
    let span = |d: &Dataset| (d.windows[0].day, d.windows[d.len() - 1].day);
    let ((s0, s1), (t0, t1)) = (span(synth), span(target));
    if s0 > t0 || s1 < t1 {
        return Err(Error::Contract(alloc::format!(
            "synthetic calendar {s0}..={s1} does not cover the fine-tuning days {t0}..={t1}"
        )));
    }
    let mut model = DeepModel::new(preset, config.seed)?;
    let pre = train(&mut model, synth, config)?;
    model.output_scale = output_scale_for(target);
    let fine = fit(&mut model, target, config)?;
    Ok((model, pre, fine))
}

impl DeepModel {
    /// Text checkpoint carrying the preset, normalization and output scale.
    pub fn to_checkpoint(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        let meta = [
            ("family".to_string(), self.preset.family.name().to_string()),
            ("size".to_string(), self.preset.size.label().to_string()),
            ("output_scale".to_string(), format!("{:?}", self.output_scale)),
            ("norm_mean".to_string(), join(&self.normalization.mean)),
            ("norm_std".to_string(), join(&self.normalization.std)),
        ];
        self.params.to_checkpoint(&meta)
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let (params, meta) = ParamSet::from_checkpoint(text)?;
        let get = |k: &str| {
            meta.iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Checkpoint(format!("missing metadata '{k}'")))
        };
        let family = Family::parse(get("family")?)?;
        let size = SizeClass::parse(get("size")?)?;
        let output_scale: f64 = get("output_scale")?
            .parse()
            .map_err(|_| Error::Checkpoint("invalid output_scale".into()))?;
        let column = |k: &str| -> Result<[f64; N_FEATURES]> {
            let v: Vec<f64> = get(k)?
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| Error::Checkpoint(format!("invalid value in '{k}'"))))
                .collect::<Result<_>>()?;
            v.try_into()
                .map_err(|_| Error::Checkpoint(format!("'{k}' needs {N_FEATURES} values")))
        };
        let normalization = Normalization {
            mean: column("norm_mean")?,
            std: column("norm_std")?,
        };
        let mut model = DeepModel::with_params(ModelPreset::table(family, size)?, params)?;
        model.normalization = normalization;
        model.output_scale = output_scale;
        Ok(model)
    }
}
