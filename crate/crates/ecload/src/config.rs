//! The JSON experiment document. Every section is optional and unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use ecload_core::dispatch::BatteryScheme;
use ecload_core::harness::{CellSettings, GridConfig};
use ecload_core::models::{Family, SizeClass, TrainConfig, DEFAULT_BATCH, DEFAULT_EPOCHS, DEFAULT_LR_STAGES};
use ecload_core::time::Quarter;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub data: DataConfig,
    pub tariff: TariffConfig,
    pub training: TrainingConfig,
    pub grid: GridSection,
    pub dispatch: DispatchSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            output_dir: None,
            threads: None,
            data: DataConfig::default(),
            tariff: TariffConfig::default(),
            training: TrainingConfig::default(),
            grid: GridSection::default(),
            dispatch: DispatchSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Files,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: DataSource,
    pub synthetic: SyntheticSection,
    pub files: Option<FilesSection>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: DataSource::Synthetic,
            synthetic: SyntheticSection::default(),
            files: None,
        }
    }
}

/// Parameters of the seeded synthetic household pool and weather.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSection {
    /// Pool size; `None` sizes the pool to the largest request.
    pub households: Option<usize>,
    pub first_day: NaiveDate,
    pub end_day: NaiveDate,
    pub mean_household_kw: f64,
    pub heating_sensitivity: f64,
    pub heating_base_temp: f64,
    pub hourly_noise: f64,
    pub daily_noise: f64,
    pub anomaly_sd: f64,
    /// Fixed (month, day) holidays repeated every year.
    pub holidays: Vec<(u32, u32)>,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let r = ecload_core::data::synthetic::WorldConfig::reference(1, 0);
        SyntheticSection {
            households: None,
            first_day: NaiveDate::from_ymd_opt(2012, 1, 1).unwrap(),
            end_day: r.end_day,
            mean_household_kw: r.mean_household_kw,
            heating_sensitivity: r.heating_sensitivity,
            heating_base_temp: r.heating_base_temp,
            hourly_noise: r.hourly_noise,
            daily_noise: r.daily_noise,
            anomaly_sd: r.anomaly_sd,
            holidays: vec![(1, 1), (12, 25), (12, 26)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilesSection {
    pub loads: PathBuf,
    #[serde(default = "default_resolution")]
    pub resolution_minutes: u32,
    pub weather: PathBuf,
    #[serde(default)]
    pub holidays: Option<PathBuf>,
    #[serde(default)]
    pub region: String,
}

fn default_resolution() -> u32 {
    60
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpotKind {
    Synthetic,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TariffConfig {
    pub spot: SpotKind,
    /// Spot price file (`timestamp,price_eur_per_kwh`) when `spot` is `file`.
    pub path: Option<PathBuf>,
    pub base: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub noise_sd: f64,
    pub network_fee: f64,
    pub tax_rate: f64,
}

impl Default for TariffConfig {
    fn default() -> Self {
        TariffConfig {
            spot: SpotKind::Synthetic,
            path: None,
            base: 0.10,
            amplitude: 0.04,
            phase: 12.0,
            noise_sd: 0.01,
            network_fee: 0.08,
            tax_rate: 0.20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_stages: Vec<f64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH,
            lr_stages: DEFAULT_LR_STAGES.to_vec(),
        }
    }
}

impl TrainingConfig {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr_stages: self.lr_stages.clone(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellSection {
    pub community_size: usize,
    pub train_months: u32,
    pub size: String,
    pub transfer_learning: bool,
    pub quarter: String,
}

impl Default for CellSection {
    fn default() -> Self {
        let b = CellSettings::BASELINE;
        CellSection {
            community_size: b.community_size,
            train_months: b.train_months,
            size: b.size_class.label().into(),
            transfer_learning: b.transfer_learning,
            quarter: b.test_quarter.name().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub baseline: CellSection,
    pub community_sizes: Vec<usize>,
    pub train_months: Vec<u32>,
    pub sizes: Vec<String>,
    pub transfer_learning: Vec<bool>,
    pub quarters: Vec<String>,
    pub repetitions: usize,
    pub test_year: i32,
    pub families: Vec<String>,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridConfig::default();
        GridSection {
            baseline: CellSection::default(),
            community_sizes: g.community_sizes,
            train_months: g.train_months,
            sizes: g.size_classes.iter().map(|s| s.label().to_string()).collect(),
            transfer_learning: g.transfer_learning,
            quarters: g.quarters.iter().map(|q| q.name().to_string()).collect(),
            repetitions: g.repetitions,
            test_year: 2013,
            families: Family::ALL.iter().map(|f| f.name().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispatchSection {
    /// Household count of the community; also sizes the battery under the
    /// per-household scheme.
    pub community_size: usize,
    /// Fixed capacities (kWh) to evaluate; empty means 12 kWh per household.
    pub capacities_kwh: Vec<f64>,
    pub train_months: u32,
    pub test_start: NaiveDate,
    pub days: usize,
    /// Forecasters to compare; `perfect` is the oracle.
    pub forecasters: Vec<String>,
    pub size: String,
    pub transfer_learning: bool,
}

impl Default for DispatchSection {
    fn default() -> Self {
        DispatchSection {
            community_size: 10,
            capacities_kwh: Vec::new(),
            train_months: 12,
            test_start: NaiveDate::from_ymd_opt(2013, 10, 1).unwrap(),
            days: 92,
            forecasters: ["perfect", "persistence", "knn", "lstm", "transformer", "xlstm"]
                .map(String::from)
                .to_vec(),
            size: "5k".into(),
            transfer_learning: false,
        }
    }
}

/// A dispatch forecaster: a model family or the perfect oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ForecasterChoice {
    Perfect,
    Model(Family),
}

impl ForecasterChoice {
    pub fn parse(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("perfect") {
            Ok(ForecasterChoice::Perfect)
        } else {
            Ok(ForecasterChoice::Model(Family::parse(s)?))
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ForecasterChoice::Perfect => "perfect",
            ForecasterChoice::Model(f) => f.name(),
        }
    }
}

impl DispatchSection {
    pub fn batteries(&self) -> Vec<BatteryScheme> {
        if self.capacities_kwh.is_empty() {
            vec![BatteryScheme::PerHousehold(self.community_size)]
        } else {
            self.capacities_kwh.iter().map(|&c| BatteryScheme::Capacity(c)).collect()
        }
    }

    pub fn choices(&self) -> Result<Vec<ForecasterChoice>> {
        self.forecasters.iter().map(|s| ForecasterChoice::parse(s)).collect()
    }
}

fn parse_quarter(s: &str) -> Result<Quarter> {
    Quarter::parse(s).ok_or_else(|| AppError::Usage(format!("unknown quarter '{s}'")))
}

impl CellSection {
    pub fn settings(&self) -> Result<CellSettings> {
        Ok(CellSettings {
            community_size: self.community_size,
            train_months: self.train_months,
            size_class: SizeClass::parse(&self.size)?,
            transfer_learning: self.transfer_learning,
            test_quarter: parse_quarter(&self.quarter)?,
        })
    }
}

impl GridSection {
    pub fn grid_config(&self) -> Result<GridConfig> {
        Ok(GridConfig {
            baseline: self.baseline.settings()?,
            community_sizes: self.community_sizes.clone(),
            train_months: self.train_months.clone(),
            size_classes: self.sizes.iter().map(|s| SizeClass::parse(s)).collect::<Result<_, _>>()?,
            transfer_learning: self.transfer_learning.clone(),
            quarters: self.quarters.iter().map(|q| parse_quarter(q)).collect::<Result<_>>()?,
            repetitions: self.repetitions,
        })
    }

    pub fn family_list(&self) -> Result<Vec<Family>> {
        let mut v: Vec<Family> = self.families.iter().map(|s| Family::parse(s)).collect::<Result<_, _>>()?;
        v.sort();
        v.dedup();
        Ok(v)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            AppError::Usage(m) => AppError::Usage(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| AppError::Usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Schema checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<()> {
        let usage = |m: &str| Err(AppError::Usage(m.into()));
        if self.threads == Some(0) {
            return usage("threads must be at least 1");
        }
        if self.data.source == DataSource::Files && self.data.files.is_none() {
            return usage("data.source is 'files' but data.files is missing");
        }
        if self.data.synthetic.end_day <= self.data.synthetic.first_day {
            return usage("data.synthetic.end_day must follow first_day");
        }
        if self.tariff.spot == SpotKind::File && self.tariff.path.is_none() {
            return usage("tariff.spot is 'file' but tariff.path is missing");
        }
        if self.training.epochs == 0 || self.training.batch_size == 0 || self.training.lr_stages.is_empty() {
            return usage("training needs positive epochs, batch_size and at least one lr stage");
        }
        if self.grid.repetitions == 0 {
            return usage("grid.repetitions must be positive");
        }
        self.grid.grid_config()?;
        self.grid.family_list()?;
        self.dispatch.choices()?;
        SizeClass::parse(&self.dispatch.size)?;
        if self.dispatch.community_size == 0 || self.dispatch.days == 0 {
            return usage("dispatch.community_size and dispatch.days must be positive");
        }
        if self.dispatch.capacities_kwh.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return usage("dispatch.capacities_kwh must be non-negative");
        }
        Ok(())
    }
}
