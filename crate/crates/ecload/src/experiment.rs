//! Grid and dispatch experiments on top of the core algorithms.

use std::time::Instant;

use chrono::{Months, NaiveDate};
use ecload_core::data::{make_split, sample_communities, CommunityProfile, DataSplit, LoadSeries};
use ecload_core::dispatch::{
    build_battery, run_day, BatteryScheme, CostReport, DayAheadForecaster, PerfectForecaster, PrecomputedForecasts,
};
use ecload_core::features::{build_dataset, build_windows, Dataset, Normalization, LAG_DAYS};
use ecload_core::harness::{nmae, GridCell, ResultRecord};
use ecload_core::models::{pretrain_finetune, Family, Forecaster, ModelPreset, SizeClass, TrainConfig};
use ecload_core::synthgen::pretraining_dataset;
use ecload_core::time::{date_hour, HourRange};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ForecasterChoice};
use crate::error::{AppError, Result};
use crate::world::{derive_seed, DataBundle};

/// Training and test windows of one community.
#[derive(Debug, Clone)]
pub struct CommunityData {
    pub split: DataSplit,
    pub train: Dataset,
    pub test: Dataset,
}

fn coverage(load: &LoadSeries, bundle: &DataBundle) -> HourRange {
    let (l, w) = (load.range(), bundle.weather.range());
    HourRange::new(l.start.max(w.start), l.end.min(w.end))
}

pub fn community_data(
    bundle: &DataBundle,
    community: &CommunityProfile,
    train_months: u32,
    quarter: ecload_core::time::Quarter,
    year: i32,
) -> Result<CommunityData> {
    let split = make_split(coverage(&community.aggregate, bundle), quarter, year, train_months)?;
    let (train, test) = build_dataset(&split, &community.aggregate, &bundle.weather, &bundle.calendar)?;
    Ok(CommunityData { split, train, test })
}

/// Fits one forecaster. Deep families use the preset of `size`; with
/// `transfer_learning` they are pretrained on a standard profile scaled to
/// the training mean before fine-tuning.
pub fn fit_forecaster(
    family: Family,
    size: SizeClass,
    transfer_learning: bool,
    train: &Dataset,
    bundle: &DataBundle,
    config: &TrainConfig,
) -> Result<Forecaster> {
    if !family.is_deep() {
        return Ok(Forecaster::fit(family, None, train, config)?.0);
    }
    let preset = ModelPreset::table(family, size)?;
    if transfer_learning {
        let (first, end) = bundle.day_span();
        let synth = pretraining_dataset(&bundle.tables, &bundle.weather, &bundle.calendar, first, end, train.target_mean())?;
        let (model, _, _) = pretrain_finetune(preset, &synth, train, config)?;
        Ok(Forecaster::Deep(model))
    } else {
        Ok(Forecaster::fit(family, Some(preset), train, config)?.0)
    }
}

/// Overall nMAE (%) over all test hours and the per-day values (NaN when a
/// day's mean load is zero).
pub fn evaluate(forecaster: &Forecaster, test: &Dataset) -> Result<(f64, Vec<f64>)> {
    let pred = forecaster.predict_dataset(test)?;
    let flat_f: Vec<f64> = pred.iter().flatten().copied().collect();
    let flat_a: Vec<f64> = test.windows.iter().flat_map(|w| w.y).collect();
    let overall = nmae(&flat_f, &flat_a)?;
    let per_day = pred
        .iter()
        .zip(&test.windows)
        .map(|(f, w)| nmae(f, &w.y).unwrap_or(f64::NAN))
        .collect();
    Ok((overall, per_day))
}

fn family_index(f: Family) -> u64 {
    Family::ALL.iter().position(|x| *x == f).unwrap() as u64
}

/// One (cell, repetition) work item.
#[derive(Debug, Clone, Copy)]
pub struct GridTask {
    pub cell: GridCell,
    pub repetition: usize,
}

pub fn grid_tasks(cells: &[GridCell], repetitions: usize) -> Vec<GridTask> {
    cells
        .iter()
        .flat_map(|&cell| (0..repetitions).map(move |repetition| GridTask { cell, repetition }))
        .collect()
}

/// Communities per size, shared by every cell with that size.
pub type CommunityPools = Vec<(usize, std::result::Result<Vec<CommunityProfile>, String>)>;

pub fn grid_communities(cfg: &ExperimentConfig, bundle: &DataBundle, cells: &[GridCell], repetitions: usize) -> CommunityPools {
    let mut sizes: Vec<usize> = cells.iter().map(|c| c.settings.community_size).collect();
    sizes.sort();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|h| {
            let seed = derive_seed(cfg.seed, "community", &[h as u64]);
            (h, sample_communities(&bundle.pool, h, repetitions, seed).map_err(|e| e.to_string()))
        })
        .collect()
}

/// Trains and evaluates every family on one repetition of one cell. Failures
/// are recorded, not raised.
pub fn run_task(
    cfg: &ExperimentConfig,
    bundle: &DataBundle,
    pools: &CommunityPools,
    families: &[Family],
    test_year: i32,
    task: GridTask,
) -> Vec<ResultRecord> {
    let s = task.cell.settings;
    let record = |family: Family, seed: u64| ResultRecord {
        cell: task.cell,
        repetition: task.repetition,
        seed,
        family,
        param_count: None,
        nmae: None,
        per_day_nmae: Vec::new(),
        train_seconds: 0.0,
        error: None,
    };
    let seed_of = |f: Family| derive_seed(cfg.seed, "train", &[task.repetition as u64, family_index(f)]);
    let community = pools
        .iter()
        .find(|(h, _)| *h == s.community_size)
        .map(|(_, r)| r.as_ref().map(|c| &c[task.repetition]));
    let data = match community {
        Some(Ok(c)) => community_data(bundle, c, s.train_months, s.test_quarter, test_year).map_err(|e| e.to_string()),
        Some(Err(e)) => Err(e.clone()),
        None => Err("no community sampled".to_string()),
    };
    let data = match data {
        Ok(d) => d,
        Err(e) => {
            return families
                .iter()
                .map(|&f| ResultRecord {
                    error: Some(e.clone()),
                    ..record(f, seed_of(f))
                })
                .collect()
        }
    };
    families
        .iter()
        .map(|&f| {
            let seed = seed_of(f);
            let t0 = Instant::now();
            let outcome = fit_forecaster(f, s.size_class, s.transfer_learning, &data.train, bundle, &cfg.training.with_seed(seed))
                .and_then(|m| Ok((m.param_count(), evaluate(&m, &data.test)?)));
            let secs = t0.elapsed().as_secs_f64();
            match outcome {
                Ok((params, (overall, per_day))) => ResultRecord {
                    param_count: params,
                    nmae: Some(overall),
                    per_day_nmae: per_day,
                    train_seconds: secs,
                    ..record(f, seed)
                },
                Err(e) => ResultRecord {
                    train_seconds: secs,
                    error: Some(e.to_string()),
                    ..record(f, seed)
                },
            }
        })
        .collect()
}

/// Runs all tasks on the current rayon pool. `on_done` sees each task's
/// records as it finishes; the returned records are in task order.
pub fn run_grid(
    cfg: &ExperimentConfig,
    bundle: &DataBundle,
    on_done: &(dyn Fn(&[ResultRecord]) + Sync),
) -> Result<Vec<ResultRecord>> {
    let grid = cfg.grid.grid_config()?;
    let families = cfg.grid.family_list()?;
    let cells = grid.cells();
    let pools = grid_communities(cfg, bundle, &cells, grid.repetitions);
    let tasks = grid_tasks(&cells, grid.repetitions);
    let per_task: Vec<Vec<ResultRecord>> = tasks
        .par_iter()
        .map(|&t| {
            let r = run_task(cfg, bundle, &pools, &families, cfg.grid.test_year, t);
            on_done(&r);
            r
        })
        .collect();
    Ok(per_task.into_iter().flatten().collect())
}

/// Household count a grid needs from the pool.
pub fn grid_pool_size(cfg: &ExperimentConfig) -> Result<usize> {
    let grid = cfg.grid.grid_config()?;
    Ok(grid.cells().iter().map(|c| c.settings.community_size).max().unwrap_or(1) * grid.repetitions)
}

/// Settles each day in parallel; errors report the earliest failing day.
pub fn simulate_parallel<F: DayAheadForecaster + Sync>(
    forecaster: &F,
    load: &LoadSeries,
    bundle: &DataBundle,
    scheme: BatteryScheme,
    days: &[NaiveDate],
) -> Result<CostReport> {
    let battery = build_battery(scheme)?;
    let results: Vec<_> = days
        .par_iter()
        .map(|&d| run_day(forecaster, load, &bundle.tariff, battery, d))
        .collect();
    let days = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(CostReport::from_days(days))
}

#[derive(Debug, Clone)]
pub struct DispatchRun {
    pub forecaster: ForecasterChoice,
    pub scheme: BatteryScheme,
    pub capacity_kwh: f64,
    pub report: CostReport,
}

/// Model forecasts for the dispatch days, keyed by date.
#[derive(Debug, Clone)]
pub struct DispatchSetup {
    pub community: CommunityProfile,
    pub days: Vec<NaiveDate>,
    pub forecasts: Vec<(ForecasterChoice, Option<PrecomputedForecasts>)>,
}

/// Samples the community, trains every requested model on the months before
/// the first test day and forecasts the test days.
pub fn prepare_dispatch(cfg: &ExperimentConfig, bundle: &DataBundle) -> Result<DispatchSetup> {
    let d = &cfg.dispatch;
    let seed = derive_seed(cfg.seed, "dispatch-community", &[d.community_size as u64]);
    let community = sample_communities(&bundle.pool, d.community_size, 1, seed)?.remove(0);
    let load = &community.aggregate;
    let days: Vec<NaiveDate> = d.test_start.iter_days().take(d.days).collect();
    let train_start = d
        .test_start
        .checked_sub_months(Months::new(d.train_months))
        .ok_or_else(|| AppError::Usage("dispatch training start out of range".into()))?;
    let cov = coverage(load, bundle);
    if date_hour(train_start) < cov.start {
        return Err(ecload_core::Error::InsufficientHistory {
            missing_months: d.train_months,
            needed_from: train_start,
        }
        .into());
    }
    let train_days = train_start.iter_days().take_while(|x| *x < d.test_start).skip(LAG_DAYS);
    let train_windows = build_windows(train_days, load, &bundle.weather, &bundle.calendar)?;
    if train_windows.is_empty() {
        return Err(ecload_core::Error::EmptyDataset("dispatch training range has no windows".into()).into());
    }
    let normalization = Normalization::fit(&train_windows)?;
    let train = Dataset {
        windows: train_windows,
        normalization: normalization.clone(),
    };
    let test = Dataset {
        windows: build_windows(days.iter().copied(), load, &bundle.weather, &bundle.calendar)?,
        normalization,
    };
    let size = SizeClass::parse(&d.size)?;
    let mut forecasts = Vec::new();
    for choice in d.choices()? {
        let pre = match choice {
            ForecasterChoice::Perfect => None,
            ForecasterChoice::Model(f) => {
                let seed = derive_seed(cfg.seed, "dispatch-train", &[family_index(f)]);
                let m = fit_forecaster(f, size, d.transfer_learning, &train, bundle, &cfg.training.with_seed(seed))?;
                let pred = m.predict_dataset(&test)?;
                Some(PrecomputedForecasts::new(
                    test.windows.iter().map(|w| w.day).zip(pred),
                ))
            }
        };
        forecasts.push((choice, pre));
    }
    Ok(DispatchSetup {
        community,
        days,
        forecasts,
    })
}

/// Every forecaster against every battery, forecaster-major.
pub fn run_dispatch(cfg: &ExperimentConfig, bundle: &DataBundle, setup: &DispatchSetup) -> Result<Vec<DispatchRun>> {
    let load = &setup.community.aggregate;
    let mut runs = Vec::new();
    for (choice, pre) in &setup.forecasts {
        for scheme in cfg.dispatch.batteries() {
            let report = match pre {
                None => simulate_parallel(&PerfectForecaster { load }, load, bundle, scheme, &setup.days)?,
                Some(p) => simulate_parallel(p, load, bundle, scheme, &setup.days)?,
            };
            runs.push(DispatchRun {
                forecaster: *choice,
                scheme,
                capacity_kwh: build_battery(scheme)?.e_max,
                report,
            });
        }
    }
    Ok(runs)
}
