//! Command-line entry point.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use ecload_core::data::{load_smart_meter, sample_communities, SourceResolution};
use ecload_core::dispatch::BatteryScheme;
use ecload_core::harness::{nmae, ResultRecord};
use ecload_core::models::{pretrain_finetune, DeepModel, Family, Forecaster, ModelPreset, SizeClass};
use ecload_core::synthgen::{generate_profile, pretraining_dataset, ProfileKind, SyntheticSpec};
use ecload_core::time::Quarter;
use serde_json::json;

use crate::config::{DataSource, ExperimentConfig};
use crate::error::{AppError, Result};
use crate::experiment::{community_data, evaluate, grid_pool_size, prepare_dispatch, run_dispatch, run_grid};
use crate::world::{derive_seed, load_data, DataBundle};
use crate::{io, output};

#[derive(Debug, Parser)]
#[command(name = "ecload", version, about = "Day-ahead load forecasting and community battery dispatch")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON experiment config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

/// Selects one community and split.
#[derive(Debug, Clone, Args)]
pub struct CellArgs {
    #[arg(long)]
    pub community_size: Option<usize>,
    #[arg(long)]
    pub train_months: Option<u32>,
    #[arg(long)]
    pub quarter: Option<String>,
    #[arg(long)]
    pub test_year: Option<i32>,
    /// Which of the sampled communities of this size to use.
    #[arg(long, default_value_t = 0)]
    pub repetition: usize,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate smart-meter, weather, holiday and price files and write normalized copies.
    Ingest {
        #[arg(long)]
        loads: PathBuf,
        /// Source resolution in minutes (30 or 60).
        #[arg(long, default_value_t = 60)]
        resolution: u32,
        #[arg(long)]
        weather: Option<PathBuf>,
        #[arg(long)]
        holidays: Option<PathBuf>,
        #[arg(long)]
        prices: Option<PathBuf>,
        #[arg(long, default_value = "")]
        region: String,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic household pool, weather, holidays and spot prices, and
    /// optionally a standard load profile.
    Synth {
        #[arg(long)]
        households: Option<usize>,
        /// Also write a standard profile with this annual energy (kWh).
        #[arg(long)]
        annual_energy: Option<f64>,
        #[arg(long, default_value = "household")]
        profile: String,
        #[command(flatten)]
        common: Common,
    },
    /// Train one deep model and write a checkpoint.
    Train {
        #[arg(long)]
        family: String,
        #[arg(long, default_value = "5k")]
        size: String,
        /// Pretrain on a standard profile before fine-tuning.
        #[arg(long)]
        tl: bool,
        #[command(flatten)]
        cell: CellArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Write day-ahead forecasts for the test quarter.
    Forecast {
        /// Deep model checkpoint from `train`.
        #[arg(long, conflicts_with = "family")]
        checkpoint: Option<PathBuf>,
        /// Baseline family fitted on the fly (persistence or knn).
        #[arg(long)]
        family: Option<String>,
        #[command(flatten)]
        cell: CellArgs,
        #[command(flatten)]
        common: Common,
    },
    /// nMAE of a forecast file, or of one file's values against another's.
    Evaluate {
        #[arg(long)]
        forecast: PathBuf,
        #[arg(long)]
        actual: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the sensitivity grid.
    Grid {
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the day-by-day battery dispatch case study.
    Dispatch {
        /// Battery capacity in kWh; repeat for a sweep.
        #[arg(long = "capacity")]
        capacities: Vec<f64>,
        /// Size the battery at 12 kWh per household.
        #[arg(long, conflicts_with = "capacities")]
        per_household: bool,
        #[arg(long)]
        community_size: Option<usize>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        test_start: Option<String>,
        /// Comma-separated forecasters (perfect, persistence, knn, lstm, transformer, xlstm).
        #[arg(long, value_delimiter = ',')]
        forecasters: Option<Vec<String>>,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Aggregate a results directory into summary tables.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Synth { .. } => "synth",
            Command::Train { .. } => "train",
            Command::Forecast { .. } => "forecast",
            Command::Evaluate { .. } => "evaluate",
            Command::Grid { .. } => "grid",
            Command::Dispatch { .. } => "dispatch",
            Command::Report { .. } => "report",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Ingest { common, .. }
            | Command::Synth { common, .. }
            | Command::Train { common, .. }
            | Command::Forecast { common, .. }
            | Command::Evaluate { common, .. }
            | Command::Grid { common, .. }
            | Command::Dispatch { common, .. }
            | Command::Report { common, .. } => common,
        }
    }
}

struct Context {
    cfg: ExperimentConfig,
    out: PathBuf,
}

impl Context {
    fn new(common: &Common) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = common.seed {
            cfg.seed = s;
        }
        if let Some(t) = common.threads {
            cfg.threads = Some(t);
        }
        if let Some(o) = &common.out {
            cfg.output_dir = Some(o.clone());
        }
        let out = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
        Ok(Context { cfg, out })
    }

    fn pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.cfg.threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map(|p| p.install(f))
                .map_err(|e| AppError::Usage(format!("cannot start {n} worker threads: {e}"))),
            None => Ok(f()),
        }
    }

    /// Resolved config plus the outputs, enough to rerun the command.
    fn write_manifest(&self, command: &str, args: &[String], outputs: &[String]) -> Result<()> {
        let manifest = json!({
            "tool": "ecload",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "args": args,
            "seed": self.cfg.seed,
            "config": self.cfg,
            "outputs": outputs,
        });
        io::write_json(&self.out.join("manifest.json"), &manifest)
    }
}

/// Parses arguments and runs the command; returns the process exit code.
pub fn main_with_args(args: Vec<OsString>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => {
                    eprintln!("{}", AppError::Usage(e.kind().to_string()).to_json());
                    1
                }
            };
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli.command, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

pub fn run(command: Command, argv: &[String]) -> Result<()> {
    let mut ctx = Context::new(command.common())?;
    ctx.cfg.validate()?;
    let name = command.name();
    let outputs = match command {
        Command::Ingest {
            loads,
            resolution,
            weather,
            holidays,
            prices,
            region,
            ..
        } => ingest(&ctx, &loads, resolution, weather, holidays, prices, &region)?,
        Command::Synth {
            households,
            annual_energy,
            profile,
            ..
        } => synth(&ctx, households, annual_energy, &profile)?,
        Command::Train { family, size, tl, cell, .. } => train(&ctx, &family, &size, tl, &cell)?,
        Command::Forecast {
            checkpoint, family, cell, ..
        } => forecast(&ctx, checkpoint.as_deref(), family.as_deref(), &cell)?,
        Command::Evaluate { forecast, actual, common } => {
            evaluate_files(&ctx, &forecast, actual.as_deref(), common.out.is_some())?
        }
        Command::Grid {
            repetitions, epochs, ..
        } => {
            if let Some(r) = repetitions {
                ctx.cfg.grid.repetitions = r;
            }
            if let Some(e) = epochs {
                ctx.cfg.training.epochs = e;
            }
            ctx.cfg.validate()?;
            return grid(&ctx, argv);
        }
        Command::Dispatch {
            capacities,
            per_household,
            community_size,
            days,
            test_start,
            forecasters,
            epochs,
            ..
        } => {
            let d = &mut ctx.cfg.dispatch;
            if let Some(h) = community_size {
                d.community_size = h;
            }
            if !capacities.is_empty() {
                d.capacities_kwh = capacities;
            }
            if per_household {
                d.capacities_kwh.clear();
            }
            if let Some(n) = days {
                d.days = n;
            }
            if let Some(s) = test_start {
                d.test_start = io::parse_date(&s).ok_or_else(|| AppError::Usage(format!("invalid --test-start '{s}'")))?;
            }
            if let Some(f) = forecasters {
                d.forecasters = f;
            }
            if let Some(e) = epochs {
                ctx.cfg.training.epochs = e;
            }
            ctx.cfg.validate()?;
            dispatch(&ctx)?
        }
        Command::Report { input, .. } => report(&ctx, &input)?,
    };
    if !outputs.is_empty() {
        ctx.write_manifest(name, argv, &outputs)?;
    }
    Ok(())
}

fn ingest(
    ctx: &Context,
    loads: &Path,
    resolution: u32,
    weather: Option<PathBuf>,
    holidays: Option<PathBuf>,
    prices: Option<PathBuf>,
    region: &str,
) -> Result<Vec<String>> {
    let res = SourceResolution::from_minutes(resolution)
        .ok_or_else(|| AppError::Usage(format!("--resolution must be 30 or 60, got {resolution}")))?;
    let outcome = load_smart_meter(io::read_meter_readings(loads)?, res)?;
    let mut outputs = vec!["loads.csv".to_string(), "rejections.csv".to_string()];
    io::write_loads(&ctx.out.join("loads.csv"), &outcome.series)?;
    io::write_csv(
        &ctx.out.join("rejections.csv"),
        &["household_id", "gap_start", "gap_hours"],
        outcome
            .rejected
            .iter()
            .map(|r| [r.household.clone(), io::format_timestamp(r.gap_start), r.gap_hours.to_string()]),
    )?;
    for r in &outcome.rejected {
        eprintln!(
            "warning: household {} rejected: {} h gap from {}",
            r.household, r.gap_hours, r.gap_start
        );
    }
    if let Some(p) = weather {
        io::write_weather(&ctx.out.join("weather.csv"), &io::read_weather(&p)?)?;
        outputs.push("weather.csv".into());
    }
    if let Some(p) = holidays {
        io::write_holidays(&ctx.out.join("holidays.csv"), &io::read_holidays(&p, region)?)?;
        outputs.push("holidays.csv".into());
    }
    if let Some(p) = prices {
        io::write_prices(&ctx.out.join("prices.csv"), &io::read_prices(&p)?)?;
        outputs.push("prices.csv".into());
    }
    println!(
        "ingested {} households, {} rejected",
        outcome.series.len(),
        outcome.rejected.len()
    );
    Ok(outputs)
}

fn synth(ctx: &Context, households: Option<usize>, annual_energy: Option<f64>, profile: &str) -> Result<Vec<String>> {
    let mut cfg = ctx.cfg.clone();
    cfg.data.source = DataSource::Synthetic;
    if households.is_some() {
        cfg.data.synthetic.households = households;
    }
    let n = cfg.data.synthetic.households.unwrap_or(grid_pool_size(&cfg)?);
    cfg.data.synthetic.households = Some(n);
    let bundle = load_data(&cfg, n)?;
    io::write_loads(&ctx.out.join("loads.csv"), &bundle.pool)?;
    io::write_weather(&ctx.out.join("weather.csv"), &bundle.weather)?;
    io::write_holidays(&ctx.out.join("holidays.csv"), &bundle.calendar)?;
    io::write_prices(&ctx.out.join("prices.csv"), &bundle.spot)?;
    let mut outputs: Vec<String> = ["loads.csv", "weather.csv", "holidays.csv", "prices.csv"].map(String::from).to_vec();
    if let Some(energy) = annual_energy {
        let kind = ProfileKind::parse(profile).ok_or_else(|| AppError::Usage(format!("unknown profile '{profile}'")))?;
        let (first, end) = bundle.day_span();
        let spec = SyntheticSpec {
            id: format!("standard-{profile}"),
            profile: kind,
            first_day: first,
            end_day: end,
            annual_energy: energy,
            calendar: bundle.calendar.clone(),
        };
        io::write_loads(&ctx.out.join("standard_profile.csv"), &[generate_profile(&spec, &bundle.tables)?])?;
        outputs.push("standard_profile.csv".into());
    }
    println!("wrote {} synthetic households to {}", bundle.pool.len(), ctx.out.display());
    Ok(outputs)
}

struct CellChoice {
    community_size: usize,
    train_months: u32,
    quarter: Quarter,
    test_year: i32,
    repetition: usize,
}

fn cell_choice(ctx: &Context, cell: &CellArgs) -> Result<CellChoice> {
    let b = ctx.cfg.grid.baseline.settings()?;
    let quarter = match &cell.quarter {
        Some(q) => Quarter::parse(q).ok_or_else(|| AppError::Usage(format!("unknown quarter '{q}'")))?,
        None => b.test_quarter,
    };
    Ok(CellChoice {
        community_size: cell.community_size.unwrap_or(b.community_size),
        train_months: cell.train_months.unwrap_or(b.train_months),
        quarter,
        test_year: cell.test_year.unwrap_or(ctx.cfg.grid.test_year),
        repetition: cell.repetition,
    })
}

/// The community the grid uses for this size and repetition.
fn select_data(ctx: &Context, c: &CellChoice) -> Result<(DataBundle, crate::experiment::CommunityData)> {
    let bundle = load_data(&ctx.cfg, c.community_size * (c.repetition + 1))?;
    let seed = derive_seed(ctx.cfg.seed, "community", &[c.community_size as u64]);
    let mut communities = sample_communities(&bundle.pool, c.community_size, c.repetition + 1, seed)?;
    let community = communities.swap_remove(c.repetition);
    let data = community_data(&bundle, &community, c.train_months, c.quarter, c.test_year)?;
    Ok((bundle, data))
}

fn train(ctx: &Context, family: &str, size: &str, tl: bool, cell: &CellArgs) -> Result<Vec<String>> {
    let family = Family::parse(family)?;
    if !family.is_deep() {
        return Err(AppError::Usage(format!(
            "{} has no trainable weights; use `forecast --family {}`",
            family.name(),
            family.name()
        )));
    }
    let preset = ModelPreset::table(family, SizeClass::parse(size)?)?;
    let mut cfg = ctx.cfg.clone();
    if let Some(e) = cell.epochs {
        cfg.training.epochs = e;
    }
    let choice = cell_choice(ctx, cell)?;
    let (bundle, data) = select_data(ctx, &choice)?;
    let tc = cfg.training.with_seed(derive_seed(cfg.seed, "train", &[choice.repetition as u64, 2]));
    let (model, curves) = if tl {
        let (first, end) = bundle.day_span();
        let synth = pretraining_dataset(&bundle.tables, &bundle.weather, &bundle.calendar, first, end, data.train.target_mean())?;
        let (m, pre, fine) = pretrain_finetune(preset, &synth, &data.train, &tc)?;
        (m, vec![("pretrain", pre), ("finetune", fine)])
    } else {
        let mut m = DeepModel::new(preset, tc.seed)?;
        let curve = ecload_core::models::train(&mut m, &data.train, &tc)?;
        (m, vec![("train", curve)])
    };
    io::write_text(&ctx.out.join("model.ckpt"), &model.to_checkpoint())?;
    let rows = curves
        .iter()
        .flat_map(|(phase, c)| c.iter().enumerate().map(move |(i, l)| [phase.to_string(), (i + 1).to_string(), l.to_string()]));
    io::write_csv(&ctx.out.join("loss.csv"), &["phase", "epoch", "mae"], rows)?;
    let (overall, _) = evaluate(&Forecaster::Deep(model.clone()), &data.test)?;
    println!(
        "trained {} ({} parameters); test nMAE {:.2}%",
        model.preset.label(),
        model.param_count(),
        overall
    );
    Ok(vec!["model.ckpt".into(), "loss.csv".into()])
}

fn forecast(ctx: &Context, checkpoint: Option<&Path>, family: Option<&str>, cell: &CellArgs) -> Result<Vec<String>> {
    let choice = cell_choice(ctx, cell)?;
    let (_, data) = select_data(ctx, &choice)?;
    let model = match (checkpoint, family) {
        (Some(p), _) => Forecaster::Deep(DeepModel::from_checkpoint(&io::read_text(p)?)?),
        (None, Some(f)) => {
            let family = Family::parse(f)?;
            if family.is_deep() {
                return Err(AppError::Usage(format!(
                    "deep families need --checkpoint (train one with `train --family {}`)",
                    family.name()
                )));
            }
            Forecaster::fit(family, None, &data.train, &ctx.cfg.training.with_seed(ctx.cfg.seed))?.0
        }
        (None, None) => return Err(AppError::Usage("forecast needs --checkpoint or --family".into())),
    };
    let pred = model.predict_dataset(&data.test)?;
    let days: Vec<_> = data.test.windows.iter().zip(&pred).map(|(w, f)| (w.day, *f, w.y)).collect();
    io::write_forecasts(&ctx.out.join("forecast.csv"), &days)?;
    let (overall, _) = evaluate(&model, &data.test)?;
    println!("{} forecast for {} days; nMAE {:.2}%", model.family().name(), days.len(), overall);
    Ok(vec!["forecast.csv".into()])
}

fn evaluate_files(ctx: &Context, forecast: &Path, actual: Option<&Path>, write: bool) -> Result<Vec<String>> {
    let pairs: Vec<(chrono::NaiveDate, u32, f64, f64)> = match actual {
        None => io::read_forecast_pairs(forecast)?,
        Some(a) => {
            let f = io::read_day_hour_values(forecast)?;
            let a = io::read_day_hour_values(a)?;
            let index: std::collections::BTreeMap<_, _> = a.iter().map(|(d, h, v)| ((*d, *h), *v)).collect();
            if index.len() != a.len() || f.len() != a.len() {
                return Err(AppError::format(forecast, "forecast and actual files cover different (day, hour) keys"));
            }
            f.iter()
                .map(|(d, h, v)| {
                    index
                        .get(&(*d, *h))
                        .map(|x| (*d, *h, *v, *x))
                        .ok_or_else(|| AppError::format(forecast, format!("no actual value for {d} hour {h}")))
                })
                .collect::<Result<_>>()?
        }
    };
    let f: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let a: Vec<f64> = pairs.iter().map(|p| p.3).collect();
    let value = nmae(&f, &a)?;
    println!("nMAE {value:.2}%");
    if write {
        io::write_json(&ctx.out.join("evaluation.json"), &json!({ "nmae": value, "hours": pairs.len() }))?;
        return Ok(vec!["evaluation.json".into()]);
    }
    Ok(Vec::new())
}

fn quarter_start(year: i32) -> impl Fn(&ecload_core::harness::GridCell) -> chrono::NaiveDate {
    move |c| c.settings.test_quarter.start(year)
}

fn grid(ctx: &Context, argv: &[String]) -> Result<()> {
    let cfg = &ctx.cfg;
    let year = cfg.grid.test_year;
    let outputs: Vec<String> = [
        "results.csv",
        "per_day.csv",
        "timings.csv",
        "summary.csv",
        "summary.json",
    ]
    .map(String::from)
    .to_vec();
    ctx.write_manifest("grid", argv, &outputs)?;
    let bundle = load_data(cfg, grid_pool_size(cfg)?)?;
    // Completed tasks are appended here as they finish, so an interrupted run
    // keeps its partial results.
    let partial_path = ctx.out.join("results.partial.csv");
    let mut w = csv::Writer::from_path(&partial_path).map_err(|e| AppError::format(&partial_path, e))?;
    w.write_record(output::RESULTS_HEADER)
        .and_then(|_| w.flush().map_err(csv::Error::from))
        .map_err(|e| AppError::format(&partial_path, e))?;
    let partial = Mutex::new(w);
    let on_done = |records: &[ResultRecord]| {
        let mut w = partial.lock().unwrap();
        for r in records {
            let _ = w.write_record(output::result_row(r, year));
        }
        let _ = w.flush();
    };
    let records = ctx.pool(|| run_grid(cfg, &bundle, &on_done))??;
    drop(partial);
    output::write_results(&ctx.out.join("results.csv"), &records, year)?;
    output::write_per_day(&ctx.out.join("per_day.csv"), &records, quarter_start(year))?;
    output::write_timings(&ctx.out.join("timings.csv"), &records)?;
    output::write_summaries(&ctx.out, &records, false)?;
    std::fs::remove_file(&partial_path).map_err(|e| AppError::io(&partial_path, e))?;
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    println!(
        "grid: {} records ({} failed) in {}",
        records.len(),
        failed,
        ctx.out.display()
    );
    Ok(())
}

fn dispatch(ctx: &Context) -> Result<Vec<String>> {
    let cfg = &ctx.cfg;
    let bundle = load_data(cfg, cfg.dispatch.community_size)?;
    let runs = ctx.pool(|| {
        let setup = prepare_dispatch(cfg, &bundle)?;
        run_dispatch(cfg, &bundle, &setup)
    })??;
    let mut outputs = vec!["savings.csv".to_string(), "report.json".to_string()];
    io::write_csv(
        &ctx.out.join("savings.csv"),
        &output::SAVINGS_HEADER,
        runs.iter().map(output::savings_row),
    )?;
    io::write_json(&ctx.out.join("report.json"), &output::report_json(&runs))?;
    for run in &runs {
        let name = output::schedule_file_name(run);
        output::write_schedule(&ctx.out.join(&name), run)?;
        outputs.push(name);
        let scheme = match run.scheme {
            BatteryScheme::PerHousehold(h) => format!("{h} households"),
            BatteryScheme::Capacity(_) => "fixed".into(),
        };
        println!(
            "{:<12} {:>8} kWh ({scheme}): savings {:.2}%",
            run.forecaster.name(),
            run.capacity_kwh,
            run.report.savings_pct
        );
    }
    Ok(outputs)
}

fn report(ctx: &Context, input: &Path) -> Result<Vec<String>> {
    let mut outputs = Vec::new();
    let results = input.join("results.csv");
    if results.exists() {
        let timings = input.join("timings.csv");
        let (records, _) = output::read_results(&results, timings.exists().then_some(timings.as_path()))?;
        if records.is_empty() {
            return Err(AppError::format(&results, "no records"));
        }
        let rows = output::write_summaries(&ctx.out, &records, timings.exists())?;
        println!("summarized {} records into {} rows", records.len(), rows.len());
        outputs.extend(["summary.csv", "summary.json"].map(String::from));
    }
    let savings = input.join("savings.csv");
    if savings.exists() {
        let mut rdr = csv::Reader::from_path(&savings).map_err(|e| AppError::format(&savings, e))?;
        let mut caps: Vec<String> = Vec::new();
        let mut names: Vec<String> = Vec::new();
        let mut cells = std::collections::BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| AppError::format(&savings, e))?;
            if !names.contains(&rec[0].to_string()) {
                names.push(rec[0].to_string());
            }
            if !caps.contains(&rec[1].to_string()) {
                caps.push(rec[1].to_string());
            }
            cells.insert((rec[1].to_string(), rec[0].to_string()), rec[5].to_string());
        }
        if cells.is_empty() {
            return Err(AppError::format(&savings, "no rows"));
        }
        let mut header = vec!["capacity_kwh".to_string()];
        header.extend(names.iter().cloned());
        let rows = caps.iter().map(|c| {
            let mut row = vec![c.clone()];
            row.extend(names.iter().map(|n| cells.get(&(c.clone(), n.clone())).cloned().unwrap_or_default()));
            row
        });
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        io::write_csv(&ctx.out.join("table_savings.csv"), &header_refs, rows)?;
        outputs.push("table_savings.csv".into());
    }
    if outputs.is_empty() {
        return Err(AppError::Usage(format!(
            "{} holds neither results.csv nor savings.csv",
            input.display()
        )));
    }
    Ok(outputs)
}
