//! Result tables, summaries, dispatch reports and run manifests.

use std::collections::BTreeMap;
use std::path::Path;

use ecload_core::harness::{summarize, Axis, CellSettings, GridCell, ResultRecord, SummaryRow};
use ecload_core::models::{Family, SizeClass};
use ecload_core::time::Quarter;
use serde_json::{json, Value};

use crate::error::{AppError, Result};
use crate::experiment::DispatchRun;
use crate::io::write_csv;

pub const RESULTS_HEADER: [&str; 14] = [
    "axis",
    "axis_value",
    "community_size",
    "train_months",
    "size_class",
    "transfer_learning",
    "test_quarter",
    "test_year",
    "repetition",
    "seed",
    "family",
    "param_count",
    "nmae",
    "error",
];

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

fn key_fields(cell: &GridCell) -> Vec<String> {
    let s = cell.settings;
    vec![
        cell.axis.name().to_string(),
        cell.axis_value(),
        s.community_size.to_string(),
        s.train_months.to_string(),
        s.size_class.label().to_string(),
        s.transfer_learning.to_string(),
        s.test_quarter.name().to_string(),
    ]
}

pub fn result_row(r: &ResultRecord, test_year: i32) -> Vec<String> {
    let mut row = key_fields(&r.cell);
    row.extend([
        test_year.to_string(),
        r.repetition.to_string(),
        r.seed.to_string(),
        r.family.name().to_string(),
        r.param_count.map(|c| c.to_string()).unwrap_or_default(),
        r.nmae.map(num).unwrap_or_default(),
        r.error.clone().unwrap_or_default(),
    ]);
    row
}

/// Long-format results: one row per (cell, repetition, family). Wall-clock
/// times go to a separate file so this one is reproducible.
pub fn write_results(path: &Path, records: &[ResultRecord], test_year: i32) -> Result<()> {
    write_csv(path, &RESULTS_HEADER, records.iter().map(|r| result_row(r, test_year)))
}

pub fn write_per_day(path: &Path, records: &[ResultRecord], test_quarter_start: impl Fn(&GridCell) -> chrono::NaiveDate) -> Result<()> {
    let mut header: Vec<&str> = RESULTS_HEADER[..7].to_vec();
    header.extend(["repetition", "family", "day", "nmae"]);
    let rows = records.iter().flat_map(|r| {
        let first = test_quarter_start(&r.cell);
        r.per_day_nmae.iter().enumerate().map(move |(i, v)| {
            let mut row = key_fields(&r.cell);
            row.extend([
                r.repetition.to_string(),
                r.family.name().to_string(),
                (first + chrono::Days::new(i as u64)).to_string(),
                num(*v),
            ]);
            row
        })
    });
    write_csv(path, &header, rows)
}

pub fn write_timings(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let mut header: Vec<&str> = RESULTS_HEADER[..7].to_vec();
    header.extend(["repetition", "family", "train_seconds"]);
    let rows = records.iter().map(|r| {
        let mut row = key_fields(&r.cell);
        row.extend([r.repetition.to_string(), r.family.name().to_string(), format!("{:.3}", r.train_seconds)]);
        row
    });
    write_csv(path, &header, rows)
}

fn parse_axis(s: &str) -> Option<Axis> {
    [
        Axis::Baseline,
        Axis::Community,
        Axis::TrainMonths,
        Axis::Size,
        Axis::TransferLearning,
        Axis::Quarter,
    ]
    .into_iter()
    .find(|a| a.name() == s)
}

/// Reads a results file written by [`write_results`]; wall-clock seconds are
/// taken from a timings file when given.
pub fn read_results(path: &Path, timings: Option<&Path>) -> Result<(Vec<ResultRecord>, i32)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| AppError::format(path, e))?;
    let header = rdr.headers().map_err(|e| AppError::format(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != RESULTS_HEADER {
        return Err(AppError::format(path, "not a results file (unexpected header)"));
    }
    let mut records = Vec::new();
    let mut year = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| AppError::format(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| {
            AppError::from(ecload_core::Error::Parse {
                line: line as usize,
                message: format!("invalid {what}"),
            })
        };
        let settings = CellSettings {
            community_size: rec[2].parse().map_err(|_| bad("community_size"))?,
            train_months: rec[3].parse().map_err(|_| bad("train_months"))?,
            size_class: SizeClass::parse(&rec[4]).map_err(|_| bad("size_class"))?,
            transfer_learning: rec[5].parse().map_err(|_| bad("transfer_learning"))?,
            test_quarter: Quarter::parse(&rec[6]).ok_or_else(|| bad("test_quarter"))?,
        };
        year = rec[7].parse().map_err(|_| bad("test_year"))?;
        records.push(ResultRecord {
            cell: GridCell {
                axis: parse_axis(&rec[0]).ok_or_else(|| bad("axis"))?,
                settings,
            },
            repetition: rec[8].parse().map_err(|_| bad("repetition"))?,
            seed: rec[9].parse().map_err(|_| bad("seed"))?,
            family: Family::parse(&rec[10]).map_err(|_| bad("family"))?,
            param_count: if rec[11].is_empty() { None } else { Some(rec[11].parse().map_err(|_| bad("param_count"))?) },
            nmae: if rec[12].is_empty() { None } else { Some(rec[12].parse().map_err(|_| bad("nmae"))?) },
            per_day_nmae: Vec::new(),
            train_seconds: 0.0,
            error: (!rec[13].is_empty()).then(|| rec[13].to_string()),
        });
    }
    if let Some(tp) = timings {
        let mut rdr = csv::Reader::from_path(tp).map_err(|e| AppError::format(tp, e))?;
        let mut secs: BTreeMap<(Vec<String>, String, String), f64> = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| AppError::format(tp, e))?;
            let key: Vec<String> = rec.iter().take(7).map(String::from).collect();
            let v: f64 = rec[9].parse().map_err(|_| AppError::format(tp, "invalid train_seconds"))?;
            secs.insert((key, rec[7].to_string(), rec[8].to_string()), v);
        }
        for r in &mut records {
            let k = (key_fields(&r.cell), r.repetition.to_string(), r.family.name().to_string());
            if let Some(v) = secs.get(&k) {
                r.train_seconds = *v;
            }
        }
    }
    Ok((records, year))
}

pub const SUMMARY_HEADER: [&str; 13] = [
    "axis",
    "axis_value",
    "community_size",
    "train_months",
    "size_class",
    "transfer_learning",
    "test_quarter",
    "family",
    "runs",
    "failures",
    "mean_nmae",
    "sd_nmae",
    "mean_train_seconds",
];

fn fixed(v: f64, digits: usize) -> String {
    if v.is_finite() {
        format!("{v:.digits$}")
    } else {
        String::new()
    }
}

/// Summary table (mean and sample sd per cell and family), one JSON summary,
/// and one pivot table per axis with "mean (sd)" cells.
pub fn write_summaries(dir: &Path, records: &[ResultRecord], with_timings: bool) -> Result<Vec<SummaryRow>> {
    let rows = summarize(records);
    let mut header = SUMMARY_HEADER.to_vec();
    if !with_timings {
        header.pop();
    }
    let csv_rows = rows.iter().map(|r| {
        let mut row = key_fields(&r.cell);
        row.extend([
            r.family.name().to_string(),
            r.runs.to_string(),
            r.failures.to_string(),
            fixed(r.mean_nmae, 2),
            fixed(r.sd_nmae, 2),
        ]);
        if with_timings {
            row.push(fixed(r.mean_train_seconds, 3));
        }
        row
    });
    write_csv(&dir.join("summary.csv"), &header, csv_rows)?;

    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "axis": r.cell.axis.name(),
                "axis_value": r.cell.axis_value(),
                "family": r.family.name(),
                "runs": r.runs,
                "failures": r.failures,
                "mean_nmae": r.mean_nmae.is_finite().then_some(r.mean_nmae),
                "sd_nmae": r.sd_nmae.is_finite().then_some(r.sd_nmae),
            })
        })
        .collect();
    crate::io::write_json(&dir.join("summary.json"), &json!({ "rows": json_rows }))?;

    // Pivot per axis; the baseline row is repeated in every table.
    let families: Vec<Family> = {
        let mut f: Vec<Family> = rows.iter().map(|r| r.family).collect();
        f.sort();
        f.dedup();
        f
    };
    let mut axes: Vec<Axis> = rows.iter().map(|r| r.cell.axis).filter(|a| *a != Axis::Baseline).collect();
    axes.sort();
    axes.dedup();
    for axis in axes {
        let mut values: Vec<GridCell> = Vec::new();
        for r in &rows {
            if (r.cell.axis == axis || r.cell.axis == Axis::Baseline) && !values.contains(&r.cell) {
                values.push(r.cell);
            }
        }
        let mut header = vec![axis.name().to_string()];
        header.extend(families.iter().map(|f| f.name().to_string()));
        let table_rows = values.iter().map(|cell| {
            let label = match cell.axis {
                Axis::Baseline => {
                    let mut c = *cell;
                    c.axis = axis;
                    c.axis_value()
                }
                _ => cell.axis_value(),
            };
            let mut row = vec![label];
            for f in &families {
                row.push(
                    rows.iter()
                        .find(|r| r.cell == *cell && r.family == *f)
                        .map(|r| format!("{} ({})", fixed(r.mean_nmae, 2), fixed(r.sd_nmae, 2)))
                        .unwrap_or_default(),
                );
            }
            row
        });
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(&dir.join(format!("table_{}.csv", axis.name())), &header_refs, table_rows)?;
    }
    Ok(rows)
}

pub const SAVINGS_HEADER: [&str; 7] = [
    "forecaster",
    "capacity_kwh",
    "unoptimized_eur",
    "optimized_eur",
    "savings_eur",
    "savings_pct",
    "mean_nmae",
];

pub fn savings_row(run: &DispatchRun) -> Vec<String> {
    let r = &run.report;
    vec![
        run.forecaster.name().to_string(),
        num(run.capacity_kwh),
        num(r.unoptimized),
        num(r.optimized),
        num(r.savings),
        format!("{:.2}", r.savings_pct),
        r.mean_nmae().map(num).unwrap_or_default(),
    ]
}

pub const SCHEDULE_HEADER: [&str; 9] = ["date", "hour", "P_ch", "P_dis", "P_grid", "E", "price", "forecast", "actual"];

pub fn schedule_file_name(run: &DispatchRun) -> String {
    format!("schedule_{}_{}kWh.csv", run.forecaster.name(), run.capacity_kwh)
}

/// Hourly schedule; `E` is the stored energy at the end of the hour.
pub fn write_schedule(path: &Path, run: &DispatchRun) -> Result<()> {
    let rows = run.report.days.iter().flat_map(|d| {
        (0..24).map(move |h| {
            let s = &d.schedule;
            vec![
                d.date.to_string(),
                h.to_string(),
                num(s.p_ch[h]),
                num(s.p_dis[h]),
                num(s.p_grid[h]),
                num(s.energy[h + 1]),
                num(d.prices[h]),
                num(d.forecast[h]),
                num(d.actual[h]),
            ]
        })
    });
    write_csv(path, &SCHEDULE_HEADER, rows)
}

pub fn report_json(runs: &[DispatchRun]) -> Value {
    let items: Vec<Value> = runs
        .iter()
        .map(|run| {
            let r = &run.report;
            let days: Vec<Value> = r
                .days
                .iter()
                .map(|d| {
                    json!({
                        "date": d.date.to_string(),
                        "unoptimized_eur": d.unoptimized,
                        "optimized_eur": d.optimized,
                        "nmae": d.nmae,
                    })
                })
                .collect();
            json!({
                "forecaster": run.forecaster.name(),
                "capacity_kwh": run.capacity_kwh,
                "unoptimized_eur": r.unoptimized,
                "optimized_eur": r.optimized,
                "savings_eur": r.savings,
                "savings_pct": r.savings_pct,
                "mean_nmae": r.mean_nmae(),
                "days": days,
            })
        })
        .collect();
    json!({ "reports": items })
}
