//! CSV readers and writers for every file the tool consumes or produces.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use ecload_core::data::{HolidayCalendar, LoadSeries, MeterReading, PriceSeries, WeatherSeries, WEATHER_COLUMNS};
use ecload_core::time::{from_hour_index, hour_index};

use crate::error::{AppError, Result};

const TIMESTAMP_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M:%S").to_string()
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

fn parse_error(line: u64, message: String) -> AppError {
    ecload_core::Error::Parse {
        line: line as usize,
        message,
    }
    .into()
}

/// Data rows with their 1-based line numbers, after checking the header.
fn read_rows(path: &Path, expected: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| AppError::format(path, e))?;
    let header = rdr.headers().map_err(|e| AppError::format(path, e))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names != expected {
        return Err(parse_error(1, format!("expected header {}, found {}", expected.join(","), names.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| AppError::format(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != expected.len() {
            return Err(parse_error(line, format!("expected {} fields, found {}", expected.len(), rec.len())));
        }
        rows.push((line, rec));
    }
    Ok(rows)
}

fn field_f64(rec: &csv::StringRecord, i: usize, line: u64, name: &str) -> Result<f64> {
    rec[i]
        .parse::<f64>()
        .map_err(|_| parse_error(line, format!("{name} '{}' is not a number", &rec[i])))
}

fn field_ts(rec: &csv::StringRecord, i: usize, line: u64) -> Result<NaiveDateTime> {
    parse_timestamp(&rec[i]).ok_or_else(|| parse_error(line, format!("invalid timestamp '{}'", &rec[i])))
}

pub const LOAD_HEADER: [&str; 3] = ["household_id", "timestamp", "energy_kWh"];

pub fn read_meter_readings(path: &Path) -> Result<Vec<MeterReading>> {
    read_rows(path, &LOAD_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(MeterReading {
                household: rec[0].to_string(),
                timestamp: field_ts(&rec, 1, line)?,
                energy_kwh: field_f64(&rec, 2, line, "energy_kWh")?,
                line: line as usize,
            })
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| AppError::io(path, e))
}

/// Writes a CSV file from a header and pre-formatted rows.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(create(path)?);
    let fail = |e: csv::Error| AppError::format(path, e);
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| AppError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

/// Hourly series in the loads format (one hour of energy equals mean kW).
pub fn write_loads(path: &Path, series: &[LoadSeries]) -> Result<()> {
    let rows = series.iter().flat_map(|s| {
        s.timestamps()
            .zip(s.values())
            .map(|(t, v)| vec![s.id.clone(), format_timestamp(t), v.to_string()])
    });
    write_csv(path, &LOAD_HEADER, rows)
}

/// Checks that timestamps advance by exactly one hour; returns the first hour index.
fn hourly_grid(path: &Path, stamps: &[(u64, NaiveDateTime)]) -> Result<i64> {
    let Some(&(_, first)) = stamps.first() else {
        return Err(AppError::format(path, "no data rows"));
    };
    let start = hour_index(first);
    for (i, &(line, t)) in stamps.iter().enumerate() {
        if hour_index(t) != start + i as i64 || t != from_hour_index(start + i as i64) {
            return Err(parse_error(
                line,
                format!("timestamp {t} breaks the hourly grid (expected {})", from_hour_index(start + i as i64)),
            ));
        }
    }
    Ok(start)
}

pub fn weather_header() -> Vec<&'static str> {
    std::iter::once("timestamp").chain(WEATHER_COLUMNS).collect()
}

pub fn read_weather(path: &Path) -> Result<WeatherSeries> {
    let rows = read_rows(path, &weather_header())?;
    let mut stamps = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        stamps.push((*line, field_ts(rec, 0, *line)?));
        let mut v = [0.0; 6];
        for (j, name) in WEATHER_COLUMNS.iter().enumerate() {
            v[j] = field_f64(rec, j + 1, *line, name)?;
        }
        values.push(v);
    }
    let start = hourly_grid(path, &stamps)?;
    Ok(WeatherSeries::new(start, values)?)
}

pub fn write_weather(path: &Path, w: &WeatherSeries) -> Result<()> {
    let rows = w.rows().iter().enumerate().map(|(i, r)| {
        let mut row = vec![format_timestamp(from_hour_index(w.start() + i as i64))];
        row.extend(r.iter().map(|v| v.to_string()));
        row
    });
    write_csv(path, &weather_header(), rows)
}

/// One date per line; an optional `date` header line is skipped.
pub fn read_holidays(path: &Path, region: &str) -> Result<HolidayCalendar> {
    let text = read_text(path)?;
    let mut cal = HolidayCalendar::new(region, []);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.eq_ignore_ascii_case("date")) {
            continue;
        }
        let d = parse_date(line).ok_or_else(|| parse_error(i as u64 + 1, format!("invalid date '{line}'")))?;
        if !cal.insert(d) {
            return Err(parse_error(i as u64 + 1, format!("duplicate holiday {d}")));
        }
    }
    Ok(cal)
}

pub fn write_holidays(path: &Path, cal: &HolidayCalendar) -> Result<()> {
    let mut text = String::from("date\n");
    for d in cal.dates() {
        text.push_str(&d.to_string());
        text.push('\n');
    }
    write_text(path, &text)
}

pub const PRICE_HEADER: [&str; 2] = ["timestamp", "price_eur_per_kwh"];

pub fn read_prices(path: &Path) -> Result<PriceSeries> {
    let rows = read_rows(path, &PRICE_HEADER)?;
    let mut stamps = Vec::with_capacity(rows.len());
    let mut prices = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        stamps.push((*line, field_ts(rec, 0, *line)?));
        prices.push(field_f64(rec, 1, *line, "price")?);
    }
    let start = hourly_grid(path, &stamps)?;
    Ok(PriceSeries::new(start, prices)?)
}

pub fn write_prices(path: &Path, p: &PriceSeries) -> Result<()> {
    let rows = p
        .prices()
        .iter()
        .enumerate()
        .map(|(i, v)| [format_timestamp(from_hour_index(p.start() + i as i64)), v.to_string()]);
    write_csv(path, &PRICE_HEADER, rows)
}

pub const FORECAST_HEADER: [&str; 4] = ["day", "hour", "forecast_kW", "actual_kW"];

pub fn write_forecasts(path: &Path, days: &[(NaiveDate, [f64; 24], [f64; 24])]) -> Result<()> {
    let rows = days.iter().flat_map(|(d, f, a)| {
        (0..24).map(move |h| [d.to_string(), h.to_string(), f[h].to_string(), a[h].to_string()])
    });
    write_csv(path, &FORECAST_HEADER, rows)
}

/// Reads `(day, hour, value)` from the first three columns of a CSV with a
/// header; the value column may have any name.
pub fn read_day_hour_values(path: &Path) -> Result<Vec<(NaiveDate, u32, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| AppError::format(path, e))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| AppError::format(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() < 3 {
            return Err(parse_error(line, "expected day,hour,value".into()));
        }
        let day = parse_date(&rec[0]).ok_or_else(|| parse_error(line, format!("invalid day '{}'", &rec[0])))?;
        let hour: u32 = rec[1]
            .parse()
            .ok()
            .filter(|h| *h < 24)
            .ok_or_else(|| parse_error(line, format!("invalid hour '{}'", &rec[1])))?;
        out.push((day, hour, field_f64(&rec, 2, line, "value")?));
    }
    Ok(out)
}

/// Reads both value columns of a forecast file.
pub fn read_forecast_pairs(path: &Path) -> Result<Vec<(NaiveDate, u32, f64, f64)>> {
    read_rows(path, &FORECAST_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            let day = parse_date(&rec[0]).ok_or_else(|| parse_error(line, format!("invalid day '{}'", &rec[0])))?;
            let hour: u32 = rec[1]
                .parse()
                .ok()
                .filter(|h| *h < 24)
                .ok_or_else(|| parse_error(line, format!("invalid hour '{}'", &rec[1])))?;
            Ok((day, hour, field_f64(&rec, 2, line, "forecast_kW")?, field_f64(&rec, 3, line, "actual_kW")?))
        })
        .collect()
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::format(path, e))?;
    text.push('\n');
    write_text(path, &text)
}
