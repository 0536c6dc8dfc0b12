use chrono::NaiveDate;
use ecload::io::*;
use ecload_core::data::{load_smart_meter, HolidayCalendar, LoadSeries, PriceSeries, SourceResolution, WeatherSeries};
use ecload_core::time::hour_index;
use std::fs;

fn ts(d: u32, h: u32) -> chrono::NaiveDateTime {
    NaiveDate::from_ymd_opt(2013, 5, d).unwrap().and_hms_opt(h, 0, 0).unwrap()
}

#[test]
fn timestamps_accept_common_formats() {
    let t = ts(3, 14);
    for s in ["2013-05-03T14:00:00", "2013-05-03 14:00:00", "2013-05-03 14:00"] {
        assert_eq!(parse_timestamp(s), Some(t), "{s}");
    }
    assert_eq!(format_timestamp(t), "2013-05-03T14:00:00");
    assert_eq!(parse_timestamp("03/05/2013"), None);
}

#[test]
fn loads_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("loads.csv");
    let a = LoadSeries::new("a", hour_index(ts(1, 0)), vec![0.5, 1.25, 2.0]).unwrap();
    let b = LoadSeries::new("b", hour_index(ts(1, 1)), vec![0.1, 0.2]).unwrap();
    write_loads(&p, &[a.clone(), b.clone()]).unwrap();
    let out = load_smart_meter(read_meter_readings(&p).unwrap(), SourceResolution::Hourly).unwrap();
    assert_eq!(out.series, vec![a, b]);
    assert!(out.rejected.is_empty());
}

#[test]
fn weather_prices_holidays_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let start = hour_index(ts(2, 5));
    let w = WeatherSeries::new(start, vec![[1.5, -2.0, 180.0, 3.25, 1013.0, 80.0]; 30]).unwrap();
    write_weather(&dir.path().join("w.csv"), &w).unwrap();
    assert_eq!(read_weather(&dir.path().join("w.csv")).unwrap(), w);

    let p = PriceSeries::new(start, (0..48).map(|i| 0.01 * i as f64).collect()).unwrap();
    write_prices(&dir.path().join("p.csv"), &p).unwrap();
    assert_eq!(read_prices(&dir.path().join("p.csv")).unwrap(), p);

    let cal = HolidayCalendar::new("XX", [NaiveDate::from_ymd_opt(2013, 12, 25).unwrap()]);
    write_holidays(&dir.path().join("h.csv"), &cal).unwrap();
    assert_eq!(read_holidays(&dir.path().join("h.csv"), "XX").unwrap(), cal);
}

#[test]
fn malformed_inputs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.csv");
    fs::write(&p, "id,time,kwh\na,2013-05-01T00:00:00,1\n").unwrap();
    assert_eq!(read_meter_readings(&p).unwrap_err().exit_code(), 2);
    fs::write(&p, "household_id,timestamp,energy_kWh\na,2013-05-01T00:00:00,abc\n").unwrap();
    assert!(read_meter_readings(&p).unwrap_err().to_string().contains("line 2"));
    fs::write(&p, "timestamp,price_eur_per_kwh\n2013-05-01T00:00:00,1\n2013-05-01T02:00:00,1\n").unwrap();
    assert!(read_prices(&p).is_err());
    fs::write(&p, "date\n2013-12-25\n2013-12-25\n").unwrap();
    assert!(read_holidays(&p, "XX").is_err());
}
