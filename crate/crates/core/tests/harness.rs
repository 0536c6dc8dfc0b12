use chrono::NaiveDate;
use ecload_core::data::synthetic::{generate_world, WorldConfig};
use ecload_core::data::{make_split, sample_communities};
use ecload_core::features::{build_dataset, Dataset, FeatureWindow, Normalization, N_FEATURES};
use ecload_core::harness::*;
use ecload_core::models::{Family, Forecaster, SizeClass, TrainConfig};
use ecload_core::synthgen::ProfileTables;
use ecload_core::time::Quarter;
use ecload_core::Error;
use proptest::prelude::*;

#[test]
fn nmae_examples() {
    assert_eq!(nmae(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    assert_eq!(nmae(&[1.0, 3.0], &[2.0, 2.0]).unwrap(), 50.0);
    assert_eq!(mae(&[1.0, 3.0], &[2.0, 2.0]).unwrap(), 1.0);
    assert!(matches!(nmae(&[1.0], &[0.0]), Err(Error::UndefinedNormalization(_))));
    assert!(matches!(nmae(&[1.0, 1.0], &[-1.0, 0.5]), Err(Error::UndefinedNormalization(_))));
    assert!(nmae(&[1.0], &[1.0, 2.0]).is_err());
    assert!(nmae(&[], &[]).is_err());
}

#[test]
fn sample_statistics() {
    assert_eq!(mean(&[10.0; 20]), 10.0);
    assert_eq!(sample_sd(&[10.0; 20]), 0.0);
    assert_eq!(mean(&[8.0, 12.0]), 10.0);
    // sqrt(((8-10)^2 + (12-10)^2) / (2 - 1)) = sqrt(8)
    assert!((sample_sd(&[8.0, 12.0]) - 8f64.sqrt()).abs() < 1e-12);
    assert_eq!(format!("{:.2}", sample_sd(&[8.0, 12.0])), "2.83");
    assert_eq!(sample_sd(&[3.0]), 0.0);
}

fn window(day: NaiveDate, y: [f64; 24]) -> FeatureWindow {
    let mut x = [[0.0; N_FEATURES]; 24];
    for h in 0..24 {
        x[h][3] = 1.0;
        x[h][14] = y[h];
        x[h][15] = -y[h];
        x[h][16] = 2.0 * y[h] + 1.0;
    }
    FeatureWindow { day, x, y }
}

#[test]
fn correlation_examples() {
    let d0 = NaiveDate::from_ymd_opt(2013, 1, 1).unwrap();
    let windows: Vec<FeatureWindow> = (0..5)
        .map(|i| window(d0 + chrono::Days::new(i), core::array::from_fn(|h| ((h * 7 + i as usize * 3) % 11) as f64)))
        .collect();
    let data = Dataset {
        normalization: Normalization::fit(&windows).unwrap(),
        windows,
    };
    let r = correlate(&data).unwrap();
    assert_eq!(r.len(), N_FEATURES);
    assert!((r[14].r - 1.0).abs() < 1e-12 && r[14].defined);
    assert!((r[15].r + 1.0).abs() < 1e-12);
    assert!((r[16].r - 1.0).abs() < 1e-12);
    assert!(!r[3].defined && r[3].r == 0.0);
    assert!(!r[0].defined);
}

fn small_world(households: usize, seed: u64) -> ecload_core::data::synthetic::SyntheticWorld {
    let mut cfg = WorldConfig::reference(households, seed);
    cfg.first_day = NaiveDate::from_ymd_opt(2013, 1, 1).unwrap();
    generate_world(&cfg, &ProfileTables::builtin()).unwrap()
}

#[test]
fn temperature_is_negatively_correlated_with_load() {
    let w = small_world(10, 5);
    let c = &sample_communities(&w.households, 10, 1, 1).unwrap()[0];
    let split = make_split(c.aggregate.range(), Quarter::Q3, 2013, 6).unwrap();
    let (train, _) = build_dataset(&split, &c.aggregate, &w.weather, &w.calendar).unwrap();
    let r = correlate(&train).unwrap();
    assert!(r[14].defined && r[14].r < 0.0, "temperature r = {}", r[14].r);
}

#[test]
fn aggregation_lowers_error() {
    let w = small_world(100, 9);
    let mut means = Vec::new();
    for (h, reps) in [(1, 10), (10, 10), (100, 1)] {
        let communities = sample_communities(&w.households, h, reps, 4).unwrap();
        let mut errs = Vec::new();
        for c in &communities {
            let split = make_split(c.aggregate.range(), Quarter::Q4, 2013, 6).unwrap();
            let (train, test) = build_dataset(&split, &c.aggregate, &w.weather, &w.calendar).unwrap();
            let (m, _) = Forecaster::fit(Family::Persistence, None, &train, &TrainConfig::new(0)).unwrap();
            let f: Vec<f64> = m.predict_dataset(&test).unwrap().into_iter().flatten().collect();
            let a: Vec<f64> = test.windows.iter().flat_map(|w| w.y).collect();
            errs.push(nmae(&f, &a).unwrap());
        }
        means.push(mean(&errs));
    }
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
}

#[test]
fn default_grid_cells() {
    let g = GridConfig::default();
    let cells = g.cells();
    // baseline + 4 communities + 5 train lengths + 6 sizes + 1 TL + 3 quarters
    assert_eq!(cells.len(), 1 + 4 + 5 + 6 + 1 + 3);
    assert_eq!(cells[0].axis, Axis::Baseline);
    assert_eq!(cells[0].settings, CellSettings::BASELINE);
    assert_eq!(g.repetitions, 20);
}

fn differing_axes(a: &CellSettings, b: &CellSettings) -> usize {
    [
        a.community_size != b.community_size,
        a.train_months != b.train_months,
        a.size_class != b.size_class,
        a.transfer_learning != b.transfer_learning,
        a.test_quarter != b.test_quarter,
    ]
    .iter()
    .filter(|x| **x)
    .count()
}

fn record(cell: GridCell, rep: usize, family: Family, v: Option<f64>) -> ResultRecord {
    ResultRecord {
        cell,
        repetition: rep,
        seed: rep as u64,
        family,
        param_count: None,
        nmae: v,
        per_day_nmae: Vec::new(),
        train_seconds: 1.0,
        error: v.is_none().then(|| "failed".to_string()),
    }
}

#[test]
fn summaries_aggregate_repetitions() {
    let cells = GridConfig::default().cells();
    let mut records = Vec::new();
    for &c in &cells[..3] {
        for f in Family::ALL {
            records.push(record(c, 0, f, Some(8.0)));
            records.push(record(c, 1, f, Some(12.0)));
        }
    }
    records.push(record(cells[0], 2, Family::Knn, None));
    let rows = summarize(&records);
    assert_eq!(rows.len(), 3 * Family::ALL.len());
    for r in &rows {
        assert_eq!(r.mean_nmae, 10.0);
        assert!((r.sd_nmae - 8f64.sqrt()).abs() < 1e-12);
    }
    let knn = rows.iter().find(|r| r.cell == cells[0] && r.family == Family::Knn).unwrap();
    assert_eq!((knn.runs, knn.failures), (3, 1));
    assert_eq!(rows[0].cell, cells[0]);
}

proptest! {
    #[test]
    fn cells_vary_one_axis(
        communities in proptest::collection::vec(1usize..200, 0..6),
        months in proptest::collection::vec(1u32..24, 0..6),
        sizes in proptest::sample::subsequence(SizeClass::ALL.to_vec(), 0..7),
        quarters in proptest::sample::subsequence(Quarter::ALL.to_vec(), 0..4),
    ) {
        let g = GridConfig {
            community_sizes: communities,
            train_months: months,
            size_classes: sizes,
            quarters,
            ..GridConfig::default()
        };
        let cells = g.cells();
        prop_assert_eq!(cells[0].settings, g.baseline);
        for (i, c) in cells.iter().enumerate().skip(1) {
            prop_assert_eq!(differing_axes(&c.settings, &g.baseline), 1);
            prop_assert!(cells[..i].iter().all(|o| o.settings != c.settings));
        }
    }

    #[test]
    fn nmae_is_scale_invariant_and_non_negative(
        pairs in proptest::collection::vec((0.0f64..10.0, 0.01f64..10.0), 1..50),
        c in 0.01f64..100.0,
    ) {
        let f: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let a: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let base = nmae(&f, &a).unwrap();
        let fs: Vec<f64> = f.iter().map(|v| v * c).collect();
        let as_: Vec<f64> = a.iter().map(|v| v * c).collect();
        prop_assert!(base >= 0.0);
        prop_assert!((nmae(&fs, &as_).unwrap() - base).abs() <= 1e-9 * base.max(1.0));
    }
}
