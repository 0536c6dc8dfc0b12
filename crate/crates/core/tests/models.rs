mod common;

use chrono::NaiveDate;
use common::{gradient_check_joint, random_tensor, weighted_sum};
use ecload_core::data::LoadSeries;
use ecload_core::features::{Dataset, FeatureWindow, InputMatrix, Normalization, HOURS, N_FEATURES};
use ecload_core::models::*;
use ecload_core::neural::{Graph, Tensor};
use ecload_core::time::date_hour;
use ecload_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).unwrap()
}

/// Closed-form parameter counts, written independently of the layouts.
fn expected_count(arch: &Architecture) -> usize {
    match arch {
        Architecture::Lstm(a) => {
            let mut n = 0;
            let mut width = 20;
            for &(u, bi) in &a.layers {
                let dirs = if bi { 2 } else { 1 };
                n += dirs * 4 * u * (width + u + 1);
                width = dirs * u;
            }
            for &k in &a.dense {
                n += width * k + k;
                width = k;
            }
            n + width + 1
        }
        Architecture::Transformer(a) => {
            let d = a.d;
            21 * d + a.layers * (4 * d * d + 2 * d + 2 * d * a.ff) + d + 1
        }
        Architecture::Xlstm(a) => {
            let d = a.d;
            let mut n = 21 * d + 24 * d + d + d + 1;
            for b in 0..a.blocks {
                if a.slstm_at.contains(&b) {
                    let hd = d / a.heads;
                    let ffd = (((13 * d + 9) / 10 + 7) / 8) * 8;
                    n += d + (4 * d + d) + 4 * d * hd + 4 * a.heads * hd * hd + 4 * d + d;
                    n += d + 3 * d * ffd;
                } else {
                    let inner = ((2 * d + 63) / 64) * 64;
                    n += d + d * 2 * inner + 3 * inner * 4 + 5 * inner + 2 * (3 * inner + 1) * a.heads + 2 * inner + inner * d;
                }
            }
            n
        }
    }
}

#[test]
fn parameter_counts_match_closed_form() {
    for p in ModelPreset::all() {
        let expect = expected_count(&p.arch);
        assert_eq!(p.count_params(), expect, "{}", p.label());
        let m = DeepModel::new(p.clone(), 3).unwrap();
        assert_eq!(m.param_count(), expect, "{}", p.label());
    }
}

#[test]
fn five_k_presets_are_comparable() {
    let l = ModelPreset::table(Family::Lstm, SizeClass::K5).unwrap().count_params() as i64;
    let t = ModelPreset::table(Family::Transformer, SizeClass::K5).unwrap().count_params() as i64;
    let x = ModelPreset::table(Family::Xlstm, SizeClass::K5).unwrap().count_params() as i64;
    assert!((t - l).abs() <= 1500, "transformer {t} vs lstm {l}");
    assert!((x - l).abs() <= 1500, "xlstm {x} vs lstm {l}");
}

#[test]
fn doubling_widths_increases_count() {
    for p in ModelPreset::all() {
        let doubled = match &p.arch {
            Architecture::Lstm(a) => Architecture::Lstm(LstmArch {
                layers: a.layers.iter().map(|&(u, b)| (2 * u, b)).collect(),
                dense: a.dense.iter().map(|&k| 2 * k).collect(),
            }),
            Architecture::Transformer(a) => Architecture::Transformer(TransformerArch {
                d: 2 * a.d,
                ff: 2 * a.ff,
                ..a.clone()
            }),
            Architecture::Xlstm(a) => Architecture::Xlstm(XlstmArch { d: 2 * a.d, ..a.clone() }),
        };
        assert!(doubled.count_params() > p.count_params(), "{}", p.label());
    }
}

fn random_inputs(seed: u64, n: usize) -> Vec<InputMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut x = [[0.0; N_FEATURES]; HOURS];
            for row in x.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.random_range(-2.0..2.0);
                }
            }
            x
        })
        .collect()
}

#[test]
fn every_preset_maps_a_day_to_24_values() {
    let inputs = random_inputs(1, 2);
    for p in ModelPreset::all() {
        let m = DeepModel::new(p.clone(), 1).unwrap();
        let out = m.predict(&inputs).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().flatten().all(|v| v.is_finite()), "{}", p.label());
        let mut g = Graph::new();
        let vars = m.params.bind_frozen(&mut g);
        let x = g.constant(Tensor::zeros(&[3, HOURS, N_FEATURES]));
        let y = p.arch.forward(&mut g, &vars, x).unwrap();
        assert_eq!(g.shape(y), &[3, HOURS, 1]);
    }
}

#[test]
fn zero_weights_give_zero_output() {
    let inputs = random_inputs(2, 1);
    for p in ModelPreset::all() {
        let m = DeepModel::with_params(p.clone(), p.arch.zero_params()).unwrap();
        let out = m.predict(&inputs).unwrap();
        assert!(out[0].iter().all(|&v| v == 0.0), "{}: {:?}", p.label(), out[0]);
    }
}

#[test]
fn mismatched_parameters_are_rejected() {
    let a = ModelPreset::table(Family::Lstm, SizeClass::K5).unwrap();
    let b = ModelPreset::table(Family::Lstm, SizeClass::K20).unwrap();
    let err = DeepModel::with_params(a, b.arch.zero_params()).unwrap_err();
    assert!(matches!(err, Error::PresetMismatch(_)));
    assert!(ModelPreset::table(Family::Knn, SizeClass::K5).is_err());
}

fn small_presets() -> Vec<ModelPreset> {
    Family::DEEP
        .iter()
        .flat_map(|&f| [SizeClass::K0_1, SizeClass::K0_2].map(|s| ModelPreset::table(f, s).unwrap()))
        .collect()
}

#[test]
fn forward_jacobian_matches_finite_differences() {
    for p in small_presets() {
        let m = DeepModel::new(p.clone(), 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_tensor(&mut rng, &[2, HOURS, N_FEATURES], -1.5, 1.5);
        let tensors: Vec<Tensor> = m.params.iter().map(|(_, t)| t.clone()).collect();
        let arch = p.arch.clone();
        let err = gradient_check_joint(&tensors, &|g, vars| {
            let xv = g.constant(x.clone());
            let y = arch.forward(g, vars, xv).unwrap();
            weighted_sum(g, y, 9)
        });
        assert!(err < 1e-4, "{}: {err}", p.label());
    }
}

fn series(start_day: NaiveDate, values: Vec<f64>) -> LoadSeries {
    LoadSeries::new("h", date_hour(start_day), values).unwrap()
}

#[test]
fn persistence_examples() {
    let s = series(d(2013, 1, 1), vec![5.0; 24 * 10]);
    assert_eq!(persistence_forecast(&s, d(2013, 1, 9)).unwrap(), [5.0; 24]);

    // Tuesday 2013-01-01 holds 1..=24; the forecast for Tuesday 2013-01-08 repeats it
    let mut v = vec![0.0; 24 * 10];
    for k in 0..24 {
        v[k] = (k + 1) as f64;
    }
    let s = series(d(2013, 1, 1), v);
    let f = persistence_forecast(&s, d(2013, 1, 8)).unwrap();
    let expect: Vec<f64> = (1..=24).map(f64::from).collect();
    assert_eq!(f.to_vec(), expect);

    let weekly: Vec<f64> = (0..24 * 28).map(|i| ((i % 168) as f64).sin() + 2.0).collect();
    let s = series(d(2013, 1, 1), weekly.clone());
    for day in 7..28 {
        let f = persistence_forecast(&s, d(2013, 1, 1 + day as u32)).unwrap();
        assert_eq!(f.to_vec(), weekly[day * 24..day * 24 + 24].to_vec());
    }

    let err = persistence_forecast(&s, d(2013, 1, 3)).unwrap_err();
    assert_eq!(
        err,
        Error::MissingHistory {
            day: d(2013, 1, 3),
            earliest: Some(d(2013, 1, 8))
        }
    );
}

#[test]
fn knn_examples() {
    let knn = Knn::from_rows(2, vec![0.0, 0.0, 1.0, 1.0, 3.0, 0.5], vec![7.0, 1.0, 2.0], 1).unwrap();
    assert_eq!(knn.predict_row(&[1.0, 1.0]), 1.0);

    let toy = Knn::from_rows(1, vec![0.25, 0.75, 5.0], vec![0.0, 10.0, 99.0], 2).unwrap();
    assert!((toy.predict_row(&[0.0]) - 2.5).abs() < 1e-12);

    let eq = Knn::from_rows(1, vec![-1.0, 1.0, 10.0], vec![3.0, 5.0, 100.0], 2).unwrap();
    assert!((eq.predict_row(&[0.0]) - 4.0).abs() < 1e-12);

    let dup = Knn::from_rows(1, vec![2.0, 2.0, 3.0], vec![1.0, 3.0, 50.0], 3).unwrap();
    assert_eq!(dup.predict_row(&[2.0]), 2.0);

    assert!(matches!(
        Knn::from_rows(1, vec![1.0, 2.0], vec![1.0, 2.0], 3),
        Err(Error::EmptyDataset(_))
    ));
}

fn window(day: NaiveDate, x: InputMatrix, y: [f64; HOURS]) -> FeatureWindow {
    FeatureWindow { day, x, y }
}

fn dataset(windows: Vec<FeatureWindow>) -> Dataset {
    let normalization = Normalization::fit(&windows).unwrap();
    Dataset { windows, normalization }
}

fn toy_dataset(n: usize, seed: u64) -> Dataset {
    let inputs = random_inputs(seed, n);
    let windows = inputs
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let y = core::array::from_fn(|h| 2.0 + 0.5 * x[h][14] + 0.3 * x[h][7] + 0.1 * (i % 3) as f64);
            window(d(2013, 1, 1) + chrono::Duration::days(i as i64), x, y)
        })
        .collect();
    dataset(windows)
}

#[test]
fn training_overfits_a_single_window() {
    let data = toy_dataset(1, 4);
    let preset = ModelPreset::table(Family::Transformer, SizeClass::K5).unwrap();
    let mut m = DeepModel::new(preset, 2).unwrap();
    let curve = train(&mut m, &data, &TrainConfig::new(2)).unwrap();
    assert_eq!(curve.len(), 100);
    let pred = m.predict(&[data.windows[0].x]).unwrap();
    let mae: f64 = pred[0].iter().zip(&data.windows[0].y).map(|(a, b)| (a - b).abs()).sum::<f64>() / 24.0;
    assert!(mae < 0.01 * data.target_mean(), "mae {mae}, mean {}", data.target_mean());
}

#[test]
fn zero_targets_loss_does_not_increase_across_stages() {
    let mut data = toy_dataset(20, 6);
    for w in &mut data.windows {
        w.y = [0.0; HOURS];
    }
    let preset = ModelPreset::table(Family::Lstm, SizeClass::K0_5).unwrap();
    let mut m = DeepModel::new(preset, 1).unwrap();
    let cfg = TrainConfig {
        epochs: 40,
        ..TrainConfig::new(3)
    };
    let curve = train(&mut m, &data, &cfg).unwrap();
    let stage_mean = |s: usize| curve[s * 10..(s + 1) * 10].iter().sum::<f64>() / 10.0;
    for s in 1..4 {
        assert!(stage_mean(s) <= stage_mean(s - 1) + 1e-6, "{curve:?}");
    }
}

#[test]
fn training_is_deterministic() {
    let data = toy_dataset(30, 8);
    for fam in Family::DEEP {
        let preset = ModelPreset::table(fam, SizeClass::K0_5).unwrap();
        let cfg = TrainConfig {
            epochs: 4,
            batch_size: 8,
            ..TrainConfig::new(17)
        };
        let run = || {
            let mut m = DeepModel::new(preset.clone(), 17).unwrap();
            let c = train(&mut m, &data, &cfg).unwrap();
            (c, m.params)
        };
        let (c1, p1) = run();
        let (c2, p2) = run();
        assert_eq!(c1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), c2.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(p1, p2);
    }
}

#[test]
fn learning_rate_stages_split_epochs_evenly() {
    let c = TrainConfig::new(0);
    assert_eq!(c.lr_at(0), 0.01);
    assert_eq!(c.lr_at(24), 0.01);
    assert_eq!(c.lr_at(25), 0.005);
    assert_eq!(c.lr_at(50), 0.001);
    assert_eq!(c.lr_at(75), 0.0005);
    assert_eq!(c.lr_at(99), 0.0005);
}

#[test]
fn non_finite_loss_aborts() {
    let mut data = toy_dataset(4, 1);
    data.windows[2].y[5] = f64::INFINITY;
    let preset = ModelPreset::table(Family::Transformer, SizeClass::K0_1).unwrap();
    let mut m = DeepModel::new(preset, 1).unwrap();
    let err = train(&mut m, &data, &TrainConfig::new(1)).unwrap_err();
    assert!(matches!(err, Error::NonFiniteLoss { epoch: 0, .. }));
}

#[test]
fn checkpoint_restores_predictions() {
    let preset = ModelPreset::table(Family::Xlstm, SizeClass::K5).unwrap();
    let m = DeepModel::new(preset.clone(), 4).unwrap();
    let text = m.params.to_checkpoint(&[]);
    let (params, _) = ecload_core::neural::ParamSet::from_checkpoint(&text).unwrap();
    let r = DeepModel::with_params(preset, params).unwrap();
    let x = random_inputs(3, 2);
    assert_eq!(m.predict(&x).unwrap(), r.predict(&x).unwrap());
}

#[test]
fn fine_tuning_on_pretraining_set_is_not_worse() {
    let train_set = toy_dataset(60, 21);
    let test_set = toy_dataset(20, 22);
    let preset = ModelPreset::table(Family::Transformer, SizeClass::K0_5).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        batch_size: 16,
        ..TrainConfig::new(5)
    };
    let mae = |f: &Forecaster| {
        let p = f.predict_dataset(&test_set).unwrap();
        p.iter()
            .zip(&test_set.windows)
            .flat_map(|(a, w)| a.iter().zip(&w.y).map(|(x, y)| (x - y).abs()))
            .sum::<f64>()
    };
    let (tl, _, _) = pretrain_finetune(preset.clone(), &train_set, &train_set, &cfg).unwrap();
    let mut scratch = DeepModel::new(preset, 5).unwrap();
    train(&mut scratch, &train_set, &cfg).unwrap();
    let (a, b) = (mae(&Forecaster::Deep(tl)), mae(&Forecaster::Deep(scratch)));
    assert!(a <= b * 1.05, "fine-tuned {a} vs scratch {b}");
}

#[test]
fn pretraining_calendar_must_cover_target() {
    let synth = toy_dataset(10, 1);
    let mut target = toy_dataset(5, 2);
    target.windows[4].day = d(2015, 1, 1);
    let preset = ModelPreset::table(Family::Lstm, SizeClass::K0_1).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::new(1)
    };
    assert!(matches!(pretrain_finetune(preset, &synth, &target, &cfg), Err(Error::Contract(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn every_family_returns_finite_day_vectors(seed in 0u64..10_000) {
        let train_set = toy_dataset(3, seed);
        let inputs = random_inputs(seed + 1, 2);
        let cfg = TrainConfig { epochs: 1, ..TrainConfig::new(seed) };
        for fam in Family::ALL {
            let preset = fam.is_deep().then(|| ModelPreset::table(fam, SizeClass::K0_2).unwrap());
            let (f, _) = Forecaster::fit(fam, preset, &train_set, &cfg).unwrap();
            let out = f.predict(&inputs).unwrap();
            prop_assert_eq!(out.len(), 2);
            prop_assert!(out.iter().flatten().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn knn_prediction_is_a_convex_combination(seed in 0u64..10_000, k in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 30;
        let rows: Vec<f64> = (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let targets: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let knn = Knn::from_rows(3, rows, targets, k).unwrap();
        let q: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nb = knn.neighbors(&q);
        let lo = nb.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = nb.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let y = knn.predict_row(&q);
        prop_assert!(y >= lo - 1e-9 && y <= hi + 1e-9);
    }
}
