//! Independent reference solvers for small dispatch instances.

#![allow(dead_code)]

use ecload_core::dispatch::{solve_fixed_pattern, BatteryParams, MilpInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DP_LEVELS: usize = 401;

/// Random N-period instance with start and end energy on the DP grid.
pub fn random_instance(seed: u64, periods: usize) -> MilpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e_max = rng.random_range(0.5..4.0);
    let e_min = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.2) * e_max };
    let step = (e_max - e_min) / (DP_LEVELS - 1) as f64;
    let start = e_min + step * rng.random_range(100..=300) as f64;
    let battery = BatteryParams {
        e_max,
        e_min,
        p_max: e_max * rng.random_range(0.15..0.5),
        eta_ch: rng.random_range(0.85..1.0),
        eta_dis: rng.random_range(0.85..1.0),
        e_start: start,
        e_end: start,
    };
    let forecast: Vec<f64> = (0..periods).map(|_| rng.random_range(0.2..3.0)).collect();
    let prices: Vec<f64> = (0..periods).map(|_| rng.random_range(0.05..0.5)).collect();
    let floor = rng.random_bool(0.7);
    MilpInstance::new(&forecast, &prices, battery, floor).unwrap()
}

/// Dynamic program over a uniform grid of stored-energy levels. Each period
/// moves between two levels, charging or discharging only. With `pattern`,
/// period p may only charge (true) or only discharge (false).
pub fn dp_oracle(inst: &MilpInstance, pattern: Option<&[bool]>) -> Option<f64> {
    let b = &inst.battery;
    let n = inst.forecast.len();
    let step = (b.e_max - b.e_min) / (DP_LEVELS - 1) as f64;
    let level = |e: f64| -> Option<usize> {
        if step == 0.0 {
            return Some(0);
        }
        let k = ((e - b.e_min) / step).round();
        ((k * step + b.e_min - e).abs() < 1e-9).then_some(k as usize)
    };
    let levels = if step == 0.0 { 1 } else { DP_LEVELS };
    let energy = |k: usize| b.e_min + step * k as f64;
    let mut cost = vec![f64::INFINITY; levels];
    cost[level(b.e_start)?] = 0.0;
    for p in 0..n {
        let mut next = vec![f64::INFINITY; levels];
        for k in 0..levels {
            if !cost[k].is_finite() {
                continue;
            }
            for j in 0..levels {
                let de = energy(j) - energy(k);
                let (c, d) = if de >= 0.0 {
                    (de / (b.eta_ch * inst.dt), 0.0)
                } else {
                    (0.0, -de * b.eta_dis / inst.dt)
                };
                if let Some(pat) = pattern {
                    if (pat[p] && d > 0.0) || (!pat[p] && c > 0.0) {
                        continue;
                    }
                }
                let f = inst.forecast[p];
                if c > b.p_max + 1e-12 || d > b.p_max + 1e-12 {
                    continue;
                }
                let grid = c - d + f;
                if grid < inst.floor_fraction * f - 1e-12 {
                    continue;
                }
                let total = cost[k] + grid * inst.prices[p] * inst.dt;
                if total < next[j] {
                    next[j] = total;
                }
            }
        }
        cost = next;
    }
    let v = cost[level(b.e_end)?];
    v.is_finite().then_some(v)
}

/// Minimum over all 2^N charge/discharge patterns of the continuous optimum.
pub fn enumerate_patterns(inst: &MilpInstance) -> Option<(f64, Vec<bool>)> {
    let n = inst.forecast.len();
    let mut best: Option<(f64, Vec<bool>)> = None;
    for mask in 0u32..(1 << n) {
        let pattern: Vec<bool> = (0..n).map(|p| mask >> p & 1 == 1).collect();
        if let Ok(s) = solve_fixed_pattern(inst, &pattern) {
            if best.as_ref().is_none_or(|(v, _)| s.objective < *v) {
                best = Some((s.objective, pattern));
            }
        }
    }
    best
}
