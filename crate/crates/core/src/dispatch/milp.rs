use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::battery::BatteryParams;
use super::simplex::{Cmp, LinearProgram, LpResult};
use crate::error::{ConstraintClass, Error, Result};

/// Share of the forecast load the grid must supply when the floor is enabled.
pub const GRID_FLOOR_FRACTION: f64 = 0.15;
/// Default branch-and-bound node budget.
pub const DEFAULT_NODE_LIMIT: usize = 200_000;
/// Absolute optimality gap (€).
pub const ABS_GAP: f64 = 1e-6;
const INT_TOL: f64 = 1e-9;
/// Tolerance of the post-hoc schedule checks.
pub const CHECK_TOL: f64 = 1e-6;

/// One day of the dispatch problem with period length `dt` (hours).
#[derive(Debug, Clone, PartialEq)]
pub struct MilpInstance {
    pub forecast: Vec<f64>,
    pub prices: Vec<f64>,
    pub battery: BatteryParams,
    pub grid_floor: bool,
    pub floor_fraction: f64,
    pub dt: f64,
}

impl MilpInstance {
    /// Any horizon. Negative forecast values are clipped to zero. Without the
    /// floor the grid may still not export (`P_grid ≥ 0`).
    pub fn new(forecast: &[f64], prices: &[f64], battery: BatteryParams, grid_floor: bool) -> Result<Self> {
        if forecast.len() != prices.len() || forecast.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "forecast ({}) and prices ({}) must have the same non-zero length",
                forecast.len(),
                prices.len()
            )));
        }
        if forecast.iter().chain(prices).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite forecast or price".into()));
        }
        Ok(MilpInstance {
            forecast: forecast.iter().map(|v| v.max(0.0)).collect(),
            prices: prices.to_vec(),
            battery,
            grid_floor,
            floor_fraction: if grid_floor { GRID_FLOOR_FRACTION } else { 0.0 },
            dt: 1.0,
        })
    }

    pub fn periods(&self) -> usize {
        self.forecast.len()
    }

    /// Cost of buying the forecast load without the battery.
    pub fn unoptimized_cost(&self) -> f64 {
        self.forecast.iter().zip(&self.prices).map(|(f, p)| f * p * self.dt).sum()
    }
}

/// The daily problem over 24 hourly periods.
pub fn build_daily_milp(
    forecast: &[f64; 24],
    prices: &[f64; 24],
    battery: BatteryParams,
    grid_floor: bool,
) -> Result<MilpInstance> {
    MilpInstance::new(forecast, prices, battery, grid_floor)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSchedule {
    pub p_ch: Vec<f64>,
    pub p_dis: Vec<f64>,
    pub p_grid: Vec<f64>,
    /// Stored energy at the N + 1 time points.
    pub energy: Vec<f64>,
    pub b_ch: Vec<bool>,
    pub b_dis: Vec<bool>,
    /// Planned cost Σ P_grid·π·Δt (€).
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub nodes: usize,
    pub lp_solves: usize,
    /// LP relaxation value at the root (€).
    pub root_bound: f64,
}

struct VarMap {
    c: Vec<Option<usize>>,
    d: Vec<Option<usize>>,
    n: usize,
}

const ALL_CLASSES: [ConstraintClass; 4] = [
    ConstraintClass::PowerLimits,
    ConstraintClass::GridFloor,
    ConstraintClass::EnergyLimits,
    ConstraintClass::TerminalEnergy,
];

/// LP over the continuous powers for a partial assignment of the binaries
/// (`Some(true)` = charging period). Unfixed periods use the convex hull
/// `P_ch + P_dis ≤ P_max`.
fn build_lp(inst: &MilpInstance, fixed: &[Option<bool>], classes: &[ConstraintClass]) -> (LinearProgram, VarMap) {
    let b = &inst.battery;
    let np = inst.periods();
    let mut map = VarMap {
        c: vec![None; np],
        d: vec![None; np],
        n: 0,
    };
    let mut cost = Vec::new();
    for p in 0..np {
        if fixed[p] != Some(false) {
            map.c[p] = Some(map.n);
            map.n += 1;
            cost.push(inst.prices[p] * inst.dt);
        }
        if fixed[p] != Some(true) {
            map.d[p] = Some(map.n);
            map.n += 1;
            cost.push(-inst.prices[p] * inst.dt);
        }
    }
    let mut lp = LinearProgram::new(map.n, cost);
    let has = |c: ConstraintClass| classes.contains(&c);
    if has(ConstraintClass::PowerLimits) {
        for p in 0..np {
            let coef: Vec<(usize, f64)> = map.c[p].iter().chain(&map.d[p]).map(|&j| (j, 1.0)).collect();
            lp.add(coef, Cmp::Le, b.p_max);
        }
    }
    if has(ConstraintClass::GridFloor) {
        for p in 0..np {
            let mut coef = Vec::new();
            if let Some(j) = map.d[p] {
                coef.push((j, 1.0));
            }
            if let Some(j) = map.c[p] {
                coef.push((j, -1.0));
            }
            if !coef.is_empty() {
                lp.add(coef, Cmp::Le, (1.0 - inst.floor_fraction) * inst.forecast[p]);
            }
        }
    }
    let energy_row = |t: usize| -> Vec<(usize, f64)> {
        let mut coef = Vec::new();
        for p in 0..t {
            if let Some(j) = map.c[p] {
                coef.push((j, b.eta_ch * inst.dt));
            }
            if let Some(j) = map.d[p] {
                coef.push((j, -inst.dt / b.eta_dis));
            }
        }
        coef
    };
    if has(ConstraintClass::EnergyLimits) {
        for t in 1..np {
            let row = energy_row(t);
            lp.add(row.clone(), Cmp::Le, b.e_max - b.e_start);
            lp.add(row, Cmp::Ge, b.e_min - b.e_start);
        }
    }
    if has(ConstraintClass::TerminalEnergy) {
        lp.add(energy_row(np), Cmp::Eq, b.e_end - b.e_start);
    }
    (lp, map)
}

/// Adds constraint families one at a time and names the first that makes
/// the problem infeasible.
fn diagnose(inst: &MilpInstance, fixed: &[Option<bool>]) -> Error {
    if inst.battery.validate().is_err() {
        return Error::Infeasible(ConstraintClass::BatteryBounds);
    }
    for k in 1..=ALL_CLASSES.len() {
        let (lp, _) = build_lp(inst, fixed, &ALL_CLASSES[..k]);
        if lp.solve() == LpResult::Infeasible {
            return Error::Infeasible(ALL_CLASSES[k - 1]);
        }
    }
    Error::Infeasible(ConstraintClass::TerminalEnergy)
}

struct Relaxed {
    value: f64,
    c: Vec<f64>,
    d: Vec<f64>,
}

fn relax(inst: &MilpInstance, fixed: &[Option<bool>]) -> Result<Option<Relaxed>> {
    let (lp, map) = build_lp(inst, fixed, &ALL_CLASSES);
    match lp.solve() {
        LpResult::Optimal { x, value } => {
            let pick = |v: &Option<usize>| v.map_or(0.0, |j| x[j]);
            Ok(Some(Relaxed {
                value: value + inst.unoptimized_cost(),
                c: map.c.iter().map(pick).collect(),
                d: map.d.iter().map(pick).collect(),
            }))
        }
        LpResult::Infeasible => Ok(None),
        LpResult::Unbounded => Err(Error::Unbounded),
    }
}

fn schedule_from(inst: &MilpInstance, r: &Relaxed, fixed: &[Option<bool>]) -> DispatchSchedule {
    let b = &inst.battery;
    let np = inst.periods();
    let mut p_ch = r.c.clone();
    let mut p_dis = r.d.clone();
    let mut b_ch = vec![false; np];
    for p in 0..np {
        b_ch[p] = match fixed[p] {
            Some(v) => v,
            None => p_ch[p] > p_dis[p],
        };
        if b_ch[p] {
            p_dis[p] = 0.0;
        } else {
            p_ch[p] = 0.0;
        }
    }
    let mut energy = Vec::with_capacity(np + 1);
    energy.push(b.e_start);
    for p in 0..np {
        let e = energy[p] + (b.eta_ch * p_ch[p] - p_dis[p] / b.eta_dis) * inst.dt;
        energy.push(e);
    }
    let p_grid: Vec<f64> = (0..np).map(|p| p_ch[p] - p_dis[p] + inst.forecast[p]).collect();
    let objective = p_grid.iter().zip(&inst.prices).map(|(g, pr)| g * pr * inst.dt).sum();
    DispatchSchedule {
        p_ch,
        p_dis,
        p_grid,
        energy,
        b_dis: b_ch.iter().map(|v| !v).collect(),
        b_ch,
        objective,
    }
}

/// Value of the LP relaxation (binaries relaxed to [0, 1]).
pub fn lp_relaxation(inst: &MilpInstance) -> Result<f64> {
    let free = vec![None; inst.periods()];
    match relax(inst, &free)? {
        Some(r) => Ok(r.value),
        None => Err(diagnose(inst, &free)),
    }
}

/// Optimal continuous dispatch for a complete charge/discharge pattern.
pub fn solve_fixed_pattern(inst: &MilpInstance, charging: &[bool]) -> Result<DispatchSchedule> {
    if charging.len() != inst.periods() {
        return Err(Error::InvalidArgument("pattern length differs from horizon".into()));
    }
    inst.battery.validate()?;
    let fixed: Vec<Option<bool>> = charging.iter().map(|&v| Some(v)).collect();
    match relax(inst, &fixed)? {
        Some(r) => Ok(schedule_from(inst, &r, &fixed)),
        None => Err(diagnose(inst, &fixed)),
    }
}

struct Node {
    bound: f64,
    id: usize,
    fixed: Vec<Option<bool>>,
    relaxed: Relaxed,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap on the reverse: smallest bound first, then oldest node
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.id.cmp(&self.id))
    }
}

fn conflict(r: &Relaxed, fixed: &[Option<bool>]) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for p in 0..fixed.len() {
        if fixed[p].is_some() {
            continue;
        }
        let overlap = r.c[p].min(r.d[p]);
        if overlap > INT_TOL && best.is_none_or(|(b, _)| overlap > b) {
            best = Some((overlap, p));
        }
    }
    best.map(|(_, p)| p)
}

/// Best-first branch and bound over the per-period charge/discharge binaries.
pub fn solve_milp_with(inst: &MilpInstance, node_limit: usize) -> Result<(DispatchSchedule, SolveStats)> {
    inst.battery.validate()?;
    let np = inst.periods();
    let root_fixed = vec![None; np];
    let mut stats = SolveStats::default();
    stats.lp_solves += 1;
    let Some(root) = relax(inst, &root_fixed)? else {
        return Err(diagnose(inst, &root_fixed));
    };
    stats.root_bound = root.value;
    let mut heap = BinaryHeap::new();
    let mut next_id = 0;
    heap.push(Node {
        bound: root.value,
        id: next_id,
        fixed: root_fixed,
        relaxed: root,
    });
    let mut incumbent: Option<DispatchSchedule> = None;
    while let Some(node) = heap.pop() {
        if let Some(inc) = &incumbent {
            if node.bound >= inc.objective - ABS_GAP {
                break;
            }
        }
        stats.nodes += 1;
        if stats.nodes > node_limit {
            let gap = incumbent.as_ref().map_or(f64::INFINITY, |inc| inc.objective - node.bound);
            return Err(Error::NodeLimit {
                limit: node_limit,
                incumbent: incumbent.map(|s| s.objective),
                gap,
            });
        }
        let Some(p) = conflict(&node.relaxed, &node.fixed) else {
            let s = schedule_from(inst, &node.relaxed, &node.fixed);
            if incumbent.as_ref().is_none_or(|inc| s.objective < inc.objective) {
                incumbent = Some(s);
            }
            continue;
        };
        for choice in [true, false] {
            let mut fixed = node.fixed.clone();
            fixed[p] = Some(choice);
            stats.lp_solves += 1;
            if let Some(r) = relax(inst, &fixed)? {
                next_id += 1;
                heap.push(Node {
                    bound: r.value,
                    id: next_id,
                    fixed,
                    relaxed: r,
                });
            }
        }
    }
    match incumbent {
        Some(s) => Ok((s, stats)),
        None => Err(diagnose(inst, &vec![None; np])),
    }
}

pub fn solve_milp(inst: &MilpInstance) -> Result<DispatchSchedule> {
    solve_milp_with(inst, DEFAULT_NODE_LIMIT).map(|(s, _)| s)
}

impl DispatchSchedule {
    /// Verifies every schedule invariant against `inst`; returns the first violation.
    pub fn check(&self, inst: &MilpInstance) -> core::result::Result<(), String> {
        let b = &inst.battery;
        let np = inst.periods();
        let lens = [self.p_ch.len(), self.p_dis.len(), self.p_grid.len(), self.b_ch.len(), self.b_dis.len()];
        if lens.iter().any(|&l| l != np) || self.energy.len() != np + 1 {
            return Err("vector lengths do not match the horizon".into());
        }
        let tol = CHECK_TOL;
        for p in 0..np {
            let (c, d) = (self.p_ch[p], self.p_dis[p]);
            if c * d != 0.0 {
                return Err(format!("period {p}: simultaneous charge {c} and discharge {d}"));
            }
            if self.b_ch[p] == self.b_dis[p] {
                return Err(format!("period {p}: b_ch + b_dis != 1"));
            }
            let cap = |on: bool| if on { b.p_max } else { 0.0 };
            if c < -tol || c > cap(self.b_ch[p]) + tol {
                return Err(format!("period {p}: charge {c} outside [0, b_ch·P_max]"));
            }
            if d < -tol || d > cap(self.b_dis[p]) + tol {
                return Err(format!("period {p}: discharge {d} outside [0, b_dis·P_max]"));
            }
            let grid = c - d + inst.forecast[p];
            if (self.p_grid[p] - grid).abs() > tol {
                return Err(format!("period {p}: power balance off by {}", self.p_grid[p] - grid));
            }
            if self.p_grid[p] < inst.floor_fraction * inst.forecast[p] - tol {
                return Err(format!("period {p}: grid power below floor"));
            }
            let de = (b.eta_ch * c - d / b.eta_dis) * inst.dt;
            if (self.energy[p + 1] - self.energy[p] - de).abs() > tol {
                return Err(format!("period {p}: energy balance violated"));
            }
        }
        for (t, e) in self.energy.iter().enumerate() {
            if *e < b.e_min - tol || *e > b.e_max + tol {
                return Err(format!("time {t}: energy {e} outside [E_min, E_max]"));
            }
        }
        if (self.energy[0] - b.e_start).abs() > tol || (self.energy[np] - b.e_end).abs() > tol {
            return Err("initial or terminal energy condition violated".into());
        }
        let obj: f64 = self.p_grid.iter().zip(&inst.prices).map(|(g, p)| g * p * inst.dt).sum();
        if (obj - self.objective).abs() > tol * (1.0 + obj.abs()) {
            return Err("objective does not match the grid powers".into());
        }
        Ok(())
    }
}
