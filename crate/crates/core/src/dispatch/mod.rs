//! Daily battery dispatch: the mixed-integer program, its solver and the
//! day-by-day simulation against actual load.

mod battery;
mod milp;
mod mpc;
pub mod simplex;

pub use battery::{build_battery, BatteryParams, BatteryScheme, C_RATE, EFFICIENCY, KWH_PER_HOUSEHOLD};
pub use milp::{
    build_daily_milp, lp_relaxation, solve_fixed_pattern, solve_milp, solve_milp_with, DispatchSchedule,
    MilpInstance, SolveStats, ABS_GAP, CHECK_TOL, DEFAULT_NODE_LIMIT, GRID_FLOOR_FRACTION,
};
pub use mpc::{
    realized_cost, realized_grid, run_day, simulate_mpc, CostReport, DayAheadForecaster, DayResult,
    PerfectForecaster, PrecomputedForecasts,
};
