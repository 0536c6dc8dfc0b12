use alloc::format;

use crate::error::{ConstraintClass, Error, Result};

/// Per-household capacity of the scaled sizing scheme (kWh).
pub const KWH_PER_HOUSEHOLD: f64 = 12.0;
/// Maximum power over capacity.
pub const C_RATE: f64 = 0.25;
/// Charge and discharge efficiency (round trip ≈ 0.85).
pub const EFFICIENCY: f64 = 0.922;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryParams {
    pub e_max: f64,
    pub e_min: f64,
    pub p_max: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    pub e_start: f64,
    pub e_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatteryScheme {
    /// 12 kWh per household, scaled with community size.
    PerHousehold(usize),
    /// Fixed capacity in kWh.
    Capacity(f64),
}

/// Battery at C-rate 0.25 and 92.2 % one-way efficiency, starting and ending
/// each day half full. A capacity of exactly zero yields the degenerate
/// battery that can do nothing.
pub fn build_battery(scheme: BatteryScheme) -> Result<BatteryParams> {
    let e_max = match scheme {
        BatteryScheme::PerHousehold(0) => {
            return Err(Error::InvalidArgument("community needs at least one household".into()))
        }
        BatteryScheme::PerHousehold(h) => KWH_PER_HOUSEHOLD * h as f64,
        BatteryScheme::Capacity(c) if !(c >= 0.0) || !c.is_finite() => {
            return Err(Error::InvalidArgument(format!("battery capacity must be non-negative, got {c}")))
        }
        BatteryScheme::Capacity(c) => c,
    };
    let b = BatteryParams {
        e_max,
        e_min: 0.0,
        p_max: C_RATE * e_max,
        eta_ch: EFFICIENCY,
        eta_dis: EFFICIENCY,
        e_start: 0.5 * e_max,
        e_end: 0.5 * e_max,
    };
    b.validate()?;
    Ok(b)
}

impl BatteryParams {
    /// Checks ordering of energies, efficiencies in (0, 1] and non-negative power.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.e_max, self.e_min, self.p_max, self.eta_ch, self.eta_dis, self.e_start, self.e_end]
            .iter()
            .all(|v| v.is_finite());
        let ok = finite
            && 0.0 <= self.e_min
            && self.e_min <= self.e_start
            && self.e_min <= self.e_end
            && self.e_start <= self.e_max
            && self.e_end <= self.e_max
            && self.eta_ch > 0.0
            && self.eta_ch <= 1.0
            && self.eta_dis > 0.0
            && self.eta_dis <= 1.0
            && self.p_max >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Infeasible(ConstraintClass::BatteryBounds))
        }
    }

    pub fn round_trip(&self) -> f64 {
        self.eta_ch * self.eta_dis
    }
}
