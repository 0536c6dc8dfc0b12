//! Smart-meter readings to hourly mean-power series.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use chrono::{NaiveDateTime, Timelike};

use super::series::LoadSeries;
use crate::error::{Error, Result};
use crate::time::hour_index;

/// Longest run of missing hours that is repaired by forward fill.
pub const MAX_FILL_GAP_HOURS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceResolution {
    HalfHourly,
    Hourly,
}

impl SourceResolution {
    fn slots_per_hour(self) -> u8 {
        match self {
            SourceResolution::HalfHourly => 2,
            SourceResolution::Hourly => 1,
        }
    }

    pub fn minutes(self) -> u32 {
        match self {
            SourceResolution::HalfHourly => 30,
            SourceResolution::Hourly => 60,
        }
    }

    pub fn from_minutes(m: u32) -> Option<Self> {
        match m {
            30 => Some(SourceResolution::HalfHourly),
            60 => Some(SourceResolution::Hourly),
            _ => None,
        }
    }
}

/// One raw row of the loads file. `line` is used for error reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct MeterReading {
    pub household: String,
    pub timestamp: NaiveDateTime,
    pub energy_kwh: f64,
    pub line: usize,
}

/// A household dropped because a gap exceeded [`MAX_FILL_GAP_HOURS`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub household: String,
    pub gap_start: NaiveDateTime,
    pub gap_hours: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestOutcome {
    pub series: Vec<LoadSeries>,
    pub rejected: Vec<Rejection>,
}

/// Sums sub-hourly energies into hourly energy (numerically equal to mean
/// power at a one-hour step), repairs short gaps and rejects households with
/// long ones. Households come out sorted by id.
pub fn load_smart_meter(
    readings: impl IntoIterator<Item = MeterReading>,
    resolution: SourceResolution,
) -> Result<IngestOutcome> {
    // household -> slot -> (energy, line)
    let mut by_household: BTreeMap<String, BTreeMap<i64, (f64, usize)>> = BTreeMap::new();
    let step = i64::from(resolution.minutes());
    for r in readings {
        if !r.energy_kwh.is_finite() || r.energy_kwh < 0.0 {
            return Err(Error::Parse {
                line: r.line,
                message: format!("energy {} is negative or non-finite", r.energy_kwh),
            });
        }
        let minute = i64::from(r.timestamp.minute());
        if r.timestamp.second() != 0 || minute % step != 0 {
            return Err(Error::Parse {
                line: r.line,
                message: format!(
                    "timestamp {} is not aligned to the {}-minute grid",
                    r.timestamp, step
                ),
            });
        }
        let slot = hour_index(r.timestamp) * 60 + minute;
        let slots = by_household.entry(r.household.clone()).or_default();
        if slots.insert(slot, (r.energy_kwh, r.line)).is_some() {
            return Err(Error::DuplicateTimestamp {
                household: r.household,
                timestamp: r.timestamp,
                line: r.line,
            });
        }
    }

    let per_hour = resolution.slots_per_hour();
    let mut out = IngestOutcome::default();
    for (household, slots) in by_household {
        // Hourly totals with the number of contributing slots.
        let mut hours: BTreeMap<i64, (f64, u8)> = BTreeMap::new();
        for (slot, (kwh, _)) in slots {
            let e = hours.entry(slot.div_euclid(60)).or_insert((0.0, 0));
            e.0 += kwh;
            e.1 += 1;
        }
        let complete: Vec<(i64, f64)> = hours
            .into_iter()
            .filter(|(_, (_, n))| *n == per_hour)
            .map(|(h, (e, _))| (h, e))
            .collect();
        let Some(&(first, _)) = complete.first() else {
            continue;
        };
        let last = complete[complete.len() - 1].0;
        let mut values = Vec::with_capacity((last - first + 1) as usize);
        let mut rejected = None;
        let mut prev_hour = first - 1;
        for (h, e) in complete {
            let gap = (h - prev_hour - 1) as usize;
            if gap > MAX_FILL_GAP_HOURS {
                rejected = Some(Rejection {
                    household: household.clone(),
                    gap_start: crate::time::from_hour_index(prev_hour + 1),
                    gap_hours: gap,
                });
                break;
            }
            if gap > 0 {
                let fill = *values.last().expect("gap cannot precede first hour");
                values.extend(core::iter::repeat_n(fill, gap));
            }
            values.push(e);
            prev_hour = h;
        }
        match rejected {
            Some(r) => out.rejected.push(r),
            None => out.series.push(LoadSeries::new(household, first, values)?),
        }
    }
    Ok(out)
}
