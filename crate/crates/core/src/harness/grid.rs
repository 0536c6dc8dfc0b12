use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::metrics::{mean, sample_sd};
use crate::models::{Family, SizeClass};
use crate::time::Quarter;

/// Settings of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellSettings {
    pub community_size: usize,
    pub train_months: u32,
    pub size_class: SizeClass,
    pub transfer_learning: bool,
    pub test_quarter: Quarter,
}

impl CellSettings {
    pub const BASELINE: CellSettings = CellSettings {
        community_size: 50,
        train_months: 12,
        size_class: SizeClass::K5,
        transfer_learning: false,
        test_quarter: Quarter::Q4,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    Baseline,
    Community,
    TrainMonths,
    Size,
    TransferLearning,
    Quarter,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Baseline => "baseline",
            Axis::Community => "community",
            Axis::TrainMonths => "train_months",
            Axis::Size => "size",
            Axis::TransferLearning => "tl",
            Axis::Quarter => "quarter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridCell {
    pub axis: Axis,
    pub settings: CellSettings,
}

impl GridCell {
    /// Value of the varied axis, as written to result files.
    pub fn axis_value(&self) -> String {
        let s = &self.settings;
        match self.axis {
            Axis::Baseline => "baseline".into(),
            Axis::Community => s.community_size.to_string(),
            Axis::TrainMonths => s.train_months.to_string(),
            Axis::Size => s.size_class.label().into(),
            Axis::TransferLearning => if s.transfer_learning { "on" } else { "off" }.into(),
            Axis::Quarter => s.test_quarter.name().into(),
        }
    }
}

/// One-at-a-time sensitivity design around a baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub baseline: CellSettings,
    pub community_sizes: Vec<usize>,
    pub train_months: Vec<u32>,
    pub size_classes: Vec<SizeClass>,
    pub transfer_learning: Vec<bool>,
    pub quarters: Vec<Quarter>,
    pub repetitions: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            baseline: CellSettings::BASELINE,
            community_sizes: alloc::vec![1, 2, 10, 50, 100],
            train_months: alloc::vec![2, 4, 6, 9, 12, 15],
            size_classes: SizeClass::ALL.to_vec(),
            transfer_learning: alloc::vec![false, true],
            quarters: Quarter::ALL.to_vec(),
            repetitions: 20,
        }
    }
}

impl GridConfig {
    /// The baseline cell followed by every cell that differs from it in
    /// exactly one axis. Axis values equal to the baseline collapse into it.
    pub fn cells(&self) -> Vec<GridCell> {
        let b = self.baseline;
        let mut cells = alloc::vec![GridCell {
            axis: Axis::Baseline,
            settings: b,
        }];
        let mut push = |axis, settings: CellSettings| {
            if settings != b && !cells.iter().any(|c| c.settings == settings) {
                cells.push(GridCell { axis, settings });
            }
        };
        for &v in &self.community_sizes {
            push(Axis::Community, CellSettings { community_size: v, ..b });
        }
        for &v in &self.train_months {
            push(Axis::TrainMonths, CellSettings { train_months: v, ..b });
        }
        for &v in &self.size_classes {
            push(Axis::Size, CellSettings { size_class: v, ..b });
        }
        for &v in &self.transfer_learning {
            push(Axis::TransferLearning, CellSettings { transfer_learning: v, ..b });
        }
        for &v in &self.quarters {
            push(Axis::Quarter, CellSettings { test_quarter: v, ..b });
        }
        cells
    }
}

/// One model evaluated on one repetition of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub cell: GridCell,
    pub repetition: usize,
    pub seed: u64,
    pub family: Family,
    /// Trainable parameters of deep models.
    pub param_count: Option<usize>,
    /// nMAE (%) over the test quarter; `None` when the cell failed.
    pub nmae: Option<f64>,
    pub per_day_nmae: Vec<f64>,
    pub train_seconds: f64,
    pub error: Option<String>,
}

/// Mean and sample sd of nMAE over the repetitions of a (cell, family) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub cell: GridCell,
    pub family: Family,
    pub runs: usize,
    pub failures: usize,
    pub mean_nmae: f64,
    pub sd_nmae: f64,
    pub mean_train_seconds: f64,
}

/// Groups records by cell and family, in cell order then family order.
pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<GridCell> = Vec::new();
    let mut groups: BTreeMap<(usize, Family), Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        let idx = match order.iter().position(|c| *c == r.cell) {
            Some(i) => i,
            None => {
                order.push(r.cell);
                order.len() - 1
            }
        };
        groups.entry((idx, r.family)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((idx, family), rs)| {
            let ok: Vec<f64> = rs.iter().filter_map(|r| r.nmae).collect();
            let secs: Vec<f64> = rs.iter().map(|r| r.train_seconds).collect();
            SummaryRow {
                cell: order[idx],
                family,
                runs: rs.len(),
                failures: rs.len() - ok.len(),
                mean_nmae: mean(&ok),
                sd_nmae: sample_sd(&ok),
                mean_train_seconds: mean(&secs),
            }
        })
        .collect()
}
