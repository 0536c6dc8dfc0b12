use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::arch::{Architecture, LstmArch, TransformerArch, XlstmArch};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Persistence,
    Knn,
    Lstm,
    Transformer,
    Xlstm,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Persistence, Family::Knn, Family::Lstm, Family::Transformer, Family::Xlstm];
    pub const DEEP: [Family; 3] = [Family::Lstm, Family::Transformer, Family::Xlstm];

    pub fn name(self) -> &'static str {
        match self {
            Family::Persistence => "persistence",
            Family::Knn => "knn",
            Family::Lstm => "lstm",
            Family::Transformer => "transformer",
            Family::Xlstm => "xlstm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model family '{s}'")))
    }

    pub fn is_deep(self) -> bool {
        Family::DEEP.contains(&self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SizeClass {
    K0_1,
    K0_2,
    K0_5,
    K5,
    K20,
    K40,
    K80,
}

impl SizeClass {
    pub const ALL: [SizeClass; 7] = [
        SizeClass::K0_1,
        SizeClass::K0_2,
        SizeClass::K0_5,
        SizeClass::K5,
        SizeClass::K20,
        SizeClass::K40,
        SizeClass::K80,
    ];

    /// Nominal parameter count.
    pub fn target(self) -> usize {
        match self {
            SizeClass::K0_1 => 100,
            SizeClass::K0_2 => 200,
            SizeClass::K0_5 => 500,
            SizeClass::K5 => 5_000,
            SizeClass::K20 => 20_000,
            SizeClass::K40 => 40_000,
            SizeClass::K80 => 80_000,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SizeClass::K0_1 => "0.1k",
            SizeClass::K0_2 => "0.2k",
            SizeClass::K0_5 => "0.5k",
            SizeClass::K5 => "5k",
            SizeClass::K20 => "20k",
            SizeClass::K40 => "40k",
            SizeClass::K80 => "80k",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        SizeClass::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown size class '{s}'")))
    }
}

/// Tolerance of a realized parameter count around its size class.
pub const SIZE_BAND: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelPreset {
    pub family: Family,
    pub size: SizeClass,
    pub arch: Architecture,
}

impl ModelPreset {
    /// The published configuration for a deep family and size class.
    pub fn table(family: Family, size: SizeClass) -> Result<Self> {
        use SizeClass::*;
        let arch = match family {
            Family::Lstm => {
                let (l1, l2, bi, d1, d2) = match size {
                    K0_1 => (1, 1, false, 4, 4),
                    K0_2 => (1, 1, true, 4, 4),
                    K0_5 => (2, 2, true, 5, 5),
                    K5 => (8, 9, true, 30, 20),
                    K20 => (22, 20, true, 30, 20),
                    K40 => (42, 20, true, 30, 20),
                    K80 => (70, 21, true, 30, 20),
                };
                Architecture::Lstm(LstmArch {
                    layers: vec![(l1, bi), (l2, bi)],
                    dense: vec![d1, d2],
                })
            }
            Family::Transformer => {
                let (layers, heads, ff, d) = match size {
                    K0_1 => (1, 2, 5, 2),
                    K0_2 => (1, 2, 5, 4),
                    K0_5 => (1, 2, 6, 6),
                    K5 => (1, 4, 90, 20),
                    K20 => (1, 4, 400, 20),
                    K40 => (1, 4, 400, 40),
                    K80 => (2, 8, 400, 40),
                };
                Architecture::Transformer(TransformerArch { d, heads, ff, layers })
            }
            Family::Xlstm => {
                let (blocks, heads, d, slstm_at) = match size {
                    K0_1 | K0_2 => (1, 1, 1, 0),
                    K0_5 => (1, 2, 2, 0),
                    K5 => (2, 4, 8, 1),
                    K20 => (2, 4, 32, 1),
                    K40 => (4, 4, 32, 1),
                    K80 => (4, 8, 40, 1),
                };
                Architecture::Xlstm(XlstmArch {
                    blocks,
                    heads,
                    d,
                    slstm_at: vec![slstm_at],
                })
            }
            Family::Persistence | Family::Knn => {
                return Err(Error::InvalidArgument(format!("{} has no size presets", family.name())))
            }
        };
        Ok(ModelPreset { family, size, arch })
    }

    /// Every published deep configuration, family-major.
    pub fn all() -> Vec<ModelPreset> {
        Family::DEEP
            .iter()
            .flat_map(|&f| SizeClass::ALL.iter().map(move |&s| ModelPreset::table(f, s).unwrap()))
            .collect()
    }

    pub fn count_params(&self) -> usize {
        self.arch.count_params()
    }

    /// Signed deviation of the realized count from the nominal size.
    pub fn size_deviation(&self) -> f64 {
        let t = self.size.target() as f64;
        (self.count_params() as f64 - t) / t
    }

    pub fn within_size_band(&self) -> bool {
        self.size_deviation().abs() <= SIZE_BAND + 1e-12
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.family.name(), self.size.label())
    }
}
