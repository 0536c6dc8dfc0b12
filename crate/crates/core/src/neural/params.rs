use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

pub const CHECKPOINT_HEADER: &str = "#ecload-checkpoint,v1";

/// Named, ordered trainable tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a tensor and returns its index.
    pub fn push(&mut self, name: impl Into<String>, value: Tensor) -> usize {
        self.entries.push((name.into(), value));
        self.entries.len() - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensor(&self, i: usize) -> &Tensor {
        &self.entries[i].1
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.entries[i].1
    }

    pub fn name(&self, i: usize) -> &str {
        &self.entries[i].0
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Total number of trainable scalars.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Registers every tensor as a trainable leaf of `graph`.
    pub fn bind(&self, graph: &mut Graph) -> Vec<Var> {
        self.entries.iter().map(|(_, t)| graph.param(t.clone())).collect()
    }

    /// Registers every tensor as a constant (inference only).
    pub fn bind_frozen(&self, graph: &mut Graph) -> Vec<Var> {
        self.entries.iter().map(|(_, t)| graph.constant(t.clone())).collect()
    }

    /// Same names and shapes, in the same order.
    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((a, ta), (b, tb))| a == b && ta.shape() == tb.shape())
    }

    /// Text checkpoint: header, `@key,value` metadata rows, then one
    /// `name,shape,values` row per tensor (shape as `2x3`, values space separated).
    pub fn to_checkpoint(&self, meta: &[(String, String)]) -> String {
        let mut out = String::new();
        out.push_str(CHECKPOINT_HEADER);
        out.push('\n');
        for (k, v) in meta {
            let _ = writeln!(out, "@{k},{v}");
        }
        for (name, t) in &self.entries {
            let shape: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            let values: Vec<String> = t.data().iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{name},{},{}", shape.join("x"), values.join(" "));
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<(ParamSet, Vec<(String, String)>)> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == CHECKPOINT_HEADER => {}
            _ => return Err(Error::Checkpoint(format!("missing header {CHECKPOINT_HEADER}"))),
        }
        let bad = |line: usize, msg: &str| Error::Checkpoint(format!("line {}: {msg}", line + 1));
        let mut meta = Vec::new();
        let mut params = ParamSet::new();
        for (i, line) in lines {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('@') {
                let (k, v) = rest.split_once(',').ok_or_else(|| bad(i, "metadata row needs key,value"))?;
                meta.push((k.to_string(), v.to_string()));
                continue;
            }
            let mut parts = line.splitn(3, ',');
            let (Some(name), Some(shape), Some(values)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad(i, "expected name,shape,values"));
            };
            let shape: Vec<usize> = if shape.is_empty() {
                Vec::new()
            } else {
                shape
                    .split('x')
                    .map(|d| d.parse().map_err(|_| bad(i, "invalid shape")))
                    .collect::<Result<_>>()?
            };
            let data: Vec<f64> = values
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| bad(i, "invalid value")))
                .collect::<Result<_>>()?;
            let t = Tensor::new(shape, data).map_err(|_| bad(i, "value count does not match shape"))?;
            params.push(name, t);
        }
        Ok((params, meta))
    }
}
