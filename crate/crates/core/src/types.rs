//! Shared domain types: evidence statistics, test levels and decision records.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-hypothesis evidence: an e-value in `[0, ∞]` or a p-value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Statistic {
    EValue(f64),
    PValue(f64),
}

impl Statistic {
    pub fn e_value(value: f64) -> Result<Self> {
        if value.is_nan() || value < 0.0 {
            return Err(Error::InvalidStatistic(format!("e-value must be in [0, ∞], got {value}")));
        }
        Ok(Statistic::EValue(value))
    }

    pub fn p_value(value: f64) -> Result<Self> {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidStatistic(format!("p-value must be in [0, 1], got {value}")));
        }
        Ok(Statistic::PValue(value))
    }

    pub fn value(&self) -> f64 {
        match *self {
            Statistic::EValue(v) | Statistic::PValue(v) => v,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Statistic::EValue(_) => "e-value",
            Statistic::PValue(_) => "p-value",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Statistic::EValue(v) => Self::e_value(v).map(|_| ()),
            Statistic::PValue(v) => Self::p_value(v).map(|_| ()),
        }
    }
}

/// Per-hypothesis threshold `α_t ≥ 0`. Randomized procedures may produce
/// levels above one.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TestLevel(f64);

impl TestLevel {
    pub fn new(alpha_t: f64) -> Result<Self> {
        if alpha_t.is_nan() || alpha_t < 0.0 {
            return Err(Error::Domain(format!("test level must be ≥ 0, got {alpha_t}")));
        }
        Ok(TestLevel(alpha_t))
    }

    /// Clamps negative inputs to zero.
    pub(crate) fn clamped(alpha_t: f64) -> Self {
        TestLevel(if alpha_t > 0.0 { alpha_t } else { 0.0 })
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// `E ≥ 1/α` (with `1/0 = ∞`) for e-values, `P ≤ α` for p-values.
    pub fn rejects(self, statistic: Statistic) -> bool {
        match statistic {
            Statistic::EValue(e) => {
                if self.0 == 0.0 {
                    e == f64::INFINITY
                } else {
                    e >= 1.0 / self.0
                }
            }
            Statistic::PValue(p) => p <= self.0,
        }
    }
}

/// One row of a procedure's decision log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    /// 1-based hypothesis index.
    pub index: usize,
    pub level: TestLevel,
    pub statistic: Statistic,
    pub rejected: bool,
    pub uniform_draw: Option<f64>,
    pub is_null: Option<bool>,
}

/// The set of truly null hypotheses of a simulated stream.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub null_set: BTreeSet<usize>,
}

impl GroundTruth {
    pub fn new(null_set: impl IntoIterator<Item = usize>) -> Self {
        GroundTruth {
            null_set: null_set.into_iter().collect(),
        }
    }

    /// Builds the truth from a per-hypothesis null flag, index `i` ↦ hypothesis `i + 1`.
    pub fn from_flags(flags: &[bool]) -> Self {
        Self::new(flags.iter().enumerate().filter(|(_, &n)| n).map(|(i, _)| i + 1))
    }

    pub fn is_null(&self, t: usize) -> bool {
        self.null_set.contains(&t)
    }
}

/// Discovery set of a decision log.
pub fn discoveries(records: &[DecisionRecord]) -> BTreeSet<usize> {
    records.iter().filter(|r| r.rejected).map(|r| r.index).collect()
}
