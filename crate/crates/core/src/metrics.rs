//! FDP, power and Monte Carlo aggregation over simulated trials.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DecisionRecord, GroundTruth};

/// `|R ∩ H0| / max(|R|, 1)`.
pub fn fdp(discoveries: &BTreeSet<usize>, truth: &GroundTruth) -> f64 {
    let false_discoveries = discoveries.iter().filter(|i| truth.is_null(**i)).count();
    false_discoveries as f64 / discoveries.len().max(1) as f64
}

/// `|R ∩ H1 ∩ [t]| / max(|H1 ∩ [t]|, 1)`.
pub fn power(discoveries: &BTreeSet<usize>, truth: &GroundTruth, horizon: usize) -> f64 {
    let non_nulls = (1..=horizon).filter(|t| !truth.is_null(*t)).count();
    let found = discoveries
        .range(1..=horizon)
        .filter(|i| !truth.is_null(**i))
        .count();
    found as f64 / non_nulls.max(1) as f64
}

/// Sample mean and standard error (`sample std / √n`, zero for `n = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanSe { mean: f64::NAN, se: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return MeanSe { mean, se: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        MeanSe {
            mean,
            se: (var / n as f64).sqrt(),
        }
    }
}

/// Running FDP and power after each step of one decision log. Every record must
/// carry its ground-truth flag.
pub fn trajectories(records: &[DecisionRecord]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut fdp_t = Vec::with_capacity(records.len());
    let mut power_t = Vec::with_capacity(records.len());
    let (mut rejected, mut false_rej, mut non_null, mut true_rej) = (0usize, 0usize, 0usize, 0usize);
    for r in records {
        let is_null = r
            .is_null
            .ok_or_else(|| Error::Data(format!("record {} has no ground-truth flag", r.index)))?;
        if !is_null {
            non_null += 1;
        }
        if r.rejected {
            rejected += 1;
            if is_null {
                false_rej += 1;
            } else {
                true_rej += 1;
            }
        }
        fdp_t.push(false_rej as f64 / rejected.max(1) as f64);
        power_t.push(true_rej as f64 / non_null.max(1) as f64);
    }
    Ok((fdp_t, power_t))
}

/// Monte Carlo summary over trials of equal horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub horizon: usize,
    /// Mean FDP at the final step (the empirical FDR).
    pub fdr: MeanSe,
    pub power: MeanSe,
    /// Per-step FDR, index `t - 1`.
    pub fdr_trajectory: Vec<MeanSe>,
    pub power_trajectory: Vec<MeanSe>,
}

impl TrialSummary {
    /// Empirical FDR at step `t` (1-based).
    pub fn fdr_at(&self, t: usize) -> MeanSe {
        self.fdr_trajectory[t - 1]
    }

    pub fn power_at(&self, t: usize) -> MeanSe {
        self.power_trajectory[t - 1]
    }
}

pub fn monte_carlo_aggregate(trials: &[Vec<DecisionRecord>]) -> Result<TrialSummary> {
    let first = trials
        .first()
        .ok_or_else(|| Error::Data("at least one trial is required".into()))?;
    let horizon = first.len();
    if horizon == 0 {
        return Err(Error::Data("trials must have a positive horizon".into()));
    }
    let mut fdp_cols = vec![Vec::with_capacity(trials.len()); horizon];
    let mut pow_cols = vec![Vec::with_capacity(trials.len()); horizon];
    for (k, trial) in trials.iter().enumerate() {
        if trial.len() != horizon {
            return Err(Error::Data(format!(
                "trial {k} has horizon {} but trial 0 has {horizon}",
                trial.len()
            )));
        }
        let (f, p) = trajectories(trial)?;
        for t in 0..horizon {
            fdp_cols[t].push(f[t]);
            pow_cols[t].push(p[t]);
        }
    }
    let fdr_trajectory: Vec<MeanSe> = fdp_cols.iter().map(|c| MeanSe::of(c)).collect();
    let power_trajectory: Vec<MeanSe> = pow_cols.iter().map(|c| MeanSe::of(c)).collect();
    Ok(TrialSummary {
        trials: trials.len(),
        horizon,
        fdr: fdr_trajectory[horizon - 1],
        power: power_trajectory[horizon - 1],
        fdr_trajectory,
        power_trajectory,
    })
}
