//! The joint e-value law under which e-LOND's FDR reaches `α Σ_{i≤t} γ_i`.
//!
//! With probability `αγ_t` exactly one e-value, `E_t = 1/(αγ_t)`, is nonzero;
//! otherwise all are zero. Truncating at the horizon puts the leftover mass on
//! the all-zero outcome, which can only lower the FDR.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{trial_rng, ProcedureRun, TrialOutput};
use crate::discount::DiscountSequence;
use crate::error::{Error, Result};
use crate::procedures::{run_stream, ProcedureKind};
use crate::types::Statistic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SharpnessScenario {
    pub alpha: f64,
    #[serde(default)]
    pub discount: DiscountSequence,
    pub horizon: usize,
}

impl Default for SharpnessScenario {
    fn default() -> Self {
        SharpnessScenario {
            alpha: 0.3,
            discount: DiscountSequence::Default,
            horizon: 9,
        }
    }
}

impl SharpnessScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) || self.horizon == 0 {
            return Err(Error::Config("sharpness needs α in (0, 1) and a positive horizon".into()));
        }
        self.discount.validate()
    }

    /// `α Σ_{i≤t} γ_i`, the FDR bound the construction attains.
    pub fn target_fdr(&self, t: usize) -> f64 {
        self.alpha * self.discount.partial_sum(t)
    }
}

/// Index of the drawn event: `Some(t)` for `ξ_t`, `None` for `ξ_0`.
pub fn draw_event(scenario: &SharpnessScenario, u: f64) -> Option<usize> {
    let mut acc = 0.0;
    for t in 1..=scenario.horizon {
        acc += scenario.alpha * scenario.discount.gamma(t);
        if u < acc {
            return Some(t);
        }
    }
    None
}

pub fn sharpness_evalues(scenario: &SharpnessScenario, event: Option<usize>) -> Vec<Statistic> {
    (1..=scenario.horizon)
        .map(|t| {
            Statistic::EValue(if Some(t) == event {
                1.0 / (scenario.alpha * scenario.discount.gamma(t))
            } else {
                0.0
            })
        })
        .collect()
}

/// e-LOND over one draw; every hypothesis is null.
pub fn run_sharpness_trial(scenario: &SharpnessScenario, seed: u64) -> Result<TrialOutput> {
    scenario.validate()?;
    let u: f64 = trial_rng(seed).random();
    let stats = sharpness_evalues(scenario, draw_event(scenario, u));
    let mut records = run_stream(ProcedureKind::ELond, scenario.alpha, &scenario.discount, &stats, None)?;
    for r in &mut records {
        r.is_null = Some(true);
    }
    Ok(vec![ProcedureRun {
        procedure: ProcedureKind::ELond.name().to_string(),
        records,
    }])
}
