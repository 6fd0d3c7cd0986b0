//! Selective confidence intervals over copula-dependent data with a
//! data-snooping selection rule.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::local_dep::{copula_samples, UNIFORM_STREAM};
use super::{procedure_uniforms, trial_rng, ProcedureRun, TrialOutput};
use crate::discount::DiscountSequence;
use crate::error::{Error, Result};
use crate::selective::{CiSession, CiVariant, EConfidenceFamily, HoeffdingMeanFamily, SelectionHistory, SelectionLog};
use crate::types::{DecisionRecord, Statistic, TestLevel};
use crate::uniform::DrawMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FcrScenario {
    pub horizon: usize,
    pub samples: usize,
    pub lag: usize,
    /// True means are drawn uniformly from `[theta_min, theta_max]`.
    pub theta_min: f64,
    pub theta_max: f64,
    pub lower: f64,
    pub upper: f64,
    pub concentration: f64,
    /// Select `θ_t` iff the current sample mean exceeds this quantile of the
    /// earlier sample means.
    pub selection_quantile: f64,
    /// Level the e-CI bet is tuned for; fixed so intervals nest across levels.
    pub design_alpha: f64,
}

impl Default for FcrScenario {
    fn default() -> Self {
        FcrScenario {
            horizon: 100,
            samples: 50,
            lag: 5,
            theta_min: -2.0,
            theta_max: 2.0,
            lower: -4.0,
            upper: 4.0,
            concentration: 0.01,
            selection_quantile: 0.5,
            design_alpha: 0.01,
        }
    }
}

impl FcrScenario {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.samples == 0 {
            return Err(Error::Config("horizon and samples must be positive".into()));
        }
        if !(self.lower < self.theta_min && self.theta_min <= self.theta_max && self.theta_max < self.upper) {
            return Err(Error::Config("true means must lie strictly inside the support".into()));
        }
        if !(0.0..=1.0).contains(&self.selection_quantile) {
            return Err(Error::Config("selection quantile must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn family(&self) -> Result<HoeffdingMeanFamily> {
        HoeffdingMeanFamily::tuned(self.lower, self.upper, self.samples, self.design_alpha)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Selects when the current sample mean beats the given empirical quantile of
/// all earlier sample means; always selects the first hypothesis.
pub fn quantile_rule(q: f64) -> impl FnMut(&[f64], &SelectionHistory) -> bool {
    move |data: &[f64], history: &SelectionHistory| {
        if history.data.is_empty() {
            return true;
        }
        let mut past: Vec<f64> = history.data.iter().map(|d| mean(d)).collect();
        past.sort_by(f64::total_cmp);
        let k = ((q * past.len() as f64).ceil() as usize).clamp(1, past.len()) - 1;
        mean(data) > past[k]
    }
}

/// Data and true means for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct FcrData {
    pub samples: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
}

pub fn gen_fcr(scenario: &FcrScenario, seed: u64) -> Result<FcrData> {
    scenario.validate()?;
    let mut rng = trial_rng(seed);
    let theta: Vec<f64> = (0..scenario.horizon)
        .map(|_| rng.random_range(scenario.theta_min..=scenario.theta_max))
        .collect();
    let samples = copula_samples(
        &mut rng,
        &theta,
        scenario.samples,
        scenario.lag,
        scenario.concentration,
        scenario.lower,
        scenario.upper,
    )?;
    Ok(FcrData { samples, theta })
}

/// One variant's run: the selection log with coverage marked, and per-step
/// records in FDR form. Record `t` carries `E_{θ_t}(X_t)`, `rejected` means
/// selected, and `is_null` means `θ_t` falls outside the interval at level
/// `α_t`, so the FDP of the records is the FCP of the selections.
pub fn run_ci_variant(
    scenario: &FcrScenario,
    data: &FcrData,
    variant: CiVariant,
    alpha: f64,
    discount: &DiscountSequence,
    uniforms: &[f64],
) -> Result<(SelectionLog, Vec<DecisionRecord>)> {
    let family = scenario.family()?;
    let mut session = CiSession::new(variant, alpha, discount.clone())?;
    let mut rule = quantile_rule(scenario.selection_quantile);
    let mut records = Vec::with_capacity(data.samples.len());
    for (k, x) in data.samples.iter().enumerate() {
        let u = (variant == CiVariant::UELondCi).then(|| uniforms[k]);
        let out = session.step(x.clone(), &mut rule, &family, u)?;
        let theta = data.theta[k];
        let miss = match out.interval {
            Some(iv) => !iv.contains(theta),
            None => !family.contains(x, theta, out.level)?,
        };
        records.push(DecisionRecord {
            index: out.index,
            level: TestLevel::new(out.level)?,
            statistic: Statistic::EValue(family.e_value(x, theta)?),
            rejected: out.selected,
            uniform_draw: u,
            is_null: Some(miss),
        });
    }
    let mut log = session.into_log();
    log.mark_coverage(&data.theta);
    Ok((log, records))
}

/// e-LOND-CI then U-eLOND-CI on the same data.
pub fn run_fcr_trial(
    scenario: &FcrScenario,
    alpha: f64,
    discount: &DiscountSequence,
    draw_mode: DrawMode,
    seed: u64,
) -> Result<(TrialOutput, Vec<SelectionLog>)> {
    let data = gen_fcr(scenario, seed)?;
    let uniforms = procedure_uniforms(&mut trial_rng(seed ^ UNIFORM_STREAM), draw_mode, scenario.horizon);
    let mut runs = Vec::new();
    let mut logs = Vec::new();
    for (variant, name) in [(CiVariant::ELondCi, "e-LOND-CI"), (CiVariant::UELondCi, "U-eLOND-CI")] {
        let (log, records) = run_ci_variant(scenario, &data, variant, alpha, discount, &uniforms)?;
        runs.push(ProcedureRun {
            procedure: name.to_string(),
            records,
        });
        logs.push(log);
    }
    Ok((runs, logs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::fdp;
    use crate::selective::fcp;
    use crate::types::{discoveries, GroundTruth};

    fn small() -> FcrScenario {
        FcrScenario {
            horizon: 20,
            ..Default::default()
        }
    }

    #[test]
    fn record_fdp_matches_selection_fcp() {
        let sc = small();
        for seed in 0..20 {
            let (runs, logs) = run_fcr_trial(&sc, 0.1, &DiscountSequence::Default, DrawMode::Independent, seed).unwrap();
            let data = gen_fcr(&sc, seed).unwrap();
            for (run, log) in runs.iter().zip(&logs) {
                let flags: Vec<bool> = run.records.iter().map(|r| r.is_null.unwrap()).collect();
                let truth = GroundTruth::from_flags(&flags);
                assert_eq!(fdp(&discoveries(&run.records), &truth), fcp(log, &data.theta));
            }
        }
    }

    #[test]
    fn selections_ignore_alpha() {
        let sc = small();
        let d = DiscountSequence::Default;
        let (_, a) = run_fcr_trial(&sc, 0.1, &d, DrawMode::Independent, 5).unwrap();
        let (_, b) = run_fcr_trial(&sc, 0.05, &d, DrawMode::Independent, 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.selected(), y.selected());
        }
    }

    #[test]
    fn quantile_rule_compares_against_history() {
        let mut rule = quantile_rule(0.5);
        let mut h = SelectionHistory::default();
        assert!(rule(&[0.0], &h));
        h.data = vec![vec![1.0], vec![2.0], vec![3.0]];
        assert!(rule(&[2.5], &h));
        assert!(!rule(&[2.0], &h));
    }
}
