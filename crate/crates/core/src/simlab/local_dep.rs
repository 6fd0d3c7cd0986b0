//! Hypotheses whose sample streams are coupled by a banded Gaussian copula.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::copula::banded_factor;
use super::marginal::ScaledBeta;
use super::{gate_evidence, procedure_uniforms, random_null_pattern, trial_rng, GateSettings, TrialOutput};
use crate::eprocess::{coupled_stopping_run, EProcessKind, StoppingConfig};
use crate::error::{Error, Result};
use crate::types::GroundTruth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalDepScenario {
    pub horizon: usize,
    /// Samples per hypothesis.
    pub samples: usize,
    pub lag: usize,
    pub mu0: f64,
    pub mu1: f64,
    /// Fraction of non-null hypotheses.
    pub pi1: f64,
    pub lower: f64,
    pub upper: f64,
    /// `a + b` of the Beta marginal.
    pub concentration: f64,
}

impl Default for LocalDepScenario {
    fn default() -> Self {
        LocalDepScenario {
            horizon: 200,
            samples: 200,
            lag: 0,
            mu0: 0.0,
            mu1: 3.0,
            pi1: 0.5,
            lower: -4.0,
            upper: 4.0,
            concentration: 0.01,
        }
    }
}

impl LocalDepScenario {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.samples == 0 {
            return Err(Error::Config("horizon and samples must be positive".into()));
        }
        for mu in [self.mu0, self.mu1] {
            ScaledBeta::new(mu, self.concentration, self.lower, self.upper)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        if !(0.0..=1.0).contains(&self.pi1) {
            return Err(Error::Config(format!("π1 must lie in [0, 1], got {}", self.pi1)));
        }
        Ok(())
    }
}

/// Sample streams, `samples[t-1][i-1] = X_t^i`, and which hypotheses are null.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDepData {
    pub samples: Vec<Vec<f64>>,
    pub truth: GroundTruth,
}

/// Copula draws with per-hypothesis marginal means `means[t-1]`: for each
/// sample index a correlated Gaussian vector over hypotheses, pushed through
/// `Φ` and the marginal quantile function.
pub fn copula_samples(
    rng: &mut impl rand::Rng,
    means: &[f64],
    samples: usize,
    lag: usize,
    concentration: f64,
    lower: f64,
    upper: f64,
) -> Result<Vec<Vec<f64>>> {
    let dim = means.len();
    let factor = banded_factor(dim, lag);
    let normal = Normal::standard();
    let g = DMatrix::<f64>::from_fn(dim, samples, |_, _| StandardNormal.sample(rng));
    let z = &*factor * g;
    let mut marginals: Vec<(f64, ScaledBeta)> = Vec::new();
    means
        .iter()
        .enumerate()
        .map(|(t, &mu)| {
            let idx = match marginals.iter().position(|(m, _)| *m == mu) {
                Some(i) => i,
                None => {
                    marginals.push((mu, ScaledBeta::new(mu, concentration, lower, upper)?));
                    marginals.len() - 1
                }
            };
            let m = &marginals[idx].1;
            Ok(z.row(t).iter().map(|&v| m.quantile(normal.cdf(v))).collect())
        })
        .collect()
}

pub fn gen_local_dep(scenario: &LocalDepScenario, seed: u64) -> Result<LocalDepData> {
    scenario.validate()?;
    let mut rng = trial_rng(seed);
    let truth = random_null_pattern(&mut rng, scenario.horizon, scenario.pi1)?;
    let means: Vec<f64> = (1..=scenario.horizon)
        .map(|t| if truth.is_null(t) { scenario.mu0 } else { scenario.mu1 })
        .collect();
    let samples = copula_samples(
        &mut rng,
        &means,
        scenario.samples,
        scenario.lag,
        scenario.concentration,
        scenario.lower,
        scenario.upper,
    )?;
    Ok(LocalDepData { samples, truth })
}

/// One trial: Hoeffding e-processes stopped by the e-LOND-coupled rule, then
/// every configured procedure on the resulting e-values or p-values.
pub fn run_local_dep_trial(scenario: &LocalDepScenario, settings: &GateSettings, seed: u64) -> Result<TrialOutput> {
    let data = gen_local_dep(scenario, seed)?;
    let cfg = StoppingConfig {
        alpha: settings.alpha,
        discount: settings.discount.clone(),
        lower: scenario.lower,
        upper: scenario.upper,
        kind: EProcessKind::Hoeffding,
    };
    let evidence = coupled_stopping_run(&data.samples, &cfg)?;
    let mut rng = trial_rng(seed ^ UNIFORM_STREAM);
    let uniforms = procedure_uniforms(&mut rng, settings.draw_mode, scenario.horizon);
    gate_evidence(&evidence, &data.truth, &uniforms, settings)
}

/// Separates the procedures' uniform stream from the data stream.
pub(crate) const UNIFORM_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;
