//! Synthetic covariate shift for weighted conformal selection.
//!
//! Covariates are standard Gaussian, `Y = xᵀβ + ε`. Calibration units are the
//! Gaussian draws kept with probability `p(x) = sigmoid(xᵀη) ∧ cap`, so the
//! test-to-calibration likelihood ratio is proportional to `w(x) = 1/p(x)`.
//! Scores are residuals of a deliberately imperfect fit, `V(x, y) = y - xᵀβ̂`.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::local_dep::UNIFORM_STREAM;
use super::{gate_statistics, procedure_uniforms, trial_rng, GateSettings, TrialOutput};
use crate::error::{Error, Result};
use crate::types::{GroundTruth, Statistic};
use crate::wcs::{wcs_stream_evidence, CalibrationSet, TestPoint, WcsEvidence};

/// Scale of the jitter that keeps scores tie-free.
pub const SCORE_JITTER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovariateShiftScenario {
    pub calibration: usize,
    pub horizon: usize,
    pub beta: Vec<f64>,
    /// Coefficients used by the score's fitted model.
    pub beta_hat: Vec<f64>,
    pub noise_sd: f64,
    /// Calibration selection tilt `η`.
    pub tilt: Vec<f64>,
    pub cap: f64,
    pub threshold: f64,
    /// Thresholds are `threshold + threshold_sd·Z` with independent standard normal `Z`.
    #[serde(default)]
    pub threshold_sd: f64,
    /// Stress mode: every threshold equals its own label, `c = Y`, so every
    /// test point is a null on the boundary and the joint bounds are tight.
    #[serde(default)]
    pub threshold_at_label: bool,
}

impl Default for CovariateShiftScenario {
    fn default() -> Self {
        CovariateShiftScenario {
            calibration: 500,
            horizon: 100,
            beta: vec![2.0, 1.0],
            beta_hat: vec![1.8, 1.1],
            noise_sd: 1.0,
            tilt: vec![-1.0, 0.5],
            cap: 0.8,
            threshold: 1.5,
            threshold_sd: 0.0,
            threshold_at_label: false,
        }
    }
}

impl CovariateShiftScenario {
    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || self.beta_hat.len() != d || self.tilt.len() != d {
            return Err(Error::Config("beta, beta_hat and tilt need one equal, positive dimension".into()));
        }
        if self.calibration == 0 || self.horizon == 0 {
            return Err(Error::Config("calibration and horizon sizes must be positive".into()));
        }
        if !(self.noise_sd > 0.0) || !(self.cap > 0.0 && self.cap <= 1.0) || !(self.threshold_sd >= 0.0) {
            return Err(Error::Config("noise_sd must be positive, threshold_sd nonnegative and cap in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn inclusion_probability(&self, x: &[f64]) -> f64 {
        let z: f64 = x.iter().zip(&self.tilt).map(|(a, b)| a * b).sum();
        (1.0 / (1.0 + (-z).exp())).min(self.cap)
    }

    pub fn weight(&self, x: &[f64]) -> f64 {
        1.0 / self.inclusion_probability(x)
    }

    fn dot(x: &[f64], b: &[f64]) -> f64 {
        x.iter().zip(b).map(|(a, c)| a * c).sum()
    }

    /// `V(x, y)`, nondecreasing in `y`.
    pub fn score(&self, x: &[f64], y: f64) -> f64 {
        y - Self::dot(x, &self.beta_hat)
    }
}

/// Calibration set and labelled test stream of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateShiftData {
    pub calibration: CalibrationSet,
    pub points: Vec<TestPoint>,
}

impl CovariateShiftData {
    pub fn truth(&self) -> GroundTruth {
        let flags: Vec<bool> = self.points.iter().map(|p| p.is_null().unwrap_or(true)).collect();
        GroundTruth::from_flags(&flags)
    }
}

pub fn gen_covariate_shift(scenario: &CovariateShiftScenario, seed: u64) -> Result<CovariateShiftData> {
    scenario.validate()?;
    let mut rng = trial_rng(seed);
    let noise = Normal::new(0.0, scenario.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    let d = scenario.dim();
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let y = CovariateShiftScenario::dot(&x, &scenario.beta) + noise.sample(rng);
        (x, y)
    };
    let jitter = |rng: &mut rand_chacha::ChaCha8Rng| SCORE_JITTER * (rng.random::<f64>() - 0.5);
    let (mut scores, mut weights) = (Vec::new(), Vec::new());
    while scores.len() < scenario.calibration {
        let (x, y) = draw(&mut rng);
        let p = scenario.inclusion_probability(&x);
        if rng.random::<f64>() < p {
            scores.push(scenario.score(&x, y) + jitter(&mut rng));
            weights.push(1.0 / p);
        }
    }
    let points = (0..scenario.horizon)
        .map(|_| {
            let (x, y) = draw(&mut rng);
            let z: f64 = StandardNormal.sample(&mut rng);
            let c = if scenario.threshold_at_label {
                y
            } else {
                scenario.threshold + scenario.threshold_sd * z
            };
            TestPoint {
                score_hat: scenario.score(&x, c) + jitter(&mut rng),
                weight: scenario.weight(&x),
                threshold: c,
                y: Some(y),
            }
        })
        .collect();
    Ok(CovariateShiftData {
        calibration: CalibrationSet::new(scores, weights)?,
        points,
    })
}

/// Data, per-point evidence, and the gated decisions of one trial.
pub fn run_wcs_trial(
    scenario: &CovariateShiftScenario,
    settings: &GateSettings,
    seed: u64,
) -> Result<(TrialOutput, CovariateShiftData, Vec<WcsEvidence>)> {
    let data = gen_covariate_shift(scenario, seed)?;
    let evidence = wcs_stream_evidence(&data.calibration, &data.points, settings.alpha, &settings.discount)?;
    let e: Vec<Statistic> = evidence.iter().map(|ev| Statistic::EValue(ev.e_value)).collect();
    let p: Vec<Statistic> = evidence.iter().map(|ev| Statistic::PValue(ev.p_value)).collect();
    let uniforms = procedure_uniforms(&mut trial_rng(seed ^ UNIFORM_STREAM), settings.draw_mode, scenario.horizon);
    let out = gate_statistics(&e, &p, &data.truth(), &uniforms, settings)?;
    Ok((out, data, evidence))
}
