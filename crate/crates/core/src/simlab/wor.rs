//! Hypotheses whose samples are drawn without replacement from two shared
//! finite populations.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::local_dep::UNIFORM_STREAM;
use super::marginal::ScaledBeta;
use super::{gate_evidence, procedure_uniforms, random_null_pattern, trial_rng, GateSettings, TrialOutput};
use crate::eprocess::{independent_stopping_run, EProcessKind, StoppingConfig};
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorScenario {
    pub horizon: usize,
    /// Samples drawn per hypothesis; each population holds `samples·horizon` values.
    pub samples: usize,
    pub mu0: f64,
    pub mu1: f64,
    pub pi1: f64,
    /// Variance scaling factor `s`, the `a + b` of the Beta quantile grid.
    pub s: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Default for WorScenario {
    fn default() -> Self {
        WorScenario {
            horizon: 200,
            samples: 200,
            mu0: 0.0,
            mu1: 2.0,
            pi1: 0.5,
            s: 0.01,
            lower: -4.0,
            upper: 4.0,
        }
    }
}

impl WorScenario {
    pub fn population_size(&self) -> usize {
        self.samples * self.horizon
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.samples == 0 {
            return Err(Error::Config("horizon and samples must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.pi1) {
            return Err(Error::Config(format!("π1 must lie in [0, 1], got {}", self.pi1)));
        }
        Ok(())
    }
}

/// `size` values with mean exactly `mu`: the scaled Beta quantiles at the grid
/// midpoints `(k + ½)/size`, after shifting the values on one side of `mu`
/// towards it by a common amount to remove the grid's mean error.
pub fn gen_wor_population(mu: f64, s: f64, size: usize, lower: f64, upper: f64) -> Result<Vec<f64>> {
    if size == 0 {
        return domain("population size must be positive");
    }
    let law = ScaledBeta::new(mu, s, lower, upper)?;
    let mut values: Vec<f64> = (0..size)
        .map(|k| law.quantile((k as f64 + 0.5) / size as f64))
        .collect();
    let excess = values.iter().sum::<f64>() - mu * size as f64;
    if excess != 0.0 {
        // too high: pull the values above mu down; too low: push the values below up
        let side = |x: f64| if excess > 0.0 { x > mu } else { x < mu };
        let count = values.iter().filter(|&&x| side(x)).count();
        if count == 0 {
            return domain("population mean cannot be corrected");
        }
        let delta = excess / count as f64;
        for x in values.iter_mut().filter(|x| side(**x)) {
            let moved = *x - delta;
            if (excess > 0.0 && moved < mu) || (excess < 0.0 && moved > mu) {
                return domain(format!("mean correction {delta} overshoots μ = {mu}"));
            }
            *x = moved;
        }
    }
    Ok(values)
}

/// The null and non-null populations of a scenario, built once and shared by trials.
#[derive(Debug, Clone, PartialEq)]
pub struct WorPopulations {
    pub null: Vec<f64>,
    pub alternative: Vec<f64>,
}

impl WorPopulations {
    pub fn build(scenario: &WorScenario) -> Result<Self> {
        scenario.validate()?;
        let size = scenario.population_size();
        Ok(WorPopulations {
            null: gen_wor_population(scenario.mu0, scenario.s, size, scenario.lower, scenario.upper)?,
            alternative: gen_wor_population(scenario.mu1, scenario.s, size, scenario.lower, scenario.upper)?,
        })
    }
}

/// One trial: a uniform permutation `σ` of the population indices; hypothesis
/// `t` reads the `t`-th block of `N` entries of `σ` from the null or non-null
/// population. WoR e-processes stop at the first crossing of `1/(αγ_t)`.
pub fn run_wor_trial(
    scenario: &WorScenario,
    populations: &WorPopulations,
    settings: &GateSettings,
    seed: u64,
) -> Result<TrialOutput> {
    let mut rng = trial_rng(seed);
    let truth = random_null_pattern(&mut rng, scenario.horizon, scenario.pi1)?;
    let mut sigma: Vec<usize> = (0..scenario.population_size()).collect();
    sigma.shuffle(&mut rng);
    let n = scenario.samples;
    let streams: Vec<Vec<f64>> = (1..=scenario.horizon)
        .map(|t| {
            let pop = if truth.is_null(t) { &populations.null } else { &populations.alternative };
            sigma[(t - 1) * n..t * n].iter().map(|&k| pop[k]).collect()
        })
        .collect();
    let cfg = StoppingConfig {
        alpha: settings.alpha,
        discount: settings.discount.clone(),
        lower: scenario.lower,
        upper: scenario.upper,
        kind: EProcessKind::Wor {
            population: scenario.population_size(),
        },
    };
    let evidence = independent_stopping_run(&streams, &cfg)?;
    let mut urng = trial_rng(seed ^ UNIFORM_STREAM);
    let uniforms = procedure_uniforms(&mut urng, settings.draw_mode, scenario.horizon);
    gate_evidence(&evidence, &truth, &uniforms, settings)
}
