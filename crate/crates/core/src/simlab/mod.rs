//! Scenario generators and Monte Carlo experiments.
//!
//! Every trial is a pure function of its scenario and a 64-bit seed; the
//! [`crate::runner`] derives per-trial seeds from a master seed.

pub mod copula;
pub mod covariate;
pub mod fcr;
pub mod local_dep;
pub mod marginal;
pub mod sharpness;
pub mod wor;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discount::DiscountSequence;
use crate::eprocess::{PValueSource, StoppedEvidence};
use crate::error::{Error, Result};
use crate::metrics::{monte_carlo_aggregate, TrialSummary};
use crate::procedures::{run_stream, ProcedureKind, LORD_STAR_DEFAULT_W0};
use crate::types::{DecisionRecord, GroundTruth, Statistic};
use crate::uniform::{DrawMode, UniformSource};

/// Settings shared by every procedure gated inside a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSettings {
    pub alpha: f64,
    pub discount: DiscountSequence,
    pub procedures: Vec<ProcedureKind>,
    #[serde(default)]
    pub p_value_source: PValueSource,
    #[serde(default)]
    pub draw_mode: DrawMode,
}

impl GateSettings {
    /// e-LOND, U-eLOND, r-LOND, Ur-LOND and LORD* with conflict lag `lag`.
    pub fn standard(alpha: f64, lag: usize) -> Self {
        GateSettings {
            alpha,
            discount: DiscountSequence::Default,
            procedures: standard_procedures(lag),
            p_value_source: PValueSource::default(),
            draw_mode: DrawMode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("α must lie in (0, 1), got {}", self.alpha)));
        }
        if self.procedures.is_empty() {
            return Err(Error::Config("no procedures selected".into()));
        }
        self.discount.validate()
    }
}

pub fn standard_procedures(lag: usize) -> Vec<ProcedureKind> {
    vec![
        ProcedureKind::ELond,
        ProcedureKind::UELond,
        ProcedureKind::RLond,
        ProcedureKind::UrLond,
        ProcedureKind::LordStar {
            w0: LORD_STAR_DEFAULT_W0,
            lag,
        },
    ]
}

/// Decisions of one procedure over one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureRun {
    pub procedure: String,
    pub records: Vec<DecisionRecord>,
}

/// All procedures' decisions for one trial, in configuration order.
pub type TrialOutput = Vec<ProcedureRun>;

pub(crate) fn trial_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws one uniform per hypothesis for the randomized procedures; every
/// randomized procedure in the trial sees the same draws.
pub(crate) fn procedure_uniforms(rng: &mut ChaCha8Rng, mode: DrawMode, horizon: usize) -> Vec<f64> {
    let mut src = UniformSource::new(rng.random(), mode);
    (0..horizon).map(|_| src.next_uniform()).collect()
}

/// Runs every configured procedure over a stream of statistics pairs:
/// e-value procedures see `e[t]`, p-value procedures see `p[t]`.
pub fn gate_statistics(
    e: &[Statistic],
    p: &[Statistic],
    truth: &GroundTruth,
    uniforms: &[f64],
    settings: &GateSettings,
) -> Result<TrialOutput> {
    settings
        .procedures
        .iter()
        .map(|&kind| {
            let stats = if kind.takes_e_values() { e } else { p };
            let u = kind.is_randomized().then_some(uniforms);
            let mut records = run_stream(kind, settings.alpha, &settings.discount, stats, u)?;
            for r in &mut records {
                r.is_null = Some(truth.is_null(r.index));
            }
            Ok(ProcedureRun {
                procedure: kind.name().to_string(),
                records,
            })
        })
        .collect()
}

/// [`gate_statistics`] over stopped e-process evidence.
pub fn gate_evidence(
    evidence: &[StoppedEvidence],
    truth: &GroundTruth,
    uniforms: &[f64],
    settings: &GateSettings,
) -> Result<TrialOutput> {
    let e: Vec<Statistic> = evidence.iter().map(StoppedEvidence::e_statistic).collect();
    let p: Vec<Statistic> = evidence.iter().map(|ev| ev.p_statistic(settings.p_value_source)).collect();
    gate_statistics(&e, &p, truth, uniforms, settings)
}

/// Per-procedure Monte Carlo summaries, in the order procedures appear.
pub fn summarize(trials: &[TrialOutput]) -> Result<Vec<(String, TrialSummary)>> {
    let first = trials
        .first()
        .ok_or_else(|| Error::Data("at least one trial is required".into()))?;
    first
        .iter()
        .enumerate()
        .map(|(k, run)| {
            let per_trial: Vec<Vec<DecisionRecord>> = trials
                .iter()
                .map(|trial| {
                    trial
                        .get(k)
                        .filter(|r| r.procedure == run.procedure)
                        .map(|r| r.records.clone())
                        .ok_or_else(|| Error::Data(format!("trial is missing procedure {}", run.procedure)))
                })
                .collect::<Result<_>>()?;
            Ok((run.procedure.clone(), monte_carlo_aggregate(&per_trial)?))
        })
        .collect()
}

/// `⌈π1·T⌉` non-null indices chosen uniformly without replacement.
pub(crate) fn random_null_pattern(rng: &mut ChaCha8Rng, horizon: usize, pi1: f64) -> Result<GroundTruth> {
    if !(0.0..=1.0).contains(&pi1) {
        return Err(Error::Config(format!("π1 must lie in [0, 1], got {pi1}")));
    }
    let k = ((pi1 * horizon as f64).ceil() as usize).min(horizon);
    let mut null = vec![true; horizon];
    for i in rand::seq::index::sample(rng, horizon, k) {
        null[i] = false;
    }
    Ok(GroundTruth::from_flags(&null))
}
