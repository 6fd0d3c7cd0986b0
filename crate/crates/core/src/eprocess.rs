//! Sequential evidence for bounded means: the Hoeffding e-process, its
//! sampling-without-replacement variant, and stopping rules that turn a
//! wealth path into an e-value and a p-value.
//!
//! Wealth is kept in log space. The Hoeffding increment is
//! `λx - (λ(u-ℓ))²/8`; the WoR increment adds the running adjustment
//! `μ^{j-1}(0) = Σ_{k<j} X_k / (N - j + 2)` inside the `λ` multiplier.

use serde::{Deserialize, Serialize};

use crate::discount::DiscountSequence;
use crate::error::{domain, Error, Result};
use crate::procedures::lond_level;
use crate::types::{Statistic, TestLevel};

/// Which e-process a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EProcessKind {
    Hoeffding,
    /// Sampling without replacement from a finite population of `population` values.
    Wor { population: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorExtras {
    pub population: usize,
    pub running_sum: f64,
}

/// Running state of one e-process, `M_0 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EProcessState {
    pub log_wealth: f64,
    pub samples_seen: usize,
    pub lower: f64,
    pub upper: f64,
    pub wor: Option<WorExtras>,
}

impl EProcessState {
    pub fn hoeffding(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return domain(format!("invalid support [{lower}, {upper}]"));
        }
        Ok(EProcessState {
            log_wealth: 0.0,
            samples_seen: 0,
            lower,
            upper,
            wor: None,
        })
    }

    pub fn wor(lower: f64, upper: f64, population: usize) -> Result<Self> {
        if population == 0 {
            return domain("population must be nonempty");
        }
        let mut s = Self::hoeffding(lower, upper)?;
        s.wor = Some(WorExtras {
            population,
            running_sum: 0.0,
        });
        Ok(s)
    }

    pub fn new(kind: EProcessKind, lower: f64, upper: f64) -> Result<Self> {
        match kind {
            EProcessKind::Hoeffding => Self::hoeffding(lower, upper),
            EProcessKind::Wor { population } => Self::wor(lower, upper, population),
        }
    }

    pub fn wealth(&self) -> f64 {
        self.log_wealth.exp()
    }

    fn penalty(&self, lambda: f64) -> f64 {
        let w = lambda * (self.upper - self.lower);
        w * w / 8.0
    }

    fn check(&self, x: f64, lambda: f64) -> Result<()> {
        if !(x >= self.lower && x <= self.upper) {
            return Err(Error::Data(format!(
                "sample {x} outside support [{}, {}]",
                self.lower, self.upper
            )));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return domain(format!("λ must be a finite nonnegative real, got {lambda}"));
        }
        Ok(())
    }

    /// `log M += λx - (λ(u-ℓ))²/8`.
    pub fn hoeffding_step(&mut self, x: f64, lambda: f64) -> Result<()> {
        self.check(x, lambda)?;
        self.log_wealth += lambda * x - self.penalty(lambda);
        self.samples_seen += 1;
        Ok(())
    }

    /// `log M += λ(x + μ^{j-1}(0)) - (λ(u-ℓ))²/8` with
    /// `μ^i(0) = Σ_{k ≤ i} X_k / (N - i + 1)` and `μ^0(0) = 0`.
    pub fn wor_step(&mut self, x: f64, lambda: f64) -> Result<()> {
        self.check(x, lambda)?;
        let extras = self
            .wor
            .ok_or_else(|| Error::State("wor_step on a process without WoR state".into()))?;
        let i = self.samples_seen;
        if i >= extras.population {
            return Err(Error::State(format!("population of {} exhausted", extras.population)));
        }
        let adjustment = wor_adjustment(extras.running_sum, i, extras.population);
        self.log_wealth += lambda * (x + adjustment) - self.penalty(lambda);
        self.samples_seen += 1;
        self.wor = Some(WorExtras {
            population: extras.population,
            running_sum: extras.running_sum + x,
        });
        Ok(())
    }

    /// Dispatches on the process kind.
    pub fn step(&mut self, x: f64, lambda: f64) -> Result<()> {
        if self.wor.is_some() {
            self.wor_step(x, lambda)
        } else {
            self.hoeffding_step(x, lambda)
        }
    }
}

/// `μ^i(0) = sum / (N - i + 1)` after `i` samples summing to `sum`.
pub fn wor_adjustment(sum: f64, i: usize, population: usize) -> f64 {
    if i == 0 {
        0.0
    } else {
        sum / (population - i + 1) as f64
    }
}

/// Constant bet `λ = √(8 log(1/(αγ_t)) / ((u-ℓ)² N))`.
pub fn lambda_schedule(alpha: f64, gamma_t: f64, lower: f64, upper: f64, n: usize) -> Result<f64> {
    let a = alpha * gamma_t;
    if !(a > 0.0 && a < 1.0) {
        return domain(format!("αγ_t must lie in (0, 1), got {a}"));
    }
    if n == 0 {
        return domain("sample budget N must be ≥ 1");
    }
    if !(upper > lower) {
        return domain("support must have positive width");
    }
    let width = upper - lower;
    Ok((8.0 * (1.0 / a).ln() / (width * width * n as f64)).sqrt())
}

/// Log-wealth after each sample, `log M^1 … log M^N`.
pub fn log_wealth_path(kind: EProcessKind, lower: f64, upper: f64, samples: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let mut state = EProcessState::new(kind, lower, upper)?;
    samples
        .iter()
        .map(|&x| {
            state.step(x, lambda)?;
            Ok(state.log_wealth)
        })
        .collect()
}

/// E-value and p-values extracted from a stopped wealth path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppedEvidence {
    /// `M^τ`.
    pub e_value: f64,
    /// `1 / max_{i ≤ N} M^i`, capped at one.
    pub p_value: f64,
    /// `1 / max_{i ≤ τ} M^i`, capped at one: the p-value available when
    /// sampling halts at `τ`.
    pub p_value_stopped: f64,
    /// Stopping index in `[1, N]`.
    pub tau: usize,
    /// Whether the wealth reached its threshold (`τ = N` otherwise, unless it crossed at `N`).
    pub crossed: bool,
}

impl StoppedEvidence {
    fn from_path(log_path: &[f64], tau: usize, crossed: bool) -> Self {
        let running_max = |k: usize| log_path[..k].iter().copied().fold(0.0_f64, f64::max);
        let p = |m: f64| (-m).exp().min(1.0);
        StoppedEvidence {
            e_value: log_path[tau - 1].exp(),
            p_value: p(running_max(log_path.len())),
            p_value_stopped: p(running_max(tau)),
            tau,
            crossed,
        }
    }

    pub fn e_statistic(&self) -> Statistic {
        Statistic::EValue(self.e_value)
    }
}

/// Which of the two p-values a simulation hands to p-value procedures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueSource {
    /// Maximum wealth over samples observed until the stopping time.
    #[default]
    Stopped,
    /// Maximum wealth over the whole sample budget.
    FullBudget,
}

impl StoppedEvidence {
    pub fn p_statistic(&self, source: PValueSource) -> Statistic {
        Statistic::PValue(match source {
            PValueSource::Stopped => self.p_value_stopped,
            PValueSource::FullBudget => self.p_value,
        })
    }
}

fn crosses(log_wealth: f64, level: f64) -> bool {
    TestLevel::clamped(level).rejects(Statistic::EValue(log_wealth.exp()))
}

/// `τ = min{i : M^i ≥ 1/level} ∪ {N}` for a fixed level.
pub fn first_crossing(log_path: &[f64], level: f64) -> Result<StoppedEvidence> {
    if log_path.is_empty() {
        return Err(Error::Data("empty wealth path".into()));
    }
    let hit = log_path.iter().position(|&m| crosses(m, level));
    Ok(match hit {
        Some(i) => StoppedEvidence::from_path(log_path, i + 1, true),
        None => StoppedEvidence::from_path(log_path, log_path.len(), false),
    })
}

/// Shared configuration of a multi-hypothesis stopping run.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingConfig {
    pub alpha: f64,
    pub discount: DiscountSequence,
    pub lower: f64,
    pub upper: f64,
    pub kind: EProcessKind,
}

impl StoppingConfig {
    fn check_streams(&self, streams: &[Vec<f64>]) -> Result<usize> {
        let n = streams
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Data("no hypothesis streams".into()))?;
        if n == 0 {
            return Err(Error::Data("streams must hold at least one sample".into()));
        }
        if let Some((t, s)) = streams.iter().enumerate().find(|(_, s)| s.len() != n) {
            return Err(Error::Data(format!(
                "stream {} has {} samples, expected N = {n}",
                t + 1,
                s.len()
            )));
        }
        Ok(n)
    }

    fn path(&self, t: usize, samples: &[f64], n: usize) -> Result<Vec<f64>> {
        let lambda = lambda_schedule(self.alpha, self.discount.gamma(t), self.lower, self.upper, n)?;
        log_wealth_path(self.kind, self.lower, self.upper, samples, lambda)
    }
}

/// Stops every hypothesis at the first crossing of `1/(αγ_t)`.
pub fn independent_stopping_run(streams: &[Vec<f64>], cfg: &StoppingConfig) -> Result<Vec<StoppedEvidence>> {
    let n = cfg.check_streams(streams)?;
    streams
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let t = k + 1;
            first_crossing(&cfg.path(t, s, n)?, cfg.alpha * cfg.discount.gamma(t))
        })
        .collect()
}

/// Stops hypothesis `t` at `τ_t = min{i : M_t^i ≥ 1/α̂_t(i)} ∪ {N}`, where
/// `α̂_t(i)` is the e-LOND level computed from the earlier hypotheses' wealth
/// stopped at `τ_k ∧ i`.
///
/// Hypothesis `k` counts as a discovery in that run exactly when it crossed
/// by sample `i`, so `α̂_t(i) = αγ_t(1 + #{k < t : crossed, τ_k ≤ i})` and
/// one pass over the earlier stopping times per hypothesis suffices.
pub fn coupled_stopping_run(streams: &[Vec<f64>], cfg: &StoppingConfig) -> Result<Vec<StoppedEvidence>> {
    stopping_run_with(streams, cfg, |t, earlier| lond_level(cfg.alpha, cfg.discount.gamma(t), earlier))
}

/// Generic stopping run: `level(t, d)` is the level of hypothesis `t` at a
/// sample index where `d` earlier hypotheses have crossed.
pub fn stopping_run_with(
    streams: &[Vec<f64>],
    cfg: &StoppingConfig,
    level: impl Fn(usize, usize) -> f64,
) -> Result<Vec<StoppedEvidence>> {
    let n = cfg.check_streams(streams)?;
    // crossings_at[i] = earlier hypotheses that crossed exactly at sample i + 1
    let mut crossings_at = vec![0usize; n];
    let mut out = Vec::with_capacity(streams.len());
    for (k, samples) in streams.iter().enumerate() {
        let t = k + 1;
        let path = cfg.path(t, samples, n)?;
        let mut earlier = 0usize;
        let mut hit = None;
        for (i, &m) in path.iter().enumerate() {
            earlier += crossings_at[i];
            if crosses(m, level(t, earlier)) {
                hit = Some(i);
                break;
            }
        }
        let ev = match hit {
            Some(i) => {
                crossings_at[i] += 1;
                StoppedEvidence::from_path(&path, i + 1, true)
            }
            None => StoppedEvidence::from_path(&path, n, false),
        };
        out.push(ev);
    }
    Ok(out)
}
