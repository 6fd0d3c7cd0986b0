//! Online multiple-testing state machines: LOND, r-LOND, e-LOND, U-eLOND,
//! Ur-LOND and LORD*.
//!
//! Every procedure assigns a level `α_t` to hypothesis `t` from the discovery
//! history `R_{t-1}` and rejects by the weak rule `E_t ≥ 1/α_t` (e-values) or
//! `P_t ≤ α_t` (p-values):
//!
//! | procedure | level | input |
//! |-----------|-------|-------|
//! | LOND      | `αγ_t(|R|+1)` | p-values, independent or PRDS |
//! | r-LOND    | `αγ_t β_t(|R|+1)` | p-values, arbitrary dependence |
//! | e-LOND    | `αγ_t(|R|+1)` | e-values, arbitrary dependence |
//! | U-eLOND   | `αγ_t(|R|+1)/U_t` | e-values, arbitrary dependence |
//! | Ur-LOND   | `αγ_t β_t((|R|+1)/U_t)` | p-values, arbitrary dependence |
//! | LORD*     | fixed-lag conflict-set LORD | p-values, local dependence |
//!
//! LORD* follows the experimental definition literally: the whole bracket is
//! multiplied by `α`, `w0` defaults to 0.9 and is allowed to exceed `α`, and
//! levels that come out negative are clamped to zero.

use serde::{Deserialize, Serialize};

use crate::discount::DiscountSequence;
use crate::error::{domain, Error, Result};
use crate::transforms::{beta_by_with, ReshapingFunction};
use crate::types::{DecisionRecord, Statistic, TestLevel};
use crate::uniform::RngCursor;

/// Default LORD* initial wealth weight.
pub const LORD_STAR_DEFAULT_W0: f64 = 0.9;

/// `αγ_t(|R_{t-1}|+1)`, shared by LOND and e-LOND.
pub fn lond_level(alpha: f64, gamma_t: f64, rejections: usize) -> f64 {
    alpha * gamma_t * (rejections as f64 + 1.0)
}

/// `αγ_t β_t(|R_{t-1}|+1)`.
pub fn rlond_level(alpha: f64, gamma_t: f64, t: usize, rejections: usize, beta: &ReshapingFunction) -> Result<f64> {
    Ok(alpha * gamma_t * beta.eval(t, rejections as f64 + 1.0)?)
}

/// `α_t^{e-LOND} / u`.
pub fn uelond_level(elond_level: f64, u: f64) -> Result<f64> {
    check_uniform(u)?;
    Ok(elond_level / u)
}

/// `αγ_t β_t((|R_{t-1}|+1)/u)`.
pub fn urlond_level(
    alpha: f64,
    gamma_t: f64,
    t: usize,
    rejections: usize,
    u: f64,
    beta: &ReshapingFunction,
) -> Result<f64> {
    check_uniform(u)?;
    Ok(alpha * gamma_t * beta.eval(t, (rejections as f64 + 1.0) / u)?)
}

/// LORD* level with conflict sets `C_t = {t-L, …, t-1}`:
/// `α(w0 γ_t + 1{|R| ≥ 1, r1 ∉ C_t}(α - w0)γ_{t-r1} + Σ_{i ∈ R \ {r1}, i ∉ C_t} γ_{t-i})`,
/// clamped below at zero. `rejections` must be sorted and all `< t`.
pub fn lordstar_level(
    alpha: f64,
    w0: f64,
    lag: usize,
    discount: &DiscountSequence,
    t: usize,
    rejections: &[usize],
) -> f64 {
    // i ∉ C_t  ⇔  i + L < t
    let outside = |i: usize| i + lag < t;
    let mut bracket = w0 * discount.gamma(t);
    if let Some((&r1, rest)) = rejections.split_first() {
        assert!(r1 < t);
        if outside(r1) {
            bracket += (alpha - w0) * discount.gamma(t - r1);
        }
        for &i in rest.iter().filter(|&&i| outside(i)) {
            bracket += discount.gamma(t - i);
        }
    }
    alpha * bracket
}

fn check_uniform(u: f64) -> Result<()> {
    if !(u > 0.0 && u <= 1.0) {
        return domain(format!("uniform draw must lie in (0, 1], got {u}"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ProcedureKind {
    Lond,
    RLond,
    ELond,
    UELond,
    UrLond,
    LordStar { w0: f64, lag: usize },
}

impl ProcedureKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProcedureKind::Lond => "LOND",
            ProcedureKind::RLond => "r-LOND",
            ProcedureKind::ELond => "e-LOND",
            ProcedureKind::UELond => "U-eLOND",
            ProcedureKind::UrLond => "Ur-LOND",
            ProcedureKind::LordStar { .. } => "LORD*",
        }
    }

    pub fn takes_e_values(&self) -> bool {
        matches!(self, ProcedureKind::ELond | ProcedureKind::UELond)
    }

    pub fn is_randomized(&self) -> bool {
        matches!(self, ProcedureKind::UELond | ProcedureKind::UrLond)
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "lond" => ProcedureKind::Lond,
            "r-lond" | "rlond" => ProcedureKind::RLond,
            "e-lond" | "elond" => ProcedureKind::ELond,
            "u-elond" | "uelond" => ProcedureKind::UELond,
            "ur-lond" | "urlond" => ProcedureKind::UrLond,
            "lord*" | "lordstar" | "lord-star" => ProcedureKind::LordStar {
                w0: LORD_STAR_DEFAULT_W0,
                lag: 0,
            },
            other => return Err(Error::Config(format!("unknown procedure `{other}`"))),
        })
    }
}

/// The evolving state of one online procedure.
#[derive(Debug, Clone)]
pub struct OnlineProcedure {
    kind: ProcedureKind,
    alpha: f64,
    discount: DiscountSequence,
    reshaping: ReshapingFunction,
    t: usize,
    rejections: Vec<usize>,
    ell_t: f64,
}

impl OnlineProcedure {
    pub fn new(kind: ProcedureKind, alpha: f64, discount: DiscountSequence) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("α must lie in (0, 1), got {alpha}")));
        }
        if let ProcedureKind::LordStar { w0, .. } = kind {
            if !w0.is_finite() || w0 < 0.0 {
                return Err(Error::Config(format!("LORD* w0 must be ≥ 0, got {w0}")));
            }
        }
        discount.validate()?;
        Ok(OnlineProcedure {
            kind,
            alpha,
            discount,
            reshaping: ReshapingFunction::By,
            t: 1,
            rejections: Vec::new(),
            ell_t: 1.0,
        })
    }

    /// Replaces β^BY with another reshaping sequence (r-LOND and Ur-LOND only).
    pub fn with_reshaping(mut self, reshaping: ReshapingFunction) -> Self {
        self.reshaping = reshaping;
        self
    }

    pub fn kind(&self) -> ProcedureKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn discount(&self) -> &DiscountSequence {
        &self.discount
    }

    /// Index of the next hypothesis to be tested.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn rejections(&self) -> &[usize] {
        &self.rejections
    }

    pub fn discovery_count(&self) -> usize {
        self.rejections.len()
    }

    /// Index of the first discovery, zero if none.
    pub fn first_rejection(&self) -> usize {
        self.rejections.first().copied().unwrap_or(0)
    }

    fn gamma_t(&self) -> f64 {
        self.discount.gamma(self.t)
    }

    /// Level for the next hypothesis. Randomized procedures require `u`.
    pub fn next_level(&self, u: Option<f64>) -> Result<TestLevel> {
        let (t, n, a, g) = (self.t, self.rejections.len(), self.alpha, self.gamma_t());
        let need_u = || {
            u.ok_or_else(|| Error::Domain(format!("{} requires a uniform draw", self.kind.name())))
        };
        let level = match self.kind {
            ProcedureKind::Lond | ProcedureKind::ELond => lond_level(a, g, n),
            ProcedureKind::RLond => match self.reshaping {
                ReshapingFunction::By => a * g * beta_by_with(t, self.ell_t, n as f64 + 1.0)?,
                _ => rlond_level(a, g, t, n, &self.reshaping)?,
            },
            ProcedureKind::UELond => uelond_level(lond_level(a, g, n), need_u()?)?,
            ProcedureKind::UrLond => {
                let u = need_u()?;
                check_uniform(u)?;
                match self.reshaping {
                    ReshapingFunction::By => a * g * beta_by_with(t, self.ell_t, (n as f64 + 1.0) / u)?,
                    _ => urlond_level(a, g, t, n, u, &self.reshaping)?,
                }
            }
            ProcedureKind::LordStar { w0, lag } => {
                return Ok(TestLevel::clamped(lordstar_level(a, w0, lag, &self.discount, t, &self.rejections)))
            }
        };
        TestLevel::new(level)
    }

    /// Tests hypothesis `t`, records the decision and advances to `t + 1`.
    pub fn process(&mut self, statistic: Statistic, u: Option<f64>) -> Result<DecisionRecord> {
        statistic.validate()?;
        let expected = if self.kind.takes_e_values() { "e-value" } else { "p-value" };
        if statistic.kind_name() != expected {
            return Err(Error::KindMismatch {
                procedure: self.kind.name(),
                expected,
                got: statistic.kind_name(),
            });
        }
        let level = self.next_level(u)?;
        let rejected = level.rejects(statistic);
        let index = self.t;
        if rejected {
            self.rejections.push(index);
        }
        self.t += 1;
        self.ell_t += 1.0 / self.t as f64;
        Ok(DecisionRecord {
            index,
            level,
            statistic,
            rejected,
            uniform_draw: if self.kind.is_randomized() { u } else { None },
            is_null: None,
        })
    }

    pub fn snapshot(&self, rng: Option<RngCursor>) -> Result<ProcedureSnapshot> {
        if !matches!(self.reshaping, ReshapingFunction::By) {
            return Err(Error::Snapshot("user-supplied reshaping functions cannot be serialized".into()));
        }
        Ok(ProcedureSnapshot {
            version: SNAPSHOT_VERSION,
            procedure: self.kind,
            alpha: self.alpha,
            discount: self.discount.clone(),
            t: self.t,
            rejections: self.rejections.clone(),
            first_rejection: self.first_rejection(),
            rng,
        })
    }

    pub fn restore(snapshot: &ProcedureSnapshot) -> Result<Self> {
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported snapshot version {} (expected {SNAPSHOT_VERSION})",
                snapshot.version
            )));
        }
        let mut p = OnlineProcedure::new(snapshot.procedure, snapshot.alpha, snapshot.discount.clone())?;
        if snapshot.t == 0
            || !snapshot.rejections.windows(2).all(|w| w[0] < w[1])
            || snapshot.rejections.last().is_some_and(|&r| r >= snapshot.t)
            || snapshot.first_rejection != snapshot.rejections.first().copied().unwrap_or(0)
        {
            return Err(Error::Snapshot("inconsistent index or rejection set".into()));
        }
        p.t = snapshot.t;
        p.rejections = snapshot.rejections.clone();
        p.ell_t = crate::transforms::harmonic(snapshot.t);
        Ok(p)
    }
}

pub const SNAPSHOT_VERSION: u32 = 1;

/// Serializable checkpoint of an [`OnlineProcedure`] and its draw source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcedureSnapshot {
    pub version: u32,
    pub procedure: ProcedureKind,
    pub alpha: f64,
    pub discount: DiscountSequence,
    pub t: usize,
    pub rejections: Vec<usize>,
    pub first_rejection: usize,
    pub rng: Option<RngCursor>,
}

impl ProcedureSnapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Snapshot(e.to_string()))
    }
}

/// Runs `kind` over a whole stream. Randomized procedures take `uniforms[t-1]`.
pub fn run_stream(
    kind: ProcedureKind,
    alpha: f64,
    discount: &DiscountSequence,
    statistics: &[Statistic],
    uniforms: Option<&[f64]>,
) -> Result<Vec<DecisionRecord>> {
    let mut p = OnlineProcedure::new(kind, alpha, discount.clone())?;
    statistics
        .iter()
        .enumerate()
        .map(|(i, &s)| p.process(s, uniforms.map(|u| u[i])))
        .collect()
}
