//! Online weighted conformal selection under covariate shift.
//!
//! Calibration pairs `(X_i, Y_i)` carry scores `V_i = V(X_i, Y_i)` and
//! likelihood-ratio weights `w(X_i)`. Test point `t` reveals `X_{n+t}` and a
//! threshold `c_{n+t}` and tests `H_0^t: Y_{n+t} ≤ c_{n+t}` with the weighted
//! conformal p-value of `V̂_{n+t} = V(X_{n+t}, c_{n+t})`. A binary-label task
//! testing `Y = 0` is the case `c = 0` with any score monotone in `y`.
//!
//! The e-value `E_t = 1{P_t ≤ α̂_t^+} / α̂_t^-` compares `P_t` against LOND
//! levels obtained by rerunning LOND on the leave-one-out p-values of the
//! earlier test points, with (`+`) and without (`-`) the current point's
//! weight in the numerator. Scores are assumed tie-free; the tie-breaking
//! randomized p-values are not implemented.

use serde::{Deserialize, Serialize};

use crate::discount::DiscountSequence;
use crate::error::{Error, Result};
use crate::procedures::{lond_level, OnlineProcedure, ProcedureKind};
use crate::types::{DecisionRecord, Statistic};

/// Calibration scores sorted ascending with prefix sums of their weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet {
    scores: Vec<f64>,
    weights: Vec<f64>,
    prefix: Vec<f64>,
}

impl CalibrationSet {
    pub fn new(scores: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if scores.is_empty() || scores.len() != weights.len() {
            return Err(Error::Data("calibration set needs equally many scores and weights, at least one".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Data(format!("calibration weight {w} is not a finite nonnegative real")));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::Data("calibration score is NaN".into()));
        }
        let mut pairs: Vec<(f64, f64)> = scores.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (scores, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let mut prefix = Vec::with_capacity(weights.len() + 1);
        prefix.push(0.0);
        for w in &weights {
            prefix.push(prefix.last().unwrap() + w);
        }
        if !(*prefix.last().unwrap() > 0.0) {
            return Err(Error::Data("calibration weights are all zero".into()));
        }
        Ok(CalibrationSet { scores, weights, prefix })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    /// `Σ_i w(X_i) 1{V_i < v}`.
    pub fn weight_below(&self, v: f64) -> f64 {
        self.prefix[self.scores.partition_point(|&s| s < v)]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// A test point as seen by the procedure, plus simulation truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestPoint {
    /// `V̂ = V(x, c)`.
    pub score_hat: f64,
    /// `w(x)`.
    pub weight: f64,
    pub threshold: f64,
    pub y: Option<f64>,
}

impl TestPoint {
    /// `Y ≤ c`, when the label is known.
    pub fn is_null(&self) -> Option<bool> {
        self.y.map(|y| y <= self.threshold)
    }
}

/// `(Σ_i w(X_i) 1{V_i < V̂} + w(x)) / (Σ_i w(X_i) + w(x))`.
pub fn weighted_pvalue(cal: &CalibrationSet, pt: &TestPoint) -> Result<f64> {
    if !(pt.weight.is_finite() && pt.weight >= 0.0) {
        return Err(Error::Data(format!("test weight {} is not a finite nonnegative real", pt.weight)));
    }
    let denom = cal.total_weight() + pt.weight;
    Ok((cal.weight_below(pt.score_hat) + pt.weight) / denom)
}

/// Leave-one-out p-values `(P_j^{(t),-}, P_j^{(t),+})_{j<t}` of earlier points
/// `past_scores` with respect to the current point's weight `weight_t`.
pub fn loo_pvalues(cal: &CalibrationSet, past_scores: &[f64], weight_t: f64) -> (Vec<f64>, Vec<f64>) {
    let denom = cal.total_weight() + weight_t;
    past_scores
        .iter()
        .map(|&v| {
            let below = cal.weight_below(v);
            (below / denom, (below + weight_t) / denom)
        })
        .unzip()
}

/// Number of LOND discoveries on a p-value stream.
pub fn lond_discovery_count(alpha: f64, discount: &DiscountSequence, pvalues: &[f64]) -> Result<usize> {
    let mut lond = OnlineProcedure::new(ProcedureKind::Lond, alpha, discount.clone())?;
    for &p in pvalues {
        lond.process(Statistic::PValue(p), None)?;
    }
    Ok(lond.discovery_count())
}

/// Everything computed for one test point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WcsEvidence {
    pub p_value: f64,
    pub e_value: f64,
    /// `α̂_t^{LOND,-}`.
    pub level_minus: f64,
    /// `α̂_t^{LOND,+}`.
    pub level_plus: f64,
}

/// `E_t^{LOND}` for point `pt` given the scores `history` of earlier points.
pub fn wcs_evalue(
    cal: &CalibrationSet,
    history: &[f64],
    pt: &TestPoint,
    alpha: f64,
    discount: &DiscountSequence,
) -> Result<WcsEvidence> {
    let p_value = weighted_pvalue(cal, pt)?;
    let (minus, plus) = loo_pvalues(cal, history, pt.weight);
    let t = history.len() + 1;
    let gamma = discount.gamma(t);
    let level_minus = lond_level(alpha, gamma, lond_discovery_count(alpha, discount, &minus)?);
    let level_plus = lond_level(alpha, gamma, lond_discovery_count(alpha, discount, &plus)?);
    let e_value = if p_value <= level_plus { 1.0 / level_minus } else { 0.0 };
    Ok(WcsEvidence {
        p_value,
        e_value,
        level_minus,
        level_plus,
    })
}

/// Evidence for a whole stream of test points, in order.
pub fn wcs_stream_evidence(
    cal: &CalibrationSet,
    points: &[TestPoint],
    alpha: f64,
    discount: &DiscountSequence,
) -> Result<Vec<WcsEvidence>> {
    let scores: Vec<f64> = points.iter().map(|p| p.score_hat).collect();
    points
        .iter()
        .enumerate()
        .map(|(k, pt)| wcs_evalue(cal, &scores[..k], pt, alpha, discount))
        .collect()
}

/// Gates the evidence stream with `kind`: e-LOND and U-eLOND consume
/// `E_t^{LOND}`, the p-value procedures consume `P_t`.
pub fn wcs_gate(
    points: &[TestPoint],
    evidence: &[WcsEvidence],
    kind: ProcedureKind,
    alpha: f64,
    discount: &DiscountSequence,
    uniforms: Option<&[f64]>,
) -> Result<Vec<DecisionRecord>> {
    if points.len() != evidence.len() {
        return Err(Error::Data("points and evidence differ in length".into()));
    }
    let mut proc_ = OnlineProcedure::new(kind, alpha, discount.clone())?;
    points
        .iter()
        .zip(evidence)
        .enumerate()
        .map(|(k, (pt, ev))| {
            let stat = if kind.takes_e_values() {
                Statistic::EValue(ev.e_value)
            } else {
                Statistic::PValue(ev.p_value)
            };
            let mut rec = proc_.process(stat, uniforms.map(|u| u[k]))?;
            rec.is_null = pt.is_null();
            Ok(rec)
        })
        .collect()
}
