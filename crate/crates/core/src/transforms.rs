//! Reshaping functions, p-to-e calibrators and stochastic rounding of e-values.

use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Error, Result};

/// Harmonic number `ℓ_t = Σ_{i ≤ t} 1/i`.
pub fn harmonic(t: usize) -> f64 {
    (1..=t).map(|i| 1.0 / i as f64).sum()
}

/// Benjamini–Yekutieli reshaping `β_t(r) = (⌊r⌋ ∧ t) / ℓ_t`.
pub fn beta_by(t: usize, r: f64) -> Result<f64> {
    if t == 0 {
        return domain("β^BY index must be ≥ 1");
    }
    beta_by_with(t, harmonic(t), r)
}

/// [`beta_by`] with a precomputed `ℓ_t`.
pub fn beta_by_with(t: usize, ell_t: f64, r: f64) -> Result<f64> {
    if r.is_nan() || r < 0.0 {
        return domain(format!("reshaping argument must be ≥ 0, got {r}"));
    }
    Ok(r.floor().min(t as f64) / ell_t)
}

type ReshapeFn = dyn Fn(usize, f64) -> f64 + Send + Sync;

/// A sequence of reshaping functions `(β_t)`.
#[derive(Clone)]
pub enum ReshapingFunction {
    By,
    UserSupplied(Arc<ReshapeFn>),
}

impl fmt::Debug for ReshapingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReshapingFunction::By => write!(f, "By"),
            ReshapingFunction::UserSupplied(_) => write!(f, "UserSupplied(..)"),
        }
    }
}

/// Grid checked when accepting a user reshaping function.
const RESHAPE_GRID_HORIZON: usize = 50;
const RESHAPE_GRID_STEP: f64 = 0.25;

impl ReshapingFunction {
    /// Accepts `f(t, r)` after checking `β_t(0) = 0`, monotonicity and
    /// `β_t(r) ≤ r` on `r ∈ [0, 10t]` for `t ≤ 50`.
    pub fn user(f: impl Fn(usize, f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        for t in 1..=RESHAPE_GRID_HORIZON {
            if f(t, 0.0) != 0.0 {
                return Err(Error::Domain(format!("β_{t}(0) must be 0")));
            }
            let steps = (10.0 * t as f64 / RESHAPE_GRID_STEP) as usize;
            let mut prev = 0.0;
            for k in 1..=steps {
                let r = k as f64 * RESHAPE_GRID_STEP;
                let b = f(t, r);
                if !b.is_finite() || b < prev || b > r * (1.0 + 1e-12) {
                    return Err(Error::Domain(format!(
                        "β_{t} fails monotonicity or β(r) ≤ r at r = {r} (β = {b})"
                    )));
                }
                prev = b;
            }
        }
        Ok(ReshapingFunction::UserSupplied(Arc::new(f)))
    }

    pub fn eval(&self, t: usize, r: f64) -> Result<f64> {
        match self {
            ReshapingFunction::By => beta_by(t, r),
            ReshapingFunction::UserSupplied(f) => {
                if r.is_nan() || r < 0.0 {
                    return domain(format!("reshaping argument must be ≥ 0, got {r}"));
                }
                Ok(f(t, r))
            }
        }
    }
}

/// The printed LOND-recovery calibrator `(αγ_t ⌈(p ℓ_t / (αγ_t)) ∨ 1⌉)^{-1}`.
///
/// Its values for ceilings above `t` never affect an e-LOND decision (the
/// e-LOND level is at most `αγ_t t`), but they make `∫ f_t` exceed one. Use
/// [`calibrate_lond_capped`] where a bona fide calibrator is needed.
pub fn calibrate_lond(alpha: f64, gamma_t: f64, ell_t: f64, p: f64) -> Result<f64> {
    let scale = alpha * gamma_t;
    if !(scale > 0.0) || !scale.is_finite() {
        return domain(format!("αγ_t must be positive, got {scale}"));
    }
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("p-value must be in [0, 1], got {p}"));
    }
    let k = (p * ell_t / scale).max(1.0).ceil();
    Ok(1.0 / (scale * k))
}

/// [`calibrate_lond`] set to zero wherever the ceiling exceeds `t`; integrates
/// to at most one over `[0, 1]` and induces the same e-LOND decisions.
pub fn calibrate_lond_capped(t: usize, alpha: f64, gamma_t: f64, ell_t: f64, p: f64) -> Result<f64> {
    let e = calibrate_lond(alpha, gamma_t, ell_t, p)?;
    let k = (p * ell_t / (alpha * gamma_t)).max(1.0).ceil();
    Ok(if k > t as f64 { 0.0 } else { e })
}

type CalibrateFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A p-to-e calibrator: nonincreasing `f` on `[0, 1]` with `∫ f ≤ 1`.
#[derive(Clone)]
pub enum Calibrator {
    LondRecovery { t: usize, alpha: f64, gamma_t: f64, ell_t: f64 },
    UserSupplied(Arc<CalibrateFn>),
}

impl fmt::Debug for Calibrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Calibrator::LondRecovery { t, alpha, gamma_t, ell_t } => f
                .debug_struct("LondRecovery")
                .field("t", t)
                .field("alpha", alpha)
                .field("gamma_t", gamma_t)
                .field("ell_t", ell_t)
                .finish(),
            Calibrator::UserSupplied(_) => write!(f, "UserSupplied(..)"),
        }
    }
}

/// Quadrature points used to validate calibrators.
pub const CALIBRATOR_QUADRATURE_POINTS: usize = 100_000;
/// Slack on `∫ f ≤ 1` for the midpoint rule.
pub const CALIBRATOR_INTEGRAL_TOLERANCE: f64 = 1e-6;

/// Midpoint-rule integral of `f` over `[0, 1]`.
pub fn midpoint_integral(f: impl Fn(f64) -> f64, points: usize) -> f64 {
    let h = 1.0 / points as f64;
    (0..points).map(|k| f((k as f64 + 0.5) * h)).sum::<f64>() * h
}

impl Calibrator {
    /// The capped LOND-recovery calibrator for hypothesis `t`.
    pub fn lond_recovery(t: usize, alpha: f64, gamma_t: f64) -> Result<Self> {
        if t == 0 {
            return domain("calibrator index must be ≥ 1");
        }
        if !(alpha * gamma_t > 0.0) {
            return domain("αγ_t must be positive");
        }
        Ok(Calibrator::LondRecovery {
            t,
            alpha,
            gamma_t,
            ell_t: harmonic(t),
        })
    }

    /// Accepts `f` after a grid check of monotonicity and the integral bound.
    pub fn user(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let n = CALIBRATOR_QUADRATURE_POINTS;
        let mut prev = f64::INFINITY;
        for k in 0..=n {
            let p = k as f64 / n as f64;
            let e = f(p);
            if e.is_nan() || e < 0.0 || e > prev {
                return Err(Error::Domain(format!("calibrator is not nonincreasing and nonnegative at p = {p}")));
            }
            prev = e;
        }
        let integral = midpoint_integral(&f, n);
        if integral > 1.0 + CALIBRATOR_INTEGRAL_TOLERANCE {
            return Err(Error::Domain(format!("calibrator integrates to {integral} > 1")));
        }
        Ok(Calibrator::UserSupplied(Arc::new(f)))
    }

    pub fn eval(&self, p: f64) -> Result<f64> {
        match self {
            Calibrator::LondRecovery { t, alpha, gamma_t, ell_t } => {
                calibrate_lond_capped(*t, *alpha, *gamma_t, *ell_t, p)
            }
            Calibrator::UserSupplied(f) => {
                if !(0.0..=1.0).contains(&p) {
                    return domain(format!("p-value must be in [0, 1], got {p}"));
                }
                Ok(f(p))
            }
        }
    }
}

/// Stochastic rounding `S_α̂(E) = (E·1{E ≥ 1/α̂}) ∨ (1{U ≤ Eα̂}/α̂)`.
///
/// `1/0` is `+∞`; with `α̂ = 0` the second branch is zero. The second
/// indicator is evaluated as `E ≥ U/α̂` so that
/// `1{S ≥ 1/α̂} = 1{E ≥ U/α̂}` holds exactly in floating point.
pub fn stochastic_round(e: f64, alpha_hat: f64, u: f64) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return domain(format!("uniform draw must lie in (0, 1], got {u}"));
    }
    if alpha_hat.is_nan() || alpha_hat < 0.0 {
        return domain(format!("α̂ must be ≥ 0, got {alpha_hat}"));
    }
    if e.is_nan() || e < 0.0 {
        return domain(format!("e-value must be ≥ 0, got {e}"));
    }
    if alpha_hat == 0.0 {
        return Ok(if e == f64::INFINITY { e } else { 0.0 });
    }
    let inv = 1.0 / alpha_hat;
    let kept = if e >= inv { e } else { 0.0 };
    let rounded = if e >= u / alpha_hat { inv } else { 0.0 };
    Ok(kept.max(rounded))
}
