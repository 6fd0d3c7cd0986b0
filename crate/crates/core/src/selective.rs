//! Online selective confidence intervals with false coverage rate control.
//!
//! A session assigns hypothesis `t` the coverage error level
//! `α_t = αγ_t(|S_{t-1}|+1)` (divided by `U_t` for the randomized variant),
//! asks the selection rule whether to report `θ_t`, and if so emits the e-CI
//! `{θ : E_θ < 1/α_t}`. Selection rules see past data and past selections but
//! never the levels or the uniform draws, so the selection sets do not depend
//! on `α`.

use serde::{Deserialize, Serialize};

use crate::discount::DiscountSequence;
use crate::error::{domain, Error, Result};
use crate::procedures::lond_level;

/// Boundary tolerance for interval extraction.
pub const BISECTION_TOLERANCE: f64 = 1e-9;

/// A closed real interval, or the empty set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub empty: bool,
}

impl Interval {
    pub fn empty() -> Self {
        Interval {
            lower: f64::NAN,
            upper: f64::NAN,
            empty: true,
        }
    }

    pub fn contains(&self, theta: f64) -> bool {
        !self.empty && theta >= self.lower && theta <= self.upper
    }

    /// `self ⊆ other`, up to the bisection tolerance.
    pub fn is_subset_of(&self, other: &Interval) -> bool {
        self.empty
            || (!other.empty
                && self.lower >= other.lower - 2.0 * BISECTION_TOLERANCE
                && self.upper <= other.upper + 2.0 * BISECTION_TOLERANCE)
    }
}

/// A family of parameter-indexed e-values `θ ↦ E_θ(X)` yielding e-CIs.
pub trait EConfidenceFamily {
    /// `E_θ(X)`, an e-value when `θ` is the true parameter.
    fn e_value(&self, data: &[f64], theta: f64) -> Result<f64>;

    /// `θ ∈ C(X, α)` iff `E_θ(X) < 1/α`.
    fn contains(&self, data: &[f64], theta: f64, alpha: f64) -> Result<bool> {
        Ok(self.e_value(data, theta)? < 1.0 / alpha)
    }

    /// `C(X, α)` as a closed interval.
    fn interval(&self, data: &[f64], alpha: f64) -> Result<Interval>;
}

/// Two-sided Hoeffding e-CI for the mean of samples bounded in `[lower, upper]`:
/// `E_μ = ½ exp(λS - nψ) + ½ exp(-λS - nψ)` with `S = Σ (X_j - μ)` and
/// `ψ = (λ(u-ℓ))²/8`. `log E_μ` is convex in `μ` with its minimum at the
/// sample mean, so `{μ : E_μ < 1/α}` is an interval found by bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingMeanFamily {
    pub lower: f64,
    pub upper: f64,
    pub lambda: f64,
}

impl HoeffdingMeanFamily {
    pub fn new(lower: f64, upper: f64, lambda: f64) -> Result<Self> {
        if !(lower < upper) || !(lambda > 0.0) || !lambda.is_finite() {
            return domain("Hoeffding family needs lower < upper and λ > 0");
        }
        Ok(HoeffdingMeanFamily { lower, upper, lambda })
    }

    /// `λ = √(8 log(2/α_design) / ((u-ℓ)² n))`.
    pub fn tuned(lower: f64, upper: f64, n: usize, alpha_design: f64) -> Result<Self> {
        if n == 0 || !(alpha_design > 0.0 && alpha_design < 1.0) {
            return domain("tuning needs n ≥ 1 and α in (0, 1)");
        }
        let w = upper - lower;
        Self::new(lower, upper, (8.0 * (2.0 / alpha_design).ln() / (w * w * n as f64)).sqrt())
    }

    fn log_e(&self, n: f64, sum: f64, theta: f64) -> f64 {
        let psi = (self.lambda * (self.upper - self.lower)).powi(2) / 8.0;
        let s = self.lambda * (sum - n * theta);
        // log(½e^{s} + ½e^{-s}) = |s| + log(½(1 + e^{-2|s|}))
        s.abs() + (0.5 * (1.0 + (-2.0 * s.abs()).exp())).ln() - n * psi
    }

    fn summary(&self, data: &[f64]) -> Result<(f64, f64)> {
        if data.is_empty() {
            return Err(Error::Data("e-CI needs at least one sample".into()));
        }
        if let Some(x) = data.iter().find(|&&x| !(x >= self.lower && x <= self.upper)) {
            return Err(Error::Data(format!("sample {x} outside [{}, {}]", self.lower, self.upper)));
        }
        Ok((data.len() as f64, data.iter().sum()))
    }
}

impl EConfidenceFamily for HoeffdingMeanFamily {
    fn e_value(&self, data: &[f64], theta: f64) -> Result<f64> {
        let (n, sum) = self.summary(data)?;
        Ok(self.log_e(n, sum, theta).exp())
    }

    fn interval(&self, data: &[f64], alpha: f64) -> Result<Interval> {
        if !(alpha > 0.0) {
            return domain(format!("coverage level must be positive, got {alpha}"));
        }
        let (n, sum) = self.summary(data)?;
        let log_threshold = -alpha.ln();
        let inside = |theta: f64| self.log_e(n, sum, theta) < log_threshold;
        let centre = sum / n;
        if !inside(centre) {
            return Ok(Interval::empty());
        }
        // Boundary on each side: `inside` holds at `a`, fails at `b`.
        let edge = |limit: f64| -> f64 {
            if inside(limit) {
                return limit;
            }
            let (mut a, mut b) = (centre, limit);
            while (b - a).abs() > BISECTION_TOLERANCE {
                let mid = 0.5 * (a + b);
                if inside(mid) {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            a
        };
        Ok(Interval {
            lower: edge(self.lower),
            upper: edge(self.upper),
            empty: false,
        })
    }
}

/// Hoeffding e-CI with bet `λ` at coverage error level `α`.
pub fn hoeffding_eci(samples: &[f64], lower: f64, upper: f64, lambda: f64, alpha: f64) -> Result<Interval> {
    HoeffdingMeanFamily::new(lower, upper, lambda)?.interval(samples, alpha)
}

/// What a selection rule may observe: all past data and past selections.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SelectionHistory {
    pub data: Vec<Vec<f64>>,
    pub selected: Vec<usize>,
}

/// `S_t`: decides from the current data and the observable history whether to
/// report an interval for `θ_t`.
pub trait SelectionRule {
    fn select(&mut self, data: &[f64], history: &SelectionHistory) -> bool;
}

impl<F: FnMut(&[f64], &SelectionHistory) -> bool> SelectionRule for F {
    fn select(&mut self, data: &[f64], history: &SelectionHistory) -> bool {
        self(data, history)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiVariant {
    ELondCi,
    UELondCi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub index: usize,
    pub level: f64,
    pub interval: Interval,
    pub covered: Option<bool>,
}

/// Reported intervals in selection order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionLog {
    pub entries: Vec<SelectionEntry>,
}

impl SelectionLog {
    pub fn selected(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.index).collect()
    }

    /// Fills `covered` from the true parameters (`truth[t-1] = θ_t`).
    pub fn mark_coverage(&mut self, truth: &[f64]) {
        for e in &mut self.entries {
            e.covered = Some(e.interval.contains(truth[e.index - 1]));
        }
    }
}

/// `Σ_{i ∈ S} 1{θ_i ∉ C_i} / max(|S|, 1)`.
pub fn fcp(log: &SelectionLog, truth: &[f64]) -> f64 {
    let misses = log
        .entries
        .iter()
        .filter(|e| !e.interval.contains(truth[e.index - 1]))
        .count();
    misses as f64 / log.entries.len().max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub index: usize,
    pub level: f64,
    pub selected: bool,
    pub interval: Option<Interval>,
}

/// One e-LOND-CI or U-eLOND-CI run.
#[derive(Debug, Clone)]
pub struct CiSession {
    variant: CiVariant,
    alpha: f64,
    discount: DiscountSequence,
    t: usize,
    history: SelectionHistory,
    log: SelectionLog,
}

impl CiSession {
    pub fn new(variant: CiVariant, alpha: f64, discount: DiscountSequence) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("α must lie in (0, 1), got {alpha}")));
        }
        discount.validate()?;
        Ok(CiSession {
            variant,
            alpha,
            discount,
            t: 1,
            history: SelectionHistory::default(),
            log: SelectionLog::default(),
        })
    }

    pub fn log(&self) -> &SelectionLog {
        &self.log
    }

    pub fn into_log(self) -> SelectionLog {
        self.log
    }

    pub fn history(&self) -> &SelectionHistory {
        &self.history
    }

    /// Processes `X_t`. `u` must be supplied exactly when running U-eLOND-CI.
    pub fn step<R: SelectionRule + ?Sized, F: EConfidenceFamily + ?Sized>(
        &mut self,
        data: Vec<f64>,
        rule: &mut R,
        family: &F,
        u: Option<f64>,
    ) -> Result<SelectionOutcome> {
        let base = lond_level(self.alpha, self.discount.gamma(self.t), self.history.selected.len());
        let level = match (self.variant, u) {
            (CiVariant::ELondCi, None) => base,
            (CiVariant::UELondCi, Some(u)) if u > 0.0 && u <= 1.0 => base / u,
            (CiVariant::UELondCi, Some(u)) => return domain(format!("uniform draw must lie in (0, 1], got {u}")),
            (CiVariant::UELondCi, None) => return domain("U-eLOND-CI requires a uniform draw"),
            (CiVariant::ELondCi, Some(_)) => return domain("e-LOND-CI takes no uniform draw"),
        };
        let selected = rule.select(&data, &self.history);
        let index = self.t;
        let interval = if selected {
            let interval = family.interval(&data, level)?;
            self.history.selected.push(index);
            self.log.entries.push(SelectionEntry {
                index,
                level,
                interval,
                covered: None,
            });
            Some(interval)
        } else {
            None
        };
        self.history.data.push(data);
        self.t += 1;
        Ok(SelectionOutcome {
            index,
            level,
            selected,
            interval,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn family() -> HoeffdingMeanFamily {
        HoeffdingMeanFamily::tuned(-4.0, 4.0, 200, 0.1).unwrap()
    }

    fn sample(rng: &mut ChaCha8Rng, mean: f64, n: usize) -> Vec<f64> {
        // two-point law on {-4, 4} with the requested mean
        let p = (mean + 4.0) / 8.0;
        (0..n).map(|_| if rng.random_bool(p) { 4.0 } else { -4.0 }).collect()
    }

    #[test]
    fn first_step_level() {
        let mut s = CiSession::new(CiVariant::ELondCi, 0.1, DiscountSequence::Default).unwrap();
        let mut always = |_: &[f64], _: &SelectionHistory| true;
        let out = s.step(vec![0.5; 10], &mut always, &family(), None).unwrap();
        assert!((out.level - 0.05).abs() < 1e-15);
        assert!(out.selected && out.interval.unwrap().contains(0.5));
    }

    #[test]
    fn never_selecting_gives_zero_fcp() {
        let mut s = CiSession::new(CiVariant::ELondCi, 0.1, DiscountSequence::Default).unwrap();
        let mut never = |_: &[f64], _: &SelectionHistory| false;
        for _ in 0..20 {
            s.step(vec![1.0; 5], &mut never, &family(), None).unwrap();
        }
        assert!(s.log().entries.is_empty());
        assert_eq!(fcp(s.log(), &[0.0; 20]), 0.0);
    }

    #[test]
    fn fcp_examples() {
        let iv = |lo: f64, hi: f64| Interval { lower: lo, upper: hi, empty: false };
        let log = SelectionLog {
            entries: vec![
                SelectionEntry { index: 1, level: 0.1, interval: iv(0.0, 1.0), covered: None },
                SelectionEntry { index: 2, level: 0.1, interval: iv(0.0, 1.0), covered: None },
                SelectionEntry { index: 3, level: 0.1, interval: iv(0.0, 1.0), covered: None },
            ],
        };
        assert!((fcp(&log, &[0.5, 2.0, 0.5]) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(fcp(&log, &[0.5, 0.5, 0.5]), 0.0);
        assert_eq!(fcp(&SelectionLog::default(), &[]), 0.0);
    }

    #[test]
    fn draw_contract() {
        let mut always = |_: &[f64], _: &SelectionHistory| true;
        let mut e = CiSession::new(CiVariant::ELondCi, 0.1, DiscountSequence::Default).unwrap();
        assert!(e.step(vec![0.0], &mut always, &family(), Some(0.5)).is_err());
        let mut u = CiSession::new(CiVariant::UELondCi, 0.1, DiscountSequence::Default).unwrap();
        assert!(u.step(vec![0.0], &mut always, &family(), None).is_err());
        assert!(u.step(vec![0.0], &mut always, &family(), Some(0.0)).is_err());
        let out = u.step(vec![0.0], &mut always, &family(), Some(0.5)).unwrap();
        assert!((out.level - 0.1).abs() < 1e-15);
    }

    #[test]
    fn threshold_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = sample(&mut rng, 1.0, 200);
        let f = family();
        let wide = f.interval(&x, 1e-12).unwrap();
        let narrow = f.interval(&x, 0.999).unwrap();
        assert!(narrow.is_subset_of(&wide));
        assert!(narrow.upper - narrow.lower < wide.upper - wide.lower);
        // α → 0 approaches the full parameter range
        let full = f.interval(&x, 1e-300).unwrap();
        assert_eq!((full.lower, full.upper), (-4.0, 4.0));
    }

    #[test]
    fn nesting_over_random_datasets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = family();
        for _ in 0..100 {
            let m = rng.random_range(-3.0..3.0);
            let x = sample(&mut rng, m, 200);
            let c02 = f.interval(&x, 0.2).unwrap();
            let c01 = f.interval(&x, 0.1).unwrap();
            assert!(c02.is_subset_of(&c01));
        }
    }

    #[test]
    fn interval_boundary_matches_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = family();
        let x = sample(&mut rng, 0.5, 200);
        let iv = f.interval(&x, 0.05).unwrap();
        assert!(f.contains(&x, iv.lower + 1e-7, 0.05).unwrap());
        assert!(!f.contains(&x, iv.lower - 1e-7, 0.05).unwrap());
        assert!(f.contains(&x, iv.upper - 1e-7, 0.05).unwrap());
        assert!(!f.contains(&x, iv.upper + 1e-7, 0.05).unwrap());
    }

    #[test]
    fn large_levels_can_be_empty() {
        let f = HoeffdingMeanFamily::new(-4.0, 4.0, 0.5).unwrap();
        let x = vec![4.0, -4.0, 4.0, -4.0];
        // min_μ log E_μ = -nψ = -8, so any 1/α ≤ e^{-8} gives the empty set
        assert!(f.interval(&x, 1e4).unwrap().empty);
        assert!(f.interval(&[], 0.1).is_err());
    }

    #[test]
    fn miscoverage_is_controlled() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let f = family();
        let trials = 10_000;
        let misses: Vec<f64> = (0..trials)
            .map(|_| {
                let x = sample(&mut rng, 0.0, 200);
                if f.interval(&x, 0.1).unwrap().contains(0.0) { 0.0 } else { 1.0 }
            })
            .collect();
        let m = crate::metrics::MeanSe::of(&misses);
        assert!(m.mean <= 0.1 + 3.0 * m.se, "{m:?}");
    }
}
