//! Discount sequences `γ_t`: nonnegative weights with `Σ γ_t ≤ 1` that split
//! the error budget across an unbounded stream of hypotheses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on `Σ γ_t ≤ 1` to absorb summation drift on long streams.
pub const PARTIAL_SUM_TOLERANCE: f64 = 1e-12;

/// `γ_t = 1/(t(t+1))`, whose partial sums telescope to `t/(t+1)`.
pub fn gamma_default(t: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::Domain("discount index must be ≥ 1".into()));
    }
    let t = t as f64;
    Ok(1.0 / (t * (t + 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiscountSequence {
    /// `γ_t = 1/(t(t+1))`.
    Default,
    /// Finite list of weights `γ_1..γ_n`; terms beyond the list are zero.
    Explicit { terms: Vec<f64> },
}

impl Default for DiscountSequence {
    fn default() -> Self {
        DiscountSequence::Default
    }
}

impl DiscountSequence {
    /// Builds an explicit sequence, rejecting negative or non-finite terms and
    /// any prefix whose sum exceeds `1 + 1e-12`.
    pub fn explicit(terms: Vec<f64>) -> Result<Self> {
        let seq = DiscountSequence::Explicit { terms };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DiscountSequence::Default => Ok(()),
            DiscountSequence::Explicit { terms } => {
                let mut sum = 0.0;
                for (i, &g) in terms.iter().enumerate() {
                    if !g.is_finite() || g < 0.0 {
                        return Err(Error::Discount(format!("γ_{} = {g} is not a nonnegative real", i + 1)));
                    }
                    sum += g;
                    if sum > 1.0 + PARTIAL_SUM_TOLERANCE {
                        return Err(Error::Discount(format!(
                            "partial sum through t = {} is {sum}, exceeding 1",
                            i + 1
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// `γ_t` for `t ≥ 1`.
    pub fn gamma(&self, t: usize) -> f64 {
        assert!(t >= 1, "discount index must be ≥ 1");
        match self {
            DiscountSequence::Default => {
                let t = t as f64;
                1.0 / (t * (t + 1.0))
            }
            DiscountSequence::Explicit { terms } => terms.get(t - 1).copied().unwrap_or(0.0),
        }
    }

    /// `Σ_{i ≤ t} γ_i`.
    pub fn partial_sum(&self, t: usize) -> f64 {
        match self {
            DiscountSequence::Default => t as f64 / (t as f64 + 1.0),
            DiscountSequence::Explicit { terms } => terms.iter().take(t).sum(),
        }
    }
}
