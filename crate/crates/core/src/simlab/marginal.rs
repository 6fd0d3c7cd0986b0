//! Beta law rescaled to a bounded support, parameterised by its mean.

use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{domain, Result};

/// `ℓ + (u-ℓ)·B` with `B ~ Beta(a, b)`, `a + b = concentration` and mean `mu`.
#[derive(Debug, Clone)]
pub struct ScaledBeta {
    lower: f64,
    upper: f64,
    mean: f64,
    beta: Beta,
}

impl ScaledBeta {
    pub fn new(mean: f64, concentration: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper && mean > lower && mean < upper) {
            return domain(format!("mean {mean} must lie strictly inside ({lower}, {upper})"));
        }
        if !(concentration > 0.0 && concentration.is_finite()) {
            return domain(format!("Beta concentration must be positive, got {concentration}"));
        }
        let width = upper - lower;
        let a = (mean - lower) * concentration / width;
        let b = (upper - mean) * concentration / width;
        let beta = Beta::new(a, b).map_err(|e| crate::error::Error::Domain(format!("Beta({a}, {b}): {e}")))?;
        Ok(ScaledBeta {
            lower,
            upper,
            mean,
            beta,
        })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// Inverse CDF, clamped into the support.
    pub fn quantile(&self, p: f64) -> f64 {
        let q = self.beta.inverse_cdf(p.clamp(0.0, 1.0));
        (self.lower + (self.upper - self.lower) * q).clamp(self.lower, self.upper)
    }
}
