//! Gaussian copula with a banded correlation profile across hypotheses.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

/// `Σ_{ij} = 0.5^{|i-j|}·1{|i-j| ≤ lag}`.
pub fn banded_covariance(dim: usize, lag: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| {
        let d = i.abs_diff(j);
        if d <= lag {
            0.5f64.powi(d as i32)
        } else {
            0.0
        }
    })
}

/// Factor `A` with `AAᵀ` equal to `sigma` after clipping negative eigenvalues
/// to zero and rescaling rows so every variance is one.
pub fn psd_factor(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (sigma + sigma.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let mut a = eig.eigenvectors.clone();
    for (j, r) in roots.iter().enumerate() {
        a.column_mut(j).scale_mut(*r);
    }
    for mut row in a.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    a
}

type FactorCache = Mutex<HashMap<(usize, usize), Arc<DMatrix<f64>>>>;

/// Cached [`psd_factor`] of [`banded_covariance`], keyed by `(dim, lag)`.
pub fn banded_factor(dim: usize, lag: usize) -> Arc<DMatrix<f64>> {
    static CACHE: OnceLock<FactorCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(f) = cache.lock().unwrap().get(&(dim, lag)) {
        return Arc::clone(f);
    }
    let f = Arc::new(if lag == 0 {
        DMatrix::identity(dim, dim)
    } else {
        psd_factor(&banded_covariance(dim, lag))
    });
    cache.lock().unwrap().entry((dim, lag)).or_insert(f).clone()
}
