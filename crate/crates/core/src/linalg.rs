//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// First jitter step, relative to the mean of the diagonal.
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-6;

/// A Cholesky factorization together with the diagonal jitter it needed.
pub struct Factor {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl Factor {
    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Cholesky factorization with escalating diagonal jitter.
///
/// The matrix is tried as given, then with `1e-10 * mean(diag)` added,
/// escalating by a factor of ten up to `1e-6 * mean(diag)`.
pub fn cholesky_jittered(m: &DMatrix<f64>, context: &str) -> Result<Factor> {
    if let Some(chol) = Cholesky::new(m.clone()) {
        return Ok(Factor { chol, jitter: 0.0 });
    }
    let n = m.nrows();
    let mean_diag = if n == 0 { 0.0 } else { m.diagonal().mean() };
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * mean_diag;
        if jitter > 0.0 {
            let mut mm = m.clone();
            for i in 0..n {
                mm[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(mm) {
                log::debug!("{context}: factorized with jitter {jitter:e}");
                return Ok(Factor { chol, jitter });
            }
        }
        rel *= 10.0;
    }
    Err(Error::Conditioning {
        context: context.to_string(),
        min_eigenvalue: min_eigenvalue(m),
    })
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NAN;
    }
    if !m.iter().all(|v| v.is_finite()) {
        return f64::NAN;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Largest absolute asymmetry relative to the largest absolute entry.
pub fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn require_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub fn require_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    require_square(m)?;
    let asym = relative_asymmetry(m);
    if asym > tol {
        return Err(Error::Shape(format!(
            "matrix is not symmetric (relative asymmetry {asym:e})"
        )));
    }
    Ok(())
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}
