//! Empirical covariance from replicated fields, empirical orthogonal functions
//! and truncated Karhunen–Loève covariances.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg;
use crate::location::Location;

/// `(1/R) Σ_r y_r y_r'` over `R` mean-zero replicates.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCovariance {
    pub matrix: DMatrix<f64>,
    pub replicates: usize,
}

/// Eigenpairs sorted by decreasing eigenvalue; `vectors` holds them as columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EofBasis {
    pub eigenvalues: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EofBasis {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Truncated Karhunen–Loève covariance attached to the locations its basis was built on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlSpec {
    pub locations: Vec<Location>,
    pub basis: EofBasis,
    pub rank: usize,
}

impl KlSpec {
    pub fn validate(&self) -> Result<()> {
        if self.locations.len() != self.basis.vectors.nrows() {
            return Err(Error::Shape(format!(
                "{} locations but EOFs of length {}",
                self.locations.len(),
                self.basis.vectors.nrows()
            )));
        }
        if self.rank == 0 || self.rank > self.basis.len() {
            return domain(format!("truncation rank {} outside 1..={}", self.rank, self.basis.len()));
        }
        Ok(())
    }

    pub fn index_of(&self, s: &Location) -> Option<usize> {
        self.locations.iter().position(|l| l == s)
    }

    /// `Σ_{l<rank} λ_l E_l(i) E_l(j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let v = &self.basis.vectors;
        (0..self.rank)
            .map(|l| self.basis.eigenvalues[l] * v[(i, l)] * v[(j, l)])
            .sum()
    }
}

/// Rows of `data` are replicates, columns are locations.
pub fn empirical_cov(data: &[Vec<f64>]) -> Result<EmpiricalCovariance> {
    let r = data.len();
    if r == 0 {
        return Err(Error::EmptyData);
    }
    let n = data[0].len();
    if let Some(bad) = data.iter().position(|y| y.len() != n) {
        return Err(Error::Shape(format!(
            "replicate {bad} has {} values, expected {n}",
            data[bad].len()
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    for y in data {
        for i in 0..n {
            for j in i..n {
                m[(i, j)] += y[i] * y[j];
            }
        }
    }
    let inv = 1.0 / r as f64;
    for i in 0..n {
        for j in i..n {
            let v = m[(i, j)] * inv;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(EmpiricalCovariance { matrix: m, replicates: r })
}

/// Spectral decomposition `C = E D E'`.
pub fn eof_decompose(c: &DMatrix<f64>) -> Result<EofBasis> {
    linalg::require_symmetric(c, 1e-10)?;
    let n = c.nrows();
    let sym = 0.5 * (c + c.transpose());
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order.first().map(|&i| eig.eigenvalues[i].abs()).unwrap_or(0.0);
    let eigenvalues = order
        .iter()
        .map(|&i| {
            let v = eig.eigenvalues[i];
            // rounding noise around zero on nonnegative-definite input
            if v < 0.0 && v.abs() <= 1e-12 * top {
                0.0
            } else {
                v
            }
        })
        .collect();
    let vectors = DMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    Ok(EofBasis { eigenvalues, vectors })
}

/// Rank-`rank` truncation `Σ_{l<=rank} λ_l E_l E_l'`.
pub fn kl_truncated_cov(basis: &EofBasis, rank: usize) -> Result<DMatrix<f64>> {
    let n = basis.len();
    if rank == 0 || rank > n {
        return domain(format!("truncation rank {rank} outside 1..={n}"));
    }
    let e = basis.vectors.columns(0, rank);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&basis.eigenvalues[..rank]));
    let m = &e * d * e.transpose();
    Ok(0.5 * (&m + m.transpose()))
}

/// Frobenius norm of `C - kl_truncated_cov(basis, rank)`.
pub fn truncation_error(c: &DMatrix<f64>, basis: &EofBasis, rank: usize) -> Result<f64> {
    Ok(linalg::frobenius(&(c - kl_truncated_cov(basis, rank)?)))
}
