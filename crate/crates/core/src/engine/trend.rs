use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, Factor};
use crate::location::Location;

/// Mean structure: zero, a constant, or linear in the coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendKind {
    Zero,
    #[default]
    Constant,
    Linear,
}

impl TrendKind {
    pub fn n_coefficients(&self, dim: usize) -> usize {
        match self {
            TrendKind::Zero => 0,
            TrendKind::Constant => 1,
            TrendKind::Linear => 1 + dim,
        }
    }

    pub fn design_row(&self, s: &Location) -> Vec<f64> {
        match self {
            TrendKind::Zero => vec![],
            TrendKind::Constant => vec![1.0],
            TrendKind::Linear => std::iter::once(1.0).chain(s.coords().iter().copied()).collect(),
        }
    }

    pub fn design(&self, locs: &[Location]) -> DMatrix<f64> {
        let p = self.n_coefficients(locs.first().map(|l| l.dim()).unwrap_or(2));
        let mut x = DMatrix::zeros(locs.len(), p);
        for (i, s) in locs.iter().enumerate() {
            for (j, v) in self.design_row(s).into_iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        x
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub kind: TrendKind,
    pub coefficients: Vec<f64>,
}

impl Trend {
    pub fn zero() -> Self {
        Self {
            kind: TrendKind::Zero,
            coefficients: vec![],
        }
    }

    pub fn constant(mean: f64) -> Self {
        Self {
            kind: TrendKind::Constant,
            coefficients: vec![mean],
        }
    }

    pub fn mean(&self, s: &Location) -> f64 {
        self.kind
            .design_row(s)
            .iter()
            .zip(&self.coefficients)
            .map(|(x, b)| x * b)
            .sum()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let p = self.kind.n_coefficients(dim);
        if self.coefficients.len() != p {
            return Err(Error::Shape(format!(
                "{:?} trend needs {p} coefficients, got {}",
                self.kind,
                self.coefficients.len()
            )));
        }
        Ok(())
    }
}

/// Generalized least squares pooled over replicates, given the factor of the
/// observation covariance. Returns the coefficients and the factor of `X'K^{-1}X`.
pub(crate) fn gls(factor: &Factor, x: &DMatrix<f64>, values: &[Vec<f64>]) -> Result<(Vec<f64>, Option<Factor>)> {
    let p = x.ncols();
    if p == 0 {
        return Ok((vec![], None));
    }
    let kx = factor.chol.solve(x);
    let xtkx = x.transpose() * &kx;
    let xf = cholesky_jittered(&xtkx, "trend design")?;
    let mut rhs = DVector::zeros(p);
    for y in values {
        rhs += kx.transpose() * DVector::from_column_slice(y);
    }
    rhs /= values.len() as f64;
    let beta = xf.chol.solve(&rhs);
    Ok((beta.iter().copied().collect(), Some(xf)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_design_rows() {
        assert_eq!(TrendKind::Linear.design_row(&Location::xy(2.0, 3.0)), vec![1.0, 2.0, 3.0]);
        assert_eq!(TrendKind::Linear.design_row(&Location::x(2.0)), vec![1.0, 2.0]);
        assert!(TrendKind::Zero.design_row(&Location::x(2.0)).is_empty());
        let t = Trend {
            kind: TrendKind::Linear,
            coefficients: vec![1.0, -1.0, 0.5],
        };
        assert_eq!(t.mean(&Location::xy(2.0, 4.0)), 1.0);
    }

    #[test]
    fn gls_with_identity_is_ols() {
        let locs: Vec<Location> = (0..5).map(|i| Location::xy(i as f64, 0.0)).collect();
        let x = TrendKind::Linear.design(&locs);
        let y: Vec<f64> = (0..5).map(|i| 2.0 + 0.5 * i as f64).collect();
        let f = cholesky_jittered(&DMatrix::identity(5, 5), "t").unwrap();
        // y-coordinate column is all zero, so restrict to the first two columns
        let x2 = x.columns(0, 2).into_owned();
        let (b, _) = gls(&f, &x2, &[y]).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-12 && (b[1] - 0.5).abs() < 1e-12);
    }
}
