//! Kernel matrices and spatially-varying parameter fields.
//!
//! A [`KernelMatrix`] is the covariance matrix of a Gaussian smoothing kernel
//! at one site; its one-standard-deviation ellipse shows the local range and
//! direction of dependence. [`KernelField`] and [`ScalarField`] assign such
//! parameters to every location, either as a constant, as a distance-weighted
//! convex combination of basis values, or through log-linear covariate links.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::location::Location;

/// Symmetric positive-definite matrix of dimension 1 or 2.
///
/// Stored as the upper triangle `(a, b, c)` of `[[a, b], [b, c]]`; in one
/// dimension only `a` is meaningful.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct KernelMatrix {
    dim: usize,
    a: f64,
    b: f64,
    c: f64,
}

/// Eigen-parameterization of a 2x2 kernel matrix.
///
/// `eigenvalue1` belongs to the eigenvector at `angle` (radians, counter-clockwise
/// from the x axis). Matrices produced by [`KernelMatrix::to_spectral`] have
/// `eigenvalue1 >= eigenvalue2` and `angle` in `[0, pi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectral {
    pub eigenvalue1: f64,
    pub eigenvalue2: f64,
    pub angle: f64,
}

/// Lower Cholesky factor of a [`KernelMatrix`].
#[derive(Clone, Copy, Debug)]
pub struct SmallCholesky {
    dim: usize,
    l11: f64,
    l21: f64,
    l22: f64,
}

impl SmallCholesky {
    pub fn log_det(&self) -> f64 {
        if self.dim == 1 {
            2.0 * self.l11.ln()
        } else {
            2.0 * (self.l11.ln() + self.l22.ln())
        }
    }

    /// `h' M^{-1} h` by forward substitution.
    pub fn quad_inv(&self, h: &[f64; 2]) -> f64 {
        let z1 = h[0] / self.l11;
        if self.dim == 1 {
            return z1 * z1;
        }
        let z2 = (h[1] - self.l21 * z1) / self.l22;
        z1 * z1 + z2 * z2
    }
}

impl KernelMatrix {
    pub fn scalar(v: f64) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return domain(format!("1-d kernel variance must be positive, got {v}"));
        }
        Ok(Self {
            dim: 1,
            a: v,
            b: 0.0,
            c: 0.0,
        })
    }

    /// `[[a, b], [b, c]]`, checked for positive definiteness.
    pub fn from_entries(a: f64, b: f64, c: f64) -> Result<Self> {
        let m = Self { dim: 2, a, b, c };
        m.validate()?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        match rows {
            [r] if r.len() == 1 => Self::scalar(r[0]),
            [r0, r1] if r0.len() == 2 && r1.len() == 2 => {
                let scale = r0[1].abs().max(r1[0].abs()).max(f64::MIN_POSITIVE);
                if (r0[1] - r1[0]).abs() > 1e-12 * scale {
                    return Err(Error::Shape(format!(
                        "kernel matrix is not symmetric: {} vs {}",
                        r0[1], r1[0]
                    )));
                }
                Self::from_entries(r0[0], 0.5 * (r0[1] + r1[0]), r1[1])
            }
            _ => Err(Error::Shape("kernel matrix must be 1x1 or 2x2".into())),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            a: 1.0,
            b: 0.0,
            c: if dim == 2 { 1.0 } else { 0.0 },
        }
    }

    pub fn diagonal(d1: f64, d2: f64) -> Result<Self> {
        Self::from_entries(d1, 0.0, d2)
    }

    /// `R(angle) diag(eigenvalue1, eigenvalue2) R(angle)'`.
    pub fn from_spectral(eigenvalue1: f64, eigenvalue2: f64, angle: f64) -> Result<Self> {
        if !(eigenvalue1 > 0.0 && eigenvalue2 > 0.0) || !eigenvalue1.is_finite() || !eigenvalue2.is_finite() {
            return domain(format!(
                "kernel eigenvalues must be positive and finite, got ({eigenvalue1}, {eigenvalue2})"
            ));
        }
        if !angle.is_finite() {
            return domain("kernel angle must be finite");
        }
        let (s, c) = angle.sin_cos();
        Ok(Self {
            dim: 2,
            a: eigenvalue1 * c * c + eigenvalue2 * s * s,
            b: (eigenvalue1 - eigenvalue2) * s * c,
            c: eigenvalue1 * s * s + eigenvalue2 * c * c,
        })
    }

    pub fn to_spectral(&self) -> Spectral {
        if self.dim == 1 {
            return Spectral {
                eigenvalue1: self.a,
                eigenvalue2: self.a,
                angle: 0.0,
            };
        }
        let mean = 0.5 * (self.a + self.c);
        let half_diff = 0.5 * (self.a - self.c);
        let r = half_diff.hypot(self.b);
        let eigenvalue1 = mean + r;
        let eigenvalue2 = self.det() / eigenvalue1;
        let angle = if r == 0.0 {
            0.0
        } else {
            let t = 0.5 * (2.0 * self.b).atan2(self.a - self.c);
            if t < 0.0 {
                t + std::f64::consts::PI
            } else {
                t
            }
        };
        Spectral {
            eigenvalue1,
            eigenvalue2,
            angle,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Upper-triangle entries `(a, b, c)`.
    pub fn entries(&self) -> (f64, f64, f64) {
        (self.a, self.b, self.c)
    }

    pub fn det(&self) -> f64 {
        if self.dim == 1 {
            self.a
        } else {
            self.a * self.c - self.b * self.b
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.a.is_finite() && self.b.is_finite() && self.c.is_finite();
        let pd = if self.dim == 1 {
            self.a > 0.0
        } else {
            self.a > 0.0 && self.c > 0.0 && self.det() > 0.0
        };
        if !(finite && pd) {
            return domain(format!(
                "kernel matrix is not positive definite: [[{}, {}], [{}, {}]]",
                self.a, self.b, self.b, self.c
            ));
        }
        Ok(())
    }

    pub fn cholesky(&self) -> SmallCholesky {
        let l11 = self.a.sqrt();
        if self.dim == 1 {
            return SmallCholesky {
                dim: 1,
                l11,
                l21: 0.0,
                l22: 0.0,
            };
        }
        let l21 = self.b / l11;
        let l22 = (self.c - l21 * l21).max(0.0).sqrt();
        SmallCholesky { dim: 2, l11, l21, l22 }
    }

    pub fn log_det(&self) -> f64 {
        self.cholesky().log_det()
    }

    /// `(self + other) / 2`.
    pub fn average(&self, other: &KernelMatrix) -> KernelMatrix {
        KernelMatrix {
            dim: self.dim,
            a: 0.5 * (self.a + other.a),
            b: 0.5 * (self.b + other.b),
            c: 0.5 * (self.c + other.c),
        }
    }

    pub fn scaled(&self, factor: f64) -> KernelMatrix {
        KernelMatrix {
            dim: self.dim,
            a: self.a * factor,
            b: self.b * factor,
            c: self.c * factor,
        }
    }

    /// Largest standard deviation of the kernel along any direction.
    pub fn max_std(&self) -> f64 {
        self.to_spectral().eigenvalue1.sqrt()
    }

    pub fn frobenius_distance(&self, other: &KernelMatrix) -> f64 {
        let da = self.a - other.a;
        let db = self.b - other.b;
        let dc = self.c - other.c;
        (da * da + 2.0 * db * db + dc * dc).sqrt()
    }

    pub fn frobenius_norm(&self) -> f64 {
        (self.a * self.a + 2.0 * self.b * self.b + self.c * self.c).sqrt()
    }
}

impl TryFrom<Vec<Vec<f64>>> for KernelMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        KernelMatrix::from_rows(&rows)
    }
}

impl From<KernelMatrix> for Vec<Vec<f64>> {
    fn from(m: KernelMatrix) -> Self {
        if m.dim == 1 {
            vec![vec![m.a]]
        } else {
            vec![vec![m.a, m.b], vec![m.b, m.c]]
        }
    }
}

/// Affine map `intercept + coefficients . x` of a covariate vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariateLink {
    pub intercept: f64,
    #[serde(default)]
    pub coefficients: Vec<f64>,
}

impl CovariateLink {
    pub fn constant(intercept: f64) -> Self {
        Self {
            intercept,
            coefficients: Vec::new(),
        }
    }

    pub fn eval(&self, covariates: &[f64]) -> Option<f64> {
        if covariates.len() < self.coefficients.len() {
            return None;
        }
        Some(
            self.intercept
                + self
                    .coefficients
                    .iter()
                    .zip(covariates)
                    .map(|(b, x)| b * x)
                    .sum::<f64>(),
        )
    }
}

/// Normalized weights `w_m(s) ∝ exp(-||s - b_m||^2 / (2 bandwidth^2))`.
pub fn mixture_weights(basis: &[Location], bandwidth: f64, s: &Location) -> Vec<f64> {
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let logits: Vec<f64> = basis.iter().map(|b| -s.distance_squared(b) * inv).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Half the smallest distance between distinct basis locations; 1 for a single basis point.
pub fn default_bandwidth(basis: &[Location]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in basis.iter().enumerate() {
        for b in &basis[i + 1..] {
            let d = a.distance(b);
            if d > 0.0 {
                best = best.min(d);
            }
        }
    }
    if best.is_finite() {
        0.5 * best
    } else {
        1.0
    }
}

fn validate_basis(basis: &[Location], n_values: usize, bandwidth: f64) -> Result<()> {
    if basis.is_empty() {
        return domain("mixture field needs at least one basis location");
    }
    if basis.len() != n_values {
        return Err(Error::Shape(format!(
            "{} basis locations but {} basis values",
            basis.len(),
            n_values
        )));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return domain(format!("mixture bandwidth must be positive, got {bandwidth}"));
    }
    for (i, a) in basis.iter().enumerate() {
        if !a.is_finite() {
            return domain(format!("basis location {i} is not finite"));
        }
        if basis[i + 1..].iter().any(|b| b == a) {
            return domain(format!("basis location {i} is duplicated"));
        }
    }
    Ok(())
}

/// Spatially-varying kernel matrix Σ(s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelField {
    Constant {
        matrix: KernelMatrix,
    },
    /// Σ(s) = Σ_m w_m(s) Σ_m with Gaussian distance weights.
    Mixture {
        basis: Vec<Location>,
        kernels: Vec<KernelMatrix>,
        bandwidth: f64,
    },
    /// Log-eigenvalues and angle affine in the covariates; in one dimension
    /// only `log_eigenvalue1` is used.
    Covariate {
        log_eigenvalue1: CovariateLink,
        log_eigenvalue2: CovariateLink,
        angle: CovariateLink,
    },
}

impl KernelField {
    pub fn constant(matrix: KernelMatrix) -> Self {
        KernelField::Constant { matrix }
    }

    /// Mixture field; `bandwidth = None` picks [`default_bandwidth`].
    pub fn mixture(basis: Vec<Location>, kernels: Vec<KernelMatrix>, bandwidth: Option<f64>) -> Result<Self> {
        let bandwidth = bandwidth.unwrap_or_else(|| default_bandwidth(&basis));
        let f = KernelField::Mixture {
            basis,
            kernels,
            bandwidth,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelField::Constant { matrix } => matrix.validate(),
            KernelField::Mixture {
                basis,
                kernels,
                bandwidth,
            } => {
                validate_basis(basis, kernels.len(), *bandwidth)?;
                let dim = kernels[0].dim();
                for (k, b) in kernels.iter().zip(basis) {
                    k.validate()?;
                    if k.dim() != dim || b.dim() != dim {
                        return Err(Error::Shape("mixture kernels and basis locations disagree in dimension".into()));
                    }
                }
                Ok(())
            }
            KernelField::Covariate { .. } => Ok(()),
        }
    }

    pub fn needs_covariates(&self) -> bool {
        match self {
            KernelField::Covariate {
                log_eigenvalue1,
                log_eigenvalue2,
                angle,
            } => [log_eigenvalue1, log_eigenvalue2, angle]
                .iter()
                .any(|l| !l.coefficients.is_empty()),
            _ => false,
        }
    }

    /// Σ(s). `covariates` is only consulted by covariate-driven fields.
    pub fn eval(&self, s: &Location, covariates: &[f64]) -> Result<KernelMatrix> {
        match self {
            KernelField::Constant { matrix } => Ok(*matrix),
            KernelField::Mixture {
                basis,
                kernels,
                bandwidth,
            } => {
                let w = mixture_weights(basis, *bandwidth, s);
                let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
                for (wm, k) in w.iter().zip(kernels) {
                    let (ka, kb, kc) = k.entries();
                    a += wm * ka;
                    b += wm * kb;
                    c += wm * kc;
                }
                Ok(KernelMatrix {
                    dim: kernels[0].dim(),
                    a,
                    b,
                    c,
                })
            }
            KernelField::Covariate {
                log_eigenvalue1,
                log_eigenvalue2,
                angle,
            } => {
                let missing = || Error::Input("covariate vector too short for kernel field".into());
                let l1 = log_eigenvalue1.eval(covariates).ok_or_else(missing)?.exp();
                if s.dim() == 1 {
                    return KernelMatrix::scalar(l1);
                }
                let l2 = log_eigenvalue2.eval(covariates).ok_or_else(missing)?.exp();
                let th = angle.eval(covariates).ok_or_else(missing)?;
                KernelMatrix::from_spectral(l1, l2, th)
            }
        }
    }
}

/// Spatially-varying positive scalar such as σ(s) or κ(s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarField {
    Constant {
        value: f64,
    },
    Mixture {
        basis: Vec<Location>,
        values: Vec<f64>,
        bandwidth: f64,
    },
    /// `exp(intercept + coefficients . x(s))`.
    Covariate {
        log_value: CovariateLink,
    },
}

impl ScalarField {
    pub fn constant(value: f64) -> Self {
        ScalarField::Constant { value }
    }

    pub fn mixture(basis: Vec<Location>, values: Vec<f64>, bandwidth: Option<f64>) -> Result<Self> {
        let bandwidth = bandwidth.unwrap_or_else(|| default_bandwidth(&basis));
        let f = ScalarField::Mixture {
            basis,
            values,
            bandwidth,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScalarField::Constant { value } => {
                if !(*value > 0.0 && value.is_finite()) {
                    return domain(format!("scalar field value must be positive, got {value}"));
                }
                Ok(())
            }
            ScalarField::Mixture {
                basis,
                values,
                bandwidth,
            } => {
                validate_basis(basis, values.len(), *bandwidth)?;
                if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                    return domain(format!("scalar field basis value must be positive, got {v}"));
                }
                Ok(())
            }
            ScalarField::Covariate { .. } => Ok(()),
        }
    }

    pub fn needs_covariates(&self) -> bool {
        matches!(self, ScalarField::Covariate { log_value } if !log_value.coefficients.is_empty())
    }

    pub fn eval(&self, s: &Location, covariates: &[f64]) -> Result<f64> {
        match self {
            ScalarField::Constant { value } => Ok(*value),
            ScalarField::Mixture {
                basis,
                values,
                bandwidth,
            } => {
                let w = mixture_weights(basis, *bandwidth, s);
                Ok(w.iter().zip(values).map(|(w, v)| w * v).sum())
            }
            ScalarField::Covariate { log_value } => {
                let v = log_value
                    .eval(covariates)
                    .ok_or_else(|| Error::Input("covariate vector too short for scalar field".into()))?
                    .exp();
                if !(v > 0.0 && v.is_finite()) {
                    return domain(format!("covariate-driven field evaluated to {v}"));
                }
                Ok(v)
            }
        }
    }
}
