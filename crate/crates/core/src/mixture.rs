//! Particle-anchored Gaussian mixtures.
//!
//! A covariance is factored once into [`Covariance`] and shared between every
//! component that uses it, which is the common case of one `Sigma` for the
//! whole ensemble.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::hermite::HermiteExpansion;
use crate::{Error, Result};

/// Densities whose log-exponent falls below this are combined in log space.
const UNDERFLOW_EXPONENT: f64 = -700.0;

/// A symmetric positive-definite covariance with its cached factorizations.
#[derive(Debug, Clone)]
pub struct Covariance {
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    /// Eigenvalues of the precision matrix.
    eigenvalues: DVector<f64>,
    /// Rows are the eigenvectors, so `precision = P^T diag(eigenvalues) P`.
    rotation: DMatrix<f64>,
    log_det: f64,
    diagonal: bool,
}

impl Covariance {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        let d = covariance.nrows();
        if d == 0 {
            return Err(Error::InvalidArgument("covariance must be non-empty"));
        }
        if covariance.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: covariance.ncols() });
        }
        let scale = covariance.amax();
        for i in 0..d {
            for j in 0..i {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || covariance[(i, j)] == 0.0));
        if diagonal {
            let diag: Vec<f64> = (0..d).map(|i| covariance[(i, i)]).collect();
            if diag.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::NotPositiveDefinite);
            }
            let eigenvalues = DVector::from_iterator(d, diag.iter().map(|v| 1.0 / v));
            return Ok(Covariance {
                precision: DMatrix::from_diagonal(&eigenvalues),
                eigenvalues,
                rotation: DMatrix::identity(d, d),
                log_det: diag.iter().map(|v| libm::log(*v)).sum(),
                diagonal,
                covariance,
            });
        }
        let eig = covariance.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::NotPositiveDefinite);
        }
        let eigenvalues = eig.eigenvalues.map(|v| 1.0 / v);
        let rotation = eig.eigenvectors.transpose();
        let mut precision = rotation.transpose() * DMatrix::from_diagonal(&eigenvalues) * &rotation;
        // Exact symmetry keeps downstream block matrices symmetric.
        precision = (&precision + precision.transpose()) * 0.5;
        Ok(Covariance {
            log_det: eig.eigenvalues.iter().map(|v| libm::log(*v)).sum(),
            covariance,
            precision,
            eigenvalues,
            rotation,
            diagonal,
        })
    }

    /// `eps * I_d`.
    pub fn isotropic(d: usize, eps: f64) -> Result<Self> {
        Self::new(DMatrix::from_diagonal_element(d, d, eps))
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn precision_eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    /// `v^T Sigma^-1 v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let d = self.dim();
        if self.diagonal {
            return v.iter().enumerate().map(|(l, &vl)| self.eigenvalues[l] * vl * vl).sum();
        }
        let mut acc = 0.0;
        for l in 0..d {
            let mut row = 0.0;
            for m in 0..d {
                row += self.precision[(l, m)] * v[m];
            }
            acc += v[l] * row;
        }
        acc
    }

    /// `out = Sigma^-1 v`.
    pub fn apply_precision(&self, v: &[f64], out: &mut [f64]) {
        let d = self.dim();
        if self.diagonal {
            for l in 0..d {
                out[l] = self.eigenvalues[l] * v[l];
            }
            return;
        }
        for l in 0..d {
            out[l] = (0..d).map(|m| self.precision[(l, m)] * v[m]).sum();
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaussianComponent {
    mean: Vec<f64>,
    covariance: Arc<Covariance>,
}

impl GaussianComponent {
    pub fn new(mean: Vec<f64>, covariance: Arc<Covariance>) -> Result<Self> {
        if mean.len() != covariance.dim() {
            return Err(Error::DimensionMismatch { expected: covariance.dim(), found: mean.len() });
        }
        Ok(GaussianComponent { mean, covariance })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Arc<Covariance> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `ln` of the normalizing constant `(2 pi)^(-d/2) |Sigma|^(-1/2)`.
    pub fn log_normalizer(&self) -> f64 {
        -0.5 * (self.dim() as f64) * libm::log(2.0 * PI) - 0.5 * self.covariance.log_det()
    }

    fn squared_radial(&self, x: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        self.covariance.quadratic_form(&diff)
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check(self.dim(), x.len())?;
        Ok(self.log_normalizer() - 0.5 * self.squared_radial(x))
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(libm::exp(self.log_density(x)?))
    }

    /// `sqrt((x - mu)^T Sigma^-1 (x - mu))`.
    pub fn weighted_radial(&self, x: &[f64]) -> Result<f64> {
        check(self.dim(), x.len())?;
        Ok(libm::sqrt(self.squared_radial(x)))
    }
}

fn check(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Equal-weight Gaussian mixture.
#[derive(Debug, Clone)]
pub struct Mixture {
    components: Vec<GaussianComponent>,
}

impl Mixture {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        let first = components.first().ok_or(Error::EmptyEnsemble)?;
        let d = first.dim();
        for c in &components {
            check(d, c.dim())?;
        }
        Ok(Mixture { components })
    }

    /// One component per row of `states` (row-major, `d` columns), all sharing `covariance`.
    pub fn from_states(states: &[f64], covariance: Arc<Covariance>) -> Result<Self> {
        let d = covariance.dim();
        if states.len() % d != 0 {
            return Err(Error::DimensionMismatch { expected: d, found: states.len() % d });
        }
        let components = states
            .chunks_exact(d)
            .map(|x| GaussianComponent::new(x.to_vec(), covariance.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let logs = self.components.iter().map(|c| c.log_density(x)).collect::<Result<Vec<_>>>()?;
        Ok(log_mean_exp(&logs))
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        let logs = self.components.iter().map(|c| c.log_density(x)).collect::<Result<Vec<_>>>()?;
        if logs.iter().all(|&l| l >= UNDERFLOW_EXPONENT) {
            let n = logs.len() as f64;
            return Ok(logs.iter().map(|&l| libm::exp(l)).sum::<f64>() / n);
        }
        Ok(libm::exp(log_mean_exp(&logs)))
    }
}

/// `ln((1/n) sum_i exp(v_i))` with a max shift.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|&v| libm::exp(v - max)).sum();
    max + libm::log(sum / values.len() as f64)
}

/// Particle average of every observation channel. `states` is row-major with
/// `dim` columns.
pub fn empirical_obs_mean(states: &[f64], dim: usize, h: &[HermiteExpansion]) -> Result<Vec<f64>> {
    if states.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let n = states.len() / dim;
    let mut mean = vec![0.0; h.len()];
    for x in states.chunks_exact(dim) {
        for (m, hj) in mean.iter_mut().zip(h) {
            *m += hj.eval(x)?;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    Ok(mean)
}
