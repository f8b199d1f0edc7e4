//! Extended Kalman filter with Euler prediction.
//!
//! Increments are treated as the measurement `dZ / dt` with noise covariance
//! `R^2 / dt`, applied at the start of the step; discrete samples are applied
//! after prediction with covariance `R^2`. The covariance update uses the
//! Joseph form.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::filters::{ObservationKind, SdeModel};
use crate::{Error, Result};

/// Eigenvalues of `P` are clamped to at least this value after each update.
const EIGEN_FLOOR: f64 = -1e-10;

#[derive(Debug, Clone)]
pub struct Ekf {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl Ekf {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: cov.nrows() });
        }
        if cov.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Ekf { mean: DVector::from_vec(mean), cov })
    }

    pub fn estimate(&self) -> Vec<f64> {
        self.mean.iter().copied().collect()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    fn predict(&mut self, model: &dyn SdeModel, dt: f64) {
        let d = model.dim();
        let x: Vec<f64> = self.mean.iter().copied().collect();
        let mut g = vec![0.0; d];
        model.drift(&x, &mut g);
        let mut jac = vec![0.0; d * d];
        model.drift_jacobian(&x, &mut jac);
        let mut sig = vec![0.0; d * d];
        model.diffusion(&x, &mut sig);
        let f = DMatrix::identity(d, d) + DMatrix::from_row_slice(d, d, &jac) * dt;
        let s = DMatrix::from_row_slice(d, d, &sig);
        self.cov = &f * &self.cov * f.transpose() + &s * s.transpose() * dt;
        for (m, gi) in self.mean.iter_mut().zip(&g) {
            *m += gi * dt;
        }
        let mut x: Vec<f64> = self.mean.iter().copied().collect();
        model.project(&mut x);
        self.mean = DVector::from_vec(x);
    }

    fn update(&mut self, model: &dyn SdeModel, y: &[f64], noise_var: f64) -> Result<()> {
        let (d, m) = (model.dim(), model.obs_dim());
        let x: Vec<f64> = self.mean.iter().copied().collect();
        let mut hx = vec![0.0; m];
        model.observe(&x, &mut hx);
        let mut hj = vec![0.0; m * d];
        model.obs_jacobian(&x, &mut hj);
        let h = DMatrix::from_row_slice(m, d, &hj);
        let rm = DMatrix::identity(m, m) * noise_var;
        let s = &h * &self.cov * h.transpose() + &rm;
        let s_inv = s.try_inverse().ok_or(Error::SingularInnovation)?;
        if !s_inv.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularInnovation);
        }
        let k = &self.cov * h.transpose() * s_inv;
        let innov = DVector::from_iterator(m, y.iter().zip(&hx).map(|(a, b)| a - b));
        self.mean += &k * innov;
        let a = DMatrix::identity(d, d) - &k * &h;
        self.cov = &a * &self.cov * a.transpose() + &k * rm * k.transpose();
        let mut x: Vec<f64> = self.mean.iter().copied().collect();
        model.project(&mut x);
        self.mean = DVector::from_vec(x);
        Ok(())
    }

    fn condition(&mut self) {
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;
        if self.cov.clone().cholesky().is_some() {
            return;
        }
        let eig = self.cov.clone().symmetric_eigen();
        if eig.eigenvalues.iter().all(|&v| v >= EIGEN_FLOOR) {
            return;
        }
        let clamped = eig.eigenvalues.map(|v| v.max(0.0));
        let q = &eig.eigenvectors;
        self.cov = q * DMatrix::from_diagonal(&clamped) * q.transpose();
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;
    }

    /// Advances one step with observation `obs`.
    pub fn step(&mut self, model: &dyn SdeModel, obs: &[f64], dt: f64, step: usize) -> Result<()> {
        if obs.len() != model.obs_dim() {
            return Err(Error::DimensionMismatch { expected: model.obs_dim(), found: obs.len() });
        }
        let r2 = model.obs_noise() * model.obs_noise();
        match model.observation_kind() {
            ObservationKind::Increment => {
                let y: Vec<f64> = obs.iter().map(|z| z / dt).collect();
                self.update(model, &y, r2 / dt)?;
                self.predict(model, dt);
            }
            ObservationKind::Discrete => {
                self.predict(model, dt);
                self.update(model, obs, r2)?;
            }
        }
        self.condition();
        if self.mean.iter().chain(self.cov.iter()).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::IntegrationDiverged { step })
        }
    }
}
