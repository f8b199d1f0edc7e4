//! Time-stepping estimators driven by one Euler-Maruyama integrator: the
//! feedback particle filter, an extended Kalman filter and a bootstrap
//! particle filter.

mod ekf;
mod fpf;
mod pf;
mod run;

use alloc::vec;
use alloc::vec::Vec;

use crate::hermite::HermiteExpansion;
use crate::{Error, Result};

pub use ekf::Ekf;
pub use fpf::{control_u, Fpf, FpfConfig, GainMethod, NoiseScaling, OmegaMode};
pub use pf::{effective_sample_size, systematic_resample, ParticleFilter};
pub use run::{initial_ensemble, run_filter, simulate_truth, FilterMethod, FilterOutput, Trajectory};

/// How observations arrive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationKind {
    /// `dZ = h(X) dt + R dW`, delivered as increments over each step.
    Increment,
    /// `Z_k = h(X_{t_k}) + R W_k`, one sample at the end of each step.
    Discrete,
}

/// `dX = g(X) dt + sigma(X) dB` observed through polynomial channels `h`.
pub trait SdeModel: Send + Sync {
    fn dim(&self) -> usize;

    /// Observation channels in Hermite form.
    fn observation(&self) -> &[HermiteExpansion];

    fn obs_dim(&self) -> usize {
        self.observation().len()
    }

    /// Observation noise scale `R`.
    fn obs_noise(&self) -> f64;

    fn observation_kind(&self) -> ObservationKind {
        ObservationKind::Increment
    }

    fn drift(&self, x: &[f64], out: &mut [f64]);

    /// `sigma(x)`, row-major `d x d`.
    fn diffusion(&self, x: &[f64], out: &mut [f64]);

    /// `dg/dx`, row-major `d x d` with `out[i * d + k] = dg_i/dx_k`.
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]);

    /// `out += sigma(x) db`. Override when sigma has structure.
    fn add_diffusion(&self, x: &[f64], db: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut s = vec![0.0; d * d];
        self.diffusion(x, &mut s);
        for (i, o) in out.iter_mut().enumerate() {
            *o += s[i * d..(i + 1) * d].iter().zip(db).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Maps a state back into the model's domain, reporting whether it moved.
    fn project(&self, _x: &mut [f64]) -> bool {
        false
    }

    fn observe(&self, x: &[f64], out: &mut [f64]) {
        for (o, h) in out.iter_mut().zip(self.observation()) {
            *o = h.eval(x).expect("state dimension matches model");
        }
    }

    /// `dh/dx`, row-major `m x d`.
    fn obs_jacobian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (row, h) in out.chunks_exact_mut(d).zip(self.observation()) {
            row.copy_from_slice(&h.grad(x).expect("state dimension matches model"));
        }
    }
}

/// One Euler-Maruyama step `x + g(x) dt + sigma(x) db`.
pub fn euler_step(model: &dyn SdeModel, x: &[f64], dt: f64, db: &[f64]) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("time step must be positive"));
    }
    let d = model.dim();
    if x.len() != d || db.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: if x.len() != d { x.len() } else { db.len() } });
    }
    let mut out = vec![0.0; d];
    euler_into(model, x, dt, db, &mut out);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::IntegrationDiverged { step: 0 })
    }
}

pub(crate) fn euler_into(model: &dyn SdeModel, x: &[f64], dt: f64, db: &[f64], out: &mut [f64]) {
    model.drift(x, out);
    for (o, xi) in out.iter_mut().zip(x) {
        *o = xi + *o * dt;
    }
    model.add_diffusion(x, db, out);
}

/// Particle states, row-major with `dim` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    dim: usize,
    states: Vec<f64>,
}

impl Ensemble {
    pub fn new(dim: usize, states: Vec<f64>) -> Result<Self> {
        if dim == 0 || states.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if states.len() % dim != 0 {
            return Err(Error::LengthMismatch { left: states.len(), right: dim });
        }
        Ok(Ensemble { dim, states })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [f64] {
        &mut self.states
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for x in self.states.chunks_exact(self.dim) {
            for (a, b) in m.iter_mut().zip(x) {
                *a += b;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}
