//! The feedback particle filter.
//!
//! Each particle moves by
//!
//! ```text
//! X += g dt + sigma dB + s K (dZ - (h(X) + hbar) dt / 2) + s^2 Omega dt
//! ```
//!
//! with `hbar` the particle average of `h`, `Omega` the Wong-Zakai correction
//! and `s` the noise scaling. `Omega` is built from the scaled gain `s K`, so
//! it carries `s^2`. Discrete observations are first converted to
//! increments `dZ = Z dt`; the particles are then propagated before the
//! feedback is applied, so `h` is evaluated at the observation time.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::baselines::{constant_gain_from_values, kernel_gain_from_values, KernelGainConfig};
use crate::filters::{euler_into, Ensemble, ObservationKind, SdeModel};
use crate::gain::{DecompositionConfig, DecompositionSolver};
use crate::mixture::{Covariance, Mixture};
use crate::rng::{CounterRng, Stream};
use crate::{Error, Result};

/// Which gain approximation steers the particles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainMethod {
    Decomposition(DecompositionConfig),
    Constant,
    Kernel(KernelGainConfig),
}

/// How the Wong-Zakai correction is obtained for the decomposition gain.
/// The baselines always use zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum OmegaMode {
    #[default]
    Analytic,
    Fd,
    Zero,
}

/// Factor `s` applied to the feedback terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum NoiseScaling {
    /// `s = 1`: the unit-noise update taken literally.
    Unit,
    /// `s = 1 / R^2`, the gain for observation noise of intensity `R^2`.
    #[default]
    InverseR2,
    /// `s = 1 / R^2` for increments and `1 / (R^2 dt)` for discrete samples,
    /// the inverse intensity of the noise on `dZ = Z dt`.
    Matched,
}

impl NoiseScaling {
    pub fn factor(self, r: f64, kind: ObservationKind, dt: f64) -> f64 {
        match (self, kind) {
            (NoiseScaling::Unit, _) => 1.0,
            (NoiseScaling::InverseR2, _) | (NoiseScaling::Matched, ObservationKind::Increment) => 1.0 / (r * r),
            (NoiseScaling::Matched, ObservationKind::Discrete) => 1.0 / (r * r * dt),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpfConfig {
    pub gain: GainMethod,
    pub omega: OmegaMode,
    pub noise: NoiseScaling,
    /// Diagonal of the mixture covariance shared by all particles.
    pub sigma: Vec<f64>,
}

/// `u = -K (h + hbar) / 2 + Omega`, with `Omega_l = 1/2 sum_{k,s} K_ks dK_ls/dx_k`.
///
/// `k` is row-major `d x m`; `kgrad[(l * m + s) * d + k] = dK_ls/dx_k`.
pub fn control_u(k: &[f64], kgrad: &[f64], h: &[f64], hbar: &[f64]) -> Result<Vec<f64>> {
    let m = h.len();
    if hbar.len() != m {
        return Err(Error::LengthMismatch { left: hbar.len(), right: m });
    }
    if m == 0 || k.len() % m != 0 {
        return Err(Error::LengthMismatch { left: k.len(), right: m });
    }
    let d = k.len() / m;
    if kgrad.len() != d * m * d {
        return Err(Error::LengthMismatch { left: kgrad.len(), right: d * m * d });
    }
    let mut u = vec![0.0; d];
    for l in 0..d {
        for s in 0..m {
            u[l] -= 0.5 * k[l * m + s] * (h[s] + hbar[s]);
            for kk in 0..d {
                u[l] += 0.5 * k[kk * m + s] * kgrad[(l * m + s) * d + kk];
            }
        }
    }
    Ok(u)
}

/// Feedback particle filter state.
#[derive(Debug)]
pub struct Fpf {
    ensemble: Ensemble,
    config: FpfConfig,
    covariance: Arc<Covariance>,
    solver: DecompositionSolver,
    seed: u64,
    trial: u64,
    projected: bool,
}

impl Fpf {
    pub fn new(ensemble: Ensemble, config: FpfConfig, seed: u64, trial: u64) -> Result<Self> {
        if config.sigma.len() != ensemble.dim() {
            return Err(Error::DimensionMismatch { expected: ensemble.dim(), found: config.sigma.len() });
        }
        let covariance = Arc::new(Covariance::diagonal(&config.sigma)?);
        let solver = match config.gain {
            GainMethod::Decomposition(c) => DecompositionSolver::new(c),
            _ => DecompositionSolver::default(),
        };
        if let GainMethod::Kernel(k) = &config.gain {
            k.validate()?;
        }
        Ok(Fpf { ensemble, config, covariance, solver, seed, trial, projected: false })
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn estimate(&self) -> Vec<f64> {
        self.ensemble.mean()
    }

    /// True once any particle was moved back into the model domain.
    pub fn projected(&self) -> bool {
        self.projected
    }

    fn propagate(&mut self, model: &dyn SdeModel, dt: f64, step: usize, include: bool) -> Vec<f64> {
        // Returns g dt + sigma dB per particle; applied in place when `include`.
        let d = self.ensemble.dim();
        let n = self.ensemble.len();
        let sq = libm::sqrt(dt);
        let mut db = vec![0.0; d];
        let mut moved = vec![0.0; n * d];
        for i in 0..n {
            let mut rng = CounterRng::new(self.seed, self.trial, Stream::FilterProcess, i as u64, step as u64);
            rng.fill_normal(&mut db);
            db.iter_mut().for_each(|v| *v *= sq);
            let x = self.ensemble.particle(i);
            let out = &mut moved[i * d..(i + 1) * d];
            euler_into(model, x, dt, &db, out);
            for (o, xi) in out.iter_mut().zip(x) {
                *o -= xi;
            }
        }
        if include {
            for (x, v) in self.ensemble.states_mut().iter_mut().zip(&moved) {
                *x += v;
            }
            self.project(model);
        }
        moved
    }

    fn project(&mut self, model: &dyn SdeModel) {
        let d = self.ensemble.dim();
        for x in self.ensemble.states_mut().chunks_exact_mut(d) {
            self.projected |= model.project(x);
        }
    }

    /// Advances from step `step` to `step + 1` with observation `obs`: an
    /// increment for [`ObservationKind::Increment`], a sample otherwise.
    pub fn step(&mut self, model: &dyn SdeModel, obs: &[f64], dt: f64, step: usize) -> Result<()> {
        let (d, n, m) = (self.ensemble.dim(), self.ensemble.len(), model.obs_dim());
        if d != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), found: d });
        }
        if obs.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: obs.len() });
        }
        let kind = model.observation_kind();
        let dz: Vec<f64> = match kind {
            ObservationKind::Increment => obs.to_vec(),
            ObservationKind::Discrete => obs.iter().map(|z| z * dt).collect(),
        };
        // For increments the dynamics are applied together with the feedback,
        // from the same particle positions.
        let motion = match kind {
            ObservationKind::Increment => Some(self.propagate(model, dt, step, false)),
            ObservationKind::Discrete => {
                self.propagate(model, dt, step, true);
                None
            }
        };
        let mut values = vec![0.0; n * m];
        for i in 0..n {
            model.observe(self.ensemble.particle(i), &mut values[i * m..(i + 1) * m]);
        }
        let mut hbar = vec![0.0; m];
        for row in values.chunks_exact(m) {
            for (a, b) in hbar.iter_mut().zip(row) {
                *a += b;
            }
        }
        hbar.iter_mut().for_each(|v| *v /= n as f64);
        let scale = self.config.noise.factor(model.obs_noise(), kind, dt);
        let innovation = |i: usize, s: usize| dz[s] - 0.5 * (values[i * m + s] + hbar[s]) * dt;

        let mut delta = vec![0.0; n * d];
        match self.config.gain {
            GainMethod::Decomposition(_) => {
                let mixture = Mixture::from_states(self.ensemble.states(), self.covariance.clone())?;
                let field = self.solver.solve(&mixture, model.observation())?;
                for i in 0..n {
                    let x = self.ensemble.particle(i);
                    let (k, omega) = match self.config.omega {
                        OmegaMode::Analytic => field.gain_and_correction(x)?,
                        OmegaMode::Fd => (field.gain(x)?, field.correction_fd(x)?),
                        OmegaMode::Zero => (field.gain(x)?, vec![0.0; d]),
                    };
                    let out = &mut delta[i * d..(i + 1) * d];
                    for l in 0..d {
                        let mut v = 0.0;
                        for s in 0..m {
                            v += k[l * m + s] * innovation(i, s);
                        }
                        out[l] = scale * v + scale * scale * omega[l] * dt;
                    }
                }
            }
            GainMethod::Constant => {
                let k = constant_gain_from_values(&self.ensemble, &values, &hbar);
                for i in 0..n {
                    for l in 0..d {
                        let v: f64 = (0..m).map(|s| k[l * m + s] * innovation(i, s)).sum();
                        delta[i * d + l] = scale * v;
                    }
                }
            }
            GainMethod::Kernel(cfg) => {
                let ks = kernel_gain_from_values(&self.ensemble, &values, &hbar, &cfg)?;
                for i in 0..n {
                    let k = &ks[i * d * m..(i + 1) * d * m];
                    for l in 0..d {
                        let v: f64 = (0..m).map(|s| k[l * m + s] * innovation(i, s)).sum();
                        delta[i * d + l] = scale * v;
                    }
                }
            }
        }
        if let Some(motion) = motion {
            for (a, b) in delta.iter_mut().zip(&motion) {
                *a += b;
            }
        }
        for (x, v) in self.ensemble.states_mut().iter_mut().zip(&delta) {
            *x += v;
        }
        self.project(model);
        if self.ensemble.states().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::IntegrationDiverged { step })
        }
    }
}
