//! Truth simulation and the filter loop.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::filters::{euler_into, Ekf, Ensemble, Fpf, FpfConfig, ObservationKind, ParticleFilter};
use crate::rng::{CounterRng, Stream};
use crate::scenarios::Scenario;
use crate::{Error, Result};

/// A simulated signal and its observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub obs_dim: usize,
    pub dt: f64,
    /// States at `t_0, ..., t_N`, row-major.
    pub states: Vec<f64>,
    /// Observation `k` drives step `k` (from `t_k` to `t_{k+1}`), row-major.
    pub observations: Vec<f64>,
    /// The signal was moved back into the model domain at least once.
    pub projected: bool,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.observations.len() / self.obs_dim
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn observation(&self, k: usize) -> &[f64] {
        &self.observations[k * self.obs_dim..(k + 1) * self.obs_dim]
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|k| k as f64 * self.dt).collect()
    }
}

/// Simulates the signal from `scenario.x0` with observations.
pub fn simulate_truth(scenario: &Scenario, seed: u64, trial: u64) -> Result<Trajectory> {
    let model = scenario.model.as_ref();
    let (d, m) = (model.dim(), model.obs_dim());
    let steps = scenario.steps();
    let dt = scenario.dt;
    let sq = libm::sqrt(dt);
    let r = model.obs_noise();
    let mut states = Vec::with_capacity((steps + 1) * d);
    states.extend_from_slice(&scenario.x0);
    let mut observations = Vec::with_capacity(steps * m);
    let mut db = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut hx = vec![0.0; m];
    let mut projected = false;
    for k in 0..steps {
        let x = &states[k * d..(k + 1) * d];
        CounterRng::new(seed, trial, Stream::TruthProcess, 0, k as u64).fill_normal(&mut db);
        db.iter_mut().for_each(|v| *v *= sq);
        euler_into(model, x, dt, &db, &mut next);
        projected |= model.project(&mut next);
        let mut obs_rng = CounterRng::new(seed, trial, Stream::TruthObservation, 0, k as u64);
        match model.observation_kind() {
            ObservationKind::Increment => {
                model.observe(x, &mut hx);
                for h in &hx {
                    observations.push(h * dt + r * sq * obs_rng.normal());
                }
            }
            ObservationKind::Discrete => {
                model.observe(&next, &mut hx);
                for h in &hx {
                    observations.push(h + r * obs_rng.normal());
                }
            }
        }
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::IntegrationDiverged { step: k });
        }
        states.extend_from_slice(&next);
    }
    Ok(Trajectory { dim: d, obs_dim: m, dt, states, observations, projected })
}

/// Estimator and its particle count.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterMethod {
    Fpf { particles: usize, config: FpfConfig },
    Ekf,
    Pf { particles: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    /// Estimates at `t_0, ..., t_N`, row-major.
    pub estimates: Vec<f64>,
    /// Some particle or the mean was moved back into the model domain.
    pub projected: bool,
    /// Particle filter steps whose weights all underflowed.
    pub weight_resets: usize,
}

/// `N(x0, diag(init_cov))` draws, one stream per particle.
pub fn initial_ensemble(scenario: &Scenario, particles: usize, seed: u64, trial: u64) -> Result<Ensemble> {
    let d = scenario.x0.len();
    let mut states = Vec::with_capacity(particles * d);
    for i in 0..particles {
        let mut rng = CounterRng::new(seed, trial, Stream::Initial, i as u64, 0);
        for l in 0..d {
            states.push(scenario.x0[l] + libm::sqrt(scenario.init_cov[l]) * rng.normal());
        }
    }
    let mut ens = Ensemble::new(d, states)?;
    for x in ens.states_mut().chunks_exact_mut(d) {
        scenario.model.project(x);
    }
    Ok(ens)
}

/// Runs one estimator over a simulated trajectory. Deterministic in
/// `(seed, trial)`.
pub fn run_filter(scenario: &Scenario, truth: &Trajectory, method: &FilterMethod, seed: u64, trial: u64) -> Result<FilterOutput> {
    let model = scenario.model.as_ref();
    let d = model.dim();
    if truth.dim != d {
        return Err(Error::DimensionMismatch { expected: d, found: truth.dim });
    }
    let steps = truth.steps();
    let dt = truth.dt;
    let mut estimates = Vec::with_capacity((steps + 1) * d);
    match method {
        FilterMethod::Fpf { particles, config } => {
            let mut f = Fpf::new(initial_ensemble(scenario, *particles, seed, trial)?, config.clone(), seed, trial)?;
            estimates.extend(f.estimate());
            for k in 0..steps {
                f.step(model, truth.observation(k), dt, k)?;
                estimates.extend(f.estimate());
            }
            Ok(FilterOutput { estimates, projected: f.projected(), weight_resets: 0 })
        }
        FilterMethod::Pf { particles } => {
            let mut f = ParticleFilter::new(initial_ensemble(scenario, *particles, seed, trial)?, seed, trial);
            estimates.extend(f.estimate());
            for k in 0..steps {
                f.step(model, truth.observation(k), dt, k)?;
                estimates.extend(f.estimate());
            }
            Ok(FilterOutput { estimates, projected: false, weight_resets: f.resets() })
        }
        FilterMethod::Ekf => {
            let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&scenario.init_cov));
            let mut f = Ekf::new(scenario.x0.clone(), cov)?;
            estimates.extend(f.estimate());
            for k in 0..steps {
                f.step(model, truth.observation(k), dt, k)?;
                estimates.extend(f.estimate());
            }
            Ok(FilterOutput { estimates, projected: false, weight_resets: 0 })
        }
    }
}
