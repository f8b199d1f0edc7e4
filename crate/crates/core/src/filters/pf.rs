//! Bootstrap particle filter with systematic resampling.

use alloc::vec;
use alloc::vec::Vec;

use crate::filters::{euler_into, Ensemble, ObservationKind, SdeModel};
use crate::rng::{CounterRng, Stream};
use crate::{Error, Result};

/// `1 / sum w^2` for normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Systematic resampling with offset `u` in `[0, 1)`: returns the parent of
/// each of the `weights.len()` offspring.
pub fn systematic_resample(weights: &[f64], u: f64) -> Vec<usize> {
    let n = weights.len();
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut j = 0;
    for i in 0..n {
        let point = (i as f64 + u) / n as f64;
        while point > cum && j + 1 < n {
            j += 1;
            cum += weights[j];
        }
        out.push(j);
    }
    out
}

#[derive(Debug, Clone)]
pub struct ParticleFilter {
    ensemble: Ensemble,
    weights: Vec<f64>,
    seed: u64,
    trial: u64,
    resets: usize,
    resamples: usize,
}

impl ParticleFilter {
    pub fn new(ensemble: Ensemble, seed: u64, trial: u64) -> Self {
        let n = ensemble.len();
        ParticleFilter { ensemble, weights: vec![1.0 / n as f64; n], seed, trial, resets: 0, resamples: 0 }
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Steps at which every weight underflowed and was reset to uniform.
    pub fn resets(&self) -> usize {
        self.resets
    }

    pub fn resamples(&self) -> usize {
        self.resamples
    }

    pub fn estimate(&self) -> Vec<f64> {
        let d = self.ensemble.dim();
        let mut m = vec![0.0; d];
        for (x, w) in self.ensemble.states().chunks_exact(d).zip(&self.weights) {
            for (a, b) in m.iter_mut().zip(x) {
                *a += w * b;
            }
        }
        m
    }

    fn propagate(&mut self, model: &dyn SdeModel, dt: f64, step: usize) {
        let d = self.ensemble.dim();
        let sq = libm::sqrt(dt);
        let mut db = vec![0.0; d];
        let mut out = vec![0.0; d];
        for i in 0..self.ensemble.len() {
            let mut rng = CounterRng::new(self.seed, self.trial, Stream::FilterProcess, i as u64, step as u64);
            rng.fill_normal(&mut db);
            db.iter_mut().for_each(|v| *v *= sq);
            let x = &mut self.ensemble.states_mut()[i * d..(i + 1) * d];
            euler_into(model, x, dt, &db, &mut out);
            model.project(&mut out);
            x.copy_from_slice(&out);
        }
    }

    /// Multiplies the weights by the likelihood of `obs`; `scale` is the
    /// observation multiplier (`dt` for increments) and `var` the noise
    /// variance.
    fn reweight(&mut self, model: &dyn SdeModel, obs: &[f64], scale: f64, var: f64) {
        let m = model.obs_dim();
        let mut hx = vec![0.0; m];
        let mut logw: Vec<f64> = Vec::with_capacity(self.weights.len());
        for (i, w) in self.weights.iter().enumerate() {
            model.observe(self.ensemble.particle(i), &mut hx);
            let q: f64 = obs.iter().zip(&hx).map(|(z, h)| (z - h * scale) * (z - h * scale)).sum();
            logw.push(libm::log(*w) - q / (2.0 * var));
        }
        let max = logw.iter().copied().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            self.reset();
            return;
        }
        let mut sum = 0.0;
        for (w, l) in self.weights.iter_mut().zip(&logw) {
            *w = if l.is_nan() { 0.0 } else { libm::exp(l - max) };
            sum += *w;
        }
        if !(sum > 0.0) || !sum.is_finite() {
            self.reset();
            return;
        }
        self.weights.iter_mut().for_each(|w| *w /= sum);
    }

    fn reset(&mut self) {
        let n = self.weights.len();
        self.weights.iter_mut().for_each(|w| *w = 1.0 / n as f64);
        self.resets += 1;
    }

    fn maybe_resample(&mut self, step: usize) {
        let n = self.weights.len();
        if effective_sample_size(&self.weights) >= 0.5 * n as f64 {
            return;
        }
        let u = CounterRng::new(self.seed, self.trial, Stream::Resample, 0, step as u64).uniform();
        let parents = systematic_resample(&self.weights, u);
        let d = self.ensemble.dim();
        let old = self.ensemble.states().to_vec();
        let states = self.ensemble.states_mut();
        for (i, &p) in parents.iter().enumerate() {
            states[i * d..(i + 1) * d].copy_from_slice(&old[p * d..(p + 1) * d]);
        }
        self.weights.iter_mut().for_each(|w| *w = 1.0 / n as f64);
        self.resamples += 1;
    }

    /// Advances one step. The estimate after the step is the weighted mean
    /// before any resampling of the next step.
    pub fn step(&mut self, model: &dyn SdeModel, obs: &[f64], dt: f64, step: usize) -> Result<()> {
        if obs.len() != model.obs_dim() {
            return Err(Error::DimensionMismatch { expected: model.obs_dim(), found: obs.len() });
        }
        let r2 = model.obs_noise() * model.obs_noise();
        match model.observation_kind() {
            ObservationKind::Increment => {
                self.reweight(model, obs, dt, r2 * dt);
                self.maybe_resample(step);
                self.propagate(model, dt, step);
            }
            ObservationKind::Discrete => {
                self.maybe_resample(step);
                self.propagate(model, dt, step);
                self.reweight(model, obs, 1.0, r2);
            }
        }
        if self.ensemble.states().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::IntegrationDiverged { step })
        }
    }
}
