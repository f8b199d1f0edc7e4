//! Benchmark problems: a static two-component mixture with a known gain, the
//! decoupled cubic sensor, ship tracking in polar coordinates, the stochastic
//! Lorenz system, and a scalar linear-Gaussian model for sanity checks.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::filters::{Ensemble, ObservationKind, SdeModel};
use crate::hermite::{monomial_to_hermite, HermiteExpansion, IndexSet, MultiIndex, Polynomial};
use crate::rng::{CounterRng, Stream};
use crate::{Error, Result};

/// A model with its run settings.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub model: Arc<dyn SdeModel>,
    /// True initial state.
    pub x0: Vec<f64>,
    pub dt: f64,
    pub horizon: f64,
    /// Diagonal of the particle covariance used by the decomposition gain.
    pub sigma: Vec<f64>,
    /// Diagonal covariance of the initial ensemble and of the initial EKF.
    pub init_cov: Vec<f64>,
    /// Default FPF particle count.
    pub particles: usize,
}

impl core::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("dim", &self.model.dim())
            .field("dt", &self.dt)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl Scenario {
    pub fn steps(&self) -> usize {
        libm::round(self.horizon / self.dt) as usize
    }
}

fn positive(v: f64, what: &'static str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(what))
    }
}

fn check_run(dt: f64, horizon: f64, particles: usize) -> Result<()> {
    positive(dt, "dt must be positive")?;
    positive(horizon, "horizon must be positive")?;
    if particles == 0 {
        return Err(Error::InvalidArgument("particle count must be positive"));
    }
    Ok(())
}

/// `h = x_axis` in Hermite form.
fn coordinate(set: &Arc<IndexSet>, axis: usize) -> HermiteExpansion {
    let d = set.dim();
    let poly = Polynomial::new(d, vec![(MultiIndex::axis(d, axis, 1), 1.0)]).expect("valid monomial");
    monomial_to_hermite(&poly, set.clone()).expect("degree within set")
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct MixtureParams {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Particle covariance diagonal.
    pub eps1: f64,
    pub eps2: f64,
    pub particles: usize,
}

impl Default for MixtureParams {
    fn default() -> Self {
        MixtureParams { mu1: 1.0, mu2: 1.0, sigma1: 1.0, sigma2: 2.0, eps1: 0.5, eps2: 1.0, particles: 100 }
    }
}

/// `p = N(mu, S)/2 + N(-mu, S)/2` with `S = diag(sigma1, sigma2)` and
/// `h = x1^2 / sigma1 - mu1 x1 x2 / (sigma1 mu2)`, whose exact gain is
/// `K = (x1, -sigma2 mu1 x1 / (sigma1 mu2))`.
#[derive(Debug, Clone)]
pub struct StaticGainMixture {
    pub params: MixtureParams,
    pub h: HermiteExpansion,
}

pub fn build_static_gain_mixture(params: MixtureParams) -> Result<StaticGainMixture> {
    positive(params.sigma1, "sigma1 must be positive")?;
    positive(params.sigma2, "sigma2 must be positive")?;
    positive(params.eps1, "eps1 must be positive")?;
    positive(params.eps2, "eps2 must be positive")?;
    if params.mu2 == 0.0 || !params.mu2.is_finite() || !params.mu1.is_finite() {
        return Err(Error::InvalidArgument("mu2 must be nonzero"));
    }
    if params.particles == 0 {
        return Err(Error::InvalidArgument("particle count must be positive"));
    }
    let set = Arc::new(IndexSet::new(2, 2)?);
    let poly = Polynomial::new(
        2,
        vec![
            (MultiIndex::new(vec![2, 0]), 1.0 / params.sigma1),
            (MultiIndex::new(vec![1, 1]), -params.mu1 / (params.sigma1 * params.mu2)),
        ],
    )?;
    Ok(StaticGainMixture { params, h: monomial_to_hermite(&poly, set)? })
}

impl StaticGainMixture {
    pub fn analytic_gain(&self, x: &[f64]) -> [f64; 2] {
        let p = &self.params;
        [x[0], -p.sigma2 * p.mu1 / (p.sigma1 * p.mu2) * x[0]]
    }

    /// Independent draws from the mixture.
    pub fn sample(&self, n: usize, seed: u64, trial: u64) -> Result<Ensemble> {
        let p = &self.params;
        let mut states = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut rng = CounterRng::new(seed, trial, Stream::Sample, i as u64, 0);
            let sign = if rng.uniform() < 0.5 { 1.0 } else { -1.0 };
            states.push(sign * p.mu1 + libm::sqrt(p.sigma1) * rng.normal());
            states.push(sign * p.mu2 + libm::sqrt(p.sigma2) * rng.normal());
        }
        Ensemble::new(2, states)
    }

    pub fn particle_sigma(&self) -> [f64; 2] {
        [self.params.eps1, self.params.eps2]
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct CubicParams {
    pub dim: usize,
    pub eps: f64,
    /// Every coordinate of the true initial state.
    pub x0: f64,
    pub dt: f64,
    pub horizon: f64,
    pub particles: usize,
}

impl Default for CubicParams {
    fn default() -> Self {
        CubicParams { dim: 1, eps: 0.01, x0: 1.0, dt: 0.01, horizon: 40.0, particles: 50 }
    }
}

/// `dX = X (1 - X^2) dt + dB`, `dZ_j = X_j^3 dt + dW_j`.
#[derive(Debug, Clone)]
pub struct CubicSensor {
    dim: usize,
    h: Vec<HermiteExpansion>,
}

impl CubicSensor {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive"));
        }
        let set = Arc::new(IndexSet::new(dim, 3)?);
        let h = (0..dim)
            .map(|j| {
                let poly = Polynomial::new(dim, vec![(MultiIndex::axis(dim, j, 3), 1.0)])?;
                monomial_to_hermite(&poly, set.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CubicSensor { dim, h })
    }
}

impl SdeModel for CubicSensor {
    fn dim(&self) -> usize {
        self.dim
    }

    fn observation(&self) -> &[HermiteExpansion] {
        &self.h
    }

    fn obs_noise(&self) -> f64 {
        1.0
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = v * (1.0 - v * v);
        }
    }

    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.dim {
            out[i * self.dim + i] = 1.0;
        }
    }

    fn add_diffusion(&self, _x: &[f64], db: &[f64], out: &mut [f64]) {
        for (o, b) in out.iter_mut().zip(db) {
            *o += b;
        }
    }

    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, v) in x.iter().enumerate() {
            out[i * self.dim + i] = 1.0 - 3.0 * v * v;
        }
    }

    fn observe(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = v * v * v;
        }
    }

    fn obs_jacobian(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, v) in x.iter().enumerate() {
            out[j * self.dim + j] = 3.0 * v * v;
        }
    }
}

pub fn build_cubic_sensor(params: CubicParams) -> Result<Scenario> {
    positive(params.eps, "eps must be positive")?;
    check_run(params.dt, params.horizon, params.particles)?;
    let d = params.dim;
    Ok(Scenario {
        name: "cubic_sensor_d".into(),
        model: Arc::new(CubicSensor::new(d)?),
        x0: vec![params.x0; d],
        dt: params.dt,
        horizon: params.horizon,
        sigma: vec![params.eps; d],
        init_cov: vec![params.eps; d],
        particles: params.particles,
    })
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct ShipParams {
    pub r: f64,
    pub gamma: f64,
    /// Restoring force.
    pub theta_f: f64,
    /// Radius beyond which the restoring force acts.
    pub rho_c: f64,
    pub q: f64,
    pub rho_floor: f64,
    /// Cartesian initial position.
    pub x0: [f64; 2],
    pub dt: f64,
    pub horizon: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub particles: usize,
}

impl Default for ShipParams {
    fn default() -> Self {
        ShipParams {
            r: 0.32,
            gamma: 2.0,
            theta_f: 50.0,
            rho_c: 9.0,
            q: 1.0,
            rho_floor: 0.1,
            x0: [0.5, -0.5],
            dt: 0.05,
            horizon: 8.25,
            eps1: 0.1,
            eps2: 0.1,
            particles: 9,
        }
    }
}

/// Ship motion in polar coordinates `(theta, rho)`, observed through the
/// angle every step.
#[derive(Debug, Clone)]
pub struct ShipPolar {
    params: ShipParams,
    h: Vec<HermiteExpansion>,
}

impl ShipPolar {
    pub fn new(params: ShipParams) -> Result<Self> {
        positive(params.r, "r must be positive")?;
        positive(params.rho_floor, "rho_floor must be positive")?;
        if !params.q.is_finite() || params.q < 0.0 || !params.gamma.is_finite() || !params.theta_f.is_finite() {
            return Err(Error::InvalidArgument("ship parameters must be finite, q >= 0"));
        }
        let set = Arc::new(IndexSet::new(2, 1)?);
        Ok(ShipPolar { params, h: vec![coordinate(&set, 0)] })
    }
}

impl SdeModel for ShipPolar {
    fn dim(&self) -> usize {
        2
    }

    fn observation(&self) -> &[HermiteExpansion] {
        &self.h
    }

    fn obs_noise(&self) -> f64 {
        self.params.r
    }

    fn observation_kind(&self) -> ObservationKind {
        ObservationKind::Discrete
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let rho = x[1];
        out[0] = 1.0;
        out[1] = (p.gamma + 0.5 * p.q * p.q) / rho - if rho > p.rho_c { p.theta_f } else { 0.0 };
    }

    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        let q = self.params.q;
        let (s, c) = libm::sincos(x[0]);
        out[0] = -q * s / x[1];
        out[1] = q * c / x[1];
        out[2] = q * c;
        out[3] = q * s;
    }

    fn add_diffusion(&self, x: &[f64], db: &[f64], out: &mut [f64]) {
        let q = self.params.q;
        let (s, c) = libm::sincos(x[0]);
        out[0] += q * (-s * db[0] + c * db[1]) / x[1];
        out[1] += q * (c * db[0] + s * db[1]);
    }

    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        out[0] = 0.0;
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = -(p.gamma + 0.5 * p.q * p.q) / (x[1] * x[1]);
    }

    fn project(&self, x: &mut [f64]) -> bool {
        if x[1] < self.params.rho_floor {
            x[1] = self.params.rho_floor;
            true
        } else {
            false
        }
    }

    fn observe(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0];
    }

    fn obs_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        out[1] = 0.0;
    }
}

pub fn build_ship_polar(params: ShipParams) -> Result<Scenario> {
    check_run(params.dt, params.horizon, params.particles)?;
    positive(params.eps1, "eps1 must be positive")?;
    positive(params.eps2, "eps2 must be positive")?;
    let [a, b] = params.x0;
    let rho = libm::hypot(a, b);
    positive(rho, "initial position must be away from the origin")?;
    Ok(Scenario {
        name: "ship_polar".into(),
        model: Arc::new(ShipPolar::new(params)?),
        x0: vec![libm::atan2(b, a), rho],
        dt: params.dt,
        horizon: params.horizon,
        sigma: vec![params.eps1, params.eps2],
        init_cov: vec![params.eps1, params.eps2],
        particles: params.particles,
    })
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct LorenzParams {
    pub sigma: f64,
    pub beta: f64,
    pub rho: f64,
    pub q: f64,
    pub r: f64,
    pub x0: [f64; 3],
    pub dt: f64,
    pub horizon: f64,
    pub eps: [f64; 3],
    pub particles: usize,
}

impl Default for LorenzParams {
    fn default() -> Self {
        LorenzParams {
            sigma: 10.0,
            beta: 8.0 / 3.0,
            rho: 25.0,
            q: 0.18,
            r: 0.2,
            x0: [20.0, 15.0, 15.0],
            dt: 0.001,
            horizon: 50.0,
            eps: [0.01; 3],
            particles: 50,
        }
    }
}

/// Stochastic Lorenz system observed through the first coordinate.
#[derive(Debug, Clone)]
pub struct Lorenz63 {
    params: LorenzParams,
    h: Vec<HermiteExpansion>,
}

impl Lorenz63 {
    pub fn new(params: LorenzParams) -> Result<Self> {
        positive(params.r, "r must be positive")?;
        if !params.q.is_finite() || params.q < 0.0 {
            return Err(Error::InvalidArgument("q must be finite and non-negative"));
        }
        let set = Arc::new(IndexSet::new(3, 1)?);
        Ok(Lorenz63 { params, h: vec![coordinate(&set, 0)] })
    }
}

impl SdeModel for Lorenz63 {
    fn dim(&self) -> usize {
        3
    }

    fn observation(&self) -> &[HermiteExpansion] {
        &self.h
    }

    fn obs_noise(&self) -> f64 {
        self.params.r
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        out[0] = -p.sigma * (x[0] - x[1]);
        out[1] = -x[0] * x[2] + p.rho * x[0] - x[1];
        out[2] = x[0] * x[1] - p.beta * x[2];
    }

    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..3 {
            out[i * 3 + i] = self.params.q;
        }
    }

    fn add_diffusion(&self, _x: &[f64], db: &[f64], out: &mut [f64]) {
        for (o, b) in out.iter_mut().zip(db) {
            *o += self.params.q * b;
        }
    }

    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        out.copy_from_slice(&[-p.sigma, p.sigma, 0.0, p.rho - x[2], -1.0, -x[0], x[1], x[0], -p.beta]);
    }

    fn observe(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0];
    }

    fn obs_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&[1.0, 0.0, 0.0]);
    }
}

pub fn build_lorenz(params: LorenzParams) -> Result<Scenario> {
    check_run(params.dt, params.horizon, params.particles)?;
    for &e in &params.eps {
        positive(e, "eps must be positive")?;
    }
    Ok(Scenario {
        name: "lorenz63".into(),
        model: Arc::new(Lorenz63::new(params)?),
        x0: params.x0.to_vec(),
        dt: params.dt,
        horizon: params.horizon,
        sigma: params.eps.to_vec(),
        init_cov: params.eps.to_vec(),
        particles: params.particles,
    })
}

// ---------------------------------------------------------------------------

/// `dX = a X dt + q dB`, `dZ = X dt + r dW`.
#[derive(Debug, Clone)]
pub struct LinearGaussian {
    a: f64,
    q: f64,
    r: f64,
    h: Vec<HermiteExpansion>,
}

impl LinearGaussian {
    pub fn new(a: f64, q: f64, r: f64) -> Result<Self> {
        positive(r, "r must be positive")?;
        let set = Arc::new(IndexSet::new(1, 1)?);
        Ok(LinearGaussian { a, q, r, h: vec![coordinate(&set, 0)] })
    }
}

impl SdeModel for LinearGaussian {
    fn dim(&self) -> usize {
        1
    }

    fn observation(&self) -> &[HermiteExpansion] {
        &self.h
    }

    fn obs_noise(&self) -> f64 {
        self.r
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.a * x[0];
    }

    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.q;
    }

    fn drift_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.a;
    }
}

/// Scalar linear-Gaussian scenario with prior `N(x0, p0)`.
#[allow(clippy::too_many_arguments)]
pub fn build_linear_gaussian(a: f64, q: f64, r: f64, x0: f64, p0: f64, dt: f64, horizon: f64, particles: usize) -> Result<Scenario> {
    check_run(dt, horizon, particles)?;
    positive(p0, "prior variance must be positive")?;
    Ok(Scenario {
        name: "linear_gaussian".into(),
        model: Arc::new(LinearGaussian::new(a, q, r)?),
        x0: vec![x0],
        dt,
        horizon,
        sigma: vec![p0],
        init_cov: vec![p0],
        particles,
    })
}
