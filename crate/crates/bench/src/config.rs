//! Benchmark configuration, read from TOML. Every key has a default, so an
//! empty file (or no file) runs the reference setup of the chosen scenario.

use std::path::{Path, PathBuf};

use fpf_core::baselines::KernelGainConfig;
use fpf_core::filters::{FilterMethod, FpfConfig, GainMethod, NoiseScaling, OmegaMode};
use fpf_core::gain::DecompositionConfig;
use fpf_core::scenarios::{
    build_cubic_sensor, build_linear_gaussian, build_lorenz, build_ship_polar, build_static_gain_mixture, CubicParams, LorenzParams, MixtureParams,
    Scenario, ShipParams,
};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    #[default]
    #[serde(alias = "ship")]
    ShipPolar,
    #[serde(alias = "lorenz")]
    Lorenz63,
    #[serde(alias = "cubic")]
    CubicSensorD,
    #[serde(alias = "mixture")]
    StaticGainMixture,
    #[serde(alias = "linear")]
    LinearGaussian,
}

impl ScenarioName {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ship" | "ship_polar" => Ok(Self::ShipPolar),
            "lorenz" | "lorenz63" => Ok(Self::Lorenz63),
            "cubic" | "cubic_sensor_d" => Ok(Self::CubicSensorD),
            "mixture" | "static_gain_mixture" => Ok(Self::StaticGainMixture),
            "linear" | "linear_gaussian" => Ok(Self::LinearGaussian),
            other => Err(BenchError::Config(format!("unknown scenario `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ShipPolar => "ship_polar",
            Self::Lorenz63 => "lorenz63",
            Self::CubicSensorD => "cubic_sensor_d",
            Self::StaticGainMixture => "static_gain_mixture",
            Self::LinearGaussian => "linear_gaussian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    FpfDecomp,
    FpfConst,
    FpfKernel,
    Ekf,
    Pf,
}

impl MethodName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FpfDecomp => "fpf_decomp",
            Self::FpfConst => "fpf_const",
            Self::FpfKernel => "fpf_kernel",
            Self::Ekf => "ekf",
            Self::Pf => "pf",
        }
    }

    pub fn is_fpf(self) -> bool {
        matches!(self, Self::FpfDecomp | Self::FpfConst | Self::FpfKernel)
    }
}

/// Particle counts per method. Unset FPF counts take the scenario default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Particles {
    pub fpf_decomp: Option<usize>,
    pub fpf_const: Option<usize>,
    pub fpf_kernel: Option<usize>,
    pub pf: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FpfSettings {
    pub omega: OmegaMode,
    pub noise: NoiseScaling,
    pub decomposition: DecompositionConfig,
}

impl Default for FpfSettings {
    fn default() -> Self {
        FpfSettings { omega: OmegaMode::Analytic, noise: NoiseScaling::InverseR2, decomposition: DecompositionConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearParams {
    pub a: f64,
    pub q: f64,
    pub r: f64,
    pub x0: f64,
    pub p0: f64,
    pub dt: f64,
    pub horizon: f64,
    pub particles: usize,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams { a: -0.5, q: 0.5, r: 0.5, x0: 1.0, p0: 0.5, dt: 0.01, horizon: 5.0, particles: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Cubic-sensor dimensions for `dim-sweep`.
    pub dims: Vec<usize>,
    /// Dimensions entering the cost slope fit.
    pub fit_dims: Vec<usize>,
    /// Particle covariance values swept by `filter-run` for the FPF methods.
    pub eps: Vec<f64>,
    /// FPF particle counts swept by `filter-run`.
    pub particles: Vec<usize>,
    /// Timed gain builds per dimension, after one warm-up build.
    pub timing_reps: usize,
    /// Run the filter at every dimension and report its MRE.
    pub mre: bool,
    /// Search the smallest particle count reaching `mre_target`.
    pub search: bool,
    pub mre_target: f64,
    pub search_start: usize,
    pub search_max: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            dims: vec![1, 3, 5, 10, 20, 30, 50, 70, 100],
            fit_dims: vec![1, 3, 5, 10, 20, 30, 50],
            eps: Vec::new(),
            particles: Vec::new(),
            timing_reps: 20,
            mre: true,
            search: false,
            mre_target: 0.4,
            search_start: 10,
            search_max: 640,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub scenario: ScenarioName,
    /// Empty means the scenario's reference set.
    pub methods: Vec<MethodName>,
    /// Monte Carlo trials (gain-compare: sampled ensembles). Unset means the
    /// scenario default.
    pub trials: Option<usize>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
    /// ARMSE time window `[t0, t1]`. Unset means `[1, T]` for Lorenz and the
    /// whole run otherwise.
    pub window: Option<[f64; 2]>,
    pub write_trajectories: bool,
    /// Keep every `trajectory_stride`-th step in `filter_run.csv`.
    pub trajectory_stride: usize,
    /// Record diverged trials and go on instead of aborting.
    pub skip_failed: bool,
    pub particles: Particles,
    pub fpf: FpfSettings,
    pub kernel: KernelGainConfig,
    pub ship: ShipParams,
    pub lorenz: LorenzParams,
    pub cubic: CubicParams,
    pub mixture: MixtureParams,
    pub linear: LinearParams,
    pub sweep: SweepConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            scenario: ScenarioName::ShipPolar,
            methods: Vec::new(),
            trials: None,
            seed: 1,
            threads: None,
            out: PathBuf::from("out"),
            window: None,
            write_trajectories: true,
            trajectory_stride: 1,
            skip_failed: false,
            particles: Particles::default(),
            fpf: FpfSettings::default(),
            kernel: KernelGainConfig::default(),
            ship: ShipParams::default(),
            lorenz: LorenzParams::default(),
            cubic: CubicParams::default(),
            mixture: MixtureParams::default(),
            linear: LinearParams::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// One estimator of a `filter-run` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub label: String,
    pub method: MethodName,
    pub particles: usize,
    pub filter: FilterMethod,
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: BenchConfig = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Like [`load`](Self::load), but a file without a `scenario` key gets `fallback`.
    pub fn load_or(path: &Path, fallback: ScenarioName) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let table: toml::Table = toml::from_str(&text).map_err(|e| BenchError::Config(e.to_string()))?;
        if !table.contains_key("scenario") {
            cfg.scenario = fallback;
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.trials == Some(0) {
            return bad("trials must be positive");
        }
        if self.threads == Some(0) {
            return bad("threads must be positive");
        }
        if self.trajectory_stride == 0 {
            return bad("trajectory_stride must be positive");
        }
        if let Some([a, b]) = self.window {
            if !(a <= b) {
                return bad("window must satisfy t0 <= t1");
            }
        }
        for n in [self.particles.fpf_decomp, self.particles.fpf_const, self.particles.fpf_kernel, self.particles.pf].into_iter().flatten() {
            if n == 0 {
                return bad("particle counts must be positive");
            }
        }
        if self.particles.fpf_kernel == Some(1) {
            return bad("the kernel gain needs at least two particles");
        }
        if self.sweep.eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return bad("sweep.eps entries must be positive");
        }
        if self.sweep.particles.contains(&0) || self.sweep.dims.contains(&0) {
            return bad("sweep lists must hold positive entries");
        }
        if self.sweep.timing_reps == 0 {
            return bad("sweep.timing_reps must be positive");
        }
        if self.sweep.search && (self.sweep.search_start == 0 || self.sweep.search_start > self.sweep.search_max) {
            return bad("sweep.search_start must be in 1..=search_max");
        }
        self.kernel.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        let built: Result<()> = match self.scenario {
            ScenarioName::StaticGainMixture => build_static_gain_mixture(self.mixture).map(drop).map_err(Into::into),
            _ => self.scenario().map(drop),
        };
        built.map_err(|e| match e {
            BenchError::Numerical(e) => BenchError::Config(e.to_string()),
            other => other,
        })?;
        Ok(())
    }

    /// The configured scenario. The cubic sensor uses `cubic.dim`.
    pub fn scenario(&self) -> Result<Scenario> {
        let s = match self.scenario {
            ScenarioName::ShipPolar => build_ship_polar(self.ship)?,
            ScenarioName::Lorenz63 => build_lorenz(self.lorenz)?,
            ScenarioName::CubicSensorD => build_cubic_sensor(self.cubic)?,
            ScenarioName::LinearGaussian => {
                let l = self.linear;
                build_linear_gaussian(l.a, l.q, l.r, l.x0, l.p0, l.dt, l.horizon, l.particles)?
            }
            ScenarioName::StaticGainMixture => {
                return Err(BenchError::Config("static_gain_mixture has no dynamics; use gain-compare".into()))
            }
        };
        Ok(s)
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(match self.scenario {
            ScenarioName::ShipPolar => 100,
            ScenarioName::StaticGainMixture => 20,
            _ => 1,
        })
    }

    pub fn methods(&self) -> Vec<MethodName> {
        if !self.methods.is_empty() {
            return self.methods.clone();
        }
        use MethodName::*;
        match self.scenario {
            ScenarioName::ShipPolar | ScenarioName::Lorenz63 => vec![FpfDecomp, Ekf, Pf],
            ScenarioName::CubicSensorD => vec![FpfDecomp],
            ScenarioName::StaticGainMixture => vec![FpfDecomp, FpfConst, FpfKernel],
            ScenarioName::LinearGaussian => vec![FpfDecomp, FpfConst, FpfKernel, Ekf, Pf],
        }
    }

    pub fn window(&self, horizon: f64) -> Option<(f64, f64)> {
        match (self.window, self.scenario) {
            (Some([a, b]), _) => Some((a, b)),
            (None, ScenarioName::Lorenz63) => Some((1.0, horizon)),
            _ => None,
        }
    }

    fn pf_particles(&self) -> usize {
        self.particles.pf.unwrap_or(match self.scenario {
            ScenarioName::ShipPolar => 50,
            ScenarioName::Lorenz63 => 500,
            _ => 500,
        })
    }

    fn fpf_particles(&self, method: MethodName, scenario: &Scenario) -> usize {
        let set = match method {
            MethodName::FpfDecomp => self.particles.fpf_decomp,
            MethodName::FpfConst => self.particles.fpf_const,
            MethodName::FpfKernel => self.particles.fpf_kernel,
            _ => None,
        };
        set.unwrap_or(scenario.particles)
    }

    pub fn fpf_config(&self, method: MethodName, sigma: Vec<f64>) -> FpfConfig {
        let gain = match method {
            MethodName::FpfConst => GainMethod::Constant,
            MethodName::FpfKernel => GainMethod::Kernel(self.kernel),
            _ => GainMethod::Decomposition(self.fpf.decomposition),
        };
        let omega = if method == MethodName::FpfDecomp { self.fpf.omega } else { OmegaMode::Zero };
        FpfConfig { gain, omega, noise: self.fpf.noise, sigma }
    }

    /// The estimator grid: every method, with FPF methods crossed with the
    /// `sweep.eps` and `sweep.particles` axes when those are set.
    pub fn cells(&self, scenario: &Scenario) -> Vec<Cell> {
        let mut out = Vec::new();
        for method in self.methods() {
            match method {
                MethodName::Ekf => out.push(Cell { label: "ekf".into(), method, particles: 0, filter: FilterMethod::Ekf }),
                MethodName::Pf => {
                    let n = self.pf_particles();
                    out.push(Cell { label: "pf".into(), method, particles: n, filter: FilterMethod::Pf { particles: n } });
                }
                _ => {
                    let counts = if self.sweep.particles.is_empty() { vec![self.fpf_particles(method, scenario)] } else { self.sweep.particles.clone() };
                    let sigmas: Vec<(Option<f64>, Vec<f64>)> = if self.sweep.eps.is_empty() {
                        vec![(None, scenario.sigma.clone())]
                    } else {
                        self.sweep.eps.iter().map(|&e| (Some(e), vec![e; scenario.sigma.len()])).collect()
                    };
                    for &n in &counts {
                        for (eps, sigma) in &sigmas {
                            let mut label = method.as_str().to_string();
                            if let Some(e) = eps {
                                label.push_str(&format!("[eps={e}]"));
                            }
                            let filter = FilterMethod::Fpf { particles: n, config: self.fpf_config(method, sigma.clone()) };
                            out.push(Cell { label, method, particles: n, filter });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Thread count: the explicit value, then `BENCH_THREADS`, then the config,
/// then the machine's parallelism.
pub fn resolve_threads(cli: Option<usize>, config: Option<usize>) -> Result<usize> {
    if let Some(n) = cli {
        return if n > 0 { Ok(n) } else { Err(BenchError::Config("--threads must be positive".into())) };
    }
    if let Ok(v) = std::env::var("BENCH_THREADS") {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(BenchError::Config(format!("BENCH_THREADS must be a positive integer, got `{v}`"))),
        };
    }
    Ok(config.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_reference_setup() {
        let c = BenchConfig::from_toml("").unwrap();
        assert_eq!(c, BenchConfig::default());
        assert_eq!(c.trials(), 100);
        assert_eq!(c.ship.q, 1.0);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = BenchConfig::default();
        c.scenario = ScenarioName::Lorenz63;
        c.sweep.eps = vec![3.0, 0.3];
        c.fpf.omega = OmegaMode::Fd;
        let back = BenchConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(BenchConfig::from_toml("bogus = 1").is_err());
        assert!(BenchConfig::from_toml("trials = 0").is_err());
        assert!(BenchConfig::from_toml("[ship]\nr = -1.0").is_err());
        assert!(BenchConfig::from_toml("methods = [\"magic\"]").is_err());
        assert!(BenchConfig::from_toml("[sweep]\neps = [0.0]").is_err());
    }

    #[test]
    fn aliases_and_cells() {
        let c = BenchConfig::from_toml("scenario = \"lorenz\"\n[sweep]\neps = [3.0, 0.3]").unwrap();
        let s = c.scenario().unwrap();
        let labels: Vec<String> = c.cells(&s).into_iter().map(|c| c.label).collect();
        assert_eq!(labels, ["fpf_decomp[eps=3]", "fpf_decomp[eps=0.3]", "ekf", "pf"]);
        assert_eq!(c.window(50.0), Some((1.0, 50.0)));
    }
}
