//! The benchmark commands. Each writes its CSV files and a JSON summary under
//! `out` and returns the summary.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use fpf_core::baselines::{constant_gain, kernel_gain, observation_values};
use fpf_core::filters::{initial_ensemble, run_filter, simulate_truth, Ensemble, FilterMethod, Trajectory};
use fpf_core::gain::DecompositionSolver;
use fpf_core::hermite::HermiteExpansion;
use fpf_core::metrics::{armse, armse_components, gain_l2_error, mre, scaling_fit, RunRecord};
use fpf_core::mixture::{Covariance, Mixture};
use fpf_core::scenarios::{build_cubic_sensor, build_static_gain_mixture, CubicParams, Scenario};
use serde::Serialize;

use crate::config::{BenchConfig, MethodName, ScenarioName};
use crate::error::{BenchError, Result};
use crate::output::{num, write_json, Col, Meta, Table, TRAILING};
use crate::runner::Runner;

fn meta(cfg: &BenchConfig) -> Meta {
    Meta { scenario: cfg.scenario.as_str().to_string(), seed: cfg.seed, version: crate::version().to_string() }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn hbar(ens: &Ensemble, h: &[HermiteExpansion]) -> Result<Vec<f64>> {
    let vals = observation_values(ens, h)?;
    let m = h.len();
    Ok((0..m).map(|s| vals.iter().skip(s).step_by(m).sum::<f64>() / ens.len() as f64).collect())
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct TrialGainErrors {
    pub trial: u64,
    /// `[component 1, component 2]` per method, in `methods` order.
    pub l2: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GainCompareSummary {
    pub scenario: String,
    pub seed: u64,
    pub version: String,
    pub particles: usize,
    pub trials: usize,
    pub methods: Vec<String>,
    pub mean_l2: Vec<[f64; 2]>,
    /// Trials where the decomposition gain has the smallest error of all
    /// methods on both components. `None` without a decomposition entry.
    pub decomposition_wins: Option<usize>,
    pub per_trial: Vec<TrialGainErrors>,
}

/// Gains at every particle, row-major `N x d` (one channel).
fn particle_gains(cfg: &BenchConfig, method: MethodName, ens: &Ensemble, h: &[HermiteExpansion], sigma: &[f64]) -> Result<Vec<f64>> {
    let n = ens.len();
    Ok(match method {
        MethodName::FpfDecomp => {
            let mix = Mixture::from_states(ens.states(), Arc::new(Covariance::diagonal(sigma)?))?;
            let field = DecompositionSolver::new(cfg.fpf.decomposition).solve(&mix, h)?;
            let mut out = Vec::with_capacity(n * ens.dim());
            for i in 0..n {
                out.extend(field.gain(ens.particle(i))?);
            }
            out
        }
        MethodName::FpfConst => constant_gain(ens, h, &hbar(ens, h)?)?.repeat(n),
        MethodName::FpfKernel => kernel_gain(ens, h, &hbar(ens, h)?, &cfg.kernel)?,
        other => return Err(BenchError::Config(format!("{} is not a gain approximation", other.as_str()))),
    })
}

/// Gains of the static two-component mixture against the exact gain.
pub fn gain_compare(cfg: &BenchConfig, runner: &Runner, out: &Path) -> Result<GainCompareSummary> {
    if cfg.scenario != ScenarioName::StaticGainMixture {
        return Err(BenchError::Config("gain-compare runs the static_gain_mixture scenario".into()));
    }
    let problem = build_static_gain_mixture(cfg.mixture)?;
    let methods = cfg.methods();
    if let Some(m) = methods.iter().find(|m| !m.is_fpf()) {
        return Err(BenchError::Config(format!("{} is not a gain approximation", m.as_str())));
    }
    let n = cfg.mixture.particles;
    let trials = cfg.trials();
    let h = [problem.h.clone()];
    let sigma = problem.particle_sigma();

    struct TrialOut {
        states: Vec<f64>,
        exact: Vec<f64>,
        gains: Vec<Vec<f64>>,
    }
    let results = runner.map(trials, |t| -> Result<TrialOut> {
        let ens = problem.sample(n, cfg.seed, t as u64)?;
        let exact: Vec<f64> = ens.states().chunks_exact(2).flat_map(|x| problem.analytic_gain(x)).collect();
        let gains = methods.iter().map(|&m| particle_gains(cfg, m, &ens, &h, &sigma)).collect::<Result<_>>()?;
        Ok(TrialOut { states: ens.states().to_vec(), exact, gains })
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let meta = meta(cfg);
    let mut table = Table::create(
        &out.join("gain_compare.csv"),
        &["particle_id", "component", "method", "x1", "x2", "value", "exact_value", "trial"],
        &meta,
        &TRAILING,
    )?;
    let mut errors = Table::create(&out.join("gain_errors.csv"), &["trial", "method", "l2_1", "l2_2"], &meta, &TRAILING)?;
    let mut per_trial = Vec::with_capacity(trials);
    for (t, r) in results.iter().enumerate() {
        let mut l2 = Vec::with_capacity(methods.len());
        for (m, g) in methods.iter().zip(&r.gains) {
            for i in 0..n {
                for c in 0..2 {
                    table.row(&[
                        i.to_string(),
                        (c + 1).to_string(),
                        m.as_str().into(),
                        num(r.states[2 * i]),
                        num(r.states[2 * i + 1]),
                        num(g[2 * i + c]),
                        num(r.exact[2 * i + c]),
                        t.to_string(),
                    ])?;
                }
            }
            let e = [gain_l2_error(g, &r.exact, 2, 0)?, gain_l2_error(g, &r.exact, 2, 1)?];
            errors.row(&[t.to_string(), m.as_str().into(), num(e[0]), num(e[1])])?;
            l2.push(e);
        }
        per_trial.push(TrialGainErrors { trial: t as u64, l2 });
    }
    table.finish()?;
    errors.finish()?;

    let mean_l2 = (0..methods.len())
        .map(|k| {
            let mut acc = [0.0; 2];
            for tr in &per_trial {
                acc[0] += tr.l2[k][0] / trials as f64;
                acc[1] += tr.l2[k][1] / trials as f64;
            }
            acc
        })
        .collect();
    let decomposition_wins = methods.iter().position(|&m| m == MethodName::FpfDecomp).map(|d| {
        per_trial
            .iter()
            .filter(|tr| (0..2).all(|c| tr.l2.iter().enumerate().all(|(k, e)| k == d || tr.l2[d][c] < e[c])))
            .count()
    });
    let summary = GainCompareSummary {
        scenario: meta.scenario,
        seed: meta.seed,
        version: meta.version,
        particles: n,
        trials,
        methods: methods.iter().map(|m| m.as_str().to_string()).collect(),
        mean_l2,
        decomposition_wins,
        per_trial,
    };
    write_json(&out.join("gain_compare.json"), &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub label: String,
    pub method: String,
    pub particles: usize,
    pub trials: usize,
    pub failed: usize,
    /// Over the non-failed trials; `None` when all failed.
    pub armse: Option<f64>,
    pub armse_components: Option<Vec<f64>>,
    /// Summed wall time of the filter loops.
    pub cpu_s: f64,
    /// Per-trial RMSE over the window, `None` for failed trials.
    pub trial_rmse: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterRunSummary {
    pub scenario: String,
    pub seed: u64,
    pub version: String,
    pub trials: usize,
    pub window: Option<[f64; 2]>,
    pub cells: Vec<CellSummary>,
}

impl FilterRunSummary {
    pub fn cell(&self, label: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.label == label)
    }
}

fn record(scenario: &Scenario, truth: &Trajectory, label: &str, seed: u64, trial: u64, estimates: Vec<f64>, secs: f64) -> RunRecord {
    RunRecord {
        scenario: scenario.name.clone(),
        method: label.to_string(),
        seed,
        trial,
        dim: truth.dim,
        times: truth.times(),
        truth: truth.states.clone(),
        estimate: estimates,
        wall_seconds: secs,
        flags: Vec::new(),
    }
}

/// Monte Carlo runs of every configured estimator on shared truths.
pub fn filter_run(cfg: &BenchConfig, runner: &Runner, out: &Path) -> Result<FilterRunSummary> {
    let scenario = cfg.scenario()?;
    let cells = cfg.cells(&scenario);
    let trials = cfg.trials();
    let seed = cfg.seed;
    let window = cfg.window(scenario.horizon);
    let d = scenario.x0.len();

    let truths = runner.map(trials, |t| simulate_truth(&scenario, seed, t as u64));
    let truths = truths.into_iter().collect::<std::result::Result<Vec<_>, _>>()?;
    let nc = cells.len();
    let runs = runner.map(trials * nc, |k| {
        let (t, c) = (k / nc, k % nc);
        let start = Instant::now();
        let res = run_filter(&scenario, &truths[t], &cells[c].filter, seed, t as u64);
        let secs = start.elapsed().as_secs_f64();
        let res = res.and_then(|o| {
            if o.estimates.iter().all(|v| v.is_finite()) {
                Ok(o)
            } else {
                Err(fpf_core::Error::IntegrationDiverged { step: truths[t].steps() })
            }
        });
        (res, secs)
    });

    let meta = meta(cfg);
    let mut trajectories = if cfg.write_trajectories {
        let mut cols = vec!["trial".to_string(), "step".into(), "t".into()];
        cols.extend((1..=d).map(|i| format!("truth_{i}")));
        cols.extend((1..=d).map(|i| format!("est_{i}")));
        cols.push("method".into());
        let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
        Some(Table::create(&out.join("filter_run.csv"), &cols, &meta, &TRAILING)?)
    } else {
        None
    };
    let mut trial_cols = vec!["trial".to_string(), "method".into(), "N_p".into(), "rmse".into()];
    trial_cols.extend((1..=d).map(|i| format!("rmse_{i}")));
    trial_cols.push("failed".into());
    let trial_cols: Vec<&str> = trial_cols.iter().map(String::as_str).collect();
    let mut trial_table = Table::create(&out.join("trials.csv"), &trial_cols, &meta, &TRAILING)?;

    let mut summaries = Vec::with_capacity(nc);
    let mut runs = runs.into_iter().map(Some).collect::<Vec<_>>();
    for (c, cell) in cells.iter().enumerate() {
        let mut records = Vec::new();
        let mut trial_rmse = Vec::with_capacity(trials);
        let (mut failed, mut cpu) = (0usize, 0.0);
        for (t, truth) in truths.iter().enumerate() {
            let (res, secs) = runs[t * nc + c].take().expect("each run is read once");
            cpu += secs;
            match res {
                Ok(o) => {
                    if let Some(table) = trajectories.as_mut() {
                        let times = truth.times();
                        for k in (0..times.len()).step_by(cfg.trajectory_stride) {
                            let mut row = vec![t.to_string(), k.to_string(), num(times[k])];
                            row.extend(truth.state(k).iter().map(|&v| num(v)));
                            row.extend(o.estimates[k * d..(k + 1) * d].iter().map(|&v| num(v)));
                            row.push(cell.label.clone());
                            table.row(&row)?;
                        }
                    }
                    let r = record(&scenario, truth, &cell.label, seed, t as u64, o.estimates, secs);
                    let one = std::slice::from_ref(&r);
                    let comps = armse_components(one, window)?;
                    let rmse = armse(one, window)?;
                    let mut row = vec![t.to_string(), cell.label.clone(), cell.particles.to_string(), num(rmse)];
                    row.extend(comps.iter().map(|&v| num(v)));
                    row.push("0".into());
                    trial_table.row(&row)?;
                    trial_rmse.push(Some(rmse));
                    records.push(r);
                }
                Err(e) => {
                    if !cfg.skip_failed {
                        return Err(BenchError::Numerical(e));
                    }
                    failed += 1;
                    let mut row = vec![t.to_string(), cell.label.clone(), cell.particles.to_string(), String::new()];
                    row.extend((0..d).map(|_| String::new()));
                    row.push("1".into());
                    trial_table.row(&row)?;
                    trial_rmse.push(None);
                }
            }
        }
        let (a, comps) = if records.is_empty() {
            (None, None)
        } else {
            (Some(armse(&records, window)?), Some(armse_components(&records, window)?))
        };
        summaries.push(CellSummary {
            label: cell.label.clone(),
            method: cell.method.as_str().to_string(),
            particles: cell.particles,
            trials,
            failed,
            armse: a,
            armse_components: comps,
            cpu_s: cpu,
            trial_rmse,
        });
    }
    if let Some(table) = trajectories {
        table.finish()?;
    }
    trial_table.finish()?;

    let mut cols = vec!["scenario".to_string(), "method".into(), "N_p".into(), "M".into(), "armse".into()];
    cols.extend((1..=d).map(|i| format!("armse_{i}")));
    cols.extend(["cpu_s".to_string(), "failed".into()]);
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = Table::create(&out.join("summary.csv"), &cols, &meta, &[Col::Seed, Col::Version])?;
    for s in &summaries {
        let mut row = vec![meta.scenario.clone(), s.label.clone(), s.particles.to_string(), trials.to_string(), opt(s.armse)];
        match &s.armse_components {
            Some(c) => row.extend(c.iter().map(|&v| num(v))),
            None => row.extend((0..d).map(|_| String::new())),
        }
        row.extend([num(s.cpu_s), s.failed.to_string()]);
        table.row(&row)?;
    }
    table.finish()?;

    let summary = FilterRunSummary {
        scenario: meta.scenario,
        seed,
        version: meta.version,
        trials,
        window: window.map(|(a, b)| [a, b]),
        cells: summaries,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct DimRow {
    pub dim: usize,
    pub particles: usize,
    pub trials: usize,
    /// Mean seconds per gain build (mixture, coefficients and the gain with
    /// its correction at every particle) with a warm solver.
    pub gain_s: f64,
    pub run_s: Option<f64>,
    pub mre: Option<f64>,
    pub failed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchPoint {
    pub dim: usize,
    pub particles: usize,
    pub mre: Option<f64>,
    pub reached: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimSweepSummary {
    pub scenario: String,
    pub seed: u64,
    pub version: String,
    pub method: String,
    pub rows: Vec<DimRow>,
    pub fit_dims: Vec<usize>,
    /// Fitted exponent of `gain_s` against the dimension.
    pub slope: Option<f64>,
    pub mre_target: f64,
    pub search: Vec<SearchPoint>,
    /// Smallest particle count found to reach the target, per dimension.
    pub required_particles: Vec<(usize, Option<usize>)>,
}

/// Mean wall time of one gain build on the initial ensemble, after one
/// warm-up build.
pub fn gain_build_seconds(cfg: &BenchConfig, scenario: &Scenario, particles: usize, reps: usize) -> Result<f64> {
    let ens = initial_ensemble(scenario, particles, cfg.seed, 0)?;
    let cov = Arc::new(Covariance::diagonal(&scenario.sigma)?);
    let h = scenario.model.observation();
    let mut solver = DecompositionSolver::new(cfg.fpf.decomposition);
    let build = |solver: &mut DecompositionSolver| -> Result<()> {
        let mix = Mixture::from_states(ens.states(), cov.clone())?;
        let field = solver.solve(&mix, h)?;
        for i in 0..particles {
            std::hint::black_box(field.gain_and_correction(ens.particle(i))?);
        }
        Ok(())
    };
    build(&mut solver)?;
    let start = Instant::now();
    for _ in 0..reps {
        build(&mut solver)?;
    }
    Ok(start.elapsed().as_secs_f64() / reps as f64)
}

struct MreRun {
    mre: Option<f64>,
    secs: f64,
}

fn mre_runs(cfg: &BenchConfig, runner: &Runner, jobs: &[(&Scenario, usize)], trials: usize) -> Result<Vec<Vec<MreRun>>> {
    let runs = runner.map(jobs.len() * trials, |k| -> Result<MreRun> {
        let (s, np) = jobs[k / trials];
        let t = (k % trials) as u64;
        let truth = simulate_truth(s, cfg.seed, t)?;
        let method = FilterMethod::Fpf { particles: np, config: cfg.fpf_config(MethodName::FpfDecomp, s.sigma.clone()) };
        let start = Instant::now();
        let res = run_filter(s, &truth, &method, cfg.seed, t);
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(o) if o.estimates.iter().all(|v| v.is_finite()) => {
                let r = record(s, &truth, "fpf_decomp", cfg.seed, t, o.estimates, secs);
                Ok(MreRun { mre: Some(mre(&r)?), secs })
            }
            Ok(_) if cfg.skip_failed => Ok(MreRun { mre: None, secs }),
            Err(_) if cfg.skip_failed => Ok(MreRun { mre: None, secs }),
            Ok(_) => Err(BenchError::Numerical(fpf_core::Error::IntegrationDiverged { step: truth.steps() })),
            Err(e) => Err(e.into()),
        }
    });
    let mut runs = runs.into_iter();
    let mut out = Vec::with_capacity(jobs.len());
    for _ in jobs {
        out.push(runs.by_ref().take(trials).collect::<Result<Vec<_>>>()?);
    }
    Ok(out)
}

fn mean_mre(runs: &[MreRun]) -> Option<f64> {
    let ok: Vec<f64> = runs.iter().filter_map(|r| r.mre).collect();
    (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64)
}

/// Gain cost and filter accuracy of the cubic sensor across dimensions.
pub fn dim_sweep(cfg: &BenchConfig, runner: &Runner, out: &Path) -> Result<DimSweepSummary> {
    if cfg.scenario != ScenarioName::CubicSensorD {
        return Err(BenchError::Config("dim-sweep runs the cubic_sensor_d scenario".into()));
    }
    let trials = cfg.trials();
    let scenarios = cfg
        .sweep
        .dims
        .iter()
        .map(|&dim| build_cubic_sensor(CubicParams { dim, ..cfg.cubic }))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let np = |s: &Scenario| cfg.particles.fpf_decomp.unwrap_or(s.particles);

    // Timing runs alone, before the pool gets busy.
    let timings = scenarios.iter().map(|s| gain_build_seconds(cfg, s, np(s), cfg.sweep.timing_reps)).collect::<Result<Vec<_>>>()?;

    let mre = if cfg.sweep.mre {
        let jobs: Vec<(&Scenario, usize)> = scenarios.iter().map(|s| (s, np(s))).collect();
        Some(mre_runs(cfg, runner, &jobs, trials)?)
    } else {
        None
    };
    let rows: Vec<DimRow> = scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let runs = mre.as_ref().map(|m| &m[i]);
            DimRow {
                dim: cfg.sweep.dims[i],
                particles: np(s),
                trials: if runs.is_some() { trials } else { 0 },
                gain_s: timings[i],
                run_s: runs.map(|r| r.iter().map(|x| x.secs).sum()),
                mre: runs.and_then(|r| mean_mre(r)),
                failed: runs.map_or(0, |r| r.iter().filter(|x| x.mre.is_none()).count()),
            }
        })
        .collect();

    let fit: Vec<(f64, f64)> = rows.iter().filter(|r| cfg.sweep.fit_dims.contains(&r.dim)).map(|r| (r.dim as f64, r.gain_s)).collect();
    let slope = if fit.len() >= 3 { Some(scaling_fit(&fit)?) } else { None };

    let mut search = Vec::new();
    let mut required = Vec::new();
    if cfg.sweep.search {
        for s in &scenarios {
            let dim = s.x0.len();
            let mut eval = |n: usize| -> Result<bool> {
                let m = mean_mre(&mre_runs(cfg, runner, &[(s, n)], trials)?[0]);
                let reached = m.is_some_and(|v| v <= cfg.sweep.mre_target);
                search.push(SearchPoint { dim, particles: n, mre: m, reached });
                Ok(reached)
            };
            let (mut lo, mut hi) = (0usize, None);
            let mut n = cfg.sweep.search_start;
            while n <= cfg.sweep.search_max {
                if eval(n)? {
                    hi = Some(n);
                    break;
                }
                lo = n;
                n *= 2;
            }
            if let Some(mut h) = hi {
                while lo > 0 && h - lo > 1 && h - lo > h / 8 {
                    let mid = (lo + h) / 2;
                    if eval(mid)? {
                        h = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi = Some(h);
            }
            required.push((dim, hi));
        }
    }

    let meta = meta(cfg);
    let mut table = Table::create(
        &out.join("dim_sweep.csv"),
        &["dim", "N_p", "trials", "gain_s", "run_s", "mre", "failed", "scenario", "method"],
        &meta,
        &[Col::Seed, Col::Version],
    )?;
    for r in &rows {
        table.row(&[
            r.dim.to_string(),
            r.particles.to_string(),
            r.trials.to_string(),
            num(r.gain_s),
            opt(r.run_s),
            opt(r.mre),
            r.failed.to_string(),
            meta.scenario.clone(),
            "fpf_decomp".into(),
        ])?;
    }
    table.finish()?;
    if cfg.sweep.search {
        let mut t = Table::create(&out.join("np_search.csv"), &["dim", "N_p", "mre", "reached"], &meta, &TRAILING)?;
        for p in &search {
            t.row(&[p.dim.to_string(), p.particles.to_string(), opt(p.mre), (p.reached as u8).to_string()])?;
        }
        t.finish()?;
    }

    let summary = DimSweepSummary {
        scenario: meta.scenario,
        seed: meta.seed,
        version: meta.version,
        method: "fpf_decomp".into(),
        rows,
        fit_dims: cfg.sweep.fit_dims.clone(),
        slope,
        mre_target: cfg.sweep.mre_target,
        search,
        required_particles: required,
    };
    write_json(&out.join("dim_sweep.json"), &summary)?;
    Ok(summary)
}
