//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! The full run takes the better part of an hour on one core. Set
//! `ACCEPTANCE_ONLY=ship,lorenz` to run a subset and `ACCEPTANCE_STRICT=1` to
//! exit non-zero when a criterion fails.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use fpf_bench::commands::{dim_sweep, filter_run, gain_compare};
use fpf_bench::config::{BenchConfig, MethodName, ScenarioName};
use fpf_bench::runner::Runner;
use fpf_core::gain::{
    a_block, backward_recursion, invertibility_probe, scalar_gain, scalar_recursion, BlockSystem, DecompositionConfig,
    DecompositionSolver, RecursionPath,
};
use fpf_core::hermite::{hermite_eval, monomial_to_hermite, HermiteExpansion, IndexSet, MultiIndex, Polynomial};
use fpf_core::mixture::{Covariance, Mixture};
use fpf_core::rng::{CounterRng, Stream};
use nalgebra::{DMatrix, DVector};

type Outcome = Result<(bool, String), String>;

struct Draws(CounterRng);

impl Draws {
    fn new(seed: u64) -> Self {
        Draws(CounterRng::new(seed, 0, Stream::Sample, 0, 0))
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.0.uniform()
    }

    fn index(&mut self, n: usize) -> usize {
        ((self.0.uniform() * n as f64) as usize).min(n - 1)
    }

    fn point(&mut self, d: usize, scale: f64) -> Vec<f64> {
        (0..d).map(|_| self.range(-scale, scale)).collect()
    }

    fn spd(&mut self, d: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(d, d, |_, _| self.range(-1.0, 1.0));
        let m = &a * a.transpose() + DMatrix::identity(d, d) * 0.5;
        (&m + m.transpose()) * 0.5
    }

    fn polynomial(&mut self, d: usize, p: u32, terms: usize) -> Polynomial {
        let mut out = Vec::new();
        for _ in 0..terms {
            let mut k = vec![0u32; d];
            for _ in 0..self.index(p as usize + 1) {
                k[self.index(d)] += 1;
            }
            out.push((MultiIndex::new(k), self.range(-2.0, 2.0)));
        }
        Polynomial::new(d, out).unwrap()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn cubic(set: &Arc<IndexSet>, j: usize) -> HermiteExpansion {
    let d = set.dim();
    let poly = Polynomial::new(d, vec![(MultiIndex::axis(d, j, 3), 1.0)]).unwrap();
    monomial_to_hermite(&poly, set.clone()).unwrap()
}

fn exact() -> DecompositionConfig {
    DecompositionConfig { far_field_cutoff: 0.0, ..Default::default() }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn timed(budget: f64, start: Instant) -> (bool, String) {
    let s = start.elapsed().as_secs_f64();
    (s < budget, format!("{s:.1} s (budget {budget:.0} s)"))
}

// ---------------------------------------------------------------------------

fn exact_coefficients() -> Outcome {
    let start = Instant::now();
    let mut r = Draws::new(101);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for d in [1usize, 2, 3, 5] {
        let set = Arc::new(IndexSet::new(d, 3).map_err(err)?);
        for _ in 0..100 {
            let eps = r.range(0.005, 2.0);
            let x = r.point(d, 2.0);
            let blocks = BlockSystem::build(&DMatrix::from_diagonal_element(d, d, 1.0 / eps), set.clone()).map_err(err)?;
            for j in 0..d {
                for path in [RecursionPath::Dense, RecursionPath::Sparse] {
                    let gc = backward_recursion(&blocks, &cubic(&set, j), &x, path).map_err(err)?;
                    let c = |n: u32| gc.expansion.coefficient(MultiIndex::axis(d, j, n).entries());
                    let xj = x[j];
                    // tilde-K_q = 2 (q + 1) phi_{q+1}.
                    worst = worst
                        .max(rel(6.0 * c(3), eps / 4.0))
                        .max(rel(4.0 * c(2), eps * xj / 2.0))
                        .max(rel(2.0 * c(1), eps / 2.0 + 2.0 * eps * eps + xj * xj * eps))
                        .max(rel(gc.constant, xj.powi(3) + 3.0 * eps * xj));
                    cases += 1;
                }
            }
        }
    }
    let (fast, t) = timed(1.0, start);
    Ok((worst <= 1e-12 && fast, format!("{cases} recursions, max rel err {worst:.2e} (tol 1e-12), {t}")))
}

fn linear_observation() -> Outcome {
    let start = Instant::now();
    let mut r = Draws::new(102);
    let (mut worst, mut extra) = (0.0f64, 0usize);
    for d in [1usize, 2, 3, 5] {
        let set = Arc::new(IndexSet::new(d, 1).map_err(err)?);
        let e1 = MultiIndex::axis(d, 0, 1);
        let h = HermiteExpansion::from_indices(set.clone(), [(e1.entries(), 0.5)]).map_err(err)?;
        for _ in 0..50 {
            let eps: Vec<f64> = (0..d).map(|_| r.range(0.01, 1.0)).collect();
            let lam = DMatrix::from_diagonal(&DVector::from_iterator(d, eps.iter().map(|e| 1.0 / e)));
            let x = r.point(d, 3.0);
            let blocks = BlockSystem::build(&lam, set.clone()).map_err(err)?;
            let gc = backward_recursion(&blocks, &h, &x, RecursionPath::Auto).map_err(err)?;
            worst = worst.max(rel(gc.expansion.coefficient(e1.entries()), eps[0] / 2.0)).max(rel(gc.constant, x[0]));
            extra += gc.expansion.terms().iter().filter(|t| t.1 != 0.0).count() - 1;
        }
    }
    let (fast, t) = timed(1.0, start);
    Ok((
        worst <= 1e-14 && extra == 0 && fast,
        format!("max rel err {worst:.2e} (tol 1e-14), {extra} spurious coefficients, {t}"),
    ))
}

fn scalar_equivalence() -> Outcome {
    let mut r = Draws::new(103);
    let a = [0.0, 0.75, 0.0, 0.125];

    // One dimension: assembled field against the closed form.
    let eps = 0.05;
    let states: Vec<f64> = (0..12).map(|_| r.range(-1.5, 1.5)).collect();
    let set1 = Arc::new(IndexSet::new(1, 3).map_err(err)?);
    let mix = Mixture::from_states(&states, Arc::new(Covariance::isotropic(1, eps).map_err(err)?)).map_err(err)?;
    let field = DecompositionSolver::new(exact()).solve(&mix, &[cubic(&set1, 0)]).map_err(err)?;
    let mut scalar_worst = 0.0f64;
    for i in 0..1000 {
        let x = -2.0 + 4.0 * i as f64 / 999.0;
        let want = scalar_gain(&states, eps, &a, x);
        let got = field.gain(&[x]).map_err(err)?[0];
        scalar_worst = scalar_worst.max((got - want).abs() / (1.0 + want.abs()));
    }

    // Decoupled cubic sensor: the d-dim mixture gain at each particle against
    // the scalar gain of the same coordinate on the projected cloud.
    let mut full_worst = 0.0f64;
    let mut own_worst = 0.0f64;
    let eps = 0.01;
    for d in [2usize, 3, 5] {
        let set = Arc::new(IndexSet::new(d, 3).map_err(err)?);
        let h: Vec<HermiteExpansion> = (0..d).map(|j| cubic(&set, j)).collect();
        let n = 10;
        let states: Vec<f64> = (0..n * d).map(|_| r.range(-1.0, 1.0)).collect();
        let mix = Mixture::from_states(&states, Arc::new(Covariance::isotropic(d, eps).map_err(err)?)).map_err(err)?;
        let field = DecompositionSolver::new(exact()).solve(&mix, &h).map_err(err)?;
        let blocks = BlockSystem::build(&DMatrix::from_diagonal_element(d, d, 1.0 / eps), set.clone()).map_err(err)?;
        for i in 0..n {
            let x = &states[i * d..(i + 1) * d];
            let k = field.gain(x).map_err(err)?;
            for j in 0..d {
                let coord: Vec<f64> = (0..n).map(|p| states[p * d + j]).collect();
                let want = scalar_gain(&coord, eps, &a, x[j]);
                full_worst = full_worst.max((k[j * d + j] - want).abs() / (1.0 + want.abs()));
                // The particle's own component alone.
                let gc = backward_recursion(&blocks, &h[j], x, RecursionPath::Sparse).map_err(err)?;
                let grad = gc.expansion.grad(x).map_err(err)?;
                let (kt, _) = scalar_recursion(&a, x[j], eps);
                let own: f64 = kt.iter().enumerate().map(|(q, v)| v * hermite_eval(q as u32, x[j])).sum();
                own_worst = own_worst.max((grad[j] - own).abs() / (1.0 + own.abs()));
            }
        }
    }
    Ok((
        scalar_worst <= 1e-10 && full_worst <= 1e-9,
        format!(
            "d=1 closed form max err {scalar_worst:.2e} (tol 1e-10); decoupled mixture gain vs per-coordinate scalar gain at particles max err {full_worst:.2e} (tol 1e-9); own-component expansion gradients max err {own_worst:.2e}"
        ),
    ))
}

fn divergence(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> f64 {
    (0..x.len())
        .map(|l| {
            let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
            xp[l] += h;
            xm[l] -= h;
            (f(&xp)[l] - f(&xm)[l]) / (2.0 * h)
        })
        .sum()
}

fn poisson_residual() -> Outcome {
    let start = Instant::now();
    let mut r = Draws::new(104);
    let mut fd_ratio = 0.0f64;
    for d in [1usize, 2] {
        for n in [1usize, 4, 10] {
            let diag: Vec<f64> = (0..d).map(|_| r.range(0.2, 0.6)).collect();
            let mixture = Mixture::from_states(&r.point(n * d, 1.0), Arc::new(Covariance::diagonal(&diag).map_err(err)?)).map_err(err)?;
            let set = Arc::new(IndexSet::new(d, 3).map_err(err)?);
            let h = vec![monomial_to_hermite(&r.polynomial(d, 3, 4), set).map_err(err)?];
            let field = DecompositionSolver::new(exact()).solve(&mixture, &h).map_err(err)?;
            let hbar = field.hbar()[0];
            let pk = |x: &[f64]| {
                let p = mixture.density(x).unwrap();
                field.gain(x).unwrap().iter().map(|k| k * p).collect::<Vec<_>>()
            };
            // +-4 std around the particle hull.
            let sd = diag.iter().copied().fold(0.0, f64::max).sqrt();
            let span = 1.0 + 4.0 * sd;
            let steps = if d == 1 { 400 } else { 40 };
            let (mut worst, mut scale) = (0.0f64, 0.0f64);
            let mut idx = vec![0usize; d];
            'grid: loop {
                let x: Vec<f64> = idx.iter().map(|&i| -span + 2.0 * span * i as f64 / steps as f64).collect();
                let p = mixture.density(&x).map_err(err)?;
                let hx = h[0].eval(&x).map_err(err)?;
                worst = worst.max((divergence(pk, &x, 1e-4) + (hx - hbar) * p).abs());
                scale = scale.max((p * hx).abs());
                for a in 0..d {
                    idx[a] += 1;
                    if idx[a] <= steps {
                        continue 'grid;
                    }
                    idx[a] = 0;
                }
                break;
            }
            fd_ratio = fd_ratio.max(worst / scale);
        }
    }

    // Galerkin sub-equation for a single component.
    let mut galerkin = 0.0f64;
    for d in [1usize, 2, 3] {
        let set = Arc::new(IndexSet::new(d, 3).map_err(err)?);
        for trial in 0..20 {
            let lam = if trial % 2 == 0 {
                DMatrix::from_diagonal(&DVector::from_iterator(d, (0..d).map(|_| r.range(0.5, 20.0))))
            } else {
                r.spd(d)
            };
            let blocks = BlockSystem::build(&lam, set.clone()).map_err(err)?;
            let h = monomial_to_hermite(&r.polynomial(d, 3, 5), set.clone()).map_err(err)?;
            let mean = r.point(d, 1.0);
            let gc = backward_recursion(&blocks, &h, &mean, RecursionPath::Dense).map_err(err)?;
            for _ in 0..50 {
                let x = r.point(d, 2.0);
                let g = gc.expansion.grad(&x).map_err(err)?;
                let hess = gc.expansion.hessian(&x).map_err(err)?;
                let lap: f64 = (0..d).map(|l| hess[l * d + l]).sum();
                let drift: f64 = (0..d).flat_map(|l| (0..d).map(move |m| (l, m))).map(|(l, m)| (x[l] - mean[l]) * lam[(l, m)] * g[m]).sum();
                let hv = h.eval(&x).map_err(err)?;
                let res = -drift + lap + hv - gc.constant;
                let scale = (drift.abs() + lap.abs() + hv.abs() + gc.constant.abs()).max(1.0);
                galerkin = galerkin.max(res.abs() / scale);
            }
        }
    }
    let (fast, t) = timed(30.0, start);
    Ok((
        fd_ratio <= 1e-3 && galerkin <= 1e-8 && fast,
        format!("FD residual / max|p h| {fd_ratio:.2e} (tol 1e-3), Galerkin residual {galerkin:.2e} (tol 1e-8), {t}"),
    ))
}

fn invertibility() -> Outcome {
    let mut r = Draws::new(105);
    let mut fails = [0usize; 3];
    for _ in 0..1000 {
        let d = 1 + r.index(10);
        let lam = DMatrix::from_diagonal(&DVector::from_iterator(d, (0..d).map(|_| r.range(0.01, 100.0))));
        if !invertibility_probe(&lam, 6).map_err(err)?.iter().all(|l| l.invertible) {
            fails[0] += 1;
        }
    }
    let mut structure = 0.0f64;
    for _ in 0..1000 {
        let lam = r.spd(2);
        if !invertibility_probe(&lam, 6).map_err(err)?.iter().all(|l| l.invertible) {
            fails[1] += 1;
        }
        // Level q on ((q,0), (q-1,1), ..., (0,q)): diagonal a(q-r) + b r,
        // super-diagonal c(r+1), sub-diagonal c(q-r+1).
        let set = IndexSet::new(2, 6).map_err(err)?;
        let (a, b, c) = (lam[(0, 0)], lam[(1, 1)], lam[(0, 1)]);
        for q in 1..=6u32 {
            let m = a_block(&lam, &set, q);
            for row in 0..=q as usize {
                for col in 0..=q as usize {
                    let rq = row as f64;
                    let want = if col == row {
                        a * (q as f64 - rq) + b * rq
                    } else if col == row + 1 {
                        c * (rq + 1.0)
                    } else if col + 1 == row {
                        c * (q as f64 - rq + 1.0)
                    } else {
                        0.0
                    };
                    structure = structure.max((m[(row, col)] - want).abs());
                }
            }
        }
    }
    for _ in 0..1000 {
        let lam = r.spd(3);
        if !invertibility_probe(&lam, 2).map_err(err)?.iter().all(|l| l.invertible) {
            fails[2] += 1;
        }
    }
    Ok((
        fails == [0, 0, 0] && structure <= 1e-12,
        format!("failures diagonal/d=2 dense/d=3 dense = {fails:?} of 1000 each, d=2 tridiagonal entries max dev {structure:.1e}"),
    ))
}

fn mixture_gains(dir: &Path) -> Outcome {
    let start = Instant::now();
    let cfg = BenchConfig { scenario: ScenarioName::StaticGainMixture, trials: Some(20), ..Default::default() };
    let s = gain_compare(&cfg, &Runner::new(1).map_err(err)?, &dir.join("mixture")).map_err(err)?;
    let wins = s.decomposition_wins.unwrap_or(0);
    let (fast, t) = timed(60.0, start);
    let means: Vec<String> = s.methods.iter().zip(&s.mean_l2).map(|(m, e)| format!("{m} {:.2}/{:.2}", e[0], e[1])).collect();
    Ok((wins >= 18 && fast, format!("decomposition best on both components in {wins}/20 seeds (need 18); mean l2 {}; {t}", means.join(", "))))
}

fn ship(dir: &Path) -> Outcome {
    let start = Instant::now();
    let cfg = BenchConfig {
        scenario: ScenarioName::ShipPolar,
        trials: Some(100),
        methods: vec![MethodName::FpfDecomp, MethodName::Ekf, MethodName::Pf],
        ..Default::default()
    };
    let s = filter_run(&cfg, &Runner::new(1).map_err(err)?, &dir.join("ship")).map_err(err)?;
    let get = |l: &str| s.cell(l).and_then(|c| c.armse).unwrap_or(f64::NAN);
    let (f, e, p) = (get("fpf_decomp"), get("ekf"), get("pf"));
    let (fast, t) = timed(300.0, start);
    Ok((
        f < e && e < p && (0.9..=1.7).contains(&f) && fast,
        format!("ARMSE FPF(9) {f:.4}, EKF {e:.4}, PF(50) {p:.4}; need FPF < EKF < PF and FPF in [0.9, 1.7]; {t}"),
    ))
}

fn lorenz(dir: &Path) -> Outcome {
    let start = Instant::now();
    let runner = Runner::new(1).map_err(err)?;
    let mut cfg = BenchConfig {
        scenario: ScenarioName::Lorenz63,
        trials: Some(1),
        methods: vec![MethodName::FpfDecomp, MethodName::Pf],
        window: Some([1.0, 50.0]),
        write_trajectories: false,
        ..Default::default()
    };
    cfg.particles.fpf_decomp = Some(50);
    cfg.particles.pf = Some(500);
    let long = filter_run(&cfg, &runner, &dir.join("lorenz")).map_err(err)?;
    let comps = |s: &fpf_bench::commands::FilterRunSummary, l: &str| s.cell(l).and_then(|c| c.armse_components.clone()).unwrap_or(vec![f64::NAN; 3]);
    let fpf = comps(&long, "fpf_decomp");
    let pf = comps(&long, "pf");
    let pf_mean = pf.iter().sum::<f64>() / 3.0;
    let tracks = fpf.iter().all(|&v| v <= 2.0);

    cfg.trials = Some(100);
    cfg.methods = vec![MethodName::FpfDecomp, MethodName::FpfKernel, MethodName::FpfConst];
    cfg.lorenz.horizon = 10.0;
    cfg.window = Some([1.0, 10.0]);
    let short = filter_run(&cfg, &runner, &dir.join("lorenz_gains")).map_err(err)?;
    let (d, k, c) = (comps(&short, "fpf_decomp"), comps(&short, "fpf_kernel"), comps(&short, "fpf_const"));
    let ordered = (0..3).all(|i| d[i] < k[i] && k[i] < c[i]);
    let fmt = |v: &[f64]| format!("({:.3}, {:.3}, {:.3})", v[0], v[1], v[2]);
    let (fast, t) = timed(1200.0, start);
    Ok((
        tracks && pf_mean >= 5.0 && ordered && fast,
        format!(
            "FPF(50) per-component ARMSE over 1-50 s {} (need <= 2.0); PF(500) {} mean {pf_mean:.3} (need >= 5); M=100 T=10 decomposition {} kernel {} constant {} (need increasing); {t}",
            fmt(&fpf),
            fmt(&pf),
            fmt(&d),
            fmt(&k),
            fmt(&c)
        ),
    ))
}

fn scaling(dir: &Path) -> Outcome {
    let start = Instant::now();
    let runner = Runner::new(1).map_err(err)?;
    let mut cfg = BenchConfig { scenario: ScenarioName::CubicSensorD, trials: Some(1), ..Default::default() };
    cfg.sweep.dims = vec![1, 3, 5, 10, 20, 30, 50];
    cfg.sweep.fit_dims = cfg.sweep.dims.clone();
    cfg.sweep.mre = false;
    let timing = dim_sweep(&cfg, &runner, &dir.join("scaling")).map_err(err)?;
    let slope = timing.slope.unwrap_or(f64::NAN);

    cfg.sweep.dims = vec![100];
    cfg.sweep.mre = true;
    cfg.sweep.timing_reps = 1;
    cfg.particles.fpf_decomp = Some(50);
    let big = dim_sweep(&cfg, &runner, &dir.join("scaling_d100")).map_err(err)?;
    let m = big.rows[0].mre.unwrap_or(f64::NAN);
    let (fast, t) = timed(900.0, start);
    let times: Vec<String> = timing.rows.iter().map(|r| format!("{}:{:.2e}", r.dim, r.gain_s)).collect();
    Ok((
        (2.5..=4.2).contains(&slope) && m <= 0.75 && fast,
        format!("gain-build slope {slope:.3} (need [2.5, 4.2]; s per build {}); MRE(d=100, N_p=50) {m:.4} (need <= 0.75); {t}", times.join(" ")),
    ))
}

fn eps_sweep(dir: &Path) -> Outcome {
    let start = Instant::now();
    let mut cfg = BenchConfig {
        scenario: ScenarioName::Lorenz63,
        trials: Some(3),
        methods: vec![MethodName::FpfDecomp],
        window: Some([1.0, 50.0]),
        write_trajectories: false,
        ..Default::default()
    };
    cfg.sweep.eps = vec![3.0, 0.3, 0.03];
    let s = filter_run(&cfg, &Runner::new(1).map_err(err)?, &dir.join("eps")).map_err(err)?;
    let rows: Vec<Vec<f64>> = s.cells.iter().map(|c| c.armse_components.clone().unwrap_or(vec![f64::NAN; 3])).collect();
    let monotone = (0..3).all(|i| rows[0][i] >= rows[1][i] && rows[1][i] >= rows[2][i]);
    let (fast, t) = timed(600.0, start);
    let txt: Vec<String> = s.cells.iter().zip(&rows).map(|(c, v)| format!("{} ({:.3}, {:.3}, {:.3})", c.label, v[0], v[1], v[2])).collect();
    Ok((monotone && fast, format!("per-component ARMSE over 1-50 s, M=3: {} (need non-increasing as eps shrinks); {t}", txt.join(", "))))
}

/// CSV text with the wall-clock columns blanked.
fn masked(path: &Path) -> std::io::Result<String> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let timing: Vec<usize> = header.split(',').enumerate().filter(|(_, c)| matches!(*c, "cpu_s" | "gain_s" | "run_s")).map(|(i, _)| i).collect();
    if timing.is_empty() {
        return Ok(text);
    }
    let mut out = String::from(header);
    for line in lines {
        out.push('\n');
        let fields: Vec<&str> = line.split(',').enumerate().map(|(i, f)| if timing.contains(&i) { "" } else { f }).collect();
        out.push_str(&fields.join(","));
    }
    Ok(out)
}

fn determinism(dir: &Path) -> Outcome {
    let run = |threads: usize| -> Result<std::path::PathBuf, String> {
        let out = dir.join(format!("det{threads}"));
        let runner = Runner::new(threads).map_err(err)?;
        let ship = BenchConfig { trials: Some(8), ..Default::default() };
        filter_run(&ship, &runner, &out.join("ship")).map_err(err)?;
        let mix = BenchConfig { scenario: ScenarioName::StaticGainMixture, trials: Some(6), ..Default::default() };
        gain_compare(&mix, &runner, &out.join("mixture")).map_err(err)?;
        // d = 1 loses trials to divergence; the failure records are compared too.
        let mut cubic = BenchConfig { scenario: ScenarioName::CubicSensorD, trials: Some(3), skip_failed: true, ..Default::default() };
        cubic.cubic.horizon = 2.0;
        cubic.sweep.dims = vec![1, 2, 3];
        cubic.sweep.fit_dims = cubic.sweep.dims.clone();
        cubic.sweep.timing_reps = 1;
        dim_sweep(&cubic, &runner, &out.join("cubic")).map_err(err)?;
        Ok(out)
    };
    let (a, b) = (run(1)?, run(4)?);
    let mut files = 0;
    let mut differ = Vec::new();
    for sub in ["ship", "mixture", "cubic"] {
        let mut names: Vec<_> = std::fs::read_dir(a.join(sub)).map_err(err)?.filter_map(|e| e.ok()).map(|e| e.file_name()).collect();
        names.sort();
        for name in names.into_iter().filter(|n| n.to_string_lossy().ends_with(".csv")) {
            files += 1;
            if masked(&a.join(sub).join(&name)).map_err(err)? != masked(&b.join(sub).join(&name)).map_err(err)? {
                differ.push(format!("{sub}/{}", name.to_string_lossy()));
            }
        }
    }
    Ok((
        differ.is_empty() && files > 0,
        format!("{files} CSVs from 1 and 4 threads, wall-clock columns (cpu_s, gain_s, run_s) excluded; differing: {differ:?}"),
    ))
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let only: Option<Vec<String>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').map(|s| s.trim().to_string()).collect());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = tmp.path();

    type Check<'a> = (&'a str, Box<dyn Fn() -> Outcome + 'a>);
    let checks: Vec<Check> = vec![
        ("exact_coefficients", Box::new(exact_coefficients)),
        ("linear_observation", Box::new(linear_observation)),
        ("scalar_equivalence", Box::new(scalar_equivalence)),
        ("poisson_residual", Box::new(poisson_residual)),
        ("invertibility", Box::new(invertibility)),
        ("mixture_gains", Box::new(|| mixture_gains(dir))),
        ("ship", Box::new(|| ship(dir))),
        ("lorenz", Box::new(|| lorenz(dir))),
        ("scaling", Box::new(|| scaling(dir))),
        ("eps_sweep", Box::new(|| eps_sweep(dir))),
        ("determinism", Box::new(|| determinism(dir))),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in &checks {
        if only.as_ref().is_some_and(|o| !o.iter().any(|n| n == name)) {
            continue;
        }
        ran += 1;
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
