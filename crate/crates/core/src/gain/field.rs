//! The assembled gain field.
//!
//! For particle components `j` with densities `N_j`, Galerkin expansions
//! `phi_js` and constants `C_js`, column `s` of the gain is
//!
//! ```text
//! K_s(x) = sum_j [ (x - X_j) (hbar_s - C_js) A_j kappa(r_j) + N_j(x) grad phi_js(x) ] / sum_j N_j(x)
//! ```
//!
//! with `A_j = 1 / (2 pi^(d/2) |Sigma_j|^(1/2))` and `kappa` the radial kernel.
//! All weights are formed in log space relative to `ln sum_j N_j(x)`, so the
//! denominator never underflows.
//!
//! Gains are returned row-major as `d x m` slices: entry `(l, s)` sits at
//! `l * m + s`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::gain::blocks::BlockSystem;
use crate::gain::recursion::{backward_recursion_with, GainCoefficients, RecursionPath, Workspace};
use crate::hermite::{HermiteExpansion, HermiteTable};
use crate::mixture::{Covariance, GaussianComponent, Mixture};
use crate::special::RadialKernel;
use crate::{Error, Result};

/// Radial weights grow like `exp(r^2 / 2)` away from every particle. They are
/// saturated here so the gain and its correction stay representable.
const LN_WEIGHT_CAP: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct DecompositionConfig {
    pub path: RecursionPath,
    /// Component contributions bounded below this magnitude are skipped.
    /// Zero keeps every term.
    pub far_field_cutoff: f64,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        DecompositionConfig { path: RecursionPath::Auto, far_field_cutoff: 1e-15 }
    }
}

/// `(x - X) (hbar - C) A kappa(r)` for one component.
pub fn radial_term(component: &GaussianComponent, x: &[f64], hbar: f64, constant: f64) -> Result<Vec<f64>> {
    let r = component.weighted_radial(x)?;
    let kernel = RadialKernel::new(component.dim());
    let scale = libm::exp(ln_radial_constant(component) + kernel.ln_value(r)) * (hbar - constant);
    Ok(x.iter().zip(component.mean()).map(|(a, b)| (a - b) * scale).collect())
}

fn ln_radial_constant(c: &GaussianComponent) -> f64 {
    -libm::log(2.0) - 0.5 * (c.dim() as f64) * libm::log(PI) - 0.5 * c.covariance().log_det()
}

/// Sparse polynomial with each term's support spelled out, for fast
/// derivatives at a tabulated point.
#[derive(Debug, Clone, Default)]
struct CompactPoly {
    coeff: Vec<f64>,
    start: Vec<u32>,
    coord: Vec<u32>,
    exp: Vec<u32>,
}

impl CompactPoly {
    fn new(e: &HermiteExpansion) -> Self {
        let set = e.index_set();
        let mut out = CompactPoly { start: vec![0], ..Default::default() };
        for &(pos, c) in e.terms() {
            for (l, &k) in set.get(pos).iter().enumerate() {
                if k > 0 {
                    out.coord.push(l as u32);
                    out.exp.push(k);
                }
            }
            out.coeff.push(c);
            out.start.push(out.coord.len() as u32);
        }
        out
    }

    fn is_zero(&self) -> bool {
        self.coeff.is_empty()
    }

    fn support(&self, t: usize) -> core::ops::Range<usize> {
        self.start[t] as usize..self.start[t + 1] as usize
    }

    /// Derivative factor of coordinate `i` of term support, lowered `n` times.
    #[inline]
    fn factor(&self, table: &HermiteTable, i: usize, n: u32) -> f64 {
        let k = self.exp[i];
        if n > k {
            return 0.0;
        }
        let l = self.coord[i] as usize;
        let c = match n {
            0 => 1.0,
            1 => 2.0 * f64::from(k),
            _ => 4.0 * f64::from(k) * f64::from(k - 1),
        };
        c * table.get(l, k - n)
    }

    /// `out[l * stride] += scale * d phi / d x_l`.
    fn grad_add(&self, table: &HermiteTable, scale: f64, out: &mut [f64], stride: usize) {
        for t in 0..self.coeff.len() {
            let sup = self.support(t);
            for a in sup.clone() {
                let mut v = scale * self.coeff[t];
                for b in sup.clone() {
                    v *= self.factor(table, b, u32::from(a == b));
                }
                out[self.coord[a] as usize * stride] += v;
            }
        }
    }

    /// `out += scale * Hess(phi) v`.
    fn hess_vec_add(&self, table: &HermiteTable, v: &[f64], scale: f64, out: &mut [f64]) {
        for t in 0..self.coeff.len() {
            let sup = self.support(t);
            for a in sup.clone() {
                for b in sup.clone() {
                    let mut w = scale * self.coeff[t];
                    for c in sup.clone() {
                        w *= self.factor(table, c, u32::from(a == c) + u32::from(b == c));
                    }
                    out[self.coord[a] as usize] += w * v[self.coord[b] as usize];
                }
            }
        }
    }

    /// `out[l * d + k] += scale * d^2 phi / dx_l dx_k`.
    fn hess_add(&self, table: &HermiteTable, scale: f64, d: usize, out: &mut [f64]) {
        for t in 0..self.coeff.len() {
            let sup = self.support(t);
            for a in sup.clone() {
                for b in sup.clone() {
                    let mut w = scale * self.coeff[t];
                    for c in sup.clone() {
                        w *= self.factor(table, c, u32::from(a == c) + u32::from(b == c));
                    }
                    out[self.coord[a] as usize * d + self.coord[b] as usize] += w;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Component {
    mean: Vec<f64>,
    cov: Arc<Covariance>,
    ln_norm: f64,
    ln_radial: f64,
    sqrt_lambda_max: f64,
    /// `max_s |hbar_s - C_js|`
    radial_scale: f64,
}

/// Per-component weights at one query point.
struct Weights {
    nu: Vec<f64>,
    rho: Vec<f64>,
    /// `rho_j * kappa'/(r kappa)`
    drho: Vec<f64>,
    r: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GainField {
    dim: usize,
    channels: usize,
    max_degree: u32,
    kernel: RadialKernel,
    components: Vec<Component>,
    hbar: Vec<f64>,
    /// `hbar_s - C_js`, particle-major.
    radial_coeff: Vec<f64>,
    polys: Vec<CompactPoly>,
    cutoff: f64,
}

/// Builds the field from per-particle, per-channel coefficients
/// (`coeffs[j * m + s]`).
pub fn assemble_gain(mixture: &Mixture, hbar: Vec<f64>, coeffs: &[GainCoefficients], far_field_cutoff: f64) -> Result<GainField> {
    let n = mixture.len();
    let m = hbar.len();
    if coeffs.len() != n * m {
        return Err(Error::LengthMismatch { left: coeffs.len(), right: n * m });
    }
    let d = mixture.dim();
    let max_degree = coeffs.iter().map(|c| c.expansion.index_set().max_degree()).max().unwrap_or(0);
    let mut radial_coeff = Vec::with_capacity(n * m);
    let mut components = Vec::with_capacity(n);
    for (j, c) in mixture.components().iter().enumerate() {
        let row = &coeffs[j * m..(j + 1) * m];
        let mut scale = 0.0f64;
        for (s, gc) in row.iter().enumerate() {
            let v = hbar[s] - gc.constant;
            scale = scale.max(v.abs());
            radial_coeff.push(v);
        }
        let lam_max = c.covariance().precision_eigenvalues().iter().copied().fold(0.0, f64::max);
        components.push(Component {
            mean: c.mean().to_vec(),
            cov: c.covariance().clone(),
            ln_norm: c.log_normalizer(),
            ln_radial: ln_radial_constant(c),
            sqrt_lambda_max: libm::sqrt(lam_max),
            radial_scale: scale,
        });
    }
    Ok(GainField {
        dim: d,
        channels: m,
        max_degree,
        kernel: RadialKernel::new(d),
        components,
        hbar,
        radial_coeff,
        polys: coeffs.iter().map(|c| CompactPoly::new(&c.expansion)).collect(),
        cutoff: far_field_cutoff,
    })
}

impl GainField {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn hbar(&self) -> &[f64] {
        &self.hbar
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim, found: x.len() })
        }
    }

    fn weights(&self, x: &[f64], diff: &mut [f64]) -> Weights {
        let n = self.components.len();
        let mut logn = Vec::with_capacity(n);
        let mut r = Vec::with_capacity(n);
        for c in &self.components {
            for (dl, (a, b)) in diff.iter_mut().zip(x.iter().zip(&c.mean)) {
                *dl = a - b;
            }
            let q = c.cov.quadratic_form(diff);
            logn.push(c.ln_norm - 0.5 * q);
            r.push(libm::sqrt(q));
        }
        let max = logn.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lnz = max + libm::log(logn.iter().map(|&v| libm::exp(v - max)).sum::<f64>());
        let mut nu = Vec::with_capacity(n);
        let mut rho = Vec::with_capacity(n);
        let mut drho = Vec::with_capacity(n);
        for (j, c) in self.components.iter().enumerate() {
            nu.push(libm::exp(logn[j] - lnz));
            let (ln_kappa, ratio) = self.kernel.ln_value_and_ratio(r[j]);
            let w = libm::exp((c.ln_radial + ln_kappa - lnz).min(LN_WEIGHT_CAP));
            rho.push(w);
            drho.push(w * ratio);
        }
        Weights { nu, rho, drho, r }
    }

    fn fill_diff(&self, j: usize, x: &[f64], diff: &mut [f64]) -> f64 {
        let mut norm2 = 0.0;
        for (dl, (a, b)) in diff.iter_mut().zip(x.iter().zip(&self.components[j].mean)) {
            *dl = a - b;
            norm2 += *dl * *dl;
        }
        libm::sqrt(norm2)
    }

    fn active_density(&self, w: &Weights, j: usize) -> bool {
        w.nu[j] > self.cutoff && !self.polys_zero(j)
    }

    fn polys_zero(&self, j: usize) -> bool {
        self.polys[j * self.channels..(j + 1) * self.channels].iter().all(CompactPoly::is_zero)
    }

    /// Radial contribution bound; `vnorm` is the gain size entering the
    /// correction term, zero when only the gain is needed.
    fn active_radial(&self, w: &Weights, j: usize, dist: f64, vnorm: f64) -> bool {
        let c = &self.components[j];
        let bound = c.radial_scale * dist * (w.rho[j] + w.drho[j].abs() * c.sqrt_lambda_max * w.r[j] * vnorm);
        bound > self.cutoff
    }

    /// Gain matrix at `x`.
    pub fn gain(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut diff = vec![0.0; self.dim];
        let w = self.weights(x, &mut diff);
        Ok(self.gain_with(x, &w, &mut diff))
    }

    fn gain_with(&self, x: &[f64], w: &Weights, diff: &mut [f64]) -> Vec<f64> {
        let (d, m) = (self.dim, self.channels);
        let mut k = vec![0.0; d * m];
        let mut table: Option<HermiteTable> = None;
        for j in 0..self.components.len() {
            if self.active_density(w, j) {
                let t = table.get_or_insert_with(|| HermiteTable::new(x, self.max_degree));
                for s in 0..m {
                    self.polys[j * m + s].grad_add(t, w.nu[j], &mut k[s..], m);
                }
            }
            let dist = self.fill_diff(j, x, diff);
            if !self.active_radial(w, j, dist, 0.0) {
                continue;
            }
            for s in 0..m {
                let a = w.rho[j] * self.radial_coeff[j * m + s];
                for l in 0..d {
                    k[l * m + s] += a * diff[l];
                }
            }
        }
        k
    }

    /// Gain and the correction `Omega_l = 1/2 sum_{k,s} K_ks dK_ls/dx_k`, both
    /// from the closed-form derivative of the field.
    pub fn gain_and_correction(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(x)?;
        let (d, m) = (self.dim, self.channels);
        let mut diff = vec![0.0; d];
        let w = self.weights(x, &mut diff);
        let k = self.gain_with(x, &w, &mut diff);
        let vnorm = (0..m).map(|s| libm::sqrt((0..d).map(|l| k[l * m + s] * k[l * m + s]).sum())).fold(0.0, f64::max);
        let table = HermiteTable::new(x, self.max_degree);
        // dk[s * d + l] accumulates (v_s . grad) of the numerator over Z.
        let mut dk = vec![0.0; m * d];
        let mut zsum = vec![0.0; m];
        let mut y = vec![0.0; d];
        let mut v = vec![0.0; d];
        let mut g = vec![0.0; d];
        for j in 0..self.components.len() {
            let dens = w.nu[j] > self.cutoff;
            let dist = self.fill_diff(j, x, &mut diff);
            let rad = self.active_radial(&w, j, dist, vnorm);
            if !dens && !rad {
                continue;
            }
            self.components[j].cov.apply_precision(&diff, &mut y);
            for s in 0..m {
                for l in 0..d {
                    v[l] = k[l * m + s];
                }
                let beta: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum();
                let out = &mut dk[s * d..(s + 1) * d];
                if rad {
                    let c = self.radial_coeff[j * m + s];
                    let (a, b) = (c * w.rho[j], c * w.drho[j] * beta);
                    for l in 0..d {
                        out[l] += a * v[l] + b * diff[l];
                    }
                }
                if !dens {
                    continue;
                }
                zsum[s] += w.nu[j] * beta;
                let poly = &self.polys[j * m + s];
                if poly.is_zero() {
                    continue;
                }
                g.iter_mut().for_each(|e| *e = 0.0);
                poly.grad_add(&table, 1.0, &mut g, 1);
                for l in 0..d {
                    out[l] -= w.nu[j] * beta * g[l];
                }
                poly.hess_vec_add(&table, &v, w.nu[j], out);
            }
        }
        let mut omega = vec![0.0; d];
        for s in 0..m {
            for l in 0..d {
                omega[l] += 0.5 * (dk[s * d + l] + k[l * m + s] * zsum[s]);
            }
        }
        Ok((k, omega))
    }

    /// Full Jacobian, `J[(l * m + s) * d + k] = dK_ls / dx_k`, with every term kept.
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let (d, m) = (self.dim, self.channels);
        let mut diff = vec![0.0; d];
        let w = self.weights(x, &mut diff);
        let k = self.gain_with(x, &w, &mut diff);
        let table = HermiteTable::new(x, self.max_degree);
        let mut jac = vec![0.0; d * m * d];
        let mut zy = vec![0.0; d];
        let mut y = vec![0.0; d];
        let mut g = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        for j in 0..self.components.len() {
            self.fill_diff(j, x, &mut diff);
            self.components[j].cov.apply_precision(&diff, &mut y);
            for kk in 0..d {
                zy[kk] += w.nu[j] * y[kk];
            }
            for s in 0..m {
                let c = self.radial_coeff[j * m + s];
                let poly = &self.polys[j * m + s];
                g.iter_mut().for_each(|e| *e = 0.0);
                hess.iter_mut().for_each(|e| *e = 0.0);
                poly.grad_add(&table, 1.0, &mut g, 1);
                poly.hess_add(&table, 1.0, d, &mut hess);
                for l in 0..d {
                    let row = &mut jac[(l * m + s) * d..(l * m + s + 1) * d];
                    for kk in 0..d {
                        let mut v = c * w.drho[j] * y[kk] * diff[l] - w.nu[j] * y[kk] * g[l] + w.nu[j] * hess[l * d + kk];
                        if kk == l {
                            v += c * w.rho[j];
                        }
                        row[kk] += v;
                    }
                }
            }
        }
        for l in 0..d {
            for s in 0..m {
                for kk in 0..d {
                    jac[(l * m + s) * d + kk] += k[l * m + s] * zy[kk];
                }
            }
        }
        Ok(jac)
    }

    /// Correction term from central differences of the gain, step
    /// `1e-4 (1 + |x_k|)` per coordinate.
    pub fn correction_fd(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (d, m) = (self.dim, self.channels);
        let k = self.gain(x)?;
        let mut omega = vec![0.0; d];
        let mut xp = x.to_vec();
        for kk in 0..d {
            let h = 1e-4 * (1.0 + x[kk].abs());
            xp[kk] = x[kk] + h;
            let plus = self.gain(&xp)?;
            xp[kk] = x[kk] - h;
            let minus = self.gain(&xp)?;
            xp[kk] = x[kk];
            for l in 0..d {
                for s in 0..m {
                    omega[l] += 0.5 * k[kk * m + s] * (plus[l * m + s] - minus[l * m + s]) / (2.0 * h);
                }
            }
        }
        Ok(omega)
    }
}

/// Computes Galerkin coefficients for every particle and channel and
/// assembles the field, caching one factorized block system per distinct
/// covariance.
#[derive(Debug, Default)]
pub struct DecompositionSolver {
    config: DecompositionConfig,
    systems: Vec<(Arc<Covariance>, BlockSystem)>,
    workspace: Workspace,
}

impl DecompositionSolver {
    pub fn new(config: DecompositionConfig) -> Self {
        DecompositionSolver { config, systems: Vec::new(), workspace: Workspace::default() }
    }

    pub fn config(&self) -> &DecompositionConfig {
        &self.config
    }

    fn system_index(&mut self, cov: &Arc<Covariance>, a: &HermiteExpansion) -> Result<usize> {
        let set = a.index_set();
        if let Some(i) = self
            .systems
            .iter()
            .position(|(c, b)| Arc::ptr_eq(c, cov) && Arc::ptr_eq(b.index_set(), set))
        {
            return Ok(i);
        }
        self.systems.push((cov.clone(), BlockSystem::build(cov.precision(), set.clone())?));
        Ok(self.systems.len() - 1)
    }

    /// Particle-major coefficients `out[j * m + s]`.
    pub fn coefficients(&mut self, mixture: &Mixture, h: &[HermiteExpansion]) -> Result<Vec<GainCoefficients>> {
        let mut out = Vec::with_capacity(mixture.len() * h.len());
        for c in mixture.components() {
            for hs in h {
                let idx = self.system_index(c.covariance(), hs)?;
                let blocks = &self.systems[idx].1;
                out.push(backward_recursion_with(blocks, hs, c.mean(), self.config.path, &mut self.workspace)?);
            }
        }
        Ok(out)
    }

    /// The gain field of `mixture` with `hbar` the particle average of `h`.
    pub fn solve(&mut self, mixture: &Mixture, h: &[HermiteExpansion]) -> Result<GainField> {
        let n = mixture.len() as f64;
        let mut hbar = vec![0.0; h.len()];
        for c in mixture.components() {
            for (hb, hs) in hbar.iter_mut().zip(h) {
                *hb += hs.eval(c.mean())?;
            }
        }
        hbar.iter_mut().for_each(|v| *v /= n);
        let coeffs = self.coefficients(mixture, h)?;
        assemble_gain(mixture, hbar, &coeffs, self.config.far_field_cutoff)
    }
}
