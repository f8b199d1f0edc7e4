//! Comparison gains: the constant-gain approximation and the kernel
//! (semigroup fixed-point) approximation.

use alloc::vec;
use alloc::vec::Vec;

use crate::filters::Ensemble;
use crate::hermite::HermiteExpansion;
use crate::{Error, Result};

/// Kernel bandwidth choice.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum Bandwidth {
    Fixed(f64),
    /// `4 med^2 / ln N` with `med` the median pairwise distance.
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct KernelGainConfig {
    pub bandwidth: Bandwidth,
    pub iterations: usize,
}

impl Default for KernelGainConfig {
    fn default() -> Self {
        KernelGainConfig { bandwidth: Bandwidth::Fixed(0.1), iterations: 100 }
    }
}

impl KernelGainConfig {
    pub fn validate(&self) -> Result<()> {
        if let Bandwidth::Fixed(eps) = self.bandwidth {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(Error::InvalidArgument("kernel bandwidth must be positive"));
            }
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("kernel iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Evaluates every channel at every particle, row-major `N x m`.
pub fn observation_values(ensemble: &Ensemble, h: &[HermiteExpansion]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(ensemble.len() * h.len());
    for i in 0..ensemble.len() {
        for hs in h {
            out.push(hs.eval(ensemble.particle(i))?);
        }
    }
    Ok(out)
}

/// `K = (1/N) sum_i X_i (h(X_i) - hbar)^T`, row-major `d x m`.
pub fn constant_gain(ensemble: &Ensemble, h: &[HermiteExpansion], hbar: &[f64]) -> Result<Vec<f64>> {
    if hbar.len() != h.len() {
        return Err(Error::LengthMismatch { left: hbar.len(), right: h.len() });
    }
    let values = observation_values(ensemble, h)?;
    Ok(constant_gain_from_values(ensemble, &values, hbar))
}

pub(crate) fn constant_gain_from_values(ensemble: &Ensemble, values: &[f64], hbar: &[f64]) -> Vec<f64> {
    let (d, m, n) = (ensemble.dim(), hbar.len(), ensemble.len());
    let mut k = vec![0.0; d * m];
    for i in 0..n {
        let x = ensemble.particle(i);
        for s in 0..m {
            let c = values[i * m + s] - hbar[s];
            for l in 0..d {
                k[l * m + s] += x[l] * c;
            }
        }
    }
    k.iter_mut().for_each(|v| *v /= n as f64);
    k
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Resolves the bandwidth against an ensemble.
pub fn bandwidth(ensemble: &Ensemble, choice: Bandwidth) -> Result<f64> {
    match choice {
        Bandwidth::Fixed(eps) => Ok(eps),
        Bandwidth::Median => {
            let n = ensemble.len();
            if n < 2 {
                return Err(Error::InvalidArgument("median bandwidth needs two particles"));
            }
            let mut dist: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    dist.push(libm::sqrt(sq_dist(ensemble.particle(i), ensemble.particle(j))));
                }
            }
            dist.sort_by(f64::total_cmp);
            let mid = dist.len() / 2;
            let med = if dist.len() % 2 == 1 { dist[mid] } else { 0.5 * (dist[mid - 1] + dist[mid]) };
            let eps = 4.0 * med * med / libm::log(n as f64);
            if eps > 0.0 {
                Ok(eps)
            } else {
                Err(Error::InvalidArgument("median pairwise distance is zero"))
            }
        }
    }
}

/// Row-stochastic matrix of the kernel `exp(-|x - y|^2 / (4 eps))` after
/// symmetric degree normalization, row-major `N x N`.
pub fn markov_matrix(ensemble: &Ensemble, eps: f64) -> Result<Vec<f64>> {
    let n = ensemble.len();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        g[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = libm::exp(-sq_dist(ensemble.particle(i), ensemble.particle(j)) / (4.0 * eps));
            g[i * n + j] = v;
            g[j * n + i] = v;
        }
    }
    let deg: Vec<f64> = (0..n).map(|i| libm::sqrt(g[i * n..(i + 1) * n].iter().sum::<f64>())).collect();
    for i in 0..n {
        if !(deg[i] > 0.0) || !deg[i].is_finite() {
            return Err(Error::DegenerateKernelRow { particle: i });
        }
    }
    for i in 0..n {
        let row = &mut g[i * n..(i + 1) * n];
        for (j, v) in row.iter_mut().enumerate() {
            *v /= deg[i] * deg[j];
        }
        let sum: f64 = row.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::DegenerateKernelRow { particle: i });
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(g)
}

/// Per-particle kernel gains, `out[i * d * m + l * m + s]`.
pub fn kernel_gain(ensemble: &Ensemble, h: &[HermiteExpansion], hbar: &[f64], config: &KernelGainConfig) -> Result<Vec<f64>> {
    if hbar.len() != h.len() {
        return Err(Error::LengthMismatch { left: hbar.len(), right: h.len() });
    }
    let values = observation_values(ensemble, h)?;
    kernel_gain_from_values(ensemble, &values, hbar, config)
}

pub(crate) fn kernel_gain_from_values(ensemble: &Ensemble, values: &[f64], hbar: &[f64], config: &KernelGainConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let (n, d, m) = (ensemble.len(), ensemble.dim(), hbar.len());
    if n < 2 {
        return Err(Error::InvalidArgument("kernel gain needs at least two particles"));
    }
    let eps = bandwidth(ensemble, config.bandwidth)?;
    let t = markov_matrix(ensemble, eps)?;
    // phi <- T phi + eps (h - hbar), column per channel
    let mut phi = vec![0.0; n * m];
    let mut next = vec![0.0; n * m];
    for _ in 0..config.iterations {
        for i in 0..n {
            let row = &t[i * n..(i + 1) * n];
            for s in 0..m {
                let mut acc = eps * (values[i * m + s] - hbar[s]);
                for (l, w) in row.iter().enumerate() {
                    acc += w * phi[l * m + s];
                }
                next[i * m + s] = acc;
            }
        }
        core::mem::swap(&mut phi, &mut next);
    }
    let mut out = vec![0.0; n * d * m];
    let mut centre = vec![0.0; d];
    for i in 0..n {
        let row = &t[i * n..(i + 1) * n];
        centre.iter_mut().for_each(|c| *c = 0.0);
        for (l, w) in row.iter().enumerate() {
            for (c, x) in centre.iter_mut().zip(ensemble.particle(l)) {
                *c += w * x;
            }
        }
        let k = &mut out[i * d * m..(i + 1) * d * m];
        for (l, w) in row.iter().enumerate() {
            let xl = ensemble.particle(l);
            for s in 0..m {
                let a = w * (phi[l * m + s] + eps * values[l * m + s]) / (2.0 * eps);
                for c in 0..d {
                    k[c * m + s] += a * (xl[c] - centre[c]);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::sync::Arc;
    use crate::hermite::IndexSet;

    fn linear(d: usize) -> Vec<HermiteExpansion> {
        let set = Arc::new(IndexSet::new(d, 1).unwrap());
        let mut e = vec![0u32; d];
        e[0] = 1;
        vec![HermiteExpansion::from_indices(set, [(e.as_slice(), 0.5)]).unwrap()]
    }

    #[test]
    fn constant_observation_gives_zero_gain() {
        let set = Arc::new(IndexSet::new(2, 1).unwrap());
        let h = vec![HermiteExpansion::from_indices(set, [(&[0u32, 0][..], 3.0)]).unwrap()];
        let ens = Ensemble::new(2, vec![0.1, 0.2, -1.0, 0.4, 2.0, 0.0]).unwrap();
        let k = constant_gain(&ens, &h, &[3.0]).unwrap();
        assert!(k.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn symmetric_pair_gives_equal_kernel_gain() {
        // h(x) = x at -a and +a: the kernel gain is even in the particle
        // position, so both particles get the same gain.
        let h = linear(1);
        let ens = Ensemble::new(1, vec![-0.3, 0.3]).unwrap();
        let k = kernel_gain(&ens, &h, &[0.0], &KernelGainConfig::default()).unwrap();
        assert!((k[0] - k[1]).abs() < 1e-15 && k[0] > 0.0);
        let flipped = Ensemble::new(1, vec![0.3, -0.3]).unwrap();
        let k2 = kernel_gain(&flipped, &h, &[0.0], &KernelGainConfig::default()).unwrap();
        assert!((k2[0] - k[1]).abs() < 1e-15);
    }

    #[test]
    fn markov_rows_sum_to_one() {
        let ens = Ensemble::new(2, (0..40).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let t = markov_matrix(&ens, 0.1).unwrap();
        for row in t.chunks_exact(20) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let ens = Ensemble::new(1, vec![0.0, 1.0]).unwrap();
        let h = linear(1);
        let bad = KernelGainConfig { bandwidth: Bandwidth::Fixed(0.0), iterations: 3 };
        assert!(kernel_gain(&ens, &h, &[0.0], &bad).is_err());
        let bad = KernelGainConfig { bandwidth: Bandwidth::Fixed(0.1), iterations: 0 };
        assert!(kernel_gain(&ens, &h, &[0.0], &bad).is_err());
    }

    #[test]
    fn nan_particle_names_row() {
        let ens = Ensemble::new(1, vec![0.0, f64::NAN, 1.0]).unwrap();
        assert_eq!(markov_matrix(&ens, 0.1), Err(Error::DegenerateKernelRow { particle: 0 }));
    }
}
