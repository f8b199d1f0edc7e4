#![allow(dead_code)]

use std::sync::Arc;

use fpf_core::hermite::{monomial_to_hermite, HermiteExpansion, IndexSet, MultiIndex, Polynomial};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// `x_j^3` in Hermite form over `set`.
pub fn cubic(set: &Arc<IndexSet>, j: usize) -> HermiteExpansion {
    let d = set.dim();
    let poly = Polynomial::new(d, vec![(MultiIndex::axis(d, j, 3), 1.0)]).unwrap();
    monomial_to_hermite(&poly, set.clone()).unwrap()
}

/// Random polynomial of total degree at most `p` with `terms` monomials.
pub fn random_polynomial(r: &mut StdRng, d: usize, p: u32, terms: usize) -> Polynomial {
    let mut out = Vec::new();
    for _ in 0..terms {
        let mut k = vec![0u32; d];
        let deg = r.random_range(0..=p);
        for _ in 0..deg {
            k[r.random_range(0..d)] += 1;
        }
        out.push((MultiIndex::new(k), r.random_range(-2.0..2.0)));
    }
    Polynomial::new(d, out).unwrap()
}

pub fn random_point(r: &mut StdRng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| r.random_range(-scale..scale)).collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
