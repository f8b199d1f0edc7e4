//! Closed forms for `d = 1` with `Sigma_i = eps`.
//!
//! The expansion derivative is written `Ktilde_k`, the coefficient of `H_k`
//! in `phi'`, so `Ktilde_k = 2 (k+1) phi_{k+1}`. Backward recursion:
//!
//! ```text
//! Ktilde_k = 2 eps a_{k+1} + 2 X Ktilde_{k+1} + 2 (2 eps - 1)(k+2) Ktilde_{k+2}
//! C        = a_0 + (X/eps) Ktilde_0 + (2 - 1/eps) Ktilde_1
//! ```

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::hermite::hermite_table;
use crate::special::erf;

/// `(Ktilde, C)` for one particle at `x`, given the Hermite coefficients
/// `a[0..=p]` of `h`.
pub fn scalar_recursion(a: &[f64], x: f64, eps: f64) -> (Vec<f64>, f64) {
    let p = a.len().saturating_sub(1);
    let mut kt = vec![0.0; p + 2];
    for k in (0..p).rev() {
        kt[k] = 2.0 * eps * a[k + 1] + 2.0 * x * kt[k + 1] + 2.0 * (2.0 * eps - 1.0) * (k as f64 + 2.0) * kt[k + 2];
    }
    let c = a.first().copied().unwrap_or(0.0) + (x / eps) * kt[0] + (2.0 - 1.0 / eps) * kt[1];
    kt.truncate(p.max(1));
    (kt, c)
}

/// Scalar gain at `x` for particles `states` sharing variance `eps`.
///
/// Each particle contributes `(hbar - C_i)/2 erf((x - X_i)/sqrt(2 eps))`
/// plus its Gaussian-weighted expansion derivative; the sum is divided by
/// the mixture density (both without the `1/N` factor).
pub fn scalar_gain(states: &[f64], eps: f64, a: &[f64], x: f64) -> f64 {
    let p = a.len().saturating_sub(1);
    let mut h_at = vec![0.0; p + 1];
    let hbar = states
        .iter()
        .map(|&xi| {
            hermite_table(xi, &mut h_at);
            a.iter().zip(&h_at).map(|(c, h)| c * h).sum::<f64>()
        })
        .sum::<f64>()
        / states.len() as f64;
    let mut table = vec![0.0; p.max(1)];
    hermite_table(x, &mut table);
    let shift = states.iter().map(|&xi| -(x - xi) * (x - xi) / (2.0 * eps)).fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for &xi in states {
        let (kt, c) = scalar_recursion(a, xi, eps);
        // Densities carry a common factor exp(shift) / sqrt(2 pi eps), which
        // the radial part does not; scale it back in.
        let w = libm::exp(-(x - xi) * (x - xi) / (2.0 * eps) - shift);
        let grad: f64 = kt.iter().zip(&table).map(|(k, h)| k * h).sum();
        let radial = 0.5 * (hbar - c) * erf((x - xi) / libm::sqrt(2.0 * eps)) * libm::sqrt(2.0 * PI * eps) * libm::exp(-shift);
        num += radial + w * grad;
        den += w;
    }
    num / den
}
