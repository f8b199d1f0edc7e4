//! Error function, incomplete gamma, and the radial kernel
//! `kappa_d(r) = gamma(d/2, r^2/2) r^-d`.

use core::f64::consts::FRAC_1_SQRT_2;

use crate::{Error, Result};

const EPS: f64 = 1e-16;
const SQRT_PI: f64 = 1.772_453_850_905_516;
const LN_SQRT_PI: f64 = 0.572_364_942_924_700_1;
const MAX_ITER: usize = 1000;

/// Below this radius the kernel uses its two-term series.
pub const R_SWITCH: f64 = 1e-4;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

fn check_args(s: f64, x: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain("incomplete gamma requires s > 0"));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain("incomplete gamma requires x >= 0"));
    }
    Ok(())
}

/// `ln P(s, x)` with `P` the regularized lower incomplete gamma.
///
/// `ln_gamma_s` is `ln Gamma(s)`, passed in so callers evaluating many
/// points at one `s` pay for it once.
fn ln_regularized_lower(s: f64, x: f64, ln_gamma_s: f64) -> f64 {
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    let ln_prefix = s * libm::log(x) - x - ln_gamma_s;
    if x < s + 1.0 {
        // P = x^s e^-x / Gamma(s+1) * sum_n x^n / ((s+1)...(s+n))
        let mut term = 1.0 / s;
        let mut sum = term;
        let mut a = s;
        for _ in 0..MAX_ITER {
            a += 1.0;
            term *= x / a;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        ln_prefix + libm::log(sum)
    } else {
        // Tail bound: Q <= x^(s-1) e^-x / Gamma(s) * (1 + ...) is far below
        // double resolution, so P rounds to one.
        if ln_prefix - libm::log(x) < -40.0 {
            return 0.0;
        }
        let q = libm::exp(ln_prefix) * upper_continued_fraction(s, x);
        libm::log1p(-q)
    }
}

/// Modified Lentz evaluation of the continued fraction for `Q(s,x) e^x x^-s Gamma(s)`.
fn upper_continued_fraction(s: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized lower incomplete gamma `P(s, x)`.
pub fn regularized_lower_gamma(s: f64, x: f64) -> Result<f64> {
    check_args(s, x)?;
    Ok(libm::exp(ln_regularized_lower(s, x, libm::lgamma(s))))
}

/// `gamma(s, x) = int_0^x t^(s-1) e^-t dt`.
pub fn lower_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    check_args(s, x)?;
    let lg = libm::lgamma(s);
    let ln_p = ln_regularized_lower(s, x, lg);
    if s < 170.0 {
        Ok(libm::exp(ln_p) * libm::tgamma(s))
    } else {
        Ok(libm::exp(ln_p + lg))
    }
}

/// `gamma(d/2, r^2/2) r^-d` with the removable singularity at `r = 0` filled in.
pub fn radial_kernel(d: usize, r: f64) -> f64 {
    RadialKernel::new(d).value(r)
}

/// The radial kernel for a fixed dimension, with its constants precomputed.
#[derive(Debug, Clone, Copy)]
pub struct RadialKernel {
    dim: f64,
    s: f64,
    ln_gamma_s: f64,
    /// `2^(1 - d/2)`
    two_pow: f64,
}

impl RadialKernel {
    pub fn new(d: usize) -> Self {
        assert!(d >= 1, "radial kernel dimension must be positive");
        let dim = d as f64;
        let s = 0.5 * dim;
        RadialKernel { dim, s, ln_gamma_s: libm::lgamma(s), two_pow: libm::exp2(1.0 - s) }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    /// Limit at `r = 0`, `2^(1-d/2)/d`.
    pub fn at_origin(&self) -> f64 {
        self.two_pow / self.dim
    }

    /// `ln kappa(r)`.
    pub fn ln_value(&self, r: f64) -> f64 {
        if r <= R_SWITCH {
            return libm::log(self.series_value(r));
        }
        // Closed forms for the common low dimensions.
        let ln_r = libm::log(r);
        match self.dim as usize {
            1 => return LN_SQRT_PI + libm::log(libm::erf(r * FRAC_1_SQRT_2)) - ln_r,
            2 => return libm::log(-libm::expm1(-0.5 * r * r)) - 2.0 * ln_r,
            3 if r >= 1.0 => {
                let g = 0.5 * SQRT_PI * libm::erf(r * FRAC_1_SQRT_2) - r * FRAC_1_SQRT_2 * libm::exp(-0.5 * r * r);
                return libm::log(g) - 3.0 * ln_r;
            }
            _ => {}
        }
        ln_regularized_lower(self.s, 0.5 * r * r, self.ln_gamma_s) + self.ln_gamma_s - self.dim * ln_r
    }

    pub fn value(&self, r: f64) -> f64 {
        if r <= R_SWITCH {
            return self.series_value(r);
        }
        libm::exp(self.ln_value(r))
    }

    fn series_value(&self, r: f64) -> f64 {
        self.at_origin() - 0.5 * self.two_pow * r * r / (self.dim + 2.0)
    }

    /// `kappa'(r) / r`, which stays finite at the origin.
    pub fn slope_over_r(&self, r: f64) -> f64 {
        self.value_and_slope(r).1
    }

    /// `(kappa(r), kappa'(r)/r)`.
    pub fn value_and_slope(&self, r: f64) -> (f64, f64) {
        let kappa = self.value(r);
        if r < 1.0 {
            // tau = 2^-s sum_{n>=1} (-1)^n n 2^(1-n) r^(2n-2) / (n! (s+n))
            let half_r2 = 0.5 * r * r;
            let mut pow = 1.0; // (r^2/2)^(n-1) / (n-1)!
            let mut sum = 0.0;
            for n in 1..40 {
                let nf = n as f64;
                let term = pow / (self.s + nf);
                sum += if n % 2 == 1 { -term } else { term };
                if term < 1e-18 * sum.abs() {
                    break;
                }
                pow *= half_r2 / nf;
            }
            (kappa, 0.5 * self.two_pow * sum)
        } else {
            (kappa, self.slope_closed(r, kappa))
        }
    }

    /// `(ln kappa(r), kappa'(r) / (r kappa(r)))`, safe where `kappa` itself underflows.
    pub fn ln_value_and_ratio(&self, r: f64) -> (f64, f64) {
        let ln_kappa = self.ln_value(r);
        if r < 1.0 {
            let (kappa, tau) = self.value_and_slope(r);
            return (ln_kappa, tau / kappa);
        }
        let r2 = r * r;
        let ratio = (self.two_pow * libm::exp(-0.5 * r2 - ln_kappa) - self.dim) / r2;
        (ln_kappa, ratio)
    }

    fn slope_closed(&self, r: f64, kappa: f64) -> f64 {
        let r2 = r * r;
        (self.two_pow * libm::exp(-0.5 * r2) - self.dim * kappa) / r2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_values() {
        assert_eq!(erf(0.0), 0.0);
        assert!(erf(6.0) > 1.0 - 1e-15);
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-15);
    }

    #[test]
    fn incomplete_gamma_values() {
        let g = lower_incomplete_gamma(1.0, 2.0).unwrap();
        assert!((g - (1.0 - (-2.0f64).exp())).abs() < 1e-14);
        let g = lower_incomplete_gamma(0.5, 1.0).unwrap();
        let want = core::f64::consts::PI.sqrt() * erf(1.0);
        assert!((g - want).abs() < 1e-12 * want);
        assert_eq!(lower_incomplete_gamma(2.5, 0.0).unwrap(), 0.0);
        assert!(lower_incomplete_gamma(0.0, 1.0).is_err());
        assert!(lower_incomplete_gamma(1.0, -1.0).is_err());
    }

    #[test]
    fn continued_fraction_branch() {
        // gamma(3, x) = 2 - e^-x (x^2 + 2x + 2)
        for x in [4.5, 10.0, 30.0] {
            let g = lower_incomplete_gamma(3.0, x).unwrap();
            let want = 2.0 - (-x as f64).exp() * (x * x + 2.0 * x + 2.0);
            assert!((g - want).abs() < 1e-12, "{x}: {g} vs {want}");
        }
    }

    #[test]
    fn kernel_values() {
        assert!((radial_kernel(2, 0.0) - 0.5).abs() < 1e-15);
        let want = core::f64::consts::PI.sqrt() * erf(0.5f64.sqrt());
        assert!((radial_kernel(1, 1.0) - want).abs() < 1e-12);
        let r = 40.0;
        let want = 0.5 * core::f64::consts::PI.sqrt() / (r * r * r);
        assert!((radial_kernel(3, r) - want).abs() < 1e-12 * want);
    }

    #[test]
    fn kernel_continuous_at_switch() {
        for d in 1..=12 {
            let k = RadialKernel::new(d);
            let below = k.value(R_SWITCH);
            let above = k.value(R_SWITCH * (1.0 + 1e-12));
            assert!((below - above).abs() < 1e-10, "d={d}");
            let r = 0.999_999;
            let (kappa, series) = k.value_and_slope(r);
            let closed = k.slope_closed(r, kappa);
            assert!((series - closed).abs() < 1e-9 * closed.abs(), "d={d}: {series} vs {closed}");
        }
    }

    #[test]
    fn slope_matches_difference() {
        for d in [1, 2, 3, 7, 50] {
            let k = RadialKernel::new(d);
            for r in [0.01f64, 0.3, 0.9, 1.5, 4.0, 9.0] {
                let h = 1e-5 * r.max(1.0);
                let fd = (k.value(r + h) - k.value(r - h)) / (2.0 * h);
                let tau = k.slope_over_r(r);
                assert!((fd - tau * r).abs() < 1e-6 * fd.abs(), "d={d} r={r}: {fd} vs {}", tau * r);
            }
        }
    }

    #[test]
    fn ratio_matches_direct() {
        for d in [1, 3, 20] {
            let k = RadialKernel::new(d);
            for r in [0.0, 5e-5, 0.5, 1.0, 3.0] {
                let (lnk, ratio) = k.ln_value_and_ratio(r);
                let (kappa, tau) = k.value_and_slope(r);
                assert!((libm::exp(lnk) - kappa).abs() < 1e-13 * kappa);
                assert!((ratio - tau / kappa).abs() < 1e-9 * ratio.abs(), "d={d} r={r}");
            }
        }
    }

    #[test]
    fn large_dimension_finite() {
        let k = RadialKernel::new(100);
        for r in [0.0, 1e-3, 1.0, 10.0, 30.0] {
            let v = k.value(r);
            assert!(v.is_finite() && v > 0.0, "r={r}: {v}");
        }
        assert!(k.ln_value(1000.0).is_finite());
    }
}
