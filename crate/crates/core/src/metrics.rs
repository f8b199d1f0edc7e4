//! Error metrics and the timing fit.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// One filter run against its truth.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scenario: String,
    pub method: String,
    pub seed: u64,
    pub trial: u64,
    pub dim: usize,
    pub times: Vec<f64>,
    /// Row-major, one row per time.
    pub truth: Vec<f64>,
    pub estimate: Vec<f64>,
    pub wall_seconds: f64,
    pub flags: Vec<String>,
}

impl RunRecord {
    pub fn check(&self) -> Result<()> {
        let n = self.times.len() * self.dim;
        if self.truth.len() != n || self.estimate.len() != n {
            return Err(Error::LengthMismatch { left: self.truth.len().max(self.estimate.len()), right: n });
        }
        if !(self.wall_seconds >= 0.0) {
            return Err(Error::InvalidArgument("wall time must be non-negative"));
        }
        Ok(())
    }

    /// Row indices with `t0 <= t <= t1`.
    fn window(&self, window: Option<(f64, f64)>) -> impl Iterator<Item = usize> + '_ {
        let (t0, t1) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        let tol = 1e-9;
        self.times.iter().enumerate().filter(move |(_, &t)| t >= t0 - tol && t <= t1 + tol).map(|(k, _)| k)
    }
}

/// `sqrt(sum_i (approx_ij - exact_ij)^2)` over particles, with `approx` and
/// `exact` row-major with `dim` columns.
pub fn gain_l2_error(approx: &[f64], exact: &[f64], dim: usize, component: usize) -> Result<f64> {
    if approx.len() != exact.len() {
        return Err(Error::LengthMismatch { left: approx.len(), right: exact.len() });
    }
    if component >= dim || approx.len() % dim != 0 {
        return Err(Error::DimensionMismatch { expected: dim, found: component });
    }
    let s: f64 = approx.chunks_exact(dim).zip(exact.chunks_exact(dim)).map(|(a, e)| (a[component] - e[component]) * (a[component] - e[component])).sum();
    Ok(libm::sqrt(s))
}

fn check_records(records: &[RunRecord]) -> Result<usize> {
    let first = records.first().ok_or(Error::InvalidArgument("no runs to aggregate"))?;
    for r in records {
        r.check()?;
        if r.times.len() != first.times.len() || r.dim != first.dim {
            return Err(Error::LengthMismatch { left: r.times.len(), right: first.times.len() });
        }
    }
    Ok(first.dim)
}

/// Full-state ARMSE: `sqrt(mean over trials and times of |X - Xhat|^2)`,
/// restricted to times in `window`.
pub fn armse(records: &[RunRecord], window: Option<(f64, f64)>) -> Result<f64> {
    let per = armse_components(records, window)?;
    Ok(libm::sqrt(per.iter().map(|v| v * v).sum()))
}

/// ARMSE of each state component separately.
pub fn armse_components(records: &[RunRecord], window: Option<(f64, f64)>) -> Result<Vec<f64>> {
    let d = check_records(records)?;
    let mut acc = vec![0.0; d];
    let mut count = 0usize;
    for r in records {
        for k in r.window(window) {
            for l in 0..d {
                let e = r.truth[k * d + l] - r.estimate[k * d + l];
                acc[l] += e * e;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InvalidArgument("time window selects no samples"));
    }
    Ok(acc.into_iter().map(|a| libm::sqrt(a / count as f64)).collect())
}

/// `sum_k |X_k - Xhat_k| / sum_k |X_k|` with Euclidean norms.
pub fn mre(record: &RunRecord) -> Result<f64> {
    record.check()?;
    let d = record.dim;
    let (mut num, mut den) = (0.0, 0.0);
    for (x, e) in record.truth.chunks_exact(d).zip(record.estimate.chunks_exact(d)) {
        num += libm::sqrt(x.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum());
        den += libm::sqrt(x.iter().map(|a| a * a).sum());
    }
    if den == 0.0 {
        return Err(Error::Domain("relative error of an all-zero truth"));
    }
    Ok(num / den)
}

/// Least-squares slope of `ln seconds` against `ln d`.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument("scaling fit needs at least three points"));
    }
    if points.iter().any(|&(d, t)| !(d > 0.0) || !(t > 0.0)) {
        return Err(Error::Domain("scaling fit needs positive dimensions and times"));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| libm::log(p.0)).collect();
    let ys: Vec<f64> = points.iter().map(|p| libm::log(p.1)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("scaling fit needs distinct dimensions"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(truth: Vec<f64>, estimate: Vec<f64>, dim: usize) -> RunRecord {
        let n = truth.len() / dim;
        RunRecord {
            scenario: "s".into(),
            method: "m".into(),
            seed: 0,
            trial: 0,
            dim,
            times: (0..n).map(|k| k as f64).collect(),
            truth,
            estimate,
            wall_seconds: 0.0,
            flags: Vec::new(),
        }
    }

    #[test]
    fn gain_error_basics() {
        assert_eq!(gain_l2_error(&[1.0, 2.0], &[1.0, 2.0], 2, 1).unwrap(), 0.0);
        assert_eq!(gain_l2_error(&[4.0], &[1.0], 1, 0).unwrap(), 3.0);
        assert!(gain_l2_error(&[1.0], &[1.0, 2.0], 1, 0).is_err());
    }

    #[test]
    fn armse_constant_error() {
        let r = record(vec![1.0, 2.0, 3.0], vec![1.5, 2.5, 3.5], 1);
        assert!((armse(&[r.clone(), r], None).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mre_limits() {
        let r = record(vec![1.0, -2.0, 3.0, 0.5], vec![0.0; 4], 2);
        assert!((mre(&r).unwrap() - 1.0).abs() < 1e-15);
        let r = record(vec![1.0, -2.0], vec![1.0, -2.0], 2);
        assert_eq!(mre(&r).unwrap(), 0.0);
        assert!(mre(&record(vec![0.0; 2], vec![1.0; 2], 1)).is_err());
    }

    #[test]
    fn fits_power_laws() {
        let cubic: Vec<(f64, f64)> = [1.0, 3.0, 5.0, 10.0, 20.0].iter().map(|&d| (d, 0.3 * d * d * d)).collect();
        assert!((scaling_fit(&cubic).unwrap() - 3.0).abs() < 1e-10);
        let lin: Vec<(f64, f64)> = [1.0, 2.0, 7.0].iter().map(|&d| (d, 5.0 * d)).collect();
        assert!((scaling_fit(&lin).unwrap() - 1.0).abs() < 1e-12);
        assert!(scaling_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    }
}
