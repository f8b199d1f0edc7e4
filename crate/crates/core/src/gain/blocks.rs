//! Level blocks of the Galerkin system.
//!
//! The coefficient vector `Phi_q` of degree-`q` Hermite coefficients obeys
//!
//! ```text
//! A_q Phi_q + B_{q+1} Phi_{q+1} + D_{q+2} Phi_{q+2} = a_q,   1 <= q <= p
//!             B_1 Phi_1 + D_2 Phi_2 = a_0 - C
//! ```
//!
//! where `A_q` depends only on the precision `L = Sigma^-1` and `B`, `D`
//! carry the particle location. The recursion itself never materializes
//! `B` or `D`; the explicit matrices exist for inspection and tests.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::hermite::IndexSet;
use crate::{Error, Result};

/// Relative pivot size below which a block counts as singular.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Largest level a non-diagonal precision may have; beyond this a dense
/// factorization is out of reach.
pub const MAX_DENSE_LEVEL: usize = 4096;

#[derive(Debug, Clone)]
pub(crate) enum LevelSolver {
    /// `A_q` is diagonal with entries `sum_l L_ll k_l`.
    Diagonal,
    Dense(LU<f64, Dyn, Dyn>),
}

/// Outcome of factorizing one level block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelReport {
    pub level: u32,
    pub size: usize,
    pub invertible: bool,
    /// 1-norm condition number estimate (infinite when singular).
    pub condition: f64,
}

/// Factorized level blocks for one precision matrix.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    index_set: Arc<IndexSet>,
    precision: DMatrix<f64>,
    diagonal: bool,
    /// Solver for level `q` at index `q - 1`.
    levels: Vec<LevelSolver>,
}

fn check_spd(precision: &DMatrix<f64>) -> Result<()> {
    let d = precision.nrows();
    if precision.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: precision.ncols() });
    }
    let scale = precision.amax();
    for i in 0..d {
        for j in 0..i {
            if (precision[(i, j)] - precision[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::NotPositiveDefinite);
            }
        }
    }
    if precision.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    let d = m.nrows();
    (0..d).all(|i| (0..d).all(|j| i == j || m[(i, j)] == 0.0))
}

/// Explicit `A_q` in graded order.
pub fn a_block(precision: &DMatrix<f64>, index_set: &IndexSet, q: u32) -> DMatrix<f64> {
    let d = index_set.dim();
    let range = index_set.level_range(q);
    let n = range.len();
    let mut a = DMatrix::zeros(n, n);
    let mut shifted = vec![0u32; d];
    for (row, pos) in range.clone().enumerate() {
        let k = index_set.get(pos);
        a[(row, row)] = (0..d).map(|l| precision[(l, l)] * f64::from(k[l])).sum();
        for l in 0..d {
            if k[l] == 0 {
                continue;
            }
            for m in 0..d {
                if m == l || precision[(l, m)] == 0.0 {
                    continue;
                }
                // Column of k + e_m - e_l, weight L_lm (k_m + 1).
                shifted.copy_from_slice(k);
                shifted[l] -= 1;
                shifted[m] += 1;
                let col = index_set.rank(&shifted).expect("same level") - range.start;
                a[(row, col)] += precision[(l, m)] * f64::from(k[m] + 1);
            }
        }
    }
    a
}

/// Explicit `B_q` (`n_{q-1} x n_q`) at particle location `x`.
pub fn b_block(precision: &DMatrix<f64>, index_set: &IndexSet, q: u32, x: &[f64]) -> DMatrix<f64> {
    assert!(q >= 1 && q <= index_set.max_degree());
    let d = index_set.dim();
    let rows = index_set.level_range(q - 1);
    let cols = index_set.level_range(q);
    let w = shift_weights(precision, x);
    let mut b = DMatrix::zeros(rows.len(), cols.len());
    let mut up = vec![0u32; d];
    for (row, pos) in rows.enumerate() {
        let k = index_set.get(pos);
        for m in 0..d {
            up.copy_from_slice(k);
            up[m] += 1;
            let col = index_set.rank(&up).expect("level q") - cols.start;
            b[(row, col)] -= f64::from(k[m] + 1) * w[m];
        }
    }
    b
}

/// Explicit `D_q` (`n_{q-2} x n_q`).
pub fn d_block(precision: &DMatrix<f64>, index_set: &IndexSet, q: u32) -> DMatrix<f64> {
    assert!(q >= 2 && q <= index_set.max_degree());
    let d = index_set.dim();
    let rows = index_set.level_range(q - 2);
    let cols = index_set.level_range(q);
    let mut out = DMatrix::zeros(rows.len(), cols.len());
    let mut up = vec![0u32; d];
    for (row, pos) in rows.enumerate() {
        let k = index_set.get(pos);
        for l in 0..d {
            for m in 0..d {
                up.copy_from_slice(k);
                up[l] += 1;
                up[m] += 1;
                let col = index_set.rank(&up).expect("level q") - cols.start;
                let v = if l == m {
                    2.0 * (2.0 - precision[(l, l)]) * f64::from(k[l] + 1) * f64::from(k[l] + 2)
                } else {
                    -2.0 * precision[(l, m)] * f64::from(k[m] + 1) * f64::from(k[l] + 1)
                };
                out[(row, col)] -= v;
            }
        }
    }
    out
}

/// `w_m = 2 sum_l L_lm x_l`, the weight of the degree-raising neighbor coupling.
pub(crate) fn shift_weights(precision: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d).map(|m| 2.0 * (0..d).map(|l| precision[(l, m)] * x[l]).sum::<f64>()).collect()
}

fn factorize(a: DMatrix<f64>, level: u32) -> (Option<LU<f64, Dyn, Dyn>>, LevelReport) {
    let size = a.nrows();
    let scale = a.amax();
    let norm1 = one_norm(&a);
    let lu = a.lu();
    let u = lu.u();
    let min_pivot = (0..size).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(min_pivot >= PIVOT_TOLERANCE * scale) {
        return (None, LevelReport { level, size, invertible: false, condition: f64::INFINITY });
    }
    let condition = match lu.try_inverse() {
        Some(inv) => norm1 * one_norm(&inv),
        None => f64::INFINITY,
    };
    (Some(lu), LevelReport { level, size, invertible: true, condition })
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn diagonal_report(precision: &DMatrix<f64>, level: u32, size: usize) -> LevelReport {
    let d = precision.nrows();
    let diag = (0..d).map(|l| precision[(l, l)]);
    let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let q = f64::from(level);
    // Entries range over q * [min L_ll, max L_ll].
    let invertible = q * lo >= PIVOT_TOLERANCE * q * hi && lo > 0.0;
    let condition = if invertible { hi / lo } else { f64::INFINITY };
    LevelReport { level, size, invertible, condition }
}

impl BlockSystem {
    pub fn build(precision: &DMatrix<f64>, index_set: Arc<IndexSet>) -> Result<Self> {
        if precision.nrows() != index_set.dim() {
            return Err(Error::DimensionMismatch { expected: index_set.dim(), found: precision.nrows() });
        }
        check_spd(precision)?;
        let diagonal = is_diagonal(precision);
        let mut levels = Vec::with_capacity(index_set.max_degree() as usize);
        for q in 1..=index_set.max_degree() {
            let size = index_set.level_size(q);
            if diagonal {
                if !diagonal_report(precision, q, size).invertible {
                    return Err(Error::SingularBlock { level: q });
                }
                levels.push(LevelSolver::Diagonal);
                continue;
            }
            if size > MAX_DENSE_LEVEL {
                return Err(Error::InvalidArgument("level block too large for a dense factorization"));
            }
            match factorize(a_block(precision, &index_set, q), q) {
                (Some(lu), _) => levels.push(LevelSolver::Dense(lu)),
                (None, _) => return Err(Error::SingularBlock { level: q }),
            }
        }
        Ok(BlockSystem { index_set, precision: precision.clone(), diagonal, levels })
    }

    pub fn index_set(&self) -> &Arc<IndexSet> {
        &self.index_set
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn dim(&self) -> usize {
        self.index_set.dim()
    }

    pub fn max_degree(&self) -> u32 {
        self.index_set.max_degree()
    }

    /// Diagonal of `A_q` at multi-index `k`.
    #[inline]
    pub(crate) fn diagonal_entry(&self, k: &[u32]) -> f64 {
        k.iter().enumerate().filter(|(_, &kl)| kl > 0).map(|(l, &kl)| self.precision[(l, l)] * f64::from(kl)).sum()
    }

    /// Solves `A_q y = rhs` in place for the level-`q` slice.
    pub(crate) fn solve_level(&self, q: u32, rhs: &mut [f64]) {
        match &self.levels[q as usize - 1] {
            LevelSolver::Diagonal => {
                let start = self.index_set.level_range(q).start;
                for (i, v) in rhs.iter_mut().enumerate() {
                    if *v != 0.0 {
                        *v /= self.diagonal_entry(self.index_set.get(start + i));
                    }
                }
            }
            LevelSolver::Dense(lu) => {
                let mut b = DVector::from_column_slice(rhs);
                lu.solve_mut(&mut b);
                rhs.copy_from_slice(b.as_slice());
            }
        }
    }
}

/// Factorizes every `A_q`, `1 <= q <= p`, and reports what happened without failing.
pub fn invertibility_probe(precision: &DMatrix<f64>, p: u32) -> Result<Vec<LevelReport>> {
    check_spd(precision)?;
    let index_set = IndexSet::new(precision.nrows(), p)?;
    let diagonal = is_diagonal(precision);
    Ok((1..=p)
        .map(|q| {
            let size = index_set.level_size(q);
            if diagonal {
                diagonal_report(precision, q, size)
            } else {
                factorize(a_block(precision, &index_set, q), q).1
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn two_dimensional_block_is_tridiagonal() {
        let (a, b, c) = (2.0, 3.0, 0.5);
        let lam = dmatrix![a, c; c, b];
        let p = 4;
        let set = IndexSet::new(2, p).unwrap();
        let blk = a_block(&lam, &set, p);
        let n = p as usize + 1;
        for i in 0..n {
            let pf = f64::from(p);
            let fi = i as f64;
            assert_eq!(blk[(i, i)], a * (pf - fi) + b * fi);
            if i + 1 < n {
                assert_eq!(blk[(i, i + 1)], c * (fi + 1.0));
                assert_eq!(blk[(i + 1, i)], c * (pf - fi));
            }
            for j in 0..n {
                if i.abs_diff(j) > 1 {
                    assert_eq!(blk[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn isotropic_level_three() {
        let eps = 0.01;
        let lam = DMatrix::from_diagonal_element(4, 4, 1.0 / eps);
        let set = IndexSet::new(4, 3).unwrap();
        let blk = a_block(&lam, &set, 3);
        let want = DMatrix::from_diagonal_element(blk.nrows(), blk.nrows(), 3.0 / eps);
        assert!((blk - want).amax() < 1e-9);
    }

    #[test]
    fn ship_b1() {
        let lam = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / 0.1, 1.0 / 0.2]));
        let set = IndexSet::new(2, 1).unwrap();
        let b1 = b_block(&lam, &set, 1, &[0.3, -0.7]);
        assert!((b1[(0, 0)] + 2.0 * 0.3 / 0.1).abs() < 1e-12);
        assert!((b1[(0, 1)] + 2.0 * -0.7 / 0.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_precision() {
        let set = Arc::new(IndexSet::new(2, 2).unwrap());
        let bad = dmatrix![1.0, 2.0; 2.0, 1.0];
        assert_eq!(BlockSystem::build(&bad, set).unwrap_err(), Error::NotPositiveDefinite);
    }

    #[test]
    fn probe_reports_every_level() {
        let lam = dmatrix![2.0, 0.4, 0.1; 0.4, 1.0, 0.2; 0.1, 0.2, 3.0];
        let reports = invertibility_probe(&lam, 2).unwrap();
        assert_eq!(reports.len(), 2);
        assert!(reports.iter().all(|r| r.invertible && r.condition.is_finite()));
        assert_eq!(reports[1].size, 6);
    }
}
