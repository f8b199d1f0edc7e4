//! Physicists' Hermite polynomials and multi-index bookkeeping.
//!
//! Multi-indices of total degree at most `p` are stored in graded order:
//! every index of degree `q` precedes those of degree `q + 1`, and inside a
//! degree the order is lexicographic with the largest first coordinate first,
//! e.g. `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2)` for `d = 2, p = 2`.
//!
//! Expansions keep only their nonzero coefficients. Dense storage over the
//! full index set is not affordable for the high-dimensional benchmarks
//! (`C(103, 3)` entries per particle and channel at `d = 100`).

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// `H_k(x)` by the forward three-term recurrence.
pub fn hermite_eval(k: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for n in 1..k {
        let next = 2.0 * x * cur - 2.0 * f64::from(n) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[k] = H_k(x)` for `k < out.len()`.
pub fn hermite_table(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = 2.0 * x;
    }
    for n in 2..out.len() {
        out[n] = 2.0 * x * out[n - 1] - 2.0 * (n as f64 - 1.0) * out[n - 2];
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// `k * e_axis` in dimension `dim`.
    pub fn axis(dim: usize, axis: usize, k: u32) -> Self {
        let mut e = vec![0; dim];
        e[axis] = k;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }
}

impl From<&[u32]> for MultiIndex {
    fn from(v: &[u32]) -> Self {
        MultiIndex(v.to_vec())
    }
}

/// `C(n, r)` as a float-free integer, computed through the smaller side.
fn binomial(n: u64, r: u64) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u64 = 1;
    for i in 0..r {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// All multi-indices `k` in `d` variables with `|k| <= p`, graded order.
#[derive(Debug, Clone)]
pub struct IndexSet {
    dim: usize,
    max_degree: u32,
    entries: Vec<u32>,
    offsets: Vec<usize>,
}

impl IndexSet {
    pub fn new(dim: usize, max_degree: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("index set dimension must be positive"));
        }
        let total = binomial((dim as u64) + u64::from(max_degree), u64::from(max_degree)) as usize;
        let mut entries = Vec::with_capacity(total * dim);
        let mut offsets = Vec::with_capacity(max_degree as usize + 2);
        let mut cur = vec![0u32; dim];
        for level in 0..=max_degree {
            offsets.push(entries.len() / dim);
            // First composition of `level` in descending lex order.
            cur.iter_mut().for_each(|c| *c = 0);
            cur[0] = level;
            loop {
                entries.extend_from_slice(&cur);
                if !next_composition(&mut cur) {
                    break;
                }
            }
        }
        offsets.push(entries.len() / dim);
        debug_assert_eq!(entries.len(), total * dim);
        Ok(IndexSet { dim, max_degree, entries, offsets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.entries.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, pos: usize) -> &[u32] {
        &self.entries[pos * self.dim..(pos + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.entries.chunks_exact(self.dim)
    }

    /// Positions of the degree-`q` indices.
    pub fn level_range(&self, q: u32) -> core::ops::Range<usize> {
        let q = q as usize;
        self.offsets[q]..self.offsets[q + 1]
    }

    pub fn level_size(&self, q: u32) -> usize {
        self.level_range(q).len()
    }

    /// Position of `k`, or `None` when `|k| > p`.
    pub fn rank(&self, k: &[u32]) -> Option<usize> {
        if k.len() != self.dim {
            return None;
        }
        let level: u32 = k.iter().sum();
        if level > self.max_degree {
            return None;
        }
        Some(self.offsets[level as usize] + rank_within_level(k, level))
    }
}

/// Advances `c` to the next composition of the same sum in descending lex.
fn next_composition(c: &mut [u32]) -> bool {
    let d = c.len();
    if d < 2 {
        return false;
    }
    // Rightmost position (excluding the last) holding a positive entry.
    let Some(i) = (0..d - 1).rev().find(|&i| c[i] > 0) else {
        return false;
    };
    c[i] -= 1;
    let tail: u32 = c[i + 1..].iter().sum::<u32>() + 1;
    c[i + 1..].iter_mut().for_each(|v| *v = 0);
    c[i + 1] = tail;
    true
}

fn rank_within_level(k: &[u32], level: u32) -> usize {
    let d = k.len();
    let mut remaining = u64::from(level);
    let mut rank: u64 = 0;
    for (i, &ki) in k.iter().enumerate().take(d.saturating_sub(1)) {
        let dims_left = (d - i) as u64;
        // Compositions of `remaining` whose leading entry exceeds `ki`.
        let ki = u64::from(ki);
        if remaining > ki {
            rank += binomial(remaining - ki - 1 + dims_left - 1, dims_left - 1);
        }
        remaining -= ki;
    }
    rank as usize
}

/// `H_k(x) = prod_l H_{k_l}(x_l)`.
pub fn tensor_eval(k: &[u32], x: &[f64]) -> Result<f64> {
    check_dim(k.len(), x.len())?;
    Ok(k.iter().zip(x).map(|(&kl, &xl)| hermite_eval(kl, xl)).product())
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Per-coordinate Hermite values `H_0..H_p` at a fixed point.
#[derive(Debug, Clone)]
pub struct HermiteTable {
    width: usize,
    values: Vec<f64>,
}

impl HermiteTable {
    pub fn new(x: &[f64], max_degree: u32) -> Self {
        let width = max_degree as usize + 1;
        let mut values = vec![0.0; x.len() * width];
        for (row, &xl) in values.chunks_exact_mut(width).zip(x) {
            hermite_table(xl, row);
        }
        HermiteTable { width, values }
    }

    /// `H_k(x_l)`.
    #[inline]
    pub fn get(&self, l: usize, k: u32) -> f64 {
        self.values[l * self.width + k as usize]
    }
}

/// Sparse expansion `sum_k c_k H_k(x)` over a shared index set.
#[derive(Debug, Clone)]
pub struct HermiteExpansion {
    index_set: Arc<IndexSet>,
    terms: Vec<(usize, f64)>,
}

impl HermiteExpansion {
    pub fn zero(index_set: Arc<IndexSet>) -> Self {
        HermiteExpansion { index_set, terms: Vec::new() }
    }

    /// Builds from `(position, coefficient)` pairs; repeated positions add up
    /// and exact zeros are dropped.
    pub fn from_terms(index_set: Arc<IndexSet>, terms: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        let len = index_set.len();
        for (pos, c) in terms {
            if pos >= len {
                return Err(Error::InvalidArgument("coefficient position outside the index set"));
            }
            *acc.entry(pos).or_insert(0.0) += c;
        }
        let terms = acc.into_iter().filter(|&(_, c)| c != 0.0).collect();
        Ok(HermiteExpansion { index_set, terms })
    }

    /// Builds from a coefficient per multi-index.
    pub fn from_indices<'a>(index_set: Arc<IndexSet>, terms: impl IntoIterator<Item = (&'a [u32], f64)>) -> Result<Self> {
        let mut positioned = Vec::new();
        for (k, c) in terms {
            check_dim(index_set.dim(), k.len())?;
            let pos = index_set.rank(k).ok_or(Error::DegreeOverflow {
                degree: k.iter().sum(),
                max: index_set.max_degree(),
            })?;
            positioned.push((pos, c));
        }
        Self::from_terms(index_set, positioned)
    }

    pub fn index_set(&self) -> &Arc<IndexSet> {
        &self.index_set
    }

    pub fn dim(&self) -> usize {
        self.index_set.dim()
    }

    /// Nonzero `(position, coefficient)` pairs in increasing position.
    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn coefficient(&self, k: &[u32]) -> f64 {
        match self.index_set.rank(k) {
            Some(pos) => self.coefficient_at(pos),
            None => 0.0,
        }
    }

    pub fn coefficient_at(&self, pos: usize) -> f64 {
        match self.terms.binary_search_by_key(&pos, |&(p, _)| p) {
            Ok(i) => self.terms[i].1,
            Err(_) => 0.0,
        }
    }

    /// Highest total degree carrying a nonzero coefficient.
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|&(p, _)| self.index_set.get(p).iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let table = HermiteTable::new(x, self.index_set.max_degree());
        Ok(self.eval_with(&table))
    }

    pub fn eval_with(&self, table: &HermiteTable) -> f64 {
        self.terms
            .iter()
            .map(|&(pos, c)| {
                let k = self.index_set.get(pos);
                let mut v = c;
                for (l, &kl) in k.iter().enumerate() {
                    if kl > 0 {
                        v *= table.get(l, kl);
                    }
                }
                v
            })
            .sum()
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let table = HermiteTable::new(x, self.index_set.max_degree());
        let mut out = vec![0.0; x.len()];
        self.grad_with(&table, &mut out);
        Ok(out)
    }

    /// Adds the gradient at the tabulated point into `out`.
    pub fn grad_with(&self, table: &HermiteTable, out: &mut [f64]) {
        for &(pos, c) in &self.terms {
            let k = self.index_set.get(pos);
            for (l, &kl) in k.iter().enumerate() {
                if kl == 0 {
                    continue;
                }
                let mut v = c * 2.0 * f64::from(kl) * table.get(l, kl - 1);
                for (a, &ka) in k.iter().enumerate() {
                    if a != l && ka > 0 {
                        v *= table.get(a, ka);
                    }
                }
                out[l] += v;
            }
        }
    }

    /// Row-major `d x d` Hessian.
    pub fn hessian(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        check_dim(d, x.len())?;
        let table = HermiteTable::new(x, self.index_set.max_degree());
        let mut out = vec![0.0; d * d];
        for &(pos, c) in &self.terms {
            let k = self.index_set.get(pos);
            let support: Vec<usize> = (0..d).filter(|&l| k[l] > 0).collect();
            for &l in &support {
                for &m in &support {
                    let mut v = c;
                    for &a in &support {
                        let ka = k[a];
                        let lowered = u32::from(a == l) + u32::from(a == m);
                        if lowered > ka {
                            v = 0.0;
                            break;
                        }
                        // d/dx H_k = 2k H_{k-1}, applied `lowered` times.
                        let factor = match lowered {
                            0 => 1.0,
                            1 => 2.0 * f64::from(ka),
                            _ => 4.0 * f64::from(ka) * f64::from(ka - 1),
                        };
                        v *= factor * table.get(a, ka - lowered);
                    }
                    out[l * d + m] += v;
                }
            }
        }
        Ok(out)
    }
}

/// A polynomial in the monomial basis, `sum c_k x^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<(MultiIndex, f64)>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<(MultiIndex, f64)>) -> Result<Self> {
        for (k, _) in &terms {
            check_dim(dim, k.dim())?;
        }
        Ok(Polynomial { dim, terms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(MultiIndex, f64)] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(k, _)| k.degree()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self
            .terms
            .iter()
            .map(|(k, c)| c * k.entries().iter().zip(x).map(|(&e, &xl)| num_traits::Float::powi(xl, e as i32)).product::<f64>())
            .sum())
    }
}

/// Hermite coefficients of `x^n`, `n = 0..=p`: row `n` holds `b_{n,k}`.
fn monomial_rows(p: u32) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![1.0]];
    for n in 1..=p as usize {
        // x H_k = H_{k+1}/2 + k H_{k-1}
        let prev = &rows[n - 1];
        let mut next = vec![0.0; n + 1];
        for (k, &b) in prev.iter().enumerate() {
            next[k + 1] += 0.5 * b;
            if k > 0 {
                next[k - 1] += k as f64 * b;
            }
        }
        rows.push(next);
    }
    rows
}

/// Exact Hermite-basis coefficients of a monomial polynomial.
pub fn monomial_to_hermite(poly: &Polynomial, index_set: Arc<IndexSet>) -> Result<HermiteExpansion> {
    check_dim(index_set.dim(), poly.dim())?;
    let degree = poly.degree();
    if degree > index_set.max_degree() {
        return Err(Error::DegreeOverflow { degree, max: index_set.max_degree() });
    }
    let rows = monomial_rows(degree);
    let mut terms = Vec::new();
    for (k, c) in poly.terms() {
        let support: Vec<usize> = (0..poly.dim()).filter(|&l| k.entries()[l] > 0).collect();
        // Walk the tensor product of the per-coordinate expansions.
        let mut stack: Vec<(MultiIndex, f64)> = vec![(MultiIndex::zero(poly.dim()), *c)];
        for &l in &support {
            let row = &rows[k.entries()[l] as usize];
            let mut grown = Vec::with_capacity(stack.len() * row.len());
            for (idx, v) in &stack {
                for (j, &b) in row.iter().enumerate() {
                    if b != 0.0 {
                        let mut e = idx.clone();
                        e.0[l] = j as u32;
                        grown.push((e, v * b));
                    }
                }
            }
            stack = grown;
        }
        for (idx, v) in stack {
            let pos = index_set.rank(idx.entries()).expect("degree already checked");
            terms.push((pos, v));
        }
    }
    HermiteExpansion::from_terms(index_set, terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_values() {
        assert_eq!(hermite_eval(0, 3.7), 1.0);
        assert_eq!(hermite_eval(3, 1.0), -4.0);
        assert_eq!(hermite_eval(2, 0.5), -1.0);
        let mut t = [0.0; 5];
        hermite_table(0.3, &mut t);
        for (k, v) in t.iter().enumerate() {
            assert!((v - hermite_eval(k as u32, 0.3)).abs() < 1e-14);
        }
    }

    #[test]
    fn enumeration_order() {
        let s = IndexSet::new(2, 2).unwrap();
        let got: Vec<&[u32]> = s.iter().collect();
        let want: [&[u32]; 6] = [&[0, 0], &[1, 0], &[0, 1], &[2, 0], &[1, 1], &[0, 2]];
        assert_eq!(got, want);
        let s = IndexSet::new(1, 3).unwrap();
        assert_eq!(s.iter().map(|k| k[0]).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert_eq!(IndexSet::new(3, 3).unwrap().level_size(3), 10);
        assert!(IndexSet::new(0, 2).is_err());
    }

    #[test]
    fn rank_inverts_enumeration() {
        for (d, p) in [(1, 4), (2, 5), (3, 4), (5, 3), (7, 2)] {
            let s = IndexSet::new(d, p).unwrap();
            assert_eq!(s.len() as u64, binomial((d as u64) + u64::from(p), u64::from(p)));
            for (pos, k) in s.iter().enumerate() {
                assert_eq!(s.rank(k), Some(pos));
            }
        }
    }

    #[test]
    fn tensor_values() {
        assert_eq!(tensor_eval(&[0, 0], &[0.2, -4.0]).unwrap(), 1.0);
        assert_eq!(tensor_eval(&[1, 1], &[1.0, 1.0]).unwrap(), 4.0);
        assert_eq!(tensor_eval(&[3, 0], &[1.0, 9.0]).unwrap(), -4.0);
        assert!(tensor_eval(&[1], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cubic_conversion() {
        let set = Arc::new(IndexSet::new(1, 3).unwrap());
        let poly = Polynomial::new(1, vec![(MultiIndex::new(vec![3]), 1.0)]).unwrap();
        let e = monomial_to_hermite(&poly, set).unwrap();
        assert_eq!(e.coefficient(&[3]), 0.125);
        assert_eq!(e.coefficient(&[1]), 0.75);
        assert_eq!(e.coefficient(&[2]), 0.0);
        assert_eq!(e.coefficient(&[0]), 0.0);
        assert!((e.eval(&[2.0]).unwrap() - 8.0).abs() < 1e-14);
        assert!((e.grad(&[1.0]).unwrap()[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn constant_conversion() {
        let set = Arc::new(IndexSet::new(3, 2).unwrap());
        let poly = Polynomial::new(3, vec![(MultiIndex::zero(3), 2.5)]).unwrap();
        let e = monomial_to_hermite(&poly, set).unwrap();
        assert_eq!(e.terms(), &[(0, 2.5)]);
        assert_eq!(e.eval(&[1.0, 2.0, 3.0]).unwrap(), 2.5);
        assert_eq!(e.grad(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn degree_overflow() {
        let set = Arc::new(IndexSet::new(2, 2).unwrap());
        let poly = Polynomial::new(2, vec![(MultiIndex::new(vec![2, 1]), 1.0)]).unwrap();
        assert!(matches!(monomial_to_hermite(&poly, set), Err(Error::DegreeOverflow { degree: 3, max: 2 })));
    }
}
