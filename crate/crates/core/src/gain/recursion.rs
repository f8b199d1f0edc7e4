//! Backward recursion for the Galerkin coefficients.
//!
//! Solving from the top level down, each solved level pushes its nonzero
//! coefficients into the right-hand sides one and two levels below:
//!
//! ```text
//! rhs[k - e_m]        += k_m w_m c_k                       (B coupling)
//! rhs[k - e_m - e_l]  -= 2 L_lm k_m k_l c_k,   l != m      (D, off-diagonal)
//! rhs[k - 2 e_l]      += 2 (2 - L_ll) (k_l - 1) k_l c_k     (D, diagonal)
//! ```
//!
//! with `w = 2 L x`. Level zero receives the same pushes and yields `C`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::gain::blocks::{shift_weights, BlockSystem};
use crate::hermite::HermiteExpansion;
use crate::{Error, Result};

/// Coefficients of one particle and channel: the expansion `phi` (no
/// constant term) and the constant `C`.
#[derive(Debug, Clone)]
pub struct GainCoefficients {
    pub expansion: HermiteExpansion,
    pub constant: f64,
}

/// Storage used while running the recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum RecursionPath {
    /// Dense vectors when the index set is small enough, sparse otherwise.
    #[default]
    Auto,
    /// Coefficient vectors dense over the index set.
    Dense,
    /// Only nonzero coefficients are stored. Needs a diagonal precision.
    Sparse,
}

/// Index sets at most this large use dense storage under [`RecursionPath::Auto`].
pub const AUTO_DENSE_LIMIT: usize = 512;

#[derive(Debug, Default)]
pub(crate) struct Workspace {
    dense: Vec<f64>,
    lowered: Vec<u32>,
}

pub fn backward_recursion(blocks: &BlockSystem, a: &HermiteExpansion, x: &[f64], path: RecursionPath) -> Result<GainCoefficients> {
    backward_recursion_with(blocks, a, x, path, &mut Workspace::default())
}

pub(crate) fn backward_recursion_with(
    blocks: &BlockSystem,
    a: &HermiteExpansion,
    x: &[f64],
    path: RecursionPath,
    ws: &mut Workspace,
) -> Result<GainCoefficients> {
    let d = blocks.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: x.len() });
    }
    if a.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: a.dim() });
    }
    if a.degree() > blocks.max_degree() {
        return Err(Error::DegreeOverflow { degree: a.degree(), max: blocks.max_degree() });
    }
    let path = match path {
        RecursionPath::Auto if blocks.index_set().len() <= AUTO_DENSE_LIMIT || !blocks.is_diagonal() => RecursionPath::Dense,
        RecursionPath::Auto => RecursionPath::Sparse,
        other => other,
    };
    match path {
        RecursionPath::Sparse if !blocks.is_diagonal() => {
            Err(Error::InvalidArgument("sparse recursion needs a diagonal precision"))
        }
        RecursionPath::Sparse => Ok(sparse(blocks, a, x, ws)),
        _ => Ok(dense(blocks, a, x, ws)),
    }
}

/// Pushes coefficient `c` at multi-index `k` into the lower right-hand sides.
#[inline]
fn push(blocks: &BlockSystem, w: &[f64], k: &[u32], c: f64, scratch: &mut Vec<u32>, mut add: impl FnMut(usize, f64)) {
    let lam = blocks.precision();
    let set = blocks.index_set();
    scratch.clear();
    scratch.extend_from_slice(k);
    let d = k.len();
    for m in (0..d).filter(|&m| k[m] > 0) {
        let km = f64::from(k[m]);
        scratch[m] -= 1;
        add(set.rank(scratch).expect("lowered index"), km * w[m] * c);
        if k[m] >= 2 {
            scratch[m] -= 1;
            let coef = 2.0 * (2.0 - lam[(m, m)]) * (km - 1.0) * km;
            add(set.rank(scratch).expect("lowered index"), coef * c);
            scratch[m] += 1;
        }
        if !blocks.is_diagonal() {
            for l in (0..d).filter(|&l| k[l] > 0) {
                if l == m || lam[(l, m)] == 0.0 {
                    continue;
                }
                scratch[l] -= 1;
                let coef = -2.0 * lam[(l, m)] * km * f64::from(k[l]);
                add(set.rank(scratch).expect("lowered index"), coef * c);
                scratch[l] += 1;
            }
        }
        scratch[m] += 1;
    }
}

fn dense(blocks: &BlockSystem, a: &HermiteExpansion, x: &[f64], ws: &mut Workspace) -> GainCoefficients {
    let set = blocks.index_set().clone();
    let w = shift_weights(blocks.precision(), x);
    let rhs = &mut ws.dense;
    rhs.clear();
    rhs.resize(set.len(), 0.0);
    for &(pos, c) in a.terms() {
        rhs[pos] = c;
    }
    let mut scratch = core::mem::take(&mut ws.lowered);
    for q in (1..=blocks.max_degree()).rev() {
        let range = set.level_range(q);
        blocks.solve_level(q, &mut rhs[range.clone()]);
        for pos in range {
            let c = rhs[pos];
            if c != 0.0 {
                push(blocks, &w, set.get(pos), c, &mut scratch, |i, v| rhs[i] += v);
            }
        }
    }
    ws.lowered = scratch;
    let constant = rhs[0];
    let terms: Vec<(usize, f64)> = rhs.iter().enumerate().skip(1).filter(|(_, &c)| c != 0.0).map(|(i, &c)| (i, c)).collect();
    GainCoefficients { expansion: HermiteExpansion::from_terms(set, terms).expect("positions in range"), constant }
}

fn sparse(blocks: &BlockSystem, a: &HermiteExpansion, x: &[f64], ws: &mut Workspace) -> GainCoefficients {
    let set = blocks.index_set().clone();
    let w = shift_weights(blocks.precision(), x);
    let p = blocks.max_degree() as usize;
    // Right-hand sides per level, keyed by position.
    let mut rhs: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); p + 1];
    for &(pos, c) in a.terms() {
        let level: u32 = set.get(pos).iter().sum();
        rhs[level as usize].insert(pos, c);
    }
    let mut solved = Vec::new();
    let mut scratch = core::mem::take(&mut ws.lowered);
    for q in (1..=p).rev() {
        let level = core::mem::take(&mut rhs[q]);
        for (pos, v) in level {
            if v == 0.0 {
                continue;
            }
            let k = set.get(pos);
            let c = v / blocks.diagonal_entry(k);
            push(blocks, &w, k, c, &mut scratch, |i, add| {
                let lvl: u32 = set.get(i).iter().sum();
                *rhs[lvl as usize].entry(i).or_insert(0.0) += add;
            });
            solved.push((pos, c));
        }
    }
    ws.lowered = scratch;
    let constant = rhs[0].get(&0).copied().unwrap_or(0.0);
    GainCoefficients { expansion: HermiteExpansion::from_terms(set, solved).expect("positions in range"), constant }
}
