//! Nearest-neighbor subshifts of finite type on boxes of `Z^d`.
//!
//! A [`DigraphTuple`] fixes, for every lattice axis `k`, which ordered color
//! pairs `(p, q)` may sit at sites `i` and `i + e_k`. This module holds those
//! types together with the brute-force enumeration oracle: every coloring of a
//! small box (free or periodic along chosen axes) is visited by depth-first
//! backtracking, and grand partition sums are formed from the resulting
//! color-count census.
//!
//! Colors are 1-based at the boundary (constructors taking edge lists, the
//! JSON format, [`Coloring::color`]) and 0-based everywhere inside.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Search-tree node budget used when none is given.
pub const DEFAULT_ENUMERATION_CAP: u64 = 100_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum SoftError {
    #[error("color {color} in pair ({p}, {q}) on axis {axis} is outside 1..={n}")]
    ColorOutOfRange {
        axis: usize,
        p: usize,
        q: usize,
        color: usize,
        n: usize,
    },
    #[error("digraph needs at least one color")]
    NoColors,
    #[error("digraph needs at least one axis")]
    NoAxes,
    #[error("axis {axis} has {found} colors, expected {expected}")]
    ColorCountMismatch {
        axis: usize,
        expected: usize,
        found: usize,
    },
    #[error("every axis of the digraph is empty")]
    AllAxesEmpty,
    #[error("json declares d = {declared} but lists {found} axes")]
    AxisCountMismatch { declared: usize, found: usize },
    #[error("box has {box_dim} axes but the digraph has {digraph_dim}")]
    DimensionMismatch { box_dim: usize, digraph_dim: usize },
    #[error("box side lengths must be positive")]
    EmptyBox,
    #[error("periodic axis {0} does not exist")]
    BadPeriodicAxis(usize),
    #[error("weight vector has {found} entries, expected {expected}")]
    WeightLength { expected: usize, found: usize },
    #[error("weight vector entry {index} is not finite")]
    NonFiniteWeight { index: usize },
    #[error("enumeration budget of {cap} search nodes exhausted")]
    CapExceeded { cap: u64 },
    #[error("malformed digraph json: {0}")]
    Json(String),
}

/// Allowed ordered pairs for a single axis, stored as a dense `n x n` table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    adj: Vec<bool>,
}

impl Digraph {
    /// Builds a digraph on colors `1..=n` from 1-based ordered pairs.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, SoftError> {
        Self::from_edges_on_axis(n, edges, 1)
    }

    fn from_edges_on_axis(
        n: usize,
        edges: &[(usize, usize)],
        axis: usize,
    ) -> Result<Self, SoftError> {
        if n == 0 {
            return Err(SoftError::NoColors);
        }
        let mut adj = vec![false; n * n];
        for &(p, q) in edges {
            for color in [p, q] {
                if color == 0 || color > n {
                    return Err(SoftError::ColorOutOfRange {
                        axis,
                        p,
                        q,
                        color,
                        n,
                    });
                }
            }
            adj[(p - 1) * n + (q - 1)] = true;
        }
        Ok(Self { n, adj })
    }

    /// Builds a digraph from a 0-based predicate.
    pub fn from_fn(n: usize, allowed: impl Fn(usize, usize) -> bool) -> Self {
        let mut adj = vec![false; n * n];
        for p in 0..n {
            for q in 0..n {
                adj[p * n + q] = allowed(p, q);
            }
        }
        Self { n, adj }
    }

    pub fn complete(n: usize) -> Self {
        Self::from_fn(n, |_, _| true)
    }

    pub fn empty(n: usize) -> Self {
        Self::from_fn(n, |_, _| false)
    }

    /// The two-color hard-core digraph `{(1,2), (2,1), (2,2)}`: color 1 is an
    /// occupied site, color 2 an empty one.
    pub fn hard_core() -> Self {
        Self::from_fn(2, |p, q| !(p == 0 && q == 0))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// 0-based adjacency test.
    #[inline]
    pub fn allows(&self, p: usize, q: usize) -> bool {
        self.adj[p * self.n + q]
    }

    pub fn is_empty(&self) -> bool {
        !self.adj.iter().any(|&a| a)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|p| (0..self.n).all(|q| self.allows(p, q) == self.allows(q, p)))
    }

    /// 1-based edge list in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for p in 0..self.n {
            for q in 0..self.n {
                if self.allows(p, q) {
                    out.push((p + 1, q + 1));
                }
            }
        }
        out
    }

    /// Out-neighbor lists (0-based), the zero/nonzero pattern of the
    /// adjacency matrix.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|p| (0..self.n).filter(|&q| self.allows(p, q)).collect())
            .collect()
    }

    /// Relabels colors: color `c` becomes `perm[c]` (0-based).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut adj = vec![false; self.n * self.n];
        for p in 0..self.n {
            for q in 0..self.n {
                adj[perm[p] * self.n + perm[q]] = self.allows(p, q);
            }
        }
        Self { n: self.n, adj }
    }
}

/// The constraint system `(Γ_1, ..., Γ_d)` on `n` colors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigraphTuple {
    n: usize,
    axes: Vec<Digraph>,
    symmetric: Vec<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DigraphJson {
    n: usize,
    d: usize,
    axes: Vec<Vec<[usize; 2]>>,
}

impl DigraphTuple {
    pub fn new(axes: Vec<Digraph>) -> Result<Self, SoftError> {
        let n = axes.first().ok_or(SoftError::NoAxes)?.n();
        if n == 0 {
            return Err(SoftError::NoColors);
        }
        if let Some((k, a)) = axes.iter().enumerate().find(|(_, a)| a.n() != n) {
            return Err(SoftError::ColorCountMismatch {
                axis: k + 1,
                expected: n,
                found: a.n(),
            });
        }
        if axes.iter().all(Digraph::is_empty) {
            return Err(SoftError::AllAxesEmpty);
        }
        let symmetric = axes.iter().map(Digraph::is_symmetric).collect();
        Ok(Self { n, axes, symmetric })
    }

    /// Builds a tuple from 1-based edge lists, one list per axis.
    pub fn from_edge_lists(n: usize, axes: &[Vec<(usize, usize)>]) -> Result<Self, SoftError> {
        let graphs = axes
            .iter()
            .enumerate()
            .map(|(k, edges)| Digraph::from_edges_on_axis(n, edges, k + 1))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(graphs)
    }

    /// The same digraph on every one of `d` axes.
    pub fn isotropic(graph: Digraph, d: usize) -> Result<Self, SoftError> {
        Self::new(vec![graph; d])
    }

    pub fn from_json_str(text: &str) -> Result<Self, SoftError> {
        let raw: DigraphJson =
            serde_json::from_str(text).map_err(|e| SoftError::Json(e.to_string()))?;
        if raw.axes.len() != raw.d {
            return Err(SoftError::AxisCountMismatch {
                declared: raw.d,
                found: raw.axes.len(),
            });
        }
        let lists: Vec<Vec<(usize, usize)>> = raw
            .axes
            .iter()
            .map(|axis| axis.iter().map(|&[p, q]| (p, q)).collect())
            .collect();
        Self::from_edge_lists(raw.n, &lists)
    }

    pub fn to_json_string(&self) -> String {
        let raw = DigraphJson {
            n: self.n,
            d: self.d(),
            axes: self
                .axes
                .iter()
                .map(|a| a.edges().into_iter().map(|(p, q)| [p, q]).collect())
                .collect(),
        };
        serde_json::to_string(&raw).expect("digraph serializes")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Digraph] {
        &self.axes
    }

    /// Axis `k` (0-based).
    pub fn axis(&self, k: usize) -> &Digraph {
        &self.axes[k]
    }

    pub fn symmetric(&self) -> &[bool] {
        &self.symmetric
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::new(self.axes.iter().map(|a| a.permuted(perm)).collect())
            .expect("permutation preserves validity")
    }

    /// Exchanges two axes.
    pub fn swapped_axes(&self, a: usize, b: usize) -> Self {
        let mut axes = self.axes.clone();
        axes.swap(a, b);
        Self::new(axes).expect("axis swap preserves validity")
    }
}

/// Side lengths `m = (m_1, ..., m_d)` of a box.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoxShape {
    dims: Vec<usize>,
    vol: usize,
}

impl BoxShape {
    pub fn new(dims: Vec<usize>) -> Result<Self, SoftError> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(SoftError::EmptyBox);
        }
        let vol = dims.iter().product();
        Ok(Self { dims, vol })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn vol(&self) -> usize {
        self.vol
    }

    /// Row-major strides: the last axis varies fastest.
    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }
}

/// One allowed coloring of a box, cells in row-major order (last axis
/// fastest), stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    pub shape: BoxShape,
    pub cells: Vec<usize>,
}

impl Coloring {
    /// 1-based color at a linear site index.
    pub fn color(&self, site: usize) -> usize {
        self.cells[site] + 1
    }

    pub fn count(&self, n: usize) -> ColorCount {
        ColorCount::of_cells(&self.cells, n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColorCount {
    pub counts: Vec<u32>,
}

impl ColorCount {
    pub fn of_cells(cells: &[usize], n: usize) -> Self {
        let mut counts = vec![0u32; n];
        for &c in cells {
            counts[c] += 1;
        }
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// `c(φ)ᵀ u`.
    pub fn dot(&self, u: &WeightVector) -> f64 {
        self.counts
            .iter()
            .zip(u.as_slice())
            .map(|(&c, &w)| c as f64 * w)
            .sum()
    }
}

/// Log-weights `u ∈ R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(u: Vec<f64>) -> Result<Self, SoftError> {
        if let Some(index) = u.iter().position(|x| !x.is_finite()) {
            return Err(SoftError::NonFiniteWeight { index });
        }
        Ok(Self(u))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// `u + t·1`.
    pub fn shifted(&self, t: f64) -> Self {
        Self(self.0.iter().map(|x| x + t).collect())
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = vec![0.0; self.0.len()];
        for (c, &w) in self.0.iter().enumerate() {
            out[perm[c]] = w;
        }
        Self(out)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<(), SoftError> {
        if self.0.len() != n {
            return Err(SoftError::WeightLength {
                expected: n,
                found: self.0.len(),
            });
        }
        Ok(())
    }
}

/// Depth-first enumerator of Γ-allowed colorings with a search-node budget.
#[derive(Debug, Clone, Copy)]
pub struct Enumerator {
    pub cap: u64,
}

impl Default for Enumerator {
    fn default() -> Self {
        Self {
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

struct Neighbor {
    axis: usize,
    site: usize,
    /// True if the placed site is the *first* element of the pair.
    placed_first: bool,
}

impl Enumerator {
    pub fn with_cap(cap: u64) -> Self {
        Self { cap }
    }

    /// Calls `visit` on the 0-based cells of every allowed coloring, in
    /// lexicographic order. Returns the number of colorings visited.
    ///
    /// Axes listed in `periodic` (0-based) wrap around: the pair
    /// `(φ(i with i_k = m_k - 1), φ(i with i_k = 0))` must also lie in `Γ_k`.
    pub fn for_each(
        &self,
        gamma: &DigraphTuple,
        shape: &BoxShape,
        periodic: &[usize],
        mut visit: impl FnMut(&[usize]),
    ) -> Result<u64, SoftError> {
        let d = gamma.d();
        if shape.dims().len() != d {
            return Err(SoftError::DimensionMismatch {
                box_dim: shape.dims().len(),
                digraph_dim: d,
            });
        }
        if let Some(&k) = periodic.iter().find(|&&k| k >= d) {
            return Err(SoftError::BadPeriodicAxis(k));
        }
        let dims = shape.dims();
        let strides = shape.strides();
        let vol = shape.vol();

        // For each site, the already-placed neighbors it must be checked against.
        let mut checks: Vec<Vec<Neighbor>> = Vec::with_capacity(vol);
        for site in 0..vol {
            let mut list = Vec::new();
            for k in 0..d {
                let coord = (site / strides[k]) % dims[k];
                if coord > 0 {
                    list.push(Neighbor {
                        axis: k,
                        site: site - strides[k],
                        placed_first: false,
                    });
                }
                if periodic.contains(&k) && coord == dims[k] - 1 {
                    list.push(Neighbor {
                        axis: k,
                        site: site - coord * strides[k],
                        placed_first: true,
                    });
                }
            }
            checks.push(list);
        }

        let n = gamma.n();
        let mut cells = vec![0usize; vol];
        let mut next = vec![0usize; vol];
        let mut nodes: u64 = 0;
        let mut found: u64 = 0;
        let mut pos: usize = 0;
        next[0] = 0;
        loop {
            let mut placed = false;
            while next[pos] < n {
                let c = next[pos];
                next[pos] += 1;
                nodes += 1;
                if nodes > self.cap {
                    return Err(SoftError::CapExceeded { cap: self.cap });
                }
                cells[pos] = c;
                let ok = checks[pos].iter().all(|nb| {
                    let other = if nb.site == pos { c } else { cells[nb.site] };
                    let g = gamma.axis(nb.axis);
                    if nb.placed_first {
                        g.allows(c, other)
                    } else {
                        g.allows(other, c)
                    }
                });
                if ok {
                    placed = true;
                    break;
                }
            }
            if placed {
                if pos + 1 == vol {
                    found += 1;
                    visit(&cells);
                } else {
                    pos += 1;
                    next[pos] = 0;
                }
            } else if pos == 0 {
                break;
            } else {
                pos -= 1;
            }
        }
        Ok(found)
    }

    /// Histogram of color-count vectors over all allowed colorings.
    pub fn census(
        &self,
        gamma: &DigraphTuple,
        shape: &BoxShape,
        periodic: &[usize],
    ) -> Result<Census, SoftError> {
        let n = gamma.n();
        let mut buckets: HashMap<ColorCount, u64> = HashMap::new();
        let total = self.for_each(gamma, shape, periodic, |cells| {
            *buckets.entry(ColorCount::of_cells(cells, n)).or_insert(0) += 1;
        })?;
        let mut buckets: Vec<(ColorCount, u64)> = buckets.into_iter().collect();
        buckets.sort_by(|a, b| a.0.counts.cmp(&b.0.counts));
        Ok(Census {
            n,
            vol: shape.vol(),
            total,
            buckets,
        })
    }
}

/// Multiplicities of color-count vectors, enough to evaluate `Z(m, u)` for
/// any `u` without re-enumerating.
#[derive(Debug, Clone)]
pub struct Census {
    pub n: usize,
    pub vol: usize,
    pub total: u64,
    pub buckets: Vec<(ColorCount, u64)>,
}

impl Census {
    /// `log Σ_φ exp(c(φ)ᵀu)` with max-shift; `-∞` if there are no colorings.
    pub fn log_partition(&self, u: &WeightVector) -> Result<f64, SoftError> {
        u.check_len(self.n)?;
        Ok(log_sum_exp(
            self.buckets
                .iter()
                .map(|(c, mult)| c.dot(u) + (*mult as f64).ln()),
        ))
    }
}

/// Max-shifted log-sum-exp; `-∞` for an empty iterator.
pub fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// All allowed colorings of the box as owned values.
pub fn enumerate_colorings(
    gamma: &DigraphTuple,
    shape: &BoxShape,
    periodic: &[usize],
) -> Result<Vec<Coloring>, SoftError> {
    let mut out = Vec::new();
    Enumerator::default().for_each(gamma, shape, periodic, |cells| {
        out.push(Coloring {
            shape: shape.clone(),
            cells: cells.to_vec(),
        })
    })?;
    Ok(out)
}

/// `log Z_Γ(m, u)`; with `periodic` listing axes, the box wraps along them.
pub fn log_grand_partition(
    gamma: &DigraphTuple,
    shape: &BoxShape,
    u: &WeightVector,
    periodic: &[usize],
) -> Result<f64, SoftError> {
    u.check_len(gamma.n())?;
    Enumerator::default()
        .census(gamma, shape, periodic)?
        .log_partition(u)
}

/// `log Z_Γ(m, u) / vol(m)`, an upper bound on `P_Γ(u)` by subadditivity.
pub fn finite_pressure_upper(
    gamma: &DigraphTuple,
    shape: &BoxShape,
    u: &WeightVector,
) -> Result<f64, SoftError> {
    Ok(log_grand_partition(gamma, shape, u, &[])? / shape.vol() as f64)
}
