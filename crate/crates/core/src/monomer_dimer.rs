//! The monomer-dimer model on `Z^2`.
//!
//! Tilings are encoded as colorings with `2d + 1` colors: color `k` is the
//! lower half of a dimer along axis `k`, color `k + d` the upper half and
//! color `2d + 1` a monomer. For `d = 2` the row transfer operator acts on
//! subsets `S ⊆ ⟨m⟩` of a ring of `m` sites, `S` marking the sites whose
//! vertical dimer continues into the next row:
//!
//! `B(m, v)_{ST} = y^{|S|+|T|} f(x, S ∪ T)` for disjoint `S, T`, else 0,
//!
//! where `f` counts the monomer-dimer tilings of the free ring sites, a
//! horizontal dimer weighing `x²`. Since `S ∩ T = ∅`, every entry is a
//! function of the union mask alone, which is how operators are stored.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::pressure1d::{DensityMethod, DensityRecord};
use crate::soft::{Coloring, Digraph, DigraphTuple, WeightVector};
use crate::spectral::{spectral_radius, DenseMatrix, NonnegOperator, PowerOptions, SpectralError};
use crate::transfer2d::PressureEstimate;

/// Largest ring size accepted by [`build_b`].
pub const MAX_RING: usize = 20;
/// Largest ring size for which [`dense_b`] materializes the matrix.
pub const MAX_DENSE_RING: usize = 12;

/// The 18 values of `1/s` of the classical monomer-dimer series.
pub const BAXTER_S_INV: [f64; 18] = [
    0.02, 0.05, 0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.80, 1.00, 1.50, 2.00, 2.50, 3.00, 3.50, 4.00,
    4.50, 5.00,
];

/// Forward-difference step for Baxter rows.
pub const BAXTER_STEP: f64 = 1e-5;
/// Forward-difference step for pressure surfaces.
pub const SURFACE_STEP: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum MdError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("ring size {m} exceeds the maximum {max}")]
    TooLarge { m: usize, max: usize },
    #[error("bad parity: {0}")]
    BadParity(String),
    #[error("negative entropy {h}; ring size and step are mismatched")]
    NegativeEntropy { h: f64 },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

/// Log-weights of a half-dimer along each axis, plus a monomer log-weight
/// that is 0 in the standard model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DimerWeights {
    pub v1: f64,
    pub v2: f64,
    pub monomer: f64,
}

impl DimerWeights {
    pub fn new(v1: f64, v2: f64) -> Result<Self, MdError> {
        Self::with_monomer(v1, v2, 0.0)
    }

    pub fn with_monomer(v1: f64, v2: f64, monomer: f64) -> Result<Self, MdError> {
        if !(v1.is_finite() && v2.is_finite() && monomer.is_finite()) {
            return Err(MdError::BadParameter(format!(
                "non-finite weights ({v1}, {v2}, {monomer})"
            )));
        }
        Ok(Self { v1, v2, monomer })
    }

    /// Along the diagonal `v = (log s, log s)`.
    pub fn diagonal(v: f64) -> Result<Self, MdError> {
        Self::new(v, v)
    }

    pub fn x(&self) -> f64 {
        self.v1.exp()
    }

    pub fn y(&self) -> f64 {
        self.v2.exp()
    }

    pub fn z(&self) -> f64 {
        self.monomer.exp()
    }

    /// `(v₁, v₂, v₁, v₂, w)`, the color weights on the 5-color encoding.
    pub fn embedding(&self) -> WeightVector {
        WeightVector::new(vec![self.v1, self.v2, self.v1, self.v2, self.monomer])
            .expect("weights are finite")
    }

    pub fn swapped(&self) -> Self {
        Self {
            v1: self.v2,
            v2: self.v1,
            monomer: self.monomer,
        }
    }

    pub fn shifted(&self, dv1: f64, dv2: f64, dw: f64) -> Self {
        Self {
            v1: self.v1 + dv1,
            v2: self.v2 + dv2,
            monomer: self.monomer + dw,
        }
    }
}

/// Colors `1..=2d+1`; on axis `k`, `(p, q)` is allowed iff `p = k, q = k+d`
/// or `p ≠ k, q ≠ k+d`.
pub fn md_digraph(d: usize) -> Result<DigraphTuple, MdError> {
    if d == 0 {
        return Err(MdError::BadParameter("dimension must be positive".into()));
    }
    let n = 2 * d + 1;
    let axes = (0..d)
        .map(|k| Digraph::from_fn(n, |p, q| (p == k) == (q == k + d)))
        .collect();
    Ok(DigraphTuple::new(axes).expect("encoding has edges"))
}

/// True if no dimer half sticks out of the box, so the coloring is an
/// honest tiling of the box itself.
pub fn is_box_tiling(coloring: &Coloring, d: usize) -> bool {
    let dims = coloring.shape.dims();
    let mut strides = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    coloring.cells.iter().enumerate().all(|(site, &c)| {
        (0..d).all(|k| {
            let pos = (site / strides[k]) % dims[k];
            !(c == k && pos + 1 == dims[k]) && !(c == k + d && pos == 0)
        })
    })
}

/// Polynomial in `x²`; `coeffs[k]` counts tilings with `k` dimers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingPolynomial {
    pub coeffs: Vec<u64>,
}

impl RingPolynomial {
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_monomer(x, 1.0, 0)
    }

    /// `Σ c_k x^{2k} z^{sites − 2k}`.
    pub fn eval_with_monomer(&self, x: f64, z: f64, sites: usize) -> f64 {
        self.moments(x, z, sites).0
    }

    /// The weight and its dimer-count moment `Σ 2k c_k x^{2k} z^{sites−2k}`.
    fn moments(&self, x: f64, z: f64, sites: usize) -> (f64, f64) {
        let x2 = x * x;
        let mut w = 0.0;
        let mut d = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate() {
            let monomers = sites.saturating_sub(2 * k) as i32;
            let term = c as f64 * x2.powi(k as i32) * z.powi(monomers);
            w += term;
            d += 2.0 * k as f64 * term;
        }
        (w, d)
    }
}

/// Tilings of a path of `len` sites: `T_L = T_{L−1} + x² T_{L−2}`.
pub fn path_tiling_poly(len: usize) -> RingPolynomial {
    let (mut prev, mut cur) = (vec![1u64], vec![1u64]);
    for _ in 1..len {
        let mut next = cur.clone();
        next.resize(prev.len() + 1, 0);
        for (k, c) in prev.iter().enumerate() {
            next[k + 1] += c;
        }
        prev = std::mem::replace(&mut cur, next);
    }
    RingPolynomial { coeffs: cur }
}

/// Tilings of the cycle `C_m`. Counting colorings of a length-2 torus, the
/// two sites are joined by two distinct bonds, so `C_2` gives `1 + 2x²`;
/// `C_1` holds no dimer.
pub fn cycle_tiling_poly(m: usize) -> RingPolynomial {
    match m {
        0 => RingPolynomial { coeffs: vec![1] },
        1 => RingPolynomial { coeffs: vec![1] },
        2 => RingPolynomial { coeffs: vec![1, 2] },
        _ => {
            let mut c = path_tiling_poly(m).coeffs;
            for (k, v) in path_tiling_poly(m - 2).coeffs.iter().enumerate() {
                c[k + 1] += v;
            }
            RingPolynomial { coeffs: c }
        }
    }
}

/// Sites of a ring of size `m`; bit `i` set iff site `i` is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubsetMask {
    pub m: usize,
    pub bits: u32,
}

impl SubsetMask {
    pub fn new(m: usize, bits: u32) -> Result<Self, MdError> {
        if m == 0 || m > 31 || (bits >> m) != 0 {
            return Err(MdError::BadParameter(format!(
                "mask {bits:#b} does not fit a ring of {m}"
            )));
        }
        Ok(Self { m, bits })
    }

    pub fn from_sites(m: usize, sites: &[usize]) -> Result<Self, MdError> {
        let bits = sites.iter().try_fold(0u32, |acc, &s| {
            if s < m {
                Ok(acc | 1 << s)
            } else {
                Err(MdError::BadParameter(format!(
                    "site {s} outside ring of {m}"
                )))
            }
        })?;
        Self::new(m, bits)
    }

    pub fn count(&self) -> u32 {
        self.bits.count_ones()
    }
}

/// Lengths of the maximal free runs of a nonempty occupied mask on the ring.
fn free_runs(m: usize, occupied: u32) -> impl Iterator<Item = usize> {
    debug_assert!(occupied != 0);
    let start = occupied.trailing_zeros() as usize;
    let mut run = 0;
    let mut out = Vec::new();
    for step in 1..=m {
        let site = (start + step) % m;
        if occupied >> site & 1 == 1 {
            if run > 0 {
                out.push(run);
            }
            run = 0;
        } else {
            run += 1;
        }
    }
    out.into_iter()
}

/// `f(x, S, T)` with `occupied = S ∪ T` and unit monomer weight.
pub fn free_set_weight(occupied: SubsetMask, x: f64) -> f64 {
    let m = occupied.m;
    if occupied.bits == 0 {
        return cycle_tiling_poly(m).eval(x);
    }
    free_runs(m, occupied.bits)
        .map(|l| path_tiling_poly(l).eval(x))
        .product()
}

/// Dihedral orbits of the `2^m` masks under ring rotations and reflections.
#[derive(Debug, Clone)]
pub struct OrbitTable {
    pub m: usize,
    pub orbit_of: Vec<u32>,
    /// Smallest mask of each orbit.
    pub reps: Vec<u32>,
    pub sizes: Vec<u32>,
}

fn rotate(mask: u32, m: usize, r: usize) -> u32 {
    if r == 0 {
        return mask;
    }
    let full = (1u64 << m) - 1;
    let w = mask as u64;
    (((w << r) | (w >> (m - r))) & full) as u32
}

fn reflect(mask: u32, m: usize) -> u32 {
    mask.reverse_bits() >> (32 - m)
}

impl OrbitTable {
    pub fn build(m: usize) -> Result<Self, MdError> {
        if m == 0 || m > MAX_RING {
            return Err(MdError::TooLarge { m, max: MAX_RING });
        }
        let total = 1usize << m;
        let mut orbit_of = vec![u32::MAX; total];
        let mut reps = Vec::new();
        let mut sizes = Vec::new();
        let mut images = Vec::with_capacity(2 * m);
        for mask in 0..total as u32 {
            if orbit_of[mask as usize] != u32::MAX {
                continue;
            }
            let id = reps.len() as u32;
            images.clear();
            let mirrored = reflect(mask, m);
            for r in 0..m {
                images.push(rotate(mask, m, r));
                images.push(rotate(mirrored, m, r));
            }
            images.sort_unstable();
            images.dedup();
            for &g in &images {
                orbit_of[g as usize] = id;
            }
            reps.push(mask);
            sizes.push(images.len() as u32);
        }
        Ok(Self {
            m,
            orbit_of,
            reps,
            sizes,
        })
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }
}

/// Per-mask tables over `U = S ∪ T`: the entry `y^{|U|} f(U)` and its
/// horizontal-dimer moment.
struct UnionTables {
    entry: Vec<f64>,
    horizontal: Vec<f64>,
}

fn union_tables(m: usize, w: &DimerWeights) -> UnionTables {
    let (x, y, z) = (w.x(), w.y(), w.z());
    let path: Vec<(f64, f64)> = (0..=m)
        .map(|l| path_tiling_poly(l).moments(x, z, l))
        .collect();
    let cycle = cycle_tiling_poly(m).moments(x, z, m);
    let ypow: Vec<f64> = (0..=m).map(|c| y.powi(c as i32)).collect();
    let (entry, horizontal) = (0..1u32 << m)
        .into_par_iter()
        .map(|u| {
            let (f, df) = if u == 0 {
                cycle
            } else {
                let mut f = 1.0;
                let mut ratio = 0.0;
                for l in free_runs(m, u) {
                    let (pw, pd) = path[l];
                    f *= pw;
                    ratio += pd / pw;
                }
                (f, f * ratio)
            };
            let yp = ypow[u.count_ones() as usize];
            (yp * f, yp * df)
        })
        .unzip();
    UnionTables { entry, horizontal }
}

/// A symmetric operator on subsets with entries `K[S ∪ T]` for disjoint
/// `S, T`, optionally restricted to dihedral-invariant vectors.
#[derive(Debug, Clone)]
pub struct SubsetOperator {
    m: usize,
    kernel: Arc<Vec<f64>>,
    orbits: Option<Arc<OrbitTable>>,
}

impl SubsetOperator {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_reduced(&self) -> bool {
        self.orbits.is_some()
    }

    fn with_kernel(&self, kernel: Vec<f64>) -> Self {
        Self {
            m: self.m,
            kernel: Arc::new(kernel),
            orbits: self.orbits.clone(),
        }
    }

    fn row(&self, s: u32, x: &[f64]) -> f64 {
        let comp = !s & ((1u32 << self.m) - 1);
        let mut t = comp;
        let mut acc = 0.0;
        loop {
            acc += self.kernel[(s | t) as usize] * x[t as usize];
            if t == 0 {
                break;
            }
            t = (t - 1) & comp;
        }
        acc
    }
}

impl NonnegOperator for SubsetOperator {
    fn dim(&self) -> usize {
        match &self.orbits {
            Some(o) => o.len(),
            None => 1 << self.m,
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match &self.orbits {
            None => y
                .par_iter_mut()
                .enumerate()
                .for_each(|(s, out)| *out = self.row(s as u32, x)),
            Some(o) => {
                let inv: Vec<f64> = o
                    .sizes
                    .iter()
                    .zip(x)
                    .map(|(&n, &v)| v / (n as f64).sqrt())
                    .collect();
                let lifted: Vec<f64> = o.orbit_of.iter().map(|&id| inv[id as usize]).collect();
                y.par_iter_mut().enumerate().for_each(|(id, out)| {
                    *out = (o.sizes[id] as f64).sqrt() * self.row(o.reps[id], &lifted);
                });
            }
        }
    }

    fn is_symmetric(&self) -> bool {
        true
    }
}

/// `B(m, v)`, on all `2^m` subsets or on dihedral orbits when `reduce`.
pub fn build_b(m: usize, w: &DimerWeights, reduce: bool) -> Result<SubsetOperator, MdError> {
    Ok(build_with_derivatives(m, w, reduce)?.0)
}

/// `B` together with `∂B/∂v₁` and `∂B/∂v₂`.
fn build_with_derivatives(
    m: usize,
    w: &DimerWeights,
    reduce: bool,
) -> Result<(SubsetOperator, Vec<f64>, Vec<f64>), MdError> {
    if m == 0 || m > MAX_RING {
        return Err(MdError::TooLarge { m, max: MAX_RING });
    }
    let tables = union_tables(m, w);
    let vertical: Vec<f64> = tables
        .entry
        .iter()
        .enumerate()
        .map(|(u, e)| e * (u as u32).count_ones() as f64)
        .collect();
    let orbits = if reduce {
        Some(Arc::new(OrbitTable::build(m)?))
    } else {
        None
    };
    let op = SubsetOperator {
        m,
        kernel: Arc::new(tables.entry),
        orbits,
    };
    Ok((op, tables.horizontal, vertical))
}

/// `B(m, v)` as an explicit matrix, rows and columns indexed by mask.
pub fn dense_b(m: usize, w: &DimerWeights) -> Result<DenseMatrix, MdError> {
    if m == 0 || m > MAX_DENSE_RING {
        return Err(MdError::TooLarge {
            m,
            max: MAX_DENSE_RING,
        });
    }
    let k = union_tables(m, w).entry;
    Ok(DenseMatrix::from_fn(1 << m, |s, t| {
        if s & t == 0 {
            k[s | t]
        } else {
            0.0
        }
    }))
}

/// `P̄₁(m, v) = log ρ(B(m, v))`, with `P̄₁(0, v) = log 2`.
pub fn pbar1_md(m: usize, w: &DimerWeights) -> Result<f64, MdError> {
    pbar1_md_with(m, w, &PowerOptions::default())
}

pub fn pbar1_md_with(m: usize, w: &DimerWeights, opts: &PowerOptions) -> Result<f64, MdError> {
    if m == 0 {
        return Ok(2f64.ln());
    }
    let op = build_b(m, w, true)?;
    Ok(spectral_radius(&op, opts)?.rho.ln())
}

/// Upper `P̄₁(m_upper)/m_upper` and lower
/// `(P̄₁(m_lo_hi) − P̄₁(m_lo_lo)) / (m_lo_hi − m_lo_lo)`.
pub fn md_bounds(
    m_upper: usize,
    m_lo_hi: usize,
    m_lo_lo: usize,
    w: &DimerWeights,
) -> Result<PressureEstimate, MdError> {
    md_bounds_with(
        RingLadder {
            m_upper,
            m_lo_hi,
            m_lo_lo,
        },
        w,
        &PowerOptions::default(),
    )
}

pub fn md_bounds_with(
    ladder: RingLadder,
    w: &DimerWeights,
    opts: &PowerOptions,
) -> Result<PressureEstimate, MdError> {
    ladder.validate()?;
    let RingLadder {
        m_upper,
        m_lo_hi,
        m_lo_lo,
    } = ladder;
    let ms = [m_upper, m_lo_hi, m_lo_lo];
    let vals: Vec<f64> = ms
        .par_iter()
        .map(|&m| pbar1_md_with(m, w, opts))
        .collect::<Result<_, _>>()?;
    let upper = vals[0] / m_upper as f64;
    let p = m_lo_hi - m_lo_lo;
    let lower = (vals[1] - vals[2]) / p as f64;
    Ok(PressureEstimate::from_parts(
        lower,
        upper,
        m_upper / 2,
        p,
        m_lo_lo / 2,
    ))
}

fn entropy_of(w: &DimerWeights, pbar_over_m: f64, p1: f64, p2: f64) -> f64 {
    pbar_over_m - p1 * w.v1 - p2 * w.v2 - (1.0 - p1 - p2) * w.monomer
}

/// Fractions `(p₁, p₂)` of sites covered by horizontal and vertical dimers
/// in the width-`m` torus approximation. The record's `h` is
/// `P̄₁(m)/m − p₁v₁ − p₂v₂ − p₀w` with `p₀ = 1 − p₁ − p₂`.
pub fn dimer_densities(
    m: usize,
    w: &DimerWeights,
    method: DensityMethod,
) -> Result<DensityRecord, MdError> {
    dimer_densities_with(m, w, method, &PowerOptions::default())
}

pub fn dimer_densities_with(
    m: usize,
    w: &DimerWeights,
    method: DensityMethod,
    opts: &PowerOptions,
) -> Result<DensityRecord, MdError> {
    let mf = m as f64;
    let (pbar, p1, p2) = match method {
        DensityMethod::ExactGradient => {
            let (op, horizontal, vertical) = build_with_derivatives(m, w, true)?;
            let res = spectral_radius(&op, opts)?;
            let x = &res.right_vec;
            let quad = |kernel: Vec<f64>| {
                let d = op.with_kernel(kernel);
                let mut dx = vec![0.0; x.len()];
                d.apply(x, &mut dx);
                x.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>()
            };
            let norm2: f64 = x.iter().map(|a| a * a).sum();
            let scale = mf * res.rho * norm2;
            (
                res.rho.ln(),
                quad(horizontal) / scale,
                quad(vertical) / scale,
            )
        }
        DensityMethod::ForwardDifference { step } => {
            if !(step > 0.0) {
                return Err(MdError::BadParameter(format!(
                    "step {step} must be positive"
                )));
            }
            let probes = [*w, w.shifted(step, 0.0, 0.0), w.shifted(0.0, step, 0.0)];
            let vals: Vec<f64> = probes
                .par_iter()
                .map(|q| pbar1_md_with(m, q, opts))
                .collect::<Result<_, _>>()?;
            let d = mf * step;
            (vals[0], (vals[1] - vals[0]) / d, (vals[2] - vals[0]) / d)
        }
    };
    Ok(DensityRecord {
        p: vec![p1, p2],
        h: entropy_of(w, pbar / mf, p1, p2),
        method,
    })
}

/// Density entropy from forward differences with step `t`. Values in
/// `[−1e-6, 0)` are reported as 0.
pub fn entropy_2d(m: usize, w: &DimerWeights, t: f64) -> Result<DensityRecord, MdError> {
    entropy_2d_with(m, w, t, &PowerOptions::default())
}

pub fn entropy_2d_with(
    m: usize,
    w: &DimerWeights,
    t: f64,
    opts: &PowerOptions,
) -> Result<DensityRecord, MdError> {
    let mut rec = dimer_densities_with(m, w, DensityMethod::ForwardDifference { step: t }, opts)?;
    if rec.h < -1e-6 {
        return Err(MdError::NegativeEntropy { h: rec.h });
    }
    rec.h = rec.h.max(0.0);
    Ok(rec)
}

/// Ring sizes `(m_upper, m_lo_hi, m_lo_lo)` for a Baxter row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RingLadder {
    pub m_upper: usize,
    pub m_lo_hi: usize,
    pub m_lo_lo: usize,
}

impl RingLadder {
    pub const DESK: RingLadder = RingLadder {
        m_upper: 12,
        m_lo_hi: 12,
        m_lo_lo: 10,
    };

    pub fn validate(&self) -> Result<(), MdError> {
        let RingLadder {
            m_upper,
            m_lo_hi,
            m_lo_lo,
        } = *self;
        if m_upper < 2 || m_upper % 2 != 0 {
            return Err(MdError::BadParity(format!(
                "upper ring size {m_upper} must be even and at least 2"
            )));
        }
        if m_lo_lo % 2 != 0 {
            return Err(MdError::BadParity(format!(
                "lower base ring size {m_lo_lo} must be even"
            )));
        }
        if m_lo_hi <= m_lo_lo {
            return Err(MdError::BadParameter(format!("need {m_lo_hi} > {m_lo_lo}")));
        }
        for m in [m_upper, m_lo_hi] {
            if m > MAX_RING {
                return Err(MdError::TooLarge { m, max: MAX_RING });
            }
        }
        Ok(())
    }

    /// Upper bound at 16; lower from (16, 14) when `1/s ≤ 0.3`, else (17, 16).
    pub fn production(s_inv: f64) -> Self {
        if s_inv <= 0.3 + 1e-12 {
            Self {
                m_upper: 16,
                m_lo_hi: 16,
                m_lo_lo: 14,
            }
        } else {
            Self {
                m_upper: 16,
                m_lo_hi: 17,
                m_lo_lo: 16,
            }
        }
    }
}

/// One line of the Baxter comparison at `v = (log s, log s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaxterRow {
    pub s_inv: f64,
    pub v: f64,
    pub lower: f64,
    pub upper: f64,
    /// Total dimer density `p₁ + p₂`; the dimers per site are `p/2`.
    pub p_total: f64,
    pub entropy: f64,
    pub m_upper: usize,
    pub m_lo_hi: usize,
    pub m_lo_lo: usize,
    pub t: f64,
}

pub fn baxter_row(s: f64, ladder: RingLadder, t: f64) -> Result<BaxterRow, MdError> {
    baxter_row_with(s, ladder, t, &PowerOptions::default())
}

pub fn baxter_row_with(
    s: f64,
    ladder: RingLadder,
    t: f64,
    opts: &PowerOptions,
) -> Result<BaxterRow, MdError> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(MdError::BadParameter(format!(
            "activity {s} must be positive"
        )));
    }
    if !(t > 0.0) {
        return Err(MdError::BadParameter(format!("step {t} must be positive")));
    }
    let v = s.ln();
    let w = DimerWeights::diagonal(v)?;
    let est = md_bounds_with(ladder, &w, opts)?;
    let m = ladder.m_upper;
    let bumped = pbar1_md_with(m, &DimerWeights::diagonal(v + t)?, opts)?;
    let p_total = (bumped - est.upper * m as f64) / (m as f64 * t);
    Ok(BaxterRow {
        s_inv: 1.0 / s,
        v,
        lower: est.lower,
        upper: est.upper,
        p_total,
        entropy: est.upper - v * p_total,
        m_upper: ladder.m_upper,
        m_lo_hi: ladder.m_lo_hi,
        m_lo_lo: ladder.m_lo_lo,
        t,
    })
}

/// Partial sums of `(1/π) Σ (−1)^r / (2r+1)²` with the alternating-series
/// error bound `1/(π (2·terms + 1)²)`.
pub fn fisher_kasteleyn_series(terms: usize) -> Result<(f64, f64), MdError> {
    if terms == 0 {
        return Err(MdError::BadParameter("need at least one term".into()));
    }
    // smallest terms first
    let sum: f64 = (0..terms)
        .rev()
        .map(|r| {
            let t = 1.0 / ((2 * r + 1) as f64).powi(2);
            if r % 2 == 0 {
                t
            } else {
                -t
            }
        })
        .sum();
    let pi = std::f64::consts::PI;
    Ok((sum / pi, 1.0 / (pi * ((2 * terms + 1) as f64).powi(2))))
}
