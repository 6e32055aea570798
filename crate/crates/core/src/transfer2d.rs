//! Transfer operators for two-dimensional NNSOFTs.
//!
//! Ring operators act on closed Γ₁-walks of length `m` and transfer along
//! axis 2; their spectral radii give `P̄(m, u)` and the sandwich bounds.
//! Strip operators act on free Γ₂-columns and transfer along axis 1; they
//! give an upper bound that needs no symmetry.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::pressure1d::{pressure_1d_with, PressureError};
use crate::soft::{
    BoxShape, ColorCount, Digraph, DigraphTuple, Enumerator, SoftError, WeightVector,
};
use crate::spectral::{
    perron_pair, spectral_radius, DenseMatrix, NonnegOperator, PowerOptions, SpectralError,
};

/// Largest number of transfer states built as a dense matrix.
pub const DEFAULT_STATE_BUDGET: usize = 4096;

#[derive(Debug, Error)]
pub enum TransferError {
    #[error(transparent)]
    Soft(#[from] SoftError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Pressure(#[from] PressureError),
    #[error("axis {axis} digraph is not symmetric")]
    NotSymmetric { axis: usize },
    #[error("{states} transfer states exceed the budget of {budget}")]
    StateSpaceTooLarge { states: usize, budget: usize },
    #[error("only d = 2 is supported, got d = {d}")]
    Unsupported { d: usize },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

fn check_planar(gamma: &DigraphTuple) -> Result<(), TransferError> {
    if gamma.d() != 2 {
        return Err(TransferError::Unsupported { d: gamma.d() });
    }
    Ok(())
}

fn check_ring_axis(gamma: &DigraphTuple) -> Result<(), TransferError> {
    check_planar(gamma)?;
    if !gamma.axis(0).is_symmetric() {
        return Err(TransferError::NotSymmetric { axis: 1 });
    }
    Ok(())
}

/// Colorings of a length-`m` line under `graph`, optionally closed into a
/// cycle, in lexicographic order.
fn line_states(
    graph: &Digraph,
    m: usize,
    closed: bool,
    budget: usize,
) -> Result<Vec<Vec<usize>>, TransferError> {
    let tuple = DigraphTuple::new(vec![graph.clone()])?;
    let shape = BoxShape::new(vec![m])?;
    let periodic: &[usize] = if closed { &[0] } else { &[] };
    let mut states = Vec::new();
    let total = Enumerator::default().for_each(&tuple, &shape, periodic, |cells| {
        if states.len() <= budget {
            states.push(cells.to_vec());
        }
    })?;
    if total as usize > budget {
        return Err(TransferError::StateSpaceTooLarge {
            states: total as usize,
            budget,
        });
    }
    Ok(states)
}

/// Closed walks of length `m` on Γ₁.
#[derive(Debug, Clone)]
pub struct RingStateSpace {
    pub m: usize,
    pub n: usize,
    /// 0-based colors, one vector per state.
    pub states: Vec<Vec<usize>>,
    pub counts: Vec<ColorCount>,
}

impl RingStateSpace {
    pub fn build(gamma1: &Digraph, m: usize, budget: usize) -> Result<Self, TransferError> {
        if m == 0 {
            return Err(TransferError::BadParameter(
                "ring circumference must be positive".into(),
            ));
        }
        let states = line_states(gamma1, m, true, budget)?;
        let counts = states
            .iter()
            .map(|s| ColorCount::of_cells(s, gamma1.n()))
            .collect();
        Ok(Self {
            m,
            n: gamma1.n(),
            states,
            counts,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Shared dense construction: `[α → β allowed] · e^{(c(α)+c(β))ᵀu/2}`.
fn weighted_transfer(
    states: &[Vec<usize>],
    counts: &[ColorCount],
    link: &Digraph,
    u: &WeightVector,
) -> DenseMatrix {
    let half: Vec<f64> = counts.iter().map(|c| c.dot(u) / 2.0).collect();
    let k = states.len();
    let data: Vec<f64> = (0..k)
        .into_par_iter()
        .flat_map_iter(|a| {
            let (sa, ha) = (&states[a], half[a]);
            let half = &half;
            (0..k).map(move |b| {
                let ok = sa.iter().zip(&states[b]).all(|(&p, &q)| link.allows(p, q));
                if ok {
                    (ha + half[b]).exp()
                } else {
                    0.0
                }
            })
        })
        .collect();
    DenseMatrix::from_vec(k, data)
}

/// `D̃(Δ, u)` on the ring states of circumference `m`.
#[derive(Debug, Clone)]
pub struct RingTransfer {
    pub space: RingStateSpace,
    pub u: WeightVector,
    pub matrix: DenseMatrix,
}

pub fn build_ring_transfer(
    gamma: &DigraphTuple,
    m: usize,
    u: &WeightVector,
) -> Result<RingTransfer, TransferError> {
    build_ring_transfer_with_budget(gamma, m, u, DEFAULT_STATE_BUDGET)
}

pub fn build_ring_transfer_with_budget(
    gamma: &DigraphTuple,
    m: usize,
    u: &WeightVector,
    budget: usize,
) -> Result<RingTransfer, TransferError> {
    check_ring_axis(gamma)?;
    u.check_len(gamma.n())?;
    let space = RingStateSpace::build(gamma.axis(0), m, budget)?;
    let matrix = weighted_transfer(&space.states, &space.counts, gamma.axis(1), u);
    Ok(RingTransfer {
        space,
        u: u.clone(),
        matrix,
    })
}

impl RingTransfer {
    /// `∂D̃/∂u_i`: each entry scaled by `(c_i(α) + c_i(β))/2`.
    pub fn derivative(&self, color: usize) -> DenseMatrix {
        let c = &self.space.counts;
        DenseMatrix::from_fn(self.matrix.n(), |a, b| {
            self.matrix.get(a, b) * (c[a].counts[color] + c[b].counts[color]) as f64 / 2.0
        })
    }
}

/// Free columns of height `m2` under Γ₂, linked by Γ₁.
#[derive(Debug, Clone)]
pub struct StripTransfer {
    pub m2: usize,
    pub columns: Vec<Vec<usize>>,
    pub counts: Vec<ColorCount>,
    pub matrix: DenseMatrix,
    /// `1(u) = (e^{c(α)ᵀu/2})`.
    pub boundary: Vec<f64>,
}

pub fn build_strip_transfer(
    gamma: &DigraphTuple,
    m2: usize,
    u: &WeightVector,
) -> Result<StripTransfer, TransferError> {
    build_strip_transfer_with_budget(gamma, m2, u, DEFAULT_STATE_BUDGET)
}

pub fn build_strip_transfer_with_budget(
    gamma: &DigraphTuple,
    m2: usize,
    u: &WeightVector,
    budget: usize,
) -> Result<StripTransfer, TransferError> {
    check_planar(gamma)?;
    u.check_len(gamma.n())?;
    if m2 == 0 {
        return Err(TransferError::BadParameter(
            "strip height must be positive".into(),
        ));
    }
    let columns = line_states(gamma.axis(1), m2, false, budget)?;
    let counts: Vec<ColorCount> = columns
        .iter()
        .map(|s| ColorCount::of_cells(s, gamma.n()))
        .collect();
    let matrix = weighted_transfer(&columns, &counts, gamma.axis(0), u);
    let boundary = counts.iter().map(|c| (c.dot(u) / 2.0).exp()).collect();
    Ok(StripTransfer {
        m2,
        columns,
        counts,
        matrix,
        boundary,
    })
}

/// `P̄(m, u) = log ρ(D̃(Δ, u))`; for `m = 0` the entropy of Γ₂ alone,
/// whatever `u` is.
pub fn pbar(gamma: &DigraphTuple, m: usize, u: &WeightVector) -> Result<f64, TransferError> {
    pbar_with(gamma, m, u, &PowerOptions::default())
}

pub fn pbar_with(
    gamma: &DigraphTuple,
    m: usize,
    u: &WeightVector,
    opts: &PowerOptions,
) -> Result<f64, TransferError> {
    check_ring_axis(gamma)?;
    u.check_len(gamma.n())?;
    if m == 0 {
        let g2 = gamma.axis(1);
        return Ok(pressure_1d_with(g2, &WeightVector::zeros(g2.n()), opts)?);
    }
    let ring = build_ring_transfer(gamma, m, u)?;
    if ring.space.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(spectral_radius(&ring.matrix, opts)?.rho.ln())
}

/// Lower and upper pressure bounds with the parameters that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PressureEstimate {
    /// Midpoint of the bracket.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub r: usize,
    pub p: usize,
    pub q: usize,
}

impl PressureEstimate {
    pub fn from_parts(lower: f64, upper: f64, r: usize, p: usize, q: usize) -> Self {
        Self {
            value: (lower + upper) / 2.0,
            lower,
            upper,
            r,
            p,
            q,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Upper `P̄(2r)/(2r)` and lower `(P̄(p+2q) − P̄(2q))/p`.
pub fn sandwich_bounds(
    gamma: &DigraphTuple,
    r: usize,
    p: usize,
    q: usize,
    u: &WeightVector,
) -> Result<PressureEstimate, TransferError> {
    sandwich_bounds_with(gamma, r, p, q, u, &PowerOptions::default())
}

pub fn sandwich_bounds_with(
    gamma: &DigraphTuple,
    r: usize,
    p: usize,
    q: usize,
    u: &WeightVector,
    opts: &PowerOptions,
) -> Result<PressureEstimate, TransferError> {
    if r == 0 || p == 0 {
        return Err(TransferError::BadParameter(format!(
            "need r, p >= 1, got r = {r}, p = {p}"
        )));
    }
    let ms = [2 * r, p + 2 * q, 2 * q];
    let vals: Vec<f64> = ms
        .par_iter()
        .map(|&m| pbar_with(gamma, m, u, opts))
        .collect::<Result<_, _>>()?;
    let upper = vals[0] / (2 * r) as f64;
    let lower = (vals[1] - vals[2]) / p as f64;
    Ok(PressureEstimate::from_parts(lower, upper, r, p, q))
}

/// `log ρ(D_Γ(m₂, u)) / m₂ ≥ P_Γ(u)`.
pub fn strip_upper_bound(
    gamma: &DigraphTuple,
    m2: usize,
    u: &WeightVector,
) -> Result<f64, TransferError> {
    strip_upper_bound_with(gamma, m2, u, &PowerOptions::default())
}

pub fn strip_upper_bound_with(
    gamma: &DigraphTuple,
    m2: usize,
    u: &WeightVector,
    opts: &PowerOptions,
) -> Result<f64, TransferError> {
    let strip = build_strip_transfer(gamma, m2, u)?;
    if strip.columns.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(spectral_radius(&strip.matrix, opts)?.rho.ln() / m2 as f64)
}

/// Per-site color frequencies of the ring subshift,
/// `yᵀ(∂ᵢD̃)x / (m ρ)` with `yᵀx = 1`.
pub fn ring_gradient(
    gamma: &DigraphTuple,
    m: usize,
    u: &WeightVector,
) -> Result<Vec<f64>, TransferError> {
    let ring = build_ring_transfer(gamma, m, u)?;
    let pair = perron_pair(&ring.matrix, &PowerOptions::default())?;
    let scale = pair.rho * m as f64;
    Ok((0..gamma.n())
        .map(|i| {
            let d = ring.derivative(i);
            let mut dx = vec![0.0; d.n()];
            d.apply(&pair.right, &mut dx);
            pair.left.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>() / scale
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soft::Enumerator;

    const LOG_PHI: f64 = 0.481_211_825_059_603_4;

    fn hard_squares() -> DigraphTuple {
        DigraphTuple::isotropic(Digraph::hard_core(), 2).unwrap()
    }

    fn zeros() -> WeightVector {
        WeightVector::zeros(2)
    }

    fn w(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    fn torus_log_z(
        gamma: &DigraphTuple,
        dims: [usize; 2],
        periodic: &[usize],
        u: &WeightVector,
    ) -> f64 {
        let shape = BoxShape::new(dims.to_vec()).unwrap();
        Enumerator::default()
            .census(gamma, &shape, periodic)
            .unwrap()
            .log_partition(u)
            .unwrap()
    }

    #[test]
    fn ring_state_examples() {
        let hs = hard_squares();
        assert_eq!(RingStateSpace::build(hs.axis(0), 2, 100).unwrap().len(), 3);
        assert_eq!(
            RingStateSpace::build(&Digraph::complete(2), 3, 100)
                .unwrap()
                .len(),
            8
        );
        let one = RingStateSpace::build(hs.axis(0), 1, 100).unwrap();
        assert_eq!(one.states, vec![vec![1]]);
        // Lucas numbers
        for (m, l) in [(3, 4), (4, 7), (5, 11), (10, 123)] {
            assert_eq!(RingStateSpace::build(hs.axis(0), m, 1000).unwrap().len(), l);
        }
    }

    #[test]
    fn structural_errors() {
        let directed =
            DigraphTuple::isotropic(Digraph::from_edges(2, &[(1, 2), (2, 2)]).unwrap(), 2).unwrap();
        assert!(matches!(
            pbar(&directed, 2, &zeros()),
            Err(TransferError::NotSymmetric { axis: 1 })
        ));
        let cube = DigraphTuple::isotropic(Digraph::hard_core(), 3).unwrap();
        assert!(matches!(
            pbar(&cube, 2, &zeros()),
            Err(TransferError::Unsupported { d: 3 })
        ));
        let big = DigraphTuple::isotropic(Digraph::complete(2), 2).unwrap();
        assert!(matches!(
            build_ring_transfer_with_budget(&big, 8, &zeros(), 100),
            Err(TransferError::StateSpaceTooLarge {
                states: 256,
                budget: 100
            })
        ));
        assert!(sandwich_bounds(&big, 0, 1, 0, &zeros()).is_err());
        // the strip bound does not need symmetry
        assert!(strip_upper_bound(&directed, 2, &zeros())
            .unwrap()
            .is_finite());
    }

    #[test]
    fn pbar_zero_is_axis_two_entropy() {
        assert!((pbar(&hard_squares(), 0, &zeros()).unwrap() - LOG_PHI).abs() < 1e-12);
        assert!((pbar(&hard_squares(), 0, &w(&[3.0, -1.0])).unwrap() - LOG_PHI).abs() < 1e-12);
    }

    #[test]
    fn pbar_shift_covariance() {
        let hs = hard_squares();
        let u = w(&[0.3, -0.8]);
        for m in 1..=6 {
            let a = pbar(&hs, m, &u).unwrap();
            let b = pbar(&hs, m, &u.shifted(0.45)).unwrap();
            assert!((b - a - 0.45 * m as f64).abs() < 1e-10, "m = {m}");
        }
    }

    #[test]
    fn ring_trace_matches_torus_counts() {
        let hs = hard_squares();
        for u in [zeros(), w(&[0.7, -0.2])] {
            for m in 1..=3 {
                let ring = build_ring_transfer(&hs, m, &u).unwrap();
                for k in 1..=4u32 {
                    let tr = ring.matrix.pow(k).trace().ln();
                    let z = torus_log_z(&hs, [m, k as usize], &[0, 1], &u);
                    assert!((tr - z).abs() < 1e-9, "m = {m}, k = {k}");
                }
            }
        }
        let ring = build_ring_transfer(&hs, 2, &zeros()).unwrap();
        assert_eq!(ring.matrix.pow(2).trace(), 7.0);
    }

    #[test]
    fn strip_trace_matches_cylinder_counts() {
        let mixed = DigraphTuple::new(vec![
            Digraph::from_edges(3, &[(1, 2), (2, 3), (3, 1), (2, 2), (3, 3)]).unwrap(),
            Digraph::from_edges(3, &[(1, 1), (1, 2), (2, 3), (3, 2), (3, 1)]).unwrap(),
        ])
        .unwrap();
        let u = w(&[0.4, -0.3, 0.1]);
        for m2 in 1..=4 {
            let strip = build_strip_transfer(&mixed, m2, &u).unwrap();
            for q in 1..=4u32 {
                let tr = strip.matrix.pow(q).trace();
                let z = torus_log_z(&mixed, [q as usize, m2], &[0], &u).exp();
                assert!((tr - z).abs() <= 1e-9 * z, "m2 = {m2}, q = {q}");
            }
        }
    }

    #[test]
    fn complete_digraph_is_log_two() {
        let full = DigraphTuple::isotropic(Digraph::complete(2), 2).unwrap();
        for (r, p, q) in [(1, 1, 1), (2, 3, 1), (3, 2, 2)] {
            let e = sandwich_bounds(&full, r, p, q, &zeros()).unwrap();
            assert!((e.lower - 2f64.ln()).abs() < 1e-12);
            assert!((e.upper - 2f64.ln()).abs() < 1e-12);
        }
        // q = 0 divides against the column entropy P̄(0) = log 2, not 0
        for p in 1..=4 {
            let e = sandwich_bounds(&full, 1, p, 0, &zeros()).unwrap();
            let want = (p - 1) as f64 / p as f64 * 2f64.ln();
            assert!((e.lower - want).abs() < 1e-12);
        }
        assert!((strip_upper_bound(&full, 3, &zeros()).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn hard_squares_upper_sequence() {
        let expected = [
            0.440_686_793_509_771_2,
            0.410_056_037_580_579_3,
            0.407_805_573_398_536_35,
            0.407_540_536_130_730_27,
            0.407_502_471_475_487,
        ];
        let hs = hard_squares();
        let mut prev = f64::INFINITY;
        for (r, want) in (1..=5).zip(expected) {
            let e = sandwich_bounds(&hs, r, 1, r, &zeros()).unwrap();
            assert!((e.upper - want).abs() < 1e-11, "r = {r}: {}", e.upper);
            assert!(e.upper <= prev);
            assert!(e.lower <= e.upper);
            prev = e.upper;
        }
    }

    #[test]
    fn hard_squares_sandwich() {
        let hs = hard_squares();
        let e = sandwich_bounds(&hs, 2, 4, 0, &zeros()).unwrap();
        assert!(e.lower <= e.upper);
        assert!((0.40..=0.49).contains(&e.upper));
        assert!((e.lower - 0.289_753_081_315_678_45).abs() < 1e-11);
        let e = sandwich_bounds(&hs, 2, 2, 2, &zeros()).unwrap();
        assert!((e.lower - 0.403_304_645_034_450_4).abs() < 1e-11);
        assert!((0.40..=0.49).contains(&e.lower));
        let boxed = finite_box_upper(&hs, 4);
        assert!(e.lower <= boxed);
        assert!(e.upper <= boxed);
    }

    fn finite_box_upper(gamma: &DigraphTuple, side: usize) -> f64 {
        let shape = BoxShape::new(vec![side, side]).unwrap();
        crate::soft::finite_pressure_upper(gamma, &shape, &zeros()).unwrap()
    }

    #[test]
    fn strip_bounds() {
        let expected = [
            0.481_211_825_059_603_47,
            0.440_686_793_509_771_2,
            0.429_871_029_469_374_4,
            0.424_257_111_068_728_5,
            0.420_906_307_591_180_53,
            0.418_670_960_739_873_9,
        ];
        let hs = hard_squares();
        let lower = sandwich_bounds(&hs, 2, 2, 2, &zeros()).unwrap().lower;
        let mut prev = f64::INFINITY;
        for (m2, want) in (1..=6).zip(expected) {
            let s = strip_upper_bound(&hs, m2, &zeros()).unwrap();
            assert!((s - want).abs() < 1e-11, "m2 = {m2}");
            assert!(s <= prev && s >= lower);
            prev = s;
        }
    }

    #[test]
    fn symmetric_trace_dominates_radius() {
        let hs = hard_squares();
        for m in 2..=6 {
            let ring = build_ring_transfer(&hs, m, &w(&[0.2, 0.0])).unwrap();
            let rho = spectral_radius(&ring.matrix, &PowerOptions::default())
                .unwrap()
                .rho;
            for r in 1..=3 {
                let tr = ring.matrix.pow(2 * r).trace();
                assert!(tr >= rho.powi(2 * r as i32) * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn ring_gradient_examples() {
        let full = DigraphTuple::isotropic(Digraph::complete(2), 2).unwrap();
        let g = ring_gradient(&full, 2, &zeros()).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-12 && (g[1] - 0.5).abs() < 1e-12);

        let hs = hard_squares();
        let u = zeros();
        let g = ring_gradient(&hs, 2, &u).unwrap();
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let h = 1e-6;
        for i in 0..2 {
            let mut up = u.as_slice().to_vec();
            let mut dn = up.clone();
            up[i] += h;
            dn[i] -= h;
            let fd =
                (pbar(&hs, 2, &w(&up)).unwrap() - pbar(&hs, 2, &w(&dn)).unwrap()) / (2.0 * h) / 2.0;
            assert!((fd - g[i]).abs() < 1e-7, "color {i}: {fd} vs {}", g[i]);
        }

        let g = ring_gradient(&hs, 4, &w(&[-10.0, 0.0])).unwrap();
        assert!(g[0] < 1e-3);
    }
}
