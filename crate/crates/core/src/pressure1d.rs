//! Exact one-dimensional pressure.
//!
//! For a single digraph `Γ` on `n` colors and weights `u`, the weighted
//! adjacency matrix `D(u)` has entries `[ (i,j) ∈ Γ ] · e^{(u_i + u_j)/2}`.
//! Then `P_Γ(u) = log ρ(D(u))` when `Γ` is strongly connected, the maximum
//! over component pressures otherwise, and `-∞` when `Γ` has no cycle.

use thiserror::Error;

use crate::soft::{Digraph, SoftError, WeightVector};
use crate::spectral::{
    perron_pair, spectral_radius, strong_components, DenseMatrix, PowerOptions, SpectralError,
};

#[derive(Debug, Error)]
pub enum PressureError {
    #[error(transparent)]
    Soft(#[from] SoftError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("digraph is not strongly connected ({components} components)")]
    Reducible { components: usize },
    #[error("digraph has no cycle, the subshift is empty")]
    EmptySoft,
    #[error("density {0} is outside (0, 1/2)")]
    Domain(f64),
}

/// How a density vector was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityMethod {
    ExactGradient,
    ForwardDifference { step: f64 },
}

/// Color (or dimer) frequencies together with their density entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRecord {
    pub p: Vec<f64>,
    pub h: f64,
    pub method: DensityMethod,
}

/// `D_Γ(u)` and the boundary vector `1(u) = (e^{u_i/2})`.
#[derive(Debug, Clone)]
pub struct Transfer1D {
    pub matrix: DenseMatrix,
    pub boundary: Vec<f64>,
}

pub fn build_transfer_1d(gamma: &Digraph, u: &WeightVector) -> Result<Transfer1D, PressureError> {
    let n = gamma.n();
    u.check_len(n)?;
    let half: Vec<f64> = u.as_slice().iter().map(|w| (w / 2.0).exp()).collect();
    let matrix = DenseMatrix::from_fn(n, |i, j| {
        if gamma.allows(i, j) {
            ((u.get(i) + u.get(j)) / 2.0).exp()
        } else {
            0.0
        }
    });
    Ok(Transfer1D {
        matrix,
        boundary: half,
    })
}

/// Color sets of the components that carry cycles, with their pressures.
fn component_pressures(
    gamma: &Digraph,
    u: &WeightVector,
    opts: &PowerOptions,
) -> Result<Vec<(Vec<usize>, f64)>, PressureError> {
    let t = build_transfer_1d(gamma, u)?;
    let pattern = gamma.successors();
    let comps = strong_components(&pattern);
    comps
        .nontrivial(&pattern)
        .map(|c| {
            let sub = t.matrix.submatrix(c);
            let rho = spectral_radius(&sub, opts)?.rho;
            Ok((c.to_vec(), rho.ln()))
        })
        .collect()
}

/// `P_Γ(u)`; `-∞` for a digraph without cycles.
pub fn pressure_1d(gamma: &Digraph, u: &WeightVector) -> Result<f64, PressureError> {
    pressure_1d_with(gamma, u, &PowerOptions::default())
}

pub fn pressure_1d_with(
    gamma: &Digraph,
    u: &WeightVector,
    opts: &PowerOptions,
) -> Result<f64, PressureError> {
    Ok(component_pressures(gamma, u, opts)?
        .into_iter()
        .map(|(_, p)| p)
        .fold(f64::NEG_INFINITY, f64::max))
}

fn single_component(gamma: &Digraph) -> Result<(), PressureError> {
    let pattern = gamma.successors();
    let comps = strong_components(&pattern);
    match (comps.components.len(), comps.nontrivial(&pattern).count()) {
        (1, 1) => Ok(()),
        (_, 0) => Err(PressureError::EmptySoft),
        (k, _) => Err(PressureError::Reducible { components: k }),
    }
}

/// `∇P_Γ(u) = (y_i x_i)` for strongly connected `Γ`, with `x, y` the right
/// and left Perron vectors normalized by `yᵀx = 1`.
pub fn gradient_1d(gamma: &Digraph, u: &WeightVector) -> Result<Vec<f64>, PressureError> {
    gradient_1d_with(gamma, u, &PowerOptions::default())
}

pub fn gradient_1d_with(
    gamma: &Digraph,
    u: &WeightVector,
    opts: &PowerOptions,
) -> Result<Vec<f64>, PressureError> {
    single_component(gamma)?;
    let t = build_transfer_1d(gamma, u)?;
    Ok(perron_pair(&t.matrix, opts)?.products())
}

/// `h_Γ(p(u)) = -p(u)ᵀu + P_Γ(u)` at `p(u) = ∇P_Γ(u)`.
///
/// A reducible digraph is accepted when a single component strictly
/// dominates the pressure: the density is then that component's gradient,
/// padded with zeros. Ties between components have no unique density and
/// are refused.
pub fn density_entropy_1d(
    gamma: &Digraph,
    u: &WeightVector,
) -> Result<DensityRecord, PressureError> {
    density_entropy_1d_with(gamma, u, &PowerOptions::default())
}

pub fn density_entropy_1d_with(
    gamma: &Digraph,
    u: &WeightVector,
    opts: &PowerOptions,
) -> Result<DensityRecord, PressureError> {
    let comps = component_pressures(gamma, u, opts)?;
    if comps.is_empty() {
        return Err(PressureError::EmptySoft);
    }
    let total = strong_components(&gamma.successors()).components.len();
    let best = comps
        .iter()
        .map(|(_, p)| *p)
        .fold(f64::NEG_INFINITY, f64::max);
    let leaders: Vec<&(Vec<usize>, f64)> = comps
        .iter()
        .filter(|(_, p)| best - p <= 1e-12 * best.abs().max(1.0))
        .collect();
    if leaders.len() != 1 {
        return Err(PressureError::Reducible { components: total });
    }
    let (colors, pressure) = leaders[0];
    let t = build_transfer_1d(gamma, u)?;
    let local = perron_pair(&t.matrix.submatrix(colors), opts)?.products();
    let mut p = vec![0.0; gamma.n()];
    for (&c, &v) in colors.iter().zip(&local) {
        p[c] = v;
    }
    let h = pressure - p.iter().zip(u.as_slice()).map(|(a, b)| a * b).sum::<f64>();
    Ok(DensityRecord {
        p,
        h,
        method: DensityMethod::ExactGradient,
    })
}

/// Closed forms of the two-color hard-core model at `u = (s, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardcoreReference {
    pub s: f64,
    pub rho: f64,
    pub pressure: f64,
    /// Frequency of occupied sites.
    pub density: f64,
}

pub fn hardcore_reference(s: f64) -> HardcoreReference {
    let root = (1.0 + 4.0 * s.exp()).sqrt();
    let rho = (1.0 + root) / 2.0;
    HardcoreReference {
        s,
        rho,
        pressure: rho.ln(),
        density: 0.5 * (1.0 - 1.0 / root),
    }
}

fn check_hardcore_density(p: f64) -> Result<(), PressureError> {
    if p > 0.0 && p < 0.5 {
        Ok(())
    } else {
        Err(PressureError::Domain(p))
    }
}

/// Inverse of the density map: the potential `s` whose occupation is `p`.
pub fn hardcore_s_of_density(p: f64) -> Result<f64, PressureError> {
    check_hardcore_density(p)?;
    Ok((p * (1.0 - p) / (1.0 - 2.0 * p).powi(2)).ln())
}

/// Density entropy of the hard-core model at occupation `p`.
pub fn hardcore_entropy_of_density(p: f64) -> Result<f64, PressureError> {
    check_hardcore_density(p)?;
    Ok(((1.0 - p) / (1.0 - 2.0 * p)).ln() - p * hardcore_s_of_density(p)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const H_GOLDEN: f64 = 0.481_211_825_059_603_4;
    /// 2 / ((1 + √5) √5)
    const P_STAR: f64 = 0.276_393_202_250_021;

    fn w(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    fn loops() -> Digraph {
        Digraph::from_edges(2, &[(1, 1), (2, 2)]).unwrap()
    }

    #[test]
    fn transfer_examples() {
        let s: f64 = 0.7;
        let t = build_transfer_1d(&Digraph::hard_core(), &w(&[s, 0.0])).unwrap();
        let e = (s / 2.0).exp();
        assert_eq!(
            t.matrix,
            DenseMatrix::from_rows(vec![vec![0.0, e], vec![e, 1.0]])
        );
        assert_eq!(t.boundary, vec![e, 1.0]);
        let t = build_transfer_1d(&Digraph::complete(2), &w(&[0.0, 0.0])).unwrap();
        assert_eq!(t.matrix, DenseMatrix::from_rows(vec![vec![1.0; 2]; 2]));
        let t = build_transfer_1d(&Digraph::empty(3), &WeightVector::zeros(3)).unwrap();
        assert_eq!(t.matrix, DenseMatrix::zeros(3));
    }

    #[test]
    fn pressure_examples() {
        let p = pressure_1d(&Digraph::hard_core(), &w(&[0.0, 0.0])).unwrap();
        assert!((p - H_GOLDEN).abs() < 1e-12);
        for n in 1..6 {
            let p = pressure_1d(&Digraph::complete(n), &WeightVector::zeros(n)).unwrap();
            assert!((p - (n as f64).ln()).abs() < 1e-12);
        }
        let p = pressure_1d(&loops(), &w(&[1.0, 3.0])).unwrap();
        assert!((p - 3.0).abs() < 1e-12);
    }

    #[test]
    fn acyclic_is_negative_infinity() {
        let chain = Digraph::from_edges(3, &[(1, 2), (2, 3)]).unwrap();
        assert_eq!(
            pressure_1d(&chain, &WeightVector::zeros(3)).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(matches!(
            gradient_1d(&chain, &WeightVector::zeros(3)),
            Err(PressureError::EmptySoft)
        ));
    }

    #[test]
    fn gradient_examples() {
        let g = gradient_1d(&Digraph::hard_core(), &w(&[0.0, 0.0])).unwrap();
        assert!((g[0] - P_STAR).abs() < 1e-12);
        assert!((g[1] - (1.0 - P_STAR)).abs() < 1e-12);
        let g = gradient_1d(&Digraph::hard_core(), &w(&[-10.0, 0.0])).unwrap();
        assert!(g[0] < 5e-5);
        assert!((g[0] - hardcore_reference(-10.0).density).abs() < 1e-12);
        assert!(matches!(
            gradient_1d(&loops(), &w(&[1.0, 3.0])),
            Err(PressureError::Reducible { components: 2 })
        ));
    }

    #[test]
    fn entropy_examples() {
        let r = density_entropy_1d(&Digraph::hard_core(), &w(&[0.0, 0.0])).unwrap();
        assert!((r.h - H_GOLDEN).abs() < 1e-12);
        let r = density_entropy_1d(&loops(), &w(&[1.0, 3.0])).unwrap();
        assert_eq!(r.p, vec![0.0, 1.0]);
        assert!(r.h.abs() < 1e-12);
        assert!(matches!(
            density_entropy_1d(&loops(), &w(&[2.0, 2.0])),
            Err(PressureError::Reducible { .. })
        ));
        let p = 0.4;
        let s = hardcore_s_of_density(p).unwrap();
        let r = density_entropy_1d(&Digraph::hard_core(), &w(&[s, 0.0])).unwrap();
        assert!((r.p[0] - p).abs() < 1e-10);
        let closed =
            ((1.0 - p) / (1.0 - 2.0 * p)).ln() - p * (p * (1.0 - p) / (1.0 - 2.0 * p).powi(2)).ln();
        assert!((r.h - closed).abs() < 1e-10);
    }

    #[test]
    fn hardcore_reference_examples() {
        let r = hardcore_reference(0.0);
        assert!((r.rho - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((r.density - P_STAR).abs() < 1e-15);
        assert!((hardcore_reference(40.0).density - 0.5).abs() < 1e-8);
        for s in [-2.0, 0.0, 2.0] {
            let back = hardcore_s_of_density(hardcore_reference(s).density).unwrap();
            assert!((back - s).abs() < 1e-10);
        }
        assert!(matches!(
            hardcore_s_of_density(0.5),
            Err(PressureError::Domain(_))
        ));
        assert!(matches!(
            hardcore_entropy_of_density(0.0),
            Err(PressureError::Domain(_))
        ));
    }

    #[test]
    fn pressure_matches_closed_form_grid() {
        for i in 0..50 {
            let s = -8.0 + 16.0 * i as f64 / 49.0;
            let p = pressure_1d(&Digraph::hard_core(), &w(&[s, 0.0])).unwrap();
            assert!(
                (p - hardcore_reference(s).pressure).abs() < 1e-12,
                "s = {s}"
            );
        }
    }
}
