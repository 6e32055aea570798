use nalgebra::DMatrix;
use proptest::prelude::*;

use softpress::monomer_dimer::{dense_b, md_bounds, pbar1_md, DimerWeights};
use softpress::pressure1d::{build_transfer_1d, density_entropy_1d, pressure_1d};
use softpress::spectral::strong_components;
use softpress::transfer2d::{pbar, sandwich_bounds};
use softpress::{Digraph, DigraphTuple, WeightVector};

fn wv(u: &[f64]) -> WeightVector {
    WeightVector::new(u.to_vec()).unwrap()
}

fn irreducible(g: &Digraph) -> bool {
    let pattern = g.successors();
    let comps = strong_components(&pattern);
    comps.components.len() == 1 && comps.nontrivial(&pattern).count() == 1
}

/// Strongly connected digraphs on 1..=5 colors with a weight vector.
fn digraph_and_weights() -> impl Strategy<Value = (Digraph, Vec<f64>)> {
    (1usize..=5)
        .prop_flat_map(|n| {
            (
                proptest::collection::vec(any::<bool>(), n * n),
                proptest::collection::vec(-3.0f64..3.0, n),
            )
        })
        .prop_map(|(bits, u)| {
            let n = u.len();
            (Digraph::from_fn(n, |p, q| bits[p * n + q]), u)
        })
        .prop_filter("strongly connected", |(g, _)| irreducible(g))
}

fn largest_symmetric_eigenvalue(n: usize, entry: impl Fn(usize, usize) -> f64) -> f64 {
    let m = DMatrix::from_fn(n, n, entry);
    m.symmetric_eigen().eigenvalues.max()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pressure_is_midpoint_convex((g, u) in digraph_and_weights(), seed in proptest::collection::vec(-3.0f64..3.0, 5)) {
        let w: Vec<f64> = seed[..u.len()].to_vec();
        let mid: Vec<f64> = u.iter().zip(&w).map(|(a, b)| (a + b) / 2.0).collect();
        let (pu, pw, pm) = (pressure_1d(&g, &wv(&u)).unwrap(), pressure_1d(&g, &wv(&w)).unwrap(), pressure_1d(&g, &wv(&mid)).unwrap());
        prop_assert!(pm <= (pu + pw) / 2.0 + 1e-11);
        let dist = u.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!((pu - pw).abs() <= dist + 1e-11);
    }

    #[test]
    fn pressure_shift_identity((g, u) in digraph_and_weights(), t in -5.0f64..5.0) {
        let a = pressure_1d(&g, &wv(&u)).unwrap();
        let b = pressure_1d(&g, &wv(&u).shifted(t)).unwrap();
        prop_assert!((b - a - t).abs() < 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn relabeling_colors_is_harmless((g, u) in digraph_and_weights(), key in proptest::collection::vec(any::<u32>(), 5)) {
        let n = g.n();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by_key(|&i| key[i]);
        let a = pressure_1d(&g, &wv(&u)).unwrap();
        let b = pressure_1d(&g.permuted(&perm), &wv(&u).permuted(&perm)).unwrap();
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        let ra = density_entropy_1d(&g, &wv(&u)).unwrap();
        let rb = density_entropy_1d(&g.permuted(&perm), &wv(&u).permuted(&perm)).unwrap();
        for c in 0..n {
            prop_assert!((ra.p[c] - rb.p[perm[c]]).abs() < 1e-9);
        }
    }

    #[test]
    fn fenchel_young((g, u) in digraph_and_weights(), seed in proptest::collection::vec(-3.0f64..3.0, 5)) {
        // a density recorded at one weight never beats the pressure at another
        let rec = density_entropy_1d(&g, &wv(&u)).unwrap();
        let w = &seed[..u.len()];
        let pw = pressure_1d(&g, &wv(w)).unwrap();
        let dot: f64 = rec.p.iter().zip(w).map(|(a, b)| a * b).sum();
        prop_assert!(dot + rec.h <= pw + 1e-9);
        prop_assert!(rec.h >= -1e-9);
        prop_assert!((rec.p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_transfer_matches_dense_eigensolver(n in 1usize..=6, bits in proptest::collection::vec(any::<bool>(), 36), u in proptest::collection::vec(-2.0f64..2.0, 6)) {
        let g = Digraph::from_fn(n, |p, q| bits[p.min(q) * 6 + p.max(q)]);
        prop_assume!(irreducible(&g));
        let u = wv(&u[..n]);
        let t = build_transfer_1d(&g, &u).unwrap().matrix;
        let rho = largest_symmetric_eigenvalue(n, |i, j| t.get(i, j));
        prop_assert!((pressure_1d(&g, &u).unwrap() - rho.ln()).abs() < 1e-11);
    }

    #[test]
    fn monomer_dimer_matches_dense_eigensolver(m in 1usize..=6, v1 in -2.0f64..2.0, v2 in -2.0f64..2.0) {
        let w = DimerWeights::new(v1, v2).unwrap();
        let b = dense_b(m, &w).unwrap();
        let rho = largest_symmetric_eigenvalue(b.n(), |i, j| b.get(i, j));
        prop_assert!((pbar1_md(m, &w).unwrap() - rho.ln()).abs() < 1e-11 * (1.0 + rho.ln().abs()));
    }

    #[test]
    fn monomer_dimer_bracket(v1 in -2.0f64..3.0, v2 in -2.0f64..3.0) {
        let w = DimerWeights::new(v1, v2).unwrap();
        let wide = md_bounds(6, 6, 4, &w).unwrap();
        let narrow = md_bounds(8, 8, 6, &w).unwrap();
        prop_assert!(wide.lower <= narrow.upper + 1e-10);
        prop_assert!(narrow.lower <= wide.upper + 1e-10);
        prop_assert!(narrow.upper <= wide.upper + 1e-10);
    }

    #[test]
    fn hard_squares_bracket(s in -3.0f64..3.0) {
        let squares = DigraphTuple::isotropic(Digraph::hard_core(), 2).unwrap();
        let u = wv(&[s, 0.0]);
        let est = sandwich_bounds(&squares, 3, 2, 2, &u).unwrap();
        prop_assert!(est.lower <= est.upper + 1e-10);
        let up4 = pbar(&squares, 4, &u).unwrap() / 4.0;
        prop_assert!(est.upper <= up4 + 1e-12);
        prop_assert!(est.lower <= up4);
    }
}
