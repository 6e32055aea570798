//! Perron roots of nonnegative operators.
//!
//! Operators are either explicit ([`DenseMatrix`]) or matrix-free (anything
//! implementing [`NonnegOperator`]). The spectral radius is found by shifted
//! power iteration on `M + cI`; for nonnegative `M` the Perron root of the
//! shifted operator is `ρ(M) + c`, and the shift removes the oscillation of
//! periodic (imprimitive) patterns.

use rayon::prelude::*;
use thiserror::Error;

pub const DEFAULT_TOL: f64 = 1e-13;
pub const DEFAULT_MAX_ITER: usize = 200_000;
/// Rayleigh-quotient history used by the convergence test.
const WINDOW: usize = 10;
/// Row count above which dense products are split across threads.
const PAR_ROWS: usize = 256;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("operator has dimension zero")]
    EmptyOperator,
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("no convergence after {max_iter} iterations (rho ~ {:.6e}, residual {:.3e})", best.rho, best.residual)]
    NoConvergence {
        max_iter: usize,
        best: Box<SpectralResult>,
    },
    #[error("operator pattern is reducible ({components} strong components)")]
    Reducible { components: usize },
}

/// A linear map with nonnegative entries given by its action on vectors.
pub trait NonnegOperator: Sync {
    fn dim(&self) -> usize;

    /// `y = M x`; `y` has length `dim` and is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// `y = Mᵀ x`. The default is only valid for symmetric operators.
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert!(self.is_symmetric(), "apply_transpose needs an override");
        self.apply(x, y);
    }

    fn is_symmetric(&self) -> bool;

    /// Successor lists of the zero/nonzero pattern, when cheap to produce.
    fn pattern(&self) -> Option<Vec<Vec<usize>>> {
        None
    }
}

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
    symmetric: bool,
}

impl DenseMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self::from_vec(n, rows.into_iter().flatten().collect())
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        let mut m = Self {
            n,
            data,
            symmetric: false,
        };
        m.symmetric = m.check_symmetric();
        m
    }

    pub fn from_fn(n: usize, entry: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(entry(i, j));
            }
        }
        Self::from_vec(n, data)
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_vec(n, vec![0.0; n * n])
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { 0.0 })
    }

    fn check_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i))
    }

    pub fn mul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
            for k in 0..n {
                let a = self.get(i, k);
                if a != 0.0 {
                    for (o, b) in out.iter_mut().zip(other.row(k)) {
                        *o += a * b;
                    }
                }
            }
        });
        DenseMatrix::from_vec(n, data)
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `M^k`, with `M^0 = I`.
    pub fn pow(&self, k: u32) -> DenseMatrix {
        let mut result = DenseMatrix::identity(self.n);
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Principal submatrix on the given index set.
    pub fn submatrix(&self, idx: &[usize]) -> DenseMatrix {
        DenseMatrix::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    pub fn scaled(&self, factor: f64) -> DenseMatrix {
        DenseMatrix::from_vec(self.n, self.data.iter().map(|x| x * factor).collect())
    }
}

impl NonnegOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let row = |i: usize| -> f64 { self.row(i).iter().zip(x).map(|(a, b)| a * b).sum() };
        if self.n >= PAR_ROWS {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = row(i));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row(i);
            }
        }
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        if self.symmetric {
            return self.apply(x, y);
        }
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (yj, a) in y.iter_mut().zip(self.row(i)) {
                    *yj += a * xi;
                }
            }
        }
    }

    fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    fn pattern(&self) -> Option<Vec<Vec<usize>>> {
        Some(
            (0..self.n)
                .map(|i| (0..self.n).filter(|&j| self.get(i, j) != 0.0).collect())
                .collect(),
        )
    }
}

/// `Mᵀ` as an operator.
pub struct Transposed<'a, O: NonnegOperator + ?Sized>(pub &'a O);

impl<O: NonnegOperator + ?Sized> NonnegOperator for Transposed<'_, O> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply_transpose(x, y)
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply(x, y)
    }

    fn is_symmetric(&self) -> bool {
        self.0.is_symmetric()
    }

    fn pattern(&self) -> Option<Vec<Vec<usize>>> {
        let succ = self.0.pattern()?;
        let mut pred = vec![Vec::new(); succ.len()];
        for (i, row) in succ.iter().enumerate() {
            for &j in row {
                pred[j].push(i);
            }
        }
        Some(pred)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Diagonal shift `c` in `M + cI`, scaled down to `c·‖M‖∞` when the
    /// largest row sum is below 1.
    pub shift: f64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            shift: 1.0,
        }
    }
}

impl PowerOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub rho: f64,
    /// Unit-norm right eigenvector estimate.
    pub right_vec: Vec<f64>,
    /// Unit-norm left eigenvector estimate; a copy of `right_vec` for
    /// symmetric operators.
    pub left_vec: Vec<f64>,
    /// `‖M x − ρ x‖` for the returned right vector.
    pub residual: f64,
    pub iterations: usize,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

struct RightPair {
    rho: f64,
    vec: Vec<f64>,
    residual: f64,
    iterations: usize,
}

fn power_right<O: NonnegOperator + ?Sized>(
    op: &O,
    opts: &PowerOptions,
) -> Result<RightPair, (usize, RightPair)> {
    let n = op.dim();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut mx = vec![0.0; n];
    op.apply(&x, &mut mx);
    if mx.iter().all(|&v| v == 0.0) {
        return Ok(RightPair {
            rho: 0.0,
            vec: x,
            residual: 0.0,
            iterations: 0,
        });
    }
    // max row sum; a unit shift would swamp an operator much smaller than 1
    let row_max = mx.iter().copied().fold(0.0, f64::max) * (n as f64).sqrt();
    let shift = opts.shift * row_max.min(1.0);
    let mut history = [f64::NAN; WINDOW];
    let mut best = RightPair {
        rho: 0.0,
        vec: x.clone(),
        residual: f64::INFINITY,
        iterations: 0,
    };
    for it in 1..=opts.max_iter {
        let theta = dot(&x, &mx);
        let residual = x
            .iter()
            .zip(&mx)
            .map(|(a, b)| (b - theta * a).powi(2))
            .sum::<f64>()
            .sqrt();
        let old = history[it % WINDOW];
        history[it % WINDOW] = theta;
        let stable = old.is_finite() && (theta - old).abs() <= opts.tol * theta;
        if residual <= opts.tol * theta && stable {
            return Ok(RightPair {
                rho: theta,
                vec: x,
                residual,
                iterations: it,
            });
        }
        if residual < best.residual {
            best = RightPair {
                rho: theta,
                vec: x.clone(),
                residual,
                iterations: it,
            };
        }
        for (xi, mi) in x.iter_mut().zip(&mx) {
            *xi = mi + shift * *xi;
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        op.apply(&x, &mut mx);
    }
    Err((opts.max_iter, best))
}

/// Perron root of a nonnegative operator by shifted power iteration.
///
/// Convergence requires the Rayleigh residual `‖Mx − θx‖ ≤ tol·θ` and a
/// change of `θ` over the last 10 iterations below `tol·θ`. An operator with
/// `M·1 = 0` is the zero operator and gets `ρ = 0` exactly.
pub fn spectral_radius<O: NonnegOperator + ?Sized>(
    op: &O,
    opts: &PowerOptions,
) -> Result<SpectralResult, SpectralError> {
    if op.dim() == 0 {
        return Err(SpectralError::EmptyOperator);
    }
    if !(opts.tol > 0.0) {
        return Err(SpectralError::BadTolerance(opts.tol));
    }
    let to_result = |p: RightPair| SpectralResult {
        rho: p.rho,
        left_vec: p.vec.clone(),
        right_vec: p.vec,
        residual: p.residual,
        iterations: p.iterations,
    };
    let right = power_right(op, opts).map_err(|(max_iter, best)| SpectralError::NoConvergence {
        max_iter,
        best: Box::new(to_result(best)),
    })?;
    if op.is_symmetric() || right.rho == 0.0 {
        return Ok(to_result(right));
    }
    let left = power_right(&Transposed(op), opts).map_err(|(max_iter, best)| {
        SpectralError::NoConvergence {
            max_iter,
            best: Box::new(to_result(best)),
        }
    })?;
    Ok(SpectralResult {
        rho: right.rho,
        right_vec: right.vec,
        left_vec: left.vec,
        residual: right.residual,
        iterations: right.iterations.max(left.iterations),
    })
}

/// Perron root with positive eigenvectors normalized by `yᵀx = 1`.
#[derive(Debug, Clone)]
pub struct PerronPair {
    pub rho: f64,
    /// Unit-norm right vector `x`.
    pub right: Vec<f64>,
    /// Left vector `y`, scaled so that `yᵀx = 1`.
    pub left: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl PerronPair {
    /// `(y_i x_i)`, a probability vector.
    pub fn products(&self) -> Vec<f64> {
        self.left
            .iter()
            .zip(&self.right)
            .map(|(a, b)| a * b)
            .collect()
    }
}

/// Perron pair of an irreducible operator. The pattern is checked when the
/// operator exposes one; matrix-free operators without a pattern are taken
/// to be irreducible.
pub fn perron_pair<O: NonnegOperator + ?Sized>(
    op: &O,
    opts: &PowerOptions,
) -> Result<PerronPair, SpectralError> {
    if let Some(pattern) = op.pattern() {
        let comps = strong_components(&pattern);
        if comps.components.len() != 1 {
            return Err(SpectralError::Reducible {
                components: comps.components.len(),
            });
        }
    }
    let res = spectral_radius(op, opts)?;
    let clean = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|a| a.max(0.0)).collect() };
    let right = clean(res.right_vec);
    let mut left = clean(res.left_vec);
    let overlap = dot(&left, &right);
    left.iter_mut().for_each(|v| *v /= overlap);
    Ok(PerronPair {
        rho: res.rho,
        right,
        left,
        residual: res.residual,
        iterations: res.iterations,
    })
}

/// Strongly connected components in topological order of the condensation:
/// every edge `i → j` satisfies `component_of[i] <= component_of[j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentDecomposition {
    pub components: Vec<Vec<usize>>,
    pub component_of: Vec<usize>,
}

impl ComponentDecomposition {
    /// Components that carry a cycle (size > 1, or a single vertex with a
    /// self-loop).
    pub fn nontrivial<'a>(
        &'a self,
        pattern: &'a [Vec<usize>],
    ) -> impl Iterator<Item = &'a [usize]> {
        self.components
            .iter()
            .filter(move |c| c.len() > 1 || pattern[c[0]].contains(&c[0]))
            .map(Vec::as_slice)
    }
}

/// Iterative Tarjan decomposition of a successor-list pattern.
pub fn strong_components(pattern: &[Vec<usize>]) -> ComponentDecomposition {
    const UNSEEN: usize = usize::MAX;
    let n = pattern.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut emitted: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0usize;
    // (vertex, next successor position)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < pattern[v].len() {
                let w = pattern[v][*pos];
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    emitted.push(comp);
                }
            }
        }
    }
    // Tarjan emits sinks first.
    emitted.reverse();
    let mut component_of = vec![0; n];
    for (c, comp) in emitted.iter().enumerate() {
        for &v in comp {
            component_of[v] = c;
        }
    }
    ComponentDecomposition {
        components: emitted,
        component_of,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: f64 = 1.618_033_988_749_895;

    #[test]
    fn golden_ratio_matrix() {
        let m = DenseMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 1.0]]);
        let r = spectral_radius(&m, &PowerOptions::default()).unwrap();
        assert!((r.rho - GOLDEN).abs() < 1e-10);
        assert!(r.residual <= 1e-13 * r.rho);
        let pair = perron_pair(&m, &PowerOptions::default()).unwrap();
        let ratio = pair.right[1] / pair.right[0];
        assert!((ratio - GOLDEN).abs() < 1e-10);
        assert_eq!(pair.left, pair.right);
        // p* = 2 / ((1 + √5) √5)
        let p_star = 2.0 / ((1.0 + 5f64.sqrt()) * 5f64.sqrt());
        let p = pair.products();
        assert!((p[0] - p_star).abs() < 1e-12);
        assert!((p[1] - (1.0 - p_star)).abs() < 1e-12);
    }

    #[test]
    fn diagonal_matrix() {
        let e = std::f64::consts::E;
        let m = DenseMatrix::diagonal(&[e.powi(2), e.powi(5)]);
        let r = spectral_radius(&m, &PowerOptions::default()).unwrap();
        assert!((r.rho - e.powi(5)).abs() < 1e-10 * e.powi(5));
    }

    #[test]
    fn zero_operator_is_exact() {
        let r = spectral_radius(&DenseMatrix::zeros(3), &PowerOptions::default()).unwrap();
        assert_eq!(r.rho, 0.0);
    }

    #[test]
    fn periodic_pattern_converges_with_shift() {
        let m = DenseMatrix::from_rows(vec![vec![0.0, 2.0], vec![2.0, 0.0]]);
        let r = spectral_radius(&m, &PowerOptions::default()).unwrap();
        assert!((r.rho - 2.0).abs() < 1e-12);
        // three-cycle, not symmetric
        let c = DenseMatrix::from_rows(vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ]);
        let r = spectral_radius(&c, &PowerOptions::default()).unwrap();
        assert!((r.rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_operators_converge() {
        for scale in [1e-4, 1e-9] {
            let m = DenseMatrix::from_rows(vec![
                vec![1.0, 2.0, 0.5],
                vec![2.0, 0.5, 1.0],
                vec![0.5, 1.0, 0.0],
            ])
            .scaled(scale);
            let r = spectral_radius(&m, &PowerOptions::default()).unwrap();
            let unit = spectral_radius(&m.scaled(1.0 / scale), &PowerOptions::default()).unwrap();
            assert!((r.rho / scale - unit.rho).abs() < 1e-12 * unit.rho);
            assert!(r.iterations < 1000);
            let c = DenseMatrix::from_rows(vec![vec![0.0, scale], vec![scale, 0.0]]);
            assert!(
                (spectral_radius(&c, &PowerOptions::default()).unwrap().rho - scale).abs()
                    < 1e-12 * scale
            );
        }
    }

    #[test]
    fn nonsymmetric_left_right_pair() {
        let m = DenseMatrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 1.0]]);
        let pair = perron_pair(&m, &PowerOptions::default()).unwrap();
        let rho = 1.0 + 6f64.sqrt();
        assert!((pair.rho - rho).abs() < 1e-12);
        let overlap: f64 = pair.left.iter().zip(&pair.right).map(|(a, b)| a * b).sum();
        assert!((overlap - 1.0).abs() < 1e-12);
        let mut mt_y = vec![0.0; 2];
        m.apply_transpose(&pair.left, &mut mt_y);
        for (a, b) in mt_y.iter().zip(&pair.left) {
            assert!((a - rho * b).abs() < 1e-10);
        }
    }

    #[test]
    fn reducible_pair_is_refused() {
        let m = DenseMatrix::diagonal(&[1.0, 2.0]);
        assert!(matches!(
            perron_pair(&m, &PowerOptions::default()),
            Err(SpectralError::Reducible { components: 2 })
        ));
    }

    #[test]
    fn reducible_radius_is_global_root() {
        let m = DenseMatrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 3.0]]);
        let r = spectral_radius(&m, &PowerOptions::default()).unwrap();
        assert!((r.rho - 3.0).abs() < 1e-12);
    }

    #[test]
    fn no_convergence_reports_best() {
        let opts = PowerOptions {
            max_iter: 1,
            ..PowerOptions::default()
        };
        let m2 = DenseMatrix::from_rows(vec![
            vec![0.0, 1.0, 0.3],
            vec![1.0, 0.0, 0.2],
            vec![0.3, 0.2, 0.1],
        ]);
        match spectral_radius(&m2, &opts) {
            Err(SpectralError::NoConvergence { max_iter, best }) => {
                assert_eq!(max_iter, 1);
                assert!(best.rho > 0.0);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn components_examples() {
        let hc = vec![vec![1], vec![0, 1]];
        assert_eq!(strong_components(&hc).components, vec![vec![0, 1]]);
        let diag = vec![vec![0], vec![1]];
        assert_eq!(strong_components(&diag).components.len(), 2);
        let chain = vec![vec![0, 1], vec![1]];
        let d = strong_components(&chain);
        assert_eq!(d.components, vec![vec![0], vec![1]]);
    }

    #[test]
    fn components_respect_order() {
        let pattern = vec![vec![1], vec![2], vec![1, 3], vec![], vec![0, 4]];
        let d = strong_components(&pattern);
        for (i, row) in pattern.iter().enumerate() {
            for &j in row {
                assert!(d.component_of[i] <= d.component_of[j]);
            }
        }
        let mut all: Vec<usize> = d.components.concat();
        all.sort_unstable();
        assert_eq!(all, (0..5).collect::<Vec<_>>());
        assert_eq!(d.nontrivial(&pattern).count(), 2);
    }

    #[test]
    fn pow_and_trace() {
        let m = DenseMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 1.0]]);
        // Lucas numbers: tr D^k = L_k
        let lucas = [2.0, 1.0, 3.0, 4.0, 7.0, 11.0];
        for (k, &l) in lucas.iter().enumerate() {
            assert_eq!(m.pow(k as u32).trace(), l);
        }
    }
}
