//! Grid conjugates, entropy via `−P*`, kink scans and convexity checks
//! for pressure functions given as plain callables.

use rand::{rngs::StdRng, Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LegendreError {
    #[error("no samples")]
    EmptySamples,
    #[error("need at least 2 samples, got {0}")]
    TooFewPoints(usize),
    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("conjugate value {h} is below -{grid_tol}: density lies outside the attainable set")]
    OutsideDensitySet { h: f64, grid_tol: f64 },
    #[error("invalid scan: {0}")]
    BadScan(String),
    #[error("convexity violated at {u:?}: left slope {left} exceeds right slope {right}")]
    NonConvex { u: Vec<f64>, left: f64, right: f64 },
}

/// A pressure function sampled at finitely many points.
#[derive(Debug, Clone)]
pub struct PressureSamples {
    pub dim: usize,
    pub points: Vec<(Vec<f64>, f64)>,
    pub source: String,
}

impl PressureSamples {
    pub fn new(
        dim: usize,
        points: Vec<(Vec<f64>, f64)>,
        source: impl Into<String>,
    ) -> Result<Self, LegendreError> {
        if points.is_empty() {
            return Err(LegendreError::EmptySamples);
        }
        if points.len() < 2 {
            return Err(LegendreError::TooFewPoints(points.len()));
        }
        for (index, (u, p)) in points.iter().enumerate() {
            if u.len() != dim {
                return Err(LegendreError::DimensionMismatch {
                    index,
                    expected: dim,
                    found: u.len(),
                });
            }
            if !p.is_finite() || u.iter().any(|v| !v.is_finite()) {
                return Err(LegendreError::NonFinite { index });
            }
        }
        Ok(Self {
            dim,
            points,
            source: source.into(),
        })
    }

    /// Samples `f` on the cartesian product of the per-axis grids.
    pub fn on_grid<F>(
        source: impl Into<String>,
        axes: &[Vec<f64>],
        f: F,
    ) -> Result<Self, LegendreError>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let mut us: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in axes {
            us = us
                .into_iter()
                .flat_map(|u| {
                    axis.iter().map(move |&a| {
                        let mut next = u.clone();
                        next.push(a);
                        next
                    })
                })
                .collect();
        }
        let points = us
            .into_par_iter()
            .map(|u| {
                let p = f(&u);
                (u, p)
            })
            .collect();
        Self::new(axes.len(), points, source)
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for (u, _) in &self.points {
            for k in 0..self.dim {
                lo[k] = lo[k].min(u[k]);
                hi[k] = hi[k].max(u[k]);
            }
        }
        (lo, hi)
    }
}

/// `linspace(a, b, n)` with both ends included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `max_u pᵀu − P(u)` over the samples, a lower bound on `P*(p)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugateValue {
    pub value: f64,
    pub argmax: Vec<f64>,
    /// Every maximizer sits on the boundary of the sampled box, so the true
    /// supremum may be larger (or infinite).
    pub at_grid_boundary: bool,
}

pub fn conjugate_on_grid(
    samples: &PressureSamples,
    p: &[f64],
) -> Result<ConjugateValue, LegendreError> {
    if p.len() != samples.dim {
        return Err(LegendreError::DimensionMismatch {
            index: 0,
            expected: samples.dim,
            found: p.len(),
        });
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(LegendreError::NonFinite { index: 0 });
    }
    let (lo, hi) = samples.bounds();
    // A pinned coordinate (lo == hi) is a gauge choice, not an edge of the box.
    let on_boundary = |u: &[f64]| {
        u.iter()
            .enumerate()
            .any(|(k, &v)| lo[k] < hi[k] && (v == lo[k] || v == hi[k]))
    };
    let values: Vec<f64> = samples
        .points
        .iter()
        .map(|(u, pu)| u.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() - pu)
        .collect();
    let (best, value) = values
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    let tie = 1e-12 * value.abs().max(1.0);
    let interior = samples
        .points
        .iter()
        .zip(&values)
        .find(|((u, _), &v)| value - v <= tie && !on_boundary(u));
    let (argmax, at_grid_boundary) = match interior {
        Some(((u, _), _)) => (u.clone(), false),
        None => (samples.points[best].0.clone(), true),
    };
    Ok(ConjugateValue {
        value,
        argmax,
        at_grid_boundary,
    })
}

/// `h(p) = −P*(p)` from the grid conjugate; values below `−grid_tol` mean
/// `p` is not an attainable density.
pub fn density_entropy_from_conjugate(
    samples: &PressureSamples,
    p: &[f64],
    grid_tol: f64,
) -> Result<f64, LegendreError> {
    let h = -conjugate_on_grid(samples, p)?.value;
    if h < -grid_tol {
        return Err(LegendreError::OutsideDensitySet { h, grid_tol });
    }
    Ok(h)
}

/// A jump of the directional derivative along a scanned segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinkReport {
    pub u: Vec<f64>,
    pub direction: Vec<f64>,
    pub left: f64,
    pub right: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub steps: usize,
    /// One-sided difference step.
    pub h: f64,
    pub gap_tol: f64,
}

impl ScanOptions {
    /// `gap_tol = 20 h`.
    pub fn new(steps: usize, h: f64) -> Self {
        Self {
            steps,
            h,
            gap_tol: 20.0 * h,
        }
    }
}

/// Walks `u_a → u_b` and reports the points where the one-sided
/// derivatives along the direction differ by more than `gap_tol`.
///
/// The direction is `(u_b − u_a)/‖u_b − u_a‖∞`, so slopes are per unit
/// of max-norm. Candidates come from jumps between consecutive secant
/// slopes and are narrowed by repeated quartering to a bracket no wider
/// than `h`, so that a smooth stretch contributes only `O(h)` to the gap.
pub fn phase_transition_scan<F>(
    pressure: F,
    u_a: &[f64],
    u_b: &[f64],
    opts: ScanOptions,
) -> Result<Vec<KinkReport>, LegendreError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if u_a.len() != u_b.len() {
        return Err(LegendreError::BadScan(
            "endpoints differ in dimension".into(),
        ));
    }
    let len = u_a
        .iter()
        .zip(u_b)
        .map(|(a, b)| (b - a).abs())
        .fold(0.0, f64::max);
    if !(len > 0.0) {
        return Err(LegendreError::BadScan("endpoints coincide".into()));
    }
    if opts.steps < 8 {
        return Err(LegendreError::BadScan(format!(
            "need at least 8 steps, got {}",
            opts.steps
        )));
    }
    if !(opts.h > 0.0 && opts.gap_tol > 0.0) {
        return Err(LegendreError::BadScan(
            "step and gap tolerance must be positive".into(),
        ));
    }
    let dir: Vec<f64> = u_a.iter().zip(u_b).map(|(a, b)| (b - a) / len).collect();
    let at = |tau: f64| -> Vec<f64> { u_a.iter().zip(&dir).map(|(a, d)| a + tau * d).collect() };
    let f = |tau: f64| pressure(&at(tau));

    let n = opts.steps;
    let dt = len / n as f64;
    let vals: Vec<f64> = (0..=n).into_par_iter().map(|i| f(i as f64 * dt)).collect();
    let slopes: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
    let candidates: Vec<usize> = (1..n)
        .filter(|&i| slopes[i] - slopes[i - 1] > opts.gap_tol)
        .collect();

    let refined: Vec<Option<(f64, f64, f64, f64)>> = candidates
        .par_iter()
        .map(|&i| {
            let (mut a, mut b) = ((i - 1) as f64 * dt, (i + 1) as f64 * dt);
            while b - a > opts.h {
                let q: Vec<f64> = (0..=4).map(|k| a + (b - a) * k as f64 / 4.0).collect();
                let fq: Vec<f64> = q.iter().map(|&t| f(t)).collect();
                let s: Vec<f64> = (0..4)
                    .map(|k| (fq[k + 1] - fq[k]) / (q[k + 1] - q[k]))
                    .collect();
                let j = (1..4)
                    .max_by(|&x, &y| (s[x] - s[x - 1]).total_cmp(&(s[y] - s[y - 1])))
                    .expect("three jumps");
                a = q[j - 1];
                b = q[j + 1];
            }
            let left = (f(a) - f(a - opts.h)) / opts.h;
            let right = (f(b + opts.h) - f(b)) / opts.h;
            (right - left > opts.gap_tol).then_some(((a + b) / 2.0, left, right, right - left))
        })
        .collect();

    let mut reports: Vec<KinkReport> = Vec::new();
    let mut last_tau = f64::NEG_INFINITY;
    for (tau, left, right, gap) in refined.into_iter().flatten() {
        if left > right + opts.gap_tol {
            return Err(LegendreError::NonConvex {
                u: at(tau),
                left,
                right,
            });
        }
        // neighbouring grid points bracket the same kink
        if tau - last_tau <= 2.0 * dt {
            if let Some(prev) = reports.last_mut() {
                if gap > prev.gap {
                    *prev = KinkReport {
                        u: at(tau),
                        direction: dir.clone(),
                        left,
                        right,
                        gap,
                    };
                }
            }
            last_tau = tau;
            continue;
        }
        last_tau = tau;
        reports.push(KinkReport {
            u: at(tau),
            direction: dir.clone(),
            left,
            right,
            gap,
        });
    }
    Ok(reports)
}

/// Outcome of one diagnostic property.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub passed: bool,
    /// Largest violation seen; nonpositive when the property holds.
    pub worst: f64,
    pub trials: usize,
}

impl Check {
    fn from_violations(v: impl Iterator<Item = f64>, trials: usize, tol: f64) -> Self {
        let worst = v.fold(f64::NEG_INFINITY, f64::max);
        Self {
            passed: worst <= tol,
            worst,
            trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub lipschitz: Check,
    pub convexity: Check,
    pub shift: Option<Check>,
    pub max_char: Option<Check>,
}

impl DiagnosticsReport {
    pub fn all_passed(&self) -> bool {
        self.lipschitz.passed
            && self.convexity.passed
            && self.shift.is_none_or(|c| c.passed)
            && self.max_char.is_none_or(|c| c.passed)
    }
}

/// Probes are drawn from `{u : ‖u − center‖∞ ≤ radius}`, each paired with
/// a second point at a random distance.
#[derive(Debug, Clone)]
pub struct DiagnosticsConfig {
    pub center: Vec<f64>,
    pub radius: f64,
    pub trials: usize,
    pub tol: f64,
    pub seed: u64,
    /// Check `P(u + t·1) = P(u) + t`; only meaningful when every color
    /// carries a weight coordinate.
    pub shift: bool,
    /// Recorded `(p, h)` pairs; then `P(u) ≥ pᵀu + h` must hold.
    pub density_pairs: Vec<(Vec<f64>, f64)>,
}

impl DiagnosticsConfig {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self {
            center,
            radius,
            trials: 200,
            tol: 1e-10,
            seed: 0x5eed,
            shift: true,
            density_pairs: Vec::new(),
        }
    }
}

/// Lipschitz in the max-norm, midpoint convexity, the shift identity and
/// the lower envelope from density pairs, on random probes.
pub fn convex_diagnostics<F>(pressure: F, cfg: &DiagnosticsConfig) -> DiagnosticsReport
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let probes: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..cfg.trials)
        .map(|_| {
            let a: Vec<f64> = cfg
                .center
                .iter()
                .map(|c| c + rng.gen_range(-cfg.radius..=cfg.radius))
                .collect();
            // partners at every scale down to 1e-6 of the radius
            let scale = cfg.radius * 10f64.powf(-rng.gen_range(0.0..6.0));
            let b = a
                .iter()
                .map(|x| x + scale * rng.gen_range(-1.0..=1.0))
                .collect();
            (a, b, rng.gen_range(-cfg.radius..=cfg.radius))
        })
        .collect();
    let rows: Vec<[f64; 4]> = probes
        .par_iter()
        .map(|(a, b, t)| {
            let (pa, pb) = (pressure(a), pressure(b));
            let dist = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect();
            let lip = (pa - pb).abs() - dist;
            let conv = pressure(&mid) - (pa + pb) / 2.0;
            let shift = if cfg.shift {
                let moved: Vec<f64> = a.iter().map(|x| x + t).collect();
                (pressure(&moved) - pa - t).abs()
            } else {
                f64::NEG_INFINITY
            };
            let env = cfg
                .density_pairs
                .iter()
                .map(|(p, h)| p.iter().zip(a).map(|(x, y)| x * y).sum::<f64>() + h - pa)
                .fold(f64::NEG_INFINITY, f64::max);
            [lip, conv, shift, env]
        })
        .collect();
    let col = |k: usize| rows.iter().map(move |r| r[k]);
    DiagnosticsReport {
        lipschitz: Check::from_violations(col(0), cfg.trials, cfg.tol),
        convexity: Check::from_violations(col(1), cfg.trials, cfg.tol),
        shift: cfg
            .shift
            .then(|| Check::from_violations(col(2), cfg.trials, cfg.tol)),
        max_char: (!cfg.density_pairs.is_empty())
            .then(|| Check::from_violations(col(3), cfg.trials, cfg.tol)),
    }
}
