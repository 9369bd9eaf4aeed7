//! Quadrature rules used for the information coefficients.
//!
//! - Gauss–Hermite for expectations of smooth functions under a standard
//!   gaussian, exact for polynomials up to degree `2·nodes − 1`.
//! - Adaptive Gauss–Kronrod (7/15) on a finite window split at caller-given
//!   breakpoints, for non-smooth integrands and non-gaussian weights.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::{Error, Result};

pub const GAUSS_HERMITE_NODES: usize = 200;
pub const ABS_TOL: f64 = 1e-12;
pub const REL_TOL: f64 = 1e-10;
const MAX_INTERVALS: usize = 20_000;

/// Nodes and weights of the probabilists' Gauss–Hermite rule:
/// `E[g(G)] ≈ Σ w_i g(x_i)` for `G ~ N(0, 1)`, with `Σ w_i ≈ 1`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes are eigenvalues of the Jacobi matrix (off-diagonal `√k`),
    /// polished by Newton; weights are `1 / Σ_{k<n} p_k(x)²` with orthonormal
    /// `p_k`, accumulated with rescaling so the far tails underflow cleanly.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut d = vec![0.0; n];
        let mut e: Vec<f64> = (1..=n).map(|k| if k < n { (k as f64).sqrt() } else { 0.0 }).collect();
        crate::spectral::dense::tridiagonal_ql(&mut d, &mut e, None).expect("Jacobi matrix converges");
        d.sort_by(f64::total_cmp);
        // exact symmetry about zero
        for i in 0..n / 2 {
            let m = 0.5 * (d[n - 1 - i] - d[i]);
            d[i] = -m;
            d[n - 1 - i] = m;
        }
        if n % 2 == 1 {
            d[n / 2] = 0.0;
        }
        let mut weights = vec![0.0; n];
        for (x, w) in d.iter_mut().zip(weights.iter_mut()) {
            for _ in 0..3 {
                let (pn, pn1, _) = orthonormal_hermite(n, *x);
                if pn1 != 0.0 {
                    *x -= pn / ((n as f64).sqrt() * pn1);
                }
            }
            let (_, _, sum_sq_log) = orthonormal_hermite(n, *x);
            *w = (-sum_sq_log).exp();
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { nodes: d, weights }
    }

    /// The shared 200-node rule.
    pub fn standard() -> &'static Self {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(GAUSS_HERMITE_NODES))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[g(G)]` for standard gaussian `G`. Nodes are summed from the tails
    /// inwards so small contributions are not swamped.
    pub fn expectation<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        let n = self.nodes.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.weights[a].total_cmp(&self.weights[b]));
        order.iter().map(|&i| self.weights[i] * g(self.nodes[i])).sum()
    }
}

/// `(p_n(x), p_{n−1}(x), ln Σ_{k<n} p_k(x)²)` for the orthonormal probabilists'
/// Hermite family. The first two share an arbitrary common scale.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64, f64) {
    const BIG: f64 = 1e100;
    let (mut prev, mut cur) = (0.0, 1.0);
    let mut sum = 0.0;
    let mut log_scale = 0.0;
    for k in 0..n {
        sum += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            prev /= BIG;
            cur /= BIG;
            sum /= BIG * BIG;
            log_scale += 2.0 * BIG.ln();
        }
    }
    (cur, prev, sum.ln() + log_scale)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Segment { a, b, value: k * h, error: ((k - g) * h).abs() }
}

/// Adaptive integral of `f` over `[points[0], points.last()]`, with the
/// initial partition given by `points` (sorted, at least two entries).
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, points: &[f64], abs_tol: f64, rel_tol: f64) -> Result<f64> {
    debug_assert!(points.windows(2).all(|w| w[0] <= w[1]));
    let mut heap: BinaryHeap<Segment> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| kronrod15(&f, w[0], w[1]))
        .collect();
    loop {
        let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        if !value.is_finite() {
            return Err(Error::NotIntegrable(format!("integral evaluated to {value}")));
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            // sum small pieces first
            let mut parts: Vec<f64> = heap.iter().map(|s| s.value).collect();
            parts.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
            return Ok(parts.iter().sum());
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureFailed { error });
        }
        let worst = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::QuadratureFailed { error });
        }
        heap.push(kronrod15(&f, worst.a, mid));
        heap.push(kronrod15(&f, mid, worst.b));
    }
}

/// Partition of `[lo, hi]` into unit-scale segments, refined at `breaks`.
pub fn partition(lo: f64, hi: f64, step: f64, breaks: &[f64]) -> Vec<f64> {
    let mut pts = Vec::new();
    let mut t = lo;
    while t < hi {
        pts.push(t);
        t += step;
    }
    pts.push(hi);
    pts.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}
