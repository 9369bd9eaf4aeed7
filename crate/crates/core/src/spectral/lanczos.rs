//! Thick-restart Lanczos for the eigenpair of largest magnitude.
//!
//! The projected matrix is kept dense: every new basis vector is
//! orthogonalized against the whole basis with two passes of classical
//! Gram–Schmidt, and the coefficients fill its column. After a restart the
//! retained Ritz vectors make it arrow-shaped, which the dense form absorbs
//! without special cases.

use serde::{Deserialize, Serialize};

use super::dense::symmetric_eigen;
use crate::distributions::{NoiseSpec, SeededStream};
use crate::matrix::{axpy, dot, norm2, SymMatrix};
use crate::{Error, Result};

/// A real symmetric linear map.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl SymmetricOperator for SymMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual target: `‖Av − λv‖ ≤ tol·|λ| + ABS_FLOOR`.
    pub tol: f64,
    /// Largest Krylov basis before a restart.
    pub max_iter: usize,
    pub max_restarts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 300, max_restarts: 20 }
    }
}

/// Absolute residual floor, so that (numerically) zero operators converge.
pub const ABS_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub lambda1: f64,
    pub v1: Vec<f64>,
    /// Operator applications.
    pub iterations: usize,
    /// `‖A v1 − λ1 v1‖₂`, recomputed explicitly.
    pub residual: f64,
    /// Set when `λ_max ≈ −λ_min` within tolerance; the positive end is returned.
    pub tie: bool,
}

const START_SEED: u64 = 0x4c41_4e43_5a4f_5321;

/// Makes the component of largest magnitude (first on ties) positive.
pub fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

struct Krylov<'a, A: SymmetricOperator + ?Sized> {
    op: &'a A,
    n: usize,
    basis: Vec<Vec<f64>>,
    /// Column-major projected matrix, `cap × cap`.
    h: Vec<f64>,
    cap: usize,
    /// Coupling of the last basis vector to `next`.
    beta: f64,
    next: Vec<f64>,
    matvecs: usize,
    fresh: SeededStream,
    fresh_count: u64,
    scale: f64,
}

impl<'a, A: SymmetricOperator + ?Sized> Krylov<'a, A> {
    fn random_vector(&mut self) -> Vec<f64> {
        let g = NoiseSpec::gaussian();
        let mut reader = self.fresh.reader(self.fresh_count, 0);
        self.fresh_count += 1;
        (0..self.n).map(|_| g.draw(reader.next_slot())).collect()
    }

    /// Orthogonalizes `w` against the basis (two passes); returns the coefficients.
    fn orthogonalize(&self, w: &mut [f64]) -> Vec<f64> {
        let mut coef = vec![0.0; self.basis.len()];
        for _ in 0..2 {
            for (c, v) in coef.iter_mut().zip(&self.basis) {
                let d = dot(v, w);
                *c += d;
                axpy(-d, v, w);
            }
        }
        coef
    }

    /// Appends `next` (or a fresh random direction after breakdown) and
    /// expands by one operator application.
    fn extend(&mut self) {
        let j = self.basis.len();
        let mut v = std::mem::take(&mut self.next);
        if self.beta <= f64::EPSILON * self.scale.max(f64::MIN_POSITIVE) * 16.0 || v.is_empty() {
            // invariant subspace found (or first step): start a new direction
            self.beta = 0.0;
            for _ in 0..3 {
                v = self.random_vector();
                self.orthogonalize(&mut v);
                let nv = norm2(&v);
                if nv > 1e-8 * (self.n as f64).sqrt() {
                    v.iter_mut().for_each(|x| *x /= nv);
                    break;
                }
            }
        }
        let mut w = vec![0.0; self.n];
        self.op.apply(&v, &mut w);
        self.matvecs += 1;
        self.basis.push(v);
        let coef = self.orthogonalize(&mut w);
        for (i, c) in coef.iter().enumerate() {
            self.h[j * self.cap + i] = *c;
            self.h[i * self.cap + j] = *c;
        }
        let b = norm2(&w);
        self.scale = self.scale.max(coef[j].abs()).max(b);
        self.beta = b;
        if b > 0.0 {
            w.iter_mut().for_each(|x| *x /= b);
        }
        self.next = w;
    }

    fn projected(&self) -> Vec<f64> {
        let m = self.basis.len();
        let mut out = vec![0.0; m * m];
        for c in 0..m {
            for r in 0..m {
                out[r * m + c] = self.h[c * self.cap + r];
            }
        }
        out
    }

    fn ritz_vector(&self, s: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (v, &c) in self.basis.iter().zip(s) {
            axpy(c, v, &mut y);
        }
        let ny = norm2(&y);
        y.iter_mut().for_each(|x| *x /= ny);
        y
    }

    /// Keeps the Ritz vectors for `keep`, followed by the residual direction.
    fn restart(&mut self, values: &[f64], vectors: &[Vec<f64>], keep: &[usize]) {
        let new_basis: Vec<Vec<f64>> = keep.iter().map(|&i| self.ritz_vector(&vectors[i])).collect();
        self.h.iter_mut().for_each(|x| *x = 0.0);
        for (a, &i) in keep.iter().enumerate() {
            self.h[a * self.cap + a] = values[i];
        }
        // `next` and `beta` carry over: the arrow row is recomputed by the
        // Gram–Schmidt coefficients of the next expansion
        self.basis = new_basis;
    }
}

/// Leading eigenpair (largest `|λ|`) of a symmetric operator.
pub fn leading_eigenpair<A: SymmetricOperator + ?Sized>(op: &A, opts: &SolverOptions) -> Result<EigenResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidSpec("solver tolerance must be positive".into()));
    }
    if opts.max_iter < 4 {
        return Err(Error::InvalidSpec("solver max_iter must be at least 4".into()));
    }
    let n = op.dim();
    if n == 0 {
        return Err(Error::InvalidSpec("empty operator".into()));
    }
    let cap = opts.max_iter.min(n);
    let mut k = Krylov {
        op,
        n,
        basis: Vec::with_capacity(cap),
        h: vec![0.0; cap * cap],
        cap,
        beta: 0.0,
        next: Vec::new(),
        matvecs: 0,
        fresh: SeededStream::new(START_SEED, n as u64),
        fresh_count: 0,
        scale: 0.0,
    };
    let check_every = (cap / 20).max(8);
    let mut restarts = 0;
    loop {
        k.extend();
        let m = k.basis.len();
        let full = m == cap;
        if !m.is_multiple_of(check_every) && !full && k.beta > 0.0 {
            continue;
        }
        let eig = symmetric_eigen(k.projected(), m)?;
        let vectors: Vec<Vec<f64>> = (0..m).map(|j| eig.vector(j)).collect();
        let res = |j: usize| k.beta * vectors[j][m - 1].abs();
        let (lo, hi) = (0, m - 1);
        let (t_lo, t_hi) = (eig.values[lo], eig.values[hi]);
        let norm = t_lo.abs().max(t_hi.abs());
        let thresh = opts.tol * norm + ABS_FLOOR;
        let (r_lo, r_hi) = (res(lo), res(hi));
        let exhausted = m == n;
        if (r_lo <= thresh && r_hi <= thresh) || exhausted {
            let tie = (t_hi.abs() - t_lo.abs()).abs() <= opts.tol * norm;
            let pick = if tie || t_hi.abs() >= t_lo.abs() { hi } else { lo };
            let lambda1 = eig.values[pick];
            let mut v1 = k.ritz_vector(&vectors[pick]);
            canonical_sign(&mut v1);
            let mut av = vec![0.0; n];
            op.apply(&v1, &mut av);
            axpy(-lambda1, &v1, &mut av);
            let residual = norm2(&av);
            return Ok(EigenResult { lambda1, v1, iterations: k.matvecs + 1, residual, tie });
        }
        if full {
            if restarts == opts.max_restarts {
                return Err(Error::NotConverged { iterations: k.matvecs, residual: r_lo.max(r_hi) });
            }
            restarts += 1;
            let keep_each = (cap / 6).max(2).min(m / 2);
            let mut keep: Vec<usize> = (0..keep_each).collect();
            keep.extend(m - keep_each..m);
            k.restart(&eig.values, &vectors, &keep);
        }
    }
}

/// `‖A‖_op = |λ₁|`.
pub fn operator_norm<A: SymmetricOperator + ?Sized>(op: &A, opts: &SolverOptions) -> Result<f64> {
    Ok(leading_eigenpair(op, opts)?.lambda1.abs())
}
