//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! implicit-shift QL.
//!
//! The reduction works on the lower triangle only and fuses the rank-2 update
//! of step `k − 1` with the matrix-vector product of step `k`, so each step
//! makes a single pass over the trailing submatrix.

use crate::{Error, Result};

struct Tridiagonal {
    d: Vec<f64>,
    /// `e[i]` couples `d[i]` and `d[i + 1]`; `e[n − 1] = 0`.
    e: Vec<f64>,
    /// `(start index, v, β)` for each reflector `I − β v vᵀ`, when requested.
    reflectors: Vec<(usize, Vec<f64>, f64)>,
}

fn tridiagonalize(mut a: Vec<f64>, n: usize, keep_reflectors: bool) -> Tridiagonal {
    debug_assert_eq!(a.len(), n * n);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut reflectors = Vec::new();
    // pending symmetric update A -= v wᵀ + w vᵀ on indices >= start
    let mut pending: Option<(usize, Vec<f64>, Vec<f64>)> = None;

    for k in 0..n.saturating_sub(2) {
        if let Some((ps, pv, pw)) = &pending {
            let (vk, wk) = (pv[k - ps], pw[k - ps]);
            for i in k..n {
                a[i * n + k] -= pv[i - ps] * wk + pw[i - ps] * vk;
            }
        }
        d[k] = a[k * n + k];

        let len = n - k - 1;
        let mut v: Vec<f64> = (k + 1..n).map(|i| a[i * n + k]).collect();
        let sigma = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (alpha, beta) = if sigma == 0.0 {
            (0.0, 0.0)
        } else {
            let x0 = v[0];
            let alpha = if x0 >= 0.0 { -sigma } else { sigma };
            v[0] -= alpha;
            (alpha, 1.0 / (sigma * (sigma + x0.abs())))
        };
        e[k] = alpha;

        // one pass: finish the pending update on the trailing block and form A v
        let mut p = vec![0.0; len];
        let offset = pending.as_ref().map(|(ps, _, _)| k + 1 - ps);
        for ii in 0..len {
            let i = k + 1 + ii;
            let row = &mut a[i * n + k + 1..=i * n + i];
            let vi = v[ii];
            let mut acc = 0.0;
            if let (Some(o), Some((_, pv, pw))) = (offset, &pending) {
                let (pvi, pwi) = (pv[ii + o], pw[ii + o]);
                let pvs = &pv[o..o + ii + 1];
                let pws = &pw[o..o + ii + 1];
                for jj in 0..ii {
                    let r = row[jj] - (pvi * pws[jj] + pwi * pvs[jj]);
                    row[jj] = r;
                    acc += r * v[jj];
                    p[jj] += r * vi;
                }
                row[ii] -= pvi * pws[ii] + pwi * pvs[ii];
            } else {
                for jj in 0..ii {
                    let r = row[jj];
                    acc += r * v[jj];
                    p[jj] += r * vi;
                }
            }
            p[ii] += acc + row[ii] * vi;
        }

        if beta == 0.0 {
            pending = None;
        } else {
            p.iter_mut().for_each(|x| *x *= beta);
            let kk = 0.5 * beta * p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            let w: Vec<f64> = p.iter().zip(&v).map(|(pi, vi)| pi - kk * vi).collect();
            if keep_reflectors {
                reflectors.push((k + 1, v.clone(), beta));
            }
            pending = Some((k + 1, v, w));
        }
    }

    let k0 = n.saturating_sub(2);
    if let Some((ps, pv, pw)) = &pending {
        for i in k0..n {
            for j in k0..=i {
                a[i * n + j] -= pv[i - ps] * pw[j - ps] + pw[i - ps] * pv[j - ps];
            }
        }
    }
    if n >= 1 {
        d[n - 1] = a[(n - 1) * n + n - 1];
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2) * n + n - 2];
        e[n - 2] = a[(n - 1) * n + n - 2];
    }
    Tridiagonal { d, e, reflectors }
}

/// Implicit-shift QL on a symmetric tridiagonal matrix. When `z` is given
/// (`n × n` row-major, usually the identity) its columns receive the
/// eigenvectors. Eigenvalues are left unsorted.
pub(crate) fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    // absolute floor for deflation: zero diagonal blocks never satisfy the
    // relative test alone
    let tnorm = d.iter().zip(e.iter()).fold(0.0f64, |a, (x, y)| a.max(x.abs() + y.abs()));
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m].abs() <= f64::EPSILON * tnorm {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 90 {
                return Err(Error::NotConverged { iterations: iter, residual: e[l].abs() });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for row in z.chunks_mut(n) {
                        let t = row[i + 1];
                        row[i + 1] = s * row[i] + c * t;
                        row[i] = c * row[i] - s * t;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// All eigenvalues of the `n × n` symmetric row-major matrix `a`, ascending.
pub fn symmetric_eigenvalues(a: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, got: a.len() });
    }
    let Tridiagonal { mut d, mut e, .. } = tridiagonalize(a, n, false);
    tridiagonal_ql(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Eigenvalues (ascending) and eigenvectors of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// `n × n` row-major; column `j` is the eigenvector of `values[j]`.
    pub vectors: Vec<f64>,
    n: usize,
}

impl SymmetricEigen {
    /// Eigenvector `j` as an owned vector.
    pub fn vector(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|r| self.vectors[r * self.n + j]).collect()
    }

    /// Component `r` of eigenvector `j`.
    pub fn component(&self, r: usize, j: usize) -> f64 {
        self.vectors[r * self.n + j]
    }
}

/// Full eigendecomposition, intended for small matrices.
pub fn symmetric_eigen(a: Vec<f64>, n: usize) -> Result<SymmetricEigen> {
    if a.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, got: a.len() });
    }
    let Tridiagonal { mut d, mut e, reflectors } = tridiagonalize(a, n, true);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tridiagonal_ql(&mut d, &mut e, Some(&mut z))?;
    // back-transform: X = H_0 H_1 ... Z
    let mut s = vec![0.0; n];
    for (start, v, beta) in reflectors.iter().rev() {
        s.iter_mut().for_each(|x| *x = 0.0);
        for (r, vr) in v.iter().enumerate() {
            let row = &z[(start + r) * n..(start + r + 1) * n];
            s.iter_mut().zip(row).for_each(|(acc, zi)| *acc += vr * zi);
        }
        for (r, vr) in v.iter().enumerate() {
            let row = &mut z[(start + r) * n..(start + r + 1) * n];
            let f = beta * vr;
            row.iter_mut().zip(&s).for_each(|(zi, si)| *zi -= f * si);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = vec![0.0; n * n];
    for r in 0..n {
        for (c, &src) in order.iter().enumerate() {
            vectors[r * n + c] = z[r * n + src];
        }
    }
    Ok(SymmetricEigen { values, vectors, n })
}
