//! Dense row-major storage for the model matrices, plus the debug dump format.
//!
//! Binary dump layout (all little-endian):
//!
//! | offset | size | content                         |
//! |--------|------|---------------------------------|
//! | 0      | 8    | magic `b"NLSPIKE1"`              |
//! | 8      | 8    | rows `n` as `u64`                |
//! | 16     | 8    | cols `m` as `u64`                |
//! | 24     | 8·nm | entries, row-major, `f64`        |
//!
//! The text variant is a first line `n m` followed by `n` lines of `m`
//! whitespace-separated entries in shortest round-trip decimal form.

use std::io::{BufRead, Read, Write};

use rayon::prelude::*;

use crate::{Error, Result};

pub const DUMP_MAGIC: [u8; 8] = *b"NLSPIKE1";

/// Dense symmetric matrix. Both triangles are stored and kept bitwise equal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Fills the upper triangle `j >= i` from `entry(i, j)` and mirrors it.
    /// Rows are filled in parallel; `entry` must be a pure function of `(i, j)`.
    pub fn from_upper_fn<F>(n: usize, entry: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let mut data = vec![0.0; n * n];
        if n > 0 {
            data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                for (j, slot) in row.iter_mut().enumerate().skip(i) {
                    *slot = entry(i, j);
                }
            });
        }
        let mut m = Self { n, data };
        m.mirror_upper();
        m
    }

    /// Row-wise variant of [`Self::from_upper_fn`]: `fill(i, out)` writes
    /// entries `(i, i..n)` into `out` (length `n - i`).
    pub fn from_upper_rows<F>(n: usize, fill: F) -> Self
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        let mut data = vec![0.0; n * n];
        if n > 0 {
            data.par_chunks_mut(n).enumerate().for_each(|(i, row)| fill(i, &mut row[i..]));
        }
        let mut m = Self { n, data };
        m.mirror_upper();
        m
    }

    /// Accepts a full row-major matrix whose asymmetry is at most `1e-12`
    /// (relative to its largest entry); the upper triangle wins.
    pub fn from_dense(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: data.len() });
        }
        let scale = data.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (data[i * n + j] - data[j * n + i]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidSpec(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        let mut m = Self { n, data };
        m.mirror_upper();
        Ok(m)
    }

    fn mirror_upper(&mut self) {
        const B: usize = 64;
        let n = self.n;
        for ib in (0..n).step_by(B) {
            for jb in (0..=ib).step_by(B) {
                for i in ib..(ib + B).min(n) {
                    for j in jb..(jb + B).min(i) {
                        self.data[i * n + j] = self.data[j * n + i];
                    }
                }
            }
        }
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

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// New matrix with entries `g(i, j, self[i][j])`, evaluated on the upper
    /// triangle and mirrored.
    pub fn map_upper<G>(&self, g: G) -> Self
    where
        G: Fn(usize, usize, f64) -> f64 + Sync,
    {
        Self::from_upper_fn(self.n, |i, j| g(i, j, self.get(i, j)))
    }

    /// In-place variant of [`Self::map_upper`].
    pub fn transform_upper<G>(&mut self, g: G)
    where
        G: Fn(usize, usize, f64) -> f64 + Sync,
    {
        let n = self.n;
        if n > 0 {
            self.data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                for (j, slot) in row.iter_mut().enumerate().skip(i) {
                    *slot = g(i, j, *slot);
                }
            });
        }
        self.mirror_upper();
    }

    /// `y = M x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        if self.n == 0 {
            return;
        }
        y.par_iter_mut()
            .zip(self.data.par_chunks(self.n))
            .for_each(|(yi, row)| *yi = dot(row, x));
    }

    pub fn sub_assign(&mut self, other: &SymMatrix) -> Result<()> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a -= b);
        Ok(())
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    }

    /// Bitwise check of `M == Mᵀ`.
    pub fn is_exactly_symmetric(&self) -> bool {
        let n = self.n;
        (0..n).all(|i| (0..i).all(|j| self.data[i * n + j].to_bits() == self.data[j * n + i].to_bits()))
    }

    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_binary(w, self.n, self.n, &self.data)
    }

    pub fn write_text<W: Write>(&self, w: W) -> Result<()> {
        write_text(w, self.n, self.n, &self.data)
    }
}

/// Dense `rows × cols` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RectMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RectMatrix {
    pub fn from_fn<F>(rows: usize, cols: usize, entry: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let mut data = vec![0.0; rows * cols];
        if cols > 0 {
            data.par_chunks_mut(cols).enumerate().for_each(|(i, row)| {
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot = entry(i, j);
                }
            });
        }
        Self { rows, cols, data }
    }

    pub fn from_rows<F>(rows: usize, cols: usize, fill: F) -> Self
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        let mut data = vec![0.0; rows * cols];
        if cols > 0 {
            data.par_chunks_mut(cols).enumerate().for_each(|(i, row)| fill(i, row));
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(self.row(i), x);
        }
    }

    /// `y = Aᵀ x`.
    pub fn matvec_t(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.rows);
        assert_eq!(y.len(), self.cols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            axpy(xi, self.row(i), y);
        }
    }

    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_binary(w, self.rows, self.cols, &self.data)
    }

    pub fn write_text<W: Write>(&self, w: W) -> Result<()> {
        write_text(w, self.rows, self.cols, &self.data)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorize without reassociating
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn write_binary<W: Write>(mut w: W, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    w.write_all(&DUMP_MAGIC)?;
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(data.len() * 8);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a binary dump, returning `(rows, cols, row-major data)`.
pub fn read_binary<R: Read>(mut r: R) -> Result<(usize, usize, Vec<f64>)> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    if word != DUMP_MAGIC {
        return Err(Error::InvalidSpec("bad dump magic".into()));
    }
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        r.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    Ok((rows, cols, data))
}

pub fn write_text<W: Write>(mut w: W, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    writeln!(w, "{rows} {cols}")?;
    for i in 0..rows {
        let line: Vec<String> = data[i * cols..(i + 1) * cols].iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_text<R: BufRead>(r: R) -> Result<(usize, usize, Vec<f64>)> {
    let bad = |msg: &str| Error::InvalidSpec(format!("text dump: {msg}"));
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| bad("empty"))??;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("bad header")))
        .collect::<Result<_>>()?;
    if dims.len() != 2 {
        return Err(bad("header must be `rows cols`"));
    }
    let (rows, cols) = (dims[0], dims[1]);
    let mut data = Vec::with_capacity(rows * cols);
    for line in lines.take(rows) {
        for tok in line?.split_whitespace() {
            data.push(tok.parse::<f64>().map_err(|_| bad("bad entry"))?);
        }
    }
    if data.len() != rows * cols {
        return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
    }
    Ok((rows, cols, data))
}
