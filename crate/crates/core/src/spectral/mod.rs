//! Leading eigenpairs, operator norms, overlaps and bulk-spectrum summaries.

pub mod dense;
mod lanczos;

use serde::{Deserialize, Serialize};

pub use dense::{symmetric_eigen, symmetric_eigenvalues, SymmetricEigen};
pub use lanczos::{canonical_sign, leading_eigenpair, operator_norm, EigenResult, SolverOptions, SymmetricOperator, ABS_FLOOR};

use crate::matrix::{dot, SymMatrix};
use crate::{Error, Result};

/// Largest size accepted by [`full_spectrum`].
pub const DENSE_CAP: usize = 4096;

/// All eigenvalues in ascending order.
pub fn full_spectrum(m: &SymMatrix) -> Result<Vec<f64>> {
    full_spectrum_capped(m, DENSE_CAP)
}

pub fn full_spectrum_capped(m: &SymMatrix, cap: usize) -> Result<Vec<f64>> {
    if m.n() > cap {
        return Err(Error::TooLarge { n: m.n(), cap });
    }
    symmetric_eigenvalues(m.as_slice().to_vec(), m.n())
}

/// `x^{⊙k}`.
pub fn hadamard_power(x: &[f64], k: usize) -> Vec<f64> {
    x.iter().map(|v| v.powi(k as i32)).collect()
}

/// `⟨v, x^{⊙k}/‖x^{⊙k}‖⟩²`.
pub fn overlap(v: &[f64], x: &[f64], k: usize) -> Result<f64> {
    if v.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: v.len() });
    }
    if k == 0 {
        return Err(Error::InvalidSpec("overlap power must be at least 1".into()));
    }
    overlap_with(v, &hadamard_power(x, k))
}

/// `⟨v, t/‖t‖⟩²` for an arbitrary nonzero target.
pub fn overlap_with(v: &[f64], target: &[f64]) -> Result<f64> {
    let tt = dot(target, target);
    if !(tt > 0.0) {
        return Err(Error::InvalidSpec("overlap target vector is zero".into()));
    }
    let vv = dot(v, v);
    let c = dot(v, target);
    Ok((c * c / (tt * vv)).clamp(0.0, 1.0))
}

/// Semicircle density of radius `2σ`.
pub fn semicircle_density(x: f64, sigma: f64) -> f64 {
    let r2 = 4.0 * sigma * sigma;
    if x * x >= r2 {
        0.0
    } else {
        (r2 - x * x).sqrt() / (2.0 * std::f64::consts::PI * sigma * sigma)
    }
}

/// Semicircle distribution function of radius `2σ`.
pub fn semicircle_cdf(x: f64, sigma: f64) -> f64 {
    let r = 2.0 * sigma;
    if x <= -r {
        return 0.0;
    }
    if x >= r {
        return 1.0;
    }
    let pi = std::f64::consts::PI;
    0.5 + x * (r * r - x * x).sqrt() / (2.0 * pi * sigma * sigma * 2.0) + (x / r).asin() / pi
}

/// Kolmogorov–Smirnov distance between the empirical law of `eigs` and the
/// semicircle of radius `2σ`.
pub fn ks_semicircle(eigs: &[f64], sigma: f64) -> f64 {
    let mut s = eigs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = semicircle_cdf(x, sigma);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
    /// `count / (n · width)`.
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumHistogram {
    pub bins: Vec<HistogramBin>,
    pub n: usize,
}

impl SpectrumHistogram {
    /// Equal-width bins over `[lo, hi]`; values outside are clamped into the
    /// end bins, so counts always sum to `n`.
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidSpec(format!("bad histogram range [{lo}, {hi}] with {bins} bins")));
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &v in values {
            let b = ((v - lo) / width).floor();
            let b = if b.is_nan() || b < 0.0 { 0 } else { (b as usize).min(bins - 1) };
            counts[b] += 1;
        }
        let n = values.len();
        let bins = counts
            .into_iter()
            .enumerate()
            .map(|(i, count)| {
                let bin_left = lo + i as f64 * width;
                let bin_right = if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width };
                let density = if n == 0 { 0.0 } else { count as f64 / (n as f64 * (bin_right - bin_left)) };
                HistogramBin { bin_left, bin_right, count, density }
            })
            .collect();
        Ok(Self { bins, n })
    }

    /// Range `[min(−2σ, λ_min), max(2σ, λ_max)]`.
    pub fn around_semicircle(values: &[f64], sigma: f64, bins: usize) -> Result<Self> {
        let lo = values.iter().copied().fold(-2.0 * sigma, f64::min);
        let hi = values.iter().copied().fold(2.0 * sigma, f64::max);
        Self::new(values, lo, hi, bins)
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }
}
