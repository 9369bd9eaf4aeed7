//! Signal and noise laws: seeded sampling, densities and moments.
//!
//! Every noise law is standardized to mean 0 and variance 1. Signal laws are
//! used as given (the built-in ones happen to have unit variance as well).

mod stream;

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use stream::{mix64, unit_open_left, unit_open_right, SeededStream, SlotReader};

use crate::coefficients::hermite_polynomial;
use crate::matrix::{RectMatrix, SymMatrix};
use crate::{Error, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Highest density-derivative order served by [`density_derivative`].
pub const MAX_DENSITY_ORDER: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    UniformSym,
    Rademacher,
    Laplace,
}

/// How far the noise density can be differentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityRegularity {
    /// Density with derivatives of every order (gaussian).
    Smooth,
    /// Density smooth away from finitely many kinks (laplace at 0).
    PiecewiseSmooth,
    /// Density with jumps (uniform).
    Discontinuous,
    /// No density (rademacher).
    Atomic,
}

/// The law `μ_Z` of the noise entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
}

impl NoiseSpec {
    pub const fn new(kind: NoiseKind) -> Self {
        Self { kind }
    }

    pub const fn gaussian() -> Self {
        Self::new(NoiseKind::Gaussian)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::UniformSym => "uniform_sym",
            NoiseKind::Rademacher => "rademacher",
            NoiseKind::Laplace => "laplace",
        }
    }

    pub fn regularity(&self) -> DensityRegularity {
        match self.kind {
            NoiseKind::Gaussian => DensityRegularity::Smooth,
            NoiseKind::Laplace => DensityRegularity::PiecewiseSmooth,
            NoiseKind::UniformSym => DensityRegularity::Discontinuous,
            NoiseKind::Rademacher => DensityRegularity::Atomic,
        }
    }

    pub fn has_smooth_density(&self) -> bool {
        self.regularity() == DensityRegularity::Smooth
    }

    /// Exponent `α` of the declared tail bound `P(|Z| > M) ≤ C·exp(−c·M^α)`.
    pub fn tail_exponent(&self) -> f64 {
        match self.kind {
            NoiseKind::Laplace => 1.0,
            _ => 2.0,
        }
    }

    /// The declared tail bound `C·exp(−c·M^α)`.
    pub fn tail_bound(&self, m: f64) -> f64 {
        match self.kind {
            // standardized laplace: P(|Z| > M) = exp(−√2 M) exactly
            NoiseKind::Laplace => (-SQRT_2 * m).exp(),
            // gaussian Chernoff bound; bounded kinds are covered by the same envelope
            _ => 2.0 * (-0.5 * m * m).exp(),
        }
    }

    /// Finite integration window carrying all but a negligible mass.
    pub(crate) fn integration_window(&self) -> (f64, f64) {
        match self.kind {
            NoiseKind::Gaussian => (-40.0, 40.0),
            NoiseKind::Laplace => (-60.0, 60.0),
            NoiseKind::UniformSym => (-SQRT_3, SQRT_3),
            NoiseKind::Rademacher => (-1.0, 1.0),
        }
    }

    /// Points where the density is not smooth.
    pub(crate) fn density_kinks(&self) -> &'static [f64] {
        match self.kind {
            NoiseKind::Laplace => &[0.0],
            _ => &[],
        }
    }

    /// Maps the two raw words of one slot to a standardized draw.
    #[inline]
    pub fn draw(&self, (a, b): (u64, u64)) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => {
                let r = (-2.0 * unit_open_left(a).ln()).sqrt();
                r * (2.0 * PI * unit_open_right(b)).cos()
            }
            NoiseKind::UniformSym => SQRT_3 * (2.0 * unit_open_right(a) - 1.0),
            NoiseKind::Rademacher => {
                if a >> 63 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseKind::Laplace => {
                let mag = -unit_open_left(a).ln() / SQRT_2;
                if b >> 63 == 1 {
                    mag
                } else {
                    -mag
                }
            }
        }
    }

    /// Probability density `w_Z(x)`; `None` for atomic laws.
    pub fn density(&self, x: f64) -> Option<f64> {
        match self.kind {
            NoiseKind::Gaussian => Some(INV_SQRT_2PI * (-0.5 * x * x).exp()),
            NoiseKind::Laplace => Some((-SQRT_2 * x.abs()).exp() / SQRT_2),
            NoiseKind::UniformSym => Some(if x.abs() <= SQRT_3 { 0.5 / SQRT_3 } else { 0.0 }),
            NoiseKind::Rademacher => None,
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => NoiseKind::Gaussian,
            "uniform" | "uniform_sym" => NoiseKind::UniformSym,
            "rademacher" => NoiseKind::Rademacher,
            "laplace" => NoiseKind::Laplace,
            other => return Err(Error::InvalidSpec(format!("unknown noise law `{other}`"))),
        };
        Ok(Self::new(kind))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Gaussian,
    Rademacher,
    UniformSym,
    UserDiscrete { support: Vec<f64>, weights: Vec<f64> },
}

/// The law `π_X` of the signal entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    kind: SignalKind,
    /// Cumulative normalized weights, only for discrete laws.
    #[serde(skip)]
    cdf: Vec<f64>,
}

impl SignalSpec {
    pub fn gaussian() -> Self {
        Self { kind: SignalKind::Gaussian, cdf: Vec::new() }
    }

    pub fn rademacher() -> Self {
        Self { kind: SignalKind::Rademacher, cdf: Vec::new() }
    }

    pub fn uniform_sym() -> Self {
        Self { kind: SignalKind::UniformSym, cdf: Vec::new() }
    }

    /// Finite discrete law. Weights are normalized; the law must not be `δ_0`.
    pub fn discrete(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidSpec("discrete signal law with empty support".into()));
        }
        if support.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: support.len(), got: weights.len() });
        }
        if support.iter().chain(&weights).any(|v| !v.is_finite()) || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidSpec("discrete weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidSpec("discrete weights sum to zero".into()));
        }
        if !support.iter().zip(&weights).any(|(&s, &w)| s != 0.0 && w > 0.0) {
            return Err(Error::InvalidSpec("signal law is a point mass at 0".into()));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self { kind: SignalKind::UserDiscrete { support, weights }, cdf })
    }

    pub fn kind(&self) -> &SignalKind {
        &self.kind
    }

    pub fn name(&self) -> String {
        match &self.kind {
            SignalKind::Gaussian => "gaussian".into(),
            SignalKind::Rademacher => "rademacher".into(),
            SignalKind::UniformSym => "uniform_sym".into(),
            SignalKind::UserDiscrete { support, weights } => {
                let parts: Vec<String> = support.iter().zip(weights).map(|(s, w)| format!("{s}={w}")).collect();
                format!("discrete:{}", parts.join(","))
            }
        }
    }

    #[inline]
    pub fn draw(&self, (a, b): (u64, u64)) -> f64 {
        match &self.kind {
            SignalKind::Gaussian => NoiseSpec::gaussian().draw((a, b)),
            SignalKind::Rademacher => NoiseSpec::new(NoiseKind::Rademacher).draw((a, b)),
            SignalKind::UniformSym => NoiseSpec::new(NoiseKind::UniformSym).draw((a, b)),
            SignalKind::UserDiscrete { support, .. } => {
                let u = unit_open_right(a);
                let idx = self.cdf.partition_point(|&c| c <= u).min(support.len() - 1);
                support[idx]
            }
        }
    }
}

impl fmt::Display for SignalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for SignalSpec {
    type Err = Error;

    /// `gaussian`, `rademacher`, `uniform_sym`, or `discrete:v1=w1,v2=w2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("discrete:") {
            let mut support = Vec::new();
            let mut weights = Vec::new();
            for pair in rest.split(',') {
                let (v, w) = pair
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidSpec(format!("expected value=weight, got `{pair}`")))?;
                let parse = |t: &str| {
                    t.trim().parse::<f64>().map_err(|_| Error::InvalidSpec(format!("bad number `{t}`")))
                };
                support.push(parse(v)?);
                weights.push(parse(w)?);
            }
            return Self::discrete(support, weights);
        }
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Self::gaussian()),
            "rademacher" => Ok(Self::rademacher()),
            "uniform" | "uniform_sym" => Ok(Self::uniform_sym()),
            other => Err(Error::InvalidSpec(format!("unknown signal law `{other}`"))),
        }
    }
}

/// Laws with a moment table.
pub trait Moments {
    /// `E[X^k]`.
    fn moment(&self, k: usize) -> f64;
}

fn double_factorial_odd(k: usize) -> f64 {
    // (k-1)!! for even k
    (1..k).step_by(2).map(|j| j as f64).product()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

impl Moments for NoiseSpec {
    fn moment(&self, k: usize) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        match self.kind {
            NoiseKind::Gaussian => double_factorial_odd(k),
            NoiseKind::UniformSym => SQRT_3.powi(k as i32) / (k as f64 + 1.0),
            NoiseKind::Rademacher => 1.0,
            NoiseKind::Laplace => factorial(k) / 2f64.powi(k as i32 / 2),
        }
    }
}

impl Moments for SignalSpec {
    fn moment(&self, k: usize) -> f64 {
        match &self.kind {
            SignalKind::Gaussian => NoiseSpec::gaussian().moment(k),
            SignalKind::Rademacher => NoiseSpec::new(NoiseKind::Rademacher).moment(k),
            SignalKind::UniformSym => NoiseSpec::new(NoiseKind::UniformSym).moment(k),
            SignalKind::UserDiscrete { support, weights } => {
                support.iter().zip(weights).map(|(s, w)| w * s.powi(k as i32)).sum()
            }
        }
    }
}

/// `k`-th moment of a signal or noise law.
pub fn moment<L: Moments + ?Sized>(law: &L, k: usize) -> f64 {
    law.moment(k)
}

/// `n` iid draws from `π_X`; entry `i` lives in slot `(0, i)` of `stream`.
pub fn sample_signal(spec: &SignalSpec, n: usize, stream: SeededStream) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidSpec("signal length must be at least 1".into()));
    }
    if let SignalKind::UserDiscrete { support, .. } = &spec.kind {
        if support.is_empty() {
            return Err(Error::InvalidSpec("discrete signal law with empty support".into()));
        }
    }
    let mut reader = stream.reader(0, 0);
    Ok((0..n).map(|_| spec.draw(reader.next_slot())).collect())
}

/// Symmetric noise matrix; entry `(i, j)` with `i <= j` lives in slot `(i, j)`.
pub fn sample_noise_symmetric(spec: &NoiseSpec, n: usize, stream: SeededStream) -> SymMatrix {
    SymMatrix::from_upper_rows(n, |i, out| {
        let mut reader = stream.reader(i as u64, i as u64);
        out.iter_mut().for_each(|v| *v = spec.draw(reader.next_slot()));
    })
}

/// Non-symmetric `rows × cols` noise matrix with iid entries.
pub fn sample_noise_rectangular(spec: &NoiseSpec, rows: usize, cols: usize, stream: SeededStream) -> RectMatrix {
    RectMatrix::from_rows(rows, cols, |i, out| {
        let mut reader = stream.reader(i as u64, 0);
        out.iter_mut().for_each(|v| *v = spec.draw(reader.next_slot()));
    })
}

/// `w_Z^{(k)}(x)`.
///
/// Gaussian noise uses the Stein form `(−1)^k He_k(x) w_G(x)`. Laplace noise
/// returns the almost-everywhere derivative (best-effort: the distributional
/// derivative also has point masses at the kink). Other laws are rejected for
/// `k ≥ 1`.
pub fn density_derivative(spec: &NoiseSpec, k: usize, x: f64) -> Result<f64> {
    if k > MAX_DENSITY_ORDER {
        return Err(Error::OrderTooHigh { order: k, cap: MAX_DENSITY_ORDER });
    }
    match (spec.kind, k) {
        (NoiseKind::Rademacher, _) => Err(Error::NoSmoothDensity(spec.name())),
        (NoiseKind::UniformSym, 0) => Ok(spec.density(x).unwrap_or(0.0)),
        (NoiseKind::UniformSym, _) => Err(Error::NoSmoothDensity(spec.name())),
        (NoiseKind::Gaussian, _) => {
            let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
            Ok(sign * hermite_polynomial(k, x)? * INV_SQRT_2PI * (-0.5 * x * x).exp())
        }
        (NoiseKind::Laplace, _) => {
            let w = (-SQRT_2 * x.abs()).exp() / SQRT_2;
            let slope = -SQRT_2 * if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 };
            Ok(if k == 0 { w } else { slope.powi(k as i32) * w })
        }
    }
}
