use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::hermite::{hermite_polynomial, HERMITE_CAP};
use crate::{Error, Result};

/// Marker for "derivatives of every order are available".
pub const UNBOUNDED_ORDER: usize = usize::MAX;

/// The entrywise non-linearity `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearitySpec {
    Identity,
    Abs,
    /// `sign(0) = 0`.
    Sign,
    Relu,
    Tanh,
    /// Probabilists' Hermite polynomial `He_k`.
    Hermite(usize),
    /// Monomial coefficients, lowest degree first.
    Polynomial(Vec<f64>),
    /// `x ↦ inner(scale·x + shift)`.
    ShiftedComposite { inner: Box<NonlinearitySpec>, shift: f64, scale: f64 },
}

fn falling_factorial(n: usize, k: usize) -> f64 {
    (n + 1 - k..=n).map(|j| j as f64).product()
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Polynomial `P_k` with `d^k/dx^k tanh(x) = P_k(tanh x)`.
fn tanh_derivative_poly(k: usize) -> Vec<f64> {
    let mut p = vec![0.0, 1.0];
    for _ in 0..k {
        // P' (t) · (1 − t²)
        let dp: Vec<f64> = p.iter().enumerate().skip(1).map(|(d, c)| d as f64 * c).collect();
        let mut next = vec![0.0; dp.len() + 2];
        for (d, c) in dp.iter().enumerate() {
            next[d] += c;
            next[d + 2] -= c;
        }
        p = next;
    }
    p
}

impl NonlinearitySpec {
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        let f = Self::Polynomial(coeffs);
        f.validate()?;
        Ok(f)
    }

    /// `x³ − 3x`, the cubic used in the `k★ = 3` experiments.
    pub fn cubic_hermite() -> Self {
        Self::Polynomial(vec![0.0, -3.0, 0.0, 1.0])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Hermite(k) if *k > HERMITE_CAP => Err(Error::OrderTooHigh { order: *k, cap: HERMITE_CAP }),
            Self::Polynomial(c) if c.is_empty() => Err(Error::InvalidSpec("empty polynomial".into())),
            Self::Polynomial(c) if c.iter().any(|v| !v.is_finite()) => {
                Err(Error::InvalidSpec("polynomial coefficients must be finite".into()))
            }
            Self::ShiftedComposite { inner, shift, scale } => {
                if !shift.is_finite() || !scale.is_finite() || *scale == 0.0 {
                    return Err(Error::InvalidSpec("shift must be finite and scale finite, nonzero".into()));
                }
                inner.validate()
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Abs => x.abs(),
            Self::Sign => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Self::Relu => x.max(0.0),
            Self::Tanh => x.tanh(),
            Self::Hermite(k) => hermite_polynomial(*k, x).unwrap_or(f64::NAN),
            Self::Polynomial(c) => horner(c, x),
            Self::ShiftedComposite { inner, shift, scale } => inner.eval(scale * x + shift),
        }
    }

    /// Highest `k` for which [`Self::derivative`] is defined everywhere.
    pub fn derivative_order_available(&self) -> usize {
        match self {
            Self::Abs | Self::Sign | Self::Relu => 0,
            Self::ShiftedComposite { inner, .. } => inner.derivative_order_available(),
            _ => UNBOUNDED_ORDER,
        }
    }

    /// `f^{(k)}(x)`, when available.
    pub fn derivative(&self, k: usize, x: f64) -> Result<f64> {
        if k == 0 {
            return Ok(self.eval(x));
        }
        if k > self.derivative_order_available() {
            return Err(Error::InvalidSpec(format!("`{self}` has no derivative of order {k}")));
        }
        Ok(match self {
            Self::Identity => {
                if k == 1 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Tanh => horner(&tanh_derivative_poly(k), x.tanh()),
            Self::Hermite(j) => {
                if k > *j {
                    0.0
                } else {
                    falling_factorial(*j, k) * hermite_polynomial(j - k, x)?
                }
            }
            Self::Polynomial(c) => {
                if k >= c.len() {
                    0.0
                } else {
                    let d: Vec<f64> =
                        c.iter().enumerate().skip(k).map(|(i, ci)| ci * falling_factorial(i, k)).collect();
                    horner(&d, x)
                }
            }
            Self::ShiftedComposite { inner, shift, scale } => scale.powi(k as i32) * inner.derivative(k, scale * x + shift)?,
            Self::Abs | Self::Sign | Self::Relu => unreachable!("order checked above"),
        })
    }

    /// Points where `f` is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Abs | Self::Sign | Self::Relu => vec![0.0],
            Self::ShiftedComposite { inner, shift, scale } => {
                inner.breakpoints().iter().map(|b| (b - shift) / scale).collect()
            }
            _ => Vec::new(),
        }
    }

    /// True when `f` is constant on the whole line.
    pub fn is_constant(&self) -> bool {
        match self {
            Self::Polynomial(c) => c.iter().skip(1).all(|v| *v == 0.0),
            Self::Hermite(0) => true,
            Self::ShiftedComposite { inner, .. } => inner.is_constant(),
            _ => false,
        }
    }

    pub fn is_even(&self) -> bool {
        match self {
            Self::Abs => true,
            Self::Hermite(k) => k % 2 == 0,
            Self::Polynomial(c) => c.iter().skip(1).step_by(2).all(|v| *v == 0.0),
            _ => false,
        }
    }
}

impl fmt::Display for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => f.write_str("identity"),
            Self::Abs => f.write_str("abs"),
            Self::Sign => f.write_str("sign"),
            Self::Relu => f.write_str("relu"),
            Self::Tanh => f.write_str("tanh"),
            Self::Hermite(k) => write!(f, "hermite:{k}"),
            Self::Polynomial(c) => {
                let parts: Vec<String> = c.iter().map(|v| format!("{v}")).collect();
                write!(f, "poly:{}", parts.join(","))
            }
            Self::ShiftedComposite { inner, shift, scale } => write!(f, "shifted:{shift}:{scale}:{inner}"),
        }
    }
}

impl FromStr for NonlinearitySpec {
    type Err = Error;

    /// Registry names: `identity`, `abs`, `sign`, `relu`, `tanh`, `hermite:<k>`,
    /// `poly:<c0>,<c1>,...`, `cubic` (`x³ − 3x`) and
    /// `shifted:<shift>:<scale>:<inner>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::InvalidSpec(format!("bad number `{t}`")));
        let f = if let Some(rest) = s.strip_prefix("hermite:") {
            Self::Hermite(rest.trim().parse().map_err(|_| Error::InvalidSpec(format!("bad degree `{rest}`")))?)
        } else if let Some(rest) = s.strip_prefix("poly:") {
            Self::Polynomial(rest.split(',').map(num).collect::<Result<_>>()?)
        } else if let Some(rest) = s.strip_prefix("shifted:") {
            let mut parts = rest.splitn(3, ':');
            let (shift, scale, inner) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (num(a)?, num(b)?, c.parse::<Self>()?),
                _ => return Err(Error::InvalidSpec("expected shifted:<shift>:<scale>:<inner>".into())),
            };
            Self::ShiftedComposite { inner: Box::new(inner), shift, scale }
        } else {
            match s.to_ascii_lowercase().as_str() {
                "identity" | "id" | "linear" => Self::Identity,
                "abs" => Self::Abs,
                "sign" => Self::Sign,
                "relu" => Self::Relu,
                "tanh" => Self::Tanh,
                "cubic" => Self::cubic_hermite(),
                other => return Err(Error::InvalidSpec(format!("unknown non-linearity `{other}`"))),
            }
        };
        f.validate()?;
        Ok(f)
    }
}
