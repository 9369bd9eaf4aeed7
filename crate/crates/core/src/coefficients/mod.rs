//! Generalized information coefficients `ϑ_k(f)`, the information index `k★`
//! and the effective noise scale `σ`.
//!
//! Two routes compute `ϑ_k(f)`:
//! - derivative quadrature, `E f^{(k)}(Z)`, when `f` has `k` derivatives;
//! - density quadrature, `(−1)^k ∫ f(x) w_Z^{(k)}(x) dx`, when the noise
//!   density is smooth. This is the definition used for `abs`, `sign`, `relu`.
//!
//! Gaussian expectations of smooth integrands use a 200-node Gauss–Hermite
//! rule; everything else uses adaptive Gauss–Kronrod split at the kinks.

mod hermite;
mod nonlinearity;

use serde::{Deserialize, Serialize};

pub use hermite::{hermite_coefficients, hermite_polynomial, HERMITE_CAP};
pub use nonlinearity::{NonlinearitySpec, UNBOUNDED_ORDER};

use crate::distributions::{density_derivative, DensityRegularity, NoiseKind, NoiseSpec};
use crate::quadrature::{integrate_adaptive, partition, GaussHermite, ABS_TOL, REL_TOL};
use crate::{Error, Result};

pub const DEFAULT_K_MAX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientMethod {
    DerivativeQuadrature,
    DensityQuadrature,
}

/// All coefficients up to `k_max`, the detected index and `σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub theta: Vec<f64>,
    /// `None` when every `|ϑ_k| ≤ tol` for `1 ≤ k ≤ k_max`.
    pub k_star: Option<usize>,
    pub sigma: f64,
    pub method: CoefficientMethod,
    #[serde(rename = "tol")]
    pub tolerance_used: f64,
    #[serde(skip)]
    pub theta0_f_squared: f64,
    /// Set when some coefficient relied on an almost-everywhere density derivative.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub best_effort: bool,
}

impl CoefficientReport {
    pub fn k_star(&self) -> Result<usize> {
        self.k_star.ok_or(Error::IndexNotDetected { k_max: self.theta.len().saturating_sub(1) })
    }

    /// `ϑ_{k★}`.
    pub fn theta_star(&self) -> Result<f64> {
        Ok(self.theta[self.k_star()?])
    }
}

/// `E g(Z)` for a function that is smooth away from `breaks`.
pub(crate) fn expectation<G: Fn(f64) -> f64>(g: G, noise: &NoiseSpec, breaks: &[f64]) -> Result<f64> {
    let value = match noise.kind {
        NoiseKind::Gaussian if breaks.is_empty() => GaussHermite::standard().expectation(&g),
        NoiseKind::Rademacher => 0.5 * (g(1.0) + g(-1.0)),
        _ => {
            let (lo, hi) = noise.integration_window();
            let mut kinks = breaks.to_vec();
            kinks.extend_from_slice(noise.density_kinks());
            let pts = partition(lo, hi, 2.0, &kinks);
            integrate_adaptive(|x| g(x) * noise.density(x).unwrap_or(0.0), &pts, ABS_TOL, REL_TOL)?
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NotIntegrable(format!("expectation evaluated to {value}")))
    }
}

fn density_route(f: &NonlinearitySpec, noise: &NoiseSpec, k: usize) -> Result<f64> {
    // validates order and law once, outside the integrand
    density_derivative(noise, k, 0.0)?;
    let (lo, hi) = noise.integration_window();
    let mut kinks = f.breakpoints();
    kinks.extend_from_slice(noise.density_kinks());
    let pts = partition(lo, hi, 2.0, &kinks);
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let integral = integrate_adaptive(
        |x| f.eval(x) * density_derivative(noise, k, x).unwrap_or(f64::NAN),
        &pts,
        ABS_TOL,
        REL_TOL,
    )?;
    Ok(sign * integral)
}

fn derivative_route(f: &NonlinearitySpec, noise: &NoiseSpec, k: usize) -> Result<f64> {
    if k > f.derivative_order_available() {
        return Err(Error::InvalidSpec(format!("`{f}` has no derivative of order {k}")));
    }
    expectation(|x| f.derivative(k, x).unwrap_or(f64::NAN), noise, &f.breakpoints())
}

/// `ϑ_k(f)` through a specific route.
pub fn info_coefficient_via(f: &NonlinearitySpec, noise: &NoiseSpec, k: usize, method: CoefficientMethod) -> Result<f64> {
    match method {
        CoefficientMethod::DerivativeQuadrature => derivative_route(f, noise, k),
        CoefficientMethod::DensityQuadrature => {
            if noise.has_smooth_density() || noise.regularity() == DensityRegularity::PiecewiseSmooth {
                density_route(f, noise, k)
            } else {
                Err(Error::NoSmoothDensity(noise.name()))
            }
        }
    }
}

/// `ϑ_k(f)` together with the route that produced it and a best-effort flag.
pub fn info_coefficient_detailed(f: &NonlinearitySpec, noise: &NoiseSpec, k: usize) -> Result<(f64, CoefficientMethod, bool)> {
    if k <= f.derivative_order_available() {
        return Ok((derivative_route(f, noise, k)?, CoefficientMethod::DerivativeQuadrature, false));
    }
    match noise.regularity() {
        DensityRegularity::Smooth => Ok((density_route(f, noise, k)?, CoefficientMethod::DensityQuadrature, false)),
        DensityRegularity::PiecewiseSmooth => Ok((density_route(f, noise, k)?, CoefficientMethod::DensityQuadrature, true)),
        _ => Err(Error::NoApplicableMethod { f: f.to_string(), noise: noise.name(), k }),
    }
}

/// `ϑ_k(f) = E f^{(k)}(Z)`, or its density form for non-smooth `f`.
pub fn info_coefficient(f: &NonlinearitySpec, noise: &NoiseSpec, k: usize) -> Result<f64> {
    info_coefficient_detailed(f, noise, k).map(|(v, _, _)| v)
}

/// `‖f‖_{L²(μ_Z)}`.
pub fn l2_norm(f: &NonlinearitySpec, noise: &NoiseSpec) -> Result<f64> {
    Ok(expectation(|x| f.eval(x).powi(2), noise, &f.breakpoints())?.sqrt())
}

/// Index-detection tolerance `1e-8 · max(1, ‖f‖_{L²(μ_Z)})`.
pub fn default_tolerance(f: &NonlinearitySpec, noise: &NoiseSpec) -> Result<f64> {
    Ok(1e-8 * l2_norm(f, noise)?.max(1.0))
}

/// `σ = √(ϑ₀(f²) − ϑ₀(f)²)`, the standard deviation of `f(Z)`.
pub fn noise_scale(f: &NonlinearitySpec, noise: &NoiseSpec) -> Result<f64> {
    let breaks = f.breakpoints();
    let fourth = expectation(|x| f.eval(x).powi(4), noise, &breaks)?;
    if !fourth.is_finite() {
        return Err(Error::NotIntegrable(format!("E f(Z)^4 = {fourth}")));
    }
    if f.is_constant() {
        return Ok(0.0);
    }
    let mean = expectation(|x| f.eval(x), noise, &breaks)?;
    let var = expectation(|x| (f.eval(x) - mean).powi(2), noise, &breaks)?;
    if var < -1e-12 {
        return Err(Error::NotIntegrable(format!("negative variance {var}")));
    }
    Ok(var.max(0.0).sqrt())
}

/// Coefficients `ϑ_0..ϑ_{k_max}`, the first `k ≥ 1` with `|ϑ_k| > tol`, and `σ`.
pub fn info_index(f: &NonlinearitySpec, noise: &NoiseSpec, k_max: usize, tol: f64) -> Result<CoefficientReport> {
    if k_max < 1 {
        return Err(Error::InvalidSpec("k_max must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidSpec("tolerance must be positive".into()));
    }
    f.validate()?;
    let mut theta = Vec::with_capacity(k_max + 1);
    let mut method = CoefficientMethod::DerivativeQuadrature;
    let mut best_effort = false;
    for k in 0..=k_max {
        let (v, m, be) = info_coefficient_detailed(f, noise, k)?;
        if m == CoefficientMethod::DensityQuadrature {
            method = m;
        }
        best_effort |= be;
        // `+ 0.0` turns a negative zero into +0 for cleaner output
        theta.push(v + 0.0);
    }
    let k_star = (1..=k_max).find(|&k| theta[k].abs() > tol);
    let theta0_f_squared = expectation(|x| f.eval(x).powi(2), noise, &f.breakpoints())?;
    let sigma = noise_scale(f, noise)?;
    Ok(CoefficientReport { theta, k_star, sigma, method, tolerance_used: tol, theta0_f_squared, best_effort })
}

/// [`info_index`] with `k_max = 8` and the default tolerance.
pub fn info_index_default(f: &NonlinearitySpec, noise: &NoiseSpec) -> Result<CoefficientReport> {
    info_index(f, noise, DEFAULT_K_MAX, default_tolerance(f, noise)?)
}
