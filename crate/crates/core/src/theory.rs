//! Closed-form limits: the BBP functions `l` and `m`, the relevant scaling of
//! the signal strength, and the effective spike of the non-linear model.

use serde::{Deserialize, Serialize};

use crate::coefficients::{info_index_default, CoefficientReport, NonlinearitySpec};
use crate::distributions::{moment, NoiseSpec, SignalSpec};
use crate::{Error, Result};

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("noise scale must be positive, got {sigma}")))
    }
}

/// Limit of the leading eigenvalue: `2σ·sign(γ̃)` below threshold,
/// `γ̃ + σ²/γ̃` above. `sign(0) = +1`.
pub fn bbp_eigenvalue(gamma_eff: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(if gamma_eff.abs() < sigma {
        if gamma_eff < 0.0 { -2.0 * sigma } else { 2.0 * sigma }
    } else {
        gamma_eff + sigma * sigma / gamma_eff
    })
}

/// Limit of the squared overlap: `(1 − σ²/γ̃²)·1{|γ̃| ≥ σ}`.
pub fn bbp_overlap(gamma_eff: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(if gamma_eff.abs() >= sigma { 1.0 - sigma * sigma / (gamma_eff * gamma_eff) } else { 0.0 })
}

/// `γ(N) = γ₀ n^{(1 − 1/k★)/2}`.
pub fn relevant_gamma(gamma0: f64, n: usize, k_star: usize) -> Result<f64> {
    if k_star == 0 || n == 0 {
        return Err(Error::InvalidSpec("relevant scaling needs k_star >= 1 and n >= 1".into()));
    }
    let k = k_star as f64;
    Ok(gamma0 * (n as f64).powf(0.5 * (1.0 - 1.0 / k)))
}

/// `γ̃ = γ₀^{k★} ϑ_{k★}/k★! · m_{2k★}`.
pub fn effective_spike(gamma0: f64, report: &CoefficientReport, signal: &SignalSpec) -> Result<f64> {
    let k = report.k_star()?;
    let m = moment(signal, 2 * k);
    if !m.is_finite() {
        return Err(Error::InvalidSpec(format!("signal moment m_{} is not finite", 2 * k)));
    }
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    Ok(gamma0.powi(k as i32) * report.theta[k] / fact * m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub gamma0: f64,
    pub k_star: usize,
    pub effective_spike: f64,
    pub sigma: f64,
    pub lambda_limit: f64,
    pub overlap_limit: f64,
    pub supercritical: bool,
}

impl Prediction {
    /// Builds a prediction from an effective spike that is already known.
    pub fn from_spike(gamma0: f64, k_star: usize, gamma_eff: f64, sigma: f64) -> Result<Self> {
        Ok(Self {
            gamma0,
            k_star,
            effective_spike: gamma_eff,
            sigma,
            lambda_limit: bbp_eigenvalue(gamma_eff, sigma)?,
            overlap_limit: bbp_overlap(gamma_eff, sigma)?,
            supercritical: gamma_eff.abs() >= sigma,
        })
    }
}

/// Limits of the leading eigenpair for a coefficient report.
pub fn predict_from_report(gamma0: f64, report: &CoefficientReport, signal: &SignalSpec) -> Result<Prediction> {
    let gamma_eff = effective_spike(gamma0, report, signal)?;
    Prediction::from_spike(gamma0, report.k_star()?, gamma_eff, report.sigma)
}

/// Limits of the leading eigenpair of the non-linear model.
pub fn predict(gamma0: f64, f: &NonlinearitySpec, noise: &NoiseSpec, signal: &SignalSpec) -> Result<Prediction> {
    predict_from_report(gamma0, &info_index_default(f, noise)?, signal)
}

/// Smallest `γ₀ > 0` with `|γ̃(γ₀)| = σ`: `(σ k★! / |ϑ_{k★}| m_{2k★})^{1/k★}`.
pub fn critical_gamma0(report: &CoefficientReport, signal: &SignalSpec) -> Result<f64> {
    let k = report.k_star()?;
    let unit = effective_spike(1.0, report, signal)?.abs();
    if unit == 0.0 {
        return Err(Error::InvalidSpec("effective spike vanishes identically".into()));
    }
    Ok((report.sigma / unit).powf(1.0 / k as f64))
}

/// Population eigenvalues of `P_K` at relevant scaling, by decreasing
/// magnitude: the spectrum of `G^{1/2} C G^{1/2}` with
/// `G_{αβ} = Π_l m^{(l)}_{α_l + β_l}` and `C = diag(ϑ_{k★}/k★! · mult(α) · γ₀^α)`.
pub fn rank_k_effective_spikes(report: &CoefficientReport, signals: &[SignalSpec], gamma0s: &[f64]) -> Result<Vec<f64>> {
    use crate::models::{multi_indices, multinomial};
    use crate::spectral::symmetric_eigen;
    if signals.is_empty() || signals.len() != gamma0s.len() {
        return Err(Error::InvalidSpec("need one strength per signal".into()));
    }
    let k = report.k_star()?;
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    let alphas = multi_indices(signals.len(), k);
    let r = alphas.len();
    let mut g = vec![0.0; r * r];
    for (a, al) in alphas.iter().enumerate() {
        for (b, be) in alphas.iter().enumerate() {
            g[a * r + b] = signals.iter().enumerate().map(|(l, s)| moment(s, al[l] + be[l])).product();
        }
    }
    let c: Vec<f64> = alphas
        .iter()
        .map(|al| {
            let gp: f64 = al.iter().zip(gamma0s).map(|(&a, g)| g.powi(a as i32)).product();
            report.theta[k] / fact * multinomial(al) * gp
        })
        .collect();
    let ge = symmetric_eigen(g, r)?;
    let root = |i: usize, j: usize| ge.component(i, j) * ge.values[j].max(0.0).sqrt();
    let mut s = vec![0.0; r * r];
    for a in 0..r {
        for b in 0..r {
            s[a * r + b] = (0..r).map(|t| root(t, a) * c[t] * root(t, b)).sum();
        }
    }
    let mut vals = symmetric_eigen(s, r)?.values;
    vals.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::NoiseSpec;
    use std::f64::consts::PI;

    #[test]
    fn bbp_examples() {
        assert_eq!(bbp_eigenvalue(2.0, 1.0).unwrap(), 2.5);
        assert_eq!(bbp_eigenvalue(0.5, 1.0).unwrap(), 2.0);
        assert_eq!(bbp_eigenvalue(-2.0, 1.0).unwrap(), -2.5);
        assert_eq!(bbp_eigenvalue(0.0, 1.0).unwrap(), 2.0);
        assert_eq!(bbp_overlap(2.0, 1.0).unwrap(), 0.75);
        assert_eq!(bbp_overlap(0.9, 1.0).unwrap(), 0.0);
        for s in [0.3, 1.0, 4.2] {
            assert_eq!(bbp_overlap(s, s).unwrap(), 0.0);
        }
        assert!(bbp_eigenvalue(1.0, 0.0).is_err());
    }

    #[test]
    fn scaling_examples() {
        assert_eq!(relevant_gamma(0.7, 12345, 1).unwrap(), 0.7);
        assert!((relevant_gamma(1.0, 16, 2).unwrap() - 2.0).abs() < 1e-15);
        assert!((relevant_gamma(1.0, 8, 3).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn predictions() {
        let g = NoiseSpec::gaussian();
        let s = SignalSpec::gaussian();
        let p = predict(2.0, &NonlinearitySpec::Identity, &g, &s).unwrap();
        assert!((p.lambda_limit - 2.5).abs() < 1e-10 && (p.overlap_limit - 0.75).abs() < 1e-10);

        let abs = NonlinearitySpec::Abs;
        let p = predict(0.4, &abs, &g, &s).unwrap();
        let sigma = (1.0 - 2.0 / PI).sqrt();
        assert!((p.lambda_limit - 2.0 * sigma).abs() < 1e-10);
        assert_eq!(p.overlap_limit, 0.0);
        assert!(!p.supercritical);
        let p = predict(1.3, &abs, &g, &s).unwrap();
        assert!((p.effective_spike - 1.69 * (2.0 / PI).sqrt() / 2.0 * 3.0).abs() < 1e-10);

        let r = info_index_default(&abs, &g).unwrap();
        let crit = critical_gamma0(&r, &s).unwrap();
        let oracle = (2.0 * sigma / (3.0 * (2.0 / PI).sqrt())).sqrt();
        assert!((crit - oracle).abs() < 1e-10);
        let cubic = info_index_default(&NonlinearitySpec::cubic_hermite(), &g).unwrap();
        assert!((effective_spike(0.5, &cubic, &s).unwrap() - 15.0 * 0.125).abs() < 1e-10);
        let crit3 = critical_gamma0(&cubic, &s).unwrap();
        assert!((crit3 - (6f64.sqrt() / 15.0).cbrt()).abs() < 1e-10);
    }

    #[test]
    fn rank_k_spikes() {
        let g = NoiseSpec::gaussian();
        let s = SignalSpec::gaussian();
        let r = info_index_default(&NonlinearitySpec::Abs, &g).unwrap();
        let one = rank_k_effective_spikes(&r, std::slice::from_ref(&s), &[1.3]).unwrap();
        assert!((one[0] - effective_spike(1.3, &r, &s).unwrap()).abs() < 1e-12);
        // two independent gaussian signals, k = 2: population Gram is
        // [[3,0,1],[0,1,0],[1,0,3]] in the basis (x1², x1x2, x2²)
        let two = rank_k_effective_spikes(&r, &[s.clone(), s.clone()], &[1.0, 1.0]).unwrap();
        let t = r.theta[2] / 2.0;
        // C = t·diag(1, 2, 1): eigenvalues of GC are t·{4, 2, 2}
        let mut expect = [4.0 * t, 2.0 * t, 2.0 * t];
        expect.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in two.iter().zip(expect) {
            assert!((a - b).abs() < 1e-10, "{two:?}");
        }
    }

    #[test]
    fn continuity_and_homogeneity() {
        let s = 0.8;
        for e in [1e-6, -1e-6] {
            assert!((bbp_eigenvalue(s + e, s).unwrap() - 2.0 * s).abs() < 1e-5);
        }
        for (g, c) in [(0.3, 2.0), (1.7, 0.5), (-3.0, 3.0)] {
            let lhs = bbp_eigenvalue(c * g, c * s).unwrap();
            assert!((lhs - c * bbp_eigenvalue(g, s).unwrap()).abs() < 1e-12);
        }
    }
}
