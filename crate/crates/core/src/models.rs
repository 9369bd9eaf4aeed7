//! Matrix families: the symmetric spiked model (rank one and rank K), block
//! variance profiles, the rectangular model with its symmetrization and Gram
//! matrix, and the equivalent low-rank perturbations.

use serde::{Deserialize, Serialize};

use crate::coefficients::{info_coefficient, info_index_default, NonlinearitySpec};
use crate::distributions::{
    sample_noise_rectangular, sample_noise_symmetric, sample_signal, NoiseSpec, SeededStream, SignalSpec,
};
use crate::matrix::{dot, RectMatrix, SymMatrix};
use crate::spectral::{symmetric_eigen, SymmetricOperator};
use crate::{Error, Result};

/// Tag for the noise substream of a model seed.
pub const NOISE_TAG: u64 = 0x4e4f_4953_4500_0000;
/// Tag of the first signal substream; signal `l` uses `SIGNAL_TAG + l`.
pub const SIGNAL_TAG: u64 = 0x5349_474e_414c_0000;
/// Relative singular-value threshold for numerical rank.
pub const RANK_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikedModelConfig {
    pub n: usize,
    pub f: NonlinearitySpec,
    pub noise: NoiseSpec,
    pub signal: SignalSpec,
    /// Realized strength `γ(N)`.
    pub gamma: f64,
    pub seed: SeededStream,
    /// Also build `Y₀` (same noise, `γ = 0`).
    pub couple_to_null: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankKConfig {
    pub n: usize,
    pub f: NonlinearitySpec,
    pub noise: NoiseSpec,
    pub signals: Vec<SignalSpec>,
    pub gammas: Vec<f64>,
    pub seed: SeededStream,
    pub couple_to_null: bool,
}

impl From<&SpikedModelConfig> for RankKConfig {
    fn from(c: &SpikedModelConfig) -> Self {
        Self {
            n: c.n,
            f: c.f.clone(),
            noise: c.noise,
            signals: vec![c.signal.clone()],
            gammas: vec![c.gamma],
            seed: c.seed,
            couple_to_null: c.couple_to_null,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectangularConfig {
    pub n: usize,
    pub m: usize,
    pub f: NonlinearitySpec,
    pub noise: NoiseSpec,
    pub signal_u: SignalSpec,
    pub signal_v: SignalSpec,
    pub gamma: f64,
    pub seed: SeededStream,
}

impl RectangularConfig {
    /// Aspect ratio `q = n / m`.
    pub fn aspect_ratio(&self) -> f64 {
        self.n as f64 / self.m as f64
    }
}

#[derive(Debug, Clone)]
pub struct SpikedModel {
    pub y: SymMatrix,
    pub x: Vec<f64>,
    pub null: Option<SymMatrix>,
    /// `E f(Z)` as subtracted.
    pub theta0: f64,
}

#[derive(Debug, Clone)]
pub struct RankKModel {
    pub y: SymMatrix,
    pub signals: Vec<Vec<f64>>,
    pub null: Option<SymMatrix>,
    pub theta0: f64,
}

fn validate_common(n: usize, f: &NonlinearitySpec, gammas: &[f64]) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidSpec(format!("matrix size must be at least 2, got {n}")));
    }
    if let Some(g) = gammas.iter().find(|g| !g.is_finite()) {
        return Err(Error::InvalidSpec(format!("signal strength must be finite, got {g}")));
    }
    f.validate()
}

/// Draws the `K` signal vectors of a model seed.
pub fn draw_signals(signals: &[SignalSpec], n: usize, seed: SeededStream) -> Result<Vec<Vec<f64>>> {
    signals
        .iter()
        .enumerate()
        .map(|(l, s)| sample_signal(s, n, seed.derive(SIGNAL_TAG + l as u64)))
        .collect()
}

/// Noise matrix `Z` of a model seed.
pub fn draw_noise(noise: &NoiseSpec, n: usize, seed: SeededStream) -> SymMatrix {
    sample_noise_symmetric(noise, n, seed.derive(NOISE_TAG))
}

#[inline]
fn spike_entry(signals: &[Vec<f64>], gammas: &[f64], i: usize, j: usize, sqrt_n: f64) -> f64 {
    signals.iter().zip(gammas).fold(0.0, |acc, (x, g)| acc + g * x[i] * x[j] / sqrt_n)
}

/// `Y_ij = [f(Z_ij + Σ_l γ_l x_il x_jl / √n) − E f(Z)] / √n`.
pub fn build_rank_k(cfg: &RankKConfig) -> Result<RankKModel> {
    if cfg.signals.is_empty() || cfg.signals.len() != cfg.gammas.len() {
        return Err(Error::InvalidSpec(format!(
            "need K >= 1 signals with one strength each (got {} signals, {} strengths)",
            cfg.signals.len(),
            cfg.gammas.len()
        )));
    }
    validate_common(cfg.n, &cfg.f, &cfg.gammas)?;
    let theta0 = info_coefficient(&cfg.f, &cfg.noise, 0)?;
    let n = cfg.n;
    let sqrt_n = (n as f64).sqrt();
    let signals = draw_signals(&cfg.signals, n, cfg.seed)?;
    let z = draw_noise(&cfg.noise, n, cfg.seed);
    let f = &cfg.f;
    let null = cfg
        .couple_to_null
        .then(|| z.map_upper(|_, _, zij| (f.eval(zij) - theta0) / sqrt_n));
    let mut y = z;
    y.transform_upper(|i, j, zij| (f.eval(zij + spike_entry(&signals, &cfg.gammas, i, j, sqrt_n)) - theta0) / sqrt_n);
    Ok(RankKModel { y, signals, null, theta0 })
}

/// Rank-one spiked model; identical to [`build_rank_k`] with `K = 1`.
pub fn build_spiked(cfg: &SpikedModelConfig) -> Result<SpikedModel> {
    let RankKModel { y, mut signals, null, theta0 } = build_rank_k(&RankKConfig::from(cfg))?;
    Ok(SpikedModel { y, x: signals.pop().expect("one signal"), null, theta0 })
}

/// `Y − Y₀ − P` for the coupled model, computed entrywise in one pass with the
/// same arithmetic as building `Y`, `Y₀` and `P` separately.
pub fn coupled_residual(cfg: &SpikedModelConfig, p: &LowRank) -> Result<SymMatrix> {
    validate_common(cfg.n, &cfg.f, &[cfg.gamma])?;
    if p.dim() != cfg.n {
        return Err(Error::DimensionMismatch { expected: cfg.n, got: p.dim() });
    }
    let theta0 = info_coefficient(&cfg.f, &cfg.noise, 0)?;
    let n = cfg.n;
    let sqrt_n = (n as f64).sqrt();
    let x = draw_signals(std::slice::from_ref(&cfg.signal), n, cfg.seed)?;
    let gammas = [cfg.gamma];
    let f = &cfg.f;
    let mut e = draw_noise(&cfg.noise, n, cfg.seed);
    e.transform_upper(|i, j, zij| {
        let y = (f.eval(zij + spike_entry(&x, &gammas, i, j, sqrt_n)) - theta0) / sqrt_n;
        let y0 = (f.eval(zij) - theta0) / sqrt_n;
        y - y0 - p.entry(i, j)
    });
    Ok(e)
}

/// Symmetric low-rank matrix `Σ_t c_t u_t u_tᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRank {
    n: usize,
    pub coefficients: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl LowRank {
    pub fn new(n: usize, coefficients: Vec<f64>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if coefficients.len() != vectors.len() {
            return Err(Error::DimensionMismatch { expected: coefficients.len(), got: vectors.len() });
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
        Ok(Self { n, coefficients, vectors })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> usize {
        self.vectors.len()
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.coefficients.iter().zip(&self.vectors).map(|(c, u)| c * u[i] * u[j]).sum()
    }

    pub fn to_dense(&self) -> SymMatrix {
        SymMatrix::from_upper_fn(self.n, |i, j| self.entry(i, j))
    }

    /// Nonzero eigenpairs through the `r × r` problem `G^{1/2} C G^{1/2}`
    /// with `G = UᵀU`, ordered by decreasing magnitude. Eigenvectors are
    /// unit vectors in `ℝⁿ`; directions where `G` is singular are dropped.
    pub fn eigen(&self) -> Result<Vec<(f64, Vec<f64>)>> {
        let r = self.terms();
        if r == 0 {
            return Ok(Vec::new());
        }
        let mut g = vec![0.0; r * r];
        for a in 0..r {
            for b in 0..=a {
                let v = dot(&self.vectors[a], &self.vectors[b]);
                g[a * r + b] = v;
                g[b * r + a] = v;
            }
        }
        let ge = symmetric_eigen(g, r)?;
        let gmax = ge.values.last().copied().unwrap_or(0.0).max(0.0);
        // G^{1/2} restricted to its numerically nonsingular part, as Q Λ^{1/2}
        let keep: Vec<usize> = (0..r).filter(|&j| ge.values[j] > 1e-14 * gmax).collect();
        let s = keep.len();
        let root = |row: usize, col: usize| ge.component(row, keep[col]) * ge.values[keep[col]].sqrt();
        // S = (QΛ^{1/2})ᵀ C (QΛ^{1/2})
        let mut sm = vec![0.0; s * s];
        for a in 0..s {
            for b in 0..=a {
                let v: f64 = (0..r).map(|t| root(t, a) * self.coefficients[t] * root(t, b)).sum();
                sm[a * s + b] = v;
                sm[b * s + a] = v;
            }
        }
        let se = symmetric_eigen(sm, s)?;
        let mut out: Vec<(f64, Vec<f64>)> = (0..s)
            .map(|j| {
                // w = U Q Λ^{-1/2} z
                let mut coef = vec![0.0; r];
                for (a, &kj) in keep.iter().enumerate() {
                    let za = se.component(a, j) / ge.values[kj].sqrt();
                    for (t, c) in coef.iter_mut().enumerate() {
                        *c += ge.component(t, kj) * za;
                    }
                }
                let mut w = vec![0.0; self.n];
                for (u, c) in self.vectors.iter().zip(&coef) {
                    crate::matrix::axpy(*c, u, &mut w);
                }
                let nw = crate::matrix::norm2(&w);
                if nw > 0.0 {
                    w.iter_mut().for_each(|x| *x /= nw);
                }
                crate::spectral::canonical_sign(&mut w);
                (se.values[j], w)
            })
            .collect();
        out.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
        Ok(out)
    }

    /// Number of eigenvalues with `|λ| > RANK_THRESHOLD · |λ|_max`.
    pub fn numerical_rank(&self) -> Result<usize> {
        let e = self.eigen()?;
        Ok(numerical_rank(&e.iter().map(|(v, _)| *v).collect::<Vec<_>>()))
    }
}

impl SymmetricOperator for LowRank {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (c, u) in self.coefficients.iter().zip(&self.vectors) {
            crate::matrix::axpy(c * dot(u, x), u, y);
        }
    }
}

/// Count of `|λ| > RANK_THRESHOLD · max|λ|` in a symmetric spectrum.
pub fn numerical_rank(eigenvalues: &[f64]) -> usize {
    let top = eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if top == 0.0 {
        return 0;
    }
    eigenvalues.iter().filter(|v| v.abs() > RANK_THRESHOLD * top).count()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn theta_star(f: &NonlinearitySpec, noise: &NoiseSpec, k_star: Option<usize>) -> Result<(usize, f64)> {
    let k = match k_star {
        Some(k) => k,
        None => info_index_default(f, noise)?.k_star()?,
    };
    if k == 0 {
        return Err(Error::InvalidSpec("information index must be at least 1".into()));
    }
    let theta = info_coefficient(f, noise, k)?;
    if theta == 0.0 {
        return Err(Error::InvalidSpec(format!("ϑ_{k} vanishes; not an information index")));
    }
    Ok((k, theta))
}

/// `P = (γ^k / n^{(k−1)/2}) (ϑ_k / k!) (x^{⊙k}/√n)(x^{⊙k}/√n)ᵀ` from a known `ϑ_k`.
pub fn rank_one_perturbation(theta_k: f64, x: &[f64], gamma: f64, k: usize) -> LowRank {
    let n = x.len();
    let sqrt_n = (n as f64).sqrt();
    let c = gamma.powi(k as i32) / (n as f64).powf((k as f64 - 1.0) / 2.0) * theta_k / factorial(k);
    let u = x.iter().map(|v| v.powi(k as i32) / sqrt_n).collect();
    LowRank { n, coefficients: vec![c], vectors: vec![u] }
}

/// The rank-one equivalent perturbation `P` of the non-linear model; `k_star = None` detects the index.
pub fn equivalent_perturbation(
    f: &NonlinearitySpec,
    noise: &NoiseSpec,
    x: &[f64],
    gamma: f64,
    k_star: Option<usize>,
) -> Result<LowRank> {
    let (k, theta) = theta_star(f, noise, k_star)?;
    Ok(rank_one_perturbation(theta, x, gamma, k))
}

/// Multi-indices `α ∈ ℕ^K` with `|α| = k`, in lexicographic order.
pub fn multi_indices(k_signals: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(pos: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for a in (0..=left).rev() {
            cur[pos] = a;
            rec(pos + 1, left - a, cur, out);
        }
    }
    let mut out = Vec::new();
    if k_signals > 0 {
        rec(0, k, &mut vec![0; k_signals], &mut out);
    }
    out
}

/// `k! / Π α_l!`.
pub fn multinomial(alpha: &[usize]) -> f64 {
    factorial(alpha.iter().sum()) / alpha.iter().map(|&a| factorial(a)).product::<f64>()
}

/// `C(K + k − 1, K − 1)`, the generic rank of `P_K`.
pub fn rank_k_dimension(k_signals: usize, k: usize) -> usize {
    if k_signals == 0 {
        return 0;
    }
    let (top, r) = (k_signals + k - 1, k_signals - 1);
    (1..=r).fold(1usize, |acc, i| acc * (top - r + i) / i)
}

fn check_signals(signals: &[Vec<f64>], gammas: &[f64]) -> Result<usize> {
    if signals.is_empty() || signals.len() != gammas.len() {
        return Err(Error::InvalidSpec("need K >= 1 signals with one strength each".into()));
    }
    let n = signals[0].len();
    if let Some(s) = signals.iter().find(|s| s.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: s.len() });
    }
    Ok(n)
}

/// Dense `P_K = ϑ_k / (n^{(k+1)/2} k!) · [Σ_l γ_l x_l x_lᵀ]^{⊙k}`.
///
/// The normalization matches the model entries, so `K = 1` gives the
/// rank-one `P`.
pub fn rank_k_perturbation_dense(theta_k: f64, signals: &[Vec<f64>], gammas: &[f64], k: usize) -> Result<SymMatrix> {
    let n = check_signals(signals, gammas)?;
    let c = theta_k / ((n as f64).powf((k as f64 + 1.0) / 2.0) * factorial(k));
    Ok(SymMatrix::from_upper_fn(n, |i, j| {
        let s: f64 = signals.iter().zip(gammas).map(|(x, g)| g * x[i] * x[j]).sum();
        c * s.powi(k as i32)
    }))
}

/// Termwise expansion of `P_K`: one term per multi-index `α`, with vector
/// `x^α/√n = Π_l x_l^{⊙α_l}/√n` and coefficient
/// `ϑ_k/k! · mult(α) · γ^α / n^{(k−1)/2}`.
pub fn rank_k_perturbation_terms(theta_k: f64, signals: &[Vec<f64>], gammas: &[f64], k: usize) -> Result<LowRank> {
    let n = check_signals(signals, gammas)?;
    let sqrt_n = (n as f64).sqrt();
    let scale = theta_k / factorial(k) / (n as f64).powf((k as f64 - 1.0) / 2.0);
    let mut coefficients = Vec::new();
    let mut vectors = Vec::new();
    for alpha in multi_indices(signals.len(), k) {
        let g: f64 = alpha.iter().zip(gammas).map(|(&a, g)| g.powi(a as i32)).product();
        coefficients.push(scale * multinomial(&alpha) * g);
        vectors.push(
            (0..n)
                .map(|i| alpha.iter().zip(signals).map(|(&a, x)| x[i].powi(a as i32)).product::<f64>() / sqrt_n)
                .collect(),
        );
    }
    LowRank::new(n, coefficients, vectors)
}

/// The rank-K equivalent perturbation `P_K` (dense Hadamard-power form).
pub fn equivalent_perturbation_rank_k(
    f: &NonlinearitySpec,
    noise: &NoiseSpec,
    signals: &[Vec<f64>],
    gammas: &[f64],
    k_star: Option<usize>,
) -> Result<SymMatrix> {
    let (k, theta) = theta_star(f, noise, k_star)?;
    rank_k_perturbation_dense(theta, signals, gammas, k)
}

/// Block-constant variance profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceProfile {
    /// Block start indices followed by `n`; strictly increasing from 0.
    boundaries: Vec<usize>,
    /// `B × B` row-major block values `Δ_{st}`.
    values: Vec<f64>,
}

impl VarianceProfile {
    pub fn new(boundaries: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 || boundaries[0] != 0 || boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec("block boundaries must start at 0 and increase strictly".into()));
        }
        let b = boundaries.len() - 1;
        if values.len() != b * b {
            return Err(Error::DimensionMismatch { expected: b * b, got: values.len() });
        }
        for s in 0..b {
            for t in 0..b {
                let v = values[s * b + t];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidSpec(format!("block value Δ[{s}][{t}] = {v} must be finite and nonnegative")));
                }
                if v != values[t * b + s] {
                    return Err(Error::InvalidSpec(format!("block values not symmetric at ({s}, {t})")));
                }
            }
        }
        Ok(Self { boundaries, values })
    }

    /// Profile from block sizes.
    pub fn from_sizes(sizes: &[usize], values: Vec<f64>) -> Result<Self> {
        let mut b = vec![0];
        for s in sizes {
            b.push(b.last().unwrap() + s);
        }
        Self::new(b, values)
    }

    pub fn n(&self) -> usize {
        *self.boundaries.last().unwrap()
    }

    pub fn blocks(&self) -> usize {
        self.boundaries.len() - 1
    }

    fn block_of(&self, i: usize) -> usize {
        self.boundaries.partition_point(|&b| b <= i) - 1
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.block_of(i) * self.blocks() + self.block_of(j)]
    }
}

/// `Δ ⊙ M`.
pub fn apply_variance_profile(profile: &VarianceProfile, m: &SymMatrix) -> Result<SymMatrix> {
    if profile.n() != m.n() {
        return Err(Error::DimensionMismatch { expected: m.n(), got: profile.n() });
    }
    let blocks: Vec<usize> = (0..m.n()).map(|i| profile.block_of(i)).collect();
    let b = profile.blocks();
    Ok(m.map_upper(|i, j, v| profile.values[blocks[i] * b + blocks[j]] * v))
}

#[derive(Debug, Clone)]
pub struct RectangularModel {
    /// Unnormalized `n × m` factor.
    pub a: RectMatrix,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub theta0: f64,
}

/// `A_ij = f(Z_ij + γ u_i v_j / √n) − E f(Z)`.
pub fn build_rectangular(cfg: &RectangularConfig) -> Result<RectangularModel> {
    if cfg.n == 0 || cfg.n > cfg.m {
        return Err(Error::InvalidSpec(format!("rectangular model needs 1 <= n <= m (got n = {}, m = {})", cfg.n, cfg.m)));
    }
    if !cfg.gamma.is_finite() {
        return Err(Error::InvalidSpec(format!("signal strength must be finite, got {}", cfg.gamma)));
    }
    cfg.f.validate()?;
    let theta0 = info_coefficient(&cfg.f, &cfg.noise, 0)?;
    let u = sample_signal(&cfg.signal_u, cfg.n, cfg.seed.derive(SIGNAL_TAG))?;
    let v = sample_signal(&cfg.signal_v, cfg.m, cfg.seed.derive(SIGNAL_TAG + 1))?;
    let z = sample_noise_rectangular(&cfg.noise, cfg.n, cfg.m, cfg.seed.derive(NOISE_TAG));
    let sqrt_n = (cfg.n as f64).sqrt();
    let (f, g) = (&cfg.f, cfg.gamma);
    let a = RectMatrix::from_rows(cfg.n, cfg.m, |i, row| {
        for (j, out) in row.iter_mut().enumerate() {
            *out = f.eval(z.get(i, j) + g * u[i] * v[j] / sqrt_n) - theta0;
        }
    });
    Ok(RectangularModel { a, u, v, theta0 })
}

/// `[[0, A], [Aᵀ, 0]] / √m` for an `n × m` factor.
pub fn symmetrize_rectangular(a: &RectMatrix, m: usize) -> Result<SymMatrix> {
    if a.cols() != m {
        return Err(Error::DimensionMismatch { expected: m, got: a.cols() });
    }
    let n = a.rows();
    let s = (m as f64).sqrt();
    Ok(SymMatrix::from_upper_fn(n + m, |i, j| if i < n && j >= n { a.get(i, j - n) / s } else { 0.0 }))
}

/// Gram matrix `A Aᵀ / m`.
pub fn gram(a: &RectMatrix, m: usize) -> Result<SymMatrix> {
    if a.cols() != m {
        return Err(Error::DimensionMismatch { expected: m, got: a.cols() });
    }
    Ok(SymMatrix::from_upper_fn(a.rows(), |i, j| dot(a.row(i), a.row(j)) / m as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::full_spectrum;

    fn cfg(f: NonlinearitySpec, n: usize, gamma: f64) -> SpikedModelConfig {
        SpikedModelConfig {
            n,
            f,
            noise: NoiseSpec::gaussian(),
            signal: SignalSpec::gaussian(),
            gamma,
            seed: SeededStream::new(42, 7),
            couple_to_null: true,
        }
    }

    #[test]
    fn identity_at_zero_gamma_is_scaled_noise() {
        let c = cfg(NonlinearitySpec::Identity, 30, 0.0);
        let m = build_spiked(&c).unwrap();
        assert_eq!(m.theta0, 0.0);
        let z = draw_noise(&c.noise, 30, c.seed);
        let s = 30f64.sqrt();
        for i in 0..30 {
            for j in 0..30 {
                assert_eq!(m.y.get(i, j), z.get(i, j) / s);
            }
        }
        assert_eq!(m.null.unwrap(), m.y);
    }

    #[test]
    fn n2_abs_scalar_oracle() {
        let c = cfg(NonlinearitySpec::Abs, 2, 1.0);
        let m = build_spiked(&c).unwrap();
        let z = draw_noise(&c.noise, 2, c.seed);
        let x = &m.x;
        let e0 = (2.0 / std::f64::consts::PI).sqrt();
        for i in 0..2 {
            for j in 0..2 {
                let expect = ((z.get(i, j) + x[i] * x[j] / 2f64.sqrt()).abs() - e0) / 2f64.sqrt();
                assert!((m.y.get(i, j) - expect).abs() < 1e-12);
            }
        }
        assert!(m.y.is_exactly_symmetric());
    }

    #[test]
    fn rank_k_reduces_and_oracle() {
        let c = cfg(NonlinearitySpec::Tanh, 40, 2.5);
        let a = build_spiked(&c).unwrap();
        let b = build_rank_k(&RankKConfig::from(&c)).unwrap();
        assert_eq!(a.y, b.y);

        let rk = RankKConfig {
            n: 2,
            f: NonlinearitySpec::Tanh,
            noise: NoiseSpec::gaussian(),
            signals: vec![SignalSpec::gaussian(), SignalSpec::rademacher()],
            gammas: vec![1.5, -0.5],
            seed: SeededStream::new(9, 9),
            couple_to_null: false,
        };
        let m = build_rank_k(&rk).unwrap();
        let z = draw_noise(&rk.noise, 2, rk.seed);
        let s = 2f64.sqrt();
        for i in 0..2 {
            for j in 0..2 {
                let inner = 1.5 * m.signals[0][i] * m.signals[0][j] / s - 0.5 * m.signals[1][i] * m.signals[1][j] / s;
                let expect = (z.get(i, j) + inner).tanh() / s;
                assert!((m.y.get(i, j) - expect).abs() < 1e-14);
            }
        }
        let zero = RankKConfig { gammas: vec![0.0, 0.0], couple_to_null: true, ..rk };
        let m = build_rank_k(&zero).unwrap();
        assert_eq!(Some(m.y), m.null);
    }

    #[test]
    fn perturbation_eigenvalue_and_rank() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin() + 0.2).collect();
        let p = equivalent_perturbation(&NonlinearitySpec::Abs, &NoiseSpec::gaussian(), &x, 3.0, Some(2)).unwrap();
        let theta2 = (2.0 / std::f64::consts::PI).sqrt();
        let x2: f64 = x.iter().map(|v| v.powi(4)).sum();
        let expect = 9.0 / 20f64.sqrt() * theta2 / 2.0 * x2 / 20.0;
        let vals = full_spectrum(&p.to_dense()).unwrap();
        assert!((vals[19] - expect).abs() < 1e-12);
        assert!(vals[18].abs() < 1e-12 * vals[19]);
        assert_eq!(p.numerical_rank().unwrap(), 1);
        let detected = equivalent_perturbation(&NonlinearitySpec::Abs, &NoiseSpec::gaussian(), &x, 3.0, None).unwrap();
        assert_eq!(detected, p);
        assert!(matches!(
            equivalent_perturbation(&NonlinearitySpec::Hermite(9), &NoiseSpec::gaussian(), &x, 3.0, None),
            Err(Error::IndexNotDetected { .. })
        ));
    }

    #[test]
    fn identity_perturbation_is_classical_spike() {
        let x = [1.0, -2.0, 0.5];
        let p = equivalent_perturbation(&NonlinearitySpec::Identity, &NoiseSpec::gaussian(), &x, 2.0, Some(1)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((p.entry(i, j) - 2.0 * x[i] * x[j] / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identity_residual_vanishes() {
        let c = cfg(NonlinearitySpec::Identity, 50, 1.7);
        let x = draw_signals(std::slice::from_ref(&c.signal), 50, c.seed).unwrap().pop().unwrap();
        let p = equivalent_perturbation(&c.f, &c.noise, &x, c.gamma, Some(1)).unwrap();
        let e = coupled_residual(&c, &p).unwrap();
        assert!(e.max_abs() < 1e-14);
        // matches the separately built matrices bitwise
        let m = build_spiked(&c).unwrap();
        let pd = p.to_dense();
        for i in 0..50 {
            for j in 0..50 {
                assert_eq!(e.get(i, j), m.y.get(i, j) - m.null.as_ref().unwrap().get(i, j) - pd.get(i, j));
            }
        }
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        for (k_sig, k) in [(1, 4), (2, 2), (3, 2), (3, 3), (4, 2)] {
            assert_eq!(multi_indices(k_sig, k).len(), rank_k_dimension(k_sig, k));
        }
        assert_eq!(rank_k_dimension(2, 2), 3);
        assert_eq!(multinomial(&[1, 1]), 2.0);
        assert_eq!(multinomial(&[2, 1, 1]), 12.0);
    }

    #[test]
    fn rank_k_terms_match_dense() {
        let n = 25;
        let s = SeededStream::new(5, 5);
        let sig = draw_signals(&[SignalSpec::gaussian(), SignalSpec::gaussian(), SignalSpec::uniform_sym()], n, s).unwrap();
        for k in 1..=3 {
            let g = [1.3, -0.7, 0.4];
            let dense = rank_k_perturbation_dense(0.8, &sig, &g, k).unwrap();
            let terms = rank_k_perturbation_terms(0.8, &sig, &g, k).unwrap().to_dense();
            for i in 0..n {
                for j in 0..n {
                    assert!((dense.get(i, j) - terms.get(i, j)).abs() < 1e-12);
                }
            }
        }
        // K = 1 reduces to the rank-one perturbation
        let one = rank_k_perturbation_dense(0.8, &sig[..1], &[1.3], 2).unwrap();
        let p = rank_one_perturbation(0.8, &sig[0], 1.3, 2);
        for i in 0..n {
            for j in 0..n {
                assert!((one.get(i, j) - p.entry(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn low_rank_eigen_matches_dense() {
        let n = 30;
        let sig = draw_signals(&[SignalSpec::gaussian(), SignalSpec::gaussian()], n, SeededStream::new(1, 2)).unwrap();
        let lr = rank_k_perturbation_terms(-0.6, &sig, &[1.0, 0.8], 2).unwrap();
        let eig = lr.eigen().unwrap();
        assert_eq!(eig.len(), 3);
        let dense = lr.to_dense();
        let vals = full_spectrum(&dense).unwrap();
        let mut top: Vec<f64> = vals.clone();
        top.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        for (e, d) in eig.iter().zip(&top) {
            assert!((e.0 - d).abs() < 1e-12);
        }
        for (lam, w) in &eig {
            let mut y = vec![0.0; n];
            dense.matvec(w, &mut y);
            for i in 0..n {
                assert!((y[i] - lam * w[i]).abs() < 1e-12);
            }
        }
        assert_eq!(numerical_rank(&vals), 3);
    }

    #[test]
    fn variance_profile() {
        let m = SymMatrix::from_upper_fn(3, |i, j| (i * 3 + j) as f64 + 1.0);
        let ones = VarianceProfile::from_sizes(&[2, 1], vec![1.0; 4]).unwrap();
        assert_eq!(apply_variance_profile(&ones, &m).unwrap(), m);
        let p = VarianceProfile::from_sizes(&[2, 1], vec![2.0, 0.0, 0.0, 0.5]).unwrap();
        let out = apply_variance_profile(&p, &m).unwrap();
        assert_eq!(out.get(0, 1), 2.0 * m.get(0, 1));
        assert_eq!(out.get(0, 2), 0.0);
        assert_eq!(out.get(2, 1), 0.0);
        assert_eq!(out.get(2, 2), 0.5 * m.get(2, 2));
        assert!(VarianceProfile::from_sizes(&[2, 1], vec![1.0, 0.0, 2.0, 1.0]).is_err());
        assert!(apply_variance_profile(&p, &SymMatrix::zeros(4)).is_err());
    }

    #[test]
    fn rectangular_shapes_and_identities() {
        let c = RectangularConfig {
            n: 2,
            m: 3,
            f: NonlinearitySpec::Identity,
            noise: NoiseSpec::gaussian(),
            signal_u: SignalSpec::gaussian(),
            signal_v: SignalSpec::rademacher(),
            gamma: 0.0,
            seed: SeededStream::new(3, 3),
        };
        let r = build_rectangular(&c).unwrap();
        let z = sample_noise_rectangular(&c.noise, 2, 3, c.seed.derive(NOISE_TAG));
        assert_eq!(r.a, z);
        let c = RectangularConfig { f: NonlinearitySpec::Abs, gamma: 1.5, ..c };
        let r = build_rectangular(&c).unwrap();
        assert_eq!((r.a.rows(), r.a.cols()), (2, 3));
        for i in 0..2 {
            for j in 0..3 {
                let expect = (z.get(i, j) + 1.5 * r.u[i] * r.v[j] / 2f64.sqrt()).abs() - r.theta0;
                assert!((r.a.get(i, j) - expect).abs() < 1e-14);
            }
        }
        let s = symmetrize_rectangular(&r.a, 3).unwrap();
        let ev = full_spectrum(&s).unwrap();
        assert!(ev.iter().filter(|v| v.abs() < 1e-8).count() == 1);
        for i in 0..5 {
            assert!((ev[i] + ev[4 - i]).abs() < 1e-12);
        }
        let g = full_spectrum(&gram(&r.a, 3).unwrap()).unwrap();
        assert!((ev[4].powi(2) - g[1]).abs() < 1e-12 && (ev[3].powi(2) - g[0]).abs() < 1e-12);
        assert!(build_rectangular(&RectangularConfig { n: 4, ..c }).is_err());
    }
}
