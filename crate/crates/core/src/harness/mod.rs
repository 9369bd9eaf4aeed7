//! Experiment orchestration: seeded replica fan-out over `(n, γ₀)` grids,
//! aggregation and table emission.
//!
//! Replica `r` of cell `(n, γ₀)` draws from stream
//! `(base_seed, hash(n, bits(γ₀), r))`, so a cell's results do not depend on
//! the rest of the grid. Jobs run on a worker pool and are collected in grid
//! order; failures become flagged rows instead of aborting the run.

mod config;
mod emit;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{Experiment, ExperimentConfig, OutputFormat, DEFAULT_BINS, DEFAULT_N_GRID, DEFAULT_REPLICAS};
pub use emit::{emit, emit_spectrum, emit_to_string, quantile, read_json, summarize, CellSummary, TableRow};

use crate::coefficients::{default_tolerance, info_index, CoefficientReport};
use crate::distributions::{mix64, SeededStream};
use crate::matrix::RectMatrix;
use crate::models::{
    build_rank_k, build_rectangular, build_spiked, coupled_residual, draw_signals, gram, rank_k_dimension,
    rank_k_perturbation_terms, rank_one_perturbation, symmetrize_rectangular, RankKConfig, RectangularConfig,
    SpikedModelConfig, RANK_THRESHOLD,
};
use crate::spectral::{
    full_spectrum, hadamard_power, leading_eigenpair, operator_norm, overlap_with, ks_semicircle, SpectrumHistogram,
};
use crate::theory::{bbp_eigenvalue, bbp_overlap, predict_from_report, rank_k_effective_spikes, relevant_gamma, Prediction};
use crate::{Error, Result};

pub const STATUS_OK: &str = "ok";

/// Stream id of replica `r` in cell `(n, γ₀)`.
pub fn cell_stream_id(n: usize, gamma0: f64, replica: usize) -> u64 {
    mix64(mix64(mix64(n as u64) ^ gamma0.to_bits()) ^ replica as u64)
}

pub fn cell_stream(base_seed: u64, n: usize, gamma0: f64, replica: usize) -> SeededStream {
    SeededStream::new(base_seed, cell_stream_id(n, gamma0, replica))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub gamma0: f64,
    pub replica: usize,
    pub seed: u64,
    pub lambda1: Option<f64>,
    pub overlap_sq: Option<f64>,
    pub lambda_pred: f64,
    pub overlap_pred: f64,
    pub sigma: f64,
    pub k_star: usize,
    pub wall_time_ms: u64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRow {
    pub n: usize,
    pub gamma0: f64,
    pub replica: usize,
    pub seed: u64,
    pub residual_norm: Option<f64>,
    pub wall_time_ms: u64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectangularRow {
    pub n: usize,
    pub m: usize,
    pub gamma0: f64,
    pub replica: usize,
    pub seed: u64,
    pub pairing_defect: Option<f64>,
    pub zero_count: Option<usize>,
    pub expected_zero_count: usize,
    pub gram_defect: Option<f64>,
    pub gram_lambda1: Option<f64>,
    pub overlap_u: Option<f64>,
    pub overlap_v: Option<f64>,
    pub wall_time_ms: u64,
    pub status: String,
}

/// Rows of a run plus the number of failed replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome<T> {
    pub rows: Vec<T>,
    pub failures: usize,
}

impl<T> Outcome<T> {
    fn new(rows: Vec<T>, failed: impl Fn(&T) -> bool) -> Self {
        let failures = rows.iter().filter(|r| failed(r)).count();
        Self { rows, failures }
    }
}

/// Rank structure of the realized `P_K` for one replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub n: usize,
    pub gamma0: f64,
    pub replica: usize,
    pub numerical_rank: Option<usize>,
    /// Nonzero eigenvalues of `P_K`, by decreasing magnitude.
    pub top_eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub k_signals: usize,
    pub k_star: usize,
    pub expected_rank: usize,
    pub rank_threshold: f64,
    pub entries: Vec<RankEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOutcome {
    pub n: usize,
    pub gamma0: f64,
    pub sigma: f64,
    pub ks_distance: f64,
    pub histogram: SpectrumHistogram,
}

fn sorted_grid<T: Copy>(grid: &[T], cmp: impl Fn(&T, &T) -> std::cmp::Ordering) -> Vec<T> {
    let mut g = grid.to_vec();
    g.sort_by(&cmp);
    g.dedup_by(|a, b| cmp(a, b).is_eq());
    g
}

fn cells(cfg: &ExperimentConfig) -> Vec<(usize, f64, usize)> {
    let ns = sorted_grid(&cfg.n_grid, |a, b| a.cmp(b));
    let gs = sorted_grid(&cfg.gamma0_grid, |a, b| a.total_cmp(b));
    let mut jobs = Vec::with_capacity(ns.len() * gs.len() * cfg.replicas);
    for &n in &ns {
        for &g in &gs {
            for r in 0..cfg.replicas {
                jobs.push((n, g, r));
            }
        }
    }
    jobs
}

/// Runs `f` over `jobs` on a pool of `workers` threads; results keep job order.
pub fn run_jobs<J, R, F>(workers: Option<usize>, jobs: &[J], f: F) -> Result<Vec<R>>
where
    J: Sync,
    R: Send,
    F: Fn(&J) -> R + Sync,
{
    use rayon::prelude::*;
    let threads = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| jobs.par_iter().map(&f).collect()))
}

fn elapsed_ms(cfg: &ExperimentConfig, start: Instant) -> u64 {
    if cfg.timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}

fn status(e: &Error) -> String {
    format!("error: {e}")
}

/// Coefficients and information index for the configured `(f, noise)`.
pub fn coefficient_report(cfg: &ExperimentConfig) -> Result<CoefficientReport> {
    let tol = match cfg.tol_index {
        Some(t) => t,
        None => default_tolerance(&cfg.f, &cfg.noise)?,
    };
    let report = info_index(&cfg.f, &cfg.noise, cfg.k_max, tol)?;
    report.k_star()?;
    Ok(report)
}

fn require(cfg: &ExperimentConfig, e: Experiment) -> Result<()> {
    if cfg.experiment == e {
        Ok(())
    } else {
        Err(Error::config(format!("config describes a `{}` experiment, not `{e}`", cfg.experiment)))
    }
}

struct Measured {
    lambda1: f64,
    overlap: f64,
}

fn sweep_row(report: &CoefficientReport, pred: &Prediction, cell: (usize, f64, usize), result: Result<Measured>, ms: u64) -> SweepRow {
    let (n, gamma0, replica) = cell;
    let (lambda1, overlap_sq, status) = match result {
        Ok(m) => (Some(m.lambda1), Some(m.overlap), STATUS_OK.to_string()),
        Err(e) => (None, None, status(&e)),
    };
    SweepRow {
        n,
        gamma0,
        replica,
        seed: cell_stream_id(n, gamma0, replica),
        lambda1,
        overlap_sq,
        lambda_pred: pred.lambda_limit,
        overlap_pred: pred.overlap_limit,
        sigma: report.sigma,
        k_star: pred.k_star,
        wall_time_ms: ms,
        status,
    }
}

/// Leading eigenpair of the rank-one model across the grid.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Outcome<SweepRow>> {
    require(cfg, Experiment::Sweep)?;
    let report = coefficient_report(cfg)?;
    let k = report.k_star()?;
    let jobs = cells(cfg);
    let rows = run_jobs(cfg.workers, &jobs, |&(n, gamma0, r)| {
        let start = Instant::now();
        let pred = predict_from_report(gamma0, &report, &cfg.signal);
        let measured = pred.as_ref().map_err(clone_err).and_then(|_| {
            let model = build_spiked(&SpikedModelConfig {
                n,
                f: cfg.f.clone(),
                noise: cfg.noise,
                signal: cfg.signal.clone(),
                gamma: relevant_gamma(gamma0, n, k)?,
                seed: cell_stream(cfg.base_seed, n, gamma0, r),
                couple_to_null: false,
            })?;
            let eig = leading_eigenpair(&model.y, &cfg.solver)?;
            Ok(Measured { lambda1: eig.lambda1, overlap: overlap_with(&eig.v1, &hadamard_power(&model.x, k))? })
        });
        let pred = pred.unwrap_or_else(|_| nan_prediction(gamma0, k, report.sigma));
        sweep_row(&report, &pred, (n, gamma0, r), measured, elapsed_ms(cfg, start))
    })?;
    Ok(Outcome::new(rows, |r: &SweepRow| r.status != STATUS_OK))
}

fn clone_err(e: &Error) -> Error {
    Error::InvalidSpec(e.to_string())
}

fn nan_prediction(gamma0: f64, k_star: usize, sigma: f64) -> Prediction {
    Prediction {
        gamma0,
        k_star,
        effective_spike: f64::NAN,
        sigma,
        lambda_limit: f64::NAN,
        overlap_limit: f64::NAN,
        supercritical: false,
    }
}

/// `‖Y − Y₀ − P‖_op` with `Y₀` sharing the noise of `Y`.
pub fn run_equivalence(cfg: &ExperimentConfig) -> Result<Outcome<EquivalenceRow>> {
    require(cfg, Experiment::Equivalence)?;
    let report = coefficient_report(cfg)?;
    let k = report.k_star()?;
    let theta = report.theta[k];
    let jobs = cells(cfg);
    let rows = run_jobs(cfg.workers, &jobs, |&(n, gamma0, r)| {
        let start = Instant::now();
        let seed = cell_stream(cfg.base_seed, n, gamma0, r);
        let residual = (|| {
            let gamma = relevant_gamma(gamma0, n, k)?;
            let model = SpikedModelConfig {
                n,
                f: cfg.f.clone(),
                noise: cfg.noise,
                signal: cfg.signal.clone(),
                gamma,
                seed,
                couple_to_null: true,
            };
            let x = draw_signals(std::slice::from_ref(&cfg.signal), n, seed)?.pop().expect("one signal");
            let p = rank_one_perturbation(theta, &x, gamma, k);
            let e = coupled_residual(&model, &p)?;
            operator_norm(&e, &cfg.solver)
        })();
        let (residual_norm, status) = match residual {
            Ok(v) => (Some(v), STATUS_OK.to_string()),
            Err(e) => (None, status(&e)),
        };
        EquivalenceRow {
            n,
            gamma0,
            replica: r,
            seed: seed.stream_id,
            residual_norm,
            wall_time_ms: elapsed_ms(cfg, start),
            status,
        }
    })?;
    Ok(Outcome::new(rows, |r: &EquivalenceRow| r.status != STATUS_OK))
}

/// Rank-K sweep; the measured overlap is against the top eigenvector of the
/// realized `P_K` (against `x^{⊙k★}` when `K = 1`).
pub fn run_rank_k(cfg: &ExperimentConfig) -> Result<(Outcome<SweepRow>, RankReport)> {
    require(cfg, Experiment::RankK)?;
    let report = coefficient_report(cfg)?;
    let k = report.k_star()?;
    let kk = cfg.signals.len();
    let theta = report.theta[k];
    let jobs = cells(cfg);
    let results = run_jobs(cfg.workers, &jobs, |&(n, gamma0, r)| {
        let start = Instant::now();
        let gamma0s: Vec<f64> = cfg.spike_weights.iter().map(|w| gamma0 * w).collect();
        let pred = if kk == 1 {
            predict_from_report(gamma0s[0], &report, &cfg.signals[0])
        } else {
            rank_k_effective_spikes(&report, &cfg.signals, &gamma0s).and_then(|spikes| {
                let top = spikes.first().copied().unwrap_or(0.0);
                Ok(Prediction {
                    gamma0,
                    k_star: k,
                    effective_spike: top,
                    sigma: report.sigma,
                    lambda_limit: bbp_eigenvalue(top, report.sigma)?,
                    overlap_limit: bbp_overlap(top, report.sigma)?,
                    supercritical: top.abs() >= report.sigma,
                })
            })
        };
        let mut entry = RankEntry { n, gamma0, replica: r, numerical_rank: None, top_eigenvalues: Vec::new() };
        let measured = pred.as_ref().map_err(clone_err).and_then(|_| {
            let gammas = gamma0s.iter().map(|&g| relevant_gamma(g, n, k)).collect::<Result<Vec<_>>>()?;
            let model = build_rank_k(&RankKConfig {
                n,
                f: cfg.f.clone(),
                noise: cfg.noise,
                signals: cfg.signals.clone(),
                gammas: gammas.clone(),
                seed: cell_stream(cfg.base_seed, n, gamma0, r),
                couple_to_null: false,
            })?;
            let terms = rank_k_perturbation_terms(theta, &model.signals, &gammas, k)?;
            let eig = terms.eigen()?;
            let values: Vec<f64> = eig.iter().map(|(v, _)| *v).collect();
            entry.numerical_rank = Some(crate::models::numerical_rank(&values));
            entry.top_eigenvalues = values.into_iter().take(rank_k_dimension(kk, k)).collect();
            let target = if kk == 1 {
                hadamard_power(&model.signals[0], k)
            } else {
                eig.into_iter().next().map(|(_, w)| w).ok_or(Error::InvalidSpec("P_K vanishes".into()))?
            };
            let sol = leading_eigenpair(&model.y, &cfg.solver)?;
            Ok(Measured { lambda1: sol.lambda1, overlap: overlap_with(&sol.v1, &target)? })
        });
        let pred = pred.unwrap_or_else(|_| nan_prediction(gamma0, k, report.sigma));
        (sweep_row(&report, &pred, (n, gamma0, r), measured, elapsed_ms(cfg, start)), entry)
    })?;
    let (rows, entries): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let rank = RankReport { k_signals: kk, k_star: k, expected_rank: rank_k_dimension(kk, k), rank_threshold: RANK_THRESHOLD, entries };
    Ok((Outcome::new(rows, |r: &SweepRow| r.status != STATUS_OK), rank))
}

/// Identity checks of the symmetrized rectangular model plus its leading
/// Gram eigenpair. `n_grid` and `m_grid` are paired.
pub fn run_rectangular(cfg: &ExperimentConfig) -> Result<Outcome<RectangularRow>> {
    require(cfg, Experiment::Rectangular)?;
    let report = coefficient_report(cfg)?;
    let k = report.k_star()?;
    let mut shapes: Vec<(usize, usize)> = cfg.n_grid.iter().copied().zip(cfg.m_grid.iter().copied()).collect();
    shapes.sort();
    shapes.dedup();
    let gs = sorted_grid(&cfg.gamma0_grid, |a, b| a.total_cmp(b));
    let mut jobs = Vec::new();
    for &(n, m) in &shapes {
        for &g in &gs {
            for r in 0..cfg.replicas {
                jobs.push((n, m, g, r));
            }
        }
    }
    let rows = run_jobs(cfg.workers, &jobs, |&(n, m, gamma0, r)| {
        let start = Instant::now();
        // the stream id hashes n and m together so distinct shapes never share draws
        let seed = SeededStream::new(cfg.base_seed, mix64(cell_stream_id(n, gamma0, r) ^ (m as u64)));
        let mut row = RectangularRow {
            n,
            m,
            gamma0,
            replica: r,
            seed: seed.stream_id,
            pairing_defect: None,
            zero_count: None,
            expected_zero_count: m - n,
            gram_defect: None,
            gram_lambda1: None,
            overlap_u: None,
            overlap_v: None,
            wall_time_ms: 0,
            status: STATUS_OK.to_string(),
        };
        let res = (|| {
            let model = build_rectangular(&RectangularConfig {
                n,
                m,
                f: cfg.f.clone(),
                noise: cfg.noise,
                signal_u: cfg.signal_u.clone(),
                signal_v: cfg.signal_v.clone(),
                gamma: relevant_gamma(gamma0, n, k)?,
                seed,
            })?;
            let checks = rectangular_identities(&model.a, m)?;
            row.pairing_defect = Some(checks.pairing_defect);
            row.zero_count = Some(checks.zero_count);
            row.gram_defect = Some(checks.gram_defect);
            let g = gram(&model.a, m)?;
            let eig = leading_eigenpair(&g, &cfg.solver)?;
            let mut right = vec![0.0; m];
            model.a.matvec_t(&eig.v1, &mut right);
            row.gram_lambda1 = Some(eig.lambda1);
            row.overlap_u = Some(overlap_with(&eig.v1, &hadamard_power(&model.u, k))?);
            row.overlap_v = Some(overlap_with(&right, &hadamard_power(&model.v, k))?);
            Ok::<_, Error>(())
        })();
        if let Err(e) = res {
            row.status = status(&e);
        }
        row.wall_time_ms = elapsed_ms(cfg, start);
        row
    })?;
    Ok(Outcome::new(rows, |r: &RectangularRow| r.status != STATUS_OK))
}

/// Spectral identities of `[[0, A], [Aᵀ, 0]]/√m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectangularIdentities {
    /// `max_i |λ_i + λ_{N+1−i}|` over the sorted symmetrized spectrum.
    pub pairing_defect: f64,
    /// Eigenvalues with `|λ| < 1e-8`.
    pub zero_count: usize,
    /// `max_i |λ_i² − μ_i|` between the top `n` symmetrized eigenvalues and
    /// the Gram eigenvalues.
    pub gram_defect: f64,
}

pub const ZERO_THRESHOLD: f64 = 1e-8;

pub fn rectangular_identities(a: &RectMatrix, m: usize) -> Result<RectangularIdentities> {
    let n = a.rows();
    let sym = full_spectrum(&symmetrize_rectangular(a, m)?)?;
    let gram_eigs = full_spectrum(&gram(a, m)?)?;
    let total = sym.len();
    let pairing_defect = (0..total).map(|i| (sym[i] + sym[total - 1 - i]).abs()).fold(0.0, f64::max);
    let zero_count = sym.iter().filter(|v| v.abs() < ZERO_THRESHOLD).count();
    // largest n symmetrized eigenvalues pair with the ascending Gram spectrum
    let gram_defect = (0..n)
        .map(|i| (sym[total - n + i].powi(2) - gram_eigs[i]).abs())
        .fold(0.0, f64::max);
    Ok(RectangularIdentities { pairing_defect, zero_count, gram_defect })
}

/// Bulk spectrum of the model at the first configured `(n, γ₀)`, replica 0.
pub fn run_spectrum(cfg: &ExperimentConfig) -> Result<SpectrumOutcome> {
    require(cfg, Experiment::Spectrum)?;
    let report = coefficient_report(cfg)?;
    let k = report.k_star()?;
    let n = cfg.n_grid[0];
    let gamma0 = cfg.gamma0_grid[0];
    let model = build_spiked(&SpikedModelConfig {
        n,
        f: cfg.f.clone(),
        noise: cfg.noise,
        signal: cfg.signal.clone(),
        gamma: relevant_gamma(gamma0, n, k)?,
        seed: cell_stream(cfg.base_seed, n, gamma0, 0),
        couple_to_null: false,
    })?;
    let eigs = full_spectrum(&model.y)?;
    let sigma = report.sigma;
    Ok(SpectrumOutcome {
        n,
        gamma0,
        sigma,
        ks_distance: ks_semicircle(&eigs, sigma),
        histogram: SpectrumHistogram::around_semicircle(&eigs, sigma, cfg.bins)?,
    })
}
