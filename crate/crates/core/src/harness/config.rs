//! Flat `key = value` experiment configuration.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Lists are comma separated, except `signals`, whose entries may contain
//! commas themselves (`discrete:` laws) and are separated by `;`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coefficients::{NonlinearitySpec, DEFAULT_K_MAX};
use crate::distributions::{NoiseSpec, SignalSpec};
use crate::spectral::SolverOptions;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Sweep,
    Equivalence,
    Spectrum,
    RankK,
    Rectangular,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sweep => "sweep",
            Experiment::Equivalence => "equivalence",
            Experiment::Spectrum => "spectrum",
            Experiment::RankK => "rank_k",
            Experiment::Rectangular => "rectangular",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sweep" => Experiment::Sweep,
            "equivalence" => Experiment::Equivalence,
            "spectrum" => Experiment::Spectrum,
            "rank_k" | "rank-k" => Experiment::RankK,
            "rectangular" => Experiment::Rectangular,
            _ => return Err(Error::config(format!("unknown experiment `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Plotdata,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "plotdata" => Ok(OutputFormat::Plotdata),
            _ => Err(Error::config(format!("unknown output format `{s}` (expected csv, json or plotdata)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub f: NonlinearitySpec,
    pub noise: NoiseSpec,
    pub signal: SignalSpec,
    pub n_grid: Vec<usize>,
    /// Column counts of the rectangular model, paired with `n_grid`.
    pub m_grid: Vec<usize>,
    pub gamma0_grid: Vec<f64>,
    pub replicas: usize,
    pub base_seed: u64,
    pub solver: SolverOptions,
    pub k_max: usize,
    /// Index-detection tolerance; `None` selects the default.
    pub tol_index: Option<f64>,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    /// Rank-K signal laws.
    pub signals: Vec<SignalSpec>,
    /// Rank-K relative strengths: `γ₀,l = γ₀ · w_l`.
    pub spike_weights: Vec<f64>,
    pub signal_u: SignalSpec,
    pub signal_v: SignalSpec,
    pub bins: usize,
    /// Record wall-clock times (makes output non-reproducible).
    pub timing: bool,
    pub workers: Option<usize>,
}

pub const DEFAULT_N_GRID: [usize; 4] = [500, 1000, 2000, 4000];
pub const DEFAULT_REPLICAS: usize = 8;
pub const DEFAULT_BINS: usize = 40;

impl ExperimentConfig {
    /// Defaults for everything but the experiment kind.
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            f: NonlinearitySpec::Identity,
            noise: NoiseSpec::gaussian(),
            signal: SignalSpec::gaussian(),
            n_grid: DEFAULT_N_GRID.to_vec(),
            m_grid: Vec::new(),
            gamma0_grid: Vec::new(),
            replicas: DEFAULT_REPLICAS,
            base_seed: 0,
            solver: SolverOptions::default(),
            k_max: DEFAULT_K_MAX,
            tol_index: None,
            output: None,
            format: OutputFormat::Csv,
            signals: Vec::new(),
            spike_weights: Vec::new(),
            signal_u: SignalSpec::gaussian(),
            signal_v: SignalSpec::gaussian(),
            bins: DEFAULT_BINS,
            timing: false,
            workers: None,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs: Vec<(usize, String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config { line: line_no, msg: format!("expected `key = value`, got `{line}`") })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.is_empty() {
                return Err(Error::Config { line: line_no, msg: "empty key".into() });
            }
            if pairs.iter().any(|(_, pk, _)| *pk == k) {
                return Err(Error::Config { line: line_no, msg: format!("duplicate key `{k}`") });
            }
            pairs.push((line_no, k, v));
        }
        let experiment = pairs
            .iter()
            .find(|(_, k, _)| k == "experiment")
            .map(|(line, _, v)| v.parse::<Experiment>().map_err(|e| at_line(*line, e)))
            .transpose()?
            .ok_or(Error::Config { line: 0, msg: "missing required key `experiment`".into() })?;
        let mut cfg = Self::new(experiment);
        for (line, key, value) in &pairs {
            cfg.set(key, value).map_err(|e| at_line(*line, e))?;
        }
        cfg.finish()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "experiment" => {}
            "f" => self.f = v.parse()?,
            "noise" => self.noise = v.parse()?,
            "signal" => self.signal = v.parse()?,
            "n_grid" => self.n_grid = parse_list(v)?,
            "m_grid" => self.m_grid = parse_list(v)?,
            "gamma0_grid" => self.gamma0_grid = parse_list(v)?,
            "replicas" => self.replicas = parse_one(v)?,
            "base_seed" => self.base_seed = parse_one(v)?,
            "tol" => self.solver.tol = parse_one(v)?,
            "max_iter" => self.solver.max_iter = parse_one(v)?,
            "max_restarts" => self.solver.max_restarts = parse_one(v)?,
            "kmax" => self.k_max = parse_one(v)?,
            "index_tol" => self.tol_index = Some(parse_one(v)?),
            "output" => self.output = Some(PathBuf::from(v)),
            "format" => self.format = v.parse()?,
            "signals" => {
                self.signals = v.split(';').map(|s| s.trim().parse()).collect::<Result<_>>()?;
            }
            "spike_weights" => self.spike_weights = parse_list(v)?,
            "signal_u" => self.signal_u = v.parse()?,
            "signal_v" => self.signal_v = v.parse()?,
            "bins" => self.bins = parse_one(v)?,
            "timing" => self.timing = parse_one(v)?,
            "workers" => self.workers = Some(parse_one(v)?),
            _ => return Err(Error::config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Cross-field defaults and validation.
    pub fn finish(&mut self) -> Result<()> {
        use Experiment::*;
        if self.gamma0_grid.is_empty() {
            if self.experiment == Spectrum {
                self.gamma0_grid = vec![0.0];
            } else {
                return Err(Error::config("`gamma0_grid` must not be empty"));
            }
        }
        if self.n_grid.is_empty() {
            return Err(Error::config("`n_grid` must not be empty"));
        }
        if self.replicas == 0 {
            return Err(Error::config("`replicas` must be at least 1"));
        }
        if let Some(g) = self.gamma0_grid.iter().find(|g| !g.is_finite()) {
            return Err(Error::config(format!("non-finite gamma0 {g}")));
        }
        let min_n = if self.experiment == Rectangular { 1 } else { 2 };
        if let Some(n) = self.n_grid.iter().find(|&&n| n < min_n) {
            return Err(Error::config(format!("matrix size {n} too small")));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter < 4 {
            return Err(Error::config("solver needs tol > 0 and max_iter >= 4"));
        }
        if self.k_max < 1 {
            return Err(Error::config("`kmax` must be at least 1"));
        }
        if self.bins == 0 {
            return Err(Error::config("`bins` must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("`workers` must be at least 1"));
        }
        self.f.validate().map_err(|e| Error::config(e.to_string()))?;
        if self.experiment == RankK {
            match (self.signals.len(), self.spike_weights.len()) {
                (0, 0) => {
                    self.signals = vec![self.signal.clone()];
                    self.spike_weights = vec![1.0];
                }
                (0, k) => self.signals = vec![self.signal.clone(); k],
                (k, 0) => self.spike_weights = vec![1.0; k],
                (a, b) if a != b => {
                    return Err(Error::config(format!("{a} signals but {b} spike weights")));
                }
                _ => {}
            }
        }
        if self.experiment == Rectangular {
            if self.m_grid.len() != self.n_grid.len() {
                return Err(Error::config("`m_grid` must pair one column count with each entry of `n_grid`"));
            }
            if let Some((n, m)) = self.n_grid.iter().zip(&self.m_grid).find(|(n, m)| n > m) {
                return Err(Error::config(format!("rectangular model needs n <= m (got {n} > {m})")));
            }
        }
        Ok(())
    }
}

fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::Config { line: 0, msg } => Error::Config { line, msg },
        Error::Config { .. } => e,
        other => Error::Config { line, msg: other.to_string() },
    }
}

fn parse_one<T: FromStr>(v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.trim().parse().map_err(|e| Error::config(format!("cannot parse `{v}`: {e}")))
}

fn parse_list<T: FromStr>(v: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(parse_one).collect()
}
