use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{DistortionSpec, Variant, PRIMAL_TOL};
use crate::simplex::Alphabet;

/// Environment variable overriding the configured worker count.
pub const WORKERS_ENV: &str = "RLDP_WORKERS";

/// Campaign description, read from JSON.
///
/// `n` is the sample size of a scatter campaign. `n_list` holds the sweep
/// values `N`; each sweep point draws `N * |S| * |U|` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_s")]
    pub s_size: usize,
    #[serde(default = "default_u")]
    pub u_size: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(rename = "K", alias = "k")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<u64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub distortion: DistortionSpec,
    #[serde(default = "default_tol")]
    pub solver_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn default_s() -> usize {
    3
}
fn default_u() -> usize {
    5
}
fn default_alpha() -> f64 {
    0.05
}
fn default_epsilon() -> f64 {
    0.5
}
fn default_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}
fn default_tol() -> f64 {
    PRIMAL_TOL
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            s_size: default_s(),
            u_size: default_u(),
            alpha: default_alpha(),
            epsilon: default_epsilon(),
            k: 30,
            n: Some(75),
            n_list: None,
            seed: 0,
            variants: default_variants(),
            distortion: DistortionSpec::Squared,
            solver_tol: default_tol(),
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn alphabet(&self) -> Result<Alphabet> {
        Alphabet::new(self.s_size, self.u_size)
    }

    pub fn validate(&self) -> Result<()> {
        let alphabet = self.alphabet()?;
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("no variants requested".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} is not in (0, 1)", self.alpha)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon {} must be finite and >= 0", self.epsilon)));
        }
        if !(self.solver_tol > 0.0) {
            return Err(Error::Config("solver_tol must be positive".into()));
        }
        if self.n == Some(0) || self.n_list.as_ref().is_some_and(|l| l.contains(&0)) {
            return Err(Error::Config("sample sizes must be >= 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        self.distortion.matrix(&alphabet)?;
        Ok(())
    }

    /// Sample size of a scatter campaign.
    pub fn scatter_n(&self) -> Result<u64> {
        match (self.n, &self.n_list) {
            (Some(n), _) => Ok(n),
            (None, Some(list)) if list.len() == 1 => Ok(list[0] * self.cells()),
            _ => Err(Error::Config("a scatter campaign needs a single n".into())),
        }
    }

    /// `(N, n)` pairs of a sweep campaign.
    pub fn sweep_points(&self) -> Result<Vec<(u64, u64)>> {
        match &self.n_list {
            Some(list) if !list.is_empty() => Ok(list.iter().map(|&big| (big, big * self.cells())).collect()),
            _ => Err(Error::Config("a sweep campaign needs a nonempty n_list".into())),
        }
    }

    fn cells(&self) -> u64 {
        (self.s_size * self.u_size) as u64
    }
}

/// Worker count: command-line flag, then [`WORKERS_ENV`], then the config,
/// then the number of available cores.
pub fn resolve_workers(flag: Option<usize>, config: Option<usize>) -> Result<usize> {
    if let Some(w) = flag {
        return if w == 0 { Err(Error::Config("--workers must be >= 1".into())) } else { Ok(w) };
    }
    if let Ok(text) = std::env::var(WORKERS_ENV) {
        return match text.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(w),
            _ => Err(Error::Config(format!("{WORKERS_ENV}={text:?} is not a positive integer"))),
        };
    }
    Ok(config.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)))
}
