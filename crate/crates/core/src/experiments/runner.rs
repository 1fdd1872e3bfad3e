use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::stats::{summarize, Summary};
use crate::error::{Error, Result};
use crate::evaluation::{distortion, epsilon_star, PerformanceReport};
use crate::problems::{solve_problem, ClarabelSolver, ConicSolver, ProblemSpec, Variant};
use crate::seed::derive_seed;
use crate::simplex::{draw_samples, empirical, sample_jeffreys, JointDistribution};
use crate::uncertainty::UncertaintySet;

/// Resampling attempts allowed when the data leave a sensitive value unseen.
pub const MAX_RESAMPLES: u32 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantOutcome {
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PerformanceReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance: usize,
    pub seed: u64,
    pub sample_seed: u64,
    pub n: u64,
    /// Truncated SHA-256 of the true distribution's cell bits.
    pub pstar_hash: String,
    pub pstar_in_f: bool,
    /// Data sets discarded because some sensitive value was never observed.
    pub resamples: u32,
    pub outcomes: Vec<VariantOutcome>,
}

impl InstanceRecord {
    pub fn report(&self, variant: Variant) -> Option<&PerformanceReport> {
        self.outcomes.iter().find(|o| o.variant == variant).and_then(|o| o.report.as_ref())
    }

    pub fn failures(&self) -> impl Iterator<Item = &VariantOutcome> {
        self.outcomes.iter().filter(|o| o.error.is_some())
    }
}

pub fn distribution_hash(p: &JointDistribution) -> String {
    let mut h = Sha256::new();
    for x in p.cells() {
        h.update(x.to_bits().to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// Seed of instance `index`.
pub fn instance_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, index as u64)
}

/// Draws the true distribution and a data set with every sensitive value
/// observed. Returns the distribution, the empirical distribution, the seed
/// of the accepted data set and the number of discarded data sets.
pub fn draw_instance(
    config: &ExperimentConfig,
    seed: u64,
    n: u64,
) -> Result<(JointDistribution, JointDistribution, u64, u32)> {
    let alphabet = config.alphabet()?;
    let pstar = sample_jeffreys(&alphabet, derive_seed(seed, 0));
    for attempt in 0..MAX_RESAMPLES {
        let sample_seed = derive_seed(seed, 1 + attempt as u64);
        let phat = empirical(&draw_samples(&pstar, n, sample_seed));
        if phat.degenerate_s().is_none() {
            return Ok((pstar, phat, sample_seed, attempt));
        }
    }
    Err(Error::InsufficientData(format!("no data set with all sensitive values after {MAX_RESAMPLES} draws")))
}

fn solve_variant(
    config: &ExperimentConfig,
    solver: &dyn ConicSolver,
    set: &UncertaintySet,
    pstar: &JointDistribution,
    variant: Variant,
) -> Result<PerformanceReport> {
    let spec = ProblemSpec::new(variant, set.clone(), config.epsilon, config.distortion.clone())?;
    let solved = solve_problem(&spec, solver, config.solver_tol)?;
    let d_star = distortion(pstar, &solved.mechanism, &solved.built.distortion)?;
    let eps_star = epsilon_star(pstar, &solved.mechanism)?;
    let mut report = PerformanceReport::new(variant, d_star, eps_star, set.contains(pstar), solved.solution.objective);
    report.max_residual = solved.verification.max_residual();
    report.semantic_max = solved.verification.semantic_max();
    report.repair = solved.repair;
    Ok(report)
}

/// One Monte-Carlo instance with sample size `n`. Solver errors are recorded
/// per variant; only a failure to draw usable data aborts the instance.
pub fn run_instance(config: &ExperimentConfig, index: usize, n: u64) -> Result<InstanceRecord> {
    let seed = instance_seed(config.seed, index);
    let (pstar, phat, sample_seed, resamples) = draw_instance(config, seed, n)?;
    let set = UncertaintySet::from_samples(phat, n, config.alpha)?;
    let solver = ClarabelSolver::default();
    let outcomes = config
        .variants
        .iter()
        .map(|&variant| match solve_variant(config, &solver, &set, &pstar, variant) {
            Ok(report) => VariantOutcome { variant, report: Some(report), error: None },
            Err(e) => VariantOutcome { variant, report: None, error: Some(e.to_string()) },
        })
        .collect();
    Ok(InstanceRecord {
        instance: index,
        seed,
        sample_seed,
        n,
        pstar_hash: distribution_hash(&pstar),
        pstar_in_f: set.contains(&pstar),
        resamples,
        outcomes,
    })
}

fn run_all(config: &ExperimentConfig, n: u64, workers: usize) -> Result<Vec<InstanceRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| (0..config.k).into_par_iter().map(|i| run_instance(config, i, n)).collect())
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_owned()
    } else {
        format!("{x}")
    }
}

pub const SCATTER_HEADER: [&str; 7] = ["instance", "seed", "variant", "eps_star", "d_star", "objective", "pstar_in_F"];
pub const SWEEP_HEADER: [&str; 9] =
    ["N", "variant", "mean_eps", "std_eps", "mean_d", "std_d", "outliers_eps", "outliers_d", "n_inf"];

#[derive(Debug, Clone)]
pub struct ScatterOutput {
    pub records: Vec<InstanceRecord>,
    pub csv: String,
}

impl ScatterOutput {
    pub fn failures(&self) -> usize {
        self.records.iter().map(|r| r.failures().count()).sum()
    }
}

/// `K` instances at a single sample size, one CSV row per solved variant.
/// Variants whose solve failed have no row; see [`ScatterOutput::failures`].
pub fn run_scatter(config: &ExperimentConfig, workers: usize) -> Result<ScatterOutput> {
    config.validate()?;
    let n = config.scatter_n()?;
    let records = run_all(config, n, workers)?;
    let mut w = csv_writer();
    w.write_record(SCATTER_HEADER)?;
    for r in &records {
        for o in &r.outcomes {
            if let Some(rep) = &o.report {
                w.write_record([
                    r.instance.to_string(),
                    r.seed.to_string(),
                    o.variant.to_string(),
                    fmt_num(rep.eps_star),
                    fmt_num(rep.d_star),
                    fmt_num(rep.objective),
                    rep.pstar_in_f.to_string(),
                ])?;
            }
        }
    }
    Ok(ScatterOutput { csv: finish(w)?, records })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub big_n: u64,
    pub variant: Variant,
    pub eps: Summary,
    pub d: Summary,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<Vec<InstanceRecord>>,
    pub rows: Vec<SweepRow>,
    pub csv: String,
}

impl SweepOutput {
    pub fn failures(&self) -> usize {
        self.records.iter().flatten().map(|r| r.failures().count()).sum()
    }
}

/// `K` instances per sweep value with per-metric outlier filtering.
pub fn run_sweep(config: &ExperimentConfig, workers: usize) -> Result<SweepOutput> {
    config.validate()?;
    let mut all = Vec::new();
    let mut rows = Vec::new();
    for (big_n, n) in config.sweep_points()? {
        let records = run_all(config, n, workers)?;
        for &variant in &config.variants {
            let reports: Vec<&PerformanceReport> = records.iter().filter_map(|r| r.report(variant)).collect();
            let eps: Vec<f64> = reports.iter().map(|r| r.eps_star).collect();
            let d: Vec<f64> = reports.iter().map(|r| r.d_star).collect();
            let eps = summarize(&eps).map_err(|e| Error::InsufficientData(format!("N={big_n} {variant} eps: {e}")))?;
            let d = summarize(&d).map_err(|e| Error::InsufficientData(format!("N={big_n} {variant} D: {e}")))?;
            rows.push(SweepRow { big_n, variant, eps, d });
        }
        all.push(records);
    }
    let mut w = csv_writer();
    w.write_record(SWEEP_HEADER)?;
    for r in &rows {
        w.write_record([
            r.big_n.to_string(),
            r.variant.to_string(),
            fmt_num(r.eps.mean),
            fmt_num(r.eps.std),
            fmt_num(r.d.mean),
            fmt_num(r.d.std),
            r.eps.n_outliers.to_string(),
            r.d.n_outliers.to_string(),
            r.eps.n_inf.to_string(),
        ])?;
    }
    Ok(SweepOutput { records: all, rows, csv: finish(w)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(k: usize) -> ExperimentConfig {
        ExperimentConfig { k, n: Some(40), variants: vec![Variant::Nunp, Variant::Runp], ..Default::default() }
    }

    #[test]
    fn instance_is_reproducible() {
        let cfg = small(1);
        let a = run_instance(&cfg, 3, 40).unwrap();
        let b = run_instance(&cfg, 3, 40).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.outcomes.len(), 2);
        assert_eq!(a.pstar_hash.len(), 16);
    }

    #[test]
    fn scatter_shape() {
        let out = run_scatter(&small(2), 1).unwrap();
        let lines: Vec<&str> = out.csv.lines().collect();
        assert_eq!(lines[0], "instance,seed,variant,eps_star,d_star,objective,pstar_in_F");
        assert_eq!(lines.len(), 5);
        assert!(!out.csv.contains('\r'));
        assert!(!out.csv.to_lowercase().contains("nan"));
    }

    #[test]
    fn tiny_samples_resample() {
        let cfg = ExperimentConfig { k: 1, n: Some(3), ..Default::default() };
        let (_, phat, _, resamples) = draw_instance(&cfg, 11, 3).unwrap();
        assert!(phat.degenerate_s().is_none());
        assert!(resamples <= MAX_RESAMPLES);
    }
}
