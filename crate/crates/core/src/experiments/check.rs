use rand::Rng;
use serde::Serialize;

use crate::duality::{
    brute_force_support, support_f_cells, support_fproj, ChiSquareBallSampler, MemberSampler, ProjectedSampler,
    SUPPORT_TOL,
};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};
use crate::simplex::{sample_jeffreys, Alphabet, JointDistribution};
use crate::uncertainty::UncertaintySet;

/// Largest accepted distance between a closed-form value and its oracle bound.
pub const ORACLE_GAP: f64 = 1e-3;
/// Slack for oracle bounds exceeding the closed form.
pub const ORACLE_SLACK: f64 = 1e-6;
/// Samples drawn per oracle query before the boundary walk.
pub const ORACLE_SAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Ball,
    Projected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportCheck {
    pub query: usize,
    pub kind: QueryKind,
    pub closed_form: f64,
    pub oracle: f64,
    pub gap: f64,
}

impl SupportCheck {
    pub fn passed(&self) -> bool {
        self.gap <= ORACLE_GAP && self.gap >= -ORACLE_SLACK
    }
}

/// Empirical distribution bounded away from the simplex boundary.
fn interior_center(alphabet: &Alphabet, seed: u64) -> JointDistribution {
    let raw = sample_jeffreys(alphabet, seed);
    let k = alphabet.cells() as f64;
    let mixed = raw.cells().iter().map(|p| 0.8 * p + 0.2 / k).collect();
    JointDistribution::from_weights(alphabet.clone(), mixed).expect("positive weights")
}

/// Random query `query` of the suite over sets with `dims` cells: chi-squared
/// balls always, and projected sets of a `2 x dims/2` alphabet on odd queries
/// when `dims` is even and at least 4.
pub fn support_query(query: usize, dims: usize, seed: u64) -> Result<SupportCheck> {
    if dims < 2 {
        return Err(Error::InvalidDomain("support checks need at least 2 cells".into()));
    }
    let qseed = derive_seed(seed, query as u64);
    let mut rng = rng_from_seed(qseed);
    let radius = rng.random_range(0.01..0.5);
    let projected = dims >= 4 && dims % 2 == 0 && query % 2 == 1;
    if projected {
        let alphabet = Alphabet::new(2, dims / 2)?;
        let center = interior_center(&alphabet, derive_seed(qseed, 1));
        let (s1, s2) = if rng.random::<bool>() { (0, 1) } else { (1, 0) };
        let proj = UncertaintySet::with_radius(center, radius)?.project(s1, s2)?;
        let v: Vec<f64> = (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (v1, v2) = v.split_at(dims / 2);
        let (closed_form, _) = support_fproj(&proj, v1, v2, SUPPORT_TOL)?;
        let mut sampler = ProjectedSampler::new(proj)?;
        let oracle = brute_force_support(&mut sampler, &v, ORACLE_SAMPLES, derive_seed(qseed, 2));
        Ok(SupportCheck { query, kind: QueryKind::Projected, closed_form, oracle, gap: closed_form - oracle })
    } else {
        let weights: Vec<f64> = (0..dims).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let center: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let v: Vec<f64> = (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (closed_form, _) = support_f_cells(&center, radius, &v, SUPPORT_TOL)?;
        let mut sampler = ChiSquareBallSampler::new(center, radius);
        debug_assert_eq!(sampler.dim(), dims);
        let oracle = brute_force_support(&mut sampler, &v, ORACLE_SAMPLES, derive_seed(qseed, 2));
        Ok(SupportCheck { query, kind: QueryKind::Ball, closed_form, oracle, gap: closed_form - oracle })
    }
}

pub fn run_support_checks(trials: usize, dims: usize, seed: u64) -> Result<Vec<SupportCheck>> {
    (0..trials).map(|q| support_query(q, dims, seed)).collect()
}

pub fn support_checks_csv(checks: &[SupportCheck]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["query", "kind", "closed_form", "oracle", "gap"])?;
    for c in checks {
        let kind = match c.kind {
            QueryKind::Ball => "ball",
            QueryKind::Projected => "projected",
        };
        w.write_record([c.query.to_string(), kind.to_owned(), c.closed_form.to_string(), c.oracle.to_string(), c.gap.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
