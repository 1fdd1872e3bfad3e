//! Finite-alphabet probability tables over sensitive values `s` and
//! public values `u`, together with sampling and estimation helpers.
//!
//! Cells are stored row-major: `(s, u)` lives at `s * u_size + u`.

use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Absolute tolerance on the total mass of a distribution.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Sensitive alphabet `S = {0..s_size}` and public alphabet `U`, whose
/// elements carry real values used by the distortion. Releases use `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    s_size: usize,
    u_values: Vec<f64>,
}

impl Alphabet {
    /// Alphabet with `u_values = 0, 1, ..., u_size - 1`.
    pub fn new(s_size: usize, u_size: usize) -> Result<Self> {
        Self::with_u_values(s_size, (0..u_size).map(|u| u as f64).collect())
    }

    pub fn with_u_values(s_size: usize, u_values: Vec<f64>) -> Result<Self> {
        if s_size < 2 {
            return Err(Error::InvalidAlphabet(format!("s_size must be >= 2, got {s_size}")));
        }
        if u_values.len() < 2 {
            return Err(Error::InvalidAlphabet(format!(
                "u_size must be >= 2, got {}",
                u_values.len()
            )));
        }
        if u_values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidAlphabet("u_values must be finite".into()));
        }
        for (i, a) in u_values.iter().enumerate() {
            if u_values[..i].contains(a) {
                return Err(Error::InvalidAlphabet(format!("duplicate u value {a}")));
            }
        }
        Ok(Self { s_size, u_values })
    }

    pub fn s_size(&self) -> usize {
        self.s_size
    }

    pub fn u_size(&self) -> usize {
        self.u_values.len()
    }

    /// Output alphabet size; outputs range over `U`.
    pub fn y_size(&self) -> usize {
        self.u_values.len()
    }

    pub fn u_values(&self) -> &[f64] {
        &self.u_values
    }

    /// Number of `(s, u)` cells.
    pub fn cells(&self) -> usize {
        self.s_size * self.u_size()
    }

    #[inline]
    pub fn index(&self, s: usize, u: usize) -> usize {
        s * self.u_size() + u
    }

    fn has_default_values(&self) -> bool {
        self.u_values.iter().enumerate().all(|(i, &v)| v == i as f64)
    }
}

/// Serialized layout shared by distributions and sample sets.
#[derive(Serialize, Deserialize)]
struct DistributionDoc {
    s_size: usize,
    u_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u_values: Option<Vec<f64>>,
    p: Vec<f64>,
}

fn alphabet_from_doc(s_size: usize, u_size: usize, u_values: Option<Vec<f64>>) -> Result<Alphabet> {
    match u_values {
        Some(values) => {
            if values.len() != u_size {
                return Err(Error::InvalidAlphabet(format!(
                    "u_values has {} entries, u_size is {u_size}",
                    values.len()
                )));
            }
            Alphabet::with_u_values(s_size, values)
        }
        None => Alphabet::new(s_size, u_size),
    }
}

/// A probability table over `S x U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionDoc", into = "DistributionDoc")]
pub struct JointDistribution {
    alphabet: Alphabet,
    p: Vec<f64>,
}

impl TryFrom<DistributionDoc> for JointDistribution {
    type Error = Error;

    fn try_from(doc: DistributionDoc) -> Result<Self> {
        let alphabet = alphabet_from_doc(doc.s_size, doc.u_size, doc.u_values)?;
        JointDistribution::new(alphabet, doc.p)
    }
}

impl From<JointDistribution> for DistributionDoc {
    fn from(d: JointDistribution) -> Self {
        let u_values = (!d.alphabet.has_default_values()).then(|| d.alphabet.u_values.clone());
        DistributionDoc {
            s_size: d.alphabet.s_size(),
            u_size: d.alphabet.u_size(),
            u_values,
            p: d.p,
        }
    }
}

impl JointDistribution {
    /// Validates nonnegativity and unit mass (within [`SIMPLEX_TOL`]).
    pub fn new(alphabet: Alphabet, p: Vec<f64>) -> Result<Self> {
        if p.len() != alphabet.cells() {
            return Err(Error::InvalidDistribution(format!(
                "expected {} cells, got {}",
                alphabet.cells(),
                p.len()
            )));
        }
        if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("cell value {x} is not a probability")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!("cells sum to {total}")));
        }
        Ok(Self { alphabet, p })
    }

    /// Normalizes nonnegative weights onto the simplex.
    pub fn from_weights(alphabet: Alphabet, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidDistribution("weights must be nonnegative with positive sum".into()));
        }
        let p = weights.into_iter().map(|w| w / total).collect();
        Self::new(alphabet, p)
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let k = alphabet.cells();
        Self { p: vec![1.0 / k as f64; k], alphabet }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn cells(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, s: usize, u: usize) -> f64 {
        self.p[self.alphabet.index(s, u)]
    }

    /// The joint row `(P(s, u))_u`.
    pub fn row(&self, s: usize) -> &[f64] {
        let k = self.alphabet.u_size();
        &self.p[s * k..(s + 1) * k]
    }

    /// `P(s)` for every sensitive value.
    pub fn marginal_s(&self) -> Vec<f64> {
        (0..self.alphabet.s_size()).map(|s| self.row(s).iter().sum()).collect()
    }

    /// `P(u | s)`; fails when `P(s) = 0`.
    pub fn conditional_given_s(&self, s: usize) -> Result<Vec<f64>> {
        let row = self.row(s);
        let mass: f64 = row.iter().sum();
        if mass <= 0.0 {
            return Err(Error::DegenerateMarginal { s });
        }
        Ok(row.iter().map(|x| x / mass).collect())
    }

    /// Index of the first sensitive value with zero marginal, if any.
    pub fn degenerate_s(&self) -> Option<usize> {
        self.marginal_s().iter().position(|m| *m <= 0.0)
    }
}

/// Counts of observed `(s, u)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampleDoc", into = "SampleDoc")]
pub struct SampleSet {
    alphabet: Alphabet,
    counts: Vec<u64>,
    n: u64,
}

#[derive(Serialize, Deserialize)]
struct SampleDoc {
    s_size: usize,
    u_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u_values: Option<Vec<f64>>,
    counts: Vec<u64>,
    n: u64,
}

impl TryFrom<SampleDoc> for SampleSet {
    type Error = Error;

    fn try_from(doc: SampleDoc) -> Result<Self> {
        let alphabet = alphabet_from_doc(doc.s_size, doc.u_size, doc.u_values)?;
        let set = SampleSet::new(alphabet, doc.counts)?;
        if set.n != doc.n {
            return Err(Error::InvalidDistribution(format!(
                "counts sum to {}, document says n = {}",
                set.n, doc.n
            )));
        }
        Ok(set)
    }
}

impl From<SampleSet> for SampleDoc {
    fn from(s: SampleSet) -> Self {
        let u_values = (!s.alphabet.has_default_values()).then(|| s.alphabet.u_values.clone());
        SampleDoc {
            s_size: s.alphabet.s_size(),
            u_size: s.alphabet.u_size(),
            u_values,
            counts: s.counts,
            n: s.n,
        }
    }
}

impl SampleSet {
    pub fn new(alphabet: Alphabet, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != alphabet.cells() {
            return Err(Error::InvalidDistribution(format!(
                "expected {} count cells, got {}",
                alphabet.cells(),
                counts.len()
            )));
        }
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidDistribution("sample set is empty".into()));
        }
        Ok(Self { alphabet, counts, n })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }
}

/// Draws from the Jeffreys prior on the `S x U` simplex, the symmetric
/// Dirichlet(1/2), by normalizing independent Gamma(1/2, 1) variates.
pub fn sample_jeffreys(alphabet: &Alphabet, seed: u64) -> JointDistribution {
    let mut rng = rng_from_seed(seed);
    let gamma = Gamma::new(0.5, 1.0).expect("valid gamma parameters");
    loop {
        let w: Vec<f64> = (0..alphabet.cells()).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 && w.iter().all(|x| *x > 0.0) {
            let p = w.into_iter().map(|x| x / total).collect();
            return renormalized(alphabet.clone(), p);
        }
    }
}

/// Final pass that absorbs rounding so the sum lands within tolerance.
fn renormalized(alphabet: Alphabet, mut p: Vec<f64>) -> JointDistribution {
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        p.iter_mut().for_each(|x| *x /= total);
    }
    JointDistribution { alphabet, p }
}

/// `n` i.i.d. draws of `(s, u)` from `p`.
pub fn draw_samples(p: &JointDistribution, n: u64, seed: u64) -> SampleSet {
    assert!(n >= 1, "draw_samples requires n >= 1");
    let mut rng = rng_from_seed(seed);
    let sampler = WeightedIndex::new(p.cells()).expect("distribution has positive mass");
    let mut counts = vec![0u64; p.cells().len()];
    for _ in 0..n {
        counts[sampler.sample(&mut rng)] += 1;
    }
    SampleSet { alphabet: p.alphabet().clone(), counts, n }
}

/// Relative frequencies `counts / n`.
pub fn empirical(sample: &SampleSet) -> JointDistribution {
    let n = sample.n as f64;
    let p = sample.counts.iter().map(|&c| c as f64 / n).collect();
    renormalized(sample.alphabet.clone(), p)
}

/// Pearson statistic `sum (phat - p)^2 / p` with the candidate `p` in the
/// denominator. Cells where both are zero contribute nothing; a zero
/// candidate cell against a nonzero empirical cell yields `+inf`.
pub fn chi2_statistic_cells(phat: &[f64], p: &[f64]) -> f64 {
    assert_eq!(phat.len(), p.len(), "cell vectors differ in length");
    let mut total = 0.0;
    for (&a, &b) in phat.iter().zip(p) {
        if b <= 0.0 {
            if a != b {
                return f64::INFINITY;
            }
            continue;
        }
        total += (a - b) * (a - b) / b;
    }
    total
}

pub fn chi2_statistic(phat: &JointDistribution, p: &JointDistribution) -> Result<f64> {
    if phat.alphabet() != p.alphabet() {
        return Err(Error::AlphabetMismatch("chi-squared statistic".into()));
    }
    Ok(chi2_statistic_cells(phat.cells(), p.cells()))
}

/// Uniform draw from a simplex of dimension `k` (Dirichlet(1)).
pub(crate) fn uniform_simplex_point<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}
