//! Performance of a deployed release mechanism under a given distribution.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::problems::Variant;
use crate::simplex::{Alphabet, JointDistribution};

/// Row-sum tolerance for mechanisms.
pub const MECHANISM_TOL: f64 = 1e-9;
/// Channel probabilities below this are treated as exact zeros by [`epsilon_star`].
pub const ZERO_THRESHOLD: f64 = 1e-12;

/// Release channel `P(y | s, u)` over outputs `y` in `U`, stored `(s, u, y)` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MechanismDoc", into = "MechanismDoc")]
pub struct Mechanism {
    alphabet: Alphabet,
    p: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MechanismDoc {
    s_size: usize,
    u_size: usize,
    y_size: usize,
    p: Vec<f64>,
}

impl TryFrom<MechanismDoc> for Mechanism {
    type Error = Error;

    fn try_from(doc: MechanismDoc) -> Result<Self> {
        if doc.y_size != doc.u_size {
            return Err(Error::InvalidDistribution("output alphabet must equal the input alphabet".into()));
        }
        Mechanism::new(Alphabet::new(doc.s_size, doc.u_size)?, doc.p)
    }
}

impl From<Mechanism> for MechanismDoc {
    fn from(m: Mechanism) -> Self {
        MechanismDoc { s_size: m.alphabet.s_size(), u_size: m.alphabet.u_size(), y_size: m.alphabet.y_size(), p: m.p }
    }
}

impl Mechanism {
    pub fn new(alphabet: Alphabet, p: Vec<f64>) -> Result<Self> {
        let ys = alphabet.y_size();
        if p.len() != alphabet.cells() * ys {
            return Err(Error::InvalidDistribution(format!(
                "mechanism needs {} entries, got {}",
                alphabet.cells() * ys,
                p.len()
            )));
        }
        if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidDistribution("mechanism entries must be nonnegative".into()));
        }
        for (i, row) in p.chunks(ys).enumerate() {
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > MECHANISM_TOL {
                return Err(Error::InvalidDistribution(format!("row {i} sums to {total}")));
            }
        }
        Ok(Self { alphabet, p })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn entries(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, s: usize, u: usize, y: usize) -> f64 {
        let (us, ys) = (self.alphabet.u_size(), self.alphabet.y_size());
        self.p[(s * us + u) * ys + y]
    }

    /// Release distribution `P(. | s, u)`.
    pub fn row(&self, s: usize, u: usize) -> &[f64] {
        let ys = self.alphabet.y_size();
        let start = self.alphabet.index(s, u) * ys;
        &self.p[start..start + ys]
    }
}

/// Every `(s, u)` releases `y0`.
pub fn constant_mechanism(alphabet: &Alphabet, y0: usize) -> Result<Mechanism> {
    let ys = alphabet.y_size();
    if y0 >= ys {
        return Err(Error::InvalidDomain(format!("output {y0} is outside the alphabet")));
    }
    let mut p = vec![0.0; alphabet.cells() * ys];
    for row in p.chunks_mut(ys) {
        row[y0] = 1.0;
    }
    Mechanism::new(alphabet.clone(), p)
}

/// Releases `Y = U`.
pub fn identity_mechanism(alphabet: &Alphabet) -> Mechanism {
    let ys = alphabet.y_size();
    let mut p = vec![0.0; alphabet.cells() * ys];
    for s in 0..alphabet.s_size() {
        for u in 0..alphabet.u_size() {
            p[alphabet.index(s, u) * ys + u] = 1.0;
        }
    }
    Mechanism { alphabet: alphabet.clone(), p }
}

fn check_alphabets(p: &JointDistribution, mech: &Mechanism) -> Result<()> {
    if p.alphabet().s_size() != mech.alphabet.s_size() || p.alphabet().u_size() != mech.alphabet.u_size() {
        return Err(Error::AlphabetMismatch("distribution and mechanism".into()));
    }
    Ok(())
}

/// Expected distortion `sum P(s,u) P(y|s,u) d(u,y)` for a `u x y` row-major matrix.
pub fn distortion(p: &JointDistribution, mech: &Mechanism, d: &[f64]) -> Result<f64> {
    check_alphabets(p, mech)?;
    let a = p.alphabet();
    let ys = a.y_size();
    if d.len() != a.u_size() * ys {
        return Err(Error::InvalidDomain("distortion matrix has the wrong shape".into()));
    }
    let mut total = 0.0;
    for s in 0..a.s_size() {
        for u in 0..a.u_size() {
            let inner: f64 = mech.row(s, u).iter().zip(&d[u * ys..(u + 1) * ys]).map(|(m, d)| m * d).sum();
            total += p.get(s, u) * inner;
        }
    }
    Ok(total)
}

/// `P(y | s) = sum_u P(u|s) P(y|s,u)`, one row per `s`.
pub fn induced_channel(p: &JointDistribution, mech: &Mechanism) -> Result<Vec<Vec<f64>>> {
    check_alphabets(p, mech)?;
    let a = p.alphabet();
    (0..a.s_size())
        .map(|s| {
            let cond = p.conditional_given_s(s)?;
            let mut out = vec![0.0; a.y_size()];
            for (u, pu) in cond.iter().enumerate() {
                for (o, m) in out.iter_mut().zip(mech.row(s, u)) {
                    *o += pu * m;
                }
            }
            Ok(out)
        })
        .collect()
}

/// Realized leakage `log max_{y,s1,s2} P(y|s1) / P(y|s2)` with `0/0 = 1` and
/// `+inf` when a zero denominator meets a positive numerator.
pub fn epsilon_star(p: &JointDistribution, mech: &Mechanism) -> Result<f64> {
    let channel = induced_channel(p, mech)?;
    let zero = |x: f64| x < ZERO_THRESHOLD;
    let mut worst: f64 = 1.0;
    for y in 0..p.alphabet().y_size() {
        for a in &channel {
            for b in &channel {
                let (num, den) = (a[y], b[y]);
                match (zero(num), zero(den)) {
                    (true, _) => {}
                    (false, true) => return Ok(f64::INFINITY),
                    (false, false) => worst = worst.max(num / den),
                }
            }
        }
    }
    Ok(worst.ln())
}

pub(crate) fn serialize_extended<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() && *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*x)
    }
}

pub(crate) fn deserialize_extended<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Ext {
        Num(f64),
        Text(String),
    }
    match Ext::deserialize(d)? {
        Ext::Num(x) => Ok(x),
        Ext::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Ext::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
    }
}

/// Outcome of one solved variant evaluated under the true distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub variant: Variant,
    pub d_star: f64,
    #[serde(serialize_with = "serialize_extended", deserialize_with = "deserialize_extended")]
    pub eps_star: f64,
    pub eps_star_infinite: bool,
    #[serde(rename = "pstar_in_F")]
    pub pstar_in_f: bool,
    pub objective: f64,
    /// Largest residual found by solution verification.
    pub max_residual: f64,
    /// Largest re-evaluated robust constraint value, when the variant has any.
    pub semantic_max: Option<f64>,
    pub repair: f64,
}

impl PerformanceReport {
    pub fn new(
        variant: Variant,
        d_star: f64,
        eps_star: f64,
        pstar_in_f: bool,
        objective: f64,
    ) -> Self {
        Self {
            variant,
            d_star,
            eps_star,
            eps_star_infinite: eps_star.is_infinite(),
            pstar_in_f,
            objective,
            max_residual: 0.0,
            semantic_max: None,
            repair: 0.0,
        }
    }
}
