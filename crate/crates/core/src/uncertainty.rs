//! The chi-squared confidence ball around an empirical distribution and its
//! image under conditioning on a pair of sensitive values.

use crate::error::{Error, Result};
use crate::simplex::{chi2_statistic_cells, Alphabet, JointDistribution};
use crate::special;

/// Slack applied to every membership test.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

pub use crate::special::chi2_inv_cdf;

/// Radius `F^{-1}_{|S x U| - 1}(1 - alpha) / n`.
pub fn radius_b(n: u64, alpha: f64, alphabet: &Alphabet) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidDomain("sample size must be >= 1".into()));
    }
    let dof = (alphabet.cells() - 1) as u32;
    Ok(special::chi2_inv_cdf(dof, 1.0 - alpha)? / n as f64)
}

/// Membership in `{p on the simplex : chi2(center, p) <= radius}` for raw cell vectors.
pub fn contains_cells(center: &[f64], radius: f64, p: &[f64]) -> bool {
    if p.len() != center.len() || p.iter().any(|x| !(*x >= 0.0)) {
        return false;
    }
    if (p.iter().sum::<f64>() - 1.0).abs() > MEMBERSHIP_TOL {
        return false;
    }
    chi2_statistic_cells(center, p) <= radius + MEMBERSHIP_TOL
}

/// Confidence set of radius `B` around the empirical distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySet {
    center: JointDistribution,
    radius: f64,
    alpha: Option<f64>,
    n: Option<u64>,
}

impl UncertaintySet {
    /// Radius derived from the sample size and significance level.
    pub fn from_samples(center: JointDistribution, n: u64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidDomain(format!("alpha {alpha} is not in (0, 1)")));
        }
        let radius = radius_b(n, alpha, center.alphabet())?;
        Ok(Self { center, radius, alpha: Some(alpha), n: Some(n) })
    }

    /// Explicit radius override.
    pub fn with_radius(center: JointDistribution, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidDomain(format!("radius {radius} must be finite and >= 0")));
        }
        Ok(Self { center, radius, alpha: None, n: None })
    }

    pub fn center(&self) -> &JointDistribution {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn n(&self) -> Option<u64> {
        self.n
    }

    pub fn contains(&self, p: &JointDistribution) -> bool {
        p.alphabet() == self.center.alphabet() && contains_cells(self.center.cells(), self.radius, p.cells())
    }

    /// The set of conditional pairs `(P(U|s1), P(U|s2))` over members.
    pub fn project(&self, s1: usize, s2: usize) -> Result<ProjectedUncertaintySet> {
        let s_size = self.center.alphabet().s_size();
        if s1 == s2 || s1 >= s_size || s2 >= s_size {
            return Err(Error::InvalidDomain(format!("invalid sensitive pair ({s1}, {s2})")));
        }
        let m = self.center.marginal_s();
        let rhs_constant = (self.radius + 1.0).sqrt() - 1.0 + m[s1] + m[s2];
        Ok(ProjectedUncertaintySet { parent: self.clone(), s1, s2, rhs_constant })
    }
}

/// Conditional pairs reachable from the confidence set, described by
/// `sum_i sqrt(sum_u phat(s_i, u)^2 / R_i(u)) <= C`
/// with `C = sqrt(B + 1) - 1 + phat(s1) + phat(s2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedUncertaintySet {
    parent: UncertaintySet,
    s1: usize,
    s2: usize,
    rhs_constant: f64,
}

/// `sqrt(sum_u kappa_u^2 / r_u)` with `0/0 = 0` and `k/0 = inf` for `k > 0`.
pub(crate) fn weighted_root(kappa: &[f64], r: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&k, &x) in kappa.iter().zip(r) {
        if k == 0.0 {
            continue;
        }
        if x <= 0.0 {
            return f64::INFINITY;
        }
        total += k * k / x;
    }
    total.sqrt()
}

fn on_simplex(r: &[f64], len: usize) -> bool {
    r.len() == len && r.iter().all(|x| *x >= 0.0) && (r.iter().sum::<f64>() - 1.0).abs() <= MEMBERSHIP_TOL
}

impl ProjectedUncertaintySet {
    pub fn parent(&self) -> &UncertaintySet {
        &self.parent
    }

    pub fn pair(&self) -> (usize, usize) {
        (self.s1, self.s2)
    }

    pub fn rhs_constant(&self) -> f64 {
        self.rhs_constant
    }

    /// Joint empirical rows `phat(s1, .)` and `phat(s2, .)`.
    pub fn kappas(&self) -> (&[f64], &[f64]) {
        let c = self.parent.center();
        (c.row(self.s1), c.row(self.s2))
    }

    /// Left-hand side of the defining inequality.
    pub fn lhs(&self, r1: &[f64], r2: &[f64]) -> f64 {
        let (k1, k2) = self.kappas();
        weighted_root(k1, r1) + weighted_root(k2, r2)
    }

    pub fn contains(&self, r1: &[f64], r2: &[f64]) -> bool {
        let k = self.parent.center().alphabet().u_size();
        on_simplex(r1, k) && on_simplex(r2, k) && self.lhs(r1, r2) <= self.rhs_constant + MEMBERSHIP_TOL
    }

    /// Builds a member of the parent set whose conditionals at `s1` and `s2`
    /// are `r1` and `r2`: rows `s1`, `s2` are rescaled copies of `r1`, `r2`
    /// with weights `kappa_1`, `kappa_2`, all other rows keep their empirical
    /// mass `kappa_3`, and the whole table is divided by the total weight.
    pub fn lift(&self, r1: &[f64], r2: &[f64]) -> Result<JointDistribution> {
        if !self.contains(r1, r2) {
            return Err(Error::LiftingInfeasible("pair violates the projected constraint".into()));
        }
        let center = self.parent.center();
        let m = center.marginal_s();
        if m[self.s1] <= 0.0 || m[self.s2] <= 0.0 {
            return Err(Error::LiftingInfeasible("an empirical marginal of the pair is zero".into()));
        }
        let (k1, k2) = self.kappas();
        let kappa1 = weighted_root(k1, r1);
        let kappa2 = weighted_root(k2, r2);
        let alphabet = center.alphabet().clone();
        let u_size = alphabet.u_size();
        let mut weights = center.cells().to_vec();
        for u in 0..u_size {
            weights[alphabet.index(self.s1, u)] = kappa1 * r1[u];
            weights[alphabet.index(self.s2, u)] = kappa2 * r2[u];
        }
        JointDistribution::from_weights(alphabet, weights)
    }
}
