//! Post-solve checks: residuals of the assembled program, re-evaluation of
//! the original robust constraints at the returned mechanism, and repair of
//! the mechanism into an exactly row-stochastic table.

use serde::{Deserialize, Serialize};

use super::{BuiltProblem, Solution};
use super::blocks::privacy_weights;
use crate::duality::{support_f, support_fproj, support_fproj_objective, SUPPORT_TOL};
use crate::error::{Error, Result};
use crate::evaluation::Mechanism;
use crate::problems::program::Residuals;

/// Largest entrywise change [`extract_mechanism`] may apply.
pub const REPAIR_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub equality: f64,
    pub nonnegative: f64,
    pub cone: f64,
    /// Largest support value of the projected set at the pinned privacy
    /// directions, weighted by [`privacy_weights`]; the robust privacy
    /// constraints require it to be `<= 0`.
    pub privacy_support: Option<f64>,
    /// Worst-case distortion minus the bound `D`.
    pub utility_excess: Option<f64>,
    pub violations: Vec<String>,
}

impl VerificationReport {
    pub fn max_residual(&self) -> f64 {
        self.equality.max(self.nonnegative).max(self.cone)
    }

    /// Largest re-evaluated robust constraint value, if the variant has any.
    pub fn semantic_max(&self) -> Option<f64> {
        match (self.privacy_support, self.utility_excess) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Recomputes every residual of `solution` and re-evaluates the robust
/// constraints by support-function evaluations at the solved mechanism.
pub fn verify_solution(built: &BuiltProblem, solution: &Solution, tol: f64) -> VerificationReport {
    let x = &solution.values;
    let Residuals { equality, nonnegative, cone } = built.program.residuals(x);
    let mut violations = Vec::new();
    for (name, r) in [("equality", equality), ("nonnegativity", nonnegative), ("cone", cone)] {
        if r > tol {
            violations.push(format!("{name} residual {r:e} exceeds {tol:e}"));
        }
    }

    let spec = &built.spec;
    let mech = &built.mechanism;
    let u_size = spec.alphabet().u_size();
    let (w1, w2) = privacy_weights(spec.epsilon);
    let mut privacy_support = None;
    for block in &built.privacy_blocks {
        let v1: Vec<f64> = (0..u_size).map(|u| w1 * x[mech.var(block.s1, u, block.y).0]).collect();
        let v2: Vec<f64> = (0..u_size).map(|u| -w2 * x[mech.var(block.s2, u, block.y).0]).collect();
        let value = spec
            .set
            .project(block.s1, block.s2)
            .and_then(|p| support_fproj(&p, &v1, &v2, SUPPORT_TOL))
            .map(|(v, _)| v);
        match value {
            Ok(v) => {
                privacy_support = Some(privacy_support.map_or(v, |m: f64| m.max(v)));
                if v > tol {
                    violations.push(format!(
                        "robust privacy (y={}, s1={}, s2={}) support {v:e} exceeds {tol:e}",
                        block.y, block.s1, block.s2
                    ));
                }
            }
            Err(e) => violations.push(format!("robust privacy (y={}, s1={}, s2={}): {e}", block.y, block.s1, block.s2)),
        }
    }

    let mut utility_excess = None;
    if let Some(d) = built.distortion_bound {
        let a = spec.alphabet();
        let v: Vec<f64> = (0..a.s_size())
            .flat_map(|s| (0..a.u_size()).map(move |u| (s, u)))
            .map(|(s, u)| mech.expected_distortion(s, u, &built.distortion).eval(x))
            .collect();
        match support_f(&spec.set, &v, SUPPORT_TOL) {
            Ok((worst, _)) => {
                let excess = worst - x[d.0];
                utility_excess = Some(excess);
                if excess > tol {
                    violations.push(format!("worst-case distortion exceeds D by {excess:e}"));
                }
            }
            Err(e) => violations.push(format!("robust utility: {e}")),
        }
    }

    VerificationReport { equality, nonnegative, cone, privacy_support, utility_excess, violations }
}

/// Reads the mechanism out of `solution`: entries clipped to `[0, 1]`, rows
/// renormalized, then mixed with the uniform-output mechanism.
///
/// The mixing weight is chosen from an upper bound on the remaining privacy
/// violation so that every privacy constraint of the variant holds strictly
/// for the returned table, not just up to solver accuracy. It lies between
/// [`MIX_MIN`] and [`MIX_MAX`]. At `eps = 0` mixing gains nothing; robust
/// variants get the average row everywhere and nominal variants have their
/// induced channels made equal instead.
pub fn extract_mechanism(built: &BuiltProblem, solution: &Solution) -> Result<Extraction> {
    let raw = built.mechanism.values(&solution.values);
    let (clipped, repair) = repair_mechanism(built.spec.alphabet().clone(), &raw)?;
    let violation = privacy_violation_bound(built, solution, &clipped)?;
    let (mechanism, mixing, strict) = if built.spec.epsilon > 0.0 {
        let needed = required_mixing(built.spec.epsilon, built.spec.alphabet().y_size(), violation);
        let mixing = needed.clamp(MIX_MIN, MIX_MAX);
        (mix_uniform(&clipped, mixing)?, mixing, needed <= MIX_MAX)
    } else if built.spec.variant.robust_privacy() {
        (average_rows(&clipped)?, 0.0, true)
    } else {
        let (m, mixing) = equalize_channels(&clipped, built.spec.phat())?;
        (m, mixing, true)
    };
    let adjustment = mechanism
        .entries()
        .iter()
        .zip(&raw)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if !(adjustment <= REPAIR_LIMIT) {
        return Err(Error::ExcessiveRepair { adjustment, limit: REPAIR_LIMIT });
    }
    Ok(Extraction { mechanism, adjustment, repair, mixing, violation, strict })
}

/// Every row replaced by the average row: the only mechanisms private at
/// `eps = 0` over a set with interior.
fn average_rows(mech: &Mechanism) -> Result<Mechanism> {
    let a = mech.alphabet();
    let rows = (a.s_size() * a.u_size()) as f64;
    let mut avg = vec![0.0; a.y_size()];
    for row in mech.entries().chunks(a.y_size()) {
        for (m, x) in avg.iter_mut().zip(row) {
            *m += x / rows;
        }
    }
    Mechanism::new(a.clone(), avg.iter().copied().cycle().take(mech.entries().len()).collect())
}

/// Mixes the rows of each sensitive value `s` with their own output
/// distribution `q_s` so that every induced channel under `phat` becomes
/// `(1 - lambda) cbar + lambda / |Y|`, where `cbar` is the mean channel.
fn equalize_channels(mech: &Mechanism, phat: &crate::simplex::JointDistribution) -> Result<(Mechanism, f64)> {
    let a = mech.alphabet();
    let (ss, us, ys) = (a.s_size(), a.u_size(), a.y_size());
    let mut channels = vec![vec![0.0; ys]; ss];
    for (s, c) in channels.iter_mut().enumerate() {
        let cond = phat.conditional_given_s(s)?;
        for u in 0..us {
            for (y, cy) in c.iter_mut().enumerate() {
                *cy += cond[u] * mech.get(s, u, y);
            }
        }
    }
    let cbar: Vec<f64> = (0..ys).map(|y| channels.iter().map(|c| c[y]).sum::<f64>() / ss as f64).collect();
    let spread = channels
        .iter()
        .flat_map(|c| c.iter().zip(&cbar).map(|(c, m)| (c - m).abs()))
        .fold(0.0f64, f64::max);
    let lambda = (2.0 * ys as f64 * spread).clamp(MIX_MIN, MIX_MAX);
    let mut out = Vec::with_capacity(mech.entries().len());
    for (s, c) in channels.iter().enumerate() {
        let q: Vec<f64> = (0..ys).map(|y| (1.0 / ys as f64 + (1.0 - lambda) * (cbar[y] - c[y]) / lambda).max(0.0)).collect();
        let total: f64 = q.iter().sum();
        for u in 0..us {
            out.extend((0..ys).map(|y| (1.0 - lambda) * mech.get(s, u, y) + lambda * q[y] / total));
        }
    }
    Ok((Mechanism::new(a.clone(), out)?, lambda))
}

/// Output of [`extract_mechanism`].
#[derive(Debug, Clone)]
pub struct Extraction {
    pub mechanism: Mechanism,
    /// Largest entrywise change from the raw solver values.
    pub adjustment: f64,
    /// Largest entrywise change of the clip-and-renormalize step alone.
    pub repair: f64,
    pub mixing: f64,
    /// Upper bound on the weighted privacy violation before mixing.
    pub violation: f64,
    /// Whether the mixing weight was large enough for strict privacy.
    pub strict: bool,
}

/// Smallest weight given to the uniform-output mechanism.
pub const MIX_MIN: f64 = 1e-9;
/// Largest weight given to the uniform-output mechanism.
pub const MIX_MAX: f64 = 0.5 * REPAIR_LIMIT;

/// Twice the weight `lambda` of the uniform mechanism that turns a violation
/// of at most `slack` in every weighted privacy constraint into equality:
/// mixing lowers each constraint by `lambda (1 - e^-eps) / |Y|`. Infinite at
/// `eps = 0` unless `slack <= 0`.
pub fn required_mixing(epsilon: f64, y_size: usize, slack: f64) -> f64 {
    if slack <= 0.0 {
        return 0.0;
    }
    let gain = -(-epsilon).exp_m1() / y_size as f64;
    if gain > 0.0 { 2.0 * slack / gain } else { f64::INFINITY }
}

/// `(1 - lambda) M + lambda U` with `U` releasing every output equally often.
pub fn mix_uniform(mech: &Mechanism, lambda: f64) -> Result<Mechanism> {
    let ys = mech.alphabet().y_size() as f64;
    let entries = mech.entries().iter().map(|x| (1.0 - lambda) * x + lambda / ys).collect();
    Mechanism::new(mech.alphabet().clone(), entries)
}

/// Upper bound on the largest weighted privacy constraint value
/// `e^-eps a - b` of `mech`, over the distributions the variant protects.
///
/// Nominal rows are evaluated exactly. Robust rows use the closed-form dual
/// objective, which bounds the support value from above at any certificate
/// lifted to `w >= v`: the smaller of its values at the solver's certificate
/// and at one re-fitted to `mech`.
pub fn privacy_violation_bound(built: &BuiltProblem, solution: &Solution, mech: &Mechanism) -> Result<f64> {
    let spec = &built.spec;
    let a = spec.alphabet();
    let (w1, w2) = privacy_weights(spec.epsilon);
    let x = &solution.values;
    let dirs = |y: usize, s1: usize, s2: usize| -> (Vec<f64>, Vec<f64>) {
        (
            (0..a.u_size()).map(|u| w1 * mech.get(s1, u, y)).collect(),
            (0..a.u_size()).map(|u| -w2 * mech.get(s2, u, y)).collect(),
        )
    };
    let dot = |p: &[f64], v: &[f64]| p.iter().zip(v).map(|(p, v)| p * v).sum::<f64>();
    let mut worst = f64::NEG_INFINITY;
    if spec.variant.robust_privacy() {
        for block in &built.privacy_blocks {
            let (v1, v2) = dirs(block.y, block.s1, block.s2);
            let proj = spec.set.project(block.s1, block.s2)?;
            let value = match &block.block {
                Some(b) => {
                    let (k1, k2) = proj.kappas();
                    let bound = |w: [&[f64]; 2], c: f64| {
                        let lift = |w: &[f64], v: &[f64]| -> Vec<f64> { w.iter().zip(v).map(|(w, v)| w.max(*v)).collect() };
                        let (wa, wb) = (lift(w[0], &v1), lift(w[1], &v2));
                        support_fproj_objective([k1, k2], proj.rhs_constant(), [&v1, &v2], [&wa, &wb], c.max(0.0))
                    };
                    let side = |i: usize| -> Vec<f64> { b.sides[i].w.iter().map(|w| x[w.0]).collect() };
                    let at_solution = bound([&side(0), &side(1)], x[b.c.0]);
                    // A certificate fitted to the final directions is much
                    // tighter where w - v is near zero.
                    match support_fproj(&proj, &v1, &v2, SUPPORT_TOL) {
                        Ok((_, cert)) => at_solution.min(bound([&cert.w[0], &cert.w[1]], cert.c)),
                        Err(_) => at_solution,
                    }
                }
                None => {
                    let center = spec.set.center();
                    dot(&center.conditional_given_s(block.s1)?, &v1) + dot(&center.conditional_given_s(block.s2)?, &v2)
                }
            };
            worst = worst.max(value);
        }
    } else {
        let phat = spec.set.center();
        let conditionals = (0..a.s_size()).map(|s| phat.conditional_given_s(s)).collect::<Result<Vec<_>>>()?;
        for y in 0..a.y_size() {
            for s1 in 0..a.s_size() {
                for s2 in 0..a.s_size() {
                    if s1 != s2 {
                        let (v1, v2) = dirs(y, s1, s2);
                        worst = worst.max(dot(&conditionals[s1], &v1) + dot(&conditionals[s2], &v2));
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// Clip-and-renormalize repair of a raw `(s, u, y)` table.
pub fn repair_mechanism(alphabet: crate::simplex::Alphabet, raw: &[f64]) -> Result<(Mechanism, f64)> {
    let ys = alphabet.y_size();
    let mut out = Vec::with_capacity(raw.len());
    let mut adjustment: f64 = 0.0;
    for row in raw.chunks(ys) {
        let clipped: Vec<f64> = row.iter().map(|x| x.clamp(0.0, 1.0)).collect();
        let total: f64 = clipped.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ExcessiveRepair { adjustment: 1.0, limit: REPAIR_LIMIT });
        }
        for (orig, c) in row.iter().zip(&clipped) {
            let fixed = c / total;
            adjustment = adjustment.max((fixed - orig).abs());
            out.push(fixed);
        }
    }
    if !(adjustment <= REPAIR_LIMIT) {
        return Err(Error::ExcessiveRepair { adjustment, limit: REPAIR_LIMIT });
    }
    Ok((Mechanism::new(alphabet, out)?, adjustment))
}
