//! Constraint blocks shared by the four problem variants and by the
//! standalone support-function evaluations.

use super::program::{AffineExpr, ConicProgram, Var};
use crate::error::{Error, Result};
use crate::simplex::{Alphabet, JointDistribution};
use crate::uncertainty::ProjectedUncertaintySet;

/// `2^{-2/3} + 2^{1/3}`, the constant of the closed-form conjugate of
/// `sqrt(sum kappa^2 / x)`.
pub fn conjugate_constant() -> f64 {
    2f64.powf(-2.0 / 3.0) + 2f64.cbrt()
}

/// Release probabilities `P(y | s, u)`, laid out as `(s, u, y)` row-major.
#[derive(Debug, Clone)]
pub struct MechanismVars {
    alphabet: Alphabet,
    vars: Vec<Var>,
}

impl MechanismVars {
    pub fn var(&self, s: usize, u: usize, y: usize) -> Var {
        let (us, ys) = (self.alphabet.u_size(), self.alphabet.y_size());
        self.vars[(s * us + u) * ys + y]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// `sum_y d(u, y) P(y | s, u)` for a `u x y` row-major distortion matrix.
    pub fn expected_distortion(&self, s: usize, u: usize, distortion: &[f64]) -> AffineExpr {
        let ys = self.alphabet.y_size();
        let mut e = AffineExpr::default();
        for y in 0..ys {
            e.add_term(self.var(s, u, y), distortion[u * ys + y]);
        }
        e
    }

    pub fn values(&self, solution: &[f64]) -> Vec<f64> {
        self.vars.iter().map(|v| solution[v.0]).collect()
    }
}

/// Nonnegative, row-stochastic release variables.
pub fn mechanism_block(program: &mut ConicProgram, alphabet: &Alphabet) -> MechanismVars {
    let mut vars = Vec::with_capacity(alphabet.cells() * alphabet.y_size());
    for s in 0..alphabet.s_size() {
        for u in 0..alphabet.u_size() {
            for y in 0..alphabet.y_size() {
                let v = program.add_var(format!("P[y={y}|s={s},u={u}]"));
                program.add_nonnegative(v.into());
                vars.push(v);
            }
        }
    }
    let mech = MechanismVars { alphabet: alphabet.clone(), vars };
    for s in 0..alphabet.s_size() {
        for u in 0..alphabet.u_size() {
            let mut row = AffineExpr::constant(-1.0);
            for y in 0..alphabet.y_size() {
                row.add_term(mech.var(s, u, y), 1.0);
            }
            program.add_equality(row);
        }
    }
    mech
}

/// Weights `(e^-eps, 1)` applied to the `s1` and `s2` sides of a
/// likelihood-ratio constraint. Dividing `a <= e^eps b` by `e^eps` keeps
/// every coefficient in `[0, 1]` however large `eps` is.
pub fn privacy_weights(epsilon: f64) -> (f64, f64) {
    ((-epsilon).exp(), 1.0)
}

/// Likelihood-ratio constraints at the empirical distribution:
/// `sum_u phat(u|s1) P(y|s1,u) <= e^eps sum_u phat(u|s2) P(y|s2,u)` for all
/// `y` and ordered pairs `s1 != s2`. Returns the number of rows added.
pub fn nominal_privacy_block(
    program: &mut ConicProgram,
    mech: &MechanismVars,
    phat: &JointDistribution,
    epsilon: f64,
    margin: f64,
) -> Result<usize> {
    let alphabet = mech.alphabet();
    let conditionals = (0..alphabet.s_size())
        .map(|s| phat.conditional_given_s(s))
        .collect::<Result<Vec<_>>>()?;
    let (w1, w2) = privacy_weights(epsilon);
    let mut rows = 0;
    for y in 0..alphabet.y_size() {
        for s1 in 0..alphabet.s_size() {
            for s2 in 0..alphabet.s_size() {
                if s1 == s2 {
                    continue;
                }
                let mut slack = AffineExpr::default();
                for u in 0..alphabet.u_size() {
                    slack.add_term(mech.var(s1, u, y), -w1 * conditionals[s1][u]);
                    slack.add_term(mech.var(s2, u, y), w2 * conditionals[s2][u]);
                }
                program.add_nonnegative(slack - AffineExpr::constant(margin));
                rows += 1;
            }
        }
    }
    Ok(rows)
}

/// Dual certificate variables of the support function of the confidence set.
#[derive(Debug, Clone)]
pub struct SupportFBlock {
    pub w: Vec<Var>,
    pub c: Var,
    pub t: Vec<Var>,
    pub m: Var,
    /// `-2 sum phat t + m + c (B + 1)`; at any feasible point this bounds the
    /// support value at `v` from above, with equality at the minimum.
    pub value: AffineExpr,
}

/// Epigraph of the support function of `{P : chi2(phat, P) <= radius}` at
/// the direction `v`: `t_k^2 <= c (w_k - v_k)`, `t_k >= 0`, `m >= w_k`.
pub fn support_f_block(
    program: &mut ConicProgram,
    v: &[AffineExpr],
    phat: &[f64],
    radius: f64,
    tag: &str,
) -> SupportFBlock {
    assert_eq!(v.len(), phat.len());
    let c = program.add_var(format!("c[{tag}]"));
    let m = program.add_var(format!("m[{tag}]"));
    let mut w = Vec::with_capacity(v.len());
    let mut t = Vec::with_capacity(v.len());
    let mut value = AffineExpr::default();
    for k in 0..v.len() {
        let wk = program.add_var(format!("w[{tag},{k}]"));
        let tk = program.add_var(format!("t[{tag},{k}]"));
        program.add_nonnegative(tk.into());
        program.add_rotated_cone(AffineExpr::term(c, 0.5), AffineExpr::from(wk) - v[k].clone(), tk.into());
        program.add_nonnegative(AffineExpr::from(m) - AffineExpr::from(wk));
        value.add_term(tk, -2.0 * phat[k]);
        w.push(wk);
        t.push(tk);
    }
    value.add_term(m, 1.0);
    value.add_term(c, radius + 1.0);
    SupportFBlock { w, c, t, m, value }
}

/// Worst-case expected distortion over the confidence set, bounded by a new
/// variable `D`. Returns `D` and the certificate block; a zero radius needs
/// no certificate since the set is the single point `phat`.
pub fn robust_utility_block(
    program: &mut ConicProgram,
    mech: &MechanismVars,
    phat: &JointDistribution,
    radius: f64,
    distortion: &[f64],
) -> (Var, Option<SupportFBlock>) {
    let alphabet = mech.alphabet();
    let v: Vec<AffineExpr> = (0..alphabet.s_size())
        .flat_map(|s| (0..alphabet.u_size()).map(move |u| (s, u)))
        .map(|(s, u)| mech.expected_distortion(s, u, distortion))
        .collect();
    let d = program.add_var("D");
    if radius == 0.0 {
        let mut nominal = AffineExpr::default();
        for (e, p) in v.into_iter().zip(phat.cells()) {
            nominal = nominal + e * *p;
        }
        program.add_nonnegative(AffineExpr::from(d) - nominal);
        return (d, None);
    }
    let block = support_f_block(program, &v, phat.cells(), radius, "util");
    program.add_nonnegative(AffineExpr::from(d) - block.value.clone());
    (d, Some(block))
}

/// Per-side variables of the projected-set certificate.
#[derive(Debug, Clone)]
pub struct ProjectedSide {
    pub w: Vec<Var>,
    pub m: Var,
    /// `gamma[(u, u')]` for `u < u'` in lexicographic order.
    pub gamma: Vec<Var>,
    pub g: Var,
    pub z: Var,
    pub q: Var,
}

#[derive(Debug, Clone)]
pub struct SupportFprojBlock {
    pub c: Var,
    pub sides: [ProjectedSide; 2],
    /// `-(2^{-2/3} + 2^{1/3}) (q1 + q2) + m1 + m2 + c C`.
    pub value: AffineExpr,
}

/// Number of auxiliary variables one projected-set block adds for `|U| = k`.
pub fn projected_block_size(k: usize) -> usize {
    1 + 2 * (k + 1 + k * (k - 1) / 2 + 3)
}

fn projected_side(
    program: &mut ConicProgram,
    c: Var,
    v: &[AffineExpr],
    kappa: &[f64],
    tag: &str,
) -> ProjectedSide {
    let k = v.len();
    let m = program.add_var(format!("m[{tag}]"));
    let w: Vec<Var> = (0..k).map(|u| program.add_var(format!("w[{tag},{u}]"))).collect();
    let delta: Vec<AffineExpr> = (0..k).map(|u| AffineExpr::from(w[u]) - v[u].clone()).collect();
    for u in 0..k {
        program.add_nonnegative(delta[u].clone());
        program.add_nonnegative(AffineExpr::from(m) - AffineExpr::from(w[u]));
    }
    // G <= sum kappa_u^2 delta_u + 2 sum_{u<u'} kappa_u kappa_u' gamma_uu',
    // gamma_uu'^2 <= delta_u delta_u'; at the optimum G = (sum kappa sqrt(delta))^2.
    let g = program.add_var(format!("G[{tag}]"));
    let mut g_bound = AffineExpr::default();
    for u in 0..k {
        g_bound = g_bound + delta[u].clone() * (kappa[u] * kappa[u]);
    }
    let mut gamma = Vec::with_capacity(k * (k - 1) / 2);
    for u in 0..k {
        for u2 in (u + 1)..k {
            let gv = program.add_var(format!("gamma[{tag},{u},{u2}]"));
            program.add_nonnegative(gv.into());
            program.add_rotated_cone(delta[u].clone() * 0.5, delta[u2].clone(), gv.into());
            g_bound.add_term(gv, 2.0 * kappa[u] * kappa[u2]);
            gamma.push(gv);
        }
    }
    program.add_nonnegative(g_bound - AffineExpr::from(g));
    // z^2 <= G q and q^2 <= c z, so q^3 <= c^2 G.
    let z = program.add_var(format!("z[{tag}]"));
    let q = program.add_var(format!("q[{tag}]"));
    program.add_rotated_cone(AffineExpr::term(g, 0.5), q.into(), z.into());
    program.add_rotated_cone(AffineExpr::term(c, 0.5), z.into(), q.into());
    ProjectedSide { w, m, gamma, g, z, q }
}

/// Epigraph of the support function of a projected confidence set at the
/// direction pair `(v1, v2)`. The term `c^{2/3} (sum kappa sqrt(w - v))^{2/3}`
/// is bounded from below by `q` using rotated cones only.
pub fn support_fproj_block(
    program: &mut ConicProgram,
    v1: &[AffineExpr],
    v2: &[AffineExpr],
    kappa1: &[f64],
    kappa2: &[f64],
    rhs_constant: f64,
    tag: &str,
) -> SupportFprojBlock {
    let c = program.add_var(format!("c[{tag}]"));
    program.add_nonnegative(c.into());
    let first = projected_side(program, c, v1, kappa1, &format!("{tag},1"));
    let second = projected_side(program, c, v2, kappa2, &format!("{tag},2"));
    let k = conjugate_constant();
    let mut value = AffineExpr::default();
    value
        .add_term(first.q, -k)
        .add_term(second.q, -k)
        .add_term(first.m, 1.0)
        .add_term(second.m, 1.0)
        .add_term(c, rhs_constant);
    SupportFprojBlock { c, sides: [first, second], value }
}

/// Robust likelihood-ratio constraint for one `(y, s1, s2)`: the support of
/// the projected set at `v1 = P(y|s1,.)`, `v2 = -e^eps P(y|s2,.)` is `<= 0`.
/// Both directions are scaled by [`privacy_weights`], which leaves the
/// constraint unchanged since support functions are positively homogeneous.
/// With a zero radius the projected set is the pair of empirical
/// conditionals and the constraint is linear, so no block is returned.
/// A positive `margin` tightens the constraint to `<= -margin`.
pub fn robust_privacy_block(
    program: &mut ConicProgram,
    mech: &MechanismVars,
    projected: &ProjectedUncertaintySet,
    epsilon: f64,
    y: usize,
    margin: f64,
) -> Result<Option<SupportFprojBlock>> {
    let (s1, s2) = projected.pair();
    if s1 == s2 {
        return Err(Error::InvalidDomain("robust privacy needs distinct sensitive values".into()));
    }
    let u_size = mech.alphabet().u_size();
    let (w1, w2) = privacy_weights(epsilon);
    let v1: Vec<AffineExpr> = (0..u_size).map(|u| AffineExpr::term(mech.var(s1, u, y), w1)).collect();
    let v2: Vec<AffineExpr> = (0..u_size).map(|u| AffineExpr::term(mech.var(s2, u, y), -w2)).collect();
    if projected.parent().radius() == 0.0 {
        let center = projected.parent().center();
        let (r1, r2) = (center.conditional_given_s(s1)?, center.conditional_given_s(s2)?);
        let mut value = AffineExpr::default();
        for u in 0..u_size {
            value = value + v1[u].clone() * r1[u] + v2[u].clone() * r2[u];
        }
        program.add_nonnegative(-value - AffineExpr::constant(margin));
        return Ok(None);
    }
    let (k1, k2) = projected.kappas();
    let block = support_fproj_block(
        program,
        &v1,
        &v2,
        k1,
        k2,
        projected.rhs_constant(),
        &format!("y={y},s1={s1},s2={s2}"),
    );
    program.add_nonnegative(-block.value.clone() - AffineExpr::constant(margin));
    Ok(Some(block))
}
