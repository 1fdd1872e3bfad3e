//! Solver-agnostic conic program: a linear objective to minimize, affine
//! equalities, and memberships of affine expressions in the nonnegative
//! orthant or the rotated quadratic cone `{(x, y, z) : 2xy >= z^2, x, y >= 0}`.

use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// `sum coef * var + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    terms: Vec<(Var, f64)>,
    constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn term(var: Var, coef: f64) -> Self {
        Self { terms: vec![(var, coef)], constant: 0.0 }
    }

    pub fn add_term(&mut self, var: Var, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((var, coef));
        }
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn terms(&self) -> &[(Var, f64)] {
        &self.terms
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(v, c)| c * values[v.0]).sum::<f64>() + self.constant
    }

    /// Merges repeated variables and drops zero coefficients, ordering terms by variable.
    pub fn compacted(&self) -> Self {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|(v, _)| *v);
        let mut merged: Vec<(Var, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some((last, acc)) if *last == v => *acc += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|(_, c)| *c != 0.0);
        Self { terms: merged, constant: self.constant }
    }

    fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|(v, _)| v.0).max()
    }
}

impl From<Var> for AffineExpr {
    fn from(v: Var) -> Self {
        AffineExpr::term(v, 1.0)
    }
}

impl Add for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: AffineExpr) -> AffineExpr {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self * -1.0
    }
}

impl Sub for AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: AffineExpr) -> AffineExpr {
        self + (-rhs)
    }
}

impl Mul<f64> for AffineExpr {
    type Output = AffineExpr;
    fn mul(mut self, k: f64) -> AffineExpr {
        self.terms.iter_mut().for_each(|(_, c)| *c *= k);
        self.constant *= k;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cone {
    /// `expr >= 0`.
    Nonnegative(AffineExpr),
    /// `2 x y >= z^2` with `x, y >= 0`.
    RotatedQuadratic { x: AffineExpr, y: AffineExpr, z: AffineExpr },
}

impl Cone {
    /// Positive part of the constraint violation at `values`. The rotated cone
    /// is measured in its second-order form `||(x - y, sqrt(2) z)|| <= x + y`.
    pub fn violation(&self, values: &[f64]) -> f64 {
        match self {
            Cone::Nonnegative(e) => (-e.eval(values)).max(0.0),
            Cone::RotatedQuadratic { x, y, z } => {
                let (x, y, z) = (x.eval(values), y.eval(values), z.eval(values));
                let norm = ((x - y).powi(2) + 2.0 * z * z).sqrt();
                (norm - (x + y)).max(0.0)
            }
        }
    }
}

/// Maximum residuals of a candidate point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub equality: f64,
    pub nonnegative: f64,
    pub cone: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.equality.max(self.nonnegative).max(self.cone)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProgram {
    names: Vec<String>,
    objective: AffineExpr,
    equalities: Vec<AffineExpr>,
    cones: Vec<Cone>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> Var {
        self.names.push(name.into());
        Var(self.names.len() - 1)
    }

    pub fn set_objective(&mut self, objective: AffineExpr) {
        self.objective = objective;
    }

    /// `expr = 0`.
    pub fn add_equality(&mut self, expr: AffineExpr) {
        self.equalities.push(expr);
    }

    /// `expr >= 0`.
    pub fn add_nonnegative(&mut self, expr: AffineExpr) {
        self.cones.push(Cone::Nonnegative(expr));
    }

    /// `2 x y >= z^2`, `x, y >= 0`.
    pub fn add_rotated_cone(&mut self, x: AffineExpr, y: AffineExpr, z: AffineExpr) {
        self.cones.push(Cone::RotatedQuadratic { x, y, z });
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, v: Var) -> &str {
        &self.names[v.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn objective(&self) -> &AffineExpr {
        &self.objective
    }

    pub fn equalities(&self) -> &[AffineExpr] {
        &self.equalities
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    pub fn num_nonnegative(&self) -> usize {
        self.cones.iter().filter(|c| matches!(c, Cone::Nonnegative(_))).count()
    }

    pub fn num_rotated(&self) -> usize {
        self.cones.iter().filter(|c| matches!(c, Cone::RotatedQuadratic { .. })).count()
    }

    /// Checks that every referenced variable is declared.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let exprs = std::iter::once(&self.objective).chain(&self.equalities).chain(self.cones.iter().flat_map(
            |c| -> Vec<&AffineExpr> {
                match c {
                    Cone::Nonnegative(e) => vec![e],
                    Cone::RotatedQuadratic { x, y, z } => vec![x, y, z],
                }
            },
        ));
        for e in exprs {
            if let Some(i) = e.max_var() {
                if i >= n {
                    return Err(Error::SolverFailure(format!("expression references undeclared variable {i}")));
                }
            }
            if e.terms.iter().any(|(_, c)| !c.is_finite()) || !e.constant.is_finite() {
                return Err(Error::SolverFailure("non-finite coefficient".into()));
            }
        }
        Ok(())
    }

    pub fn residuals(&self, values: &[f64]) -> Residuals {
        let mut r = Residuals::default();
        for e in &self.equalities {
            r.equality = r.equality.max(e.eval(values).abs());
        }
        for c in &self.cones {
            let v = c.violation(values);
            match c {
                Cone::Nonnegative(_) => r.nonnegative = r.nonnegative.max(v),
                Cone::RotatedQuadratic { .. } => r.cone = r.cone.max(v),
            }
        }
        r
    }

    fn fmt_expr(&self, e: &AffineExpr) -> String {
        let e = e.compacted();
        let mut out = String::new();
        for (i, (v, c)) in e.terms.iter().enumerate() {
            if i > 0 {
                out.push_str(" + ");
            }
            let _ = write!(out, "{c} {}", self.names[v.0]);
        }
        if e.constant != 0.0 || e.terms.is_empty() {
            if !e.terms.is_empty() {
                out.push_str(" + ");
            }
            let _ = write!(out, "{}", e.constant);
        }
        out
    }

    /// Plain-text listing, one line per item in declaration order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.names.iter().enumerate() {
            let _ = writeln!(out, "var {i} {name}");
        }
        let _ = writeln!(out, "minimize {}", self.fmt_expr(&self.objective));
        for (i, e) in self.equalities.iter().enumerate() {
            let _ = writeln!(out, "eq {i}: {} = 0", self.fmt_expr(e));
        }
        for (i, c) in self.cones.iter().enumerate() {
            match c {
                Cone::Nonnegative(e) => {
                    let _ = writeln!(out, "cone {i} nonneg: {} >= 0", self.fmt_expr(e));
                }
                Cone::RotatedQuadratic { x, y, z } => {
                    let _ = writeln!(
                        out,
                        "cone {i} rotated: 2 ({}) ({}) >= ({})^2",
                        self.fmt_expr(x),
                        self.fmt_expr(y),
                        self.fmt_expr(z)
                    );
                }
            }
        }
        out
    }
}
