//! Support functions of the confidence set and of its projections, the
//! conjugates they are assembled from, and sampling oracles that bound the
//! support values from below.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::problems::blocks::{conjugate_constant, support_f_block, support_fproj_block};
use crate::problems::program::{AffineExpr, ConicProgram};
use crate::problems::solver::{ClarabelSolver, ConicSolver, SolveStatus};
use crate::seed::rng_from_seed;
use crate::simplex::{chi2_statistic_cells, uniform_simplex_point};
use crate::uncertainty::{contains_cells, ProjectedUncertaintySet, UncertaintySet, MEMBERSHIP_TOL};

/// Default absolute tolerance on support values.
pub const SUPPORT_TOL: f64 = 1e-8;

/// Concave conjugate of `x -> -sqrt(sum kappa^2 / x)`:
/// `-(2^{-2/3} + 2^{1/3}) (sum kappa sqrt(-v))^{2/3}` on `v <= 0`, `+inf` elsewhere.
pub fn h_star(kappa: &[f64], v: &[f64]) -> f64 {
    assert_eq!(kappa.len(), v.len());
    if v.iter().any(|x| *x > 0.0) {
        return f64::INFINITY;
    }
    let lambda: f64 = kappa.iter().zip(v).map(|(k, x)| k * (-x).sqrt()).sum();
    -conjugate_constant() * lambda.powf(2.0 / 3.0)
}

/// Concave conjugate of `x -> -phat^2 / x`: `-2 sqrt(-z) phat` on `z <= 0`.
pub fn g_star(phat: f64, z: f64) -> f64 {
    if z > 0.0 {
        f64::INFINITY
    } else {
        -2.0 * (-z).sqrt() * phat
    }
}

/// Support function of the probability simplex.
pub fn support_simplex(w: &[f64]) -> f64 {
    w.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Dual variables certifying a support value.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerMinimizer {
    /// One vector per simplex block, each `>= v` componentwise.
    pub w: Vec<Vec<f64>>,
    /// `+inf` stands for the limiting certificate of a zero-radius set.
    pub c: f64,
    pub achieved_value: f64,
}

/// `-2 sqrt(c) sum phat sqrt(w - v) + max w + c (B + 1)`.
pub fn support_f_objective(phat: &[f64], radius: f64, v: &[f64], w: &[f64], c: f64) -> f64 {
    let root: f64 = phat.iter().zip(w.iter().zip(v)).map(|(p, (w, v))| p * (w - v).max(0.0).sqrt()).sum();
    -2.0 * c.sqrt() * root + support_simplex(w) + c * (radius + 1.0)
}

/// `-K c^{2/3} sum_i (sum_u kappa_i sqrt(w_i - v_i))^{2/3} + sum_i max w_i + c C`.
pub fn support_fproj_objective(kappas: [&[f64]; 2], rhs_constant: f64, v: [&[f64]; 2], w: [&[f64]; 2], c: f64) -> f64 {
    let mut total = c * rhs_constant;
    for i in 0..2 {
        let rho: f64 = kappas[i].iter().zip(w[i].iter().zip(v[i])).map(|(k, (w, v))| k * (w - v).max(0.0).sqrt()).sum();
        total += -conjugate_constant() * (c * rho).powf(2.0 / 3.0) + support_simplex(w[i]);
    }
    total
}

fn constants(v: &[f64]) -> Vec<AffineExpr> {
    v.iter().map(|x| AffineExpr::constant(*x)).collect()
}

fn run_inner(program: &ConicProgram, tol: f64, bound: impl Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
    let solution = ClarabelSolver::default().solve(program)?;
    match solution.status {
        SolveStatus::Optimal | SolveStatus::NearOptimal => {}
        _ => return Err(Error::ConvergenceFailure { best_bound: bound(&solution.values) }),
    }
    if solution.duality_gap > tol.max(f64::EPSILON) && solution.status != SolveStatus::Optimal {
        return Err(Error::ConvergenceFailure { best_bound: bound(&solution.values) });
    }
    Ok(solution.values)
}

fn lift_w(v: &[f64], w: Vec<f64>) -> Vec<f64> {
    w.into_iter().zip(v).map(|(w, v)| w.max(*v)).collect()
}

/// `sup { v . P : P in F }`, evaluated by minimizing the dual expression.
/// The returned value is that expression at the returned certificate, so it
/// never lies below the true support value.
pub fn support_f(set: &UncertaintySet, v: &[f64], tol: f64) -> Result<(f64, InnerMinimizer)> {
    support_f_cells(set.center().cells(), set.radius(), v, tol)
}

/// [`support_f`] on raw cell vectors.
pub fn support_f_cells(phat: &[f64], radius: f64, v: &[f64], tol: f64) -> Result<(f64, InnerMinimizer)> {
    if v.len() != phat.len() || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidDomain("direction must be finite and match the set dimension".into()));
    }
    if radius == 0.0 {
        let value: f64 = phat.iter().zip(v).map(|(p, v)| p * v).sum();
        return Ok((value, InnerMinimizer { w: vec![v.to_vec()], c: f64::INFINITY, achieved_value: value }));
    }
    let mut program = ConicProgram::new();
    let block = support_f_block(&mut program, &constants(v), phat, radius, "F");
    program.set_objective(block.value.clone());
    let read = |x: &[f64]| {
        let w = lift_w(v, block.w.iter().map(|i| x[i.0]).collect());
        (w, x[block.c.0].max(0.0))
    };
    let values = run_inner(&program, tol, |x| {
        let (w, c) = read(x);
        support_f_objective(phat, radius, v, &w, c)
    })?;
    let (w, c) = read(&values);
    let value = support_f_objective(phat, radius, v, &w, c);
    Ok((value, InnerMinimizer { w: vec![w], c, achieved_value: value }))
}

/// `sup { v1 . R1 + v2 . R2 : (R1, R2) in the projected set }`.
pub fn support_fproj(set: &ProjectedUncertaintySet, v1: &[f64], v2: &[f64], tol: f64) -> Result<(f64, InnerMinimizer)> {
    let (k1, k2) = set.kappas();
    if set.parent().radius() == 0.0 {
        let (s1, s2) = set.pair();
        let center = set.parent().center();
        let r1 = center.conditional_given_s(s1)?;
        let r2 = center.conditional_given_s(s2)?;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let value = dot(v1, &r1) + dot(v2, &r2);
        return Ok((
            value,
            InnerMinimizer { w: vec![v1.to_vec(), v2.to_vec()], c: f64::INFINITY, achieved_value: value },
        ));
    }
    support_fproj_cells(k1, k2, set.rhs_constant(), v1, v2, tol)
}

/// [`support_fproj`] from the joint rows `kappa1`, `kappa2` and the constant `C`.
pub fn support_fproj_cells(
    kappa1: &[f64],
    kappa2: &[f64],
    rhs_constant: f64,
    v1: &[f64],
    v2: &[f64],
    tol: f64,
) -> Result<(f64, InnerMinimizer)> {
    let k = kappa1.len();
    if kappa2.len() != k || v1.len() != k || v2.len() != k {
        return Err(Error::InvalidDomain("direction pair must match the conditional dimension".into()));
    }
    if v1.iter().chain(v2).any(|x| !x.is_finite()) {
        return Err(Error::InvalidDomain("direction must be finite".into()));
    }
    let mut program = ConicProgram::new();
    let block = support_fproj_block(&mut program, &constants(v1), &constants(v2), kappa1, kappa2, rhs_constant, "Fp");
    program.set_objective(block.value.clone());
    let read = |x: &[f64]| {
        let w1 = lift_w(v1, block.sides[0].w.iter().map(|i| x[i.0]).collect());
        let w2 = lift_w(v2, block.sides[1].w.iter().map(|i| x[i.0]).collect());
        (w1, w2, x[block.c.0].max(0.0))
    };
    let eval = |w1: &[f64], w2: &[f64], c: f64| {
        support_fproj_objective([kappa1, kappa2], rhs_constant, [v1, v2], [w1, w2], c)
    };
    let values = run_inner(&program, tol, |x| {
        let (w1, w2, c) = read(x);
        eval(&w1, &w2, c)
    })?;
    let (w1, w2, c) = read(&values);
    let value = eval(&w1, &w2, c);
    Ok((value, InnerMinimizer { w: vec![w1, w2], c, achieved_value: value }))
}

/// A convex set that can be sampled and tested for membership. Points of
/// sets built from several simplex blocks are concatenated.
pub trait MemberSampler {
    fn dim(&self) -> usize;
    /// Sizes of the simplex blocks making up a point.
    fn blocks(&self) -> Vec<usize>;
    /// A member in the relative interior.
    fn center(&self) -> Vec<f64>;
    fn sample(&mut self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>>;
    fn contains(&self, x: &[f64]) -> bool;
}

/// The whole probability simplex, sampled uniformly.
#[derive(Debug, Clone)]
pub struct SimplexSampler {
    pub dim: usize,
}

impl MemberSampler for SimplexSampler {
    fn dim(&self) -> usize {
        self.dim
    }
    fn blocks(&self) -> Vec<usize> {
        vec![self.dim]
    }
    fn center(&self) -> Vec<f64> {
        vec![1.0 / self.dim as f64; self.dim]
    }
    fn sample(&mut self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        Some(uniform_simplex_point(rng, self.dim))
    }
    fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|v| *v >= 0.0) && (x.iter().sum::<f64>() - 1.0).abs() <= MEMBERSHIP_TOL
    }
}

fn dirichlet<R: Rng + ?Sized>(rng: &mut R, alpha: &[f64]) -> Vec<f64> {
    loop {
        let w: Vec<f64> =
            alpha.iter().map(|a| Gamma::new(*a, 1.0).expect("positive shape").sample(rng)).collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 && total.is_finite() {
            return w.into_iter().map(|x| x / total).collect();
        }
    }
}

/// Rejection sampler for the chi-squared ball: proposals are
/// Dirichlet(beta * phat + 1e-3), with `beta` adapted to keep the
/// acceptance rate between 20% and 80%.
#[derive(Debug, Clone)]
pub struct ChiSquareBallSampler {
    pub phat: Vec<f64>,
    pub radius: f64,
    beta: f64,
    proposed: u32,
    accepted: u32,
}

impl ChiSquareBallSampler {
    pub fn new(phat: Vec<f64>, radius: f64) -> Self {
        let k = phat.len() as f64;
        let beta = ((k - 1.0) / radius.max(1e-12)).clamp(1.0, 1e9);
        Self { phat, radius, beta, proposed: 0, accepted: 0 }
    }

    pub fn from_set(set: &UncertaintySet) -> Self {
        Self::new(set.center().cells().to_vec(), set.radius())
    }

    fn adapt(&mut self) {
        if self.proposed < 50 {
            return;
        }
        let rate = self.accepted as f64 / self.proposed as f64;
        if rate < 0.2 {
            self.beta *= 2.0;
        } else if rate > 0.8 {
            self.beta = (self.beta / 2.0).max(1.0);
        }
        self.proposed = 0;
        self.accepted = 0;
    }
}

impl MemberSampler for ChiSquareBallSampler {
    fn dim(&self) -> usize {
        self.phat.len()
    }
    fn blocks(&self) -> Vec<usize> {
        vec![self.phat.len()]
    }
    fn center(&self) -> Vec<f64> {
        self.phat.clone()
    }
    fn sample(&mut self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        let alpha: Vec<f64> = self.phat.iter().map(|p| self.beta * p + 1e-3).collect();
        let x = dirichlet(rng, &alpha);
        self.proposed += 1;
        let ok = self.contains(&x);
        if ok {
            self.accepted += 1;
        }
        self.adapt();
        ok.then_some(x)
    }
    fn contains(&self, x: &[f64]) -> bool {
        contains_cells(&self.phat, self.radius, x)
    }
}

/// Sampler for a projected set. A point `(R1, R2)` counts as a member only
/// when the closed-form test accepts it and its lift is a member of the
/// parent set.
#[derive(Debug, Clone)]
pub struct ProjectedSampler {
    pub set: ProjectedUncertaintySet,
    conditionals: [Vec<f64>; 2],
    beta: f64,
    proposed: u32,
    accepted: u32,
    /// Points accepted by the closed form but rejected after lifting.
    pub disagreements: u32,
}

impl ProjectedSampler {
    pub fn new(set: ProjectedUncertaintySet) -> Result<Self> {
        let (s1, s2) = set.pair();
        let center = set.parent().center();
        let conditionals = [center.conditional_given_s(s1)?, center.conditional_given_s(s2)?];
        let k = conditionals[0].len() as f64;
        let beta = ((k - 1.0) / set.parent().radius().max(1e-12)).clamp(1.0, 1e9);
        Ok(Self { set, conditionals, beta, proposed: 0, accepted: 0, disagreements: 0 })
    }

    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.conditionals[0].len())
    }
}

impl MemberSampler for ProjectedSampler {
    fn dim(&self) -> usize {
        2 * self.conditionals[0].len()
    }
    fn blocks(&self) -> Vec<usize> {
        vec![self.conditionals[0].len(); 2]
    }
    fn center(&self) -> Vec<f64> {
        self.conditionals.concat()
    }
    fn sample(&mut self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        let mut x = Vec::with_capacity(self.dim());
        for r in &self.conditionals {
            let alpha: Vec<f64> = r.iter().map(|p| self.beta * p + 1e-3).collect();
            x.extend(dirichlet(rng, &alpha));
        }
        self.proposed += 1;
        let (r1, r2) = self.split(&x);
        let ok = if self.set.contains(r1, r2) {
            let lifted = self.contains(&x);
            if !lifted {
                self.disagreements += 1;
            }
            lifted
        } else {
            false
        };
        if ok {
            self.accepted += 1;
        }
        if self.proposed >= 50 {
            let rate = self.accepted as f64 / self.proposed as f64;
            if rate < 0.2 {
                self.beta *= 2.0;
            } else if rate > 0.8 {
                self.beta = (self.beta / 2.0).max(1.0);
            }
            self.proposed = 0;
            self.accepted = 0;
        }
        ok.then_some(x)
    }
    fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let (r1, r2) = self.split(x);
        if !self.set.contains(r1, r2) {
            return false;
        }
        match self.set.lift(r1, r2) {
            Ok(p) => {
                let parent = self.set.parent();
                chi2_statistic_cells(parent.center().cells(), p.cells()) <= parent.radius() + MEMBERSHIP_TOL
            }
            Err(_) => false,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pushes `x` outwards along the ray from `center` until it meets the boundary.
fn to_boundary(sampler: &dyn MemberSampler, center: &[f64], x: &[f64]) -> Vec<f64> {
    let at = |t: f64| -> Vec<f64> { center.iter().zip(x).map(|(c, x)| c + t * (x - c)).collect() };
    let (mut lo, mut hi) = (1.0, 2.0);
    while sampler.contains(&at(hi)) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return at(lo);
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if sampler.contains(&at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}

/// Random direction summing to zero within each simplex block.
fn tangent_direction(rng: &mut ChaCha8Rng, blocks: &[usize]) -> Vec<f64> {
    let mut d = Vec::new();
    for &k in blocks {
        let mut part: Vec<f64> = (0..k).map(|_| rng.random::<f64>() - 0.5).collect();
        let mean = part.iter().sum::<f64>() / k as f64;
        part.iter_mut().for_each(|x| *x -= mean);
        d.extend(part);
    }
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    d.into_iter().map(|x| x / norm).collect()
}

/// Lower bound on `sup { v . x : x in set }`: the best of `trials` sampled
/// members, followed by a boundary walk that only accepts improving members.
pub fn brute_force_support(sampler: &mut dyn MemberSampler, v: &[f64], trials: usize, seed: u64) -> f64 {
    assert_eq!(v.len(), sampler.dim());
    let mut rng = rng_from_seed(seed);
    let center = sampler.center();
    let mut best = center.clone();
    let mut best_val = dot(v, &best);
    for _ in 0..trials {
        if let Some(x) = sampler.sample(&mut rng) {
            let val = dot(v, &x);
            if val > best_val {
                best_val = val;
                best = x;
            }
        }
    }
    let blocks = sampler.blocks();
    // Steepest feasible direction: the block-tangent part of v.
    let mut grad = Vec::with_capacity(v.len());
    let mut offset = 0;
    for &k in &blocks {
        let mean = v[offset..offset + k].iter().sum::<f64>() / k as f64;
        grad.extend(v[offset..offset + k].iter().map(|x| x - mean));
        offset += k;
    }
    let gnorm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
    if gnorm > 0.0 {
        let probe: Vec<f64> = center.iter().zip(&grad).map(|(c, g)| c + 1e-6 * g / gnorm).collect();
        if sampler.contains(&probe) {
            let y = to_boundary(sampler, &center, &probe);
            if dot(v, &y) > best_val {
                best_val = dot(v, &y);
                best = y;
            }
        }
    }
    if best != center {
        best = to_boundary(sampler, &center, &best);
        best_val = best_val.max(dot(v, &best));
    }
    let mut step = 0.1;
    let mut failures = 0;
    while step > 1e-9 {
        let d = tangent_direction(&mut rng, &blocks);
        let trial: Vec<f64> = best.iter().zip(&d).map(|(x, d)| x + step * d).collect();
        // Pull slightly inwards so the ray test starts from a member.
        let inner: Vec<f64> = trial.iter().zip(&center).map(|(x, c)| c + 0.999 * (x - c)).collect();
        let mut improved = false;
        if sampler.contains(&inner) {
            let y = to_boundary(sampler, &center, &inner);
            let val = dot(v, &y);
            if val > best_val {
                best_val = val;
                best = y;
                improved = true;
            }
        }
        if improved {
            failures = 0;
            step *= 1.5;
        } else {
            failures += 1;
            if failures >= 4 * blocks.iter().sum::<usize>() {
                step *= 0.5;
                failures = 0;
            }
        }
    }
    best_val
}
