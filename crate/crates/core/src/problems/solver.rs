//! Solver adapters. Any backend that handles linear constraints and rotated
//! quadratic cones can implement [`ConicSolver`]; the default backend is
//! Clarabel, which receives each rotated cone as the second-order cone
//! `(x + y, x - y, sqrt(2) z)`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use serde::{Deserialize, Serialize};

use super::program::{Cone, ConicProgram};
use crate::error::{Error, Result};

/// Primal residual accepted as optimal.
pub const PRIMAL_TOL: f64 = 1e-8;
/// Relative duality gap accepted as optimal.
pub const GAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    InfeasibleReported,
    Failed,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub values: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub primal_residual: f64,
    pub duality_gap: f64,
    pub dual: Option<Vec<f64>>,
    pub iterations: u32,
}

/// Tolerances handed to the backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol_feas: f64,
    pub tol_gap_abs: f64,
    pub tol_gap_rel: f64,
    pub max_iter: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol_feas: 1e-10, tol_gap_abs: 1e-10, tol_gap_rel: 1e-10, max_iter: 200 }
    }
}

pub trait ConicSolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// Solves the program. Infeasibility and breakdowns are reported through
    /// the returned status rather than as errors.
    fn solve(&self, program: &ConicProgram) -> Result<Solution>;
}

#[derive(Debug, Clone, Default)]
pub struct ClarabelSolver {
    pub config: SolverConfig,
}

impl ClarabelSolver {
    pub fn new(config: SolverConfig) -> Self {
        Self { config }
    }
}

struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
}

impl Triplets {
    // Clarabel form is `A x + s = b`, `s in K`; an affine expression `a.x + c`
    // in K becomes the row `-a` with right-hand side `c`.
    fn push_row(&mut self, terms: impl IntoIterator<Item = (usize, f64)>, constant: f64) {
        let row = self.b.len();
        for (col, coef) in terms {
            if coef != 0.0 {
                self.rows.push(row);
                self.cols.push(col);
                self.vals.push(-coef);
            }
        }
        self.b.push(constant);
    }
}

impl ConicSolver for ClarabelSolver {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn solve(&self, program: &ConicProgram) -> Result<Solution> {
        program.validate()?;
        let n = program.num_vars();
        let mut t = Triplets { rows: Vec::new(), cols: Vec::new(), vals: Vec::new(), b: Vec::new() };
        let mut cones = Vec::new();

        for e in program.equalities() {
            let e = e.compacted();
            t.push_row(e.terms().iter().map(|(v, c)| (v.0, *c)), e.constant_part());
        }
        if !program.equalities().is_empty() {
            cones.push(SupportedConeT::ZeroConeT(program.equalities().len()));
        }
        let mut nonneg = 0;
        for c in program.cones() {
            if let Cone::Nonnegative(e) = c {
                let e = e.compacted();
                t.push_row(e.terms().iter().map(|(v, c)| (v.0, *c)), e.constant_part());
                nonneg += 1;
            }
        }
        if nonneg > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(nonneg));
        }
        let sqrt2 = std::f64::consts::SQRT_2;
        for c in program.cones() {
            if let Cone::RotatedQuadratic { x, y, z } = c {
                let sum = (x.clone() + y.clone()).compacted();
                let diff = (x.clone() - y.clone()).compacted();
                let scaled = (z.clone() * sqrt2).compacted();
                for e in [sum, diff, scaled] {
                    t.push_row(e.terms().iter().map(|(v, c)| (v.0, *c)), e.constant_part());
                }
                cones.push(SupportedConeT::SecondOrderConeT(3));
            }
        }

        let m = t.b.len();
        let a = CscMatrix::new_from_triplets(m, n, t.rows, t.cols, t.vals);
        let p = CscMatrix::zeros((n, n));
        let objective = program.objective().compacted();
        let mut q = vec![0.0; n];
        for (v, c) in objective.terms() {
            q[v.0] += c;
        }
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_feas(self.config.tol_feas)
            .tol_gap_abs(self.config.tol_gap_abs)
            .tol_gap_rel(self.config.tol_gap_rel)
            .max_iter(self.config.max_iter)
            .build()
            .map_err(|e| Error::SolverFailure(format!("invalid settings: {e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &t.b, &cones, settings)
            .map_err(|e| Error::SolverFailure(format!("setup failed: {e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved => SolveStatus::NearOptimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::InfeasibleReported,
            _ => SolveStatus::Failed,
        };
        let values = sol.x.clone();
        let obj = objective.eval(&values);
        let gap = (sol.obj_val - sol.obj_val_dual).abs() / sol.obj_val.abs().max(1.0);
        Ok(Solution {
            primal_residual: program.residuals(&values).max(),
            objective: obj,
            values,
            status,
            duality_gap: gap,
            dual: Some(sol.z.clone()),
            iterations: sol.iterations,
        })
    }
}

/// Runs `solver` and enforces the acceptance contract: reported optimality is
/// kept only when the recomputed primal residual is within `tol` and the
/// relative gap within [`GAP_TOL`]; otherwise the status is downgraded.
/// Infeasibility reports and breakdowns become errors.
pub fn solve(program: &ConicProgram, solver: &dyn ConicSolver, tol: f64) -> Result<Solution> {
    let mut solution = solver.solve(program)?;
    match solution.status {
        SolveStatus::InfeasibleReported => return Err(Error::InfeasibleReported),
        SolveStatus::Failed => {
            return Err(Error::SolverFailure(format!(
                "{} stopped without a solution after {} iterations",
                solver.name(),
                solution.iterations
            )))
        }
        SolveStatus::Optimal if solution.primal_residual > tol || solution.duality_gap > GAP_TOL => {
            solution.status = SolveStatus::NearOptimal;
        }
        _ => {}
    }
    Ok(solution)
}
