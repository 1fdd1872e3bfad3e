//! The four mechanism-design problems, crossing nonrobust/robust utility with
//! nonrobust/robust privacy, assembled as conic programs.
//!
//! Robust constraints are replaced by their dual certificates: the dual
//! variables of each support function become decision variables of the
//! program, so every "for all distributions in the set" constraint turns into
//! one block of linear constraints and rotated quadratic cones.

pub mod blocks;
pub mod program;
pub mod solver;
pub mod verify;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{Alphabet, JointDistribution};
use crate::uncertainty::UncertaintySet;

pub use blocks::{MechanismVars, SupportFBlock, SupportFprojBlock};
pub use program::{AffineExpr, Cone, ConicProgram, Residuals, Var};
pub use solver::{solve, ClarabelSolver, ConicSolver, Solution, SolveStatus, SolverConfig, GAP_TOL, PRIMAL_TOL};
pub use verify::{
    extract_mechanism, mix_uniform, privacy_violation_bound, required_mixing, verify_solution, Extraction, VerificationReport,
    MIX_MAX, MIX_MIN, REPAIR_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Variant {
    /// Nominal utility, nominal privacy.
    Nunp,
    /// Nominal utility, robust privacy.
    Nurp,
    /// Robust utility, nominal privacy.
    Runp,
    /// Robust utility, robust privacy.
    Rurp,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Nunp, Variant::Nurp, Variant::Runp, Variant::Rurp];

    pub fn robust_utility(self) -> bool {
        matches!(self, Variant::Runp | Variant::Rurp)
    }

    pub fn robust_privacy(self) -> bool {
        matches!(self, Variant::Nurp | Variant::Rurp)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Nunp => "NUNP",
            Variant::Nurp => "NURP",
            Variant::Runp => "RUNP",
            Variant::Rurp => "RURP",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

impl TryFrom<String> for Variant {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> String {
        v.as_str().to_owned()
    }
}

/// Distortion `d(u, y)` between an input and a released value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistortionSpec {
    /// `(u_value - y_value)^2`.
    #[default]
    Squared,
    /// Explicit `|U| x |U|` matrix indexed `[u][y]`.
    Matrix(Vec<Vec<f64>>),
}

impl DistortionSpec {
    /// Row-major `u x y` matrix for `alphabet`.
    pub fn matrix(&self, alphabet: &Alphabet) -> Result<Vec<f64>> {
        let vals = alphabet.u_values();
        match self {
            DistortionSpec::Squared => {
                Ok(vals.iter().flat_map(|u| vals.iter().map(move |y| (u - y) * (u - y))).collect())
            }
            DistortionSpec::Matrix(rows) => {
                let k = alphabet.u_size();
                if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                    return Err(Error::Config(format!("distortion matrix must be {k} x {k}")));
                }
                if rows.iter().flatten().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(Error::Config("distortion entries must be finite and >= 0".into()));
                }
                Ok(rows.iter().flatten().copied().collect())
            }
        }
    }
}

/// One problem instance: the variant, the confidence set (whose center is
/// the empirical distribution), the privacy budget and the distortion.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub variant: Variant,
    pub set: UncertaintySet,
    pub epsilon: f64,
    pub distortion: DistortionSpec,
}

impl ProblemSpec {
    pub fn new(variant: Variant, set: UncertaintySet, epsilon: f64, distortion: DistortionSpec) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidDomain(format!("epsilon {epsilon} must be finite and >= 0")));
        }
        distortion.matrix(set.center().alphabet())?;
        Ok(Self { variant, set, epsilon, distortion })
    }

    pub fn phat(&self) -> &JointDistribution {
        self.set.center()
    }

    pub fn alphabet(&self) -> &Alphabet {
        self.set.center().alphabet()
    }
}

/// Location of one robust privacy block inside the program.
#[derive(Debug, Clone)]
pub struct PrivacyBlock {
    pub y: usize,
    pub s1: usize,
    pub s2: usize,
    /// Absent when the radius is zero and the constraint is linear.
    pub block: Option<SupportFprojBlock>,
}

#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub spec: ProblemSpec,
    pub program: ConicProgram,
    pub mechanism: MechanismVars,
    pub distortion: Vec<f64>,
    /// The epigraph variable `D` of the robust-utility variants.
    pub distortion_bound: Option<Var>,
    pub utility_block: Option<SupportFBlock>,
    pub privacy_blocks: Vec<PrivacyBlock>,
    pub nominal_privacy_rows: usize,
    /// Amount by which every weighted privacy constraint is tightened.
    pub privacy_margin: f64,
}

/// Assembles the conic program for `spec`.
pub fn build_problem(spec: &ProblemSpec) -> Result<BuiltProblem> {
    build_problem_with_margin(spec, 0.0)
}

/// [`build_problem`] with every weighted privacy constraint required to hold
/// with slack `margin`.
pub fn build_problem_with_margin(spec: &ProblemSpec, margin: f64) -> Result<BuiltProblem> {
    let alphabet = spec.alphabet().clone();
    let phat = spec.phat();
    let d = spec.distortion.matrix(&alphabet)?;
    let mut program = ConicProgram::new();
    let mech = blocks::mechanism_block(&mut program, &alphabet);

    let mut nominal_privacy_rows = 0;
    let mut privacy_blocks = Vec::new();
    if spec.variant.robust_privacy() {
        for y in 0..alphabet.y_size() {
            for s1 in 0..alphabet.s_size() {
                for s2 in 0..alphabet.s_size() {
                    if s1 == s2 {
                        continue;
                    }
                    let projected = spec.set.project(s1, s2)?;
                    let block = blocks::robust_privacy_block(&mut program, &mech, &projected, spec.epsilon, y, margin)?;
                    privacy_blocks.push(PrivacyBlock { y, s1, s2, block });
                }
            }
        }
    } else {
        nominal_privacy_rows = blocks::nominal_privacy_block(&mut program, &mech, phat, spec.epsilon, margin)?;
    }

    let (distortion_bound, utility_block) = if spec.variant.robust_utility() {
        let (dv, block) = blocks::robust_utility_block(&mut program, &mech, phat, spec.set.radius(), &d);
        program.set_objective(dv.into());
        (Some(dv), block)
    } else {
        let mut objective = AffineExpr::default();
        for s in 0..alphabet.s_size() {
            for u in 0..alphabet.u_size() {
                objective = objective + mech.expected_distortion(s, u, &d) * phat.get(s, u);
            }
        }
        program.set_objective(objective);
        (None, None)
    };

    Ok(BuiltProblem {
        spec: spec.clone(),
        program,
        mechanism: mech,
        distortion: d,
        distortion_bound,
        utility_block,
        privacy_blocks,
        nominal_privacy_rows,
        privacy_margin: margin,
    })
}

/// A solved variant together with its extracted mechanism and checks.
#[derive(Debug, Clone)]
pub struct SolvedProblem {
    pub built: BuiltProblem,
    pub solution: Solution,
    pub mechanism: crate::evaluation::Mechanism,
    /// Largest entrywise change made when extracting the mechanism.
    pub repair: f64,
    /// Weight of the uniform-output mechanism mixed in on extraction.
    pub mixing: f64,
    /// Whether the privacy constraints provably hold for `mechanism`.
    pub strict: bool,
    pub verification: VerificationReport,
}

/// Builds, solves, verifies and extracts the mechanism of `spec`.
///
/// When the solver's privacy violation is too large to be absorbed by the
/// uniform mixing of [`extract_mechanism`], the program is solved again with
/// the privacy constraints tightened by a margin that at least quadruples
/// each round, up to [`MARGIN_ROUNDS`] times. The first strict extraction is kept, otherwise
/// the one with the smallest violation; a tightened solve that fails ends
/// the search. At `eps = 0` no margin is feasible and none is tried.
pub fn solve_problem(spec: &ProblemSpec, solver: &dyn ConicSolver, tol: f64) -> Result<SolvedProblem> {
    let attempt = |margin: f64| -> Result<(BuiltProblem, Solution, Extraction)> {
        let built = build_problem_with_margin(spec, margin)?;
        let solution = solve(&built.program, solver, tol)?;
        let extraction = extract_mechanism(&built, &solution)?;
        Ok((built, solution, extraction))
    };
    let mut best = attempt(0.0)?;
    let mut last_violation = best.2.violation;
    let mut margin = 0.0;
    for _ in 0..MARGIN_ROUNDS {
        if best.2.strict || !(spec.epsilon > 0.0) || !(last_violation > 0.0) {
            break;
        }
        margin = (2.0 * (margin + last_violation)).max(4.0 * margin);
        let Ok(next) = attempt(margin) else { break };
        last_violation = next.2.violation;
        if next.2.strict || next.2.violation < best.2.violation {
            best = next;
        }
    }
    let (built, solution, extraction) = best;
    let verification = verify_solution(&built, &solution, VERIFY_TOL);
    Ok(SolvedProblem {
        built,
        solution,
        mechanism: extraction.mechanism,
        repair: extraction.adjustment,
        mixing: extraction.mixing,
        strict: extraction.strict,
        verification,
    })
}

/// Re-solves with tightened privacy constraints allowed by [`solve_problem`].
pub const MARGIN_ROUNDS: usize = 5;

/// Tolerance used by [`solve_problem`] when re-checking a solution.
pub const VERIFY_TOL: f64 = 1e-6;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::sample_jeffreys;

    fn spec(variant: Variant, s: usize, u: usize) -> ProblemSpec {
        let a = Alphabet::new(s, u).unwrap();
        let set = UncertaintySet::from_samples(sample_jeffreys(&a, 3), 75, 0.05).unwrap();
        ProblemSpec::new(variant, set, 0.5, DistortionSpec::Squared).unwrap()
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("nunp".parse::<Variant>().unwrap(), Variant::Nunp);
        assert_eq!("RURP".parse::<Variant>().unwrap(), Variant::Rurp);
        assert!("xyz".parse::<Variant>().is_err());
        assert_eq!(serde_json::to_string(&Variant::Runp).unwrap(), r#""RUNP""#);
    }

    #[test]
    fn squared_matrix() {
        let a = Alphabet::with_u_values(2, vec![0.0, 2.0, 3.0]).unwrap();
        let m = DistortionSpec::Squared.matrix(&a).unwrap();
        assert_eq!(m, vec![0.0, 4.0, 9.0, 4.0, 0.0, 1.0, 9.0, 1.0, 0.0]);
        assert!(DistortionSpec::Matrix(vec![vec![0.0, -1.0], vec![1.0, 0.0]]).matrix(&Alphabet::new(2, 2).unwrap()).is_err());
    }

    #[test]
    fn nunp_is_a_linear_program() {
        let built = build_problem(&spec(Variant::Nunp, 3, 5)).unwrap();
        assert_eq!(built.program.num_rotated(), 0);
        assert_eq!(built.nominal_privacy_rows, 30);
        assert_eq!(built.program.num_vars(), 75);
    }

    #[test]
    fn rurp_block_structure() {
        let built = build_problem(&spec(Variant::Rurp, 3, 5)).unwrap();
        assert_eq!(built.privacy_blocks.len(), 30);
        let utility_aux = 1 + 1 + 2 * 15 + 1; // c, m, w and t per cell, D
        assert_eq!(built.program.num_vars(), 75 + 30 * 39 + utility_aux);
    }

    #[test]
    fn negative_epsilon_rejected() {
        let a = Alphabet::new(2, 2).unwrap();
        let set = UncertaintySet::with_radius(JointDistribution::uniform(a), 0.1).unwrap();
        assert!(ProblemSpec::new(Variant::Nunp, set, -0.1, DistortionSpec::Squared).is_err());
    }

    #[test]
    fn degenerate_marginal_blocks_nominal_privacy() {
        let a = Alphabet::new(2, 2).unwrap();
        let phat = JointDistribution::new(a, vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let set = UncertaintySet::with_radius(phat, 0.1).unwrap();
        let spec = ProblemSpec::new(Variant::Nunp, set.clone(), 0.5, DistortionSpec::Squared).unwrap();
        assert!(matches!(build_problem(&spec), Err(Error::DegenerateMarginal { s: 1 })));
        let spec = ProblemSpec::new(Variant::Rurp, set, 0.5, DistortionSpec::Squared).unwrap();
        assert!(build_problem(&spec).is_ok());
    }
}
