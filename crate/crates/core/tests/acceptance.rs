//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use common::{grid_sup_1d, grid_sup_2d, kkt_support_f, two_cell_support, Projected2, SupportTable};
use rldp_core::duality::{
    brute_force_support, g_star, h_star, support_f_cells, support_fproj, ChiSquareBallSampler,
    ProjectedSampler, SUPPORT_TOL,
};
use rldp_core::experiments::check::{ORACLE_GAP, ORACLE_SAMPLES, ORACLE_SLACK};
use rldp_core::experiments::runner::{draw_instance, instance_seed};
use rldp_core::experiments::{run_scatter, run_sweep, ExperimentConfig, InstanceRecord};
use rldp_core::problems::blocks::support_fproj_block as fproj_block;
use rldp_core::problems::{
    solve_problem, AffineExpr, ClarabelSolver, Cone, ConicProgram, DistortionSpec, ProblemSpec, Variant, PRIMAL_TOL,
};
use rldp_core::seed::{derive_seed, rng_from_seed};
use rldp_core::simplex::{sample_jeffreys, Alphabet, JointDistribution};
use rldp_core::uncertainty::{radius_b, UncertaintySet};

const SEED: u64 = 0;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn interior_point<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let t: f64 = w.iter().sum();
    w.into_iter().map(|x| x / t).collect()
}

fn direction<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Largest and smallest `closed - oracle` over a batch.
fn gap_range(gaps: &[f64]) -> (f64, f64) {
    gaps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(*g), hi.max(*g)))
}

fn gaps_ok(gaps: &[f64]) -> bool {
    gaps.iter().all(|g| *g <= ORACLE_GAP && *g >= -ORACLE_SLACK)
}

fn duality_exactness() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    let directions = 100;

    let mut rng = rng_from_seed(derive_seed(SEED, 11));
    let two_cell: Vec<f64> = (0..directions)
        .map(|_| {
            let p0 = rng.random_range(0.1..0.9);
            let radius = rng.random_range(0.005..0.5);
            let v = direction(&mut rng, 2);
            support_f_cells(&[p0, 1.0 - p0], radius, &v, SUPPORT_TOL).unwrap().0 - two_cell_support(p0, radius, &v)
        })
        .collect();
    ok &= gaps_ok(&two_cell);
    lines.push(format!("2-cell ball gaps {:?}", gap_range(&two_cell)));

    let analytic = support_f_cells(&[0.5, 0.5], 0.02, &[1.0, 0.0], SUPPORT_TOL).unwrap().0;
    ok &= (analytic - 0.570014).abs() < 1e-4;
    lines.push(format!("analytic value {analytic:.7}"));

    for (s, u) in [(2, 2), (2, 3)] {
        let a = Alphabet::new(s, u).unwrap();
        let gaps: Vec<f64> = (0..directions)
            .into_par_iter()
            .map(|q| {
                let qseed = derive_seed(SEED, (100 * s + 10 * u + q) as u64);
                let mut rng = rng_from_seed(qseed);
                let center = interior_point(&mut rng, a.cells());
                let radius = rng.random_range(0.01..0.5);
                let v = direction(&mut rng, a.cells());
                let closed = support_f_cells(&center, radius, &v, SUPPORT_TOL).unwrap().0;
                let mut sampler = ChiSquareBallSampler::new(center, radius);
                closed - brute_force_support(&mut sampler, &v, ORACLE_SAMPLES, derive_seed(qseed, 1))
            })
            .collect();
        ok &= gaps_ok(&gaps);
        lines.push(format!("{s}x{u} ball gaps {:?}", gap_range(&gaps)));
    }

    for (s, u) in [(2, 2), (2, 3), (3, 2)] {
        let a = Alphabet::new(s, u).unwrap();
        let gaps: Vec<f64> = (0..directions)
            .into_par_iter()
            .map(|q| {
                let qseed = derive_seed(SEED, (1000 + 100 * s + 10 * u + q) as u64);
                let mut rng = rng_from_seed(qseed);
                let center = JointDistribution::from_weights(a.clone(), interior_point(&mut rng, a.cells())).unwrap();
                let radius = rng.random_range(0.01..0.5);
                let s1 = rng.random_range(0..s);
                let s2 = (s1 + rng.random_range(1..s)) % s;
                let proj = UncertaintySet::with_radius(center, radius).unwrap().project(s1, s2).unwrap();
                let v = direction(&mut rng, 2 * u);
                let (v1, v2) = v.split_at(u);
                let closed = support_fproj(&proj, v1, v2, SUPPORT_TOL).unwrap().0;
                let mut sampler = ProjectedSampler::new(proj).unwrap();
                closed - brute_force_support(&mut sampler, &v, ORACLE_SAMPLES, derive_seed(qseed, 1))
            })
            .collect();
        ok &= gaps_ok(&gaps);
        lines.push(format!("{s}x{u} projected gaps {:?}", gap_range(&gaps)));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(120);
    lines.push(format!("{:.1}s", elapsed.as_secs_f64()));
    check(ok, lines.join("; "))
}

fn conjugates() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(derive_seed(SEED, 12));
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let err = match i % 3 {
            0 => {
                let (k, v) = (rng.random_range(0.1..1.0), rng.random_range(-2.0..-0.1));
                let grid = grid_sup_1d(|x| v * x - k / x.sqrt(), 1e-6, 100.0, 2001, 12);
                (grid - h_star(&[k], &[v])).abs()
            }
            1 => {
                let k = [rng.random_range(0.1..1.0), rng.random_range(0.1..1.0)];
                let v = [rng.random_range(-2.0..-0.1), rng.random_range(-2.0..-0.1)];
                let f = |x: f64, y: f64| v[0] * x + v[1] * y - (k[0] * k[0] / x + k[1] * k[1] / y).sqrt();
                let grid = grid_sup_2d(f, [1e-6, 20.0, 1e-6, 20.0], 201, 14);
                (grid - h_star(&k, &v)).abs()
            }
            _ => {
                let (p, z) = (rng.random_range(0.01..1.0), rng.random_range(-3.0..-0.05));
                let grid = grid_sup_1d(|x| z * x - p * p / x, 1e-8, 50.0, 2001, 12);
                (grid - g_star(p, z)).abs()
            }
        };
        worst = worst.max(err);
    }
    let constant = -h_star(&[1.0], &[-1.0]);
    let const_err = (constant - 1.8898816).abs();
    let elapsed = start.elapsed();
    check(
        worst < 1e-3 && const_err < 1e-6 && elapsed < Duration::from_secs(30),
        format!("worst grid error {worst:.2e}; constant {constant:.9}; {:.1}s", elapsed.as_secs_f64()),
    )
}

/// Largest `q` admitted by the assembled chain `z^2 <= G q`, `q^2 <= c z` at
/// pinned `c` and `G`, by bisection on the program's own cone residuals.
fn chain_sup(c: f64, g: f64) -> f64 {
    let mut program = ConicProgram::new();
    let zero = [AffineExpr::constant(0.0)];
    let block = fproj_block(&mut program, &zero, &zero, &[1.0], &[1.0], 1.0, "chain");
    let side = &block.sides[0];
    let other = &block.sides[1];
    let feasible = |q: f64| {
        let mut x = vec![0.0; program.num_vars()];
        x[block.c.0] = c;
        x[side.w[0].0] = g;
        x[side.m.0] = g;
        x[side.g.0] = g;
        x[side.q.0] = q;
        let (lo, hi) = (q * q / c, (g * q).sqrt());
        x[side.z.0] = (lo * hi).sqrt();
        x[other.w[0].0] = 1.0;
        x[other.m.0] = 1.0;
        program.residuals(&x).max() == 0.0
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while feasible(hi) {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `|g_bound - (sum kappa sqrt(delta))^2|` with `gamma = sqrt(delta delta')`,
/// read off the assembled block, and the largest gamma-cone violation there.
fn g_identity_error<R: Rng>(rng: &mut R) -> (f64, f64) {
    let k = rng.random_range(2..=6);
    let kappa: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let delta: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..2.0)).collect();
    let mut program = ConicProgram::new();
    let v: Vec<AffineExpr> = (0..k).map(|_| AffineExpr::constant(0.0)).collect();
    let block = fproj_block(&mut program, &v, &v, &kappa, &kappa, 1.0, "g");
    let side = &block.sides[0];
    let mut x = vec![0.0; program.num_vars()];
    for (u, d) in delta.iter().enumerate() {
        x[side.w[u].0] = *d;
    }
    let mut idx = 0;
    for u in 0..k {
        for u2 in (u + 1)..k {
            x[side.gamma[idx].0] = (delta[u] * delta[u2]).sqrt();
            idx += 1;
        }
    }
    let bound_row = program
        .cones()
        .iter()
        .find_map(|c| match c {
            Cone::Nonnegative(e) if e.terms().iter().any(|(var, coef)| *var == side.g && *coef == -1.0) => Some(e),
            _ => None,
        })
        .expect("G bound row");
    let g_bound = bound_row.eval(&x) + x[side.g.0];
    let exact = kappa.iter().zip(&delta).map(|(k, d)| k * d.sqrt()).sum::<f64>().powi(2);
    let gamma_violation = program
        .cones()
        .iter()
        .filter_map(|c| match c {
            Cone::RotatedQuadratic { z, .. } if z.terms().iter().any(|(var, _)| side.gamma.contains(var)) => {
                Some(c.violation(&x))
            }
            _ => None,
        })
        .fold(0.0f64, f64::max);
    ((g_bound - exact).abs(), gamma_violation)
}

fn conic_soundness(scatter: &[InstanceRecord]) -> Outcome {
    let mut rng = rng_from_seed(derive_seed(SEED, 13));
    let mut chain_err: f64 = 0.0;
    let mut g_err: f64 = 0.0;
    let mut gamma_err: f64 = 0.0;
    for _ in 0..1000 {
        let (c, g): (f64, f64) = (rng.random_range(0.01..5.0), rng.random_range(0.01..5.0));
        chain_err = chain_err.max((chain_sup(c, g) - c.powf(2.0 / 3.0) * g.cbrt()).abs());
        let (ge, gv) = g_identity_error(&mut rng);
        g_err = g_err.max(ge);
        gamma_err = gamma_err.max(gv);
    }
    let semantic: Vec<Option<f64>> =
        scatter.iter().map(|r| r.report(Variant::Rurp).and_then(|rep| rep.semantic_max)).collect();
    let semantic_ok = !semantic.is_empty() && semantic.iter().all(|s| s.is_some_and(|v| v <= 1e-6));
    let worst_semantic = semantic.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    check(
        chain_err <= 1e-8 && g_err <= 1e-10 && gamma_err <= 1e-10 && semantic_ok,
        format!(
            "chain error {chain_err:.2e}; G identity error {g_err:.2e}; gamma cone violation {gamma_err:.2e}; \
             worst RURP recheck {worst_semantic:.2e} over {} solves",
            semantic.len()
        ),
    )
}

/// Best distortions over the `0.02`-step grid of binary mechanisms of a
/// 2x2 instance: `(nominal optimum under nominal privacy, robust optimum
/// under robust privacy)`.
fn grid_optima(phat: &JointDistribution, radius: f64, epsilon: f64) -> (f64, f64) {
    let steps = 51;
    let set = UncertaintySet::with_radius(phat.clone(), radius).unwrap();
    let shrink = (-epsilon).exp();
    let cond: Vec<Vec<f64>> = (0..2).map(|s| phat.conditional_given_s(s).unwrap()).collect();
    let tables: Vec<((usize, usize), SupportTable)> = [(0, 1), (1, 0)]
        .into_iter()
        .map(|(s1, s2)| {
            let p = set.project(s1, s2).unwrap();
            let (k1, k2) = p.kappas();
            let proj = Projected2 { k1: [k1[0], k1[1]], k2: [k2[0], k2[1]], c: p.rhs_constant() };
            ((s1, s2), proj.tabulate(8192))
        })
        .collect();
    let cells = phat.cells().to_vec();
    // a[s][u] = P(Y = 0 | s, u); squared distortion on {0, 1}.
    let evaluate = |a: [[f64; 2]; 2]| -> (bool, bool, f64) {
        let m = |s: usize, u: usize, y: usize| if y == 0 { a[s][u] } else { 1.0 - a[s][u] };
        let mut nominal_ok = true;
        let mut robust_ok = true;
        for y in 0..2 {
            for (pair, table) in &tables {
                let (s1, s2) = *pair;
                let v1 = [shrink * m(s1, 0, y), shrink * m(s1, 1, y)];
                let v2 = [-m(s2, 0, y), -m(s2, 1, y)];
                let nominal = cond[s1][0] * v1[0] + cond[s1][1] * v1[1] + cond[s2][0] * v2[0] + cond[s2][1] * v2[1];
                nominal_ok &= nominal <= 1e-9;
                robust_ok &= v1[1] + v2[1] + table.eval(v1[0] - v1[1], v2[0] - v2[1]) <= 1e-9;
            }
        }
        let d: f64 = (0..2).flat_map(|s| (0..2).map(move |u| (s, u))).map(|(s, u)| cells[s * 2 + u] * m(s, u, 1 - u)).sum();
        (nominal_ok, robust_ok, d)
    };
    let worst_case = |a: [[f64; 2]; 2]| -> f64 {
        let v: Vec<f64> = (0..2).flat_map(|s| (0..2).map(move |u| (s, u))).map(|(s, u)| if u == 0 { 1.0 - a[s][u] } else { a[s][u] }).collect();
        kkt_support_f(&cells, radius, &v)
    };
    let level = |i: usize| i as f64 / (steps - 1) as f64;
    (0..steps)
        .into_par_iter()
        .map(|i0| {
            let mut best = (f64::INFINITY, f64::INFINITY);
            for i1 in 0..steps {
                for i2 in 0..steps {
                    for i3 in 0..steps {
                        let a = [[level(i0), level(i1)], [level(i2), level(i3)]];
                        let (nominal_ok, robust_ok, d) = evaluate(a);
                        if nominal_ok {
                            best.0 = best.0.min(d);
                        }
                        if robust_ok && d < best.1 {
                            best.1 = best.1.min(worst_case(a));
                        }
                    }
                }
            }
            best
        })
        .reduce(|| (f64::INFINITY, f64::INFINITY), |x, y| (x.0.min(y.0), x.1.min(y.1)))
}

fn small_instance_optimality() -> Outcome {
    let start = Instant::now();
    let a = Alphabet::new(2, 2).unwrap();
    let radius = radius_b(100, 0.05, &a).unwrap();
    let epsilon = 0.5;
    let mut lines = Vec::new();
    let mut ok = true;
    let mut draw = 0;
    for _ in 0..5 {
        let phat = loop {
            let p = sample_jeffreys(&a, derive_seed(SEED, 400 + draw));
            draw += 1;
            if p.cells().iter().all(|c| *c >= 0.01) {
                break p;
            }
        };
        let set = UncertaintySet::with_radius(phat.clone(), radius).unwrap();
        let solve = |v: Variant| {
            let spec = ProblemSpec::new(v, set.clone(), epsilon, DistortionSpec::Squared).unwrap();
            solve_problem(&spec, &ClarabelSolver::default(), PRIMAL_TOL).unwrap().solution.objective
        };
        let (nunp, rurp) = (solve(Variant::Nunp), solve(Variant::Rurp));
        let (grid_nunp, grid_rurp) = grid_optima(&phat, radius, epsilon);
        ok &= (nunp - grid_nunp).abs() <= 0.03 && (rurp - grid_rurp).abs() <= 0.03;
        lines.push(format!("NUNP {nunp:.4}/{grid_nunp:.4} RURP {rurp:.4}/{grid_rurp:.4}"));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(300);
    lines.push(format!("{:.1}s", elapsed.as_secs_f64()));
    check(ok, format!("solver/grid: {}", lines.join("; ")))
}

fn orderings() -> Outcome {
    let config = ExperimentConfig { seed: derive_seed(SEED, 5), ..Default::default() };
    let epsilons = [0.1, 0.5, 1.0, 2.0];
    let failures: Vec<String> = (0..50)
        .into_par_iter()
        .flat_map(|i| {
            let (_, phat, _, _) = draw_instance(&config, instance_seed(config.seed, i), 75).unwrap();
            let set = UncertaintySet::from_samples(phat, 75, 0.05).unwrap();
            let opt: Vec<[f64; 4]> = epsilons
                .iter()
                .map(|&eps| {
                    Variant::ALL.map(|v| {
                        let spec = ProblemSpec::new(v, set.clone(), eps, DistortionSpec::Squared).unwrap();
                        solve_problem(&spec, &ClarabelSolver::default(), PRIMAL_TOL).unwrap().solution.objective
                    })
                })
                .collect();
            let mut bad = Vec::new();
            for (e, [nunp, nurp, runp, rurp]) in epsilons.iter().zip(&opt) {
                if !(nunp <= &(nurp + 1e-6) && nurp <= &(rurp + 1e-6) && nunp <= &(runp + 1e-6) && runp <= &(rurp + 1e-6)) {
                    bad.push(format!("instance {i} eps {e}: {nunp} {nurp} {runp} {rurp}"));
                }
            }
            for w in opt.windows(2) {
                for v in 0..4 {
                    if w[1][v] > w[0][v] + 1e-6 {
                        bad.push(format!("instance {i} {}: {} -> {}", Variant::ALL[v], w[0][v], w[1][v]));
                    }
                }
            }
            bad
        })
        .collect();
    check(failures.is_empty(), format!("50 instances x 4 eps x 4 variants; violations: {failures:?}"))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn eps_values(records: &[InstanceRecord], v: Variant) -> Vec<f64> {
    records.iter().filter_map(|r| r.report(v)).map(|r| r.eps_star).collect()
}

fn nominal_leakage(records: &[InstanceRecord], epsilon: f64) -> Outcome {
    let mut nunp = eps_values(records, Variant::Nunp);
    let mut runp = eps_values(records, Variant::Runp);
    let finite: Vec<f64> = nunp.iter().copied().filter(|e| e.is_finite()).collect();
    let above = finite.iter().filter(|e| **e > epsilon).count();
    let (m_nunp, m_runp) = (median(&mut nunp), median(&mut runp));
    check(
        nunp.len() == records.len()
            && runp.len() == records.len()
            && m_nunp > epsilon
            && m_runp > epsilon
            && 3 * above >= 2 * finite.len(),
        format!(
            "median eps* NUNP {m_nunp:.4} RUNP {m_runp:.4}; NUNP above eps {above}/{} finite",
            finite.len()
        ),
    )
}

fn robust_validity() -> Outcome {
    let config = ExperimentConfig {
        k: 200,
        n: Some(15000),
        seed: derive_seed(SEED, 7),
        variants: vec![Variant::Rurp],
        ..Default::default()
    };
    let out = run_scatter(&config, workers()).map_err(|e| e.to_string())?;
    let tol = config.epsilon + 1e-6;
    let solved: Vec<_> = out.records.iter().filter_map(|r| r.report(Variant::Rurp)).collect();
    let inside: Vec<_> = solved.iter().filter(|r| r.pstar_in_f).collect();
    let inside_ok = inside.iter().filter(|r| r.eps_star <= tol).count();
    let overall_ok = solved.iter().filter(|r| r.eps_star <= tol).count();
    let fraction = overall_ok as f64 / config.k as f64;
    check(
        out.failures() == 0 && inside_ok == inside.len() && fraction >= 0.9,
        format!(
            "P* in F: {}/{}; private among P* in F: {inside_ok}/{}; overall private fraction {fraction:.3}; failures {}",
            inside.len(),
            config.k,
            inside.len(),
            out.failures()
        ),
    )
}

fn sweep_trends() -> Outcome {
    let config = ExperimentConfig {
        k: 100,
        n: None,
        n_list: Some(vec![5, 50, 1000]),
        seed: derive_seed(SEED, 8),
        variants: vec![Variant::Nunp, Variant::Nurp, Variant::Rurp],
        ..Default::default()
    };
    let out = run_sweep(&config, workers()).map_err(|e| e.to_string())?;
    let row = |n: u64, v: Variant| out.rows.iter().find(|r| r.big_n == n && r.variant == v).unwrap();
    let conservative = row(5, Variant::Rurp).eps.mean;
    let (nurp, rurp) = (row(1000, Variant::Nurp).d.mean, row(1000, Variant::Rurp).d.mean);
    let gap = (rurp - nurp).abs() / nurp;
    let ordered: Vec<(u64, f64, f64)> =
        [5, 50, 1000].iter().map(|&n| (n, row(n, Variant::Rurp).d.mean, row(n, Variant::Nunp).d.mean)).collect();
    let ordered_ok = ordered.iter().all(|(_, r, n)| r >= n);
    check(
        conservative < config.epsilon && gap <= 0.15 && ordered_ok && out.failures() == 0,
        format!(
            "RURP mean eps* at N=5 {conservative:.4}; NURP/RURP mean D at N=1000 {nurp:.4}/{rurp:.4} (gap {:.1}%); \
             (N, RURP D, NUNP D) {ordered:.4?}; failures {}",
            100.0 * gap,
            out.failures()
        ),
    )
}

fn performance(scatter_time: Duration) -> Outcome {
    let config = ExperimentConfig::default();
    let (_, phat, _, _) = draw_instance(&config, instance_seed(derive_seed(SEED, 9), 0), 75).unwrap();
    let set = UncertaintySet::from_samples(phat, 75, 0.05).unwrap();
    let spec = ProblemSpec::new(Variant::Rurp, set, 0.5, DistortionSpec::Squared).unwrap();
    let start = Instant::now();
    solve_problem(&spec, &ClarabelSolver::default(), PRIMAL_TOL).map_err(|e| e.to_string())?;
    let single = start.elapsed();
    check(
        single <= Duration::from_secs(5) && scatter_time <= Duration::from_secs(600),
        format!("one RURP solve {:.3}s; K=30 scatter {:.1}s", single.as_secs_f64(), scatter_time.as_secs_f64()),
    )
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_rldp")).args(args).status().map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("rldp {args:?} exited with {status}"))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    std::fs::write(path("scatter.json"), r#"{"K": 6, "n": 75, "seed": 42}"#).map_err(|e| e.to_string())?;
    std::fs::write(path("sweep.json"), r#"{"K": 5, "n_list": [5, 50], "seed": 42}"#).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut ok = true;
    for kind in ["scatter", "sweep"] {
        let config = path(&format!("{kind}.json"));
        let mut outputs = Vec::new();
        for (run, w) in [("a", "1"), ("b", "3"), ("c", "3")] {
            let out = path(&format!("{kind}-{run}.csv"));
            run_cli(&[kind, "--config", &config, "--out", &out, "--workers", w])?;
            outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        let same = outputs.windows(2).all(|w| w[0] == w[1]);
        ok &= same && !outputs[0].is_empty();
        lines.push(format!("{kind}: 3 runs ({} bytes) identical {same}", outputs[0].len()));
    }
    check(ok, lines.join("; "))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(format!(
            "panicked: {}",
            p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
        )),
    }
}

fn main() {
    let scatter_config = ExperimentConfig { k: 30, n: Some(75), seed: derive_seed(SEED, 6), ..Default::default() };
    let start = Instant::now();
    let scatter = run_scatter(&scatter_config, workers());
    let scatter_time = start.elapsed();
    let scatter_records = match &scatter {
        Ok(out) => out.records.clone(),
        Err(e) => {
            eprintln!("K=30 scatter failed: {e}");
            Vec::new()
        }
    };
    let scatter_failures = scatter.as_ref().map(|o| o.failures()).unwrap_or(usize::MAX);

    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome>)> = vec![
        ("1 support functions match brute-force oracles", Box::new(duality_exactness)),
        ("2 conjugates match grid suprema", Box::new(conjugates)),
        ("3 conic reformulation is sound", Box::new(|| conic_soundness(&scatter_records))),
        ("4 small instances match the mechanism grid", Box::new(small_instance_optimality)),
        ("5 optimal values are ordered and monotone", Box::new(orderings)),
        (
            "6 nominal mechanisms leak beyond eps",
            Box::new(|| {
                if scatter_failures != 0 {
                    return Err(format!("{scatter_failures} failed solves in the scatter"));
                }
                nominal_leakage(&scatter_records, scatter_config.epsilon)
            }),
        ),
        ("7 robust privacy holds when P* is in F", Box::new(robust_validity)),
        ("8 sample-size sweep trends", Box::new(sweep_trends)),
        ("9 runtime", Box::new(move || performance(scatter_time))),
        ("10 campaigns are deterministic", Box::new(determinism)),
    ];

    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = guarded(f);
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
