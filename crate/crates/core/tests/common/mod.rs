//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

/// `sup { v . P : P on the simplex, sum (phat - P)^2 / P <= radius }` from the
/// stationarity conditions: `P_i ∝ phat_i / sqrt(mu - v_i)` with `mu` chosen by
/// bisection so that the constraint is active. Needs every `phat_i > 0`.
pub fn kkt_support_f(phat: &[f64], radius: f64, v: &[f64]) -> f64 {
    let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if v.iter().all(|x| (x - vmax).abs() < 1e-300) {
        return vmax;
    }
    let phi = |gap: f64| {
        let mu = vmax + gap;
        let a: f64 = phat.iter().zip(v).map(|(p, x)| p * (mu - x).sqrt()).sum();
        let b: f64 = phat.iter().zip(v).map(|(p, x)| p / (mu - x).sqrt()).sum();
        a * b
    };
    let target = 1.0 + radius;
    let mut hi = 1.0;
    while phi(hi) > target {
        hi *= 2.0;
    }
    let mut lo = hi;
    while phi(lo) <= target && lo > 1e-300 {
        lo /= 2.0;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if phi(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = vmax + hi;
    let weights: Vec<f64> = phat.iter().zip(v).map(|(p, x)| p / (mu - x).sqrt()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter().zip(v).map(|(w, x)| w / total * x).sum()
}

/// Endpoints of the two-cell ball `{(p, 1 - p) : chi2 <= radius}` by bisection.
pub fn two_cell_interval(phat0: f64, radius: f64) -> (f64, f64) {
    let inside = |p: f64| {
        let q = [p, 1.0 - p];
        let c = [phat0, 1.0 - phat0];
        c.iter().zip(&q).map(|(c, q)| (c - q).powi(2) / q).sum::<f64>() <= radius
    };
    let edge = |mut a: f64, mut b: f64| {
        // `a` inside, `b` outside.
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if inside(m) {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };
    (edge(phat0, 0.0), edge(phat0, 1.0))
}

pub fn two_cell_support(phat0: f64, radius: f64, v: &[f64]) -> f64 {
    let (lo, hi) = two_cell_interval(phat0, radius);
    let at = |p: f64| v[0] * p + v[1] * (1.0 - p);
    at(lo).max(at(hi))
}

/// The projected set of a `|U| = 2` alphabet in the coordinates
/// `(r, t) = (R1(0), R2(0))`: `f1(r) + f2(t) <= C`.
#[derive(Debug, Clone)]
pub struct Projected2 {
    pub k1: [f64; 2],
    pub k2: [f64; 2],
    pub c: f64,
}

fn root_term(k: [f64; 2], r: f64) -> f64 {
    (k[0] * k[0] / r + k[1] * k[1] / (1.0 - r)).sqrt()
}

/// Sublevel interval `{x : f(x) <= level}` of the convex `f` with minimizer `x0`.
fn sublevel(k: [f64; 2], level: f64) -> Option<(f64, f64)> {
    let x0 = k[0] / (k[0] + k[1]);
    if root_term(k, x0) > level {
        return None;
    }
    let side = |mut a: f64, mut b: f64| {
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if root_term(k, m) <= level {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };
    Some((side(x0, 0.0), side(x0, 1.0)))
}

impl Projected2 {
    /// `sup { a r + b t }` over the set, by golden-section search on `r`
    /// of the concave profile `a r + max_t b t`.
    pub fn support_ab(&self, a: f64, b: f64) -> f64 {
        let (r_lo, r_hi) = sublevel(self.k1, self.c - (self.k2[0] + self.k2[1])).expect("nonempty set");
        let profile = |r: f64| {
            let level = self.c - root_term(self.k1, r);
            match sublevel(self.k2, level) {
                Some((t_lo, t_hi)) => a * r + (b * t_lo).max(b * t_hi),
                None => f64::NEG_INFINITY,
            }
        };
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (r_lo, r_hi);
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let (mut f1, mut f2) = (profile(x1), profile(x2));
        for _ in 0..100 {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = profile(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = profile(x1);
            }
        }
        [profile(r_lo), profile(r_hi), f1, f2].into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Support at the direction pair `(v1, v2)` on the conditional simplices.
    pub fn support(&self, v1: &[f64], v2: &[f64]) -> f64 {
        v1[1] + v2[1] + self.support_ab(v1[0] - v1[1], v2[0] - v2[1])
    }

    /// Support function in polar form on `n` equally spaced angles.
    pub fn tabulate(&self, n: usize) -> SupportTable {
        let values = (0..n)
            .map(|j| {
                let th = std::f64::consts::TAU * j as f64 / n as f64;
                self.support_ab(th.cos(), th.sin())
            })
            .collect();
        SupportTable { values }
    }
}

/// Tabulated support function of a planar convex set, linearly interpolated in angle.
#[derive(Debug, Clone)]
pub struct SupportTable {
    values: Vec<f64>,
}

impl SupportTable {
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        let rho = a.hypot(b);
        if rho == 0.0 {
            return 0.0;
        }
        let n = self.values.len();
        let pos = b.atan2(a).rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU * n as f64;
        let j = (pos.floor() as usize) % n;
        let frac = pos - pos.floor();
        rho * ((1.0 - frac) * self.values[j] + frac * self.values[(j + 1) % n])
    }
}

/// Largest value of `f` over `[lo, hi]` by repeated grid refinement: a grid
/// of `points` values, then a zoom to the two neighbouring cells of the best
/// point, `rounds` times.
pub fn grid_sup_1d(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, points: usize, rounds: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for _ in 0..rounds {
        let step = (hi - lo) / (points - 1) as f64;
        let mut arg = lo;
        for i in 0..points {
            let x = lo + step * i as f64;
            let y = f(x);
            if y > best {
                best = y;
                arg = x;
            }
        }
        lo = (arg - step).max(lo);
        hi = (arg + step).min(hi);
    }
    best
}

/// Two-dimensional version of [`grid_sup_1d`] on a box.
pub fn grid_sup_2d(f: impl Fn(f64, f64) -> f64, mut bx: [f64; 4], points: usize, rounds: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for _ in 0..rounds {
        let sx = (bx[1] - bx[0]) / (points - 1) as f64;
        let sy = (bx[3] - bx[2]) / (points - 1) as f64;
        let mut arg = (bx[0], bx[2]);
        for i in 0..points {
            for j in 0..points {
                let (x, y) = (bx[0] + sx * i as f64, bx[2] + sy * j as f64);
                let val = f(x, y);
                if val > best {
                    best = val;
                    arg = (x, y);
                }
            }
        }
        bx = [(arg.0 - sx).max(bx[0]), (arg.0 + sx).min(bx[1]), (arg.1 - sy).max(bx[2]), (arg.1 + sy).min(bx[3])];
    }
    best
}
