//! Explicit bound formulas: the Cardan-type minimization of
//! `G(a) = D0 sqrt(a) + D1 + D2 / sqrt(a) + D3 / a`, the smooth-Wasserstein and
//! Wasserstein right-hand sides assembled from the characteristic gaps and flow
//! constants, the characteristic domination bound for product-form jumps, and a Monte
//! Carlo check of the generator-gap identity
//! `E h(X*_T) - E h(X_T) = E \int_0^T (L* v* - L v*)(t, X_t) dt`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::flow::{inner_sample, ConstantSet};
use crate::measure::{discretize, union_support, DiscreteMeasure};
use crate::process::ProcessSpec;
use crate::rng::{nested_stream, stream, Domain};
use crate::simulate::{CoupledSimulator, Driver, GridConfig};
use crate::stats::Estimate;
use crate::testfn::SmoothTestFn;

/// `D0 = 2 sqrt(2 / pi)`, twice the smoothing error constant.
pub fn d0() -> f64 {
    2.0 * (2.0 / PI).sqrt()
}

/// Coefficients of `G(a) = D0 sqrt(a) + D1 + D2 / sqrt(a) + D3 / a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CardanProblem {
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CardanCase {
    /// `D2^3 <= 27 D0 D3^2`: one real critical point, Cardan's formula.
    SingleRoot,
    /// `D2^3 > 27 D0 D3^2`: three real roots, trigonometric form.
    ThreeRoots,
    /// Some coefficient vanishes; minimized numerically.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CardanSolution {
    pub alpha_star: f64,
    pub min_value: f64,
    /// `D1 + 2 sqrt(D0 D2) (r ^ 27)^{1/6} + 3 (D0 D3 / D2) (r ^ 27)^{1/3}`, `r = D2^3 / (D0 D3^2)`.
    pub upper_bound_min3b: f64,
    pub case: CardanCase,
}

impl CardanProblem {
    /// Requires `D0, D2, D3 > 0` and `D1 >= 0`.
    pub fn new(d0: f64, d1: f64, d2: f64, d3: f64) -> Result<Self> {
        for (name, v) in [("d0", d0), ("d2", d2), ("d3", d3)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if !(d1 >= 0.0) || !d1.is_finite() {
            return Err(invalid("d1", format!("must be nonnegative and finite, got {d1}")));
        }
        Ok(CardanProblem { d0, d1, d2, d3 })
    }

    pub fn g(&self, alpha: f64) -> f64 {
        let s = alpha.sqrt();
        self.d0 * s + self.d1 + self.d2 / s + self.d3 / alpha
    }
}

/// The explicit upper bound on `min G`, valid for nonnegative coefficients.
///
/// Evaluated in a form that stays finite when `D2` or `D3` vanish: for
/// `r = D2^3 / (D0 D3^2) < 27` the two terms equal `2 D2 (D0/D3)^{1/3}` and
/// `3 (D0^2 D3)^{1/3}`; otherwise `2 sqrt(3 D0 D2)` and `9 D0 D3 / D2`.
pub fn min3b(d0: f64, d1: f64, d2: f64, d3: f64) -> f64 {
    if d2 == 0.0 && d3 == 0.0 {
        return d1;
    }
    let below = d2 * d2 * d2 < 27.0 * d0 * d3 * d3;
    if below {
        d1 + 2.0 * d2 * (d0 / d3).cbrt() + 3.0 * (d0 * d0 * d3).cbrt()
    } else {
        d1 + 2.0 * (3.0 * d0 * d2).sqrt() + 9.0 * d0 * d3 / d2
    }
}

fn golden_log_minimize(p: &CardanProblem) -> (f64, f64) {
    let f = |la: f64| p.g(la.exp());
    let (mut a, mut b) = (1e-12f64.ln(), 1e12f64.ln());
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    let la = 0.5 * (a + b);
    (la.exp(), f(la))
}

/// Minimizes `G` in closed form when `D0, D2, D3 > 0`, numerically otherwise.
pub fn cardan_minimize(p: &CardanProblem) -> CardanSolution {
    let CardanProblem { d0, d1, d2, d3 } = *p;
    let upper = min3b(d0, d1, d2, d3);
    if !(d0 > 0.0 && d2 > 0.0 && d3 > 0.0) {
        // G = D0 sqrt(a) + D1 has infimum D1 at a -> 0, outside any bracket
        let (alpha_star, min_value) = if d2 == 0.0 && d3 == 0.0 {
            (0.0, d1)
        } else {
            golden_log_minimize(p)
        };
        return CardanSolution {
            alpha_star,
            min_value,
            upper_bound_min3b: upper,
            case: CardanCase::Degenerate,
        };
    }
    let (alpha_star, case) = if d2 * d2 * d2 <= 27.0 * d0 * d3 * d3 {
        let r = d2 * d2 * d2 / (27.0 * d0 * d3 * d3);
        let q = (1.0 - r).max(0.0).sqrt();
        let beta = (d3 / d0).cbrt() * ((1.0 - q).cbrt() + (1.0 + q).cbrt());
        (beta * beta, CardanCase::SingleRoot)
    } else {
        let arg = (27.0 * d3 * d3 * d0 / (d2 * d2 * d2)).sqrt().min(1.0);
        let c = (arg.acos() / 3.0).cos();
        (4.0 * d2 / (3.0 * d0) * c * c, CardanCase::ThreeRoots)
    };
    // one Newton polish on D0 b^3 - D2 b - 2 D3 = 0 (b = sqrt(alpha)) for round-off
    let mut b = alpha_star.sqrt();
    let f = d0 * b * b * b - d2 * b - 2.0 * d3;
    let df = 3.0 * d0 * b * b - d2;
    if df > 0.0 {
        let nb = b - f / df;
        if nb > 0.0 && p.g(nb * nb) <= p.g(b * b) {
            b = nb;
        }
    }
    let alpha_star = b * b;
    CardanSolution {
        alpha_star,
        min_value: p.g(alpha_star),
        upper_bound_min3b: upper,
        case,
    }
}

/// Expected characteristic gaps along `X`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ThetaReport {
    /// `E \int |u - u*|(t, X_t) dt`
    pub theta_u: f64,
    /// `E \int |sigma^2 - sigma*^2|(t, X_t) dt`
    pub theta_sigma: f64,
    /// `E \int d_FM(nu~_t, nu~*(t, X_t)) dt`
    pub theta_nu: f64,
    /// Always `theta_u + theta_sigma + theta_nu`.
    pub theta: f64,
    pub se_u: f64,
    pub se_sigma: f64,
    pub se_nu: f64,
    /// `E \int` of the characteristic domination bound; dominates `theta_nu`.
    pub prop41_integral: f64,
    pub se_prop41: f64,
    pub n_paths: usize,
    pub aborted_paths: usize,
    /// Nodes at which the Fortet-Mourier program failed (excluded from `theta_nu`).
    pub fm_failures: usize,
}

impl ThetaReport {
    pub fn new(theta_u: f64, theta_sigma: f64, theta_nu: f64) -> Self {
        ThetaReport {
            theta_u,
            theta_sigma,
            theta_nu,
            theta: theta_u + theta_sigma + theta_nu,
            ..Default::default()
        }
    }

    /// Each component raised by `k` standard errors.
    pub fn inflated(&self, k: f64) -> Self {
        let mut t = ThetaReport::new(
            self.theta_u + k * self.se_u,
            self.theta_sigma + k * self.se_sigma,
            self.theta_nu + k * self.se_nu,
        );
        t.se_u = self.se_u;
        t.se_sigma = self.se_sigma;
        t.se_nu = self.se_nu;
        t
    }
}

/// Constant of the smooth-Wasserstein bound:
/// `max(sqrt(A2), (A1 + A2) / 2, (A1 + B1/3 + A2 + B2 + B3/3) / 2)`.
pub fn smooth_w3_constant(c: &ConstantSet) -> f64 {
    c.a2.sqrt()
        .max(0.5 * (c.a1 + c.a2))
        .max(0.5 * (c.a1 + c.b1 / 3.0 + c.a2 + c.b2 + c.b3 / 3.0))
}

/// `C Theta`, the bound on the smooth Wasserstein distance of order 3.
pub fn smooth_w3_rhs(theta: &ThetaReport, c: &ConstantSet) -> f64 {
    smooth_w3_constant(c) * theta.theta
}

/// Coefficients of the Wasserstein bound in terms of the aggregate `Theta`.
pub fn prop32_coefficients(theta: &ThetaReport, c: &ConstantSet) -> CardanProblem {
    let t = theta.theta;
    CardanProblem {
        d0: d0(),
        d1: 0.5 * c.c1 * (c.a1 + 2.0 * c.a2.sqrt() + c.b1 / 3.0) * t,
        d2: 0.5 * c.c2 * (c.a2 + c.b2) * t,
        d3: c.c3 * c.b3 / 6.0 * t,
    }
}

/// Wasserstein bound from `Theta` alone.
pub fn prop32_rhs(theta: &ThetaReport, c: &ConstantSet) -> f64 {
    let p = prop32_coefficients(theta, c);
    min3b(p.d0, p.d1, p.d2, p.d3)
}

/// Coefficients of the Wasserstein bound with the gaps kept apart.
///
/// The first-order coefficient takes, for each gap, the larger of the two readings
/// that appear in the literature: `A1 + B3/3` on `theta_sigma` and `A1 + B1/3` on
/// `theta_nu`. Since the bound is nondecreasing in `D1`, this is valid under both.
pub fn thm33_coefficients(theta_u: f64, theta_sigma: f64, theta_nu: f64, c: &ConstantSet) -> CardanProblem {
    CardanProblem {
        d0: d0(),
        d1: 0.5
            * c.c1
            * (2.0 * c.a2.sqrt() * theta_u
                + (c.a1 + c.b3 / 3.0) * theta_sigma
                + (c.a1 + c.b1 / 3.0) * theta_nu),
        d2: 0.5 * c.c2 * (c.a2 * theta_sigma + (c.a2 + c.b2) * theta_nu),
        d3: c.c3 * c.b3 / 6.0 * theta_nu,
    }
}

/// `F(theta_u, theta_sigma, theta_nu)`, the explicit Wasserstein bound.
pub fn f_evaluate(theta_u: f64, theta_sigma: f64, theta_nu: f64, c: &ConstantSet) -> Result<f64> {
    for (name, v) in [("theta_u", theta_u), ("theta_sigma", theta_sigma), ("theta_nu", theta_nu)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(invalid(name, format!("must be finite and nonnegative, got {v}")));
        }
    }
    if theta_u == 0.0 && theta_sigma == 0.0 && theta_nu == 0.0 {
        return Ok(0.0);
    }
    let p = thm33_coefficients(theta_u, theta_sigma, theta_nu, c);
    Ok(min3b(p.d0, p.d1, p.d2, p.d3))
}

/// `\int |g^2 - g*^2| dnu + \int g*^2 |g - g*| dnu* + \int g*^2 d|nu - nu*|`.
pub fn prop41_bound<G, H>(g: G, g_star: H, nu: &DiscreteMeasure, nu_star: &DiscreteMeasure) -> f64
where
    G: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    let t1 = nu.integrate(|y| (g(y).powi(2) - g_star(y).powi(2)).abs());
    let t2 = nu_star.integrate(|y| g_star(y).powi(2) * (g(y) - g_star(y)).abs());
    let t3: f64 = union_support(nu, nu_star)
        .into_iter()
        .map(|(y, w1, w2)| g_star(y).powi(2) * (w1 - w2).abs())
        .sum();
    t1 + t2 + t3
}

/// `L f(x)` at time `t` for the generator of `spec`, with the jump integral taken over
/// the compensator discretized at `epsilon` with `n_nodes` atoms. For measures with
/// infinitely many small jumps the discarded part contributes `f''(x) k^2 / 2` times
/// its second moment.
pub fn generator_apply(
    spec: &ProcessSpec,
    f: &dyn SmoothTestFn,
    t: f64,
    x: f64,
    epsilon: f64,
    n_nodes: usize,
) -> Result<f64> {
    let j = f.jet(x);
    let sigma = spec.diffusion.eval(t, x);
    let mut out = spec.drift.eval(t, x) * j[1] + 0.5 * sigma * sigma * j[2];
    if !spec.jump.is_zero() {
        let k = spec.jump.eval(t, x);
        let nu = discretize(&spec.levy, t, epsilon, n_nodes)?;
        out += nu.integrate(|y| {
            let g = k * y;
            f.value(x + g) - j[0] - g * j[1]
        });
        if spec.levy.is_infinite_activity() {
            out += 0.5 * j[2] * k * k * spec.levy.small_jump_second_moment(t, epsilon)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapVerdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

/// Both sides of the generator-gap identity and their difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCheck {
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// `lhs - rhs`, estimated pathwise.
    pub gap: f64,
    /// Standard error of `gap`; the two sides share outer paths.
    pub std_err: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    pub aborted_paths: usize,
    pub verdict: GapVerdict,
}

const GAP_JUMP_ATOMS: usize = 32;
const GAP_MIN_OUTER: usize = 100;
const GAP_MIN_INNER: usize = 10;

/// Nested Monte Carlo check of the generator-gap identity.
///
/// Each outer path of the coupled pair gives `h(X*_T) - h(X_T)` and, at one grid node
/// `t_K` drawn uniformly, `T (L* v* - L v*)(t_K, X_{t_K})` with the derivatives of `v*`
/// from `n_inner` flow paths of `X*` started at `(t_K, X_{t_K})`. The jump part of the
/// generators is skipped when both processes share jump coefficient and compensator.
pub fn generator_gap_check(
    x: &ProcessSpec,
    xstar: &ProcessSpec,
    h: &dyn SmoothTestFn,
    grid: &GridConfig,
    n_outer: usize,
    n_inner: usize,
) -> Result<GapCheck> {
    let sim_grid = GridConfig {
        n_paths: n_outer.max(1),
        ..grid.clone()
    };
    let sim = CoupledSimulator::new(x, xstar, &sim_grid)?;
    let driver = Driver::new(&[xstar], grid)?;
    let same_jumps = x.jump == xstar.jump && x.levy == xstar.levy;
    let n = grid.n_steps;
    let horizon = grid.horizon;
    let eps = grid.epsilon;

    let rows: Vec<Result<(f64, f64)>> = (0..n_outer as u64)
        .into_par_iter()
        .map(|i| {
            use rand::Rng;
            let k = stream(grid.seed, Domain::NodeChoice, i).random_range(0..n);
            let t = grid.time(k);
            let (states, (xt, xst)) = sim.states_at(i, &[k])?;
            let xk = states[0];
            let lhs = h.value(xst) - h.value(xt);

            // jump targets x + g(t, x, y) for both compensators
            let (mut nu, mut nu_star) = (DiscreteMeasure::empty(), DiscreteMeasure::empty());
            let (kx, ks) = (x.jump.eval(t, xk), xstar.jump.eval(t, xk));
            let mut targets = vec![xk];
            if !same_jumps {
                if !x.jump.is_zero() {
                    nu = discretize(&x.levy, t, eps, GAP_JUMP_ATOMS)?;
                }
                if !xstar.jump.is_zero() {
                    nu_star = discretize(&xstar.levy, t, eps, GAP_JUMP_ATOMS)?;
                }
                targets.extend(nu.atoms().iter().map(|&(y, _)| xk + kx * y));
                targets.extend(nu_star.atoms().iter().map(|&(y, _)| xk + ks * y));
            }
            let (mut d1, mut d2) = (0.0, 0.0);
            let mut v = vec![0.0; targets.len()];
            for j in 0..n_inner as u64 {
                let mut rng = nested_stream(grid.seed, i, j);
                let s = inner_sample(&driver, h, k, xk, &targets, &mut rng, i)?;
                d1 += s.d1;
                d2 += s.d2;
                for (a, b) in v.iter_mut().zip(&s.shifted) {
                    *a += b;
                }
            }
            let m = n_inner as f64;
            d1 /= m;
            d2 /= m;
            v.iter_mut().for_each(|a| *a /= m);

            let du = xstar.drift.eval(t, xk) - x.drift.eval(t, xk);
            let (s, ss) = (x.diffusion.eval(t, xk), xstar.diffusion.eval(t, xk));
            let mut gen = du * d1 + 0.5 * (ss * ss - s * s) * d2;
            if !same_jumps {
                let v0 = v[0];
                let (vx, vs) = v[1..].split_at(nu.len());
                let jx: f64 = nu.atoms().iter().zip(vx).map(|(&(y, w), &vy)| w * (vy - v0 - kx * y * d1)).sum();
                let js: f64 = nu_star
                    .atoms()
                    .iter()
                    .zip(vs)
                    .map(|(&(y, w), &vy)| w * (vy - v0 - ks * y * d1))
                    .sum();
                gen += js - jx;
                let small = |spec: &ProcessSpec, kk: f64| -> Result<f64> {
                    if spec.jump.is_zero() || !spec.levy.is_infinite_activity() {
                        Ok(0.0)
                    } else {
                        Ok(0.5 * d2 * kk * kk * spec.levy.small_jump_second_moment(t, eps)?)
                    }
                };
                gen += small(xstar, ks)? - small(x, kx)?;
            }
            Ok((lhs, horizon * gen))
        })
        .collect();

    let mut lhs = Vec::with_capacity(n_outer);
    let mut rhs = Vec::with_capacity(n_outer);
    let mut aborted = 0;
    for r in rows {
        match r {
            Ok((a, b)) => {
                lhs.push(a);
                rhs.push(b);
            }
            Err(crate::Error::NonFiniteState { .. }) => aborted += 1,
            Err(e) => return Err(e),
        }
    }
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let d = Estimate::from_samples(&diff);
    let lhs = Estimate::from_samples(&lhs);
    let rhs = Estimate::from_samples(&rhs);
    let scale = 1e-12 * (lhs.mean.abs() + rhs.mean.abs());
    let verdict = if n_outer < GAP_MIN_OUTER || n_inner < GAP_MIN_INNER || diff.len() < 2 {
        GapVerdict::Inconclusive
    } else if d.mean.abs() <= 4.0 * d.std_err + scale {
        GapVerdict::Consistent
    } else {
        GapVerdict::Inconsistent
    };
    Ok(GapCheck {
        lhs,
        rhs,
        gap: d.mean,
        std_err: d.std_err,
        n_outer,
        n_inner,
        aborted_paths: aborted,
        verdict,
    })
}

/// Outcome of comparing an empirical left side with a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    /// Exceeded only within Monte Carlo uncertainty of the gaps or of the constants.
    Inconclusive,
    Violated,
}

/// Compares `lhs` with `rhs`, falling back on `rhs_inflated` (gaps raised by three
/// standard errors) and on the reliability of the constants.
pub fn verdict(lhs: f64, rhs: f64, rhs_inflated: f64, constants_reliable: bool) -> Verdict {
    let slack = 1e-12 * rhs.abs().max(lhs.abs());
    if lhs <= rhs + slack {
        Verdict::Pass
    } else if lhs <= rhs_inflated + slack || !constants_reliable {
        Verdict::Inconclusive
    } else {
        Verdict::Violated
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::LevyMeasureSpec;
    use crate::process::CoefForm;
    use crate::testfn::{Identity, Square};

    fn unit() -> ConstantSet {
        ConstantSet::fixed(1.0, 1.0, 1.0, 1.0, 1.0).unwrap()
    }

    fn grid_min(p: &CardanProblem) -> f64 {
        (0..100_000)
            .map(|i| p.g((-20.0 + 40.0 * i as f64 / 99_999.0f64).exp()))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn boundary_case() {
        let p = CardanProblem::new(1.0, 0.0, 3.0, 1.0).unwrap();
        let s = cardan_minimize(&p);
        assert!((s.alpha_star - 4.0).abs() < 1e-12);
        assert!((s.min_value - 3.75).abs() < 1e-12);
        assert!((s.upper_bound_min3b - 9.0).abs() < 1e-12);
        assert!(grid_min(&p) >= s.min_value - 1e-12);
    }

    #[test]
    fn three_root_case() {
        let p = CardanProblem::new(1.0, 0.0, 100.0, 1.0).unwrap();
        let s = cardan_minimize(&p);
        assert_eq!(s.case, CardanCase::ThreeRoots);
        let g = grid_min(&p);
        assert!((g - s.min_value).abs() <= 1e-6 * s.min_value);
        assert!(s.min_value <= s.upper_bound_min3b);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(CardanProblem::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(CardanProblem::new(1.0, 1.0, -1.0, 1.0).is_err());
        assert!(CardanProblem::new(1.0, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn degenerate_goes_numeric() {
        let p = CardanProblem {
            d0: 1.0,
            d1: 0.5,
            d2: 4.0,
            d3: 0.0,
        };
        let s = cardan_minimize(&p);
        assert_eq!(s.case, CardanCase::Degenerate);
        assert!((s.min_value - (0.5 + 2.0 * 2.0)).abs() < 1e-9);
    }

    #[test]
    fn smooth_constant() {
        assert!((smooth_w3_constant(&unit()) - 11.0 / 6.0).abs() < 1e-15);
        assert_eq!(smooth_w3_rhs(&ThetaReport::new(0.0, 0.0, 0.0), &unit()), 0.0);
        let t = ThetaReport::new(0.1, 0.2, 0.3);
        assert!((smooth_w3_rhs(&t, &unit()) - 11.0 / 6.0 * 0.6).abs() < 1e-15);
    }

    #[test]
    fn f_zero_and_sigma_only() {
        let c = unit();
        assert_eq!(f_evaluate(0.0, 0.0, 0.0, &c).unwrap(), 0.0);
        let ts = 0.01;
        let f = f_evaluate(0.0, ts, 0.0, &c).unwrap();
        let p = thm33_coefficients(0.0, ts, 0.0, &c);
        let expected = p.d1 + 2.0 * (p.d0 * p.d2).sqrt() * 27f64.powf(1.0 / 6.0);
        assert!((f - expected).abs() < 1e-14);
        // direct minimization with a vanishing cubic coefficient stays below
        let direct = cardan_minimize(&CardanProblem { d3: 1e-12, ..p });
        assert!(direct.min_value <= f);
        assert!((direct.min_value - (p.d1 + 2.0 * (p.d0 * p.d2).sqrt())).abs() < 1e-5);
    }

    #[test]
    fn prop41_geometric_terms() {
        let (a, a_s, eta, eta_s, x) = (1.0, 1.3, 0.1, 0.12, 1.7);
        let nu = DiscreteMeasure::dirac(1.0, a).unwrap();
        let nu_s = DiscreteMeasure::dirac(1.0, a_s).unwrap();
        let b = prop41_bound(|y| eta * x * y, |y| eta_s * x * y, &nu, &nu_s);
        let expected = a * (eta * eta - eta_s * eta_s).abs() * x * x
            + a_s * eta_s * eta_s * x * x * (eta - eta_s).abs() * x.abs()
            + eta_s * eta_s * x * x * (a - a_s).abs();
        assert!((b - expected).abs() < 1e-15);
        assert_eq!(prop41_bound(|y| y, |y| y, &nu, &nu), 0.0);
    }

    #[test]
    fn generator_examples() {
        let spec = ProcessSpec::diffusion(0.0, CoefForm::affine(0.2, 0.3), CoefForm::constant(0.4));
        let x = 1.5;
        let u = 0.2 + 0.3 * x;
        assert!((generator_apply(&spec, &Identity, 0.0, x, 1e-3, 8).unwrap() - u).abs() < 1e-15);
        let sq = generator_apply(&spec, &Square, 0.0, x, 1e-3, 8).unwrap();
        assert!((sq - (2.0 * x * u + 0.16)).abs() < 1e-14);
        let (a, eta) = (2.0, 0.3);
        let geo = ProcessSpec {
            levy: LevyMeasureSpec::point_mass(a, 1.0),
            jump: CoefForm::linear(eta),
            ..spec.clone()
        };
        let sq = generator_apply(&geo, &Square, 0.0, x, 1e-3, 8).unwrap();
        assert!((sq - (2.0 * x * u + 0.16 + a * eta * eta * x * x)).abs() < 1e-13);
        assert!((generator_apply(&geo, &Identity, 0.0, x, 1e-3, 8).unwrap() - u).abs() < 1e-15);
    }

    #[test]
    fn verdict_logic() {
        assert_eq!(verdict(1.0, 2.0, 3.0, true), Verdict::Pass);
        assert_eq!(verdict(2.5, 2.0, 3.0, true), Verdict::Inconclusive);
        assert_eq!(verdict(3.5, 2.0, 3.0, false), Verdict::Inconclusive);
        assert_eq!(verdict(3.5, 2.0, 3.0, true), Verdict::Violated);
    }

    #[test]
    fn identical_specs_gap_is_zero() {
        let spec = ProcessSpec::diffusion(0.5, CoefForm::constant(0.1), CoefForm::constant(0.3));
        let grid = GridConfig::new(1.0, 10, 1, 3);
        let r = generator_gap_check(&spec, &spec, &Identity, &grid, 200, 10).unwrap();
        assert_eq!((r.lhs.mean, r.rhs.mean), (0.0, 0.0));
        assert_eq!(r.verdict, GapVerdict::Consistent);
    }
}
