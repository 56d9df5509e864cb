//! First, second and third derivatives of the simulated flow `x -> X*_{s,t}(x)` and
//! the moment constants built from them.
//!
//! The Euler step `x -> Phi(x)` is differentiated exactly, so the variations obey
//! `y1 <- Phi' y1`, `y2 <- Phi'' y1^2 + Phi' y2` and
//! `y3 <- Phi''' y1^3 + 3 Phi'' y1 y2 + Phi' y3` along the same noise as the base path.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::process::ProcessSpec;
use crate::quadrature::gaussian_constant;
use crate::rng::{stream, Domain};
use crate::simulate::{check_state, Driver, GridConfig};
use crate::stats::Estimate;
use crate::testfn::SmoothTestFn;

pub const DEFAULT_SAFETY_FACTOR: f64 = 1.5;

/// Flow state and its first three derivatives in the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationState {
    pub x: f64,
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
}

impl VariationState {
    pub fn start(x: f64) -> Self {
        VariationState {
            x,
            y1: 1.0,
            y2: 0.0,
            y3: 0.0,
        }
    }

    fn step(&mut self, next: f64, d: [f64; 3]) {
        let VariationState { y1, y2, y3, .. } = *self;
        self.x = next;
        self.y1 = d[0] * y1;
        self.y2 = d[1] * y1 * y1 + d[0] * y2;
        self.y3 = d[2] * y1 * y1 * y1 + 3.0 * d[1] * y1 * y2 + d[0] * y3;
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y1.is_finite() && self.y2.is_finite() && self.y3.is_finite()
    }
}

fn run_flows<F: FnMut(usize, &[VariationState])>(
    driver: &Driver,
    start_step: usize,
    starts: &[f64],
    rng: &mut ChaCha8Rng,
    path: u64,
    mut visit: F,
) -> Result<()> {
    let mut states: Vec<VariationState> = starts.iter().map(|&x| VariationState::start(x)).collect();
    visit(start_step, &states);
    for k in start_step..driver.grid.n_steps {
        let noise = driver.draw(k, rng, None);
        for s in states.iter_mut() {
            let (next, d) = driver.advance_jet(0, k, s.x, &noise);
            s.step(next, d);
            check_state(s.x, path, k + 1)?;
            if !s.is_finite() {
                return Err(Error::NonFiniteState { path, step: k + 1 });
            }
        }
        visit(k + 1, &states);
    }
    Ok(())
}

/// Variation processes started at each of `start_points` at time 0, all driven by the
/// noise of path `path_index`. Returns one state per grid node and start point.
pub fn variation_paths(
    spec: &ProcessSpec,
    grid: &GridConfig,
    start_points: &[f64],
    path_index: u64,
) -> Result<Vec<Vec<VariationState>>> {
    let driver = Driver::new(&[spec], grid)?;
    let mut rng = stream(grid.seed, Domain::Flow, path_index);
    let mut out = vec![Vec::with_capacity(grid.n_steps + 1); start_points.len()];
    run_flows(&driver, 0, start_points, &mut rng, path_index, |_, states| {
        for (o, s) in out.iter_mut().zip(states) {
            o.push(*s);
        }
    })?;
    Ok(out)
}

/// Terminal flow state from `x` at time 0 for path `path_index`.
pub fn flow_terminal(spec: &ProcessSpec, grid: &GridConfig, x: f64, path_index: u64) -> Result<VariationState> {
    let paths = variation_paths(spec, grid, &[x], path_index)?;
    Ok(*paths[0].last().unwrap())
}

/// Monte Carlo standard errors of the five flow constants (before the safety factor).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstantErrors {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

/// How a [`ConstantSet`] was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantProvenance {
    pub method: String,
    pub n_paths: usize,
    pub start_points: Vec<f64>,
    pub safety_factor: f64,
    pub seed: u64,
    pub horizon: f64,
    pub n_steps: usize,
    pub epsilon: f64,
    pub aborted_paths: usize,
}

/// Flow moment constants and Gaussian constants entering every bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantSet {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub std_err: ConstantErrors,
    pub warnings: Vec<String>,
    pub provenance: ConstantProvenance,
}

impl ConstantSet {
    /// Constants given directly, with Gaussian constants by quadrature.
    pub fn fixed(a1: f64, a2: f64, b1: f64, b2: f64, b3: f64) -> Result<Self> {
        for (name, v) in [("a1", a1), ("a2", a2), ("b1", b1), ("b2", b2), ("b3", b3)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(name, "constants must be finite and nonnegative"));
            }
        }
        Ok(ConstantSet {
            a1,
            a2,
            b1,
            b2,
            b3,
            c1: gaussian_constant(1)?,
            c2: gaussian_constant(2)?,
            c3: gaussian_constant(3)?,
            std_err: ConstantErrors::default(),
            warnings: vec![],
            provenance: ConstantProvenance {
                method: "fixed".into(),
                n_paths: 0,
                start_points: vec![],
                safety_factor: 1.0,
                seed: 0,
                horizon: 0.0,
                n_steps: 0,
                epsilon: 0.0,
                aborted_paths: 0,
            },
        })
    }

    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// `n` points evenly spaced over `[x0 / 2, 2 x0]` (ordered by value).
pub fn default_start_grid(x0: f64, n: usize) -> Vec<f64> {
    let (a, b) = if x0 == 0.0 { (-1.0, 1.0) } else { (0.5 * x0, 2.0 * x0) };
    let (lo, hi) = (a.min(b), a.max(b));
    if n == 1 {
        return vec![x0];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, Default)]
struct Sups {
    y2: f64,
    y1_sq: f64,
    y1_cube: f64,
    y3: f64,
    y1y2: f64,
    y2_sq: f64,
    y1_abs: f64,
}

impl Sups {
    fn update(&mut self, s: &VariationState) {
        let a1 = s.y1.abs();
        self.y2 = self.y2.max(s.y2.abs());
        self.y1_sq = self.y1_sq.max(a1 * a1);
        self.y1_cube = self.y1_cube.max(a1 * a1 * a1);
        self.y3 = self.y3.max(s.y3.abs());
        self.y1y2 = self.y1y2.max((s.y1 * s.y2).abs());
        self.y2_sq = self.y2_sq.max(s.y2 * s.y2);
        self.y1_abs = self.y1_abs.max(a1);
    }
}

/// Estimates `A1 = E sup|y2|`, `A2 = E sup y1^2`, `B1 = E sup|y3|`, `B2 = E sup|y1 y2|`
/// and `B3 = E sup|y1|^3`, each maximized over `start_grid` and multiplied by
/// `safety_factor`.
///
/// The flow is started at time 0 and the supremum runs over grid nodes. For
/// coefficients that do not depend on time, `X*_{t,T}` has the law of `X*_{0,T-t}`, so
/// this dominates the supremum over later start times.
pub fn estimate_constants(
    spec: &ProcessSpec,
    grid: &GridConfig,
    start_grid: &[f64],
    n_paths: usize,
    safety_factor: f64,
) -> Result<ConstantSet> {
    if start_grid.is_empty() {
        return Err(invalid("start_grid", "needs at least one point"));
    }
    if n_paths < 2 {
        return Err(invalid("n_paths", "need at least 2 paths"));
    }
    if !(safety_factor >= 1.0) {
        return Err(invalid("safety_factor", "must be >= 1"));
    }
    let driver = Driver::new(&[spec], grid)?;
    let per_path: Vec<Result<Vec<Sups>>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(grid.seed, Domain::Flow, i);
            let mut sups = vec![Sups::default(); start_grid.len()];
            run_flows(&driver, 0, start_grid, &mut rng, i, |_, states| {
                for (s, st) in sups.iter_mut().zip(states) {
                    s.update(st);
                }
            })?;
            Ok(sups)
        })
        .collect();
    let mut kept = Vec::with_capacity(n_paths);
    let mut aborted = 0;
    for r in per_path {
        match r {
            Ok(s) => kept.push(s),
            Err(Error::NonFiniteState { .. }) => aborted += 1,
            Err(e) => return Err(e),
        }
    }
    if kept.len() < 2 {
        return Err(invalid("n_paths", "fewer than 2 flow paths survived"));
    }
    let mut warnings = vec![];
    if aborted > 0 {
        warnings.push(format!("{aborted} flow paths aborted by the explosion guard"));
    }
    let pick = |f: fn(&Sups) -> f64| -> Estimate {
        (0..start_grid.len())
            .map(|j| Estimate::from_samples(&kept.iter().map(|s| f(&s[j])).collect::<Vec<_>>()))
            .fold(Estimate::default(), |best, e| if e.mean > best.mean { e } else { best })
    };
    let a1 = pick(|s| s.y2);
    let a2 = pick(|s| s.y1_sq);
    let b1 = pick(|s| s.y3);
    let b2 = pick(|s| s.y1y2);
    let b3 = pick(|s| s.y1_cube);
    for (name, e) in [("A1", a1), ("A2", a2), ("B1", b1), ("B2", b2), ("B3", b3)] {
        if e.relative_error() > 0.2 {
            warnings.push(format!(
                "{name}: relative standard error {:.1}% exceeds 20%",
                100.0 * e.relative_error()
            ));
        }
    }
    // consistency diagnostics on every start point
    for j in 0..start_grid.len() {
        let mean = |f: fn(&Sups) -> f64| kept.iter().map(|s| f(&s[j])).sum::<f64>() / kept.len() as f64;
        let (m1, m11, m12, m22) = (mean(|s| s.y1_abs), mean(|s| s.y1_sq), mean(|s| s.y1y2), mean(|s| s.y2_sq));
        if m1 * m1 > m11 * (1.0 + 1e-12) {
            warnings.push(format!("start {}: (E sup|y1|)^2 exceeds E sup y1^2", start_grid[j]));
        }
        if m12 > (m11 * m22).sqrt() * (1.0 + 1e-9) + 1e-300 {
            warnings.push(format!("start {}: Hoelder check on E sup|y1 y2| failed", start_grid[j]));
        }
    }
    let mut set = ConstantSet::fixed(
        safety_factor * a1.mean,
        safety_factor * a2.mean,
        safety_factor * b1.mean,
        safety_factor * b2.mean,
        safety_factor * b3.mean,
    )?;
    set.std_err = ConstantErrors {
        a1: a1.std_err,
        a2: a2.std_err,
        b1: b1.std_err,
        b2: b2.std_err,
        b3: b3.std_err,
    };
    set.warnings = warnings;
    set.provenance = ConstantProvenance {
        method: "monte_carlo_flow".into(),
        n_paths,
        start_points: start_grid.to_vec(),
        safety_factor,
        seed: grid.seed,
        horizon: grid.horizon,
        n_steps: grid.n_steps,
        epsilon: grid.epsilon,
        aborted_paths: aborted,
    };
    Ok(set)
}

/// Monte Carlo estimates of `d/dx v*(t, x)` and `d^2/dx^2 v*(t, x)` where
/// `v*(t, x) = E h(X*_{t,T}(x))`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VstarDerivatives {
    pub value: Estimate,
    pub d1: Estimate,
    pub d2: Estimate,
}

/// Nearest grid step to `t`.
pub fn step_of(grid: &GridConfig, t: f64) -> usize {
    ((t / grid.dt()).round().max(0.0) as usize).min(grid.n_steps)
}

pub(crate) struct InnerSample {
    pub d1: f64,
    pub d2: f64,
    /// `h(X*_{t,T}(x_j))` for each extra start point `x_j`.
    pub shifted: Vec<f64>,
}

/// One inner path: derivative samples at `x` and values at the shifted points, all on
/// common noise.
pub(crate) fn inner_sample(
    driver: &Driver,
    h: &dyn SmoothTestFn,
    start_step: usize,
    x: f64,
    shifted: &[f64],
    rng: &mut ChaCha8Rng,
    path: u64,
) -> Result<InnerSample> {
    let mut starts = Vec::with_capacity(shifted.len() + 1);
    starts.push(x);
    starts.extend_from_slice(shifted);
    let mut last = Vec::new();
    run_flows(driver, start_step, &starts, rng, path, |k, states| {
        if k == driver.grid.n_steps {
            last = states.to_vec();
        }
    })?;
    let s = last[0];
    let j = h.jet(s.x);
    Ok(InnerSample {
        d1: j[1] * s.y1,
        d2: j[1] * s.y2 + j[2] * s.y1 * s.y1,
        shifted: last[1..].iter().map(|st| h.value(st.x)).collect(),
    })
}

/// Derivatives of `v*` at `(t, x)`; `t` is rounded to the nearest grid node.
pub fn vstar_derivatives_mc(
    spec: &ProcessSpec,
    h: &dyn SmoothTestFn,
    t: f64,
    x: f64,
    n_paths: usize,
    grid: &GridConfig,
) -> Result<VstarDerivatives> {
    if n_paths == 0 {
        return Err(invalid("n_paths", "must be at least 1"));
    }
    let driver = Driver::new(&[spec], grid)?;
    let k0 = step_of(grid, t);
    let samples: Vec<Result<(f64, InnerSample)>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(grid.seed, Domain::Inner, i);
            let mut last = VariationState::start(x);
            run_flows(&driver, k0, &[x], &mut rng, i, |_, st| last = st[0])?;
            let value = h.value(last.x);
            let j = h.jet(last.x);
            Ok((
                value,
                InnerSample {
                    d1: j[1] * last.y1,
                    d2: j[1] * last.y2 + j[2] * last.y1 * last.y1,
                    shifted: vec![],
                },
            ))
        })
        .collect();
    let mut v = Vec::with_capacity(n_paths);
    let mut d1 = Vec::with_capacity(n_paths);
    let mut d2 = Vec::with_capacity(n_paths);
    for s in samples {
        let (val, s) = s?;
        v.push(val);
        d1.push(s.d1);
        d2.push(s.d2);
    }
    Ok(VstarDerivatives {
        value: Estimate::from_samples(&v),
        d1: Estimate::from_samples(&d1),
        d2: Estimate::from_samples(&d2),
    })
}
