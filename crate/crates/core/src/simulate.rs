//! Euler-Maruyama simulation of jump-diffusions and of coupled pairs `(X, X*)`.
//!
//! Both processes of a pair consume the same Brownian increments. Jumps come from one
//! Poisson stream with rate `max(m, m*)`, where `m` and `m*` are the truncated
//! compensator masses at the current step. Each point carries a thinning uniform `U`
//! and a mark uniform `V`: it is a jump of `X` when `U < m / max(m, m*)` and its size is
//! the `V`-quantile of `X`'s normalized compensator (likewise for `X*`). Equal rates
//! therefore give identical jump times, and equal measures identical marks.
//!
//! Jumps smaller than `epsilon` are dropped. Because the large jumps are compensated
//! with the first moment of the truncated measure, what is dropped is a mean-zero
//! martingale and the drift of the scheme is unchanged.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measure::{discretize, DiscreteMeasure, DEFAULT_EPSILON};
use crate::process::ProcessSpec;
use crate::rng::{stream, Domain};

/// States beyond this magnitude abort the path.
pub const EXPLOSION_LIMIT: f64 = 1e12;

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_levy_nodes() -> usize {
    512
}

/// Uniform time grid, truncation level, path budget and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub n_steps: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Atoms per discretized compensator used for simulation.
    #[serde(default = "default_levy_nodes")]
    pub levy_nodes: usize,
}

impl GridConfig {
    pub fn new(horizon: f64, n_steps: usize, n_paths: usize, seed: u64) -> Self {
        GridConfig {
            horizon,
            n_steps,
            epsilon: DEFAULT_EPSILON,
            n_paths,
            seed,
            levy_nodes: default_levy_nodes(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, step: usize) -> f64 {
        if step == self.n_steps {
            self.horizon
        } else {
            step as f64 * self.dt()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(invalid("horizon", "must be positive and finite"));
        }
        if self.n_steps == 0 {
            return Err(invalid("n_steps", "must be at least 1"));
        }
        if self.n_paths == 0 {
            return Err(invalid("n_paths", "must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon", "must be positive"));
        }
        if self.levy_nodes < 2 {
            return Err(invalid("levy_nodes", "must be at least 2"));
        }
        Ok(())
    }
}

/// Normalized compensator slice ready for inverse-CDF sampling.
#[derive(Debug, Clone, Default)]
pub(crate) struct JumpTable {
    locs: Vec<f64>,
    cdf: Vec<f64>,
    pub(crate) mass: f64,
    pub(crate) first_moment: f64,
}

impl JumpTable {
    fn new(m: &DiscreteMeasure) -> Self {
        let mass = m.total_mass();
        let mut acc = 0.0;
        let mut cdf = Vec::with_capacity(m.len());
        for &(_, w) in m.atoms() {
            acc += w;
            cdf.push(acc / mass);
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        JumpTable {
            locs: m.atoms().iter().map(|a| a.0).collect(),
            cdf,
            mass,
            first_moment: m.first_moment(),
        }
    }

    fn quantile(&self, v: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= v).min(self.locs.len() - 1);
        self.locs[i]
    }
}

/// A process with its compensator tables laid out per step.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub(crate) spec: ProcessSpec,
    tables: Vec<JumpTable>,
}

impl Prepared {
    fn new(spec: &ProcessSpec, grid: &GridConfig) -> Result<Self> {
        spec.validate(grid.horizon)?;
        let tables = if spec.jump.is_zero() {
            vec![JumpTable::default()]
        } else if spec.levy.is_time_homogeneous() {
            let m = discretize(&spec.levy, 0.0, grid.epsilon, grid.levy_nodes)?;
            vec![JumpTable::new(&m)]
        } else {
            (0..grid.n_steps)
                .map(|k| {
                    discretize(&spec.levy, grid.time(k), grid.epsilon, grid.levy_nodes)
                        .map(|m| JumpTable::new(&m))
                })
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Prepared {
            spec: spec.clone(),
            tables,
        })
    }

    pub(crate) fn table(&self, step: usize) -> &JumpTable {
        if self.tables.len() == 1 {
            &self.tables[0]
        } else {
            &self.tables[step]
        }
    }
}

#[derive(Debug, Clone)]
struct StepPlan {
    poisson: Option<Poisson<f64>>,
    accept: [f64; 2],
}

/// Noise consumed by one Euler step.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct StepNoise {
    pub(crate) db: f64,
    /// Sum of the jump marks applied to each process.
    pub(crate) sums: [f64; 2],
}

/// One point of the common Poisson stream and the processes it was applied to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub step: usize,
    /// Right end of the step in which the point fell.
    pub time: f64,
    pub mark_x: Option<f64>,
    pub mark_xstar: Option<f64>,
}

/// Shared-noise Euler driver for one or two processes.
#[derive(Debug, Clone)]
pub(crate) struct Driver {
    pub(crate) procs: Vec<Prepared>,
    plans: Vec<StepPlan>,
    pub(crate) grid: GridConfig,
}

impl Driver {
    pub(crate) fn new(specs: &[&ProcessSpec], grid: &GridConfig) -> Result<Self> {
        grid.validate()?;
        assert!(matches!(specs.len(), 1 | 2));
        let procs = specs
            .iter()
            .map(|s| Prepared::new(s, grid))
            .collect::<Result<Vec<_>>>()?;
        let dt = grid.dt();
        let mut plans = Vec::with_capacity(grid.n_steps);
        let steps = if procs.iter().all(|p| p.tables.len() == 1) { 1 } else { grid.n_steps };
        for k in 0..steps {
            let masses: Vec<f64> = procs.iter().map(|p| p.table(k).mass).collect();
            let rate = masses.iter().copied().fold(0.0, f64::max);
            let mut accept = [0.0; 2];
            for (a, m) in accept.iter_mut().zip(&masses) {
                *a = if rate > 0.0 { m / rate } else { 0.0 };
            }
            let poisson = if rate * dt > 0.0 {
                Some(Poisson::new(rate * dt).map_err(|e| invalid("jump rate", e.to_string()))?)
            } else {
                None
            };
            plans.push(StepPlan { poisson, accept });
        }
        Ok(Driver {
            procs,
            plans,
            grid: grid.clone(),
        })
    }

    pub(crate) fn draw(
        &self,
        step: usize,
        rng: &mut ChaCha8Rng,
        mut log: Option<&mut Vec<JumpEvent>>,
    ) -> StepNoise {
        let z: f64 = rng.sample(StandardNormal);
        let mut noise = StepNoise {
            db: self.grid.dt().sqrt() * z,
            sums: [0.0; 2],
        };
        let plan = &self.plans[if self.plans.len() == 1 { 0 } else { step }];
        let Some(poisson) = &plan.poisson else {
            return noise;
        };
        let n = poisson.sample(rng) as u64;
        for _ in 0..n {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            let mut marks = [None; 2];
            for (i, p) in self.procs.iter().enumerate() {
                if u < plan.accept[i] {
                    let y = p.table(step).quantile(v);
                    noise.sums[i] += y;
                    marks[i] = Some(y);
                }
            }
            if let Some(log) = log.as_deref_mut() {
                log.push(JumpEvent {
                    step,
                    time: self.grid.time(step + 1),
                    mark_x: marks[0],
                    mark_xstar: if self.procs.len() == 2 { marks[1] } else { None },
                });
            }
        }
        noise
    }

    /// Compensated jump increment `sum y_j - m_1 dt` for process `i`.
    fn jump_increment(&self, i: usize, step: usize, noise: &StepNoise) -> f64 {
        noise.sums[i] - self.procs[i].table(step).first_moment * self.grid.dt()
    }

    pub(crate) fn advance(&self, i: usize, step: usize, x: f64, noise: &StepNoise) -> f64 {
        let s = &self.procs[i].spec;
        let t = self.grid.time(step);
        let dt = self.grid.dt();
        let mut next = x + s.drift.eval(t, x) * dt + s.diffusion.eval(t, x) * noise.db;
        if !s.jump.is_zero() {
            next += s.jump.eval(t, x) * self.jump_increment(i, step, noise);
        }
        next
    }

    /// Next state and the first three derivatives of the step map at `x`.
    pub(crate) fn advance_jet(&self, i: usize, step: usize, x: f64, noise: &StepNoise) -> (f64, [f64; 3]) {
        let s = &self.procs[i].spec;
        let t = self.grid.time(step);
        let dt = self.grid.dt();
        let u = s.drift.jet(t, x);
        let sg = s.diffusion.jet(t, x);
        let k = s.jump.jet(t, x);
        let j = if s.jump.is_zero() { 0.0 } else { self.jump_increment(i, step, noise) };
        let db = noise.db;
        let next = x + u.value * dt + sg.value * db + k.value * j;
        let d1 = 1.0 + u.d1 * dt + sg.d1 * db + k.d1 * j;
        let d2 = u.d2 * dt + sg.d2 * db + k.d2 * j;
        let d3 = u.d3 * dt + sg.d3 * db + k.d3 * j;
        (next, [d1, d2, d3])
    }
}

pub(crate) fn check_state(x: f64, path: u64, step: usize) -> Result<()> {
    if x.is_finite() && x.abs() <= EXPLOSION_LIMIT {
        Ok(())
    } else {
        Err(Error::NonFiniteState { path, step })
    }
}

/// A simulated path on the uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Simulates one path of `spec`.
pub fn euler_jump_path(spec: &ProcessSpec, grid: &GridConfig, path_index: u64) -> Result<SimPath> {
    let driver = Driver::new(&[spec], grid)?;
    let mut rng = stream(grid.seed, Domain::Paths, path_index);
    let mut x = spec.x0;
    let mut values = Vec::with_capacity(grid.n_steps + 1);
    values.push(x);
    for k in 0..grid.n_steps {
        let noise = driver.draw(k, &mut rng, None);
        x = driver.advance(0, k, x, &noise);
        check_state(x, path_index, k + 1)?;
        values.push(x);
    }
    Ok(SimPath {
        times: (0..=grid.n_steps).map(|k| grid.time(k)).collect(),
        values,
    })
}

/// Terminal values of `spec` for paths `0..grid.n_paths`; aborted paths are counted.
pub fn simulate_terminals(spec: &ProcessSpec, grid: &GridConfig) -> Result<(Vec<f64>, usize)> {
    let driver = Driver::new(&[spec], grid)?;
    let results: Vec<Result<f64>> = (0..grid.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(grid.seed, Domain::Paths, i);
            let mut x = spec.x0;
            for k in 0..grid.n_steps {
                let noise = driver.draw(k, &mut rng, None);
                x = driver.advance(0, k, x, &noise);
                check_state(x, i, k + 1)?;
            }
            Ok(x)
        })
        .collect();
    let mut out = Vec::with_capacity(results.len());
    let mut aborted = 0;
    for r in results {
        match r {
            Ok(x) => out.push(x),
            Err(Error::NonFiniteState { .. }) => aborted += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((out, aborted))
}

/// One coupled path of `(X, X*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPathSample {
    pub path_index: u64,
    pub times: Vec<f64>,
    pub x_path: Vec<f64>,
    pub xstar_path: Vec<f64>,
    pub jump_log: Vec<JumpEvent>,
}

impl CoupledPathSample {
    pub fn terminal(&self) -> (f64, f64) {
        (*self.x_path.last().unwrap(), *self.xstar_path.last().unwrap())
    }
}

/// Terminal samples of a coupled run.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTerminals {
    pub x: Vec<f64>,
    pub xstar: Vec<f64>,
    /// Indices of paths that left the explosion guard, excluded from `x` and `xstar`.
    pub aborted: Vec<u64>,
}

/// Simulator for the coupled pair; paths are produced on demand from their index.
#[derive(Debug, Clone)]
pub struct CoupledSimulator {
    driver: Driver,
}

/// Prepares a coupled simulation of `x` and `xstar` on `grid`.
pub fn simulate_coupled(
    x: &ProcessSpec,
    xstar: &ProcessSpec,
    grid: &GridConfig,
) -> Result<CoupledSimulator> {
    CoupledSimulator::new(x, xstar, grid)
}

impl CoupledSimulator {
    pub fn new(x: &ProcessSpec, xstar: &ProcessSpec, grid: &GridConfig) -> Result<Self> {
        if x.x0 != xstar.x0 {
            return Err(invalid("x0", "both processes must start from the same point"));
        }
        Ok(CoupledSimulator {
            driver: Driver::new(&[x, xstar], grid)?,
        })
    }

    pub fn grid(&self) -> &GridConfig {
        &self.driver.grid
    }

    pub fn x_spec(&self) -> &ProcessSpec {
        &self.driver.procs[0].spec
    }

    pub fn xstar_spec(&self) -> &ProcessSpec {
        &self.driver.procs[1].spec
    }

    fn run<F: FnMut(usize, f64, f64)>(
        &self,
        index: u64,
        mut visit: F,
        mut log: Option<&mut Vec<JumpEvent>>,
    ) -> Result<()> {
        let d = &self.driver;
        let mut rng = stream(d.grid.seed, Domain::Paths, index);
        let (mut x, mut xs) = (d.procs[0].spec.x0, d.procs[1].spec.x0);
        visit(0, x, xs);
        for k in 0..d.grid.n_steps {
            let noise = d.draw(k, &mut rng, log.as_deref_mut());
            x = d.advance(0, k, x, &noise);
            xs = d.advance(1, k, xs, &noise);
            check_state(x, index, k + 1)?;
            check_state(xs, index, k + 1)?;
            visit(k + 1, x, xs);
        }
        Ok(())
    }

    /// Full path with node states and the jump log.
    pub fn path(&self, index: u64) -> Result<CoupledPathSample> {
        let n = self.driver.grid.n_steps + 1;
        let mut x_path = Vec::with_capacity(n);
        let mut xstar_path = Vec::with_capacity(n);
        let mut jump_log = Vec::new();
        self.run(
            index,
            |_, x, xs| {
                x_path.push(x);
                xstar_path.push(xs);
            },
            Some(&mut jump_log),
        )?;
        Ok(CoupledPathSample {
            path_index: index,
            times: (0..n).map(|k| self.driver.grid.time(k)).collect(),
            x_path,
            xstar_path,
            jump_log,
        })
    }

    /// Node states of `X` at the given steps together with the terminal pair.
    pub(crate) fn states_at(&self, index: u64, steps: &[usize]) -> Result<(Vec<f64>, (f64, f64))> {
        let mut states = Vec::with_capacity(steps.len());
        let mut next = 0;
        let mut terminal = (0.0, 0.0);
        self.run(
            index,
            |k, x, xs| {
                if next < steps.len() && steps[next] == k {
                    states.push(x);
                    next += 1;
                }
                terminal = (x, xs);
            },
            None,
        )?;
        Ok((states, terminal))
    }

    pub fn terminal(&self, index: u64) -> Result<(f64, f64)> {
        let mut terminal = (0.0, 0.0);
        self.run(index, |_, x, xs| terminal = (x, xs), None)?;
        Ok(terminal)
    }

    /// Terminal pairs of all `grid.n_paths` paths, computed in parallel and returned in
    /// index order.
    pub fn terminals(&self) -> Result<CoupledTerminals> {
        let results: Vec<Result<(f64, f64)>> = (0..self.driver.grid.n_paths as u64)
            .into_par_iter()
            .map(|i| self.terminal(i))
            .collect();
        let mut out = CoupledTerminals {
            x: Vec::with_capacity(results.len()),
            xstar: Vec::with_capacity(results.len()),
            aborted: vec![],
        };
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok((x, xs)) => {
                    out.x.push(x);
                    out.xstar.push(xs);
                }
                Err(Error::NonFiniteState { .. }) => out.aborted.push(i as u64),
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }
}
