//! Characteristic gaps between `X` and `X*` along simulated paths of `X`, their time
//! integrals, and trace output.
//!
//! At a node `(t, X_t)` the coefficients of both processes are evaluated at the state of
//! `X`. The jump parts are compared through the `y^2`-tilted images of the compensators
//! under `y -> k(t, X_t) y` and `y -> k*(t, X_t) y`.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{prop41_bound, ThetaReport};
use crate::distance::fm_discrete;
use crate::error::{invalid, Error, Result};
use crate::measure::{discretize_pair, scaled_tilt, DiscreteMeasure};
use crate::simulate::{CoupledPathSample, CoupledSimulator};
use crate::stats::Estimate;

/// Node subsampling and discretization used for the characteristic integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicsConfig {
    /// Time nodes per path at which gaps are evaluated; 0 means every grid node.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// Atoms per compensator in Fortet-Mourier evaluations.
    #[serde(default = "default_fm_atoms")]
    pub fm_atoms: usize,
}

fn default_nodes() -> usize {
    64
}

fn default_fm_atoms() -> usize {
    64
}

impl Default for CharacteristicsConfig {
    fn default() -> Self {
        CharacteristicsConfig {
            nodes: default_nodes(),
            fm_atoms: default_fm_atoms(),
        }
    }
}

/// Gaps at one node of one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub path_id: u64,
    pub step: usize,
    pub t: f64,
    pub x: f64,
    pub xstar: f64,
    /// `|u - u*|(t, X_t)`
    pub du: f64,
    /// `|sigma^2 - sigma*^2|(t, X_t)`
    pub dsig2: f64,
    /// Fortet-Mourier distance of the tilted jump measures; `None` if the program failed.
    pub dfm: Option<f64>,
    /// Characteristic domination bound at the node.
    pub prop41: f64,
}

/// Evaluator of the node gaps for a coupled pair.
pub struct Characteristics<'a> {
    sim: &'a CoupledSimulator,
    node_steps: Vec<usize>,
    weights: Vec<f64>,
    measures: Vec<(DiscreteMeasure, DiscreteMeasure)>,
    same_jumps: bool,
    /// Jump gaps per node when both jump coefficients ignore the state.
    cached: Option<Vec<(Option<f64>, f64)>>,
}

impl<'a> Characteristics<'a> {
    pub fn new(sim: &'a CoupledSimulator, config: &CharacteristicsConfig) -> Result<Self> {
        let grid = sim.grid();
        let (x, xs) = (sim.x_spec(), sim.xstar_spec());
        if config.fm_atoms < 2 {
            return Err(invalid("fm_atoms", "must be at least 2"));
        }
        let n = grid.n_steps;
        let m = if config.nodes == 0 { n } else { config.nodes.min(n) };
        let node_steps: Vec<usize> = (0..m).map(|j| j * n / m).collect();
        let weights: Vec<f64> = (0..m)
            .map(|j| {
                let next = if j + 1 < m { node_steps[j + 1] } else { n };
                (next - node_steps[j]) as f64 * grid.dt()
            })
            .collect();
        let same_jumps = x.jump == xs.jump && x.levy == xs.levy;
        let homogeneous = x.levy.is_time_homogeneous() && xs.levy.is_time_homogeneous();
        let measures = if same_jumps {
            vec![]
        } else if homogeneous {
            vec![discretize_pair(&x.levy, &xs.levy, 0.0, grid.epsilon, config.fm_atoms)?]
        } else {
            node_steps
                .iter()
                .map(|&k| discretize_pair(&x.levy, &xs.levy, grid.time(k), grid.epsilon, config.fm_atoms))
                .collect::<Result<Vec<_>>>()?
        };
        let mut out = Characteristics {
            sim,
            node_steps,
            weights,
            measures,
            same_jumps,
            cached: None,
        };
        if !same_jumps && x.jump.is_state_independent() && xs.jump.is_state_independent() {
            let cache = (0..out.node_steps.len())
                .into_par_iter()
                .map(|j| out.jump_gap(j, 0.0))
                .collect();
            out.cached = Some(cache);
        }
        Ok(out)
    }

    pub fn node_steps(&self) -> &[usize] {
        &self.node_steps
    }

    /// Time weights of the left-endpoint Riemann sum over the subsampled nodes.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn jump_gap(&self, j: usize, x: f64) -> (Option<f64>, f64) {
        if self.same_jumps {
            return (Some(0.0), 0.0);
        }
        if let Some(c) = &self.cached {
            return c[j];
        }
        let t = self.sim.grid().time(self.node_steps[j]);
        let (nu, nu_star) = &self.measures[if self.measures.len() == 1 { 0 } else { j }];
        let k = self.sim.x_spec().jump.eval(t, x);
        let ks = self.sim.xstar_spec().jump.eval(t, x);
        let dfm = fm_discrete(&scaled_tilt(nu, k), &scaled_tilt(nu_star, ks)).ok();
        let p41 = prop41_bound(|y| k * y, |y| ks * y, nu, nu_star);
        (dfm, p41)
    }

    fn record(&self, path_id: u64, j: usize, x: f64, xstar: f64) -> NodeRecord {
        let step = self.node_steps[j];
        let t = self.sim.grid().time(step);
        let (a, b) = (self.sim.x_spec(), self.sim.xstar_spec());
        let (s, ss) = (a.diffusion.eval(t, x), b.diffusion.eval(t, x));
        let (dfm, prop41) = self.jump_gap(j, x);
        NodeRecord {
            path_id,
            step,
            t,
            x,
            xstar,
            du: (a.drift.eval(t, x) - b.drift.eval(t, x)).abs(),
            dsig2: (s * s - ss * ss).abs(),
            dfm,
            prop41,
        }
    }

    /// Gap records at the subsampled nodes of `path`.
    pub fn along_path(&self, path: &CoupledPathSample) -> Vec<NodeRecord> {
        (0..self.node_steps.len())
            .map(|j| {
                let k = self.node_steps[j];
                self.record(path.path_index, j, path.x_path[k], path.xstar_path[k])
            })
            .collect()
    }
}

/// Gap records at the subsampled nodes of one coupled path.
pub fn characteristics_along_path(
    sim: &CoupledSimulator,
    config: &CharacteristicsConfig,
    path: &CoupledPathSample,
) -> Result<Vec<NodeRecord>> {
    Ok(Characteristics::new(sim, config)?.along_path(path))
}

/// Monte Carlo estimate of the three characteristic integrals over all paths of `sim`.
/// Records of the first `trace_paths` paths are returned for output.
pub fn estimate_theta(
    sim: &CoupledSimulator,
    config: &CharacteristicsConfig,
    trace_paths: usize,
) -> Result<(ThetaReport, Vec<NodeRecord>)> {
    let ch = Characteristics::new(sim, config)?;
    let n = sim.grid().n_paths;
    struct PathSums {
        u: f64,
        s: f64,
        nu: f64,
        p41: f64,
        failures: usize,
        trace: Vec<NodeRecord>,
    }
    let rows: Vec<Result<PathSums>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let path = sim.path(i)?;
            let recs = ch.along_path(&path);
            let mut p = PathSums {
                u: 0.0,
                s: 0.0,
                nu: 0.0,
                p41: 0.0,
                failures: 0,
                trace: vec![],
            };
            for (r, w) in recs.iter().zip(&ch.weights) {
                p.u += w * r.du;
                p.s += w * r.dsig2;
                p.p41 += w * r.prop41;
                match r.dfm {
                    Some(v) => p.nu += w * v,
                    None => p.failures += 1,
                }
            }
            if (i as usize) < trace_paths {
                p.trace = recs;
            }
            Ok(p)
        })
        .collect();
    let mut u = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut nu = Vec::with_capacity(n);
    let mut p41 = Vec::with_capacity(n);
    let mut trace = vec![];
    let mut aborted = 0;
    let mut failures = 0;
    for r in rows {
        match r {
            Ok(p) => {
                u.push(p.u);
                s.push(p.s);
                nu.push(p.nu);
                p41.push(p.p41);
                failures += p.failures;
                trace.extend(p.trace);
            }
            Err(Error::NonFiniteState { .. }) => aborted += 1,
            Err(e) => return Err(e),
        }
    }
    if u.is_empty() {
        return Err(invalid("n_paths", "every path was aborted by the explosion guard"));
    }
    let (eu, es, en, ep) = (
        Estimate::from_samples(&u),
        Estimate::from_samples(&s),
        Estimate::from_samples(&nu),
        Estimate::from_samples(&p41),
    );
    let mut report = ThetaReport::new(eu.mean, es.mean, en.mean);
    report.se_u = eu.std_err;
    report.se_sigma = es.std_err;
    report.se_nu = en.std_err;
    report.prop41_integral = ep.mean;
    report.se_prop41 = ep.std_err;
    report.n_paths = u.len();
    report.aborted_paths = aborted;
    report.fm_failures = failures;
    Ok((report, trace))
}

pub const TRACE_CSV_HEADER: [&str; 7] = ["path_id", "t", "X", "Xstar", "du", "dsig2", "dfm"];

/// Writes node records as CSV with columns `path_id,t,X,Xstar,du,dsig2,dfm`.
/// A failed Fortet-Mourier evaluation is written as an empty `dfm` field.
pub fn write_trace_csv<W: Write>(w: W, rows: &[NodeRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_CSV_HEADER)?;
    for r in rows {
        out.write_record([
            r.path_id.to_string(),
            r.t.to_string(),
            r.x.to_string(),
            r.xstar.to_string(),
            r.du.to_string(),
            r.dsig2.to_string(),
            r.dfm.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub const TRACE_MAGIC: &[u8; 4] = b"JWTR";
pub const TRACE_VERSION: u16 = 1;

/// Binary trace layout, all little-endian:
///
/// ```text
/// magic   "JWTR"
/// u16     version (1)
/// u16     reserved (0)
/// u32     columns per row (7)
/// u64     row count
/// rows    u64 path_id, then f64 t, X, Xstar, du, dsig2, dfm (NaN when absent)
/// ```
pub fn write_trace_binary<W: Write>(mut w: W, rows: &[NodeRecord]) -> Result<()> {
    w.write_all(TRACE_MAGIC)?;
    w.write_all(&TRACE_VERSION.to_le_bytes())?;
    w.write_all(&0u16.to_le_bytes())?;
    w.write_all(&7u32.to_le_bytes())?;
    w.write_all(&(rows.len() as u64).to_le_bytes())?;
    for r in rows {
        w.write_all(&r.path_id.to_le_bytes())?;
        for v in [r.t, r.x, r.xstar, r.du, r.dsig2, r.dfm.unwrap_or(f64::NAN)] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// One row of a binary trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub path_id: u64,
    pub t: f64,
    pub x: f64,
    pub xstar: f64,
    pub du: f64,
    pub dsig2: f64,
    pub dfm: f64,
}

pub fn read_trace_binary<R: Read>(mut r: R) -> Result<Vec<TraceRow>> {
    let mut head = [0u8; 20];
    r.read_exact(&mut head)?;
    if &head[0..4] != TRACE_MAGIC {
        return Err(invalid("trace", "bad magic"));
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != TRACE_VERSION {
        return Err(invalid("trace", format!("unsupported version {version}")));
    }
    let cols = u32::from_le_bytes(head[8..12].try_into().unwrap());
    if cols != 7 {
        return Err(invalid("trace", format!("expected 7 columns, found {cols}")));
    }
    let n = u64::from_le_bytes(head[12..20].try_into().unwrap());
    let mut out = Vec::with_capacity(n as usize);
    let mut buf = [0u8; 56];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        let f = |i: usize| f64::from_le_bytes(buf[8 * i..8 * i + 8].try_into().unwrap());
        out.push(TraceRow {
            path_id: u64::from_le_bytes(buf[0..8].try_into().unwrap()),
            t: f(1),
            x: f(2),
            xstar: f(3),
            du: f(4),
            dsig2: f(5),
            dfm: f(6),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::fm_discrete;
    use crate::measure::DiscreteMeasure;
    use crate::process::{CoefForm, ProcessSpec};
    use crate::simulate::GridConfig;

    #[test]
    fn identical_specs_have_zero_gaps() {
        let spec = ProcessSpec::geometric(1.0, 0.05, 0.2, 0.1, 1.0);
        let sim = CoupledSimulator::new(&spec, &spec, &GridConfig::new(1.0, 50, 20, 1)).unwrap();
        let (t, _) = estimate_theta(&sim, &CharacteristicsConfig::default(), 0).unwrap();
        assert_eq!((t.theta_u, t.theta_sigma, t.theta_nu, t.theta), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn drift_gap_is_direct_evaluation() {
        let sigma = CoefForm::constant(0.3);
        let x = ProcessSpec::diffusion(1.0, CoefForm::linear(0.1), sigma.clone());
        let xs = ProcessSpec::diffusion(1.0, CoefForm::linear(0.25), sigma);
        let sim = CoupledSimulator::new(&x, &xs, &GridConfig::new(1.0, 40, 2, 1)).unwrap();
        let p = sim.path(0).unwrap();
        let recs = characteristics_along_path(&sim, &CharacteristicsConfig { nodes: 0, fm_atoms: 8 }, &p).unwrap();
        assert_eq!(recs.len(), 40);
        for r in recs {
            assert_eq!(r.du, (0.1 * r.x - 0.25 * r.x).abs());
            assert_eq!(r.dsig2, 0.0);
        }
    }

    #[test]
    fn poisson_fm_term_below_domination() {
        let (eta, eta_s, a) = (0.1, 0.12, 1.0);
        let x = ProcessSpec::geometric(1.0, 0.05, 0.2, eta, a);
        let xs = ProcessSpec::geometric(1.0, 0.05, 0.2, eta_s, a);
        let sim = CoupledSimulator::new(&x, &xs, &GridConfig::new(1.0, 100, 3, 7)).unwrap();
        let cfg = CharacteristicsConfig::default();
        for i in 0..3 {
            let p = sim.path(i).unwrap();
            for r in characteristics_along_path(&sim, &cfg, &p).unwrap() {
                let bound = a * (eta * eta - eta_s * eta_s).abs() * r.x * r.x
                    + a * eta_s * eta_s * (eta - eta_s).abs() * r.x.abs().powi(3);
                assert!(r.dfm.unwrap() <= bound + 1e-15);
                assert!((r.prop41 - bound).abs() < 1e-12);
                let direct = fm_discrete(
                    &DiscreteMeasure::dirac(eta * r.x, a * (eta * r.x).powi(2)).unwrap(),
                    &DiscreteMeasure::dirac(eta_s * r.x, a * (eta_s * r.x).powi(2)).unwrap(),
                )
                .unwrap();
                assert!((r.dfm.unwrap() - direct).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn binary_trace_round_trip() {
        let rows = vec![
            NodeRecord {
                path_id: 3,
                step: 1,
                t: 0.5,
                x: 1.0,
                xstar: 1.1,
                du: 0.2,
                dsig2: 0.0,
                dfm: None,
                prop41: 0.0,
            },
            NodeRecord {
                path_id: 4,
                step: 2,
                t: 1.0,
                x: -1.0,
                xstar: 2.0,
                du: 0.0,
                dsig2: 0.3,
                dfm: Some(0.01),
                prop41: 0.02,
            },
        ];
        let mut buf = vec![];
        write_trace_binary(&mut buf, &rows).unwrap();
        assert_eq!(buf.len(), 20 + 2 * 56);
        let back = read_trace_binary(&buf[..]).unwrap();
        assert_eq!(back[1].dfm, 0.01);
        assert!(back[0].dfm.is_nan());
        assert_eq!(back[0].path_id, 3);
        let mut csv = vec![];
        write_trace_csv(&mut csv, &rows).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("path_id,t,X,Xstar,du,dsig2,dfm\n3,0.5,1,1.1,0.2,0,\n"));
    }
}
