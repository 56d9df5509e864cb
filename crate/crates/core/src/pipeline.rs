//! End-to-end runs on a [`Scenario`]: simulation, characteristic gaps, flow constants,
//! bound evaluation and empirical distances.
//!
//! Reports hold no timestamps or host data, so reruns with the same scenario and seed
//! are byte-identical.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{
    cardan_minimize, f_evaluate, prop32_rhs, smooth_w3_rhs, thm33_coefficients, verdict, ThetaReport, Verdict,
};
use crate::characteristics::{estimate_theta, write_trace_binary, write_trace_csv, NodeRecord};
use crate::distance::{dw3_dictionary_lower_bound, fm_discrete, w1_empirical, SampleSet, TestFunctionDictionary};
use crate::error::{Error, Result};
use crate::flow::{estimate_constants, ConstantSet};
use crate::measure::{discretize_pair, scaled_tilt};
use crate::scenario::{Scenario, TraceFormat, SCHEMA_VERSION};
use crate::simulate::CoupledSimulator;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Gaps are raised by this many standard errors before a failed comparison counts as
/// a violation.
pub const INFLATION_SE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub schema_version: u32,
    pub tool_version: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub horizon: f64,
}

impl RunMetadata {
    pub fn of(s: &Scenario) -> Self {
        RunMetadata {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.into(),
            scenario: s.name.clone(),
            scenario_hash: s.hash(),
            seed: s.grid.seed,
            n_paths: s.grid.n_paths,
            n_steps: s.grid.n_steps,
            horizon: s.grid.horizon,
        }
    }
}

/// Empirical distances between the simulated terminal laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LhsEstimates {
    pub w1: f64,
    pub dw3_lower: f64,
    pub mean_x: f64,
    pub mean_xstar: f64,
    pub n_samples: usize,
    pub aborted_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    /// `dw3_lower <= rhs_thm31`
    pub thm31: Verdict,
    /// `w1 <= rhs_prop32`
    pub prop32: Verdict,
    /// `w1 <= rhs_thm33`
    pub thm33: Verdict,
    /// `theta_nu <= rhs_prop41`
    pub prop41: Verdict,
}

impl Verdicts {
    pub fn all(&self) -> [Verdict; 4] {
        [self.thm31, self.prop32, self.thm33, self.prop41]
    }

    pub fn any_violated(&self) -> bool {
        self.all().contains(&Verdict::Violated)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaCondition {
    pub limit: f64,
    pub theta: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub metadata: RunMetadata,
    pub theta: ThetaReport,
    pub constants: ConstantSet,
    /// Smooth Wasserstein (order 3) bound `C Theta`.
    pub rhs_thm31: f64,
    /// Wasserstein bound from `Theta` alone.
    pub rhs_prop32: f64,
    /// `F(theta_u, theta_sigma, theta_nu)`.
    pub rhs_thm33: f64,
    /// Exact minimum over the smoothing parameter of the function bounded by `F`.
    pub rhs_thm33_min: f64,
    /// Time integral of the characteristic domination bound.
    pub rhs_prop41: f64,
    /// The three right-hand sides recomputed with gaps raised by [`INFLATION_SE`] errors.
    pub rhs_inflated: [f64; 3],
    /// `|log(beta/alpha)|` for a pair of gamma compensators.
    pub compensator_tv: Option<f64>,
    pub theta_condition: ThetaCondition,
    pub lhs: LhsEstimates,
    pub verdicts: Verdicts,
    pub warnings: Vec<String>,
}

impl BoundReport {
    pub fn exit_code(&self) -> i32 {
        if self.verdicts.any_violated() {
            2
        } else {
            0
        }
    }
}

/// Flow constants of `xstar`, read from or written to `cache_dir` when given.
pub fn run_constants(s: &Scenario, cache_dir: Option<&Path>) -> Result<ConstantSet> {
    let file = cache_dir.map(|d| d.join(format!("constants-{}.json", s.constants_key())));
    if let Some(f) = &file {
        if f.exists() {
            let text = std::fs::read_to_string(f)?;
            return Ok(serde_json::from_str(&text)?);
        }
    }
    let c = estimate_constants(
        &s.xstar,
        &s.grid,
        &s.start_grid(),
        s.budgets.constants_paths,
        s.budgets.safety_factor,
    )?;
    if let (Some(d), Some(f)) = (cache_dir, &file) {
        std::fs::create_dir_all(d)?;
        let tmp = f.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(&c)?)?;
        std::fs::rename(&tmp, f)?;
    }
    Ok(c)
}

fn empirical(sim: &CoupledSimulator) -> Result<LhsEstimates> {
    let t = sim.terminals()?;
    if t.x.is_empty() {
        return Err(Error::InvalidParameter {
            name: "n_paths",
            reason: "every path was aborted by the explosion guard".into(),
        });
    }
    let a = SampleSet::new(t.x)?;
    let b = SampleSet::new(t.xstar)?;
    Ok(LhsEstimates {
        w1: w1_empirical(&a, &b)?,
        dw3_lower: dw3_dictionary_lower_bound(&a, &b, &TestFunctionDictionary::standard()),
        mean_x: a.mean_of(|x| x),
        mean_xstar: b.mean_of(|x| x),
        n_samples: a.len(),
        aborted_paths: t.aborted.len(),
    })
}

fn rhs_triple(theta: &ThetaReport, c: &ConstantSet) -> Result<[f64; 3]> {
    Ok([
        smooth_w3_rhs(theta, c),
        prop32_rhs(theta, c),
        f_evaluate(theta.theta_u, theta.theta_sigma, theta.theta_nu, c)?,
    ])
}

/// Full verification run. Returns the report and the node records requested by
/// `budgets.trace_paths`.
pub fn run_verify(s: &Scenario, cache_dir: Option<&Path>) -> Result<(BoundReport, Vec<NodeRecord>)> {
    s.validate()?;
    let sim = CoupledSimulator::new(&s.x, &s.xstar, &s.grid)?;
    let (theta, trace) = estimate_theta(&sim, &s.budgets.characteristics, s.budgets.trace_paths)?;
    let constants = run_constants(s, cache_dir)?;
    let lhs = empirical(&sim)?;

    let rhs = rhs_triple(&theta, &constants)?;
    let rhs_inflated = rhs_triple(&theta.inflated(INFLATION_SE), &constants)?;
    let min = if theta.theta > 0.0 {
        let p = thm33_coefficients(theta.theta_u, theta.theta_sigma, theta.theta_nu, &constants);
        cardan_minimize(&p).min_value
    } else {
        0.0
    };
    let reliable = !constants.has_warnings();
    let p41_inflated = theta.prop41_integral + INFLATION_SE * theta.se_prop41;
    let verdicts = Verdicts {
        thm31: verdict(lhs.dw3_lower, rhs[0], rhs_inflated[0], reliable),
        prop32: verdict(lhs.w1, rhs[1], rhs_inflated[1], reliable),
        thm33: verdict(lhs.w1, rhs[2], rhs_inflated[2], reliable),
        prop41: verdict(theta.theta_nu, theta.prop41_integral, p41_inflated, true),
    };

    let mut warnings = constants.warnings.clone();
    if lhs.aborted_paths > 0 || theta.aborted_paths > 0 {
        warnings.push(format!(
            "{} paths aborted by the explosion guard",
            lhs.aborted_paths.max(theta.aborted_paths)
        ));
    }
    if theta.fm_failures > 0 {
        warnings.push(format!(
            "Fortet-Mourier evaluation failed at {} nodes; excluded from theta_nu",
            theta.fm_failures
        ));
    }
    let limit = s.budgets.theta_limit;
    if theta.theta > limit {
        warnings.push(format!("Theta = {} exceeds K = {limit}", theta.theta));
    }
    let report = BoundReport {
        metadata: RunMetadata::of(s),
        theta_condition: ThetaCondition {
            limit,
            theta: theta.theta,
            satisfied: theta.theta <= limit,
        },
        rhs_thm31: rhs[0],
        rhs_prop32: rhs[1],
        rhs_thm33: rhs[2],
        rhs_thm33_min: min,
        rhs_prop41: theta.prop41_integral,
        rhs_inflated,
        compensator_tv: s.gamma_tv(),
        theta,
        constants,
        lhs,
        verdicts,
        warnings,
    };
    Ok((report, trace))
}

/// Column order of the flat report row.
pub const REPORT_CSV_HEADER: [&str; 22] = [
    "scenario",
    "scenario_hash",
    "seed",
    "n_paths",
    "n_steps",
    "theta_u",
    "theta_sigma",
    "theta_nu",
    "theta",
    "rhs_thm31",
    "rhs_prop32",
    "rhs_thm33",
    "rhs_thm33_min",
    "rhs_prop41",
    "w1",
    "dw3_lower",
    "compensator_tv",
    "verdict_thm31",
    "verdict_prop32",
    "verdict_thm33",
    "verdict_prop41",
    "aborted_paths",
];

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Inconclusive => "inconclusive",
        Verdict::Violated => "violated",
    }
}

impl BoundReport {
    pub fn csv_row(&self) -> Vec<String> {
        let m = &self.metadata;
        let t = &self.theta;
        vec![
            m.scenario.clone(),
            m.scenario_hash.clone(),
            m.seed.to_string(),
            m.n_paths.to_string(),
            m.n_steps.to_string(),
            t.theta_u.to_string(),
            t.theta_sigma.to_string(),
            t.theta_nu.to_string(),
            t.theta.to_string(),
            self.rhs_thm31.to_string(),
            self.rhs_prop32.to_string(),
            self.rhs_thm33.to_string(),
            self.rhs_thm33_min.to_string(),
            self.rhs_prop41.to_string(),
            self.lhs.w1.to_string(),
            self.lhs.dw3_lower.to_string(),
            self.compensator_tv.map(|v| v.to_string()).unwrap_or_default(),
            verdict_str(self.verdicts.thm31).into(),
            verdict_str(self.verdicts.prop32).into(),
            verdict_str(self.verdicts.thm33).into(),
            verdict_str(self.verdicts.prop41).into(),
            self.lhs.aborted_paths.max(t.aborted_paths).to_string(),
        ]
    }
}

pub fn write_report_csv<W: Write>(w: W, reports: &[BoundReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(REPORT_CSV_HEADER)?;
    for r in reports {
        out.write_record(r.csv_row())?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `report.json`, `report.csv` and, when requested, the node trace into `dir`.
pub fn write_verify_artifacts(
    dir: &Path,
    report: &BoundReport,
    trace: &[NodeRecord],
    trace_format: Option<TraceFormat>,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let json = dir.join("report.json");
    std::fs::write(&json, serde_json::to_string_pretty(report)? + "\n")?;
    let csv = dir.join("report.csv");
    write_report_csv(std::fs::File::create(&csv)?, std::slice::from_ref(report))?;
    let mut out = vec![json, csv];
    if !trace.is_empty() {
        let path = match trace_format.unwrap_or(TraceFormat::Csv) {
            TraceFormat::Csv => {
                let p = dir.join("trace.csv");
                write_trace_csv(std::fs::File::create(&p)?, trace)?;
                p
            }
            TraceFormat::Binary => {
                let p = dir.join("trace.jwtr");
                write_trace_binary(std::io::BufWriter::new(std::fs::File::create(&p)?), trace)?;
                p
            }
        };
        out.push(path);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub theta_u: f64,
    pub theta_sigma: f64,
    pub theta_nu: f64,
    pub theta: f64,
    pub rhs_thm31: f64,
    pub rhs_prop32: f64,
    pub rhs_thm33: f64,
    pub w1: f64,
    pub dw3_lower: f64,
}

pub const SWEEP_CSV_HEADER: [&str; 10] = [
    "value",
    "theta_u",
    "theta_sigma",
    "theta_nu",
    "theta",
    "rhs_thm31",
    "rhs_prop32",
    "rhs_thm33",
    "w1",
    "dw3_lower",
];

/// One verification per value of the dotted scenario field `parameter`.
pub fn run_sweep(s: &Scenario, parameter: &str, values: &[f64], cache_dir: Option<&Path>) -> Result<Vec<SweepRow>> {
    values
        .iter()
        .map(|&v| {
            let (r, _) = run_verify(&s.with_parameter(parameter, v)?, cache_dir)?;
            Ok(SweepRow {
                value: v,
                theta_u: r.theta.theta_u,
                theta_sigma: r.theta.theta_sigma,
                theta_nu: r.theta.theta_nu,
                theta: r.theta.theta,
                rhs_thm31: r.rhs_thm31,
                rhs_prop32: r.rhs_prop32,
                rhs_thm33: r.rhs_thm33,
                w1: r.lhs.w1,
                dw3_lower: r.lhs.dw3_lower,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_CSV_HEADER)?;
    for r in rows {
        out.write_record(
            [
                r.value,
                r.theta_u,
                r.theta_sigma,
                r.theta_nu,
                r.theta,
                r.rhs_thm31,
                r.rhs_prop32,
                r.rhs_thm33,
                r.w1,
                r.dw3_lower,
            ]
            .map(|v| v.to_string()),
        )?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub metadata: RunMetadata,
    pub lhs: LhsEstimates,
    /// Fortet-Mourier distance of the tilted jump measures at `(0, x0)`.
    pub fm_initial: f64,
    pub compensator_tv: Option<f64>,
}

/// Empirical distances between the terminal laws, without constants or bounds.
pub fn run_distances(s: &Scenario) -> Result<DistanceReport> {
    s.validate()?;
    let sim = CoupledSimulator::new(&s.x, &s.xstar, &s.grid)?;
    let lhs = empirical(&sim)?;
    let (nu, nus) = discretize_pair(
        &s.x.levy,
        &s.xstar.levy,
        0.0,
        s.grid.epsilon,
        s.budgets.characteristics.fm_atoms,
    )?;
    let x0 = s.x.x0;
    let fm_initial = fm_discrete(
        &scaled_tilt(&nu, s.x.jump.eval(0.0, x0)),
        &scaled_tilt(&nus, s.xstar.jump.eval(0.0, x0)),
    )?;
    Ok(DistanceReport {
        metadata: RunMetadata::of(s),
        lhs,
        fm_initial,
        compensator_tv: s.gamma_tv(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::ProcessSpec;
    use crate::simulate::GridConfig;

    fn small(xs_eta: f64) -> Scenario {
        let mut s = Scenario::new(
            "geo",
            ProcessSpec::geometric(1.0, 0.05, 0.2, 0.1, 1.0),
            ProcessSpec::geometric(1.0, 0.05, 0.2, xs_eta, 1.0),
            GridConfig::new(1.0, 50, 400, 3),
        );
        s.budgets.constants_paths = 200;
        s.budgets.start_grid_size = 3;
        s.budgets.characteristics.nodes = 16;
        s
    }

    #[test]
    fn identical_scenario_passes_with_zero_lhs() {
        let (r, _) = run_verify(&small(0.1), None).unwrap();
        assert_eq!(r.lhs.w1, 0.0);
        assert_eq!(r.lhs.dw3_lower, 0.0);
        assert_eq!(r.theta.theta, 0.0);
        assert!(r.verdicts.all().iter().all(|v| *v == Verdict::Pass));
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn geometric_gap_is_bounded() {
        let (r, _) = run_verify(&small(0.12), None).unwrap();
        assert!(r.theta.theta_nu > 0.0);
        assert!(r.lhs.w1 <= r.rhs_thm33, "{r:#?}");
        assert!(r.rhs_thm33_min <= r.rhs_thm33 + 1e-12);
        assert_eq!(r.verdicts.thm33, Verdict::Pass);
        assert_eq!(r.metadata.scenario_hash, small(0.12).hash());
    }

    #[test]
    fn constants_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = small(0.12);
        let a = run_constants(&s, Some(dir.path())).unwrap();
        let b = run_constants(&s, Some(dir.path())).unwrap();
        assert_eq!(
            serde_json::to_string_pretty(&a).unwrap(),
            serde_json::to_string_pretty(&b).unwrap()
        );
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
