use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use jumpwass::pipeline::{
    run_constants, run_distances, run_sweep, run_verify, write_report_csv, write_sweep_csv, write_verify_artifacts,
};
use jumpwass::scenario::Scenario;

/// Wasserstein bounds between a jump process and a jump-diffusion, checked by simulation.
#[derive(Parser)]
#[command(name = "jumpwass", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate gaps, constants and distances, and compare them with every bound.
    Verify(Common),
    /// Estimate the flow constants of `xstar` (cached under JUMPWASS_CACHE_DIR).
    Constants(Common),
    /// Repeat `verify` over values of one numeric scenario field.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted path of the field, e.g. `xstar.diffusion.value`.
        #[arg(long)]
        parameter: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Empirical distances between the simulated terminal laws.
    Distances(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: the scenario's `output.dir`, else `jumpwass-out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format printed to stdout.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Common {
    fn load(&self) -> Result<(Scenario, PathBuf)> {
        if let Some(n) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring worker threads")?;
        }
        let mut s = Scenario::load(&self.scenario)?;
        if let Some(v) = self.seed {
            s.grid.seed = v;
        }
        if let Some(v) = self.paths {
            s.grid.n_paths = v;
        }
        if let Some(v) = self.steps {
            s.grid.n_steps = v;
        }
        s.validate()?;
        let out = self
            .out
            .clone()
            .or_else(|| s.output.dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("jumpwass-out"));
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok((s, out))
    }
}

fn cache_dir() -> Option<PathBuf> {
    std::env::var_os("JUMPWASS_CACHE_DIR").map(PathBuf::from)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cache = cache_dir();
    match cli.command {
        Command::Verify(c) => {
            let (s, out) = c.load()?;
            let (report, trace) = run_verify(&s, cache.as_deref())?;
            write_verify_artifacts(&out, &report, &trace, s.output.trace_format)?;
            match c.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
                Format::Csv => write_report_csv(std::io::stdout().lock(), std::slice::from_ref(&report))?,
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if report.verdicts.any_violated() {
                eprintln!("bound violated; see {}", out.join("report.json").display());
            }
            Ok(ExitCode::from(report.exit_code() as u8))
        }
        Command::Constants(c) => {
            let (s, out) = c.load()?;
            let constants = run_constants(&s, cache.as_deref())?;
            let text = serde_json::to_string_pretty(&constants)? + "\n";
            write(&out.join("constants.json"), &text)?;
            match c.format {
                Format::Json => print!("{text}"),
                Format::Csv => {
                    println!("a1,a2,b1,b2,b3,c1,c2,c3");
                    let k = &constants;
                    println!("{},{},{},{},{},{},{},{}", k.a1, k.a2, k.b1, k.b2, k.b3, k.c1, k.c2, k.c3);
                }
            }
            for w in &constants.warnings {
                eprintln!("warning: {w}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            common,
            parameter,
            values,
        } => {
            let (s, out) = common.load()?;
            let rows = run_sweep(&s, &parameter, &values, cache.as_deref())?;
            let mut buf = vec![];
            write_sweep_csv(&mut buf, &rows)?;
            let csv = String::from_utf8(buf)?;
            write(&out.join("sweep.csv"), &csv)?;
            match common.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&rows)?),
                Format::Csv => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Distances(c) => {
            let (s, out) = c.load()?;
            let d = run_distances(&s)?;
            let text = serde_json::to_string_pretty(&d)? + "\n";
            write(&out.join("distances.json"), &text)?;
            match c.format {
                Format::Json => print!("{text}"),
                Format::Csv => {
                    println!("scenario,w1,dw3_lower,fm_initial,compensator_tv");
                    println!(
                        "{},{},{},{},{}",
                        d.metadata.scenario,
                        d.lhs.w1,
                        d.lhs.dw3_lower,
                        d.fm_initial,
                        d.compensator_tv.map(|v| v.to_string()).unwrap_or_default()
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
