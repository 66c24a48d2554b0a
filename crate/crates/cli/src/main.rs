//! `gmroi`: simulate scenario tables, solve buckets, compare solvers, sweep floors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gmroi_core::experiment::{
    comparison_csv, load_bucket, resolve_floor, run_compare, run_sweep, sweep_csv, BucketSource,
    ExperimentSpec, FloorRule,
};
use gmroi_core::{
    make_solver, solve_fractional, write_scenarios, Bucket, DinkelbachConfig, Error,
    SimulationPlan, SolverKind, SolverSettings,
};

#[derive(Parser)]
#[command(
    name = "gmroi",
    version,
    about = "Service-constrained GMROI optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a config file into a scenario table.
    Simulate {
        /// Simulation config (TOML).
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Write `scenarios.csv` here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one bucket and print the report as JSON.
    Solve {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        floor: FloorArgs,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
        solver: SolverArg,
        /// Write `report.json` (and dual traces) here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write each iteration's dual trace as `dual_trace_<k>.csv`; needs `--out`.
        #[arg(long, requires = "out")]
        dual_trace: bool,
        /// Zero all timing fields so output is reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Run several solvers on each input and tabulate iterations, time and TAR_ERR.
    Compare {
        /// Scenario CSVs or simulation configs (`.toml`).
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        no_isotonic: bool,
        #[command(flatten)]
        floor: FloorArgs,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long = "solver", value_enum, value_delimiter = ',', default_values_t = default_solvers())]
        solvers: Vec<SolverArg>,
        /// Write `compare.csv` here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave time columns empty so output is reproducible.
        #[arg(long)]
        no_timing: bool,
        /// Skip the discarded warm-up solve.
        #[arg(long)]
        no_warmup: bool,
    },
    /// Solve at evenly spaced floors across the achievable range.
    Sweep {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, default_value_t = 10)]
        sweep_points: usize,
        #[arg(long = "solver", value_enum, value_delimiter = ',', default_values_t = default_solvers())]
        solvers: Vec<SolverArg>,
        /// Write `sweep.csv` here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_timing: bool,
        #[arg(long)]
        no_warmup: bool,
    },
}

#[derive(Args)]
struct Input {
    /// Scenario CSV, or a simulation config when it ends in `.toml`.
    input: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Skip isotonic smoothing of the scenario metrics.
    #[arg(long)]
    no_isotonic: bool,
}

#[derive(Args)]
struct FloorArgs {
    /// Service floor; implies `--floor-rule explicit`.
    #[arg(long)]
    floor: Option<f64>,
    #[arg(long, value_enum)]
    floor_rule: Option<FloorRuleArg>,
}

#[derive(Args)]
struct Tuning {
    /// Bisection tolerance on the Lagrange multiplier.
    #[arg(long)]
    mu_tol: Option<f64>,
    /// Largest DP table the exact solver may allocate.
    #[arg(long)]
    dp_state_cap: Option<u64>,
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Exact,
    Lagrangian,
    Unconstrained,
    Auto,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Exact => SolverKind::Exact,
            SolverArg::Lagrangian => SolverKind::Lagrangian,
            SolverArg::Unconstrained => SolverKind::Unconstrained,
            SolverArg::Auto => SolverKind::Auto,
        }
    }
}

fn default_solvers() -> Vec<SolverArg> {
    vec![
        SolverArg::Exact,
        SolverArg::Lagrangian,
        SolverArg::Unconstrained,
    ]
}

#[derive(Clone, Copy, ValueEnum)]
enum FloorRuleArg {
    Explicit,
    Midpoint,
    Below,
}

fn source_for(path: &Path) -> anyhow::Result<BucketSource> {
    if path.extension().is_some_and(|e| e == "toml") {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let plan: SimulationPlan = toml::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Ok(BucketSource::SimulateFromConfig(plan))
    } else {
        Ok(BucketSource::LoadScenarioCsv(path.to_path_buf()))
    }
}

/// Floor rule from flags; falls back to the config's floor, then midpoint.
fn floor_rule(args: &FloorArgs, source: &BucketSource) -> anyhow::Result<FloorRule> {
    match (args.floor_rule, args.floor) {
        (Some(FloorRuleArg::Explicit) | None, Some(v)) => Ok(FloorRule::Explicit(v)),
        (Some(FloorRuleArg::Explicit), None) => bail!(Error::Validation(
            "--floor-rule explicit needs --floor".into()
        )),
        (Some(_), Some(_)) => bail!(Error::Validation(
            "--floor only combines with --floor-rule explicit".into()
        )),
        (Some(FloorRuleArg::Midpoint), None) => Ok(FloorRule::Midpoint),
        (Some(FloorRuleArg::Below), None) => Ok(FloorRule::BelowLowerBound),
        (None, None) => Ok(match source {
            BucketSource::SimulateFromConfig(SimulationPlan {
                service_floor: Some(v),
                ..
            }) => FloorRule::Explicit(*v),
            _ => FloorRule::Midpoint,
        }),
    }
}

fn settings(t: &Tuning) -> SolverSettings {
    let mut s = SolverSettings::default();
    if t.mu_tol.is_some() {
        s.lagrangian.mu_tolerance = t.mu_tol;
    }
    if let Some(cap) = t.dp_state_cap {
        s.exact.dp_state_cap = cap;
    }
    s
}

fn dinkelbach(t: &Tuning) -> DinkelbachConfig {
    let mut c = DinkelbachConfig::default();
    if let Some(m) = t.max_iterations {
        c.max_iterations = m;
    }
    c
}

fn emit(out: Option<&Path>, name: &str, body: &str) -> anyhow::Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(name);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn load(input: &Input) -> anyhow::Result<(BucketSource, Bucket)> {
    let source = source_for(&input.input)?;
    let bucket = load_bucket(&source, input.seed, !input.no_isotonic)
        .with_context(|| format!("loading {}", input.input.display()))?;
    Ok((source, bucket))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let BucketSource::SimulateFromConfig(plan) = source_for(&config)? else {
                bail!(Error::InvalidConfig(
                    "simulate expects a .toml config".into()
                ));
            };
            let bucket = load_bucket(&BucketSource::SimulateFromConfig(plan), seed, false)?;
            let mut buf = Vec::new();
            write_scenarios(&bucket, &mut buf)?;
            emit(out.as_deref(), "scenarios.csv", &String::from_utf8(buf)?)
        }
        Command::Solve {
            input,
            floor,
            tuning,
            solver,
            out,
            dual_trace,
            no_timing,
        } => {
            let (source, bucket) = load(&input)?;
            let rule = floor_rule(&floor, &source)?;
            let bucket = bucket.with_service_floor(resolve_floor(&bucket, rule)?)?;
            let s = make_solver(solver.into(), &bucket, &settings(&tuning));
            let mut report = solve_fractional(&bucket, &dinkelbach(&tuning), &s)?;
            if no_timing {
                report.total_seconds = 0.0;
                for it in &mut report.iterations {
                    it.subproblem_seconds = 0.0;
                }
            }
            let mut json = report.to_json()?;
            json.push('\n');
            emit(out.as_deref(), "report.json", &json)?;
            if dual_trace {
                for (k, it) in report.iterations.iter().enumerate() {
                    if let Some(t) = &it.dual_trace {
                        emit(out.as_deref(), &format!("dual_trace_{k}.csv"), &t.to_csv())?;
                    }
                }
            }
            Ok(())
        }
        Command::Compare {
            inputs,
            seed,
            no_isotonic,
            floor,
            tuning,
            solvers,
            out,
            no_timing,
            no_warmup,
        } => {
            let solvers: Vec<SolverKind> = solvers.into_iter().map(Into::into).collect();
            let mut rows = Vec::with_capacity(inputs.len());
            for path in &inputs {
                let source = source_for(path)?;
                let bucket = load_bucket(&source, seed, !no_isotonic)
                    .with_context(|| format!("loading {}", path.display()))?;
                let spec = ExperimentSpec {
                    solvers: solvers.clone(),
                    floor_rule: floor_rule(&floor, &source)?,
                    sweep: None,
                    dinkelbach: dinkelbach(&tuning),
                    settings: settings(&tuning),
                    warmup: !no_warmup,
                };
                rows.extend(run_compare(std::slice::from_ref(&bucket), &spec)?);
            }
            emit(
                out.as_deref(),
                "compare.csv",
                &comparison_csv(&rows, &solvers, !no_timing),
            )
        }
        Command::Sweep {
            input,
            tuning,
            sweep_points,
            solvers,
            out,
            no_timing,
            no_warmup,
        } => {
            let (_, bucket) = load(&input)?;
            let solvers: Vec<SolverKind> = solvers.into_iter().map(Into::into).collect();
            let spec = ExperimentSpec {
                solvers: solvers.clone(),
                floor_rule: FloorRule::Midpoint,
                sweep: Some(sweep_points),
                dinkelbach: dinkelbach(&tuning),
                settings: settings(&tuning),
                warmup: !no_warmup,
            };
            let rows = run_sweep(&bucket, &spec)?;
            emit(
                out.as_deref(),
                "sweep.csv",
                &sweep_csv(&rows, &solvers, !no_timing),
            )
        }
    }
}

fn category(e: &anyhow::Error) -> &'static str {
    if let Some(core) = e.downcast_ref::<Error>() {
        return core.root().category();
    }
    if e.downcast_ref::<std::io::Error>().is_some() || e.chain().any(|c| c.is::<std::io::Error>()) {
        return "io";
    }
    "internal"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e:#}", category(&e));
            ExitCode::from(1)
        }
    }
}
