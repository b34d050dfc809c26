use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use robinv::io::PolyhedronFormat;
use robinv::synthesis::Formulation;
use robinv_cli::config::{DataPolicy, DeltaGrid, RunConfig, SearchMode};
use robinv_cli::Outcome;

/// Robustly invariant polyhedral sets from noisy data, by linear programming.
///
/// Exit status: 0 feasible or verified, 1 infeasible or failed check, 2 error.
#[derive(Parser)]
#[command(name = "robinv", version)]
struct Cli {
    /// Run configuration (TOML); command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed; for `sweep` it replaces the seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// How polyhedron files without an explicit format are read.
    #[arg(long, global = true, value_enum)]
    polyhedron_format: Option<PolyFormat>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolyFormat {
    Pair,
    Augmented,
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Model,
    Thm1,
    Thm2,
}

impl From<Form> for Formulation {
    fn from(f: Form) -> Self {
        match f {
            Form::Model => Formulation::Model,
            Form::Thm1 => Formulation::Thm1,
            Form::Thm2 => Formulation::Thm2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Data {
    Independent,
    Nested,
}

#[derive(Clone, Copy, ValueEnum)]
enum Search {
    Grid,
    Descend,
}

#[derive(Subcommand)]
enum Command {
    /// Model-based and data-based design for the two-vehicle platoon.
    PlatoonDemo {
        /// Experiment length for the data-based design.
        #[arg(long = "T")]
        t: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, value_enum)]
        formulation: Option<Form>,
    },
    /// Feasibility map over horizons and disturbance bounds.
    Sweep {
        /// Horizons, comma-separated or repeated.
        #[arg(long = "T", value_delimiter = ',')]
        t: Vec<usize>,
        /// Disturbance bounds, comma-separated or repeated.
        #[arg(long, value_delimiter = ',')]
        delta: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Fresh experiment per horizon, or prefixes of one long experiment.
        #[arg(long, value_enum)]
        data: Option<Data>,
        /// Solve every cell, or only walk down to the largest feasible δ.
        #[arg(long, value_enum)]
        search: Option<Search>,
    },
    /// Solve the problem described by a problem file.
    Synthesize {
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, value_enum)]
        formulation: Option<Form>,
    },
    /// Generate one open-loop experiment.
    SimulateData {
        #[arg(long = "T")]
        t: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Re-check a stored result against its problem file.
    Verify {
        #[arg(long)]
        problem: Option<PathBuf>,
        /// Directory written by `synthesize` or `platoon-demo`.
        #[arg(long)]
        result: Option<PathBuf>,
    },
}

fn build_config(cli: &Cli) -> robinv::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.sweep.seeds = vec![s];
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if let Some(f) = cli.polyhedron_format {
        cfg.polyhedron_format = match f {
            PolyFormat::Pair => PolyhedronFormat::Pair,
            PolyFormat::Augmented => PolyhedronFormat::Augmented,
        };
    }
    match &cli.command {
        Command::PlatoonDemo {
            t,
            delta,
            formulation,
        } => {
            if let Some(t) = t {
                cfg.platoon.t = *t;
            }
            if let Some(d) = delta {
                cfg.platoon.delta = *d;
            }
            if let Some(f) = formulation {
                cfg.platoon.formulation = (*f).into();
            }
        }
        Command::Sweep {
            t,
            delta,
            seeds,
            data,
            search,
        } => {
            if !t.is_empty() {
                cfg.sweep.t = t.clone();
            }
            if !delta.is_empty() {
                cfg.sweep.delta = DeltaGrid::List(delta.clone());
            }
            if !seeds.is_empty() {
                cfg.sweep.seeds = seeds.clone();
            }
            if let Some(d) = data {
                cfg.sweep.data = match d {
                    Data::Independent => DataPolicy::Independent,
                    Data::Nested => DataPolicy::Nested,
                };
            }
            if let Some(s) = search {
                cfg.sweep.search = match s {
                    Search::Grid => SearchMode::Grid,
                    Search::Descend => SearchMode::Descend,
                };
            }
        }
        Command::Synthesize {
            problem,
            delta,
            formulation,
        } => {
            if problem.is_some() {
                cfg.synthesize.problem = problem.clone();
            }
            if delta.is_some() {
                cfg.synthesize.delta = *delta;
            }
            if let Some(f) = formulation {
                cfg.synthesize.formulation = Some((*f).into());
            }
        }
        Command::SimulateData { t, delta } => {
            if let Some(t) = t {
                cfg.simulate_data.t = *t;
            }
            if let Some(d) = delta {
                cfg.simulate_data.delta = *d;
            }
        }
        Command::Verify { problem, result } => {
            if problem.is_some() {
                cfg.verify.problem = problem.clone();
            }
            if result.is_some() {
                cfg.verify.result = result.clone();
            }
        }
    }
    cfg.absolutize();
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let cfg = build_config(cli)?;
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| anyhow::anyhow!("creating {}: {e}", cfg.out.display()))?;
    cfg.echo(&cfg.out)?;
    let solver = robinv_cli::default_solver();
    match cli.command {
        Command::PlatoonDemo { .. } => robinv_cli::platoon_demo(&cfg, &solver),
        Command::Sweep { .. } => robinv_cli::sweep(&cfg, &solver),
        Command::Synthesize { .. } => robinv_cli::synthesize(&cfg, &solver),
        Command::SimulateData { .. } => robinv_cli::simulate_data(&cfg, &solver),
        Command::Verify { .. } => robinv_cli::verify_result(&cfg, &solver),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
