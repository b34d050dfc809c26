//! Subcommand implementations behind the `robinv` binary.

pub mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use robinv::dataset::{self, DisturbanceSet};
use robinv::io::{self, ModelFiles, PolyhedronFile, ProblemSpec};
use robinv::synthesis::{self, Formulation, Status, SynthesisOptions, SynthesisResult};
use robinv::verify::{self, Trajectory};
use robinv::{platoon, LpSolver, MinilpSolver};
use serde::{Deserialize, Serialize};

use config::{DataPolicy, DisturbanceMode, RunConfig, SearchMode, SweepConfig};

/// Verdict of a completed command; errors are reported separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
        }
    }
}

pub fn default_solver() -> MinilpSolver {
    MinilpSolver::default()
}

fn status_str(s: Status) -> &'static str {
    match s {
        Status::Feasible => "feasible",
        Status::Infeasible => "infeasible",
        Status::SolverFailure => "solver_failure",
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub gain_from: String,
    pub trajectories: usize,
    pub steps: usize,
    pub exits: usize,
    pub seed: u64,
}

fn simulate_all(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k: &DMatrix<f64>,
    s: &robinv::HPolyhedron,
    dist: &DisturbanceSet,
    steps: usize,
    seed: u64,
    solver: &dyn LpSolver,
) -> Result<Vec<Trajectory>> {
    let tol = robinv::Tolerances::default().simulation;
    Ok(verify::simulate_from_vertices(
        a, b, k, dist, steps, seed, s, solver, tol,
    )?)
}

fn write_trajectories(dir: &Path, label: &str, trs: &[Trajectory]) -> Result<()> {
    for (i, tr) in trs.iter().enumerate() {
        io::write_trajectory(&dir.join(format!("{label}_vertex_{i:02}.csv")), tr)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlatoonSummary {
    #[serde(rename = "T")]
    pub t: usize,
    pub delta: f64,
    pub seed: u64,
    pub model_status: Status,
    pub model_ceiling: Option<f64>,
    pub data_formulation: Formulation,
    pub data_status: Status,
    pub data_certificates_passed: bool,
    pub data_solve_seconds: f64,
    pub data_reduce_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSummary>,
}

/// Model-based and data-based synthesis on the two-vehicle platoon, with
/// closed-loop simulations of the resulting gain.
pub fn platoon_demo(cfg: &RunConfig, solver: &dyn LpSolver) -> Result<Outcome> {
    let pc = &cfg.platoon;
    let out = &cfg.out;
    let opts = cfg.options;
    let (a, b) = platoon::system();
    let s = platoon::state_set();
    let dist = platoon::disturbance_set(pc.delta).context("disturbance set")?;

    let sys = out.join("system");
    io::write_matrix(&sys.join("A.csv"), &a)?;
    io::write_matrix(&sys.join("B.csv"), &b)?;
    io::write_matrix(&sys.join("S.csv"), s.a())?;
    io::write_matrix(&sys.join("D.csv"), dist.matrix())?;

    let model = synthesis::synthesize_model_based(&a, &b, &s, &dist, None, &opts, solver)
        .context("model-based synthesis")?;
    io::write_result(&out.join("model"), &model, &[]).context("writing model-based result")?;
    let ceiling = synthesis::max_delta_bisection(
        |d| {
            synthesis::synthesize_model_based(&a, &b, &s, &dist.with_delta(d)?, None, &opts, solver)
        },
        0.0,
        pc.ceiling_hi,
        pc.ceiling_tol,
    )
    .context("model-based ceiling search")?
    .delta_star;

    let data = platoon::generate_data(pc.t, pc.delta, cfg.seed).context("data generation")?;
    io::write_dataset(
        &out.join("data"),
        &data,
        "platoon-box",
        Some(cfg.seed),
        Some(pc.delta),
    )?;

    let result = match pc.formulation {
        Formulation::Thm1 => synthesis::synthesize_thm1(&data, &s, &dist, None, &opts, solver)
            .context("data-based synthesis (state vertices)")?,
        Formulation::Thm2 => {
            let verts = synthesis::consistency_vertices(&data, &dist, solver)
                .context("consistency-set vertex enumeration")?;
            synthesis::synthesize_thm2(&verts, platoon::N, platoon::M, &s, &dist, &opts, solver)
                .context("data-based synthesis (consistency vertices)")?
        }
        Formulation::Model => bail!("platoon.formulation must be thm1 or thm2"),
    };
    io::write_result(&out.join("data_based"), &result, &[cfg.seed])
        .context("writing data-based result")?;

    let problem = |formulation, dataset: Option<PathBuf>| ProblemSpec {
        formulation,
        delta: pc.delta,
        state_set: PolyhedronFile {
            path: "system/S.csv".into(),
            rhs: None,
            format: Some(io::PolyhedronFormat::Pair),
        },
        disturbance: "system/D.csv".into(),
        input_set: None,
        dataset,
        model: Some(ModelFiles {
            a: "system/A.csv".into(),
            b: "system/B.csv".into(),
        }),
        options: opts,
    };
    io::write_toml(
        &out.join("problem_model.toml"),
        &problem(Formulation::Model, None),
    )?;
    io::write_toml(
        &out.join("problem_data.toml"),
        &problem(pc.formulation, Some("data/manifest.toml".into())),
    )?;

    let gain = result
        .gain
        .as_ref()
        .filter(|_| result.is_feasible())
        .map(|k| ("data_based", k))
        .or_else(|| {
            model
                .gain
                .as_ref()
                .filter(|_| model.is_feasible())
                .map(|k| ("model", k))
        });
    let simulation = match gain {
        Some((label, k)) if pc.simulation_steps > 0 => {
            let trs = simulate_all(&a, &b, k, &s, &dist, pc.simulation_steps, cfg.seed, solver)
                .context("closed-loop simulation")?;
            write_trajectories(&out.join("trajectories"), label, &trs)?;
            Some(SimulationSummary {
                gain_from: label.into(),
                trajectories: trs.len(),
                steps: pc.simulation_steps,
                exits: trs.iter().filter(|t| !t.stays_inside()).count(),
                seed: cfg.seed,
            })
        }
        _ => None,
    };

    let summary = PlatoonSummary {
        t: pc.t,
        delta: pc.delta,
        seed: cfg.seed,
        model_status: model.status,
        model_ceiling: ceiling,
        data_formulation: pc.formulation,
        data_status: result.status,
        data_certificates_passed: result.verification.is_some_and(|v| v.passed),
        data_solve_seconds: result.diagnostics.solve_seconds,
        data_reduce_seconds: result.diagnostics.reduce_seconds,
        data_message: result.message.clone(),
        simulation,
    };
    io::write_toml(&out.join("summary.toml"), &summary)?;
    log::info!(
        "model-based: {}, data-based: {}",
        status_str(model.status),
        status_str(result.status)
    );
    let sims_ok = summary.simulation.as_ref().is_none_or(|s| s.exits == 0);
    Ok(
        if result.is_feasible() && summary.data_certificates_passed && sims_ok {
            Outcome::Pass
        } else {
            Outcome::Fail
        },
    )
}

/// One solved sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub t: usize,
    pub delta: f64,
    /// Seed the cell's data were generated from.
    pub seed: u64,
    pub status: String,
    pub solve_seconds: f64,
}

/// Seed of the experiment behind a cell. Nested data shares one experiment
/// per seed across horizons (draws are column-major, so a shorter horizon
/// sees a prefix); independent data mixes the horizon into the seed.
pub fn data_seed(policy: DataPolicy, seed: u64, t: usize) -> u64 {
    match policy {
        DataPolicy::Nested => seed,
        DataPolicy::Independent => seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    }
}

/// Data-based synthesis on fresh platoon data for one `(T, δ, seed)` cell.
pub fn sweep_cell(
    t: usize,
    delta: f64,
    data_seed: u64,
    opts: &SynthesisOptions,
    solver: &dyn LpSolver,
) -> SweepRow {
    let start = Instant::now();
    let status = (|| -> robinv::Result<SynthesisResult> {
        let data = platoon::generate_data(t, delta, data_seed)?;
        let dist = platoon::disturbance_set(delta)?;
        synthesis::synthesize_thm1(&data, &platoon::state_set(), &dist, None, opts, solver)
    })();
    let status = match status {
        Ok(r) => status_str(r.status).to_string(),
        Err(e) => {
            log::error!("cell T={t} delta={delta} seed={data_seed}: {e}");
            "error".to_string()
        }
    };
    SweepRow {
        t,
        delta,
        seed: data_seed,
        status,
        solve_seconds: start.elapsed().as_secs_f64(),
    }
}

/// Largest feasible grid value for one horizon and seed: probes the grid
/// from the top down, skipping values above `ceiling`, and stops at the
/// first feasible cell. Returns every probed cell.
pub fn descend_cells(
    t: usize,
    grid: &[f64],
    ceiling: f64,
    data_seed: u64,
    opts: &SynthesisOptions,
    solver: &dyn LpSolver,
) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &d in grid.iter().rev().filter(|&&d| d <= ceiling) {
        let row = sweep_cell(t, d, data_seed, opts, solver);
        let done = row.status == "feasible";
        rows.push(row);
        if done {
            break;
        }
    }
    rows
}

/// Largest δ for which the model-based program on the platoon is feasible.
pub fn platoon_ceiling(opts: &SynthesisOptions, tol: f64, solver: &dyn LpSolver) -> Result<f64> {
    let (a, b) = platoon::system();
    let s = platoon::state_set();
    let found = synthesis::max_delta_bisection(
        |d| {
            synthesis::synthesize_model_based(
                &a,
                &b,
                &s,
                &platoon::disturbance_set(d)?,
                None,
                opts,
                solver,
            )
        },
        0.0,
        1.0,
        tol,
    )?;
    found
        .delta_star
        .context("model-based program infeasible even without disturbances")
}

pub fn run_sweep(
    cfg: &SweepConfig,
    opts: &SynthesisOptions,
    jobs: usize,
    solver: &dyn LpSolver,
) -> Result<Vec<SweepRow>> {
    let grid = cfg.delta.values();
    if cfg.t.is_empty() || grid.is_empty() || cfg.seeds.is_empty() {
        bail!("sweep needs nonempty T, delta and seed lists");
    }
    if grid.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
        bail!("sweep deltas must be finite and nonnegative");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("worker pool")?;
    let ceiling = match cfg.search {
        // Data-based feasibility implies model-based feasibility for the true
        // system, which is monotone in δ; nothing above the ceiling can be feasible.
        SearchMode::Descend => platoon_ceiling(opts, 1e-6, solver)?,
        SearchMode::Grid => f64::INFINITY,
    };
    let mut rows: Vec<SweepRow> = pool.install(|| match cfg.search {
        SearchMode::Grid => {
            let cells: Vec<(usize, f64, u64)> = cfg
                .t
                .iter()
                .flat_map(|&t| {
                    let grid = &grid;
                    cfg.seeds
                        .iter()
                        .flat_map(move |&s| grid.iter().map(move |&d| (t, d, s)))
                })
                .collect();
            cells
                .par_iter()
                .map(|&(t, d, s)| sweep_cell(t, d, data_seed(cfg.data, s, t), opts, solver))
                .collect()
        }
        SearchMode::Descend => {
            let lines: Vec<(usize, u64)> = cfg
                .t
                .iter()
                .flat_map(|&t| cfg.seeds.iter().map(move |&s| (t, s)))
                .collect();
            lines
                .par_iter()
                .flat_map_iter(|&(t, s)| {
                    descend_cells(t, &grid, ceiling, data_seed(cfg.data, s, t), opts, solver)
                })
                .collect()
        }
    });
    rows.sort_by(|x, y| {
        (x.t, x.seed)
            .cmp(&(y.t, y.seed))
            .then(x.delta.total_cmp(&y.delta))
    });
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("T,delta,seed,status,solve_seconds\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6}",
            r.t, r.delta, r.seed, r.status, r.solve_seconds
        );
    }
    out
}

/// Largest feasible δ per `(T, seed)`; `None` when no probed δ was feasible.
pub fn max_feasible(rows: &[SweepRow]) -> BTreeMap<(usize, u64), Option<f64>> {
    let mut out: BTreeMap<(usize, u64), Option<f64>> = BTreeMap::new();
    for r in rows {
        let e = out.entry((r.t, r.seed)).or_insert(None);
        if r.status == "feasible" {
            *e = Some(e.map_or(r.delta, |d: f64| d.max(r.delta)));
        }
    }
    out
}

pub fn sweep(cfg: &RunConfig, solver: &dyn LpSolver) -> Result<Outcome> {
    let rows = run_sweep(&cfg.sweep, &cfg.options, cfg.jobs, solver)?;
    io::write_text(&cfg.out.join("sweep.csv"), &sweep_csv(&rows))?;
    let mut summary = String::from("T,seed,max_feasible_delta\n");
    for ((t, seed), d) in max_feasible(&rows) {
        let _ = writeln!(
            summary,
            "{t},{seed},{}",
            d.map_or(String::new(), |d| d.to_string())
        );
    }
    io::write_text(&cfg.out.join("sweep_summary.csv"), &summary)?;
    let errors = rows.iter().filter(|r| r.status == "error").count();
    if errors > 0 {
        log::warn!("{errors} sweep cells failed; see the status column");
    }
    Ok(Outcome::Pass)
}

fn problem_base(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Problem file with its paths made absolute.
fn absolute_spec(mut spec: ProblemSpec, base: &Path) -> ProblemSpec {
    let abs = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    abs(&mut spec.state_set.path);
    if let Some(r) = spec.state_set.rhs.as_mut() {
        abs(r);
    }
    abs(&mut spec.disturbance);
    if let Some(u) = spec.input_set.as_mut() {
        abs(&mut u.path);
        if let Some(r) = u.rhs.as_mut() {
            abs(r);
        }
    }
    if let Some(d) = spec.dataset.as_mut() {
        abs(d);
    }
    if let Some(m) = spec.model.as_mut() {
        abs(&mut m.a);
        abs(&mut m.b);
    }
    spec
}

pub fn synthesize(cfg: &RunConfig, solver: &dyn LpSolver) -> Result<Outcome> {
    let path = cfg
        .synthesize
        .problem
        .as_ref()
        .context("no problem file given (--problem or [synthesize] problem)")?;
    let mut spec = ProblemSpec::load(path)?;
    if let Some(d) = cfg.synthesize.delta {
        spec.delta = d;
    }
    if let Some(f) = cfg.synthesize.formulation {
        spec.formulation = f;
    }
    let spec = absolute_spec(spec, &problem_base(path));
    io::write_toml(&cfg.out.join("problem.toml"), &spec)?;
    let problem = spec.clone().resolve(Path::new(""), cfg.polyhedron_format)?;
    let opts = spec.options;
    let s = &problem.state_set;
    let dist = &problem.disturbance;
    let result = match spec.formulation {
        Formulation::Model => {
            let (a, b) = problem.model.as_ref().expect("checked on load");
            synthesis::synthesize_model_based(
                a,
                b,
                s,
                dist,
                problem.input_set.as_ref(),
                &opts,
                solver,
            )?
        }
        Formulation::Thm1 => {
            let data = problem.data.as_ref().expect("checked on load");
            synthesis::synthesize_thm1(data, s, dist, problem.input_set.as_ref(), &opts, solver)?
        }
        Formulation::Thm2 => {
            let data = problem.data.as_ref().expect("checked on load");
            if problem.input_set.is_some() {
                log::warn!("the consistency-vertex formulation ignores the input set");
            }
            let verts = synthesis::consistency_vertices(data, dist, solver)?;
            synthesis::synthesize_thm2(&verts, data.n(), data.m(), s, dist, &opts, solver)?
        }
    };
    let seeds: Vec<u64> = match &spec.dataset {
        Some(p) => io::read_toml::<io::DatasetManifest>(p)?
            .seed
            .into_iter()
            .collect(),
        None => Vec::new(),
    };
    io::write_result(&cfg.out, &result, &seeds)?;
    match result.status {
        Status::Feasible => Ok(Outcome::Pass),
        Status::Infeasible => Ok(Outcome::Fail),
        Status::SolverFailure => bail!(
            "solver failure: {}",
            result.message.unwrap_or_else(|| "no details".into())
        ),
    }
}

pub fn simulate_data(cfg: &RunConfig, solver: &dyn LpSolver) -> Result<Outcome> {
    let sc = &cfg.simulate_data;
    let (a, b, label) = match &sc.system {
        Some(files) => (
            io::read_matrix(&files.a)?,
            io::read_matrix(&files.b)?,
            "simulated",
        ),
        None => {
            let (a, b) = platoon::system();
            (a, b, "platoon")
        }
    };
    let n = a.nrows();
    if b.nrows() != n {
        bail!("A is {}x{} but B has {} rows", n, a.ncols(), b.nrows());
    }
    let x0 = match &sc.x0 {
        Some(p) => io::read_vector(p)?,
        None => DVector::zeros(n),
    };
    let [lo, hi] = sc.input_range;
    let inputs = dataset::random_inputs(b.ncols(), sc.t, lo, hi, cfg.seed)?;
    let disturbances = match sc.disturbance {
        DisturbanceMode::Box => dataset::random_box_disturbances(n, sc.delta, sc.t, cfg.seed)?,
        DisturbanceMode::Vertex => {
            let d = match &sc.disturbance_matrix {
                Some(p) => io::read_matrix(p)?,
                None => platoon::disturbance_matrix(),
            };
            let dist = DisturbanceSet::new(d, sc.delta)?;
            dataset::random_vertex_disturbances(&dist, sc.t, cfg.seed, solver)?
        }
    };
    let data = dataset::simulate_experiment(&a, &b, &x0, &inputs, &disturbances)?;
    let mode = match sc.disturbance {
        DisturbanceMode::Box => format!("{label}-box"),
        DisturbanceMode::Vertex => format!("{label}-vertex"),
    };
    let manifest = io::write_dataset(&cfg.out, &data, &mode, Some(cfg.seed), Some(sc.delta))?;
    let (rich, rank) = dataset::richness_check(&data);
    if !rich {
        log::warn!(
            "W0 has rank {rank} < n+m = {}; the consistency set is unbounded",
            data.n() + data.m()
        );
    }
    log::info!("wrote {}", manifest.display());
    Ok(Outcome::Pass)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VerifyOutput {
    report: verify::VerificationReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    simulation: Option<SimulationSummary>,
}

pub fn verify_result(cfg: &RunConfig, solver: &dyn LpSolver) -> Result<Outcome> {
    let vc = &cfg.verify;
    let problem_path = vc
        .problem
        .as_ref()
        .context("no problem file given (--problem or [verify] problem)")?;
    let result_dir = vc
        .result
        .as_ref()
        .context("no result directory given (--result or [verify] result)")?;
    let spec = ProblemSpec::load(problem_path)?;
    let problem = spec.resolve(&problem_base(problem_path), cfg.polyhedron_format)?;
    let stored = io::read_result(result_dir)?;
    let report = verify::verify_stored(&problem, &stored, vc.model_samples, cfg.seed, solver)?;
    let simulation = match (&problem.model, &stored.gain) {
        (Some((a, b)), Some(k))
            if vc.simulation_steps > 0 && report.claimed_status == Status::Feasible =>
        {
            let dist = problem.disturbance.with_delta(stored.record.delta)?;
            let trs = simulate_all(
                a,
                b,
                k,
                &problem.state_set,
                &dist,
                vc.simulation_steps,
                cfg.seed,
                solver,
            )?;
            write_trajectories(&cfg.out.join("trajectories"), "verify", &trs)?;
            Some(SimulationSummary {
                gain_from: "stored".into(),
                trajectories: trs.len(),
                steps: vc.simulation_steps,
                exits: trs.iter().filter(|t| !t.stays_inside()).count(),
                seed: cfg.seed,
            })
        }
        _ => None,
    };
    let passed = report.passed && simulation.as_ref().is_none_or(|s| s.exits == 0);
    io::write_toml(
        &cfg.out.join("verification.toml"),
        &VerifyOutput { report, simulation },
    )?;
    Ok(if passed { Outcome::Pass } else { Outcome::Fail })
}
