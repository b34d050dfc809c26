//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Run with
//! `cargo test --release -p robinv-cli --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use robinv::dataset::DisturbanceSet;
use robinv::synthesis::{self, SynthesisOptions, SynthesisResult};
use robinv::{platoon, HPolyhedron};
use robinv_cli::config::{DataPolicy, DeltaGrid, SearchMode, SweepConfig};

const CERT_TOL: f64 = 1e-6;
const SIM_STEPS: usize = 1000;

const CEILING_LO: f64 = 0.060;
const CEILING_HI: f64 = 0.065;
const CEILING_BISECTION_TOL: f64 = 1e-4;
const MODEL_SECONDS: f64 = 10.0;

const PAPER_SCALE_T: usize = 1600;
const PAPER_SCALE_DELTA: f64 = 0.05;
const PAPER_SCALE_SEEDS: u64 = 10;
const PAPER_SCALE_REQUIRED: usize = 9;
const PAPER_SCALE_SECONDS: f64 = 600.0;

const SWEEP_TARGETS: [(usize, f64); 2] = [(600, 0.0275), (3000, 0.0575)];
const SWEEP_TOL: f64 = 0.005;
const SWEEP_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

const EQUIVALENCE_INSTANCES: u64 = 60;
const ORACLE_INSTANCES: u64 = 150;
const TWO_SIDED_INSTANCES: u64 = 80;
const RANK_INSTANCES: u64 = 60;
const NESTED_TRIALS: u64 = 10;
const NESTED_POINTS: usize = 1000;

struct Line {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
    seconds: f64,
}

/// Results that must also pass the soundness checks of criterion 6, with the
/// models they are claimed for.
struct Soundness {
    checked: usize,
    failures: Vec<String>,
}

impl Soundness {
    fn record(
        &mut self,
        label: &str,
        r: &SynthesisResult,
        models: &[DMatrix<f64>],
        s: &HPolyhedron,
        dist: &DisturbanceSet,
    ) {
        if !r.is_feasible() {
            return;
        }
        self.checked += 1;
        if !common::sound(r, models, s, dist, SIM_STEPS) {
            self.failures.push(label.to_string());
        }
    }
}

fn platoon_model() -> DMatrix<f64> {
    let (a, b) = platoon::system();
    let mut v = DMatrix::zeros(platoon::N, platoon::N + platoon::M);
    v.columns_mut(0, platoon::N).copy_from(&a);
    v.columns_mut(platoon::N, platoon::M).copy_from(&b);
    v
}

fn criterion_1(sound: &mut Soundness) -> (Line, Option<f64>) {
    let sv = common::solver();
    let start = Instant::now();
    let (a, b) = platoon::system();
    let s = platoon::state_set();
    let opts = SynthesisOptions::default();
    let run = |d: f64| {
        synthesis::synthesize_model_based(
            &a,
            &b,
            &s,
            &platoon::disturbance_set(d).unwrap(),
            None,
            &opts,
            &sv,
        )
        .unwrap()
    };
    let at_060 = run(0.060);
    let at_070 = run(0.070);
    let bis =
        synthesis::max_delta_bisection(|d| Ok(run(d)), 0.0, 0.1, CEILING_BISECTION_TOL).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let star = bis.delta_star;
    let pass = at_060.is_feasible()
        && !at_070.is_feasible()
        && star.is_some_and(|d| (CEILING_LO..=CEILING_HI).contains(&d))
        && seconds < MODEL_SECONDS;
    let model = [platoon_model()];
    sound.record(
        "model-based δ=0.060",
        &at_060,
        &model,
        &s,
        &platoon::disturbance_set(0.060).unwrap(),
    );
    if let Some(d) = star {
        sound.record(
            "model-based δ*",
            &bis.result,
            &model,
            &s,
            &platoon::disturbance_set(d).unwrap(),
        );
    }
    let line = Line {
        id: 1,
        title: "model-based platoon threshold",
        pass,
        detail: format!(
            "δ=0.060 {:?}, δ=0.070 {:?}, δ*={} (window [{CEILING_LO}, {CEILING_HI}]), {} probes",
            at_060.status,
            at_070.status,
            star.map_or("none".into(), |d| format!("{d:.5}")),
            bis.probes.len()
        ),
        seconds,
    };
    (line, star)
}

fn criterion_2(sound: &mut Soundness) -> Line {
    let sv = common::solver();
    let start = Instant::now();
    let s = platoon::state_set();
    let dist = platoon::disturbance_set(PAPER_SCALE_DELTA).unwrap();
    let mut opts = SynthesisOptions::default();
    opts.tolerances.certificate = CERT_TOL;
    let model = [platoon_model()];
    let mut ok = 0;
    let mut slowest: f64 = 0.0;
    let mut statuses = Vec::new();
    for seed in 1..=PAPER_SCALE_SEEDS {
        let t0 = Instant::now();
        let data = platoon::generate_data(PAPER_SCALE_T, PAPER_SCALE_DELTA, seed).unwrap();
        let r = synthesis::synthesize_thm1(&data, &s, &dist, None, &opts, &sv).unwrap();
        slowest = slowest.max(t0.elapsed().as_secs_f64());
        let certs = r.verification.is_some_and(|v| v.passed);
        if r.is_feasible() && certs {
            ok += 1;
        }
        statuses.push(format!("{seed}:{:?}", r.status));
        sound.record(&format!("T=1600 seed {seed}"), &r, &model, &s, &dist);
    }
    Line {
        id: 2,
        title: "data-based platoon at T=1600, δ=0.05",
        pass: ok >= PAPER_SCALE_REQUIRED && slowest <= PAPER_SCALE_SECONDS,
        detail: format!(
            "{ok}/{PAPER_SCALE_SEEDS} feasible with certificates passing (need {PAPER_SCALE_REQUIRED}), slowest solve {slowest:.1} s [{}]",
            statuses.join(" ")
        ),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criterion_3(ceiling: Option<f64>) -> Line {
    let sv = common::solver();
    let start = Instant::now();
    let cfg = SweepConfig {
        t: SWEEP_TARGETS.iter().map(|&(t, _)| t).collect(),
        delta: DeltaGrid::Range {
            start: 0.0025,
            stop: 0.07,
            step: 0.0025,
        },
        seeds: SWEEP_SEEDS.to_vec(),
        data: DataPolicy::Independent,
        search: SearchMode::Descend,
    };
    let rows = robinv_cli::run_sweep(&cfg, &SynthesisOptions::default(), 1, &sv).unwrap();
    let best = robinv_cli::max_feasible(&rows);
    let mut pass = true;
    let mut parts = Vec::new();
    for &(t, target) in &SWEEP_TARGETS {
        let values: Vec<Option<f64>> = best
            .iter()
            .filter(|((tt, _), _)| *tt == t)
            .map(|(_, v)| *v)
            .collect();
        let hits = values
            .iter()
            .filter(|v| v.is_some_and(|d| (d - target).abs() <= SWEEP_TOL + 1e-9))
            .count();
        let majority = hits * 2 > values.len();
        let above = values
            .iter()
            .flatten()
            .any(|&d| ceiling.is_none_or(|c| d > c));
        pass &= majority && !above && values.len() == SWEEP_SEEDS.len();
        let shown: Vec<String> = values
            .iter()
            .map(|v| v.map_or("none".into(), |d| format!("{d}")))
            .collect();
        parts.push(format!(
            "T={t}: max δ per seed [{}], {hits}/{} within {target}±{SWEEP_TOL}{}",
            shown.join(", "),
            values.len(),
            if above { ", ABOVE CEILING" } else { "" }
        ));
    }
    Line {
        id: 3,
        title: "feasibility frontier over T",
        pass,
        detail: format!("{} ({} cells solved)", parts.join("; "), rows.len()),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criterion_4(sound: &mut Soundness) -> Line {
    let start = Instant::now();
    let (mut agree, mut feasible, mut infeasible) = (0, 0, 0);
    let mut disagreements = Vec::new();
    for i in 0..EQUIVALENCE_INSTANCES {
        let c = common::equivalence_case(i);
        if c.agree() {
            agree += 1;
        } else {
            disagreements.push(i);
        }
        if c.thm1.is_feasible() {
            feasible += 1;
        } else {
            infeasible += 1;
        }
        sound.record(
            &format!("equivalence {i} state-vertex"),
            &c.thm1,
            &c.vertices,
            &c.s,
            &c.dist,
        );
        sound.record(
            &format!("equivalence {i} model-vertex"),
            &c.thm2,
            &c.vertices,
            &c.s,
            &c.dist,
        );
    }
    Line {
        id: 4,
        title: "equivalence of the data-based formulations",
        pass: agree as u64 == EQUIVALENCE_INSTANCES && feasible > 0 && infeasible > 0,
        detail: format!(
            "{agree}/{EQUIVALENCE_INSTANCES} agree ({feasible} feasible, {infeasible} infeasible){}",
            if disagreements.is_empty() { String::new() } else { format!(", disagreeing: {disagreements:?}") }
        ),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criterion_5() -> Line {
    let start = Instant::now();
    let (mut agree, mut yes) = (0, 0);
    for i in 0..ORACLE_INSTANCES {
        let (exact, oracle) = common::oracle_case(i);
        agree += usize::from(exact == oracle);
        yes += usize::from(oracle);
    }
    Line {
        id: 5,
        title: "LP invariance check vs vertex oracle",
        pass: agree as u64 == ORACLE_INSTANCES,
        detail: format!("{agree}/{ORACLE_INSTANCES} agree ({yes} invariant)"),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criterion_6(sound: &Soundness) -> Line {
    Line {
        id: 6,
        title: "certificate soundness and closed-loop simulation",
        pass: sound.checked > 0 && sound.failures.is_empty(),
        detail: format!(
            "{} feasible results re-verified, {SIM_STEPS}-step vertex-disturbance runs from every vertex of S; failures: {}",
            sound.checked,
            if sound.failures.is_empty() { "none".to_string() } else { sound.failures.join(", ") }
        ),
        seconds: 0.0,
    }
}

fn criterion_7() -> Line {
    let start = Instant::now();
    let mut two_sided = 0;
    for i in 0..TWO_SIDED_INSTANCES {
        let (a, b) = common::two_sided_rank_vs_cone(
            0x75_0000 + i,
            1 + (i % 4) as usize,
            1 + (i % 6) as usize,
            i % 3 == 0,
        );
        two_sided += usize::from(a == b);
    }
    let (mut rank, mut bounded) = (0, 0);
    for i in 0..RANK_INSTANCES {
        let (a, b) = common::rank_vs_cone(
            0x7A_0000 + i,
            i as usize,
            1 + (i % 5) as usize,
            i % 4 == 1,
            i % 5 == 2,
        );
        rank += usize::from(a == b);
        bounded += usize::from(b);
    }
    let (mut nested_ok, mut inside) = (0, 0);
    for i in 0..NESTED_TRIALS {
        let (inn, bad) = common::nestedness_trial(
            0x7E_0000 + i,
            1 + (i % 2) as usize,
            3 + (i % 4) as usize,
            NESTED_POINTS,
        );
        inside += inn;
        nested_ok += usize::from(bad == 0 && inn > 0);
    }
    Line {
        id: 7,
        title: "structural lemmas",
        pass: two_sided as u64 == TWO_SIDED_INSTANCES && rank as u64 == RANK_INSTANCES && nested_ok as u64 == NESTED_TRIALS,
        detail: format!(
            "two-sided rank vs cone {two_sided}/{TWO_SIDED_INSTANCES}; data rank vs boundedness {rank}/{RANK_INSTANCES} ({bounded} bounded); nestedness {nested_ok}/{NESTED_TRIALS} trials of {NESTED_POINTS} points ({inside} inside the longer set)"
        ),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn main() -> ExitCode {
    let mut sound = Soundness {
        checked: 0,
        failures: Vec::new(),
    };
    let mut lines = Vec::new();
    let (l1, ceiling) = criterion_1(&mut sound);
    lines.push(l1);
    lines.push(criterion_2(&mut sound));
    lines.push(criterion_3(ceiling));
    lines.push(criterion_4(&mut sound));
    lines.push(criterion_5());
    lines.push(criterion_7());
    lines.push(criterion_6(&sound));
    lines.sort_by_key(|l| l.id);
    let mut failed = 0;
    for l in &lines {
        failed += usize::from(!l.pass);
        println!(
            "{} criterion {}: {} ({:.1} s): {}",
            if l.pass { "PASS" } else { "FAIL" },
            l.id,
            l.title,
            l.seconds,
            l.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria pass",
        lines.len() - failed,
        lines.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
