use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn robinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robinv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        let name = e.file_name().to_string_lossy().into_owned();
        if e.file_type().unwrap().is_dir() {
            for (sub, bytes) in read_dir_sorted(&e.path()) {
                out.push((format!("{name}/{sub}"), bytes));
            }
        } else if name != "config.toml" {
            out.push((name, fs::read(e.path()).unwrap()));
        }
    }
    out.sort();
    out
}

#[test]
fn simulate_data_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = robinv(&[
            "--out",
            p(out),
            "--seed",
            "42",
            "simulate-data",
            "--T",
            "200",
            "--delta",
            "0.03",
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
    assert!(fa.iter().any(|(n, _)| n.ends_with("manifest.toml")));
    assert_eq!(fa, fb);
    let c = dir.path().join("c");
    robinv(&[
        "--out",
        p(&c),
        "--seed",
        "43",
        "simulate-data",
        "--T",
        "200",
        "--delta",
        "0.03",
    ]);
    assert_ne!(fa, read_dir_sorted(&c));
}

#[test]
fn demo_then_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("demo");
    let o = robinv(&[
        "--out",
        p(&out),
        "platoon-demo",
        "--T",
        "300",
        "--delta",
        "0.01",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.toml")).unwrap();
    assert!(summary.contains("feasible"), "{summary}");
    assert!(out.join("data_based/K.csv").exists());
    assert!(out.join("data_based/certificates").is_dir());

    let checked = dir.path().join("verify");
    let o = robinv(&[
        "--out",
        p(&checked),
        "verify",
        "--problem",
        p(&out.join("problem_data.toml")),
        "--result",
        p(&out.join("data_based")),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(checked.join("verification.toml")).unwrap();
    assert!(report.contains("passed = true"), "{report}");

    // A tampered gain must fail re-verification.
    let k = out.join("data_based/K.csv");
    let text = fs::read_to_string(&k).unwrap();
    let bumped: Vec<String> = text
        .lines()
        .map(|l| {
            l.split(',')
                .map(|v| (v.parse::<f64>().unwrap() + 0.5).to_string())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    fs::write(&k, bumped.join("\n")).unwrap();
    let o = robinv(&[
        "--out",
        p(&dir.path().join("verify2")),
        "verify",
        "--problem",
        p(&out.join("problem_data.toml")),
        "--result",
        p(&out.join("data_based")),
    ]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn demo_above_the_ceiling_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let o = robinv(&[
        "--out",
        p(dir.path()),
        "platoon-demo",
        "--T",
        "300",
        "--delta",
        "0.07",
    ]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("summary.toml")).unwrap();
    assert_eq!(summary.matches("infeasible").count(), 2, "{summary}");
}

fn write_problem(dir: &Path, state_rows: &str) -> std::path::PathBuf {
    let sim = dir.join("data");
    let o = robinv(&[
        "--out",
        p(&sim),
        "simulate-data",
        "--T",
        "300",
        "--delta",
        "0.01",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    fs::write(dir.join("S.csv"), state_rows).unwrap();
    fs::write(
        dir.join("D.csv"),
        "1,0,0\n-1,0,0\n0,1,0\n0,-1,0\n0,0,1\n0,0,-1\n",
    )
    .unwrap();
    let manifest = sim.join("manifest.toml");
    assert!(manifest.exists());
    let problem = dir.join("problem.toml");
    fs::write(
        &problem,
        format!(
            "formulation = \"thm1\"\ndelta = 0.01\ndisturbance = \"D.csv\"\ndataset = \"{}\"\n\n[state_set]\npath = \"S.csv\"\n",
            manifest.display()
        ),
    )
    .unwrap();
    problem
}

#[test]
fn synthesize_rejects_unbounded_state_set() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), "1,0,0\n-1,0,0\n0,1,0\n0,-1,0\n");
    let o = robinv(&[
        "--out",
        p(&dir.path().join("out")),
        "synthesize",
        "--problem",
        p(&problem),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bounded"), "{}", stderr(&o));
}

const PLATOON_S: &str = "0.9165,0.19,-0.1762\n1.425,0.0661,-0.0769\n-0.0322,0.1925,0.2165\n-0.9165,-0.19,0.1762\n-1.425,-0.0661,0.0769\n0.0322,-0.1925,-0.2165\n";

#[test]
fn synthesize_problem_file() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), PLATOON_S);
    let out = dir.path().join("out");
    let o = robinv(&["--out", p(&out), "synthesize", "--problem", p(&problem)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let result = fs::read_to_string(out.join("result.toml")).unwrap();
    assert!(result.contains("status = \"feasible\""), "{result}");
    assert!(out.join("K.csv").exists());

    let o = robinv(&[
        "--out",
        p(&out),
        "synthesize",
        "--problem",
        p(&problem),
        "--formulation",
        "model",
    ]);
    assert_eq!(code(&o), 2, "a model-based problem needs A and B");

    // The data were generated with δ = 0.01; a much smaller bound contradicts them.
    let o = robinv(&[
        "--out",
        p(&out),
        "synthesize",
        "--problem",
        p(&problem),
        "--delta",
        "0.001",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("consistent"), "{}", stderr(&o));
}

#[test]
fn parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), "1,0,0\n-1,0,0\n0,1,oops\n");
    let o = robinv(&[
        "--out",
        p(&dir.path().join("out")),
        "synthesize",
        "--problem",
        p(&problem),
    ]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    assert!(e.contains("S.csv") && e.contains("line 3"), "{e}");

    fs::write(dir.path().join("S.csv"), "1,0,0\n-1,0\n").unwrap();
    let o = robinv(&[
        "--out",
        p(&dir.path().join("out")),
        "synthesize",
        "--problem",
        p(&problem),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 3\n[sweep]\nT = [50]\ndelta = oops\n").unwrap();
    let o = robinv(&["--config", p(&cfg), "sweep"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn sweep_writes_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[sweep]\nT = [60, 120]\ndelta = [0.01, 0.2]\nseeds = [1]\n",
    )
    .unwrap();
    let out = dir.path().join("sweep");
    let o = robinv(&["--config", p(&cfg), "--out", p(&out), "sweep"]);
    assert!(code(&o) == 0 || code(&o) == 1, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("T,delta,seed,status,solve_seconds"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r.len(), 5);
        assert!(
            ["feasible", "infeasible", "solver_failure"].contains(&r[3]),
            "{r:?}"
        );
        assert!(r[4].parse::<f64>().unwrap() >= 0.0);
    }
    // δ = 0.2 is far above the model-based ceiling.
    assert!(rows
        .iter()
        .filter(|r| r[1] == "0.2")
        .all(|r| r[3] == "infeasible"));
    let echoed = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(echoed.contains("[sweep]"), "{echoed}");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 3\n[simulate_data]\nT = 80\ndelta = 0.01\n").unwrap();
    let out = dir.path().join("sim");
    let o = robinv(&[
        "--config",
        p(&cfg),
        "--out",
        p(&out),
        "simulate-data",
        "--T",
        "90",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let echoed: toml::Table =
        toml::from_str(&fs::read_to_string(out.join("config.toml")).unwrap()).unwrap();
    assert_eq!(echoed["seed"].as_integer(), Some(3));
    assert_eq!(echoed["simulate_data"]["T"].as_integer(), Some(90));
    assert_eq!(echoed["simulate_data"]["delta"].as_float(), Some(0.01));
}

#[test]
fn unknown_subcommand_is_an_error() {
    let o = robinv(&["frobnicate"]);
    assert_eq!(code(&o), 2);
}
