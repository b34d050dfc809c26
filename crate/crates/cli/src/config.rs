//! Run configuration. One TOML file holds a section per subcommand; flags
//! given on the command line override it, and the effective configuration is
//! echoed into the output directory with absolute paths.

use std::path::{Path, PathBuf};

use robinv::io::{self, ModelFiles, PolyhedronFormat};
use robinv::synthesis::{Formulation, SynthesisOptions};
use robinv::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: PathBuf,
    pub seed: u64,
    /// Worker threads for sweeps and batched checks.
    pub jobs: usize,
    /// Used for polyhedron entries that do not name a format.
    pub polyhedron_format: PolyhedronFormat,
    pub options: SynthesisOptions,
    pub platoon: PlatoonConfig,
    pub sweep: SweepConfig,
    pub synthesize: SynthesizeConfig,
    pub simulate_data: SimulateDataConfig,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            out: PathBuf::from("out"),
            seed: 1,
            jobs: 1,
            polyhedron_format: PolyhedronFormat::Pair,
            options: SynthesisOptions::default(),
            platoon: PlatoonConfig::default(),
            sweep: SweepConfig::default(),
            synthesize: SynthesizeConfig::default(),
            simulate_data: SimulateDataConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatoonConfig {
    #[serde(rename = "T")]
    pub t: usize,
    pub delta: f64,
    /// Data-based formulation to run next to the model-based one.
    pub formulation: Formulation,
    pub simulation_steps: usize,
    /// Resolution of the model-based ceiling search on `[0, ceiling_hi]`.
    pub ceiling_tol: f64,
    pub ceiling_hi: f64,
}

impl Default for PlatoonConfig {
    fn default() -> Self {
        PlatoonConfig {
            t: 1600,
            delta: 0.05,
            formulation: Formulation::Thm1,
            simulation_steps: 1000,
            ceiling_tol: 1e-4,
            ceiling_hi: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataPolicy {
    /// A fresh experiment for every horizon.
    Independent,
    /// One experiment per seed, truncated to each horizon.
    Nested,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Solve every cell.
    Grid,
    /// Per horizon and seed, walk the δ grid downward from the model-based
    /// ceiling to the first feasible value; only probed cells are reported.
    Descend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl DeltaGrid {
    /// Ascending grid values; a range includes `stop` when it lies on the grid.
    pub fn values(&self) -> Vec<f64> {
        let mut v = match self {
            DeltaGrid::List(l) => l.clone(),
            DeltaGrid::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Vec::new();
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..count)
                    .map(|i| round_grid(start + i as f64 * step))
                    .collect()
            }
        };
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

/// Strips accumulated floating-point noise from grid values.
fn round_grid(x: f64) -> f64 {
    (x * 1e10).round() / 1e10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(rename = "T")]
    pub t: Vec<usize>,
    pub delta: DeltaGrid,
    pub seeds: Vec<u64>,
    pub data: DataPolicy,
    pub search: SearchMode,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            t: vec![600, 1600, 3000],
            delta: DeltaGrid::Range {
                start: 0.0025,
                stop: 0.07,
                step: 0.0025,
            },
            seeds: vec![1, 2, 3, 4, 5],
            data: DataPolicy::Independent,
            search: SearchMode::Grid,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesizeConfig {
    pub problem: Option<PathBuf>,
    pub delta: Option<f64>,
    pub formulation: Option<Formulation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceMode {
    /// Uniform on `[-delta, delta]` per component.
    Box,
    /// Uniformly chosen vertices of `{d : D d <= delta 1}`.
    Vertex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateDataConfig {
    /// `A` and `B`; the built-in platoon when absent.
    pub system: Option<ModelFiles>,
    #[serde(rename = "T")]
    pub t: usize,
    pub delta: f64,
    /// Initial state as a CSV vector; the origin when absent.
    pub x0: Option<PathBuf>,
    pub input_range: [f64; 2],
    pub disturbance: DisturbanceMode,
    /// `D` for vertex disturbances; the platoon's `D` when absent.
    pub disturbance_matrix: Option<PathBuf>,
}

impl Default for SimulateDataConfig {
    fn default() -> Self {
        SimulateDataConfig {
            system: None,
            t: 1600,
            delta: 0.05,
            x0: None,
            input_range: [
                -robinv::platoon::INPUT_AMPLITUDE,
                robinv::platoon::INPUT_AMPLITUDE,
            ],
            disturbance: DisturbanceMode::Box,
            disturbance_matrix: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub problem: Option<PathBuf>,
    pub result: Option<PathBuf>,
    /// Consistent models sampled when checking a data-based gain.
    pub model_samples: usize,
    /// Closed-loop steps from every vertex of `S` when `(A, B)` is known; 0 disables.
    pub simulation_steps: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            problem: None,
            result: None,
            model_samples: 100,
            simulation_steps: 1000,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        io::read_toml(path)
    }

    /// Makes every path absolute against the current directory, so the echo
    /// can be re-run from anywhere.
    pub fn absolutize(&mut self) {
        let cwd = std::env::current_dir().unwrap_or_default();
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = cwd.join(&*p);
            }
        };
        abs(&mut self.out);
        for p in [
            self.synthesize.problem.as_mut(),
            self.simulate_data.x0.as_mut(),
            self.simulate_data.disturbance_matrix.as_mut(),
            self.verify.problem.as_mut(),
            self.verify.result.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            abs(p);
        }
        if let Some(sys) = self.simulate_data.system.as_mut() {
            abs(&mut sys.a);
            abs(&mut sys.b);
        }
    }

    pub fn echo(&self, dir: &Path) -> Result<()> {
        io::write_toml(&dir.join("config.toml"), self)
    }
}
