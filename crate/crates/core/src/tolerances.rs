use serde::{Deserialize, Serialize};

/// Numerical tolerances used across the crate. Every field can be
/// overridden from a run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Absolute slack allowed in `A x <= b` membership tests.
    pub membership: f64,
    /// Relative singular-value cutoff for numerical rank.
    pub rank_rtol: f64,
    /// Vertices closer than this in the infinity norm are merged.
    pub vertex_dedup: f64,
    /// A row is kept only if dropping it enlarges the set by more than this.
    pub redundancy: f64,
    /// Absolute certificate tolerance, scaled by `max(1, |B|_inf)`.
    pub certificate: f64,
    /// Containment slack for simulated trajectories.
    pub simulation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            membership: 1e-8,
            rank_rtol: 1e-9,
            vertex_dedup: 1e-7,
            redundancy: 1e-9,
            certificate: 1e-6,
            simulation: 1e-7,
        }
    }
}
