//! Data-driven synthesis of linear state feedback that renders a polyhedral
//! set robustly invariant, from noisy input-state data, with Farkas
//! certificates that can be checked independently of the LP solver.

pub mod dataset;
pub mod error;
pub mod farkas;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod platoon;
pub mod polyhedra;
pub mod synthesis;
pub mod tolerances;
pub mod verify;

pub use error::{Error, Result};
pub use lp::{LinearProgram, LpOutcome, LpSolver, MinilpSolver, VarSign};
pub use polyhedra::{HPolyhedron, TwoSidedPolyhedron, VPolytope};
pub use tolerances::Tolerances;
