//! Solver-facing linear programs.
//!
//! Every formulation in this crate (containment certificates, synthesis,
//! boundedness and redundancy tests) is lowered to a [`LinearProgram`] and
//! handed to an [`LpSolver`]. The shipped backend is [`MinilpSolver`], a
//! sparse revised simplex; anything implementing the trait can replace it.

use std::panic::{self, catch_unwind, AssertUnwindSafe};
use std::sync::Once;

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};

/// Sign restriction of a decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarSign {
    Free,
    NonNegative,
}

/// A sparse constraint row: `(variable index, coefficient)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

/// `minimize c^T x` subject to `Aeq x = beq`, `Ale x <= ble` and per-variable
/// sign constraints. A zero objective is a pure feasibility problem.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    objective: Vec<f64>,
    signs: Vec<VarSign>,
    eq_rows: Vec<SparseRow>,
    eq_rhs: Vec<f64>,
    le_rows: Vec<SparseRow>,
    le_rhs: Vec<f64>,
}

impl LinearProgram {
    /// A feasibility problem over `num_vars` free variables.
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; num_vars],
            signs: vec![VarSign::Free; num_vars],
            ..Default::default()
        }
    }

    /// Appends `count` variables with the given sign and returns the index of the first.
    pub fn add_vars(&mut self, count: usize, sign: VarSign) -> usize {
        let first = self.objective.len();
        self.objective.resize(first + count, 0.0);
        self.signs.resize(first + count, sign);
        first
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_sign(&mut self, var: usize, sign: VarSign) {
        self.signs[var] = sign;
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn signs(&self) -> &[VarSign] {
        &self.signs
    }

    pub fn add_eq(&mut self, row: SparseRow, rhs: f64) {
        debug_assert!(row.iter().all(|&(j, _)| j < self.num_vars()));
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_le(&mut self, row: SparseRow, rhs: f64) {
        debug_assert!(row.iter().all(|&(j, _)| j < self.num_vars()));
        self.le_rows.push(row);
        self.le_rhs.push(rhs);
    }

    pub fn equalities(&self) -> (&[SparseRow], &[f64]) {
        (&self.eq_rows, &self.eq_rhs)
    }

    pub fn inequalities(&self) -> (&[SparseRow], &[f64]) {
        (&self.le_rows, &self.le_rhs)
    }

    pub fn num_nonzeros(&self) -> usize {
        self.eq_rows.iter().chain(&self.le_rows).map(Vec::len).sum()
    }

    /// Largest violation of each constraint family at `x`.
    pub fn residuals(&self, x: &[f64]) -> LpResiduals {
        let dot = |row: &SparseRow| row.iter().map(|&(j, a)| a * x[j]).sum::<f64>();
        let eq = self
            .eq_rows
            .iter()
            .zip(&self.eq_rhs)
            .map(|(r, b)| (dot(r) - b).abs())
            .fold(0.0, f64::max);
        let le = self
            .le_rows
            .iter()
            .zip(&self.le_rhs)
            .map(|(r, b)| dot(r) - b)
            .fold(0.0, f64::max);
        let sign = x
            .iter()
            .zip(&self.signs)
            .filter(|(_, s)| **s == VarSign::NonNegative)
            .map(|(v, _)| -v)
            .fold(0.0, f64::max);
        LpResiduals { eq, le, sign }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpResiduals {
    pub eq: f64,
    pub le: f64,
    pub sign: f64,
}

impl LpResiduals {
    pub fn max(&self) -> f64 {
        self.eq.max(self.le).max(self.sign)
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    /// `dual_ray` is populated only by backends that produce one.
    Infeasible {
        dual_ray: Option<Vec<f64>>,
    },
    Unbounded,
}

impl LpOutcome {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LpOutcome::Optimal(_))
    }

    pub fn solution(&self) -> Option<&LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

/// Backend abstraction. Infeasibility and unboundedness are outcomes;
/// `Err` is reserved for the solver itself failing.
pub trait LpSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome>;
}

/// Sparse revised simplex backed by the `minilp` crate.
///
/// Constraint rows are scaled to unit infinity norm before they reach the
/// simplex. Row scaling leaves the primal point unchanged, so solutions are
/// returned as-is. A factorization breakdown on the scaled rows is retried
/// once on the raw rows.
#[derive(Debug, Clone)]
pub struct MinilpSolver {
    pub scale_rows: bool,
}

impl Default for MinilpSolver {
    fn default() -> Self {
        MinilpSolver { scale_rows: true }
    }
}

fn row_scale(row: &SparseRow) -> f64 {
    row.iter().map(|(_, a)| a.abs()).fold(0.0, f64::max)
}

impl LpSolver for MinilpSolver {
    fn name(&self) -> &'static str {
        "minilp"
    }

    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome> {
        match solve_minilp(lp, self.scale_rows) {
            Err(e) if self.scale_rows => {
                log::debug!("{e}; retrying without row scaling");
                solve_minilp(lp, false)
            }
            other => other,
        }
    }
}

/// minilp panics on some factorization failures. Those are caught and
/// retried, so the default hook's report is dropped for them; panics raised
/// anywhere else still reach the previous hook.
fn quiet_minilp_panics() {
    static INSTALL: Once = Once::new();
    INSTALL.call_once(|| {
        let previous = panic::take_hook();
        panic::set_hook(Box::new(move |info| {
            let from_minilp = info.location().is_some_and(|l| l.file().contains("minilp"));
            if from_minilp {
                log::debug!("minilp panicked: {info}");
            } else {
                previous(info);
            }
        }));
    });
}

fn solve_minilp(lp: &LinearProgram, scale_rows: bool) -> Result<LpOutcome> {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    // Free variables are split as x = x+ - x-: minilp parks nonbasic free
    // variables at an infinite bound otherwise.
    let vars: Vec<_> = lp
        .objective
        .iter()
        .zip(&lp.signs)
        .map(|(&c, sign)| {
            let pos = problem.add_var(c, (0.0, f64::INFINITY));
            let neg = match sign {
                VarSign::Free => Some(problem.add_var(-c, (0.0, f64::INFINITY))),
                VarSign::NonNegative => None,
            };
            (pos, neg)
        })
        .collect();

    let families = [
        (&lp.eq_rows, &lp.eq_rhs, ComparisonOp::Eq),
        (&lp.le_rows, &lp.le_rhs, ComparisonOp::Le),
    ];
    for (rows, rhs, op) in families {
        for (row, &b) in rows.iter().zip(rhs.iter()) {
            let scale = row_scale(row);
            if scale == 0.0 {
                // 0 = b or 0 <= b
                let ok = match op {
                    ComparisonOp::Eq => b == 0.0,
                    _ => b >= 0.0,
                };
                if !ok {
                    return Ok(LpOutcome::Infeasible { dual_ray: None });
                }
                continue;
            }
            let s = if scale_rows { 1.0 / scale } else { 1.0 };
            let mut expr = Vec::with_capacity(row.len());
            for &(j, a) in row {
                let (pos, neg) = vars[j];
                expr.push((pos, a * s));
                if let Some(neg) = neg {
                    expr.push((neg, -a * s));
                }
            }
            problem.add_constraint(expr.as_slice(), op, b * s);
        }
    }

    quiet_minilp_panics();
    let solved = catch_unwind(AssertUnwindSafe(|| problem.solve()))
        .map_err(|_| Error::solver("minilp panicked during solve"))?;
    match solved {
        Ok(sol) => {
            let x: Vec<f64> = vars
                .iter()
                .map(|&(pos, neg)| sol[pos] - neg.map_or(0.0, |v| sol[v]))
                .collect();
            if x.iter().any(|v| !v.is_finite()) {
                // minilp reports some unbounded problems this way
                return Ok(LpOutcome::Unbounded);
            }
            let objective = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
            Ok(LpOutcome::Optimal(LpSolution { x, objective }))
        }
        Err(minilp::Error::Infeasible) => Ok(LpOutcome::Infeasible { dual_ray: None }),
        Err(minilp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
    }
}
