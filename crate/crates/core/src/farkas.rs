//! Containment certificates for `{x : A x <= c} ⊆ {x : B x <= d}`.
//!
//! When the inner set is nonempty, containment holds iff some `E >= 0`
//! satisfies `B = E A` and `E c <= d`. The certificate `E` can be checked
//! with plain matrix arithmetic, without trusting the LP solver.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::{LinearProgram, LpOutcome, LpSolver, VarSign};
use crate::polyhedra::{self, HPolyhedron};

#[derive(Debug, Clone, PartialEq)]
pub struct ContainmentProblem {
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
    pub b: DMatrix<f64>,
    pub d: DVector<f64>,
}

impl ContainmentProblem {
    pub fn new(a: DMatrix<f64>, c: DVector<f64>, b: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        if a.ncols() != b.ncols() {
            return Err(Error::dim(format!(
                "inner set lives in R^{}, outer set in R^{}",
                a.ncols(),
                b.ncols()
            )));
        }
        if a.nrows() != c.len() || b.nrows() != d.len() {
            return Err(Error::dim("right-hand side length differs from row count"));
        }
        Ok(ContainmentProblem { a, c, b, d })
    }

    pub fn from_sets(inner: &HPolyhedron, outer: &HPolyhedron) -> Result<Self> {
        Self::new(
            inner.a().clone(),
            inner.b().clone(),
            outer.a().clone(),
            outer.b().clone(),
        )
    }

    /// `(p, q, n)`: inner rows, outer rows, ambient dimension.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.nrows(), self.b.nrows(), self.a.ncols())
    }

    /// Fails with [`Error::Empty`] unless `{x : A x <= c}` has a point.
    pub fn ensure_nonempty(&self, solver: &dyn LpSolver) -> Result<()> {
        let inner = HPolyhedron::new(self.a.clone(), self.c.clone())?;
        match polyhedra::check_nonempty(&inner, solver)? {
            Some(_) => Ok(()),
            None => Err(Error::Empty("inner set of a containment problem".into())),
        }
    }
}

/// Nonnegative multiplier matrix `E` (`q x p`).
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasCertificate {
    pub e: DMatrix<f64>,
}

/// Index of `E[r, k]` in the LP variable vector (column-stacked, i.e. `vec(E)`).
pub fn certificate_var(q: usize, r: usize, k: usize) -> usize {
    k * q + r
}

/// LP over `vec(E)`: `E >= 0`, `B = E A` as equalities, `E c <= d`, zero objective.
pub fn build_containment_lp(prob: &ContainmentProblem) -> LinearProgram {
    let (p, q, n) = prob.dims();
    let mut lp = LinearProgram::new(0);
    lp.add_vars(p * q, VarSign::NonNegative);
    for r in 0..q {
        for col in 0..n {
            let row: Vec<_> = (0..p)
                .filter(|&k| prob.a[(k, col)] != 0.0)
                .map(|k| (certificate_var(q, r, k), prob.a[(k, col)]))
                .collect();
            lp.add_eq(row, prob.b[(r, col)]);
        }
        let row: Vec<_> = (0..p)
            .filter(|&k| prob.c[k] != 0.0)
            .map(|k| (certificate_var(q, r, k), prob.c[k]))
            .collect();
        lp.add_le(row, prob.d[r]);
    }
    lp
}

/// Solve for a certificate. `Ok(None)` means no certificate exists, which
/// (with a nonempty inner set) means containment fails.
pub fn find_certificate(
    prob: &ContainmentProblem,
    solver: &dyn LpSolver,
) -> Result<Option<FarkasCertificate>> {
    let (p, q, _) = prob.dims();
    let lp = build_containment_lp(prob);
    match solver.solve(&lp)? {
        LpOutcome::Optimal(s) => {
            let e = DMatrix::from_fn(q, p, |r, k| s.x[certificate_var(q, r, k)]);
            Ok(Some(FarkasCertificate { e }))
        }
        LpOutcome::Infeasible { .. } => Ok(None),
        LpOutcome::Unbounded => Err(Error::solver(
            "containment LP has a zero objective and cannot be unbounded",
        )),
    }
}

/// Containment test that first checks the nonemptiness hypothesis.
pub fn decide_containment(
    prob: &ContainmentProblem,
    solver: &dyn LpSolver,
) -> Result<Option<FarkasCertificate>> {
    prob.ensure_nonempty(solver)?;
    find_certificate(prob, solver)
}

/// Outcome of re-checking a certificate by direct matrix arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// `max(0, -min E)`.
    pub sign_violation: f64,
    /// `max |B - E A|`.
    pub equality_residual: f64,
    /// `max(0, max(E c - d))`.
    pub inequality_violation: f64,
    /// Tolerance actually applied, after scaling.
    pub tolerance: f64,
    pub passed: bool,
}

impl CertificateReport {
    pub fn worst(&self) -> f64 {
        self.sign_violation
            .max(self.equality_residual)
            .max(self.inequality_violation)
    }

    /// Combine reports: worst violation of each kind, pass only if all pass.
    pub fn merge(&self, other: &CertificateReport) -> CertificateReport {
        CertificateReport {
            sign_violation: self.sign_violation.max(other.sign_violation),
            equality_residual: self.equality_residual.max(other.equality_residual),
            inequality_violation: self.inequality_violation.max(other.inequality_violation),
            tolerance: self.tolerance.max(other.tolerance),
            passed: self.passed && other.passed,
        }
    }
}

/// Scaled certificate tolerance: `tol * max(1, |B|_inf)`.
pub fn scaled_tolerance(tol: f64, b: &DMatrix<f64>) -> f64 {
    tol * linalg::inf_norm(b).max(1.0)
}

/// Check `E >= 0`, `B = E A`, `E c <= d`. The absolute tolerance `tol` is
/// scaled by `max(1, |B|_inf)`.
pub fn verify_certificate(
    prob: &ContainmentProblem,
    cert: &FarkasCertificate,
    tol: f64,
) -> Result<CertificateReport> {
    let (p, q, _) = prob.dims();
    if cert.e.shape() != (q, p) {
        return Err(Error::dim(format!(
            "certificate is {}x{}, expected {}x{}",
            cert.e.nrows(),
            cert.e.ncols(),
            q,
            p
        )));
    }
    let tolerance = scaled_tolerance(tol, &prob.b);
    Ok(check_parts(
        &cert.e, &prob.a, &prob.c, &prob.b, &prob.d, tolerance,
    ))
}

/// Raw three-condition check with an already-scaled tolerance.
pub(crate) fn check_parts(
    e: &DMatrix<f64>,
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    b: &DMatrix<f64>,
    d: &DVector<f64>,
    tolerance: f64,
) -> CertificateReport {
    let sign_violation = (-e.min()).max(0.0);
    let equality_residual = linalg::max_abs(&(b - e * a));
    let inequality_violation = (e * c - d).max().max(0.0);
    let passed = sign_violation <= tolerance
        && equality_residual <= tolerance
        && inequality_violation <= tolerance;
    CertificateReport {
        sign_violation,
        equality_residual,
        inequality_violation,
        tolerance,
        passed,
    }
}

/// The degenerate alternative `e >= 0, e^T A = 0, e^T c < 0` of the
/// nonhomogeneous Farkas lemma, with the strict inequality scaled to
/// `e^T c <= -1`. Returns `true` when it is infeasible, which is guaranteed
/// whenever `{x : A x <= c}` is nonempty.
pub fn no_degenerate_alternative(prob: &ContainmentProblem, solver: &dyn LpSolver) -> Result<bool> {
    let (p, _, n) = prob.dims();
    let mut lp = LinearProgram::new(0);
    lp.add_vars(p, VarSign::NonNegative);
    for col in 0..n {
        let row: Vec<_> = (0..p)
            .filter(|&k| prob.a[(k, col)] != 0.0)
            .map(|k| (k, prob.a[(k, col)]))
            .collect();
        lp.add_eq(row, 0.0);
    }
    lp.add_le((0..p).map(|k| (k, prob.c[k])).collect(), -1.0);
    match solver.solve(&lp)? {
        LpOutcome::Optimal(_) => Ok(false),
        LpOutcome::Infeasible { .. } => Ok(true),
        LpOutcome::Unbounded => Err(Error::solver(
            "alternative LP has a zero objective and cannot be unbounded",
        )),
    }
}
