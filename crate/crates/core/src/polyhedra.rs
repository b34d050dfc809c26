//! Half-space and vertex representations of polyhedra.
//!
//! Vertex enumeration is exhaustive over `n`-row active sets, so its cost is
//! `C(m, n)` small linear solves. That is fine for the state sets and tiny
//! consistency sets it is used on, and it refuses anything above a cap.
//! Redundancy removal uses Clarkson's ray-shooting scheme when an interior
//! point exists and falls back to one LP per row otherwise.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::{LinearProgram, LpOutcome, LpSolver, VarSign};
use crate::tolerances::Tolerances;

/// `{x : A x <= b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolyhedron {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl HPolyhedron {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::dim(format!(
                "A has {} rows but b has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::dim(
                "a polyhedron needs at least one row and one column",
            ));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "non-finite entry in polyhedron data".into(),
            ));
        }
        Ok(HPolyhedron { a, b })
    }

    /// `{x : S x <= 1}`.
    pub fn unit_rhs(s: DMatrix<f64>) -> Result<Self> {
        let m = s.nrows();
        Self::new(s, DVector::from_element(m, 1.0))
    }

    /// The box `lo <= x <= hi`, rows ordered `x_0 <= hi_0, -x_0 <= -lo_0, x_1 <= ...`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::dim("box bounds differ in length"));
        }
        let n = lo.len();
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(2 * i, i)] = 1.0;
            b[2 * i] = hi[i];
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -lo[i];
        }
        Self::new(a, b)
    }

    /// `{x : |x_i| <= 1}`.
    pub fn unit_box(n: usize) -> Self {
        Self::from_box(&vec![-1.0; n], &vec![1.0; n]).expect("valid box")
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    /// The polyhedron defined by a subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::new(self.a.select_rows(rows), self.b.select_rows(rows))
    }

    /// True iff `A x <= b + tol` componentwise.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::dim(format!(
                "point has {} entries, polyhedron lives in R^{}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self.max_violation(x) <= tol)
    }

    /// `max_i (A x - b)_i`, negative when `x` is strictly inside.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x - &self.b).max()
    }

    /// Rows scaled to unit Euclidean norm. Zero rows are returned unchanged.
    fn normalized(&self) -> (DMatrix<f64>, DVector<f64>, Vec<bool>) {
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        let mut zero = vec![false; a.nrows()];
        for i in 0..a.nrows() {
            let norm = a.row(i).norm();
            if norm == 0.0 {
                zero[i] = true;
                continue;
            }
            a.row_mut(i).unscale_mut(norm);
            b[i] /= norm;
        }
        (a, b, zero)
    }
}

/// `{x : lower <= A x <= upper}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSidedPolyhedron {
    a: DMatrix<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl TwoSidedPolyhedron {
    pub fn new(a: DMatrix<f64>, lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if a.nrows() != lower.len() || a.nrows() != upper.len() {
            return Err(Error::dim("bounds must have one entry per row of A"));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::InvalidArgument(
                "lower bound exceeds upper bound".into(),
            ));
        }
        Ok(TwoSidedPolyhedron { a, lower, upper })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    /// `[A; -A] x <= [upper; -lower]`.
    pub fn to_h(&self) -> Result<HPolyhedron> {
        let m = self.a.nrows();
        let n = self.a.ncols();
        let mut a = DMatrix::zeros(2 * m, n);
        a.rows_mut(0, m).copy_from(&self.a);
        a.rows_mut(m, m).copy_from(&(-&self.a));
        let mut b = DVector::zeros(2 * m);
        b.rows_mut(0, m).copy_from(&self.upper);
        b.rows_mut(m, m).copy_from(&(-&self.lower));
        HPolyhedron::new(a, b)
    }

    /// A nonempty two-sided polyhedron is bounded iff `A` has full column rank.
    pub fn is_bounded(&self) -> bool {
        self.is_bounded_with_tol(linalg::RANK_RTOL)
    }

    pub fn is_bounded_with_tol(&self, rank_rtol: f64) -> bool {
        linalg::rank_with_tol(&self.a, rank_rtol) == self.a.ncols()
    }
}

/// Vertex list of a bounded polyhedron.
#[derive(Debug, Clone, PartialEq)]
pub struct VPolytope {
    vertices: Vec<DVector<f64>>,
    dim: usize,
}

impl VPolytope {
    pub fn new(vertices: Vec<DVector<f64>>) -> Result<Self> {
        let dim = vertices
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::InvalidArgument("empty vertex list".into()))?;
        if vertices.iter().any(|v| v.len() != dim) {
            return Err(Error::dim("vertices differ in dimension"));
        }
        Ok(VPolytope { vertices, dim })
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Convex-hull membership: is `x` within `tol` (per coordinate) of a
    /// convex combination of the vertices?
    pub fn contains(&self, x: &DVector<f64>, tol: f64, solver: &dyn LpSolver) -> Result<bool> {
        if x.len() != self.dim {
            return Err(Error::dim(
                "point dimension differs from polytope dimension",
            ));
        }
        let nv = self.vertices.len();
        let mut lp = LinearProgram::new(0);
        let lam = lp.add_vars(nv, VarSign::NonNegative);
        lp.add_eq((0..nv).map(|j| (lam + j, 1.0)).collect(), 1.0);
        for k in 0..self.dim {
            let row: Vec<_> = (0..nv).map(|j| (lam + j, self.vertices[j][k])).collect();
            let neg: Vec<_> = row.iter().map(|&(j, v)| (j, -v)).collect();
            lp.add_le(row, x[k] + tol);
            lp.add_le(neg, -x[k] + tol);
        }
        Ok(solver.solve(&lp)?.is_optimal())
    }
}

fn maximize_over(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    rows: impl Iterator<Item = usize>,
    direction: &[f64],
    extra: Option<(&[f64], f64)>,
    solver: &dyn LpSolver,
) -> Result<LpOutcome> {
    let n = a.ncols();
    let mut lp = LinearProgram::new(n);
    for (j, &c) in direction.iter().enumerate() {
        lp.set_objective(j, -c);
    }
    for i in rows {
        let row: Vec<_> = (0..n)
            .filter(|&j| a[(i, j)] != 0.0)
            .map(|j| (j, a[(i, j)]))
            .collect();
        lp.add_le(row, b[i]);
    }
    if let Some((row, rhs)) = extra {
        lp.add_le(row.iter().cloned().enumerate().collect(), rhs);
    }
    let out = solver.solve(&lp)?;
    Ok(match out {
        LpOutcome::Optimal(mut s) => {
            s.objective = -s.objective;
            LpOutcome::Optimal(s)
        }
        other => other,
    })
}

/// `max c^T x` over `P`; `None` when unbounded or empty.
pub fn support(
    p: &HPolyhedron,
    c: &DVector<f64>,
    solver: &dyn LpSolver,
) -> Result<Option<(f64, DVector<f64>)>> {
    if c.len() != p.dim() {
        return Err(Error::dim(
            "direction dimension differs from polyhedron dimension",
        ));
    }
    match maximize_over(&p.a, &p.b, 0..p.num_rows(), c.as_slice(), None, solver)? {
        LpOutcome::Optimal(s) => Ok(Some((s.objective, DVector::from_vec(s.x)))),
        _ => Ok(None),
    }
}

/// LP feasibility of `A x <= b`, returning a witness point. The origin is
/// returned directly when it is a member.
pub fn check_nonempty(p: &HPolyhedron, solver: &dyn LpSolver) -> Result<Option<DVector<f64>>> {
    let origin = DVector::zeros(p.dim());
    if p.b.iter().all(|&v| v >= 0.0) {
        return Ok(Some(origin));
    }
    let mut lp = LinearProgram::new(p.dim());
    for i in 0..p.num_rows() {
        lp.add_le(p.a.row(i).iter().cloned().enumerate().collect(), p.b[i]);
    }
    match solver.solve(&lp)? {
        LpOutcome::Optimal(s) => Ok(Some(DVector::from_vec(s.x))),
        LpOutcome::Infeasible { .. } => Ok(None),
        LpOutcome::Unbounded => Err(Error::solver("feasibility LP reported unbounded")),
    }
}

/// Center and radius of the largest Euclidean ball inside `P`, radius capped
/// at 1. `None` if `P` is empty; a radius of (numerically) zero means `P`
/// has no interior.
pub fn chebyshev_center(
    p: &HPolyhedron,
    solver: &dyn LpSolver,
) -> Result<Option<(DVector<f64>, f64)>> {
    let n = p.dim();
    let mut lp = LinearProgram::new(n + 1);
    lp.set_objective(n, -1.0);
    for i in 0..p.num_rows() {
        let mut row: Vec<_> = p.a.row(i).iter().cloned().enumerate().collect();
        row.push((n, p.a.row(i).norm()));
        lp.add_le(row, p.b[i]);
    }
    lp.add_le(vec![(n, 1.0)], 1.0);
    match solver.solve(&lp)? {
        LpOutcome::Optimal(s) => {
            let r = s.x[n];
            if r < 0.0 {
                return Ok(None);
            }
            Ok(Some((DVector::from_column_slice(&s.x[..n]), r)))
        }
        LpOutcome::Infeasible { .. } => Ok(None),
        LpOutcome::Unbounded => Err(Error::solver("Chebyshev LP reported unbounded")),
    }
}

/// Boundedness of a general H-polyhedron: the recession cone `{z : A z <= 0}`
/// must be `{0}`. Decided by maximizing `+-z_k` over the cone intersected
/// with the unit infinity-norm ball.
pub fn is_bounded_general(p: &HPolyhedron, solver: &dyn LpSolver) -> Result<bool> {
    let n = p.dim();
    let mut cone = LinearProgram::new(n);
    for i in 0..p.num_rows() {
        let row: Vec<_> = p.a.row(i).iter().cloned().enumerate().collect();
        cone.add_le(row, 0.0);
    }
    for k in 0..n {
        cone.add_le(vec![(k, 1.0)], 1.0);
        cone.add_le(vec![(k, -1.0)], 1.0);
    }
    for k in 0..n {
        for sign in [1.0, -1.0] {
            let mut lp = cone.clone();
            lp.set_objective(k, -sign);
            match solver.solve(&lp)? {
                LpOutcome::Optimal(s) => {
                    if -s.objective > 1e-9 {
                        return Ok(false);
                    }
                }
                _ => {
                    return Err(Error::solver(
                        "recession-cone LP is always feasible and bounded",
                    ))
                }
            }
        }
    }
    Ok(true)
}

/// Limits for exhaustive vertex enumeration.
#[derive(Debug, Clone, Copy)]
pub struct VertexEnumOptions {
    pub feasibility_tol: f64,
    pub dedup_tol: f64,
    /// Maximum number of `n`-row subsets examined.
    pub max_subsets: u128,
}

impl Default for VertexEnumOptions {
    fn default() -> Self {
        let t = Tolerances::default();
        VertexEnumOptions {
            feasibility_tol: t.membership,
            dedup_tol: t.vertex_dedup,
            max_subsets: 20_000_000,
        }
    }
}

pub fn binomial(m: usize, k: usize) -> u128 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    let mut acc = 1u128;
    for i in 0..k {
        acc = match acc.checked_mul((m - i) as u128) {
            Some(v) => v / (i + 1) as u128,
            None => return u128::MAX,
        };
    }
    acc
}

/// Solve the square system given by rows `idx`, rejecting (near-)singular sets.
fn active_point(a: &DMatrix<f64>, b: &DVector<f64>, idx: &[usize]) -> Option<DVector<f64>> {
    let sub = a.select_rows(idx);
    let rhs = b.select_rows(idx);
    let lu = sub.full_piv_lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..idx.len()).map(|i| u[(i, i)].abs()).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if dmax == 0.0 || dmin <= 1e-10 * dmax {
        return None;
    }
    lu.solve(&rhs)
}

/// Exhaustive active-set vertex enumeration. `P` must be bounded.
pub fn enumerate_vertices(p: &HPolyhedron, solver: &dyn LpSolver) -> Result<VPolytope> {
    enumerate_vertices_with(p, solver, VertexEnumOptions::default())
}

pub fn enumerate_vertices_with(
    p: &HPolyhedron,
    solver: &dyn LpSolver,
    opts: VertexEnumOptions,
) -> Result<VPolytope> {
    let (m, n) = (p.num_rows(), p.dim());
    let subsets = binomial(m, n);
    if subsets > opts.max_subsets {
        return Err(Error::EnumerationCap {
            dim: n,
            subsets,
            cap: opts.max_subsets,
        });
    }
    if !is_bounded_general(p, solver)? {
        return Err(Error::Unbounded(
            "vertex enumeration needs a bounded polyhedron".into(),
        ));
    }

    let mut found: Vec<(usize, DVector<f64>)> = (0..m)
        .combinations(n)
        .enumerate()
        .par_bridge()
        .filter_map(|(k, idx)| {
            let x = active_point(&p.a, &p.b, &idx)?;
            let ok = (0..m).all(|i| {
                let slack = p.a.row(i).dot(&x.transpose()) - p.b[i];
                slack <= opts.feasibility_tol * (1.0 + p.b[i].abs())
            });
            ok.then_some((k, x))
        })
        .collect();
    found.sort_by_key(|(k, _)| *k);

    let mut vertices: Vec<DVector<f64>> = Vec::new();
    for (_, x) in found {
        if !vertices.iter().any(|v| (v - &x).amax() <= opts.dedup_tol) {
            vertices.push(x);
        }
    }
    if vertices.is_empty() {
        return Err(Error::Empty("no vertex found; polyhedron is empty".into()));
    }
    VPolytope::new(vertices)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowStatus {
    Unknown,
    Kept,
    Redundant,
}

/// Minimal H-representation. Returns the reduced polyhedron together with
/// the indices (into `P`'s rows, ascending) of the rows that were kept.
///
/// A row survives only if dropping it would let its own linear form grow
/// by more than `tol` (measured after normalizing the row to unit length).
/// Among exact duplicates the last one is kept.
pub fn remove_redundant(
    p: &HPolyhedron,
    solver: &dyn LpSolver,
    tol: f64,
) -> Result<(HPolyhedron, Vec<usize>)> {
    let m = p.num_rows();
    let (a, b, zero) = p.normalized();
    let mut status: Vec<RowStatus> = zero
        .iter()
        .map(|&z| {
            if z {
                RowStatus::Redundant
            } else {
                RowStatus::Unknown
            }
        })
        .collect();

    let (center, radius) = chebyshev_center(p, solver)?
        .ok_or_else(|| Error::Empty("redundancy removal on an empty polyhedron".into()))?;
    let bmax = b.amax().max(1.0);

    // Full test of row i against every row not yet known to be redundant.
    let full_test = |i: usize, status: &[RowStatus]| -> Result<bool> {
        let others = (0..m).filter(|&j| j != i && status[j] != RowStatus::Redundant);
        let dir: Vec<f64> = a.row(i).iter().cloned().collect();
        match maximize_over(&a, &b, others, &dir, Some((&dir, b[i] + 1.0)), solver)? {
            LpOutcome::Optimal(s) => Ok(s.objective > b[i] + tol),
            _ => Err(Error::Solver {
                message: "redundancy LP failed".into(),
                row: Some(i),
            }),
        }
    };

    if radius <= 1e-9 * bmax {
        for i in 0..m {
            if status[i] == RowStatus::Redundant {
                continue;
            }
            status[i] = if full_test(i, &status)? {
                RowStatus::Kept
            } else {
                RowStatus::Redundant
            };
        }
    } else {
        let slack_at_center: Vec<f64> = (0..m)
            .map(|k| b[k] - a.row(k).dot(&center.transpose()))
            .collect();
        let mut kept: Vec<usize> = Vec::new();
        for i in 0..m {
            while status[i] == RowStatus::Unknown {
                let dir: Vec<f64> = a.row(i).iter().cloned().collect();
                let out = maximize_over(
                    &a,
                    &b,
                    kept.iter().cloned(),
                    &dir,
                    Some((&dir, b[i] + 1.0)),
                    solver,
                )?;
                let sol = match out {
                    LpOutcome::Optimal(s) => s,
                    _ => {
                        return Err(Error::Solver {
                            message: "redundancy LP failed".into(),
                            row: Some(i),
                        })
                    }
                };
                if sol.objective <= b[i] + tol {
                    status[i] = RowStatus::Redundant;
                    break;
                }
                // Shoot a ray from the center towards the LP optimum; the
                // first row it crosses is facet-defining when the hit is unique.
                let target = DVector::from_vec(sol.x);
                let ray = &target - &center;
                let mut hits: Vec<(f64, usize)> = (0..m)
                    .filter(|&k| status[k] != RowStatus::Redundant)
                    .filter_map(|k| {
                        let den = a.row(k).dot(&ray.transpose());
                        (den > 0.0).then(|| (slack_at_center[k] / den, k))
                    })
                    .collect();
                hits.sort_by(|x, y| x.0.total_cmp(&y.0));
                let tmin = hits[0].0;
                let tied: Vec<usize> = hits
                    .iter()
                    .take_while(|(t, _)| *t <= tmin * (1.0 + 1e-9) + 1e-15)
                    .map(|&(_, k)| k)
                    .collect();
                if tied.len() == 1 && status[tied[0]] == RowStatus::Unknown {
                    status[tied[0]] = RowStatus::Kept;
                    kept.push(tied[0]);
                } else {
                    let mut progressed = false;
                    for k in tied {
                        if status[k] == RowStatus::Unknown {
                            progressed = true;
                            if full_test(k, &status)? {
                                status[k] = RowStatus::Kept;
                                kept.push(k);
                            } else {
                                status[k] = RowStatus::Redundant;
                            }
                        }
                    }
                    if !progressed {
                        status[i] = if full_test(i, &status)? {
                            kept.push(i);
                            RowStatus::Kept
                        } else {
                            RowStatus::Redundant
                        };
                    }
                }
            }
        }
    }

    let kept: Vec<usize> = (0..m).filter(|&i| status[i] == RowStatus::Kept).collect();
    if kept.is_empty() {
        // Every row is implied by the others only when P is the whole space,
        // which cannot happen with a nonzero row; keep one to stay well-formed.
        let first = (0..m).find(|&i| !zero[i]).unwrap_or(0);
        return Ok((p.select_rows(&[first])?, vec![first]));
    }
    Ok((p.select_rows(&kept)?, kept))
}
