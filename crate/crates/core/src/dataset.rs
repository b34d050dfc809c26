//! Experiment data and the set of system matrices consistent with it.
//!
//! Coordinates: a candidate `V = [Â B̂]` (`n x (n+m)`) is handled as
//! `vec(V)` (column stacking), so the consistency set lives in
//! `R^{n(n+m)}`. Constraint rows are ordered by data column: rows
//! `i*n_d .. (i+1)*n_d` come from sample `i`.
//!
//! Random data uses ChaCha8 seeded from a `u64`; inputs and disturbances
//! are drawn from separate streams of the same seed.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::LpSolver;
use crate::polyhedra::{self, HPolyhedron, TwoSidedPolyhedron};

/// Input/state data of one open-loop experiment of length `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentData {
    u0: DMatrix<f64>,
    x0: DMatrix<f64>,
    x1: DMatrix<f64>,
    d0: Option<DMatrix<f64>>,
}

impl ExperimentData {
    pub fn new(u0: DMatrix<f64>, x0: DMatrix<f64>, x1: DMatrix<f64>) -> Result<Self> {
        let t = x0.ncols();
        if t == 0 {
            return Err(Error::dim("experiment has no samples"));
        }
        if u0.ncols() != t || x1.ncols() != t {
            return Err(Error::dim(format!(
                "sample counts differ: U0 {}, X0 {}, X1 {}",
                u0.ncols(),
                t,
                x1.ncols()
            )));
        }
        if x0.nrows() != x1.nrows() || x0.nrows() == 0 || u0.nrows() == 0 {
            return Err(Error::dim(
                "X0 and X1 must share a nonzero row count and U0 must have rows",
            ));
        }
        Ok(ExperimentData {
            u0,
            x0,
            x1,
            d0: None,
        })
    }

    /// Attach the true disturbance samples (simulation only; never read by synthesis).
    pub fn with_disturbances(mut self, d0: DMatrix<f64>) -> Result<Self> {
        if d0.shape() != self.x0.shape() {
            return Err(Error::dim("D0 must have the shape of X0"));
        }
        self.d0 = Some(d0);
        Ok(self)
    }

    pub fn u0(&self) -> &DMatrix<f64> {
        &self.u0
    }

    pub fn x0(&self) -> &DMatrix<f64> {
        &self.x0
    }

    pub fn x1(&self) -> &DMatrix<f64> {
        &self.x1
    }

    pub fn d0(&self) -> Option<&DMatrix<f64>> {
        self.d0.as_ref()
    }

    pub fn n(&self) -> usize {
        self.x0.nrows()
    }

    pub fn m(&self) -> usize {
        self.u0.nrows()
    }

    pub fn t(&self) -> usize {
        self.x0.ncols()
    }

    /// The first `t` samples, i.e. the experiment stopped earlier.
    pub fn prefix(&self, t: usize) -> Result<Self> {
        if t == 0 || t > self.t() {
            return Err(Error::InvalidArgument(format!(
                "prefix length {t} outside 1..={}",
                self.t()
            )));
        }
        Ok(ExperimentData {
            u0: self.u0.columns(0, t).into_owned(),
            x0: self.x0.columns(0, t).into_owned(),
            x1: self.x1.columns(0, t).into_owned(),
            d0: self.d0.as_ref().map(|d| d.columns(0, t).into_owned()),
        })
    }
}

/// Roll `x+ = A x + B u + d` forward from `x0`.
pub fn simulate_experiment(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x0: &DVector<f64>,
    inputs: &DMatrix<f64>,
    disturbances: &DMatrix<f64>,
) -> Result<ExperimentData> {
    let n = a.nrows();
    let t = inputs.ncols();
    if a.ncols() != n || b.nrows() != n || x0.len() != n {
        return Err(Error::dim("A must be n x n with B and x0 having n rows"));
    }
    if inputs.nrows() != b.ncols() {
        return Err(Error::dim("input rows differ from the column count of B"));
    }
    if disturbances.shape() != (n, t) {
        return Err(Error::dim("disturbances must be n x T"));
    }
    let mut xs = DMatrix::zeros(n, t);
    let mut xn = DMatrix::zeros(n, t);
    let mut x = x0.clone();
    for k in 0..t {
        xs.set_column(k, &x);
        let next = a * &x + b * inputs.column(k) + disturbances.column(k);
        xn.set_column(k, &next);
        x = next;
    }
    ExperimentData::new(inputs.clone(), xs, xn)?.with_disturbances(disturbances.clone())
}

/// `W0 = [X0; U0]`.
pub fn assemble_w0(data: &ExperimentData) -> DMatrix<f64> {
    let (n, m, t) = (data.n(), data.m(), data.t());
    let mut w = DMatrix::zeros(n + m, t);
    w.rows_mut(0, n).copy_from(&data.x0);
    w.rows_mut(n, m).copy_from(&data.u0);
    w
}

/// Full row rank of `W0`, with the numerical rank.
pub fn richness_check(data: &ExperimentData) -> (bool, usize) {
    let r = linalg::rank(&assemble_w0(data));
    (r == data.n() + data.m(), r)
}

/// `{d : D d <= delta * 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSet {
    d: DMatrix<f64>,
    delta: f64,
}

impl DisturbanceSet {
    pub fn new(d: DMatrix<f64>, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "delta must be finite and >= 0, got {delta}"
            )));
        }
        if d.nrows() == 0 || d.ncols() == 0 {
            return Err(Error::dim("disturbance matrix is empty"));
        }
        Ok(DisturbanceSet { d, delta })
    }

    /// The box `|d_i| <= delta`, rows ordered `d_0, -d_0, d_1, -d_1, ...`.
    pub fn boxed(n: usize, delta: f64) -> Result<Self> {
        Self::new(HPolyhedron::unit_box(n).a().clone(), delta)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.d.clone(), delta)
    }

    pub fn dim(&self) -> usize {
        self.d.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.d.nrows()
    }

    pub fn polyhedron(&self) -> HPolyhedron {
        HPolyhedron::new(
            self.d.clone(),
            DVector::from_element(self.d.nrows(), self.delta),
        )
        .expect("validated at construction")
    }

    pub fn contains(&self, d: &DVector<f64>, tol: f64) -> Result<bool> {
        self.polyhedron().contains(d, tol)
    }
}

/// `{d : delta * lower <= D̂ d <= delta * upper}` with `lower < 0 < upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalDisturbanceSet {
    dhat: DMatrix<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
    delta: f64,
}

impl IntervalDisturbanceSet {
    pub fn new(
        dhat: DMatrix<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
        delta: f64,
    ) -> Result<Self> {
        if dhat.nrows() != lower.len() || dhat.nrows() != upper.len() {
            return Err(Error::dim("interval bounds need one entry per row of D̂"));
        }
        if lower.iter().any(|&l| !(l < 0.0)) || upper.iter().any(|&u| !(u > 0.0)) {
            return Err(Error::InvalidArgument(
                "interval bounds must satisfy lower < 0 < upper".into(),
            ));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "delta must be finite and >= 0, got {delta}"
            )));
        }
        Ok(IntervalDisturbanceSet {
            dhat,
            lower,
            upper,
            delta,
        })
    }

    pub fn dhat(&self) -> &DMatrix<f64> {
        &self.dhat
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn two_sided(&self) -> TwoSidedPolyhedron {
        TwoSidedPolyhedron::new(
            self.dhat.clone(),
            &self.lower * self.delta,
            &self.upper * self.delta,
        )
        .expect("bounds ordered")
    }

    /// The same set as `{d : D̃ d <= delta * 1}`: each row of `D̂` is divided
    /// by its upper bound, and its negation by the magnitude of the lower bound.
    pub fn to_disturbance_set(&self) -> DisturbanceSet {
        let (k, n) = self.dhat.shape();
        let mut d = DMatrix::zeros(2 * k, n);
        for i in 0..k {
            d.row_mut(i).copy_from(&(self.dhat.row(i) / self.upper[i]));
            d.row_mut(k + i)
                .copy_from(&(self.dhat.row(i) / self.lower[i]));
        }
        DisturbanceSet::new(d, self.delta).expect("delta validated")
    }
}

/// The consistency set as an H-polyhedron over `vec(V)`.
#[derive(Debug, Clone)]
pub struct ConsistencySet {
    h: HPolyhedron,
    n: usize,
    m: usize,
    t: usize,
    /// For each row of `h`, the row of the full stacked representation it came from.
    row_map: Vec<usize>,
    full_rows: usize,
}

impl ConsistencySet {
    pub fn polyhedron(&self) -> &HPolyhedron {
        &self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn row_map(&self) -> &[usize] {
        &self.row_map
    }

    /// Row count before any redundancy removal (`T * n_d`).
    pub fn full_rows(&self) -> usize {
        self.full_rows
    }

    pub fn is_minimized(&self) -> bool {
        self.h.num_rows() != self.full_rows || self.row_map.iter().enumerate().any(|(i, &r)| i != r)
    }

    pub fn contains(&self, v: &DMatrix<f64>, tol: f64) -> Result<bool> {
        if v.shape() != (self.n, self.n + self.m) {
            return Err(Error::dim("candidate must be n x (n+m)"));
        }
        self.h.contains(&linalg::vec_of(v), tol)
    }
}

/// `-(w_i^T ⊗ D) vec(V) <= delta*1 - D x(i+1)` for every sample `i`.
pub fn consistency_rows(data: &ExperimentData, dist: &DisturbanceSet) -> Result<HPolyhedron> {
    let (n, m, t) = (data.n(), data.m(), data.t());
    if dist.dim() != n {
        return Err(Error::dim(format!(
            "disturbance set lives in R^{}, state in R^{n}",
            dist.dim()
        )));
    }
    let w = assemble_w0(data);
    let d = dist.matrix();
    let nd = d.nrows();
    let cols = n * (n + m);
    let mut g = DMatrix::zeros(t * nd, cols);
    let mut h = DVector::zeros(t * nd);
    for i in 0..t {
        let dx = d * data.x1.column(i);
        for r in 0..nd {
            let row = i * nd + r;
            for k in 0..n + m {
                let wk = w[(k, i)];
                if wk == 0.0 {
                    continue;
                }
                for l in 0..n {
                    g[(row, k * n + l)] = -wk * d[(r, l)];
                }
            }
            h[row] = dist.delta() - dx[r];
        }
    }
    HPolyhedron::new(g, h)
}

/// Build the consistency set; with `minimize` the representation is reduced
/// to its irredundant rows and the row map records where each came from.
pub fn build_consistency_set(
    data: &ExperimentData,
    dist: &DisturbanceSet,
    minimize: bool,
    solver: &dyn LpSolver,
    redundancy_tol: f64,
) -> Result<ConsistencySet> {
    let full = consistency_rows(data, dist)?;
    let full_rows = full.num_rows();
    let (h, row_map) = if minimize {
        polyhedra::remove_redundant(&full, solver, redundancy_tol)?
    } else {
        (full, (0..full_rows).collect())
    };
    Ok(ConsistencySet {
        h,
        n: data.n(),
        m: data.m(),
        t: data.t(),
        row_map,
        full_rows,
    })
}

/// Boundedness of the consistency set under an interval disturbance model:
/// `W0` must have full row rank and `D̂` full column rank.
pub fn consistency_bounded(data: &ExperimentData, dist: &IntervalDisturbanceSet) -> bool {
    richness_check(data).0 && linalg::rank(dist.dhat()) == data.n()
}

fn uniform_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
) -> DMatrix<f64> {
    // Column by column, so prefixes of longer experiments coincide.
    let mut out = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            out[(i, j)] = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        }
    }
    out
}

const INPUT_STREAM: u64 = 0;
const DISTURBANCE_STREAM: u64 = 1;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// I.i.d. uniform inputs on `[lo, hi]`.
pub fn random_inputs(m: usize, t: usize, lo: f64, hi: f64, seed: u64) -> Result<DMatrix<f64>> {
    if lo > hi {
        return Err(Error::InvalidArgument("input range is empty".into()));
    }
    Ok(uniform_matrix(
        &mut rng_for(seed, INPUT_STREAM),
        m,
        t,
        lo,
        hi,
    ))
}

/// I.i.d. uniform disturbances on `[-delta, delta]` per component.
pub fn random_box_disturbances(n: usize, delta: f64, t: usize, seed: u64) -> Result<DMatrix<f64>> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument("delta must be >= 0".into()));
    }
    Ok(uniform_matrix(
        &mut rng_for(seed, DISTURBANCE_STREAM),
        n,
        t,
        -delta,
        delta,
    ))
}

/// Each column drawn uniformly from the vertices of the disturbance set.
pub fn random_vertex_disturbances(
    dist: &DisturbanceSet,
    t: usize,
    seed: u64,
    solver: &dyn LpSolver,
) -> Result<DMatrix<f64>> {
    let verts = polyhedra::enumerate_vertices(&dist.polyhedron(), solver)?;
    let mut rng = rng_for(seed, DISTURBANCE_STREAM);
    let mut out = DMatrix::zeros(dist.dim(), t);
    for j in 0..t {
        let v = &verts.vertices()[rng.gen_range(0..verts.len())];
        out.set_column(j, v);
    }
    Ok(out)
}
