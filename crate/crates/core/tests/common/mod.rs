//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use robinv::dataset::{self, DisturbanceSet, ExperimentData, IntervalDisturbanceSet};
use robinv::polyhedra::{self, TwoSidedPolyhedron};
use robinv::verify;
use robinv::{HPolyhedron, MinilpSolver};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn solver() -> MinilpSolver {
    MinilpSolver::default()
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi))
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(lo..hi))
}

/// Bounded polytope `{x : A x <= 1}` around the origin: a box of random
/// half-widths cut by `extra` random half-spaces that keep the origin inside.
pub fn random_polytope(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> HPolyhedron {
    let mut a = DMatrix::zeros(2 * n + extra, n);
    for i in 0..n {
        let w = rng.gen_range(0.5..2.0);
        a[(2 * i, i)] = 1.0 / w;
        a[(2 * i + 1, i)] = -1.0 / rng.gen_range(0.5..2.0);
    }
    for r in 0..extra {
        let dir = uniform_vec(rng, n, -1.0, 1.0);
        let scale = rng.gen_range(0.6..1.5);
        a.row_mut(2 * n + r).copy_from(&(dir.transpose() * scale));
    }
    HPolyhedron::unit_rhs(a).unwrap()
}

/// Random point of the bounding box `[-r, r]^n`.
pub fn box_point(rng: &mut ChaCha8Rng, n: usize, r: f64) -> DVector<f64> {
    uniform_vec(rng, n, -r, r)
}

/// Random convex combination of the given points.
pub fn mixture(rng: &mut ChaCha8Rng, pts: &[DVector<f64>]) -> (DVector<f64>, Vec<f64>) {
    let mut w: Vec<f64> = (0..pts.len())
        .map(|_| -rng.gen_range(1e-9f64..1.0).ln())
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    let mut x = DVector::zeros(pts[0].len());
    for (p, &a) in pts.iter().zip(&w) {
        x += p * a;
    }
    (x, w)
}

/// A small identification experiment: random `(A, B)`, box disturbances of
/// size `delta_data`, inputs uniform on `[-1, 1]`.
pub struct TinyInstance {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub data: ExperimentData,
    pub s: HPolyhedron,
    pub dist: DisturbanceSet,
}

pub fn tiny_instance(seed: u64, n: usize, m: usize, t: usize, delta: f64) -> TinyInstance {
    let mut r = rng(seed);
    let a = uniform(&mut r, n, n, -1.2, 1.2);
    let b = uniform(&mut r, n, m, -1.0, 1.0);
    let inputs = uniform(&mut r, m, t, -1.0, 1.0);
    let x0 = uniform_vec(&mut r, n, -0.5, 0.5);
    let dist = DisturbanceSet::boxed(n, delta).unwrap();
    let w = uniform(&mut r, n, t, -delta, delta);
    let data = dataset::simulate_experiment(&a, &b, &x0, &inputs, &w).unwrap();
    let s = HPolyhedron::unit_box(n);
    TinyInstance {
        a,
        b,
        data,
        s,
        dist,
    }
}

/// Membership of a point in a polyhedron given as `(A, b)`, with tolerance.
pub fn inside(p: &HPolyhedron, x: &DVector<f64>, tol: f64) -> bool {
    p.contains(x, tol).unwrap()
}

/// Verdicts of the three data-based feasibility routes on one tiny instance.
pub struct EquivalenceCase {
    pub n: usize,
    pub t: usize,
    pub delta: f64,
    pub thm1: robinv::synthesis::SynthesisResult,
    pub thm2: robinv::synthesis::SynthesisResult,
    /// Common gain for every consistency vertex, decided independently of
    /// the multiplier programs.
    pub per_vertex: bool,
    pub vertices: Vec<DMatrix<f64>>,
    pub data: ExperimentData,
    pub s: HPolyhedron,
    pub dist: DisturbanceSet,
}

impl EquivalenceCase {
    pub fn agree(&self) -> bool {
        self.thm1.is_feasible() == self.thm2.is_feasible()
            && self.thm2.is_feasible() == self.per_vertex
    }
}

/// For the unit box `S` and a box disturbance of size `delta`, `F S ⊕ D ⊆ S`
/// iff every row of `F` has absolute sum at most `1 - delta`. Searches for
/// one `K` meeting this for all models at once.
pub fn common_box_gain(models: &[DMatrix<f64>], n: usize, m: usize, delta: f64) -> bool {
    use robinv::{LinearProgram, LpSolver, VarSign};
    let mut lp = LinearProgram::new(0);
    let k0 = lp.add_vars(m * n, VarSign::Free);
    for v in models {
        let (a, b) = (v.columns(0, n), v.columns(n, m));
        for r in 0..n {
            let aux = lp.add_vars(n, VarSign::NonNegative);
            for c in 0..n {
                // aux_c >= ±(A[r,c] + sum_i B[r,i] K[i,c])
                for sign in [1.0, -1.0] {
                    let mut row = vec![(aux + c, -1.0)];
                    row.extend((0..m).map(|i| (k0 + c * m + i, sign * b[(r, i)])));
                    lp.add_le(row, -sign * a[(r, c)]);
                }
            }
            lp.add_le((0..n).map(|c| (aux + c, 1.0)).collect(), 1.0 - delta);
        }
    }
    solver().solve(&lp).unwrap().is_optimal()
}

/// Instance `index` of the equivalence pool: `n = m = 1` or `n = 2, m = 1`,
/// `T <= 5`, `delta` drawn from a spread of sizes.
pub fn equivalence_case(index: u64) -> EquivalenceCase {
    use robinv::synthesis::{self, SynthesisOptions};
    let sv = solver();
    let mut r = rng(0xE0_0000 + index);
    let n = if index.is_multiple_of(2) { 1 } else { 2 };
    let m = 1;
    let t = r.gen_range(n + m..=5);
    let delta = [0.02, 0.1, 0.25, 0.5][r.gen_range(0..4)];
    let inst = tiny_instance(r.gen(), n, m, t, delta);
    let opts = SynthesisOptions::default();
    let thm1 =
        synthesis::synthesize_thm1(&inst.data, &inst.s, &inst.dist, None, &opts, &sv).unwrap();
    let verts = synthesis::consistency_vertices(&inst.data, &inst.dist, &sv).unwrap();
    let thm2 = synthesis::synthesize_thm2(&verts, n, m, &inst.s, &inst.dist, &opts, &sv).unwrap();
    let vertices: Vec<DMatrix<f64>> = verts
        .vertices()
        .iter()
        .map(|v| robinv::linalg::unvec(v, n, n + m))
        .collect();
    let per_vertex = common_box_gain(&vertices, n, m, delta);
    EquivalenceCase {
        n,
        t,
        delta,
        thm1,
        thm2,
        per_vertex,
        vertices,
        data: inst.data,
        s: inst.s,
        dist: inst.dist,
    }
}

/// One oracle-suite instance: random polytope `S` in `R^n` (`n <= 3`), random
/// disturbance polytope and closed loop `A + B K`. Returns the LP verdict and
/// the vertex-pair verdict.
pub fn oracle_case(index: u64) -> (bool, bool) {
    let sv = solver();
    let mut r = rng(0x0AC1E + index);
    let n = 1 + (index % 3) as usize;
    let m = r.gen_range(1..=2);
    let extra = r.gen_range(0..3);
    let s = random_polytope(&mut r, n, extra);
    let dist = DisturbanceSet::new(
        random_polytope(&mut r, n, 1).a().clone(),
        r.gen_range(0.0..0.3),
    )
    .unwrap();
    let scale = r.gen_range(0.2..1.0);
    let a = uniform(&mut r, n, n, -scale, scale);
    let b = uniform(&mut r, n, m, -0.5, 0.5);
    let k = uniform(&mut r, m, n, -0.5, 0.5);
    let tol = 1e-7;
    let exact = verify::check_invariance_exact(&a, &b, &k, &s, &dist, &sv, tol)
        .unwrap()
        .invariant;
    let oracle =
        verify::brute_force_invariance_oracle(&(&a + &b * &k), &s, &dist, &sv, tol).unwrap();
    (exact, oracle)
}

/// Soundness of a feasible result with known models: every certificate
/// re-checks, every listed model admits the gain, and vertex-disturbance
/// trajectories from every vertex of `S` stay inside for `steps` steps.
pub fn sound(
    result: &robinv::synthesis::SynthesisResult,
    models: &[DMatrix<f64>],
    s: &HPolyhedron,
    dist: &DisturbanceSet,
    steps: usize,
) -> bool {
    let sv = solver();
    let k = result.gain.as_ref().expect("feasible results carry a gain");
    let certs_ok = result.verification.is_some_and(|v| v.passed)
        && result.certificates.iter().all(|c| c.report.passed);
    let n = s.dim();
    let m = k.nrows();
    let models_ok = verify::check_models(models, k, s, dist, &sv, 1e-7)
        .unwrap()
        .all_pass();
    let sims_ok = models.iter().all(|v| {
        let (a, b) = (v.columns(0, n).into_owned(), v.columns(n, m).into_owned());
        verify::simulate_from_vertices(&a, &b, k, dist, steps, 7, s, &sv, 1e-7)
            .unwrap()
            .iter()
            .all(|tr| tr.stays_inside())
    });
    certs_ok && models_ok && sims_ok
}

/// Rank test and recession-cone LP on one random two-sided polyhedron;
/// `deficient` forces a dependent last column.
pub fn two_sided_rank_vs_cone(seed: u64, n: usize, rows: usize, deficient: bool) -> (bool, bool) {
    let sv = solver();
    let mut r = rng(seed);
    let mut a = uniform(&mut r, rows, n, -1.0, 1.0);
    if deficient && n > 1 {
        let w = uniform_vec(&mut r, n - 1, -1.0, 1.0);
        let combo = a.columns(0, n - 1) * w;
        a.set_column(n - 1, &combo);
    }
    let lower = -uniform_vec(&mut r, rows, 0.1, 1.0);
    let upper = uniform_vec(&mut r, rows, 0.1, 1.0);
    let p = TwoSidedPolyhedron::new(a, lower, upper).unwrap();
    let general = polyhedra::is_bounded_general(&p.to_h().unwrap(), &sv).unwrap();
    (p.is_bounded(), general)
}

/// Rank conditions on the data and the disturbance matrix versus a direct
/// boundedness test of the assembled consistency set, for
/// `(n, m)` in `{(1,1), (1,2), (2,1)}`. Optionally zero inputs or a
/// rank-deficient `D̂`.
pub fn rank_vs_cone(
    seed: u64,
    shape: usize,
    t: usize,
    poor_inputs: bool,
    poor_dhat: bool,
) -> (bool, bool) {
    let sv = solver();
    let (n, m) = [(1, 1), (1, 2), (2, 1)][shape % 3];
    let mut g = rng(seed);
    let a = uniform(&mut g, n, n, -1.0, 1.0);
    let b = uniform(&mut g, n, m, -1.0, 1.0);
    let mut inputs = uniform(&mut g, m, t, -1.0, 1.0);
    if poor_inputs {
        inputs.fill(0.0);
    }
    let k = g.gen_range(1..=n + 1);
    let mut dhat = uniform(&mut g, k, n, -1.0, 1.0);
    if poor_dhat {
        if n == 1 {
            dhat.fill(0.0);
            dhat[(0, 0)] = 1.0;
        } else {
            let col = dhat.column(0).clone_owned();
            for c in 1..n {
                dhat.set_column(c, &(&col * (c as f64 + 1.0)));
            }
        }
    }
    let lower = -uniform_vec(&mut g, k, 0.5, 1.0);
    let upper = uniform_vec(&mut g, k, 0.5, 1.0);
    let idist = IntervalDisturbanceSet::new(dhat, lower, upper, 0.1).unwrap();
    // Noise-free data keeps the set nonempty.
    let w = DMatrix::zeros(n, t);
    let x0 = uniform_vec(&mut g, n, -1.0, 1.0);
    let data = dataset::simulate_experiment(&a, &b, &x0, &inputs, &w).unwrap();
    let h = dataset::consistency_rows(&data, &idist.to_disturbance_set()).unwrap();
    assert!(polyhedra::check_nonempty(&h, &sv).unwrap().is_some());
    (
        dataset::consistency_bounded(&data, &idist),
        polyhedra::is_bounded_general(&h, &sv).unwrap(),
    )
}

/// Samples near the consistency sets of a `T`-prefix and a `T+1`-prefix of
/// one experiment; returns how many landed in the longer one and how many
/// of those are missing from the shorter one (compared exactly).
pub fn nestedness_trial(seed: u64, n: usize, t: usize, points: usize) -> (usize, usize) {
    let sv = solver();
    let inst = tiny_instance(seed, n, 1, t + 1, 0.1);
    let long = dataset::consistency_rows(&inst.data, &inst.dist).unwrap();
    let short = dataset::consistency_rows(&inst.data.prefix(t).unwrap(), &inst.dist).unwrap();
    let mut g = rng(seed ^ 7);
    let mut pts = verify::hit_and_run(&short, points / 2, seed, &sv).unwrap();
    pts.extend(verify::hit_and_run(&long, points - points / 2, seed, &sv).unwrap());
    let (mut inside, mut violations) = (0, 0);
    for p in pts.iter_mut() {
        // Jitter so some points land outside either set.
        *p += DVector::from_fn(p.len(), |_, _| 0.01 * g.sample::<f64, _>(StandardNormal));
        if long.contains(p, 0.0).unwrap() {
            inside += 1;
            if !short.contains(p, 0.0).unwrap() {
                violations += 1;
            }
        }
    }
    (inside, violations)
}
