//! Checks on a fixed gain: one-step containment, containment for every
//! model consistent with the data, closed-loop simulation, and a vertex
//! oracle for small instances.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use serde::{Deserialize, Serialize};

use crate::dataset::{self, ConsistencySet, DisturbanceSet};
use crate::error::{Error, Result};
use crate::farkas::{self, CertificateReport, ContainmentProblem, FarkasCertificate};
use crate::io::{LoadedProblem, StoredResult};
use crate::linalg;
use crate::lp::LpSolver;
use crate::polyhedra::{self, HPolyhedron, VPolytope};
use crate::synthesis::{self, Formulation, Status};

/// Verdict of a one-step containment check `F S ⊕ D ⊆ S`.
#[derive(Debug, Clone)]
pub struct InvarianceCheck {
    pub invariant: bool,
    pub certificate: Option<FarkasCertificate>,
    pub report: Option<CertificateReport>,
}

fn closed_loop_problem(
    f: &DMatrix<f64>,
    s: &HPolyhedron,
    dist: &DisturbanceSet,
) -> Result<ContainmentProblem> {
    let n = s.dim();
    if f.shape() != (n, n) || dist.dim() != n {
        return Err(Error::dim(
            "closed-loop matrix, S and D must share the state dimension",
        ));
    }
    let (sa, sb) = (s.a(), s.b());
    let d = dist.matrix();
    let (ns, nd) = (sa.nrows(), d.nrows());
    let mut inner = DMatrix::zeros(ns + nd, 2 * n);
    inner.view_mut((0, 0), (ns, n)).copy_from(sa);
    inner.view_mut((ns, n), (nd, n)).copy_from(d);
    let c = DVector::from_iterator(
        ns + nd,
        sb.iter()
            .cloned()
            .chain(std::iter::repeat_n(dist.delta(), nd)),
    );
    let mut outer = DMatrix::zeros(ns, 2 * n);
    outer.columns_mut(0, n).copy_from(&(sa * f));
    outer.columns_mut(n, n).copy_from(sa);
    ContainmentProblem::new(inner, c, outer, sb.clone())
}

/// `F x + d ∈ S` for all `x ∈ S`, `d ∈ D`, decided by the containment LP.
/// A returned certificate has already been re-verified at `tol`.
pub fn check_closed_loop(
    f: &DMatrix<f64>,
    s: &HPolyhedron,
    dist: &DisturbanceSet,
    solver: &dyn LpSolver,
    tol: f64,
) -> Result<InvarianceCheck> {
    let prob = closed_loop_problem(f, s, dist)?;
    let cert = farkas::decide_containment(&prob, solver)?;
    Ok(match cert {
        None => InvarianceCheck {
            invariant: false,
            certificate: None,
            report: None,
        },
        Some(cert) => {
            let report = farkas::verify_certificate(&prob, &cert, tol)?;
            InvarianceCheck {
                invariant: report.passed,
                certificate: Some(cert),
                report: Some(report),
            }
        }
    })
}

/// [`check_closed_loop`] with `F = A + B K`.
pub fn check_invariance_exact(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k: &DMatrix<f64>,
    s: &HPolyhedron,
    dist: &DisturbanceSet,
    solver: &dyn LpSolver,
    tol: f64,
) -> Result<InvarianceCheck> {
    if b.nrows() != a.nrows() || k.shape() != (b.ncols(), a.ncols()) {
        return Err(Error::dim("A, B and K have inconsistent shapes"));
    }
    check_closed_loop(&(a + b * k), s, dist, solver, tol)
}

/// Vertex oracle: `F x + d ∈ S` for every vertex `x` of `S` and `d` of `D`.
/// Only meant for small state dimensions.
pub fn brute_force_invariance_oracle(
    f: &DMatrix<f64>,
    s: &HPolyhedron,
    dist: &DisturbanceSet,
    solver: &dyn LpSolver,
    tol: f64,
) -> Result<bool> {
    let n = s.dim();
    if n > 3 {
        return Err(Error::InvalidArgument(format!(
            "vertex oracle limited to n <= 3, got {n}"
        )));
    }
    if f.shape() != (n, n) || dist.dim() != n {
        return Err(Error::dim(
            "closed-loop matrix, S and D must share the state dimension",
        ));
    }
    let xs = polyhedra::enumerate_vertices(s, solver)?;
    let ds = polyhedra::enumerate_vertices(&dist.polyhedron(), solver)?;
    Ok(worst_pair(f, s, &xs, &ds).0 <= tol)
}

/// Largest `max_i (S_i (F x + d) - b_i)` over vertex pairs, with the pair.
fn worst_pair(
    f: &DMatrix<f64>,
    s: &HPolyhedron,
    xs: &VPolytope,
    ds: &VPolytope,
) -> (f64, usize, usize) {
    let mut worst = (f64::NEG_INFINITY, 0, 0);
    for (i, x) in xs.vertices().iter().enumerate() {
        let fx = f * x;
        for (j, d) in ds.vertices().iter().enumerate() {
            let v = s.max_violation(&(&fx + d));
            if v > worst.0 {
                worst = (v, i, j);
            }
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSelection {
    /// Every vertex of the consistency set (must be bounded).
    Vertices,
    /// `count` hit-and-run samples over the H-representation.
    Samples { count: usize, seed: u64 },
}

/// The worst model found, with the vertex of `S` and of `D` attaining the violation.
#[derive(Debug, Clone)]
pub struct WorstCase {
    pub model: DMatrix<f64>,
    pub state_vertex: DVector<f64>,
    pub disturbance_vertex: DVector<f64>,
    pub violation: f64,
}

#[derive(Debug, Clone)]
pub struct ConsistentModelsReport {
    pub models_checked: usize,
    pub violations: usize,
    pub worst: Option<WorstCase>,
}

impl ConsistentModelsReport {
    pub fn all_pass(&self) -> bool {
        self.violations == 0
    }
}

/// Containment for every model `V = [A B]` in a set given by its vertices.
pub fn check_models(
    models: &[DMatrix<f64>],
    k: &DMatrix<f64>,
    s: &HPolyhedron,
    dist: &DisturbanceSet,
    solver: &dyn LpSolver,
    tol: f64,
) -> Result<ConsistentModelsReport> {
    let n = s.dim();
    let m = k.nrows();
    if k.ncols() != n {
        return Err(Error::dim("K must be m x n"));
    }
    let verdicts: Vec<Result<(bool, DMatrix<f64>)>> = models
        .par_iter()
        .map(|v| {
            if v.shape() != (n, n + m) {
                return Err(Error::dim("models must be n x (n+m)"));
            }
            let f = v.columns(0, n) + v.columns(n, m) * k;
            Ok((check_closed_loop(&f, s, dist, solver, tol)?.invariant, f))
        })
        .collect();
    let mut failing = Vec::new();
    for (idx, r) in verdicts.into_iter().enumerate() {
        let (ok, f) = r?;
        if !ok {
            failing.push((idx, f));
        }
    }
    let mut worst = None;
    if !failing.is_empty() {
        let xs = polyhedra::enumerate_vertices(s, solver)?;
        let ds = polyhedra::enumerate_vertices(&dist.polyhedron(), solver)?;
        let mut best: Option<WorstCase> = None;
        for (idx, f) in &failing {
            let (v, i, j) = worst_pair(f, s, &xs, &ds);
            if best.as_ref().is_none_or(|w| v > w.violation) {
                best = Some(WorstCase {
                    model: models[*idx].clone(),
                    state_vertex: xs.vertices()[i].clone(),
                    disturbance_vertex: ds.vertices()[j].clone(),
                    violation: v,
                });
            }
        }
        worst = best;
    }
    Ok(ConsistentModelsReport {
        models_checked: models.len(),
        violations: failing.len(),
        worst,
    })
}

/// Containment for every model consistent with the data (vertex mode) or
/// for a random sample of them.
pub fn check_invariance_consistent_models(
    k: &DMatrix<f64>,
    vt: &ConsistencySet,
    s: &HPolyhedron,
    dist: &DisturbanceSet,
    selection: ModelSelection,
    solver: &dyn LpSolver,
    tol: f64,
) -> Result<ConsistentModelsReport> {
    let (n, m) = (vt.n(), vt.m());
    let h = vt.polyhedron();
    let points = match selection {
        ModelSelection::Vertices => {
            if !polyhedra::is_bounded_general(h, solver)? {
                return Err(Error::Unbounded(
                    "vertex mode needs a bounded consistency set".into(),
                ));
            }
            polyhedra::enumerate_vertices(h, solver)?
                .vertices()
                .to_vec()
        }
        ModelSelection::Samples { count, seed } => hit_and_run(h, count, seed, solver)?,
    };
    let models: Vec<DMatrix<f64>> = points.iter().map(|v| linalg::unvec(v, n, n + m)).collect();
    check_models(&models, k, s, dist, solver, tol)
}

/// Hit-and-run samples from `{z : G z <= h}`, started at the Chebyshev center.
/// Directions that leave the set unbounded are redrawn; a flat set yields
/// repeated copies of its center.
pub fn hit_and_run(
    p: &HPolyhedron,
    count: usize,
    seed: u64,
    solver: &dyn LpSolver,
) -> Result<Vec<DVector<f64>>> {
    let (mut z, radius) = polyhedra::chebyshev_center(p, solver)?
        .ok_or_else(|| Error::Empty("cannot sample an empty set".into()))?;
    if radius <= 0.0 {
        return Ok(vec![z; count]);
    }
    let dim = p.dim();
    let thin = 5 * dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (g, h) = (p.a(), p.b());
    let mut out = Vec::with_capacity(count);
    let mut steps = 0usize;
    while out.len() < count {
        let dir = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = dir.norm();
        if norm == 0.0 {
            continue;
        }
        let dir = dir / norm;
        let gd = g * &dir;
        let slack = h - g * &z;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..gd.len() {
            let s = slack[i].max(0.0);
            if gd[i] > 0.0 {
                hi = hi.min(s / gd[i]);
            } else if gd[i] < 0.0 {
                lo = lo.max(s / gd[i]);
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            continue;
        }
        let step = if hi > lo { rng.gen_range(lo..=hi) } else { 0.0 };
        z += dir * step;
        steps += 1;
        if steps.is_multiple_of(thin) {
            out.push(z.clone());
        }
    }
    Ok(out)
}

/// How the disturbance is chosen at each step.
pub enum DisturbancePolicy<'a> {
    /// A vertex of `D`, uniformly at random.
    VertexRandom {
        seed: u64,
    },
    Zero,
    /// `f(step, state)`.
    Custom(Box<dyn FnMut(usize, &DVector<f64>) -> DVector<f64> + 'a>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub disturbances: Vec<DVector<f64>>,
    pub contained: Vec<bool>,
    pub first_exit_step: Option<usize>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.disturbances.len()
    }

    pub fn stays_inside(&self) -> bool {
        self.first_exit_step.is_none()
    }
}

fn run(
    f: &DMatrix<f64>,
    s: &HPolyhedron,
    x0: &DVector<f64>,
    steps: usize,
    tol: f64,
    mut next: impl FnMut(usize, &DVector<f64>) -> Result<DVector<f64>>,
) -> Result<Trajectory> {
    let n = x0.len();
    let mut states = Vec::with_capacity(steps + 1);
    let mut disturbances = Vec::with_capacity(steps);
    let mut contained = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    for k in 0..=steps {
        contained.push(s.max_violation(&x) <= tol);
        if k == steps {
            states.push(x);
            break;
        }
        let d = next(k, &x)?;
        if d.len() != n {
            return Err(Error::dim(format!(
                "disturbance at step {k} has length {}",
                d.len()
            )));
        }
        let x_next = f * &x + &d;
        states.push(x);
        disturbances.push(d);
        x = x_next;
    }
    let first_exit_step = contained.iter().position(|c| !c);
    Ok(Trajectory {
        states,
        disturbances,
        contained,
        first_exit_step,
    })
}

/// `x+ = (A + B K) x + d` for `steps` steps; containment in `S` is flagged
/// with absolute tolerance `tol`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_closed_loop(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k: &DMatrix<f64>,
    x0: &DVector<f64>,
    dist: &DisturbanceSet,
    steps: usize,
    policy: DisturbancePolicy<'_>,
    s: &HPolyhedron,
    solver: &dyn LpSolver,
    tol: f64,
) -> Result<Trajectory> {
    let n = a.nrows();
    if x0.len() != n || s.dim() != n || dist.dim() != n || k.shape() != (b.ncols(), n) {
        return Err(Error::dim("simulation inputs have inconsistent shapes"));
    }
    if s.max_violation(x0) > tol {
        log::warn!(
            "initial state lies outside S (violation {:.3e})",
            s.max_violation(x0)
        );
    }
    let f = a + b * k;
    match policy {
        DisturbancePolicy::Zero => run(&f, s, x0, steps, tol, |_, _| Ok(DVector::zeros(n))),
        DisturbancePolicy::VertexRandom { seed } => {
            let dp = dist.polyhedron();
            if !polyhedra::is_bounded_general(&dp, solver)? {
                return Err(Error::Unbounded(
                    "vertex disturbances need a bounded D".into(),
                ));
            }
            let verts = polyhedra::enumerate_vertices(&dp, solver)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            run(&f, s, x0, steps, tol, |_, _| {
                Ok(verts.vertices().choose(&mut rng).expect("nonempty").clone())
            })
        }
        DisturbancePolicy::Custom(mut cb) => run(&f, s, x0, steps, tol, |k, x| Ok(cb(k, x))),
    }
}

/// Recompute a trajectory from its initial state and stored disturbances.
pub fn replay(
    f: &DMatrix<f64>,
    s: &HPolyhedron,
    x0: &DVector<f64>,
    disturbances: &[DVector<f64>],
    tol: f64,
) -> Result<Trajectory> {
    run(f, s, x0, disturbances.len(), tol, |k, _| {
        Ok(disturbances[k].clone())
    })
}

/// Simulations from every vertex of `S`, one seed per vertex derived from `seed`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_from_vertices(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k: &DMatrix<f64>,
    dist: &DisturbanceSet,
    steps: usize,
    seed: u64,
    s: &HPolyhedron,
    solver: &dyn LpSolver,
    tol: f64,
) -> Result<Vec<Trajectory>> {
    let verts = polyhedra::enumerate_vertices(s, solver)?;
    verts
        .vertices()
        .par_iter()
        .enumerate()
        .map(|(i, x0)| {
            let policy = DisturbancePolicy::VertexRandom {
                seed: seed.wrapping_add(i as u64),
            };
            simulate_closed_loop(a, b, k, x0, dist, steps, policy, s, solver, tol)
        })
        .collect()
}

/// Direct evaluation of a model against the data: largest violation of
/// `D (x1_i - V w_i) <= δ 1`.
pub fn consistency_violation(
    v: &DMatrix<f64>,
    data: &dataset::ExperimentData,
    dist: &DisturbanceSet,
) -> f64 {
    let w = dataset::assemble_w0(data);
    let resid = data.x1() - v * w;
    let dr = dist.matrix() * resid;
    dr.max() - dist.delta()
}

/// Outcome of re-checking a stored result against its problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub formulation: Formulation,
    pub claimed_status: Status,
    pub delta: f64,
    pub certificates_checked: usize,
    pub certificate_failures: usize,
    /// Vertices that no stored certificate accounts for.
    pub uncovered_vertices: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst: Option<CertificateReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_invariance: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models_checked: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_violations: Option<usize>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn covered(vertices: &VPolytope, stored: &[&[f64]], tol: f64) -> usize {
    vertices
        .vertices()
        .iter()
        .filter(|v| {
            !stored.iter().any(|s| {
                s.len() == v.len()
                    && s.iter()
                        .zip(v.iter())
                        .all(|(a, b)| (a - b).abs() <= tol * (1.0 + b.abs()))
            })
        })
        .count()
}

/// Re-verifies every stored certificate against containment problems rebuilt
/// from the problem files, then runs an independent invariance check on the
/// stored gain (exact for the model-based formulation, over sampled or
/// enumerated consistent models for the data-based ones).
pub fn verify_stored(
    problem: &LoadedProblem,
    stored: &StoredResult,
    model_samples: usize,
    seed: u64,
    solver: &dyn LpSolver,
) -> Result<VerificationReport> {
    let rec = &stored.record;
    let tol = problem.spec.options.tolerances;
    let s = &problem.state_set;
    let dist = problem.disturbance.with_delta(rec.delta)?;
    let mut report = VerificationReport {
        formulation: rec.formulation,
        claimed_status: rec.status,
        delta: rec.delta,
        certificates_checked: 0,
        certificate_failures: 0,
        uncovered_vertices: 0,
        worst: None,
        exact_invariance: None,
        models_checked: None,
        model_violations: None,
        passed: false,
        notes: Vec::new(),
    };
    if rec.formulation != problem.spec.formulation {
        report.notes.push(format!(
            "result was produced by the {:?} formulation, problem file asks for {:?}",
            rec.formulation, problem.spec.formulation
        ));
    }
    if (rec.delta - problem.spec.delta).abs() > 0.0 {
        report.notes.push(format!(
            "checked at the stored delta {} (problem file: {})",
            rec.delta, problem.spec.delta
        ));
    }
    let k = match (&stored.gain, rec.status) {
        (Some(k), Status::Feasible) => k.clone(),
        _ => {
            report.notes.push("no feasible gain stored".into());
            return Ok(report);
        }
    };
    let mut worst: Option<CertificateReport> = None;
    let mut tally = |r: CertificateReport, report: &mut VerificationReport| {
        report.certificates_checked += 1;
        if !r.passed {
            report.certificate_failures += 1;
        }
        worst = Some(worst.map_or(r, |w| w.merge(&r)));
    };

    match rec.formulation {
        Formulation::Model => {
            let (a, b) = problem.model.as_ref().ok_or_else(|| {
                Error::InvalidArgument("model-based result needs [model] a and b".into())
            })?;
            let prob = synthesis::model_problem(a, b, &k, s, &dist)?;
            for e in &stored.multipliers {
                let r = farkas::verify_certificate(
                    &prob,
                    &FarkasCertificate { e: e.clone() },
                    tol.certificate,
                )?;
                tally(r, &mut report);
            }
            if stored.multipliers.is_empty() {
                report.uncovered_vertices = 1;
            }
            report.exact_invariance = Some(
                check_invariance_exact(a, b, &k, s, &dist, solver, tol.certificate)?.invariant,
            );
        }
        Formulation::Thm1 => {
            let data = problem.data.as_ref().ok_or_else(|| {
                Error::InvalidArgument("data-based result needs a dataset".into())
            })?;
            let full = dataset::consistency_rows(data, &dist)?;
            let rows = match &stored.row_map {
                Some(map) => {
                    if map.iter().any(|&r| r >= full.num_rows()) {
                        return Err(Error::InvalidArgument(
                            "row map points past the consistency rows".into(),
                        ));
                    }
                    full.select_rows(map)?
                }
                None => full.clone(),
            };
            for (c, e) in rec.certificates.iter().zip(&stored.multipliers) {
                let x = DVector::from_column_slice(&c.vertex);
                let prob = synthesis::data_vertex_problem(&x, &k, s, &dist, &rows)?;
                let r = farkas::verify_certificate(
                    &prob,
                    &FarkasCertificate { e: e.clone() },
                    tol.certificate,
                )?;
                tally(r, &mut report);
            }
            let verts = polyhedra::enumerate_vertices(s, solver)?;
            let stored_v: Vec<&[f64]> = rec
                .certificates
                .iter()
                .map(|c| c.vertex.as_slice())
                .collect();
            report.uncovered_vertices = covered(&verts, &stored_v, tol.vertex_dedup);
            let vt = dataset::build_consistency_set(data, &dist, false, solver, tol.redundancy)?;
            let models = check_invariance_consistent_models(
                &k,
                &vt,
                s,
                &dist,
                ModelSelection::Samples {
                    count: model_samples,
                    seed,
                },
                solver,
                tol.certificate,
            )?;
            report.models_checked = Some(models.models_checked);
            report.model_violations = Some(models.violations);
        }
        Formulation::Thm2 => {
            let data = problem.data.as_ref().ok_or_else(|| {
                Error::InvalidArgument("data-based result needs a dataset".into())
            })?;
            let (n, m) = (data.n(), data.m());
            let mut models = Vec::new();
            for (c, e) in rec.certificates.iter().zip(&stored.multipliers) {
                let v = linalg::unvec(&DVector::from_column_slice(&c.vertex), n, n + m);
                let (aj, bj) = (v.columns(0, n).into_owned(), v.columns(n, m).into_owned());
                let prob = synthesis::model_problem(&aj, &bj, &k, s, &dist)?;
                let r = farkas::verify_certificate(
                    &prob,
                    &FarkasCertificate { e: e.clone() },
                    tol.certificate,
                )?;
                tally(r, &mut report);
                models.push(v);
            }
            let verts = synthesis::consistency_vertices(data, &dist, solver)?;
            let stored_v: Vec<&[f64]> = rec
                .certificates
                .iter()
                .map(|c| c.vertex.as_slice())
                .collect();
            report.uncovered_vertices = covered(&verts, &stored_v, tol.vertex_dedup);
            let checked = check_models(&models, &k, s, &dist, solver, tol.certificate)?;
            report.models_checked = Some(checked.models_checked);
            report.model_violations = Some(checked.violations);
        }
    }
    if let (Some(u), Some(eu)) = (&problem.input_set, &stored.input_multipliers) {
        let prob = synthesis::input_problem(u, &k, s)?;
        let r = farkas::verify_certificate(
            &prob,
            &FarkasCertificate { e: eu.clone() },
            tol.certificate,
        )?;
        tally(r, &mut report);
    } else if problem.input_set.is_some() {
        report
            .notes
            .push("input set given but no input certificate stored".into());
        report.certificate_failures += 1;
    }
    report.worst = worst;
    report.passed = report.certificate_failures == 0
        && report.uncovered_vertices == 0
        && report.exact_invariance != Some(false)
        && report.model_violations.is_none_or(|v| v == 0);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::MinilpSolver;

    fn solver() -> MinilpSolver {
        MinilpSolver::default()
    }

    #[test]
    fn zero_system_is_invariant() {
        let z = DMatrix::zeros(2, 2);
        let s = HPolyhedron::unit_box(2);
        let dist = DisturbanceSet::boxed(2, 0.0).unwrap();
        let r = check_invariance_exact(
            &z,
            &DMatrix::zeros(2, 1),
            &DMatrix::zeros(1, 2),
            &s,
            &dist,
            &solver(),
            1e-6,
        )
        .unwrap();
        assert!(r.invariant && r.report.unwrap().passed);
        assert!(brute_force_invariance_oracle(&z, &s, &dist, &solver(), 1e-9).unwrap());
    }

    #[test]
    fn scalar_hand_example() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let k = DMatrix::from_element(1, 1, -0.5);
        let s = HPolyhedron::unit_box(1);
        let dist = DisturbanceSet::boxed(1, 0.4).unwrap();
        assert!(
            check_invariance_exact(&one, &one, &k, &s, &dist, &solver(), 1e-6)
                .unwrap()
                .invariant
        );
        let dist = DisturbanceSet::boxed(1, 0.6).unwrap();
        assert!(
            !check_invariance_exact(&one, &one, &k, &s, &dist, &solver(), 1e-6)
                .unwrap()
                .invariant
        );
    }

    #[test]
    fn half_identity_oracle() {
        let f = DMatrix::identity(2, 2) * 0.5;
        let s = HPolyhedron::unit_box(2);
        assert!(brute_force_invariance_oracle(
            &f,
            &s,
            &DisturbanceSet::boxed(2, 0.4).unwrap(),
            &solver(),
            1e-9
        )
        .unwrap());
        assert!(!brute_force_invariance_oracle(
            &f,
            &s,
            &DisturbanceSet::boxed(2, 0.6).unwrap(),
            &solver(),
            1e-9
        )
        .unwrap());
    }

    #[test]
    fn zero_policy_stays_at_origin() {
        let a = DMatrix::identity(2, 2) * 0.9;
        let b = DMatrix::zeros(2, 1);
        let k = DMatrix::zeros(1, 2);
        let s = HPolyhedron::unit_box(2);
        let dist = DisturbanceSet::boxed(2, 0.1).unwrap();
        let tr = simulate_closed_loop(
            &a,
            &b,
            &k,
            &DVector::zeros(2),
            &dist,
            20,
            DisturbancePolicy::Zero,
            &s,
            &solver(),
            1e-7,
        )
        .unwrap();
        assert!(tr.states.iter().all(|x| x.amax() == 0.0));
        assert!(tr.stays_inside());
        assert_eq!(
            (tr.states.len(), tr.disturbances.len(), tr.contained.len()),
            (21, 20, 21)
        );
    }

    #[test]
    fn replay_is_bit_exact() {
        let (a, b) = crate::platoon::system();
        let k = DMatrix::from_row_slice(2, 3, &[1.0, -3.0, 0.5, -2.0, 0.4, -4.0]);
        let s = crate::platoon::state_set();
        let dist = crate::platoon::disturbance_set(0.05).unwrap();
        let x0 = DVector::from_column_slice(&[0.2, 0.5, -0.5]);
        let tr = simulate_closed_loop(
            &a,
            &b,
            &k,
            &x0,
            &dist,
            200,
            DisturbancePolicy::VertexRandom { seed: 3 },
            &s,
            &solver(),
            1e-7,
        )
        .unwrap();
        let again = replay(&(&a + &b * &k), &s, &x0, &tr.disturbances, 1e-7).unwrap();
        assert_eq!(tr, again);
    }

    #[test]
    fn open_loop_platoon_leaves() {
        let (a, b) = crate::platoon::system();
        let s = crate::platoon::state_set();
        let dist = crate::platoon::disturbance_set(0.0625).unwrap();
        let x0 = polyhedra::enumerate_vertices(&s, &solver())
            .unwrap()
            .vertices()[0]
            .clone();
        let tr = simulate_closed_loop(
            &a,
            &b,
            &DMatrix::zeros(2, 3),
            &x0,
            &dist,
            1000,
            DisturbancePolicy::VertexRandom { seed: 0 },
            &s,
            &solver(),
            1e-7,
        )
        .unwrap();
        assert!(tr.first_exit_step.is_some());
    }

    #[test]
    fn custom_policy_sees_state() {
        let a = DMatrix::identity(1, 1);
        let b = DMatrix::zeros(1, 1);
        let k = DMatrix::zeros(1, 1);
        let s = HPolyhedron::unit_box(1);
        let dist = DisturbanceSet::boxed(1, 0.3).unwrap();
        let push = DisturbancePolicy::Custom(Box::new(|_, x: &DVector<f64>| {
            DVector::from_element(1, if x[0] >= 0.0 { 0.3 } else { -0.3 })
        }));
        let tr = simulate_closed_loop(
            &a,
            &b,
            &k,
            &DVector::zeros(1),
            &dist,
            10,
            push,
            &s,
            &solver(),
            1e-7,
        )
        .unwrap();
        assert_eq!(tr.first_exit_step, Some(4));
    }

    #[test]
    fn hit_and_run_stays_inside() {
        let p = HPolyhedron::from_box(&[-1.0, 0.0, 2.0], &[1.0, 0.5, 3.0]).unwrap();
        let pts = hit_and_run(&p, 200, 7, &solver()).unwrap();
        assert_eq!(pts.len(), 200);
        assert!(pts.iter().all(|z| p.contains(z, 1e-9).unwrap()));
        let spread = pts.iter().map(|z| z[0]).fold(f64::NEG_INFINITY, f64::max)
            - pts.iter().map(|z| z[0]).fold(f64::INFINITY, f64::min);
        assert!(spread > 1.0);
    }
}
