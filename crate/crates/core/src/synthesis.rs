//! Gain synthesis as a single linear program.
//!
//! Three formulations share one assembly routine. Each is a collection of
//! Farkas blocks `E >= 0, L(K) = E A, E c <= 1` whose left-hand side `L` is
//! affine in the gain `K`:
//!
//! * model-based: one block with `L = [S(A+BK)  S]` over `blockdiag(S, D)`;
//! * data-based, per vertex `x^j` of the state set: `L = [S  ([I;K]x^j)^T ⊗ S]`
//!   over `blockdiag(D, -(W0^T ⊗ D))` (or the reduced consistency rows);
//! * data-based, per vertex `V^j = [A_j B_j]` of the consistency set: the
//!   model-based block with `(A_j, B_j)`.
//!
//! `δ` multiplies `E` in the right-hand side, so it is never a decision
//! variable; the largest feasible `δ` is found by bisection.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{self, ConsistencySet, DisturbanceSet, ExperimentData};
use crate::error::{Error, Result};
use crate::farkas::{self, CertificateReport, ContainmentProblem};
use crate::linalg;
use crate::lp::{LinearProgram, LpOutcome, LpSolver, VarSign};
use crate::polyhedra::{self, HPolyhedron, VPolytope};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Known `(A, B)`.
    Model,
    /// Data-based, one multiplier per vertex of the state set.
    Thm1,
    /// Data-based, one multiplier per vertex of the consistency set.
    Thm2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Feasible,
    Infeasible,
    SolverFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Reduce when `T > 50`.
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisOptions {
    pub tolerances: Tolerances,
    /// Reduce the consistency rows to a minimal representation first.
    pub minimize_representation: Reduction,
    /// Maximize a common slack `t` in `E c <= (1 - t) 1` instead of pure feasibility.
    pub margin: bool,
    /// Refuse assembly above this many decision variables.
    pub max_variables: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            tolerances: Tolerances::default(),
            minimize_representation: Reduction::Auto,
            margin: false,
            max_variables: 10_000_000,
        }
    }
}

impl SynthesisOptions {
    fn reduce_for(&self, t: usize) -> bool {
        match self.minimize_representation {
            Reduction::Auto => t > 50,
            Reduction::On => true,
            Reduction::Off => false,
        }
    }
}

/// Multipliers attached to one vertex (of the state set for the data-based
/// program with state vertices, of the consistency set for the vertex-based
/// one; the model-based program has a single entry with an empty vertex).
#[derive(Debug, Clone)]
pub struct VertexCertificate {
    pub index: usize,
    pub vertex: DVector<f64>,
    pub multipliers: DMatrix<f64>,
    pub report: CertificateReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub solver: String,
    pub num_vars: usize,
    pub num_eq: usize,
    pub num_le: usize,
    pub nonzeros: usize,
    pub num_vertices: usize,
    /// Consistency rows before and after reduction (data-based, state vertices only).
    pub consistency_rows_full: Option<usize>,
    pub consistency_rows_used: Option<usize>,
    pub reduce_seconds: f64,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub formulation: Formulation,
    pub status: Status,
    pub delta: f64,
    pub gain: Option<DMatrix<f64>>,
    pub certificates: Vec<VertexCertificate>,
    pub input_certificate: Option<VertexCertificate>,
    /// Worst case over all certificates, re-checked by direct matrix arithmetic.
    pub verification: Option<CertificateReport>,
    pub margin: Option<f64>,
    /// Consistency-row indices used as certificate columns (after the
    /// disturbance columns) when the representation was reduced.
    pub row_map: Option<Vec<usize>>,
    pub diagnostics: Diagnostics,
    pub message: Option<String>,
}

impl SynthesisResult {
    pub fn is_feasible(&self) -> bool {
        self.status == Status::Feasible
    }

    fn empty(
        formulation: Formulation,
        delta: f64,
        status: Status,
        diagnostics: Diagnostics,
    ) -> Self {
        SynthesisResult {
            formulation,
            status,
            delta,
            gain: None,
            certificates: Vec::new(),
            input_certificate: None,
            verification: None,
            margin: None,
            row_map: None,
            diagnostics,
            message: None,
        }
    }
}

/// `E >= 0, L(K) = E A, E c <= d` with
/// `L(K)[r, col] = constant[r, col] + sum(coeff * K_var)`.
struct FarkasBlock {
    inner: DMatrix<f64>,
    inner_rhs: DVector<f64>,
    constant: DMatrix<f64>,
    outer_rhs: DVector<f64>,
    /// Indexed by `col * q + r`; entries are `(index into vec(K), coeff)`.
    gain_terms: Vec<Vec<(usize, f64)>>,
}

impl FarkasBlock {
    fn q(&self) -> usize {
        self.constant.nrows()
    }

    fn p(&self) -> usize {
        self.inner.nrows()
    }

    fn num_vars(&self) -> usize {
        self.p() * self.q()
    }
}

fn sparse_columns(a: &DMatrix<f64>) -> Vec<Vec<(usize, f64)>> {
    (0..a.ncols())
        .map(|c| {
            a.column(c)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(k, v)| (k, *v))
                .collect()
        })
        .collect()
}

/// Appends the block's multipliers and constraints; returns the offset of `vec(E)`.
fn add_block(
    lp: &mut LinearProgram,
    block: &FarkasBlock,
    k_offset: usize,
    margin: Option<usize>,
) -> usize {
    let (p, q) = (block.p(), block.q());
    let e_off = lp.add_vars(p * q, VarSign::NonNegative);
    let evar = |r: usize, k: usize| e_off + k * q + r;
    let cols = sparse_columns(&block.inner);
    for (col, entries) in cols.iter().enumerate() {
        for r in 0..q {
            let mut row: Vec<(usize, f64)> =
                entries.iter().map(|&(k, v)| (evar(r, k), v)).collect();
            for &(kv, coeff) in &block.gain_terms[col * q + r] {
                row.push((k_offset + kv, -coeff));
            }
            lp.add_eq(row, block.constant[(r, col)]);
        }
    }
    for r in 0..q {
        let mut row: Vec<(usize, f64)> = (0..p)
            .filter(|&k| block.inner_rhs[k] != 0.0)
            .map(|k| (evar(r, k), block.inner_rhs[k]))
            .collect();
        if let Some(t) = margin {
            row.push((t, block.outer_rhs[r]));
        }
        lp.add_le(row, block.outer_rhs[r]);
    }
    e_off
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).cloned())
}

/// vec(K) index of `K[i, j]` for an `m x n` gain.
fn kvar(m: usize, i: usize, j: usize) -> usize {
    j * m + i
}

/// Block for `[S(A+BK)  S] = E blockdiag(S, D)`, `E (1; δ1) <= 1`.
fn model_block(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    s: &DMatrix<f64>,
    dist: &DisturbanceSet,
) -> FarkasBlock {
    let (ns, n) = s.shape();
    let m = b.ncols();
    let sa = s * a;
    let sb = s * b;
    let mut constant = DMatrix::zeros(ns, 2 * n);
    constant.columns_mut(0, n).copy_from(&sa);
    constant.columns_mut(n, n).copy_from(s);
    let mut gain_terms = vec![Vec::new(); 2 * n * ns];
    for col in 0..n {
        for r in 0..ns {
            gain_terms[col * ns + r] = (0..m)
                .filter(|&i| sb[(r, i)] != 0.0)
                .map(|i| (kvar(m, i, col), sb[(r, i)]))
                .collect();
        }
    }
    FarkasBlock {
        inner: block_diag(s, dist.matrix()),
        inner_rhs: stack(
            &ones(ns),
            &DVector::from_element(dist.num_rows(), dist.delta()),
        ),
        constant,
        outer_rhs: ones(ns),
        gain_terms,
    }
}

/// Block for `U K = E_u S`, `E_u 1 <= 1`.
fn input_block(u: &DMatrix<f64>, s: &DMatrix<f64>) -> FarkasBlock {
    let (nu, m) = u.shape();
    let (ns, n) = s.shape();
    let mut gain_terms = vec![Vec::new(); n * nu];
    for col in 0..n {
        for r in 0..nu {
            gain_terms[col * nu + r] = (0..m)
                .filter(|&i| u[(r, i)] != 0.0)
                .map(|i| (kvar(m, i, col), u[(r, i)]))
                .collect();
        }
    }
    FarkasBlock {
        inner: s.clone(),
        inner_rhs: ones(ns),
        constant: DMatrix::zeros(nu, n),
        outer_rhs: ones(nu),
        gain_terms,
    }
}

/// Block for `[S  ([I;K]x)^T ⊗ S] = E blockdiag(D, G)`, `E (δ1; h) <= 1`,
/// where `G v <= h` describes the consistency set.
fn data_vertex_block(
    x: &DVector<f64>,
    m: usize,
    s: &DMatrix<f64>,
    dist: &DisturbanceSet,
    vt: &HPolyhedron,
) -> FarkasBlock {
    let (ns, n) = s.shape();
    let nv = n * (n + m);
    let mut constant = DMatrix::zeros(ns, n + nv);
    constant.columns_mut(0, n).copy_from(s);
    let mut gain_terms = vec![Vec::new(); (n + nv) * ns];
    for k in 0..n + m {
        for l in 0..n {
            let col = n + k * n + l;
            for r in 0..ns {
                if k < n {
                    constant[(r, col)] = x[k] * s[(r, l)];
                } else if s[(r, l)] != 0.0 {
                    gain_terms[col * ns + r] = (0..n)
                        .filter(|&c| x[c] != 0.0)
                        .map(|c| (kvar(m, k - n, c), x[c] * s[(r, l)]))
                        .collect();
                }
            }
        }
    }
    FarkasBlock {
        inner: block_diag(dist.matrix(), vt.a()),
        inner_rhs: stack(
            &DVector::from_element(dist.num_rows(), dist.delta()),
            vt.b(),
        ),
        constant,
        outer_rhs: ones(ns),
        gain_terms,
    }
}

/// `L(K)` evaluated directly, for re-verification.
fn evaluate_lhs(block: &FarkasBlock, k: &DMatrix<f64>) -> DMatrix<f64> {
    let kv = linalg::vec_of(k);
    let q = block.q();
    let mut out = block.constant.clone();
    for col in 0..out.ncols() {
        for r in 0..q {
            for &(i, c) in &block.gain_terms[col * q + r] {
                out[(r, col)] += c * kv[i];
            }
        }
    }
    out
}

/// `[S(A+BK)  S]` by plain matrix products.
pub fn model_lhs(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(s.nrows(), 2 * n);
    out.columns_mut(0, n).copy_from(&(s * (a + b * k)));
    out.columns_mut(n, n).copy_from(s);
    out
}

/// `[S  ([I;K]x)^T ⊗ S]` by an explicit Kronecker product.
pub fn data_vertex_lhs(x: &DVector<f64>, k: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.len();
    let m = k.nrows();
    let mut y = DMatrix::zeros(n + m, 1);
    y.view_mut((0, 0), (n, 1)).copy_from(x);
    y.view_mut((n, 0), (m, 1)).copy_from(&(k * x));
    let kr = linalg::kron(&y.transpose(), s);
    let mut out = DMatrix::zeros(s.nrows(), n + kr.ncols());
    out.columns_mut(0, n).copy_from(s);
    out.columns_mut(n, kr.ncols()).copy_from(&kr);
    out
}

/// Containment problem certified by the model-based multipliers for a fixed `K`.
pub fn model_problem(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k: &DMatrix<f64>,
    s: &HPolyhedron,
    dist: &DisturbanceSet,
) -> Result<ContainmentProblem> {
    let block = model_block(a, b, s.a(), dist);
    ContainmentProblem::new(
        block.inner,
        block.inner_rhs,
        model_lhs(a, b, k, s.a()),
        block.outer_rhs,
    )
}

/// Containment problem certified by the multipliers of state vertex `x`
/// for a fixed `K`, over consistency rows `vt`.
pub fn data_vertex_problem(
    x: &DVector<f64>,
    k: &DMatrix<f64>,
    s: &HPolyhedron,
    dist: &DisturbanceSet,
    vt: &HPolyhedron,
) -> Result<ContainmentProblem> {
    let block = data_vertex_block(x, k.nrows(), s.a(), dist, vt);
    ContainmentProblem::new(
        block.inner,
        block.inner_rhs,
        data_vertex_lhs(x, k, s.a()),
        block.outer_rhs,
    )
}

/// Containment problem `U K S ⊆ {U u <= 1}` certified by the input multipliers.
pub fn input_problem(
    u: &HPolyhedron,
    k: &DMatrix<f64>,
    s: &HPolyhedron,
) -> Result<ContainmentProblem> {
    ContainmentProblem::new(s.a().clone(), s.b().clone(), u.a() * k, u.b().clone())
}

struct Assembled {
    lp: LinearProgram,
    k_offset: usize,
    margin_var: Option<usize>,
    e_offsets: Vec<usize>,
    input_offset: Option<usize>,
}

fn assemble(
    blocks: &[FarkasBlock],
    input: Option<&FarkasBlock>,
    n: usize,
    m: usize,
    opts: &SynthesisOptions,
) -> Result<Assembled> {
    let vars = m * n
        + blocks.iter().map(FarkasBlock::num_vars).sum::<usize>()
        + input.map_or(0, FarkasBlock::num_vars)
        + usize::from(opts.margin);
    if vars > opts.max_variables {
        let per = blocks.first().map_or(0, |b| b.num_vars());
        return Err(Error::MemoryBudget {
            vars,
            cap: opts.max_variables,
            detail: format!(
                "{} blocks of {} multipliers each, gain {}x{}",
                blocks.len(),
                per,
                m,
                n
            ),
        });
    }
    let mut lp = LinearProgram::new(0);
    let k_offset = lp.add_vars(m * n, VarSign::Free);
    let margin_var = opts.margin.then(|| {
        let t = lp.add_vars(1, VarSign::NonNegative);
        lp.set_objective(t, -1.0);
        lp.add_le(vec![(t, 1.0)], 1.0);
        t
    });
    let e_offsets = blocks
        .iter()
        .map(|b| add_block(&mut lp, b, k_offset, margin_var))
        .collect();
    let input_offset = input.map(|b| add_block(&mut lp, b, k_offset, None));
    Ok(Assembled {
        lp,
        k_offset,
        margin_var,
        e_offsets,
        input_offset,
    })
}

fn extract_e(x: &[f64], offset: usize, q: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(q, p, |r, k| x[offset + k * q + r])
}

/// Solve the assembled program and re-verify every certificate against a
/// directly evaluated left-hand side.
#[allow(clippy::too_many_arguments)]
fn solve_blocks(
    formulation: Formulation,
    delta: f64,
    blocks: Vec<FarkasBlock>,
    vertices: Vec<DVector<f64>>,
    direct_lhs: &dyn Fn(usize, &DMatrix<f64>) -> DMatrix<f64>,
    input: Option<FarkasBlock>,
    n: usize,
    m: usize,
    opts: &SynthesisOptions,
    solver: &dyn LpSolver,
    mut diagnostics: Diagnostics,
) -> Result<SynthesisResult> {
    let t0 = Instant::now();
    let asm = assemble(&blocks, input.as_ref(), n, m, opts)?;
    diagnostics.assembly_seconds = t0.elapsed().as_secs_f64();
    diagnostics.solver = solver.name().to_string();
    diagnostics.num_vars = asm.lp.num_vars();
    diagnostics.num_eq = asm.lp.equalities().0.len();
    diagnostics.num_le = asm.lp.inequalities().0.len();
    diagnostics.nonzeros = asm.lp.num_nonzeros();
    diagnostics.num_vertices = blocks.len();

    let t1 = Instant::now();
    let outcome = solver.solve(&asm.lp);
    diagnostics.solve_seconds = t1.elapsed().as_secs_f64();
    log::debug!(
        "{:?} at delta={delta}: {} vars, {} eq, {} le, solved in {:.3}s",
        formulation,
        diagnostics.num_vars,
        diagnostics.num_eq,
        diagnostics.num_le,
        diagnostics.solve_seconds
    );

    let sol = match outcome {
        Err(e) => {
            let mut r =
                SynthesisResult::empty(formulation, delta, Status::SolverFailure, diagnostics);
            r.message = Some(e.to_string());
            return Ok(r);
        }
        Ok(LpOutcome::Infeasible { .. }) => {
            return Ok(SynthesisResult::empty(
                formulation,
                delta,
                Status::Infeasible,
                diagnostics,
            ));
        }
        Ok(LpOutcome::Unbounded) => {
            let mut r =
                SynthesisResult::empty(formulation, delta, Status::SolverFailure, diagnostics);
            r.message = Some("solver reported an unbounded program".into());
            return Ok(r);
        }
        Ok(LpOutcome::Optimal(s)) => s,
    };

    let x = &sol.x;
    let k = DMatrix::from_column_slice(m, n, &x[asm.k_offset..asm.k_offset + m * n]);
    let tol = opts.tolerances.certificate;
    let mut worst: Option<CertificateReport> = None;
    let mut certificates = Vec::with_capacity(blocks.len());
    for (j, (block, &off)) in blocks.iter().zip(&asm.e_offsets).enumerate() {
        let e = extract_e(x, off, block.q(), block.p());
        let lhs = direct_lhs(j, &k);
        let report = farkas::check_parts(
            &e,
            &block.inner,
            &block.inner_rhs,
            &lhs,
            &block.outer_rhs,
            farkas::scaled_tolerance(tol, &lhs),
        );
        worst = Some(worst.map_or(report, |w| w.merge(&report)));
        certificates.push(VertexCertificate {
            index: j,
            vertex: vertices
                .get(j)
                .cloned()
                .unwrap_or_else(|| DVector::zeros(0)),
            multipliers: e,
            report,
        });
    }
    let input_certificate = match (&input, asm.input_offset) {
        (Some(block), Some(off)) => {
            let e = extract_e(x, off, block.q(), block.p());
            let lhs = evaluate_lhs(block, &k);
            let report = farkas::check_parts(
                &e,
                &block.inner,
                &block.inner_rhs,
                &lhs,
                &block.outer_rhs,
                farkas::scaled_tolerance(tol, &lhs),
            );
            worst = Some(worst.map_or(report, |w| w.merge(&report)));
            Some(VertexCertificate {
                index: 0,
                vertex: DVector::zeros(0),
                multipliers: e,
                report,
            })
        }
        _ => None,
    };

    let passed = worst.is_none_or(|w| w.passed);
    let mut result = SynthesisResult {
        formulation,
        status: if passed {
            Status::Feasible
        } else {
            Status::SolverFailure
        },
        delta,
        gain: Some(k),
        certificates,
        input_certificate,
        verification: worst,
        margin: asm.margin_var.map(|t| x[t]),
        row_map: None,
        diagnostics,
        message: None,
    };
    if !passed {
        result.message = Some(format!(
            "solver point fails certificate re-verification (worst violation {:.3e})",
            worst.map_or(0.0, |w| w.worst())
        ));
    }
    Ok(result)
}

fn check_input_set(u: Option<&HPolyhedron>, m: usize) -> Result<Option<DMatrix<f64>>> {
    match u {
        None => Ok(None),
        Some(u) => {
            if u.dim() != m {
                return Err(Error::dim(format!(
                    "input set lives in R^{}, inputs in R^{m}",
                    u.dim()
                )));
            }
            if u.b().iter().any(|&v| (v - 1.0).abs() > 1e-12) {
                return Err(Error::InvalidArgument(
                    "input set must be written as U u <= 1".into(),
                ));
            }
            Ok(Some(u.a().clone()))
        }
    }
}

fn check_state_set(s: &HPolyhedron) -> Result<()> {
    if s.b().iter().any(|&v| (v - 1.0).abs() > 1e-12) {
        return Err(Error::InvalidArgument(
            "state set must be written as S x <= 1".into(),
        ));
    }
    Ok(())
}

/// Model-based program for known `(A, B)`.
pub fn synthesize_model_based(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    s: &HPolyhedron,
    dist: &DisturbanceSet,
    input_set: Option<&HPolyhedron>,
    opts: &SynthesisOptions,
    solver: &dyn LpSolver,
) -> Result<SynthesisResult> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || s.dim() != n || dist.dim() != n {
        return Err(Error::dim(
            "A, B, S and D must agree on the state dimension",
        ));
    }
    check_state_set(s)?;
    let m = b.ncols();
    let u = check_input_set(input_set, m)?;
    let blocks = vec![model_block(a, b, s.a(), dist)];
    let (sm, am, bm) = (s.a().clone(), a.clone(), b.clone());
    let lhs = move |_: usize, k: &DMatrix<f64>| model_lhs(&am, &bm, k, &sm);
    let input = u.map(|u| input_block(&u, s.a()));
    solve_blocks(
        Formulation::Model,
        dist.delta(),
        blocks,
        Vec::new(),
        &lhs,
        input,
        n,
        m,
        opts,
        solver,
        Diagnostics::default(),
    )
}

/// Data-based program with one multiplier block per vertex of `S`.
pub fn synthesize_thm1(
    data: &ExperimentData,
    s: &HPolyhedron,
    dist: &DisturbanceSet,
    input_set: Option<&HPolyhedron>,
    opts: &SynthesisOptions,
    solver: &dyn LpSolver,
) -> Result<SynthesisResult> {
    let n = data.n();
    if s.dim() != n || dist.dim() != n {
        return Err(Error::dim(
            "S and D must live in the state space of the data",
        ));
    }
    check_state_set(s)?;
    if !polyhedra::is_bounded_general(s, solver)? {
        return Err(Error::Unbounded(
            "the state set must be bounded for the data-based program".into(),
        ));
    }
    let t0 = Instant::now();
    let inconsistent = || {
        Error::Empty(
            "no system matrices are consistent with the data and the disturbance bound".into(),
        )
    };
    let vt = dataset::build_consistency_set(
        data,
        dist,
        opts.reduce_for(data.t()),
        solver,
        opts.tolerances.redundancy,
    )
    .map_err(|e| match e {
        Error::Empty(_) => inconsistent(),
        other => other,
    })?;
    if polyhedra::check_nonempty(vt.polyhedron(), solver)?.is_none() {
        return Err(inconsistent());
    }
    let reduce_seconds = t0.elapsed().as_secs_f64();
    let mut result = synthesize_thm1_with_set(&vt, s, dist, input_set, opts, solver)?;
    result.diagnostics.reduce_seconds = reduce_seconds;
    Ok(result)
}

/// Data-based program over a prebuilt (possibly reduced) consistency set.
/// `S` must be bounded and the consistency set nonempty.
pub fn synthesize_thm1_with_set(
    vt: &ConsistencySet,
    s: &HPolyhedron,
    dist: &DisturbanceSet,
    input_set: Option<&HPolyhedron>,
    opts: &SynthesisOptions,
    solver: &dyn LpSolver,
) -> Result<SynthesisResult> {
    let (n, m) = (vt.n(), vt.m());
    check_state_set(s)?;
    let u = check_input_set(input_set, m)?;
    let verts = polyhedra::enumerate_vertices(s, solver)?;
    let h = vt.polyhedron();
    let blocks: Vec<FarkasBlock> = verts
        .vertices()
        .iter()
        .map(|x| data_vertex_block(x, m, s.a(), dist, h))
        .collect();
    let vlist = verts.vertices().to_vec();
    let (sm, vl) = (s.a().clone(), vlist.clone());
    let lhs = move |j: usize, k: &DMatrix<f64>| data_vertex_lhs(&vl[j], k, &sm);
    let input = u.map(|u| input_block(&u, s.a()));
    let diagnostics = Diagnostics {
        consistency_rows_full: Some(vt.full_rows()),
        consistency_rows_used: Some(h.num_rows()),
        ..Default::default()
    };
    let mut result = solve_blocks(
        Formulation::Thm1,
        dist.delta(),
        blocks,
        vlist,
        &lhs,
        input,
        n,
        m,
        opts,
        solver,
        diagnostics,
    )?;
    if vt.is_minimized() {
        result.row_map = Some(vt.row_map().to_vec());
    }
    Ok(result)
}

/// Data-based program with one multiplier block per vertex `V^j` of the
/// consistency set, given in `vec` coordinates.
pub fn synthesize_thm2(
    vt_vertices: &VPolytope,
    n: usize,
    m: usize,
    s: &HPolyhedron,
    dist: &DisturbanceSet,
    opts: &SynthesisOptions,
    solver: &dyn LpSolver,
) -> Result<SynthesisResult> {
    if vt_vertices.dim() != n * (n + m) {
        return Err(Error::dim(format!(
            "consistency vertices live in R^{}, expected R^{}",
            vt_vertices.dim(),
            n * (n + m)
        )));
    }
    if s.dim() != n || dist.dim() != n {
        return Err(Error::dim("S and D must live in R^n"));
    }
    check_state_set(s)?;
    let models: Vec<DMatrix<f64>> = vt_vertices
        .vertices()
        .iter()
        .map(|v| linalg::unvec(v, n, n + m))
        .collect();
    let blocks: Vec<FarkasBlock> = models
        .iter()
        .map(|v| {
            model_block(
                &v.columns(0, n).into_owned(),
                &v.columns(n, m).into_owned(),
                s.a(),
                dist,
            )
        })
        .collect();
    let sm = s.a().clone();
    let ml = models.clone();
    let lhs = move |j: usize, k: &DMatrix<f64>| {
        let v = &ml[j];
        model_lhs(
            &v.columns(0, n).into_owned(),
            &v.columns(n, m).into_owned(),
            k,
            &sm,
        )
    };
    solve_blocks(
        Formulation::Thm2,
        dist.delta(),
        blocks,
        vt_vertices.vertices().to_vec(),
        &lhs,
        None,
        n,
        m,
        opts,
        solver,
        Diagnostics::default(),
    )
}

/// An assembled program with its variable layout. Multiplier `E^j` (shape
/// `e_shapes[j]`) is stored column-stacked from `e_offsets[j]`, `vec(K)`
/// from `k_offset`.
#[derive(Debug, Clone)]
pub struct ProgramLayout {
    pub lp: LinearProgram,
    pub k_offset: usize,
    pub e_offsets: Vec<usize>,
    pub e_shapes: Vec<(usize, usize)>,
}

/// The data-based program over consistency rows `vt` (one block per vertex
/// of `S`, no input set), assembled but not solved.
pub fn thm1_program(
    vt: &HPolyhedron,
    m: usize,
    s: &HPolyhedron,
    dist: &DisturbanceSet,
    solver: &dyn LpSolver,
) -> Result<ProgramLayout> {
    let n = s.dim();
    if vt.dim() != n * (n + m) {
        return Err(Error::dim(
            "consistency rows do not match the state and input dimensions",
        ));
    }
    check_state_set(s)?;
    let verts = polyhedra::enumerate_vertices(s, solver)?;
    let blocks: Vec<FarkasBlock> = verts
        .vertices()
        .iter()
        .map(|x| data_vertex_block(x, m, s.a(), dist, vt))
        .collect();
    let asm = assemble(&blocks, None, n, m, &SynthesisOptions::default())?;
    Ok(ProgramLayout {
        lp: asm.lp,
        k_offset: asm.k_offset,
        e_offsets: asm.e_offsets,
        e_shapes: blocks.iter().map(|b| (b.q(), b.p())).collect(),
    })
}

/// Vertices of the consistency set, refusing unbounded sets.
pub fn consistency_vertices(
    data: &ExperimentData,
    dist: &DisturbanceSet,
    solver: &dyn LpSolver,
) -> Result<VPolytope> {
    let h = dataset::consistency_rows(data, dist)?;
    if !polyhedra::is_bounded_general(&h, solver)? {
        return Err(Error::Unbounded(
            "consistency set is unbounded; the vertex-based program needs a bounded set".into(),
        ));
    }
    polyhedra::enumerate_vertices(&h, solver)
}

/// Outcome of a bisection over `δ`.
#[derive(Debug, Clone)]
pub struct Bisection {
    /// Largest `δ` found feasible; `None` when infeasible already at the lower end.
    pub delta_star: Option<f64>,
    /// The certificate-bearing result at `delta_star` (or the failed probe at the lower end).
    pub result: SynthesisResult,
    /// Every probe in order: `(δ, status)`.
    pub probes: Vec<(f64, Status)>,
}

/// Bisection for the largest feasible `δ` in `[lo, hi]`, assuming
/// feasibility is monotone in `δ`. Stops once the bracket is below `abs_tol`.
/// Solver failures count as not feasible.
pub fn max_delta_bisection<F>(mut problem: F, lo: f64, hi: f64, abs_tol: f64) -> Result<Bisection>
where
    F: FnMut(f64) -> Result<SynthesisResult>,
{
    if !(lo <= hi) || !(abs_tol > 0.0) {
        return Err(Error::InvalidArgument(
            "bisection needs lo <= hi and a positive tolerance".into(),
        ));
    }
    let mut probes = Vec::new();
    let mut probe = |d: f64, probes: &mut Vec<(f64, Status)>| -> Result<SynthesisResult> {
        let r = problem(d)?;
        probes.push((d, r.status));
        Ok(r)
    };

    let at_lo = probe(lo, &mut probes)?;
    if !at_lo.is_feasible() {
        return Ok(Bisection {
            delta_star: None,
            result: at_lo,
            probes,
        });
    }
    if lo == hi {
        return Ok(Bisection {
            delta_star: Some(lo),
            result: at_lo,
            probes,
        });
    }
    let at_hi = probe(hi, &mut probes)?;
    if at_hi.is_feasible() {
        return Ok(Bisection {
            delta_star: Some(hi),
            result: at_hi,
            probes,
        });
    }
    let (mut a, mut b, mut best) = (lo, hi, at_lo);
    while b - a > abs_tol {
        let mid = 0.5 * (a + b);
        let r = probe(mid, &mut probes)?;
        if r.is_feasible() {
            a = mid;
            best = r;
        } else {
            b = mid;
        }
    }
    Ok(Bisection {
        delta_star: Some(a),
        result: best,
        probes,
    })
}
