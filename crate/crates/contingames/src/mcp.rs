//! Mixed complementarity problems and a semismooth Newton solver.
//!
//! A problem asks for `v` in the box `[v_lo, v_up]` such that for every
//! component `j` one of three clauses holds:
//!
//! - `v_j = lo_j` and `G_j(v) >= 0`,
//! - `lo_j < v_j < up_j` and `G_j(v) = 0`,
//! - `v_j = up_j` and `G_j(v) <= 0`.
//!
//! The solver reformulates these clauses componentwise with the
//! Fischer-Burmeister function `phi(a, b) = a + b - sqrt(a^2 + b^2)` and runs
//! a damped Newton method on the resulting semismooth root-finding problem,
//! with diagonal regularization and randomized multiplier restarts as
//! fallbacks. Convergence is local; the restart budget papers over the worst
//! starts seen in practice.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sparse::{LuSolver, SparseMatrix, SparsityPattern};

pub mod oracle;

#[derive(Debug, Error)]
pub enum McpError {
    #[error("bounds invalid at component {index}: lower {lower} must be strictly below upper {upper}")]
    InvalidBounds {
        index: usize,
        lower: f64,
        upper: f64,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid solver option: {0}")]
    InvalidOption(&'static str),
}

/// Named index range used for diagnostics on large synthesized problems.
#[derive(Debug, Clone)]
pub struct BlockLabel {
    pub name: String,
    pub range: std::ops::Range<usize>,
}

type ResidualFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type JacobianFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A box-constrained complementarity problem with a constant Jacobian pattern.
pub struct MixedComplementarityProblem {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    residual: Arc<ResidualFn>,
    pattern: SparsityPattern,
    jacobian: Arc<JacobianFn>,
    block_labels: Vec<BlockLabel>,
}

impl MixedComplementarityProblem {
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        pattern: SparsityPattern,
        residual: Arc<ResidualFn>,
        jacobian: Arc<JacobianFn>,
        block_labels: Vec<BlockLabel>,
    ) -> Result<Self, McpError> {
        let dim = lower.len();
        if upper.len() != dim {
            return Err(McpError::Dimension(format!(
                "lower has {dim} entries, upper has {}",
                upper.len()
            )));
        }
        if pattern.nrows() != dim || pattern.ncols() != dim {
            return Err(McpError::Dimension(format!(
                "pattern is {}x{}, expected {dim}x{dim}",
                pattern.nrows(),
                pattern.ncols()
            )));
        }
        for j in 0..dim {
            // Equal bounds would pin the variable; encode fixed values by
            // substitution instead.
            if !(lower[j] < upper[j]) {
                return Err(McpError::InvalidBounds {
                    index: j,
                    lower: lower[j],
                    upper: upper[j],
                });
            }
        }
        Ok(MixedComplementarityProblem {
            dim,
            lower,
            upper,
            residual,
            pattern,
            jacobian,
            block_labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn pattern(&self) -> &SparsityPattern {
        &self.pattern
    }

    pub fn block_labels(&self) -> &[BlockLabel] {
        &self.block_labels
    }

    pub fn eval_residual(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim);
        (self.residual)(v, out);
    }

    /// Writes Jacobian values aligned with `pattern()` slots.
    pub fn eval_jacobian(&self, v: &[f64], values: &mut [f64]) {
        debug_assert_eq!(values.len(), self.pattern.nnz());
        (self.jacobian)(v, values);
    }

    /// Euclidean-norm residual per labelled block, for failure reports.
    pub fn block_residual_norms(&self, v: &[f64]) -> Vec<(String, f64)> {
        let mut g = vec![0.0; self.dim];
        self.eval_residual(v, &mut g);
        self.block_labels
            .iter()
            .map(|b| {
                let norm = g[b.range.clone()]
                    .iter()
                    .map(|x| x * x)
                    .sum::<f64>()
                    .sqrt();
                (b.name.clone(), norm)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub residual_tolerance: f64,
    pub max_iterations: usize,
    pub line_search_contraction: f64,
    pub armijo_slope: f64,
    pub regularization_floor: f64,
    pub restart_attempts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            residual_tolerance: 1e-8,
            max_iterations: 200,
            line_search_contraction: 0.5,
            armijo_slope: 1e-4,
            regularization_floor: 1e-12,
            restart_attempts: 6,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), McpError> {
        if !(self.residual_tolerance > 0.0) {
            return Err(McpError::InvalidOption("residual_tolerance must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(McpError::InvalidOption("max_iterations must be >= 1"));
        }
        if !(self.line_search_contraction > 0.0 && self.line_search_contraction < 1.0) {
            return Err(McpError::InvalidOption(
                "line_search_contraction must lie in (0, 1)",
            ));
        }
        if !(self.armijo_slope > 0.0 && self.armijo_slope < 1.0) {
            return Err(McpError::InvalidOption("armijo_slope must lie in (0, 1)"));
        }
        if !(self.regularization_floor >= 0.0) {
            return Err(McpError::InvalidOption("regularization_floor must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    SingularJacobian,
    LineSearchFailure,
}

impl SolveStatus {
    pub fn is_converged(&self) -> bool {
        matches!(self, SolveStatus::Converged)
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solution: Vec<f64>,
    pub status: SolveStatus,
    /// Max-norm of the Fischer-Burmeister residual at `solution`.
    pub merit_norm: f64,
    pub iterations: usize,
    pub wall_time: f64,
    /// Euclidean FB merit after each accepted iterate (index 0 = start).
    pub merit_history: Vec<f64>,
}

/// Smoothed Fischer-Burmeister function
/// `phi_eps(a, b) = a + b - sqrt(a^2 + b^2 + eps)`.
///
/// At `eps = 0` this is the exact FB function, zero iff `a >= 0`, `b >= 0`,
/// `ab = 0`. For `eps > 0` its root set is the central path `2ab = eps`,
/// which the solver follows towards the true solution: a continuation that
/// sidesteps the merit plateaus plain semismooth Newton hits at degenerate
/// complementarity points.
fn fb(a: f64, b: f64, eps: f64) -> f64 {
    a + b - (a * a + b * b + eps).sqrt()
}

/// Derivative of `fb` wrt (a, b); at the exact kink (`eps = 0`, origin) the
/// central element of the Clarke subdifferential is used.
fn fb_grad(a: f64, b: f64, eps: f64) -> (f64, f64) {
    let r = (a * a + b * b + eps).sqrt();
    if r > 0.0 {
        (1.0 - a / r, 1.0 - b / r)
    } else {
        let s = 1.0 - 1.0 / std::f64::consts::SQRT_2;
        (s, s)
    }
}

enum BoundKind {
    Free,
    Lower,
    Upper,
    Both,
}

fn bound_kind(lo: f64, up: f64) -> BoundKind {
    match (lo.is_finite(), up.is_finite()) {
        (false, false) => BoundKind::Free,
        (true, false) => BoundKind::Lower,
        (false, true) => BoundKind::Upper,
        (true, true) => BoundKind::Both,
    }
}

/// Componentwise Fischer-Burmeister reformulation of the problem residual.
///
/// Reduces to `G(v)` on free components and vanishes exactly at points
/// satisfying the complementarity clauses.
pub fn fb_residual(problem: &MixedComplementarityProblem, v: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; problem.dim];
    problem.eval_residual(v, &mut g);
    fb_residual_from(problem, v, &g, 0.0)
}

fn fb_residual_from(
    problem: &MixedComplementarityProblem,
    v: &[f64],
    g: &[f64],
    eps: f64,
) -> Vec<f64> {
    (0..problem.dim)
        .map(|j| fb_component(problem.lower[j], problem.upper[j], v[j], g[j], eps))
        .collect()
}

fn fb_component(lo: f64, up: f64, v: f64, g: f64, eps: f64) -> f64 {
    match bound_kind(lo, up) {
        BoundKind::Free => g,
        BoundKind::Lower => fb(v - lo, g, eps),
        BoundKind::Upper => -fb(up - v, -g, eps),
        BoundKind::Both => fb(v - lo, -fb(up - v, -g, eps), eps),
    }
}

/// Row scaling (d_v, d_g) such that the FB Jacobian row equals
/// `d_v * e_j + d_g * (row j of dG)`.
fn fb_row_weights(lo: f64, up: f64, v: f64, g: f64, eps: f64) -> (f64, f64) {
    match bound_kind(lo, up) {
        BoundKind::Free => (0.0, 1.0),
        BoundKind::Lower => {
            let (da, db) = fb_grad(v - lo, g, eps);
            (da, db)
        }
        BoundKind::Upper => {
            // -phi(up - v, -g): d/dv = da, d/dg = db after sign bookkeeping.
            let (da, db) = fb_grad(up - v, -g, eps);
            (da, db)
        }
        BoundKind::Both => {
            let inner = -fb(up - v, -g, eps);
            let (outer_a, outer_b) = fb_grad(v - lo, inner, eps);
            let (inner_a, inner_b) = fb_grad(up - v, -g, eps);
            // d inner / dv = inner_a, d inner / dg = inner_b
            (outer_a + outer_b * inner_a, outer_b * inner_b)
        }
    }
}

/// Per-component report from [`check_mcp_solution`].
#[derive(Debug, Clone)]
pub struct ComponentReport {
    pub index: usize,
    pub value: f64,
    pub residual: f64,
    pub satisfied: bool,
    /// Worst violation among the best-matching clause's conditions.
    pub violation: f64,
}

/// Checks the three complementarity clauses directly, within `tol`.
pub fn check_mcp_solution(
    problem: &MixedComplementarityProblem,
    v: &[f64],
    tol: f64,
) -> (bool, Vec<ComponentReport>) {
    let mut g = vec![0.0; problem.dim];
    problem.eval_residual(v, &mut g);
    let mut all = true;
    let reports = (0..problem.dim)
        .map(|j| {
            let lo = problem.lower[j];
            let up = problem.upper[j];
            let at_lower = lo.is_finite().then(|| (v[j] - lo).abs()).unwrap_or(f64::MAX);
            let at_upper = up.is_finite().then(|| (up - v[j]).abs()).unwrap_or(f64::MAX);
            // Violation of each clause; the component passes if any clause
            // is met within tol.
            let lower_clause = at_lower.max((-g[j]).max(0.0));
            let interior_clause = g[j]
                .abs()
                .max((lo - v[j]).max(0.0))
                .max((v[j] - up).max(0.0));
            let upper_clause = at_upper.max(g[j].max(0.0));
            let violation = lower_clause.min(interior_clause).min(upper_clause);
            let satisfied = violation <= tol;
            all &= satisfied;
            ComponentReport {
                index: j,
                value: v[j],
                residual: g[j],
                satisfied,
                violation,
            }
        })
        .collect();
    (all, reports)
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Backtracking Armijo search along `d`, trying the box-projected trial
/// before the raw one at each step length. Mutates the iterate state and
/// returns whether a step was accepted.
#[allow(clippy::too_many_arguments)]
fn armijo_step(
    problem: &MixedComplementarityProblem,
    opts: &SolverOptions,
    eps: f64,
    d: &[f64],
    slope: f64,
    v: &mut Vec<f64>,
    g: &mut Vec<f64>,
    phi: &mut Vec<f64>,
    merit: &mut f64,
    merit_history: &mut Vec<f64>,
) -> bool {
    let n = problem.dim();
    let mut alpha = 1.0;
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    while alpha > 1e-12 {
        for projected in [true, false] {
            for j in 0..n {
                let t = v[j] + alpha * d[j];
                trial[j] = if projected {
                    t.max(problem.lower[j]).min(problem.upper[j])
                } else {
                    t
                };
            }
            problem.eval_residual(&trial, &mut g_trial);
            let phi_trial = fb_residual_from(problem, &trial, &g_trial, eps);
            let merit_trial = 0.5 * two_norm_sq(&phi_trial);
            if merit_trial.is_finite()
                && merit_trial <= *merit + opts.armijo_slope * alpha * slope
            {
                v.copy_from_slice(&trial);
                g.copy_from_slice(&g_trial);
                *phi = phi_trial;
                *merit = merit_trial;
                merit_history.push(merit.sqrt());
                return true;
            }
        }
        alpha *= opts.line_search_contraction;
    }
    false
}

fn two_norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Solves the problem from `v0` (clipped into the box before iterating).
pub fn solve_mcp(
    problem: &MixedComplementarityProblem,
    v0: &[f64],
    opts: &SolverOptions,
) -> SolveResult {
    opts.validate().expect("invalid solver options");
    assert_eq!(v0.len(), problem.dim(), "initial point dimension mismatch");
    let start = Instant::now();

    let mut v: Vec<f64> = v0
        .iter()
        .enumerate()
        .map(|(j, &x)| x.max(problem.lower[j]).min(problem.upper[j]))
        .collect();

    // Smoothing continuation: bounded components are first solved with a
    // relaxed FB function, warm-starting each tighter stage. Pure
    // root-finding problems (no finite bounds) skip straight to eps = 0.
    let has_bounds = (0..problem.dim())
        .any(|j| problem.lower[j].is_finite() || problem.upper[j].is_finite());
    let schedule: &[f64] = if has_bounds {
        &[1e-2, 1e-5, 0.0]
    } else {
        &[0.0]
    };

    let mut best: Option<SolveResult> = None;
    let mut total_iters = 0;
    for attempt in 0..=opts.restart_attempts {
        let mut run = None;
        for &eps in schedule {
            let leg_tol = if eps > 0.0 {
                eps.sqrt().max(opts.residual_tolerance)
            } else {
                opts.residual_tolerance
            };
            let leg = newton_run(problem, &v, opts, opts.max_iterations, eps, leg_tol);
            total_iters += leg.iterations;
            v = leg.solution.clone();
            run = Some(leg);
        }
        let mut run = run.expect("schedule is nonempty");
        run.iterations = total_iters;
        run.wall_time = start.elapsed().as_secs_f64();
        let better = best
            .as_ref()
            .map(|b| run.merit_norm < b.merit_norm)
            .unwrap_or(true);
        if better {
            best = Some(run.clone());
        }
        if run.status.is_converged() {
            break;
        }
        if attempt < opts.restart_attempts {
            // Randomized restart: nudge bounded components into the interior
            // and jitter free ones. Seeded per attempt for determinism, and
            // scaled by the stall residual so a nearly-converged point gets
            // a nudge rather than a kick out of its basin.
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + attempt as u64);
            let scale = run.merit_norm.min(1.0).max(1e-6);
            v = run.solution.clone();
            for j in 0..problem.dim() {
                let lo = problem.lower[j];
                let up = problem.upper[j];
                if lo.is_finite() && !up.is_finite() {
                    v[j] = (v[j] - lo).abs().max(scale * 1e-2) * rng.gen_range(0.5..1.5) + lo;
                } else if up.is_finite() && !lo.is_finite() {
                    v[j] = up - (up - v[j]).abs().max(scale * 1e-2) * rng.gen_range(0.5..1.5);
                } else if lo.is_finite() && up.is_finite() {
                    let w = (up - lo).min(scale);
                    let mid = v[j].max(lo).min(up);
                    v[j] = (mid + w * rng.gen_range(-0.5..0.5)).max(lo).min(up);
                } else {
                    v[j] += 3e-2 * scale * rng.gen_range(-1.0..1.0) * (1.0 + v[j].abs());
                }
            }
        }
    }
    best.expect("at least one attempt runs")
}

fn newton_run(
    problem: &MixedComplementarityProblem,
    v0: &[f64],
    opts: &SolverOptions,
    max_iterations: usize,
    eps: f64,
    tol: f64,
) -> SolveResult {
    let n = problem.dim();
    let fb_pattern = problem.pattern().with_diagonal();
    let lu = match LuSolver::new(&fb_pattern) {
        Ok(lu) => lu,
        Err(_) => {
            return SolveResult {
                solution: v0.to_vec(),
                status: SolveStatus::SingularJacobian,
                merit_norm: inf_norm(&fb_residual(problem, v0)),
                iterations: 0,
                wall_time: 0.0,
                merit_history: Vec::new(),
            }
        }
    };

    let mut v = v0.to_vec();
    let mut g = vec![0.0; n];
    problem.eval_residual(&v, &mut g);
    let mut phi = fb_residual_from(problem, &v, &g, eps);
    let mut merit = 0.5 * two_norm_sq(&phi);
    let mut merit_history = vec![merit.sqrt()];

    let mut jac_values = vec![0.0; problem.pattern().nnz()];
    let mut fb_jac = SparseMatrix::zeros(fb_pattern.clone());
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    // Stall detector: accepted microsteps that barely reduce the merit are
    // treated like a failed line search so the restart logic can kick in.
    let mut stall_reference = merit;
    let mut stall_count = 0usize;

    for _ in 0..max_iterations {
        if inf_norm(&phi) <= tol {
            status = SolveStatus::Converged;
            break;
        }
        if merit > stall_reference * (1.0 - 1e-3) {
            stall_count += 1;
            if stall_count >= 15 {
                status = SolveStatus::LineSearchFailure;
                break;
            }
        } else {
            stall_reference = merit;
            stall_count = 0;
        }
        iterations += 1;

        problem.eval_jacobian(&v, &mut jac_values);
        let weights: Vec<(f64, f64)> = (0..n)
            .map(|j| fb_row_weights(problem.lower[j], problem.upper[j], v[j], g[j], eps))
            .collect();

        let mut mu = 0.0;
        let mut step_ok = false;
        let mut singular_exhausted = false;
        'regularize: loop {
            fb_jac.values_mut().fill(0.0);
            for row in 0..n {
                let (dv, dg) = weights[row];
                for &col in problem.pattern().row_cols(row) {
                    let slot_src = problem.pattern().slot(row, col);
                    let slot_dst = fb_pattern.slot(row, col);
                    fb_jac.values_mut()[slot_dst] += dg * jac_values[slot_src];
                }
                let diag = fb_pattern.slot(row, row);
                fb_jac.values_mut()[diag] += dv + mu;
            }

            let factor = match lu.factor(&fb_jac) {
                Ok(f) => f,
                Err(_) => {
                    mu = if mu == 0.0 {
                        opts.regularization_floor.max(1e-10)
                    } else {
                        mu * 10.0
                    };
                    if mu > 1e8 {
                        singular_exhausted = true;
                        break 'regularize;
                    }
                    continue 'regularize;
                }
            };

            let mut d: Vec<f64> = phi.iter().map(|p| -p).collect();
            if factor.solve_in_place(&mut d).is_err() {
                mu = if mu == 0.0 { 1e-10 } else { mu * 10.0 };
                if mu > 1e8 {
                    singular_exhausted = true;
                    break 'regularize;
                }
                continue 'regularize;
            }

            // Directional derivative of the merit along d: phi' * J_fb d.
            let mut jd = vec![0.0; n];
            fb_jac.mul_vec(&d, &mut jd);
            let slope: f64 = phi.iter().zip(&jd).map(|(p, q)| p * q).sum();
            if !(slope < 0.0) {
                mu = if mu == 0.0 { 1e-10 } else { mu * 10.0 };
                if mu > 1e8 {
                    singular_exhausted = true;
                    break 'regularize;
                }
                continue 'regularize;
            }

            step_ok = armijo_step(
                problem,
                opts,
                eps,
                &d,
                slope,
                &mut v,
                &mut g,
                &mut phi,
                &mut merit,
                &mut merit_history,
            );
            if step_ok {
                break 'regularize;
            }
            // Stalled line search: stiffen the step and retry before failing.
            mu = if mu == 0.0 { 1e-8 } else { mu * 100.0 };
            if mu > 1e8 {
                break 'regularize;
            }
        }

        if !step_ok && !singular_exhausted {
            // Last resort: steepest descent on the least-squares merit,
            // which is a guaranteed descent direction wherever the merit
            // gradient J^T phi is nonzero.
            fb_jac.values_mut().fill(0.0);
            for row in 0..n {
                let (dv, dg) = weights[row];
                for &col in problem.pattern().row_cols(row) {
                    let slot_src = problem.pattern().slot(row, col);
                    let slot_dst = fb_pattern.slot(row, col);
                    fb_jac.values_mut()[slot_dst] += dg * jac_values[slot_src];
                }
                let diag = fb_pattern.slot(row, row);
                fb_jac.values_mut()[diag] += dv;
            }
            let mut grad = vec![0.0; n];
            fb_jac.mul_vec_transpose(&phi, &mut grad);
            let norm_sq = two_norm_sq(&grad);
            if norm_sq > 1e-24 {
                let d: Vec<f64> = grad.iter().map(|x| -x).collect();
                step_ok = armijo_step(
                    problem,
                    opts,
                    eps,
                    &d,
                    -norm_sq,
                    &mut v,
                    &mut g,
                    &mut phi,
                    &mut merit,
                    &mut merit_history,
                );
            }
        }

        if !step_ok {
            status = if singular_exhausted {
                SolveStatus::SingularJacobian
            } else {
                SolveStatus::LineSearchFailure
            };
            break;
        }
    }

    if status == SolveStatus::MaxIterations && inf_norm(&phi) <= tol {
        status = SolveStatus::Converged;
    }

    SolveResult {
        solution: v,
        status,
        merit_norm: inf_norm(&phi),
        iterations,
        wall_time: 0.0,
        merit_history,
    }
}
