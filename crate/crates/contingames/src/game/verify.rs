//! First-order equilibrium verification.
//!
//! Checks a candidate solution against the stacked optimality system:
//! stationarity of every player's Lagrangian, primal feasibility of
//! dynamics, inequality and contingency constraints, and complementarity
//! between inequality values and their multipliers. This re-evaluates the
//! synthesized residual at the stored point; it does not rerun the solver.

use super::{build_kkt_mcp, BuiltMcp, ContingencyGame, EquilibriumSolution, GameError};

#[derive(Debug, Clone, serde::Serialize)]
pub struct StationarityNorm {
    pub hypothesis: String,
    pub player: String,
    pub inf_norm: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EquilibriumReport {
    pub stationarity: Vec<StationarityNorm>,
    /// Worst dynamics equality violation, max-norm.
    pub dynamics_residual: f64,
    /// Worst inequality violation `max(0, -h)` across private and shared rows.
    pub feasibility_violation: f64,
    /// Worst complementarity product `|lambda * h|`.
    pub complementarity: f64,
    /// Worst negative multiplier `max(0, -lambda)`.
    pub multiplier_negativity: f64,
    /// Max-norm of the contingency rows.
    pub contingency_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Verifies `solution` against a freshly synthesized system for `game`.
pub fn verify_equilibrium(
    game: &ContingencyGame,
    solution: &EquilibriumSolution,
    tol: f64,
) -> Result<EquilibriumReport, GameError> {
    let built = build_kkt_mcp(game)?;
    verify_with_built(game, &built, &solution.mcp_point, tol)
}

/// Same check against an already-built system (used by sweeps and the CLI).
pub fn verify_with_built(
    game: &ContingencyGame,
    built: &BuiltMcp,
    point: &[f64],
    tol: f64,
) -> Result<EquilibriumReport, GameError> {
    let layout = &built.layout;
    if point.len() != layout.dim() {
        return Err(GameError::Dimension(format!(
            "stored point has {} entries, system has {}",
            point.len(),
            layout.dim()
        )));
    }
    let mut g = vec![0.0; layout.dim()];
    built.mcp.eval_residual(point, &mut g);

    let inf = |range: std::ops::Range<usize>| -> f64 {
        g[range].iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    };

    let mut stationarity = Vec::new();
    let mut dynamics_residual = 0.0_f64;
    let mut feasibility_violation = 0.0_f64;
    let mut complementarity = 0.0_f64;
    let mut multiplier_negativity = 0.0_f64;

    for hyp in 0..layout.hypotheses {
        for player in 0..layout.roster {
            let spec = game.player(hyp, player);
            stationarity.push(StationarityNorm {
                hypothesis: game.belief.labels()[hyp].clone(),
                player: spec.name.clone(),
                inf_norm: inf(layout.primal_range(hyp, player)),
            });
            for t in 0..layout.horizon {
                for c in 0..spec.state_dim {
                    dynamics_residual =
                        dynamics_residual.max(g[layout.mu_id(hyp, player, t, c)].abs());
                }
            }
            for i in layout.lambda_range(hyp, player) {
                feasibility_violation = feasibility_violation.max(-g[i]);
                complementarity = complementarity.max((point[i] * g[i]).abs());
                multiplier_negativity = multiplier_negativity.max(-point[i]);
            }
        }
        for ci in 0..game.shared_constraints[hyp].len() {
            for i in layout.sigma_range(hyp, ci) {
                feasibility_violation = feasibility_violation.max(-g[i]);
                complementarity = complementarity.max((point[i] * g[i]).abs());
                multiplier_negativity = multiplier_negativity.max(-point[i]);
            }
        }
    }
    let contingency_residual = inf(layout.rho_range());

    let worst_stationarity = stationarity
        .iter()
        .fold(0.0_f64, |m, s| m.max(s.inf_norm));
    let passed = worst_stationarity <= tol
        && dynamics_residual <= tol
        && feasibility_violation <= tol
        && complementarity <= tol
        && multiplier_negativity <= tol
        && contingency_residual <= tol;

    Ok(EquilibriumReport {
        stationarity,
        dynamics_residual,
        feasibility_violation,
        complementarity,
        multiplier_negativity,
        contingency_residual,
        tol,
        passed,
    })
}
