//! Contingency trajectory games and their equilibrium conditions.
//!
//! A game couples one ego player with `K` hypothesised versions of the other
//! agents. Per hypothesis the ego plans a full state/control trajectory; the
//! contingency constraint ties the control prefixes of all branches together
//! up to the branching time. [`kkt`] stacks every player's first-order
//! conditions into one mixed complementarity problem; [`solve_contingency_game`]
//! wraps synthesis, initialisation and the Newton solve; [`verify`] checks a
//! candidate equilibrium independently of the solve path.

use std::sync::Arc;

use thiserror::Error;

use crate::autodiff::{DiffScalarFn, DiffVectorFn};
use crate::dynamics::BoundRow;
use crate::mcp::{SolveResult, SolveStatus, SolverOptions};

pub mod kkt;
pub mod reference;
mod solve;
mod verify;

pub use kkt::{build_kkt_mcp, BuiltMcp, KktLayout, McpCensus};
pub use solve::{naive_profile, solve_contingency_game, SolveGameOptions};
pub use verify::{verify_equilibrium, EquilibriumReport, StationarityNorm};

#[derive(Debug, Error)]
pub enum GameError {
    #[error("invalid game: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("problem synthesis failed: {0}")]
    Synthesis(String),
    #[error("solver finished with status {status:?}; worst residual blocks: {diagnostics:?}")]
    SolverFailure {
        status: SolveStatus,
        diagnostics: Vec<(String, f64)>,
        solution: Box<EquilibriumSolution>,
    },
}

/// Which slice of a player's stage variables a model function reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceKind {
    State,
    Control,
}

/// One input slice of a stage function: a player's full state or control at
/// the stage being evaluated. Player indices refer to the hypothesis roster
/// (0 = ego).
#[derive(Debug, Clone, Copy)]
pub struct StageSlice {
    pub player: usize,
    pub kind: SliceKind,
}

/// Ordered input slices of a stage function.
#[derive(Debug, Clone, Default)]
pub struct StageInputs(pub Vec<StageSlice>);

impl StageInputs {
    pub fn own(player: usize) -> Self {
        StageInputs(vec![
            StageSlice {
                player,
                kind: SliceKind::State,
            },
            StageSlice {
                player,
                kind: SliceKind::Control,
            },
        ])
    }

    pub fn states(players: &[usize]) -> Self {
        StageInputs(
            players
                .iter()
                .map(|&player| StageSlice {
                    player,
                    kind: SliceKind::State,
                })
                .collect(),
        )
    }
}

/// A stage-wise vector inequality `h_t(inputs) >= 0` owned by one player.
#[derive(Clone)]
pub struct StageConstraint {
    pub label: String,
    pub map: Arc<dyn DiffVectorFn>,
    pub inputs: StageInputs,
}

/// A stage-wise inequality shared between players, with fixed multiplier
/// ratios distributing the constraint responsibility.
#[derive(Clone)]
pub struct SharedConstraintSpec {
    pub label: String,
    pub map: Arc<dyn DiffVectorFn>,
    pub inputs: StageInputs,
    /// `(player, kappa)` pairs; the first entry owns the multiplier block.
    pub participants: Vec<(usize, f64)>,
}

impl SharedConstraintSpec {
    /// Multiplier of `player` expressed in units of the owner's multiplier:
    /// `lambda_p = (kappa_p / kappa_owner) * sigma`.
    pub fn effective_weight(&self, player: usize) -> Option<f64> {
        let owner_kappa = self.participants.first()?.1;
        self.participants
            .iter()
            .find(|(p, _)| *p == player)
            .map(|(_, k)| k / owner_kappa)
    }
}

/// One player's model: dynamics, initial state, stage cost, bounds and any
/// additional private inequality constraints.
#[derive(Clone)]
pub struct PlayerSpec {
    pub name: String,
    pub state_dim: usize,
    pub control_dim: usize,
    pub dynamics: Arc<dyn DiffVectorFn>,
    pub initial_state: Vec<f64>,
    pub stage_cost: Arc<dyn DiffScalarFn>,
    pub cost_inputs: StageInputs,
    pub state_bounds: Vec<BoundRow>,
    pub control_bounds: Vec<BoundRow>,
    pub private_constraints: Vec<StageConstraint>,
}

impl PlayerSpec {
    fn validate(&self, roster_size: usize) -> Result<(), GameError> {
        if self.initial_state.len() != self.state_dim {
            return Err(GameError::Dimension(format!(
                "player {}: initial state has {} entries, state_dim is {}",
                self.name,
                self.initial_state.len(),
                self.state_dim
            )));
        }
        if self.dynamics.arity() != self.state_dim + self.control_dim
            || self.dynamics.codim() != self.state_dim
        {
            return Err(GameError::Dimension(format!(
                "player {}: dynamics map must be (state+control) -> state",
                self.name
            )));
        }
        for slice in &self.cost_inputs.0 {
            if slice.player >= roster_size {
                return Err(GameError::Invalid(format!(
                    "player {}: cost reads player {} outside roster",
                    self.name, slice.player
                )));
            }
        }
        for c in &self.private_constraints {
            for slice in &c.inputs.0 {
                if slice.player >= roster_size {
                    return Err(GameError::Invalid(format!(
                        "constraint {}: input player {} outside roster",
                        c.label, slice.player
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Discrete belief over the intent hypotheses.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Belief {
    labels: Vec<String>,
    probabilities: Vec<f64>,
}

impl Belief {
    pub fn new(labels: Vec<String>, probabilities: Vec<f64>) -> Result<Self, GameError> {
        if labels.is_empty() || labels.len() != probabilities.len() {
            return Err(GameError::Invalid(
                "belief needs one probability per hypothesis label".into(),
            ));
        }
        if probabilities.iter().any(|p| *p < 0.0) {
            return Err(GameError::Invalid("belief probabilities must be >= 0".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(GameError::Invalid(format!(
                "belief probabilities sum to {total}, expected 1"
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.clone()) {
                return Err(GameError::Invalid(format!("duplicate hypothesis label {l}")));
            }
        }
        Ok(Belief {
            labels,
            probabilities,
        })
    }

    pub fn uniform(labels: Vec<String>) -> Result<Self, GameError> {
        let k = labels.len();
        Belief::new(labels, vec![1.0 / k as f64; k])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probability(&self, hypothesis: usize) -> f64 {
        self.probabilities[hypothesis]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }
}

/// An N-player contingency game over a finite horizon.
///
/// `others[k]` are the hypothesis-`k` versions of the non-ego players;
/// `shared_constraints[k]` couple players within hypothesis `k`. The ego is
/// player 0 of every hypothesis roster.
#[derive(Clone)]
pub struct ContingencyGame {
    pub dt: f64,
    pub horizon: usize,
    pub branching_time: usize,
    pub belief: Belief,
    pub ego: PlayerSpec,
    pub others: Vec<Vec<PlayerSpec>>,
    pub shared_constraints: Vec<Vec<SharedConstraintSpec>>,
}

impl ContingencyGame {
    pub fn hypotheses(&self) -> usize {
        self.belief.len()
    }

    /// Players per hypothesis roster, ego included.
    pub fn roster_size(&self) -> usize {
        1 + self.others.first().map_or(0, |o| o.len())
    }

    pub fn player(&self, hypothesis: usize, player: usize) -> &PlayerSpec {
        if player == 0 {
            &self.ego
        } else {
            &self.others[hypothesis][player - 1]
        }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.horizon == 0 {
            return Err(GameError::Invalid("horizon must be >= 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(GameError::Invalid("dt must be positive".into()));
        }
        if self.branching_time > self.horizon {
            return Err(GameError::Invalid(format!(
                "branching time {} exceeds horizon {}",
                self.branching_time, self.horizon
            )));
        }
        let k = self.hypotheses();
        if self.others.len() != k || self.shared_constraints.len() != k {
            return Err(GameError::Invalid(format!(
                "expected {k} hypothesis rosters and shared-constraint lists"
            )));
        }
        let roster = self.roster_size();
        for hyp in 0..k {
            if self.others[hyp].len() + 1 != roster {
                return Err(GameError::Invalid(format!(
                    "hypothesis {hyp} has {} players, hypothesis 0 has {roster}",
                    self.others[hyp].len() + 1
                )));
            }
            for p in 0..roster {
                let spec = self.player(hyp, p);
                spec.validate(roster)?;
                let reference = self.player(0, p);
                if spec.state_dim != reference.state_dim
                    || spec.control_dim != reference.control_dim
                {
                    return Err(GameError::Invalid(format!(
                        "player {p} changes dimensions across hypotheses"
                    )));
                }
            }
            for shared in &self.shared_constraints[hyp] {
                if shared.participants.len() < 2 {
                    return Err(GameError::Invalid(format!(
                        "shared constraint {} needs at least two participants",
                        shared.label
                    )));
                }
                if shared.participants.iter().any(|(_, k)| !(*k > 0.0)) {
                    return Err(GameError::Invalid(format!(
                        "shared constraint {}: multiplier ratios must be positive",
                        shared.label
                    )));
                }
                for slice in &shared.inputs.0 {
                    if slice.player >= roster {
                        return Err(GameError::Invalid(format!(
                            "shared constraint {}: input player outside roster",
                            shared.label
                        )));
                    }
                    if !shared.participants.iter().any(|(p, _)| *p == slice.player) {
                        return Err(GameError::Invalid(format!(
                            "shared constraint {}: reads player {} which is not a participant",
                            shared.label, slice.player
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-player state/control trajectory over the horizon.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlayerTrajectory {
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
}

/// Trajectories of every player under every hypothesis.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrajectoryProfile {
    /// Indexed `[hypothesis][player]`.
    pub players: Vec<Vec<PlayerTrajectory>>,
}

impl TrajectoryProfile {
    pub fn trajectory(&self, hypothesis: usize, player: usize) -> &PlayerTrajectory {
        &self.players[hypothesis][player]
    }
}

/// Multiplier blocks recovered for one hypothesis.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct HypothesisMultipliers {
    /// Per player: dynamics equality multipliers, stacked over time.
    pub dynamics: Vec<Vec<f64>>,
    /// Per player: inequality multipliers (bounds first, then each private
    /// constraint), stacked over time.
    pub private: Vec<Vec<f64>>,
    /// Per shared constraint: the owner-side multiplier block.
    pub shared: Vec<Vec<f64>>,
}

/// A solved equilibrium: primal profile, multipliers and diagnostics.
#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    pub profile: TrajectoryProfile,
    pub multipliers: Vec<HypothesisMultipliers>,
    /// Contingency-constraint multiplier block.
    pub rho: Vec<f64>,
    /// Max-norm of the complementarity residual at the solution.
    pub kkt_residual: f64,
    pub solver: SolveResult,
    /// Raw stacked variable vector, kept for re-verification and dumps.
    pub mcp_point: Vec<f64>,
}

/// Rolls controls through a player's dynamics starting from its initial
/// state. Controls and the returned states both span the full horizon; the
/// final control does not influence any state.
pub fn rollout(player: &PlayerSpec, controls: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, GameError> {
    for (t, u) in controls.iter().enumerate() {
        if u.len() != player.control_dim {
            return Err(GameError::Dimension(format!(
                "control at step {t} has {} entries, expected {}",
                u.len(),
                player.control_dim
            )));
        }
    }
    let horizon = controls.len();
    let mut states = Vec::with_capacity(horizon);
    states.push(player.initial_state.clone());
    let mut stage = vec![0.0; player.state_dim + player.control_dim];
    for t in 0..horizon.saturating_sub(1) {
        stage[..player.state_dim].copy_from_slice(&states[t]);
        stage[player.state_dim..].copy_from_slice(&controls[t]);
        let mut next = vec![0.0; player.state_dim];
        player.dynamics.values(&stage, &mut next);
        states.push(next);
    }
    Ok(states)
}

fn gather_stage_inputs(
    game: &ContingencyGame,
    hypothesis: usize,
    inputs: &StageInputs,
    profile: &TrajectoryProfile,
    t: usize,
    buf: &mut Vec<f64>,
) {
    buf.clear();
    for slice in &inputs.0 {
        let traj = profile.trajectory(hypothesis, slice.player);
        match slice.kind {
            SliceKind::State => buf.extend_from_slice(&traj.states[t]),
            SliceKind::Control => buf.extend_from_slice(&traj.controls[t]),
        }
        let _ = game;
    }
}

/// Time-additive cost of one player under one hypothesis.
pub fn trajectory_cost(
    game: &ContingencyGame,
    hypothesis: usize,
    player: usize,
    profile: &TrajectoryProfile,
) -> f64 {
    let spec = game.player(hypothesis, player);
    let mut buf = Vec::new();
    let mut total = 0.0;
    for t in 0..game.horizon {
        gather_stage_inputs(game, hypothesis, &spec.cost_inputs, profile, t, &mut buf);
        total += spec.stage_cost.value(&buf);
    }
    total
}

/// Belief-weighted ego cost over all hypotheses.
pub fn expected_cost(game: &ContingencyGame, profile: &TrajectoryProfile) -> f64 {
    (0..game.hypotheses())
        .map(|k| game.belief.probability(k) * trajectory_cost(game, k, 0, profile))
        .sum()
}

/// Stacked control-prefix differences between the first branch and every
/// other branch: `u_0[t] - u_k[t]` for `t < t_b`. Empty when `t_b = 0` or
/// there is a single hypothesis.
pub fn contingency_constraint(ego_controls: &[Vec<Vec<f64>>], branching_time: usize) -> Vec<f64> {
    let mut out = Vec::new();
    if ego_controls.len() <= 1 {
        return out;
    }
    let reference = &ego_controls[0];
    for branch in &ego_controls[1..] {
        for t in 0..branching_time {
            for (a, b) in reference[t].iter().zip(&branch[t]) {
                out.push(a - b);
            }
        }
    }
    out
}

/// Convenience wrapper evaluating [`contingency_constraint`] on a profile.
pub fn contingency_constraint_of_profile(
    game: &ContingencyGame,
    profile: &TrajectoryProfile,
) -> Vec<f64> {
    let controls: Vec<Vec<Vec<f64>>> = (0..game.hypotheses())
        .map(|k| profile.trajectory(k, 0).controls.clone())
        .collect();
    contingency_constraint(&controls, game.branching_time)
}

/// Default options shared by the solve entry points.
#[derive(Debug, Clone)]
pub struct GameSolveDefaults {
    pub solver: SolverOptions,
}
