//! Solve wrapper: synthesis, naive initialisation, Newton solve, unpacking.

use crate::mcp::{solve_mcp, SolverOptions};

use super::{
    build_kkt_mcp, rollout, ContingencyGame, EquilibriumSolution, GameError, PlayerTrajectory,
    TrajectoryProfile,
};

#[derive(Debug, Clone)]
pub struct SolveGameOptions {
    pub solver: SolverOptions,
    /// Initial value for every multiplier block under naive initialisation.
    pub multiplier_init: f64,
}

impl Default for SolveGameOptions {
    fn default() -> Self {
        SolveGameOptions {
            solver: SolverOptions::default(),
            multiplier_init: 1e-2,
        }
    }
}

/// Zero-control rollout of every player under every hypothesis.
pub fn naive_profile(game: &ContingencyGame) -> Result<TrajectoryProfile, GameError> {
    let players = (0..game.hypotheses())
        .map(|hyp| {
            (0..game.roster_size())
                .map(|p| {
                    let spec = game.player(hyp, p);
                    let controls = vec![vec![0.0; spec.control_dim]; game.horizon];
                    let states = rollout(spec, &controls)?;
                    Ok(PlayerTrajectory { states, controls })
                })
                .collect::<Result<Vec<_>, GameError>>()
        })
        .collect::<Result<Vec<_>, GameError>>()?;
    Ok(TrajectoryProfile { players })
}

/// Horizon at which naive starts go through the continuation ladder.
const LADDER_THRESHOLD: usize = 14;

/// Extends a shorter-horizon profile to `game`'s horizon by repeating each
/// player's final control and rolling the dynamics back out.
fn extend_profile(
    game: &ContingencyGame,
    profile: &TrajectoryProfile,
) -> Result<TrajectoryProfile, GameError> {
    let players = (0..game.hypotheses())
        .map(|hyp| {
            (0..game.roster_size())
                .map(|p| {
                    let spec = game.player(hyp, p);
                    let prev = &profile.players[hyp][p];
                    let mut controls = prev.controls.clone();
                    let last = controls
                        .last()
                        .cloned()
                        .unwrap_or_else(|| vec![0.0; spec.control_dim]);
                    controls.resize(game.horizon, last);
                    let states = rollout(spec, &controls)?;
                    Ok(PlayerTrajectory { states, controls })
                })
                .collect::<Result<Vec<_>, GameError>>()
        })
        .collect::<Result<Vec<_>, GameError>>()?;
    Ok(TrajectoryProfile { players })
}

/// Naive initialisation with horizon continuation: long-horizon games are
/// first solved over truncated horizons, each rung warm-starting the next.
/// A cold zero-control rollout over the full horizon can start too deep
/// inside keep-out regions for a local method to recover; the short rungs
/// stay within its basin.
fn laddered_naive_start(
    game: &ContingencyGame,
    opts: &SolveGameOptions,
) -> Result<TrajectoryProfile, GameError> {
    if game.horizon <= LADDER_THRESHOLD {
        return naive_profile(game);
    }
    // Rungs count up from a cold-start-friendly horizon in small steps;
    // each extension only appends a few stages of fresh violation.
    let mut rungs = Vec::new();
    let mut h = LADDER_THRESHOLD.min(game.horizon);
    while h < game.horizon {
        rungs.push(h);
        h += 4;
    }

    let mut profile: Option<TrajectoryProfile> = None;
    for rung in rungs {
        let mut truncated = game.clone();
        truncated.horizon = rung;
        truncated.branching_time = game.branching_time.min(rung);
        let init = match &profile {
            Some(p) => extend_profile(&truncated, p)?,
            None => naive_profile(&truncated)?,
        };
        let built = build_kkt_mcp(&truncated)?;
        let v0 = built.layout.pack_profile(&init, opts.multiplier_init)?;
        let result = solve_mcp(&built.mcp, &v0, &opts.solver);
        // A failed rung still hands its best point forward.
        let (rung_profile, _, _) = built.layout.unpack(&result.solution);
        profile = Some(rung_profile);
    }
    extend_profile(game, &profile.expect("ladder has at least one rung"))
}

/// Synthesizes the KKT system and solves it from `init` (or from the naive
/// zero-control rollout). Non-convergence is an error carrying the worst
/// residual blocks and the best point reached.
pub fn solve_contingency_game(
    game: &ContingencyGame,
    init: Option<&TrajectoryProfile>,
    opts: &SolveGameOptions,
) -> Result<EquilibriumSolution, GameError> {
    let built = build_kkt_mcp(game)?;
    let v0 = match init {
        Some(profile) => built.layout.pack_profile(profile, opts.multiplier_init)?,
        None => built
            .layout
            .pack_profile(&laddered_naive_start(game, opts)?, opts.multiplier_init)?,
    };
    let mut result = solve_mcp(&built.mcp, &v0, &opts.solver);

    if !result.status.is_converged() && init.is_none() && game.branching_time > 0 {
        // Branch-time continuation fallback: untied branches solve far more
        // easily, and progressively tying the prefix tracks the contingency
        // equilibrium into stubborn late-branching instances.
        if let Ok(profile) = branch_time_continuation(game, opts) {
            let v1 = built.layout.pack_profile(&profile, opts.multiplier_init)?;
            let retry = solve_mcp(&built.mcp, &v1, &opts.solver);
            if retry.status.is_converged() || retry.merit_norm < result.merit_norm {
                result = retry;
            }
        }
    }

    let solution = built.layout.unpack_solution(&result);
    if result.status.is_converged() {
        Ok(solution)
    } else {
        let mut diagnostics = built.mcp.block_residual_norms(&result.solution);
        diagnostics.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        diagnostics.truncate(5);
        Err(GameError::SolverFailure {
            status: result.status,
            diagnostics,
            solution: Box::new(solution),
        })
    }
}

/// Solves the game at increasing branching times, warm-starting each stage,
/// and returns the profile solved at the largest branching time below the
/// target.
fn branch_time_continuation(
    game: &ContingencyGame,
    opts: &SolveGameOptions,
) -> Result<TrajectoryProfile, GameError> {
    let mut profile: Option<TrajectoryProfile> = None;
    let mut tb = 0;
    loop {
        let mut staged = game.clone();
        staged.branching_time = tb;
        let built = build_kkt_mcp(&staged)?;
        let init = match &profile {
            Some(p) => p.clone(),
            None => laddered_naive_start(&staged, opts)?,
        };
        let v0 = built.layout.pack_profile(&init, opts.multiplier_init)?;
        let result = solve_mcp(&built.mcp, &v0, &opts.solver);
        let (stage_profile, _, _) = built.layout.unpack(&result.solution);
        profile = Some(stage_profile);
        if tb >= game.branching_time {
            break;
        }
        tb = (tb + 4).min(game.branching_time);
    }
    Ok(profile.expect("continuation ran at least once"))
}
