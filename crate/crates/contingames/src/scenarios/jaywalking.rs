//! Jaywalking scenario: ego car vs. a crossing pedestrian.

use crate::game::{Belief, ContingencyGame, GameError};

use super::{
    car_player, oriented_geometry, ped_player, shared_collision, ScenarioConfig, ScenarioId,
};

/// Builds the jaywalking contingency game.
///
/// Hypotheses are the pedestrian's goal curb, ordered `[left, right]` to
/// match the belief. The keep-out region around the pedestrian is open only
/// opposite its goal, so the ego passes behind the pedestrian: on the right
/// when it crosses left, on the left when it crosses right.
pub fn build_jaywalking(config: &ScenarioConfig) -> Result<ContingencyGame, GameError> {
    if config.scenario != ScenarioId::Jaywalking {
        return Err(GameError::Invalid("config is not a jaywalking scenario".into()));
    }
    let section = config
        .jaywalking
        .as_ref()
        .ok_or_else(|| GameError::Invalid("jaywalking section missing".into()))?;

    let ego = car_player(
        "ego",
        config.dt,
        &section.ego.initial_state,
        section.ego.target_lane,
        section.ego.reference_velocity,
        &section.ego.weights,
        &section.ego.bounds,
        0,
    );

    let mut others = Vec::new();
    let mut shared = Vec::new();
    let hypotheses = [
        ("left", section.pedestrian.goals.left, 1.0),
        ("right", section.pedestrian.goals.right, -1.0),
    ];
    for (label, goal, goal_side) in hypotheses {
        let ped = ped_player(
            "pedestrian",
            config.dt,
            &section.pedestrian.initial_state,
            goal,
            &section.pedestrian.weights,
            &section.pedestrian.bounds,
            1,
        );
        others.push(vec![ped]);
        // Blocked side = the pedestrian's goal side; escape opposite it.
        let geometry = oriented_geometry(&section.collision, -goal_side);
        shared.push(vec![shared_collision(
            format!("collision-ego-pedestrian-{label}"),
            geometry,
            config.lse_sharpness,
            0,
            1,
            section.multiplier_ratio,
            1.0,
        )]);
    }

    Ok(ContingencyGame {
        dt: config.dt,
        horizon: config.horizon,
        branching_time: config.branching_time,
        belief: Belief::new(
            vec!["left".into(), "right".into()],
            config.belief.clone(),
        )?,
        ego,
        others,
        shared_constraints: shared,
    })
}
