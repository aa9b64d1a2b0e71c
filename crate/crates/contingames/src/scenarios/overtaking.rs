//! Highway overtaking scenario: ego, human-driven car, slow lead car.

use crate::game::{Belief, ContingencyGame, GameError};

use super::{car_player, oriented_geometry, shared_collision, ScenarioConfig, ScenarioId};

/// Builds the three-player overtaking contingency game.
///
/// Hypotheses are the human car's target lane, ordered `[merge, stay]` to
/// match the belief. Around every car the keep-out region is open opposite
/// the side of that car's target lane, so nobody overtakes a car on the
/// side it is (or may be) moving towards. The ego carries the inflated
/// multiplier ratio on the pairs it participates in.
pub fn build_overtaking(config: &ScenarioConfig) -> Result<ContingencyGame, GameError> {
    if config.scenario != ScenarioId::Overtaking {
        return Err(GameError::Invalid("config is not an overtaking scenario".into()));
    }
    let section = config
        .overtaking
        .as_ref()
        .ok_or_else(|| GameError::Invalid("overtaking section missing".into()))?;

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

    // Blocked side of a car = the side of the road its target lane lies on.
    let blocked_side = |target_lane: f64| -> f64 {
        if target_lane >= section.road_center {
            1.0
        } else {
            -1.0
        }
    };

    let mut others = Vec::new();
    let mut shared = Vec::new();
    let hypotheses = [
        ("merge", section.human.target_lanes.merge),
        ("stay", section.human.target_lanes.stay),
    ];
    for (label, human_lane) in hypotheses {
        let human = car_player(
            "human",
            config.dt,
            &section.human.initial_state,
            human_lane,
            section.human.reference_velocity,
            &section.human.weights,
            &section.human.bounds,
            1,
        );
        let lead = car_player(
            "lead",
            config.dt,
            &section.lead.initial_state,
            section.lead.target_lane,
            section.lead.reference_velocity,
            &section.lead.weights,
            &section.lead.bounds,
            2,
        );
        others.push(vec![human, lead]);

        let human_geometry =
            oriented_geometry(&section.collision, -blocked_side(human_lane));
        let lead_geometry =
            oriented_geometry(&section.collision, -blocked_side(section.lead.target_lane));
        shared.push(vec![
            shared_collision(
                format!("collision-ego-human-{label}"),
                human_geometry,
                config.lse_sharpness,
                0,
                1,
                section.multiplier_ratio,
                1.0,
            ),
            shared_collision(
                format!("collision-ego-lead-{label}"),
                lead_geometry,
                config.lse_sharpness,
                0,
                2,
                section.multiplier_ratio,
                1.0,
            ),
            shared_collision(
                format!("collision-human-lead-{label}"),
                lead_geometry,
                config.lse_sharpness,
                1,
                2,
                1.0,
                1.0,
            ),
        ]);
    }

    Ok(ContingencyGame {
        dt: config.dt,
        horizon: config.horizon,
        branching_time: config.branching_time,
        belief: Belief::new(
            vec!["merge".into(), "stay".into()],
            config.belief.clone(),
        )?,
        ego,
        others,
        shared_constraints: shared,
    })
}
