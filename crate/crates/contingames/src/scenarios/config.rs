//! JSON scenario configuration: schema, defaults and validation.
//!
//! Unknown keys are hard errors everywhere. The full field-by-field schema
//! is documented in the book's scenarios chapter; `emit-defaults` writes
//! the same structures shipped under `configs/`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    Jaywalking,
    Overtaking,
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioId::Jaywalking => write!(f, "jaywalking"),
            ScenarioId::Overtaking => write!(f, "overtaking"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    /// Branch-aware plan with the configured branching time.
    Contingency,
    /// Fixed-uncertainty plan: the same game with the branching time pinned
    /// to the horizon, so a single control sequence serves all hypotheses.
    Baseline,
}

impl std::fmt::Display for MethodId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MethodId::Contingency => write!(f, "contingency"),
            MethodId::Baseline => write!(f, "baseline"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedLoopMode {
    /// Evaluate every hypothesis, weighting records by the belief.
    Exhaustive,
    /// Draw the realized hypothesis from the belief with the sweep seed.
    Sampled,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarWeights {
    pub lane: f64,
    pub progress: f64,
    pub velocity: f64,
    pub heading: f64,
    pub accel: f64,
    pub steer: f64,
}

impl Default for CarWeights {
    fn default() -> Self {
        CarWeights {
            lane: 1.0,
            progress: 1.0,
            velocity: 0.1,
            heading: 0.5,
            accel: 0.1,
            steer: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PedWeights {
    pub goal: f64,
    pub velocity: f64,
    pub accel: f64,
}

impl Default for PedWeights {
    fn default() -> Self {
        PedWeights {
            goal: 1.0,
            velocity: 0.1,
            accel: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarBounds {
    pub v_min: f64,
    pub v_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl Default for CarBounds {
    fn default() -> Self {
        CarBounds {
            v_min: 0.0,
            v_max: 12.0,
            a_min: -4.0,
            a_max: 3.0,
            omega_min: -1.0,
            omega_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PedBounds {
    pub v_min: f64,
    pub v_max: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl Default for PedBounds {
    fn default() -> Self {
        PedBounds {
            v_min: -2.0,
            v_max: 2.0,
            a_min: -1.0,
            a_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarAgent {
    /// `(px, py, v, heading)`.
    pub initial_state: Vec<f64>,
    pub target_lane: f64,
    pub reference_velocity: f64,
    pub weights: CarWeights,
    pub bounds: CarBounds,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetLanes {
    pub merge: f64,
    pub stay: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanAgent {
    pub initial_state: Vec<f64>,
    /// Per-hypothesis target lane; the belief orders as `[merge, stay]`.
    pub target_lanes: TargetLanes,
    pub reference_velocity: f64,
    pub weights: CarWeights,
    pub bounds: CarBounds,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PedGoals {
    /// Goal on the `+py` curb (driver's left).
    pub left: [f64; 2],
    /// Goal on the `-py` curb (driver's right).
    pub right: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PedAgent {
    /// `(px, py, vx, vy)`.
    pub initial_state: Vec<f64>,
    pub goals: PedGoals,
    pub weights: PedWeights,
    pub bounds: PedBounds,
}

/// Clearances (meters) defining the keep-out half-planes around an agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairClearance {
    pub ahead: f64,
    pub behind: f64,
    pub side: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JaywalkingSection {
    pub ego: CarAgent,
    pub pedestrian: PedAgent,
    pub collision: PairClearance,
    /// Ego-to-pedestrian multiplier ratio on the shared constraint.
    pub multiplier_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OvertakingSection {
    pub ego: CarAgent,
    pub human: HumanAgent,
    pub lead: CarAgent,
    pub collision: PairClearance,
    /// Ego-to-other multiplier ratio on overtaking pairs.
    pub multiplier_ratio: f64,
    /// Road centerline `py`, used to orient blocked sides from target lanes.
    pub road_center: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Grid resolution over the non-ego agent's initial position.
    pub grid_count_x: usize,
    pub grid_count_y: usize,
    /// Offsets relative to the nominal initial position.
    pub grid_extent_x: [f64; 2],
    pub grid_extent_y: [f64; 2],
    pub branching_times: Vec<usize>,
    pub methods: Vec<MethodId>,
    pub closed_loop_mode: ClosedLoopMode,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub scenario: ScenarioId,
    pub dt: f64,
    pub horizon: usize,
    pub branching_time: usize,
    /// Hypothesis probabilities: `[left, right]` or `[merge, stay]`.
    pub belief: Vec<f64>,
    pub lse_sharpness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jaywalking: Option<JaywalkingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overtaking: Option<OvertakingSection>,
    pub sweep: SweepSection,
}

impl ScenarioConfig {
    pub fn jaywalking_defaults() -> Self {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioId::Jaywalking,
            dt: 0.2,
            horizon: 25,
            branching_time: 10,
            belief: vec![0.5, 0.5],
            lse_sharpness: 5.0,
            jaywalking: Some(JaywalkingSection {
                ego: CarAgent {
                    initial_state: vec![-10.0, 0.0, 6.0, 0.0],
                    target_lane: 0.0,
                    reference_velocity: 6.0,
                    weights: CarWeights::default(),
                    bounds: CarBounds::default(),
                },
                pedestrian: PedAgent {
                    initial_state: vec![2.0, 0.0, 0.0, 0.0],
                    goals: PedGoals {
                        left: [2.0, 3.0],
                        right: [2.0, -3.0],
                    },
                    weights: PedWeights::default(),
                    bounds: PedBounds::default(),
                },
                collision: PairClearance {
                    ahead: 3.0,
                    behind: 3.0,
                    side: 2.5,
                },
                multiplier_ratio: 10.0,
            }),
            overtaking: None,
            sweep: SweepSection {
                grid_count_x: 10,
                grid_count_y: 7,
                grid_extent_x: [-2.0, 2.5],
                grid_extent_y: [-1.5, 1.5],
                branching_times: vec![0, 5, 10, 15, 20, 25],
                methods: vec![MethodId::Contingency, MethodId::Baseline],
                closed_loop_mode: ClosedLoopMode::Exhaustive,
                seed: 7,
            },
        }
    }

    pub fn overtaking_defaults() -> Self {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioId::Overtaking,
            dt: 0.2,
            horizon: 25,
            branching_time: 10,
            belief: vec![0.5, 0.5],
            lse_sharpness: 5.0,
            jaywalking: None,
            overtaking: Some(OvertakingSection {
                ego: CarAgent {
                    initial_state: vec![-14.0, 0.0, 8.0, 0.0],
                    target_lane: 0.0,
                    reference_velocity: 8.0,
                    weights: CarWeights {
                        lane: 0.25,
                        ..CarWeights::default()
                    },
                    bounds: CarBounds::default(),
                },
                human: HumanAgent {
                    initial_state: vec![0.0, 0.0, 5.0, 0.0],
                    target_lanes: TargetLanes {
                        merge: 3.0,
                        stay: 0.0,
                    },
                    reference_velocity: 5.0,
                    // Lane keeping dominates progress so the stay hypothesis
                    // really follows the lead instead of swinging around it.
                    weights: CarWeights {
                        lane: 2.0,
                        ..CarWeights::default()
                    },
                    bounds: CarBounds::default(),
                },
                lead: CarAgent {
                    initial_state: vec![10.0, 0.0, 3.0, 0.0],
                    target_lane: 0.0,
                    reference_velocity: 3.0,
                    weights: CarWeights::default(),
                    bounds: CarBounds::default(),
                },
                collision: PairClearance {
                    ahead: 5.0,
                    behind: 5.0,
                    side: 2.0,
                },
                multiplier_ratio: 1000.0,
                road_center: 1.5,
            }),
            sweep: SweepSection {
                grid_count_x: 10,
                grid_count_y: 7,
                grid_extent_x: [-2.5, 3.0],
                grid_extent_y: [-0.4, 0.4],
                branching_times: vec![0, 5, 10, 15, 20, 25],
                methods: vec![MethodId::Contingency, MethodId::Baseline],
                closed_loop_mode: ClosedLoopMode::Exhaustive,
                seed: 7,
            },
        }
    }

    pub fn defaults_for(scenario: ScenarioId) -> Self {
        match scenario {
            ScenarioId::Jaywalking => Self::jaywalking_defaults(),
            ScenarioId::Overtaking => Self::overtaking_defaults(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The nominal initial position swept by the evaluation grid (the
    /// pedestrian in jaywalking, the human car in overtaking).
    pub fn swept_agent_nominal(&self) -> [f64; 2] {
        match self.scenario {
            ScenarioId::Jaywalking => {
                let p = &self.jaywalking.as_ref().expect("validated").pedestrian;
                [p.initial_state[0], p.initial_state[1]]
            }
            ScenarioId::Overtaking => {
                let h = &self.overtaking.as_ref().expect("validated").human;
                [h.initial_state[0], h.initial_state[1]]
            }
        }
    }

    /// Writes the swept agent's initial position. For the jaywalking
    /// scenario the crossing goals translate along the road with the
    /// pedestrian, so every grid point poses the same crossing problem at a
    /// different road position.
    pub fn set_swept_agent_position(&mut self, position: [f64; 2]) {
        match self.scenario {
            ScenarioId::Jaywalking => {
                let p = &mut self.jaywalking.as_mut().expect("validated").pedestrian;
                let shift = position[0] - p.initial_state[0];
                p.initial_state[0] = position[0];
                p.initial_state[1] = position[1];
                p.goals.left[0] += shift;
                p.goals.right[0] += shift;
            }
            ScenarioId::Overtaking => {
                let h = &mut self.overtaking.as_mut().expect("validated").human;
                h.initial_state[0] = position[0];
                h.initial_state[1] = position[1];
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Invalid(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.dt > 0.0) {
            return Err(ConfigError::Invalid("dt must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(ConfigError::Invalid("horizon must be >= 1".into()));
        }
        if self.branching_time > self.horizon {
            return Err(ConfigError::Invalid(
                "branching_time must not exceed horizon".into(),
            ));
        }
        if self.belief.len() != 2 {
            return Err(ConfigError::Invalid(
                "belief must have exactly two entries".into(),
            ));
        }
        if self.belief.iter().any(|p| *p < 0.0)
            || (self.belief.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(ConfigError::Invalid(
                "belief entries must be nonnegative and sum to 1".into(),
            ));
        }
        if !(self.lse_sharpness > 0.0) {
            return Err(ConfigError::Invalid("lse_sharpness must be positive".into()));
        }
        match self.scenario {
            ScenarioId::Jaywalking => {
                let section = self.jaywalking.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("jaywalking section missing".into())
                })?;
                if self.overtaking.is_some() {
                    return Err(ConfigError::Invalid(
                        "overtaking section present for jaywalking scenario".into(),
                    ));
                }
                validate_car("ego", &section.ego.initial_state, &section.ego.weights)?;
                validate_ped(&section.pedestrian)?;
                validate_clearance(&section.collision)?;
                if !(section.multiplier_ratio > 0.0) {
                    return Err(ConfigError::Invalid(
                        "multiplier_ratio must be positive".into(),
                    ));
                }
            }
            ScenarioId::Overtaking => {
                let section = self.overtaking.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("overtaking section missing".into())
                })?;
                if self.jaywalking.is_some() {
                    return Err(ConfigError::Invalid(
                        "jaywalking section present for overtaking scenario".into(),
                    ));
                }
                validate_car("ego", &section.ego.initial_state, &section.ego.weights)?;
                validate_car("human", &section.human.initial_state, &section.human.weights)?;
                validate_car("lead", &section.lead.initial_state, &section.lead.weights)?;
                validate_clearance(&section.collision)?;
                if !(section.multiplier_ratio > 0.0) {
                    return Err(ConfigError::Invalid(
                        "multiplier_ratio must be positive".into(),
                    ));
                }
            }
        }
        if self.sweep.grid_count_x == 0 || self.sweep.grid_count_y == 0 {
            return Err(ConfigError::Invalid("sweep grid must be nonempty".into()));
        }
        if self.sweep.branching_times.is_empty() {
            return Err(ConfigError::Invalid(
                "sweep needs at least one branching time".into(),
            ));
        }
        if self.sweep.branching_times.iter().any(|t| *t > self.horizon) {
            return Err(ConfigError::Invalid(
                "sweep branching times must lie within the horizon".into(),
            ));
        }
        if self.sweep.methods.is_empty() {
            return Err(ConfigError::Invalid("sweep needs at least one method".into()));
        }
        Ok(())
    }
}

fn validate_car(name: &str, initial: &[f64], weights: &CarWeights) -> Result<(), ConfigError> {
    if initial.len() != 4 {
        return Err(ConfigError::Invalid(format!(
            "{name}: initial_state must have 4 entries (px, py, v, heading)"
        )));
    }
    let w = [
        weights.lane,
        weights.progress,
        weights.velocity,
        weights.heading,
        weights.accel,
        weights.steer,
    ];
    if w.iter().any(|x| *x < 0.0) {
        return Err(ConfigError::Invalid(format!("{name}: weights must be >= 0")));
    }
    Ok(())
}

fn validate_ped(ped: &PedAgent) -> Result<(), ConfigError> {
    if ped.initial_state.len() != 4 {
        return Err(ConfigError::Invalid(
            "pedestrian: initial_state must have 4 entries (px, py, vx, vy)".into(),
        ));
    }
    if ped.weights.goal < 0.0 || ped.weights.velocity < 0.0 || ped.weights.accel < 0.0 {
        return Err(ConfigError::Invalid("pedestrian: weights must be >= 0".into()));
    }
    Ok(())
}

fn validate_clearance(c: &PairClearance) -> Result<(), ConfigError> {
    if !(c.ahead > 0.0 && c.behind > 0.0 && c.side > 0.0) {
        return Err(ConfigError::Invalid(
            "collision clearances must be positive".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        for config in [
            ScenarioConfig::jaywalking_defaults(),
            ScenarioConfig::overtaking_defaults(),
        ] {
            config.validate().unwrap();
            let text = config.to_json_pretty();
            let back = ScenarioConfig::from_json(&text).unwrap();
            assert_eq!(text, back.to_json_pretty());
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut value: serde_json::Value =
            serde_json::from_str(&ScenarioConfig::jaywalking_defaults().to_json_pretty()).unwrap();
        value["surprise"] = serde_json::json!(1);
        let err = ScenarioConfig::from_json(&value.to_string());
        assert!(matches!(err, Err(ConfigError::Parse(_))));
    }

    #[test]
    fn nested_unknown_keys_are_rejected() {
        let mut value: serde_json::Value =
            serde_json::from_str(&ScenarioConfig::jaywalking_defaults().to_json_pretty()).unwrap();
        value["jaywalking"]["ego"]["turbo"] = serde_json::json!(true);
        assert!(ScenarioConfig::from_json(&value.to_string()).is_err());
    }

    #[test]
    fn mismatched_section_is_rejected() {
        let mut config = ScenarioConfig::jaywalking_defaults();
        config.scenario = ScenarioId::Overtaking;
        assert!(config.validate().is_err());
    }

    #[test]
    fn bad_belief_is_rejected() {
        let mut config = ScenarioConfig::jaywalking_defaults();
        config.belief = vec![0.7, 0.7];
        assert!(config.validate().is_err());
    }
}
