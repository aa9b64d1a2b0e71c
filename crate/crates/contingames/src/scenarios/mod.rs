//! The two shipped driving scenarios and their building blocks.
//!
//! Both scenarios share an axis convention: cars drive along `px` with
//! heading measured from that axis, lanes and curbs sit at constant `py`.
//!
//! - `jaywalking`: an ego car approaches a pedestrian standing mid-road
//!   whose crossing direction (left or right curb) is uncertain. The ego
//!   must pass behind the pedestrian, so the keep-out region around the
//!   pedestrian is open only opposite its goal side.
//! - `overtaking`: an ego car wants to overtake a human-driven car with
//!   slow traffic ahead; the human may merge into the fast lane or stay.
//!   Cars cannot be overtaken on the side of their target lane.
//!
//! Collision avoidance is a smooth log-sum-exp relaxation of "escape at
//! least one half-plane" around the other agent, which keeps every
//! synthesized residual differentiable.

use std::sync::Arc;

use crate::autodiff::{Real, ScalarMap, VectorMap};
use crate::dynamics::{BoundRow, PointMassMap, UnicycleMap};
use crate::game::{
    Belief, ContingencyGame, GameError, PlayerSpec, SharedConstraintSpec, StageInputs,
};

mod config;
mod jaywalking;
mod overtaking;

pub use config::{
    CarAgent, CarBounds, CarWeights, ClosedLoopMode, ConfigError, HumanAgent, JaywalkingSection,
    MethodId, OvertakingSection, PairClearance, PedAgent, PedBounds, PedGoals, PedWeights,
    ScenarioConfig, ScenarioId, SweepSection, TargetLanes,
};
pub use jaywalking::build_jaywalking;
pub use overtaking::build_overtaking;

/// Smooth maximum `(1/alpha) * log(sum_i exp(alpha * c_i))`, evaluated with
/// a max shift so large arguments cannot overflow.
pub fn lse_smooth_max(values: &[f64], alpha: f64) -> f64 {
    assert!(alpha > 0.0, "lse sharpness must be positive");
    assert!(!values.is_empty(), "lse of an empty list");
    lse_generic(values, alpha)
}

fn lse_generic<S: Real>(values: &[S], alpha: f64) -> S {
    let shift = values
        .iter()
        .map(|v| v.value())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut acc = S::from_f64(0.0);
    for v in values {
        acc = acc + ((v.clone() - shift) * alpha).exp();
    }
    acc.ln() / alpha + shift
}

/// Half-plane normals bounding a keep-out region in relative position
/// space. The fourth side is deliberately missing: the region is unbounded
/// there and that side cannot be used to pass.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CollisionGeometry {
    pub n_top: [f64; 2],
    pub n_side: [f64; 2],
    pub n_bottom: [f64; 2],
}

/// Smooth collision clearance of a relative position `d`:
/// `LSE_alpha(d.n_top - 1, d.n_side - 1, d.n_bottom - 1)`.
/// Nonnegative values mean at least one escape half-plane is satisfied
/// (up to the log-sum-exp slack).
pub fn collision_constraint(d: [f64; 2], geometry: &CollisionGeometry, alpha: f64) -> f64 {
    let terms = [
        d[0] * geometry.n_top[0] + d[1] * geometry.n_top[1] - 1.0,
        d[0] * geometry.n_side[0] + d[1] * geometry.n_side[1] - 1.0,
        d[0] * geometry.n_bottom[0] + d[1] * geometry.n_bottom[1] - 1.0,
    ];
    lse_smooth_max(&terms, alpha)
}

/// [`collision_constraint`] as a stage map over two players' states.
///
/// Reads `(px, py)` of both players from stacked `(state_i, state_j)`
/// inputs and emits one clearance row; `j_offset` is the flat index where
/// player `j`'s state starts.
#[derive(Debug, Clone)]
pub struct CollisionMap {
    pub geometry: CollisionGeometry,
    pub alpha: f64,
    pub j_offset: usize,
    pub arity: usize,
}

impl VectorMap for CollisionMap {
    fn arity(&self) -> usize {
        self.arity
    }
    fn codim(&self) -> usize {
        1
    }
    // Only the four position components carry curvature.
    fn hess_sparsity(&self) -> Option<Vec<(usize, usize)>> {
        let p = [0, 1, self.j_offset, self.j_offset + 1];
        Some(
            p.iter()
                .flat_map(|&i| p.iter().map(move |&j| (i, j)))
                .collect(),
        )
    }
    fn eval<S: Real>(&self, x: &[S], out: &mut [S]) {
        let dx = x[0].clone() - x[self.j_offset].clone();
        let dy = x[1].clone() - x[self.j_offset + 1].clone();
        let g = &self.geometry;
        let terms = [
            dx.clone() * g.n_top[0] + dy.clone() * g.n_top[1] - 1.0,
            dx.clone() * g.n_side[0] + dy.clone() * g.n_side[1] - 1.0,
            dx * g.n_bottom[0] + dy * g.n_bottom[1] - 1.0,
        ];
        out[0] = lse_generic(&terms, self.alpha);
    }
}

/// Car running cost: lane tracking, progress at a reference speed, and
/// regularizers on speed, heading and both controls.
#[derive(Debug, Clone)]
pub struct CarStageCost {
    pub weights: CarWeights,
    pub target_lane: f64,
    pub reference_velocity: f64,
}

impl ScalarMap for CarStageCost {
    fn arity(&self) -> usize {
        6
    }
    // Curvature touches lane, speed, heading and the two controls; the
    // progress term couples speed and heading.
    fn hess_sparsity(&self) -> Option<Vec<(usize, usize)>> {
        Some(vec![
            (1, 1),
            (2, 2),
            (3, 3),
            (2, 3),
            (3, 2),
            (4, 4),
            (5, 5),
        ])
    }
    fn eval<S: Real>(&self, x: &[S]) -> S {
        let (py, v, heading) = (&x[1], &x[2], &x[3]);
        let (accel, omega) = (&x[4], &x[5]);
        let lane = py.clone() - self.target_lane;
        let progress = v.clone() * heading.cos() - self.reference_velocity;
        lane.clone() * lane * self.weights.lane
            + progress.clone() * progress * self.weights.progress
            + v.clone() * v.clone() * self.weights.velocity
            + heading.clone() * heading.clone() * self.weights.heading
            + accel.clone() * accel.clone() * self.weights.accel
            + omega.clone() * omega.clone() * self.weights.steer
    }
}

/// Pedestrian running cost: squared distance to a goal position plus
/// velocity and acceleration regularizers.
#[derive(Debug, Clone)]
pub struct PedStageCost {
    pub weights: PedWeights,
    pub goal: [f64; 2],
}

impl ScalarMap for PedStageCost {
    fn arity(&self) -> usize {
        6
    }
    fn hess_sparsity(&self) -> Option<Vec<(usize, usize)>> {
        Some((0..6).map(|i| (i, i)).collect())
    }
    fn eval<S: Real>(&self, x: &[S]) -> S {
        let gx = x[0].clone() - self.goal[0];
        let gy = x[1].clone() - self.goal[1];
        gx.clone() * gx * self.weights.goal
            + gy.clone() * gy * self.weights.goal
            + x[2].clone() * x[2].clone() * self.weights.velocity
            + x[3].clone() * x[3].clone() * self.weights.velocity
            + x[4].clone() * x[4].clone() * self.weights.accel
            + x[5].clone() * x[5].clone() * self.weights.accel
    }
}

pub(crate) fn car_player(
    name: &str,
    dt: f64,
    initial_state: &[f64],
    target_lane: f64,
    reference_velocity: f64,
    weights: &CarWeights,
    bounds: &CarBounds,
    roster_index: usize,
) -> PlayerSpec {
    PlayerSpec {
        name: name.into(),
        state_dim: 4,
        control_dim: 2,
        dynamics: Arc::new(UnicycleMap { dt }),
        initial_state: initial_state.to_vec(),
        stage_cost: Arc::new(CarStageCost {
            weights: weights.clone(),
            target_lane,
            reference_velocity,
        }),
        cost_inputs: StageInputs::own(roster_index),
        state_bounds: vec![BoundRow {
            index: 2,
            min: bounds.v_min,
            max: bounds.v_max,
        }],
        control_bounds: vec![
            BoundRow {
                index: 0,
                min: bounds.a_min,
                max: bounds.a_max,
            },
            BoundRow {
                index: 1,
                min: bounds.omega_min,
                max: bounds.omega_max,
            },
        ],
        private_constraints: vec![],
    }
}

pub(crate) fn ped_player(
    name: &str,
    dt: f64,
    initial_state: &[f64],
    goal: [f64; 2],
    weights: &PedWeights,
    bounds: &PedBounds,
    roster_index: usize,
) -> PlayerSpec {
    PlayerSpec {
        name: name.into(),
        state_dim: 4,
        control_dim: 2,
        dynamics: Arc::new(PointMassMap { dt }),
        initial_state: initial_state.to_vec(),
        stage_cost: Arc::new(PedStageCost {
            weights: weights.clone(),
            goal,
        }),
        cost_inputs: StageInputs::own(roster_index),
        state_bounds: vec![
            BoundRow {
                index: 2,
                min: bounds.v_min,
                max: bounds.v_max,
            },
            BoundRow {
                index: 3,
                min: bounds.v_min,
                max: bounds.v_max,
            },
        ],
        control_bounds: vec![
            BoundRow {
                index: 0,
                min: bounds.a_min,
                max: bounds.a_max,
            },
            BoundRow {
                index: 1,
                min: bounds.a_min,
                max: bounds.a_max,
            },
        ],
        private_constraints: vec![],
    }
}

/// Keep-out geometry around agent `j`, open only on `passable_side`
/// (`+1` = the `+py` side, `-1` = the `-py` side).
pub(crate) fn oriented_geometry(clearance: &PairClearance, passable_side: f64) -> CollisionGeometry {
    CollisionGeometry {
        n_top: [1.0 / clearance.ahead, 0.0],
        n_side: [0.0, passable_side / clearance.side],
        n_bottom: [-1.0 / clearance.behind, 0.0],
    }
}

pub(crate) fn shared_collision(
    label: String,
    geometry: CollisionGeometry,
    alpha: f64,
    i: usize,
    j: usize,
    kappa_i: f64,
    kappa_j: f64,
) -> SharedConstraintSpec {
    SharedConstraintSpec {
        label,
        map: Arc::new(CollisionMap {
            geometry,
            alpha,
            j_offset: 4,
            arity: 8,
        }),
        inputs: StageInputs::states(&[i, j]),
        participants: vec![(i, kappa_i), (j, kappa_j)],
    }
}

/// Builds the configured scenario's contingency game.
pub fn build_game(config: &ScenarioConfig) -> Result<ContingencyGame, GameError> {
    config
        .validate()
        .map_err(|e| GameError::Invalid(e.to_string()))?;
    match config.scenario {
        ScenarioId::Jaywalking => build_jaywalking(config),
        ScenarioId::Overtaking => build_overtaking(config),
    }
}

/// A single-hypothesis copy of a built game: hypothesis `hyp` of `game`,
/// starting from the supplied initial states, over a possibly shorter
/// horizon. Used by certainty-equivalent solves and closed-loop replanning.
pub fn single_hypothesis_game(
    game: &ContingencyGame,
    hyp: usize,
    initial_states: Option<&[Vec<f64>]>,
    horizon: usize,
) -> ContingencyGame {
    let mut ego = game.ego.clone();
    let mut others = game.others[hyp].clone();
    if let Some(states) = initial_states {
        ego.initial_state = states[0].clone();
        for (player, state) in others.iter_mut().zip(&states[1..]) {
            player.initial_state = state.clone();
        }
    }
    ContingencyGame {
        dt: game.dt,
        horizon,
        branching_time: 0,
        belief: Belief::new(vec![game.belief.labels()[hyp].clone()], vec![1.0])
            .expect("single-hypothesis belief"),
        ego,
        others: vec![others],
        shared_constraints: vec![game.shared_constraints[hyp].clone()],
    }
}
