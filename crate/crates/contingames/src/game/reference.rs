//! Straight-line reference evaluation of Lagrangians and constraint stacks.
//!
//! Everything here recomputes quantities directly from the game description
//! and a stacked point, without touching the sparse assembler. Tests
//! difference these values to cross-check the synthesized residual, so this
//! module must stay independent of [`super::kkt`]'s work-item machinery.

use super::{ContingencyGame, KktLayout, SliceKind, StageInputs};

fn gather_ids(layout: &KktLayout, hyp: usize, inputs: &StageInputs, t: usize) -> Vec<usize> {
    let mut ids = Vec::new();
    for slice in &inputs.0 {
        match slice.kind {
            SliceKind::State => {
                for c in 0..state_dim(layout, slice.player) {
                    ids.push(layout.state_id(hyp, slice.player, t, c));
                }
            }
            SliceKind::Control => {
                for c in 0..control_dim(layout, slice.player) {
                    ids.push(layout.control_id(hyp, slice.player, t, c));
                }
            }
        }
    }
    ids
}

fn state_dim(layout: &KktLayout, player: usize) -> usize {
    layout.state_dim(player)
}

fn control_dim(layout: &KktLayout, player: usize) -> usize {
    layout.control_dim(player)
}

fn gather(v: &[f64], ids: &[usize]) -> Vec<f64> {
    ids.iter().map(|&i| v[i]).collect()
}

/// Stacked inequality values of one player under one hypothesis, in the
/// exact multiplier-block order used by the layout.
pub fn private_inequality_values(
    game: &ContingencyGame,
    layout: &KktLayout,
    v: &[f64],
    hyp: usize,
    player: usize,
) -> Vec<f64> {
    let spec = game.player(hyp, player);
    let mut h = Vec::new();
    for t in 0..game.horizon {
        for b in &spec.state_bounds {
            let val = v[layout.state_id(hyp, player, t, b.index)];
            if b.min.is_finite() {
                h.push(val - b.min);
            }
            if b.max.is_finite() {
                h.push(b.max - val);
            }
        }
        for b in &spec.control_bounds {
            let val = v[layout.control_id(hyp, player, t, b.index)];
            if b.min.is_finite() {
                h.push(val - b.min);
            }
            if b.max.is_finite() {
                h.push(b.max - val);
            }
        }
    }
    for c in &spec.private_constraints {
        let mut out = vec![0.0; c.map.codim()];
        for t in 0..game.horizon {
            let x = gather(v, &gather_ids(layout, hyp, &c.inputs, t));
            c.map.values(&x, &mut out);
            h.extend_from_slice(&out);
        }
    }
    h
}

/// Stacked shared-constraint values of one hypothesis, constraint-major.
pub fn shared_inequality_values(
    game: &ContingencyGame,
    layout: &KktLayout,
    v: &[f64],
    hyp: usize,
) -> Vec<Vec<f64>> {
    game.shared_constraints[hyp]
        .iter()
        .map(|shared| {
            let mut g = Vec::new();
            let mut out = vec![0.0; shared.map.codim()];
            for t in 0..game.horizon {
                let x = gather(v, &gather_ids(layout, hyp, &shared.inputs, t));
                shared.map.values(&x, &mut out);
                g.extend_from_slice(&out);
            }
            g
        })
        .collect()
}

/// Dynamics equality residuals of one player, time-major, initial row first.
pub fn dynamics_values(
    game: &ContingencyGame,
    layout: &KktLayout,
    v: &[f64],
    hyp: usize,
    player: usize,
) -> Vec<f64> {
    let spec = game.player(hyp, player);
    let s = spec.state_dim;
    let mut d = Vec::with_capacity(game.horizon * s);
    for c in 0..s {
        d.push(v[layout.state_id(hyp, player, 0, c)] - spec.initial_state[c]);
    }
    let mut next = vec![0.0; s];
    for t in 0..game.horizon - 1 {
        let mut stage = Vec::with_capacity(s + spec.control_dim);
        for c in 0..s {
            stage.push(v[layout.state_id(hyp, player, t, c)]);
        }
        for c in 0..spec.control_dim {
            stage.push(v[layout.control_id(hyp, player, t, c)]);
        }
        spec.dynamics.values(&stage, &mut next);
        for c in 0..s {
            d.push(v[layout.state_id(hyp, player, t + 1, c)] - next[c]);
        }
    }
    d
}

/// Contingency rows `u_0[t] - u_k[t]`, branch-major then time-major.
pub fn contingency_values(game: &ContingencyGame, layout: &KktLayout, v: &[f64]) -> Vec<f64> {
    let mut c = Vec::new();
    for hyp in 1..game.hypotheses() {
        for t in 0..game.branching_time {
            for comp in 0..game.ego.control_dim {
                c.push(v[layout.control_id(0, 0, t, comp)] - v[layout.control_id(hyp, 0, t, comp)]);
            }
        }
    }
    c
}

/// Scalar Lagrangian of one player at a stacked point.
///
/// For the ego (`player == 0`) this sums belief-weighted costs and
/// constraint terms over every hypothesis plus the contingency term; for
/// the others it covers their single hypothesis `hyp`.
pub fn lagrangian_value(
    game: &ContingencyGame,
    layout: &KktLayout,
    v: &[f64],
    hyp: usize,
    player: usize,
) -> f64 {
    let hypotheses: Vec<usize> = if player == 0 {
        (0..game.hypotheses()).collect()
    } else {
        vec![hyp]
    };
    let mut total = 0.0;
    for &k in &hypotheses {
        let spec = game.player(k, player);
        let weight = if player == 0 {
            super::kkt::ego_cost_weight(game.belief.probability(k))
        } else {
            1.0
        };
        for t in 0..game.horizon {
            let x = gather(v, &gather_ids(layout, k, &spec.cost_inputs, t));
            total += weight * spec.stage_cost.value(&x);
        }
        let h = private_inequality_values(game, layout, v, k, player);
        let lam_range = layout.lambda_range(k, player);
        for (i, hv) in h.iter().enumerate() {
            total -= v[lam_range.start + i] * hv;
        }
        for (ci, g) in shared_inequality_values(game, layout, v, k).iter().enumerate() {
            let shared = &game.shared_constraints[k][ci];
            if let Some(kappa) = shared.effective_weight(player) {
                let sigma_range = layout.sigma_range(k, ci);
                for (i, gv) in g.iter().enumerate() {
                    total -= kappa * v[sigma_range.start + i] * gv;
                }
            }
        }
        let d = dynamics_values(game, layout, v, k, player);
        let mu0 = layout.mu_id(k, player, 0, 0);
        for (i, dv) in d.iter().enumerate() {
            total -= v[mu0 + i] * dv;
        }
    }
    if player == 0 {
        let c = contingency_values(game, layout, v);
        let rho = layout.rho_range();
        for (i, cv) in c.iter().enumerate() {
            total += v[rho.start + i] * cv;
        }
    }
    total
}
