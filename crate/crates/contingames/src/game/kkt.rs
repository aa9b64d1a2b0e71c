//! Synthesis of the joint KKT system into a mixed complementarity problem.
//!
//! The stacked variable vector holds, per hypothesis: every player's states
//! and controls (free), dynamics equality multipliers (free), inequality
//! multipliers for bounds and private constraints (nonnegative) and one
//! owner-side multiplier block per shared constraint (nonnegative); a final
//! free block carries the contingency-constraint multiplier. Because the
//! problem is square, each variable's index doubles as the index of its
//! paired residual row: stationarity rows pair with primal variables,
//! constraint rows with their multipliers.
//!
//! Shared constraints appear once per participating player inside the
//! stationarity rows, scaled by the fixed multiplier ratio
//! `lambda_p = (kappa_p / kappa_owner) * sigma`; only the owner's
//! complementarity row is kept, which removes the solution ambiguity that
//! duplicated multipliers would introduce.
//!
//! All derivative work is stage-local: each cost, dynamics step and
//! constraint touches a handful of variables, so the Jacobian pattern is
//! sparse and constant across evaluations.

use std::ops::Range;
use std::sync::Arc;

use crate::autodiff::{DiffScalarFn, DiffVectorFn};
use crate::mcp::{BlockLabel, McpError, MixedComplementarityProblem};
use crate::sparse::SparsityPattern;

use super::{
    ContingencyGame, EquilibriumSolution, GameError, HypothesisMultipliers, PlayerTrajectory,
    SliceKind, StageInputs, TrajectoryProfile,
};

/// Variable/row counts of a synthesized problem, by block family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct McpCensus {
    pub primal: usize,
    pub dynamics_multipliers: usize,
    pub private_multipliers: usize,
    pub shared_multipliers: usize,
    pub contingency_multipliers: usize,
    pub total: usize,
    pub structural_nonzeros: usize,
}

/// Index map from game structure to stacked MCP coordinates.
#[derive(Debug, Clone)]
pub struct KktLayout {
    pub horizon: usize,
    pub hypotheses: usize,
    pub roster: usize,
    state_dims: Vec<usize>,
    control_dims: Vec<usize>,
    /// Per (hypothesis, player): offset of the state block.
    state_offsets: Vec<Vec<usize>>,
    control_offsets: Vec<Vec<usize>>,
    mu_offsets: Vec<Vec<usize>>,
    /// Per (hypothesis, player): offset and per-stage row count of the
    /// stacked inequality block (bounds first, then private constraints).
    lambda_ranges: Vec<Vec<Range<usize>>>,
    /// Per (hypothesis, shared constraint): multiplier block range.
    sigma_ranges: Vec<Vec<Range<usize>>>,
    rho_range: Range<usize>,
    dim: usize,
    census: McpCensus,
    block_labels: Vec<BlockLabel>,
}

impl KktLayout {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn census(&self) -> McpCensus {
        self.census
    }

    pub fn block_labels(&self) -> &[BlockLabel] {
        &self.block_labels
    }

    pub fn state_dim(&self, player: usize) -> usize {
        self.state_dims[player]
    }

    pub fn control_dim(&self, player: usize) -> usize {
        self.control_dims[player]
    }

    pub fn state_id(&self, hyp: usize, player: usize, t: usize, comp: usize) -> usize {
        self.state_offsets[hyp][player] + t * self.state_dims[player] + comp
    }

    pub fn control_id(&self, hyp: usize, player: usize, t: usize, comp: usize) -> usize {
        self.control_offsets[hyp][player] + t * self.control_dims[player] + comp
    }

    pub fn mu_id(&self, hyp: usize, player: usize, t: usize, comp: usize) -> usize {
        self.mu_offsets[hyp][player] + t * self.state_dims[player] + comp
    }

    pub fn lambda_range(&self, hyp: usize, player: usize) -> Range<usize> {
        self.lambda_ranges[hyp][player].clone()
    }

    pub fn sigma_range(&self, hyp: usize, constraint: usize) -> Range<usize> {
        self.sigma_ranges[hyp][constraint].clone()
    }

    pub fn rho_range(&self) -> Range<usize> {
        self.rho_range.clone()
    }

    /// Range of all primal variables of one player under one hypothesis.
    pub fn primal_range(&self, hyp: usize, player: usize) -> Range<usize> {
        self.state_offsets[hyp][player]
            ..self.control_offsets[hyp][player] + self.horizon * self.control_dims[player]
    }

    fn stage_slice_ids(&self, hyp: usize, inputs: &StageInputs, t: usize) -> Vec<usize> {
        let mut ids = Vec::new();
        for slice in &inputs.0 {
            match slice.kind {
                SliceKind::State => {
                    for c in 0..self.state_dims[slice.player] {
                        ids.push(self.state_id(hyp, slice.player, t, c));
                    }
                }
                SliceKind::Control => {
                    for c in 0..self.control_dims[slice.player] {
                        ids.push(self.control_id(hyp, slice.player, t, c));
                    }
                }
            }
        }
        ids
    }

    fn owner_of_input(&self, inputs: &StageInputs, flat: usize) -> usize {
        let mut cursor = 0;
        for slice in &inputs.0 {
            let len = match slice.kind {
                SliceKind::State => self.state_dims[slice.player],
                SliceKind::Control => self.control_dims[slice.player],
            };
            if flat < cursor + len {
                return slice.player;
            }
            cursor += len;
        }
        unreachable!("flat input index out of range")
    }

    /// Packs a primal profile with every multiplier at `multiplier_init`.
    pub fn pack_profile(
        &self,
        profile: &TrajectoryProfile,
        multiplier_init: f64,
    ) -> Result<Vec<f64>, GameError> {
        let mut v = vec![multiplier_init; self.dim];
        for hyp in 0..self.hypotheses {
            for player in 0..self.roster {
                let traj = &profile.players[hyp][player];
                if traj.states.len() != self.horizon || traj.controls.len() != self.horizon {
                    return Err(GameError::Dimension(format!(
                        "profile for hypothesis {hyp}, player {player} does not span the horizon"
                    )));
                }
                for t in 0..self.horizon {
                    for c in 0..self.state_dims[player] {
                        v[self.state_id(hyp, player, t, c)] = traj.states[t][c];
                    }
                    for c in 0..self.control_dims[player] {
                        v[self.control_id(hyp, player, t, c)] = traj.controls[t][c];
                    }
                }
            }
        }
        Ok(v)
    }

    /// Splits a stacked point back into profile and multiplier blocks.
    pub fn unpack(&self, v: &[f64]) -> (TrajectoryProfile, Vec<HypothesisMultipliers>, Vec<f64>) {
        let mut players = Vec::with_capacity(self.hypotheses);
        let mut multipliers = Vec::with_capacity(self.hypotheses);
        for hyp in 0..self.hypotheses {
            let mut row = Vec::with_capacity(self.roster);
            let mut dynamics = Vec::with_capacity(self.roster);
            let mut private = Vec::with_capacity(self.roster);
            for player in 0..self.roster {
                let states = (0..self.horizon)
                    .map(|t| {
                        (0..self.state_dims[player])
                            .map(|c| v[self.state_id(hyp, player, t, c)])
                            .collect()
                    })
                    .collect();
                let controls = (0..self.horizon)
                    .map(|t| {
                        (0..self.control_dims[player])
                            .map(|c| v[self.control_id(hyp, player, t, c)])
                            .collect()
                    })
                    .collect();
                row.push(PlayerTrajectory { states, controls });
                dynamics.push(
                    (0..self.horizon * self.state_dims[player])
                        .map(|i| v[self.mu_offsets[hyp][player] + i])
                        .collect(),
                );
                private.push(v[self.lambda_ranges[hyp][player].clone()].to_vec());
            }
            let shared = self.sigma_ranges[hyp]
                .iter()
                .map(|r| v[r.clone()].to_vec())
                .collect();
            players.push(row);
            multipliers.push(HypothesisMultipliers {
                dynamics,
                private,
                shared,
            });
        }
        let rho = v[self.rho_range()].to_vec();
        (TrajectoryProfile { players }, multipliers, rho)
    }

    pub fn unpack_solution(
        &self,
        result: &crate::mcp::SolveResult,
    ) -> EquilibriumSolution {
        let (profile, multipliers, rho) = self.unpack(&result.solution);
        EquilibriumSolution {
            profile,
            multipliers,
            rho,
            kkt_residual: result.merit_norm,
            solver: result.clone(),
            mcp_point: result.solution.clone(),
        }
    }
}

/// One scalar cost term at one stage.
struct CostItem {
    map: Arc<dyn DiffScalarFn>,
    weight: f64,
    ids: Vec<usize>,
    /// Stationarity row per input; `None` when the input belongs to another
    /// player (their Lagrangian owns that derivative).
    rows: Vec<Option<usize>>,
    hess_slots: Vec<usize>,
    affine: bool,
}

/// One dynamics step `x_{t+1} = f(x_t, u_t)` of one player.
struct DynItem {
    map: Arc<dyn DiffVectorFn>,
    in_ids: Vec<usize>,
    /// Row (== variable id) of each mu component for this step.
    mu_ids: Vec<usize>,
    x_next_ids: Vec<usize>,
    jac_d_slots: Vec<usize>,
    eye_slots: Vec<usize>,
    station_mu_slots: Vec<usize>,
    station_xnext_slots: Vec<usize>,
    hess_slots: Vec<usize>,
    affine: bool,
}

/// Initial-state equality rows `x_0 - xhat` of one player.
struct InitItem {
    mu_ids: Vec<usize>,
    x_ids: Vec<usize>,
    xhat: Vec<f64>,
    eye_slots: Vec<usize>,
    station_slots: Vec<usize>,
}

/// One stage of a vector inequality (private or shared).
struct IneqItem {
    map: Arc<dyn DiffVectorFn>,
    in_ids: Vec<usize>,
    lam_ids: Vec<usize>,
    /// Per input: `-kappa_p/kappa_owner` for the owning player's rows,
    /// `-1` for private constraints, `0` to skip foreign inputs.
    row_weight: Vec<f64>,
    h_slots: Vec<usize>,
    station_slots: Vec<usize>,
    hess_slots: Vec<usize>,
    affine: bool,
}

/// One affine bound row `sign * v[id] + offset >= 0`.
struct BoundItem {
    lam_id: usize,
    id: usize,
    sign: f64,
    offset: f64,
    h_slot: usize,
    station_slot: usize,
}

/// One contingency row `u_first[t] - u_branch[t]`.
struct ContItem {
    rho_id: usize,
    u_first: usize,
    u_branch: usize,
    slots: [usize; 4],
}

const SKIP: usize = usize::MAX;

fn hess_pairs(declared: Option<Vec<(usize, usize)>>, n: usize) -> Vec<(usize, usize)> {
    declared.unwrap_or_else(|| {
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .collect()
    })
}

/// Cost weight floor for zero-probability hypotheses.
///
/// A branch with exactly zero belief mass has a cost-free ego trajectory
/// whose tail is determined only by feasibility; the stacked system then has
/// a manifold of equilibria, some of which lean on constraints and leak
/// multiplier force into the shared control prefix. Flooring the weight at
/// epsilon keeps that branch's trajectory uniquely determined and selects
/// the equilibrium where zero-mass branches track their own objective,
/// perturbing nonzero-mass stationarity by at most epsilon. The floor
/// sits well above the solver tolerance so the selection is actually
/// resolved rather than hidden inside the convergence slack.
pub const ZERO_MASS_COST_FLOOR: f64 = 1e-6;

pub(super) fn ego_cost_weight(probability: f64) -> f64 {
    probability.max(ZERO_MASS_COST_FLOOR)
}

struct Assembler {
    dim: usize,
    cost_items: Vec<CostItem>,
    dyn_items: Vec<DynItem>,
    init_items: Vec<InitItem>,
    ineq_items: Vec<IneqItem>,
    bound_items: Vec<BoundItem>,
    cont_items: Vec<ContItem>,
}

impl Assembler {
    fn sites(&self) -> Vec<(usize, usize)> {
        let mut sites = Vec::new();
        for item in &self.cost_items {
            if item.affine {
                continue;
            }
            let n = item.ids.len();
            match item.map.hess_sparsity() {
                Some(pairs) => {
                    for (i, j) in pairs {
                        if let Some(row) = item.rows[i] {
                            sites.push((row, item.ids[j]));
                        }
                    }
                }
                None => {
                    for i in 0..n {
                        if let Some(row) = item.rows[i] {
                            for j in 0..n {
                                sites.push((row, item.ids[j]));
                            }
                        }
                    }
                }
            }
        }
        for item in &self.dyn_items {
            let n = item.in_ids.len();
            let s = item.mu_ids.len();
            for m in 0..s {
                for i in 0..n {
                    sites.push((item.mu_ids[m], item.in_ids[i]));
                    sites.push((item.in_ids[i], item.mu_ids[m]));
                }
                sites.push((item.mu_ids[m], item.x_next_ids[m]));
                sites.push((item.x_next_ids[m], item.mu_ids[m]));
            }
            if !item.affine {
                match item.map.hess_sparsity() {
                    Some(pairs) => {
                        for (i, j) in pairs {
                            sites.push((item.in_ids[i], item.in_ids[j]));
                        }
                    }
                    None => {
                        for i in 0..n {
                            for j in 0..n {
                                sites.push((item.in_ids[i], item.in_ids[j]));
                            }
                        }
                    }
                }
            }
        }
        for item in &self.init_items {
            for m in 0..item.mu_ids.len() {
                sites.push((item.mu_ids[m], item.x_ids[m]));
                sites.push((item.x_ids[m], item.mu_ids[m]));
            }
        }
        for item in &self.ineq_items {
            let n = item.in_ids.len();
            let m = item.lam_ids.len();
            for r in 0..m {
                for i in 0..n {
                    sites.push((item.lam_ids[r], item.in_ids[i]));
                    if item.row_weight[i] != 0.0 {
                        sites.push((item.in_ids[i], item.lam_ids[r]));
                    }
                }
            }
            if !item.affine {
                match item.map.hess_sparsity() {
                    Some(pairs) => {
                        for (i, j) in pairs {
                            if item.row_weight[i] != 0.0 {
                                sites.push((item.in_ids[i], item.in_ids[j]));
                            }
                        }
                    }
                    None => {
                        for i in 0..n {
                            if item.row_weight[i] != 0.0 {
                                for j in 0..n {
                                    sites.push((item.in_ids[i], item.in_ids[j]));
                                }
                            }
                        }
                    }
                }
            }
        }
        for item in &self.bound_items {
            sites.push((item.lam_id, item.id));
            sites.push((item.id, item.lam_id));
        }
        for item in &self.cont_items {
            sites.push((item.rho_id, item.u_first));
            sites.push((item.rho_id, item.u_branch));
            sites.push((item.u_first, item.rho_id));
            sites.push((item.u_branch, item.rho_id));
        }
        sites
    }

    fn resolve(&mut self, pattern: &SparsityPattern) {
        for item in &mut self.cost_items {
            let n = item.ids.len();
            item.hess_slots = vec![SKIP; n * n];
            if item.affine {
                continue;
            }
            let pairs = hess_pairs(item.map.hess_sparsity(), n);
            for (i, j) in pairs {
                if let Some(row) = item.rows[i] {
                    item.hess_slots[i * n + j] = pattern.slot(row, item.ids[j]);
                }
            }
        }
        for item in &mut self.dyn_items {
            let n = item.in_ids.len();
            let s = item.mu_ids.len();
            item.jac_d_slots = vec![SKIP; s * n];
            item.station_mu_slots = vec![SKIP; n * s];
            item.eye_slots = vec![SKIP; s];
            item.station_xnext_slots = vec![SKIP; s];
            for m in 0..s {
                for i in 0..n {
                    item.jac_d_slots[m * n + i] = pattern.slot(item.mu_ids[m], item.in_ids[i]);
                    item.station_mu_slots[i * s + m] =
                        pattern.slot(item.in_ids[i], item.mu_ids[m]);
                }
                item.eye_slots[m] = pattern.slot(item.mu_ids[m], item.x_next_ids[m]);
                item.station_xnext_slots[m] = pattern.slot(item.x_next_ids[m], item.mu_ids[m]);
            }
            if !item.affine {
                item.hess_slots = vec![SKIP; n * n];
                for (i, j) in hess_pairs(item.map.hess_sparsity(), n) {
                    item.hess_slots[i * n + j] = pattern.slot(item.in_ids[i], item.in_ids[j]);
                }
            }
        }
        for item in &mut self.init_items {
            item.eye_slots = item
                .mu_ids
                .iter()
                .zip(&item.x_ids)
                .map(|(&m, &x)| pattern.slot(m, x))
                .collect();
            item.station_slots = item
                .mu_ids
                .iter()
                .zip(&item.x_ids)
                .map(|(&m, &x)| pattern.slot(x, m))
                .collect();
        }
        for item in &mut self.ineq_items {
            let n = item.in_ids.len();
            let m = item.lam_ids.len();
            item.h_slots = vec![SKIP; m * n];
            item.station_slots = vec![SKIP; n * m];
            for r in 0..m {
                for i in 0..n {
                    item.h_slots[r * n + i] = pattern.slot(item.lam_ids[r], item.in_ids[i]);
                    if item.row_weight[i] != 0.0 {
                        item.station_slots[i * m + r] =
                            pattern.slot(item.in_ids[i], item.lam_ids[r]);
                    }
                }
            }
            if !item.affine {
                item.hess_slots = vec![SKIP; n * n];
                for (i, j) in hess_pairs(item.map.hess_sparsity(), n) {
                    if item.row_weight[i] != 0.0 {
                        item.hess_slots[i * n + j] =
                            pattern.slot(item.in_ids[i], item.in_ids[j]);
                    }
                }
            }
        }
        for item in &mut self.bound_items {
            item.h_slot = pattern.slot(item.lam_id, item.id);
            item.station_slot = pattern.slot(item.id, item.lam_id);
        }
        for item in &mut self.cont_items {
            item.slots = [
                pattern.slot(item.rho_id, item.u_first),
                pattern.slot(item.rho_id, item.u_branch),
                pattern.slot(item.u_first, item.rho_id),
                pattern.slot(item.u_branch, item.rho_id),
            ];
        }
    }

    fn residual(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut x = Vec::new();
        let mut grad = Vec::new();
        let mut vals = Vec::new();
        let mut jac = Vec::new();

        for item in &self.bound_items {
            out[item.lam_id] += item.sign * v[item.id] + item.offset;
            out[item.id] += -item.sign * v[item.lam_id];
        }
        for item in &self.cont_items {
            out[item.rho_id] += v[item.u_first] - v[item.u_branch];
            out[item.u_first] += v[item.rho_id];
            out[item.u_branch] -= v[item.rho_id];
        }
        for item in &self.init_items {
            for m in 0..item.mu_ids.len() {
                out[item.mu_ids[m]] += v[item.x_ids[m]] - item.xhat[m];
                out[item.x_ids[m]] -= v[item.mu_ids[m]];
            }
        }
        for item in &self.cost_items {
            let n = item.ids.len();
            gather(v, &item.ids, &mut x);
            grad.resize(n, 0.0);
            item.map.value_grad(&x, &mut grad);
            for i in 0..n {
                if let Some(row) = item.rows[i] {
                    out[row] += item.weight * grad[i];
                }
            }
        }
        for item in &self.dyn_items {
            let n = item.in_ids.len();
            let s = item.mu_ids.len();
            gather(v, &item.in_ids, &mut x);
            vals.resize(s, 0.0);
            jac.resize(s * n, 0.0);
            item.map.values_jac(&x, &mut vals, &mut jac);
            for m in 0..s {
                out[item.mu_ids[m]] += v[item.x_next_ids[m]] - vals[m];
                out[item.x_next_ids[m]] -= v[item.mu_ids[m]];
                let mu = v[item.mu_ids[m]];
                for i in 0..n {
                    out[item.in_ids[i]] += jac[m * n + i] * mu;
                }
            }
        }
        for item in &self.ineq_items {
            let n = item.in_ids.len();
            let m = item.lam_ids.len();
            gather(v, &item.in_ids, &mut x);
            vals.resize(m, 0.0);
            jac.resize(m * n, 0.0);
            item.map.values_jac(&x, &mut vals, &mut jac);
            for r in 0..m {
                out[item.lam_ids[r]] += vals[r];
                let lam = v[item.lam_ids[r]];
                for i in 0..n {
                    if item.row_weight[i] != 0.0 {
                        out[item.in_ids[i]] += item.row_weight[i] * jac[r * n + i] * lam;
                    }
                }
            }
        }
    }

    fn jacobian(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut x = Vec::new();
        let mut grad = Vec::new();
        let mut hess = Vec::new();
        let mut vals = Vec::new();
        let mut jac = Vec::new();
        let mut w = Vec::new();

        for item in &self.bound_items {
            out[item.h_slot] += item.sign;
            out[item.station_slot] += -item.sign;
        }
        for item in &self.cont_items {
            out[item.slots[0]] += 1.0;
            out[item.slots[1]] += -1.0;
            out[item.slots[2]] += 1.0;
            out[item.slots[3]] += -1.0;
        }
        for item in &self.init_items {
            for m in 0..item.mu_ids.len() {
                out[item.eye_slots[m]] += 1.0;
                out[item.station_slots[m]] += -1.0;
            }
        }
        for item in &self.cost_items {
            let n = item.ids.len();
            gather(v, &item.ids, &mut x);
            grad.resize(n, 0.0);
            hess.resize(n * n, 0.0);
            if item.affine {
                continue;
            }
            item.map.value_grad_hess(&x, &mut grad, &mut hess);
            for (slot, h) in item.hess_slots.iter().zip(&hess) {
                if *slot != SKIP {
                    out[*slot] += item.weight * h;
                }
            }
        }
        for item in &self.dyn_items {
            let n = item.in_ids.len();
            let s = item.mu_ids.len();
            gather(v, &item.in_ids, &mut x);
            vals.resize(s, 0.0);
            jac.resize(s * n, 0.0);
            item.map.values_jac(&x, &mut vals, &mut jac);
            for m in 0..s {
                out[item.eye_slots[m]] += 1.0;
                out[item.station_xnext_slots[m]] += -1.0;
                for i in 0..n {
                    out[item.jac_d_slots[m * n + i]] += -jac[m * n + i];
                    out[item.station_mu_slots[i * s + m]] += jac[m * n + i];
                }
            }
            if !item.affine {
                gather(v, &item.mu_ids, &mut w);
                grad.resize(n, 0.0);
                hess.resize(n * n, 0.0);
                item.map.weighted_hess(&x, &w, &mut grad, &mut hess);
                for (slot, h) in item.hess_slots.iter().zip(&hess) {
                    if *slot != SKIP {
                        out[*slot] += h;
                    }
                }
            }
        }
        for item in &self.ineq_items {
            let n = item.in_ids.len();
            let m = item.lam_ids.len();
            gather(v, &item.in_ids, &mut x);
            vals.resize(m, 0.0);
            jac.resize(m * n, 0.0);
            item.map.values_jac(&x, &mut vals, &mut jac);
            for r in 0..m {
                for i in 0..n {
                    out[item.h_slots[r * n + i]] += jac[r * n + i];
                    let slot = item.station_slots[i * m + r];
                    if slot != SKIP {
                        out[slot] += item.row_weight[i] * jac[r * n + i];
                    }
                }
            }
            if !item.affine {
                gather(v, &item.lam_ids, &mut w);
                grad.resize(n, 0.0);
                hess.resize(n * n, 0.0);
                item.map.weighted_hess(&x, &w, &mut grad, &mut hess);
                for i in 0..n {
                    if item.row_weight[i] == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        let slot = item.hess_slots[i * n + j];
                        if slot != SKIP {
                            out[slot] += item.row_weight[i] * hess[i * n + j];
                        }
                    }
                }
            }
        }
    }
}

fn gather(v: &[f64], ids: &[usize], buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend(ids.iter().map(|&i| v[i]));
}

/// A synthesized problem together with its index map.
pub struct BuiltMcp {
    pub mcp: MixedComplementarityProblem,
    pub layout: KktLayout,
}

/// Stacks all players' first-order conditions into one complementarity
/// problem. Variable bounds follow the block structure: primal and equality
/// multiplier components are free, inequality multipliers live on
/// `[0, +inf)`.
pub fn build_kkt_mcp(game: &ContingencyGame) -> Result<BuiltMcp, GameError> {
    game.validate()?;
    let hypotheses = game.hypotheses();
    let roster = game.roster_size();
    let horizon = game.horizon;

    let state_dims: Vec<usize> = (0..roster).map(|p| game.player(0, p).state_dim).collect();
    let control_dims: Vec<usize> = (0..roster).map(|p| game.player(0, p).control_dim).collect();

    // Layout pass: assign offsets hypothesis-major.
    let mut cursor = 0usize;
    let mut state_offsets = vec![vec![0; roster]; hypotheses];
    let mut control_offsets = vec![vec![0; roster]; hypotheses];
    let mut mu_offsets = vec![vec![0; roster]; hypotheses];
    let mut lambda_ranges = vec![Vec::with_capacity(roster); hypotheses];
    let mut sigma_ranges = vec![Vec::new(); hypotheses];
    let mut block_labels = Vec::new();
    let mut census = McpCensus {
        primal: 0,
        dynamics_multipliers: 0,
        private_multipliers: 0,
        shared_multipliers: 0,
        contingency_multipliers: 0,
        total: 0,
        structural_nonzeros: 0,
    };

    let hyp_label = |hyp: usize| game.belief.labels()[hyp].clone();

    for hyp in 0..hypotheses {
        for player in 0..roster {
            let spec = game.player(hyp, player);
            state_offsets[hyp][player] = cursor;
            cursor += horizon * state_dims[player];
            control_offsets[hyp][player] = cursor;
            cursor += horizon * control_dims[player];
            census.primal += horizon * (state_dims[player] + control_dims[player]);
            block_labels.push(BlockLabel {
                name: format!("{}/{}/stationarity", hyp_label(hyp), spec.name),
                range: state_offsets[hyp][player]..cursor,
            });
        }
        for player in 0..roster {
            let spec = game.player(hyp, player);
            mu_offsets[hyp][player] = cursor;
            cursor += horizon * state_dims[player];
            census.dynamics_multipliers += horizon * state_dims[player];
            block_labels.push(BlockLabel {
                name: format!("{}/{}/dynamics", hyp_label(hyp), spec.name),
                range: mu_offsets[hyp][player]..cursor,
            });
        }
        for player in 0..roster {
            let spec = game.player(hyp, player);
            let start = cursor;
            let bound_rows: usize = spec
                .state_bounds
                .iter()
                .chain(&spec.control_bounds)
                .map(|b| usize::from(b.min.is_finite()) + usize::from(b.max.is_finite()))
                .sum();
            cursor += horizon * bound_rows;
            for c in &spec.private_constraints {
                cursor += horizon * c.map.codim();
            }
            lambda_ranges[hyp].push(start..cursor);
            census.private_multipliers += cursor - start;
            if cursor > start {
                block_labels.push(BlockLabel {
                    name: format!("{}/{}/constraints", hyp_label(hyp), spec.name),
                    range: start..cursor,
                });
            }
        }
        for shared in &game.shared_constraints[hyp] {
            let start = cursor;
            cursor += horizon * shared.map.codim();
            sigma_ranges[hyp].push(start..cursor);
            census.shared_multipliers += cursor - start;
            block_labels.push(BlockLabel {
                name: format!("{}/shared/{}", hyp_label(hyp), shared.label),
                range: start..cursor,
            });
        }
    }
    let rho_start = cursor;
    cursor += hypotheses.saturating_sub(1) * game.branching_time * control_dims[0];
    let rho_range = rho_start..cursor;
    census.contingency_multipliers = rho_range.len();
    if !rho_range.is_empty() {
        block_labels.push(BlockLabel {
            name: "contingency".into(),
            range: rho_range.clone(),
        });
    }
    let dim = cursor;
    census.total = dim;

    let mut layout = KktLayout {
        horizon,
        hypotheses,
        roster,
        state_dims,
        control_dims,
        state_offsets,
        control_offsets,
        mu_offsets,
        lambda_ranges,
        sigma_ranges,
        rho_range,
        dim,
        census,
        block_labels: block_labels.clone(),
    };

    // Work-item pass.
    let mut asm = Assembler {
        dim,
        cost_items: Vec::new(),
        dyn_items: Vec::new(),
        init_items: Vec::new(),
        ineq_items: Vec::new(),
        bound_items: Vec::new(),
        cont_items: Vec::new(),
    };

    for hyp in 0..hypotheses {
        for player in 0..roster {
            let spec = game.player(hyp, player);
            let weight = if player == 0 {
                ego_cost_weight(game.belief.probability(hyp))
            } else {
                1.0
            };
            // Stage costs.
            for t in 0..horizon {
                let ids = layout.stage_slice_ids(hyp, &spec.cost_inputs, t);
                if ids.len() != spec.stage_cost.arity() {
                    return Err(GameError::Dimension(format!(
                        "player {}: cost arity {} does not match its {} stage inputs",
                        spec.name,
                        spec.stage_cost.arity(),
                        ids.len()
                    )));
                }
                let rows = ids
                    .iter()
                    .enumerate()
                    .map(|(flat, &id)| {
                        (layout.owner_of_input(&spec.cost_inputs, flat) == player).then_some(id)
                    })
                    .collect();
                asm.cost_items.push(CostItem {
                    map: Arc::clone(&spec.stage_cost),
                    weight,
                    ids,
                    rows,
                    hess_slots: Vec::new(),
                    affine: spec.stage_cost.is_affine(),
                });
            }
            // Initial state rows.
            let mu_ids: Vec<usize> = (0..layout.state_dims[player])
                .map(|c| layout.mu_id(hyp, player, 0, c))
                .collect();
            let x_ids: Vec<usize> = (0..layout.state_dims[player])
                .map(|c| layout.state_id(hyp, player, 0, c))
                .collect();
            asm.init_items.push(InitItem {
                mu_ids,
                x_ids,
                xhat: spec.initial_state.clone(),
                eye_slots: Vec::new(),
                station_slots: Vec::new(),
            });
            // Dynamics steps.
            for t in 0..horizon - 1 {
                let mut in_ids = Vec::new();
                for c in 0..layout.state_dims[player] {
                    in_ids.push(layout.state_id(hyp, player, t, c));
                }
                for c in 0..layout.control_dims[player] {
                    in_ids.push(layout.control_id(hyp, player, t, c));
                }
                let mu_ids: Vec<usize> = (0..layout.state_dims[player])
                    .map(|c| layout.mu_id(hyp, player, t + 1, c))
                    .collect();
                let x_next_ids: Vec<usize> = (0..layout.state_dims[player])
                    .map(|c| layout.state_id(hyp, player, t + 1, c))
                    .collect();
                asm.dyn_items.push(DynItem {
                    map: Arc::clone(&spec.dynamics),
                    in_ids,
                    mu_ids,
                    x_next_ids,
                    jac_d_slots: Vec::new(),
                    eye_slots: Vec::new(),
                    station_mu_slots: Vec::new(),
                    station_xnext_slots: Vec::new(),
                    hess_slots: Vec::new(),
                    affine: spec.dynamics.is_affine(),
                });
            }
            // Bounds and private constraints.
            let mut lam_cursor = layout.lambda_ranges[hyp][player].start;
            for t in 0..horizon {
                for b in spec.state_bounds.iter() {
                    let id = layout.state_id(hyp, player, t, b.index);
                    lam_cursor =
                        push_bound_rows(&mut asm.bound_items, lam_cursor, id, b.min, b.max);
                }
                for b in spec.control_bounds.iter() {
                    let id = layout.control_id(hyp, player, t, b.index);
                    lam_cursor =
                        push_bound_rows(&mut asm.bound_items, lam_cursor, id, b.min, b.max);
                }
            }
            for c in &spec.private_constraints {
                for t in 0..horizon {
                    let ids = layout.stage_slice_ids(hyp, &c.inputs, t);
                    if ids.len() != c.map.arity() {
                        return Err(GameError::Dimension(format!(
                            "constraint {}: arity mismatch",
                            c.label
                        )));
                    }
                    let row_weight = ids
                        .iter()
                        .enumerate()
                        .map(|(flat, _)| {
                            if layout.owner_of_input(&c.inputs, flat) == player {
                                -1.0
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let m = c.map.codim();
                    let lam_ids: Vec<usize> = (lam_cursor..lam_cursor + m).collect();
                    lam_cursor += m;
                    asm.ineq_items.push(IneqItem {
                        map: Arc::clone(&c.map),
                        in_ids: ids,
                        lam_ids,
                        row_weight,
                        h_slots: Vec::new(),
                        station_slots: Vec::new(),
                        hess_slots: Vec::new(),
                        affine: c.map.is_affine(),
                    });
                }
            }
            debug_assert_eq!(lam_cursor, layout.lambda_ranges[hyp][player].end);
        }
        // Shared constraints.
        for (ci, shared) in game.shared_constraints[hyp].iter().enumerate() {
            let mut sigma_cursor = layout.sigma_ranges[hyp][ci].start;
            for t in 0..horizon {
                let ids = layout.stage_slice_ids(hyp, &shared.inputs, t);
                if ids.len() != shared.map.arity() {
                    return Err(GameError::Dimension(format!(
                        "shared constraint {}: arity mismatch",
                        shared.label
                    )));
                }
                let row_weight = ids
                    .iter()
                    .enumerate()
                    .map(|(flat, _)| {
                        let owner = layout.owner_of_input(&shared.inputs, flat);
                        shared
                            .effective_weight(owner)
                            .map(|w| -w)
                            .unwrap_or(0.0)
                    })
                    .collect();
                let m = shared.map.codim();
                let lam_ids: Vec<usize> = (sigma_cursor..sigma_cursor + m).collect();
                sigma_cursor += m;
                asm.ineq_items.push(IneqItem {
                    map: Arc::clone(&shared.map),
                    in_ids: ids,
                    lam_ids,
                    row_weight,
                    h_slots: Vec::new(),
                    station_slots: Vec::new(),
                    hess_slots: Vec::new(),
                    affine: shared.map.is_affine(),
                });
            }
            debug_assert_eq!(sigma_cursor, layout.sigma_ranges[hyp][ci].end);
        }
    }
    // Contingency rows tie branch 0's control prefix to every other branch.
    {
        let mut rho_cursor = layout.rho_range.start;
        for hyp in 1..hypotheses {
            for t in 0..game.branching_time {
                for c in 0..layout.control_dims[0] {
                    asm.cont_items.push(ContItem {
                        rho_id: rho_cursor,
                        u_first: layout.control_id(0, 0, t, c),
                        u_branch: layout.control_id(hyp, 0, t, c),
                        slots: [0; 4],
                    });
                    rho_cursor += 1;
                }
            }
        }
        debug_assert_eq!(rho_cursor, layout.rho_range.end);
    }

    // Pattern, slot resolution, bounds.
    let pattern = SparsityPattern::from_sites(dim, dim, &asm.sites());
    asm.resolve(&pattern);
    layout.census.structural_nonzeros = pattern.nnz();

    let mut lower = vec![f64::NEG_INFINITY; dim];
    let upper = vec![f64::INFINITY; dim];
    for hyp in 0..hypotheses {
        for player in 0..roster {
            for i in layout.lambda_ranges[hyp][player].clone() {
                lower[i] = 0.0;
            }
        }
        for r in &layout.sigma_ranges[hyp] {
            for i in r.clone() {
                lower[i] = 0.0;
            }
        }
    }

    let asm = Arc::new(asm);
    let asm_res = Arc::clone(&asm);
    let asm_jac = Arc::clone(&asm);
    let residual = Arc::new(move |v: &[f64], out: &mut [f64]| asm_res.residual(v, out));
    let jacobian = Arc::new(move |v: &[f64], out: &mut [f64]| asm_jac.jacobian(v, out));

    let mcp = MixedComplementarityProblem::new(
        lower,
        upper,
        pattern,
        residual,
        jacobian,
        block_labels,
    )
    .map_err(|e: McpError| GameError::Synthesis(e.to_string()))?;

    Ok(BuiltMcp { mcp, layout })
}

fn push_bound_rows(
    items: &mut Vec<BoundItem>,
    mut cursor: usize,
    id: usize,
    min: f64,
    max: f64,
) -> usize {
    if min.is_finite() {
        items.push(BoundItem {
            lam_id: cursor,
            id,
            sign: 1.0,
            offset: -min,
            h_slot: 0,
            station_slot: 0,
        });
        cursor += 1;
    }
    if max.is_finite() {
        items.push(BoundItem {
            lam_id: cursor,
            id,
            sign: -1.0,
            offset: max,
            h_slot: 0,
            station_slot: 0,
        });
        cursor += 1;
    }
    cursor
}
