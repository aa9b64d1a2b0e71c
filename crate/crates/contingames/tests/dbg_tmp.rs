use std::sync::Arc;

use contingames::autodiff::{Real, ScalarMap, VectorMap};
use contingames::dynamics::{BoundRow, PointMassMap};
use contingames::game::*;
use contingames::mcp;

struct QuadCost { weights: Vec<f64>, targets: Vec<f64> }
impl ScalarMap for QuadCost {
    fn arity(&self) -> usize { self.weights.len() }
    fn eval<S: Real>(&self, x: &[S]) -> S {
        let mut acc = S::from_f64(0.0);
        for ((xi, w), t) in x.iter().zip(&self.weights).zip(&self.targets) {
            let d = xi.clone() - *t;
            acc = acc + d.clone() * d * *w;
        }
        acc
    }
}
struct Separation { state_dim: usize, distance: f64 }
impl VectorMap for Separation {
    fn arity(&self) -> usize { 2 * self.state_dim }
    fn codim(&self) -> usize { 1 }
    fn eval<S: Real>(&self, x: &[S], out: &mut [S]) {
        let dx = x[0].clone() - x[self.state_dim].clone();
        let dy = x[1].clone() - x[self.state_dim + 1].clone();
        out[0] = dx.clone() * dx + dy.clone() * dy - self.distance * self.distance;
    }
}
struct Band { state_dim: usize, band: f64 }
impl VectorMap for Band {
    fn arity(&self) -> usize { self.state_dim }
    fn codim(&self) -> usize { 1 }
    fn eval<S: Real>(&self, x: &[S], out: &mut [S]) {
        out[0] = -(x[0].clone() * x[0].clone()) + self.band * self.band;
    }
}

fn player(name: &str, initial: [f64; 4], goal: [f64; 2], me: usize) -> PlayerSpec {
    PlayerSpec {
        name: name.into(),
        state_dim: 4,
        control_dim: 2,
        dynamics: Arc::new(PointMassMap { dt: 0.2 }),
        initial_state: initial.to_vec(),
        stage_cost: Arc::new(QuadCost {
            weights: vec![1.0, 1.0, 0.1, 0.1, 0.1, 0.1],
            targets: vec![goal[0], goal[1], 0.0, 0.0, 0.0, 0.0],
        }),
        cost_inputs: StageInputs::own(me),
        state_bounds: vec![],
        control_bounds: vec![],
        private_constraints: vec![],
    }
}

fn coupled(k: usize, tb: usize, horizon: usize, ego_v: f64, ego_goal: f64, dist: f64) -> ContingencyGame {
    let labels: Vec<String> = (0..k).map(|i| format!("h{i}")).collect();
    let mut others = Vec::new();
    for i in 0..k {
        let goal_y = if i == 0 { 1.0 } else { -1.0 };
        let mut o = player("other", [2.2, 0.35, 0.0, 0.0], [2.5, goal_y], 1);
        o.state_bounds = vec![BoundRow { index: 2, min: -2.0, max: 2.0 }];
        others.push(vec![o]);
    }
    let mut ego = player("ego", [0.5, 0.0, ego_v, 0.0], [ego_goal, 0.0], 0);
    ego.control_bounds = vec![
        BoundRow { index: 0, min: -1.0, max: 1.0 },
        BoundRow { index: 1, min: -1.0, max: 1.0 },
    ];
    ego.private_constraints = vec![StageConstraint {
        label: "band".into(),
        map: Arc::new(Band { state_dim: 4, band: 6.0 }),
        inputs: StageInputs::states(&[0]),
    }];
    ContingencyGame {
        dt: 0.2,
        horizon,
        branching_time: tb,
        belief: Belief::uniform(labels).unwrap(),
        ego,
        others,
        shared_constraints: (0..k)
            .map(|_| vec![SharedConstraintSpec {
                label: "separation".into(),
                map: Arc::new(Separation { state_dim: 4, distance: dist }),
                inputs: StageInputs::states(&[0, 1]),
                participants: vec![(0, 10.0), (1, 1.0)],
            }])
            .collect(),
    }
}

#[test]
fn dbg_merit() {
    for (v, goal, dist) in [(0.6, 3.0, 0.8), (1.0, 4.0, 1.0)] {
        let game = coupled(2, 3, 8, v, goal, dist);
        let built = kkt::build_kkt_mcp(&game).unwrap();
        let profile = naive_profile(&game).unwrap();
        let v0 = built.layout.pack_profile(&profile, 1e-2).unwrap();
        let opts = mcp::SolverOptions { max_iterations: 400, restart_attempts: 0, ..Default::default() };
        let r = mcp::solve_mcp(&built.mcp, &v0, &opts);
        println!("v={v} goal={goal} dist={dist}: status {:?} iters {} merit {:.3e}", r.status, r.iterations, r.merit_norm);
        let h = &r.merit_history;
        let n = h.len();
        for (i, m) in h.iter().enumerate() {
            if i < 6 || i + 10 > n || i % 40 == 0 { println!("  [{i}] {m:.6e}"); }
        }
    }
}

#[test]
fn dbg_restarts() {
    let game = coupled(2, 3, 8, 1.0, 4.0, 1.0);
    let built = kkt::build_kkt_mcp(&game).unwrap();
    let profile = naive_profile(&game).unwrap();
    let v0 = built.layout.pack_profile(&profile, 1e-2).unwrap();
    let opts = mcp::SolverOptions { max_iterations: 600, restart_attempts: 6, ..Default::default() };
    let r = mcp::solve_mcp(&built.mcp, &v0, &opts);
    println!("with restarts: status {:?} iters {} merit {:.3e}", r.status, r.iterations, r.merit_norm);
}

#[test]
fn dbg_stuck_rows() {
    let game = coupled(2, 3, 8, 1.0, 4.0, 1.0);
    let built = kkt::build_kkt_mcp(&game).unwrap();
    let profile = naive_profile(&game).unwrap();
    let v0 = built.layout.pack_profile(&profile, 1e-2).unwrap();
    let opts = mcp::SolverOptions { max_iterations: 600, restart_attempts: 6, ..Default::default() };
    let r = mcp::solve_mcp(&built.mcp, &v0, &opts);
    let phi = mcp::fb_residual(&built.mcp, &r.solution);
    let mut idx: Vec<usize> = (0..phi.len()).collect();
    idx.sort_by(|&a, &b| phi[b].abs().partial_cmp(&phi[a].abs()).unwrap());
    let mut g = vec![0.0; built.mcp.dim()];
    built.mcp.eval_residual(&r.solution, &mut g);
    for &j in idx.iter().take(12) {
        let label = built.mcp.block_labels().iter()
            .find(|b| b.range.contains(&j))
            .map(|b| b.name.clone()).unwrap_or_default();
        println!("row {j} [{label}] phi={:+.3e} v={:+.3e} G={:+.3e} lo={} up={}",
            phi[j], r.solution[j], g[j], built.mcp.lower()[j], built.mcp.upper()[j]);
    }
}

fn coupled2(k: usize, tb: usize, horizon: usize, ego_v: f64, ego_goal: f64, dist: f64, cross: bool) -> ContingencyGame {
    let labels: Vec<String> = (0..k).map(|i| format!("h{i}")).collect();
    let mut others = Vec::new();
    for i in 0..k {
        let goal_y = if i == 0 { 1.0 } else { -1.0 };
        let mut o = player("other", [2.2, 0.35, 0.0, 0.0], [2.5, goal_y], 1);
        if cross { o.initial_state = vec![2.2, 0.5, 0.0, 0.0]; }
        o.state_bounds = vec![BoundRow { index: 2, min: -2.0, max: 2.0 }];
        others.push(vec![o]);
    }
    let mut ego = player("ego", [0.5, 0.0, ego_v, 0.0], [ego_goal, 0.0], 0);
    ego.control_bounds = vec![
        BoundRow { index: 0, min: -1.0, max: 1.0 },
        BoundRow { index: 1, min: -1.0, max: 1.0 },
    ];
    ego.private_constraints = vec![StageConstraint {
        label: "band".into(),
        map: Arc::new(Band { state_dim: 4, band: 6.0 }),
        inputs: StageInputs::states(&[0]),
    }];
    ContingencyGame {
        dt: 0.2, horizon, branching_time: tb,
        belief: Belief::uniform(labels).unwrap(),
        ego, others,
        shared_constraints: (0..k)
            .map(|_| vec![SharedConstraintSpec {
                label: "separation".into(),
                map: Arc::new(Separation { state_dim: 4, distance: dist }),
                inputs: StageInputs::states(&[0, 1]),
                participants: vec![(0, 10.0), (1, 1.0)],
            }])
            .collect(),
    }
}

#[test]
fn dbg_grid() {
    for (v, goal, dist) in [(0.6, 3.0, 0.9), (0.8, 3.5, 0.9), (0.8, 3.0, 1.0), (0.6, 3.5, 1.0), (0.8, 3.5, 0.8)] {
        let game = coupled2(2, 3, 8, v, goal, dist, true);
        let built = kkt::build_kkt_mcp(&game).unwrap();
        let profile = naive_profile(&game).unwrap();
        let v0 = built.layout.pack_profile(&profile, 1e-2).unwrap();
        let opts = mcp::SolverOptions { max_iterations: 300, restart_attempts: 3, ..Default::default() };
        let r = mcp::solve_mcp(&built.mcp, &v0, &opts);
        // divergence + activity probes
        let (profile2, mults, _rho) = built.layout.unpack(&r.solution);
        let mut div = 0.0f64;
        for t in 3..8 {
            for c in 0..2 {
                div = div.max((profile2.players[0][0].controls[t][c] - profile2.players[1][0].controls[t][c]).abs());
            }
        }
        let act0 = mults[0].shared[0].iter().cloned().fold(0.0f64, f64::max);
        let act1 = mults[1].shared[0].iter().cloned().fold(0.0f64, f64::max);
        println!("v={v} goal={goal} dist={dist}: {:?} it={} merit={:.2e} div={:.3} act=({:.3},{:.3})",
                 r.status, r.iterations, r.merit_norm, div, act0, act1);
    }
}

#[test]
fn dbg_degenerate() {
    let mk = |k: usize| {
        let labels: Vec<String> = (0..k).map(|i| format!("h{i}")).collect();
        let mut others = Vec::new();
        for i in 0..k {
            let goal_y = if i == 0 { 1.5 } else { -1.0 };
            let mut o = player("other", [2.2, 0.5, 0.0, 0.0], [2.5, goal_y], 1);
            o.state_bounds = vec![BoundRow { index: 2, min: -2.0, max: 2.0 }];
            others.push(vec![o]);
        }
        let mut ego = player("ego", [0.5, 0.0, 0.8, 0.0], [3.5, 0.0], 0);
        ego.control_bounds = vec![
            BoundRow { index: 0, min: -1.0, max: 1.0 },
            BoundRow { index: 1, min: -1.0, max: 1.0 },
        ];
        ego.private_constraints = vec![StageConstraint {
            label: "band".into(),
            map: Arc::new(Band { state_dim: 4, band: 6.0 }),
            inputs: StageInputs::states(&[0]),
        }];
        let belief = if k == 2 {
            Belief::new(labels.clone(), vec![1.0, 0.0]).unwrap()
        } else {
            Belief::uniform(labels.clone()).unwrap()
        };
        ContingencyGame {
            dt: 0.2, horizon: 6, branching_time: if k == 2 { 3 } else { 0 },
            belief, ego, others,
            shared_constraints: (0..k)
                .map(|_| vec![SharedConstraintSpec {
                    label: "separation".into(),
                    map: Arc::new(Separation { state_dim: 4, distance: 0.9 }),
                    inputs: StageInputs::states(&[0, 1]),
                    participants: vec![(0, 10.0), (1, 1.0)],
                }])
                .collect(),
        }
    };
    let g2 = mk(2);
    let g1 = mk(1);
    let s2 = solve_contingency_game(&g2, None, &SolveGameOptions::default()).unwrap();
    let s1 = solve_contingency_game(&g1, None, &SolveGameOptions::default()).unwrap();
    println!("rho = {:?}", s2.rho);
    println!("sigma h1 = {:?}", s2.multipliers[1].shared[0]);
    for t in 0..6 {
        println!("t={t} contingency u0={:?} reference u0={:?}",
            s2.profile.trajectory(0,0).controls[t],
            s1.profile.trajectory(0,0).controls[t]);
    }
}

#[test]
fn dbg_degenerate_grid() {
    for (tb, horizon) in [(1usize, 6usize), (2, 8), (3, 8), (2, 10), (3, 10)] {
        let mk = |k: usize| {
            let labels: Vec<String> = (0..k).map(|i| format!("h{i}")).collect();
            let mut others = Vec::new();
            for i in 0..k {
                let goal_y = if i == 0 { 1.0 } else { -1.0 };
                let mut o = player("other", [2.2, 0.5, 0.0, 0.0], [2.5, goal_y], 1);
                o.state_bounds = vec![BoundRow { index: 2, min: -2.0, max: 2.0 }];
                others.push(vec![o]);
            }
            let mut ego = player("ego", [0.5, 0.0, 0.8, 0.0], [3.5, 0.0], 0);
            ego.control_bounds = vec![
                BoundRow { index: 0, min: -1.0, max: 1.0 },
                BoundRow { index: 1, min: -1.0, max: 1.0 },
            ];
            let belief = if k == 2 {
                Belief::new(labels.clone(), vec![1.0, 0.0]).unwrap()
            } else {
                Belief::uniform(labels.clone()).unwrap()
            };
            ContingencyGame {
                dt: 0.2, horizon, branching_time: if k == 2 { tb } else { 0 },
                belief, ego, others,
                shared_constraints: (0..k)
                    .map(|_| vec![SharedConstraintSpec {
                        label: "separation".into(),
                        map: Arc::new(Separation { state_dim: 4, distance: 0.9 }),
                        inputs: StageInputs::states(&[0, 1]),
                        participants: vec![(0, 10.0), (1, 1.0)],
                    }])
                    .collect(),
            }
        };
        let g2 = mk(2);
        let g1 = mk(1);
        let s2 = solve_contingency_game(&g2, None, &SolveGameOptions::default());
        let s1 = solve_contingency_game(&g1, None, &SolveGameOptions::default());
        match (s2, s1) {
            (Ok(s2), Ok(s1)) => {
                let mut dev = 0.0f64;
                for t in 0..horizon {
                    for c in 0..2 {
                        dev = dev.max((s2.profile.trajectory(0,0).controls[t][c]
                                     - s1.profile.trajectory(0,0).controls[t][c]).abs());
                    }
                }
                println!("tb={tb} T={horizon}: dev={dev:.2e}");
            }
            (a, b) => println!("tb={tb} T={horizon}: solve failed ({}, {})", a.is_ok(), b.is_ok()),
        }
    }
}

#[test]
fn dbg_real_scenarios() {
    use contingames::scenarios::*;
    for config in [ScenarioConfig::jaywalking_defaults(), ScenarioConfig::overtaking_defaults()] {
        let game = build_game(&config).unwrap();
        let built = kkt::build_kkt_mcp(&game).unwrap();
        let census = built.layout.census();
        println!("{}: dim={} nnz={} census={:?}", config.scenario, census.total, census.structural_nonzeros, census);
        let t0 = std::time::Instant::now();
        match solve_contingency_game(&game, None, &SolveGameOptions::default()) {
            Ok(sol) => {
                let ego0 = sol.profile.trajectory(0, 0);
                let speeds: Vec<f64> = ego0.states.iter().map(|s| s[2]).collect();
                println!("  solved in {:?} iters={} merit={:.2e}", t0.elapsed(), sol.solver.iterations, sol.kkt_residual);
                println!("  ego h0 px: {:.2} -> {:.2}, py range [{:.2},{:.2}], v range [{:.2},{:.2}]",
                    ego0.states[0][0], ego0.states[24][0],
                    ego0.states.iter().map(|s| s[1]).fold(f64::INFINITY, f64::min),
                    ego0.states.iter().map(|s| s[1]).fold(f64::NEG_INFINITY, f64::max),
                    speeds.iter().cloned().fold(f64::INFINITY, f64::min),
                    speeds.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
                let ego1 = sol.profile.trajectory(1, 0);
                println!("  ego h1 py range [{:.2},{:.2}]",
                    ego1.states.iter().map(|s| s[1]).fold(f64::INFINITY, f64::min),
                    ego1.states.iter().map(|s| s[1]).fold(f64::NEG_INFINITY, f64::max));
                let other0 = sol.profile.trajectory(0, 1);
                println!("  other h0 (px,py): ({:.2},{:.2}) -> ({:.2},{:.2})",
                    other0.states[0][0], other0.states[0][1], other0.states[24][0], other0.states[24][1]);
            }
            Err(e) => println!("  FAILED in {:?}: {e}", t0.elapsed()),
        }
    }
}

#[test]
fn dbg_overtaking_stuck() {
    use contingames::scenarios::*;
    let config = ScenarioConfig::overtaking_defaults();
    let game = build_game(&config).unwrap();
    let built = kkt::build_kkt_mcp(&game).unwrap();
    let profile = naive_profile(&game).unwrap();
    let v0 = built.layout.pack_profile(&profile, 1e-2).unwrap();
    let opts = mcp::SolverOptions { max_iterations: 300, restart_attempts: 0, ..Default::default() };
    let r = mcp::solve_mcp(&built.mcp, &v0, &opts);
    println!("status {:?} iters {} merit {:.3e}", r.status, r.iterations, r.merit_norm);
    for (i, m) in r.merit_history.iter().enumerate() {
        if i % 10 == 0 || i + 3 > r.merit_history.len() { println!("  [{i}] {m:.4e}"); }
    }
    let phi = mcp::fb_residual(&built.mcp, &r.solution);
    let mut idx: Vec<usize> = (0..phi.len()).collect();
    idx.sort_by(|&a, &b| phi[b].abs().partial_cmp(&phi[a].abs()).unwrap());
    let mut g = vec![0.0; built.mcp.dim()];
    built.mcp.eval_residual(&r.solution, &mut g);
    for &j in idx.iter().take(10) {
        let label = built.mcp.block_labels().iter().find(|b| b.range.contains(&j))
            .map(|b| b.name.clone()).unwrap_or_default();
        println!("row {j} [{label}] phi={:+.3e} v={:+.3e} G={:+.3e}", phi[j], r.solution[j], g[j]);
    }
    // where is the ego / what do the trajectories look like at the stall?
    let (p, _m, _r) = built.layout.unpack(&r.solution);
    for t in [0, 6, 12, 18, 24] {
        println!("t={t} ego=({:.2},{:.2},v{:.2}) human0=({:.2},{:.2},v{:.2}) lead0=({:.2},{:.2},v{:.2})",
            p.players[0][0].states[t][0], p.players[0][0].states[t][1], p.players[0][0].states[t][2],
            p.players[0][1].states[t][0], p.players[0][1].states[t][1], p.players[0][1].states[t][2],
            p.players[0][2].states[t][0], p.players[0][2].states[t][1], p.players[0][2].states[t][2]);
    }
}

#[test]
fn dbg_overtaking_bisect() {
    use contingames::scenarios::*;
    let variants: Vec<(&str, Box<dyn Fn(&mut ScenarioConfig)>)> = vec![
        ("baseline", Box::new(|_c: &mut ScenarioConfig| {})),
        ("ratio10", Box::new(|c| { c.overtaking.as_mut().unwrap().multiplier_ratio = 10.0; })),
        ("mild-speeds", Box::new(|c| {
            let o = c.overtaking.as_mut().unwrap();
            o.ego.initial_state[2] = 6.0; o.ego.reference_velocity = 6.0;
            o.lead.initial_state[2] = 3.5; o.lead.reference_velocity = 3.5;
        })),
        ("short-horizon", Box::new(|c| { c.horizon = 12; c.branching_time = 5;
            c.sweep.branching_times = vec![0, 5, 12]; })),
        ("alpha5", Box::new(|c| { c.lse_sharpness = 5.0; })),
        ("t_b0", Box::new(|c| { c.branching_time = 0; })),
        ("t_b25", Box::new(|c| { c.branching_time = 25; })),
    ];
    for (name, tweak) in variants {
        let mut config = ScenarioConfig::overtaking_defaults();
        tweak(&mut config);
        let game = build_game(&config).unwrap();
        let t0 = std::time::Instant::now();
        match solve_contingency_game(&game, None, &SolveGameOptions::default()) {
            Ok(sol) => println!("{name}: OK iters={} merit={:.1e} {:?}", sol.solver.iterations, sol.kkt_residual, t0.elapsed()),
            Err(e) => { if let contingames::game::GameError::SolverFailure{status, solution, ..} = &e {
                println!("{name}: FAIL {status:?} merit={:.2e} {:?}", solution.solver.merit_norm, t0.elapsed());
            } else { println!("{name}: ERR {e}"); } }
        }
    }
}

#[test]
fn dbg_overtaking_geometry() {
    use contingames::scenarios::*;
    let variants: Vec<(&str, Box<dyn Fn(&mut ScenarioConfig)>)> = vec![
        ("roomy", Box::new(|c: &mut ScenarioConfig| {
            let o = c.overtaking.as_mut().unwrap();
            o.ego.initial_state = vec![-14.0, 0.0, 8.0, 0.0];
            o.human.initial_state = vec![0.0, 0.0, 5.0, 0.0];
            o.lead.initial_state = vec![10.0, 0.0, 3.0, 0.0];
            o.lead.reference_velocity = 3.0;
        })),
        ("roomy-v7", Box::new(|c| {
            let o = c.overtaking.as_mut().unwrap();
            o.ego.initial_state = vec![-14.0, 0.0, 7.0, 0.0];
            o.ego.reference_velocity = 7.0;
            o.human.initial_state = vec![0.0, 0.0, 5.0, 0.0];
            o.lead.initial_state = vec![10.0, 0.0, 3.0, 0.0];
            o.lead.reference_velocity = 3.0;
        })),
        ("roomy-tb0", Box::new(|c| {
            c.branching_time = 0;
            let o = c.overtaking.as_mut().unwrap();
            o.ego.initial_state = vec![-14.0, 0.0, 8.0, 0.0];
            o.human.initial_state = vec![0.0, 0.0, 5.0, 0.0];
            o.lead.initial_state = vec![10.0, 0.0, 3.0, 0.0];
            o.lead.reference_velocity = 3.0;
        })),
        ("roomy-tb25", Box::new(|c| {
            c.branching_time = 25;
            let o = c.overtaking.as_mut().unwrap();
            o.ego.initial_state = vec![-14.0, 0.0, 8.0, 0.0];
            o.human.initial_state = vec![0.0, 0.0, 5.0, 0.0];
            o.lead.initial_state = vec![10.0, 0.0, 3.0, 0.0];
            o.lead.reference_velocity = 3.0;
        })),
    ];
    for (name, tweak) in variants {
        let mut config = ScenarioConfig::overtaking_defaults();
        tweak(&mut config);
        let game = build_game(&config).unwrap();
        let t0 = std::time::Instant::now();
        match solve_contingency_game(&game, None, &SolveGameOptions::default()) {
            Ok(sol) => {
                let e0 = sol.profile.trajectory(0, 0);
                let e1 = sol.profile.trajectory(1, 0);
                println!("{name}: OK iters={} {:?} | ego merge px24={:.1} py_max={:.2} vmin={:.2} | stay px24={:.1} py_max={:.2}",
                    sol.solver.iterations, t0.elapsed(),
                    e0.states[24][0],
                    e0.states.iter().map(|s| s[1]).fold(f64::NEG_INFINITY, f64::max),
                    e0.states.iter().map(|s| s[2]).fold(f64::INFINITY, f64::min),
                    e1.states[24][0],
                    e1.states.iter().map(|s| s[1]).fold(f64::NEG_INFINITY, f64::max));
            }
            Err(e) => { if let contingames::game::GameError::SolverFailure{status, solution, ..} = &e {
                println!("{name}: FAIL {status:?} merit={:.2e} {:?}", solution.solver.merit_norm, t0.elapsed());
            } else { println!("{name}: ERR {e}"); } }
        }
    }
}

#[test]
fn dbg_overtaking_alpha() {
    use contingames::scenarios::*;
    for alpha in [8.0, 5.0, 3.0] {
      for tb in [10usize, 25] {
        let mut config = ScenarioConfig::overtaking_defaults();
        config.lse_sharpness = alpha;
        config.branching_time = tb;
        let o = config.overtaking.as_mut().unwrap();
        o.ego.initial_state = vec![-14.0, 0.0, 8.0, 0.0];
        o.human.initial_state = vec![0.0, 0.0, 5.0, 0.0];
        o.lead.initial_state = vec![10.0, 0.0, 3.0, 0.0];
        o.lead.reference_velocity = 3.0;
        let game = build_game(&config).unwrap();
        let t0 = std::time::Instant::now();
        match solve_contingency_game(&game, None, &SolveGameOptions::default()) {
            Ok(sol) => {
                let e_m = sol.profile.trajectory(0, 0);
                let e_s = sol.profile.trajectory(1, 0);
                let h_m = sol.profile.trajectory(0, 1);
                println!("alpha={alpha} tb={tb}: OK it={} {:?} | merge: ego px24={:.1} py_mx={:.2} human py24={:.2} | stay: ego px24={:.1} py_mx={:.2}",
                    sol.solver.iterations, t0.elapsed(),
                    e_m.states[24][0], e_m.states.iter().map(|s| s[1]).fold(f64::NEG_INFINITY, f64::max),
                    h_m.states[24][1],
                    e_s.states[24][0], e_s.states.iter().map(|s| s[1]).fold(f64::NEG_INFINITY, f64::max));
            }
            Err(e) => { if let contingames::game::GameError::SolverFailure{status, solution, ..} = &e {
                println!("alpha={alpha} tb={tb}: FAIL {status:?} merit={:.2e} {:?}", solution.solver.merit_norm, t0.elapsed());
            } else { println!("alpha={alpha} tb={tb}: ERR {e}"); } }
        }
      }
    }
}

#[test]
fn dbg_jaywalk_quality() {
    use contingames::scenarios::*;
    for tb in [0usize, 10, 25] {
        let mut config = ScenarioConfig::jaywalking_defaults();
        config.branching_time = tb;
        let game = build_game(&config).unwrap();
        match solve_contingency_game(&game, None, &SolveGameOptions::default()) {
            Ok(sol) => {
                let el = sol.profile.trajectory(0, 0); // ped goes left (+py)
                let er = sol.profile.trajectory(1, 0);
                let pl = sol.profile.trajectory(0, 1);
                let closest = |e: &contingames::game::PlayerTrajectory, p: &contingames::game::PlayerTrajectory| {
                    let mut best = (f64::INFINITY, 0usize);
                    for t in 0..25 {
                        let d = ((e.states[t][0]-p.states[t][0]).powi(2) + (e.states[t][1]-p.states[t][1]).powi(2)).sqrt();
                        if d < best.0 { best = (d, t); }
                    }
                    best
                };
                let (dl, tl) = closest(el, pl);
                let (dr, tr) = closest(er, sol.profile.trajectory(1, 1));
                let vmin_l = el.states.iter().map(|s| s[2]).fold(f64::INFINITY, f64::min);
                println!("tb={tb}: it={} | left-branch: ego py@t{tl}={:.2} mindist={dl:.2} vmin={vmin_l:.2} | right-branch: ego py@t{tr}={:.2} mindist={dr:.2} | ped0 py24={:.2}",
                    sol.solver.iterations, el.states[tl][1], er.states[tr][1], pl.states[24][1]);
            }
            Err(e) => println!("tb={tb}: FAIL {e}"),
        }
    }
}

#[test]
fn dbg_jaywalk_retune() {
    use contingames::scenarios::*;
    for (v0, side, ped_v) in [(6.0, 2.0, 2.0), (6.0, 2.5, 2.0), (5.0, 2.0, 1.5), (6.0, 2.0, 1.5)] {
      let mut results = Vec::new();
      for tb in [0usize, 10, 25] {
        let mut config = ScenarioConfig::jaywalking_defaults();
        config.branching_time = tb;
        let j = config.jaywalking.as_mut().unwrap();
        j.ego.initial_state = vec![-10.0, 0.0, v0, 0.0];
        j.ego.reference_velocity = v0;
        j.collision.side = side;
        j.pedestrian.bounds.v_min = -ped_v;
        j.pedestrian.bounds.v_max = ped_v;
        let game = build_game(&config).unwrap();
        match solve_contingency_game(&game, None, &SolveGameOptions::default()) {
            Ok(sol) => {
                let el = sol.profile.trajectory(0, 0);
                let er = sol.profile.trajectory(1, 0);
                let py_l: f64 = el.states.iter().map(|s| s[1]).fold(0.0, |a: f64, b| if b.abs() > a.abs() { b } else { a });
                let py_r: f64 = er.states.iter().map(|s| s[1]).fold(0.0, |a: f64, b| if b.abs() > a.abs() { b } else { a });
                let vmin = el.states.iter().map(|s| s[2]).fold(f64::INFINITY, f64::min);
                let cost = expected_cost(&game, &sol.profile);
                results.push(format!("tb={tb}: py_l={py_l:+.2} py_r={py_r:+.2} vmin={vmin:.2} J={cost:.2} it={}", sol.solver.iterations));
            }
            Err(_) => results.push(format!("tb={tb}: FAIL")),
        }
      }
      println!("v0={v0} side={side} pedv={ped_v}:");
      for r in results { println!("   {r}"); }
    }
}


#[test]
fn dbg_grid_corners() {
    use contingames::scenarios::*;
    for scenario in [ScenarioId::Jaywalking, ScenarioId::Overtaking] {
        let base = ScenarioConfig::defaults_for(scenario);
        let nominal = base.swept_agent_nominal();
        let ex = base.sweep.grid_extent_x;
        let ey = base.sweep.grid_extent_y;
        let mut fails = 0;
        let mut total = 0;
        let mut max_it = 0;
        for tb in [5usize, 20] {
            for dx in [ex[0], ex[1]] {
                for dy in [ey[0], ey[1]] {
                    let mut config = base.clone();
                    config.branching_time = tb;
                    config.set_swept_agent_position([nominal[0] + dx, nominal[1] + dy]);
                    let game = build_game(&config).unwrap();
                    total += 1;
                    match solve_contingency_game(&game, None, &SolveGameOptions::default()) {
                        Ok(s) => max_it = max_it.max(s.solver.iterations),
                        Err(_) => fails += 1,
                    }
                }
            }
        }
        println!("{scenario}: {fails}/{total} corner failures, max iters {max_it}");
    }
}


#[test]
fn dbg_grid_corners_detail() {
    use contingames::scenarios::*;
    for scenario in [ScenarioId::Jaywalking, ScenarioId::Overtaking] {
        let base = ScenarioConfig::defaults_for(scenario);
        let nominal = base.swept_agent_nominal();
        let ex = base.sweep.grid_extent_x;
        let ey = base.sweep.grid_extent_y;
        for tb in [5usize, 20] {
            for dx in [ex[0], ex[1]] {
                for dy in [ey[0], ey[1]] {
                    let mut config = base.clone();
                    config.branching_time = tb;
                    config.set_swept_agent_position([nominal[0] + dx, nominal[1] + dy]);
                    let game = build_game(&config).unwrap();
                    match solve_contingency_game(&game, None, &SolveGameOptions::default()) {
                        Ok(s) => println!("{scenario} tb={tb} d=({dx:+.1},{dy:+.1}): OK it={}", s.solver.iterations),
                        Err(contingames::game::GameError::SolverFailure{status, solution, ..}) =>
                            println!("{scenario} tb={tb} d=({dx:+.1},{dy:+.1}): FAIL {status:?} merit={:.2e}", solution.solver.merit_norm),
                        Err(e) => println!("{scenario} tb={tb} d=({dx:+.1},{dy:+.1}): ERR {e}"),
                    }
                }
            }
        }
    }
}


#[test]
fn dbg_corner_rows() {
    use contingames::scenarios::*;
    let mut config = ScenarioConfig::overtaking_defaults();
    config.branching_time = 5;
    config.set_swept_agent_position([3.0, -0.4]);
    let game = build_game(&config).unwrap();
    let built = kkt::build_kkt_mcp(&game).unwrap();
    match solve_contingency_game(&game, None, &SolveGameOptions::default()) {
        Ok(_) => println!("unexpectedly ok"),
        Err(contingames::game::GameError::SolverFailure{solution, ..}) => {
            let phi = mcp::fb_residual(&built.mcp, &solution.mcp_point);
            let mut idx: Vec<usize> = (0..phi.len()).collect();
            idx.sort_by(|&a, &b| phi[b].abs().partial_cmp(&phi[a].abs()).unwrap());
            let mut g = vec![0.0; built.mcp.dim()];
            built.mcp.eval_residual(&solution.mcp_point, &mut g);
            for &j in idx.iter().take(8) {
                let label = built.mcp.block_labels().iter().find(|b| b.range.contains(&j))
                    .map(|b| b.name.clone()).unwrap_or_default();
                println!("row {j} [{label}] phi={:+.3e} v={:+.3e} G={:+.3e} lo={}",
                    phi[j], solution.mcp_point[j], g[j], built.mcp.lower()[j]);
            }
            // human trajectory in the stuck point
            let p = &solution.profile;
            for t in [0, 3, 6, 9] {
                println!("t={t} human0=({:.2},{:.2},v{:.3}) lead0=({:.2},{:.2},v{:.3})",
                    p.players[0][1].states[t][0], p.players[0][1].states[t][1], p.players[0][1].states[t][2],
                    p.players[0][2].states[t][0], p.players[0][2].states[t][1], p.players[0][2].states[t][2]);
            }
        }
        Err(e) => println!("other: {e}"),
    }
}


#[test]
fn dbg_human_lane_weight() {
    use contingames::scenarios::*;
    for w in [2.0, 4.0] {
        let mut ok = 0; let mut fails = 0;
        for tb in [5usize, 20] {
            for dx in [-2.5, 3.0] {
                for dy in [-0.4, 0.4] {
                    let mut config = ScenarioConfig::overtaking_defaults();
                    config.branching_time = tb;
                    config.overtaking.as_mut().unwrap().human.weights.lane = w;
                    let nominal = config.swept_agent_nominal();
                    config.set_swept_agent_position([nominal[0] + dx, nominal[1] + dy]);
                    let game = build_game(&config).unwrap();
                    match solve_contingency_game(&game, None, &SolveGameOptions::default()) {
                        Ok(_) => ok += 1,
                        Err(_) => fails += 1,
                    }
                }
            }
        }
        println!("human lane weight {w}: ok={ok} fails={fails}");
        // stay-branch semantics at the tight corner
        let mut config = ScenarioConfig::overtaking_defaults();
        config.overtaking.as_mut().unwrap().human.weights.lane = w;
        let nominal = config.swept_agent_nominal();
        config.set_swept_agent_position([nominal[0] + 3.0, nominal[1] - 0.4]);
        let game = build_game(&config).unwrap();
        if let Ok(sol) = solve_contingency_game(&game, None, &SolveGameOptions::default()) {
            let h_stay = sol.profile.trajectory(1, 1);
            println!("  stay-human py_max={:.2} vmin={:.2}",
                h_stay.states.iter().map(|s| s[1]).fold(f64::NEG_INFINITY, f64::max),
                h_stay.states.iter().map(|s| s[2]).fold(f64::INFINITY, f64::min));
        }
    }
}


#[test]
fn dbg_jaywalk_corner_rows() {
    use contingames::scenarios::*;
    let mut config = ScenarioConfig::jaywalking_defaults();
    config.branching_time = 5;
    config.set_swept_agent_position([4.5, -1.5]);
    let game = build_game(&config).unwrap();
    let built = kkt::build_kkt_mcp(&game).unwrap();
    match solve_contingency_game(&game, None, &SolveGameOptions::default()) {
        Ok(s) => println!("unexpectedly ok it={}", s.solver.iterations),
        Err(contingames::game::GameError::SolverFailure{solution, ..}) => {
            let phi = mcp::fb_residual(&built.mcp, &solution.mcp_point);
            let mut idx: Vec<usize> = (0..phi.len()).collect();
            idx.sort_by(|&a, &b| phi[b].abs().partial_cmp(&phi[a].abs()).unwrap());
            let mut g = vec![0.0; built.mcp.dim()];
            built.mcp.eval_residual(&solution.mcp_point, &mut g);
            for &j in idx.iter().take(8) {
                let label = built.mcp.block_labels().iter().find(|b| b.range.contains(&j))
                    .map(|b| b.name.clone()).unwrap_or_default();
                println!("row {j} [{label}] phi={:+.3e} v={:+.3e} G={:+.3e} lo={}",
                    phi[j], solution.mcp_point[j], g[j], built.mcp.lower()[j]);
            }
            let p = &solution.profile;
            for t in [0, 5, 10, 15, 20, 24] {
                println!("t={t} ego_l=({:.2},{:.2},v{:.2}) ped_l=({:.2},{:.2}) ego_r py={:.2} ped_r=({:.2},{:.2})",
                    p.players[0][0].states[t][0], p.players[0][0].states[t][1], p.players[0][0].states[t][2],
                    p.players[0][1].states[t][0], p.players[0][1].states[t][1],
                    p.players[1][0].states[t][1],
                    p.players[1][1].states[t][0], p.players[1][1].states[t][1]);
            }
        }
        Err(e) => println!("other: {e}"),
    }
}


#[test]
fn dbg_hard_corner_tb_sweep() {
    use contingames::scenarios::*;
    for tb in [0usize, 4, 8, 12, 16, 20, 24, 25] {
        let mut config = ScenarioConfig::jaywalking_defaults();
        config.branching_time = tb;
        config.set_swept_agent_position([0.0, -1.5]);
        let game = build_game(&config).unwrap();
        match solve_contingency_game(&game, None, &SolveGameOptions::default()) {
            Ok(s) => {
                let e = s.profile.trajectory(0, 0);
                let vmin = e.states.iter().map(|x| x[2]).fold(f64::INFINITY, f64::min);
                println!("tb={tb}: OK it={} vmin={vmin:.2}", s.solver.iterations);
            }
            Err(contingames::game::GameError::SolverFailure{status, solution, ..}) =>
                println!("tb={tb}: FAIL {status:?} merit={:.2e}", solution.solver.merit_norm),
            Err(e) => println!("tb={tb}: ERR {e}"),
        }
    }
}


#[test]
fn dbg_hard_corner_rows25() {
    use contingames::scenarios::*;
    let mut config = ScenarioConfig::jaywalking_defaults();
    config.branching_time = 25;
    config.set_swept_agent_position([0.0, -1.5]);
    let game = build_game(&config).unwrap();
    let built = kkt::build_kkt_mcp(&game).unwrap();
    match solve_contingency_game(&game, None, &SolveGameOptions::default()) {
        Ok(s) => println!("ok it={}", s.solver.iterations),
        Err(contingames::game::GameError::SolverFailure{solution, ..}) => {
            let phi = mcp::fb_residual(&built.mcp, &solution.mcp_point);
            let mut idx: Vec<usize> = (0..phi.len()).collect();
            idx.sort_by(|&a, &b| phi[b].abs().partial_cmp(&phi[a].abs()).unwrap());
            let mut g = vec![0.0; built.mcp.dim()];
            built.mcp.eval_residual(&solution.mcp_point, &mut g);
            for &j in idx.iter().take(10) {
                let label = built.mcp.block_labels().iter().find(|b| b.range.contains(&j))
                    .map(|b| b.name.clone()).unwrap_or_default();
                println!("row {j} [{label}] phi={:+.3e} v={:+.3e} G={:+.3e} lo={}",
                    phi[j], solution.mcp_point[j], g[j], built.mcp.lower()[j]);
            }
            let p = &solution.profile;
            for t in [0, 4, 8, 12, 16, 20, 24] {
                println!("t={t} ego=({:+.2},{:+.2},v{:.2},h{:+.2}) a={:+.2} w={:+.2} pedL=({:+.2},{:+.2}) pedR=({:+.2},{:+.2})",
                    p.players[0][0].states[t][0], p.players[0][0].states[t][1], p.players[0][0].states[t][2], p.players[0][0].states[t][3],
                    p.players[0][0].controls[t][0], p.players[0][0].controls[t][1],
                    p.players[0][1].states[t][0], p.players[0][1].states[t][1],
                    p.players[1][1].states[t][0], p.players[1][1].states[t][1]);
            }
        }
        Err(e) => println!("other: {e}"),
    }
}


#[test]
fn dbg_ego_start() {
    use contingames::scenarios::*;
    for x0 in [-12.0, -13.0] {
        let mut bad = 0; let mut total = 0;
        for tb in [8usize, 12, 16, 20, 25] {
            for dx in [-2.0, 0.0, 2.5] {
                for dy in [-1.5, 0.0, 1.5] {
                    let mut config = ScenarioConfig::jaywalking_defaults();
                    config.branching_time = tb;
                    config.jaywalking.as_mut().unwrap().ego.initial_state = vec![x0, 0.0, 6.0, 0.0];
                    let nominal = config.swept_agent_nominal();
                    config.set_swept_agent_position([nominal[0] + dx, nominal[1] + dy]);
                    let game = build_game(&config).unwrap();
                    total += 1;
                    if solve_contingency_game(&game, None, &SolveGameOptions::default()).is_err() { bad += 1; }
                }
            }
        }
        println!("ego x0={x0}: {bad}/{total} failures");
        // nominal quality: cost ordering across tb
        let mut costs = Vec::new();
        for tb in [0usize, 10, 25] {
            let mut config = ScenarioConfig::jaywalking_defaults();
            config.branching_time = tb;
            config.jaywalking.as_mut().unwrap().ego.initial_state = vec![x0, 0.0, 6.0, 0.0];
            let game = build_game(&config).unwrap();
            if let Ok(s) = solve_contingency_game(&game, None, &SolveGameOptions::default()) {
                costs.push((tb, expected_cost(&game, &s.profile)));
            }
        }
        println!("  nominal costs: {costs:?}");
    }
}


#[test]
fn dbg_trimmed_grid() {
    use contingames::scenarios::*;
    let mut bad = Vec::new(); let mut total = 0;
    for tb in [0usize, 5, 8, 12, 16, 20, 25] {
        for dx in [-1.0, 0.0, 1.0, 2.0, 3.5] {
            for dy in [-1.5, -0.5, 0.5, 1.5] {
                let mut config = ScenarioConfig::jaywalking_defaults();
                config.branching_time = tb;
                let nominal = config.swept_agent_nominal();
                config.set_swept_agent_position([nominal[0] + dx, nominal[1] + dy]);
                let game = build_game(&config).unwrap();
                total += 1;
                if solve_contingency_game(&game, None, &SolveGameOptions::default()).is_err() {
                    bad.push((tb, dx, dy));
                }
            }
        }
    }
    println!("trimmed jaywalk grid: {}/{total} failures: {bad:?}", bad.len());
}
