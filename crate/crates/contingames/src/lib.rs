//! Contingency trajectory games solved as mixed complementarity problems.
//!
//! A contingency game couples one ego planner with several hypothesised
//! versions of the other agents. The ego optimises one trajectory per intent
//! hypothesis under a belief, with all branches constrained to share controls
//! up to a branching time `t_b`; after `t_b` the branches may diverge. The
//! joint first-order conditions of all players form a mixed complementarity
//! problem which is solved with a semismooth Newton method.
//!
//! The crate is organised bottom-up:
//!
//! - [`autodiff`]: forward-mode dual numbers for gradients and curvature,
//! - [`sparse`]: compressed sparse structure and LU factorisation,
//! - [`mcp`]: the mixed complementarity problem type and its solver,
//! - [`dynamics`]: point-mass and unicycle agent models,
//! - [`game`]: game description, KKT synthesis and equilibrium checks,
//! - [`scenarios`]: the two shipped driving scenarios and their config,
//! - [`eval`]: open-loop and closed-loop sweep harnesses and metrics,
//! - [`cli`]: the `contingames` command-line entry points.
//!
//! A minimal end-to-end solve:
//!
//! ```
//! use contingames::scenarios::{build_game, ScenarioConfig};
//! use contingames::game::{solve_contingency_game, SolveGameOptions};
//!
//! let mut config = ScenarioConfig::jaywalking_defaults();
//! config.horizon = 6; // keep the doc example quick
//! config.branching_time = 3;
//! let game = build_game(&config).unwrap();
//! let solution = solve_contingency_game(&game, None, &SolveGameOptions::default()).unwrap();
//! assert!(solution.solver.status.is_converged());
//! ```

pub mod autodiff;
pub mod cli;
pub mod dynamics;
pub mod eval;
pub mod game;
pub mod mcp;
pub mod scenarios;
pub mod sparse;

/// Library version recorded in every output file for provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
