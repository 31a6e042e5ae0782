//! Numerical toolkit for two-player zero-sum differential games with exit
//! times and three distinct exit costs.
//!
//! Player X (the minimizer) steers `x` inside a box `Ω_X`, player Y (the
//! maximizer) steers `y` inside a box `Ω_Y`. The game stops at the first exit
//! of either state; the payoff is a discounted running cost plus an exit cost
//! that depends on who left (X only, Y only, or both at once).
//!
//! The crate is organised bottom-up:
//!
//! * [`problem`]: game data and validation reports.
//! * [`hamiltonian`]: upper/lower Hamiltonians by exact enumeration.
//! * [`grid`]: tensor grids with boundary-role tags and multilinear interpolation.
//! * [`solver`]: semi-Lagrangian value iteration for the lower and upper values.
//! * [`strategy`]: control signals, feedback strategies and constrained
//!   non-anticipating tunings.
//! * [`simulator`]: trajectory integration, exit classification, cost accounting.
//! * [`certify`]: randomised checks of the tuned-strategy properties.
//! * [`oracle`]: brute-force values for node-exact instances.
//! * [`config`] and [`cli`]: TOML problem files and the command-line driver.

// `!(x > 0.0)` is used on purpose: it rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod linalg;
pub mod oracle;
pub mod poly;
pub mod problem;
pub mod report;
pub mod simulator;
pub mod solver;
pub mod strategy;

pub use error::{GameError, Result};
pub use grid::{GridSpec, NodeRole, ValueGrid};
pub use hamiltonian::{Costate, HamiltonianKind};
pub use problem::{BoxDomain, ControlSet, CostSplit, Costs, Dynamics, GameProblem, XDrift};
pub use simulator::{ExitCase, GameOutcome};
pub use solver::{Convention, SchemeParams, SolveReport};
pub use strategy::{ControlSignal, Player, SonerParams, StrategyKind, StrategyMap};
