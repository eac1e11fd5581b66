//! Feasibility and optimality oracle: bounded simplex for LP relaxations and
//! depth-first branch-and-bound for integrality.

mod lp;
mod milp;
mod propagate;

pub use lp::{solve_lp, solve_lp_with_bounds, LpResult, LpStatus};
pub use milp::{
    check_feasible, solve_milp, solve_milp_with, Feasibility, Incumbent, MilpOptions, MilpResult,
    MilpStats, MilpStatus, INTEGRALITY_TOLERANCE,
};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    /// Deadline hit inside a single LP solve.
    #[error("time limit reached")]
    Timeout,
    /// Branch-and-bound ran out of time; carries the best incumbent found.
    #[error("time limit reached after {nodes} nodes")]
    TimeLimit {
        best: Option<Box<Incumbent>>,
        nodes: usize,
    },
    #[error("numerical instability: {0}")]
    NumericalInstability(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
