//! Contrastive explanations for optimal MILP solutions.
//!
//! A query about the optimal solution ("why is activity 24 not completed
//! before time 41?") is encoded as constraints and added, together with a
//! constraint demanding an objective at least as good as the optimum, to the
//! original model. When that system is infeasible, an irreducible infeasible
//! subsystem names the constraints responsible, and its dual graph is
//! rendered as a connected graph of reasons.

pub mod bench;
pub mod graph;
pub mod iis;
pub mod model;
pub mod problems;
pub mod query;
pub mod solver;
pub mod verify;

pub use bench::{BenchRecord, Report, SuiteConfig};
pub use graph::{
    assert_connected, dual_graph, label, serialize, to_reason_graph, Connectivity, DualGraph,
    Format, GraphError, Hypergraph, ReasonGraph, ReasonNode,
};
pub use iis::{
    additive_method, brute_force_smallest_iis, deletion_filter, extract_iis, grow_mfs,
    smallest_iis, Iis, IisAlgorithm, IisError, IisStats,
};
pub use model::{
    Assignment, ConstraintKind, ConstraintTag, Integrality, LinearExpr, MilpModel, ModelError,
    Relation, Sense, TaggedConstraint, VarId, Variable,
};
pub use problems::{load_problem, Family, LoadError, Problem};
pub use query::{
    build_asp, classify_extended, explain, explain_asp, translate_query, AlternateOptimumNotice,
    AspProblem, ExplainError, Explanation, ExtendedOutcome, OutcomeCase, Query, QueryError,
};
pub use solver::{
    check_feasible, solve_lp, solve_milp, Feasibility, MilpResult, MilpStatus, SolveError,
};
