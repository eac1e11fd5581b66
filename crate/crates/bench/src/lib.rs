//! Shared setup for the criterion benchmarks.

use std::path::PathBuf;

use exmip_core::problems::{load_problem, Family, Problem};
use exmip_core::query::{build_asp, translate_query, AspProblem, Query};
use exmip_core::solver::solve_milp;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Loads a bundled fixture; the family follows the extension.
pub fn fixture(rel: &str) -> Problem {
    let path = fixtures_dir().join(rel);
    let family = path
        .extension()
        .and_then(|e| e.to_str())
        .and_then(Family::from_extension)
        .expect("fixture extension names a family");
    let text = std::fs::read_to_string(&path).expect("fixture is readable");
    load_problem(family, &text).expect("fixture parses")
}

/// Solves the instance and assembles the problem for one query.
pub fn assembled(problem: &Problem, query: &Query) -> AspProblem {
    let f_star = solve_milp(problem.model(), None)
        .expect("fixture solves")
        .objective
        .expect("fixture has an optimum");
    let cq = translate_query(query, problem).expect("query applies to the fixture");
    build_asp(problem.model(), f_star, cq).expect("assembled problem builds")
}
