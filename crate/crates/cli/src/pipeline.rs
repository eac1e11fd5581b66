//! Solve and explain steps shared by the command line and the service.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use exmip_core::iis::IisAlgorithm;
use exmip_core::model::{write_model, Assignment};
use exmip_core::problems::{load_problem, Family, Problem, ScheduleRow};
use exmip_core::query::{
    build_asp, classify_extended, explain_asp, translate_query, Explanation, OutcomeCase, Query,
};
use exmip_core::solver::{solve_milp, MilpStatus};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads an instance file; the family comes from `family` or the extension.
pub fn load_file(path: &Path, family: Option<Family>) -> Result<(Problem, String), CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let family = family
        .or_else(|| {
            path.extension()
                .and_then(|e| e.to_str())
                .and_then(Family::from_extension)
        })
        .ok_or_else(|| CliError::UnknownFamily(path.to_path_buf()))?;
    Ok((load_problem(family, &text)?, text))
}

/// Solution as shown to a user: a schedule table, the winning bids, or the
/// nonzero variables of a plain model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SolutionView {
    Schedule { rows: Vec<ScheduleRow> },
    Winners { bids: Vec<u32> },
    Values { values: BTreeMap<String, f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solved {
    pub family: Family,
    pub f_star: f64,
    pub solution: SolutionView,
    /// Value of every variable, in model order.
    pub assignment: Vec<f64>,
    pub nodes: usize,
    pub seconds: f64,
}

pub fn solution_view(problem: &Problem, assignment: &Assignment) -> SolutionView {
    match problem {
        Problem::Rcpsp(p) => SolutionView::Schedule {
            rows: p.schedule_table(assignment).unwrap_or_default(),
        },
        Problem::Wdp(p) => SolutionView::Winners {
            bids: p.winners(assignment),
        },
        Problem::Canonical(m) => SolutionView::Values {
            values: m
                .variables
                .iter()
                .zip(assignment.values())
                .filter(|(_, &v)| v.abs() > 1e-9)
                .map(|(var, &v)| (var.name.clone(), v))
                .collect(),
        },
    }
}

pub fn solve(problem: &Problem, time_limit: Option<Duration>) -> Result<Solved, CliError> {
    let start = Instant::now();
    let r = solve_milp(problem.model(), time_limit)?;
    let seconds = start.elapsed().as_secs_f64();
    match (r.status, r.assignment, r.objective) {
        (MilpStatus::Optimal, Some(a), Some(f_star)) => Ok(Solved {
            family: problem.family(),
            f_star,
            solution: solution_view(problem, &a),
            assignment: a.values().to_vec(),
            nodes: r.stats.nodes,
            seconds,
        }),
        (MilpStatus::Unbounded, _, _) => Err(CliError::NoOptimum("unbounded")),
        _ => Err(CliError::NoOptimum("infeasible")),
    }
}

/// A stored answer: everything needed to re-check the explanation without
/// the original instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub family: Family,
    /// SHA-256 of the instance payload.
    pub instance: String,
    pub query: Query,
    pub algorithm: IisAlgorithm,
    pub f_star: f64,
    pub outcome: OutcomeCase,
    pub explanation: Explanation,
    /// The assembled problem in the canonical model format.
    pub asp_model: String,
}

impl Artifact {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifacts serialize")
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }
}

pub fn parse_query(text: &str) -> Result<Query, CliError> {
    serde_json::from_str(text).map_err(CliError::QueryJson)
}

/// Classifies the query against the optimum and explains it.
pub fn explain(
    problem: &Problem,
    payload: &str,
    f_star: f64,
    query: &Query,
    algorithm: IisAlgorithm,
    time_limit: Option<Duration>,
) -> Result<Artifact, CliError> {
    let cq = translate_query(query, problem)?;
    let outcome = classify_extended(problem.model(), f_star, &cq, time_limit)?;
    let asp = build_asp(problem.model(), f_star, cq)?;
    let explanation = explain_asp(&asp, algorithm, time_limit)?;
    Ok(Artifact {
        family: problem.family(),
        instance: sha256_hex(payload.as_bytes()),
        query: query.clone(),
        algorithm,
        f_star: asp.f_star,
        outcome: outcome.case,
        explanation,
        asp_model: write_model(&asp.model),
    })
}
