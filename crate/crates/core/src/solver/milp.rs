use std::time::{Duration, Instant};

use log::trace;
use serde::{Deserialize, Serialize};

use super::lp::{solve_lp_with_bounds, LpStatus};
use super::propagate::Rows;
use super::SolveError;
use crate::model::{Assignment, LinearExpr, MilpModel, Sense, DEFAULT_TOLERANCE};

pub const INTEGRALITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MilpStats {
    pub nodes: usize,
    pub lp_solves: usize,
    pub lp_iterations: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub assignment: Assignment,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpResult {
    pub status: MilpStatus,
    pub assignment: Option<Assignment>,
    pub objective: Option<f64>,
    pub stats: MilpStats,
}

#[derive(Debug, Clone, Default)]
pub struct MilpOptions {
    pub time_limit: Option<Duration>,
    /// Stop at the first integral solution (pure feasibility search).
    pub first_feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(Assignment),
    Infeasible,
    Unknown,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

pub fn solve_milp(
    model: &MilpModel,
    time_limit: Option<Duration>,
) -> Result<MilpResult, SolveError> {
    solve_milp_with(
        model,
        &MilpOptions {
            time_limit,
            first_feasible: false,
        },
    )
}

/// Pure satisfiability: the objective is dropped and the search stops at
/// the first integral point. A timeout maps to [`Feasibility::Unknown`].
pub fn check_feasible(
    model: &MilpModel,
    time_limit: Option<Duration>,
) -> Result<Feasibility, SolveError> {
    let mut plain = model.clone();
    plain.objective = LinearExpr::new();
    let options = MilpOptions {
        time_limit,
        first_feasible: true,
    };
    match solve_milp_with(&plain, &options) {
        Ok(r) => Ok(match (r.status, r.assignment) {
            (MilpStatus::Optimal, Some(a)) => Feasibility::Feasible(a),
            _ => Feasibility::Infeasible,
        }),
        Err(SolveError::TimeLimit { .. }) => Ok(Feasibility::Unknown),
        Err(e) => Err(e),
    }
}

/// Branching candidates probed per node.
const STRONG_CANDIDATES: usize = 8;

struct Node {
    lower: Vec<f64>,
    upper: Vec<f64>,
    depth: usize,
}

impl Node {
    fn child(&self) -> Node {
        Node {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            depth: self.depth + 1,
        }
    }
}

/// Depth-first branch-and-bound with bound propagation at every node, strong
/// branching over the most fractional variables (a variable in a `sum x = 1`
/// row splits that row in two) and pruning against the incumbent.
pub fn solve_milp_with(model: &MilpModel, options: &MilpOptions) -> Result<MilpResult, SolveError> {
    let start = Instant::now();
    let deadline = options.time_limit.map(|t| start + t);
    let sign = match model.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    // Objective values then differ by integers between integral points.
    let integral_objective = model
        .objective
        .terms()
        .iter()
        .all(|&(v, c)| model.variables[v.0].integrality.is_integral() && c.fract() == 0.0);

    let rows = Rows::new(model);
    let mut stats = MilpStats::default();
    let mut best: Option<(Assignment, f64)> = None; // objective in min-form
    let mut stack = vec![Node {
        lower: model.variables.iter().map(|v| v.lower).collect(),
        upper: model.variables.iter().map(|v| v.upper).collect(),
        depth: 0,
    }];

    let time_limit = |best: &Option<(Assignment, f64)>, stats: &MilpStats| SolveError::TimeLimit {
        best: best.as_ref().map(|(a, v)| {
            Box::new(Incumbent {
                assignment: a.clone(),
                objective: sign * v,
            })
        }),
        nodes: stats.nodes,
    };

    while let Some(mut node) = stack.pop() {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(time_limit(&best, &stats));
        }
        stats.nodes += 1;
        if !rows.propagate(&mut node.lower, &mut node.upper) {
            trace!(
                "node {} depth {}: propagation infeasible",
                stats.nodes,
                node.depth
            );
            continue;
        }
        stats.lp_solves += 1;
        let lp = match solve_lp_with_bounds(model, &node.lower, &node.upper, deadline) {
            Ok(lp) => lp,
            Err(SolveError::Timeout) => return Err(time_limit(&best, &stats)),
            Err(e) => return Err(e),
        };
        stats.lp_iterations += lp.iterations;
        match lp.status {
            LpStatus::Infeasible => {
                trace!("node {} depth {}: infeasible", stats.nodes, node.depth);
                continue;
            }
            LpStatus::Unbounded => {
                trace!("node {} depth {}: unbounded", stats.nodes, node.depth);
                stats.wall_time = start.elapsed();
                return Ok(MilpResult {
                    status: MilpStatus::Unbounded,
                    assignment: None,
                    objective: None,
                    stats,
                });
            }
            LpStatus::Optimal => {}
        }
        let values = lp.assignment.expect("optimal LP carries an assignment");
        let bound = sign * model.objective.evaluate(&values)?;
        if let Some((_, incumbent)) = &best {
            let cutoff = if integral_objective {
                incumbent - 1.0 + DEFAULT_TOLERANCE
            } else {
                incumbent - DEFAULT_TOLERANCE
            };
            if bound >= cutoff {
                trace!(
                    "node {} depth {}: pruned at {bound}",
                    stats.nodes,
                    node.depth
                );
                continue;
            }
        }

        let mut fractional: Vec<(usize, f64)> = model
            .variables
            .iter()
            .filter(|v| v.integrality.is_integral())
            .map(|v| (v.id.0, values.0[v.id.0]))
            .filter(|&(_, x)| (x - x.round()).abs() > INTEGRALITY_TOLERANCE)
            .collect();

        if fractional.is_empty() {
            let mut rounded = values;
            for v in &model.variables {
                if v.integrality.is_integral() {
                    rounded.0[v.id.0] = rounded.0[v.id.0].round();
                }
            }
            let value = sign * model.objective.evaluate(&rounded)?;
            trace!(
                "node {} depth {}: integral at {value}",
                stats.nodes,
                node.depth
            );
            if best.as_ref().is_none_or(|(_, b)| value < *b) {
                best = Some((rounded, value));
            }
            if options.first_feasible {
                break;
            }
            continue;
        }

        // Most fractional first, ties to the lowest id.
        fractional.sort_by(|a, b| {
            let da = (a.1 - a.1.round()).abs();
            let db = (b.1 - b.1.round()).abs();
            db.total_cmp(&da).then(a.0.cmp(&b.0))
        });
        let mut candidates: Vec<[Node; 2]> = Vec::new();
        let mut seen_rows = Vec::new();
        for &(j, x) in &fractional {
            if candidates.len() >= STRONG_CANDIDATES {
                break;
            }
            let children = match rows.split_partition(j, &values.0) {
                Some((row, left, right)) => {
                    if seen_rows.contains(&row) {
                        continue;
                    }
                    seen_rows.push(row);
                    let mut first = node.child();
                    for &k in &right {
                        first.upper[k] = 0.0;
                    }
                    let mut second = node.child();
                    for &k in &left {
                        second.upper[k] = 0.0;
                    }
                    [first, second]
                }
                None => {
                    let mut down = node.child();
                    down.upper[j] = x.floor();
                    let mut up = node.child();
                    up.lower[j] = x.ceil();
                    if x - x.floor() >= 0.5 {
                        [up, down]
                    } else {
                        [down, up]
                    }
                }
            };
            candidates.push(children);
        }

        // Strong branching: probe each candidate's children with propagation
        // and the LP, preferring branches that cut children off outright.
        let mut chosen = 0;
        let mut best_score = (0usize, f64::NEG_INFINITY);
        if candidates.len() > 1 {
            for (i, children) in candidates.iter_mut().enumerate() {
                let mut dead = 0;
                let mut gains = [0.0f64; 2];
                for (c, child) in children.iter_mut().enumerate() {
                    let before: f64 = child
                        .upper
                        .iter()
                        .zip(&child.lower)
                        .map(|(u, l)| u - l)
                        .sum();
                    if !rows.propagate(&mut child.lower, &mut child.upper) {
                        dead += 1;
                        continue;
                    }
                    let after: f64 = child
                        .upper
                        .iter()
                        .zip(&child.lower)
                        .map(|(u, l)| u - l)
                        .sum();
                    stats.lp_solves += 1;
                    let probe =
                        match solve_lp_with_bounds(model, &child.lower, &child.upper, deadline) {
                            Ok(lp) => lp,
                            Err(SolveError::Timeout) => return Err(time_limit(&best, &stats)),
                            Err(e) => return Err(e),
                        };
                    stats.lp_iterations += probe.iterations;
                    match probe.status {
                        LpStatus::Infeasible => dead += 1,
                        _ => {
                            let obj = probe.objective.map_or(bound, |o| sign * o);
                            gains[c] = (obj - bound).max(0.0) + 1e-3 * (before - after);
                        }
                    }
                }
                let score = (dead, (gains[0] + 1e-6) * (gains[1] + 1e-6));
                if score.0 > best_score.0 || (score.0 == best_score.0 && score.1 > best_score.1) {
                    best_score = score;
                    chosen = i;
                }
                if dead == 2 {
                    break;
                }
            }
        }
        if best_score.0 == 2 {
            trace!(
                "node {} depth {}: both children infeasible",
                stats.nodes,
                node.depth
            );
            continue;
        }
        trace!(
            "node {} depth {}: branch on candidate {chosen}",
            stats.nodes,
            node.depth
        );
        let [first, second] = candidates.swap_remove(chosen);
        // The child explored first is pushed last.
        stack.push(second);
        stack.push(first);
    }

    stats.wall_time = start.elapsed();
    Ok(match best {
        Some((assignment, value)) => MilpResult {
            status: MilpStatus::Optimal,
            assignment: Some(assignment),
            objective: Some(sign * value),
            stats,
        },
        None => MilpResult {
            status: MilpStatus::Infeasible,
            assignment: None,
            objective: None,
            stats,
        },
    })
}
