//! Contrastive queries, the user-desired satisfiability problem and the
//! explain pipeline.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{to_reason_graph, GraphError, ReasonGraph};
use crate::iis::{extract_iis, Iis, IisAlgorithm, IisError};
use crate::model::{
    Assignment, ConstraintKind, ConstraintTag, LinearExpr, MilpModel, ModelError, Relation, Sense,
    TaggedConstraint, VarId,
};
use crate::problems::{Family, Problem, RcpspModel, WdpModel};
use crate::solver::{check_feasible, solve_milp, Feasibility, MilpStatus, SolveError};

/// Id of the minimality constraint in every [`AspProblem`].
pub const MINIMALITY_ID: &str = "min";

/// Relative tolerance used to compare objective values with `f*`.
pub const OBJECTIVE_TOLERANCE: f64 = 1e-6;

/// A contrastive question about the optimal solution.
///
/// Activity queries (`Q1`..`Q8`) apply to scheduling instances, bid queries
/// (`W1`..`W4`) to auctions. `All` conjoins several queries; an empty `All`
/// asks nothing and always yields the optimal solution back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Query {
    /// Why is `activity` completed at `time`? Vetoes that completion.
    Q1 {
        activity: u32,
        time: u32,
    },
    /// Why is `activity` not completed at `time`? Enforces it.
    Q2 {
        activity: u32,
        time: u32,
    },
    /// Why is `activity` not completed before `time`?
    Q3 {
        activity: u32,
        time: u32,
    },
    /// Why is `activity` not completed after `time`?
    Q4 {
        activity: u32,
        time: u32,
    },
    /// Why are all of `activities` completed at `time`? Vetoes that not all
    /// of them complete then.
    Q5 {
        activities: Vec<u32>,
        time: u32,
    },
    /// Vetoes every activity of the group completing at `time`.
    #[serde(rename = "Q5none")]
    Q5None {
        activities: Vec<u32>,
        time: u32,
    },
    /// Why are `activities` not all completed at `time`?
    Q6 {
        activities: Vec<u32>,
        time: u32,
    },
    /// Why is `activity` completed at `time` instead of `alt_time`?
    Q7 {
        activity: u32,
        time: u32,
        alt_time: u32,
    },
    /// Why is `activity` completed at `time` instead of `other`?
    Q8 {
        activity: u32,
        other: u32,
        time: u32,
    },
    /// Why is `bid` selected?
    W1 {
        bid: u32,
    },
    /// Why is `bid` not selected?
    W2 {
        bid: u32,
    },
    /// Why are all of `bids` selected?
    W3 {
        bids: Vec<u32>,
    },
    /// Why is `bid` selected instead of `other`?
    W4 {
        bid: u32,
        other: u32,
    },
    All {
        queries: Vec<Query>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Enforce,
    Veto,
}

impl Query {
    pub fn kind(&self) -> &'static str {
        match self {
            Query::Q1 { .. } => "Q1",
            Query::Q2 { .. } => "Q2",
            Query::Q3 { .. } => "Q3",
            Query::Q4 { .. } => "Q4",
            Query::Q5 { .. } => "Q5",
            Query::Q5None { .. } => "Q5none",
            Query::Q6 { .. } => "Q6",
            Query::Q7 { .. } => "Q7",
            Query::Q8 { .. } => "Q8",
            Query::W1 { .. } => "W1",
            Query::W2 { .. } => "W2",
            Query::W3 { .. } => "W3",
            Query::W4 { .. } => "W4",
            Query::All { .. } => "All",
        }
    }

    /// Enforce/veto atoms in emission order.
    pub fn modes(&self) -> Vec<Mode> {
        use Mode::{Enforce, Veto};
        match self {
            Query::Q1 { .. } | Query::Q5 { .. } | Query::Q5None { .. } => vec![Veto],
            Query::W1 { .. } | Query::W3 { .. } => vec![Veto],
            Query::Q2 { .. } | Query::Q3 { .. } | Query::Q4 { .. } | Query::Q6 { .. } => {
                vec![Enforce]
            }
            Query::W2 { .. } => vec![Enforce],
            Query::Q7 { .. } | Query::Q8 { .. } | Query::W4 { .. } => vec![Enforce, Veto],
            Query::All { queries } => queries.iter().flat_map(Query::modes).collect(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("unknown {0}")]
    UnknownEntity(String),
    #[error("time {time} is outside the window [{ef}, {lf}] of activity {activity}")]
    TimeOutOfWindow {
        activity: u32,
        time: u32,
        ef: u32,
        lf: u32,
    },
    #[error("activity {0} is a dummy source or sink and cannot be queried")]
    DummyActivity(u32),
    #[error("{query} queries do not apply to {family} instances")]
    WrongFamily { query: &'static str, family: Family },
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

struct Atom {
    expr: LinearExpr,
    relation: Relation,
    rhs: f64,
    tag: ConstraintTag,
}

fn query_tag(kind: &str, atom: &str) -> ConstraintTag {
    ConstraintTag::new(ConstraintKind::Query)
        .with("query", kind)
        .with("atom", atom)
}

fn check_group(ids: &[u32], what: &str) -> Result<(), QueryError> {
    if ids.is_empty() {
        return Err(QueryError::InvalidGroup(format!("empty {what} group")));
    }
    let unique: BTreeSet<u32> = ids.iter().copied().collect();
    if unique.len() != ids.len() {
        return Err(QueryError::InvalidGroup(format!(
            "repeated {what} in group"
        )));
    }
    Ok(())
}

fn window(p: &RcpspModel, activity: u32) -> Result<(u32, u32), QueryError> {
    if p.instance.index_of(activity).is_none() {
        return Err(QueryError::UnknownEntity(format!("activity {activity}")));
    }
    if p.instance.is_dummy(activity) {
        return Err(QueryError::DummyActivity(activity));
    }
    Ok(p.window(activity).expect("activity exists"))
}

fn x(p: &RcpspModel, activity: u32, time: u32) -> Result<VarId, QueryError> {
    let (ef, lf) = window(p, activity)?;
    p.var(activity, time).ok_or(QueryError::TimeOutOfWindow {
        activity,
        time,
        ef,
        lf,
    })
}

fn single(kind: &str, atom: &str, j: u32, t: u32, v: VarId, rhs: f64) -> Atom {
    Atom {
        expr: LinearExpr::from_terms([(v, 1.0)]),
        relation: Relation::Eq,
        rhs,
        tag: query_tag(kind, atom).with("j", j).with("t", t),
    }
}

fn rcpsp_atoms(q: &Query, p: &RcpspModel, out: &mut Vec<Atom>) -> Result<(), QueryError> {
    let kind = q.kind();
    match q {
        Query::Q1 { activity, time } => out.push(single(
            kind,
            "not_at",
            *activity,
            *time,
            x(p, *activity, *time)?,
            0.0,
        )),
        Query::Q2 { activity, time } => out.push(single(
            kind,
            "at",
            *activity,
            *time,
            x(p, *activity, *time)?,
            1.0,
        )),
        Query::Q3 { activity, time } => {
            let (ef, lf) = window(p, *activity)?;
            if *time <= ef {
                return Err(QueryError::TimeOutOfWindow {
                    activity: *activity,
                    time: *time,
                    ef,
                    lf,
                });
            }
            let terms =
                (ef..=lf.min(time - 1)).map(|t| (p.var(*activity, t).expect("in window"), 1.0));
            out.push(Atom {
                expr: LinearExpr::from_terms(terms),
                relation: Relation::Eq,
                rhs: 1.0,
                tag: query_tag(kind, "before")
                    .with("j", activity)
                    .with("t", time),
            });
        }
        Query::Q4 { activity, time } => {
            let (ef, lf) = window(p, *activity)?;
            if *time >= lf {
                return Err(QueryError::TimeOutOfWindow {
                    activity: *activity,
                    time: *time,
                    ef,
                    lf,
                });
            }
            let terms =
                (ef.max(time + 1)..=lf).map(|t| (p.var(*activity, t).expect("in window"), 1.0));
            out.push(Atom {
                expr: LinearExpr::from_terms(terms),
                relation: Relation::Eq,
                rhs: 1.0,
                tag: query_tag(kind, "after").with("j", activity).with("t", time),
            });
        }
        Query::Q5 { activities, time }
        | Query::Q5None { activities, time }
        | Query::Q6 { activities, time } => {
            check_group(activities, "activity")?;
            let vars = activities
                .iter()
                .map(|&j| x(p, j, *time))
                .collect::<Result<Vec<_>, _>>()?;
            let n = activities.len() as f64;
            let (relation, rhs, atom) = match q {
                Query::Q5 { .. } => (Relation::Le, n - 1.0, "not_all"),
                Query::Q5None { .. } => (Relation::Eq, 0.0, "none"),
                _ => (Relation::Eq, n, "all"),
            };
            out.push(Atom {
                expr: LinearExpr::from_terms(vars.into_iter().map(|v| (v, 1.0))),
                relation,
                rhs,
                tag: query_tag(kind, atom)
                    .with_list("acts", activities)
                    .with("t", time),
            });
        }
        Query::Q7 {
            activity,
            time,
            alt_time,
        } => {
            out.push(single(
                kind,
                "at",
                *activity,
                *alt_time,
                x(p, *activity, *alt_time)?,
                1.0,
            ));
            out.push(single(
                kind,
                "not_at",
                *activity,
                *time,
                x(p, *activity, *time)?,
                0.0,
            ));
        }
        Query::Q8 {
            activity,
            other,
            time,
        } => {
            out.push(single(kind, "at", *other, *time, x(p, *other, *time)?, 1.0));
            out.push(single(
                kind,
                "not_at",
                *activity,
                *time,
                x(p, *activity, *time)?,
                0.0,
            ));
        }
        _ => unreachable!("activity query"),
    }
    Ok(())
}

fn bid_var(p: &WdpModel, bid: u32) -> Result<VarId, QueryError> {
    p.var(bid)
        .ok_or_else(|| QueryError::UnknownEntity(format!("bid {bid}")))
}

fn bid_atom(kind: &str, atom: &str, bid: u32, v: VarId, rhs: f64) -> Atom {
    Atom {
        expr: LinearExpr::from_terms([(v, 1.0)]),
        relation: Relation::Eq,
        rhs,
        tag: query_tag(kind, atom).with("b", bid),
    }
}

fn wdp_atoms(q: &Query, p: &WdpModel, out: &mut Vec<Atom>) -> Result<(), QueryError> {
    let kind = q.kind();
    match q {
        Query::W1 { bid } => out.push(bid_atom(kind, "not_selected", *bid, bid_var(p, *bid)?, 0.0)),
        Query::W2 { bid } => out.push(bid_atom(kind, "selected", *bid, bid_var(p, *bid)?, 1.0)),
        Query::W3 { bids } => {
            check_group(bids, "bid")?;
            let vars = bids
                .iter()
                .map(|&b| bid_var(p, b))
                .collect::<Result<Vec<_>, _>>()?;
            out.push(Atom {
                expr: LinearExpr::from_terms(vars.into_iter().map(|v| (v, 1.0))),
                relation: Relation::Le,
                rhs: bids.len() as f64 - 1.0,
                tag: query_tag(kind, "not_all_bids").with_list("bids", bids),
            });
        }
        Query::W4 { bid, other } => {
            out.push(bid_atom(kind, "selected", *other, bid_var(p, *other)?, 1.0));
            out.push(bid_atom(kind, "not_selected", *bid, bid_var(p, *bid)?, 0.0));
        }
        _ => unreachable!("bid query"),
    }
    Ok(())
}

fn collect_atoms(q: &Query, problem: &Problem, out: &mut Vec<Atom>) -> Result<(), QueryError> {
    let wrong = || QueryError::WrongFamily {
        query: q.kind(),
        family: problem.family(),
    };
    match q {
        Query::All { queries } => {
            for sub in queries {
                collect_atoms(sub, problem, out)?;
            }
            Ok(())
        }
        Query::W1 { .. } | Query::W2 { .. } | Query::W3 { .. } | Query::W4 { .. } => {
            match problem {
                Problem::Wdp(p) => wdp_atoms(q, p, out),
                _ => Err(wrong()),
            }
        }
        _ => match problem {
            Problem::Rcpsp(p) => rcpsp_atoms(q, p, out),
            _ => Err(wrong()),
        },
    }
}

/// Encodes a query as constraints over the main model's variables. A single
/// constraint is named `q`, several are named `q[1]`, `q[2]`, ...
pub fn translate_query(q: &Query, problem: &Problem) -> Result<Vec<TaggedConstraint>, QueryError> {
    let mut atoms = Vec::new();
    collect_atoms(q, problem, &mut atoms)?;
    let n = atoms.len();
    Ok(atoms
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            let id = if n == 1 {
                "q".to_string()
            } else {
                format!("q[{}]", i + 1)
            };
            TaggedConstraint::new(id, a.expr, a.relation, a.rhs, a.tag)
        })
        .collect())
}

/// The main model plus a minimality constraint and the query constraints.
#[derive(Debug, Clone)]
pub struct AspProblem {
    pub model: MilpModel,
    pub f_star: f64,
    pub query_ids: Vec<String>,
}

fn format_value(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round())
    } else {
        format!("{v}")
    }
}

fn snap(v: f64) -> f64 {
    if (v - v.round()).abs() <= 1e-7 {
        v.round()
    } else {
        v
    }
}

/// Builds, in this order, the minimality constraint (`f(x) <= f*`, or `>=`
/// when maximizing), the main constraints and the query constraints.
pub fn build_asp(
    main: &MilpModel,
    f_star: f64,
    cq: Vec<TaggedConstraint>,
) -> Result<AspProblem, QueryError> {
    let f_star = snap(f_star);
    let mut model = MilpModel::new(main.sense);
    model.variables = main.variables.clone();
    let relation = match main.sense {
        Sense::Minimize => Relation::Le,
        Sense::Maximize => Relation::Ge,
    };
    let mut objective = main.objective.clone();
    let rhs = f_star - objective.constant;
    objective.constant = 0.0;
    model.add_constraint(TaggedConstraint::new(
        MINIMALITY_ID,
        objective,
        relation,
        rhs,
        ConstraintTag::new(ConstraintKind::Minimality).with("f", format_value(f_star)),
    ))?;
    for c in &main.constraints {
        model.add_constraint(c.clone())?;
    }
    let query_ids = cq.iter().map(|c| c.id.clone()).collect();
    for c in cq {
        model.add_constraint(c)?;
    }
    model.set_objective(main.objective.clone())?;
    Ok(AspProblem {
        model,
        f_star,
        query_ids,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeCase {
    Infeasibility,
    Optimality,
    Suboptimality,
    Unknown,
}

impl OutcomeCase {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeCase::Infeasibility => "infeasibility",
            OutcomeCase::Optimality => "optimality",
            OutcomeCase::Suboptimality => "suboptimality",
            OutcomeCase::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedOutcome {
    pub case: OutcomeCase,
    pub extended_objective: Option<f64>,
}

/// Solves the main problem with the query constraints added and compares its
/// optimum with `f*`.
pub fn classify_extended(
    main: &MilpModel,
    f_star: f64,
    cq: &[TaggedConstraint],
    time_limit: Option<Duration>,
) -> Result<ExtendedOutcome, QueryError> {
    let mut extended = main.clone();
    for c in cq {
        extended.add_constraint(c.clone())?;
    }
    let r = match solve_milp(&extended, time_limit) {
        Ok(r) => r,
        Err(_) => {
            return Ok(ExtendedOutcome {
                case: OutcomeCase::Unknown,
                extended_objective: None,
            })
        }
    };
    let case = match (r.status, r.objective) {
        (MilpStatus::Infeasible, _) => OutcomeCase::Infeasibility,
        (MilpStatus::Optimal, Some(v)) => {
            if (v - f_star).abs() <= OBJECTIVE_TOLERANCE * (1.0 + f_star.abs()) {
                OutcomeCase::Optimality
            } else {
                OutcomeCase::Suboptimality
            }
        }
        _ => OutcomeCase::Unknown,
    };
    Ok(ExtendedOutcome {
        case,
        extended_objective: r.objective,
    })
}

/// Answer for a query the optimal value can accommodate: another solution
/// with the same objective satisfies it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternateOptimumNotice {
    pub message: String,
    pub f_star: f64,
    pub objective: f64,
    /// Nonzero variables of the alternative solution, by name.
    pub witness: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Explanation {
    Reasons { graph: ReasonGraph, iis: Iis },
    AlternateOptimum { notice: AlternateOptimumNotice },
}

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Iis(#[from] IisError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("feasibility check timed out")]
    Timeout,
}

fn notice(asp: &AspProblem, witness: &Assignment) -> AlternateOptimumNotice {
    let objective = asp.model.objective.evaluate(witness).unwrap_or(asp.f_star);
    AlternateOptimumNotice {
        message: format!(
            "The requested alternative is also optimal: a solution with objective {} satisfies the query.",
            format_value(objective)
        ),
        f_star: asp.f_star,
        objective,
        witness: asp
            .model
            .variables
            .iter()
            .zip(witness.values())
            .filter(|(_, &v)| v.abs() > 1e-9)
            .map(|(var, &v)| (var.name.clone(), v))
            .collect(),
    }
}

/// Runs the pipeline on an assembled problem: an infeasible one yields an
/// IIS and its graph of reasons, a feasible one an alternate optimum.
pub fn explain_asp(
    asp: &AspProblem,
    algorithm: IisAlgorithm,
    time_limit: Option<Duration>,
) -> Result<Explanation, ExplainError> {
    match check_feasible(&asp.model, time_limit)? {
        Feasibility::Feasible(w) => Ok(Explanation::AlternateOptimum {
            notice: notice(asp, &w),
        }),
        Feasibility::Unknown => Err(ExplainError::Timeout),
        Feasibility::Infeasible => {
            let iis = extract_iis(&asp.model, algorithm, time_limit)?;
            let graph = to_reason_graph(&iis, &asp.model)?;
            Ok(Explanation::Reasons { graph, iis })
        }
    }
}

pub fn explain(
    problem: &Problem,
    f_star: f64,
    query: &Query,
    algorithm: IisAlgorithm,
    time_limit: Option<Duration>,
) -> Result<(AspProblem, Explanation), ExplainError> {
    let cq = translate_query(query, problem)?;
    let asp = build_asp(problem.model(), f_star, cq)?;
    let explanation = explain_asp(&asp, algorithm, time_limit)?;
    Ok((asp, explanation))
}
