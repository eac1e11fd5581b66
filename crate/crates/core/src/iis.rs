//! Irreducible infeasible subsystems.
//!
//! Every algorithm treats the constraints of the model uniformly; variable
//! bounds and integrality are always part of the system. Feasibility is
//! decided by [`check_feasible`] with a per-call time budget, and an
//! undecided call aborts the extraction.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Assignment, ConstraintKind, ConstraintTag, LinearExpr, MilpModel, Relation, Sense,
    TaggedConstraint, DEFAULT_TOLERANCE,
};
use crate::solver::{check_feasible, solve_milp, Feasibility, MilpStatus, SolveError};

/// Default cap for [`brute_force_smallest_iis`].
pub const BRUTE_FORCE_LIMIT: usize = 14;

#[derive(Debug, Error)]
pub enum IisError {
    #[error("the constraint system is feasible")]
    FeasibleInput,
    #[error("feasibility oracle timed out after {calls} calls")]
    OracleTimeout { calls: usize },
    #[error("{constraints} constraints exceed the brute-force limit of {max}")]
    TooLarge { constraints: usize, max: usize },
    #[error("seed subsystem is infeasible")]
    InfeasibleSeed,
    #[error("unknown constraint `{0}`")]
    UnknownConstraint(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IisAlgorithm {
    Deletion,
    Additive,
    Smallest,
    Brute,
}

impl IisAlgorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            IisAlgorithm::Deletion => "deletion",
            IisAlgorithm::Additive => "additive",
            IisAlgorithm::Smallest => "smallest",
            IisAlgorithm::Brute => "brute",
        }
    }
}

impl fmt::Display for IisAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IisAlgorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "deletion" => Ok(IisAlgorithm::Deletion),
            "additive" => Ok(IisAlgorithm::Additive),
            "smallest" => Ok(IisAlgorithm::Smallest),
            "brute" => Ok(IisAlgorithm::Brute),
            _ => Err(format!("unknown IIS algorithm `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IisStats {
    pub oracle_calls: usize,
    pub wall_time: Duration,
    /// Hitting-set rounds (smallest IIS only).
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iis {
    /// Member ids in the model's stored order.
    pub constraint_ids: Vec<String>,
    pub algorithm: IisAlgorithm,
    pub stats: IisStats,
}

impl Iis {
    pub fn len(&self) -> usize {
        self.constraint_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraint_ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.constraint_ids.iter().any(|c| c == id)
    }
}

/// Counts feasibility calls on index subsets of one model.
struct Oracle<'a> {
    model: &'a MilpModel,
    budget: Option<Duration>,
    calls: usize,
}

impl<'a> Oracle<'a> {
    fn new(model: &'a MilpModel, budget: Option<Duration>) -> Self {
        Oracle {
            model,
            budget,
            calls: 0,
        }
    }

    /// `Ok(None)` when infeasible, `Ok(Some(witness))` when feasible.
    fn check(&mut self, subset: &[usize]) -> Result<Option<Assignment>, IisError> {
        self.calls += 1;
        let sub = self.model.subsystem_by_index(subset);
        match check_feasible(&sub, self.budget)? {
            Feasibility::Feasible(w) => Ok(Some(w)),
            Feasibility::Infeasible => Ok(None),
            Feasibility::Unknown => Err(IisError::OracleTimeout { calls: self.calls }),
        }
    }

    fn satisfied_by(&self, index: usize, witness: &Assignment) -> bool {
        self.model.constraints[index]
            .satisfies(witness, DEFAULT_TOLERANCE)
            .unwrap_or(false)
    }

    fn finish(
        &self,
        mut members: Vec<usize>,
        algorithm: IisAlgorithm,
        start: Instant,
        rounds: usize,
    ) -> Iis {
        members.sort_unstable();
        Iis {
            constraint_ids: members
                .into_iter()
                .map(|i| self.model.constraints[i].id.clone())
                .collect(),
            algorithm,
            stats: IisStats {
                oracle_calls: self.calls,
                wall_time: start.elapsed(),
                rounds,
            },
        }
    }
}

fn all_indices(model: &MilpModel) -> Vec<usize> {
    (0..model.constraints.len()).collect()
}

fn require_infeasible(oracle: &mut Oracle, subset: &[usize]) -> Result<(), IisError> {
    match oracle.check(subset)? {
        Some(_) => Err(IisError::FeasibleInput),
        None => Ok(()),
    }
}

/// One pass in stored order: drop each constraint for good if the rest stays
/// infeasible. Uses exactly `1 + m` oracle calls.
pub fn deletion_filter(model: &MilpModel, budget: Option<Duration>) -> Result<Iis, IisError> {
    let start = Instant::now();
    let mut oracle = Oracle::new(model, budget);
    let mut keep = all_indices(model);
    require_infeasible(&mut oracle, &keep)?;
    for c in all_indices(model) {
        let trial: Vec<usize> = keep.iter().copied().filter(|&k| k != c).collect();
        if oracle.check(&trial)?.is_none() {
            keep = trial;
        }
    }
    debug!(
        "deletion filter: {} members, {} calls",
        keep.len(),
        oracle.calls
    );
    Ok(oracle.finish(keep, IisAlgorithm::Deletion, start, 0))
}

/// Grows a working set from the members found so far until it becomes
/// infeasible; the constraint that tipped it over is a member. Stops once
/// the members alone are infeasible. A constraint satisfied by the current
/// witness is added without an oracle call.
pub fn additive_method(model: &MilpModel, budget: Option<Duration>) -> Result<Iis, IisError> {
    let start = Instant::now();
    let mut oracle = Oracle::new(model, budget);
    require_infeasible(&mut oracle, &all_indices(model))?;
    let mut members: Vec<usize> = Vec::new();
    loop {
        let mut working = members.clone();
        let mut witness = match oracle.check(&working)? {
            Some(w) => w,
            None => break,
        };
        let mut tipped = None;
        for c in all_indices(model) {
            if members.contains(&c) {
                continue;
            }
            working.push(c);
            if oracle.satisfied_by(c, &witness) {
                continue;
            }
            match oracle.check(&working)? {
                Some(w) => witness = w,
                None => {
                    tipped = Some(c);
                    break;
                }
            }
        }
        match tipped {
            Some(c) => members.push(c),
            // The full set was infeasible a moment ago.
            None => return Err(IisError::FeasibleInput),
        }
    }
    debug!(
        "additive method: {} members, {} calls",
        members.len(),
        oracle.calls
    );
    Ok(oracle.finish(members, IisAlgorithm::Additive, start, 0))
}

fn grow(oracle: &mut Oracle, seed: &[usize], witness: Assignment) -> Result<Vec<usize>, IisError> {
    let mut set: Vec<usize> = seed.to_vec();
    let mut witness = witness;
    for c in 0..oracle.model.constraints.len() {
        if set.contains(&c) {
            continue;
        }
        if oracle.satisfied_by(c, &witness) {
            set.push(c);
            continue;
        }
        set.push(c);
        match oracle.check(&set)? {
            Some(w) => witness = w,
            None => {
                set.pop();
            }
        }
    }
    set.sort_unstable();
    Ok(set)
}

fn indices_of(model: &MilpModel, ids: &[String]) -> Result<Vec<usize>, IisError> {
    ids.iter()
        .map(|id| {
            model
                .constraint_index(id)
                .ok_or_else(|| IisError::UnknownConstraint(id.clone()))
        })
        .collect()
}

/// Extends a feasible seed to a maximal feasible subsystem, probing the
/// remaining constraints in stored order.
pub fn grow_mfs(
    model: &MilpModel,
    seed: &[String],
    budget: Option<Duration>,
) -> Result<Vec<String>, IisError> {
    let mut oracle = Oracle::new(model, budget);
    let seed = indices_of(model, seed)?;
    let witness = oracle.check(&seed)?.ok_or(IisError::InfeasibleSeed)?;
    let set = grow(&mut oracle, &seed, witness)?;
    Ok(set
        .into_iter()
        .map(|i| model.constraints[i].id.clone())
        .collect())
}

/// Minimum-cardinality set hitting every collected correction set, solved
/// exactly as a covering MILP.
fn min_hitting_set(
    universe: usize,
    sets: &[Vec<usize>],
    lower: usize,
    budget: Option<Duration>,
) -> Result<Vec<usize>, IisError> {
    if sets.is_empty() {
        return Ok(Vec::new());
    }
    let used: BTreeSet<usize> = sets.iter().flatten().copied().collect();
    let mut m = MilpModel::new(Sense::Minimize);
    let mut var_of = vec![None; universe];
    for &c in &used {
        var_of[c] = Some(
            m.add_binary(format!("y{c}"))
                .map_err(|e| IisError::Solve(e.into()))?,
        );
    }
    let cover_tag = || ConstraintTag::new(ConstraintKind::Generic);
    for (i, s) in sets.iter().enumerate() {
        let expr = LinearExpr::from_terms(s.iter().filter_map(|&c| var_of[c]).map(|v| (v, 1.0)));
        m.add_constraint(TaggedConstraint::new(
            format!("k{i}"),
            expr,
            Relation::Ge,
            1.0,
            cover_tag(),
        ))
        .map_err(|e| IisError::Solve(e.into()))?;
    }
    let total = LinearExpr::from_terms(used.iter().filter_map(|&c| var_of[c]).map(|v| (v, 1.0)));
    if lower > 0 {
        m.add_constraint(TaggedConstraint::new(
            "size",
            total.clone(),
            Relation::Ge,
            lower as f64,
            cover_tag(),
        ))
        .map_err(|e| IisError::Solve(e.into()))?;
    }
    m.set_objective(total)
        .map_err(|e| IisError::Solve(e.into()))?;
    let r = match solve_milp(&m, budget) {
        Ok(r) => r,
        Err(SolveError::TimeLimit { .. }) => return Err(IisError::OracleTimeout { calls: 0 }),
        Err(e) => return Err(e.into()),
    };
    if r.status != MilpStatus::Optimal {
        return Err(SolveError::NumericalInstability("hitting set has no optimum".into()).into());
    }
    let a = r.assignment.expect("optimal result has an assignment");
    Ok(used
        .into_iter()
        .filter(|&c| var_of[c].is_some_and(|v| a.0[v.0] > 0.5))
        .collect())
}

/// Minimum-cardinality IIS by implicit hitting sets over the complements of
/// maximal feasible subsystems.
pub fn smallest_iis(model: &MilpModel, budget: Option<Duration>) -> Result<Iis, IisError> {
    let start = Instant::now();
    let mut oracle = Oracle::new(model, budget);
    let all = all_indices(model);
    require_infeasible(&mut oracle, &all)?;
    let mut corrections: Vec<Vec<usize>> = Vec::new();
    let mut lower = 0;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let candidate = min_hitting_set(all.len(), &corrections, lower, budget)?;
        lower = candidate.len();
        match oracle.check(&candidate)? {
            None => {
                debug!(
                    "smallest IIS: size {} after {rounds} rounds, {} calls",
                    candidate.len(),
                    oracle.calls
                );
                return Ok(oracle.finish(candidate, IisAlgorithm::Smallest, start, rounds));
            }
            Some(w) => {
                let mfs = grow(&mut oracle, &candidate, w)?;
                let correction: Vec<usize> =
                    all.iter().copied().filter(|c| !mfs.contains(c)).collect();
                if correction.is_empty() {
                    return Err(IisError::FeasibleInput);
                }
                corrections.push(correction);
            }
        }
    }
}

/// Enumerates subsets by increasing size and returns the first infeasible
/// one, which is irreducible because every smaller subset was feasible.
pub fn brute_force_smallest_iis(
    model: &MilpModel,
    max_constraints: usize,
) -> Result<Iis, IisError> {
    let m = model.constraints.len();
    if m > max_constraints {
        return Err(IisError::TooLarge {
            constraints: m,
            max: max_constraints,
        });
    }
    let start = Instant::now();
    let mut oracle = Oracle::new(model, None);
    for k in 1..=m {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            if oracle.check(&combo)?.is_none() {
                return Ok(oracle.finish(combo, IisAlgorithm::Brute, start, 0));
            }
            // Next k-combination in lexicographic order.
            let mut i = k;
            while i > 0 && combo[i - 1] == m - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for j in i..k {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    Err(IisError::FeasibleInput)
}

pub fn extract_iis(
    model: &MilpModel,
    algorithm: IisAlgorithm,
    budget: Option<Duration>,
) -> Result<Iis, IisError> {
    match algorithm {
        IisAlgorithm::Deletion => deletion_filter(model, budget),
        IisAlgorithm::Additive => additive_method(model, budget),
        IisAlgorithm::Smallest => smallest_iis(model, budget),
        IisAlgorithm::Brute => brute_force_smallest_iis(model, BRUTE_FORCE_LIMIT),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for a in [
            IisAlgorithm::Deletion,
            IisAlgorithm::Additive,
            IisAlgorithm::Smallest,
            IisAlgorithm::Brute,
        ] {
            assert_eq!(a.as_str().parse::<IisAlgorithm>().unwrap(), a);
        }
        assert!("quick".parse::<IisAlgorithm>().is_err());
    }

    #[test]
    fn hitting_set_is_minimum() {
        let sets = vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![0, 3]];
        let h = min_hitting_set(4, &sets, 0, None).unwrap();
        assert_eq!(h.len(), 2);
        assert!(sets.iter().all(|s| s.iter().any(|c| h.contains(c))));
    }
}
