//! Independent checks used by tests, the acceptance runner and
//! `exmip verify-iis`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{Assignment, MilpModel, Sense, DEFAULT_TOLERANCE};
use crate::solver::{check_feasible, Feasibility, SolveError};

/// Largest search space [`enumerate`] will walk.
pub const MAX_ENUMERATION: u64 = 1 << 22;

#[derive(Debug, Clone, PartialEq)]
pub enum Enumeration {
    Optimal {
        assignment: Assignment,
        objective: f64,
    },
    Infeasible,
}

/// Exhaustive search over every integer point of a pure-integer model.
///
/// Returns `None` when the model has continuous variables or the search
/// space exceeds [`MAX_ENUMERATION`]. Ties keep the lexicographically first
/// point in odometer order.
pub fn enumerate(model: &MilpModel) -> Option<Enumeration> {
    let mut domains = Vec::with_capacity(model.variables.len());
    let mut size: u64 = 1;
    for v in &model.variables {
        if !v.integrality.is_integral() {
            return None;
        }
        let lo = v.lower.ceil() as i64;
        let hi = v.upper.floor() as i64;
        if hi < lo {
            return Some(Enumeration::Infeasible);
        }
        size = size.checked_mul((hi - lo + 1) as u64)?;
        if size > MAX_ENUMERATION {
            return None;
        }
        domains.push((lo, hi));
    }

    let mut point: Vec<i64> = domains.iter().map(|&(lo, _)| lo).collect();
    let mut best: Option<(Assignment, f64)> = None;
    loop {
        let a = Assignment(point.iter().map(|&x| x as f64).collect());
        if model
            .constraints
            .iter()
            .all(|c| c.satisfies(&a, DEFAULT_TOLERANCE).unwrap_or(false))
        {
            let value = model.objective.evaluate(&a).ok()?;
            let better = match (&best, model.sense) {
                (None, _) => true,
                (Some((_, b)), Sense::Minimize) => value < *b - 1e-9,
                (Some((_, b)), Sense::Maximize) => value > *b + 1e-9,
            };
            if better {
                best = Some((a, value));
            }
        }
        // Odometer increment.
        let mut k = 0;
        loop {
            if k == point.len() {
                return Some(match best {
                    Some((assignment, objective)) => Enumeration::Optimal {
                        assignment,
                        objective,
                    },
                    None => Enumeration::Infeasible,
                });
            }
            if point[k] < domains[k].1 {
                point[k] += 1;
                break;
            }
            point[k] = domains[k].0;
            k += 1;
        }
    }
}

/// Outcome of checking a candidate IIS against its defining properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IisAudit {
    pub size: usize,
    pub infeasible: bool,
    /// Members whose removal leaves the subsystem infeasible (must be empty).
    pub redundant: Vec<String>,
    pub unknown: Vec<String>,
}

impl IisAudit {
    pub fn is_valid(&self) -> bool {
        self.size > 0 && self.infeasible && self.redundant.is_empty() && self.unknown.is_empty()
    }
}

/// Leave-one-out audit: the set must be infeasible and every proper subset
/// obtained by dropping one member must be feasible.
pub fn audit_iis(
    model: &MilpModel,
    ids: &[String],
    time_limit: Option<Duration>,
) -> Result<IisAudit, SolveError> {
    let sub = model.subsystem(ids.iter().map(String::as_str))?;
    let whole = check_feasible(&sub, time_limit)?;
    let mut audit = IisAudit {
        size: ids.len(),
        infeasible: whole == Feasibility::Infeasible,
        redundant: Vec::new(),
        unknown: Vec::new(),
    };
    if whole == Feasibility::Unknown {
        audit.unknown.push("<whole set>".into());
    }
    for drop in ids {
        let rest = model.subsystem(ids.iter().filter(|i| *i != drop).map(String::as_str))?;
        match check_feasible(&rest, time_limit)? {
            Feasibility::Feasible(_) => {}
            Feasibility::Infeasible => audit.redundant.push(drop.clone()),
            Feasibility::Unknown => audit.unknown.push(drop.clone()),
        }
    }
    Ok(audit)
}

/// Random pure-binary MILP with small integer coefficients, used as an
/// enumeration-checkable fixture.
pub fn random_binary_milp(seed: u64, max_vars: usize, max_cons: usize) -> MilpModel {
    use crate::model::{
        ConstraintKind, ConstraintTag, LinearExpr, Relation, TaggedConstraint, VarId,
    };
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(0..=max_cons);
    let sense = if rng.gen_bool(0.5) {
        Sense::Minimize
    } else {
        Sense::Maximize
    };
    let mut model = MilpModel::new(sense);
    for j in 0..n {
        model.add_binary(format!("x{j}")).expect("fresh name");
    }
    for i in 0..m {
        let mut expr = LinearExpr::new();
        let mut pos = 0.0;
        let mut neg = 0.0;
        for j in 0..n {
            if rng.gen_bool(0.5) {
                let c = rng.gen_range(-5i32..=5) as f64;
                expr.add_term(VarId(j), c);
                if c > 0.0 {
                    pos += c;
                } else {
                    neg += c;
                }
            }
        }
        let relation = match rng.gen_range(0..10) {
            0 => Relation::Eq,
            1..=5 => Relation::Le,
            _ => Relation::Ge,
        };
        let rhs = rng.gen_range((neg as i32 - 1)..=(pos as i32 + 1)) as f64;
        model
            .add_constraint(TaggedConstraint::new(
                format!("r{i}"),
                expr,
                relation,
                rhs,
                ConstraintTag::new(ConstraintKind::Generic),
            ))
            .expect("valid constraint");
    }
    let objective =
        LinearExpr::from_terms((0..n).map(|j| (VarId(j), rng.gen_range(-10i32..=10) as f64)));
    model.set_objective(objective).expect("valid objective");
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstraintKind, ConstraintTag, LinearExpr, Relation, TaggedConstraint};

    #[test]
    fn enumerates_wdp_toy() {
        let mut m = MilpModel::new(Sense::Maximize);
        let a = m.add_binary("a").unwrap();
        let b = m.add_binary("b").unwrap();
        let c = m.add_binary("c").unwrap();
        for (id, vars) in [("g0", [a, c]), ("g1", [b, c])] {
            m.add_constraint(TaggedConstraint::new(
                id,
                LinearExpr::from_terms(vars.map(|v| (v, 1.0))),
                Relation::Le,
                1.0,
                ConstraintTag::new(ConstraintKind::GoodAllocation),
            ))
            .unwrap();
        }
        m.set_objective(LinearExpr::from_terms([(a, 5.0), (b, 4.0), (c, 8.0)]))
            .unwrap();
        match enumerate(&m).unwrap() {
            Enumeration::Optimal {
                assignment,
                objective,
            } => {
                assert_eq!(objective, 9.0);
                assert_eq!(assignment.0, vec![1.0, 1.0, 0.0]);
            }
            other => panic!("{other:?}"),
        }
    }
}
