//! Activity-based bound propagation for integer variables.

use crate::model::{MilpModel, Relation};

const TOL: f64 = 1e-9;
const MAX_PASSES: usize = 50;

/// Sparse terms with lower and upper bound: `lo <= sum(a_i x_i) <= hi`.
type Row = (Vec<(usize, f64)>, f64, f64);

pub(crate) struct Rows {
    rows: Vec<Row>,
    integral: Vec<bool>,
    /// First row of the form `sum x = 1` over binaries containing each variable.
    partition: Vec<Option<usize>>,
}

impl Rows {
    pub(crate) fn new(model: &MilpModel) -> Self {
        let rows = model
            .constraints
            .iter()
            .map(|c| {
                let terms: Vec<(usize, f64)> =
                    c.expr.terms().iter().map(|&(v, a)| (v.0, a)).collect();
                let rhs = c.rhs - c.expr.constant;
                let (lo, hi) = match c.relation {
                    Relation::Le => (f64::NEG_INFINITY, rhs),
                    Relation::Ge => (rhs, f64::INFINITY),
                    Relation::Eq => (rhs, rhs),
                };
                (terms, lo, hi)
            })
            .collect::<Vec<_>>();
        let integral: Vec<bool> = model
            .variables
            .iter()
            .map(|v| v.integrality.is_integral())
            .collect();
        let mut partition = vec![None; model.variables.len()];
        for (r, (terms, lo, hi)) in rows.iter().enumerate() {
            let is_partition = *lo == 1.0
                && *hi == 1.0
                && terms.len() >= 2
                && terms.iter().all(|&(j, a)| {
                    a == 1.0
                        && integral[j]
                        && model.variables[j].lower >= 0.0
                        && model.variables[j].upper <= 1.0
                });
            if is_partition {
                for &(j, _) in terms {
                    partition[j].get_or_insert(r);
                }
            }
        }
        Rows {
            rows,
            integral,
            partition,
        }
    }

    /// Splits the partition row of `var` into two halves that both carry LP
    /// mass, balancing the mass. Branching then forbids one half per child.
    pub(crate) fn split_partition(
        &self,
        var: usize,
        values: &[f64],
    ) -> Option<(usize, Vec<usize>, Vec<usize>)> {
        let row = self.partition[var]?;
        let terms = &self.rows[row].0;
        let eps = 1e-9;
        let mut cum = 0.0;
        let mut split = None;
        let mut best = f64::INFINITY;
        for (s, &(j, _)) in terms.iter().enumerate().take(terms.len() - 1) {
            cum += values[j];
            if cum > eps && cum < 1.0 - eps && (cum - 0.5).abs() < best {
                best = (cum - 0.5).abs();
                split = Some(s + 1);
            }
        }
        let s = split?;
        Some((
            row,
            terms[..s].iter().map(|&(j, _)| j).collect(),
            terms[s..].iter().map(|&(j, _)| j).collect(),
        ))
    }

    /// Tightens integer bounds in place until a fixpoint (or a pass limit).
    /// Returns `false` when some row can no longer be satisfied.
    pub(crate) fn propagate(&self, lower: &mut [f64], upper: &mut [f64]) -> bool {
        for _ in 0..MAX_PASSES {
            let mut changed = false;
            for (terms, lo, hi) in &self.rows {
                let mut min_act = 0.0;
                let mut max_act = 0.0;
                let mut min_inf = 0usize;
                let mut max_inf = 0usize;
                for &(j, a) in terms {
                    let (l, u) = (lower[j], upper[j]);
                    let (lo_c, hi_c) = if a > 0.0 {
                        (a * l, a * u)
                    } else {
                        (a * u, a * l)
                    };
                    if lo_c.is_finite() {
                        min_act += lo_c;
                    } else {
                        min_inf += 1;
                    }
                    if hi_c.is_finite() {
                        max_act += hi_c;
                    } else {
                        max_inf += 1;
                    }
                }
                let scale = 1.0 + hi.abs().min(lo.abs()).min(1e6);
                if min_inf == 0 && min_act > hi + TOL * scale {
                    return false;
                }
                if max_inf == 0 && max_act < lo - TOL * scale {
                    return false;
                }
                for &(j, a) in terms {
                    if !self.integral[j] {
                        continue;
                    }
                    let (l, u) = (lower[j], upper[j]);
                    let (lo_c, hi_c) = if a > 0.0 {
                        (a * l, a * u)
                    } else {
                        (a * u, a * l)
                    };
                    // Activity of the other terms.
                    let rest_min = (min_inf == 0).then_some(min_act - lo_c);
                    let rest_max = (max_inf == 0).then_some(max_act - hi_c);
                    let mut new_l = l;
                    let mut new_u = u;
                    if let (Some(rest), true) = (rest_min, hi.is_finite()) {
                        let bound = (hi - rest) / a;
                        if a > 0.0 {
                            new_u = new_u.min((bound + 1e-6).floor());
                        } else {
                            new_l = new_l.max((bound - 1e-6).ceil());
                        }
                    }
                    if let (Some(rest), true) = (rest_max, lo.is_finite()) {
                        let bound = (lo - rest) / a;
                        if a > 0.0 {
                            new_l = new_l.max((bound - 1e-6).ceil());
                        } else {
                            new_u = new_u.min((bound + 1e-6).floor());
                        }
                    }
                    if new_l > new_u {
                        return false;
                    }
                    if new_l > l || new_u < u {
                        lower[j] = new_l;
                        upper[j] = new_u;
                        changed = true;
                        // Keep the row activity consistent for later terms.
                        let (nlo, nhi) = if a > 0.0 {
                            (a * new_l, a * new_u)
                        } else {
                            (a * new_u, a * new_l)
                        };
                        if lo_c.is_finite() {
                            min_act += nlo - lo_c;
                        } else if nlo.is_finite() {
                            min_inf -= 1;
                            min_act += nlo;
                        }
                        if hi_c.is_finite() {
                            max_act += nhi - hi_c;
                        } else if nhi.is_finite() {
                            max_inf -= 1;
                            max_act += nhi;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstraintKind, ConstraintTag, LinearExpr, Sense, TaggedConstraint};

    #[test]
    fn fixes_partition_members() {
        let mut m = MilpModel::new(Sense::Minimize);
        let v: Vec<_> = (0..3)
            .map(|i| m.add_binary(format!("x{i}")).unwrap())
            .collect();
        m.add_constraint(TaggedConstraint::new(
            "one",
            LinearExpr::from_terms(v.iter().map(|&x| (x, 1.0))),
            Relation::Eq,
            1.0,
            ConstraintTag::new(ConstraintKind::Generic),
        ))
        .unwrap();
        let rows = Rows::new(&m);
        let mut lo = vec![1.0, 0.0, 0.0];
        let mut hi = vec![1.0, 1.0, 1.0];
        assert!(rows.propagate(&mut lo, &mut hi));
        assert_eq!(hi, vec![1.0, 0.0, 0.0]);
        let mut lo = vec![0.0; 3];
        let mut hi = vec![0.0; 3];
        assert!(!rows.propagate(&mut lo, &mut hi));
    }
}
