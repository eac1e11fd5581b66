//! Time-indexed RCPSP: binary `x[j,t]` is one when activity `j` completes at
//! time `t`. An activity completing at `t` with duration `d` occupies the
//! periods `t-d+1 ..= t` and starts at time `t-d`.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Assignment, ConstraintKind, ConstraintTag, LinearExpr, MilpModel, ModelError, Relation, Sense,
    TaggedConstraint, VarId,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RcpspError {
    #[error("precedence graph contains a cycle through activity {0}")]
    Cycle(u32),
    #[error("unknown activity {0}")]
    UnknownActivity(u32),
    #[error("duplicate activity id {0}")]
    DuplicateActivity(u32),
    #[error("activity {id} uses {got} resources, instance has {expected}")]
    ResourceArity {
        id: u32,
        got: usize,
        expected: usize,
    },
    #[error("activity {id} cannot be scheduled: earliest finish {ef} > latest finish {lf}")]
    UnschedulableActivity { id: u32, ef: u32, lf: u32 },
    #[error("instance has no activities")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activity {
    pub id: u32,
    pub duration: u32,
    pub usage: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RcpspInstance {
    pub activities: Vec<Activity>,
    /// `(predecessor, successor)` pairs of activity ids.
    pub precedence: Vec<(u32, u32)>,
    pub capacities: Vec<u32>,
    pub horizon: u32,
}

impl RcpspInstance {
    /// Builds an instance from real activities `1..=n`, adding a dummy
    /// source `0` and sink `n+1`. The horizon defaults to the sum of
    /// durations.
    pub fn with_dummies(
        durations: &[u32],
        usage: &[Vec<u32>],
        precedence: &[(u32, u32)],
        capacities: &[u32],
    ) -> Self {
        let n = durations.len() as u32;
        let resources = capacities.len();
        let mut activities = vec![Activity {
            id: 0,
            duration: 0,
            usage: vec![0; resources],
        }];
        for (i, &d) in durations.iter().enumerate() {
            activities.push(Activity {
                id: i as u32 + 1,
                duration: d,
                usage: usage.get(i).cloned().unwrap_or_else(|| vec![0; resources]),
            });
        }
        activities.push(Activity {
            id: n + 1,
            duration: 0,
            usage: vec![0; resources],
        });
        let mut edges: Vec<(u32, u32)> = precedence.to_vec();
        let has_pred: BTreeSet<u32> = precedence.iter().map(|&(_, s)| s).collect();
        let has_succ: BTreeSet<u32> = precedence.iter().map(|&(p, _)| p).collect();
        for j in 1..=n {
            if !has_pred.contains(&j) {
                edges.push((0, j));
            }
            if !has_succ.contains(&j) {
                edges.push((j, n + 1));
            }
        }
        if n == 0 {
            edges.push((0, 1));
        }
        edges.sort_unstable();
        RcpspInstance {
            activities,
            precedence: edges,
            capacities: capacities.to_vec(),
            horizon: durations.iter().sum(),
        }
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.activities.iter().position(|a| a.id == id)
    }

    /// First activity in stored order (the dummy source by convention).
    pub fn source(&self) -> Option<u32> {
        self.activities.first().map(|a| a.id)
    }

    /// Last activity in stored order (the dummy sink by convention).
    pub fn sink(&self) -> Option<u32> {
        self.activities.last().map(|a| a.id)
    }

    pub fn is_dummy(&self, id: u32) -> bool {
        self.activities.len() > 1 && (Some(id) == self.source() || Some(id) == self.sink())
    }

    pub fn predecessors(&self, id: u32) -> Vec<u32> {
        self.precedence
            .iter()
            .filter(|&&(_, s)| s == id)
            .map(|&(p, _)| p)
            .collect()
    }

    pub fn validate(&self) -> Result<(), RcpspError> {
        if self.activities.is_empty() {
            return Err(RcpspError::Empty);
        }
        let mut seen = BTreeSet::new();
        for a in &self.activities {
            if !seen.insert(a.id) {
                return Err(RcpspError::DuplicateActivity(a.id));
            }
            if a.usage.len() != self.capacities.len() {
                return Err(RcpspError::ResourceArity {
                    id: a.id,
                    got: a.usage.len(),
                    expected: self.capacities.len(),
                });
            }
        }
        for &(p, s) in &self.precedence {
            for id in [p, s] {
                if !seen.contains(&id) {
                    return Err(RcpspError::UnknownActivity(id));
                }
            }
        }
        topological_order(self).map(|_| ())
    }
}

fn topological_order(inst: &RcpspInstance) -> Result<Vec<usize>, RcpspError> {
    let n = inst.activities.len();
    let index: HashMap<u32, usize> = inst
        .activities
        .iter()
        .enumerate()
        .map(|(i, a)| (a.id, i))
        .collect();
    let mut indegree = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for &(p, s) in &inst.precedence {
        let pi = *index.get(&p).ok_or(RcpspError::UnknownActivity(p))?;
        let si = *index.get(&s).ok_or(RcpspError::UnknownActivity(s))?;
        succ[pi].push(si);
        indegree[si] += 1;
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &s in &succ[i] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                queue.push_back(s);
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap_or(0);
        return Err(RcpspError::Cycle(inst.activities[stuck].id));
    }
    Ok(order)
}

/// Earliest and latest finish time per activity, indexed like
/// [`RcpspInstance::activities`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindows {
    pub ef: Vec<u32>,
    pub lf: Vec<u32>,
}

/// Forward/backward critical-path passes (resources ignored).
pub fn compute_time_windows(inst: &RcpspInstance) -> Result<TimeWindows, RcpspError> {
    let order = topological_order(inst)?;
    let n = inst.activities.len();
    let index: HashMap<u32, usize> = inst
        .activities
        .iter()
        .enumerate()
        .map(|(i, a)| (a.id, i))
        .collect();
    let mut preds = vec![Vec::new(); n];
    let mut succs = vec![Vec::new(); n];
    for &(p, s) in &inst.precedence {
        preds[index[&s]].push(index[&p]);
        succs[index[&p]].push(index[&s]);
    }
    let mut ef = vec![0u32; n];
    for &j in &order {
        let start = preds[j].iter().map(|&h| ef[h]).max().unwrap_or(0);
        ef[j] = start + inst.activities[j].duration;
    }
    let mut lf = vec![inst.horizon; n];
    for &j in order.iter().rev() {
        lf[j] = succs[j]
            .iter()
            .map(|&s| lf[s].saturating_sub(inst.activities[s].duration))
            .min()
            .unwrap_or(inst.horizon);
    }
    Ok(TimeWindows { ef, lf })
}

/// A built RCPSP model plus the bookkeeping needed to address `x[j,t]`.
#[derive(Debug, Clone)]
pub struct RcpspModel {
    pub instance: RcpspInstance,
    pub windows: TimeWindows,
    pub model: MilpModel,
    /// `vars[i][k]` is `x[j, ef_j + k]` for the activity at index `i`.
    pub vars: Vec<Vec<VarId>>,
}

pub fn var_name(activity: u32, time: u32) -> String {
    format!("x_{activity}_{time}")
}

/// Builds the time-indexed model: one Completion constraint per activity,
/// one Precedence constraint per edge and one Resource constraint per
/// `(resource, period)`. Constraints that every assignment satisfying the
/// completion constraints within the time windows already meets are not
/// emitted.
pub fn build_rcpsp_milp(inst: &RcpspInstance, tw: &TimeWindows) -> Result<RcpspModel, RcpspError> {
    inst.validate()?;
    for (i, a) in inst.activities.iter().enumerate() {
        if tw.ef[i] > tw.lf[i] {
            return Err(RcpspError::UnschedulableActivity {
                id: a.id,
                ef: tw.ef[i],
                lf: tw.lf[i],
            });
        }
    }

    let mut model = MilpModel::new(Sense::Minimize);
    let mut vars = Vec::with_capacity(inst.activities.len());
    for (i, a) in inst.activities.iter().enumerate() {
        let row = (tw.ef[i]..=tw.lf[i])
            .map(|t| model.add_binary(var_name(a.id, t)))
            .collect::<Result<Vec<_>, _>>()?;
        vars.push(row);
    }
    let window = |i: usize| (tw.ef[i]..=tw.lf[i]).zip(vars[i].iter().copied());

    for (i, a) in inst.activities.iter().enumerate() {
        let expr = LinearExpr::from_terms(window(i).map(|(_, v)| (v, 1.0)));
        model.add_constraint(TaggedConstraint::new(
            format!("comp[{}]", a.id),
            expr,
            Relation::Eq,
            1.0,
            ConstraintTag::new(ConstraintKind::Completion).with("j", a.id),
        ))?;
    }

    for &(h, j) in &inst.precedence {
        let hi = inst.index_of(h).ok_or(RcpspError::UnknownActivity(h))?;
        let ji = inst.index_of(j).ok_or(RcpspError::UnknownActivity(j))?;
        let dj = inst.activities[ji].duration;
        if tw.lf[hi] + dj <= tw.ef[ji] {
            continue;
        }
        // completion(j) - completion(h) >= duration(j)
        let mut expr = LinearExpr::new();
        for (t, v) in window(ji) {
            expr.add_term(v, t as f64);
        }
        for (t, v) in window(hi) {
            expr.add_term(v, -(t as f64));
        }
        model.add_constraint(TaggedConstraint::new(
            format!("prec[{h},{j}]"),
            expr,
            Relation::Ge,
            dj as f64,
            ConstraintTag::new(ConstraintKind::Precedence)
                .with("j", j)
                .with("h", h),
        ))?;
    }

    for (r, &cap) in inst.capacities.iter().enumerate() {
        for t in 1..=inst.horizon {
            let mut expr = LinearExpr::new();
            let mut acts = Vec::new();
            let mut peak = 0u64;
            for (i, a) in inst.activities.iter().enumerate() {
                let u = a.usage[r];
                if u == 0 || a.duration == 0 {
                    continue;
                }
                // In progress during period t iff completion in [t, t+d-1].
                let mut any = false;
                for (tau, v) in window(i) {
                    if tau >= t && tau < t + a.duration {
                        expr.add_term(v, u as f64);
                        any = true;
                    }
                }
                if any {
                    acts.push(a.id);
                    peak += u as u64;
                }
            }
            if peak <= cap as u64 {
                continue;
            }
            model.add_constraint(TaggedConstraint::new(
                format!("res[{},{t}]", r + 1),
                expr,
                Relation::Le,
                cap as f64,
                ConstraintTag::new(ConstraintKind::Resource)
                    .with("r", r + 1)
                    .with("t", t)
                    .with_list("acts", &acts),
            ))?;
        }
    }

    let sink = inst.activities.len() - 1;
    let objective = LinearExpr::from_terms(window(sink).map(|(t, v)| (v, t as f64)));
    model.set_objective(objective)?;

    Ok(RcpspModel {
        instance: inst.clone(),
        windows: tw.clone(),
        model,
        vars,
    })
}

/// One row of a solved schedule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub activity: u32,
    pub start: u32,
    pub completion: u32,
    pub predecessors: Vec<u32>,
    pub resources: Vec<u32>,
}

impl RcpspModel {
    pub fn var(&self, activity: u32, time: u32) -> Option<VarId> {
        let i = self.instance.index_of(activity)?;
        if time < self.windows.ef[i] || time > self.windows.lf[i] {
            return None;
        }
        self.vars[i]
            .get((time - self.windows.ef[i]) as usize)
            .copied()
    }

    pub fn window(&self, activity: u32) -> Option<(u32, u32)> {
        let i = self.instance.index_of(activity)?;
        Some((self.windows.ef[i], self.windows.lf[i]))
    }

    /// Completion time of every activity, or `None` if some activity does
    /// not have exactly one completion variable set.
    pub fn decode(&self, assignment: &Assignment) -> Option<Vec<u32>> {
        self.vars
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let ones: Vec<u32> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| assignment.get(**v).is_some_and(|x| x > 0.5))
                    .map(|(k, _)| self.windows.ef[i] + k as u32)
                    .collect();
                (ones.len() == 1).then(|| ones[0])
            })
            .collect()
    }

    pub fn schedule_table(&self, assignment: &Assignment) -> Option<Vec<ScheduleRow>> {
        let completion = self.decode(assignment)?;
        Some(
            self.instance
                .activities
                .iter()
                .zip(completion)
                .map(|(a, c)| ScheduleRow {
                    activity: a.id,
                    start: c - a.duration,
                    completion: c,
                    predecessors: self.instance.predecessors(a.id),
                    resources: a.usage.clone(),
                })
                .collect(),
        )
    }
}

/// Checks a completion-time vector against precedence and capacities by
/// direct simulation, independently of the MILP encoding.
pub fn check_schedule(inst: &RcpspInstance, completion: &[u32]) -> Result<(), String> {
    if completion.len() != inst.activities.len() {
        return Err("wrong number of completion times".into());
    }
    for (a, &c) in inst.activities.iter().zip(completion) {
        if c < a.duration {
            return Err(format!("activity {} completes before it can start", a.id));
        }
    }
    for &(h, j) in &inst.precedence {
        let hi = inst.index_of(h).ok_or("unknown activity")?;
        let ji = inst.index_of(j).ok_or("unknown activity")?;
        let start_j = completion[ji] - inst.activities[ji].duration;
        if start_j < completion[hi] {
            return Err(format!(
                "activity {j} starts at {start_j} before {h} completes"
            ));
        }
    }
    let end = completion.iter().copied().max().unwrap_or(0);
    for (r, &cap) in inst.capacities.iter().enumerate() {
        for period in 1..=end {
            let used: u32 = inst
                .activities
                .iter()
                .zip(completion)
                .filter(|(a, &c)| a.duration > 0 && period + a.duration > c && period <= c)
                .map(|(a, _)| a.usage[r])
                .sum();
            if used > cap {
                return Err(format!(
                    "resource {} over capacity in period {period}",
                    r + 1
                ));
            }
        }
    }
    Ok(())
}

/// Serial schedule generation: activities in topological order (lowest
/// index first among ready ones), each at its earliest precedence- and
/// resource-feasible start. Returns completion times; the last entry's value
/// is a valid makespan upper bound.
pub fn serial_schedule(inst: &RcpspInstance) -> Result<Vec<u32>, RcpspError> {
    inst.validate()?;
    let n = inst.activities.len();
    let order = topological_order(inst)?;
    let mut completion = vec![0u32; n];
    let mut usage: Vec<Vec<u32>> = vec![Vec::new(); inst.capacities.len()];
    for &j in &order {
        let a = &inst.activities[j];
        let preds: Vec<usize> = inst
            .precedence
            .iter()
            .filter(|&&(_, s)| s == a.id)
            .filter_map(|&(p, _)| inst.index_of(p))
            .collect();
        let mut start = preds.iter().map(|&h| completion[h]).max().unwrap_or(0);
        loop {
            let fits = (0..inst.capacities.len()).all(|r| {
                (start + 1..=start + a.duration).all(|p| {
                    let used = usage[r].get(p as usize).copied().unwrap_or(0);
                    used + a.usage[r] <= inst.capacities[r]
                })
            });
            if fits || a.usage.iter().zip(&inst.capacities).any(|(u, c)| u > c) {
                break;
            }
            start += 1;
        }
        for (row, &u) in usage.iter_mut().zip(&a.usage) {
            for p in start + 1..=start + a.duration {
                let p = p as usize;
                if row.len() <= p {
                    row.resize(p + 1, 0);
                }
                row[p] += u;
            }
        }
        completion[j] = start + a.duration;
    }
    Ok(completion)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> RcpspInstance {
        RcpspInstance::with_dummies(
            &[2, 3, 1],
            &[vec![1], vec![1], vec![1]],
            &[(1, 2), (2, 3)],
            &[10],
        )
    }

    #[test]
    fn chain_windows_are_tight() {
        let inst = chain();
        assert_eq!(inst.horizon, 6);
        let tw = compute_time_windows(&inst).unwrap();
        assert_eq!(&tw.ef[1..4], &[2, 5, 6]);
        assert_eq!(&tw.lf[1..4], &[2, 5, 6]);
    }

    #[test]
    fn independent_windows() {
        let inst = RcpspInstance::with_dummies(&[2, 2], &[vec![0], vec![0]], &[], &[1]);
        let tw = compute_time_windows(&inst).unwrap();
        assert_eq!(&tw.ef[1..3], &[2, 2]);
        assert_eq!(&tw.lf[1..3], &[4, 4]);
    }

    #[test]
    fn cycle_detected() {
        let mut inst = chain();
        inst.precedence.push((3, 1));
        assert!(matches!(
            compute_time_windows(&inst),
            Err(RcpspError::Cycle(_))
        ));
    }

    #[test]
    fn variable_count_matches_windows() {
        let inst =
            RcpspInstance::with_dummies(&[2, 2, 1], &[vec![1], vec![1], vec![1]], &[(1, 3)], &[1]);
        let tw = compute_time_windows(&inst).unwrap();
        let built = build_rcpsp_milp(&inst, &tw).unwrap();
        let expected: u32 = tw.ef.iter().zip(&tw.lf).map(|(e, l)| l - e + 1).sum();
        assert_eq!(built.model.num_vars(), expected as usize);
    }

    #[test]
    fn empty_window_is_reported() {
        let mut inst = chain();
        inst.horizon = 5;
        let tw = compute_time_windows(&inst).unwrap();
        assert!(matches!(
            build_rcpsp_milp(&inst, &tw),
            Err(RcpspError::UnschedulableActivity { .. })
        ));
    }

    #[test]
    fn tags_and_ids() {
        let inst = RcpspInstance::with_dummies(&[2, 2], &[vec![1], vec![1]], &[], &[1]);
        let tw = compute_time_windows(&inst).unwrap();
        let built = build_rcpsp_milp(&inst, &tw).unwrap();
        let m = &built.model;
        assert_eq!(
            m.constraint("comp[1]").unwrap().tag.kind,
            ConstraintKind::Completion
        );
        let res = m
            .constraints
            .iter()
            .find(|c| c.tag.kind == ConstraintKind::Resource)
            .unwrap();
        assert_eq!(res.tag.list("acts"), vec!["1", "2"]);
        assert!(m.constraint("prec[1,3]").is_some());
        // A tight chain leaves every precedence implied by the windows.
        let inst = chain();
        let built = build_rcpsp_milp(&inst, &compute_time_windows(&inst).unwrap()).unwrap();
        assert!(built
            .model
            .constraints
            .iter()
            .all(|c| c.tag.kind != ConstraintKind::Precedence));
    }

    #[test]
    fn serial_schedule_is_feasible() {
        let inst =
            RcpspInstance::with_dummies(&[2, 2, 3], &[vec![1], vec![1], vec![1]], &[(1, 3)], &[1]);
        let c = serial_schedule(&inst).unwrap();
        check_schedule(&inst, &c).unwrap();
        assert_eq!(*c.last().unwrap(), 7);
    }
}
