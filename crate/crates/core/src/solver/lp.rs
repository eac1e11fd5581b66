//! Dense two-phase primal simplex with bounded variables.
//!
//! Every column carries its own `[lower, upper]` interval, so branching only
//! touches bounds and never adds rows. Nonbasic columns sit at a finite bound
//! (or at zero when free). Phase one minimises the sum of artificial columns
//! introduced for rows whose slack cannot start basic; afterwards the
//! artificials are fixed to zero and phase two optimises the real objective.
//!
//! Pricing is Dantzig's rule, switching to Bland's rule after a run of
//! degenerate pivots.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::SolveError;
use crate::model::{Assignment, MilpModel, Relation, Sense, DEFAULT_TOLERANCE};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    pub assignment: Option<Assignment>,
    pub objective: Option<f64>,
    pub iterations: usize,
}

impl LpResult {
    fn without_solution(status: LpStatus, iterations: usize) -> Self {
        Self {
            status,
            assignment: None,
            objective: None,
            iterations,
        }
    }
}

/// Solves the LP relaxation of `model` (integrality ignored).
pub fn solve_lp(model: &MilpModel) -> Result<LpResult, SolveError> {
    let lower: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    solve_lp_with_bounds(model, &lower, &upper, None)
}

/// Solves the LP relaxation with variable bounds overridden by
/// `lower`/`upper`. The returned objective is in the model's own sense.
pub fn solve_lp_with_bounds(
    model: &MilpModel,
    lower: &[f64],
    upper: &[f64],
    deadline: Option<Instant>,
) -> Result<LpResult, SolveError> {
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Ok(LpResult::without_solution(LpStatus::Infeasible, 0));
    }
    let first = Simplex::new(model, lower, upper, false).run(deadline)?;
    if accept(model, &first) {
        return Ok(first);
    }
    // Rebuild from scratch with Bland's rule throughout before giving up.
    let retry = Simplex::new(model, lower, upper, true).run(deadline)?;
    if accept(model, &retry) {
        return Ok(retry);
    }
    Err(SolveError::NumericalInstability(
        "simplex solution violates constraints after refactorization retry".into(),
    ))
}

fn accept(model: &MilpModel, result: &LpResult) -> bool {
    match &result.assignment {
        Some(a) => model
            .constraints
            .iter()
            .all(|c| c.satisfies(a, DEFAULT_TOLERANCE).unwrap_or(false)),
        None => true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ColState {
    Basic,
    AtLower,
    AtUpper,
    /// Free nonbasic column resting at zero.
    Free,
}

struct Simplex {
    rows: usize,
    cols: usize,
    structural: usize,
    /// Row-major `rows × cols` tableau `B⁻¹A`.
    tab: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<ColState>,
    lo: Vec<f64>,
    up: Vec<f64>,
    /// Current value of each nonbasic column.
    x: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    artificial_start: usize,
    phase_two_cost: Vec<(usize, f64)>,
    bland: bool,
    iterations: usize,
    rhs_scale: f64,
}

enum Step {
    Optimal,
    Unbounded,
    Continue,
}

impl Simplex {
    fn new(model: &MilpModel, lower: &[f64], upper: &[f64], bland: bool) -> Self {
        let n = model.variables.len();
        let m = model.constraints.len();
        let slack_rows: Vec<usize> = (0..m)
            .filter(|&i| model.constraints[i].relation != Relation::Eq)
            .collect();
        let n_slack = slack_rows.len();

        let mut lo: Vec<f64> = lower.to_vec();
        let mut up: Vec<f64> = upper.to_vec();
        let mut x = vec![0.0; n];
        let mut state = Vec::with_capacity(n);
        for j in 0..n {
            let (value, st) = if lo[j].is_finite() {
                (lo[j], ColState::AtLower)
            } else if up[j].is_finite() {
                (up[j], ColState::AtUpper)
            } else {
                (0.0, ColState::Free)
            };
            x[j] = value;
            state.push(st);
        }

        let mut slack_col = vec![usize::MAX; m];
        for (k, &i) in slack_rows.iter().enumerate() {
            slack_col[i] = n + k;
            match model.constraints[i].relation {
                Relation::Le => {
                    lo.push(0.0);
                    up.push(f64::INFINITY);
                    state.push(ColState::AtLower);
                }
                _ => {
                    lo.push(f64::NEG_INFINITY);
                    up.push(0.0);
                    state.push(ColState::AtUpper);
                }
            }
            x.push(0.0);
        }

        // Residuals with every structural column at its starting value.
        let mut resid = vec![0.0; m];
        let mut rhs_scale: f64 = 1.0;
        for (i, c) in model.constraints.iter().enumerate() {
            let b = c.rhs - c.expr.constant;
            rhs_scale = rhs_scale.max(b.abs());
            let ax: f64 = c.expr.terms().iter().map(|&(v, a)| a * x[v.0]).sum();
            resid[i] = b - ax;
        }

        // Decide the starting basic column of each row.
        let mut needs_art = vec![false; m];
        for (i, c) in model.constraints.iter().enumerate() {
            needs_art[i] = match c.relation {
                Relation::Le => resid[i] < 0.0,
                Relation::Ge => resid[i] > 0.0,
                Relation::Eq => true,
            };
        }
        let n_art = needs_art.iter().filter(|&&b| b).count();
        let cols = n + n_slack + n_art;
        let artificial_start = n + n_slack;

        let mut tab = vec![0.0; m * cols];
        let mut beta = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut next_art = artificial_start;
        for (i, c) in model.constraints.iter().enumerate() {
            let row = &mut tab[i * cols..(i + 1) * cols];
            for &(v, a) in c.expr.terms() {
                row[v.0] = a;
            }
            if slack_col[i] != usize::MAX {
                row[slack_col[i]] = 1.0;
            }
            if needs_art[i] {
                let sign = if resid[i] >= 0.0 { 1.0 } else { -1.0 };
                row[next_art] = sign;
                if sign < 0.0 {
                    row.iter_mut().for_each(|v| *v = -*v);
                }
                basis[i] = next_art;
                beta[i] = resid[i].abs();
                next_art += 1;
            } else {
                let s = slack_col[i];
                basis[i] = s;
                beta[i] = resid[i];
                state[s] = ColState::Basic;
            }
        }
        for _ in 0..n_art {
            lo.push(0.0);
            up.push(f64::INFINITY);
            x.push(0.0);
            state.push(ColState::Basic);
        }
        for &b in &basis {
            state[b] = ColState::Basic;
        }

        let mut s = Simplex {
            rows: m,
            cols,
            structural: n,
            tab,
            beta,
            basis,
            state,
            lo,
            up,
            x,
            cost: vec![0.0; cols],
            reduced: vec![0.0; cols],
            artificial_start,
            phase_two_cost: Vec::new(),
            bland,
            iterations: 0,
            rhs_scale,
        };
        for j in artificial_start..cols {
            s.cost[j] = 1.0;
        }
        s.recompute_reduced();
        s.phase_two_cost = model
            .objective
            .terms()
            .iter()
            .map(|&(v, a)| {
                (
                    v.0,
                    match model.sense {
                        Sense::Minimize => a,
                        Sense::Maximize => -a,
                    },
                )
            })
            .collect();
        s
    }

    fn recompute_reduced(&mut self) {
        self.reduced.copy_from_slice(&self.cost);
        for i in 0..self.rows {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * self.cols..(i + 1) * self.cols];
                for (d, &t) in self.reduced.iter_mut().zip(row) {
                    *d -= cb * t;
                }
            }
        }
        for i in 0..self.rows {
            self.reduced[self.basis[i]] = 0.0;
        }
    }

    fn run(mut self, deadline: Option<Instant>) -> Result<LpResult, SolveError> {
        let limit = 20_000 + 50 * (self.rows + self.cols);

        if self.artificial_start < self.cols {
            self.iterate(deadline, limit)?;
            let infeasibility: f64 = (0..self.rows)
                .filter(|&i| self.basis[i] >= self.artificial_start)
                .map(|i| self.beta[i])
                .sum();
            if infeasibility > 1e-9 * self.rhs_scale.max(1.0) {
                return Ok(LpResult::without_solution(
                    LpStatus::Infeasible,
                    self.iterations,
                ));
            }
            for j in self.artificial_start..self.cols {
                self.lo[j] = 0.0;
                self.up[j] = 0.0;
                if self.state[j] != ColState::Basic {
                    self.state[j] = ColState::AtLower;
                    self.x[j] = 0.0;
                }
            }
        }

        self.cost.iter_mut().for_each(|c| *c = 0.0);
        for &(j, c) in &self.phase_two_cost {
            self.cost[j] = c;
        }
        self.recompute_reduced();
        if let Step::Unbounded = self.iterate(deadline, limit)? {
            return Ok(LpResult::without_solution(
                LpStatus::Unbounded,
                self.iterations,
            ));
        }

        let mut values = self.x[..self.structural].to_vec();
        for i in 0..self.rows {
            let b = self.basis[i];
            if b < self.structural {
                values[b] = self.beta[i];
            }
        }
        for (j, v) in values.iter_mut().enumerate() {
            if (*v - self.lo[j]).abs() < 1e-9 {
                *v = self.lo[j];
            } else if (*v - self.up[j]).abs() < 1e-9 {
                *v = self.up[j];
            }
        }
        let objective: f64 = self
            .phase_two_cost
            .iter()
            .map(|&(j, c)| c * values[j])
            .sum();
        Ok(LpResult {
            status: LpStatus::Optimal,
            assignment: Some(Assignment(values)),
            // Internal costs are in minimisation form; callers re-evaluate
            // against the model objective, this value is only provisional.
            objective: Some(objective),
            iterations: self.iterations,
        })
    }

    fn iterate(&mut self, deadline: Option<Instant>, limit: usize) -> Result<Step, SolveError> {
        let mut degenerate = 0usize;
        let mut bland = self.bland;
        loop {
            if self.iterations >= limit {
                return Err(SolveError::NumericalInstability(format!(
                    "simplex iteration limit {limit} reached"
                )));
            }
            if self.iterations.is_multiple_of(64) {
                if let Some(d) = deadline {
                    if Instant::now() >= d {
                        return Err(SolveError::Timeout);
                    }
                }
            }
            match self.step(bland)? {
                (Step::Continue, theta) => {
                    self.iterations += 1;
                    if theta <= 1e-12 {
                        degenerate += 1;
                        if degenerate > DEGENERATE_RUN {
                            bland = true;
                        }
                    } else {
                        degenerate = 0;
                    }
                }
                (other, _) => return Ok(other),
            }
        }
    }

    /// One pricing + ratio test + update. Returns the step length taken.
    fn step(&mut self, bland: bool) -> Result<(Step, f64), SolveError> {
        // Pricing.
        let mut entering: Option<(usize, f64)> = None;
        let mut best = 0.0;
        for j in 0..self.cols {
            let st = self.state[j];
            if st == ColState::Basic || self.lo[j] == self.up[j] {
                continue;
            }
            let d = self.reduced[j];
            let dir = match st {
                ColState::AtLower if d < -COST_TOL => 1.0,
                ColState::AtUpper if d > COST_TOL => -1.0,
                ColState::Free if d.abs() > COST_TOL => -d.signum(),
                _ => continue,
            };
            if bland {
                entering = Some((j, dir));
                break;
            }
            if d.abs() > best {
                best = d.abs();
                entering = Some((j, dir));
            }
        }
        let Some((q, dir)) = entering else {
            return Ok((Step::Optimal, 0.0));
        };

        // Ratio test.
        let mut best_ratio = f64::INFINITY;
        let mut leave: Option<(usize, bool)> = None;
        let mut leave_pivot = 0.0;
        for i in 0..self.rows {
            let alpha = self.tab[i * self.cols + q];
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            // Basic value moves by -dir * alpha per unit step.
            let rate = -dir * alpha;
            let (ratio, to_upper) = if rate < 0.0 {
                if !self.lo[b].is_finite() {
                    continue;
                }
                (((self.beta[i] - self.lo[b]) / -rate).max(0.0), false)
            } else {
                if !self.up[b].is_finite() {
                    continue;
                }
                (((self.up[b] - self.beta[i]) / rate).max(0.0), true)
            };
            let replace = if ratio < best_ratio - 1e-12 {
                true
            } else if ratio <= best_ratio + 1e-12 {
                match leave {
                    Some((r, _)) if bland => b < self.basis[r],
                    Some(_) => alpha.abs() > leave_pivot,
                    None => true,
                }
            } else {
                false
            };
            if replace {
                best_ratio = best_ratio.min(ratio);
                leave = Some((i, to_upper));
                leave_pivot = alpha.abs();
            }
        }
        let flip = self.up[q] - self.lo[q];
        let theta = if flip <= best_ratio {
            leave = None;
            flip
        } else {
            best_ratio
        };
        if !theta.is_finite() {
            return Ok((Step::Unbounded, 0.0));
        }

        // Update basic values and the entering column.
        for i in 0..self.rows {
            let alpha = self.tab[i * self.cols + q];
            if alpha != 0.0 {
                self.beta[i] -= dir * theta * alpha;
            }
        }
        let entering_value = self.x[q] + dir * theta;

        match leave {
            None => {
                // Bound flip.
                if dir > 0.0 {
                    self.state[q] = ColState::AtUpper;
                    self.x[q] = self.up[q];
                } else {
                    self.state[q] = ColState::AtLower;
                    self.x[q] = self.lo[q];
                }
            }
            Some((r, to_upper)) => {
                let out = self.basis[r];
                if to_upper {
                    self.state[out] = ColState::AtUpper;
                    self.x[out] = self.up[out];
                } else {
                    self.state[out] = ColState::AtLower;
                    self.x[out] = self.lo[out];
                }
                self.state[q] = ColState::Basic;
                self.basis[r] = q;
                self.beta[r] = entering_value;
                self.pivot(r, q);
            }
        }
        Ok((Step::Continue, theta))
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let p = self.tab[r * cols + q];
        {
            let row = &mut self.tab[r * cols..(r + 1) * cols];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[q] = 1.0;
        }
        let pivot_row: Vec<f64> = self.tab[r * cols..(r + 1) * cols].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.tab[i * cols + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * cols..(i + 1) * cols];
            for (v, &pr) in row.iter_mut().zip(&pivot_row) {
                if pr != 0.0 {
                    *v -= f * pr;
                }
            }
            row[q] = 0.0;
        }
        let f = self.reduced[q];
        if f != 0.0 {
            for (d, &pr) in self.reduced.iter_mut().zip(&pivot_row) {
                if pr != 0.0 {
                    *d -= f * pr;
                }
            }
        }
        self.reduced[q] = 0.0;
    }
}
