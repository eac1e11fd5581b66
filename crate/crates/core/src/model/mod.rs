//! MILP models in the form `min/max c·x  s.t.  rows of (a·x rel b)`, with
//! per-constraint semantic tags used by the explanation pipeline.
//!
//! Coefficients are `f64`. Constraint order is significant: IIS extraction
//! walks constraints in stored order, so builders must emit them
//! deterministically.

mod format;

pub use format::{parse_model, write_model};

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default feasibility tolerance used throughout the crate.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("variable id {var} out of range (model has {len} variables)")]
    VarOutOfRange { var: usize, len: usize },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("invalid bounds for `{name}`: [{lower}, {upper}]")]
    InvalidBounds {
        name: String,
        lower: f64,
        upper: f64,
    },
    #[error("integer variable `{0}` must have finite bounds")]
    UnboundedInteger(String),
    #[error("duplicate constraint id `{0}`")]
    DuplicateConstraint(String),
    #[error("unknown constraint id `{0}`")]
    UnknownConstraint(String),
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Dense variable index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrality {
    Continuous,
    Integer,
    Binary,
}

impl Integrality {
    pub fn is_integral(self) -> bool {
        !matches!(self, Integrality::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integrality: Integrality,
}

/// Sparse linear expression. Terms are kept sorted by variable id, with no
/// duplicates and no zero coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearExpr {
    terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn from_terms<I: IntoIterator<Item = (VarId, f64)>>(terms: I) -> Self {
        let mut expr = Self::new();
        for (var, coeff) in terms {
            expr.add_term(var, coeff);
        }
        expr
    }

    pub fn add_term(&mut self, var: VarId, coeff: f64) {
        match self.terms.binary_search_by_key(&var, |&(v, _)| v) {
            Ok(pos) => {
                self.terms[pos].1 += coeff;
                if self.terms[pos].1 == 0.0 {
                    self.terms.remove(pos);
                }
            }
            Err(pos) => {
                if coeff != 0.0 {
                    self.terms.insert(pos, (var, coeff));
                }
            }
        }
    }

    pub fn terms(&self) -> &[(VarId, f64)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, var: VarId) -> f64 {
        self.terms
            .binary_search_by_key(&var, |&(v, _)| v)
            .map(|pos| self.terms[pos].1)
            .unwrap_or(0.0)
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.terms.iter().map(|&(v, _)| v)
    }

    /// `Σ coeff·value + constant`.
    pub fn evaluate(&self, assignment: &Assignment) -> Result<f64, ModelError> {
        let values = assignment.values();
        let mut sum = self.constant;
        for &(var, coeff) in &self.terms {
            let value = values.get(var.0).ok_or(ModelError::VarOutOfRange {
                var: var.0,
                len: values.len(),
            })?;
            sum += coeff * value;
        }
        Ok(sum)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "<=" => Ok(Relation::Le),
            ">=" => Ok(Relation::Ge),
            "=" | "==" => Ok(Relation::Eq),
            other => Err(format!("unknown relation `{other}`")),
        }
    }
}

/// Semantic category of a constraint; selects the natural-language template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    Completion,
    Precedence,
    Resource,
    GoodAllocation,
    Minimality,
    Query,
    Generic,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 7] = [
        ConstraintKind::Completion,
        ConstraintKind::Precedence,
        ConstraintKind::Resource,
        ConstraintKind::GoodAllocation,
        ConstraintKind::Minimality,
        ConstraintKind::Query,
        ConstraintKind::Generic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::Completion => "Completion",
            ConstraintKind::Precedence => "Precedence",
            ConstraintKind::Resource => "Resource",
            ConstraintKind::GoodAllocation => "GoodAllocation",
            ConstraintKind::Minimality => "Minimality",
            ConstraintKind::Query => "Query",
            ConstraintKind::Generic => "Generic",
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConstraintKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown constraint kind `{s}`"))
    }
}

/// Kind plus entity parameters (activity ids, resource, time, bid ids, ...).
///
/// List-valued parameters are stored `;`-separated, e.g. `acts=16;17`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintTag {
    pub kind: ConstraintKind,
    pub params: BTreeMap<String, String>,
}

impl ConstraintTag {
    pub fn new(kind: ConstraintKind) -> Self {
        Self {
            kind,
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_list<T: ToString>(self, key: &str, values: &[T]) -> Self {
        let joined = values
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(";");
        self.with(key, joined)
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(String::as_str)
    }

    pub fn list(&self, key: &str) -> Vec<&str> {
        match self.param(key) {
            Some("") | None => Vec::new(),
            Some(v) => v.split(';').collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedConstraint {
    pub id: String,
    pub expr: LinearExpr,
    pub relation: Relation,
    pub rhs: f64,
    pub tag: ConstraintTag,
}

impl TaggedConstraint {
    pub fn new(
        id: impl Into<String>,
        expr: LinearExpr,
        relation: Relation,
        rhs: f64,
        tag: ConstraintTag,
    ) -> Self {
        Self {
            id: id.into(),
            expr,
            relation,
            rhs,
            tag,
        }
    }

    /// Variables with a nonzero coefficient.
    pub fn scope(&self) -> BTreeSet<VarId> {
        self.expr.vars().collect()
    }

    pub fn satisfies(&self, assignment: &Assignment, tol: f64) -> Result<bool, ModelError> {
        let lhs = self.expr.evaluate(assignment)?;
        Ok(match self.relation {
            Relation::Le => lhs <= self.rhs + tol,
            Relation::Ge => lhs >= self.rhs - tol,
            Relation::Eq => (lhs - self.rhs).abs() <= tol,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Dense assignment indexed by [`VarId`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment(pub Vec<f64>);

impl Assignment {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, var: VarId) -> Option<f64> {
        self.0.get(var.0).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `evaluate(expr, a)` as a free function, mirroring [`LinearExpr::evaluate`].
pub fn evaluate(expr: &LinearExpr, assignment: &Assignment) -> Result<f64, ModelError> {
    expr.evaluate(assignment)
}

/// `satisfies(c, a, tol)` as a free function, mirroring [`TaggedConstraint::satisfies`].
pub fn satisfies(
    constraint: &TaggedConstraint,
    assignment: &Assignment,
    tol: f64,
) -> Result<bool, ModelError> {
    constraint.satisfies(assignment, tol)
}

fn valid_identifier(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c == '*' || c == '#')
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<TaggedConstraint>,
    pub objective: LinearExpr,
    pub sense: Sense,
}

impl MilpModel {
    pub fn new(sense: Sense) -> Self {
        Self {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: LinearExpr::new(),
            sense,
        }
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        integrality: Integrality,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        if !valid_identifier(&name) {
            return Err(ModelError::InvalidIdentifier(name));
        }
        if self.variables.iter().any(|v| v.name == name) {
            return Err(ModelError::DuplicateVariable(name));
        }
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY {
            return Err(ModelError::InvalidBounds { name, lower, upper });
        }
        if integrality == Integrality::Binary && (lower < 0.0 || upper > 1.0) {
            return Err(ModelError::InvalidBounds { name, lower, upper });
        }
        if integrality.is_integral() && !(lower.is_finite() && upper.is_finite()) {
            return Err(ModelError::UnboundedInteger(name));
        }
        let id = VarId(self.variables.len());
        self.variables.push(Variable {
            id,
            name,
            lower,
            upper,
            integrality,
        });
        Ok(id)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarId, ModelError> {
        self.add_variable(name, 0.0, 1.0, Integrality::Binary)
    }

    pub fn add_constraint(&mut self, constraint: TaggedConstraint) -> Result<(), ModelError> {
        if !valid_identifier(&constraint.id) {
            return Err(ModelError::InvalidIdentifier(constraint.id));
        }
        if self.constraints.iter().any(|c| c.id == constraint.id) {
            return Err(ModelError::DuplicateConstraint(constraint.id));
        }
        for var in constraint.expr.vars() {
            self.check_var(var)?;
        }
        self.constraints.push(constraint);
        Ok(())
    }

    pub fn set_objective(&mut self, objective: LinearExpr) -> Result<(), ModelError> {
        for var in objective.vars() {
            self.check_var(var)?;
        }
        self.objective = objective;
        Ok(())
    }

    fn check_var(&self, var: VarId) -> Result<(), ModelError> {
        if var.0 >= self.variables.len() {
            return Err(ModelError::VarOutOfRange {
                var: var.0,
                len: self.variables.len(),
            });
        }
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn variable_by_name(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn constraint(&self, id: &str) -> Option<&TaggedConstraint> {
        self.constraints.iter().find(|c| c.id == id)
    }

    pub fn constraint_index(&self, id: &str) -> Option<usize> {
        self.constraints.iter().position(|c| c.id == id)
    }

    /// Checks every model invariant; models built through the `add_*`
    /// methods always pass.
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut names = HashSet::new();
        for (i, v) in self.variables.iter().enumerate() {
            if v.id != VarId(i) {
                return Err(ModelError::VarOutOfRange {
                    var: v.id.0,
                    len: self.variables.len(),
                });
            }
            if !names.insert(v.name.as_str()) {
                return Err(ModelError::DuplicateVariable(v.name.clone()));
            }
        }
        let mut ids = HashSet::new();
        for c in &self.constraints {
            if !ids.insert(c.id.as_str()) {
                return Err(ModelError::DuplicateConstraint(c.id.clone()));
            }
            for var in c.expr.vars() {
                self.check_var(var)?;
            }
        }
        for var in self.objective.vars() {
            self.check_var(var)?;
        }
        Ok(())
    }

    /// Same variables and objective, constraints filtered to `keep` with the
    /// stored order preserved.
    pub fn subsystem<'a, I>(&self, keep: I) -> Result<MilpModel, ModelError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let index: HashMap<&str, usize> = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.as_str(), i))
            .collect();
        let mut selected = Vec::new();
        for id in keep {
            let pos = *index
                .get(id)
                .ok_or_else(|| ModelError::UnknownConstraint(id.to_string()))?;
            selected.push(pos);
        }
        Ok(self.subsystem_by_index(&selected))
    }

    /// Index-based variant of [`MilpModel::subsystem`]; indices out of range
    /// are ignored.
    pub fn subsystem_by_index(&self, keep: &[usize]) -> MilpModel {
        let mut mask = vec![false; self.constraints.len()];
        for &i in keep {
            if i < mask.len() {
                mask[i] = true;
            }
        }
        MilpModel {
            variables: self.variables.clone(),
            constraints: self
                .constraints
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| m)
                .map(|(c, _)| c.clone())
                .collect(),
            objective: self.objective.clone(),
            sense: self.sense,
        }
    }

    /// Every constraint satisfied within `tol` and every variable within its
    /// bounds (and integral, for integer variables).
    pub fn is_feasible_assignment(&self, assignment: &Assignment, tol: f64) -> bool {
        if assignment.len() != self.variables.len() {
            return false;
        }
        let bounds_ok = self.variables.iter().all(|v| {
            let x = assignment.0[v.id.0];
            x >= v.lower - tol
                && x <= v.upper + tol
                && (!v.integrality.is_integral() || (x - x.round()).abs() <= tol)
        });
        bounds_ok
            && self
                .constraints
                .iter()
                .all(|c| c.satisfies(assignment, tol).unwrap_or(false))
    }

    pub fn objective_value(&self, assignment: &Assignment) -> Result<f64, ModelError> {
        self.objective.evaluate(assignment)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_var_model() -> (MilpModel, VarId, VarId) {
        let mut m = MilpModel::new(Sense::Minimize);
        let x1 = m
            .add_variable("x1", 0.0, 10.0, Integrality::Integer)
            .unwrap();
        let x2 = m
            .add_variable("x2", 0.0, 10.0, Integrality::Integer)
            .unwrap();
        (m, x1, x2)
    }

    #[test]
    fn evaluate_linear_expression() {
        let (_, x1, x2) = two_var_model();
        let mut e = LinearExpr::from_terms([(x1, 3.0), (x2, -1.0)]);
        e.constant = 1.0;
        assert_eq!(e.evaluate(&Assignment(vec![2.0, 1.0])).unwrap(), 6.0);
        assert_eq!(
            LinearExpr::constant(4.5)
                .evaluate(&Assignment(vec![]))
                .unwrap(),
            4.5
        );
    }

    #[test]
    fn evaluate_out_of_range() {
        let e = LinearExpr::from_terms([(VarId(3), 1.0)]);
        assert_eq!(
            e.evaluate(&Assignment(vec![0.0])),
            Err(ModelError::VarOutOfRange { var: 3, len: 1 })
        );
    }

    #[test]
    fn wdp_toy_objective() {
        let obj = LinearExpr::from_terms([(VarId(0), 5.0), (VarId(1), 4.0), (VarId(2), 8.0)]);
        assert_eq!(obj.evaluate(&Assignment(vec![1.0, 1.0, 0.0])).unwrap(), 9.0);
    }

    #[test]
    fn expression_merges_and_drops_zeros() {
        let e = LinearExpr::from_terms([
            (VarId(2), 1.0),
            (VarId(0), 2.0),
            (VarId(2), -1.0),
            (VarId(1), 0.0),
        ]);
        assert_eq!(e.terms(), &[(VarId(0), 2.0)]);
    }

    #[test]
    fn satisfies_with_tolerance() {
        let x = VarId(0);
        let le = TaggedConstraint::new(
            "c",
            LinearExpr::from_terms([(x, 1.0)]),
            Relation::Le,
            0.0,
            ConstraintTag::new(ConstraintKind::Generic),
        );
        assert!(le.satisfies(&Assignment(vec![0.0]), 0.0).unwrap());
        assert!(le.satisfies(&Assignment(vec![1e-7]), 1e-6).unwrap());
        assert!(!le.satisfies(&Assignment(vec![1e-5]), 1e-6).unwrap());
        let eq = TaggedConstraint {
            relation: Relation::Eq,
            rhs: 1.0,
            ..le
        };
        assert!(!eq.satisfies(&Assignment(vec![0.0]), 1e-6).unwrap());
    }

    #[test]
    fn scope_matches_expression() {
        let c = TaggedConstraint::new(
            "c",
            LinearExpr::from_terms([(VarId(4), 1.0), (VarId(1), 2.0)]),
            Relation::Ge,
            1.0,
            ConstraintTag::new(ConstraintKind::Generic),
        );
        assert_eq!(
            c.scope().into_iter().collect::<Vec<_>>(),
            vec![VarId(1), VarId(4)]
        );
    }

    fn three_constraint_model() -> MilpModel {
        let (mut m, x1, x2) = two_var_model();
        for (i, rhs) in [1.0, 2.0, 3.0].into_iter().enumerate() {
            m.add_constraint(TaggedConstraint::new(
                format!("c{}", i + 1),
                LinearExpr::from_terms([(x1, 1.0), (x2, rhs)]),
                Relation::Le,
                rhs,
                ConstraintTag::new(ConstraintKind::Generic),
            ))
            .unwrap();
        }
        m
    }

    #[test]
    fn subsystem_filters_and_preserves_order() {
        let m = three_constraint_model();
        assert_eq!(m.subsystem(["c3", "c1", "c2"]).unwrap(), m);
        assert!(m.subsystem([]).unwrap().constraints.is_empty());
        let one = m.subsystem(["c1"]).unwrap();
        assert_eq!(one.constraints.len(), 1);
        assert_eq!(one.constraints[0].id, "c1");
        let two = m.subsystem(["c3", "c1"]).unwrap();
        let ids: Vec<_> = two.constraints.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["c1", "c3"]);
        assert_eq!(
            m.subsystem(["nope"]),
            Err(ModelError::UnknownConstraint("nope".into()))
        );
    }

    #[test]
    fn rejects_bad_variables_and_duplicates() {
        let mut m = MilpModel::new(Sense::Minimize);
        assert!(matches!(
            m.add_variable("x", 2.0, 1.0, Integrality::Continuous),
            Err(ModelError::InvalidBounds { .. })
        ));
        assert!(matches!(
            m.add_variable("b", 0.0, 2.0, Integrality::Binary),
            Err(ModelError::InvalidBounds { .. })
        ));
        assert!(matches!(
            m.add_variable("i", 0.0, f64::INFINITY, Integrality::Integer),
            Err(ModelError::UnboundedInteger(_))
        ));
        m.add_binary("x").unwrap();
        assert!(matches!(
            m.add_binary("x"),
            Err(ModelError::DuplicateVariable(_))
        ));
        let c = TaggedConstraint::new(
            "c",
            LinearExpr::from_terms([(VarId(0), 1.0)]),
            Relation::Le,
            1.0,
            ConstraintTag::new(ConstraintKind::Generic),
        );
        m.add_constraint(c.clone()).unwrap();
        assert!(matches!(
            m.add_constraint(c),
            Err(ModelError::DuplicateConstraint(_))
        ));
        let bad = TaggedConstraint::new(
            "d",
            LinearExpr::from_terms([(VarId(7), 1.0)]),
            Relation::Le,
            1.0,
            ConstraintTag::new(ConstraintKind::Generic),
        );
        assert!(matches!(
            m.add_constraint(bad),
            Err(ModelError::VarOutOfRange { .. })
        ));
    }

    #[test]
    fn tag_lists() {
        let tag = ConstraintTag::new(ConstraintKind::Resource)
            .with("r", 4)
            .with_list("acts", &[16, 17]);
        assert_eq!(tag.list("acts"), vec!["16", "17"]);
        assert_eq!(tag.param("r"), Some("4"));
        assert!(tag.list("missing").is_empty());
    }
}
