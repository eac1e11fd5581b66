//! Dual graphs of constraint sets and the labelled graph of reasons.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::str::FromStr;

use log::error;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::iis::Iis;
use crate::model::{ConstraintKind, MilpModel, TaggedConstraint, VarId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown constraint `{0}`")]
    UnknownConstraint(String),
    #[error("cannot build a graph from an empty constraint set")]
    EmptyIis,
}

/// Variables and the scope of every constraint in a set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypergraph {
    pub vertices: BTreeSet<VarId>,
    pub hyperedges: Vec<(String, BTreeSet<VarId>)>,
}

pub fn hypergraph(ids: &[String], model: &MilpModel) -> Result<Hypergraph, GraphError> {
    let mut vertices = BTreeSet::new();
    let mut hyperedges = Vec::with_capacity(ids.len());
    for id in ids {
        let c = model
            .constraint(id)
            .ok_or_else(|| GraphError::UnknownConstraint(id.clone()))?;
        let scope = c.scope();
        vertices.extend(scope.iter().copied());
        hyperedges.push((id.clone(), scope));
    }
    Ok(Hypergraph {
        vertices,
        hyperedges,
    })
}

/// Nodes are constraints; two nodes are adjacent iff their scopes share a
/// variable. Edges hold node indices `(i, j)` with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl DualGraph {
    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        let ia = self.nodes.iter().position(|n| n == a);
        let ib = self.nodes.iter().position(|n| n == b);
        match (ia, ib) {
            (Some(i), Some(j)) => self.edges.contains(&(i.min(j), i.max(j))),
            _ => false,
        }
    }

    /// Edges as id pairs, each pair ordered and the list sorted.
    pub fn edge_ids(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self
            .edges
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (&self.nodes[i], &self.nodes[j]);
                if a <= b {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                }
            })
            .collect();
        out.sort();
        out
    }
}

pub fn dual_graph(ids: &[String], model: &MilpModel) -> Result<DualGraph, GraphError> {
    let h = hypergraph(ids, model)?;
    let mut edges = Vec::new();
    for i in 0..h.hyperedges.len() {
        for j in i + 1..h.hyperedges.len() {
            if !h.hyperedges[i].1.is_disjoint(&h.hyperedges[j].1) {
                edges.push((i, j));
            }
        }
    }
    Ok(DualGraph {
        nodes: ids.to_vec(),
        edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connectivity {
    pub connected: bool,
    pub components: usize,
}

/// Counts connected components by breadth-first search.
pub fn assert_connected(g: &DualGraph) -> Connectivity {
    let n = g.nodes.len();
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in &g.edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut components = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        components += 1;
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    Connectivity {
        connected: components <= 1,
        components,
    }
}

fn pretty(c: &TaggedConstraint, model: &MilpModel) -> String {
    let mut out = String::new();
    for (k, &(v, coeff)) in c.expr.terms().iter().enumerate() {
        let name = model
            .variables
            .get(v.0)
            .map(|x| x.name.as_str())
            .unwrap_or("?");
        let sign = if coeff < 0.0 { "-" } else { "+" };
        if k == 0 {
            if coeff < 0.0 {
                out.push('-');
            }
        } else {
            let _ = write!(out, " {sign} ");
        }
        if coeff.abs() != 1.0 {
            let _ = write!(out, "{} ", coeff.abs());
        }
        out.push_str(name);
    }
    if c.expr.constant != 0.0 || out.is_empty() {
        if out.is_empty() {
            let _ = write!(out, "{}", c.expr.constant);
        } else {
            let sign = if c.expr.constant < 0.0 { "-" } else { "+" };
            let _ = write!(out, " {sign} {}", c.expr.constant.abs());
        }
    }
    format!("{out} {} {}", c.relation, c.rhs)
}

fn join_list(items: &[&str]) -> String {
    items.join(", ")
}

fn query_label(c: &TaggedConstraint) -> Option<String> {
    let p = |k: &str| c.tag.param(k);
    let list = |k: &str| join_list(&c.tag.list(k));
    Some(match p("atom")? {
        "at" => format!("Act. {} completed at time {}", p("j")?, p("t")?),
        "not_at" => format!("Act. {} not completed at time {}", p("j")?, p("t")?),
        "before" => format!("Act. {} completed before time {}", p("j")?, p("t")?),
        "after" => format!("Act. {} completed after time {}", p("j")?, p("t")?),
        "not_all" => format!(
            "Not all of Acts. {} completed at time {}",
            list("acts"),
            p("t")?
        ),
        "none" => format!(
            "None of Acts. {} completed at time {}",
            list("acts"),
            p("t")?
        ),
        "all" => format!("Acts. {} all completed at time {}", list("acts"), p("t")?),
        "selected" => format!("Bid {} selected", p("b")?),
        "not_selected" => format!("Bid {} not selected", p("b")?),
        "not_all_bids" => format!("Not all of Bids {} selected", list("bids")),
        _ => return None,
    })
}

/// Natural-language label of a constraint. Depends only on the tag, its
/// parameters and the constraint itself; falls back to the pretty-printed
/// constraint when a template's parameters are missing.
pub fn label(c: &TaggedConstraint, model: &MilpModel) -> String {
    let p = |k: &str| c.tag.param(k);
    let text = match c.tag.kind {
        ConstraintKind::Completion => p("j").map(|j| format!("Activity {j} must be completed")),
        ConstraintKind::Precedence => p("h")
            .zip(p("j"))
            .map(|(h, j)| format!("Act. {h} must be completed before Act. {j} starts")),
        ConstraintKind::Resource => p("r").zip(p("t")).map(|(r, t)| {
            format!(
                "Res. {r} is scarce at time {t} due to Acts. {}",
                join_list(&c.tag.list("acts"))
            )
        }),
        ConstraintKind::GoodAllocation => {
            p("g").map(|g| format!("Good {g} can be won by at most one bid"))
        }
        ConstraintKind::Minimality => {
            p("f").map(|f| format!("A solution at least as good as {f} is required"))
        }
        ConstraintKind::Query => query_label(c),
        ConstraintKind::Generic => None,
    };
    text.unwrap_or_else(|| pretty(c, model))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonNode {
    pub id: String,
    pub kind: ConstraintKind,
    pub params: BTreeMap<String, String>,
    pub label: String,
    pub is_query: bool,
    pub is_minimality: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonGraph {
    /// Sorted by id.
    pub nodes: Vec<ReasonNode>,
    /// Sorted id pairs, each pair ordered.
    pub edges: Vec<(String, String)>,
    /// Query nodes, sorted.
    pub root: Vec<String>,
}

impl ReasonGraph {
    pub fn node(&self, id: &str) -> Option<&ReasonNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn dual(&self) -> DualGraph {
        let nodes: Vec<String> = self.nodes.iter().map(|n| n.id.clone()).collect();
        let index = |id: &str| {
            nodes
                .iter()
                .position(|n| n == id)
                .expect("edge endpoint is a node")
        };
        let mut edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|(a, b)| {
                let (i, j) = (index(a), index(b));
                (i.min(j), i.max(j))
            })
            .collect();
        edges.sort_unstable();
        DualGraph { nodes, edges }
    }

    pub fn connectivity(&self) -> Connectivity {
        assert_connected(&self.dual())
    }
}

/// Labels the dual graph of `iis` and roots it at the query constraints.
pub fn to_reason_graph(iis: &Iis, model: &MilpModel) -> Result<ReasonGraph, GraphError> {
    reason_graph_of(&iis.constraint_ids, model)
}

pub fn reason_graph_of(ids: &[String], model: &MilpModel) -> Result<ReasonGraph, GraphError> {
    if ids.is_empty() {
        return Err(GraphError::EmptyIis);
    }
    let mut sorted = ids.to_vec();
    sorted.sort();
    sorted.dedup();
    let dual = dual_graph(&sorted, model)?;
    let report = assert_connected(&dual);
    if !report.connected {
        error!(
            "dual graph of an IIS has {} components; the IIS is not irreducible",
            report.components
        );
    }
    let nodes: Vec<ReasonNode> = sorted
        .iter()
        .map(|id| {
            let c = model.constraint(id).expect("checked by dual_graph");
            ReasonNode {
                id: id.clone(),
                kind: c.tag.kind,
                params: c.tag.params.clone(),
                label: label(c, model),
                is_query: c.tag.kind == ConstraintKind::Query,
                is_minimality: c.tag.kind == ConstraintKind::Minimality,
            }
        })
        .collect();
    let root = nodes
        .iter()
        .filter(|n| n.is_query)
        .map(|n| n.id.clone())
        .collect();
    Ok(ReasonGraph {
        nodes,
        edges: dual.edge_ids(),
        root,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Dot,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "dot" => Ok(Format::Dot),
            _ => Err(format!("unknown format `{s}`")),
        }
    }
}

fn color(kind: ConstraintKind) -> &'static str {
    match kind {
        ConstraintKind::Completion => "olivedrab",
        ConstraintKind::Precedence => "royalblue",
        ConstraintKind::Resource => "firebrick",
        ConstraintKind::GoodAllocation => "darkorange",
        ConstraintKind::Minimality => "goldenrod",
        ConstraintKind::Query => "black",
        ConstraintKind::Generic => "gray40",
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Deterministic JSON or Graphviz output. In DOT the minimality node is a
/// double ring and its edges are left out to keep the picture readable.
pub fn serialize(g: &ReasonGraph, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(g).expect("graph serializes"),
        Format::Dot => {
            let mut out =
                String::from("graph reasons {\n  node [style=filled, fontcolor=white];\n");
            let minimality: BTreeSet<&str> = g
                .nodes
                .iter()
                .filter(|n| n.is_minimality)
                .map(|n| n.id.as_str())
                .collect();
            for n in &g.nodes {
                let shape = if n.is_minimality {
                    "doublecircle"
                } else if n.is_query {
                    "box"
                } else {
                    "ellipse"
                };
                let _ = writeln!(
                    out,
                    "  \"{}\" [label=\"{}\", shape={shape}, fillcolor={}];",
                    dot_escape(&n.id),
                    dot_escape(&n.label),
                    color(n.kind)
                );
            }
            let mut hidden = 0;
            for (a, b) in &g.edges {
                if minimality.contains(a.as_str()) || minimality.contains(b.as_str()) {
                    hidden += 1;
                    continue;
                }
                let _ = writeln!(out, "  \"{}\" -- \"{}\";", dot_escape(a), dot_escape(b));
            }
            if hidden > 0 {
                let _ = writeln!(out, "  // {hidden} minimality edges omitted");
            }
            out.push_str("}\n");
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstraintTag, LinearExpr, Relation, Sense};

    fn model() -> MilpModel {
        let mut m = MilpModel::new(Sense::Minimize);
        let x = m.add_binary("x").unwrap();
        let y = m.add_binary("y").unwrap();
        let z = m.add_binary("z").unwrap();
        let mut add = |id: &str, vars: &[VarId], kind: ConstraintKind| {
            m.add_constraint(TaggedConstraint::new(
                id,
                LinearExpr::from_terms(vars.iter().map(|&v| (v, 1.0))),
                Relation::Le,
                1.0,
                ConstraintTag::new(kind),
            ))
            .unwrap();
        };
        add("a", &[x, y], ConstraintKind::Generic);
        add("b", &[y], ConstraintKind::Generic);
        add("c", &[z], ConstraintKind::Generic);
        m
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn small_graphs() {
        let m = model();
        let one = dual_graph(&ids(&["a"]), &m).unwrap();
        assert!(one.edges.is_empty());
        assert_eq!(
            assert_connected(&one),
            Connectivity {
                connected: true,
                components: 1
            }
        );

        let two = dual_graph(&ids(&["a", "b"]), &m).unwrap();
        assert_eq!(two.edges, vec![(0, 1)]);

        let split = dual_graph(&ids(&["a", "b", "c"]), &m).unwrap();
        assert_eq!(assert_connected(&split).components, 2);

        assert!(matches!(
            dual_graph(&ids(&["zz"]), &m),
            Err(GraphError::UnknownConstraint(_))
        ));
        assert_eq!(reason_graph_of(&[], &m), Err(GraphError::EmptyIis));
    }

    #[test]
    fn generic_label_is_pretty_printed() {
        let m = model();
        assert_eq!(label(m.constraint("a").unwrap(), &m), "x + y <= 1");
    }

    #[test]
    fn one_node_dot() {
        let m = model();
        let g = reason_graph_of(&ids(&["a"]), &m).unwrap();
        let dot = serialize(&g, Format::Dot);
        assert_eq!(dot.matches(" [label=").count(), 1);
        assert!(!dot.contains(" -- "));
        assert_eq!(dot, serialize(&g, Format::Dot));
    }
}
