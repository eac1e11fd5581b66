//! Canonical line-oriented model file.
//!
//! ```text
//! # comment
//! vars 3 cons 2 sense max
//! var 0 x_A 0 1 bin
//! var 1 x_B 0 1 bin
//! var 2 x_C 0 1 bin
//! con good[0] GoodAllocation g=0 : 1*x_A 1*x_C <= 1
//! con good[1] GoodAllocation g=1 : 1*x_B 1*x_C <= 1
//! obj : 5*x_A 4*x_B 8*x_C
//! ```
//!
//! A term is `<coeff>*<var name>`; a bare number is an additive constant.
//! An empty parameter map is written `-`.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{
    ConstraintKind, ConstraintTag, Integrality, LinearExpr, MilpModel, ModelError, Relation, Sense,
    TaggedConstraint,
};

pub fn write_model(model: &MilpModel) -> String {
    let mut out = String::new();
    let sense = match model.sense {
        Sense::Minimize => "min",
        Sense::Maximize => "max",
    };
    let _ = writeln!(
        out,
        "vars {} cons {} sense {}",
        model.variables.len(),
        model.constraints.len(),
        sense
    );
    for v in &model.variables {
        let kind = match v.integrality {
            Integrality::Continuous => "cont",
            Integrality::Integer => "int",
            Integrality::Binary => "bin",
        };
        let _ = writeln!(
            out,
            "var {} {} {} {} {}",
            v.id.0, v.name, v.lower, v.upper, kind
        );
    }
    for c in &model.constraints {
        let params = if c.tag.params.is_empty() {
            "-".to_string()
        } else {
            c.tag
                .params
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let _ = writeln!(
            out,
            "con {} {} {} : {}{} {}",
            c.id,
            c.tag.kind,
            params,
            write_terms(model, &c.expr),
            c.relation,
            c.rhs
        );
    }
    let _ = writeln!(
        out,
        "obj : {}",
        write_terms(model, &model.objective).trim_end()
    );
    out
}

fn write_terms(model: &MilpModel, expr: &LinearExpr) -> String {
    let mut out = String::new();
    for &(var, coeff) in expr.terms() {
        let _ = write!(out, "{}*{} ", coeff, model.variables[var.0].name);
    }
    if expr.constant != 0.0 {
        let _ = write!(out, "{} ", expr.constant);
    }
    out
}

fn perr(line: usize, message: impl Into<String>) -> ModelError {
    ModelError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_num(line: usize, s: &str) -> Result<f64, ModelError> {
    s.parse::<f64>()
        .ok()
        .filter(|v| !v.is_nan())
        .ok_or_else(|| perr(line, format!("invalid number `{s}`")))
}

fn parse_terms(
    line: usize,
    tokens: &[&str],
    names: &HashMap<String, usize>,
) -> Result<LinearExpr, ModelError> {
    let mut expr = LinearExpr::new();
    for tok in tokens {
        match tok.split_once('*') {
            Some((coeff, name)) => {
                let coeff = parse_num(line, coeff)?;
                let idx = names
                    .get(name)
                    .ok_or_else(|| perr(line, format!("unknown variable `{name}`")))?;
                expr.add_term(super::VarId(*idx), coeff);
            }
            None => expr.constant += parse_num(line, tok)?,
        }
    }
    Ok(expr)
}

pub fn parse_model(text: &str) -> Result<MilpModel, ModelError> {
    let mut model: Option<MilpModel> = None;
    let mut expected = (0usize, 0usize);
    let mut names: HashMap<String, usize> = HashMap::new();
    let mut saw_objective = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "vars" => {
                if model.is_some() {
                    return Err(perr(line_no, "duplicate header"));
                }
                if tokens.len() != 6 || tokens[2] != "cons" || tokens[4] != "sense" {
                    return Err(perr(line_no, "expected `vars N cons M sense min|max`"));
                }
                let n = tokens[1]
                    .parse()
                    .map_err(|_| perr(line_no, "invalid variable count"))?;
                let m = tokens[3]
                    .parse()
                    .map_err(|_| perr(line_no, "invalid constraint count"))?;
                let sense = match tokens[5] {
                    "min" => Sense::Minimize,
                    "max" => Sense::Maximize,
                    s => return Err(perr(line_no, format!("unknown sense `{s}`"))),
                };
                expected = (n, m);
                model = Some(MilpModel::new(sense));
            }
            "var" => {
                let m = model
                    .as_mut()
                    .ok_or_else(|| perr(line_no, "`var` before header"))?;
                if tokens.len() != 6 {
                    return Err(perr(line_no, "expected `var <id> <name> <lo> <hi> <kind>`"));
                }
                let id: usize = tokens[1]
                    .parse()
                    .map_err(|_| perr(line_no, "invalid variable id"))?;
                if id != m.variables.len() {
                    return Err(perr(
                        line_no,
                        format!("variable ids must be dense, got {id}"),
                    ));
                }
                let integrality = match tokens[5] {
                    "cont" => Integrality::Continuous,
                    "int" => Integrality::Integer,
                    "bin" => Integrality::Binary,
                    s => return Err(perr(line_no, format!("unknown integrality `{s}`"))),
                };
                let lo = parse_num(line_no, tokens[3])?;
                let hi = parse_num(line_no, tokens[4])?;
                m.add_variable(tokens[2], lo, hi, integrality)
                    .map_err(|e| perr(line_no, e.to_string()))?;
                names.insert(tokens[2].to_string(), id);
            }
            "con" => {
                let m = model
                    .as_mut()
                    .ok_or_else(|| perr(line_no, "`con` before header"))?;
                if tokens.len() < 7 || tokens[4] != ":" {
                    return Err(perr(
                        line_no,
                        "expected `con <id> <kind> <params> : <terms> <rel> <rhs>`",
                    ));
                }
                let kind: ConstraintKind = tokens[2].parse().map_err(|e| perr(line_no, e))?;
                let mut tag = ConstraintTag::new(kind);
                if tokens[3] != "-" {
                    for pair in tokens[3].split(',') {
                        let (k, v) = pair
                            .split_once('=')
                            .ok_or_else(|| perr(line_no, format!("invalid parameter `{pair}`")))?;
                        tag.params.insert(k.to_string(), v.to_string());
                    }
                }
                let n = tokens.len();
                let relation: Relation = tokens[n - 2].parse().map_err(|e| perr(line_no, e))?;
                let rhs = parse_num(line_no, tokens[n - 1])?;
                let expr = parse_terms(line_no, &tokens[5..n - 2], &names)?;
                m.add_constraint(TaggedConstraint::new(tokens[1], expr, relation, rhs, tag))
                    .map_err(|e| perr(line_no, e.to_string()))?;
            }
            "obj" => {
                let m = model
                    .as_mut()
                    .ok_or_else(|| perr(line_no, "`obj` before header"))?;
                if saw_objective {
                    return Err(perr(line_no, "duplicate objective"));
                }
                if tokens.get(1) != Some(&":") {
                    return Err(perr(line_no, "expected `obj : <terms>`"));
                }
                let expr = parse_terms(line_no, &tokens[2..], &names)?;
                m.set_objective(expr)
                    .map_err(|e| perr(line_no, e.to_string()))?;
                saw_objective = true;
            }
            other => return Err(perr(line_no, format!("unknown directive `{other}`"))),
        }
    }

    let model = model.ok_or_else(|| perr(0, "missing header"))?;
    if model.variables.len() != expected.0 {
        return Err(perr(
            0,
            format!(
                "header declares {} variables, found {}",
                expected.0,
                model.variables.len()
            ),
        ));
    }
    if model.constraints.len() != expected.1 {
        return Err(perr(
            0,
            format!(
                "header declares {} constraints, found {}",
                expected.1,
                model.constraints.len()
            ),
        ));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VarId;
    use proptest::prelude::*;

    const TOY: &str = "\
# winner determination toy
vars 3 cons 2 sense max
var 0 x_A 0 1 bin
var 1 x_B 0 1 bin
var 2 x_C 0 1 bin
con good[0] GoodAllocation g=0 : 1*x_A 1*x_C <= 1
con good[1] GoodAllocation g=1 : 1*x_B 1*x_C <= 1
obj : 5*x_A 4*x_B 8*x_C
";

    #[test]
    fn parses_toy() {
        let m = parse_model(TOY).unwrap();
        assert_eq!(m.sense, Sense::Maximize);
        assert_eq!(m.variables.len(), 3);
        assert_eq!(m.constraints[1].tag.param("g"), Some("1"));
        assert_eq!(m.objective.coefficient(VarId(2)), 8.0);
        assert_eq!(parse_model(&write_model(&m)).unwrap(), m);
    }

    #[test]
    fn reports_line_numbers() {
        let bad = TOY.replace("1*x_B 1*x_C <= 1", "1*x_Z <= 1");
        match parse_model(&bad) {
            Err(ModelError::Parse { line, message }) => {
                assert_eq!(line, 7);
                assert!(message.contains("x_Z"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_model("vars 1 cons 0 sense min\n"),
            Err(ModelError::Parse { .. })
        ));
    }

    fn arb_model() -> impl Strategy<Value = MilpModel> {
        let var = (
            -50i32..50,
            0i32..50,
            prop_oneof![
                Just(Integrality::Continuous),
                Just(Integrality::Integer),
                Just(Integrality::Binary)
            ],
            any::<bool>(),
        );
        (
            prop::collection::vec(var, 1..6),
            prop::collection::vec(
                (
                    prop::collection::vec((0usize..6, -1e3f64..1e3), 0..5),
                    0usize..3,
                    -1e4f64..1e4,
                    -5.0f64..5.0,
                    0usize..7,
                ),
                0..6,
            ),
            prop::collection::vec((0usize..6, -10.0f64..10.0), 0..4),
            any::<bool>(),
        )
            .prop_map(|(vars, cons, obj, max)| {
                let mut m = MilpModel::new(if max {
                    Sense::Maximize
                } else {
                    Sense::Minimize
                });
                for (i, (lo, width, kind, inf_upper)) in vars.iter().enumerate() {
                    let (lo, hi) = match kind {
                        Integrality::Binary => (0.0, 1.0),
                        Integrality::Integer => (*lo as f64, (*lo + *width) as f64),
                        Integrality::Continuous if *inf_upper => (*lo as f64 / 3.0, f64::INFINITY),
                        Integrality::Continuous => {
                            (*lo as f64 / 3.0, *lo as f64 / 3.0 + *width as f64)
                        }
                    };
                    m.add_variable(format!("x{i}"), lo, hi, *kind).unwrap();
                }
                let n = m.variables.len();
                for (i, (terms, rel, rhs, constant, kind)) in cons.into_iter().enumerate() {
                    let mut e =
                        LinearExpr::from_terms(terms.into_iter().map(|(v, c)| (VarId(v % n), c)));
                    e.constant = constant;
                    let relation = [Relation::Le, Relation::Ge, Relation::Eq][rel];
                    let tag = ConstraintTag::new(ConstraintKind::ALL[kind])
                        .with("k", i)
                        .with_list("acts", &[i, i + 1]);
                    m.add_constraint(TaggedConstraint::new(
                        format!("c[{i}]"),
                        e,
                        relation,
                        rhs,
                        tag,
                    ))
                    .unwrap();
                }
                m.set_objective(LinearExpr::from_terms(
                    obj.into_iter().map(|(v, c)| (VarId(v % n), c)),
                ))
                .unwrap();
                m
            })
    }

    proptest! {
        #[test]
        fn canonical_round_trip(m in arb_model()) {
            let text = write_model(&m);
            prop_assert_eq!(parse_model(&text).unwrap(), m);
        }

        #[test]
        fn parser_is_total(s in "\\PC{0,200}") {
            let _ = parse_model(&s);
        }
    }
}
