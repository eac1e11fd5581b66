use std::time::Instant;

use exmip_core::graph::{assert_connected, dual_graph, label, reason_graph_of, serialize, Format};
use exmip_core::iis::IisAlgorithm;
use exmip_core::model::ConstraintKind;
use exmip_core::problems::{build_rcpsp_milp, compute_time_windows, parse_psplib, Problem};
use exmip_core::query::{build_asp, explain_asp, translate_query, Explanation, Query};
use exmip_core::solver::solve_milp;
use exmip_core::verify::audit_iis;

const CHAIN24: &str = include_str!("../../../fixtures/rcpsp/chain24.sm");

fn chain24() -> (Problem, f64) {
    let inst = parse_psplib(CHAIN24).unwrap();
    let tw = compute_time_windows(&inst).unwrap();
    let built = build_rcpsp_milp(&inst, &tw).unwrap();
    let f = solve_milp(&built.model, None).unwrap().objective.unwrap();
    (Problem::Rcpsp(built), f)
}

#[test]
fn figure_two_reconstruction() {
    let (problem, f_star) = chain24();
    let q = Query::Q3 {
        activity: 24,
        time: 41,
    };
    let cq = translate_query(&q, &problem).unwrap();
    let asp = build_asp(problem.model(), f_star, cq).unwrap();
    let names = [
        ("q", "q"),
        ("c1", "comp[16]"),
        ("c2", "comp[17]"),
        ("c3", "prec[16,22]"),
        ("c4", "prec[17,22]"),
        ("c5", "prec[22,23]"),
        ("c6", "prec[23,24]"),
        ("c7", "res[4,23]"),
    ];
    let ids: Vec<String> = names.iter().map(|(_, id)| id.to_string()).collect();
    let g = dual_graph(&ids, &asp.model).unwrap();
    let id = |short: &str| names.iter().find(|(s, _)| *s == short).unwrap().1;
    let expected = [
        ("q", "c6"),
        ("c6", "c5"),
        ("c5", "c3"),
        ("c5", "c4"),
        ("c3", "c4"),
        ("c3", "c1"),
        ("c3", "c7"),
        ("c4", "c2"),
        ("c4", "c7"),
        ("c1", "c7"),
        ("c2", "c7"),
    ];
    assert_eq!(g.edges.len(), expected.len());
    for (a, b) in expected {
        assert!(g.has_edge(id(a), id(b)), "missing edge {a}-{b}");
    }
    assert!(assert_connected(&g).connected);

    let rg = reason_graph_of(&ids, &asp.model).unwrap();
    assert_eq!(rg.root, vec!["q"]);
    let dot = serialize(&rg, Format::Dot);
    assert_eq!(dot.matches(" [label=").count(), 8);
    assert_eq!(dot.matches(" -- ").count(), 11);

    let lbl = |id: &str| label(asp.model.constraint(id).unwrap(), &asp.model);
    assert_eq!(
        lbl("prec[23,24]"),
        "Act. 23 must be completed before Act. 24 starts"
    );
    assert_eq!(lbl("comp[16]"), "Activity 16 must be completed");
    assert_eq!(
        lbl("res[4,23]"),
        "Res. 4 is scarce at time 23 due to Acts. 16, 17"
    );
    assert_eq!(lbl("q"), "Act. 24 completed before time 41");
    assert_eq!(lbl("min"), "A solution at least as good as 43 is required");
}

#[test]
fn running_example_query() {
    let (problem, f_star) = chain24();
    assert_eq!(f_star, 43.0);
    let q = Query::Q3 {
        activity: 24,
        time: 41,
    };
    let cq = translate_query(&q, &problem).unwrap();
    let asp = build_asp(problem.model(), f_star, cq).unwrap();
    for algo in [
        IisAlgorithm::Deletion,
        IisAlgorithm::Additive,
        IisAlgorithm::Smallest,
    ] {
        let start = Instant::now();
        let e = explain_asp(&asp, algo, None).unwrap();
        let Explanation::Reasons { graph, iis } = e else {
            panic!("expected reasons")
        };
        eprintln!(
            "{algo}: {:?} in {:?} ({} calls)",
            iis.constraint_ids,
            start.elapsed(),
            iis.stats.oracle_calls
        );
        let count = |k: ConstraintKind| graph.nodes.iter().filter(|n| n.kind == k).count();
        assert_eq!(count(ConstraintKind::Query), 1);
        assert!(count(ConstraintKind::Completion) >= 1);
        assert!(count(ConstraintKind::Precedence) >= 3);
        assert!(count(ConstraintKind::Resource) >= 1);
        assert!(graph.connectivity().connected);
        assert!(audit_iis(&asp.model, &iis.constraint_ids, None)
            .unwrap()
            .is_valid());
    }
}
