use exmip_core::iis::IisAlgorithm;
use exmip_core::model::{ConstraintKind, Relation};
use exmip_core::problems::{
    build_rcpsp_milp, build_wdp_milp, compute_time_windows, generate_wdp, parse_cats, parse_psplib,
    Bid, Distribution, Problem, RcpspInstance, WdpInstance,
};
use exmip_core::query::{
    build_asp, classify_extended, explain, explain_asp, translate_query, Explanation, OutcomeCase,
    Query, QueryError, MINIMALITY_ID,
};
use exmip_core::solver::{check_feasible, solve_milp};
use exmip_core::verify::audit_iis;

const CHAIN24: &str = include_str!("../../../fixtures/rcpsp/chain24.sm");
const TOY_CATS: &str = include_str!("../../../fixtures/wdp/toy.cats");

fn rcpsp(inst: &RcpspInstance) -> (Problem, f64) {
    let tw = compute_time_windows(inst).unwrap();
    let built = build_rcpsp_milp(inst, &tw).unwrap();
    let f = solve_milp(&built.model, None).unwrap().objective.unwrap();
    (Problem::Rcpsp(built), f)
}

fn wdp(inst: &WdpInstance) -> (Problem, f64) {
    let built = build_wdp_milp(inst).unwrap();
    let f = solve_milp(&built.model, None).unwrap().objective.unwrap();
    (Problem::Wdp(built), f)
}

fn names(problem: &Problem, id: &str, cq: &[exmip_core::model::TaggedConstraint]) -> Vec<String> {
    let c = cq.iter().find(|c| c.id == id).unwrap();
    c.expr
        .terms()
        .iter()
        .map(|&(v, _)| problem.model().variables[v.0].name.clone())
        .collect()
}

#[test]
fn activity_queries_translate_to_window_variables() {
    let (problem, _) = rcpsp(&parse_psplib(CHAIN24).unwrap());
    let Problem::Rcpsp(p) = &problem else {
        unreachable!()
    };

    let cq = translate_query(
        &Query::Q1 {
            activity: 16,
            time: 23,
        },
        &problem,
    )
    .unwrap();
    assert_eq!(cq.len(), 1);
    assert_eq!(cq[0].id, "q");
    assert_eq!((cq[0].relation, cq[0].rhs), (Relation::Eq, 0.0));
    assert_eq!(names(&problem, "q", &cq), vec!["x_16_23"]);
    assert_eq!(cq[0].tag.kind, ConstraintKind::Query);

    let (ef, _) = p.window(24).unwrap();
    let cq = translate_query(
        &Query::Q3 {
            activity: 24,
            time: 41,
        },
        &problem,
    )
    .unwrap();
    let expected: Vec<String> = (ef..41).map(|t| format!("x_24_{t}")).collect();
    assert_eq!(names(&problem, "q", &cq), expected);
    assert_eq!((cq[0].relation, cq[0].rhs), (Relation::Eq, 1.0));

    let cq = translate_query(
        &Query::Q8 {
            activity: 16,
            other: 17,
            time: 23,
        },
        &problem,
    )
    .unwrap();
    let ids: Vec<&str> = cq.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(ids, vec!["q[1]", "q[2]"]);
    assert_eq!(names(&problem, "q[1]", &cq), vec!["x_17_23"]);
    assert_eq!(cq[0].rhs, 1.0);
    assert_eq!(names(&problem, "q[2]", &cq), vec!["x_16_23"]);
    assert_eq!(cq[1].rhs, 0.0);

    let cq = translate_query(
        &Query::Q5 {
            activities: vec![16, 17],
            time: 23,
        },
        &problem,
    )
    .unwrap();
    assert_eq!((cq[0].relation, cq[0].rhs), (Relation::Le, 1.0));
    let cq = translate_query(
        &Query::Q6 {
            activities: vec![16, 17],
            time: 23,
        },
        &problem,
    )
    .unwrap();
    assert_eq!((cq[0].relation, cq[0].rhs), (Relation::Eq, 2.0));
    let cq = translate_query(
        &Query::Q5None {
            activities: vec![16, 17],
            time: 23,
        },
        &problem,
    )
    .unwrap();
    assert_eq!((cq[0].relation, cq[0].rhs), (Relation::Eq, 0.0));
}

#[test]
fn invalid_queries_are_rejected() {
    let (problem, _) = rcpsp(&parse_psplib(CHAIN24).unwrap());
    let Problem::Rcpsp(p) = &problem else {
        unreachable!()
    };
    let (ef, lf) = p.window(24).unwrap();
    let err = |q: Query| translate_query(&q, &problem).unwrap_err();

    assert_eq!(
        err(Query::Q1 {
            activity: 26,
            time: 43
        }),
        QueryError::DummyActivity(26)
    );
    assert_eq!(
        err(Query::Q1 {
            activity: 1,
            time: 0
        }),
        QueryError::DummyActivity(1)
    );
    assert!(matches!(
        err(Query::Q1 {
            activity: 99,
            time: 3
        }),
        QueryError::UnknownEntity(_)
    ));
    assert_eq!(
        err(Query::Q3 {
            activity: 24,
            time: ef
        }),
        QueryError::TimeOutOfWindow {
            activity: 24,
            time: ef,
            ef,
            lf
        }
    );
    assert_eq!(
        err(Query::Q4 {
            activity: 24,
            time: lf
        }),
        QueryError::TimeOutOfWindow {
            activity: 24,
            time: lf,
            ef,
            lf
        }
    );
    assert!(matches!(
        err(Query::Q2 {
            activity: 24,
            time: lf + 1
        }),
        QueryError::TimeOutOfWindow { .. }
    ));
    assert!(matches!(
        err(Query::W1 { bid: 0 }),
        QueryError::WrongFamily { query: "W1", .. }
    ));
    assert!(matches!(
        err(Query::Q5 {
            activities: vec![],
            time: 3
        }),
        QueryError::InvalidGroup(_)
    ));
    assert!(matches!(
        err(Query::Q6 {
            activities: vec![16, 16],
            time: 23
        }),
        QueryError::InvalidGroup(_)
    ));

    let (auction, _) = wdp(&parse_cats(TOY_CATS).unwrap());
    assert!(matches!(
        translate_query(
            &Query::Q1 {
                activity: 1,
                time: 1
            },
            &auction
        )
        .unwrap_err(),
        QueryError::WrongFamily { query: "Q1", .. }
    ));
    assert!(matches!(
        translate_query(&Query::W3 { bids: vec![0, 7] }, &auction).unwrap_err(),
        QueryError::UnknownEntity(_)
    ));
}

#[test]
fn assembled_problem_layout() {
    let (problem, f_star) = wdp(&parse_cats(TOY_CATS).unwrap());
    assert_eq!(f_star, 9.0);
    let cq = translate_query(&Query::W4 { bid: 0, other: 2 }, &problem).unwrap();
    let asp = build_asp(problem.model(), f_star, cq).unwrap();
    let main = problem.model();
    assert_eq!(asp.model.constraints.len(), main.constraints.len() + 2 + 1);
    let ids: Vec<&str> = asp
        .model
        .constraints
        .iter()
        .map(|c| c.id.as_str())
        .collect();
    assert_eq!(ids.first(), Some(&MINIMALITY_ID));
    assert_eq!(&ids[ids.len() - 2..], ["q[1]", "q[2]"]);
    assert_eq!(asp.query_ids, vec!["q[1]", "q[2]"]);
    let min = asp.model.constraint(MINIMALITY_ID).unwrap();
    assert_eq!((min.relation, min.rhs), (Relation::Ge, 9.0));
    assert_eq!(min.tag.param("f"), Some("9"));

    // Nothing asked: the optimum itself satisfies the assembled problem.
    let empty = build_asp(
        main,
        f_star,
        translate_query(&Query::All { queries: vec![] }, &problem).unwrap(),
    )
    .unwrap();
    assert_eq!(empty.model.constraints.len(), main.constraints.len() + 1);
    assert!(check_feasible(&empty.model, None).unwrap().is_feasible());
}

fn twin_bids() -> WdpInstance {
    WdpInstance {
        goods: 1,
        bids: vec![
            Bid {
                id: 0,
                goods: vec![0],
                price: 5.0,
            },
            Bid {
                id: 1,
                goods: vec![0],
                price: 5.0,
            },
        ],
    }
}

#[test]
fn alternate_optimum_gets_a_notice() {
    let inst = twin_bids();
    let (problem, f_star) = wdp(&inst);
    let Problem::Wdp(p) = &problem else {
        unreachable!()
    };
    let winners = p.winners(
        &solve_milp(problem.model(), None)
            .unwrap()
            .assignment
            .unwrap(),
    );
    assert_eq!(winners.len(), 1);
    let q = Query::W1 { bid: winners[0] };
    let cq = translate_query(&q, &problem).unwrap();
    let outcome = classify_extended(problem.model(), f_star, &cq, None).unwrap();
    assert_eq!(outcome.case, OutcomeCase::Optimality);
    assert_eq!(outcome.extended_objective, Some(5.0));

    let (_, e) = explain(&problem, f_star, &q, IisAlgorithm::Deletion, None).unwrap();
    let Explanation::AlternateOptimum { notice } = e else {
        panic!("expected a notice")
    };
    assert_eq!(notice.objective, 5.0);
    let other = format!("x_b{}", 1 - winners[0]);
    assert_eq!(notice.witness.keys().collect::<Vec<_>>(), vec![&other]);
}

#[test]
fn contradictory_composite_is_infeasible() {
    let (problem, f_star) = rcpsp(&parse_psplib(CHAIN24).unwrap());
    let q = Query::All {
        queries: vec![
            Query::Q2 {
                activity: 16,
                time: 23,
            },
            Query::Q2 {
                activity: 16,
                time: 24,
            },
        ],
    };
    let cq = translate_query(&q, &problem).unwrap();
    let outcome = classify_extended(problem.model(), f_star, &cq, None).unwrap();
    assert_eq!(outcome.case, OutcomeCase::Infeasibility);
    // Completing at 24 alone already clashes with activity 17; the smallest
    // reason is the contradiction itself.
    let (asp, e) = explain(&problem, f_star, &q, IisAlgorithm::Smallest, None).unwrap();
    let Explanation::Reasons { iis, graph } = e else {
        panic!("expected reasons")
    };
    assert_eq!(iis.constraint_ids, vec!["comp[16]", "q[1]", "q[2]"]);
    assert!(graph.connectivity().connected);
    assert!(audit_iis(&asp.model, &iis.constraint_ids, None)
        .unwrap()
        .is_valid());
}

#[test]
fn suboptimal_query_needs_minimality() {
    // Two parallel activities finish together at 2; delaying one costs makespan.
    let inst = RcpspInstance::with_dummies(&[2, 2], &[vec![1], vec![1]], &[], &[2]);
    let (problem, f_star) = rcpsp(&inst);
    assert_eq!(f_star, 2.0);
    let q = Query::Q2 {
        activity: 1,
        time: 4,
    };
    let cq = translate_query(&q, &problem).unwrap();
    let outcome = classify_extended(problem.model(), f_star, &cq, None).unwrap();
    assert_eq!(outcome.case, OutcomeCase::Suboptimality);
    assert_eq!(outcome.extended_objective, Some(4.0));
    for algo in [
        IisAlgorithm::Deletion,
        IisAlgorithm::Additive,
        IisAlgorithm::Smallest,
    ] {
        let (asp, e) = explain(&problem, f_star, &q, algo, None).unwrap();
        let Explanation::Reasons { iis, graph } = e else {
            panic!("expected reasons")
        };
        assert!(
            iis.contains(MINIMALITY_ID),
            "{algo}: {:?}",
            iis.constraint_ids
        );
        assert!(iis.contains("q"));
        assert!(graph.connectivity().connected);
        assert!(audit_iis(&asp.model, &iis.constraint_ids, None)
            .unwrap()
            .is_valid());
    }
}

#[test]
fn vetoing_the_only_bid() {
    let inst = WdpInstance {
        goods: 1,
        bids: vec![Bid {
            id: 0,
            goods: vec![0],
            price: 3.0,
        }],
    };
    let (problem, f_star) = wdp(&inst);
    for algo in [
        IisAlgorithm::Deletion,
        IisAlgorithm::Additive,
        IisAlgorithm::Smallest,
        IisAlgorithm::Brute,
    ] {
        let (_, e) = explain(&problem, f_star, &Query::W1 { bid: 0 }, algo, None).unwrap();
        let Explanation::Reasons { iis, graph } = e else {
            panic!("expected reasons")
        };
        assert_eq!(iis.constraint_ids, vec![MINIMALITY_ID, "q"]);
        assert_eq!(graph.nodes.len(), 2);
        assert_eq!(graph.edges.len(), 1);
        assert_eq!(graph.root, vec!["q"]);
    }
}

/// Every explanation blames the query; a merely suboptimal answer also
/// blames the demand for optimality.
#[test]
fn explanations_always_involve_the_query() {
    let mut checked = 0;
    for (k, dist) in Distribution::ALL.into_iter().enumerate() {
        let inst = generate_wdp(dist, 6, 9, 40 + k as u64);
        let (problem, f_star) = wdp(&inst);
        let Problem::Wdp(p) = &problem else {
            unreachable!()
        };
        let winners = p.winners(
            &solve_milp(problem.model(), None)
                .unwrap()
                .assignment
                .unwrap(),
        );
        let losers: Vec<u32> = inst
            .bids
            .iter()
            .map(|b| b.id)
            .filter(|b| !winners.contains(b))
            .collect();
        let mut queries: Vec<Query> = winners.iter().map(|&bid| Query::W1 { bid }).collect();
        queries.extend(losers.iter().map(|&bid| Query::W2 { bid }));
        if let (Some(&w), Some(&l)) = (winners.first(), losers.first()) {
            queries.push(Query::W4 { bid: w, other: l });
        }
        for q in queries {
            let cq = translate_query(&q, &problem).unwrap();
            let case = classify_extended(problem.model(), f_star, &cq, None)
                .unwrap()
                .case;
            let asp = build_asp(problem.model(), f_star, cq).unwrap();
            match explain_asp(&asp, IisAlgorithm::Deletion, None).unwrap() {
                Explanation::Reasons { iis, .. } => {
                    assert_ne!(case, OutcomeCase::Optimality);
                    assert!(iis
                        .constraint_ids
                        .iter()
                        .any(|id| asp.query_ids.contains(id)));
                    if case == OutcomeCase::Suboptimality {
                        assert!(iis.contains(MINIMALITY_ID));
                    }
                }
                Explanation::AlternateOptimum { .. } => assert_eq!(case, OutcomeCase::Optimality),
            }
            checked += 1;
        }
    }
    assert!(checked >= 20, "only {checked} queries");
}
