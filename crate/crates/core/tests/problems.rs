use exmip_core::model::{ConstraintKind, DEFAULT_TOLERANCE};
use exmip_core::problems::{
    build_rcpsp_milp, build_wdp_milp, check_schedule, compute_time_windows, generate_rcpsp,
    generate_wdp, parse_cats, parse_psplib, Bid, Distribution, RcpspInstance, WdpInstance,
};
use exmip_core::solver::{solve_milp, MilpStatus};
use exmip_core::verify::{enumerate, Enumeration};
use proptest::prelude::*;

const THREE: &str = include_str!("../../../fixtures/rcpsp/three.sm");
const DIAMOND: &str = include_str!("../../../fixtures/rcpsp/diamond.sm");
const CHAIN24: &str = include_str!("../../../fixtures/rcpsp/chain24.sm");
const TOY_CATS: &str = include_str!("../../../fixtures/wdp/toy.cats");

fn makespan(inst: &RcpspInstance) -> Option<f64> {
    let tw = compute_time_windows(inst).unwrap();
    let built = build_rcpsp_milp(inst, &tw).unwrap();
    let r = solve_milp(&built.model, None).unwrap();
    if let Some(a) = &r.assignment {
        let c = built.decode(a).expect("one completion per activity");
        check_schedule(inst, &c).unwrap();
    }
    r.objective
}

#[test]
fn chain_makespan_is_its_length() {
    let inst = RcpspInstance::with_dummies(
        &[2, 3, 1],
        &[vec![1], vec![1], vec![1]],
        &[(1, 2), (2, 3)],
        &[5],
    );
    assert_eq!(makespan(&inst), Some(6.0));
}

#[test]
fn unit_capacity_serializes_two_activities() {
    let inst = RcpspInstance::with_dummies(&[2, 2], &[vec![1], vec![1]], &[], &[1]);
    assert_eq!(makespan(&inst), Some(4.0));
}

#[test]
fn three_activity_fixture() {
    let inst = parse_psplib(THREE).unwrap();
    assert_eq!(inst.activities.len(), 5);
    assert_eq!(inst.capacities, vec![1]);
    let durations: Vec<u32> = inst.activities.iter().map(|a| a.duration).collect();
    assert_eq!(durations, vec![0, 2, 3, 1, 0]);
    assert_eq!(makespan(&inst), Some(6.0));
}

/// Earliest/latest finish times of the diamond, found by enumerating every
/// completion-time vector within the horizon that respects precedence.
#[test]
fn diamond_windows_match_enumeration() {
    let inst = parse_psplib(DIAMOND).unwrap();
    let tw = compute_time_windows(&inst).unwrap();
    let n = inst.activities.len();
    let h = inst.horizon;
    let mut ef = vec![u32::MAX; n];
    let mut lf = vec![0u32; n];
    let mut c = vec![0u32; n];
    fn walk(
        inst: &RcpspInstance,
        k: usize,
        c: &mut Vec<u32>,
        ef: &mut Vec<u32>,
        lf: &mut Vec<u32>,
        h: u32,
    ) {
        if k == c.len() {
            let ok = inst.precedence.iter().all(|&(p, s)| {
                let pi = inst.index_of(p).unwrap();
                let si = inst.index_of(s).unwrap();
                c[si] >= c[pi] + inst.activities[si].duration
            });
            if ok {
                for i in 0..c.len() {
                    ef[i] = ef[i].min(c[i]);
                    lf[i] = lf[i].max(c[i]);
                }
            }
            return;
        }
        for t in inst.activities[k].duration..=h {
            c[k] = t;
            walk(inst, k + 1, c, ef, lf, h);
        }
    }
    walk(&inst, 0, &mut c, &mut ef, &mut lf, h);
    assert_eq!(tw.ef, ef);
    assert_eq!(tw.lf, lf);
}

#[test]
fn shrinking_horizon_never_helps() {
    let mut inst = parse_psplib(THREE).unwrap();
    inst.horizon = 9;
    let loose = makespan(&inst).unwrap();
    inst.horizon = 6;
    let tight = makespan(&inst).unwrap();
    assert_eq!(loose, tight);
    inst.horizon = 5;
    let tw = compute_time_windows(&inst).unwrap();
    let built = build_rcpsp_milp(&inst, &tw).unwrap();
    assert_eq!(
        solve_milp(&built.model, None).unwrap().status,
        MilpStatus::Infeasible
    );
}

#[test]
fn chain24_fixture_schedule() {
    let inst = parse_psplib(CHAIN24).unwrap();
    assert_eq!(inst.activities.len(), 26);
    assert_eq!(inst.capacities.len(), 4);
    let tw = compute_time_windows(&inst).unwrap();
    let built = build_rcpsp_milp(&inst, &tw).unwrap();
    let expected_vars: u32 = tw.ef.iter().zip(&tw.lf).map(|(e, l)| l - e + 1).sum();
    assert_eq!(built.model.num_vars(), expected_vars as usize);
    let r = solve_milp(&built.model, None).unwrap();
    assert_eq!(r.objective, Some(43.0));
    let a = r.assignment.unwrap();
    assert!(built.model.is_feasible_assignment(&a, DEFAULT_TOLERANCE));
    let table = built.schedule_table(&a).unwrap();
    let row = |id: u32| table.iter().find(|r| r.activity == id).unwrap().clone();
    assert_eq!(row(24).completion, 41);
    assert_eq!((row(16).start, row(16).completion), (14, 23));
    assert_eq!(row(22).predecessors, vec![16, 17]);
    assert_eq!(row(17).resources, vec![0, 0, 0, 8]);
    check_schedule(&inst, &built.decode(&a).unwrap()).unwrap();

    // Activities 16 and 17 compete for resource 4 at time 23; 22 does not use it.
    let res = built.model.constraint("res[4,23]").unwrap();
    assert_eq!(res.tag.kind, ConstraintKind::Resource);
    assert_eq!(res.tag.list("acts"), vec!["16", "17"]);
}

#[test]
fn generated_schedules_simulate_cleanly() {
    for seed in 0..15 {
        let inst = generate_rcpsp(6, 2, seed).unwrap();
        assert!(makespan(&inst).is_some(), "seed {seed}");
    }
}

#[test]
fn wdp_examples() {
    let toy = parse_cats(TOY_CATS).unwrap();
    assert_eq!(toy.goods, 2);
    assert_eq!(
        toy.bids,
        vec![
            Bid {
                id: 0,
                goods: vec![0],
                price: 5.0
            },
            Bid {
                id: 1,
                goods: vec![1],
                price: 4.0
            },
            Bid {
                id: 2,
                goods: vec![0, 1],
                price: 8.0
            },
        ]
    );
    let solve = |inst: &WdpInstance| {
        let built = build_wdp_milp(inst).unwrap();
        let r = solve_milp(&built.model, None).unwrap();
        (r.objective.unwrap(), built.winners(&r.assignment.unwrap()))
    };
    assert_eq!(solve(&toy).0, 9.0);

    let single = WdpInstance {
        goods: 1,
        bids: vec![Bid {
            id: 7,
            goods: vec![0],
            price: 3.5,
        }],
    };
    assert_eq!(solve(&single), (3.5, vec![7]));

    let pair = WdpInstance {
        goods: 1,
        bids: vec![
            Bid {
                id: 0,
                goods: vec![0],
                price: 2.0,
            },
            Bid {
                id: 1,
                goods: vec![0],
                price: 6.0,
            },
        ],
    };
    assert_eq!(solve(&pair), (6.0, vec![1]));

    let empty = parse_cats("goods 3\nbids 0\n").unwrap();
    assert_eq!(solve(&empty).0, 0.0);

    let commented = parse_cats(&TOY_CATS.replace("goods 2", "% note\ngoods 2\n% more")).unwrap();
    assert_eq!(commented, toy);
}

#[test]
fn wdp_matches_enumeration() {
    for d in Distribution::ALL {
        for seed in 0..5 {
            let inst = generate_wdp(d, 8, 15, seed);
            let built = build_wdp_milp(&inst).unwrap();
            let r = solve_milp(&built.model, None).unwrap();
            match enumerate(&built.model).unwrap() {
                Enumeration::Optimal { objective, .. } => {
                    assert!(
                        (r.objective.unwrap() - objective).abs() < 1e-6,
                        "{d} {seed}"
                    )
                }
                Enumeration::Infeasible => panic!("set packing is always feasible"),
            }
        }
    }
}

#[test]
fn bundled_auction_fixtures_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/wdp");
    let mut tags = std::collections::BTreeSet::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let inst = parse_cats(&std::fs::read_to_string(&path).unwrap()).unwrap();
        inst.validate().unwrap();
        let name = path.file_stem().unwrap().to_string_lossy().to_string();
        if let Some((tag, _)) = name.split_once('-') {
            tags.insert(tag.to_string());
            assert!((10..=30).contains(&inst.bids.len()));
        }
    }
    assert_eq!(tags.len(), 4);
}

proptest! {
    #[test]
    fn psplib_parser_is_total(s in "\\PC{0,300}") {
        let _ = parse_psplib(&s);
    }

    #[test]
    fn psplib_parser_survives_mutations(cut in 0usize..2000, junk in "[0-9 a-z*:-]{0,12}") {
        let at = cut.min(THREE.len());
        let text = format!("{}{}{}", &THREE[..at], junk, &THREE[at..]);
        let _ = parse_psplib(&text);
    }

    #[test]
    fn cats_parser_is_total(s in "\\PC{0,300}") {
        let _ = parse_cats(&s);
    }
}
