//! Acceptance runner: evaluates each criterion and reports one PASS/FAIL
//! line per criterion.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use exmip_core::bench::{
    desk_corpus, emit_report, generate_query, generated_corpus, load_dir, overhead_consistent,
    record_is_coherent, run_suite, BenchInstance, ReductionHistogram, SuiteConfig, RCPSP_KINDS,
    WDP_KINDS,
};
use exmip_core::graph::{assert_connected, dual_graph, to_reason_graph, Format};
use exmip_core::iis::{brute_force_smallest_iis, extract_iis, IisAlgorithm, BRUTE_FORCE_LIMIT};
use exmip_core::model::ConstraintKind;
use exmip_core::problems::{Family, Problem};
use exmip_core::query::{
    build_asp, classify_extended, translate_query, OutcomeCase, Query, MINIMALITY_ID,
};
use exmip_core::solver::{check_feasible, solve_milp, Feasibility, MilpStatus};
use exmip_core::verify::{audit_iis, enumerate, random_binary_milp, Enumeration};

use crate::commands::{self, ExplainArgs};
use crate::error::CliError;
use crate::pipeline;

const ALGORITHMS: [IisAlgorithm; 3] = [
    IisAlgorithm::Deletion,
    IisAlgorithm::Additive,
    IisAlgorithm::Smallest,
];
const MIN_PAIRS: usize = 60;
const MIN_BRUTE_CASES: usize = 30;
const ORACLE_MODELS: u64 = 200;
const SUITE_BUDGET: Duration = Duration::from_secs(600);

#[derive(Debug, Clone)]
pub struct Criterion {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct AcceptanceConfig {
    pub fixtures: PathBuf,
    pub seed: u64,
    /// Budget for every individual solve.
    pub time_limit: Option<Duration>,
}

impl AcceptanceConfig {
    pub fn new(fixtures: impl Into<PathBuf>) -> Self {
        AcceptanceConfig {
            fixtures: fixtures.into(),
            seed: 11,
            time_limit: Some(Duration::from_secs(60)),
        }
    }
}

/// Tallies over the (instance, query) corpus.
#[derive(Default)]
struct Corpus {
    pairs: usize,
    skipped: usize,
    families: BTreeSet<Family>,
    kinds: BTreeSet<String>,
    iis_total: usize,
    iis_valid: usize,
    connected: usize,
    membership_checked: usize,
    membership_ok: usize,
    trichotomy_ok: usize,
    size_checks: usize,
    size_ok: usize,
    brute_cases: usize,
    brute_ok: usize,
    reduction: Vec<(usize, usize)>,
    failures: Vec<String>,
    seconds: f64,
}

fn note(failures: &mut Vec<String>, msg: String) {
    if failures.len() < 5 {
        failures.push(msg);
    }
}

fn corpus_seed(seed: u64, instance: usize, kind: usize) -> u64 {
    seed.wrapping_mul(7_919)
        .wrapping_add(instance as u64 * 100 + kind as u64)
}

fn run_corpus(instances: &[BenchInstance], config: &AcceptanceConfig) -> Corpus {
    let start = Instant::now();
    let limit = config.time_limit;
    let mut c = Corpus::default();
    for (i, inst) in instances.iter().enumerate() {
        let problem = &inst.problem;
        let solved = match solve_milp(problem.model(), limit) {
            Ok(r) if r.status == MilpStatus::Optimal => r,
            other => {
                note(
                    &mut c.failures,
                    format!("{}: main solve {other:?}", inst.id),
                );
                continue;
            }
        };
        let optimum = solved.assignment.expect("optimal carries an assignment");
        let f_star = solved.objective.expect("optimal carries an objective");
        let kinds: &[&str] = match problem.family() {
            Family::Rcpsp => &RCPSP_KINDS,
            Family::Wdp => &WDP_KINDS,
            Family::Canonical => &[],
        };
        for (k, kind) in kinds.iter().enumerate() {
            let Some(query) =
                generate_query(kind, problem, &optimum, corpus_seed(config.seed, i, k))
            else {
                c.skipped += 1;
                continue;
            };
            c.pairs += 1;
            c.families.insert(problem.family());
            c.kinds.insert(kind.to_string());
            if let Err(e) = check_pair(problem, f_star, &query, limit, &mut c) {
                note(
                    &mut c.failures,
                    format!(
                        "{} {}: {e}",
                        inst.id,
                        serde_json::to_string(&query).unwrap_or_default()
                    ),
                );
            }
        }
    }
    c.seconds = start.elapsed().as_secs_f64();
    c
}

fn check_pair(
    problem: &Problem,
    f_star: f64,
    query: &Query,
    limit: Option<Duration>,
    c: &mut Corpus,
) -> Result<(), String> {
    let cq = translate_query(query, problem).map_err(|e| e.to_string())?;
    let case = classify_extended(problem.model(), f_star, &cq, limit)
        .map_err(|e| e.to_string())?
        .case;
    let asp = build_asp(problem.model(), f_star, cq).map_err(|e| e.to_string())?;
    let feasible = match check_feasible(&asp.model, limit).map_err(|e| e.to_string())? {
        Feasibility::Feasible(_) => true,
        Feasibility::Infeasible => false,
        Feasibility::Unknown => return Err("feasibility check timed out".into()),
    };
    if feasible == (case == OutcomeCase::Optimality) {
        c.trichotomy_ok += 1;
    } else {
        return Err(format!(
            "ASP feasible = {feasible} but the extended problem is {}",
            case.as_str()
        ));
    }
    if feasible {
        return Ok(());
    }

    let mut sizes = BTreeMap::new();
    for algo in ALGORITHMS {
        let iis = extract_iis(&asp.model, algo, limit).map_err(|e| format!("{algo}: {e}"))?;
        c.iis_total += 1;
        let audit = audit_iis(&asp.model, &iis.constraint_ids, limit).map_err(|e| e.to_string())?;
        if audit.is_valid() {
            c.iis_valid += 1;
        } else {
            note(
                &mut c.failures,
                format!("{algo} IIS {:?} fails audit {audit:?}", iis.constraint_ids),
            );
        }
        let graph = dual_graph(&iis.constraint_ids, &asp.model).map_err(|e| e.to_string())?;
        if assert_connected(&graph).connected {
            c.connected += 1;
        } else {
            note(
                &mut c.failures,
                format!(
                    "{algo} IIS {:?} has a disconnected dual graph",
                    iis.constraint_ids
                ),
            );
        }
        let has_query = iis
            .constraint_ids
            .iter()
            .any(|id| asp.query_ids.contains(id));
        let has_min = iis.contains(MINIMALITY_ID);
        c.membership_checked += 1;
        if has_query && (case != OutcomeCase::Suboptimality || has_min) {
            c.membership_ok += 1;
        } else {
            note(
                &mut c.failures,
                format!(
                    "{algo} IIS {:?} misses the query or minimality",
                    iis.constraint_ids
                ),
            );
        }
        sizes.insert(algo, iis.len());
    }
    let small = sizes[&IisAlgorithm::Smallest];
    c.size_checks += 1;
    if small <= sizes[&IisAlgorithm::Deletion] && small <= sizes[&IisAlgorithm::Additive] {
        c.size_ok += 1;
    } else {
        note(
            &mut c.failures,
            format!("smallest IIS larger than another: {sizes:?}"),
        );
    }
    c.reduction.push((sizes[&IisAlgorithm::Deletion], small));
    if asp.model.constraints.len() <= BRUTE_FORCE_LIMIT {
        let brute =
            brute_force_smallest_iis(&asp.model, BRUTE_FORCE_LIMIT).map_err(|e| e.to_string())?;
        c.brute_cases += 1;
        if brute.len() == small {
            c.brute_ok += 1;
        } else {
            note(
                &mut c.failures,
                format!("smallest {small} vs brute force {}", brute.len()),
            );
        }
    }
    Ok(())
}

fn failures_suffix(c: &Corpus) -> String {
    if c.failures.is_empty() {
        String::new()
    } else {
        format!("; first failures: {}", c.failures.join(" | "))
    }
}

fn corpus_criteria(c: &Corpus) -> Vec<Criterion> {
    let all_kinds = RCPSP_KINDS.len() + WDP_KINDS.len();
    let spans = c.families.len() == 2 && c.kinds.len() == all_kinds;
    let suffix = failures_suffix(c);
    vec![
        Criterion {
            name: "iis-validity",
            passed: c.pairs >= MIN_PAIRS && spans && c.iis_valid == c.iis_total && c.seconds < SUITE_BUDGET.as_secs_f64(),
            detail: format!(
                "{}/{} IISs pass the leave-one-out audit over {} pairs ({} families, {}/{} kinds, {} kinds without a target skipped) in {:.1}s{suffix}",
                c.iis_valid,
                c.iis_total,
                c.pairs,
                c.families.len(),
                c.kinds.len(),
                all_kinds,
                c.skipped,
                c.seconds
            ),
        },
        Criterion {
            name: "connectivity",
            passed: c.iis_total > 0 && c.connected == c.iis_total,
            detail: format!("{}/{} IIS dual graphs have one connected component", c.connected, c.iis_total),
        },
        Criterion {
            name: "query-membership",
            passed: c.membership_checked > 0 && c.membership_ok == c.membership_checked,
            detail: format!(
                "{}/{} IISs contain a query constraint, and the minimality constraint when suboptimal",
                c.membership_ok, c.membership_checked
            ),
        },
        Criterion {
            name: "trichotomy",
            passed: c.pairs > 0 && c.trichotomy_ok == c.pairs,
            detail: format!(
                "{}/{} pairs: assembled problem feasible exactly when the extended optimum matches",
                c.trichotomy_ok, c.pairs
            ),
        },
        Criterion {
            name: "smallest-iis",
            passed: c.brute_cases >= MIN_BRUTE_CASES && c.brute_ok == c.brute_cases && c.size_ok == c.size_checks,
            detail: format!(
                "{}/{} brute-force matches on problems with at most {} constraints; smallest no larger than deletion and additive on {}/{} queries",
                c.brute_ok, c.brute_cases, BRUTE_FORCE_LIMIT, c.size_ok, c.size_checks
            ),
        },
    ]
}

fn oracle_criterion() -> Criterion {
    let mut matched = 0;
    let mut checked = 0;
    let mut failures = Vec::new();
    for seed in 0..ORACLE_MODELS {
        let model = random_binary_milp(seed, 15, 12);
        let Some(truth) = enumerate(&model) else {
            continue;
        };
        checked += 1;
        let solved = solve_milp(&model, None);
        let feasible = check_feasible(&model, None);
        let ok = match (&truth, solved, feasible) {
            (Enumeration::Infeasible, Ok(r), Ok(Feasibility::Infeasible)) => {
                r.status == MilpStatus::Infeasible
            }
            (Enumeration::Optimal { objective, .. }, Ok(r), Ok(Feasibility::Feasible(_))) => {
                r.status == MilpStatus::Optimal
                    && r.objective.is_some_and(|v| (v - objective).abs() <= 1e-6)
            }
            _ => false,
        };
        if ok {
            matched += 1;
        } else {
            note(&mut failures, format!("seed {seed}"));
        }
    }
    Criterion {
        name: "solver-oracle",
        passed: checked >= ORACLE_MODELS as usize && matched == checked,
        detail: format!(
            "{matched}/{checked} random binary models (at most 15 variables, 12 constraints) match exhaustive enumeration{}",
            if failures.is_empty() { String::new() } else { format!("; mismatches: {}", failures.join(", ")) }
        ),
    }
}

fn bench_criterion(config: &AcceptanceConfig) -> Result<(Criterion, String), String> {
    let mut instances = load_dir(&config.fixtures.join("wdp")).map_err(|e| e.to_string())?;
    instances.extend(
        load_dir(&config.fixtures.join("rcpsp"))
            .map_err(|e| e.to_string())?
            .into_iter()
            .filter(
                |i| matches!(&i.problem, Problem::Rcpsp(p) if p.instance.activities.len() <= 10),
            ),
    );
    instances.extend(generated_corpus(config.seed, 5..=7));
    let suite = SuiteConfig {
        algorithms: vec![IisAlgorithm::Deletion, IisAlgorithm::Smallest],
        time_limit: config.time_limit,
        seed: config.seed,
        ..SuiteConfig::default()
    };
    let first = run_suite(&instances, &suite);
    let second = run_suite(
        &instances,
        &SuiteConfig {
            sequential: true,
            ..suite.clone()
        },
    );
    let report = emit_report(&first);

    let expected: usize = instances
        .iter()
        .map(|i| match i.problem.family() {
            Family::Rcpsp => RCPSP_KINDS.len(),
            Family::Wdp => WDP_KINDS.len(),
            Family::Canonical => 0,
        })
        .sum::<usize>()
        * suite.algorithms.len();
    let stable = first.len() == second.len()
        && first
            .iter()
            .zip(&second)
            .all(|(a, b)| a.structural() == b.structural());
    let overhead = overhead_consistent(&first, 1e-9);
    let coherent = first.iter().all(record_is_coherent);
    let kinds: BTreeSet<&str> = first
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| r.query_kind.as_str())
        .collect();
    let grouped = kinds.iter().all(|k| {
        report.rows.iter().any(|r| {
            r.query_kind == *k
                && r.distribution == "all"
                && [r.t_iis, r.t_milp, r.overhead]
                    .iter()
                    .all(|q| q.q1.is_finite() && q.median.is_finite() && q.q3.is_finite())
        })
    });
    let errors = first.iter().filter(|r| r.error.is_some()).count();
    let criterion = Criterion {
        name: "bench-protocol",
        passed: first.len() == expected && stable && overhead && coherent && grouped,
        detail: format!(
            "{} records (expected {expected}, {errors} without a target), quartiles for {} query kinds, overhead recomputes to 1e-9: {overhead}, structural fields stable across runs: {stable}",
            first.len(),
            kinds.len()
        ),
    };
    Ok((criterion, report.summary))
}

fn running_example(config: &AcceptanceConfig) -> Result<Criterion, String> {
    let path = config.fixtures.join("rcpsp/chain24.sm");
    let (problem, _) = pipeline::load_file(&path, None).map_err(|e| e.to_string())?;
    let f_star = solve_milp(problem.model(), config.time_limit)
        .map_err(|e| e.to_string())?
        .objective
        .ok_or("the fixture has no optimum")?;
    let query = Query::Q3 {
        activity: 24,
        time: 41,
    };
    let cq = translate_query(&query, &problem).map_err(|e| e.to_string())?;
    let asp = build_asp(problem.model(), f_star, cq).map_err(|e| e.to_string())?;
    let mut details = Vec::new();
    let mut passed = true;
    for algo in ALGORITHMS {
        let iis = extract_iis(&asp.model, algo, config.time_limit).map_err(|e| e.to_string())?;
        let graph = to_reason_graph(&iis, &asp.model).map_err(|e| e.to_string())?;
        let count = |k: ConstraintKind| graph.nodes.iter().filter(|n| n.kind == k).count();
        let (q, c, p, r) = (
            count(ConstraintKind::Query),
            count(ConstraintKind::Completion),
            count(ConstraintKind::Precedence),
            count(ConstraintKind::Resource),
        );
        let connected = graph.connectivity().connected;
        passed &= q == 1 && c >= 1 && p >= 3 && r >= 1 && connected;
        details.push(format!("{algo}: {q} query, {c} completion, {p} precedence, {r} resource, connected {connected}"));
    }
    Ok(Criterion {
        name: "running-example",
        passed,
        detail: format!("f* = {f_star}; {}", details.join("; ")),
    })
}

/// Runs solve, explain (JSON and DOT) and verify-iis through the command
/// layer on bundled fixtures.
fn cli_criterion(config: &AcceptanceConfig) -> Criterion {
    let scratch = std::env::temp_dir().join(format!("exmip-acceptance-{}", std::process::id()));
    let run = || -> Result<String, CliError> {
        std::fs::create_dir_all(&scratch).map_err(|source| CliError::Write {
            path: scratch.clone(),
            source,
        })?;
        let toy = config.fixtures.join("wdp/toy.cats");
        let solved: serde_json::Value =
            serde_json::from_str(&commands::solve(&toy, None, config.time_limit)?).expect("json");
        let artifact = scratch.join("artifact.json");
        let dot = commands::explain(&ExplainArgs {
            path: &toy,
            family: None,
            query: r#"{"kind":"W1","bid":1}"#,
            algorithm: IisAlgorithm::Deletion,
            format: Format::Dot,
            time_limit: config.time_limit,
            artifact: Some(&artifact),
        })?;
        commands::verify_iis(&artifact, config.time_limit)?;
        let three = config.fixtures.join("rcpsp/three.sm");
        commands::explain(&ExplainArgs {
            path: &three,
            family: None,
            query: r#"{"kind":"Q3","activity":4,"time":5}"#,
            algorithm: IisAlgorithm::Smallest,
            format: Format::Json,
            time_limit: config.time_limit,
            artifact: None,
        })?;
        Ok(format!(
            "solve f* = {}, explain emitted {} DOT lines, verify-iis accepted the artifact",
            solved["f_star"],
            dot.lines().count()
        ))
    };
    let result = run();
    let _ = std::fs::remove_dir_all(&scratch);
    match result {
        Ok(detail) => Criterion {
            name: "cli",
            passed: true,
            detail: format!("all criteria evaluated without a UI; {detail}"),
        },
        Err(e) => Criterion {
            name: "cli",
            passed: false,
            detail: format!("exit code {}: {e}", e.exit_code()),
        },
    }
}

fn failed(name: &'static str, e: String) -> Criterion {
    Criterion {
        name,
        passed: false,
        detail: e,
    }
}

/// Evaluates every criterion, handing each result to `report` as soon as it
/// is known. Extra lines (histogram, suite summary) go to `info`.
pub fn run(
    config: &AcceptanceConfig,
    report: &mut dyn FnMut(&Criterion),
    info: &mut dyn FnMut(&str),
) -> Vec<Criterion> {
    let mut out = Vec::new();
    let mut emit = |c: Criterion, out: &mut Vec<Criterion>| {
        report(&c);
        out.push(c);
    };
    match desk_corpus(&config.fixtures, config.seed) {
        Ok(instances) => {
            let corpus = run_corpus(&instances, config);
            for c in corpus_criteria(&corpus) {
                emit(c, &mut out);
            }
            info(&ReductionHistogram::from_pairs(&corpus.reduction).render());
        }
        Err(e) => {
            for name in [
                "iis-validity",
                "connectivity",
                "query-membership",
                "trichotomy",
                "smallest-iis",
            ] {
                emit(failed(name, e.to_string()), &mut out);
            }
        }
    }
    emit(oracle_criterion(), &mut out);
    match bench_criterion(config) {
        Ok((c, summary)) => {
            emit(c, &mut out);
            info(&summary);
        }
        Err(e) => emit(failed("bench-protocol", e), &mut out),
    }
    emit(
        running_example(config).unwrap_or_else(|e| failed("running-example", e)),
        &mut out,
    );
    emit(cli_criterion(config), &mut out);
    out
}
