//! Desk-scale benchmark protocol: per-instance solve times, per-query IIS
//! times, overhead ratios and IIS size comparisons between algorithms.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::iis::IisAlgorithm;
use crate::problems::{
    build_rcpsp_milp, build_wdp_milp, compute_time_windows, generate_rcpsp, generate_wdp,
    load_problem, Distribution, Family, Problem, RcpspModel, WdpModel,
};
use crate::query::{
    build_asp, classify_extended, explain_asp, translate_query, Explanation, OutcomeCase, Query,
};
use crate::solver::{solve_milp, MilpStatus};
use crate::verify::audit_iis;

/// Query kinds that apply to scheduling instances.
pub const RCPSP_KINDS: [&str; 9] = ["Q1", "Q2", "Q3", "Q4", "Q5", "Q5none", "Q6", "Q7", "Q8"];
/// Query kinds that apply to auctions.
pub const WDP_KINDS: [&str; 4] = ["W1", "W2", "W3", "W4"];

/// Column order of the records CSV.
pub const CSV_COLUMNS: [&str; 16] = [
    "instance",
    "family",
    "distribution",
    "query_kind",
    "query",
    "algorithm",
    "seed",
    "outcome",
    "asp_constraints",
    "iis_size",
    "iis",
    "verified",
    "t_milp",
    "t_iis",
    "overhead",
    "error",
];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {message}")]
    Load { path: String, message: String },
}

#[derive(Debug, Clone)]
pub struct BenchInstance {
    pub id: String,
    pub distribution: String,
    pub problem: Problem,
}

impl BenchInstance {
    /// Loads a `.sm` (PSPLIB) or `.cats` file. Auction files named after a
    /// distribution (`paths-1.cats`) carry that tag.
    pub fn load(path: &Path) -> Result<BenchInstance, BenchError> {
        let err = |message: String| BenchError::Load {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("instance")
            .to_string();
        let family = path
            .extension()
            .and_then(|e| e.to_str())
            .and_then(Family::from_extension)
            .filter(|f| *f != Family::Canonical)
            .ok_or_else(|| err("expected a .sm or .cats file".into()))?;
        let problem = load_problem(family, &text).map_err(|e| err(e.to_string()))?;
        let distribution = match family {
            Family::Rcpsp => "psplib",
            _ => {
                let tag = stem.split('-').next().unwrap_or_default();
                if tag.parse::<Distribution>().is_ok() {
                    tag
                } else {
                    "cats"
                }
            }
        };
        Ok(BenchInstance {
            distribution: distribution.into(),
            id: stem,
            problem,
        })
    }
}

/// Generated scheduling instances with `sizes` activities, plus one
/// generated auction per distribution tag.
pub fn generated_corpus(seed: u64, sizes: RangeInclusive<usize>) -> Vec<BenchInstance> {
    let mut out = Vec::new();
    for (k, n) in sizes.enumerate() {
        let s = seed + k as u64;
        let inst = generate_rcpsp(n, 2, s).expect("generated instances are schedulable");
        let tw = compute_time_windows(&inst).expect("generated instances have windows");
        let built = build_rcpsp_milp(&inst, &tw).expect("generated instances build");
        out.push(BenchInstance {
            id: format!("rcpsp-n{n}-s{s}"),
            distribution: "generated".into(),
            problem: Problem::Rcpsp(built),
        });
    }
    for (k, dist) in Distribution::ALL.into_iter().enumerate() {
        let s = seed + 100 + k as u64;
        let inst = generate_wdp(dist, 8, 12, s);
        let built = build_wdp_milp(&inst).expect("generated auctions build");
        out.push(BenchInstance {
            id: format!("{}-g8-b12-s{s}", dist.as_str()),
            distribution: dist.as_str().into(),
            problem: Problem::Wdp(built),
        });
    }
    out
}

/// Every `.sm` and `.cats` file in `dir`, in file name order.
pub fn load_dir(dir: &Path) -> Result<Vec<BenchInstance>, BenchError> {
    let entries = std::fs::read_dir(dir).map_err(|e| BenchError::Load {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("sm" | "cats")))
        .collect();
    paths.sort();
    paths.iter().map(|p| BenchInstance::load(p)).collect()
}

/// Largest scheduling fixture (real activities) admitted to the desk corpus.
pub const DESK_MAX_ACTIVITIES: usize = 12;

/// The bundled fixtures under `fixtures/rcpsp` and `fixtures/wdp` (scheduling
/// fixtures up to [`DESK_MAX_ACTIVITIES`]) plus generated instances with 5 to
/// 9 activities.
pub fn desk_corpus(fixtures: &Path, seed: u64) -> Result<Vec<BenchInstance>, BenchError> {
    let mut out: Vec<BenchInstance> = load_dir(&fixtures.join("rcpsp"))?
        .into_iter()
        .filter(|i| match &i.problem {
            Problem::Rcpsp(p) => p.instance.activities.len() <= DESK_MAX_ACTIVITIES + 2,
            _ => true,
        })
        .collect();
    out.extend(load_dir(&fixtures.join("wdp"))?);
    out.extend(generated_corpus(seed, 5..=9));
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    /// Kinds to run; kinds that do not apply to an instance's family are skipped.
    pub kinds: Vec<String>,
    pub algorithms: Vec<IisAlgorithm>,
    /// Budget for each solve and each explanation.
    pub time_limit: Option<Duration>,
    pub seed: u64,
    /// Audit every IIS by leave-one-out.
    pub verify: bool,
    /// Run records one at a time for clean timings.
    pub sequential: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            kinds: RCPSP_KINDS
                .iter()
                .chain(WDP_KINDS.iter())
                .map(|k| k.to_string())
                .collect(),
            algorithms: vec![
                IisAlgorithm::Deletion,
                IisAlgorithm::Additive,
                IisAlgorithm::Smallest,
            ],
            time_limit: Some(Duration::from_secs(60)),
            seed: 7,
            verify: false,
            sequential: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub instance: String,
    pub family: Family,
    pub distribution: String,
    pub query_kind: String,
    /// Query JSON; empty when no query could be generated.
    pub query: String,
    pub algorithm: IisAlgorithm,
    pub seed: u64,
    /// Outcome of the extended problem, or `error`.
    pub outcome: String,
    pub asp_constraints: Option<usize>,
    pub iis_size: Option<usize>,
    /// IIS member ids separated by spaces.
    pub iis: String,
    pub verified: Option<bool>,
    /// Seconds to solve the instance to optimality.
    pub t_milp: f64,
    /// Seconds to answer the query (feasibility check, IIS and graph).
    pub t_iis: f64,
    pub overhead: Option<f64>,
    pub error: Option<String>,
}

impl BenchRecord {
    pub fn overhead_of(t_iis: f64, t_milp: f64) -> Option<f64> {
        (t_iis > 0.0 && t_milp > 0.0).then(|| t_iis / t_milp)
    }

    /// The record without its timing fields, for run-to-run comparisons.
    pub fn structural(&self) -> BenchRecord {
        BenchRecord {
            t_milp: 0.0,
            t_iis: 0.0,
            overhead: None,
            ..self.clone()
        }
    }
}

struct Solved {
    f_star: f64,
    assignment: crate::model::Assignment,
    t_milp: f64,
}

/// Activity, realized completion time and completion window.
type Realized = (u32, u32, (u32, u32));

fn realized_completions(p: &RcpspModel, a: &crate::model::Assignment) -> Vec<Realized> {
    let completion = p.decode(a).unwrap_or_default();
    p.instance
        .activities
        .iter()
        .zip(completion)
        .filter(|(act, _)| !p.instance.is_dummy(act.id))
        .map(|(act, c)| (act.id, c, p.window(act.id).expect("activity exists")))
        .collect()
}

/// Draws a query of `kind` from the optimal solution: veto kinds target
/// realized assignments, enforce kinds unrealized ones.
pub fn generate_query(
    kind: &str,
    problem: &Problem,
    optimum: &crate::model::Assignment,
    seed: u64,
) -> Option<Query> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match problem {
        Problem::Rcpsp(p) => rcpsp_query(kind, p, optimum, &mut rng),
        Problem::Wdp(p) => wdp_query(kind, p, optimum, &mut rng),
        Problem::Canonical(_) => None,
    }
}

fn rcpsp_query(
    kind: &str,
    p: &RcpspModel,
    optimum: &crate::model::Assignment,
    rng: &mut ChaCha8Rng,
) -> Option<Query> {
    let acts = realized_completions(p, optimum);
    let pick = |rng: &mut ChaCha8Rng, ok: &dyn Fn(&Realized) -> bool| {
        let pool: Vec<_> = acts.iter().filter(|a| ok(a)).copied().collect();
        pool.choose(rng).copied()
    };
    let other_time = |rng: &mut ChaCha8Rng, (_, c, (ef, lf)): Realized| {
        let times: Vec<u32> = (ef..=lf).filter(|&t| t != c).collect();
        times.choose(rng).copied()
    };
    match kind {
        "Q1" => pick(rng, &|_| true).map(|(j, c, _)| Query::Q1 {
            activity: j,
            time: c,
        }),
        "Q2" => {
            let a = pick(rng, &|&(_, _, (ef, lf))| lf > ef)?;
            Some(Query::Q2 {
                activity: a.0,
                time: other_time(rng, a)?,
            })
        }
        "Q3" => {
            let (j, c, (ef, _)) = pick(rng, &|&(_, c, (ef, _))| c > ef)?;
            Some(Query::Q3 {
                activity: j,
                time: rng.gen_range(ef + 1..=c),
            })
        }
        "Q4" => {
            let (j, c, (_, lf)) = pick(rng, &|&(_, c, (_, lf))| c < lf)?;
            Some(Query::Q4 {
                activity: j,
                time: rng.gen_range(c..lf),
            })
        }
        "Q5" | "Q5none" => {
            let (_, t, _) = pick(rng, &|_| true)?;
            let mut group: Vec<u32> = acts.iter().filter(|a| a.1 == t).map(|a| a.0).collect();
            group.shuffle(rng);
            group.truncate(2);
            group.sort_unstable();
            Some(if kind == "Q5" {
                Query::Q5 {
                    activities: group,
                    time: t,
                }
            } else {
                Query::Q5None {
                    activities: group,
                    time: t,
                }
            })
        }
        "Q6" => {
            // Two activities that could both complete at t but do not.
            let mut pairs = Vec::new();
            for (i, a) in acts.iter().enumerate() {
                for b in &acts[i + 1..] {
                    let (lo, hi) = (a.2 .0.max(b.2 .0), a.2 .1.min(b.2 .1));
                    for t in lo..=hi {
                        if a.1 != t || b.1 != t {
                            pairs.push((a.0, b.0, t));
                        }
                    }
                }
            }
            let &(a, b, t) = pairs.choose(rng)?;
            Some(Query::Q6 {
                activities: vec![a, b],
                time: t,
            })
        }
        "Q7" => {
            let a = pick(rng, &|&(_, _, (ef, lf))| lf > ef)?;
            Some(Query::Q7 {
                activity: a.0,
                time: a.1,
                alt_time: other_time(rng, a)?,
            })
        }
        "Q8" => {
            let mut pairs = Vec::new();
            for a in &acts {
                for b in &acts {
                    if a.0 != b.0 && b.1 != a.1 && (b.2 .0..=b.2 .1).contains(&a.1) {
                        pairs.push((a.0, b.0, a.1));
                    }
                }
            }
            let &(activity, other, time) = pairs.choose(rng)?;
            Some(Query::Q8 {
                activity,
                other,
                time,
            })
        }
        _ => None,
    }
}

fn wdp_query(
    kind: &str,
    p: &WdpModel,
    optimum: &crate::model::Assignment,
    rng: &mut ChaCha8Rng,
) -> Option<Query> {
    let winners = p.winners(optimum);
    let losers: Vec<u32> = p
        .instance
        .bids
        .iter()
        .map(|b| b.id)
        .filter(|b| !winners.contains(b))
        .collect();
    match kind {
        "W1" => winners.choose(rng).map(|&bid| Query::W1 { bid }),
        "W2" => losers.choose(rng).map(|&bid| Query::W2 { bid }),
        "W3" => {
            let mut bids: Vec<u32> = winners.choose_multiple(rng, 2).copied().collect();
            bids.sort_unstable();
            (!bids.is_empty()).then_some(Query::W3 { bids })
        }
        "W4" => Some(Query::W4 {
            bid: *winners.choose(rng)?,
            other: *losers.choose(rng)?,
        }),
        _ => None,
    }
}

fn applies(kind: &str, family: Family) -> bool {
    match family {
        Family::Rcpsp => RCPSP_KINDS.contains(&kind),
        Family::Wdp => WDP_KINDS.contains(&kind),
        Family::Canonical => false,
    }
}

fn task_seed(base: u64, instance: usize, kind: usize) -> u64 {
    base.wrapping_mul(1_000_003)
        .wrapping_add(instance as u64 * 1_000)
        .wrapping_add(kind as u64)
}

struct Task<'a> {
    instance: &'a BenchInstance,
    solved: &'a Result<Solved, String>,
    kind: &'a str,
    algorithm: IisAlgorithm,
    seed: u64,
}

fn run_task(task: &Task, config: &SuiteConfig) -> BenchRecord {
    let mut record = BenchRecord {
        instance: task.instance.id.clone(),
        family: task.instance.problem.family(),
        distribution: task.instance.distribution.clone(),
        query_kind: task.kind.to_string(),
        query: String::new(),
        algorithm: task.algorithm,
        seed: task.seed,
        outcome: "error".into(),
        asp_constraints: None,
        iis_size: None,
        iis: String::new(),
        verified: None,
        t_milp: 0.0,
        t_iis: 0.0,
        overhead: None,
        error: None,
    };
    let solved = match task.solved {
        Ok(s) => s,
        Err(e) => {
            record.error = Some(e.clone());
            return record;
        }
    };
    record.t_milp = solved.t_milp;
    let problem = &task.instance.problem;
    let Some(query) = generate_query(task.kind, problem, &solved.assignment, task.seed) else {
        record.error = Some(format!("no {} target in the optimal solution", task.kind));
        return record;
    };
    record.query = serde_json::to_string(&query).expect("queries serialize");
    let result = (|| -> Result<(), String> {
        let cq = translate_query(&query, problem).map_err(|e| e.to_string())?;
        let outcome = classify_extended(problem.model(), solved.f_star, &cq, config.time_limit)
            .map_err(|e| e.to_string())?;
        record.outcome = outcome.case.as_str().into();
        let asp = build_asp(problem.model(), solved.f_star, cq).map_err(|e| e.to_string())?;
        record.asp_constraints = Some(asp.model.constraints.len());
        let start = Instant::now();
        let explanation =
            explain_asp(&asp, task.algorithm, config.time_limit).map_err(|e| e.to_string())?;
        record.t_iis = start.elapsed().as_secs_f64();
        record.overhead = BenchRecord::overhead_of(record.t_iis, record.t_milp);
        if let Explanation::Reasons { iis, .. } = explanation {
            record.iis_size = Some(iis.len());
            record.iis = iis.constraint_ids.join(" ");
            if config.verify {
                let audit = audit_iis(&asp.model, &iis.constraint_ids, config.time_limit)
                    .map_err(|e| e.to_string())?;
                record.verified = Some(audit.is_valid());
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        record.error = Some(e);
    }
    record
}

fn solve_instance(instance: &BenchInstance, limit: Option<Duration>) -> Result<Solved, String> {
    let start = Instant::now();
    let r = solve_milp(instance.problem.model(), limit).map_err(|e| e.to_string())?;
    let t_milp = start.elapsed().as_secs_f64();
    match (r.status, r.assignment, r.objective) {
        (MilpStatus::Optimal, Some(assignment), Some(f_star)) => Ok(Solved {
            f_star,
            assignment,
            t_milp,
        }),
        (status, _, _) => Err(format!("main problem is {status:?}").to_lowercase()),
    }
}

/// One record per (instance, applicable query kind, algorithm). Failures are
/// captured in the record and never abort the suite. Records come back in
/// task order whether or not they run concurrently.
pub fn run_suite(instances: &[BenchInstance], config: &SuiteConfig) -> Vec<BenchRecord> {
    let solve = |i: &BenchInstance| solve_instance(i, config.time_limit);
    let solved: Vec<Result<Solved, String>> = if config.sequential {
        instances.iter().map(solve).collect()
    } else {
        instances.par_iter().map(solve).collect()
    };
    let mut tasks = Vec::new();
    for (i, instance) in instances.iter().enumerate() {
        for (k, kind) in config.kinds.iter().enumerate() {
            if !applies(kind, instance.problem.family()) {
                continue;
            }
            for &algorithm in &config.algorithms {
                tasks.push(Task {
                    instance,
                    solved: &solved[i],
                    kind,
                    algorithm,
                    seed: task_seed(config.seed, i, k),
                });
            }
        }
    }
    if config.sequential {
        tasks.iter().map(|t| run_task(t, config)).collect()
    } else {
        tasks.par_iter().map(|t| run_task(t, config)).collect()
    }
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub mean: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Quartiles {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Quartiles {
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            mean: v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub query_kind: String,
    /// `all` for the per-kind aggregate.
    pub distribution: String,
    pub records: usize,
    pub t_iis: Quartiles,
    pub t_milp: Quartiles,
    pub overhead: Quartiles,
}

/// Timing quartiles of successful records grouped by query kind and
/// distribution, plus one `all` row per kind. Kinds are sorted by mean IIS
/// time.
pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let ok: Vec<&BenchRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let mut groups: BTreeMap<(String, String), Vec<&BenchRecord>> = BTreeMap::new();
    for r in &ok {
        groups
            .entry((r.query_kind.clone(), "all".into()))
            .or_default()
            .push(r);
        groups
            .entry((r.query_kind.clone(), r.distribution.clone()))
            .or_default()
            .push(r);
    }
    let row = |(kind, dist): &(String, String), rs: &[&BenchRecord]| {
        let col = |f: fn(&BenchRecord) -> Option<f64>| {
            Quartiles::of(&rs.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
        };
        SummaryRow {
            query_kind: kind.clone(),
            distribution: dist.clone(),
            records: rs.len(),
            t_iis: col(|r| Some(r.t_iis)),
            t_milp: col(|r| Some(r.t_milp)),
            overhead: col(|r| r.overhead),
        }
    };
    let mut rows: Vec<SummaryRow> = groups.iter().map(|(k, rs)| row(k, rs)).collect();
    let mean_of_kind: BTreeMap<String, f64> = rows
        .iter()
        .filter(|r| r.distribution == "all")
        .map(|r| (r.query_kind.clone(), r.t_iis.mean))
        .collect();
    rows.sort_by(|a, b| {
        mean_of_kind[&a.query_kind]
            .total_cmp(&mean_of_kind[&b.query_kind])
            .then(a.query_kind.cmp(&b.query_kind))
            .then((a.distribution != "all").cmp(&(b.distribution != "all")))
            .then(a.distribution.cmp(&b.distribution))
    });
    rows
}

/// Relative size reduction of the smallest IIS against the deletion filter's
/// IIS on the same query, binned by tenths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionHistogram {
    /// Bin labels: `0%`, `(0,10]%`, ..., `>50%`.
    pub bins: Vec<(String, usize)>,
    pub pairs: usize,
}

impl ReductionHistogram {
    pub fn equal_share(&self) -> f64 {
        if self.pairs == 0 {
            return f64::NAN;
        }
        self.bins[0].1 as f64 / self.pairs as f64
    }
}

impl ReductionHistogram {
    /// Bins `(deletion size, smallest size)` pairs.
    pub fn from_pairs(pairs: &[(usize, usize)]) -> ReductionHistogram {
        let labels = [
            "0%", "(0,10]%", "(10,20]%", "(20,30]%", "(30,40]%", "(40,50]%", ">50%",
        ];
        let mut counts = [0usize; 7];
        for &(del, small) in pairs {
            let reduction = 100.0 * (1.0 - small as f64 / del as f64);
            let bin = if reduction <= 1e-9 {
                0
            } else {
                (((reduction - 1e-9) / 10.0).ceil() as usize).clamp(1, 6)
            };
            counts[bin] += 1;
        }
        ReductionHistogram {
            bins: labels.iter().map(|l| l.to_string()).zip(counts).collect(),
            pairs: pairs.len(),
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "IIS size reduction, smallest vs deletion ({} queries)",
            self.pairs
        );
        for (label, count) in &self.bins {
            let share = if self.pairs == 0 {
                0.0
            } else {
                *count as f64 / self.pairs as f64
            };
            let _ = writeln!(
                s,
                "{:>9} {:>5.1}% {}",
                label,
                100.0 * share,
                "#".repeat((share * 40.0).round() as usize)
            );
        }
        s
    }
}

pub fn reduction_histogram(records: &[BenchRecord]) -> ReductionHistogram {
    let mut by_query: BTreeMap<(&str, &str, &str), BTreeMap<IisAlgorithm, usize>> = BTreeMap::new();
    for r in records {
        if let Some(size) = r.iis_size {
            by_query
                .entry((r.instance.as_str(), r.query_kind.as_str(), r.query.as_str()))
                .or_default()
                .insert(r.algorithm, size);
        }
    }
    let pairs: Vec<(usize, usize)> = by_query
        .values()
        .filter_map(|sizes| {
            Some((
                *sizes.get(&IisAlgorithm::Deletion)?,
                *sizes.get(&IisAlgorithm::Smallest)?,
            ))
        })
        .collect();
    ReductionHistogram::from_pairs(&pairs)
}

fn csv_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9}")).unwrap_or_default()
}

/// One header line plus one line per record, columns as in [`CSV_COLUMNS`].
pub fn records_csv(records: &[BenchRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in records {
        w.write_record([
            r.instance.clone(),
            r.family.as_str().to_string(),
            r.distribution.clone(),
            r.query_kind.clone(),
            r.query.clone(),
            r.algorithm.to_string(),
            r.seed.to_string(),
            r.outcome.clone(),
            r.asp_constraints.map(|n| n.to_string()).unwrap_or_default(),
            r.iis_size.map(|n| n.to_string()).unwrap_or_default(),
            r.iis.clone(),
            r.verified.map(|b| b.to_string()).unwrap_or_default(),
            csv_cell(Some(r.t_milp)),
            csv_cell(Some(r.t_iis)),
            csv_cell(r.overhead),
            r.error.clone().unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

#[derive(Debug, Clone)]
pub struct Report {
    pub csv: String,
    pub summary: String,
    pub rows: Vec<SummaryRow>,
    pub histogram: ReductionHistogram,
}

fn fmt_q(q: &Quartiles, scale: f64) -> String {
    if q.median.is_nan() {
        return format!("{:>24}", "-");
    }
    format!(
        "{:>8.3} [{:.3}, {:.3}]",
        q.median * scale,
        q.q1 * scale,
        q.q3 * scale
    )
}

/// Records CSV plus a text summary: timing quartiles per query kind and
/// distribution, outcome counts and the size-reduction histogram.
pub fn emit_report(records: &[BenchRecord]) -> Report {
    let rows = summarize(records);
    let histogram = reduction_histogram(records);
    let mut s = String::new();
    let errors = records.iter().filter(|r| r.error.is_some()).count();
    let _ = writeln!(s, "{} records, {} errors", records.len(), errors);
    let mut outcomes: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        *outcomes.entry(r.outcome.as_str()).or_default() += 1;
    }
    let parts: Vec<String> = outcomes.iter().map(|(k, v)| format!("{k} {v}")).collect();
    let _ = writeln!(s, "outcomes: {}", parts.join(", "));
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<7} {:<12} {:>4}  {:>24}  {:>24}  {:>24}",
        "kind",
        "distribution",
        "n",
        "t_iis ms med [q1, q3]",
        "t_milp ms med [q1, q3]",
        "overhead med [q1, q3]"
    );
    for r in &rows {
        let _ = writeln!(
            s,
            "{:<7} {:<12} {:>4}  {}  {}  {}",
            r.query_kind,
            r.distribution,
            r.records,
            fmt_q(&r.t_iis, 1e3),
            fmt_q(&r.t_milp, 1e3),
            fmt_q(&r.overhead, 1.0)
        );
    }
    let _ = writeln!(s);
    s.push_str(&histogram.render());
    Report {
        csv: records_csv(records),
        summary: s,
        rows,
        histogram,
    }
}

/// Checks that every record's overhead equals `t_iis / t_milp`.
pub fn overhead_consistent(records: &[BenchRecord], rel_tol: f64) -> bool {
    records.iter().all(
        |r| match (r.overhead, BenchRecord::overhead_of(r.t_iis, r.t_milp)) {
            (Some(o), Some(expected)) => (o - expected).abs() <= rel_tol * expected.abs(),
            (None, None) => true,
            _ => false,
        },
    )
}

/// Sanity check on a record: an IIS size is present exactly when the query
/// could not be met at the optimum.
pub fn record_is_coherent(r: &BenchRecord) -> bool {
    if r.error.is_some() {
        return true;
    }
    let optimal = r.outcome == OutcomeCase::Optimality.as_str();
    r.iis_size.is_some() != optimal
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(kind: &str, dist: &str, t_iis: f64, t_milp: f64) -> BenchRecord {
        BenchRecord {
            instance: "i".into(),
            family: Family::Wdp,
            distribution: dist.into(),
            query_kind: kind.into(),
            query: String::new(),
            algorithm: IisAlgorithm::Deletion,
            seed: 0,
            outcome: "infeasibility".into(),
            asp_constraints: Some(3),
            iis_size: Some(2),
            iis: "a b".into(),
            verified: None,
            t_milp,
            t_iis,
            overhead: BenchRecord::overhead_of(t_iis, t_milp),
            error: None,
        }
    }

    #[test]
    fn overhead_is_a_ratio() {
        assert_eq!(BenchRecord::overhead_of(5.0, 50.0), Some(0.1));
        assert_eq!(BenchRecord::overhead_of(5.0, 0.0), None);
    }

    #[test]
    fn one_record_csv_has_two_lines() {
        let csv = records_csv(&[record("W1", "paths", 1.0, 2.0)]);
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().next().unwrap(), CSV_COLUMNS.join(","));
    }

    #[test]
    fn grouped_medians() {
        let rs = [
            record("W1", "paths", 1.0, 10.0),
            record("W1", "paths", 3.0, 20.0),
            record("W1", "paths", 8.0, 40.0),
        ];
        let rows = summarize(&rs);
        let all = rows.iter().find(|r| r.distribution == "all").unwrap();
        assert_eq!(all.records, 3);
        assert_eq!(all.t_iis.median, 3.0);
        assert_eq!(all.t_iis.q1, 2.0);
        assert_eq!(all.t_iis.q3, 5.5);
        assert_eq!(all.t_milp.median, 20.0);
        assert_eq!(all.overhead.median, 0.15);
        assert_eq!(all.t_iis.mean, 4.0);
    }

    #[test]
    fn kinds_sorted_by_mean_iis_time() {
        let rs = [
            record("W1", "paths", 5.0, 1.0),
            record("W2", "paths", 1.0, 1.0),
        ];
        let rows = summarize(&rs);
        let kinds: Vec<&str> = rows.iter().map(|r| r.query_kind.as_str()).collect();
        assert_eq!(kinds, vec!["W2", "W2", "W1", "W1"]);
    }

    #[test]
    fn histogram_bins_by_tenths() {
        let mut a = record("W1", "paths", 1.0, 1.0);
        a.iis_size = Some(10);
        let mut b = a.clone();
        b.algorithm = IisAlgorithm::Smallest;
        b.iis_size = Some(7);
        let h = reduction_histogram(&[a, b]);
        assert_eq!(h.pairs, 1);
        assert_eq!(h.bins[3], ("(20,30]%".to_string(), 1));
    }
}
