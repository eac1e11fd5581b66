//! Subcommand bodies. Each returns the text destined for standard output.

use std::path::{Path, PathBuf};
use std::time::Duration;

use exmip_core::bench::{desk_corpus, emit_report, run_suite, SuiteConfig};
use exmip_core::graph::{serialize, Format};
use exmip_core::iis::IisAlgorithm;
use exmip_core::model::parse_model;
use exmip_core::problems::Family;
use exmip_core::query::Explanation;
use exmip_core::verify::audit_iis;
use serde_json::json;

use crate::error::CliError;
use crate::pipeline::{self, Artifact};

pub fn solve(
    path: &Path,
    family: Option<Family>,
    time_limit: Option<Duration>,
) -> Result<String, CliError> {
    let (problem, _) = pipeline::load_file(path, family)?;
    let solved = pipeline::solve(&problem, time_limit)?;
    let body = json!({
        "family": solved.family,
        "f_star": solved.f_star,
        "solution": solved.solution,
        "nodes": solved.nodes,
        "seconds": solved.seconds,
    });
    Ok(serde_json::to_string_pretty(&body).expect("json"))
}

pub struct ExplainArgs<'a> {
    pub path: &'a Path,
    pub family: Option<Family>,
    pub query: &'a str,
    pub algorithm: IisAlgorithm,
    pub format: Format,
    pub time_limit: Option<Duration>,
    pub artifact: Option<&'a Path>,
}

pub fn explain(args: &ExplainArgs) -> Result<String, CliError> {
    let query = pipeline::parse_query(args.query)?;
    let (problem, payload) = pipeline::load_file(args.path, args.family)?;
    let solved = pipeline::solve(&problem, args.time_limit)?;
    let artifact = pipeline::explain(
        &problem,
        &payload,
        solved.f_star,
        &query,
        args.algorithm,
        args.time_limit,
    )?;
    if let Some(out) = args.artifact {
        std::fs::write(out, artifact.to_json()).map_err(|source| CliError::Write {
            path: out.to_path_buf(),
            source,
        })?;
    }
    Ok(match (&artifact.explanation, args.format) {
        (Explanation::Reasons { graph, .. }, Format::Dot) => serialize(graph, Format::Dot),
        (explanation, _) => {
            let body = json!({
                "outcome": artifact.outcome,
                "algorithm": artifact.algorithm,
                "f_star": artifact.f_star,
                "explanation": explanation,
            });
            serde_json::to_string_pretty(&body).expect("json")
        }
    })
}

/// Leave-one-out audit of the IIS stored in an artifact.
pub fn verify_iis(path: &Path, time_limit: Option<Duration>) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let artifact: Artifact =
        serde_json::from_str(&text).map_err(|e| CliError::Artifact(e.to_string()))?;
    let Explanation::Reasons { iis, .. } = &artifact.explanation else {
        return Err(CliError::Artifact(
            "the artifact holds an alternate optimum, not an IIS".into(),
        ));
    };
    let model = parse_model(&artifact.asp_model).map_err(|e| CliError::Artifact(e.to_string()))?;
    let audit = audit_iis(&model, &iis.constraint_ids, time_limit)
        .map_err(|e| CliError::Artifact(e.to_string()))?;
    let report = serde_json::to_string_pretty(&audit).expect("json");
    if !audit.unknown.is_empty() {
        return Err(CliError::Timeout);
    }
    if !audit.is_valid() {
        return Err(CliError::NotIis(report));
    }
    Ok(report)
}

pub struct BenchArgs {
    pub fixtures: PathBuf,
    pub out: Option<PathBuf>,
    pub family: Option<Family>,
    pub config: SuiteConfig,
}

pub fn bench(args: &BenchArgs) -> Result<String, CliError> {
    let mut instances = desk_corpus(&args.fixtures, args.config.seed)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(f) = args.family {
        instances.retain(|i| i.problem.family() == f);
    }
    let records = run_suite(&instances, &args.config);
    let report = emit_report(&records);
    if let Some(dir) = &args.out {
        let write = |name: &str, body: &str| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|source| CliError::Write { path, source })
        };
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.clone(),
            source,
        })?;
        write("records.csv", &report.csv)?;
        write("summary.txt", &report.summary)?;
        write(
            "summary.json",
            &serde_json::to_string_pretty(&report.rows).expect("json"),
        )?;
    }
    Ok(report.summary)
}
