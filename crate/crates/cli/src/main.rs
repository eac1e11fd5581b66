use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use exmip_cli::acceptance::{self, AcceptanceConfig};
use exmip_cli::commands::{self, BenchArgs, ExplainArgs};
use exmip_cli::server::{self, ServiceConfig, DEFAULT_PORT};
use exmip_cli::{exit, CliError};
use exmip_core::bench::SuiteConfig;
use exmip_core::graph::Format;
use exmip_core::iis::IisAlgorithm;
use exmip_core::problems::Family;

#[derive(Parser)]
#[command(
    name = "exmip",
    version,
    about = "Why and why-not explanations for optimal MILP solutions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and print the optimal solution.
    Solve {
        file: PathBuf,
        #[arg(long, value_parser = parse_family)]
        family: Option<Family>,
        /// Seconds.
        #[arg(long)]
        time_limit: Option<f64>,
    },
    /// Explain a query about an instance's optimal solution.
    Explain {
        file: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long, value_parser = parse_family)]
        family: Option<Family>,
        #[arg(long, default_value = "deletion")]
        algo: IisAlgorithm,
        #[arg(long, default_value = "json")]
        format: Format,
        #[arg(long)]
        time_limit: Option<f64>,
        /// Also write a self-contained artifact for `verify-iis`.
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Run the benchmark suite over the desk corpus.
    Bench {
        #[arg(long, default_value = "fixtures")]
        fixtures: PathBuf,
        /// Directory for records.csv, summary.txt and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = parse_family)]
        family: Option<Family>,
        /// Comma-separated IIS algorithms.
        #[arg(long, value_delimiter = ',')]
        algo: Option<Vec<IisAlgorithm>>,
        /// Comma-separated query kinds.
        #[arg(long, value_delimiter = ',')]
        kinds: Option<Vec<String>>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        /// Run records one at a time for clean timings.
        #[arg(long)]
        sequential: bool,
        /// Audit every IIS by leave-one-out.
        #[arg(long)]
        verify: bool,
    },
    /// Check that the IIS stored in an artifact is irreducible and infeasible.
    VerifyIis {
        artifact: PathBuf,
        #[arg(long)]
        time_limit: Option<f64>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "EXMIP_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, env = "EXMIP_DATA_DIR", default_value = "exmip-data")]
        data_dir: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Evaluate every acceptance criterion and print one line each.
    Acceptance {
        #[arg(long, default_value = "fixtures")]
        fixtures: PathBuf,
        #[arg(long, default_value_t = 11)]
        seed: u64,
    },
}

fn parse_family(s: &str) -> Result<Family, String> {
    match s {
        "rcpsp" => Ok(Family::Rcpsp),
        "wdp" => Ok(Family::Wdp),
        "canonical" => Ok(Family::Canonical),
        _ => Err(format!(
            "unknown family `{s}`; expected rcpsp, wdp or canonical"
        )),
    }
}

fn seconds(s: Option<f64>) -> Option<Duration> {
    s.map(Duration::from_secs_f64)
}

fn run(cli: Cli) -> Result<Option<String>, CliError> {
    match cli.command {
        Command::Solve {
            file,
            family,
            time_limit,
        } => commands::solve(&file, family, seconds(time_limit)).map(Some),
        Command::Explain {
            file,
            query,
            family,
            algo,
            format,
            time_limit,
            artifact,
        } => commands::explain(&ExplainArgs {
            path: &file,
            family,
            query: &query,
            algorithm: algo,
            format,
            time_limit: seconds(time_limit),
            artifact: artifact.as_deref(),
        })
        .map(Some),
        Command::Bench {
            fixtures,
            out,
            family,
            algo,
            kinds,
            seed,
            time_limit,
            sequential,
            verify,
        } => {
            let defaults = SuiteConfig::default();
            let config = SuiteConfig {
                kinds: kinds.unwrap_or(defaults.kinds),
                algorithms: algo.unwrap_or(defaults.algorithms),
                time_limit: Some(Duration::from_secs_f64(time_limit)),
                seed,
                verify,
                sequential,
            };
            commands::bench(&BenchArgs {
                fixtures,
                out,
                family,
                config,
            })
            .map(Some)
        }
        Command::VerifyIis {
            artifact,
            time_limit,
        } => commands::verify_iis(&artifact, seconds(time_limit)).map(Some),
        Command::Serve {
            port,
            data_dir,
            workers,
        } => {
            let mut config = ServiceConfig::new(data_dir);
            if let Some(w) = workers {
                config.workers = w;
            }
            let rt =
                tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
            rt.block_on(server::serve(config, port))
                .map_err(|e| CliError::Internal(e.to_string()))?;
            Ok(None)
        }
        Command::Acceptance { fixtures, seed } => {
            let config = AcceptanceConfig {
                seed,
                ..AcceptanceConfig::new(fixtures)
            };
            let results =
                acceptance::run(&config, &mut |c| println!("{c}"), &mut |s| eprintln!("{s}"));
            let failed = results.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::Acceptance(failed));
            }
            Ok(None)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(out) => {
            if let Some(text) = out {
                // A closed pipe (`exmip ... | head`) is not an error.
                let _ = writeln!(std::io::stdout(), "{}", text.trim_end());
            }
            ExitCode::from(exit::OK as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
