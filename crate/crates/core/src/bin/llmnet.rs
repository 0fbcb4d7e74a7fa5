//! Command-line entry point: run scenarios, verify ledgers, render reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use llmnet::scenario::{
    render_report, run_scenario, verify_run, BackendKind, ConfigError, ScenarioConfig,
    ScenarioError,
};

const EXIT_CONFIG: u8 = 1;
const EXIT_VERIFY: u8 = 2;

#[derive(Parser)]
#[command(
    name = "llmnet",
    version,
    about = "Decentralized LLM network simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Scripted,
    Llm,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the run directory.
    Run {
        /// Scenario file, or the name of a bundled scenario such as primes-claude.
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Forces every respondent onto one backend.
        #[arg(long, value_enum)]
        backend: Option<Backend>,
    },
    /// Verify a ledger dump: hashes, links and contract replay.
    Verify {
        #[arg(long)]
        ledger: PathBuf,
    },
    /// Print a run directory as tables.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(config: &str) -> Result<ScenarioConfig, ConfigError> {
    let path = Path::new(config);
    if !path.exists() {
        if let Ok(c) = ScenarioConfig::bundled(config) {
            return Ok(c);
        }
    }
    ScenarioConfig::load(path)
}

fn run(config: &str, out: &Path, seed: Option<u64>, backend: Option<Backend>) -> ExitCode {
    let mut scenario = match load(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    if let Some(b) = backend {
        scenario.force_backend(match b {
            Backend::Scripted => BackendKind::Scripted,
            Backend::Llm => BackendKind::Llm,
        });
    }
    let run = match run_scenario(&scenario, out) {
        Ok(r) => r,
        Err(ScenarioError::Config(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    for q in &run.report.queries {
        let state = q
            .final_state
            .as_ref()
            .map_or("not deployed".to_owned(), |s| s.to_string());
        println!(
            "query {}: {} -> {} ({state})",
            q.index,
            q.query,
            q.answer.as_deref().unwrap_or("no answer")
        );
    }
    if run.report.verification.valid {
        println!(
            "ledger verified: {}",
            out.join(&run.report.ledger).display()
        );
        ExitCode::SUCCESS
    } else {
        eprintln!("ledger verification failed");
        ExitCode::from(EXIT_VERIFY)
    }
}

fn verify(ledger: &Path) -> ExitCode {
    match verify_run(ledger) {
        Ok(v) if v.valid => {
            println!(
                "valid: {} blocks, {} contracts",
                v.chain.blocks_checked,
                v.contracts.len()
            );
            ExitCode::SUCCESS
        }
        Ok(v) => {
            if let Some(f) = &v.chain.first_failure {
                println!("invalid: block {} {:?}: {}", f.index, f.kind, f.detail);
            }
            for x in &v.violations {
                println!(
                    "replay violation at block {} ({}): {}",
                    x.block, x.contract_id, x.detail
                );
            }
            ExitCode::from(EXIT_VERIFY)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_VERIFY)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            backend,
        } => run(&config, &out, seed, backend),
        Command::Verify { ledger } => verify(&ledger),
        Command::Report { out } => match render_report(&out) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
