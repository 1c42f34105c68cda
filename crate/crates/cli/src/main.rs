//! `simsel` command-line tool.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for runtime errors.

use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use serde_json::json;

use simsel::harness::{make_participant, ParticipantSpec};
use simsel::rng::{child_rng, streams};
use simsel::session::SessionConfig;
use simsel::tasks::Task;
use simsel::{BenchmarkConfig, EngineConfig, Method, Phase, Session};
use simsel_service::{AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "simsel", version, about = "Simulator-based adaptive design for model and parameter selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a synthetic-participant benchmark described by a JSON config.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        /// Directory for records.csv, summary.csv, trace.jsonl, table.txt and timing.csv.
        #[arg(long, default_value = "benchmark-out")]
        out: PathBuf,
    },
    /// Run one simulated participant, streaming one JSON line per trial.
    Simulate {
        #[arg(long)]
        task: String,
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Ground-truth model; drawn from the model prior when absent.
        #[arg(long)]
        true_model: Option<String>,
        #[arg(long)]
        particles: Option<usize>,
        /// Write the session event log here.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Rebuild a session from its event log and print its posterior snapshot.
    Replay { log: PathBuf },
    /// Serve the session REST API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value = "sessions")]
        data_dir: PathBuf,
        #[arg(long, env = "SIMSEL_TOKEN", hide_env_values = true)]
        token: Option<String>,
        /// Seconds advertised in Retry-After while a design search runs.
        #[arg(long, default_value_t = 1)]
        retry_after: u64,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<simsel::Error> for Failure {
    fn from(e: simsel::Error) -> Self {
        match e {
            simsel::Error::Config(_) | simsel::Error::Json(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = set_threads().and_then(|()| match cli.command {
        Command::Benchmark { config, out } => benchmark(config, out),
        Command::Simulate {
            task,
            method,
            seed,
            trials,
            true_model,
            particles,
            record,
        } => simulate(&task, &method, seed, trials, true_model, particles, record),
        Command::Replay { log } => replay(log),
        Command::Serve {
            addr,
            data_dir,
            token,
            retry_after,
        } => serve(addr, data_dir, token, retry_after),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

/// Sizes the worker pool from `SIMSEL_THREADS`.
fn set_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("SIMSEL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("SIMSEL_THREADS: expected a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(runtime)
}

fn benchmark(config: PathBuf, out: PathBuf) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", config.display())))?;
    let cfg: BenchmarkConfig =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", config.display())))?;
    cfg.validate()?;
    let result = simsel::harness::run_benchmark(&cfg)?;
    result.write_outputs(&out)?;
    print!("{}", result.render_table());
    println!("outputs written to {}", out.display());
    Ok(())
}

fn simulate(
    task: &str,
    method: &str,
    seed: u64,
    trials: usize,
    true_model: Option<String>,
    particles: Option<usize>,
    record: Option<PathBuf>,
) -> Result<(), Failure> {
    if trials == 0 {
        return Err(Failure::Config("--trials: must be at least 1".into()));
    }
    let method: Method = method.parse()?;
    let task_def = Task::by_name(task)?;
    let spec = ParticipantSpec {
        true_model,
        ..ParticipantSpec::default()
    };
    let participant = make_participant(&task_def, &spec, seed, 0)?;
    let truth = &task_def.models[participant.true_model.index];
    let mut engine = EngineConfig::default();
    if let Some(n) = particles {
        engine.n_particles = n;
    }
    let config = SessionConfig {
        engine,
        ..SessionConfig::new(task, method, trials, seed)
    };
    let mut session = Session::create(format!("sim-{task}-{}-{seed}", method.name()), config)?;

    let mut out = std::io::stdout().lock();
    while session.phase() != Phase::Finished {
        let t = session.belief().trial_index;
        let design = session.next_design()?;
        let mut rng = child_rng(participant.rng_seed, streams::RESPONSE, t + 1);
        let response = truth.simulate(&participant.true_theta.0, &design.0, &mut rng);
        session.submit_response(response.clone(), Some(t))?;
        let rec = session.history().last().expect("trial recorded");
        let line = json!({
            "trial": t + 1,
            "design": design,
            "response": response,
            "model_marginals": rec.model_marginals,
            "degenerate": rec.degenerate,
        });
        writeln!(out, "{line}").map_err(runtime)?;
    }
    let snap = session.snapshot();
    let last = json!({
        "final": true,
        "task": task,
        "method": method,
        "seed": seed,
        "trials": trials,
        "truth": participant.estimate(),
        "map": snap.map,
        "bic": snap.bic,
    });
    writeln!(out, "{last}").map_err(runtime)?;
    if let Some(path) = record {
        session.write_log(&path)?;
    }
    Ok(())
}

fn replay(log: PathBuf) -> Result<(), Failure> {
    if !log.exists() {
        return Err(Failure::Config(format!("no such log: {}", log.display())));
    }
    let session = Session::read_log(&log)?;
    let text = serde_json::to_string_pretty(&session.snapshot()).map_err(runtime)?;
    println!("{text}");
    Ok(())
}

fn serve(addr: SocketAddr, data_dir: PathBuf, token: Option<String>, retry_after: u64) -> Result<(), Failure> {
    let mut config = ServiceConfig::new(data_dir);
    config.token = token.filter(|t| !t.is_empty());
    config.retry_after = Duration::from_secs(retry_after.max(1));
    let state = AppState::open(config)?;
    eprintln!("serving {} session(s) on http://{addr}", state.session_count());
    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    rt.block_on(simsel_service::serve(state, addr)).map_err(runtime)
}
