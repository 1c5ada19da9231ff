//! Command-line entry points. The `hri` binary only calls [`main`].

pub mod gateway;
pub mod interactive;
pub mod replay;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::bench::eval::{evaluate_runs, AccuracyTable};
use crate::bench::generate::{generate_benchmark, read_jsonl, write_jsonl, BenchmarkInstruction, TemplateManifest};
use crate::bench::trials::{read_logs, run_trials, TrialLog};
use crate::bench::{compute_metrics, BenchError, Metrics, Scenario};
use crate::config::RunConfig;
use crate::error::ConfigError;
use crate::nlu::llm::{ExternalBackend, ExternalConfig};
use crate::nlu::stub::{StubMode, StubServer};
use crate::nlu::{BackendError, GrammarBackend, NluBackend};

pub use gateway::{Gateway, GatewayError, InboundFrame};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("backend: {0}")]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: impl AsRef<Path>) -> impl FnOnce(io::Error) -> CliError {
    let path = path.as_ref().to_path_buf();
    move |source| CliError::Io { path, source }
}

#[derive(Debug, Parser)]
#[command(name = "hri", version, about = "Adaptive, interruptible HRI simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML file merged over the default configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Common {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Talk to the robot from standard input, optionally serving the gateway.
    Interactive {
        #[command(flatten)]
        common: Common,
        /// Serve the WebSocket gateway at ws://127.0.0.1:PORT/ws.
        #[arg(long)]
        gateway: bool,
        /// Gateway port; defaults to the configured one.
        #[arg(long)]
        port: Option<u16>,
        /// Ticks simulated after each typed line.
        #[arg(long)]
        ticks_per_line: Option<u64>,
    },
    /// Run scripted system trials and report metrics.
    Trials {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        scenario: u8,
        #[arg(long, default_value_t = 150)]
        n: usize,
        /// Directory for trials.jsonl, metrics.json and report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Benchmark generation and NLU evaluation.
    Bench {
        #[command(subcommand)]
        action: BenchCommand,
    },
    /// Re-render a stored trial log tick by tick.
    Replay {
        log: PathBuf,
        /// Trial index inside a multi-trial log.
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Serve the log's frames over the gateway instead of printing it.
        #[arg(long)]
        gateway: bool,
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalBackend {
    Grammar,
    /// Local completion server with the configured confusion rates.
    Stub,
    External,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Expand the template manifest into a JSON Lines instruction file.
    Generate {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a backend on the benchmark.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = EvalBackend::Grammar)]
        backend: EvalBackend,
        /// Instruction file; the default manifest is expanded when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Writes the accuracy table as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses the process arguments and runs the command.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    match run(cli.command, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn run<W: Write>(command: Command, out: &mut W) -> Result<(), CliError> {
    let stdout_err = |e| CliError::Io { path: "<stdout>".into(), source: e };
    match command {
        Command::Interactive { common, gateway, port, ticks_per_line } => {
            let mut cfg = common.load()?;
            if let Some(n) = ticks_per_line {
                cfg.interactive.ticks_per_line = n;
            }
            if gateway {
                let gw = Gateway::start(&cfg, cfg.seed, port.unwrap_or(cfg.gateway_port))?;
                writeln!(out, "gateway listening on {}", gw.url()).map_err(stdout_err)?;
                out.flush().map_err(stdout_err)?;
                interactive::forward_stdin(&gw);
                gw.wait();
                Ok(())
            } else {
                interactive::run_interactive(&cfg, io::stdin().lock(), out)
            }
        }
        Command::Trials { common, scenario, n, out: dir } => {
            let cfg = common.load()?;
            let scenario = Scenario::try_from(scenario).map_err(CliError::Usage)?;
            if n == 0 {
                return Err(CliError::Usage("--n must be at least 1".into()));
            }
            let logs = run_trials(scenario, n, cfg.seed, &cfg);
            let metrics = compute_metrics(&logs);
            if let Some(dir) = dir {
                write_trials(&dir, &logs, &metrics)?;
            }
            write!(out, "{}", metrics.render()).map_err(stdout_err)
        }
        Command::Bench { action: BenchCommand::Generate { manifest, seed, out: path } } => {
            let m = match manifest {
                Some(p) => TemplateManifest::load(p)?,
                None => TemplateManifest::default(),
            };
            let b = generate_benchmark(&m, seed)?;
            match path {
                Some(p) => {
                    let f = File::create(&p).map_err(io_err(&p))?;
                    let mut w = BufWriter::new(f);
                    write_jsonl(&mut w, &b).and_then(|_| w.flush()).map_err(io_err(&p))?;
                    writeln!(out, "{} instructions written to {}", b.len(), p.display()).map_err(stdout_err)
                }
                None => write_jsonl(out, &b).map_err(stdout_err),
            }
        }
        Command::Bench { action: BenchCommand::Eval { common, backend, input, runs, out: path } } => {
            let cfg = common.load()?;
            let instructions = match input {
                Some(p) => read_jsonl(BufReader::new(File::open(&p).map_err(io_err(&p))?))?,
                None => generate_benchmark(&TemplateManifest::default(), cfg.seed)?,
            };
            if instructions.is_empty() {
                return Err(CliError::Usage("no instructions to evaluate".into()));
            }
            let table = eval(&cfg, backend, &instructions, runs)?;
            if let Some(p) = path {
                let json = serde_json::to_string_pretty(&table).expect("table serializes");
                std::fs::write(&p, json + "\n").map_err(io_err(&p))?;
            }
            write!(out, "{}", table.render()).map_err(stdout_err)
        }
        Command::Replay { log, trial, gateway, port } => {
            let logs = read_logs(BufReader::new(File::open(&log).map_err(io_err(&log))?))?;
            let t = logs
                .get(trial)
                .ok_or_else(|| CliError::Usage(format!("{} holds {} trial(s)", log.display(), logs.len())))?;
            if gateway {
                let cfg = &t.header.config;
                let frames = t.envelopes.iter().map(|e| e.to_json_line()).collect();
                let gw = Gateway::serve(gateway::FrameSource::Recorded(frames), cfg, port.unwrap_or(cfg.gateway_port))?;
                writeln!(out, "replaying on {}", gw.url()).map_err(stdout_err)?;
                out.flush().map_err(stdout_err)?;
                gw.wait();
                Ok(())
            } else {
                replay::render(t, out).map_err(stdout_err)
            }
        }
    }
}

/// Evaluates `runs` passes of the chosen backend. Stub runs use seeds
/// `cfg.seed + run`, so repeated invocations agree.
pub fn eval(
    cfg: &RunConfig,
    backend: EvalBackend,
    instructions: &[BenchmarkInstruction],
    runs: usize,
) -> Result<AccuracyTable, CliError> {
    Ok(match backend {
        EvalBackend::Grammar => evaluate_runs(|_| Box::new(GrammarBackend), instructions, runs),
        EvalBackend::Stub => {
            let mut servers = Vec::new();
            let mut failure = None;
            let table = evaluate_runs(
                |r| {
                    let mode = StubMode::Model { model: cfg.nlu.stub.clone(), seed: cfg.seed.wrapping_add(r as u64) };
                    let backend: Box<dyn NluBackend> = match StubServer::start(mode) {
                        Ok(server) => {
                            let ext = ExternalConfig {
                                base_url: server.base_url(),
                                api_key_env: None,
                                ..cfg.nlu.external.clone()
                            };
                            servers.push(server);
                            match ExternalBackend::new(ext) {
                                Ok(b) => Box::new(Named("stub", b)),
                                Err(e) => {
                                    failure = Some(e);
                                    Box::new(GrammarBackend)
                                }
                            }
                        }
                        Err(e) => {
                            failure = Some(BackendError::Unavailable(e.to_string()));
                            Box::new(GrammarBackend)
                        }
                    };
                    backend
                },
                instructions,
                runs,
            );
            if let Some(e) = failure {
                return Err(e.into());
            }
            table
        }
        EvalBackend::External => {
            ExternalBackend::new(cfg.nlu.external.clone())?;
            evaluate_runs(
                |_| Box::new(ExternalBackend::new(cfg.nlu.external.clone()).expect("checked above")),
                instructions,
                runs,
            )
        }
    })
}

/// Renames a backend in reports.
struct Named<B>(&'static str, B);

impl<B: NluBackend> NluBackend for Named<B> {
    fn name(&self) -> &str {
        self.0
    }

    fn extract(
        &mut self,
        transcript: &crate::speech::Transcript,
        state: &crate::nlu::SymbolicState,
        ctx: &crate::nlu::DialogueContext,
    ) -> Result<crate::nlu::Extraction, BackendError> {
        self.1.extract(transcript, state, ctx)
    }
}

/// Writes `trials.jsonl`, `metrics.json` and `report.txt` into `dir`.
pub fn write_trials(dir: &Path, logs: &[TrialLog], metrics: &Metrics) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("trials.jsonl");
    let f = File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(f);
    for log in logs {
        log.write_jsonl(&mut w).map_err(io_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    let path = dir.join("metrics.json");
    let json = serde_json::to_string_pretty(metrics).expect("metrics serialize");
    std::fs::write(&path, json + "\n").map_err(io_err(&path))?;
    let path = dir.join("report.txt");
    std::fs::write(&path, metrics.render()).map_err(io_err(&path))
}
