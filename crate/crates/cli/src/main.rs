use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use ffma::butterfly::{trace_table, NetworkCodeKind, OverloadNetworkCode};
use ffma::harness::{
    build_ep_code, emit, replay_examples, run_sweep, EpConstruction, EpSpec, ExperimentConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "ffma",
    version,
    about = "Finite-field multiple access simulator"
)]
struct Cli {
    /// Master seed; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo frames.
    #[arg(long, global = true, default_value_t = default_threads())]
    threads: usize,
    /// Output file; results go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an Eb/N0 sweep described by a TOML config.
    Sweep { config: PathBuf },
    /// Replay the worked examples and report bit-exact agreement.
    ReplayExamples,
    /// Print the encode/decode trace of the butterfly network.
    Butterfly {
        #[arg(long, value_enum)]
        code: ButterflyCode,
    },
    /// Export an EP codebook in the text format accepted by `ep.path`.
    Codegen {
        #[arg(value_enum)]
        construction: Construction,
        /// Code length for `identity`.
        #[arg(long)]
        m: Option<usize>,
        /// Kronecker power for `ternary-orthogonal`.
        #[arg(long)]
        kappa: Option<u32>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ButterflyCode {
    Gf9,
    Gf7,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Construction {
    Identity,
    TernaryOrthogonal,
    TernaryNonorthogonal,
    Example16x12,
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Sweep { config } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let result = run_sweep(&cfg, cli.threads)?;
            match out {
                Some(path) => {
                    let manifest = emit(&result, path)?;
                    log::info!("wrote {} and {}", path.display(), manifest.display());
                }
                None => print!("{}", result.to_csv()),
            }
            Ok(true)
        }
        Command::ReplayExamples => {
            let report = replay_examples();
            write_or_print(out, &report.to_string())?;
            Ok(report.all_passed())
        }
        Command::Butterfly { code } => {
            let kind = match code {
                ButterflyCode::Gf9 => NetworkCodeKind::NoCwepGf9,
                ButterflyCode::Gf7 => NetworkCodeKind::AiepGf7,
            };
            write_or_print(out, &trace_table(&OverloadNetworkCode::new(kind))?)?;
            Ok(true)
        }
        Command::Codegen {
            construction,
            m,
            kappa,
        } => {
            let construction = match construction {
                Construction::Identity => EpConstruction::Identity,
                Construction::TernaryOrthogonal => EpConstruction::TernaryOrthogonal,
                Construction::TernaryNonorthogonal => EpConstruction::TernaryNonorthogonal,
                Construction::Example16x12 => EpConstruction::Example16x12,
            };
            let code = build_ep_code(&EpSpec {
                construction,
                m,
                kappa,
                path: None,
            })?;
            write_or_print(out, &code.to_text())?;
            Ok(true)
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ");
            eprintln!("error: kind=usage msg={}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: kind=replay msg=one or more examples failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            let (kind, msg) = match e.downcast_ref::<ffma::Error>() {
                Some(err) => (err.kind(), err.to_string()),
                None => ("io", format!("{e:#}")),
            };
            eprintln!("error: kind={kind} msg={}", one_line(&msg));
            ExitCode::FAILURE
        }
    }
}
