use std::path::PathBuf;
use std::process::ExitCode;

use bque::pipeline::{parse_config, run, Overrides, PipelineConfig, Stage};
use bque::Error;
use clap::{Parser, ValueEnum};

#[derive(Parser)]
#[command(name = "bque", version, about = "Billiard eigenfunctions and quantum ergodicity statistics")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kmin: Option<f64>,
    #[arg(long)]
    kmax: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Command {
    Classical,
    Solve,
    Elements,
    Stats,
    Report,
    Verify,
}

fn load(cli: &Cli) -> Result<PipelineConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            parse_config(&text)?
        }
        None => PipelineConfig::default(),
    };
    Overrides { kmin: cli.kmin, kmax: cli.kmax, out: cli.out.clone() }.apply(&mut cfg)?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if cli.print_config {
        match bque::pipeline::to_toml(&cfg) {
            Ok(t) => {
                print!("{t}");
                return ExitCode::SUCCESS;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        }
    }
    if cfg.workers > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global();
    }
    let stage = match cli.command {
        Command::Classical => Stage::Classical,
        Command::Solve => Stage::Solve,
        Command::Elements => Stage::Elements,
        Command::Stats => Stage::Stats,
        Command::Report => Stage::Report,
        Command::Verify => Stage::Verify,
    };
    match run(&cfg, stage) {
        Ok(out) => {
            for line in &out.summary {
                println!("{line}");
            }
            for p in &out.artifacts {
                eprintln!("wrote {}", p.display());
            }
            if out.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
