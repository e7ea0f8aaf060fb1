use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use d2d_power::campaign::{self, config::Seeds, config::OneOrMany, Mode};

/// Run a seeded D2D power-allocation campaign.
#[derive(Debug, Parser)]
#[command(name = "d2d-power", version)]
struct Args {
    /// Campaign file (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Run only this seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the configured modes (repeatable).
    #[arg(long = "mode")]
    modes: Vec<Mode>,
    /// Output directory; defaults to `output_dir` from the file, then `results`.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// More log output (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Worker threads; 0 uses every CPU.
    #[arg(short = 'j', long, default_value_t = 0)]
    workers: usize,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match args.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let mut config = match campaign::parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error [{}]: {}: {e}", e.code(), args.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(seed) = args.seed {
        config.seeds = Seeds::List(vec![seed]);
    }
    if !args.modes.is_empty() {
        config.mode = OneOrMany::Many(args.modes.clone());
    }
    if let Err((key, message)) = config.validate() {
        eprintln!("error [config-invalid]: `{key}`: {message}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let output = args.output.or_else(|| config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("results"));

    match campaign::run_campaign(&config, &output, args.workers) {
        Ok(report) => {
            let total = report.records.len();
            log::info!("{total} runs written to {}", output.display());
            if report.failures > 0 {
                eprintln!("{} of {total} runs failed; see the error column of summary.csv", report.failures);
                ExitCode::from(EXIT_PARTIAL)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
