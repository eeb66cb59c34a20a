use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optomech_cli::{parse_config, run, CliError, Command};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  configuration error (bad key, value or usage)
  3  numerical failure (no threshold, divergence, unstable stationary point, ...)
  4  I/O error

On failure a one-line JSON error record is printed to stderr.
All quantities are in units of omega1.";

#[derive(Parser)]
#[command(name = "optomech", version, about = "Threshold, exceptional-point and Floquet analysis of a driven three-mode optomechanical system", after_help = EXIT_CODES)]
struct Cli {
    /// configuration file (TOML: [system], [drive], [solver], [scan])
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// worker threads for scans (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// draw the seed perturbation phase from this RNG seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// evaluate the stationary state even above threshold
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// pump-only stationary state and its linear stability
    Stationary,
    /// eigenvalues of the linearized fluctuation matrix over the scan axis
    Eigen,
    /// exceptional-point and threshold amplitudes
    Threshold {
        /// also bisect the threshold from nonlinear simulations
        #[arg(long)]
        nonlinear: bool,
    },
    /// seeded nonlinear time integration
    Simulate,
    /// drive-amplitude scan of the configured kind
    Scan,
    /// Floquet growth rate over modulation frequency and depth
    Tongue,
    /// three-wave drive: generation with and without sidebands
    TransistorDemo,
}

fn execute(cli: Cli) -> Result<Vec<String>, CliError> {
    let path = cli.config.ok_or_else(|| {
        CliError::Config(optomech_cli::ConfigError {
            key: "--config".into(),
            line: None,
            message: "a configuration file is required".into(),
        })
    })?;
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let mut cfg = parse_config(&text)?;
    cfg.out_dir = cli.out;
    if let Some(seed) = cli.seed {
        cfg.randomize_seed_phase(seed);
    }
    let cmd = match cli.command {
        Sub::Stationary => Command::Stationary,
        Sub::Eigen => Command::Eigen,
        Sub::Threshold { nonlinear } => Command::Threshold { nonlinear },
        Sub::Simulate => Command::Simulate,
        Sub::Scan => Command::Scan,
        Sub::Tongue => Command::Tongue,
        Sub::TransistorDemo => Command::TransistorDemo,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(CliError::numeric)?;
    pool.install(|| run(cmd, &cfg, cli.force))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
