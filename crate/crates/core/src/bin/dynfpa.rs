use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use dynfpa::distributions::ValueDistribution;
use dynfpa::harness::verify::{run_suite, Suite, SuiteInput};
use dynfpa::harness::{build_agents, simulate_replications, write_outputs, BoundReport, HarnessError, RunConfig};

#[derive(Parser)]
#[command(
    name = "dynfpa",
    version,
    about = "Repeated first-price auctions with good, bad and rest buyer states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every replication of a config and write trajectories and summaries.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the auction scalars of a distribution.
    Inspect {
        /// Path to a distribution document, or the document itself.
        #[arg(long)]
        dist: String,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
    },
    /// Print the revenue bounds for a config's roster.
    Bounds {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a named verification suite.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        config: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
    Verification,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn load_dist(arg: &str) -> Result<ValueDistribution, Failure> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(Path::new(arg)).map_err(|e| Failure::Config(format!("cannot read {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("distribution: {e}")))
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let cfg = RunConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Simulate { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let runs = simulate_replications(&cfg, true)?;
            for path in write_outputs(&out, &runs)? {
                println!("{}", path.display());
            }
        }
        Command::Inspect { dist, m, n } => {
            let d = load_dist(&dist)?;
            let s = d.scalars(m, n).map_err(|e| Failure::Config(e.to_string()))?;
            println!("{}", serde_json::to_string(&s).expect("scalars serialise"));
        }
        Command::Bounds { config } => {
            let cfg = load_config(&config)?;
            let agents = build_agents(&cfg)?;
            let n_soph = agents.iter().filter(|a| a.is_sophisticated()).count();
            let report = BoundReport::new(&cfg.distribution, &cfg.params, n_soph, agents.len() - n_soph);
            let out = json!({
                "report": report,
                "E_max": cfg.params.max_epoch_length(),
                "H": cfg.params.threshold_h(),
                "sophistication_lookahead": cfg.params.sophistication_lookahead(),
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("report serialises"));
        }
        Command::Verify { suite, config } => {
            let suite: Suite = suite.parse()?;
            let cfg = RunConfig::load(&config)?;
            let report = run_suite(suite, &SuiteInput::from(&cfg))?;
            for c in &report.checks {
                println!(
                    "{} {}: measured={} bound={} {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.bound,
                    c.detail
                );
            }
            if !report.passed() {
                return Err(Failure::Verification);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Verification) => ExitCode::from(1),
    }
}
