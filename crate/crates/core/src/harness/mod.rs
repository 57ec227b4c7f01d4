//! Simulation driver, bounds, regret estimates and the acceptance suites.

mod bounds;
mod config;
mod output;
mod regret;
mod simulate;
mod summary;
pub mod verify;

pub use bounds::{
    discounted_lower_bound, revenue_upper_bound, slack, theorem_lower_bound, trajectory_slack, BoundReport, Check,
};
pub use config::{AgentEntry, RunConfig};
pub use output::{write_epochs_csv, write_outputs, write_summary_csv};
pub use regret::{external_regret, policy_regret, RegretReport, SmokeEnvironment};
pub use simulate::{
    agent_stream, build_agents, mechanism_stream, replication_seed, run, simulate, value_stream, EpochStats,
    RoundRecord, RunTotals, Trajectory,
};
pub use summary::{summarize, AgentSummary, EpochSplit, Estimate, RunSummary, Z95};

use rayon::prelude::*;
use thiserror::Error;

use crate::agents::AgentError;
use crate::distributions::DistributionError;
use crate::mechanism::{MechanismError, ParamsError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("round {round}: {source}")]
    Mechanism { round: u64, source: MechanismError },
    #[error("agent {agent}, round {round}: {source}")]
    Agent {
        agent: usize,
        round: u64,
        source: AgentError,
    },
    #[error(transparent)]
    Engine(#[from] MechanismError),
    #[error(transparent)]
    Learner(#[from] AgentError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("trajectory carries no seed, so it cannot be replayed")]
    MissingSeed,
    #[error("expert family is empty")]
    EmptyFamily,
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Whether the error stems from the user's input rather than a run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            HarnessError::Config(_)
                | HarnessError::Params(_)
                | HarnessError::Distribution(_)
                | HarnessError::UnknownSuite(_)
                | HarnessError::Json(_)
        )
    }
}

/// Runs every replication of a config in parallel; results are in
/// replication order.
pub fn simulate_replications(config: &RunConfig, record_rounds: bool) -> Result<Vec<Trajectory>, HarnessError> {
    config.validate()?;
    (0..config.replications)
        .into_par_iter()
        .map(|rep| simulate(config, replication_seed(config.seed, rep), record_rounds))
        .collect()
}
