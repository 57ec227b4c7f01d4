use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agents::AgentSpec;
use crate::distributions::ValueDistribution;
use crate::mechanism::MechanismParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentEntry {
    pub id: usize,
    #[serde(flatten)]
    pub spec: AgentSpec,
}

fn one() -> usize {
    1
}

/// A full run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: MechanismParams,
    pub distribution: ValueDistribution,
    #[serde(default)]
    pub agents: Vec<AgentEntry>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replications: usize,
}

impl RunConfig {
    /// Builds a config with agents numbered in roster order.
    pub fn new(params: MechanismParams, distribution: ValueDistribution, roster: Vec<AgentSpec>, seed: u64) -> Self {
        RunConfig {
            params,
            distribution,
            agents: roster
                .into_iter()
                .enumerate()
                .map(|(id, spec)| AgentEntry { id, spec })
                .collect(),
            seed,
            replications: 1,
        }
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks that the roster names every buyer exactly once and that at
    /// least one replication is asked for.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.replications == 0 {
            return Err(HarnessError::Config("replications must be at least 1".into()));
        }
        self.roster().map(|_| ())
    }

    /// Roster sorted by buyer id.
    pub fn roster(&self) -> Result<Vec<AgentSpec>, HarnessError> {
        let n = self.params.n();
        if self.agents.len() != n {
            return Err(HarnessError::Config(format!(
                "roster has {} agents but n = {n}",
                self.agents.len()
            )));
        }
        let mut slots: Vec<Option<AgentSpec>> = vec![None; n];
        for a in &self.agents {
            let slot = slots
                .get_mut(a.id)
                .ok_or_else(|| HarnessError::Config(format!("agent id {} out of range for n = {n}", a.id)))?;
            if slot.is_some() {
                return Err(HarnessError::Config(format!("agent id {} listed twice", a.id)));
            }
            *slot = Some(a.spec.clone());
        }
        Ok(slots.into_iter().map(|s| s.expect("every slot filled")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"{
        "params": {"n": 2, "T": 1000, "epsilon": 0.3, "delta": 0.3, "rho": 0.006},
        "distribution": {"kind": "uniform", "lo": 0, "hi": 1},
        "agents": [{"id": 1, "kind": "myopic"}, {"id": 0, "kind": "lookahead"}],
        "seed": 7,
        "replications": 3
    }"#;

    #[test]
    fn parses_and_orders_roster() {
        let cfg = RunConfig::from_json(CONFIG).unwrap();
        cfg.validate().unwrap();
        let roster = cfg.roster().unwrap();
        assert_eq!(roster[0], AgentSpec::Lookahead { k: None });
        assert_eq!(cfg.replications, 3);
    }

    #[test]
    fn rejects_bad_rosters() {
        let mut cfg = RunConfig::from_json(CONFIG).unwrap();
        cfg.agents[0].id = 0;
        assert!(cfg.validate().is_err());
        cfg.agents.pop();
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::from_json(CONFIG).unwrap();
        cfg.replications = 0;
        assert!(cfg.validate().is_err());
        assert!(RunConfig::from_json("{").is_err());
    }
}
