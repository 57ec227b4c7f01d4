use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::HarnessError;
use crate::agents::{Agent, AgentContext, AgentView, Feedback};
use crate::distributions::ValueDistribution;
use crate::mechanism::{Bid, BuyerState, EpochRecord, Mechanism, MechanismParams, Phase, RoundOutcome};

const MECHANISM_STREAM: u64 = 0;
const REPLICATION_STREAM: u64 = u64::MAX;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Value draws of buyer `i`.
pub fn value_stream(seed: u64, buyer: usize) -> ChaCha8Rng {
    stream(seed, 1 + 2 * buyer as u64)
}

/// Internal randomness of agent `i`.
pub fn agent_stream(seed: u64, buyer: usize) -> ChaCha8Rng {
    stream(seed, 2 + 2 * buyer as u64)
}

/// Tie-breaking randomness of the mechanism.
pub fn mechanism_stream(seed: u64) -> ChaCha8Rng {
    stream(seed, MECHANISM_STREAM)
}

/// Seed of replication `rep` under a master seed.
pub fn replication_seed(master: u64, rep: usize) -> u64 {
    let mut rng = stream(master, REPLICATION_STREAM);
    rng.set_word_pos(2 * rep as u128);
    rng.next_u64()
}

/// One round as logged: the mechanism's outcome, every buyer's value and
/// every buyer's state before the round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    #[serde(flatten)]
    pub outcome: RoundOutcome,
    pub values: Vec<f64>,
    pub states: Vec<BuyerState>,
    /// Uncleared count visible to bidders in this round.
    pub u_before: u64,
}

/// A closed epoch with per-buyer utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub record: EpochRecord,
    pub utility: Vec<f64>,
    pub bad_phase_utility: Vec<f64>,
}

/// Running totals, kept whether or not per-round records are stored.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunTotals {
    pub rounds: u64,
    pub revenue: f64,
    pub good_revenue: f64,
    pub bad_revenue: f64,
    pub good_rounds: u64,
    pub uncleared_good_rounds: u64,
    pub utility: Vec<f64>,
    pub wins: Vec<u64>,
    /// Rounds started in good, bad and rest state, per buyer.
    pub occupancy: Vec<[u64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: Option<u64>,
    pub params: MechanismParams,
    pub agent_labels: Vec<String>,
    pub sophisticated: Vec<bool>,
    pub rounds: Vec<RoundRecord>,
    pub epochs: Vec<EpochStats>,
    pub final_states: Vec<BuyerState>,
    pub totals: RunTotals,
}

impl Trajectory {
    pub fn n_soph(&self) -> usize {
        self.sophisticated.iter().filter(|&&s| s).count()
    }

    pub fn n_naive(&self) -> usize {
        self.sophisticated.len() - self.n_soph()
    }

    /// Epochs that ran their full length.
    pub fn completed_epochs(&self) -> impl Iterator<Item = &EpochStats> {
        self.epochs.iter().filter(|e| e.record.is_completed())
    }

    /// Writes one JSON object per round.
    pub fn write_jsonl<W: std::io::Write>(&self, mut out: W) -> Result<(), HarnessError> {
        for r in &self.rounds {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn state_slot(s: BuyerState) -> usize {
    match s {
        BuyerState::Good => 0,
        BuyerState::Bad => 1,
        BuyerState::Rest => 2,
    }
}

/// Builds the roster of a config.
pub fn build_agents(config: &RunConfig) -> Result<Vec<Agent>, HarnessError> {
    let ctx = AgentContext {
        params: &config.params,
        value_lo: config.distribution.min_value(),
        value_hi: config.distribution.max_value(),
    };
    config
        .roster()?
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            Agent::from_spec(spec, &ctx).map_err(|source| HarnessError::Agent {
                agent: i,
                round: 0,
                source,
            })
        })
        .collect()
}

/// Runs one replication of a config under `seed`.
pub fn simulate(config: &RunConfig, seed: u64, record_rounds: bool) -> Result<Trajectory, HarnessError> {
    config.validate()?;
    let agents = build_agents(config)?;
    run(&config.params, &config.distribution, agents, seed, record_rounds)
}

/// Runs the mechanism with an explicit roster.
///
/// Every buyer draws a value every round from its own stream, and agents and
/// the mechanism draw from separate streams, so swapping one agent leaves
/// all other randomness untouched.
pub fn run(
    params: &MechanismParams,
    dist: &ValueDistribution,
    mut agents: Vec<Agent>,
    seed: u64,
    record_rounds: bool,
) -> Result<Trajectory, HarnessError> {
    let n = params.n();
    if agents.len() != n {
        return Err(HarnessError::Config(format!("{} agents for n = {n}", agents.len())));
    }
    let mut mech = Mechanism::new(params.clone(), dist)?;
    let mut value_rngs: Vec<_> = (0..n).map(|i| value_stream(seed, i)).collect();
    let mut agent_rngs: Vec<_> = (0..n).map(|i| agent_stream(seed, i)).collect();
    let mut tie_rng = mechanism_stream(seed);

    let mut totals = RunTotals {
        utility: vec![0.0; n],
        wins: vec![0; n],
        occupancy: vec![[0; 3]; n],
        ..RunTotals::default()
    };
    let mut rounds = Vec::new();
    let mut epochs: Vec<EpochStats> = Vec::new();
    let mut epoch_utility = vec![0.0; n];
    let mut epoch_bad_utility = vec![0.0; n];

    while !mech.is_finished() {
        let t = mech.rounds_completed() + 1;
        let values: Vec<f64> = value_rngs.iter_mut().map(|r| dist.sample(r)).collect();
        let states = mech.states().to_vec();
        for (occ, &s) in totals.occupancy.iter_mut().zip(&states) {
            occ[state_slot(s)] += 1;
        }
        let cfg = *mech.epoch_config();
        let phase = mech.phase();
        let u_before = mech.uncleared();
        let participants = mech.participants();

        let mut views = Vec::with_capacity(participants.len());
        let mut bids = Vec::with_capacity(participants.len());
        for &p in &participants {
            let view = AgentView {
                round: t,
                phase,
                history: mech.projected_history(p)?,
                epoch: &cfg,
            };
            let amount = agents[p].bid(&view, values[p], &mut agent_rngs[p]);
            bids.push(Bid::new(p, amount));
            views.push(view);
        }

        let outcome = mech
            .run_round(&bids, &mut tie_rng)
            .map_err(|source| HarnessError::Mechanism { round: t, source })?;

        for (view, bid) in views.iter().zip(&bids) {
            let p = bid.buyer;
            let won = outcome.winner == Some(p);
            let utility = if won { values[p] - outcome.payment } else { 0.0 };
            let highest_other_bid = bids
                .iter()
                .filter(|b| b.buyer != p)
                .map(|b| b.amount)
                .fold(0.0, f64::max);
            let fb = Feedback {
                won,
                payment: if won { outcome.payment } else { 0.0 },
                utility,
                cleared: outcome.cleared,
                highest_other_bid,
            };
            agents[p].observe(view, &fb).map_err(|source| HarnessError::Agent {
                agent: p,
                round: t,
                source,
            })?;
            totals.utility[p] += utility;
            epoch_utility[p] += utility;
            if phase == Phase::Bad {
                epoch_bad_utility[p] += utility;
            }
            if won {
                totals.wins[p] += 1;
            }
        }

        totals.rounds += 1;
        totals.revenue += outcome.payment;
        match phase {
            Phase::Bad => totals.bad_revenue += outcome.payment,
            Phase::Good => {
                totals.good_revenue += outcome.payment;
                totals.good_rounds += 1;
                if !outcome.cleared {
                    totals.uncleared_good_rounds += 1;
                }
            }
        }
        if record_rounds {
            rounds.push(RoundRecord {
                outcome,
                values,
                states,
                u_before,
            });
        }

        mech.advance()?;
        for record in &mech.epochs()[epochs.len()..] {
            epochs.push(EpochStats {
                record: record.clone(),
                utility: std::mem::replace(&mut epoch_utility, vec![0.0; n]),
                bad_phase_utility: std::mem::replace(&mut epoch_bad_utility, vec![0.0; n]),
            });
        }
    }

    Ok(Trajectory {
        seed: Some(seed),
        params: params.clone(),
        agent_labels: agents.iter().map(|a| a.label().to_string()).collect(),
        sophisticated: agents.iter().map(Agent::is_sophisticated).collect(),
        rounds,
        epochs,
        final_states: mech.states().to_vec(),
        totals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentSpec, ExpertPreset, ExpertSpec};

    fn config(horizon: u64, roster: Vec<AgentSpec>) -> RunConfig {
        let n = roster.len();
        let params = MechanismParams::new(n, horizon, 0.3, 0.3, MechanismParams::default_rho(0.3)).unwrap();
        RunConfig::new(params, ValueDistribution::uniform(0.0, 1.0).unwrap(), roster, 11)
    }

    #[test]
    fn zero_horizon_gives_empty_trajectory() {
        let t = simulate(&config(0, vec![AgentSpec::Lookahead { k: None }]), 1, true).unwrap();
        assert!(t.rounds.is_empty());
        assert!(t.epochs.is_empty());
        assert_eq!(t.totals.rounds, 0);
    }

    #[test]
    fn single_epoch_single_buyer() {
        let params = MechanismParams::new(1, 1, 0.3, 0.3, MechanismParams::default_rho(0.3)).unwrap();
        let e = params.max_epoch_length();
        let cfg = config(
            e,
            vec![AgentSpec::Myopic {
                mode: Default::default(),
            }],
        );
        let t = simulate(&cfg, 5, true).unwrap();
        assert_eq!(t.rounds.len() as u64, e);
        assert_eq!(t.epochs.len(), 1);
        assert!(t.epochs[0].record.is_completed());
        for (k, r) in t.rounds.iter().enumerate() {
            assert_eq!(r.outcome.t, k as u64 + 1);
            assert_eq!(r.values.len(), 1);
            assert_eq!(r.states.len(), 1);
        }
    }

    #[test]
    fn identical_seeds_identical_runs() {
        let roster = vec![
            AgentSpec::NoRegret {
                gamma: None,
                family: crate::agents::FamilyKind::Standard,
                grid_steps: None,
            },
            AgentSpec::Myopic {
                mode: crate::agents::MyopicMode::Shade,
            },
            AgentSpec::Lookahead { k: None },
        ];
        let cfg = config(2000, roster);
        let a = simulate(&cfg, 9, true).unwrap();
        let b = simulate(&cfg, 9, true).unwrap();
        assert_eq!(a, b);
        let c = simulate(&cfg, 10, true).unwrap();
        assert_ne!(a.rounds, c.rounds);
    }

    #[test]
    fn swapping_an_agent_keeps_values() {
        let mut cfg = config(
            800,
            vec![AgentSpec::Lookahead { k: None }, AgentSpec::Lookahead { k: None }],
        );
        let a = simulate(&cfg, 3, true).unwrap();
        cfg.agents[1].spec = AgentSpec::Expert {
            expert: ExpertSpec::Preset(ExpertPreset::Zero),
        };
        let b = simulate(&cfg, 3, true).unwrap();
        for (x, y) in a.rounds.iter().zip(&b.rounds) {
            assert_eq!(x.values, y.values);
        }
    }

    #[test]
    fn accounting_matches_records() {
        let roster = vec![
            AgentSpec::Myopic {
                mode: Default::default(),
            },
            AgentSpec::Lookahead { k: None },
            AgentSpec::Expert {
                expert: ExpertSpec::Preset(ExpertPreset::TruthfulAboveReserve),
            },
        ];
        let t = simulate(&config(3000, roster), 4, true).unwrap();
        let paid: f64 = t.rounds.iter().map(|r| r.outcome.payment).sum();
        assert!((paid - t.totals.revenue).abs() < 1e-9);
        let by_epoch: f64 = t
            .epochs
            .iter()
            .map(|e| e.record.good_revenue + e.record.bad_revenue)
            .sum();
        assert!((by_epoch - t.totals.revenue).abs() < 1e-9);
        let util: f64 = t.epochs.iter().map(|e| e.utility.iter().sum::<f64>()).sum();
        assert!((util - t.totals.utility.iter().sum::<f64>()).abs() < 1e-9);
        assert_eq!(t.final_states[1], BuyerState::Good);
    }

    #[test]
    fn replication_seeds_differ() {
        let s: Vec<u64> = (0..4).map(|r| replication_seed(1, r)).collect();
        assert_eq!(s, (0..4).map(|r| replication_seed(1, r)).collect::<Vec<_>>());
        assert!(s.windows(2).all(|w| w[0] != w[1]));
    }
}
