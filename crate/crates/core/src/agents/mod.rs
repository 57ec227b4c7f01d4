//! Buyer behaviours: myopic, lookahead, EXP3 no-regret, explore-then-commit
//! no-policy-regret, and fixed experts.

mod experts;
mod learners;

pub use experts::{
    good_strategy_bid, value_grid, BadRule, Expert, ExpertFamily, FamilyKind, GoodRule, Level, DEFAULT_GRID_STEPS,
};
pub use learners::{Exp3, ExploreThenCommit};

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechanism::{EpochConfig, MechanismParams, Phase, ProjectedHistory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("expert family is empty")]
    EmptyFamily,
    #[error("invalid value {value} for {name}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("learner update without a preceding selection")]
    UpdateWithoutSelection,
}

/// What a buyer sees when asked for a bid.
#[derive(Debug, Clone, Copy)]
pub struct AgentView<'a> {
    /// 1-based round index.
    pub round: u64,
    pub phase: Phase,
    pub history: ProjectedHistory,
    pub epoch: &'a EpochConfig,
}

/// Result of the round for a buyer that bid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    pub won: bool,
    pub payment: f64,
    pub utility: f64,
    pub cleared: bool,
    /// Largest competing bid, 0 when bidding alone.
    pub highest_other_bid: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MyopicMode {
    /// Bid `r_g` whenever `v >= r_g`.
    #[default]
    Reserve,
    /// Best response to the empirical distribution of the highest competing bid.
    Shade,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertPreset {
    GoodStrategy,
    BadThreshold,
    Combined,
    Zero,
    /// Zero while good; bid `r_b` for `v > r_b` while bad.
    ReserveAbove,
    /// Zero while good; bid `v` for `v >= r_b` while bad.
    TruthfulAboveReserve,
}

impl ExpertPreset {
    pub fn expert(self) -> Expert {
        match self {
            ExpertPreset::GoodStrategy => Expert::GOOD_STRATEGY,
            ExpertPreset::BadThreshold => Expert::BAD_THRESHOLD,
            ExpertPreset::Combined => Expert::COMBINED,
            ExpertPreset::Zero => Expert::ZERO,
            ExpertPreset::ReserveAbove => Expert {
                good: GoodRule::Zero,
                bad: BadRule::ReserveAbove,
            },
            ExpertPreset::TruthfulAboveReserve => Expert {
                good: GoodRule::Zero,
                bad: BadRule::TruthfulAboveReserve,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExpertSpec {
    Preset(ExpertPreset),
    Custom(Expert),
}

impl ExpertSpec {
    pub fn expert(self) -> Expert {
        match self {
            ExpertSpec::Preset(p) => p.expert(),
            ExpertSpec::Custom(e) => e,
        }
    }
}

fn standard_family() -> FamilyKind {
    FamilyKind::Standard
}

fn benchmark_family() -> FamilyKind {
    FamilyKind::Benchmark
}

/// Roster entry as written in a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentSpec {
    Myopic {
        #[serde(default)]
        mode: MyopicMode,
    },
    Lookahead {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<u64>,
    },
    NoRegret {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default = "standard_family")]
        family: FamilyKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid_steps: Option<usize>,
    },
    NoPolicyRegret {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        block: Option<u64>,
        #[serde(default = "benchmark_family")]
        family: FamilyKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid_steps: Option<usize>,
    },
    Expert {
        expert: ExpertSpec,
    },
}

/// Everything an agent needs to know about the environment at construction.
#[derive(Debug, Clone, Copy)]
pub struct AgentContext<'a> {
    pub params: &'a MechanismParams,
    pub value_lo: f64,
    pub value_hi: f64,
}

impl AgentContext<'_> {
    fn family(&self, kind: FamilyKind, steps: Option<usize>) -> ExpertFamily {
        ExpertFamily::of_kind(kind, self.value_lo, self.value_hi, steps.unwrap_or(DEFAULT_GRID_STEPS))
    }
}

const SHADE_BINS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Myopic {
    mode: MyopicMode,
    value_hi: f64,
    /// Histogram of the highest competing good-phase bid.
    counts: Vec<u64>,
    observed: u64,
}

impl Myopic {
    pub fn new(mode: MyopicMode, value_hi: f64) -> Self {
        Myopic {
            mode,
            value_hi,
            counts: vec![0; SHADE_BINS],
            observed: 0,
        }
    }

    pub fn bid(&self, view: &AgentView, value: f64) -> f64 {
        let cfg = view.epoch;
        if view.history.in_bad {
            return if value > cfg.r_b { cfg.r_b } else { 0.0 };
        }
        if value < cfg.r_g {
            return 0.0;
        }
        match self.mode {
            MyopicMode::Reserve => cfg.r_g,
            MyopicMode::Shade => self.best_response(cfg.r_g, value),
        }
    }

    fn bin_width(&self) -> f64 {
        self.value_hi / SHADE_BINS as f64
    }

    fn best_response(&self, reserve: f64, value: f64) -> f64 {
        if self.observed == 0 {
            return reserve;
        }
        let width = self.bin_width();
        // Opponent maxima in bins entirely below the bid count as beaten.
        let beaten = |b: f64| -> f64 {
            let full = ((b / width).floor() as usize).min(SHADE_BINS);
            self.counts[..full].iter().sum::<u64>() as f64 / self.observed as f64
        };
        let mut best = (reserve, (value - reserve) * beaten(reserve));
        let first = (reserve / width).ceil() as usize;
        for k in first..=SHADE_BINS {
            let b = k as f64 * width;
            if b > value {
                break;
            }
            let u = (value - b) * beaten(b);
            if u > best.1 {
                best = (b, u);
            }
        }
        best.0
    }

    fn observe(&mut self, view: &AgentView, fb: &Feedback) {
        if self.mode == MyopicMode::Shade && view.phase == Phase::Good {
            let k = ((fb.highest_other_bid / self.bin_width()) as usize).min(SHADE_BINS - 1);
            self.counts[k] += 1;
            self.observed += 1;
        }
    }
}

/// A buyer. Bids are requested only when the buyer participates, and every
/// bid is followed by exactly one `observe`.
#[derive(Debug, Clone, PartialEq)]
pub enum Agent {
    Myopic(Myopic),
    /// Plays `s^g` in good state; never expected in bad state, where it
    /// falls back to the myopic rule.
    Lookahead {
        k: u64,
        threshold: u64,
    },
    NoRegret {
        learner: Exp3,
        family: ExpertFamily,
    },
    NoPolicyRegret {
        learner: ExploreThenCommit,
        family: ExpertFamily,
    },
    Expert(Expert),
}

impl Agent {
    pub fn from_spec(spec: &AgentSpec, ctx: &AgentContext) -> Result<Agent, AgentError> {
        let horizon = ctx.params.horizon();
        Ok(match *spec {
            AgentSpec::Myopic { mode } => Agent::Myopic(Myopic::new(mode, ctx.value_hi)),
            AgentSpec::Lookahead { k } => Agent::lookahead(k, ctx.params),
            AgentSpec::NoRegret {
                gamma,
                family,
                grid_steps,
            } => {
                let family = ctx.family(family, grid_steps);
                let gamma = gamma.unwrap_or_else(|| Exp3::default_gamma(family.len(), horizon));
                Agent::NoRegret {
                    learner: Exp3::new(family.len(), gamma, ctx.value_hi)?,
                    family,
                }
            }
            AgentSpec::NoPolicyRegret {
                block,
                family,
                grid_steps,
            } => {
                let family = ctx.family(family, grid_steps);
                let block = block.unwrap_or_else(|| ExploreThenCommit::default_block(family.len(), horizon));
                Agent::NoPolicyRegret {
                    learner: ExploreThenCommit::new(family.len(), block)?,
                    family,
                }
            }
            AgentSpec::Expert { expert } => Agent::Expert(expert.expert()),
        })
    }

    /// Lookahead agent; `k` defaults to the sophistication threshold.
    pub fn lookahead(k: Option<u64>, params: &MechanismParams) -> Agent {
        let threshold = params.sophistication_lookahead();
        let k = k.unwrap_or(threshold);
        if k < threshold {
            warn!("lookahead {k} is below the sophistication threshold {threshold}; playing the good strategy anyway");
        }
        Agent::Lookahead { k, threshold }
    }

    pub fn is_sophisticated(&self) -> bool {
        match self {
            Agent::Lookahead { k, threshold } => k >= threshold,
            Agent::NoPolicyRegret { .. } => true,
            _ => false,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Agent::Myopic(_) => "myopic",
            Agent::Lookahead { .. } => "lookahead",
            Agent::NoRegret { .. } => "no_regret",
            Agent::NoPolicyRegret { .. } => "no_policy_regret",
            Agent::Expert(_) => "expert",
        }
    }

    pub fn family(&self) -> Option<&ExpertFamily> {
        match self {
            Agent::NoRegret { family, .. } | Agent::NoPolicyRegret { family, .. } => Some(family),
            _ => None,
        }
    }

    pub fn bid<R: Rng + ?Sized>(&mut self, view: &AgentView, value: f64, rng: &mut R) -> f64 {
        let bid = match self {
            Agent::Myopic(m) => m.bid(view, value),
            Agent::Lookahead { .. } => {
                if view.history.in_bad {
                    Myopic::new(MyopicMode::Reserve, 0.0).bid(view, value)
                } else {
                    good_strategy_bid(view.history.uncleared_this_epoch, view.epoch, value)
                }
            }
            Agent::NoRegret { learner, family } => {
                let (i, _) = learner.select(rng);
                family.get(i).bid(&view.history, view.epoch, value)
            }
            Agent::NoPolicyRegret { learner, family } => {
                let i = learner.expert_for(view.round);
                family.get(i).bid(&view.history, view.epoch, value)
            }
            Agent::Expert(e) => e.bid(&view.history, view.epoch, value),
        };
        debug_assert!(bid.is_finite() && bid >= 0.0);
        bid
    }

    pub fn observe(&mut self, view: &AgentView, fb: &Feedback) -> Result<(), AgentError> {
        match self {
            Agent::Myopic(m) => m.observe(view, fb),
            Agent::NoRegret { learner, .. } => learner.update(fb.utility)?,
            Agent::NoPolicyRegret { learner, .. } => learner.record(view.round, fb.utility),
            Agent::Lookahead { .. } | Agent::Expert(_) => {}
        }
        Ok(())
    }
}
