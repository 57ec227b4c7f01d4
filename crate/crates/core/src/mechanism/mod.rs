//! The robust repeated first-price auction.
//!
//! Time is split into epochs. Each epoch runs a block of first-price auctions
//! among bad-state buyers followed by a block among good-state buyers, with
//! reserves fixed at epoch start from the sizes of the two sets. Good-state
//! buyers who keep bidding below reserve once too many auctions went
//! uncleared are moved to the absorbing bad state; buyers who collect `H`
//! wins in an epoch rest until the epoch ends.

mod engine;
mod epoch;
mod params;

pub use engine::{AdvanceEvent, EpochEnd, EpochRecord, Mechanism};
pub use epoch::{derive_epoch_config, EpochConfig, ScalarTable};
pub use params::{MechanismParams, ParamsError, ParamsSpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::DistributionError;

pub type BuyerId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuyerState {
    Good,
    Bad,
    Rest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Bad,
    Good,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub buyer: BuyerId,
    pub amount: f64,
}

impl Bid {
    pub fn new(buyer: BuyerId, amount: f64) -> Self {
        Bid { buyer, amount }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub buyer: BuyerId,
    pub from: BuyerState,
    pub to: BuyerState,
}

/// What happened in one auction round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    /// 1-based round index.
    pub t: u64,
    pub epoch: u64,
    pub phase: Phase,
    pub participants: Vec<BuyerId>,
    pub bids: Vec<Bid>,
    pub winner: Option<BuyerId>,
    pub payment: f64,
    pub cleared: bool,
    pub transitions: Vec<Transition>,
    /// Uncleared good-phase auctions in this epoch, after the round.
    #[serde(rename = "U")]
    pub uncleared: u64,
    /// Per-buyer allocations in this epoch's good phase, after the round.
    #[serde(rename = "A")]
    pub allocations: Vec<u64>,
}

/// The fixed-size slice of history a buyer's expert strategies may condition on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectedHistory {
    /// Bad as opposed to good-or-rest.
    pub in_bad: bool,
    /// Buyers in good or rest state.
    pub num_good: usize,
    pub num_bad: usize,
    pub uncleared_this_epoch: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechanismError {
    #[error("round runs in the {actual:?} phase, not {expected:?}")]
    WrongPhase { expected: Phase, actual: Phase },
    #[error("buyer {0} is not a participant of this round")]
    UnexpectedBidder(BuyerId),
    #[error("participant {0} submitted no bid")]
    MissingBid(BuyerId),
    #[error("buyer {0} submitted more than one bid")]
    DuplicateBid(BuyerId),
    #[error("bid {amount} from buyer {buyer} is negative or not finite")]
    InvalidBid { buyer: BuyerId, amount: f64 },
    #[error("buyer {0} does not exist")]
    UnknownBuyer(BuyerId),
    #[error("previous round has not been advanced past")]
    AwaitingAdvance,
    #[error("no round has been run since the last advance")]
    NothingToAdvance,
    #[error("horizon reached")]
    Finished,
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}
