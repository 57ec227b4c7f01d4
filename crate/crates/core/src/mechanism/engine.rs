use rand::Rng;
use serde::{Deserialize, Serialize};

use super::epoch::{EpochConfig, ScalarTable};
use super::params::MechanismParams;
use super::{Bid, BuyerId, BuyerState, MechanismError, Phase, ProjectedHistory, RoundOutcome, Transition};
use crate::distributions::ValueDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochEnd {
    /// All `E` rounds ran.
    Completed,
    /// Cut short by the horizon.
    Horizon,
    /// Cut short by the one-time reset.
    Reset,
}

/// Accounting for one epoch, closed when the epoch ends for any reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub config: EpochConfig,
    pub start_round: u64,
    pub bad_rounds_run: u64,
    pub good_rounds_run: u64,
    pub bad_revenue: f64,
    pub good_revenue: f64,
    pub good_at_start: Vec<BuyerId>,
    pub bad_at_start: Vec<BuyerId>,
    /// Buyers in good or rest state when the good phase stopped.
    pub good_or_rest_at_end: Vec<BuyerId>,
    pub rested: Vec<BuyerId>,
    pub moved_to_bad: Vec<BuyerId>,
    /// Round at which the uncleared count first reached the threshold.
    pub threshold_round: Option<u64>,
    /// Good (not yet rested) buyers at that round.
    pub unrested_at_threshold: Vec<BuyerId>,
    pub uncleared: u64,
    pub end: Option<EpochEnd>,
}

impl EpochRecord {
    fn open(config: EpochConfig, start_round: u64, states: &[BuyerState]) -> Self {
        let pick = |s: BuyerState| -> Vec<BuyerId> {
            states
                .iter()
                .enumerate()
                .filter(|(_, &x)| x == s)
                .map(|(i, _)| i)
                .collect()
        };
        EpochRecord {
            config,
            start_round,
            bad_rounds_run: 0,
            good_rounds_run: 0,
            bad_revenue: 0.0,
            good_revenue: 0.0,
            good_at_start: pick(BuyerState::Good),
            bad_at_start: pick(BuyerState::Bad),
            good_or_rest_at_end: Vec::new(),
            rested: Vec::new(),
            moved_to_bad: Vec::new(),
            threshold_round: None,
            unrested_at_threshold: Vec::new(),
            uncleared: 0,
            end: None,
        }
    }

    pub fn rounds_run(&self) -> u64 {
        self.bad_rounds_run + self.good_rounds_run
    }

    pub fn is_completed(&self) -> bool {
        self.end == Some(EpochEnd::Completed)
    }
}

/// Bookkeeping reported by [`Mechanism::advance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvanceEvent {
    GoodPhaseStarted,
    EpochEnded(u64),
    Reset,
    Finished,
}

/// State machine running the auction schedule round by round.
///
/// Each round is one call to [`run_bad_round`](Self::run_bad_round) or
/// [`run_good_round`](Self::run_good_round) (or [`run_round`](Self::run_round)),
/// followed by one call to [`advance`](Self::advance).
#[derive(Debug, Clone)]
pub struct Mechanism {
    params: MechanismParams,
    table: ScalarTable,
    states: Vec<BuyerState>,
    epoch: EpochConfig,
    record: EpochRecord,
    closed: Vec<EpochRecord>,
    phase: Phase,
    remaining: u64,
    completed_rounds: u64,
    uncleared: u64,
    allocations: Vec<u64>,
    awaiting_advance: bool,
    reset_done: bool,
    finished: bool,
    total_revenue: f64,
}

impl Mechanism {
    pub fn new(params: MechanismParams, dist: &ValueDistribution) -> Result<Self, MechanismError> {
        let n = params.n();
        let table = ScalarTable::new(dist, n)?;
        let states = vec![BuyerState::Good; n];
        let epoch = EpochConfig::derive(&params, &table, n, 0, 0);
        let record = EpochRecord::open(epoch, 1, &states);
        let mut mech = Mechanism {
            finished: params.horizon() == 0,
            params,
            table,
            states,
            epoch,
            record,
            closed: Vec::new(),
            phase: Phase::Bad,
            remaining: 0,
            completed_rounds: 0,
            uncleared: 0,
            allocations: vec![0; n],
            awaiting_advance: false,
            reset_done: false,
            total_revenue: 0.0,
        };
        mech.enter_phase(Phase::Bad);
        Ok(mech)
    }

    pub fn params(&self) -> &MechanismParams {
        &self.params
    }

    pub fn scalars(&self) -> &ScalarTable {
        &self.table
    }

    pub fn epoch_config(&self) -> &EpochConfig {
        &self.epoch
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn states(&self) -> &[BuyerState] {
        &self.states
    }

    pub fn state(&self, buyer: BuyerId) -> BuyerState {
        self.states[buyer]
    }

    pub fn uncleared(&self) -> u64 {
        self.uncleared
    }

    pub fn allocations(&self) -> &[u64] {
        &self.allocations
    }

    /// Rounds completed so far.
    pub fn rounds_completed(&self) -> u64 {
        self.completed_rounds
    }

    pub fn remaining_in_phase(&self) -> u64 {
        self.remaining
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn total_revenue(&self) -> f64 {
        self.total_revenue
    }

    pub fn current_epoch(&self) -> &EpochRecord {
        &self.record
    }

    /// Epochs closed so far, in order.
    pub fn epochs(&self) -> &[EpochRecord] {
        &self.closed
    }

    /// Buyers bidding in the current round.
    pub fn participants(&self) -> Vec<BuyerId> {
        let wanted = match self.phase {
            Phase::Bad => BuyerState::Bad,
            Phase::Good => BuyerState::Good,
        };
        self.buyers_in(wanted)
    }

    pub fn projected_history(&self, buyer: BuyerId) -> Result<ProjectedHistory, MechanismError> {
        let state = *self.states.get(buyer).ok_or(MechanismError::UnknownBuyer(buyer))?;
        let num_bad = self.states.iter().filter(|&&s| s == BuyerState::Bad).count();
        Ok(ProjectedHistory {
            in_bad: state == BuyerState::Bad,
            num_good: self.states.len() - num_bad,
            num_bad,
            uncleared_this_epoch: self.uncleared,
        })
    }

    pub fn run_round<R: Rng + ?Sized>(&mut self, bids: &[Bid], rng: &mut R) -> Result<RoundOutcome, MechanismError> {
        match self.phase {
            Phase::Bad => self.run_bad_round(bids, rng),
            Phase::Good => self.run_good_round(bids, rng),
        }
    }

    /// First-price auction among bad-state buyers with reserve `r_b`.
    /// Never changes any buyer's state.
    pub fn run_bad_round<R: Rng + ?Sized>(
        &mut self,
        bids: &[Bid],
        rng: &mut R,
    ) -> Result<RoundOutcome, MechanismError> {
        self.check_ready(Phase::Bad)?;
        let participants = self.participants();
        self.validate_bids(&participants, bids)?;
        let winner = highest_bid(bids, rng).filter(|b| b.amount >= self.epoch.r_b);
        let payment = winner.map_or(0.0, |b| b.amount);
        self.record.bad_rounds_run += 1;
        self.record.bad_revenue += payment;
        self.total_revenue += payment;
        self.awaiting_advance = true;
        Ok(self.outcome(Phase::Bad, participants, bids, winner, Vec::new()))
    }

    /// First-price auction among good-state buyers with reserve `r_g`, then
    /// the state transitions.
    ///
    /// The bad-state move applies to buyers bidding below `r_g` in rounds that
    /// start with the uncleared count already at the threshold; it is then
    /// followed by moving the winner to rest once it holds `H` allocations.
    pub fn run_good_round<R: Rng + ?Sized>(
        &mut self,
        bids: &[Bid],
        rng: &mut R,
    ) -> Result<RoundOutcome, MechanismError> {
        self.check_ready(Phase::Good)?;
        let participants = self.participants();
        self.validate_bids(&participants, bids)?;
        let r_g = self.epoch.r_g;
        let threshold = self.epoch.u_threshold;
        let punishing = self.uncleared >= threshold;

        let winner = highest_bid(bids, rng).filter(|b| b.amount >= r_g);
        match winner {
            Some(w) => {
                self.allocations[w.buyer] += 1;
                self.record.good_revenue += w.amount;
                self.total_revenue += w.amount;
            }
            None => {
                self.uncleared += 1;
                if self.uncleared == threshold && self.record.threshold_round.is_none() {
                    self.record.threshold_round = Some(self.completed_rounds + 1);
                    self.record.unrested_at_threshold = self.buyers_in(BuyerState::Good);
                }
            }
        }

        let mut transitions = Vec::new();
        if punishing {
            for b in bids.iter().filter(|b| b.amount < r_g) {
                self.states[b.buyer] = BuyerState::Bad;
                self.record.moved_to_bad.push(b.buyer);
                transitions.push(Transition {
                    buyer: b.buyer,
                    from: BuyerState::Good,
                    to: BuyerState::Bad,
                });
            }
        }
        if let Some(w) = winner {
            if self.allocations[w.buyer] >= self.epoch.threshold_h {
                self.states[w.buyer] = BuyerState::Rest;
                self.record.rested.push(w.buyer);
                transitions.push(Transition {
                    buyer: w.buyer,
                    from: BuyerState::Good,
                    to: BuyerState::Rest,
                });
            }
        }
        self.record.good_rounds_run += 1;
        self.record.uncleared = self.uncleared;
        self.awaiting_advance = true;
        Ok(self.outcome(Phase::Good, participants, bids, winner, transitions))
    }

    /// Moves the clock one round forward: phase switches, epoch turnover,
    /// the optional one-time reset and the horizon.
    pub fn advance(&mut self) -> Result<Vec<AdvanceEvent>, MechanismError> {
        if !self.awaiting_advance {
            return Err(MechanismError::NothingToAdvance);
        }
        self.awaiting_advance = false;
        self.completed_rounds += 1;
        self.remaining -= 1;
        let mut events = Vec::new();

        if self.remaining == 0 {
            match self.phase {
                Phase::Bad => {
                    self.enter_phase(Phase::Good);
                    if self.phase == Phase::Good {
                        events.push(AdvanceEvent::GoodPhaseStarted);
                    } else {
                        events.push(AdvanceEvent::EpochEnded(
                            self.closed.last().map_or(0, |r| r.config.index),
                        ));
                    }
                }
                Phase::Good => {
                    let index = self.epoch.index;
                    self.close_epoch(EpochEnd::Completed);
                    self.open_epoch();
                    events.push(AdvanceEvent::EpochEnded(index));
                }
            }
        }

        if self.params.reset_round() == Some(self.completed_rounds) && !self.reset_done {
            self.reset_done = true;
            if self.record.rounds_run() > 0 {
                self.close_epoch(EpochEnd::Reset);
            }
            self.states.iter_mut().for_each(|s| *s = BuyerState::Good);
            self.open_epoch();
            events.push(AdvanceEvent::Reset);
        }

        if self.completed_rounds >= self.params.horizon() {
            self.finished = true;
            if self.record.rounds_run() > 0 {
                self.close_epoch(EpochEnd::Horizon);
            }
            events.push(AdvanceEvent::Finished);
        }
        Ok(events)
    }

    fn buyers_in(&self, wanted: BuyerState) -> Vec<BuyerId> {
        self.states
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == wanted)
            .map(|(i, _)| i)
            .collect()
    }

    fn check_ready(&self, phase: Phase) -> Result<(), MechanismError> {
        if self.finished {
            return Err(MechanismError::Finished);
        }
        if self.awaiting_advance {
            return Err(MechanismError::AwaitingAdvance);
        }
        if self.phase != phase {
            return Err(MechanismError::WrongPhase {
                expected: phase,
                actual: self.phase,
            });
        }
        Ok(())
    }

    fn validate_bids(&self, participants: &[BuyerId], bids: &[Bid]) -> Result<(), MechanismError> {
        let mut seen = vec![false; self.states.len()];
        for b in bids {
            if b.buyer >= self.states.len() {
                return Err(MechanismError::UnknownBuyer(b.buyer));
            }
            if !participants.contains(&b.buyer) {
                return Err(MechanismError::UnexpectedBidder(b.buyer));
            }
            if seen[b.buyer] {
                return Err(MechanismError::DuplicateBid(b.buyer));
            }
            seen[b.buyer] = true;
            if !b.amount.is_finite() || b.amount < 0.0 {
                return Err(MechanismError::InvalidBid {
                    buyer: b.buyer,
                    amount: b.amount,
                });
            }
        }
        if let Some(&missing) = participants.iter().find(|&&p| !seen[p]) {
            return Err(MechanismError::MissingBid(missing));
        }
        Ok(())
    }

    fn outcome(
        &self,
        phase: Phase,
        participants: Vec<BuyerId>,
        bids: &[Bid],
        winner: Option<Bid>,
        transitions: Vec<Transition>,
    ) -> RoundOutcome {
        RoundOutcome {
            t: self.completed_rounds + 1,
            epoch: self.epoch.index,
            phase,
            participants,
            bids: bids.to_vec(),
            winner: winner.map(|w| w.buyer),
            payment: winner.map_or(0.0, |w| w.amount),
            cleared: winner.is_some(),
            transitions,
            uncleared: self.uncleared,
            allocations: self.allocations.clone(),
        }
    }

    /// Switches to `phase`, skipping phases with no rounds.
    fn enter_phase(&mut self, phase: Phase) {
        let (bad, good) = (self.epoch.bad_rounds, self.epoch.good_rounds);
        match phase {
            Phase::Bad if bad > 0 => {
                self.phase = Phase::Bad;
                self.remaining = bad;
            }
            Phase::Bad | Phase::Good if good > 0 => {
                self.phase = Phase::Good;
                self.remaining = good;
            }
            _ => {
                // Degenerate epoch with no good rounds.
                self.close_epoch(EpochEnd::Completed);
                self.open_epoch();
            }
        }
    }

    fn close_epoch(&mut self, end: EpochEnd) {
        self.record.good_or_rest_at_end = self
            .states
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != BuyerState::Bad)
            .map(|(i, _)| i)
            .collect();
        self.record.uncleared = self.uncleared;
        self.record.end = Some(end);
        for s in self.states.iter_mut() {
            if *s == BuyerState::Rest {
                *s = BuyerState::Good;
            }
        }
        let next = EpochRecord::open(self.epoch, self.completed_rounds + 1, &self.states);
        self.closed.push(std::mem::replace(&mut self.record, next));
    }

    fn open_epoch(&mut self) {
        let good = self.states.iter().filter(|&&s| s == BuyerState::Good).count();
        let bad = self.states.len() - good;
        let index = self.closed.len() as u64;
        self.epoch = EpochConfig::derive(&self.params, &self.table, good, bad, index);
        self.record = EpochRecord::open(self.epoch, self.completed_rounds + 1, &self.states);
        self.uncleared = 0;
        self.allocations.iter_mut().for_each(|a| *a = 0);
        self.enter_phase(Phase::Bad);
    }
}

/// Highest bid with uniform tie-breaking; randomness is drawn only on ties.
fn highest_bid<R: Rng + ?Sized>(bids: &[Bid], rng: &mut R) -> Option<Bid> {
    let top = bids.iter().map(|b| b.amount).fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<&Bid> = bids.iter().filter(|b| b.amount == top).collect();
    match tied.len() {
        0 => None,
        1 => Some(*tied[0]),
        k => Some(*tied[rng.gen_range(0..k)]),
    }
}
