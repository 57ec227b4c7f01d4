//! Brute-force evaluation of single-round auctions over every value profile
//! of a finite support. Independent of the order-statistic formulas in the
//! parent module and used to cross-check them.

use super::{DistributionError, ValueDistribution};
use thiserror::Error;

/// Largest number of profiles `s^n` the enumerator will visit.
pub const DEFAULT_PROFILE_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnumerationError {
    #[error("enumeration needs a finite support")]
    NotFinite,
    #[error("{profiles} profiles exceed the budget of {budget}")]
    BudgetExceeded { profiles: u64, budget: u64 },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Revenue and buyer-0 win probability of one reserve candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReserveOutcome {
    pub reserve: f64,
    pub second_price_revenue: f64,
    pub posted_price_revenue: f64,
    pub win_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedAuction {
    pub n: usize,
    pub candidates: Vec<ReserveOutcome>,
    /// Index into `candidates` of the revenue-maximising reserve.
    pub best: usize,
}

impl EnumeratedAuction {
    pub fn revenue(&self) -> f64 {
        self.candidates[self.best].second_price_revenue
    }

    pub fn win_prob(&self) -> f64 {
        self.candidates[self.best].win_prob
    }

    pub fn reserve(&self) -> f64 {
        self.candidates[self.best].reserve
    }

    /// Best revenue over every second-price and posted-price variant tried.
    pub fn best_variant_revenue(&self) -> f64 {
        self.candidates
            .iter()
            .flat_map(|c| [c.second_price_revenue, c.posted_price_revenue])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Enumerates all `s^n` profiles for every support point used as a reserve.
pub fn enumerate_auction(
    dist: &ValueDistribution,
    n: usize,
    budget: u64,
) -> Result<EnumeratedAuction, EnumerationError> {
    if n == 0 {
        return Err(DistributionError::ZeroCount.into());
    }
    let (values, probs) = dist.support().ok_or(EnumerationError::NotFinite)?;
    let s = values.len();
    let profiles = (s as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    if profiles > budget {
        return Err(EnumerationError::BudgetExceeded { profiles, budget });
    }

    let mut candidates: Vec<ReserveOutcome> = values
        .iter()
        .map(|&reserve| ReserveOutcome {
            reserve,
            second_price_revenue: 0.0,
            posted_price_revenue: 0.0,
            win_prob: 0.0,
        })
        .collect();

    let mut digits = vec![0usize; n];
    let mut profile = vec![0.0; n];
    for _ in 0..profiles {
        let mut weight = 1.0;
        for (slot, &d) in digits.iter().enumerate() {
            profile[slot] = values[d];
            weight *= probs[d];
        }
        let top = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tied = profile.iter().filter(|&&v| v == top).count();
        let second = if tied >= 2 {
            top
        } else {
            profile
                .iter()
                .copied()
                .filter(|&v| v != top)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        for cand in candidates.iter_mut() {
            if top < cand.reserve {
                continue;
            }
            cand.second_price_revenue += weight * second.max(cand.reserve);
            cand.posted_price_revenue += weight * cand.reserve;
            if profile[0] == top {
                cand.win_prob += weight / tied as f64;
            }
        }
        // Odometer increment over the base-s digits.
        for d in digits.iter_mut() {
            *d += 1;
            if *d < s {
                break;
            }
            *d = 0;
        }
    }

    let mut best = 0;
    for (i, cand) in candidates.iter().enumerate() {
        let incumbent = candidates[best].second_price_revenue;
        if cand.second_price_revenue > incumbent + 1e-12 * incumbent.abs().max(1.0) {
            best = i;
        }
    }
    Ok(EnumeratedAuction { n, candidates, best })
}
