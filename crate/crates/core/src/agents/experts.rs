use serde::{Deserialize, Serialize};

use crate::mechanism::{EpochConfig, ProjectedHistory};

/// A bid or value level, either fixed or read off the current epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    GoodReserve,
    BadReserve,
    /// `p_{m_b}`.
    BadQuantile,
    Fixed(f64),
}

impl Level {
    pub fn resolve(self, cfg: &EpochConfig) -> f64 {
        match self {
            Level::GoodReserve => cfg.r_g,
            Level::BadReserve => cfg.r_b,
            Level::BadQuantile => cfg.p_mb,
            Level::Fixed(x) => x,
        }
    }
}

/// Behaviour while in good state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum GoodRule {
    Zero,
    /// Bid `level` when `v >= q_{m_g}` or once the uncleared count has hit
    /// its threshold, else 0. With `level = GoodReserve` this is `s^g`.
    Guarded {
        level: Level,
    },
}

/// Behaviour while in bad state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BadRule {
    Zero,
    /// Bid `bid` when `v >= min_value`, else 0.
    Threshold {
        bid: Level,
        min_value: Level,
    },
    /// Bid `r_b` when `v > r_b`, else 0.
    ReserveAbove,
    /// Bid `v` when `v >= r_b`, else 0.
    TruthfulAboveReserve,
}

/// A deterministic map from (projected history, value) to a bid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expert {
    pub good: GoodRule,
    pub bad: BadRule,
}

/// `s^g` on its own.
pub fn good_strategy_bid(uncleared: u64, cfg: &EpochConfig, value: f64) -> f64 {
    guarded(uncleared, cfg, value, cfg.r_g)
}

fn guarded(uncleared: u64, cfg: &EpochConfig, value: f64, level: f64) -> f64 {
    if uncleared >= cfg.u_threshold || value >= cfg.q_mg {
        level
    } else {
        0.0
    }
}

impl Expert {
    pub const GOOD_STRATEGY: Expert = Expert {
        good: GoodRule::Guarded {
            level: Level::GoodReserve,
        },
        bad: BadRule::Zero,
    };

    pub const BAD_THRESHOLD: Expert = Expert {
        good: GoodRule::Zero,
        bad: BadRule::Threshold {
            bid: Level::BadReserve,
            min_value: Level::BadQuantile,
        },
    };

    pub const COMBINED: Expert = Expert {
        good: GoodRule::Guarded {
            level: Level::GoodReserve,
        },
        bad: BadRule::Threshold {
            bid: Level::BadReserve,
            min_value: Level::BadQuantile,
        },
    };

    pub const ZERO: Expert = Expert {
        good: GoodRule::Zero,
        bad: BadRule::Zero,
    };

    pub fn bid(&self, h: &ProjectedHistory, cfg: &EpochConfig, value: f64) -> f64 {
        if h.in_bad {
            match self.bad {
                BadRule::Zero => 0.0,
                BadRule::Threshold { bid, min_value } => {
                    if value >= min_value.resolve(cfg) {
                        bid.resolve(cfg)
                    } else {
                        0.0
                    }
                }
                BadRule::ReserveAbove => {
                    if value > cfg.r_b {
                        cfg.r_b
                    } else {
                        0.0
                    }
                }
                BadRule::TruthfulAboveReserve => {
                    if value >= cfg.r_b {
                        value
                    } else {
                        0.0
                    }
                }
            }
        } else {
            match self.good {
                GoodRule::Zero => 0.0,
                GoodRule::Guarded { level } => guarded(h.uncleared_this_epoch, cfg, value, level.resolve(cfg)),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// The four mandated benchmarks.
    Benchmark,
    /// Benchmarks followed by grid variants of both templates.
    Standard,
}

/// An ordered, finite set of experts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertFamily {
    experts: Vec<Expert>,
}

/// Default grid: 64 steps across the value range.
pub const DEFAULT_GRID_STEPS: usize = 64;

impl ExpertFamily {
    pub fn new(experts: Vec<Expert>) -> Self {
        ExpertFamily { experts }
    }

    /// Combined, good strategy, bad threshold, always zero, in that order.
    pub fn benchmark() -> Self {
        ExpertFamily::new(vec![
            Expert::COMBINED,
            Expert::GOOD_STRATEGY,
            Expert::BAD_THRESHOLD,
            Expert::ZERO,
        ])
    }

    /// Benchmarks plus, for every grid level `c`, a good-phase template bidding
    /// `c` and a bad-phase template bidding `c` when `v >= c`.
    pub fn standard(lo: f64, hi: f64, steps: usize) -> Self {
        let mut experts = Self::benchmark().experts;
        for c in value_grid(lo, hi, steps) {
            experts.push(Expert {
                good: GoodRule::Guarded { level: Level::Fixed(c) },
                bad: BadRule::Zero,
            });
            experts.push(Expert {
                good: GoodRule::Guarded {
                    level: Level::GoodReserve,
                },
                bad: BadRule::Threshold {
                    bid: Level::Fixed(c),
                    min_value: Level::Fixed(c),
                },
            });
        }
        ExpertFamily::new(experts)
    }

    pub fn of_kind(kind: FamilyKind, lo: f64, hi: f64, steps: usize) -> Self {
        match kind {
            FamilyKind::Benchmark => Self::benchmark(),
            FamilyKind::Standard => Self::standard(lo, hi, steps),
        }
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    pub fn get(&self, i: usize) -> Expert {
        self.experts[i]
    }

    pub fn experts(&self) -> &[Expert] {
        &self.experts
    }

    pub fn position(&self, e: &Expert) -> Option<usize> {
        self.experts.iter().position(|x| x == e)
    }
}

/// `steps + 1` equally spaced points from `lo` to `hi`.
pub fn value_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|k| lo + (hi - lo) * k as f64 / steps as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ValueDistribution;
    use crate::mechanism::{derive_epoch_config, MechanismParams};
    use proptest::prelude::*;

    fn cfg(m_g: usize, n: usize) -> EpochConfig {
        let params = MechanismParams::relaxed(n, 1000, 0.1, 0.1, 0.01).unwrap();
        let d = ValueDistribution::uniform(0.0, 1.0).unwrap();
        derive_epoch_config(&params, m_g, n - m_g, &d).unwrap()
    }

    fn good(u: u64) -> ProjectedHistory {
        ProjectedHistory {
            in_bad: false,
            num_good: 2,
            num_bad: 2,
            uncleared_this_epoch: u,
        }
    }

    fn bad() -> ProjectedHistory {
        ProjectedHistory {
            in_bad: true,
            ..good(0)
        }
    }

    #[test]
    fn good_strategy_rules() {
        // m_g = 2: q = 0.5, r_g = 0.9 · 0.75.
        let c = cfg(2, 4);
        assert!((c.r_g - 0.675).abs() < 1e-12);
        assert_eq!(good_strategy_bid(0, &c, 0.9), c.r_g);
        assert_eq!(good_strategy_bid(0, &c, 0.3), 0.0);
        assert_eq!(good_strategy_bid(c.u_threshold, &c, 0.0), c.r_g);
        assert_eq!(Expert::GOOD_STRATEGY.bid(&good(c.u_threshold), &c, 0.0), c.r_g);
    }

    #[test]
    fn bad_threshold_rules() {
        let c = cfg(2, 4);
        assert!((c.p_mb - 0.625).abs() < 1e-12);
        assert_eq!(Expert::BAD_THRESHOLD.bid(&bad(), &c, 0.9), c.r_b);
        assert_eq!(Expert::BAD_THRESHOLD.bid(&bad(), &c, 0.62), 0.0);
        assert_eq!(Expert::BAD_THRESHOLD.bid(&good(0), &c, 0.9), 0.0);
        assert_eq!(Expert::COMBINED.bid(&good(0), &c, 0.9), c.r_g);
    }

    #[test]
    fn family_layout() {
        let b = ExpertFamily::benchmark();
        assert_eq!(b.len(), 4);
        assert_eq!(b.position(&Expert::GOOD_STRATEGY), Some(1));
        let s = ExpertFamily::standard(0.0, 1.0, DEFAULT_GRID_STEPS);
        assert_eq!(s.len(), 4 + 2 * 65);
        assert!(s.position(&Expert::BAD_THRESHOLD).is_some());
    }

    proptest! {
        #[test]
        fn outputs_on_grid_or_reserves(m_g in 1usize..=4, v in 0.0f64..1.0, u in 0u64..5000, in_bad: bool) {
            let c = cfg(m_g, 4);
            let grid = value_grid(0.0, 1.0, DEFAULT_GRID_STEPS);
            let h = ProjectedHistory { in_bad, num_good: m_g, num_bad: 4 - m_g, uncleared_this_epoch: u };
            let fam = ExpertFamily::standard(0.0, 1.0, DEFAULT_GRID_STEPS);
            for e in fam.experts() {
                let b = e.bid(&h, &c, v);
                prop_assert!(b.is_finite() && b >= 0.0);
                prop_assert!(b == c.r_g || b == c.r_b || grid.contains(&b));
            }
            let sg = good_strategy_bid(u, &c, v);
            prop_assert!(sg == 0.0 || sg == c.r_g);
        }
    }
}
