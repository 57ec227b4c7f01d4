use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AgentError;

/// EXP3 over a finite set of experts, with weights kept in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp3 {
    log_weights: Vec<f64>,
    gamma: f64,
    utility_scale: f64,
    pending: Option<(usize, f64)>,
    rounds: u64,
}

impl Exp3 {
    /// `utility_scale` is the largest attainable per-round utility; rewards
    /// are `u / utility_scale` clipped to `[-1, 1]`.
    pub fn new(num_experts: usize, gamma: f64, utility_scale: f64) -> Result<Self, AgentError> {
        if num_experts == 0 {
            return Err(AgentError::EmptyFamily);
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(AgentError::InvalidParameter {
                name: "gamma",
                value: gamma,
            });
        }
        if !(utility_scale > 0.0 && utility_scale.is_finite()) {
            return Err(AgentError::InvalidParameter {
                name: "utility_scale",
                value: utility_scale,
            });
        }
        Ok(Exp3 {
            log_weights: vec![0.0; num_experts],
            gamma,
            utility_scale,
            pending: None,
            rounds: 0,
        })
    }

    /// `min(1, sqrt(N ln N / ((e - 1) T)))`.
    pub fn default_gamma(num_experts: usize, horizon: u64) -> f64 {
        let n = num_experts as f64;
        if num_experts < 2 || horizon == 0 {
            return 1.0;
        }
        (n * n.ln() / ((std::f64::consts::E - 1.0) * horizon as f64))
            .sqrt()
            .min(1.0)
    }

    pub fn num_experts(&self) -> usize {
        self.log_weights.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Relative weights, normalised so the largest is 1.
    pub fn weights(&self) -> Vec<f64> {
        let top = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.log_weights.iter().map(|w| (w - top).exp()).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let w = self.weights();
        let total: f64 = w.iter().sum();
        let n = w.len() as f64;
        w.iter()
            .map(|x| (1.0 - self.gamma) * x / total + self.gamma / n)
            .collect()
    }

    /// Draws an expert; returns its index and selection probability.
    pub fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (usize, f64) {
        let probs = self.probabilities();
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = probs.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                chosen = i;
                break;
            }
        }
        self.pending = Some((chosen, probs[chosen]));
        (chosen, probs[chosen])
    }

    /// Importance-weighted update of the expert picked by the last `select`.
    pub fn update(&mut self, utility: f64) -> Result<(), AgentError> {
        let (chosen, prob) = self.pending.take().ok_or(AgentError::UpdateWithoutSelection)?;
        let reward = (utility / self.utility_scale).clamp(-1.0, 1.0);
        let estimate = reward / prob;
        self.log_weights[chosen] += self.gamma * estimate / self.num_experts() as f64;
        self.rounds += 1;
        Ok(())
    }
}

/// Explore each expert for a block of `block` rounds, then commit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreThenCommit {
    num_experts: usize,
    block: u64,
    totals: Vec<f64>,
    committed: Option<usize>,
}

impl ExploreThenCommit {
    pub fn new(num_experts: usize, block: u64) -> Result<Self, AgentError> {
        if num_experts == 0 {
            return Err(AgentError::EmptyFamily);
        }
        if block == 0 {
            return Err(AgentError::InvalidParameter {
                name: "block",
                value: 0.0,
            });
        }
        Ok(ExploreThenCommit {
            num_experts,
            block,
            totals: vec![0.0; num_experts],
            committed: None,
        })
    }

    /// `L = ⌈T^{2/3} / N⌉`, at least 1.
    pub fn default_block(num_experts: usize, horizon: u64) -> u64 {
        ((horizon as f64).powf(2.0 / 3.0) / num_experts.max(1) as f64)
            .ceil()
            .max(1.0) as u64
    }

    pub fn block(&self) -> u64 {
        self.block
    }

    /// `N · L`, the last exploration round.
    pub fn exploration_rounds(&self) -> u64 {
        self.block * self.num_experts as u64
    }

    pub fn committed(&self) -> Option<usize> {
        self.committed
    }

    pub fn averages(&self) -> Vec<f64> {
        self.totals.iter().map(|t| t / self.block as f64).collect()
    }

    /// Expert to play in 1-based round `t`.
    pub fn expert_for(&mut self, t: u64) -> usize {
        if t >= 1 && t <= self.exploration_rounds() {
            return ((t - 1) / self.block) as usize;
        }
        *self.committed.get_or_insert_with(|| {
            let mut best = 0;
            for (i, &x) in self.totals.iter().enumerate() {
                if x > self.totals[best] {
                    best = i;
                }
            }
            best
        })
    }

    /// Credits utility earned in round `t` to the expert explored then.
    pub fn record(&mut self, t: u64, utility: f64) {
        if t >= 1 && t <= self.exploration_rounds() {
            self.totals[((t - 1) / self.block) as usize] += utility;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fresh_learner_is_uniform() {
        let e = Exp3::new(4, 0.2, 1.0).unwrap();
        for p in e.probabilities() {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_rewards_leave_weights_alone() {
        let mut e = Exp3::new(3, 0.3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            e.select(&mut rng);
            e.update(0.0).unwrap();
        }
        assert_eq!(e.weights(), vec![1.0; 3]);
    }

    #[test]
    fn one_step_by_hand() {
        // Chosen with probability 1/2 and reward 1/2: estimate 1, weight e^{0.1·1/2}.
        let mut e = Exp3::new(2, 0.1, 1.0).unwrap();
        e.pending = Some((0, 0.5));
        e.update(0.5).unwrap();
        let w = e.weights();
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], (-0.05f64).exp(), epsilon = 1e-15);
        let g = 0.05f64.exp();
        let p = e.probabilities();
        assert_abs_diff_eq!(p[0], 0.9 * g / (g + 1.0) + 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(p[0], 0.511_247, epsilon = 1e-6);
    }

    #[test]
    fn double_update_is_rejected() {
        let mut e = Exp3::new(2, 0.1, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        e.select(&mut rng);
        e.update(0.2).unwrap();
        assert_eq!(e.update(0.2), Err(AgentError::UpdateWithoutSelection));
        assert!(Exp3::new(0, 0.1, 1.0).is_err());
    }

    #[test]
    fn etc_schedule_and_commit() {
        let mut etc = ExploreThenCommit::new(2, 50).unwrap();
        assert_eq!(ExploreThenCommit::default_block(2, 1000), 50);
        assert_eq!(etc.expert_for(1), 0);
        assert_eq!(etc.expert_for(50), 0);
        assert_eq!(etc.expert_for(51), 1);
        assert_eq!(etc.expert_for(100), 1);
        etc.record(10, 0.3 * 50.0);
        etc.record(60, 0.1 * 50.0);
        assert_eq!(etc.expert_for(101), 0);
        assert_eq!(etc.committed(), Some(0));

        let mut tied = ExploreThenCommit::new(2, 50).unwrap();
        tied.record(1, 5.0);
        tied.record(51, 5.0);
        assert_eq!(tied.expert_for(101), 0);
    }

    proptest! {
        #[test]
        fn probabilities_are_a_distribution(
            rewards in proptest::collection::vec(-2.0f64..2.0, 0..200),
            n in 1usize..17,
            seed: u64,
        ) {
            let gamma = 0.2;
            let mut e = Exp3::new(n, gamma, 1.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for r in rewards {
                let (_, p) = e.select(&mut rng);
                prop_assert!(p >= gamma / n as f64 - 1e-15);
                e.update(r).unwrap();
            }
            let probs = e.probabilities();
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(e.log_weights.iter().all(|w| w.is_finite()));
        }
    }
}
