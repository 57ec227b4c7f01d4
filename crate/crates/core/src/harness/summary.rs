use serde::{Deserialize, Serialize};

use super::simulate::Trajectory;

/// Normal-approximation 95% quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Sample mean with its standard error and 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Estimate {
    /// Standard error uses the unbiased sample variance; with fewer than two
    /// samples it is 0.
    pub fn from_samples(xs: &[f64]) -> Self {
        let count = xs.len();
        if count == 0 {
            return Estimate {
                mean: f64::NAN,
                se: f64::NAN,
                count,
                ci_lo: f64::NAN,
                ci_hi: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / count as f64;
        let se = if count < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        };
        Estimate {
            mean,
            se,
            count,
            ci_lo: mean - Z95 * se,
            ci_hi: mean + Z95 * se,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub id: usize,
    pub label: String,
    pub utility: f64,
    pub allocations: u64,
    pub good_fraction: f64,
    pub bad_fraction: f64,
    pub rest_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSplit {
    pub epoch: u64,
    pub good_revenue: f64,
    pub bad_revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: Option<u64>,
    pub rounds: u64,
    pub total_revenue: f64,
    pub mean_revenue: f64,
    pub good_revenue: f64,
    pub bad_revenue: f64,
    pub epochs: Vec<EpochSplit>,
    pub uncleared_good_fraction: f64,
    pub agents: Vec<AgentSummary>,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

pub fn summarize(t: &Trajectory) -> RunSummary {
    let tot = &t.totals;
    let rounds = tot.rounds as f64;
    RunSummary {
        seed: t.seed,
        rounds: tot.rounds,
        total_revenue: tot.revenue,
        mean_revenue: ratio(tot.revenue, rounds),
        good_revenue: tot.good_revenue,
        bad_revenue: tot.bad_revenue,
        epochs: t
            .epochs
            .iter()
            .map(|e| EpochSplit {
                epoch: e.record.config.index,
                good_revenue: e.record.good_revenue,
                bad_revenue: e.record.bad_revenue,
            })
            .collect(),
        uncleared_good_fraction: ratio(tot.uncleared_good_rounds as f64, tot.good_rounds as f64),
        agents: (0..t.agent_labels.len())
            .map(|i| {
                let [g, b, r] = tot.occupancy[i];
                AgentSummary {
                    id: i,
                    label: t.agent_labels[i].clone(),
                    utility: tot.utility[i],
                    allocations: tot.wins[i],
                    good_fraction: ratio(g as f64, rounds),
                    bad_fraction: ratio(b as f64, rounds),
                    rest_fraction: ratio(r as f64, rounds),
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentSpec, ExpertPreset, ExpertSpec};
    use crate::distributions::ValueDistribution;
    use crate::harness::{simulate, RunConfig};
    use crate::mechanism::MechanismParams;

    #[test]
    fn estimate_by_hand() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        // Sample variance 5/3, se = sqrt(5/12).
        assert!((e.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(e.ci_lo < e.mean && e.mean < e.ci_hi);
        assert_eq!(Estimate::from_samples(&[3.0]).se, 0.0);
    }

    fn run(horizon: u64, expert: ExpertPreset) -> Trajectory {
        let params = MechanismParams::new(1, horizon, 0.3, 0.3, MechanismParams::default_rho(0.3)).unwrap();
        let cfg = RunConfig::new(
            params,
            ValueDistribution::point_mass(1.0).unwrap(),
            vec![AgentSpec::Expert {
                expert: ExpertSpec::Preset(expert),
            }],
            0,
        );
        simulate(&cfg, 0, true).unwrap()
    }

    #[test]
    fn single_cleared_round() {
        // n = 1 runs one bad round first, then good rounds at r_g = 0.7.
        let t = run(2, ExpertPreset::GoodStrategy);
        let s = summarize(&t);
        assert_eq!(s.rounds, 2);
        assert!((s.total_revenue - 0.7).abs() < 1e-12);
        assert!((s.good_revenue - 0.7).abs() < 1e-12);
        assert_eq!(s.agents[0].allocations, 1);
    }

    #[test]
    fn all_uncleared() {
        let s = summarize(&run(50, ExpertPreset::Zero));
        assert_eq!(s.mean_revenue, 0.0);
        assert_eq!(s.uncleared_good_fraction, 1.0);
    }

    #[test]
    fn epoch_split_sums() {
        let params = MechanismParams::new(1, 1, 0.3, 0.3, MechanismParams::default_rho(0.3)).unwrap();
        let s = summarize(&run(2 * params.max_epoch_length(), ExpertPreset::GoodStrategy));
        assert_eq!(s.epochs.len(), 2);
        let sum: f64 = s.epochs.iter().map(|e| e.good_revenue + e.bad_revenue).sum();
        assert!((sum - s.total_revenue).abs() < 1e-9);
    }
}
