use serde::{Deserialize, Serialize};

use super::params::{ceil_count, MechanismParams};
use crate::distributions::{DistributionError, ValueDistribution};

/// Quantile scalars for every `m` in `1..=n`, computed once per prior.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTable {
    q: Vec<f64>,
    q_dagger: Vec<f64>,
    p: Vec<f64>,
}

impl ScalarTable {
    pub fn new(dist: &ValueDistribution, n: usize) -> Result<Self, DistributionError> {
        let mut table = ScalarTable {
            q: Vec::with_capacity(n),
            q_dagger: Vec::with_capacity(n),
            p: Vec::with_capacity(n),
        };
        for m in 1..=n {
            table.q.push(dist.quantile_q(m)?);
            table.q_dagger.push(dist.upper_tail_mean(m));
            table.p.push(dist.p_quantile(m)?);
        }
        Ok(table)
    }

    pub fn q(&self, m: usize) -> f64 {
        self.q[m - 1]
    }

    pub fn q_dagger(&self, m: usize) -> f64 {
        self.q_dagger[m - 1]
    }

    pub fn p(&self, m: usize) -> f64 {
        self.p[m - 1]
    }
}

/// Per-epoch quantities, fixed for the whole epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochConfig {
    pub index: u64,
    pub m_g: usize,
    pub m_b: usize,
    pub length: u64,
    pub bad_rounds: u64,
    pub good_rounds: u64,
    pub r_g: f64,
    pub r_b: f64,
    pub q_mg: f64,
    pub q_dagger_mg: f64,
    pub q_mb: f64,
    pub q_dagger_mb: f64,
    pub p_mb: f64,
    pub u_threshold: u64,
    pub threshold_h: u64,
}

impl EpochConfig {
    /// Epoch setup from the sizes of the good and bad sets at epoch start.
    pub fn derive(params: &MechanismParams, table: &ScalarTable, good: usize, bad: usize, index: u64) -> Self {
        let n = params.n();
        let (eps, delta, rho) = (params.epsilon(), params.delta(), params.rho());
        let m_g = good.max(1);
        let m_b = bad.max(n.div_ceil(2));
        let h = params.threshold_h();
        let length = params.epoch_length(m_g);
        let bad_rounds = ceil_count(rho * length as f64).min(length);
        let q_mb = table.q(m_b);
        let p_mb = table.p(m_b);
        EpochConfig {
            index,
            m_g,
            m_b,
            length,
            bad_rounds,
            good_rounds: length - bad_rounds,
            r_g: (1.0 - eps) * table.q_dagger(m_g),
            r_b: p_mb - eps / n as f64 * q_mb,
            q_mg: table.q(m_g),
            q_dagger_mg: table.q_dagger(m_g),
            q_mb,
            q_dagger_mb: table.q_dagger(m_b),
            p_mb,
            u_threshold: ceil_count(m_g as f64 * h as f64 / (1.0 - delta)),
            threshold_h: h,
        }
    }
}

/// Convenience form of [`EpochConfig::derive`] straight from the prior.
pub fn derive_epoch_config(
    params: &MechanismParams,
    good: usize,
    bad: usize,
    dist: &ValueDistribution,
) -> Result<EpochConfig, DistributionError> {
    let table = ScalarTable::new(dist, params.n())?;
    Ok(EpochConfig::derive(params, &table, good, bad, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit() -> ValueDistribution {
        ValueDistribution::uniform(0.0, 1.0).unwrap()
    }

    #[test]
    fn demonstration_epoch() {
        let params = MechanismParams::relaxed(4, 100_000, 0.1, 0.1, 0.01).unwrap();
        let cfg = derive_epoch_config(&params, 4, 0, &unit()).unwrap();
        assert_eq!((cfg.m_g, cfg.m_b), (4, 2));
        assert_eq!(cfg.threshold_h, 922);
        // ⌈2·922·4 / (0.9·0.99)⌉ = ⌈8278.34⌉
        assert_eq!(cfg.length, 8279);
        assert_eq!(cfg.bad_rounds, 83);
        assert_eq!(cfg.good_rounds, 8196);
        assert_abs_diff_eq!(cfg.r_g, 0.7875, epsilon = 1e-12);
        assert_abs_diff_eq!(cfg.r_b, 0.6125, epsilon = 1e-12);
        assert_eq!(cfg.u_threshold, 4098);
    }

    #[test]
    fn floors_on_set_sizes() {
        let params = MechanismParams::relaxed(4, 100, 0.1, 0.1, 0.01).unwrap();
        let cfg = derive_epoch_config(&params, 0, 4, &unit()).unwrap();
        assert_eq!((cfg.m_g, cfg.m_b), (1, 4));
        let odd = MechanismParams::relaxed(5, 100, 0.1, 0.1, 0.01).unwrap();
        assert_eq!(derive_epoch_config(&odd, 5, 0, &unit()).unwrap().m_b, 3);
    }

    #[test]
    fn reserve_relations_hold() {
        let params = MechanismParams::new(6, 100, 0.3, 0.3, MechanismParams::default_rho(0.3)).unwrap();
        let table = ScalarTable::new(&unit(), 6).unwrap();
        for good in 0..=6 {
            let cfg = EpochConfig::derive(&params, &table, good, 6 - good, 0);
            assert!(cfg.r_b >= (1.0 - 0.3 / 6.0) * cfg.q_mb - 1e-12);
            assert!(cfg.p_mb >= cfg.q_mb);
            assert_eq!(cfg.bad_rounds + cfg.good_rounds, cfg.length);
            // Enough good rounds to clear m_g H allocations after the threshold.
            assert!(cfg.good_rounds >= cfg.u_threshold + cfg.m_g as u64 * cfg.threshold_h);
        }
    }
}
