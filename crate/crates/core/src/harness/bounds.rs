use serde::{Deserialize, Serialize};

use super::simulate::Trajectory;
use super::summary::Estimate;
use crate::distributions::ValueDistribution;
use crate::mechanism::{EpochEnd, MechanismParams};

/// `(1−ε)/4 · q†_{n_soph} + ρ(1−ε)/2 · (1−1/e) · Rev(n_naive)`, per round.
pub fn theorem_lower_bound(dist: &ValueDistribution, params: &MechanismParams, n_soph: usize, n_naive: usize) -> f64 {
    let (eps, rho) = (params.epsilon(), params.rho());
    (1.0 - eps) / 4.0 * dist.upper_tail_mean(n_soph) + naive_term(dist, n_naive, eps, rho)
}

/// Variant with the `(1−δ)(1−ρ)` factor on the sophisticated term.
pub fn discounted_lower_bound(
    dist: &ValueDistribution,
    params: &MechanismParams,
    n_soph: usize,
    n_naive: usize,
) -> f64 {
    let (eps, delta, rho) = (params.epsilon(), params.delta(), params.rho());
    (1.0 - eps) * (1.0 - delta) * (1.0 - rho) / 4.0 * dist.upper_tail_mean(n_soph) + naive_term(dist, n_naive, eps, rho)
}

fn naive_term(dist: &ValueDistribution, n_naive: usize, eps: f64, rho: f64) -> f64 {
    rho * (1.0 - eps) / 2.0 * (1.0 - (-1.0f64).exp()) * dist.myerson_revenue(n_naive)
}

/// `q†_{n_soph} + Rev(n_naive)`, per round.
pub fn revenue_upper_bound(dist: &ValueDistribution, n_soph: usize, n_naive: usize) -> f64 {
    dist.upper_tail_mean(n_soph) + dist.myerson_revenue(n_naive)
}

/// Finite-horizon discount `(n + resets) · E_max · max r_g / T`.
pub fn slack(params: &MechanismParams, resets: usize, max_r_g: f64) -> f64 {
    if params.horizon() == 0 {
        return 0.0;
    }
    (params.n() + resets) as f64 * params.max_epoch_length() as f64 * max_r_g / params.horizon() as f64
}

/// Slack for a realised run: resets counted and `max r_g` taken over its epochs.
pub fn trajectory_slack(t: &Trajectory) -> f64 {
    let resets = t
        .epochs
        .iter()
        .filter(|e| e.record.end == Some(EpochEnd::Reset))
        .count();
    let max_r_g = t.epochs.iter().map(|e| e.record.config.r_g).fold(0.0, f64::max);
    slack(&t.params, resets, max_r_g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    /// `measured − bound` for lower bounds, `bound − measured` for upper ones.
    pub margin: f64,
    pub detail: String,
}

impl Check {
    pub fn at_least(name: impl Into<String>, measured: f64, bound: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed: measured >= bound,
            measured,
            bound,
            margin: measured - bound,
            detail: detail.into(),
        }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, bound: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed: measured <= bound,
            measured,
            bound,
            margin: bound - measured,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n_soph: usize,
    pub n_naive: usize,
    pub theorem_lower_bound: f64,
    pub discounted_lower_bound: f64,
    pub upper_bound: f64,
    pub slack: Option<f64>,
    pub measured: Option<Estimate>,
    pub checks: Vec<Check>,
}

impl BoundReport {
    pub fn new(dist: &ValueDistribution, params: &MechanismParams, n_soph: usize, n_naive: usize) -> Self {
        BoundReport {
            n_soph,
            n_naive,
            theorem_lower_bound: theorem_lower_bound(dist, params, n_soph, n_naive),
            discounted_lower_bound: discounted_lower_bound(dist, params, n_soph, n_naive),
            upper_bound: revenue_upper_bound(dist, n_soph, n_naive),
            slack: None,
            measured: None,
            checks: Vec::new(),
        }
    }
}
