//! The common value prior and the single-auction scalars derived from it.
//!
//! Every buyer draws its per-round value i.i.d. from one [`ValueDistribution`].
//! The mechanism reads its reserves off a handful of scalars computed here:
//!
//! | scalar | meaning |
//! |---|---|
//! | `q_m` | `F^{-1}(1 - 1/m)` under the left-continuous infimum convention |
//! | `q†_m` | `E[v | v >= q_m]` |
//! | `θ_m` | probability that a fixed buyer wins the optimal auction among `m` buyers |
//! | `p_m` | `F^{-1}(1 - θ_m)` |
//! | `Rev(n)` | expected revenue of the optimal auction among `n` buyers |
//!
//! Finite supports are evaluated in closed form through order statistics, so
//! results are exact up to floating point. Continuous kinds go through the
//! quantile function and double-exponential quadrature.

pub mod enumerate;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the probability mass of a finite support.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;

/// Absolute target for the quadrature used by continuous kinds.
pub const INTEGRATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("finite support is empty")]
    EmptySupport,
    #[error("support value {0} is negative or not finite")]
    InvalidValue(f64),
    #[error("support values must be strictly increasing ({prev} then {next})")]
    NotIncreasing { prev: f64, next: f64 },
    #[error("point probability {0} is outside (0, 1]")]
    InvalidProbability(f64),
    #[error("probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
    #[error("uniform bounds must satisfy 0 <= lo < hi, got lo={lo}, hi={hi}")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("invalid quantile table: {0}")]
    InvalidKnots(String),
    #[error("probability argument {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("buyer count must be at least 1")]
    ZeroCount,
}

/// Document form of a distribution, as read from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    /// `{"kind":"finite","support":[[v,p],...]}`
    Finite { support: Vec<(f64, f64)> },
    /// `{"kind":"uniform","lo":x,"hi":y}`
    Uniform { lo: f64, hi: f64 },
    /// Piecewise-linear quantile function through `[[p, v], ...]`, with `p`
    /// running from 0 to 1 and `v` strictly increasing.
    Quantile { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Finite {
        values: Vec<f64>,
        probs: Vec<f64>,
        /// `cdf[k] = P(v <= values[k])`; the last entry is pinned to 1.
        cdf: Vec<f64>,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Quantile {
        probs: Vec<f64>,
        values: Vec<f64>,
    },
}

/// The common prior `F`. Immutable once built, so it can be shared freely
/// between concurrent replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionSpec", into = "DistributionSpec")]
pub struct ValueDistribution {
    kind: Kind,
}

impl TryFrom<DistributionSpec> for ValueDistribution {
    type Error = DistributionError;

    fn try_from(spec: DistributionSpec) -> Result<Self, Self::Error> {
        match spec {
            DistributionSpec::Finite { support } => Self::finite(&support),
            DistributionSpec::Uniform { lo, hi } => Self::uniform(lo, hi),
            DistributionSpec::Quantile { knots } => Self::quantile_table(&knots),
        }
    }
}

impl From<ValueDistribution> for DistributionSpec {
    fn from(dist: ValueDistribution) -> Self {
        match dist.kind {
            Kind::Finite { values, probs, .. } => DistributionSpec::Finite {
                support: values.into_iter().zip(probs).collect(),
            },
            Kind::Uniform { lo, hi } => DistributionSpec::Uniform { lo, hi },
            Kind::Quantile { probs, values } => DistributionSpec::Quantile {
                knots: probs.into_iter().zip(values).collect(),
            },
        }
    }
}

/// The scalars the mechanism and the benchmarks need for a given `m` (and `n`
/// for the optimal revenue).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuctionScalars {
    pub m: usize,
    pub n: usize,
    pub q: f64,
    pub q_dagger: f64,
    pub theta: f64,
    pub p: f64,
    pub rev_mye: f64,
}

impl ValueDistribution {
    /// Finite support from `(value, probability)` pairs.
    pub fn finite(support: &[(f64, f64)]) -> Result<Self, DistributionError> {
        if support.is_empty() {
            return Err(DistributionError::EmptySupport);
        }
        let mut values = Vec::with_capacity(support.len());
        let mut probs = Vec::with_capacity(support.len());
        for &(v, p) in support {
            if !v.is_finite() || v < 0.0 {
                return Err(DistributionError::InvalidValue(v));
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(DistributionError::InvalidProbability(p));
            }
            if let Some(&prev) = values.last() {
                if v <= prev {
                    return Err(DistributionError::NotIncreasing { prev, next: v });
                }
            }
            values.push(v);
            probs.push(p);
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(DistributionError::ProbabilitySum(total));
        }
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        *cdf.last_mut().expect("non-empty") = 1.0;
        Ok(Self {
            kind: Kind::Finite { values, probs, cdf },
        })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self, DistributionError> {
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
            return Err(DistributionError::InvalidBounds { lo, hi });
        }
        Ok(Self {
            kind: Kind::Uniform { lo, hi },
        })
    }

    pub fn point_mass(value: f64) -> Result<Self, DistributionError> {
        Self::finite(&[(value, 1.0)])
    }

    /// Continuous distribution given by a piecewise-linear inverse CDF.
    pub fn quantile_table(knots: &[(f64, f64)]) -> Result<Self, DistributionError> {
        let bad = |msg: &str| Err(DistributionError::InvalidKnots(msg.to_string()));
        if knots.len() < 2 {
            return bad("need at least two knots");
        }
        if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return bad("probabilities must start at 0 and end at 1");
        }
        for w in knots.windows(2) {
            let ((p0, v0), (p1, v1)) = (w[0], w[1]);
            if p1.partial_cmp(&p0) != Some(std::cmp::Ordering::Greater) {
                return bad("probabilities must be strictly increasing");
            }
            if v1.partial_cmp(&v0) != Some(std::cmp::Ordering::Greater) {
                return bad("values must be strictly increasing");
            }
        }
        if knots.iter().any(|&(p, v)| !p.is_finite() || !v.is_finite() || v < 0.0) {
            return bad("values must be finite and nonnegative");
        }
        Ok(Self {
            kind: Kind::Quantile {
                probs: knots.iter().map(|k| k.0).collect(),
                values: knots.iter().map(|k| k.1).collect(),
            },
        })
    }

    pub fn is_finite_support(&self) -> bool {
        matches!(self.kind, Kind::Finite { .. })
    }

    /// Support points and their probabilities, for finite kinds.
    pub fn support(&self) -> Option<(&[f64], &[f64])> {
        match &self.kind {
            Kind::Finite { values, probs, .. } => Some((values, probs)),
            _ => None,
        }
    }

    pub fn min_value(&self) -> f64 {
        match &self.kind {
            Kind::Finite { values, .. } => values[0],
            Kind::Uniform { lo, .. } => *lo,
            Kind::Quantile { values, .. } => values[0],
        }
    }

    pub fn max_value(&self) -> f64 {
        match &self.kind {
            Kind::Finite { values, .. } => values[values.len() - 1],
            Kind::Uniform { hi, .. } => *hi,
            Kind::Quantile { values, .. } => values[values.len() - 1],
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            Kind::Finite { values, probs, .. } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
            Kind::Uniform { lo, hi } => 0.5 * (lo + hi),
            Kind::Quantile { probs, values } => quantile_segment_integral(probs, values, 0.0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        match &self.kind {
            Kind::Finite { values, cdf, .. } => {
                let idx = cdf.partition_point(|&c| c <= u).min(values.len() - 1);
                values[idx]
            }
            Kind::Uniform { lo, hi } => lo + u * (hi - lo),
            Kind::Quantile { probs, values } => interpolate_quantile(probs, values, u),
        }
    }

    /// `F(x) = P(v <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Finite { values, cdf, .. } => {
                let idx = values.partition_point(|&v| v <= x);
                if idx == 0 {
                    0.0
                } else {
                    cdf[idx - 1]
                }
            }
            Kind::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Kind::Quantile { probs, values } => {
                if x <= values[0] {
                    return 0.0;
                }
                if x >= values[values.len() - 1] {
                    return 1.0;
                }
                let k = values.partition_point(|&v| v <= x);
                let (v0, v1) = (values[k - 1], values[k]);
                let (p0, p1) = (probs[k - 1], probs[k]);
                p0 + (x - v0) / (v1 - v0) * (p1 - p0)
            }
        }
    }

    /// `inf { v : F(v) >= p }`.
    pub fn inv_cdf(&self, p: f64) -> Result<f64, DistributionError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(DistributionError::ProbabilityOutOfRange(p));
        }
        Ok(match &self.kind {
            Kind::Finite { values, cdf, .. } => {
                let idx = cdf
                    .iter()
                    .position(|&c| c >= p - PROBABILITY_SUM_TOLERANCE)
                    .unwrap_or(values.len() - 1);
                values[idx]
            }
            Kind::Uniform { lo, hi } => lo + p * (hi - lo),
            Kind::Quantile { probs, values } => interpolate_quantile(probs, values, p),
        })
    }

    /// `q_m = F^{-1}(1 - 1/m)`.
    pub fn quantile_q(&self, m: usize) -> Result<f64, DistributionError> {
        if m == 0 {
            return Err(DistributionError::ZeroCount);
        }
        self.inv_cdf(1.0 - 1.0 / m as f64)
    }

    /// `q†_m = E[v | v >= q_m]`, with `q†_0 = 0`.
    pub fn upper_tail_mean(&self, m: usize) -> f64 {
        if m == 0 {
            return 0.0;
        }
        let q = self.quantile_q(m).expect("m >= 1");
        match &self.kind {
            Kind::Finite { values, probs, .. } => {
                let (mut mass, mut weighted) = (0.0, 0.0);
                for (&v, &p) in values.iter().zip(probs) {
                    if v >= q {
                        mass += p;
                        weighted += v * p;
                    }
                }
                weighted / mass
            }
            Kind::Uniform { hi, .. } => 0.5 * (q + hi),
            Kind::Quantile { probs, values } => {
                let from = 1.0 - 1.0 / m as f64;
                quantile_segment_integral(probs, values, from) * m as f64
            }
        }
    }

    /// A price maximising `r * P(v >= r)`; ties go to the smaller price.
    pub fn monopoly_reserve(&self) -> f64 {
        match &self.kind {
            Kind::Finite { values, cdf, .. } => {
                let mut best = (values[0], f64::NEG_INFINITY);
                for (k, &v) in values.iter().enumerate() {
                    let above = if k == 0 { 1.0 } else { 1.0 - cdf[k - 1] };
                    let rev = v * above;
                    if rev > best.1 + tie_tolerance(best.1) {
                        best = (v, rev);
                    }
                }
                best.0
            }
            Kind::Uniform { lo, hi } => lo.max(0.5 * hi),
            Kind::Quantile { probs, values } => {
                // (1 - u) Q(u) is a concave quadratic on each linear piece.
                let mut best = (values[0], f64::NEG_INFINITY);
                for k in 1..probs.len() {
                    let (u0, u1) = (probs[k - 1], probs[k]);
                    let slope = (values[k] - values[k - 1]) / (u1 - u0);
                    let intercept = values[k - 1] - slope * u0;
                    let mut candidates = vec![u0, u1];
                    let stationary = (slope - intercept) / (2.0 * slope);
                    if stationary > u0 && stationary < u1 {
                        candidates.push(stationary);
                    }
                    candidates.sort_by(f64::total_cmp);
                    for u in candidates {
                        let price = intercept + slope * u;
                        let rev = (1.0 - u) * price;
                        if rev > best.1 + tie_tolerance(best.1) {
                            best = (price, rev);
                        }
                    }
                }
                best.0
            }
        }
    }

    /// Expected revenue of a second-price auction with reserve `reserve`
    /// among `n` i.i.d. buyers. Ties at the top pay the tied value.
    pub fn second_price_revenue(&self, reserve: f64, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Finite { values, cdf, .. } => {
                let r = values.partition_point(|&v| v < reserve);
                if r == values.len() {
                    return 0.0;
                }
                finite_spa_revenue(values, cdf, r, n, reserve)
            }
            _ => {
                let below = self.cdf(reserve);
                let nf = n as f64;
                let lone = reserve * nf * (1.0 - below) * below.powi(n as i32 - 1);
                if n == 1 {
                    return lone;
                }
                // E[V_(2) 1{V_(2) >= r}] in quantile space: the second highest of
                // n uniforms has density n (n - 1) u^{n-2} (1 - u).
                let density = |u: f64| nf * (nf - 1.0) * u.powi(n as i32 - 2) * (1.0 - u);
                lone + self.integrate_quantile_weighted(below, density)
            }
        }
    }

    /// Probability that a fixed buyer wins a second-price auction with reserve
    /// `reserve` among `m` i.i.d. buyers, ties split uniformly.
    pub fn win_prob_with_reserve(&self, reserve: f64, m: usize) -> f64 {
        if m == 0 {
            return 0.0;
        }
        // Symmetry: each buyer takes 1/m of P(max >= reserve).
        let below = self.prob_below(reserve);
        (1.0 - below.powi(m as i32)) / m as f64
    }

    /// Reserve of the optimal auction among `n` buyers (second-price with the
    /// revenue-maximising reserve; ties break toward the smaller reserve).
    pub fn optimal_reserve(&self, n: usize) -> f64 {
        if n <= 1 {
            return self.monopoly_reserve();
        }
        match &self.kind {
            Kind::Finite { values, cdf, .. } => {
                let mut best = (values[0], f64::NEG_INFINITY);
                for (r, &v) in values.iter().enumerate() {
                    let rev = finite_spa_revenue(values, cdf, r, n, v);
                    if rev > best.1 + tie_tolerance(best.1) {
                        best = (v, rev);
                    }
                }
                best.0
            }
            // Regular: the monopoly reserve is optimal for every n.
            Kind::Uniform { .. } => self.monopoly_reserve(),
            Kind::Quantile { .. } => self.maximize_reserve(n),
        }
    }

    /// `Rev(n)`: optimal single-item revenue among `n` i.i.d. buyers, `Rev(0) = 0`.
    pub fn myerson_revenue(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        self.second_price_revenue(self.optimal_reserve(n), n)
    }

    /// `θ_m`.
    pub fn myerson_win_prob(&self, m: usize) -> Result<f64, DistributionError> {
        if m == 0 {
            return Err(DistributionError::ZeroCount);
        }
        Ok(self.win_prob_with_reserve(self.optimal_reserve(m), m))
    }

    /// `p_m = F^{-1}(1 - θ_m)`.
    pub fn p_quantile(&self, m: usize) -> Result<f64, DistributionError> {
        let theta = self.myerson_win_prob(m)?;
        self.inv_cdf((1.0 - theta).clamp(0.0, 1.0))
    }

    pub fn scalars(&self, m: usize, n: usize) -> Result<AuctionScalars, DistributionError> {
        Ok(AuctionScalars {
            m,
            n,
            q: self.quantile_q(m)?,
            q_dagger: self.upper_tail_mean(m),
            theta: self.myerson_win_prob(m)?,
            p: self.p_quantile(m)?,
            rev_mye: self.myerson_revenue(n),
        })
    }

    /// `P(v < x)`.
    fn prob_below(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Finite { values, cdf, .. } => {
                let idx = values.partition_point(|&v| v < x);
                if idx == 0 {
                    0.0
                } else {
                    cdf[idx - 1]
                }
            }
            _ => self.cdf(x),
        }
    }

    /// `∫_{from}^{1} Q(u) w(u) du` for continuous kinds, split at the knots of
    /// the quantile function so each piece is smooth.
    fn integrate_quantile_weighted(&self, from: f64, weight: impl Fn(f64) -> f64) -> f64 {
        let mut breaks = vec![from];
        if let Kind::Quantile { probs, .. } = &self.kind {
            breaks.extend(probs.iter().copied().filter(|&p| p > from && p < 1.0));
        }
        breaks.push(1.0);
        breaks
            .windows(2)
            .map(|w| {
                let f = |u: f64| self.inv_cdf(u.clamp(0.0, 1.0)).expect("in range") * weight(u);
                quadrature::integrate(f, w[0], w[1], INTEGRATION_TOLERANCE).integral
            })
            .sum()
    }

    /// Grid scan over the quantile of the reserve followed by golden-section
    /// refinement.
    fn maximize_reserve(&self, n: usize) -> f64 {
        const GRID: usize = 400;
        let rev_at = |u: f64| {
            let r = self.inv_cdf(u).expect("in range");
            self.second_price_revenue(r, n)
        };
        let mut best = (0usize, f64::NEG_INFINITY);
        for i in 0..GRID {
            let rev = rev_at(i as f64 / GRID as f64);
            if rev > best.1 + tie_tolerance(best.1) {
                best = (i, rev);
            }
        }
        let lo = best.0.saturating_sub(1) as f64 / GRID as f64;
        let hi = ((best.0 + 1) as f64 / GRID as f64).min(1.0 - 1e-12);
        let u = golden_section_max(rev_at, lo, hi, 1e-10);
        let refined = self.inv_cdf(u).expect("in range");
        let grid_price = self.inv_cdf(best.0 as f64 / GRID as f64).expect("in range");
        if self.second_price_revenue(refined, n) > best.1 {
            refined
        } else {
            grid_price
        }
    }
}

fn tie_tolerance(reference: f64) -> f64 {
    if reference.is_finite() {
        1e-12 * reference.abs().max(1.0)
    } else {
        0.0
    }
}

/// Closed-form SPA revenue on a finite support with reserve `values[r]`
/// (charged as `reserve_price`, which is `values[r]` unless called with an
/// off-support reserve).
fn finite_spa_revenue(values: &[f64], cdf: &[f64], r: usize, n: usize, reserve_price: f64) -> f64 {
    let below = if r == 0 { 0.0 } else { cdf[r - 1] };
    let nf = n as f64;
    // P(V_(1) >= v_r, V_(2) < v_r): exactly one buyer clears the reserve.
    let lone = nf * (1.0 - below) * below.powi(n as i32 - 1);
    // G(a) = P(V_(2) <= x) when F(x) = a.
    let second_cdf = |a: f64| {
        if n == 1 {
            1.0
        } else {
            a.powi(n as i32) + nf * (1.0 - a) * a.powi(n as i32 - 1)
        }
    };
    let mut rev = reserve_price * lone;
    let mut prev = second_cdf(below);
    for k in r..values.len() {
        let cur = second_cdf(cdf[k]);
        rev += values[k] * (cur - prev);
        prev = cur;
    }
    rev
}

fn interpolate_quantile(probs: &[f64], values: &[f64], u: f64) -> f64 {
    let k = probs.partition_point(|&p| p <= u).clamp(1, probs.len() - 1);
    let (p0, p1) = (probs[k - 1], probs[k]);
    let (v0, v1) = (values[k - 1], values[k]);
    v0 + (u - p0) / (p1 - p0) * (v1 - v0)
}

/// `∫_{from}^{1} Q(u) du` for a piecewise-linear `Q` (trapezoids are exact).
fn quantile_segment_integral(probs: &[f64], values: &[f64], from: f64) -> f64 {
    let mut total = 0.0;
    for k in 1..probs.len() {
        let (p0, p1) = (probs[k - 1].max(from), probs[k]);
        if p1 <= p0 {
            continue;
        }
        let a = interpolate_quantile(probs, values, p0);
        let b = if k == probs.len() - 1 {
            values[k]
        } else {
            interpolate_quantile(probs, values, p1)
        };
        total += 0.5 * (a + b) * (p1 - p0);
    }
    total
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_point() -> ValueDistribution {
        ValueDistribution::finite(&[(1.0, 0.5), (2.0, 0.5)]).unwrap()
    }

    fn unit() -> ValueDistribution {
        ValueDistribution::uniform(0.0, 1.0).unwrap()
    }

    fn sample_mean(dist: &ValueDistribution, draws: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        (0..draws).map(|_| dist.sample(&mut rng)).sum::<f64>() / draws as f64
    }

    #[test]
    fn sampling_converges_to_mean() {
        assert_abs_diff_eq!(sample_mean(&two_point(), 1_000_000), 1.5, epsilon = 0.01);
        assert_abs_diff_eq!(sample_mean(&unit(), 1_000_000), 0.5, epsilon = 0.01);
        let point = ValueDistribution::point_mass(3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| point.sample(&mut rng) == 3.0));
    }

    #[test]
    fn inverse_cdf_uses_left_continuous_infimum() {
        assert_eq!(unit().inv_cdf(0.5).unwrap(), 0.5);
        assert_eq!(two_point().inv_cdf(0.5).unwrap(), 1.0);
        assert_eq!(two_point().inv_cdf(0.0).unwrap(), 1.0);
        assert_eq!(unit().inv_cdf(0.0).unwrap(), 0.0);
        assert!(matches!(
            unit().inv_cdf(1.5),
            Err(DistributionError::ProbabilityOutOfRange(_))
        ));
        assert!(unit().inv_cdf(-0.1).is_err());
    }

    #[test]
    fn quantiles_and_tail_means_on_uniform() {
        let d = unit();
        assert_eq!(d.quantile_q(2).unwrap(), 0.5);
        assert_eq!(d.quantile_q(4).unwrap(), 0.75);
        assert_eq!(d.quantile_q(1).unwrap(), 0.0);
        assert!(matches!(d.quantile_q(0), Err(DistributionError::ZeroCount)));
        assert_abs_diff_eq!(d.upper_tail_mean(2), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(d.upper_tail_mean(4), 0.875, epsilon = 1e-15);
        assert_abs_diff_eq!(d.upper_tail_mean(1), d.mean(), epsilon = 1e-15);
        assert_eq!(d.upper_tail_mean(0), 0.0);
        assert_abs_diff_eq!(two_point().upper_tail_mean(1), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn monopoly_reserves() {
        assert_abs_diff_eq!(unit().monopoly_reserve(), 0.5, epsilon = 1e-12);
        assert_eq!(two_point().monopoly_reserve(), 1.0);
        assert_eq!(ValueDistribution::point_mass(3.0).unwrap().monopoly_reserve(), 3.0);
        // Uniform on [0.6, 1]: hi/2 lies below the support.
        assert_eq!(ValueDistribution::uniform(0.6, 1.0).unwrap().monopoly_reserve(), 0.6);
    }

    #[test]
    fn myerson_revenue_examples() {
        let d = unit();
        assert_eq!(d.myerson_revenue(0), 0.0);
        assert_abs_diff_eq!(d.myerson_revenue(1), 0.25, epsilon = 1e-9);
        assert_abs_diff_eq!(d.myerson_revenue(2), 5.0 / 12.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.myerson_revenue(3), 17.0 / 32.0, epsilon = 1e-9);
        assert_abs_diff_eq!(two_point().myerson_revenue(2), 1.5, epsilon = 1e-15);
        assert_eq!(two_point().optimal_reserve(2), 2.0);
    }

    #[test]
    fn win_probabilities_and_p_quantiles() {
        let d = unit();
        assert_abs_diff_eq!(d.myerson_win_prob(1).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(d.myerson_win_prob(2).unwrap(), 0.375, epsilon = 1e-12);
        assert_abs_diff_eq!(two_point().myerson_win_prob(2).unwrap(), 0.375, epsilon = 1e-15);
        assert!(d.myerson_win_prob(0).is_err());
        assert_abs_diff_eq!(d.p_quantile(2).unwrap(), 0.625, epsilon = 1e-12);
        assert_abs_diff_eq!(d.p_quantile(1).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(two_point().p_quantile(2).unwrap(), 2.0);
    }

    #[test]
    fn construction_rejects_bad_supports() {
        use DistributionError as E;
        assert_eq!(ValueDistribution::finite(&[]), Err(E::EmptySupport));
        assert!(matches!(
            ValueDistribution::finite(&[(1.0, 0.5), (0.5, 0.5)]),
            Err(E::NotIncreasing { .. })
        ));
        assert!(matches!(
            ValueDistribution::finite(&[(1.0, 0.5), (2.0, 0.4)]),
            Err(E::ProbabilitySum(_))
        ));
        assert!(matches!(
            ValueDistribution::finite(&[(-1.0, 1.0)]),
            Err(E::InvalidValue(_))
        ));
        assert!(ValueDistribution::uniform(1.0, 1.0).is_err());
        assert!(ValueDistribution::quantile_table(&[(0.0, 0.0), (0.5, 0.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn quantile_table_matches_uniform() {
        let table = ValueDistribution::quantile_table(&[(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)]).unwrap();
        let d = unit();
        for m in 1..=6 {
            assert_abs_diff_eq!(table.upper_tail_mean(m), d.upper_tail_mean(m), epsilon = 1e-12);
            assert_abs_diff_eq!(table.myerson_revenue(m), d.myerson_revenue(m), epsilon = 1e-8);
            assert_abs_diff_eq!(
                table.myerson_win_prob(m).unwrap(),
                d.myerson_win_prob(m).unwrap(),
                epsilon = 1e-8
            );
        }
        assert_abs_diff_eq!(table.monopoly_reserve(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn document_round_trip() {
        let json = r#"{"kind":"finite","support":[[1.0,0.5],[2.0,0.5]]}"#;
        let d: ValueDistribution = serde_json::from_str(json).unwrap();
        assert_eq!(d, two_point());
        let back = serde_json::to_string(&d).unwrap();
        assert_eq!(back, json);
        let bad = r#"{"kind":"uniform","lo":2.0,"hi":1.0}"#;
        assert!(serde_json::from_str::<ValueDistribution>(bad).is_err());
    }

    fn arb_continuous() -> impl Strategy<Value = ValueDistribution> {
        prop_oneof![
            (0.0f64..2.0, 0.1f64..3.0).prop_map(|(lo, w)| ValueDistribution::uniform(lo, lo + w).unwrap()),
            prop::collection::vec(0.05f64..1.0, 1..6).prop_map(|steps| {
                let k = steps.len();
                let mut knots = vec![(0.0, 0.0)];
                let mut v = 0.0;
                for (i, s) in steps.iter().enumerate() {
                    v += s;
                    knots.push(((i + 1) as f64 / k as f64, v));
                }
                ValueDistribution::quantile_table(&knots).unwrap()
            }),
        ]
    }

    fn arb_finite() -> impl Strategy<Value = ValueDistribution> {
        prop::collection::vec((0.05f64..1.0, 0.05f64..1.0), 1..5).prop_map(|raw| {
            let total: f64 = raw.iter().map(|r| r.1).sum();
            let mut v = 0.0;
            let support: Vec<_> = raw
                .iter()
                .map(|&(step, w)| {
                    v += step;
                    (v, w / total)
                })
                .collect();
            let sum: f64 = support.iter().map(|s| s.1).sum();
            let mut support = support;
            let last = support.len() - 1;
            support[last].1 += 1.0 - sum;
            ValueDistribution::finite(&support).unwrap()
        })
    }

    proptest! {
        #[test]
        fn inv_cdf_is_monotone(d in prop_oneof![arb_continuous(), arb_finite()], a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(d.inv_cdf(lo).unwrap() <= d.inv_cdf(hi).unwrap());
        }

        #[test]
        fn quantile_scalars_are_ordered(d in prop_oneof![arb_continuous(), arb_finite()], m in 1usize..8) {
            let q = d.quantile_q(m).unwrap();
            let qd = d.upper_tail_mean(m);
            prop_assert!(qd >= q - 1e-12);
            prop_assert!(d.quantile_q(m + 1).unwrap() >= q);
            prop_assert!(d.upper_tail_mean(m + 1) >= qd - 1e-12);
            let theta = d.myerson_win_prob(m).unwrap();
            prop_assert!(theta <= 1.0 / m as f64 + 1e-12);
            prop_assert!(d.p_quantile(m).unwrap() >= q);
        }

        #[test]
        fn myerson_revenue_monotone_and_below_tail_mean(d in arb_continuous(), n in 1usize..7) {
            let rev = d.myerson_revenue(n);
            prop_assert!(d.myerson_revenue(n + 1) >= rev - 1e-9);
            prop_assert!(rev <= d.upper_tail_mean(n) + 1e-9);
        }

        #[test]
        fn scaled_tail_means_decrease(d in arb_continuous(), n in 1usize..9) {
            let scaled = |m: usize| d.upper_tail_mean(m) / m as f64;
            for m1 in 1..=n {
                for m2 in m1..=n {
                    prop_assert!(scaled(m1) >= scaled(m2) - 1e-12);
                }
            }
            for mg in 1..=n {
                for mb in n.div_ceil(2)..=n {
                    prop_assert!(scaled(mg) >= 0.5 * scaled(mb) - 1e-12);
                }
            }
        }
    }
}
