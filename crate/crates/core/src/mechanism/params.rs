use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("{name} must lie strictly between 0 and 1, got {value}")]
    OutOfUnitInterval { name: &'static str, value: f64 },
    #[error("need at least one buyer")]
    NoBuyers,
    #[error("rho = {rho} exceeds the admissible ceiling {ceiling}")]
    RhoTooLarge { rho: f64, ceiling: f64 },
}

/// Static inputs of the mechanism.
///
/// `new` enforces the two conditions on `rho` under which the revenue
/// guarantees are stated; `relaxed` only checks ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsSpec", into = "ParamsSpec")]
pub struct MechanismParams {
    n: usize,
    horizon: u64,
    epsilon: f64,
    delta: f64,
    rho: f64,
    reset_round: Option<u64>,
    enforce_rho_bound: bool,
}

/// Wire form of [`MechanismParams`]: `{n, T, epsilon, delta, rho, reset_round?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsSpec {
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reset_round: Option<u64>,
    #[serde(default = "default_true")]
    pub enforce_rho_bound: bool,
}

fn default_true() -> bool {
    true
}

impl TryFrom<ParamsSpec> for MechanismParams {
    type Error = ParamsError;

    fn try_from(s: ParamsSpec) -> Result<Self, Self::Error> {
        let p = if s.enforce_rho_bound {
            MechanismParams::new(s.n, s.horizon, s.epsilon, s.delta, s.rho)?
        } else {
            MechanismParams::relaxed(s.n, s.horizon, s.epsilon, s.delta, s.rho)?
        };
        Ok(match s.reset_round {
            Some(r) => p.with_reset_round(r),
            None => p,
        })
    }
}

impl From<MechanismParams> for ParamsSpec {
    fn from(p: MechanismParams) -> Self {
        ParamsSpec {
            n: p.n,
            horizon: p.horizon,
            epsilon: p.epsilon,
            delta: p.delta,
            rho: p.rho,
            reset_round: p.reset_round,
            enforce_rho_bound: p.enforce_rho_bound,
        }
    }
}

/// Ceiling that ignores floating-point noise just above an integer.
pub(crate) fn ceil_count(x: f64) -> u64 {
    (x - 1e-9).ceil().max(0.0) as u64
}

impl MechanismParams {
    pub fn new(n: usize, horizon: u64, epsilon: f64, delta: f64, rho: f64) -> Result<Self, ParamsError> {
        let p = Self::relaxed(n, horizon, epsilon, delta, rho)?;
        let ceiling = p.rho_ceiling();
        if rho > ceiling * (1.0 + 1e-12) {
            return Err(ParamsError::RhoTooLarge { rho, ceiling });
        }
        Ok(Self {
            enforce_rho_bound: true,
            ..p
        })
    }

    /// Range checks only; used for demonstration settings outside the
    /// `rho` ceiling.
    pub fn relaxed(n: usize, horizon: u64, epsilon: f64, delta: f64, rho: f64) -> Result<Self, ParamsError> {
        if n == 0 {
            return Err(ParamsError::NoBuyers);
        }
        for (name, value) in [("epsilon", epsilon), ("delta", delta), ("rho", rho)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(ParamsError::OutOfUnitInterval { name, value });
            }
        }
        Ok(Self {
            n,
            horizon,
            epsilon,
            delta,
            rho,
            reset_round: None,
            enforce_rho_bound: false,
        })
    }

    /// Largest `rho` allowed by `new`:
    /// `min(ε(1−ε)^4/12, ε(1−ε)(1−δ)(1−ρ)/(12(1+ε)))`.
    pub fn rho_ceiling(&self) -> f64 {
        let e = self.epsilon;
        let main = e * (1.0 - e).powi(4) / 12.0;
        let coupled = e * (1.0 - e) * (1.0 - self.delta) * (1.0 - self.rho) / (12.0 * (1.0 + e));
        main.min(coupled)
    }

    /// `ρ = ε(1−ε)^4/12`, the largest value the main bound admits.
    pub fn default_rho(epsilon: f64) -> f64 {
        epsilon * (1.0 - epsilon).powi(4) / 12.0
    }

    pub fn with_reset_round(mut self, round: u64) -> Self {
        self.reset_round = Some(round);
        self
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn reset_round(&self) -> Option<u64> {
        self.reset_round
    }

    /// `H = ⌈4 ln(1/ε) / δ²⌉`, at least 1.
    pub fn threshold_h(&self) -> u64 {
        ceil_count(4.0 * (1.0 / self.epsilon).ln() / (self.delta * self.delta)).max(1)
    }

    /// Epoch length for `m_g` good buyers: `⌈2 H m_g / ((1−δ)(1−ρ))⌉`.
    pub fn epoch_length(&self, m_g: usize) -> u64 {
        let h = self.threshold_h() as f64;
        ceil_count(2.0 * h * m_g as f64 / ((1.0 - self.delta) * (1.0 - self.rho)))
    }

    /// `E_max`, the epoch length with every buyer in good state.
    pub fn max_epoch_length(&self) -> u64 {
        self.epoch_length(self.n)
    }

    /// Lookahead needed for the never-enter-bad argument:
    /// `k >= ⌈10 E_max / (ε(1−ε))⌉`.
    pub fn sophistication_lookahead(&self) -> u64 {
        let e = self.epsilon;
        ceil_count(10.0 / (e * (1.0 - e)) * self.max_epoch_length() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_arithmetic() {
        let p = MechanismParams::relaxed(4, 1000, 0.1, 0.1, 0.01).unwrap();
        assert_eq!(p.threshold_h(), 922);
        let p = MechanismParams::relaxed(4, 1000, 0.3, 0.3, 0.005).unwrap();
        assert_eq!(p.threshold_h(), 54);
    }

    #[test]
    fn rho_ceiling_is_enforced() {
        let rho = MechanismParams::default_rho(0.3);
        assert!((rho - 0.0060025).abs() < 1e-15);
        assert!(MechanismParams::new(6, 10, 0.3, 0.3, rho).is_ok());
        assert!(matches!(
            MechanismParams::new(6, 10, 0.3, 0.3, 0.01),
            Err(ParamsError::RhoTooLarge { .. })
        ));
        // ε = δ = 0.1 admits at most 0.0054675.
        assert!(MechanismParams::new(4, 10, 0.1, 0.1, 0.01).is_err());
        assert!(MechanismParams::relaxed(4, 10, 0.1, 0.1, 0.01).is_ok());
    }

    #[test]
    fn ranges_are_checked() {
        assert_eq!(
            MechanismParams::relaxed(0, 1, 0.3, 0.3, 0.001),
            Err(ParamsError::NoBuyers)
        );
        assert!(MechanismParams::relaxed(2, 1, 1.0, 0.3, 0.001).is_err());
        assert!(MechanismParams::relaxed(2, 1, 0.3, 0.0, 0.001).is_err());
    }

    #[test]
    fn wire_format() {
        let json = r#"{"n":3,"T":500,"epsilon":0.3,"delta":0.3,"rho":0.006,"reset_round":40}"#;
        let p: MechanismParams = serde_json::from_str(json).unwrap();
        assert_eq!(p.n(), 3);
        assert_eq!(p.horizon(), 500);
        assert_eq!(p.reset_round(), Some(40));
        let loose = r#"{"n":3,"T":5,"epsilon":0.1,"delta":0.1,"rho":0.01}"#;
        assert!(serde_json::from_str::<MechanismParams>(loose).is_err());
        let relaxed = r#"{"n":3,"T":5,"epsilon":0.1,"delta":0.1,"rho":0.01,"enforce_rho_bound":false}"#;
        assert!(serde_json::from_str::<MechanismParams>(relaxed).is_ok());
    }
}
