use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Arrival intensity `mu` and discount rate `gamma` of the auction stream.
///
/// `gamma = 0` is representable because the time-average evaluators only
/// need `mu`; anything that computes a discounted value calls
/// [`EnvParams::require_discounted`] first.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvParams<T> {
    pub mu: T,
    pub gamma: T,
}

impl<T: Scalar> EnvParams<T> {
    pub fn new(mu: T, gamma: T) -> Result<Self> {
        let env = Self { mu, gamma };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > T::zero()) || !self.mu.is_finite() {
            return Err(Error::InvalidModel(format!(
                "env.mu must be a finite positive intensity, got {}",
                self.mu
            )));
        }
        if !(self.gamma >= T::zero()) || !self.gamma.is_finite() {
            return Err(Error::InvalidModel(format!(
                "env.gamma must be finite and non-negative, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    pub fn require_discounted(&self) -> Result<()> {
        if self.gamma > T::zero() {
            Ok(())
        } else {
            Err(Error::Mode(
                "gamma = 0 has no discounted value; use the time-average evaluator".into(),
            ))
        }
    }

    /// Expected number of auctions before the stream ends, `mu / gamma`.
    pub fn expected_auctions(&self) -> T {
        self.mu / self.gamma
    }
}
