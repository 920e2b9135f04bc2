//! Static model primitives: environment, value curves, competition and policies.

mod competition;
mod curve;
mod env;
mod policy;

use serde::{Deserialize, Serialize};

pub use competition::{CdfTable, CompetitionModel};
pub use curve::{CurveKnots, ValueCurve};
pub use env::EnvParams;
pub use policy::{BidPolicy, GridPolicy, GridTail};

use crate::error::Result;
use crate::scalar::Scalar;

/// Environment, competition and value curve of one bidding problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model<T: Scalar> {
    pub env: EnvParams<T>,
    pub competition: CompetitionModel<T>,
    pub curve: ValueCurve<T>,
}

impl<T: Scalar> Model<T> {
    pub fn new(env: EnvParams<T>, competition: CompetitionModel<T>, curve: ValueCurve<T>) -> Result<Self> {
        env.validate()?;
        curve.validate()?;
        Ok(Self {
            env,
            competition,
            curve,
        })
    }

    /// Same competition and curve with different arrival/discount rates.
    pub fn with_env(&self, mu: T, gamma: T) -> Result<Self> {
        Self::new(EnvParams::new(mu, gamma)?, self.competition.clone(), self.curve.clone())
    }

    /// `U(k(tau), b(tau))`: expected one-auction utility of policy `b` at age `tau`.
    #[inline]
    pub fn auction_utility(&self, policy: &BidPolicy<T>, tau: T) -> T {
        let b = policy.bid(tau, &self.curve);
        self.competition.expected_utility(self.curve.value(tau), b)
    }

    /// `q(b(tau))`
    #[inline]
    pub fn win_rate(&self, policy: &BidPolicy<T>, tau: T) -> T {
        self.competition.cdf(policy.bid(tau, &self.curve))
    }
}
