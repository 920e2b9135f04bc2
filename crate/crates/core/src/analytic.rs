//! Policy evaluation without simulation.
//!
//! For a stationary policy `b`, an auction at age `t` is won with probability
//! `q(b(t))`, so the age since the last win has survival weight `e^(-A(t))`
//! with hazard `A(t) = gamma t + mu int_0^t q(b)`. Every payoff below is an
//! integral against that weight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BidPolicy, CompetitionModel, Model};
use crate::quadrature::{CumulativeIntegral, Simpson};
use crate::scalar::Scalar;

pub use crate::special::upper_incomplete_gamma;

/// Weights below `e^-TRUNCATION` are dropped from improper integrals.
const TRUNCATION: f64 = 27.631_021_115_928_547; // ln 1e12

const HAZARD_TOL: f64 = 1e-12;
const OUTER_TOL: f64 = 1e-11;

struct Hazard<'a, T: Scalar> {
    model: &'a Model<T>,
    policy: &'a BidPolicy<T>,
    table: CumulativeIntegral<T, Box<dyn Fn(T) -> T + 'a>>,
}

impl<'a, T: Scalar> Hazard<'a, T> {
    fn new(policy: &'a BidPolicy<T>, model: &'a Model<T>, gamma: T) -> Self {
        let mu = model.env.mu;
        let rate: Box<dyn Fn(T) -> T + 'a> = Box::new(move |t| gamma + mu * model.win_rate(policy, t));
        Self {
            model,
            policy,
            table: CumulativeIntegral::new(rate, Simpson::with_rel_tol(T::lit(HAZARD_TOL))),
        }
    }

    fn breakpoints(&self, lo: T, hi: T) -> Vec<T> {
        self.policy.breakpoints(&self.model.curve, lo, hi)
    }

    /// Extends the table until `A >= target`; false if `limit` came first.
    fn reach(&mut self, target: T, limit: T) -> Result<bool> {
        let (policy, curve) = (self.policy, &self.model.curve);
        self.table.extend_until(
            T::one(),
            limit,
            |lo, hi| policy.breakpoints(curve, lo, hi),
            |a| a >= target,
        )
    }

    fn at(&self, t: T) -> T {
        self.table.value(t)
    }

    /// `[0, end]` split at the policy's kinks.
    fn pieces(&self, from: T, to: T) -> Vec<T> {
        let mut pts = vec![from];
        pts.extend(self.breakpoints(from, to));
        pts.push(to);
        pts
    }
}

/// `A(tau) = int_0^tau (gamma + mu q(b(s))) ds`.
pub fn accumulated_hazard<T: Scalar>(policy: &BidPolicy<T>, model: &Model<T>, tau: T) -> Result<T> {
    if !(tau >= T::zero()) || !tau.is_finite() {
        return Err(Error::domain("age must be non-negative", tau.as_f64()));
    }
    policy.validate()?;
    let mut h = Hazard::new(policy, model, model.env.gamma);
    if tau > T::zero() {
        let bps = h.breakpoints(T::zero(), tau);
        h.table.extend_to(tau, &bps)?;
    }
    Ok(h.at(tau))
}

/// Discounted payoff of a stationary policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation<T> {
    /// `V_b(0)`.
    pub v0: T,
    pub tau_grid: Vec<T>,
    /// `V_b(tau)` on `tau_grid`.
    pub value_at: Vec<T>,
    /// Mean number of wins before the stream ends.
    pub expected_wins: T,
    /// Mean utility of a win, given it happens before the stream ends.
    pub avg_win_utility: T,
    /// Probability of at least one more win, `P = int e^-A mu q(b)`.
    pub win_probability: T,
    /// `lim gamma V_b(0)` when requested.
    pub time_avg: Option<T>,
}

/// `V_b(0)`, `V_b(tau)` on a grid and the win-count decomposition.
///
/// With `P = int e^-A mu q(b)`, `N = int e^-A mu U(k, b)` and
/// `D = int e^-A`, the value is `N / (1 - P)`. The win count is geometric with
/// continuation probability `P`; its mean is computed as `P / (gamma D)`,
/// using that `gamma D = 1 - P`, so `v0 = expected_wins * avg_win_utility` is
/// a real check of the quadrature rather than an identity.
pub fn policy_value_quadrature<T: Scalar>(
    policy: &BidPolicy<T>,
    model: &Model<T>,
    tau_grid: &[T],
) -> Result<PolicyEvaluation<T>> {
    model.env.validate()?;
    model.env.require_discounted()?;
    policy.validate()?;
    if tau_grid.iter().any(|&t| !(t >= T::zero()) || !t.is_finite()) || tau_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config(
            "evaluation grid must be non-negative and strictly increasing".into(),
        ));
    }
    let gamma = model.env.gamma;
    let mu = model.env.mu;
    let target = T::lit(TRUNCATION);
    let mut h = Hazard::new(policy, model, gamma);
    // A >= gamma t, so this limit is never binding
    let limit = target / gamma * T::lit(2.0) + T::one();
    h.reach(target, limit)?;
    let end = h.table.end();
    let rule = Simpson::with_rel_tol(T::lit(OUTER_TOL));
    let pieces = h.pieces(T::zero(), end);
    let curve = &model.curve;
    let comp = &model.competition;

    let weight = |t: T| (-h.at(t)).exp();
    let p = rule.integrate_pieces(&|t| weight(t) * mu * model.win_rate(policy, t), &pieces)?;
    let n = rule.integrate_pieces(&|t| weight(t) * mu * model.auction_utility(policy, t), &pieces)?;
    let d = rule.integrate_pieces(&weight, &pieces)?;

    let v0 = n / (T::one() - p);
    let (expected_wins, avg_win_utility) = if p > T::zero() {
        (p / (gamma * d), n / p)
    } else {
        (T::zero(), T::zero())
    };

    // V(tau) = int_tau^inf e^-(A(t) - A(tau)) mu U(V0 + k(t), b(t)) dt, swept
    // backwards so each step only adds a short integral.
    let gain = |t: T| mu * comp.expected_utility(v0 + curve.value(t), policy.bid(t, curve));
    let mut value_at = vec![T::zero(); tau_grid.len()];
    if let Some(&last) = tau_grid.last() {
        let a_last_target = {
            if last > h.table.end() {
                let bps = h.breakpoints(h.table.end(), last);
                h.table.extend_to(last, &bps)?;
            }
            h.at(last) + target
        };
        h.reach(a_last_target, last + limit)?;
        let a_last = h.at(last);
        let tail_pieces = h.pieces(last, h.table.end());
        let mut v = rule.integrate_pieces(&|t| (a_last - h.at(t)).exp() * gain(t), &tail_pieces)?;
        let n_grid = tau_grid.len();
        value_at[n_grid - 1] = v;
        for i in (0..n_grid - 1).rev() {
            let (t0, t1) = (tau_grid[i], tau_grid[i + 1]);
            let a0 = h.at(t0);
            let seg = rule.integrate_pieces(&|t| (a0 - h.at(t)).exp() * gain(t), &h.pieces(t0, t1))?;
            v = seg + (a0 - h.at(t1)).exp() * v;
            value_at[i] = v;
        }
    }
    Ok(PolicyEvaluation {
        v0,
        tau_grid: tau_grid.to_vec(),
        value_at,
        expected_wins,
        avg_win_utility,
        win_probability: p,
        time_avg: None,
    })
}

impl<T: Scalar> PolicyEvaluation<T> {
    /// Fills `time_avg` with [`time_average`] of the same policy.
    pub fn with_time_average(mut self, policy: &BidPolicy<T>, model: &Model<T>) -> Result<Self> {
        self.time_avg = Some(time_average(policy, model)?);
        Ok(self)
    }
}

/// Long-run payoff per unit time, `lim gamma V_b(0)`:
/// `mu int e^(-mu Q) U(k, b) / int e^(-mu Q)` with `Q = int_0^t q(b)`.
///
/// Only `mu` is used.
pub fn time_average<T: Scalar>(policy: &BidPolicy<T>, model: &Model<T>) -> Result<T> {
    model.env.validate()?;
    policy.validate()?;
    let mu = model.env.mu;
    let target = T::lit(TRUNCATION);
    let mut h = Hazard::new(policy, model, T::zero());
    let limit = T::lit(1e10) / mu;
    if !h.reach(target, limit)? {
        return Err(Error::Divergence(format!(
            "policy '{}' almost never wins; the time average is undefined",
            policy.label()
        )));
    }
    let end = h.table.end();
    let rule = Simpson::with_rel_tol(T::lit(OUTER_TOL));
    let pieces = h.pieces(T::zero(), end);
    let weight = |t: T| (-h.at(t)).exp();
    let n = rule.integrate_pieces(&|t| weight(t) * model.auction_utility(policy, t), &pieces)?;
    let d = rule.integrate_pieces(&weight, &pieces)?;
    Ok(mu * n / d)
}

/// Time-average payoff of shading `alpha` for uniform competition and the
/// hyperbolic curve:
/// `(1 - alpha/2) (mu alpha)^2 Gamma(mu alpha - 1, mu alpha) / Gamma(mu alpha + 1, mu alpha)`.
///
/// The prefactor comes from `U(k, alpha k) = alpha (1 - alpha/2) k^2`.
/// Evaluated through the regularized function as
/// `(1 - alpha/2) m/(m-1) Q(m-1, m) / Q(m+1, m)`, `m = mu alpha`, which does
/// not overflow for large `m`.
pub fn shading_closed_form<T: Scalar>(alpha: T, mu: T) -> Result<T> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::domain("shading factor must lie in (0, 1]", alpha.as_f64()));
    }
    let m = mu * alpha;
    if !(m > T::one()) || !m.is_finite() {
        return Err(Error::domain("closed form needs mu * alpha > 1", m.as_f64()));
    }
    use crate::special::regularized_upper_gamma as q;
    let pre = T::one() - alpha / T::lit(2.0);
    Ok(pre * m / (m - T::one()) * q(m - T::one(), m)? / q(m + T::one(), m)?)
}

/// Relative regret of truthful bidding as values shrink: the slope at zero of
/// the conditional price `E(C | C <= b)`, by Richardson extrapolation of
/// `E(C | C <= h) / h` over `h = 1e-2, 1e-3, 1e-4`.
pub fn asymptotic_regret<T: Scalar>(comp: &CompetitionModel<T>) -> Result<T> {
    let hs = [T::lit(1e-2), T::lit(1e-3), T::lit(1e-4)];
    let mut g = [T::zero(); 3];
    for (gi, &hh) in g.iter_mut().zip(&hs) {
        if !(comp.cdf(hh) > T::zero()) {
            return Err(Error::Degenerate(format!(
                "competition never bids below {hh}; the conditional price has no slope at 0"
            )));
        }
        *gi = comp.conditional_price(hh)? / hh;
    }
    let ten = T::lit(10.0);
    let r0 = (ten * g[1] - g[0]) / T::lit(9.0);
    let r1 = (ten * g[2] - g[1]) / T::lit(9.0);
    Ok((T::lit(100.0) * r1 - r0) / T::lit(99.0))
}
