//! Shooting and bisection for the optimal age-dependent bid.
//!
//! `Z^v` solves `Z' = phi(t, Z, v)` from `Z(0) = v`. Exactly one initial value,
//! `V0*`, keeps the trajectory bounded; larger values escape upward and
//! smaller ones downward. Bisection on the escape direction brackets `V0*`,
//! and the optimal bid is read off the bounded trajectory as
//! `b*(tau) = max(0, k(tau) + V0* - V*(tau))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BidPolicy, GridPolicy, GridTail, Model, ValueCurve};
use crate::ode::{integrate, IvpSpec, Termination, Trajectory};
use crate::quadrature::{CumulativeIntegral, Simpson};
use crate::scalar::Scalar;

const TIE: f64 = 1e-14;

/// Tuning of the shooting solver. Every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig<T: Scalar> {
    /// Maximum number of bisection steps.
    pub n_iter: usize,
    /// Stop once the bracket is this narrow.
    pub width_tol: T,
    /// Largest error accepted in the reconstructed value function.
    pub policy_tol: T,
    /// Output grid spacing; `min(0.01, 1 / (10 mu))` when absent.
    pub grid_step: Option<T>,
    /// Shooting horizon; derived from the curve and guards when absent.
    #[serde(rename = "T_horizon")]
    pub t_horizon: Option<T>,
    /// Saturation slack used for the derived horizon.
    pub eps_k: T,
    pub rel_tol: T,
    pub abs_tol: T,
    /// Initial bracket; `[0, mu k_sup / gamma]` when absent.
    pub a0: Option<T>,
    pub b0: Option<T>,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            n_iter: 100,
            width_tol: T::lit(1e-12),
            policy_tol: T::lit(1e-6),
            grid_step: None,
            t_horizon: None,
            eps_k: T::lit(1e-6),
            rel_tol: T::lit(1e-12),
            abs_tol: T::lit(1e-12),
            a0: None,
            b0: None,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if self.n_iter == 0 {
            return Err(Error::Config("solver.n_iter must be at least 1".into()));
        }
        if !(self.width_tol >= T::zero()) {
            return Err(Error::Config("solver.width_tol must be non-negative".into()));
        }
        if !pos(self.policy_tol) {
            return Err(Error::Config("solver.policy_tol must be positive".into()));
        }
        if !pos(self.rel_tol) || !pos(self.abs_tol) || !pos(self.eps_k) {
            return Err(Error::Config(
                "solver.rel_tol, solver.abs_tol and solver.eps_k must be positive".into(),
            ));
        }
        if self.grid_step.is_some_and(|h| !pos(h)) {
            return Err(Error::Config("solver.grid_step must be positive".into()));
        }
        if self.t_horizon.is_some_and(|h| !pos(h)) {
            return Err(Error::Config("solver.T_horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn grid_step_for(&self, mu: T) -> T {
        self.grid_step
            .unwrap_or_else(|| T::lit(0.01).min(T::one() / (T::lit(10.0) * mu)))
    }

    /// Shooting horizon: past saturation of `k` and long enough for a
    /// `width_tol` perturbation to reach the upper guard at rate `gamma`.
    pub fn horizon_for(&self, model: &Model<T>) -> T {
        if let Some(t) = self.t_horizon {
            return t;
        }
        let (hi, _) = guards(model);
        let sat = model.curve.saturation_age(self.eps_k);
        let tol = self.width_tol.max(T::epsilon() * hi);
        let sep = (hi / tol).ln() / model.env.gamma;
        sat.max(sep).max(T::one())
    }

    pub fn bracket_for(&self, model: &Model<T>) -> (T, T) {
        let a = self.a0.unwrap_or(T::zero());
        let b = self
            .b0
            .unwrap_or_else(|| model.env.mu * model.curve.k_sup() / model.env.gamma);
        (a, b)
    }
}

/// `phi(t, v, lambda) = gamma v - mu pi(max(0, k(t) + lambda - v))`.
#[inline]
pub fn phi<T: Scalar>(t: T, v: T, lambda: T, model: &Model<T>) -> T {
    let arg = model.curve.value(t) + lambda - v;
    model.env.gamma * v - model.env.mu * model.competition.profit(arg.max(T::zero()))
}

/// `(guard_hi, guard_lo) = (2 mu k_sup / gamma, -k_sup)`.
pub fn guards<T: Scalar>(model: &Model<T>) -> (T, T) {
    let k = model.curve.k_sup();
    (T::lit(2.0) * model.env.mu * k / model.env.gamma, -k)
}

/// Which side of `V0*` a trial value lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Above,
    Below,
}

#[derive(Clone, Debug)]
pub struct ShootResult<T> {
    pub trajectory: Trajectory<T>,
    pub classification: Classification,
    pub v: T,
}

fn check_model<T: Scalar>(model: &Model<T>) -> Result<()> {
    model.env.validate()?;
    model.env.require_discounted()?;
    if !(model.curve.k_sup() > T::zero()) {
        return Err(Error::InvalidModel(
            "value curve is identically zero; the optimal value is 0".into(),
        ));
    }
    Ok(())
}

fn shoot_unchecked<T: Scalar>(v: T, model: &Model<T>, cfg: &SolverConfig<T>, horizon: T) -> Result<ShootResult<T>> {
    let (hi, lo) = guards(model);
    let spec = IvpSpec::new(|t, z| phi(t, z, v, model), v, horizon)
        .tolerances(cfg.rel_tol, cfg.abs_tol)
        .guards(lo, hi)
        .breakpoints(model.curve.kinks(T::zero(), horizon));
    let trajectory = integrate(&spec)?;
    let classification = match trajectory.termination {
        Termination::EscapedUp => Classification::Above,
        Termination::EscapedDown => Classification::Below,
        Termination::Completed => {
            let f = phi(trajectory.t_stop, trajectory.final_value(), v, model);
            if f > T::lit(TIE) {
                Classification::Above
            } else {
                Classification::Below
            }
        }
    };
    Ok(ShootResult {
        trajectory,
        classification,
        v,
    })
}

/// Integrates `Z^v` and classifies `v` against `V0*`.
pub fn shoot<T: Scalar>(v: T, model: &Model<T>, cfg: &SolverConfig<T>) -> Result<ShootResult<T>> {
    check_model(model)?;
    cfg.validate()?;
    if !(v >= T::zero()) || !v.is_finite() {
        return Err(Error::domain("shooting value must be non-negative", v.as_f64()));
    }
    shoot_unchecked(v, model, cfg, cfg.horizon_for(model))
}

/// Output of [`bisect_v0`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResult<T: Scalar> {
    pub v0_star: T,
    /// Bracket before the first step, then after every step.
    pub bracket_history: Vec<(T, T)>,
    pub tau_grid: Vec<T>,
    #[serde(rename = "V_star")]
    pub v_star: Vec<T>,
    pub b_star: Vec<T>,
    /// Width of the band `[Z^a, Z^b]` containing `V*` at each grid age.
    #[serde(rename = "V_err")]
    pub v_err: Vec<T>,
    pub tau_max: T,
    pub curve: ValueCurve<T>,
}

impl<T: Scalar> SolveResult<T> {
    pub fn final_width(&self) -> T {
        let (a, b) = *self.bracket_history.last().unwrap();
        b - a
    }

    /// `b*(tau)`: interpolated on the grid, extended by the growth of `k`
    /// past `tau_max`.
    pub fn optimal_bid(&self, tau: T) -> T {
        if tau <= self.tau_max {
            return interp(&self.tau_grid, &self.b_star, tau);
        }
        let last = *self.b_star.last().unwrap();
        (last + self.curve.value(tau) - self.curve.value(self.tau_max)).max(T::zero())
    }

    /// `V*(tau)` on `[0, tau_max]` by linear interpolation.
    pub fn value_at(&self, tau: T) -> Option<T> {
        if tau < T::zero() || tau > self.tau_max {
            return None;
        }
        Some(interp(&self.tau_grid, &self.v_star, tau))
    }

    /// The optimal bid as a grid policy with the same extension rule.
    pub fn to_policy(&self) -> BidPolicy<T> {
        BidPolicy::Grid(
            GridPolicy::new(self.tau_grid.clone(), self.b_star.clone(), GridTail::FollowCurve)
                .expect("solver grid is strictly increasing with non-negative bids"),
        )
    }
}

/// `b*(tau)` from a solve result.
pub fn optimal_bid<T: Scalar>(result: &SolveResult<T>, tau: T) -> T {
    result.optimal_bid(tau)
}

fn interp<T: Scalar>(xs: &[T], ys: &[T], x: T) -> T {
    let j = xs.partition_point(|&t| t <= x);
    if j == 0 {
        return ys[0];
    }
    if j == xs.len() {
        return ys[j - 1];
    }
    let w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    ys[j - 1] + w * (ys[j] - ys[j - 1])
}

/// Bisection on the escape direction, followed by reconstruction of `V*` and
/// `b*` on the output grid.
///
/// `tau_max` is the smallest of: the `gamma`-rate amplification bound
/// `ln(policy_tol / w) / gamma`, the first age where the final bracket's
/// trajectories separate by more than `policy_tol`, and the escape time of the
/// midpoint trajectory.
pub fn bisect_v0<T: Scalar>(model: &Model<T>, cfg: &SolverConfig<T>) -> Result<SolveResult<T>> {
    check_model(model)?;
    cfg.validate()?;
    let horizon = cfg.horizon_for(model);
    let (a0, b0) = cfg.bracket_for(model);
    let (hi, _) = guards(model);
    if !(a0 >= T::zero() && a0 < b0 && b0 < hi) {
        return Err(Error::InvalidBracket {
            a: a0.as_f64(),
            b: b0.as_f64(),
            reason: "need 0 <= a0 < b0 < 2 mu k_sup / gamma".into(),
        });
    }
    let mut lo = shoot_unchecked(a0, model, cfg, horizon)?;
    if lo.classification != Classification::Below {
        return Err(Error::InvalidBracket {
            a: a0.as_f64(),
            b: b0.as_f64(),
            reason: "lower end does not lie below the optimal value".into(),
        });
    }
    let mut up = shoot_unchecked(b0, model, cfg, horizon)?;
    if up.classification != Classification::Above {
        return Err(Error::InvalidBracket {
            a: a0.as_f64(),
            b: b0.as_f64(),
            reason: "upper end does not lie above the optimal value".into(),
        });
    }
    let half = T::lit(0.5);
    let mut history = vec![(a0, b0)];
    for iteration in 1..=cfg.n_iter {
        let (a, b) = (lo.v, up.v);
        if b - a <= cfg.width_tol {
            break;
        }
        let c = a + half * (b - a);
        if c <= a || c >= b {
            break;
        }
        let mid = shoot_unchecked(c, model, cfg, horizon)?;
        match mid.classification {
            Classification::Above => up = mid,
            Classification::Below => lo = mid,
        }
        let (na, nb) = (lo.v, up.v);
        let w = nb - na;
        let limit = half * (b - a) * (T::one() + T::lit(4.0) * T::epsilon());
        if !(na < nb) || w > limit {
            return Err(Error::Inconsistency {
                iteration,
                reason: format!("bracket [{na}, {nb}] did not halve [{a}, {b}]"),
            });
        }
        history.push((na, nb));
    }
    let (a, b) = (lo.v, up.v);
    let v0 = a + half * (b - a);
    let centre = shoot_unchecked(v0, model, cfg, horizon)?;
    let za = &lo.trajectory;
    let zb = &up.trajectory;
    let zc = &centre.trajectory;

    let w = b - a;
    let mut tau_max = za.t_stop.min(zb.t_stop).min(zc.t_stop);
    if w > T::zero() {
        let bound = (cfg.policy_tol / w).ln() / model.env.gamma;
        tau_max = tau_max.min(bound.max(T::zero()));
    }
    let step = cfg.grid_step_for(model.env.mu);
    let n_max = (tau_max / step).floor().to_usize().unwrap_or(0);
    let mut tau_grid = Vec::with_capacity(n_max + 2);
    let mut v_star = Vec::with_capacity(n_max + 2);
    let mut v_err = Vec::with_capacity(n_max + 2);
    let mut push = |t: T, grid: &mut Vec<T>, vals: &mut Vec<T>| -> bool {
        let (ya, yb, yc) = match (za.eval(t), zb.eval(t), zc.eval(t)) {
            (Some(ya), Some(yb), Some(yc)) => (ya, yb, yc),
            _ => return false,
        };
        if t > T::zero() && yb - ya > cfg.policy_tol {
            return false;
        }
        grid.push(t);
        vals.push(if t == T::zero() { v0 } else { yc });
        v_err.push(if t == T::zero() { w } else { yb - ya });
        true
    };
    for i in 0..=n_max {
        let t = T::from_usize_lossy(i) * step;
        if !push(t, &mut tau_grid, &mut v_star) {
            break;
        }
    }
    let last = *tau_grid.last().unwrap();
    if tau_grid.len() == n_max + 1 && tau_max > last && tau_max - last > step * T::lit(1e-6) {
        push(tau_max, &mut tau_grid, &mut v_star);
    }
    let tau_max = *tau_grid.last().unwrap();
    let b_star = tau_grid
        .iter()
        .zip(&v_star)
        .map(|(&t, &v)| (model.curve.value(t) + v0 - v).max(T::zero()))
        .collect();
    Ok(SolveResult {
        v0_star: v0,
        bracket_history: history,
        tau_grid,
        v_star,
        b_star,
        v_err,
        tau_max,
        curve: model.curve.clone(),
    })
}

/// Forward integration of the bid dynamics
/// `b' = k' - gamma (V0* + k) + mu pi(b) + gamma b`, for comparison with the
/// reconstructed grid.
#[derive(Clone, Debug)]
pub struct BidOdeCheck<T> {
    pub tau_start: T,
    /// Ages are offset: `trajectory.times[i] + tau_start` is the age.
    pub trajectory: Trajectory<T>,
    /// Largest `|b_ode - b_grid|` over grid points in `[tau_start, tau_max]`.
    pub sup_gap: T,
}

pub fn bid_ode_crosscheck<T: Scalar>(
    result: &SolveResult<T>,
    model: &Model<T>,
    cfg: &SolverConfig<T>,
) -> Result<BidOdeCheck<T>> {
    check_model(model)?;
    let tol = T::lit(1e-8);
    let start = match result.b_star.iter().position(|&b| b > tol) {
        Some(i) => i,
        None => {
            return Err(Error::Degenerate(
                "optimal bid never leaves zero on the solver grid".into(),
            ))
        }
    };
    let tau_start = result.tau_grid[start];
    let span = result.tau_max - tau_start;
    let v0 = result.v0_star;
    let g = model.env.gamma;
    let mu = model.env.mu;
    let rhs = |s: T, b: T| {
        let t = s + tau_start;
        let k = model.curve.value(t);
        model.curve.slope(t) - g * (v0 + k) + mu * model.competition.profit(b.max(T::zero())) + g * b
    };
    let b_start = result.b_star[start];
    let kinks: Vec<T> = model
        .curve
        .kinks(tau_start, result.tau_max)
        .into_iter()
        .map(|t| t - tau_start)
        .collect();
    if !(span > T::zero()) {
        return Err(Error::Degenerate(
            "optimal bid is positive only at the last trusted age".into(),
        ));
    }
    let spec = IvpSpec::new(rhs, b_start, span)
        .tolerances(cfg.rel_tol, cfg.abs_tol)
        .breakpoints(kinks);
    let trajectory = integrate(&spec)?;
    let mut sup_gap = T::zero();
    for (&t, &b) in result.tau_grid[start..].iter().zip(&result.b_star[start..]) {
        match trajectory.eval(t - tau_start) {
            Some(y) => sup_gap = sup_gap.max((y - b).abs()),
            None => break,
        }
    }
    Ok(BidOdeCheck {
        tau_start,
        trajectory,
        sup_gap,
    })
}

/// `dZ^v(t)/dv` along the stored trajectory.
///
/// With `Q(s) = int_0^s q(u_l) dl` and `u = k + v - Z^v`, the derivative is
/// `1 + gamma int_0^t exp(gamma (t - s) + mu (Q(t) - Q(s))) ds`, which is
/// never below `e^(gamma t)`.
pub fn sensitivity<T: Scalar>(v: T, t: T, model: &Model<T>, cfg: &SolverConfig<T>) -> Result<T> {
    if !(t >= T::zero()) {
        return Err(Error::domain("sensitivity age must be non-negative", t.as_f64()));
    }
    if t == T::zero() {
        return Ok(T::one());
    }
    let shot = shoot_for_sensitivity(v, t, model, cfg)?;
    let z = &shot.trajectory;
    let rule = Simpson::with_rel_tol(T::lit(1e-12));
    let kinks = model.curve.kinks(T::zero(), t);
    let mut q = CumulativeIntegral::new(
        |s: T| {
            let zs = z.eval(s).unwrap_or_else(|| z.final_value());
            model.competition.cdf((model.curve.value(s) + v - zs).max(T::zero()))
        },
        rule,
    );
    q.extend_to(t, &kinks)?;
    let g = model.env.gamma;
    let mu = model.env.mu;
    let qt = q.total();
    let inner = rule.integrate_pieces(&|s: T| (g * (t - s) + mu * (qt - q.value(s))).exp(), &[T::zero(), t])?;
    Ok(T::one() + g * inner)
}

/// Integrates `Z^v` on `[0, t]` without guard-based classification, failing
/// when the trajectory leaves the guard band first.
pub fn shoot_for_sensitivity<T: Scalar>(v: T, t: T, model: &Model<T>, cfg: &SolverConfig<T>) -> Result<ShootResult<T>> {
    let (mu, g) = (model.env.mu, model.env.gamma);
    if !(mu >= T::zero() && g >= T::zero() && mu.is_finite() && g.is_finite()) {
        return Err(Error::InvalidModel("rates must be finite and non-negative".into()));
    }
    cfg.validate()?;
    let (hi, lo) = if mu > T::zero() && g > T::zero() {
        guards(model)
    } else {
        (T::infinity(), -T::infinity())
    };
    let spec = IvpSpec::new(|s, zz| phi(s, zz, v, model), v, t)
        .tolerances(cfg.rel_tol, cfg.abs_tol)
        .guards(lo, hi)
        .breakpoints(model.curve.kinks(T::zero(), t));
    let trajectory = integrate(&spec)?;
    if trajectory.termination != Termination::Completed {
        return Err(Error::Escaped {
            t: t.as_f64(),
            t_stop: trajectory.t_stop.as_f64(),
        });
    }
    let classification = if phi(t, trajectory.final_value(), v, model) > T::lit(TIE) {
        Classification::Above
    } else {
        Classification::Below
    };
    Ok(ShootResult {
        trajectory,
        classification,
        v,
    })
}
