use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Value of an item as a function of the age `tau` since the last win.
///
/// Serialized as `{"kind": "...", "params": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ValueCurve<T: Scalar> {
    /// `k(tau) = 1 - exp(-tau)`
    ExpSaturating,
    /// `k(tau) = 1 - 1 / (1 + tau)`
    Hyperbolic,
    /// `k(tau) = value`
    Constant { value: T },
    /// `k(tau) = min(5 tau, 0.2) + max(0, min(0.8, 10 tau - 9.2))`
    TwoStep,
    /// Linear interpolation through `(tau_i, k_i)`, held constant past the last knot.
    PiecewiseLinear(CurveKnots<T>),
}

/// Validated knot table of a piecewise-linear value curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurveKnots<T>", into = "RawCurveKnots<T>")]
pub struct CurveKnots<T: Scalar> {
    taus: Vec<T>,
    values: Vec<T>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCurveKnots<T> {
    knots: Vec<[T; 2]>,
}

impl<T: Scalar> TryFrom<RawCurveKnots<T>> for CurveKnots<T> {
    type Error = Error;

    fn try_from(raw: RawCurveKnots<T>) -> Result<Self> {
        CurveKnots::new(raw.knots.iter().map(|&[t, k]| (t, k)).collect())
    }
}

impl<T: Scalar> From<CurveKnots<T>> for RawCurveKnots<T> {
    fn from(k: CurveKnots<T>) -> Self {
        RawCurveKnots {
            knots: k.taus.iter().zip(&k.values).map(|(&t, &v)| [t, v]).collect(),
        }
    }
}

impl<T: Scalar> CurveKnots<T> {
    /// Knots must start at age 0, have strictly increasing ages and
    /// non-decreasing, non-negative values.
    pub fn new(knots: Vec<(T, T)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidModel("curve.params.knots is empty".into()));
        }
        if knots[0].0 != T::zero() {
            return Err(Error::InvalidModel("curve.params.knots must start at tau = 0".into()));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidModel(
                    "curve.params.knots ages must be strictly increasing".into(),
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidModel(
                    "curve.params.knots values must be non-decreasing".into(),
                ));
            }
        }
        if knots
            .iter()
            .any(|&(t, k)| !t.is_finite() || !k.is_finite() || k < T::zero())
        {
            return Err(Error::InvalidModel(
                "curve.params.knots values must be finite and non-negative".into(),
            ));
        }
        let (taus, values) = knots.into_iter().unzip();
        Ok(Self { taus, values })
    }

    pub fn taus(&self) -> &[T] {
        &self.taus
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Index `i` of the segment `[tau_i, tau_{i+1})` containing `tau`, or `None` past the end.
    fn segment(&self, tau: T) -> Option<usize> {
        let j = self.taus.partition_point(|&t| t <= tau);
        if j >= self.taus.len() {
            None
        } else {
            Some(j - 1)
        }
    }

    fn eval(&self, tau: T) -> T {
        match self.segment(tau) {
            None => *self.values.last().unwrap(),
            Some(i) => {
                let w = (tau - self.taus[i]) / (self.taus[i + 1] - self.taus[i]);
                self.values[i] + w * (self.values[i + 1] - self.values[i])
            }
        }
    }

    fn slope(&self, tau: T) -> T {
        match self.segment(tau) {
            None => T::zero(),
            Some(i) => (self.values[i + 1] - self.values[i]) / (self.taus[i + 1] - self.taus[i]),
        }
    }
}

impl<T: Scalar> ValueCurve<T> {
    pub fn constant(value: T) -> Result<Self> {
        let c = ValueCurve::Constant { value };
        c.validate()?;
        Ok(c)
    }

    pub fn piecewise_linear(knots: Vec<(T, T)>) -> Result<Self> {
        Ok(ValueCurve::PiecewiseLinear(CurveKnots::new(knots)?))
    }

    pub fn validate(&self) -> Result<()> {
        if let ValueCurve::Constant { value } = self {
            if !(*value >= T::zero()) || !value.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "curve.params.value must be finite and non-negative, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Short name used in reports (`table1.csv`'s `k_kind`).
    pub fn kind_name(&self) -> &'static str {
        match self {
            ValueCurve::ExpSaturating => "exp_saturating",
            ValueCurve::Hyperbolic => "hyperbolic",
            ValueCurve::Constant { .. } => "constant",
            ValueCurve::TwoStep => "two_step",
            ValueCurve::PiecewiseLinear(_) => "piecewise_linear",
        }
    }

    /// `k(tau)`, rejecting negative ages.
    pub fn k_eval(&self, tau: T) -> Result<T> {
        if !(tau >= T::zero()) {
            return Err(Error::domain("age must be non-negative", tau.as_f64()));
        }
        Ok(self.value(tau))
    }

    /// Right-hand derivative `k'(tau+)`, rejecting negative ages.
    pub fn k_deriv(&self, tau: T) -> Result<T> {
        if !(tau >= T::zero()) {
            return Err(Error::domain("age must be non-negative", tau.as_f64()));
        }
        Ok(self.slope(tau))
    }

    /// Unchecked `k(tau)` for inner loops; ages below zero are treated as zero.
    #[inline]
    pub fn value(&self, tau: T) -> T {
        let tau = tau.max(T::zero());
        let one = T::one();
        match self {
            ValueCurve::ExpSaturating => -(-tau).exp_m1(),
            ValueCurve::Hyperbolic => tau / (one + tau),
            ValueCurve::Constant { value } => *value,
            ValueCurve::TwoStep => {
                let rise = (T::lit(5.0) * tau).min(T::lit(0.2));
                let step = (T::lit(10.0) * tau - T::lit(9.2)).min(T::lit(0.8)).max(T::zero());
                rise + step
            }
            ValueCurve::PiecewiseLinear(k) => k.eval(tau),
        }
    }

    /// Unchecked right-hand slope.
    #[inline]
    pub fn slope(&self, tau: T) -> T {
        let tau = tau.max(T::zero());
        let one = T::one();
        match self {
            ValueCurve::ExpSaturating => (-tau).exp(),
            ValueCurve::Hyperbolic => one / ((one + tau) * (one + tau)),
            ValueCurve::Constant { .. } => T::zero(),
            ValueCurve::TwoStep => {
                if tau < T::lit(0.04) {
                    T::lit(5.0)
                } else if tau >= T::lit(0.92) && tau < one {
                    T::lit(10.0)
                } else {
                    T::zero()
                }
            }
            ValueCurve::PiecewiseLinear(k) => k.slope(tau),
        }
    }

    /// Least upper bound of `k`.
    pub fn k_sup(&self) -> T {
        match self {
            ValueCurve::ExpSaturating | ValueCurve::Hyperbolic | ValueCurve::TwoStep => T::one(),
            ValueCurve::Constant { value } => *value,
            ValueCurve::PiecewiseLinear(k) => *k.values.last().unwrap(),
        }
    }

    /// Smallest age past which `k_sup - k(tau) < eps`.
    pub fn saturation_age(&self, eps: T) -> T {
        let eps = eps.max(T::epsilon());
        match self {
            ValueCurve::ExpSaturating => (-eps.ln()).max(T::zero()),
            ValueCurve::Hyperbolic => (T::one() / eps - T::one()).max(T::zero()),
            ValueCurve::Constant { .. } => T::zero(),
            ValueCurve::TwoStep => T::one(),
            ValueCurve::PiecewiseLinear(k) => *k.taus.last().unwrap(),
        }
    }

    /// True when `k` is concave on `[0, inf)`.
    pub fn is_concave(&self) -> bool {
        match self {
            ValueCurve::ExpSaturating | ValueCurve::Hyperbolic | ValueCurve::Constant { .. } => true,
            ValueCurve::TwoStep => false,
            ValueCurve::PiecewiseLinear(k) => {
                let mut prev = T::infinity();
                for i in 0..k.taus.len() - 1 {
                    let s = (k.values[i + 1] - k.values[i]) / (k.taus[i + 1] - k.taus[i]);
                    if s > prev {
                        return false;
                    }
                    prev = s;
                }
                true
            }
        }
    }

    /// True when `k` is continuously differentiable.
    pub fn is_smooth(&self) -> bool {
        matches!(
            self,
            ValueCurve::ExpSaturating | ValueCurve::Hyperbolic | ValueCurve::Constant { .. }
        )
    }

    /// Ages in `(lo, hi)` where `k` has a kink.
    pub fn kinks(&self, lo: T, hi: T) -> Vec<T> {
        let all: Vec<T> = match self {
            ValueCurve::TwoStep => vec![T::lit(0.04), T::lit(0.92), T::one()],
            ValueCurve::PiecewiseLinear(k) => k.taus.clone(),
            _ => Vec::new(),
        };
        all.into_iter().filter(|&t| t > lo && t < hi).collect()
    }
}
