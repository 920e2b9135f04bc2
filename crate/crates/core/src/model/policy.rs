use serde::{Deserialize, Serialize};

use super::curve::ValueCurve;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A stationary bidding rule `tau -> b(tau)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum BidPolicy<T: Scalar> {
    /// Bid the immediate value, `b = k(tau)`.
    Greedy,
    /// Bid a fixed fraction of the immediate value, `b = alpha k(tau)`.
    Shading { alpha: T },
    /// Bid a fixed amount regardless of age.
    Constant { bid: T },
    /// Tabulated bids, linearly interpolated.
    Grid(GridPolicy<T>),
}

/// How a [`GridPolicy`] continues past its last knot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridTail {
    /// Hold the last bid.
    #[default]
    Hold,
    /// Last bid plus the increase of `k` since the last knot, clipped at zero.
    FollowCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid<T>", into = "RawGrid<T>")]
pub struct GridPolicy<T: Scalar> {
    taus: Vec<T>,
    bids: Vec<T>,
    tail: GridTail,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid<T> {
    taus: Vec<T>,
    bids: Vec<T>,
    #[serde(default)]
    tail: GridTail,
}

impl<T: Scalar> TryFrom<RawGrid<T>> for GridPolicy<T> {
    type Error = Error;

    fn try_from(raw: RawGrid<T>) -> Result<Self> {
        GridPolicy::new(raw.taus, raw.bids, raw.tail)
    }
}

impl<T: Scalar> From<GridPolicy<T>> for RawGrid<T> {
    fn from(g: GridPolicy<T>) -> Self {
        RawGrid {
            taus: g.taus,
            bids: g.bids,
            tail: g.tail,
        }
    }
}

impl<T: Scalar> GridPolicy<T> {
    pub fn new(taus: Vec<T>, bids: Vec<T>, tail: GridTail) -> Result<Self> {
        if taus.is_empty() || taus.len() != bids.len() {
            return Err(Error::InvalidModel(
                "policy grid needs matching, non-empty taus and bids".into(),
            ));
        }
        if taus[0] < T::zero() || taus.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidModel(
                "policy grid ages must be non-negative and strictly increasing".into(),
            ));
        }
        if bids.iter().any(|&b| !(b >= T::zero()) || !b.is_finite()) {
            return Err(Error::InvalidModel(
                "policy grid bids must be finite and non-negative".into(),
            ));
        }
        Ok(Self { taus, bids, tail })
    }

    pub fn taus(&self) -> &[T] {
        &self.taus
    }

    pub fn bids(&self) -> &[T] {
        &self.bids
    }

    pub fn tail(&self) -> GridTail {
        self.tail
    }

    pub fn last_age(&self) -> T {
        *self.taus.last().unwrap()
    }

    #[inline]
    fn eval(&self, tau: T, curve: &ValueCurve<T>) -> T {
        let last = self.taus.len() - 1;
        if tau <= self.taus[0] {
            return self.bids[0];
        }
        if tau >= self.taus[last] {
            return match self.tail {
                GridTail::Hold => self.bids[last],
                GridTail::FollowCurve => {
                    (self.bids[last] + curve.value(tau) - curve.value(self.taus[last])).max(T::zero())
                }
            };
        }
        let j = self.taus.partition_point(|&t| t <= tau);
        let (t0, t1) = (self.taus[j - 1], self.taus[j]);
        let w = (tau - t0) / (t1 - t0);
        self.bids[j - 1] + w * (self.bids[j] - self.bids[j - 1])
    }
}

impl<T: Scalar> BidPolicy<T> {
    pub fn shading(alpha: T) -> Result<Self> {
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(Error::InvalidModel(format!(
                "shading factor must lie in [0, 1], got {alpha}"
            )));
        }
        Ok(BidPolicy::Shading { alpha })
    }

    pub fn constant(bid: T) -> Result<Self> {
        let p = BidPolicy::Constant { bid };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BidPolicy::Shading { alpha } if !(*alpha >= T::zero() && *alpha <= T::one()) => Err(Error::InvalidModel(
                format!("shading factor must lie in [0, 1], got {alpha}"),
            )),
            BidPolicy::Constant { bid } if !(*bid >= T::zero()) || !bid.is_finite() => Err(Error::InvalidModel(
                format!("constant bid must be non-negative, got {bid}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            BidPolicy::Greedy => "greedy".into(),
            BidPolicy::Shading { alpha } => format!("shading_{alpha}"),
            BidPolicy::Constant { bid } => format!("constant_{bid}"),
            BidPolicy::Grid(_) => "grid".into(),
        }
    }

    /// `b(tau)`; never negative.
    #[inline]
    pub fn bid(&self, tau: T, curve: &ValueCurve<T>) -> T {
        match self {
            BidPolicy::Greedy => curve.value(tau),
            BidPolicy::Shading { alpha } => *alpha * curve.value(tau),
            BidPolicy::Constant { bid } => *bid,
            BidPolicy::Grid(g) => g.eval(tau, curve),
        }
    }

    /// Ages in `(lo, hi)` where `b` may have a kink, sorted.
    pub fn breakpoints(&self, curve: &ValueCurve<T>, lo: T, hi: T) -> Vec<T> {
        let mut pts = match self {
            BidPolicy::Constant { .. } => Vec::new(),
            BidPolicy::Greedy | BidPolicy::Shading { .. } => curve.kinks(lo, hi),
            BidPolicy::Grid(g) => {
                let start = g.taus.partition_point(|&t| t <= lo);
                let end = g.taus.partition_point(|&t| t < hi);
                let mut v = g.taus[start..end].to_vec();
                if g.tail == GridTail::FollowCurve {
                    v.extend(curve.kinks(g.last_age().max(lo), hi));
                }
                v
            }
        };
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_policies() {
        let k = ValueCurve::<f64>::Hyperbolic;
        assert_eq!(BidPolicy::Greedy.bid(1.0, &k), 0.5);
        assert_eq!(BidPolicy::shading(0.5).unwrap().bid(1.0, &k), 0.25);
        assert_eq!(BidPolicy::constant(0.3).unwrap().bid(9.0, &k), 0.3);
        assert!(BidPolicy::<f64>::shading(1.5).is_err());
        assert!(BidPolicy::<f64>::constant(-0.1).is_err());
    }

    #[test]
    fn grid_interpolates_and_extends() {
        let k = ValueCurve::<f64>::ExpSaturating;
        let g = GridPolicy::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.4, 0.5], GridTail::Hold).unwrap();
        let p = BidPolicy::Grid(g.clone());
        assert_eq!(p.bid(0.5, &k), 0.2);
        assert_eq!(p.bid(1.5, &k), 0.45);
        assert_eq!(p.bid(7.0, &k), 0.5);
        let f = BidPolicy::Grid(GridPolicy::new(g.taus, g.bids, GridTail::FollowCurve).unwrap());
        let expect = 0.5 + k.value(7.0) - k.value(2.0);
        assert!((f.bid(7.0, &k) - expect).abs() < 1e-15);
    }

    #[test]
    fn grid_validation() {
        assert!(GridPolicy::<f64>::new(vec![0.0, 0.0], vec![0.1, 0.2], GridTail::Hold).is_err());
        assert!(GridPolicy::<f64>::new(vec![0.0, 1.0], vec![0.1], GridTail::Hold).is_err());
        assert!(GridPolicy::<f64>::new(vec![0.0, 1.0], vec![0.1, -0.2], GridTail::Hold).is_err());
    }

    #[test]
    fn json_descriptor_shape() {
        let p: BidPolicy<f64> = serde_json::from_str(r#"{"kind":"shading","params":{"alpha":0.8}}"#).unwrap();
        assert_eq!(p, BidPolicy::Shading { alpha: 0.8 });
        let p: BidPolicy<f64> =
            serde_json::from_str(r#"{"kind":"grid","params":{"taus":[0,1],"bids":[0,1],"tail":"follow_curve"}}"#)
                .unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let back: BidPolicy<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn breakpoints_cover_grid_knots() {
        let k = ValueCurve::<f64>::TwoStep;
        let g = GridPolicy::new(vec![0.0, 0.5, 1.5], vec![0.0, 0.1, 0.2], GridTail::FollowCurve).unwrap();
        let pts = BidPolicy::Grid(g).breakpoints(&k, 0.0, 10.0);
        assert_eq!(pts, vec![0.5, 1.5]);
        assert_eq!(BidPolicy::Greedy.breakpoints(&k, 0.0, 10.0), vec![0.04, 0.92, 1.0]);
    }
}
