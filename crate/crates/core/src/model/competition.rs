use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Distribution of the highest competing bid `C`, described by its CDF `q`.
///
/// All second-price quantities (`p`, `pi`, `U`, conditional price) are
/// closed-form: piecewise-linear CDFs are integrated exactly segment by
/// segment. A reserve price is a CDF that stays at zero up to the reserve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum CompetitionModel<T: Scalar> {
    /// `C ~ U[0, 1]`
    Uniform01,
    /// Linear interpolation through `(b_i, q_i)`.
    PiecewiseLinearCdf(CdfTable<T>),
}

/// Validated, continuous piecewise-linear CDF with precomputed integrals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCdf<T>", into = "RawCdf<T>")]
pub struct CdfTable<T: Scalar> {
    bids: Vec<T>,
    probs: Vec<T>,
    /// `cum[i] = int_0^{bids[i]} q`
    cum: Vec<T>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCdf<T> {
    knots: Vec<[T; 2]>,
}

impl<T: Scalar> TryFrom<RawCdf<T>> for CdfTable<T> {
    type Error = Error;

    fn try_from(raw: RawCdf<T>) -> Result<Self> {
        CdfTable::new(raw.knots.iter().map(|&[b, q]| (b, q)).collect())
    }
}

impl<T: Scalar> From<CdfTable<T>> for RawCdf<T> {
    fn from(c: CdfTable<T>) -> Self {
        RawCdf {
            knots: c.bids.iter().zip(&c.probs).map(|(&b, &q)| [b, q]).collect(),
        }
    }
}

impl<T: Scalar> CdfTable<T> {
    /// Requires `q_0 = 0` (no atom, hence continuity), non-decreasing
    /// probabilities in `[0, 1]`, strictly increasing bids starting at
    /// `b_0 >= 0` and a last knot with `q = 1`.
    pub fn new(knots: Vec<(T, T)>) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidModel(format!("competition.params.knots {msg}")));
        if knots.len() < 2 {
            return bad("needs at least two knots");
        }
        if knots.iter().any(|&(b, q)| !b.is_finite() || !q.is_finite()) {
            return bad("must be finite");
        }
        if knots[0].0 < T::zero() {
            return bad("must start at a non-negative bid");
        }
        if knots[0].1 != T::zero() {
            return bad("must start at q = 0 (atoms make q discontinuous)");
        }
        if knots.last().unwrap().1 != T::one() {
            return bad("must end at q = 1");
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return bad("bids must be strictly increasing");
            }
            if w[1].1 < w[0].1 {
                return bad("probabilities must be non-decreasing");
            }
        }
        let (bids, probs): (Vec<T>, Vec<T>) = knots.into_iter().unzip();
        let mut cum = Vec::with_capacity(bids.len());
        cum.push(T::zero());
        for i in 1..bids.len() {
            let area = (probs[i - 1] + probs[i]) * T::lit(0.5) * (bids[i] - bids[i - 1]);
            cum.push(cum[i - 1] + area);
        }
        Ok(Self { bids, probs, cum })
    }

    /// Segment `i` with `bids[i] <= b < bids[i+1]`; `None` below the first or past the last knot.
    #[inline]
    fn segment(&self, b: T) -> Option<usize> {
        let j = self.bids.partition_point(|&x| x <= b);
        if j == 0 || j >= self.bids.len() {
            None
        } else {
            Some(j - 1)
        }
    }

    #[inline]
    fn cdf(&self, b: T) -> T {
        if b < self.bids[0] {
            return T::zero();
        }
        match self.segment(b) {
            None => T::one(),
            Some(i) => {
                let w = (b - self.bids[i]) / (self.bids[i + 1] - self.bids[i]);
                self.probs[i] + w * (self.probs[i + 1] - self.probs[i])
            }
        }
    }

    #[inline]
    fn integral(&self, v: T) -> T {
        if v <= self.bids[0] {
            return T::zero();
        }
        match self.segment(v) {
            None => {
                let n = self.bids.len() - 1;
                self.cum[n] + (v - self.bids[n])
            }
            Some(i) => {
                let qv = self.cdf(v);
                self.cum[i] + (self.probs[i] + qv) * T::lit(0.5) * (v - self.bids[i])
            }
        }
    }

    fn inverse(&self, u: T) -> T {
        let j = self.probs.partition_point(|&p| p <= u);
        if j >= self.probs.len() {
            return *self.bids.last().unwrap();
        }
        let i = j - 1;
        let w = (u - self.probs[i]) / (self.probs[j] - self.probs[i]);
        self.bids[i] + w * (self.bids[j] - self.bids[i])
    }

    pub fn knots(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.bids.iter().copied().zip(self.probs.iter().copied())
    }
}

impl<T: Scalar> CompetitionModel<T> {
    pub fn piecewise_linear_cdf(knots: Vec<(T, T)>) -> Result<Self> {
        Ok(CompetitionModel::PiecewiseLinearCdf(CdfTable::new(knots)?))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            CompetitionModel::Uniform01 => "uniform01",
            CompetitionModel::PiecewiseLinearCdf(_) => "piecewise_linear_cdf",
        }
    }

    /// Smallest bid that wins with probability one.
    pub fn support_max(&self) -> T {
        match self {
            CompetitionModel::Uniform01 => T::one(),
            CompetitionModel::PiecewiseLinearCdf(c) => {
                let i = c.probs.partition_point(|&p| p < T::one());
                c.bids[i]
            }
        }
    }

    /// `q(b)`, extended by `0` for `b < 0`.
    #[inline]
    pub fn cdf(&self, b: T) -> T {
        match self {
            CompetitionModel::Uniform01 => b.max(T::zero()).min(T::one()),
            CompetitionModel::PiecewiseLinearCdf(c) => c.cdf(b),
        }
    }

    /// `pi(v) = int_0^v q`, extended by `0` for `v <= 0`.
    #[inline]
    pub fn profit(&self, v: T) -> T {
        match self {
            CompetitionModel::Uniform01 => {
                if v <= T::zero() {
                    T::zero()
                } else if v <= T::one() {
                    v * v * T::lit(0.5)
                } else {
                    v - T::lit(0.5)
                }
            }
            CompetitionModel::PiecewiseLinearCdf(c) => c.integral(v),
        }
    }

    /// `p(b) = q(b) b - pi(b)`, for `b >= 0`.
    #[inline]
    pub fn payment(&self, b: T) -> T {
        (self.cdf(b) * b - self.profit(b)).max(T::zero())
    }

    /// `U(v, b) = q(b) v - p(b)`, for `b >= 0`.
    #[inline]
    pub fn expected_utility(&self, v: T, b: T) -> T {
        // q(b) (v - b) + pi(b) is the same quantity without forming p(b).
        self.cdf(b) * (v - b) + self.profit(b)
    }

    pub fn win_prob(&self, b: T) -> Result<T> {
        check_bid(b)?;
        Ok(self.cdf(b))
    }

    pub fn expected_payment(&self, b: T) -> Result<T> {
        check_bid(b)?;
        Ok(self.payment(b))
    }

    pub fn one_shot_profit(&self, v: T) -> Result<T> {
        if !(v >= T::zero()) {
            return Err(Error::domain("value must be non-negative", v.as_f64()));
        }
        Ok(self.profit(v))
    }

    pub fn utility(&self, v: T, b: T) -> Result<T> {
        check_bid(b)?;
        Ok(self.expected_utility(v, b))
    }

    /// `E(C | C <= b) = b - pi(b) / q(b)`.
    pub fn conditional_price(&self, b: T) -> Result<T> {
        check_bid(b)?;
        let q = self.cdf(b);
        if !(q > T::zero()) {
            return Err(Error::UndefinedConditional { bid: b.as_f64() });
        }
        let price = match self {
            CompetitionModel::Uniform01 if b <= T::one() => b * T::lit(0.5),
            _ => b - self.profit(b) / q,
        };
        Ok(price.max(T::zero()).min(b))
    }

    /// Inverse CDF at `u` in `[0, 1)`.
    #[inline]
    pub fn quantile(&self, u: T) -> T {
        match self {
            CompetitionModel::Uniform01 => u,
            CompetitionModel::PiecewiseLinearCdf(c) => c.inverse(u),
        }
    }

    /// Draws `C` by inverse-CDF sampling.
    #[inline]
    pub fn sample_competition<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let u: f64 = rng.random();
        self.quantile(T::lit(u))
    }

    /// Bids in `(lo, hi)` where `q` has a kink.
    pub fn kinks(&self, lo: T, hi: T) -> Vec<T> {
        let all = match self {
            CompetitionModel::Uniform01 => vec![T::zero(), T::one()],
            CompetitionModel::PiecewiseLinearCdf(c) => c.bids.clone(),
        };
        all.into_iter().filter(|&b| b > lo && b < hi).collect()
    }
}

fn check_bid<T: Scalar>(b: T) -> Result<()> {
    if b >= T::zero() {
        Ok(())
    } else {
        Err(Error::domain("bid must be non-negative", b.as_f64()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table() -> CompetitionModel<f64> {
        CompetitionModel::piecewise_linear_cdf(vec![(0.0, 0.0), (1.0, 0.5), (2.0, 1.0)]).unwrap()
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn win_prob_examples() {
        let u = CompetitionModel::<f64>::Uniform01;
        assert_eq!(u.win_prob(0.3).unwrap(), 0.3);
        assert_eq!(u.win_prob(2.0).unwrap(), 1.0);
        assert_eq!(table().win_prob(1.5).unwrap(), 0.75);
        assert!(u.win_prob(-0.1).is_err());
    }

    #[test]
    fn payment_examples() {
        let u = CompetitionModel::<f64>::Uniform01;
        assert_eq!(u.expected_payment(0.5).unwrap(), 0.125);
        assert_eq!(u.expected_payment(1.0).unwrap(), 0.5);
        assert_eq!(u.expected_payment(0.0).unwrap(), 0.0);
        assert_eq!(table().expected_payment(0.0).unwrap(), 0.0);
        assert!(u.expected_payment(-1.0).is_err());
    }

    #[test]
    fn profit_examples() {
        let u = CompetitionModel::<f64>::Uniform01;
        assert_eq!(u.one_shot_profit(1.0).unwrap(), 0.5);
        assert_eq!(u.one_shot_profit(2.0).unwrap(), 1.5);
        assert_eq!(u.one_shot_profit(0.0).unwrap(), 0.0);
        assert_eq!(table().one_shot_profit(0.0).unwrap(), 0.0);
        assert!(u.one_shot_profit(-0.5).is_err());
    }

    #[test]
    fn utility_examples() {
        let u = CompetitionModel::<f64>::Uniform01;
        assert_eq!(u.utility(1.0, 0.5).unwrap(), 0.375);
        assert_eq!(u.utility(0.7, 0.0).unwrap(), 0.0);
        assert_eq!(table().utility(3.0, 0.0).unwrap(), 0.0);
        assert_eq!(u.utility(1.0, 1.0).unwrap(), u.one_shot_profit(1.0).unwrap());
        assert!(u.utility(1.0, -0.5).is_err());
    }

    #[test]
    fn conditional_price_examples() {
        let u = CompetitionModel::<f64>::Uniform01;
        assert_eq!(u.conditional_price(0.8).unwrap(), 0.4);
        assert_eq!(u.conditional_price(1.0).unwrap(), 0.5);
        let same = CompetitionModel::piecewise_linear_cdf(vec![(0.0f64, 0.0), (1.0, 1.0)]).unwrap();
        assert!((same.conditional_price(0.6).unwrap() - 0.3).abs() < 1e-15);
        let reserve = CompetitionModel::piecewise_linear_cdf(vec![(0.0, 0.0), (0.2, 0.0), (1.0, 1.0)]).unwrap();
        assert!(matches!(
            reserve.conditional_price(0.1),
            Err(Error::UndefinedConditional { .. })
        ));
        assert!(u.conditional_price(0.0).is_err());
    }

    #[test]
    fn cdf_validation_rejects_jumps() {
        let bad = |k: Vec<(f64, f64)>| CompetitionModel::piecewise_linear_cdf(k).is_err();
        assert!(bad(vec![(0.0, 0.2), (1.0, 1.0)]));
        assert!(bad(vec![(0.0, 0.0), (1.0, 0.9)]));
        assert!(bad(vec![(0.0, 0.0), (0.5, 0.6), (0.5, 0.8), (1.0, 1.0)]));
        assert!(bad(vec![(0.0, 0.0), (0.5, 0.6), (0.7, 0.4), (1.0, 1.0)]));
        assert!(bad(vec![(-0.5, 0.0), (1.0, 1.0)]));
        assert!(bad(vec![(0.0, 0.0)]));
        let ok = CompetitionModel::piecewise_linear_cdf(vec![(0.3, 0.0), (1.0, 1.0)]).unwrap();
        assert_eq!(ok.cdf(0.1), 0.0);
        assert_eq!(ok.support_max(), 1.0);
        assert_eq!(table().support_max(), 2.0);
    }

    #[test]
    fn payment_matches_quadrature_identity() {
        let models = [
            CompetitionModel::<f64>::Uniform01,
            table(),
            CompetitionModel::piecewise_linear_cdf(vec![(0.1, 0.0), (0.4, 0.3), (0.5, 0.3), (1.2, 0.9), (1.5, 1.0)])
                .unwrap(),
        ];
        for m in &models {
            let mut knots = m.kinks(0.0, 10.0);
            knots.insert(0, 0.0);
            for i in 1..=60 {
                let b = i as f64 * 0.04;
                // integrate q piecewise between kinks so Simpson is exact per segment
                let mut pts: Vec<f64> = knots.iter().copied().filter(|&x| x < b).collect();
                pts.push(b);
                let int_q: f64 = pts.windows(2).map(|w| simpson(|t| m.cdf(t), w[0], w[1], 2)).sum();
                let oracle = m.cdf(b) * b - int_q;
                let p = m.expected_payment(b).unwrap();
                let scale = oracle.abs().max(1e-300);
                assert!(
                    (p - oracle).abs() / scale < 1e-8 || (p - oracle).abs() < 1e-15,
                    "{m:?} b={b}"
                );
            }
        }
    }

    #[test]
    fn profit_derivative_is_cdf() {
        let h = 1e-6;
        for m in [CompetitionModel::<f64>::Uniform01, table()] {
            for i in 1..100 {
                let v = i as f64 * 0.0237;
                if m.kinks(v - 2.0 * h, v + 2.0 * h).is_empty() {
                    let fd = (m.profit(v + h) - m.profit(v - h)) / (2.0 * h);
                    assert!((fd - m.cdf(v)).abs() < 1e-5, "{m:?} v={v}");
                }
            }
        }
    }

    #[test]
    fn uniform_conditional_price_is_half() {
        let u = CompetitionModel::<f64>::Uniform01;
        for i in 1..=100 {
            let b = i as f64 / 100.0;
            assert_eq!(u.conditional_price(b).unwrap(), b / 2.0);
        }
    }

    #[test]
    fn sampling_examples() {
        let u = CompetitionModel::<f64>::Uniform01;
        let mut r1 = ChaCha8Rng::seed_from_u64(17);
        let mut r2 = ChaCha8Rng::seed_from_u64(17);
        let first: f64 = r2.random();
        assert_eq!(u.sample_competition(&mut r1), first);
        let t = table();
        assert_eq!(t.quantile(0.5), 1.0);
        assert_eq!(t.quantile(0.0), 0.0);
    }

    #[test]
    fn empirical_cdf_converges() {
        // Kolmogorov-Smirnov: P(sup gap > 1.63 / sqrt(n)) ~ 1%; 1.63e-3 at n = 1e6
        let n = 1_000_000;
        for m in [CompetitionModel::<f64>::Uniform01, table()] {
            let mut rng = ChaCha8Rng::seed_from_u64(2024);
            let mut draws: Vec<f64> = (0..n).map(|_| m.sample_competition(&mut rng)).collect();
            draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut sup = 0.0f64;
            for (i, &x) in draws.iter().enumerate() {
                let q = m.cdf(x);
                sup = sup
                    .max((q - i as f64 / n as f64).abs())
                    .max(((i + 1) as f64 / n as f64 - q).abs());
            }
            assert!(sup < 0.005, "{m:?}: {sup}");
        }
    }

    #[test]
    fn single_precision_arithmetic() {
        let u = CompetitionModel::<f32>::Uniform01;
        assert_eq!(u.expected_payment(0.5f32).unwrap(), 0.125f32);
        assert_eq!(u.one_shot_profit(2.0f32).unwrap(), 1.5f32);
    }

    proptest! {
        #[test]
        fn truthful_bid_dominates(v in 0.0f64..3.0, b in 0.0f64..3.0) {
            for m in [CompetitionModel::<f64>::Uniform01, table()] {
                let u = m.utility(v, b).unwrap();
                prop_assert!(u <= m.one_shot_profit(v).unwrap() + 1e-12);
            }
        }

        #[test]
        fn conditional_price_in_range(b in 1e-6f64..3.0) {
            for m in [CompetitionModel::<f64>::Uniform01, table()] {
                let p = m.conditional_price(b).unwrap();
                prop_assert!(p >= 0.0 && p <= b);
            }
        }

        #[test]
        fn second_price_quantities_monotone(b in 0.0f64..3.0, d in 0.0f64..1.0) {
            for m in [CompetitionModel::<f64>::Uniform01, table()] {
                prop_assert!(m.cdf(b) <= m.cdf(b + d));
                prop_assert!(m.payment(b) <= m.payment(b + d) + 1e-15);
                prop_assert!(m.profit(b) <= m.profit(b + d));
                prop_assert!(m.payment(b) >= 0.0);
            }
        }
    }
}
