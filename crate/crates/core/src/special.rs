//! Log-gamma and the upper incomplete gamma function.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const MAX_ITER: usize = 10_000;

/// `ln |Gamma(s)|` for `s` not a non-positive integer.
pub fn ln_gamma<T: Scalar>(s: T) -> T {
    let half = T::lit(0.5);
    if s < half {
        // reflection: Gamma(s) Gamma(1 - s) = pi / sin(pi s)
        let pi = T::PI();
        return (pi / (pi * s).sin().abs()).ln() - ln_gamma(T::one() - s);
    }
    let z = s - T::one();
    let mut acc = T::lit(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (z + T::from_usize_lossy(i));
    }
    let t = z + T::lit(LANCZOS_G) + half;
    half * (T::lit(2.0) * T::PI()).ln() + (z + half) * t.ln() - t + acc.ln()
}

/// `Gamma(s)` for `s > 0`.
pub fn gamma<T: Scalar>(s: T) -> T {
    ln_gamma(s).exp()
}

/// Regularized upper incomplete gamma `Q(s, x) = Gamma(s, x) / Gamma(s)` for
/// `s > 0`, `x > 0`.
pub fn regularized_upper_gamma<T: Scalar>(s: T, x: T) -> Result<T> {
    if !(s > T::zero()) || !s.is_finite() {
        return Err(Error::domain("regularized gamma shape", s.as_f64()));
    }
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::domain("incomplete gamma cut", x.as_f64()));
    }
    if x < s + T::one() {
        Ok(T::one() - lower_series(s, x)?)
    } else {
        Ok((s * x.ln() - x - ln_gamma(s)).exp() * continued_fraction(s, x)?)
    }
}

/// `Gamma(s, x) = int_x^inf t^(s-1) e^(-t) dt` for `s > -1`, `x > 0`.
pub fn upper_incomplete_gamma<T: Scalar>(s: T, x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::domain("incomplete gamma cut", x.as_f64()));
    }
    if !(s > -T::one()) || !s.is_finite() {
        return Err(Error::domain("incomplete gamma shape", s.as_f64()));
    }
    if x >= T::one() && x >= s + T::one() {
        return Ok((s * x.ln() - x).exp() * continued_fraction(s, x)?);
    }
    if s > T::zero() {
        return Ok(gamma(s) * regularized_upper_gamma(s, x)?);
    }
    if s == T::zero() {
        return Ok(exp_integral_e1_series(x));
    }
    // Gamma(s, x) = (Gamma(s + 1, x) - x^s e^-x) / s
    let up = upper_incomplete_gamma(s + T::one(), x)?;
    Ok((up - (s * x.ln() - x).exp()) / s)
}

/// `P(s, x)` by the power series, valid for `x < s + 1`.
fn lower_series<T: Scalar>(s: T, x: T) -> Result<T> {
    let mut term = T::one();
    let mut sum = T::one();
    let mut denom = s;
    for _ in 0..MAX_ITER {
        denom = denom + T::one();
        term = term * x / denom;
        sum = sum + term;
        if term.abs() <= sum.abs() * T::epsilon() {
            return Ok((s * x.ln() - x - ln_gamma(s + T::one())).exp() * sum);
        }
    }
    Err(Error::Divergence(format!(
        "incomplete gamma series did not converge at s={s}, x={x}"
    )))
}

/// Modified Lentz evaluation of the continued fraction
/// `1 / (x + 1 - s - 1 (1 - s) / (x + 3 - s - ...))`.
fn continued_fraction<T: Scalar>(s: T, x: T) -> Result<T> {
    let tiny = T::min_positive_value() / T::epsilon();
    let two = T::lit(2.0);
    let mut b = x + T::one() - s;
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let fi = T::from_usize_lossy(i);
        let an = -fi * (fi - s);
        b = b + two;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let delta = d * c;
        h = h * delta;
        if (delta - T::one()).abs() <= T::epsilon() {
            return Ok(h);
        }
    }
    Err(Error::Divergence(format!(
        "incomplete gamma continued fraction did not converge at s={s}, x={x}"
    )))
}

/// `E1(x) = Gamma(0, x)` for `0 < x < 1`.
fn exp_integral_e1_series<T: Scalar>(x: T) -> T {
    let euler = T::lit(0.577_215_664_901_532_9);
    let mut sum = T::zero();
    let mut term = T::one();
    for n in 1..MAX_ITER {
        let fnn = T::from_usize_lossy(n);
        term = -term * x / fnn;
        let add = term / fnn;
        sum = sum + add;
        if add.abs() <= sum.abs() * T::epsilon() {
            break;
        }
    }
    -euler - x.ln() - sum
}
