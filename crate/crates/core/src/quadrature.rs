//! Adaptive Simpson quadrature and cumulative integral tables.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adaptive Simpson rule with Richardson correction.
#[derive(Clone, Copy, Debug)]
pub struct Simpson<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_depth: u32,
}

impl<T: Scalar> Default for Simpson<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-9),
            abs_tol: T::lit(1e-300).max(T::min_positive_value()),
            max_depth: 48,
        }
    }
}

/// An accepted subinterval of an adaptive Simpson run.
#[derive(Clone, Copy, Debug)]
pub struct Panel<T> {
    pub a: T,
    pub b: T,
    pub fa: T,
    pub integral: T,
}

impl<T: Scalar> Simpson<T> {
    pub fn with_rel_tol(rel_tol: T) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    /// `int_a^b f`.
    pub fn integrate<F: Fn(T) -> T>(&self, f: F, a: T, b: T) -> Result<T> {
        self.integrate_pieces(&f, &[a, b])
    }

    /// Sum of integrals over consecutive pieces `[pts[i], pts[i+1]]`.
    ///
    /// Splitting at the integrand's kinks keeps every piece smooth.
    pub fn integrate_pieces<F: Fn(T) -> T>(&self, f: &F, pts: &[T]) -> Result<T> {
        let mut total = T::zero();
        self.each_panel(f, pts, |p| total = total + p.integral)?;
        Ok(total)
    }

    /// Runs the adaptive rule on every piece and hands accepted panels, in
    /// increasing order, to `sink`.
    pub fn each_panel<F: Fn(T) -> T, S: FnMut(Panel<T>)>(&self, f: &F, pts: &[T], mut sink: S) -> Result<()> {
        if pts.len() < 2 {
            return Ok(());
        }
        let len = pts[pts.len() - 1] - pts[0];
        if !(len >= T::zero()) {
            return Err(Error::Quadrature {
                a: pts[0].as_f64(),
                b: pts[pts.len() - 1].as_f64(),
                reason: "pieces must be increasing".into(),
            });
        }
        let six = T::lit(6.0);
        let four = T::lit(4.0);
        let half = T::lit(0.5);
        // coarse pass to set the absolute target
        let mut coarse = Vec::with_capacity(pts.len() - 1);
        let mut coarse_total = T::zero();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let m = (a + b) * half;
            let (fa, fm, fb) = (f(a), f(m), f(b));
            let s = (b - a) / six * (fa + four * fm + fb);
            coarse.push((fa, fm, fb, s));
            coarse_total = coarse_total + s.abs();
        }
        for (w, &(fa, fm, fb, s)) in pts.windows(2).zip(&coarse) {
            let (a, b) = (w[0], w[1]);
            if !(b > a) {
                continue;
            }
            let share = if len > T::zero() { (b - a) / len } else { T::one() };
            let eps = (self.rel_tol * s.abs())
                .max(self.rel_tol * coarse_total * share)
                .max(self.abs_tol);
            self.recurse(f, a, (a + b) * half, b, fa, fm, fb, s, eps, self.max_depth, &mut sink)?;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(T) -> T, S: FnMut(Panel<T>)>(
        &self,
        f: &F,
        a: T,
        m: T,
        b: T,
        fa: T,
        fm: T,
        fb: T,
        whole: T,
        eps: T,
        depth: u32,
        sink: &mut S,
    ) -> Result<()> {
        let half = T::lit(0.5);
        let lm = (a + m) * half;
        let rm = (m + b) * half;
        let (flm, frm) = (f(lm), f(rm));
        let six = T::lit(6.0);
        let four = T::lit(4.0);
        let left = (m - a) / six * (fa + four * flm + fm);
        let right = (b - m) / six * (fm + four * frm + fb);
        let delta = left + right - whole;
        if !delta.is_finite() {
            return Err(Error::Quadrature {
                a: a.as_f64(),
                b: b.as_f64(),
                reason: "integrand not finite".into(),
            });
        }
        let tiny = lm <= a || rm >= b || m <= a || m >= b;
        let noise = T::lit(64.0) * T::epsilon() * (left.abs() + right.abs());
        if depth == 0 || tiny || delta.abs() <= T::lit(15.0) * eps.max(noise) {
            let fifteenth = delta / T::lit(15.0);
            // split the correction so panels stay additive
            sink(Panel {
                a,
                b: m,
                fa,
                integral: left + fifteenth * half,
            });
            sink(Panel {
                a: m,
                b,
                fa: fm,
                integral: right + fifteenth * half,
            });
            return Ok(());
        }
        self.recurse(f, a, lm, m, fa, flm, fm, left, eps * half, depth - 1, sink)?;
        self.recurse(f, m, rm, b, fm, frm, fb, right, eps * half, depth - 1, sink)
    }
}

/// Running integral `F(t) = int_0^t f` built from adaptive panels, extendable
/// to the right.
///
/// Inside a panel the partial integral is a fresh Simpson estimate on
/// `[panel.a, t]`, which costs two evaluations of `f`.
pub struct CumulativeIntegral<T, F> {
    f: F,
    rule: Simpson<T>,
    starts: Vec<T>,
    fstarts: Vec<T>,
    cum: Vec<T>,
    end: T,
    total: T,
}

impl<T: Scalar, F: Fn(T) -> T> CumulativeIntegral<T, F> {
    pub fn new(f: F, rule: Simpson<T>) -> Self {
        Self {
            f,
            rule,
            starts: Vec::new(),
            fstarts: Vec::new(),
            cum: Vec::new(),
            end: T::zero(),
            total: T::zero(),
        }
    }

    /// Upper end of the tabulated range.
    pub fn end(&self) -> T {
        self.end
    }

    /// `F(end)`.
    pub fn total(&self) -> T {
        self.total
    }

    /// Tabulates up to `t_end`, splitting at `breakpoints` (any order, any range).
    pub fn extend_to(&mut self, t_end: T, breakpoints: &[T]) -> Result<()> {
        if t_end <= self.end {
            return Ok(());
        }
        let mut pts = vec![self.end];
        let mut inner: Vec<T> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > self.end && b < t_end)
            .collect();
        inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.extend(inner);
        pts.push(t_end);
        let (starts, fstarts, cum, mut total) = (&mut self.starts, &mut self.fstarts, &mut self.cum, self.total);
        self.rule.each_panel(&self.f, &pts, |p| {
            starts.push(p.a);
            fstarts.push(p.fa);
            cum.push(total);
            total = total + p.integral;
        })?;
        self.total = total;
        self.end = t_end;
        Ok(())
    }

    /// Extends in doubling chunks until `stop(F(end))` holds or `end >= limit`.
    /// Returns whether `stop` was met.
    pub fn extend_until<B, S>(&mut self, first_chunk: T, limit: T, breakpoints: B, stop: S) -> Result<bool>
    where
        B: Fn(T, T) -> Vec<T>,
        S: Fn(T) -> bool,
    {
        let mut chunk = first_chunk;
        while !stop(self.total) {
            if self.end >= limit {
                return Ok(false);
            }
            let next = (self.end + chunk).min(limit);
            let bps = breakpoints(self.end, next);
            self.extend_to(next, &bps)?;
            chunk = chunk + chunk;
        }
        Ok(true)
    }

    /// `F(t)` for `0 <= t <= end`; past the end returns `F(end)`.
    pub fn value(&self, t: T) -> T {
        if self.starts.is_empty() || t <= T::zero() {
            return T::zero();
        }
        if t >= self.end {
            return self.total;
        }
        let j = self.starts.partition_point(|&s| s <= t) - 1;
        let a = self.starts[j];
        if t == a {
            return self.cum[j];
        }
        let m = (a + t) * T::lit(0.5);
        let part = (t - a) / T::lit(6.0) * (self.fstarts[j] + T::lit(4.0) * (self.f)(m) + (self.f)(t));
        self.cum[j] + part
    }

    /// The integrand.
    pub fn integrand(&self, t: T) -> T {
        (self.f)(t)
    }
}
