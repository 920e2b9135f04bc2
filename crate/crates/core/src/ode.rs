//! Adaptive Dormand–Prince 5(4) integration of scalar initial value problems.
//!
//! The integrator stops either at the end of the span or when the solution
//! first leaves the band `(guard_lo, guard_hi)`; guard crossings are located
//! on the method's dense interpolant.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

// Butcher tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// 5th minus 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// step size controller
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

/// A scalar initial value problem `y' = rhs(t, y)`, `y(0) = y0` on `[0, t_end]`.
#[derive(Clone, Debug)]
pub struct IvpSpec<T, F> {
    pub rhs: F,
    pub y0: T,
    pub t_end: T,
    pub rel_tol: T,
    pub abs_tol: T,
    pub guard_hi: T,
    pub guard_lo: T,
    /// Spacing of the dense output grid; `None` records accepted steps instead.
    pub grid_step: Option<T>,
    /// Times the integrator must land on exactly (kinks of the right-hand side).
    pub breakpoints: Vec<T>,
    pub max_steps: usize,
}

impl<T: Scalar, F: Fn(T, T) -> T> IvpSpec<T, F> {
    pub fn new(rhs: F, y0: T, t_end: T) -> Self {
        Self {
            rhs,
            y0,
            t_end,
            rel_tol: T::lit(1e-10),
            abs_tol: T::lit(1e-12),
            guard_hi: T::infinity(),
            guard_lo: T::neg_infinity(),
            grid_step: None,
            breakpoints: Vec::new(),
            max_steps: 5_000_000,
        }
    }

    pub fn tolerances(mut self, rel_tol: T, abs_tol: T) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn guards(mut self, lo: T, hi: T) -> Self {
        self.guard_lo = lo;
        self.guard_hi = hi;
        self
    }

    pub fn grid(mut self, step: T) -> Self {
        self.grid_step = Some(step);
        self
    }

    pub fn breakpoints(mut self, pts: Vec<T>) -> Self {
        self.breakpoints = pts;
        self
    }
}

/// How an integration ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    EscapedUp,
    EscapedDown,
}

/// One accepted step's quartic interpolant.
#[derive(Clone, Copy, Debug)]
struct Segment<T> {
    t0: T,
    h: T,
    cont: [T; 5],
}

impl<T: Scalar> Segment<T> {
    #[inline]
    fn eval(&self, t: T) -> T {
        let s = if self.h > T::zero() {
            (t - self.t0) / self.h
        } else {
            T::zero()
        };
        let s1 = T::one() - s;
        let c = &self.cont;
        c[0] + (c[1] + (c[2] + (c[3] + c[4] * s1) * s) * s1) * s
    }
}

/// Output of [`integrate`].
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    pub termination: Termination,
    pub t_stop: T,
    segments: Vec<Segment<T>>,
    y_stop: T,
}

impl<T: Scalar> Trajectory<T> {
    /// Value at the stopping time.
    pub fn final_value(&self) -> T {
        self.y_stop
    }

    /// Dense evaluation anywhere in `[0, t_stop]`.
    pub fn eval(&self, t: T) -> Option<T> {
        if t < T::zero() || t > self.t_stop || self.segments.is_empty() {
            if t == self.t_stop {
                return Some(self.y_stop);
            }
            return None;
        }
        let j = self.segments.partition_point(|s| s.t0 <= t);
        let seg = &self.segments[j.saturating_sub(1)];
        Some(seg.eval(t.min(seg.t0 + seg.h)))
    }

    pub fn steps(&self) -> usize {
        self.segments.len()
    }
}

/// Integrate `spec` with the Dormand–Prince 5(4) pair.
///
/// The minimum step is `1e-12 * t_end`; falling below it (other than to hit a
/// breakpoint or the end of the span) is reported as an integration failure.
pub fn integrate<T: Scalar, F: Fn(T, T) -> T>(spec: &IvpSpec<T, F>) -> Result<Trajectory<T>> {
    let f = &spec.rhs;
    let zero = T::zero();
    let t_end = spec.t_end;
    if !(t_end > zero) || !t_end.is_finite() {
        return Err(Error::domain("integration span must be positive", t_end.as_f64()));
    }
    if !(spec.rel_tol > zero && spec.abs_tol > zero) {
        return Err(Error::domain("tolerances must be positive", spec.rel_tol.as_f64()));
    }
    if !(spec.guard_lo < spec.y0 && spec.y0 < spec.guard_hi) {
        return Err(Error::domain("initial value outside the guard band", spec.y0.as_f64()));
    }
    if let Some(step) = spec.grid_step {
        if !(step > zero) {
            return Err(Error::domain("grid step must be positive", step.as_f64()));
        }
    }

    let lit = T::lit;
    let h_min = lit(1e-12) * t_end;
    let mut bps: Vec<T> = spec
        .breakpoints
        .iter()
        .copied()
        .filter(|&b| b > zero && b < t_end)
        .collect();
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup();
    let mut next_bp = 0usize;

    let mut out = Output::new(spec.grid_step, spec.y0);
    let mut t = zero;
    let mut y = spec.y0;
    let mut k1 = f(t, y);
    if !k1.is_finite() {
        return Err(Error::Integration {
            t_stop: 0.0,
            reason: "right-hand side not finite at the initial point".into(),
        });
    }
    let mut h = initial_step(f, t, y, k1, spec).min(t_end);
    let mut err_old = lit(1e-4);
    let mut rejected = false;
    let mut n_steps = 0usize;

    loop {
        n_steps += 1;
        if n_steps > spec.max_steps {
            return Err(Error::Integration {
                t_stop: t.as_f64(),
                reason: format!("exceeded {} steps", spec.max_steps),
            });
        }
        // land exactly on the next breakpoint or the end of the span
        let stop_at = if next_bp < bps.len() { bps[next_bp] } else { t_end };
        let mut landing = false;
        if t + h * lit(1.01) >= stop_at {
            h = stop_at - t;
            landing = true;
        }
        if h < h_min && !landing {
            return Err(Error::Integration {
                t_stop: t.as_f64(),
                reason: format!("step size {} fell below the minimum {}", h, h_min),
            });
        }

        let k2 = f(t + lit(C2) * h, y + h * (lit(A21) * k1));
        let k3 = f(t + lit(C3) * h, y + h * (lit(A31) * k1 + lit(A32) * k2));
        let k4 = f(t + lit(C4) * h, y + h * (lit(A41) * k1 + lit(A42) * k2 + lit(A43) * k3));
        let k5 = f(
            t + lit(C5) * h,
            y + h * (lit(A51) * k1 + lit(A52) * k2 + lit(A53) * k3 + lit(A54) * k4),
        );
        let t_new = if landing { stop_at } else { t + h };
        let k6 = f(
            t_new,
            y + h * (lit(A61) * k1 + lit(A62) * k2 + lit(A63) * k3 + lit(A64) * k4 + lit(A65) * k5),
        );
        let y_new = y + h * (lit(B1) * k1 + lit(B3) * k3 + lit(B4) * k4 + lit(B5) * k5 + lit(B6) * k6);
        let k7 = f(t_new, y_new);

        let err_abs = h * (lit(E1) * k1 + lit(E3) * k3 + lit(E4) * k4 + lit(E5) * k5 + lit(E6) * k6 + lit(E7) * k7);
        let scale = spec.abs_tol + spec.rel_tol * y.abs().max(y_new.abs());
        let err = (err_abs / scale).abs();

        if !err.is_finite() || !y_new.is_finite() {
            rejected = true;
            h = h * lit(0.1);
            if h < h_min {
                return Err(Error::Integration {
                    t_stop: t.as_f64(),
                    reason: "right-hand side not finite inside the guard band".into(),
                });
            }
            continue;
        }

        let expo = lit(0.2 - BETA * 0.75);
        let fac11 = err.powf(expo);
        if err <= T::one() {
            let ydiff = y_new - y;
            let bspl = h * k1 - ydiff;
            let cont = [
                y,
                ydiff,
                bspl,
                ydiff - h * k7 - bspl,
                h * (lit(D1) * k1 + lit(D3) * k3 + lit(D4) * k4 + lit(D5) * k5 + lit(D6) * k6 + lit(D7) * k7),
            ];
            let seg = Segment {
                t0: t,
                h: t_new - t,
                cont,
            };

            if let Some(term) = out.push_step(&seg, t_new, y_new, spec) {
                return Ok(out.finish(term));
            }

            let fac = (fac11 / err_old.powf(lit(BETA)) / lit(SAFETY))
                .min(lit(1.0 / FAC_MIN))
                .max(lit(1.0 / FAC_MAX));
            let mut h_new = h / fac;
            if rejected {
                h_new = h_new.min(h);
            }
            err_old = err.max(lit(1e-4));
            rejected = false;

            t = t_new;
            y = y_new;
            if landing {
                if t >= t_end {
                    return Ok(out.finish(Termination::Completed));
                }
                next_bp += 1;
                // the slope may jump at a breakpoint; drop FSAL there
                k1 = f(t, y);
            } else {
                k1 = k7;
            }
            h = h_new;
        } else {
            h = h / (fac11 / lit(SAFETY)).min(lit(1.0 / FAC_MIN));
            rejected = true;
        }
    }
}

fn initial_step<T: Scalar, F: Fn(T, T) -> T>(f: &F, t0: T, y0: T, f0: T, spec: &IvpSpec<T, F>) -> T {
    let lit = T::lit;
    let sk = spec.abs_tol + spec.rel_tol * y0.abs();
    let dnf = (f0 / sk).powi(2);
    let dny = (y0 / sk).powi(2);
    let mut h = if dnf <= lit(1e-10) || dny <= lit(1e-10) {
        lit(1e-6)
    } else {
        (dny / dnf).sqrt() * lit(0.01)
    };
    h = h.min(spec.t_end);
    let f1 = f(t0 + h, y0 + h * f0);
    let der2 = ((f1 - f0) / sk).abs() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= lit(1e-15) {
        lit(1e-6).max(h * lit(1e-3))
    } else {
        (lit(0.01) / der12).powf(lit(0.2))
    };
    (h * lit(100.0)).min(h1).min(spec.t_end)
}

/// Collects the output samples and checks the guards.
struct Output<T> {
    grid_step: Option<T>,
    next_grid: usize,
    times: Vec<T>,
    values: Vec<T>,
    segments: Vec<Segment<T>>,
    t_stop: T,
    y_stop: T,
}

impl<T: Scalar> Output<T> {
    fn new(grid_step: Option<T>, y0: T) -> Self {
        Self {
            grid_step,
            next_grid: 1,
            times: vec![T::zero()],
            values: vec![y0],
            segments: Vec::new(),
            t_stop: T::zero(),
            y_stop: y0,
        }
    }

    /// Records an accepted step; returns the termination if a guard fired.
    fn push_step<F>(&mut self, seg: &Segment<T>, t_new: T, y_new: T, spec: &IvpSpec<T, F>) -> Option<Termination> {
        self.segments.push(*seg);
        let crossed = |y: T| -> Option<Termination> {
            if y >= spec.guard_hi {
                Some(Termination::EscapedUp)
            } else if y <= spec.guard_lo {
                Some(Termination::EscapedDown)
            } else {
                None
            }
        };

        // candidate samples inside (t0, t_new], in time order
        let mut samples: Vec<(T, T, bool)> = Vec::new();
        if let Some(step) = self.grid_step {
            let fuzz = T::one() + T::lit(4.0) * T::epsilon();
            let at_end = t_new >= spec.t_end;
            loop {
                let tg = step * T::from_usize_lossy(self.next_grid);
                let inside = tg <= t_new || (at_end && tg <= spec.t_end * fuzz);
                if !inside {
                    break;
                }
                let tg = tg.min(t_new);
                samples.push((tg, seg.eval(tg), true));
                self.next_grid += 1;
            }
        }
        samples.push((t_new, y_new, false));

        let mut prev_t = seg.t0;
        let mut prev_y = seg.cont[0];
        for (ts, ys, on_grid) in samples {
            if let Some(term) = crossed(ys) {
                let (tc, yc) = locate_crossing(seg, prev_t, prev_y, ts, ys, spec.guard_lo, spec.guard_hi, term);
                self.times.push(tc);
                self.values.push(yc);
                self.t_stop = tc;
                self.y_stop = yc;
                return Some(term);
            }
            if on_grid || self.grid_step.is_none() {
                self.times.push(ts);
                self.values.push(ys);
            }
            prev_t = ts;
            prev_y = ys;
        }
        self.t_stop = t_new;
        self.y_stop = y_new;
        None
    }

    fn finish(mut self, termination: Termination) -> Trajectory<T> {
        if termination == Termination::Completed && *self.times.last().unwrap() < self.t_stop {
            self.times.push(self.t_stop);
            self.values.push(self.y_stop);
        }
        Trajectory {
            times: self.times,
            values: self.values,
            termination,
            t_stop: self.t_stop,
            segments: self.segments,
            y_stop: self.y_stop,
        }
    }
}

/// First time in `(t_a, t_b]` where the interpolant leaves the band; returns a
/// point on the far side of the guard.
#[allow(clippy::too_many_arguments)]
fn locate_crossing<T: Scalar>(
    seg: &Segment<T>,
    t_a: T,
    y_a: T,
    t_b: T,
    y_b: T,
    lo: T,
    hi: T,
    term: Termination,
) -> (T, T) {
    let outside = |y: T| match term {
        Termination::EscapedUp => y >= hi,
        _ => y <= lo,
    };
    if outside(y_a) {
        return (t_a, y_a);
    }
    let (mut a, mut b, mut yb) = (t_a, t_b, y_b);
    for _ in 0..200 {
        let m = a + (b - a) * T::lit(0.5);
        if m <= a || m >= b {
            break;
        }
        let ym = seg.eval(m);
        if outside(ym) {
            b = m;
            yb = ym;
        } else {
            a = m;
        }
    }
    (b, yb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight<F: Fn(f64, f64) -> f64>(rhs: F, y0: f64, t: f64) -> IvpSpec<f64, F> {
        IvpSpec::new(rhs, y0, t).tolerances(1e-12, 1e-14)
    }

    #[test]
    fn exponential_growth() {
        let tr = integrate(&tight(|_, y| y, 1.0, 1.0)).unwrap();
        assert_eq!(tr.termination, Termination::Completed);
        let e = std::f64::consts::E;
        assert!((tr.final_value() - e).abs() / e < 1e-8);
        assert_eq!(tr.times[0], 0.0);
        assert_eq!(tr.values[0], 1.0);
    }

    #[test]
    fn exponential_decay() {
        let tr = integrate(&tight(|_, y| -y, 1.0, 5.0)).unwrap();
        let exact = (-5.0f64).exp();
        assert!((tr.final_value() - exact).abs() / exact < 1e-8);
    }

    #[test]
    fn blow_up_escapes_near_one() {
        // y = 1 / (1 - t) crosses 1e6 at t = 1 - 1e-6
        let spec = tight(|_, y| y * y, 1.0, 2.0).guards(-1.0, 1e6);
        let tr = integrate(&spec).unwrap();
        assert_eq!(tr.termination, Termination::EscapedUp);
        assert!((tr.t_stop - 1.0).abs() < 1e-3, "{}", tr.t_stop);
        assert!(*tr.values.last().unwrap() >= 1e6);
    }

    #[test]
    fn escape_down_classified() {
        let spec = tight(|_, y| -(y * y), -1.0, 2.0).guards(-1e3, 10.0);
        let tr = integrate(&spec).unwrap();
        assert_eq!(tr.termination, Termination::EscapedDown);
        assert!(tr.final_value() <= -1e3);
        // y = -1 / (1 - t) reaches -1e3 at t = 0.999
        assert!((tr.t_stop - 0.999).abs() < 1e-6);
    }

    #[test]
    fn guard_value_within_interpolation_tolerance() {
        let spec = tight(|_, y| y, 1.0, 10.0).guards(0.0, 100.0).grid(0.1);
        let tr = integrate(&spec).unwrap();
        assert_eq!(tr.termination, Termination::EscapedUp);
        let last = tr.final_value();
        assert!(last >= 100.0 && last - 100.0 < 1e-9, "{last}");
        assert!((tr.t_stop - 100f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn dense_grid_matches_solution() {
        let spec = tight(|t: f64, _y| t.cos(), 0.0, 10.0).grid(0.01);
        let tr = integrate(&spec).unwrap();
        assert_eq!(tr.times.len(), 1001);
        for (t, y) in tr.times.iter().zip(&tr.values) {
            assert!((y - t.sin()).abs() < 1e-9, "t={t}");
        }
        for i in 0..997 {
            let t = i as f64 * 0.01003;
            assert!((tr.eval(t).unwrap() - t.sin()).abs() < 1e-9);
        }
        assert!(tr.eval(10.5).is_none());
    }

    #[test]
    fn breakpoints_are_hit_exactly() {
        // kinked right-hand side: y' = |t - 1|
        let spec = tight(|t: f64, _| (t - 1.0).abs(), 0.0, 2.0).breakpoints(vec![1.0]);
        let tr = integrate(&spec).unwrap();
        assert!((tr.final_value() - 1.0).abs() < 1e-12);
        assert!((tr.eval(1.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let run = || integrate(&tight(|t: f64, y: f64| (t * y).sin() - 0.1 * y, 0.3, 20.0).grid(0.05)).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.values, b.values);
        assert_eq!(a.times, b.times);
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let e = std::f64::consts::E;
        let mut prev = f64::INFINITY;
        for tol in [1e-5, 1e-7, 1e-9, 1e-11] {
            let tr = integrate(&IvpSpec::new(|_, y| y, 1.0, 1.0).tolerances(tol, tol)).unwrap();
            let err = (tr.final_value() - e).abs();
            assert!(err < prev, "tol {tol}: {err} !< {prev}");
            prev = err;
        }
    }

    /// One fixed Dormand–Prince step, bypassing the controller.
    fn fixed_steps(n: usize, t_end: f64) -> f64 {
        let h = t_end / n as f64;
        let mut y = 1.0f64;
        for _ in 0..n {
            let f = |y: f64| y;
            let k1 = f(y);
            let k2 = f(y + h * A21 * k1);
            let k3 = f(y + h * (A31 * k1 + A32 * k2));
            let k4 = f(y + h * (A41 * k1 + A42 * k2 + A43 * k3));
            let k5 = f(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
            let k6 = f(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
            y += h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        }
        y
    }

    #[test]
    fn halving_the_step_cuts_global_error_at_least_fourfold() {
        let e = std::f64::consts::E;
        for n in [4usize, 8, 16] {
            let coarse = (fixed_steps(n, 1.0) - e).abs();
            let fine = (fixed_steps(2 * n, 1.0) - e).abs();
            assert!(coarse / fine >= 4.0, "n={n}: {coarse} / {fine}");
            // fifth order: close to 32
            assert!(coarse / fine > 20.0);
        }
    }

    #[test]
    fn stiff_step_underflow_is_reported() {
        // discontinuous right-hand side with a tiny relative tolerance
        let spec =
            IvpSpec::new(|_t: f64, y: f64| if y > 0.0 { -1e9 } else { 1e9 }, 1.0, 10.0).tolerances(1e-14, 1e-300);
        match integrate(&spec) {
            Err(Error::Integration { .. }) => {}
            other => panic!("expected integration failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(integrate(&IvpSpec::new(|_, y: f64| y, 1.0, 0.0)).is_err());
        assert!(integrate(&IvpSpec::new(|_, y: f64| y, 1.0, 1.0).guards(2.0, 3.0)).is_err());
    }

    #[test]
    fn single_precision_run() {
        let tr = integrate(&IvpSpec::new(|_, y: f32| -y, 1.0f32, 1.0).tolerances(1e-5, 1e-7)).unwrap();
        assert!((tr.final_value() - (-1.0f32).exp()).abs() < 1e-4);
    }
}
