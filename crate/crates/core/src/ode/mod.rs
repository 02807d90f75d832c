//! Embedded Runge-Kutta steppers. [`Dopri5`] is the Dormand–Prince 5(4)
//! pair with a continuous 4th order extension on each accepted step;
//! [`Dop853`] is the 8th order pair, used where long runs need tight
//! conservation.
//!
//! Steppers only advance forward in time. Backward integration is done by
//! wrapping a system in [`TimeReversed`].

mod dop853;

pub use dop853::Dop853;

use crate::error::{Error, Result};

/// First-order system `dy/dt = f(t, y)` on a flat real state vector.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    /// Writes `f(t, y)` into `dydt`. Returns [`Error::Domain`] when `y` lies
    /// outside the region where the right-hand side is defined.
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()>;
}

/// `dy/ds = -f(-s, y)`: integrating forward in `s` runs the wrapped system
/// backward in `t`.
pub struct TimeReversed<'a, S>(pub &'a S);

impl<S: OdeSystem> OdeSystem for TimeReversed<'_, S> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn rhs(&self, s: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        self.0.rhs(-s, y, dydt)?;
        dydt.iter_mut().for_each(|d| *d = -*d);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerances {
    pub fn new(rel: f64, abs: f64) -> Self {
        Self { rel, abs }
    }

    pub fn halved(self) -> Self {
        Self::new(self.rel / 2.0, self.abs / 2.0)
    }

    pub fn check(self) -> Result<Self> {
        if self.rel > 0.0 && self.abs > 0.0 && self.rel.is_finite() && self.abs.is_finite() {
            Ok(self)
        } else {
            Err(Error::InvalidParameter(format!(
                "tolerances must be positive, got rel={} abs={}",
                self.rel, self.abs
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

// Butcher tableau.
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th minus 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const PI_BETA: f64 = 0.04;

/// Interpolation data for the last accepted step.
#[derive(Debug, Clone)]
struct DenseSegment {
    t0: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

pub struct Dopri5<'a, S: OdeSystem + ?Sized> {
    sys: &'a S,
    tol: Tolerances,
    max_steps: usize,
    h_max: f64,
    t: f64,
    y: Vec<f64>,
    h: f64,
    fac_old: f64,
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
    dense: Option<DenseSegment>,
    stats: StepStats,
}

impl<'a, S: OdeSystem + ?Sized> Dopri5<'a, S> {
    pub fn new(sys: &'a S, t0: f64, y0: &[f64], tol: Tolerances) -> Result<Self> {
        let tol = tol.check()?;
        let n = sys.dim();
        if y0.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: y0.len(),
            });
        }
        let zeros = || vec![0.0; n];
        let mut stepper = Self {
            sys,
            tol,
            max_steps: 50_000_000,
            h_max: f64::INFINITY,
            t: t0,
            y: y0.to_vec(),
            h: 0.0,
            fac_old: 1e-4,
            k: [
                zeros(),
                zeros(),
                zeros(),
                zeros(),
                zeros(),
                zeros(),
                zeros(),
            ],
            y_stage: zeros(),
            y_new: zeros(),
            dense: None,
            stats: StepStats::default(),
        };
        stepper.eval_first()?;
        stepper.h = stepper.initial_step()?;
        Ok(stepper)
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_max_step(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self.h = self.h.min(h_max);
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Derivative at the current point.
    pub fn dydt(&self) -> &[f64] {
        &self.k[0]
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    /// Interval covered by the last accepted step, if any.
    pub fn last_step(&self) -> Option<(f64, f64)> {
        self.dense.as_ref().map(|d| (d.t0, d.t0 + d.h))
    }

    /// Replaces the current state, keeping the step-size estimate.
    pub fn reset(&mut self, t: f64, y: &[f64]) -> Result<()> {
        if y.len() != self.y.len() {
            return Err(Error::Dimension {
                expected: self.y.len(),
                got: y.len(),
            });
        }
        self.t = t;
        self.y.copy_from_slice(y);
        self.dense = None;
        self.eval_first()
    }

    fn eval_first(&mut self) -> Result<()> {
        self.stats.evaluations += 1;
        let t = self.t;
        self.sys
            .rhs(t, &self.y, &mut self.k[0])
            .map_err(|e| singular(t, e))
    }

    fn initial_step(&mut self) -> Result<f64> {
        let n = self.y.len() as f64;
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for (y, f) in self.y.iter().zip(&self.k[0]) {
            let sk = self.tol.abs + self.tol.rel * y.abs();
            dnf += (f / sk).powi(2);
            dny += (y / sk).powi(2);
        }
        dnf /= n;
        dny /= n;
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            0.01 * (dny / dnf).sqrt()
        };
        h = h.min(self.h_max);
        for i in 0..self.y.len() {
            self.y_stage[i] = self.y[i] + h * self.k[0][i];
        }
        self.stats.evaluations += 1;
        let t1 = self.t + h;
        self.sys
            .rhs(t1, &self.y_stage, &mut self.k[1])
            .map_err(|e| singular(t1, e))?;
        let mut der2 = 0.0;
        for i in 0..self.y.len() {
            let sk = self.tol.abs + self.tol.rel * self.y[i].abs();
            der2 += ((self.k[1][i] - self.k[0][i]) / sk).powi(2);
        }
        let der2 = (der2 / n).sqrt() / h;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(0.2)
        };
        Ok((100.0 * h).min(h1).min(self.h_max))
    }

    /// Evaluates all stages for a trial step of size `h`. On success `y_new`
    /// holds the 5th order solution, `k[6]` its derivative, and the return
    /// value is the scaled error norm.
    fn attempt(&mut self, h: f64) -> Result<f64> {
        let n = self.y.len();
        let t = self.t;
        let (y, ys) = (&self.y, &mut self.y_stage);
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;

        for i in 0..n {
            ys[i] = y[i] + h * A21 * k1[i];
        }
        self.sys.rhs(t + C2 * h, ys, k2)?;
        for i in 0..n {
            ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        self.sys.rhs(t + C3 * h, ys, k3)?;
        for i in 0..n {
            ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        self.sys.rhs(t + C4 * h, ys, k4)?;
        for i in 0..n {
            ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        self.sys.rhs(t + C5 * h, ys, k5)?;
        for i in 0..n {
            ys[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        self.sys.rhs(t + h, ys, k6)?;
        let yn = &mut self.y_new;
        for i in 0..n {
            yn[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        self.sys.rhs(t + h, yn, k7)?;
        self.stats.evaluations += 6;

        let mut err = 0.0;
        for i in 0..n {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = self.tol.abs + self.tol.rel * y[i].abs().max(yn[i].abs());
            err += (e / sk).powi(2);
        }
        Ok((err / n as f64).sqrt())
    }

    /// Takes one accepted step, never going past `t_limit`. Landing on
    /// `t_limit` is exact.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        if t_limit <= self.t {
            return Err(Error::Domain(format!(
                "step limit {t_limit} is not ahead of current time {}",
                self.t
            )));
        }
        let mut h = self.h.min(self.h_max);
        let mut last_reason: Option<Error> = None;
        loop {
            if self.stats.accepted + self.stats.rejected >= self.max_steps {
                return Err(Error::TooManySteps {
                    tau: self.t,
                    max_steps: self.max_steps,
                });
            }
            let remaining = t_limit - self.t;
            let lands = h >= remaining * (1.0 - 1e-12);
            if lands {
                h = remaining;
            }
            if h.abs() < 1e-14 * self.t.abs().max(1.0) && !lands {
                return Err(match last_reason {
                    Some(e) => singular(self.t, e),
                    None => Error::StepUnderflow { tau: self.t, h },
                });
            }

            let err = match self.attempt(h) {
                Ok(err) if err.is_finite() => err,
                Ok(_) => {
                    self.stats.rejected += 1;
                    h *= 0.25;
                    continue;
                }
                Err(e @ Error::Domain(_)) => {
                    last_reason = Some(e);
                    self.stats.rejected += 1;
                    h *= 0.25;
                    continue;
                }
                Err(e) => return Err(e),
            };

            let fac11 = err.powf(0.2 - 0.75 * PI_BETA);
            if err <= 1.0 {
                let fac = (fac11 / self.fac_old.powf(PI_BETA) / SAFETY)
                    .clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                self.fac_old = err.max(1e-4);
                self.accept(h, lands, t_limit);
                let h_new = (h / fac).min(self.h_max);
                // A step truncated to hit the limit should not shrink the estimate.
                self.h = if lands { h_new.max(self.h) } else { h_new };
                if last_reason.is_some() {
                    self.h = self.h.min(h);
                }
                return Ok(());
            }
            self.stats.rejected += 1;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_reason = None;
        }
    }

    fn accept(&mut self, h: f64, lands: bool, t_limit: f64) {
        let n = self.y.len();
        let mut r: [Vec<f64>; 5] = match self.dense.take() {
            Some(d) => d.r,
            None => [
                vec![0.0; n],
                vec![0.0; n],
                vec![0.0; n],
                vec![0.0; n],
                vec![0.0; n],
            ],
        };
        let k = &self.k;
        for i in 0..n {
            let ydiff = self.y_new[i] - self.y[i];
            let bspl = h * k[0][i] - ydiff;
            r[0][i] = self.y[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * k[6][i] - bspl;
            r[4][i] = h
                * (D1 * k[0][i]
                    + D3 * k[2][i]
                    + D4 * k[3][i]
                    + D5 * k[4][i]
                    + D6 * k[5][i]
                    + D7 * k[6][i]);
        }
        self.dense = Some(DenseSegment { t0: self.t, h, r });
        self.t = if lands { t_limit } else { self.t + h };
        std::mem::swap(&mut self.y, &mut self.y_new);
        self.k.swap(0, 6);
        self.stats.accepted += 1;
    }

    /// Advances exactly to `t_target` (no-op if already there).
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        while self.t < t_target {
            self.step(t_target)?;
        }
        Ok(())
    }

    /// Evaluates the continuous extension of the last accepted step.
    pub fn dense_eval(&self, t: f64, out: &mut [f64]) {
        let d = self
            .dense
            .as_ref()
            .expect("dense output requested before any accepted step");
        let s = (t - d.t0) / d.h;
        let s1 = 1.0 - s;
        for (i, o) in out.iter_mut().enumerate() {
            *o = d.r[0][i] + s * (d.r[1][i] + s1 * (d.r[2][i] + s * (d.r[3][i] + s1 * d.r[4][i])));
        }
    }

    /// Single component of the continuous extension.
    pub fn dense_component(&self, t: f64, i: usize) -> f64 {
        let d = self
            .dense
            .as_ref()
            .expect("dense output requested before any accepted step");
        let s = (t - d.t0) / d.h;
        let s1 = 1.0 - s;
        d.r[0][i] + s * (d.r[1][i] + s1 * (d.r[2][i] + s * (d.r[3][i] + s1 * d.r[4][i])))
    }
}

fn singular(tau: f64, e: Error) -> Error {
    match e {
        Error::Domain(reason) => Error::Singularity { tau, reason },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;

    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], d: &mut [f64]) -> Result<()> {
            d[0] = y[1];
            d[1] = -y[0];
            Ok(())
        }
    }

    struct Decay;

    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, t: f64, y: &[f64], d: &mut [f64]) -> Result<()> {
            d[0] = -2.0 * t * y[0];
            Ok(())
        }
    }

    struct Blowup;

    impl OdeSystem for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], d: &mut [f64]) -> Result<()> {
            if y[0] > 1e6 {
                return Err(Error::Domain("y out of range".into()));
            }
            d[0] = y[0] * y[0];
            Ok(())
        }
    }

    #[test]
    fn harmonic_oscillator_matches_closed_form() {
        let mut s =
            Dopri5::new(&Oscillator, 0.0, &[1.0, 0.0], Tolerances::new(1e-10, 1e-12)).unwrap();
        s.advance_to(20.0).unwrap();
        assert_eq!(s.t(), 20.0);
        assert!((s.y()[0] - 20f64.cos()).abs() < 1e-8);
        assert!((s.y()[1] + 20f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn time_dependent_rhs() {
        let mut s = Dopri5::new(&Decay, 0.0, &[1.0], Tolerances::new(1e-11, 1e-13)).unwrap();
        s.advance_to(2.0).unwrap();
        assert!((s.y()[0] - (-4.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn dense_output_interpolates_inside_step() {
        let mut s =
            Dopri5::new(&Oscillator, 0.0, &[1.0, 0.0], Tolerances::new(1e-9, 1e-12)).unwrap();
        let mut out = [0.0; 2];
        for _ in 0..50 {
            s.step(100.0).unwrap();
            let (a, b) = s.last_step().unwrap();
            for j in 0..=4 {
                let t = a + (b - a) * j as f64 / 4.0;
                s.dense_eval(t, &mut out);
                assert!((out[0] - t.cos()).abs() < 1e-7, "t={t}");
            }
        }
    }

    #[test]
    fn tighter_tolerance_is_more_accurate() {
        let run = |rel: f64| {
            let mut s = Dopri5::new(
                &Oscillator,
                0.0,
                &[1.0, 0.0],
                Tolerances::new(rel, rel * 1e-2),
            )
            .unwrap();
            s.advance_to(50.0).unwrap();
            (s.y()[0] - 50f64.cos()).abs()
        };
        assert!(run(1e-10) < run(1e-6));
    }

    #[test]
    fn time_reversal_returns_to_start() {
        let tol = Tolerances::new(1e-11, 1e-13);
        let mut fwd = Dopri5::new(&Decay, 0.0, &[1.0], tol).unwrap();
        fwd.advance_to(1.5).unwrap();
        let y1 = fwd.y().to_vec();
        let rev = TimeReversed(&Decay);
        let mut back = Dopri5::new(&rev, -1.5, &y1, tol).unwrap();
        back.advance_to(0.0).unwrap();
        assert!((back.y()[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn domain_error_becomes_singularity() {
        // y' = y², y(0) = 1 blows up at t = 1.
        let mut s = Dopri5::new(&Blowup, 0.0, &[1.0], Tolerances::new(1e-8, 1e-10)).unwrap();
        let err = s.advance_to(2.0).unwrap_err();
        match err {
            Error::Singularity { tau, .. } => assert!(tau < 1.0 && tau > 0.99, "tau={tau}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_tolerances_and_dimensions() {
        assert!(Dopri5::new(&Oscillator, 0.0, &[1.0, 0.0], Tolerances::new(0.0, 1e-9)).is_err());
        assert!(Dopri5::new(&Oscillator, 0.0, &[1.0], Tolerances::new(1e-6, 1e-9)).is_err());
    }
}
