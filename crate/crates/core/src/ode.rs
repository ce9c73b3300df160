//! Adaptive Dormand-Prince 5(4) integrator with dense stopping points.

use num_complex::Complex64 as C64;

use crate::error::{GnError, Result};

pub trait OdeState: Clone {
    fn axpy(&mut self, a: f64, x: &Self);
    /// RMS of componentwise `err / (atol + rtol * max(|y0|, |y1|))`.
    fn err_norm(err: &Self, y0: &Self, y1: &Self, atol: f64, rtol: f64) -> f64;
    fn is_finite(&self) -> bool;
    fn scale(&mut self, a: f64);
}

impl OdeState for f64 {
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
    fn err_norm(err: &Self, y0: &Self, y1: &Self, atol: f64, rtol: f64) -> f64 {
        err.abs() / (atol + rtol * y0.abs().max(y1.abs()))
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn scale(&mut self, a: f64) {
        *self *= a;
    }
}

impl<const N: usize> OdeState for [f64; N] {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += v * a;
        }
    }
    fn err_norm(err: &Self, y0: &Self, y1: &Self, atol: f64, rtol: f64) -> f64 {
        let s: f64 = (0..N).map(|i| (err[i] / (atol + rtol * y0[i].abs().max(y1[i].abs()))).powi(2)).sum();
        (s / N as f64).sqrt()
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|z| z.is_finite())
    }
    fn scale(&mut self, a: f64) {
        for z in self.iter_mut() {
            *z *= a;
        }
    }
}

impl<const N: usize> OdeState for [C64; N] {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += v * a;
        }
    }
    fn err_norm(err: &Self, y0: &Self, y1: &Self, atol: f64, rtol: f64) -> f64 {
        // shared scale: components of a Jost vector may pass through zero
        let ymax = y0.iter().chain(y1).map(|z| z.norm()).fold(0.0, f64::max);
        let tol = atol + rtol * ymax;
        let s: f64 = err.iter().map(|e| e.norm_sqr()).sum();
        (s / N as f64).sqrt() / tol
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
    fn scale(&mut self, a: f64) {
        for z in self.iter_mut() {
            *z *= a;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { atol: 1e-11, rtol: 1e-11, h_init: 1e-3, h_max: f64::INFINITY, max_steps: 5_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Stateful integrator that can be advanced to successive stopping points.
pub struct Stepper<S: OdeState, F: FnMut(f64, &S) -> S> {
    rhs: F,
    x: f64,
    y: S,
    k1: S,
    h: f64,
    opts: OdeOptions,
    pub stats: OdeStats,
}

impl<S: OdeState, F: FnMut(f64, &S) -> S> Stepper<S, F> {
    pub fn new(mut rhs: F, x0: f64, y0: S, opts: OdeOptions) -> Self {
        let k1 = rhs(x0, &y0);
        Stepper { rhs, x: x0, y: y0, k1, h: opts.h_init, opts, stats: OdeStats { rhs_evals: 1, ..Default::default() } }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> &S {
        &self.y
    }

    /// Replace the state, e.g. after renormalizing a linear problem.
    pub fn set_y(&mut self, y: S) {
        self.k1 = (self.rhs)(self.x, &y);
        self.stats.rhs_evals += 1;
        self.y = y;
    }

    pub fn scale_y(&mut self, a: f64) {
        self.y.scale(a);
        self.k1.scale(a);
    }

    pub fn advance_to(&mut self, xt: f64) -> Result<()> {
        let dir = if xt >= self.x { 1.0 } else { -1.0 };
        let mut guard = 0usize;
        while (xt - self.x) * dir > 0.0 {
            guard += 1;
            if self.stats.accepted + self.stats.rejected > self.opts.max_steps || guard > self.opts.max_steps {
                return Err(GnError::IntegrationFailure(format!("step budget exhausted at x={}", self.x)));
            }
            let remaining = (xt - self.x).abs();
            let mut h = self.h.abs().min(self.opts.h_max).min(remaining);
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            let hmin = 1e-14 * self.x.abs().max(1.0);
            if h < hmin && !last {
                return Err(GnError::IntegrationFailure(format!("step size underflow at x={}", self.x)));
            }
            let hs = h * dir;
            let (y_new, k7, err) = self.trial(hs);
            if !err.is_finite() || !y_new.is_finite() {
                self.h = h * 0.2;
                self.stats.rejected += 1;
                if h < hmin {
                    return Err(GnError::IntegrationFailure(format!("non-finite state at x={}", self.x)));
                }
                continue;
            }
            if err <= 1.0 {
                self.x = if last { xt } else { self.x + hs };
                self.y = y_new;
                self.k1 = k7;
                self.stats.accepted += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // do not let a short final step shrink the step for the next segment
                if !last || fac * h > self.h.abs() {
                    self.h = h * fac;
                }
            } else {
                self.stats.rejected += 1;
                self.h = h * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        Ok(())
    }

    fn trial(&mut self, h: f64) -> (S, S, f64) {
        let x = self.x;
        let y = &self.y;
        let k1 = &self.k1;
        let mut t = y.clone();
        t.axpy(h * A21, k1);
        let k2 = (self.rhs)(x + C2 * h, &t);
        let mut t = y.clone();
        t.axpy(h * A31, k1);
        t.axpy(h * A32, &k2);
        let k3 = (self.rhs)(x + C3 * h, &t);
        let mut t = y.clone();
        t.axpy(h * A41, k1);
        t.axpy(h * A42, &k2);
        t.axpy(h * A43, &k3);
        let k4 = (self.rhs)(x + C4 * h, &t);
        let mut t = y.clone();
        t.axpy(h * A51, k1);
        t.axpy(h * A52, &k2);
        t.axpy(h * A53, &k3);
        t.axpy(h * A54, &k4);
        let k5 = (self.rhs)(x + C5 * h, &t);
        let mut t = y.clone();
        t.axpy(h * A61, k1);
        t.axpy(h * A62, &k2);
        t.axpy(h * A63, &k3);
        t.axpy(h * A64, &k4);
        t.axpy(h * A65, &k5);
        let k6 = (self.rhs)(x + h, &t);
        let mut yn = y.clone();
        yn.axpy(h * B1, k1);
        yn.axpy(h * B3, &k3);
        yn.axpy(h * B4, &k4);
        yn.axpy(h * B5, &k5);
        yn.axpy(h * B6, &k6);
        let k7 = (self.rhs)(x + h, &yn);
        self.stats.rhs_evals += 6;
        let mut e = k1.clone();
        e.scale(h * E1);
        e.axpy(h * E3, &k3);
        e.axpy(h * E4, &k4);
        e.axpy(h * E5, &k5);
        e.axpy(h * E6, &k6);
        e.axpy(h * E7, &k7);
        let err = S::err_norm(&e, y, &yn, self.opts.atol, self.opts.rtol);
        (yn, k7, err)
    }
}

/// Integrate from `x0` to `x1` and return the final state.
pub fn integrate<S: OdeState, F: FnMut(f64, &S) -> S>(rhs: F, x0: f64, y0: S, x1: f64, opts: OdeOptions) -> Result<S> {
    let mut st = Stepper::new(rhs, x0, y0, opts);
    st.advance_to(x1)?;
    Ok(st.y)
}
