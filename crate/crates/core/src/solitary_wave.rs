//! Standing-wave profiles `phi = (v, u)` via the first-integral reduction.

use crate::error::{GnError, Result};
use crate::model::Model;
use crate::ode::{OdeOptions, Stepper};

pub const DEFAULT_N: usize = 8192;
pub const DOMEGA: f64 = 1e-3;
const CORE: f64 = 1.0;

pub fn delta(omega: f64) -> f64 {
    (1.0 - omega * omega).sqrt()
}

pub fn default_x_max(omega: f64) -> f64 {
    40f64.max(30.0 / delta(omega))
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega < 1.0) {
        return Err(GnError::InvalidParameter(format!("omega must lie in (0,1), got {omega}")));
    }
    Ok(())
}

/// Smallest positive root of `omega*s = s - F(s)`.
pub fn turning_point(model: &Model, omega: f64) -> Result<f64> {
    check_omega(omega)?;
    let g = |s: f64| s * (1.0 - omega) - model.big_f(s);
    let s_cap = 1e6;
    let mut lo = 1e-10;
    if g(lo) <= 0.0 {
        return Err(GnError::NoTurningPoint("inequality fails near zero".into()));
    }
    let mut hi = lo * 1.01;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 1.01;
        if hi > s_cap {
            return Err(GnError::NoTurningPoint(format!("no root below {s_cap}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma = if g(hi).abs() < g(lo).abs() { hi } else { lo };
    for i in 1..200 {
        let s = gamma * i as f64 / 200.0;
        if g(s) <= 0.0 {
            return Err(GnError::NoTurningPoint(format!("interior inequality fails at s={s}")));
        }
    }
    Ok(gamma)
}

/// Level-set quantities at a given `s`: returns `(v^2, u^2)`.
#[inline]
pub fn level_set(model: &Model, omega: f64, s: f64) -> (f64, f64) {
    let fs = model.big_f(s);
    let p_minus = (s * (1.0 - omega) - fs) / omega;
    let p_plus = (s * (1.0 + omega) - fs) / omega;
    (0.5 * p_plus, 0.5 * p_minus)
}

#[derive(Debug, Clone)]
pub struct SolitaryWave {
    pub model: Model,
    pub omega: f64,
    pub gamma: f64,
    pub x_max: f64,
    pub dx: f64,
    /// `s = v^2 - u^2` and its logarithm on `x_i = i*dx`, `i < n`.
    pub s: Vec<f64>,
    pub ln_s: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub q: f64,
    pub en: f64,
    pub dqdomega: f64,
    /// Plain centered difference at `h = 1e-3`; `dqdomega` is its Richardson
    /// combination with the `h/2` difference.
    pub dqdomega_plain: f64,
}

struct Profile {
    s: Vec<f64>,
    ln_s: Vec<f64>,
    v: Vec<f64>,
    u: Vec<f64>,
}

fn profile(model: &Model, omega: f64, gamma: f64, x_max: f64, n: usize) -> Result<Profile> {
    let dx = x_max / (n - 1) as f64;
    // core: the (v, u) system itself, where u is not yet resolvable from the level set
    let i_core = ((CORE / dx).round() as usize).clamp(1, n - 1);
    let core_rhs = |_x: f64, y: &[f64; 2]| -> [f64; 2] {
        let s = y[0] * y[0] - y[1] * y[1];
        let f = model.f(s);
        [(f - 1.0 - omega) * y[1], (omega - 1.0 + f) * y[0]]
    };
    let opts = OdeOptions { atol: 1e-13, rtol: 1e-13, h_init: 1e-3, ..Default::default() };
    let mut core = Stepper::new(core_rhs, 0.0, [gamma.sqrt(), 0.0], opts);
    let mut v = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    v.push(gamma.sqrt());
    u.push(0.0);
    for i in 1..=i_core {
        core.advance_to(i as f64 * dx)?;
        v.push(core.y()[0]);
        u.push(core.y()[1]);
    }
    let rhs = |_x: f64, y: &f64| -> f64 {
        let s = y.exp();
        let fs = model.big_f(s);
        let pm = ((s * (1.0 - omega) - fs) / omega).max(0.0);
        let pp = (s * (1.0 + omega) - fs) / omega;
        -2.0 * omega * (pm * pp).sqrt() / s
    };
    let x_core = i_core as f64 * dx;
    let s_core = v[i_core] * v[i_core] - u[i_core] * u[i_core];
    let opts = OdeOptions { atol: 1e-11, rtol: 1e-11, h_init: 1e-3, ..Default::default() };
    let mut st = Stepper::new(rhs, x_core, s_core.ln(), opts);
    let mut ln_s: Vec<f64> = v.iter().zip(&u).map(|(a, b)| (a * a - b * b).ln()).collect();
    for i in i_core + 1..n {
        let x = i as f64 * dx;
        st.advance_to(x)?;
        ln_s.push(*st.y());
    }
    let s: Vec<f64> = ln_s.iter().map(|l| l.exp()).collect();
    for (i, &si) in s.iter().enumerate().skip(i_core + 1) {
        let (v2, u2) = level_set(model, omega, si);
        if v2 <= 0.0 || u2 < -1e-12 * v2 {
            return Err(GnError::LevelSetViolation { x: i as f64 * dx, detail: format!("v^2={v2:e}, u^2={u2:e}") });
        }
        v.push(v2.sqrt());
        u.push(u2.max(0.0).sqrt());
    }
    for i in 1..=i_core {
        if !(v[i] > 0.0 && u[i] >= 0.0 && u[i] < v[i]) {
            return Err(GnError::LevelSetViolation { x: i as f64 * dx, detail: "core profile left the cone".into() });
        }
    }
    Ok(Profile { s, ln_s, v, u })
}

/// Trapezoid rule over the symmetric extension of an even density sampled on `[0, x_max]`.
pub fn even_integral(g: &[f64], dx: f64) -> f64 {
    let n = g.len();
    let inner: f64 = g[1..n - 1].iter().sum();
    2.0 * dx * (0.5 * g[0] + inner + 0.5 * g[n - 1])
}

fn charge_of(p: &Profile, dx: f64) -> f64 {
    let dens: Vec<f64> = p.v.iter().zip(&p.u).map(|(v, u)| v * v + u * u).collect();
    even_integral(&dens, dx)
}

fn energy_of(model: &Model, omega: f64, p: &Profile, dx: f64, q: f64) -> f64 {
    let dens: Vec<f64> = p.s.iter().map(|&s| s * model.f(s) - model.big_f(s)).collect();
    omega * q + even_integral(&dens, dx)
}

fn charge_at(model: &Model, omega: f64, x_max: f64, n: usize) -> Result<f64> {
    let gamma = turning_point(model, omega)?;
    let p = profile(model, omega, gamma, x_max, n)?;
    Ok(charge_of(&p, x_max / (n - 1) as f64))
}

pub fn solve_wave(model: &Model, omega: f64, x_max: f64, n: usize) -> Result<SolitaryWave> {
    let mut w = solve_profile(model, omega, x_max, n)?;
    let (d1, d2) = dq_domega(model, omega, x_max, n)?;
    w.dqdomega = (4.0 * d2 - d1) / 3.0;
    w.dqdomega_plain = d1;
    Ok(w)
}

/// Profile, charge and energy without the frequency derivative.
pub fn solve_profile(model: &Model, omega: f64, x_max: f64, n: usize) -> Result<SolitaryWave> {
    check_omega(omega)?;
    if n < 16 || !(x_max > 0.0) {
        return Err(GnError::InvalidParameter(format!("need n >= 16 and x_max > 0, got n={n}, x_max={x_max}")));
    }
    let gamma = turning_point(model, omega)?;
    let p = profile(model, omega, gamma, x_max, n)?;
    let dx = x_max / (n - 1) as f64;
    let q = charge_of(&p, dx);
    let en = energy_of(model, omega, &p, dx, q);
    Ok(SolitaryWave {
        model: *model,
        omega,
        gamma,
        x_max,
        dx,
        s: p.s,
        ln_s: p.ln_s,
        v: p.v,
        u: p.u,
        q,
        en,
        dqdomega: f64::NAN,
        dqdomega_plain: f64::NAN,
    })
}

fn dq_domega(model: &Model, omega: f64, x_max: f64, n: usize) -> Result<(f64, f64)> {
    let h = DOMEGA.min(0.5 * omega).min(0.5 * (1.0 - omega));
    let d = |h: f64| -> Result<f64> {
        Ok((charge_at(model, omega + h, x_max, n)? - charge_at(model, omega - h, x_max, n)?) / (2.0 * h))
    };
    Ok((d(h)?, d(0.5 * h)?))
}

/// `(Q, En, dQ/domega)` of a constructed wave.
pub fn charge_energy(wave: &SolitaryWave) -> Result<(f64, f64, f64)> {
    let dq = if wave.dqdomega.is_finite() {
        wave.dqdomega
    } else {
        let (d1, d2) = dq_domega(&wave.model, wave.omega, wave.x_max, wave.n())?;
        (4.0 * d2 - d1) / 3.0
    };
    Ok((wave.q, wave.en, dq))
}

/// Measured exponential decay rate of `v` on the tail window `[x_max/2, x_max]`.
pub fn decay_check(wave: &SolitaryWave) -> Result<f64> {
    let n = wave.n();
    let i0 = n / 2;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let m = (n - i0) as f64;
    for i in i0..n {
        let v = wave.v[i];
        if !(v > 1e-280) {
            return Err(GnError::TailUnderflow);
        }
        let x = wave.x(i);
        let y = v.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    Ok(-slope)
}

impl SolitaryWave {
    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    pub fn delta(&self) -> f64 {
        delta(self.omega)
    }

    /// First integral `H(v,u)` at each grid point.
    pub fn first_integral(&self) -> Vec<f64> {
        self.v
            .iter()
            .zip(&self.u)
            .map(|(&v, &u)| {
                let s = v * v - u * u;
                0.5 * (self.model.big_f(s) - s) + 0.5 * self.omega * (v * v + u * u)
            })
            .collect()
    }

    /// Symmetric grid `[-x_max, x_max]` with `2n-1` points and the extended profile.
    pub fn full_grid(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mut x = Vec::with_capacity(2 * n - 1);
        let mut v = Vec::with_capacity(2 * n - 1);
        let mut u = Vec::with_capacity(2 * n - 1);
        for i in (1..n).rev() {
            x.push(-self.x(i));
            v.push(self.v[i]);
            u.push(-self.u[i]);
        }
        for i in 0..n {
            x.push(self.x(i));
            v.push(self.v[i]);
            u.push(self.u[i]);
        }
        (x, v, u)
    }

    fn node(&self, i: i64) -> (f64, f64) {
        let n = self.n() as i64;
        let j = i.abs();
        let sg = if i < 0 { -1.0 } else { 1.0 };
        if j < n {
            (self.v[j as usize], sg * self.u[j as usize])
        } else {
            let e = (-self.delta() * (j - n + 1) as f64 * self.dx).exp();
            (self.v[(n - 1) as usize] * e, sg * self.u[(n - 1) as usize] * e)
        }
    }

    /// `(s, v, u)` at an arbitrary point: 8-point Lagrange interpolation of the
    /// extended profile, exponential tail beyond `x_max`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let n = self.n();
        let ax = x.abs();
        let (v, u) = if ax >= self.x_max {
            let e = (-self.delta() * (ax - self.x_max)).exp();
            (self.v[n - 1] * e, x.signum() * self.u[n - 1] * e)
        } else {
            let t = x / self.dx;
            let i = t.floor() as i64;
            let frac = t - i as f64;
            if frac == 0.0 {
                self.node(i)
            } else {
                const W: [f64; 8] = [-1.0, 7.0, -21.0, 35.0, -35.0, 21.0, -7.0, 1.0];
                let (mut nv, mut nu, mut den) = (0.0, 0.0, 0.0);
                for (j, w) in W.iter().enumerate() {
                    let off = j as i64 - 3;
                    let c = w / (frac - off as f64);
                    let (a, b) = self.node(i + off);
                    nv += c * a;
                    nu += c * b;
                    den += c;
                }
                (nv / den, nu / den)
            }
        };
        (v * v - u * u, v, u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_power_model;

    #[test]
    fn turning_points() {
        let m2 = make_power_model(2).unwrap();
        let m1 = make_power_model(1).unwrap();
        assert!((turning_point(&m2, 0.3).unwrap() - 2.1f64.sqrt()).abs() < 1e-13);
        assert!((turning_point(&m1, 0.5).unwrap() - 1.0).abs() < 1e-13);
        assert!((turning_point(&m2, 0.999).unwrap() - 0.003f64.sqrt()).abs() < 1e-13);
        assert!(turning_point(&m2, 1.2).is_err());
        assert!(turning_point(&m2, 0.0).is_err());
    }

    #[test]
    fn wave_basic() {
        let m = make_power_model(2).unwrap();
        let w = solve_wave(&m, 0.3, default_x_max(0.3), 4096).unwrap();
        assert!((w.v[0] - 1.203802).abs() < 1e-6);
        assert_eq!(w.u[0], 0.0);
        assert!(w.v[w.n() - 1] < 1e-9 && w.u[w.n() - 1] < 1e-9);
        let vmax = w.v.iter().cloned().fold(0.0, f64::max);
        let hmax = w.first_integral().iter().map(|h| h.abs()).fold(0.0, f64::max);
        assert!(hmax <= 1e-8 * vmax * vmax);
        for i in 0..w.n() {
            assert!(w.v[i] > 0.0 && w.u[i].abs() < w.v[i]);
        }
        let rate = decay_check(&w).unwrap();
        assert!((rate - 0.91f64.sqrt()).abs() < 0.02 * 0.91f64.sqrt());
    }

    #[test]
    fn interpolation_reproduces_nodes_and_midpoints() {
        let m = make_power_model(2).unwrap();
        let w = solve_profile(&m, 0.3, 40.0, 8001).unwrap();
        let coarse = solve_profile(&m, 0.3, 40.0, 4001).unwrap();
        for i in (0..3999).step_by(37) {
            let x = (2 * i + 1) as f64 * w.dx;
            let (s, v, u) = coarse.eval(x);
            let j = 2 * i + 1;
            assert!((s - w.s[j]).abs() <= 1e-9 * w.s[j], "x={x}");
            assert!((v - w.v[j]).abs() <= 1e-9 * w.v[j] && (u - w.u[j]).abs() <= 1e-9 * w.v[j], "x={x}");
        }
        let (s, v, u) = w.eval(-w.x(100));
        assert!((s - w.s[100]).abs() < 1e-15);
        assert!((v - w.v[100]).abs() < 1e-14 && (u + w.u[100]).abs() < 1e-14);
    }
}
