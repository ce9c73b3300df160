//! Time evolution of the nonlinear Dirac equation on a periodic box, with modulation tracking.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{GnError, Result};
use crate::model::Model;
use crate::solitary_wave::{default_x_max, solve_profile, SolitaryWave};

const I: C64 = C64::new(0.0, 1.0);

/// Uniform periodic grid `x_j = -L/2 + j L / N`; index `j` pairs with `N - j` under `x -> -x`.
#[derive(Clone)]
pub struct Grid {
    pub l: f64,
    pub n: usize,
    pub dx: f64,
    pub x: Vec<f64>,
    pub k: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("l", &self.l).field("n", &self.n).finish()
    }
}

impl Grid {
    pub fn new(l: f64, n: usize) -> Result<Grid> {
        if n < 8 || n % 2 != 0 || !(l > 0.0) {
            return Err(GnError::InvalidParameter(format!("need even n >= 8 and L > 0, got n={n}, L={l}")));
        }
        let dx = l / n as f64;
        let x = (0..n).map(|j| -l / 2.0 + j as f64 * dx).collect();
        let k = (0..n)
            .map(|m| {
                let m = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
                2.0 * PI * m / l
            })
            .collect();
        let mut p = FftPlanner::new();
        Ok(Grid { l, n, dx, x, k, fwd: p.plan_fft_forward(n), inv: p.plan_fft_inverse(n) })
    }

    #[inline]
    pub fn mirror(&self, j: usize) -> usize {
        (self.n - j) % self.n
    }

    pub fn fft(&self, a: &mut [C64]) {
        self.fwd.process(a);
    }

    pub fn ifft(&self, a: &mut [C64]) {
        self.inv.process(a);
        let s = 1.0 / self.n as f64;
        a.iter_mut().for_each(|z| *z *= s);
    }

    /// Spectral `d/dx`.
    pub fn derivative(&self, a: &[C64]) -> Vec<C64> {
        let mut h = a.to_vec();
        self.fft(&mut h);
        for (m, z) in h.iter_mut().enumerate() {
            *z *= I * self.k[m];
            if m == self.n / 2 {
                *z = C64::new(0.0, 0.0);
            }
        }
        self.ifft(&mut h);
        h
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub psi1: Vec<C64>,
    pub psi2: Vec<C64>,
    pub t: f64,
    pub dt: f64,
    pub steps: u64,
    /// Pointwise multiplier applied after every step; `None` for a closed box.
    pub damping: Option<Vec<f64>>,
}

/// Wave profiles on the periodic grid at frequency nodes, interpolated in `omega`.
#[derive(Debug, Clone)]
pub struct WaveFamily {
    pub model: Model,
    pub nodes: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub q: Vec<f64>,
}

pub const FAMILY_SPACING: f64 = 2.5e-3;
pub const FAMILY_NODES: usize = 9;
const PROFILE_N: usize = 4096;

fn sample_wave(w: &SolitaryWave, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let mut v = Vec::with_capacity(grid.n);
    let mut u = Vec::with_capacity(grid.n);
    for &x in &grid.x {
        let (_, a, b) = w.eval(x);
        v.push(a);
        u.push(b);
    }
    (v, u)
}

impl WaveFamily {
    pub fn new(model: &Model, center: f64, grid: &Grid) -> Result<WaveFamily> {
        let h = FAMILY_SPACING.min(0.2 * center).min(0.2 * (1.0 - center));
        let nodes: Vec<f64> = (0..FAMILY_NODES).map(|i| center + h * (i as f64 - (FAMILY_NODES / 2) as f64)).collect();
        let solved: Vec<Result<(Vec<f64>, Vec<f64>, f64)>> = nodes
            .par_iter()
            .map(|&om| {
                let w = solve_profile(model, om, default_x_max(om), PROFILE_N)?;
                let (v, u) = sample_wave(&w, grid);
                Ok((v, u, w.q))
            })
            .collect();
        let mut fam = WaveFamily { model: *model, nodes, v: vec![], u: vec![], q: vec![] };
        for s in solved {
            let (v, u, q) = s?;
            fam.v.push(v);
            fam.u.push(u);
            fam.q.push(q);
        }
        Ok(fam)
    }

    pub fn contains(&self, omega: f64) -> bool {
        let h = self.nodes[1] - self.nodes[0];
        omega >= self.nodes[0] + h && omega <= self.nodes[self.nodes.len() - 1] - h
    }

    /// Lagrange weights and their first two derivatives at `omega`.
    fn weights(&self, omega: f64) -> [Vec<f64>; 3] {
        let m = self.nodes.len();
        let mut w = vec![0.0; m];
        let mut d1 = vec![0.0; m];
        let mut d2 = vec![0.0; m];
        for i in 0..m {
            let den: f64 = (0..m).filter(|&j| j != i).map(|j| self.nodes[i] - self.nodes[j]).product();
            let others: Vec<f64> = (0..m).filter(|&j| j != i).map(|j| omega - self.nodes[j]).collect();
            let r = others.len();
            let mut p = 1.0;
            for o in &others {
                p *= o;
            }
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for a in 0..r {
                let mut pa = 1.0;
                for (b, o) in others.iter().enumerate() {
                    if b != a {
                        pa *= o;
                    }
                }
                s1 += pa;
                for c in 0..r {
                    if c == a {
                        continue;
                    }
                    let mut pac = 1.0;
                    for (b, o) in others.iter().enumerate() {
                        if b != a && b != c {
                            pac *= o;
                        }
                    }
                    s2 += pac;
                }
            }
            w[i] = p / den;
            d1[i] = s1 / den;
            d2[i] = s2 / den;
        }
        [w, d1, d2]
    }

    /// `(phi, d_omega phi, d_omega^2 phi)` as `(v, u)` pairs on the grid.
    pub fn eval(&self, omega: f64) -> [(Vec<f64>, Vec<f64>); 3] {
        let ws = self.weights(omega);
        let n = self.v[0].len();
        let comb = |w: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let mut a = vec![0.0; n];
            let mut b = vec![0.0; n];
            for (i, wi) in w.iter().enumerate() {
                for j in 0..n {
                    a[j] += wi * self.v[i][j];
                    b[j] += wi * self.u[i][j];
                }
            }
            (a, b)
        };
        [comb(&ws[0]), comb(&ws[1]), comb(&ws[2])]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BumpParity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy)]
pub struct Bump {
    pub amplitude: C64,
    pub width: f64,
    pub parity: BumpParity,
}

impl Bump {
    fn at(&self, x: f64) -> C64 {
        let g = (-(x / self.width).powi(2)).exp();
        match self.parity {
            BumpParity::Even => self.amplitude * g,
            BumpParity::Odd => self.amplitude * (x / self.width) * g,
        }
    }
}

/// Perturbation `rho_0`: a bump on each component, optionally rescaled to a target `H^1` size.
#[derive(Debug, Clone, Copy)]
pub struct PerturbationSpec {
    pub psi1: Option<Bump>,
    pub psi2: Option<Bump>,
    pub h1_size: Option<f64>,
}

impl PerturbationSpec {
    pub fn none() -> Self {
        PerturbationSpec { psi1: None, psi2: None, h1_size: None }
    }

    /// Even bump on `psi1` and odd bump on `psi2`, scaled so that `||rho_0||_{H^1} = eps^2`.
    pub fn standard(eps: f64) -> Self {
        PerturbationSpec {
            psi1: Some(Bump { amplitude: C64::new(1.0, 0.5), width: 2.0, parity: BumpParity::Even }),
            psi2: Some(Bump { amplitude: C64::new(0.5, -0.3), width: 2.0, parity: BumpParity::Odd }),
            h1_size: Some(eps * eps),
        }
    }
}

pub fn h1_norm(grid: &Grid, a: &[C64], b: &[C64]) -> f64 {
    let mut s = 0.0;
    for f in [a, b] {
        let mut h = f.to_vec();
        grid.fft(&mut h);
        for (m, z) in h.iter().enumerate() {
            s += (1.0 + grid.k[m] * grid.k[m]) * z.norm_sqr();
        }
    }
    (s * grid.dx / grid.n as f64).sqrt()
}

pub fn charge(grid: &Grid, st: &EvolutionState) -> f64 {
    st.psi1.iter().zip(&st.psi2).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).sum::<f64>() * grid.dx
}

/// `int psi^* D_m psi - F(psi^* beta psi)`.
pub fn energy(grid: &Grid, model: &Model, st: &EvolutionState) -> f64 {
    let d1 = grid.derivative(&st.psi1);
    let d2 = grid.derivative(&st.psi2);
    let mut e = 0.0;
    for j in 0..grid.n {
        let (a, b) = (st.psi1[j], st.psi2[j]);
        let s = a.norm_sqr() - b.norm_sqr();
        e += s + (a.conj() * d2[j] - b.conj() * d1[j]).re - model.big_f(s);
    }
    e * grid.dx
}

/// Largest deviation from `psi1` even, `psi2` odd.
pub fn parity_error(grid: &Grid, st: &EvolutionState) -> f64 {
    let mut r: f64 = 0.0;
    for j in 0..grid.n {
        let m = grid.mirror(j);
        r = r.max((st.psi1[j] - st.psi1[m]).norm()).max((st.psi2[j] + st.psi2[m]).norm());
    }
    r
}

pub fn symmetrize(grid: &Grid, st: &mut EvolutionState) {
    let (p1, p2) = (st.psi1.clone(), st.psi2.clone());
    for j in 0..grid.n {
        let m = grid.mirror(j);
        st.psi1[j] = (p1[j] + p1[m]) * 0.5;
        st.psi2[j] = (p2[j] - p2[m]) * 0.5;
    }
}

/// `psi_0 = phi_omega0 + rho_0`; returns the state and the measured `||rho_0||_{H^1}`.
pub fn init_state(fam: &WaveFamily, omega0: f64, grid: &Grid, pert: &PerturbationSpec, dt: f64) -> Result<(EvolutionState, f64)> {
    if let Some(b) = pert.psi1 {
        if b.parity != BumpParity::Even {
            return Err(GnError::ParityViolation("psi1 perturbation must be even".into()));
        }
    }
    if let Some(b) = pert.psi2 {
        if b.parity != BumpParity::Odd {
            return Err(GnError::ParityViolation("psi2 perturbation must be odd".into()));
        }
    }
    let [(v, u), _, _] = fam.eval(omega0);
    let mut r1: Vec<C64> = grid.x.iter().map(|&x| pert.psi1.map_or(C64::new(0.0, 0.0), |b| b.at(x))).collect();
    let mut r2: Vec<C64> = grid.x.iter().map(|&x| pert.psi2.map_or(C64::new(0.0, 0.0), |b| b.at(x))).collect();
    // the box edge x = -L/2 is its own mirror, so odd data must vanish there
    r2[0] = C64::new(0.0, 0.0);
    let mut size = h1_norm(grid, &r1, &r2);
    if let Some(target) = pert.h1_size {
        if size > 0.0 {
            let s = target / size;
            r1.iter_mut().for_each(|z| *z *= s);
            r2.iter_mut().for_each(|z| *z *= s);
            size = h1_norm(grid, &r1, &r2);
        }
    }
    let psi1 = (0..grid.n).map(|j| C64::new(v[j], 0.0) + r1[j]).collect();
    let mut psi2: Vec<C64> = (0..grid.n).map(|j| C64::new(u[j], 0.0) + r2[j]).collect();
    psi2[0] = C64::new(0.0, 0.0);
    let mut st = EvolutionState { psi1, psi2, t: 0.0, dt, steps: 0, damping: None };
    symmetrize(grid, &mut st);
    Ok((st, size))
}

/// Exponential mask on the outer 10% of the box.
pub fn damping_mask(grid: &Grid, strength: f64, dt: f64) -> Vec<f64> {
    let inner = 0.4 * grid.l;
    let width = 0.1 * grid.l;
    grid.x
        .iter()
        .map(|&x| {
            let d = ((x.abs() - inner) / width).max(0.0);
            (-strength * dt * d * d).exp()
        })
        .collect()
}

fn nonlinear_substep(model: &Model, st: &mut EvolutionState, tau: f64) {
    for j in 0..st.psi1.len() {
        let s = st.psi1[j].norm_sqr() - st.psi2[j].norm_sqr();
        let ph = C64::from_polar(1.0, model.f(s) * tau);
        st.psi1[j] *= ph;
        st.psi2[j] *= ph.conj();
    }
}

/// Exact free Dirac flow `e^{-i D_m t}` per Fourier mode.
pub fn free_substep(grid: &Grid, a: &mut [C64], b: &mut [C64], t: f64) {
    grid.fft(a);
    grid.fft(b);
    for m in 0..grid.n {
        // the Nyquist mode is its own mirror, so d/dx must vanish there to keep parity
        let k = if m == grid.n / 2 { 0.0 } else { grid.k[m] };
        let e = (1.0 + k * k).sqrt();
        let (cs, sn) = ((e * t).cos(), (e * t).sin() / e);
        // D(k) = [[1, ik], [-ik, -1]]
        let (p, q) = (a[m], b[m]);
        let dp = p + I * k * q;
        let dq = -I * k * p - q;
        a[m] = p * cs - I * sn * dp;
        b[m] = q * cs - I * sn * dq;
    }
    grid.ifft(a);
    grid.ifft(b);
}

/// One Strang step: half nonlinear, full free, half nonlinear.
pub fn step(grid: &Grid, model: &Model, st: &mut EvolutionState) -> Result<()> {
    let dt = st.dt;
    nonlinear_substep(model, st, 0.5 * dt);
    free_substep(grid, &mut st.psi1, &mut st.psi2, dt);
    nonlinear_substep(model, st, 0.5 * dt);
    if let Some(mask) = &st.damping {
        for j in 0..grid.n {
            st.psi1[j] *= mask[j];
            st.psi2[j] *= mask[j];
        }
    }
    st.t += dt;
    st.steps += 1;
    if st.steps % 100 == 0 {
        symmetrize(grid, st);
        if !st.psi1.iter().chain(&st.psi2).all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(GnError::Overflow(st.t));
        }
    }
    Ok(())
}

/// Real pairing `<a, b>` of `(v, u)`-type fields.
fn dot(a: &[f64], b: &[f64], dx: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * dx
}

/// Real 4-vector field `[Re r1, Re r2, Im r1, Im r2]` split into its four components.
#[derive(Debug, Clone)]
pub struct RealField {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
}

impl RealField {
    pub fn pair(&self, o: &RealField, dx: f64) -> f64 {
        dot(&self.a1, &o.a1, dx) + dot(&self.a2, &o.a2, dx) + dot(&self.b1, &o.b1, dx) + dot(&self.b2, &o.b2, dx)
    }

    /// `J [a; b] = [b; -a]`.
    pub fn j(&self) -> RealField {
        let neg = |v: &Vec<f64>| v.iter().map(|x| -x).collect();
        RealField { a1: self.b1.clone(), a2: self.b2.clone(), b1: neg(&self.a1), b2: neg(&self.a2) }
    }

    fn real(v: &[f64], u: &[f64]) -> RealField {
        RealField { a1: v.to_vec(), a2: u.to_vec(), b1: vec![0.0; v.len()], b2: vec![0.0; v.len()] }
    }

    pub fn complex(&self) -> (Vec<C64>, Vec<C64>) {
        (
            self.a1.iter().zip(&self.b1).map(|(a, b)| C64::new(*a, *b)).collect(),
            self.a2.iter().zip(&self.b2).map(|(a, b)| C64::new(*a, *b)).collect(),
        )
    }

    pub fn scaled(&self, s: f64) -> RealField {
        let m = |v: &Vec<f64>| v.iter().map(|x| x * s).collect();
        RealField { a1: m(&self.a1), a2: m(&self.a2), b1: m(&self.b1), b2: m(&self.b2) }
    }
}

#[derive(Debug, Clone)]
pub struct Modulation {
    pub omega: f64,
    pub theta: f64,
    pub r: RealField,
    pub z: RealField,
    /// `|<phi, R>|` and `|<J d_omega phi, R>|` after convergence.
    pub orth: [f64; 2],
    pub iterations: usize,
}

/// Symplectic projection data at the reference frequency `omega0`.
#[derive(Debug, Clone)]
pub struct ReferenceProjector {
    phi: RealField,
    dphi: RealField,
    dq: f64,
}

impl ReferenceProjector {
    pub fn new(fam: &WaveFamily, omega0: f64, dx: f64) -> Result<Self> {
        let [(v, u), (dv, du), _] = fam.eval(omega0);
        let phi = RealField::real(&v, &u);
        let dphi = RealField::real(&dv, &du);
        let dq = 2.0 * phi.pair(&dphi, dx);
        if dq.abs() < 1e-6 {
            return Err(GnError::DegenerateProjector(dq));
        }
        Ok(ReferenceProjector { phi, dphi, dq })
    }

    /// `P_c = 1 - P_d` with `P_d R = (2/Q') (<phi,R> d_omega phi + <J d_omega phi, R> J phi)`.
    pub fn continuous(&self, r: &RealField, dx: f64) -> RealField {
        let a = 2.0 / self.dq * self.phi.pair(r, dx);
        let b = 2.0 / self.dq * self.dphi.j().pair(r, dx);
        let jphi = self.phi.j();
        let n = r.a1.len();
        let mut z = r.clone();
        for i in 0..n {
            z.a1[i] -= a * self.dphi.a1[i] + b * jphi.a1[i];
            z.a2[i] -= a * self.dphi.a2[i] + b * jphi.a2[i];
            z.b1[i] -= a * self.dphi.b1[i] + b * jphi.b1[i];
            z.b2[i] -= a * self.dphi.b2[i] + b * jphi.b2[i];
        }
        z
    }
}

fn residual_field(fam: &WaveFamily, st: &EvolutionState, omega: f64, theta: f64) -> (RealField, [(Vec<f64>, Vec<f64>); 3]) {
    let prof = fam.eval(omega);
    let e = C64::from_polar(1.0, theta);
    let n = st.psi1.len();
    let mut r = RealField { a1: vec![0.0; n], a2: vec![0.0; n], b1: vec![0.0; n], b2: vec![0.0; n] };
    for j in 0..n {
        let p1 = e * st.psi1[j];
        let p2 = e * st.psi2[j];
        r.a1[j] = p1.re - prof[0].0[j];
        r.a2[j] = p2.re - prof[0].1[j];
        r.b1[j] = p1.im;
        r.b2[j] = p2.im;
    }
    (r, prof)
}

/// Newton solve for `(omega, theta)` with `<phi_omega, R> = <J d_omega phi_omega, R> = 0`.
pub fn modulation_extract(
    fam: &WaveFamily,
    proj: &ReferenceProjector,
    st: &EvolutionState,
    guess: (f64, f64),
    dx: f64,
) -> Result<Modulation> {
    let (mut om, mut th) = guess;
    let mut prev = f64::INFINITY;
    for it in 0..20 {
        if !fam.contains(om) {
            return Err(GnError::LeftTube(format!("omega = {om} left the interpolation window")));
        }
        let (r, prof) = residual_field(fam, st, om, th);
        let (v, u) = (&prof[0].0, &prof[0].1);
        let (dv, du) = (&prof[1].0, &prof[1].1);
        let (ddv, ddu) = (&prof[2].0, &prof[2].1);
        // Re/Im of e^{i theta} psi
        let re1: Vec<f64> = (0..v.len()).map(|j| r.a1[j] + v[j]).collect();
        let re2: Vec<f64> = (0..v.len()).map(|j| r.a2[j] + u[j]).collect();
        let g1 = dot(v, &r.a1, dx) + dot(u, &r.a2, dx);
        let g2 = -(dot(dv, &r.b1, dx) + dot(du, &r.b2, dx));
        let scale = (dot(v, v, dx) + dot(u, u, dx)).sqrt();
        let rn = r.pair(&r, dx).sqrt();
        let g = g1.abs().max(g2.abs());
        // stop at the tight tolerance, or once Newton stalls at roundoff inside the loose one
        let stalled = g > 0.5 * prev && g <= 1e-12 * scale.max(rn);
        if g <= (1e-10 * rn).max(1e-14 * scale) || stalled {
            let z = proj.continuous(&r, dx);
            return Ok(Modulation { omega: om, theta: th, r, z, orth: [g1.abs(), g2.abs()], iterations: it });
        }
        let a11 = dot(dv, &re1, dx) + dot(du, &re2, dx) - 2.0 * (dot(v, dv, dx) + dot(u, du, dx));
        let a12 = -(dot(v, &r.b1, dx) + dot(u, &r.b2, dx));
        let a21 = -(dot(ddv, &r.b1, dx) + dot(ddu, &r.b2, dx));
        let a22 = -(dot(dv, &re1, dx) + dot(du, &re2, dx));
        let det = a11 * a22 - a12 * a21;
        if !(det.abs() > 0.0) {
            return Err(GnError::LeftTube("singular Newton matrix".into()));
        }
        prev = g;
        let d_om = (g1 * a22 - g2 * a12) / det;
        let d_th = (a11 * g2 - a21 * g1) / det;
        om -= d_om;
        th -= d_th;
        if !(om.is_finite() && th.is_finite()) {
            return Err(GnError::LeftTube("non-finite Newton iterate".into()));
        }
    }
    Err(GnError::LeftTube(format!("Newton did not converge near omega = {om}")))
}

/// `N(phi + rho) - N(phi) - W R` in real form.
pub fn nonlinear_remainder(model: &Model, v: &[f64], u: &[f64], r: &RealField) -> RealField {
    let n = v.len();
    let mut o = RealField { a1: vec![0.0; n], a2: vec![0.0; n], b1: vec![0.0; n], b2: vec![0.0; n] };
    for j in 0..n {
        let s0 = v[j] * v[j] - u[j] * u[j];
        let p1 = C64::new(v[j] + r.a1[j], r.b1[j]);
        let p2 = C64::new(u[j] + r.a2[j], r.b2[j]);
        let s = p1.norm_sqr() - p2.norm_sqr();
        let (f, f0, fp) = (model.f(s), model.f(s0), model.fprime(s0));
        let d1 = -f * p1 + f0 * v[j];
        let d2 = f * p2 - f0 * u[j];
        // W R with W1 = -f beta - 2 f' (beta phi)(beta phi)^T on Re, W0 = -f beta on Im
        let proj = v[j] * r.a1[j] - u[j] * r.a2[j];
        let w1a = -f0 * r.a1[j] - 2.0 * fp * v[j] * proj;
        let w1b = f0 * r.a2[j] + 2.0 * fp * u[j] * proj;
        o.a1[j] = d1.re - w1a;
        o.a2[j] = d2.re - w1b;
        o.b1[j] = d1.im + f0 * r.b1[j];
        o.b2[j] = d2.im - f0 * r.b2[j];
    }
    o
}

#[derive(Debug, Clone, Copy)]
pub struct ModulationRates {
    pub omega_dot: f64,
    pub gamma_dot: f64,
    pub matrix: [[f64; 2]; 2],
    pub condition: f64,
}

/// Solves `A (omega', gamma') = (<phi, J N1>, <J d_omega phi, N1>)`.
pub fn modulation_rhs(fam: &WaveFamily, omega: f64, r: &RealField, dx: f64) -> Result<ModulationRates> {
    let [(v, u), (dv, du), (ddv, ddu)] = fam.eval(omega);
    let phi = RealField::real(&v, &u);
    let dphi = RealField::real(&dv, &du);
    let ddphi = RealField::real(&ddv, &ddu);
    let jr = r.j();
    let jd = dphi.j();
    let a = [
        [phi.pair(&dphi, dx) - dphi.pair(r, dx), phi.pair(&jr, dx)],
        [-ddphi.j().pair(r, dx), jd.pair(&phi.j(), dx) + jd.pair(&jr, dx)],
    ];
    let n1 = nonlinear_remainder(&fam.model, &v, &u, r);
    let b = [phi.pair(&n1.j(), dx), jd.pair(&n1, dx)];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let fro = (a[0][0].powi(2) + a[0][1].powi(2) + a[1][0].powi(2) + a[1][1].powi(2)).sqrt();
    let cond = if det != 0.0 { fro * fro / det.abs() } else { f64::INFINITY };
    if !(cond <= 1e8) {
        return Err(GnError::ModulationDegenerate(cond));
    }
    Ok(ModulationRates {
        omega_dot: (b[0] * a[1][1] - b[1] * a[0][1]) / det,
        gamma_dot: (a[0][0] * b[1] - a[1][0] * b[0]) / det,
        matrix: a,
        condition: cond,
    })
}

#[derive(Debug, Clone)]
pub struct EvolveConfig {
    pub k: i64,
    pub omega0: f64,
    pub eps: f64,
    pub l: f64,
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub extract_every: f64,
    /// Damping strength on the outer 10% of the box; zero disables it.
    pub damping: f64,
    pub perturbation: Option<PerturbationSpec>,
}

impl EvolveConfig {
    pub fn new(k: i64, omega0: f64, eps: f64, l: f64, n: usize, dt: f64, t_end: f64) -> Self {
        EvolveConfig { k, omega0, eps, l, n, dt, t_end, extract_every: 0.5, damping: 0.0, perturbation: None }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ModulationTrack {
    pub times: Vec<f64>,
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
    pub weighted_z: Vec<f64>,
    pub h1_z: Vec<f64>,
    pub q: Vec<f64>,
    pub energy: Vec<f64>,
    pub parity_err: Vec<f64>,
    /// Largest post-extraction orthogonality residual relative to `||R||`.
    pub max_orth: f64,
    /// Times at which extraction failed (run flagged, not aborted).
    pub tube_exits: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub track: ModulationTrack,
    pub state: EvolutionState,
    pub perturbation_h1: f64,
}

fn weighted_norm(grid: &Grid, z: &RealField) -> f64 {
    let mut s = 0.0;
    for j in 0..grid.n {
        let w = (1.0 + grid.x[j] * grid.x[j]).powf(-3.0);
        s += w * w * (z.a1[j].powi(2) + z.a2[j].powi(2) + z.b1[j].powi(2) + z.b2[j].powi(2));
    }
    (s * grid.dx).sqrt()
}

pub fn evolve_run(cfg: &EvolveConfig) -> Result<RunOutput> {
    if !(cfg.omega0 > 0.0 && cfg.omega0 < 1.0) {
        return Err(GnError::InvalidParameter(format!("omega0 must lie in (0,1), got {}", cfg.omega0)));
    }
    let grid = Grid::new(cfg.l, cfg.n)?;
    if !(cfg.dt > 0.0 && cfg.dt <= 0.5 * grid.dx) {
        return Err(GnError::InvalidParameter(format!("need 0 < dt <= dx/2 = {}", 0.5 * grid.dx)));
    }
    let model = crate::model::make_power_model(cfg.k)?;
    let fam = WaveFamily::new(&model, cfg.omega0, &grid)?;
    let pert = cfg.perturbation.unwrap_or_else(|| if cfg.eps == 0.0 { PerturbationSpec::none() } else { PerturbationSpec::standard(cfg.eps) });
    let (mut st, size) = init_state(&fam, cfg.omega0, &grid, &pert, cfg.dt)?;
    if cfg.damping > 0.0 {
        st.damping = Some(damping_mask(&grid, cfg.damping, cfg.dt));
    }
    run_with(&grid, &model, fam, cfg, st, size)
}

fn run_with(grid: &Grid, model: &Model, mut fam: WaveFamily, cfg: &EvolveConfig, mut st: EvolutionState, size: f64) -> Result<RunOutput> {
    let proj = ReferenceProjector::new(&fam, cfg.omega0, grid.dx)?;
    let mut track = ModulationTrack::default();
    let every = ((cfg.extract_every / cfg.dt).round() as u64).max(1);
    let total = (cfg.t_end / cfg.dt).round() as u64;
    let mut guess = (cfg.omega0, 0.0);
    let mut int_omega = 0.0;
    let mut last: Option<(f64, f64)> = None;
    let mut record = |st: &EvolutionState, fam: &mut WaveFamily, proj: &ReferenceProjector, guess: &mut (f64, f64), track: &mut ModulationTrack| -> Result<()> {
        if !fam.contains(guess.0) && guess.0 > 0.0 && guess.0 < 1.0 {
            *fam = WaveFamily::new(model, guess.0, grid)?;
        }
        match modulation_extract(fam, proj, st, *guess, grid.dx) {
            Ok(m) => {
                if let Some((t0, w0)) = last {
                    int_omega += 0.5 * (w0 + m.omega) * (st.t - t0);
                }
                last = Some((st.t, m.omega));
                let rn = m.r.pair(&m.r, grid.dx).sqrt();
                // below this R is roundoff and the relative residual carries no information
                if rn > 1e-8 * charge(grid, st).sqrt() {
                    track.max_orth = track.max_orth.max(m.orth[0].max(m.orth[1]) / rn);
                }
                let (z1, z2) = m.z.complex();
                track.times.push(st.t);
                track.omega.push(m.omega);
                track.theta.push(m.theta);
                track.gamma.push(m.theta - int_omega);
                track.weighted_z.push(weighted_norm(grid, &m.z));
                track.h1_z.push(h1_norm(grid, &z1, &z2));
                track.q.push(charge(grid, st));
                track.energy.push(energy(grid, model, st));
                track.parity_err.push(parity_error(grid, st));
                *guess = (m.omega, m.theta + m.omega * cfg.extract_every);
            }
            Err(_) => {
                track.tube_exits.push(st.t);
                guess.1 += guess.0 * cfg.extract_every;
            }
        }
        Ok(())
    };
    record(&st, &mut fam, &proj, &mut guess, &mut track)?;
    for s in 1..=total {
        step(grid, model, &mut st)?;
        if s % every == 0 {
            record(&st, &mut fam, &proj, &mut guess, &mut track)?;
        }
    }
    Ok(RunOutput { track, state: st, perturbation_h1: size })
}

/// `(L, onset time)` rows; onset is the first time `||Z||_{H^1}` exceeds five times its `t < 10` maximum.
pub fn boundary_scaling_experiment(base: &EvolveConfig, ls: &[f64]) -> Vec<(f64, Result<f64>)> {
    ls.par_iter()
        .map(|&l| {
            let n = ((base.n as f64 * l / base.l).round() as usize / 2) * 2;
            let cfg = EvolveConfig { l, n, damping: 0.0, ..base.clone() };
            let out = evolve_run(&cfg).and_then(|o| onset_time(&o.track, base.t_end));
            (l, out)
        })
        .collect()
}

pub fn onset_time(track: &ModulationTrack, t_max: f64) -> Result<f64> {
    let base = track.times.iter().zip(&track.h1_z).filter(|(t, _)| **t < 10.0).map(|(_, z)| *z).fold(0.0, f64::max);
    for (t, z) in track.times.iter().zip(&track.h1_z) {
        if *t >= 10.0 && *z > 5.0 * base {
            return Ok(*t);
        }
    }
    // the run may leave the tube entirely once the artifact takes over
    if let Some(&t) = track.tube_exits.iter().find(|&&t| t >= 10.0) {
        return Ok(t);
    }
    Err(GnError::NoArtifact(t_max))
}

/// Wave profile on a periodic grid, for callers that do not need a family.
pub fn wave_on_grid(wave: &Arc<SolitaryWave>, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    sample_wave(wave, grid)
}
