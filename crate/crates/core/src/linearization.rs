//! Linearized operator `JL(omega)`, its potentials, free asymptotics and projectors.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64 as C64;

use crate::error::{GnError, Result};
use crate::model::Model;
use crate::solitary_wave::{solve_profile, SolitaryWave, DOMEGA};

pub type Vec4 = [C64; 4];
pub type Field4 = Vec<Vec4>;

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);

#[inline]
fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Sampled `W = diag(W1, W0)` plus continuous evaluation through the wave interpolant.
#[derive(Debug, Clone)]
pub struct Potentials {
    pub wave: Arc<SolitaryWave>,
    /// Multiplier on `W`; zero gives the free problem.
    pub scale: f64,
    /// Additive non-decaying corruption, used for fault injection only.
    pub fault: f64,
    pub x: Vec<f64>,
    pub w0: Vec<Matrix2<f64>>,
    pub w1: Vec<Matrix2<f64>>,
}

#[inline]
fn w_blocks(model: &Model, s: f64, v: f64, u: f64) -> (Matrix2<f64>, Matrix2<f64>) {
    let f = model.f(s);
    let fp2 = 2.0 * model.fprime(s);
    let w0 = Matrix2::new(-f, 0.0, 0.0, f);
    let w1 = w0 - Matrix2::new(v * v, -v * u, -v * u, u * u) * fp2;
    (w1, w0)
}

pub fn potentials(wave: &Arc<SolitaryWave>) -> Potentials {
    Potentials::scaled(wave, 1.0, 0.0)
}

impl Potentials {
    pub fn scaled(wave: &Arc<SolitaryWave>, scale: f64, fault: f64) -> Potentials {
        let (x, v, u) = wave.full_grid();
        let mut w0 = Vec::with_capacity(x.len());
        let mut w1 = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let s = v[i] * v[i] - u[i] * u[i];
            let (a, b) = w_blocks(&wave.model, s, v[i], u[i]);
            let fl = Matrix2::identity() * fault;
            w1.push(a * scale + fl);
            w0.push(b * scale + fl);
        }
        Potentials { wave: wave.clone(), scale, fault, x, w0, w1 }
    }

    pub fn omega(&self) -> f64 {
        self.wave.omega
    }

    pub fn x_max(&self) -> f64 {
        self.wave.x_max
    }

    pub fn dx(&self) -> f64 {
        self.wave.dx
    }

    /// `(W1, W0)` at an arbitrary point.
    #[inline]
    pub fn at(&self, x: f64) -> (Matrix2<f64>, Matrix2<f64>) {
        let fl = Matrix2::identity() * self.fault;
        if self.scale == 0.0 {
            return (fl, fl);
        }
        let (s, v, u) = self.wave.eval(x);
        let (a, b) = w_blocks(&self.wave.model, s, v, u);
        (a * self.scale + fl, b * self.scale + fl)
    }

    pub fn norm_at_index(&self, i: usize) -> f64 {
        self.w0[i].norm().max(self.w1[i].norm())
    }

    /// Smallest grid abscissa beyond which `|W| < 1e-16`.
    pub fn negligible_from(&self) -> f64 {
        let n = self.x.len();
        for i in (0..n).rev() {
            if self.norm_at_index(i) >= 1e-16 {
                return if i + 1 < n { self.x[i + 1] } else { self.x[n - 1] };
            }
        }
        0.0
    }

    /// Parity residual `max |W(x) beta - beta W(-x)|` over the grid.
    pub fn parity_residual(&self) -> f64 {
        let n = self.x.len();
        let b = Matrix2::new(1.0, 0.0, 0.0, -1.0);
        let mut r: f64 = 0.0;
        for i in 0..n {
            let j = n - 1 - i;
            r = r.max((self.w0[i] * b - b * self.w0[j]).norm());
            r = r.max((self.w1[i] * b - b * self.w1[j]).norm());
        }
        r
    }

    /// Least-squares exponent `a` in `|W(x)| ~ C exp(-a x)` over the window where `1e-200 < |W| < 1e-4`.
    pub fn decay_exponent(&self) -> Option<f64> {
        let n = self.x.len();
        let mut pts = Vec::new();
        for i in n / 2..n {
            let w = self.norm_at_index(i);
            if w > 1e-200 && w < 1e-4 {
                pts.push((self.x[i], w.ln()));
            }
        }
        if pts.len() < 10 {
            return None;
        }
        Some(-fit_slope(&pts))
    }
}

pub fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in pts {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}

/// `M(x, lambda, omega) = M0 + alpha J W` from the blocks of `W`.
#[inline]
pub fn coefficient_matrix_from(w1: &Matrix2<f64>, w0: &Matrix2<f64>, lambda: C64, omega: f64) -> Matrix4<C64> {
    // alpha J = diag(K, K) with K = [[0,1],[-1,0]]; M0 = diag(B, B) - lambda alpha
    let b12 = c(-1.0 - omega);
    let b21 = c(omega - 1.0);
    let l = lambda;
    #[rustfmt::skip]
    let m = Matrix4::new(
        c(w1[(1, 0)]), b12 + w1[(1, 1)], ZERO, l,
        b21 - w1[(0, 0)], c(-w1[(0, 1)]), -l, ZERO,
        ZERO, -l, c(w0[(1, 0)]), b12 + w0[(1, 1)],
        l, ZERO, b21 - w0[(0, 0)], c(-w0[(0, 1)]),
    );
    m
}

pub fn coefficient_matrix(x: f64, lambda: C64, omega: f64, pot: &Potentials) -> Matrix4<C64> {
    let (w1, w0) = pot.at(x);
    coefficient_matrix_from(&w1, &w0, lambda, omega)
}

pub fn free_matrix(lambda: C64, omega: f64) -> Matrix4<C64> {
    coefficient_matrix_from(&Matrix2::zeros(), &Matrix2::zeros(), lambda, omega)
}

/// Which one-sided limit to take on the cut `lambda in iR` (essential spectrum).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Limit from `Re lambda < 0`.
    Minus,
    /// Limit from `Re lambda > 0`.
    Plus,
}

#[derive(Debug, Clone, Copy)]
pub struct FreeEigenstructure {
    pub lambda: C64,
    pub omega: f64,
    pub xi: [C64; 2],
    pub kappa: [f64; 2],
    pub big_xi: [Vec4; 2],
    pub h: [Vec4; 2],
    pub c: [f64; 2],
}

pub const THRESHOLD_TOL: f64 = 1e-8;

fn branch_xi(lambda: C64, omega: f64, j: usize, side: Side) -> C64 {
    let w = if j == 0 { c(omega) - I * lambda } else { c(omega) + I * lambda };
    let z = w * w - 1.0;
    let mut r = z.sqrt();
    if r.im < 0.0 {
        r = -r;
    }
    if r.im.abs() <= 1e-13 * r.norm() && r.re != 0.0 {
        // on the cut: pick the one-sided limit
        let dz = if j == 0 { -w * I * 2.0 } else { w * I * 2.0 };
        let mut sgn = if (-dz).im >= 0.0 { 1.0 } else { -1.0 };
        if side == Side::Plus {
            sgn = -sgn;
        }
        r = C64::new(sgn * r.re.abs(), 0.0);
    }
    r
}

fn unit(v: Vec4) -> (Vec4, f64) {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    (v.map(|z| z / n), n)
}

pub fn free_eigenstructure(lambda: C64, omega: f64) -> FreeEigenstructure {
    free_eigenstructure_side(lambda, omega, Side::Minus)
}

pub fn free_eigenstructure_side(lambda: C64, omega: f64, side: Side) -> FreeEigenstructure {
    let xi1 = branch_xi(lambda, omega, 0, side);
    let xi2 = branch_xi(lambda, omega, 1, side);
    let w1 = c(omega) - I * lambda;
    let w2 = c(omega) + I * lambda;
    let vec_for = |xi: C64, w: C64, sg: f64| -> (Vec4, f64) {
        let raw: Vec4 = if sg > 0.0 {
            [I * xi, w - 1.0, -xi, I * (w - 1.0)]
        } else {
            [I * xi, w - 1.0, xi, -I * (w - 1.0)]
        };
        let cn = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (w - 1.0).norm() >= (w + 1.0).norm() {
            (unit(raw).0, cn)
        } else {
            // raw / xi is regular where w -> 1
            let q = xi / (w + 1.0);
            let alt: Vec4 = if sg > 0.0 { [I, q, c(-1.0), I * q] } else { [I, q, c(1.0), -I * q] };
            let (a, _) = unit(alt);
            let ph = if xi.norm() > 0.0 { xi / xi.norm() } else { c(1.0) };
            (a.map(|z| z * ph), cn)
        }
    };
    let (x1, c1) = vec_for(xi1, w1, 1.0);
    let (x2, c2) = vec_for(xi2, w2, -1.0);
    let beta = |v: Vec4| [v[0], -v[1], v[2], -v[3]];
    FreeEigenstructure {
        lambda,
        omega,
        xi: [xi1, xi2],
        kappa: [xi1.im.abs(), xi2.im.abs()],
        big_xi: [x1, x2],
        h: [beta(x1), beta(x2)],
        c: [c1, c2],
    }
}

impl FreeEigenstructure {
    pub fn is_threshold(&self, j: usize) -> bool {
        self.xi[j].norm() < THRESHOLD_TOL
    }

    /// Oscillatory channel: real exponent.
    pub fn is_oscillatory(&self, j: usize) -> bool {
        self.xi[j].im.abs() <= 1e-13 * self.xi[j].norm().max(1e-300)
    }
}

#[inline]
pub fn mat_vec(m: &Matrix4<C64>, y: &Vec4) -> Vec4 {
    let mut out = [ZERO; 4];
    for (r, o) in out.iter_mut().enumerate() {
        *o = m[(r, 0)] * y[0] + m[(r, 1)] * y[1] + m[(r, 2)] * y[2] + m[(r, 3)] * y[3];
    }
    out
}

#[inline]
pub fn bold_beta(v: &Vec4) -> Vec4 {
    [v[0], -v[1], v[2], -v[3]]
}

#[inline]
pub fn bold_alpha(v: &Vec4) -> Vec4 {
    [-v[3], v[2], v[1], -v[0]]
}

#[inline]
pub fn j4(v: &Vec4) -> Vec4 {
    [v[2], v[3], -v[0], -v[1]]
}

/// Fourth-order central differences, one-sided fourth order at the ends.
pub fn derivative(f: &[Vec4], dx: f64) -> Field4 {
    let n = f.len();
    assert!(n >= 5);
    let mut d = vec![[ZERO; 4]; n];
    let comb = |cs: &[(usize, f64)]| -> Vec4 {
        let mut o = [ZERO; 4];
        for &(i, w) in cs {
            for k in 0..4 {
                o[k] += f[i][k] * w;
            }
        }
        o.map(|z| z / (12.0 * dx))
    };
    for i in 2..n - 2 {
        d[i] = comb(&[(i - 2, 1.0), (i - 1, -8.0), (i + 1, 8.0), (i + 2, -1.0)]);
    }
    d[0] = comb(&[(0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0)]);
    d[1] = comb(&[(0, -3.0), (1, -10.0), (2, 18.0), (3, -6.0), (4, 1.0)]);
    d[n - 1] = comb(&[(n - 1, 25.0), (n - 2, -48.0), (n - 3, 36.0), (n - 4, -16.0), (n - 5, 3.0)]);
    d[n - 2] = comb(&[(n - 1, 3.0), (n - 2, 10.0), (n - 3, -18.0), (n - 4, 6.0), (n - 5, -1.0)]);
    d
}

/// `JL psi = -alpha psi' + alpha M(x, 0) psi` on the potential grid.
pub fn apply_jl(pot: &Potentials, psi: &[Vec4]) -> Field4 {
    let omega = pot.omega();
    let d = derivative(psi, pot.dx());
    (0..psi.len())
        .map(|i| {
            let m = coefficient_matrix_from(&pot.w1[i], &pot.w0[i], ZERO, omega);
            let mp = mat_vec(&m, &psi[i]);
            let r = [d[i][0] - mp[0], d[i][1] - mp[1], d[i][2] - mp[2], d[i][3] - mp[3]];
            bold_alpha(&r).map(|z| -z)
        })
        .collect()
}

pub fn l2_norm(f: &[Vec4], dx: f64) -> f64 {
    (dx * f.iter().map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum::<f64>()).sqrt()
}

/// Bilinear pairing `<a, b> = int a^T b dx` (no conjugation).
pub fn pairing(a: &[Vec4], b: &[Vec4], dx: f64) -> C64 {
    let mut s = ZERO;
    for (p, q) in a.iter().zip(b) {
        s += p[0] * q[0] + p[1] * q[1] + p[2] * q[2] + p[3] * q[3];
    }
    s * dx
}

pub fn sub(a: &[Vec4], b: &[Vec4]) -> Field4 {
    a.iter().zip(b).map(|(p, q)| [p[0] - q[0], p[1] - q[1], p[2] - q[2], p[3] - q[3]]).collect()
}

pub fn axpy(y: &mut [Vec4], a: C64, x: &[Vec4]) {
    for (p, q) in y.iter_mut().zip(x) {
        for k in 0..4 {
            p[k] += a * q[k];
        }
    }
}

fn real_field(a: &[f64], b: &[f64], cc: &[f64], d: &[f64]) -> Field4 {
    (0..a.len()).map(|i| [c(a[i]), c(b[i]), c(cc[i]), c(d[i])]).collect()
}

/// Generalized null space of `JL` and the frequency derivative of the wave.
#[derive(Debug, Clone)]
pub struct KernelBundle {
    pub phi: Field4,
    pub j_phi: Field4,
    pub dx_phi: Field4,
    pub dom_phi: Field4,
    pub jordan2: Field4,
}

/// Extended profile `(v, u)` of a wave with frequency `omega` on the grid of `base`.
fn profile_on_grid(model: &Model, omega: f64, base: &SolitaryWave) -> Result<(Vec<f64>, Vec<f64>)> {
    let w = solve_profile(model, omega, base.x_max, base.n())?;
    let (_, v, u) = w.full_grid();
    Ok((v, u))
}

pub fn kernel_vectors(pot: &Potentials) -> Result<KernelBundle> {
    let wave = &pot.wave;
    let omega = wave.omega;
    let (x, v, u) = wave.full_grid();
    let n = x.len();
    let h = DOMEGA.min(0.5 * omega).min(0.5 * (1.0 - omega));
    let centered = |h: f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let (vp, up) = profile_on_grid(&wave.model, omega + h, wave)?;
        let (vm, um) = profile_on_grid(&wave.model, omega - h, wave)?;
        Ok((
            (0..n).map(|i| (vp[i] - vm[i]) / (2.0 * h)).collect(),
            (0..n).map(|i| (up[i] - um[i]) / (2.0 * h)).collect(),
        ))
    };
    // Richardson combination of the h and h/2 centered differences
    let (dv1, du1) = centered(h)?;
    let (dv2, du2) = centered(0.5 * h)?;
    let dv: Vec<f64> = (0..n).map(|i| (4.0 * dv2[i] - dv1[i]) / 3.0).collect();
    let du: Vec<f64> = (0..n).map(|i| (4.0 * du2[i] - du1[i]) / 3.0).collect();
    let zeros = vec![0.0; n];
    let phi = real_field(&v, &u, &zeros, &zeros);
    let neg_v: Vec<f64> = v.iter().map(|a| -a).collect();
    let neg_u: Vec<f64> = u.iter().map(|a| -a).collect();
    let j_phi = real_field(&zeros, &zeros, &neg_v, &neg_u);
    // exact derivatives from the stationary equations
    let mdl = &wave.model;
    let vx: Vec<f64> = (0..n).map(|i| (mdl.f(v[i] * v[i] - u[i] * u[i]) - 1.0 - omega) * u[i]).collect();
    let ux: Vec<f64> = (0..n).map(|i| (omega - 1.0 + mdl.f(v[i] * v[i] - u[i] * u[i])) * v[i]).collect();
    let dx_phi = real_field(&vx, &ux, &zeros, &zeros);
    let dom_phi = real_field(&dv, &du, &zeros, &zeros);
    let j3: Vec<f64> = (0..n).map(|i| -0.5 * u[i] - omega * x[i] * v[i]).collect();
    let j4v: Vec<f64> = (0..n).map(|i| 0.5 * v[i] - omega * x[i] * u[i]).collect();
    let jordan2 = real_field(&zeros, &zeros, &j3, &j4v);
    Ok(KernelBundle { phi, j_phi, dx_phi, dom_phi, jordan2 })
}

#[derive(Debug, Clone, Copy)]
pub struct KernelResiduals {
    pub jl_jphi: f64,
    pub jl_dxphi: f64,
    pub chain1: f64,
    pub chain2: f64,
    pub phi_norm: f64,
}

pub fn kernel_residuals(pot: &Potentials, kb: &KernelBundle) -> KernelResiduals {
    let dx = pot.dx();
    let r1 = apply_jl(pot, &kb.j_phi);
    let r2 = apply_jl(pot, &kb.dx_phi);
    let r3 = sub(&apply_jl(pot, &kb.dom_phi), &kb.j_phi);
    let r4 = sub(&apply_jl(pot, &kb.jordan2), &kb.dx_phi);
    KernelResiduals {
        jl_jphi: l2_norm(&r1, dx),
        jl_dxphi: l2_norm(&r2, dx),
        chain1: l2_norm(&r3, dx),
        chain2: l2_norm(&r4, dx),
        phi_norm: l2_norm(&kb.phi, dx),
    }
}

/// Kernel vectors with the residual guard.
pub fn kernel_vectors_checked(pot: &Potentials) -> Result<(KernelBundle, KernelResiduals)> {
    let kb = kernel_vectors(pot)?;
    let r = kernel_residuals(pot, &kb);
    for (name, val) in [("JL dw phi - J phi", r.chain1), ("JL jordan2 - dx phi", r.chain2)] {
        if !(val <= 1e-5) {
            return Err(GnError::JordanResidual { name, value: val });
        }
    }
    Ok((kb, r))
}

/// Eigenvector of `JL` with eigenvalue `sign * 2 i omega`.
pub fn two_omega_eigenvector(kb: &KernelBundle, sign: f64) -> Field4 {
    // (sigma1 phi; -i sigma1 phi) belongs to +2 i omega
    kb.phi.iter().map(|p| [p[1], p[0], -I * sign * p[1], -I * sign * p[0]]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projector {
    D,
    C,
}

/// Symplectic projector onto the generalized null space (restricted to `X`) or its complement.
pub fn project(pot: &Potentials, kb: &KernelBundle, psi: &[Vec4], which: Projector) -> Result<Field4> {
    let dx = pot.dx();
    let dq = 2.0 * pairing(&kb.phi, &kb.dom_phi, dx).re;
    if dq.abs() < 1e-6 {
        return Err(GnError::DegenerateProjector(dq));
    }
    let j_dom: Field4 = kb.dom_phi.iter().map(j4).collect();
    let a = pairing(&kb.phi, psi, dx) * (2.0 / dq);
    let b = pairing(&j_dom, psi, dx) * (2.0 / dq);
    let mut pd = vec![[ZERO; 4]; psi.len()];
    axpy(&mut pd, a, &kb.dom_phi);
    axpy(&mut pd, b, &kb.j_phi);
    Ok(match which {
        Projector::D => pd,
        Projector::C => sub(psi, &pd),
    })
}

/// Largest even/odd mismatch of a field against parity class `X` (or `X-perp` when `perp`).
pub fn parity_defect(f: &[Vec4], perp: bool) -> f64 {
    let n = f.len();
    let mut r: f64 = 0.0;
    for i in 0..n {
        let j = n - 1 - i;
        for k in 0..4 {
            let even = (k % 2 == 0) != perp;
            let d = if even { f[i][k] - f[j][k] } else { f[i][k] + f[j][k] };
            r = r.max(d.norm());
        }
    }
    r
}
