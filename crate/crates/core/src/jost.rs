//! Jost solutions of `(d/dx - M(x, lambda, omega)) psi = 0` and connection matrices.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C64;

use crate::error::{GnError, Result};
use crate::linearization::{
    bold_beta, coefficient_matrix, free_eigenstructure_side, FreeEigenstructure, Potentials, Side, Vec4,
};
use crate::ode::{OdeOptions, Stepper};

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Infinity {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// `f_j ~ Xi_j e^{i xi_j x}` at `+inf` (`g_j` at `-inf`).
    Decaying,
    /// `F_j ~ H_j e^{-i xi_j x}` at `+inf` (`G_j` at `-inf`).
    Antidecaying,
    /// Threshold-regular combination of `f_j` and `F_j`.
    Modified,
}

#[derive(Debug, Clone)]
pub struct JostSolution {
    pub lambda: C64,
    pub omega: f64,
    pub side: Infinity,
    pub index: usize,
    pub kind: Kind,
    pub x: Vec<f64>,
    pub samples: Vec<Vec4>,
    /// Asymptotic vector and spatial exponent `mu` with `psi ~ asympt * e^{mu x}`.
    pub asympt: Vec4,
    pub exponent: C64,
    /// Natural log of the largest growth factor between unit checkpoints.
    pub max_log_growth: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct JostOptions {
    pub tol: f64,
    pub branch: Side,
    /// Bound on `e^{(kappa_j + kappa_max) x_F}` for the start of an anti-decaying solution.
    pub contamination: f64,
}

impl Default for JostOptions {
    fn default() -> Self {
        JostOptions { tol: 1e-11, branch: Side::Minus, contamination: 1e8 }
    }
}

/// Start abscissa for solutions launched at `+inf`.
pub fn start_point(pot: &Potentials) -> f64 {
    pot.negligible_from().clamp(8f64.min(pot.x_max()), pot.x_max())
}

/// Integrates `psi_b = e^{mu_b x} y_b` for every block `b` from `x0` through `points`,
/// which must move monotonically away from `x0` in direction `dir`.
fn integrate_scaled<const N: usize>(
    pot: &Potentials,
    lambda: C64,
    a: &[Vec4],
    mu: &[C64],
    x0: f64,
    dir: f64,
    points: &[f64],
    tol: f64,
) -> Result<(Vec<Vec<Vec4>>, f64)>
where
    [C64; N]: crate::ode::OdeState,
{
    let nb = N / 4;
    let omega = pot.omega();
    let mut out: Vec<Vec<Vec4>> = vec![Vec::with_capacity(points.len()); nb];
    let free = |b: usize, x: f64| a[b].map(|z| z * (mu[b] * x).exp());
    let mut idx = 0;
    while idx < points.len() && (points[idx] - x0) * dir <= 0.0 {
        for (b, o) in out.iter_mut().enumerate() {
            o.push(free(b, points[idx]));
        }
        idx += 1;
    }
    if idx == points.len() {
        return Ok((out, 0.0));
    }
    let rhs = |x: f64, y: &[C64; N]| -> [C64; N] {
        let m = coefficient_matrix(x, lambda, omega, pot);
        let mut o = [ZERO; N];
        for b in 0..nb {
            for r in 0..4 {
                let mut acc = -mu[b] * y[4 * b + r];
                for c in 0..4 {
                    acc += m[(r, c)] * y[4 * b + c];
                }
                o[4 * b + r] = acc;
            }
        }
        o
    };
    let mut y0 = [ZERO; N];
    for b in 0..nb {
        y0[4 * b..4 * b + 4].copy_from_slice(&a[b]);
    }
    let h0 = (0.1 / (1.0 + lambda.norm())).min(0.05);
    let opts = OdeOptions { atol: tol, rtol: tol, h_init: h0, ..Default::default() };
    let mut st = Stepper::new(rhs, x0, y0, opts);
    let norm = |y: &[C64; N]| y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut last = norm(st.y());
    let mut growth: f64 = 0.0;
    let mut next_ck = x0 + dir;
    for &p in &points[idx..] {
        while (p - next_ck) * dir > 0.0 {
            st.advance_to(next_ck)?;
            let nn = norm(st.y());
            let g = (nn / last).ln();
            if !(g < 1e12f64.ln()) {
                return Err(GnError::StiffBlowUp(st.x()));
            }
            growth = growth.max(g);
            last = nn;
            next_ck += dir;
        }
        st.advance_to(p)?;
        let y = st.y();
        for b in 0..nb {
            let e = (mu[b] * p).exp();
            out[b].push([y[4 * b] * e, y[4 * b + 1] * e, y[4 * b + 2] * e, y[4 * b + 3] * e]);
        }
    }
    Ok((out, growth))
}

/// Data at the `+inf` end for `(kind, j)`: asymptotic vector and exponent.
fn asymptotics(fe: &FreeEigenstructure, kind: Kind, j: usize) -> (Vec4, C64) {
    match kind {
        Kind::Decaying => (fe.big_xi[j], I * fe.xi[j]),
        _ => (fe.h[j], -I * fe.xi[j]),
    }
}

fn check_threshold(fe: &FreeEigenstructure, j: usize) -> Result<()> {
    if fe.is_threshold(j) {
        return Err(GnError::ThresholdDegeneracy { index: j + 1, value: fe.xi[j].norm() });
    }
    Ok(())
}

fn antidecaying_start(pot: &Potentials, fe: &FreeEigenstructure, j: usize, contamination: f64) -> f64 {
    let xs = start_point(pot);
    let rate = fe.kappa[j] + fe.kappa[0].max(fe.kappa[1]);
    if rate > 0.0 {
        xs.min(contamination.ln() / rate)
    } else {
        xs
    }
}

/// Raw `+inf` solution of kind Decaying or Antidecaying sampled at descending `points`.
fn solve_plus(
    lambda: C64,
    pot: &Potentials,
    j: usize,
    kind: Kind,
    points: &[f64],
    opts: &JostOptions,
) -> Result<JostSolution> {
    let fe = free_eigenstructure_side(lambda, pot.omega(), opts.branch);
    check_threshold(&fe, j)?;
    let (a, mu) = asymptotics(&fe, kind, j);
    let x0 = match kind {
        Kind::Decaying => start_point(pot),
        _ => antidecaying_start(pot, &fe, j, opts.contamination),
    };
    let (mut s, g) = integrate_scaled::<4>(pot, lambda, &[a], &[mu], x0, -1.0, points, opts.tol)?;
    let samples = s.pop().unwrap_or_default();
    Ok(JostSolution {
        lambda,
        omega: pot.omega(),
        side: Infinity::Plus,
        index: j,
        kind,
        x: points.to_vec(),
        samples,
        asympt: a,
        exponent: mu,
        max_log_growth: g,
    })
}

/// Sign `tau_j` with `F_j -> tau_j f_j` at `xi_j = 0` under the unit normalization.
pub fn threshold_sign(fe: &FreeEigenstructure, j: usize) -> f64 {
    let w = if j == 0 { C64::new(fe.omega, 0.0) - I * fe.lambda } else { C64::new(fe.omega, 0.0) + I * fe.lambda };
    if (w - 1.0).norm() >= (w + 1.0).norm() {
        -1.0
    } else {
        1.0
    }
}

fn modified_from(fe: &FreeEigenstructure, j: usize, f: &[Vec4], big_f: &[Vec4]) -> Vec<Vec4> {
    let tau = threshold_sign(fe, j);
    let d = I * fe.xi[j] * 2.0;
    f.iter()
        .zip(big_f)
        .map(|(a, b)| {
            let mut o = [ZERO; 4];
            for k in 0..4 {
                o[k] = b[k] + (a[k] - b[k] * tau) / d;
            }
            o
        })
        .collect()
}

/// Jost solution sampled at `points` (descending for `Plus`, ascending for `Minus`).
///
/// `Minus` solutions are integrated independently from `-x_start`; use
/// [`reflect`] for the cheap construction `g_j(x) = beta f_j(-x)`.
pub fn jost_solve(
    lambda: C64,
    pot: &Potentials,
    side: Infinity,
    j: usize,
    kind: Kind,
    points: &[f64],
    opts: &JostOptions,
) -> Result<JostSolution> {
    if kind == Kind::Modified && side == Infinity::Minus {
        return Err(GnError::InvalidParameter("modified solutions at -inf come from reflection".into()));
    }
    match side {
        Infinity::Plus => match kind {
            Kind::Modified => modified_antidecaying(lambda, pot, j, points, opts),
            _ => solve_plus(lambda, pot, j, kind, points, opts),
        },
        Infinity::Minus => {
            // x -> -x maps the problem at -inf onto the mirrored potential at +inf
            let fe = free_eigenstructure_side(lambda, pot.omega(), opts.branch);
            check_threshold(&fe, j)?;
            let (a, mu) = asymptotics(&fe, kind, j);
            let ga = bold_beta(&a);
            let x0 = match kind {
                Kind::Decaying => start_point(pot),
                _ => antidecaying_start(pot, &fe, j, opts.contamination),
            };
            let (mut s, g) = integrate_scaled::<4>(pot, lambda, &[ga], &[-mu], -x0, 1.0, points, opts.tol)?;
            let samples = s.pop().unwrap_or_default();
            let omega = pot.omega();
            Ok(JostSolution {
                lambda,
                omega,
                side,
                index: j,
                kind,
                x: points.to_vec(),
                samples,
                asympt: ga,
                exponent: -mu,
                max_log_growth: g,
            })
        }
    }
}

/// `(f1, f2)` integrated together at descending `points`.
pub fn decaying_pair(lambda: C64, pot: &Potentials, points: &[f64], opts: &JostOptions) -> Result<[JostSolution; 2]> {
    let fe = free_eigenstructure_side(lambda, pot.omega(), opts.branch);
    check_threshold(&fe, 0)?;
    check_threshold(&fe, 1)?;
    let a = [fe.big_xi[0], fe.big_xi[1]];
    let mu = [I * fe.xi[0], I * fe.xi[1]];
    let (mut s, g) = integrate_scaled::<8>(pot, lambda, &a, &mu, start_point(pot), -1.0, points, opts.tol)?;
    let s2 = s.pop().unwrap_or_default();
    let s1 = s.pop().unwrap_or_default();
    let mk = |j: usize, samples: Vec<Vec4>| JostSolution {
        lambda,
        omega: pot.omega(),
        side: Infinity::Plus,
        index: j,
        kind: Kind::Decaying,
        x: points.to_vec(),
        samples,
        asympt: a[j],
        exponent: mu[j],
        max_log_growth: g,
    };
    Ok([mk(0, s1), mk(1, s2)])
}

/// `beta psi(-x)`: the `-inf` partner of a `+inf` solution (and conversely).
pub fn reflect(sol: &JostSolution) -> JostSolution {
    let x: Vec<f64> = sol.x.iter().map(|v| -v).collect();
    let samples: Vec<Vec4> = sol.samples.iter().map(bold_beta).collect();
    JostSolution {
        side: if sol.side == Infinity::Plus { Infinity::Minus } else { Infinity::Plus },
        x,
        samples,
        asympt: bold_beta(&sol.asympt),
        exponent: -sol.exponent,
        ..sol.clone()
    }
}

/// `F~_j`, regular at `xi_j = 0` where it grows linearly.
pub fn modified_antidecaying(
    lambda: C64,
    pot: &Potentials,
    j: usize,
    points: &[f64],
    opts: &JostOptions,
) -> Result<JostSolution> {
    let fe = free_eigenstructure_side(lambda, pot.omega(), opts.branch);
    let build = |lam: C64| -> Result<(FreeEigenstructure, Vec<Vec4>)> {
        let fe = free_eigenstructure_side(lam, pot.omega(), opts.branch);
        let f = solve_plus(lam, pot, j, Kind::Decaying, points, opts)?;
        let big = solve_plus(lam, pot, j, Kind::Antidecaying, points, opts)?;
        Ok((fe, modified_from(&fe, j, &f.samples, &big.samples)))
    };
    let samples = if fe.xi[j].norm() >= 1e-6 {
        build(lambda)?.1
    } else {
        // pointwise limit: linear extrapolation in xi from the oscillatory side
        let eta = 1e-6;
        let pick = |e: f64| -> Result<(FreeEigenstructure, Vec<Vec4>)> {
            let up = lambda + I * e;
            let fu = free_eigenstructure_side(up, pot.omega(), opts.branch);
            if fu.is_oscillatory(j) {
                build(up)
            } else {
                build(lambda - I * e)
            }
        };
        let (fa, sa) = pick(eta)?;
        let (fb, sb) = pick(eta / 4.0)?;
        let (xa, xb) = (fa.xi[j], fb.xi[j]);
        sa.iter()
            .zip(&sb)
            .map(|(a, b)| {
                let mut o = [ZERO; 4];
                for k in 0..4 {
                    o[k] = (xa * b[k] - xb * a[k]) / (xa - xb);
                }
                o
            })
            .collect()
    };
    Ok(JostSolution {
        lambda,
        omega: pot.omega(),
        side: Infinity::Plus,
        index: j,
        kind: Kind::Modified,
        x: points.to_vec(),
        samples,
        asympt: fe.h[j],
        exponent: -I * fe.xi[j],
        max_log_growth: 0.0,
    })
}

/// `(g1, g2) = (f1, f2) A + (P1, P2) B` where `P` is `F` or `F~`.
#[derive(Debug, Clone)]
pub struct ConnectionMatrices {
    pub a: Matrix2<C64>,
    pub b: Matrix2<C64>,
    pub modified: bool,
    pub residual: f64,
    pub condition: f64,
}

pub fn matching_points() -> Vec<f64> {
    (0..41).map(|i| 2.0 - 0.1 * i as f64).collect()
}

/// Least-squares connection matrices on `x in [-2, 2]`.
pub fn connection_matrices(lambda: C64, pot: &Potentials, modified: bool, opts: &JostOptions) -> Result<ConnectionMatrices> {
    let pts = matching_points();
    let f: Vec<JostSolution> =
        (0..2).map(|j| solve_plus(lambda, pot, j, Kind::Decaying, &pts, opts)).collect::<Result<_>>()?;
    let p: Vec<Vec<Vec4>> = if modified {
        (0..2).map(|j| modified_antidecaying(lambda, pot, j, &pts, opts).map(|s| s.samples)).collect::<Result<_>>()?
    } else {
        (0..2).map(|j| solve_plus(lambda, pot, j, Kind::Antidecaying, &pts, opts).map(|s| s.samples)).collect::<Result<_>>()?
    };
    let g: Vec<JostSolution> = f.iter().map(reflect).collect();
    let m = pts.len();
    let mut mat = DMatrix::<C64>::zeros(4 * m, 4);
    let mut rhs = DMatrix::<C64>::zeros(4 * m, 2);
    for i in 0..m {
        let gi = m - 1 - i;
        for r in 0..4 {
            mat[(4 * i + r, 0)] = f[0].samples[i][r];
            mat[(4 * i + r, 1)] = f[1].samples[i][r];
            mat[(4 * i + r, 2)] = p[0][i][r];
            mat[(4 * i + r, 3)] = p[1][i][r];
            rhs[(4 * i + r, 0)] = g[0].samples[gi][r];
            rhs[(4 * i + r, 1)] = g[1].samples[gi][r];
        }
    }
    let svd = mat.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = smax / smin;
    if !(cond <= 1e12) {
        return Err(GnError::BasisDegenerate(cond));
    }
    let sol = svd.solve(&rhs, 0.0).map_err(|e| GnError::NoConvergence(e.to_string()))?;
    let recon = &mat * &sol - &rhs;
    let residual = recon.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let a = Matrix2::new(sol[(0, 0)], sol[(0, 1)], sol[(1, 0)], sol[(1, 1)]);
    let b = Matrix2::new(sol[(2, 0)], sol[(2, 1)], sol[(3, 0)], sol[(3, 1)]);
    Ok(ConnectionMatrices { a, b, modified, residual, condition: cond })
}
