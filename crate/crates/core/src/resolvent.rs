//! Green's function of `JL - lambda` built from Jost data, and weighted resolvent bounds.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{GnError, Result};
use crate::jost::{connection_matrices, decaying_pair, JostOptions};
use crate::linearization::{bold_beta, free_eigenstructure_side, free_matrix, Potentials, Side, Vec4};
use crate::model::dirac_matrices;

const ZERO: C64 = C64::new(0.0, 0.0);

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Phase `s` solving `B21 |B22| + B22 |B21| e^{is} = 0`.
pub fn gamma_phase(b: &Matrix2<C64>) -> f64 {
    let (b21, b22) = (b[(1, 0)], b[(1, 1)]);
    if b21.norm() == 0.0 || b22.norm() == 0.0 {
        return 0.0;
    }
    (-b21 * b22.norm() / (b22 * b21.norm())).arg()
}

pub fn gamma_matrix(b: &Matrix2<C64>) -> Result<Matrix2<C64>> {
    let (b21, b22) = (b[(1, 0)], b[(1, 1)]);
    if b21.norm() + b22.norm() < 1e-12 {
        return Err(GnError::DegenerateBRow);
    }
    let s = gamma_phase(b);
    let n = (b21.norm_sqr() + b22.norm_sqr()).sqrt();
    let e = C64::from_polar(1.0, s);
    Ok(Matrix2::new(c(b22.norm() / n), e.conj() * (b21.norm() / n), e * (b21.norm() / n), c(-b22.norm() / n)))
}

fn outer(u: &Vec4, v: &Vec4) -> Matrix4<C64> {
    Matrix4::from_fn(|r, k| u[r] * v[k].conj())
}

/// `sum_jk u_j A_jk v_k^*`.
pub fn bilinear_sum(u: &[Vec4], a: &[Vec<C64>], v: &[Vec4]) -> Matrix4<C64> {
    let mut m = Matrix4::zeros();
    for (j, uj) in u.iter().enumerate() {
        for (k, vk) in v.iter().enumerate() {
            if a[j][k] != ZERO {
                m += outer(uj, vk) * a[j][k];
            }
        }
    }
    m
}

fn gsum(p: &[Vec4; 2], gamma: &Matrix2<C64>, q: &[Vec4; 2]) -> Matrix4<C64> {
    let mut m = Matrix4::zeros();
    for j in 0..2 {
        for k in 0..2 {
            m += outer(&p[j], &q[k]) * gamma[(j, k)];
        }
    }
    m
}

/// `Delta = f Gamma g^* - g Gamma f^*` at one point.
pub fn delta_matrix(f: &[Vec4; 2], g: &[Vec4; 2], gamma: &Matrix2<C64>) -> Matrix4<C64> {
    gsum(f, gamma, g) - gsum(g, gamma, f)
}

fn minus_alpha() -> Matrix4<C64> {
    -dirac_matrices().bold_alpha
}

/// Jost data for the Green's function on the wave grid.
#[derive(Debug, Clone)]
pub struct GreenData {
    pub lambda: C64,
    pub omega: f64,
    pub side: Side,
    /// Ascending abscissae, symmetric about zero.
    pub x: Vec<f64>,
    pub f: Vec<[Vec4; 2]>,
    pub gamma: Matrix2<C64>,
    pub evans: C64,
    dinv: Vec<Matrix4<C64>>,
}

fn check_lambda(lambda: C64, pot: &Potentials, side: Side) -> Result<()> {
    let fe = free_eigenstructure_side(lambda, pot.omega(), side);
    for j in 0..2 {
        if fe.is_threshold(j) {
            return Err(GnError::ThresholdDegeneracy { index: j + 1, value: fe.xi[j].norm() });
        }
    }
    Ok(())
}

impl GreenData {
    /// Samples on `pts`, which must be ascending and symmetric about zero.
    pub fn on_points(lambda: C64, pot: &Potentials, side: Side, pts: &[f64], opts: &JostOptions) -> Result<GreenData> {
        check_lambda(lambda, pot, side)?;
        let opts = JostOptions { branch: side, ..*opts };
        let desc: Vec<f64> = pts.iter().rev().copied().collect();
        let [f1, f2] = decaying_pair(lambda, pot, &desc, &opts)?;
        let n = pts.len();
        let f: Vec<[Vec4; 2]> = (0..n).map(|i| [f1.samples[n - 1 - i], f2.samples[n - 1 - i]]).collect();
        let cm = connection_matrices(lambda, pot, false, &opts)?;
        let gamma = gamma_matrix(&cm.b)?;
        let mut gd = GreenData { lambda, omega: pot.omega(), side, x: pts.to_vec(), f, gamma, evans: ZERO, dinv: vec![] };
        let mid = n / 2;
        let (fm, gm) = gd.fg(mid);
        let e = Matrix4::from_columns(&[v(&fm[0]), v(&fm[1]), v(&gm[0]), v(&gm[1])]).determinant();
        gd.evans = e;
        if e.norm() < 1e-8 {
            return Err(GnError::EvansZero(e.norm()));
        }
        gd.dinv = (0..n)
            .map(|i| {
                let (f, g) = gd.fg(i);
                delta_matrix(&f, &g, &gd.gamma).try_inverse().ok_or(GnError::EvansZero(e.norm()))
            })
            .collect::<Result<_>>()?;
        Ok(gd)
    }

    pub fn new(lambda: C64, pot: &Potentials, side: Side, opts: &JostOptions) -> Result<GreenData> {
        Self::on_points(lambda, pot, side, &pot.x, opts)
    }

    /// `([f1, f2], [g1, g2])` at index `i`, with `g_j(x) = beta f_j(-x)`.
    pub fn fg(&self, i: usize) -> ([Vec4; 2], [Vec4; 2]) {
        let r = self.x.len() - 1 - i;
        (self.f[i], [bold_beta(&self.f[r][0]), bold_beta(&self.f[r][1])])
    }

    pub fn delta(&self, i: usize) -> Matrix4<C64> {
        let (f, g) = self.fg(i);
        delta_matrix(&f, &g, &self.gamma)
    }

    /// `G(x_i, y_j)` with `Theta(0) = 1/2`.
    pub fn kernel(&self, i: usize, j: usize) -> Matrix4<C64> {
        let (fx, gx) = self.fg(i);
        let (fy, gy) = self.fg(j);
        let upper = || gsum(&fx, &self.gamma, &gy);
        let lower = || gsum(&gx, &self.gamma, &fy);
        let m = match i.cmp(&j) {
            std::cmp::Ordering::Greater => upper(),
            std::cmp::Ordering::Less => lower(),
            std::cmp::Ordering::Equal => (upper() + lower()) * c(0.5),
        };
        m * self.dinv[j] * minus_alpha()
    }

    /// One-sided limits `G(y+0, y)` and `G(y-0, y)`.
    pub fn one_sided(&self, j: usize) -> (Matrix4<C64>, Matrix4<C64>) {
        let (fy, gy) = self.fg(j);
        let tail = self.dinv[j] * minus_alpha();
        (gsum(&fy, &self.gamma, &gy) * tail, gsum(&gy, &self.gamma, &fy) * tail)
    }

    /// `u = w R (w h)` by prefix sums, where `w` is the weight sampled on `x`.
    pub fn apply_weighted(&self, h: &[Vec4], w: &[f64], adjoint: bool) -> Vec<Vec4> {
        let n = self.x.len();
        let dx = self.x[1] - self.x[0];
        let ma = minus_alpha();
        // forward: u(x) = Pf(x) Gamma int_{-inf}^x Pg^* D^-1 (-a) h + Pg(x) Gamma int_x^inf Pf^* D^-1 (-a) h
        // adjoint: u(y) = (-a)^* D(y)^-* [ Pg(y) Gamma^* int_y^inf Pf^* h + Pf(y) Gamma^* int_{-inf}^y Pg^* h ]
        let mut lo = vec![[ZERO; 2]; n];
        let mut hi = vec![[ZERO; 2]; n];
        let proj = |p: &[Vec4; 2], h: &Vec4| -> [C64; 2] {
            let mut out = [ZERO; 2];
            for k in 0..2 {
                for r in 0..4 {
                    out[k] += p[k][r].conj() * h[r];
                }
            }
            out
        };
        let src: Vec<Vec4> = (0..n)
            .map(|i| {
                let hw = h[i].map(|z| z * w[i]);
                if adjoint {
                    hw
                } else {
                    let m = self.dinv[i] * ma;
                    let mut o = [ZERO; 4];
                    for r in 0..4 {
                        for k in 0..4 {
                            o[r] += m[(r, k)] * hw[k];
                        }
                    }
                    o
                }
            })
            .collect();
        let wts = |i: usize| if i == 0 || i + 1 == n { 0.5 * dx } else { dx };
        // lower integrals run over the g factor (forward) or g (adjoint), upper over f
        let mut acc = [ZERO; 2];
        for i in 0..n {
            let (_, g) = self.fg(i);
            let p = proj(&g, &src[i]);
            let half = [p[0] * (0.5 * wts(i)), p[1] * (0.5 * wts(i))];
            lo[i] = [acc[0] + half[0], acc[1] + half[1]];
            acc = [acc[0] + p[0] * wts(i), acc[1] + p[1] * wts(i)];
        }
        let mut acc = [ZERO; 2];
        for i in (0..n).rev() {
            let (f, _) = self.fg(i);
            let p = proj(&f, &src[i]);
            let half = [p[0] * (0.5 * wts(i)), p[1] * (0.5 * wts(i))];
            hi[i] = [acc[0] + half[0], acc[1] + half[1]];
            acc = [acc[0] + p[0] * wts(i), acc[1] + p[1] * wts(i)];
        }
        let gam = if adjoint { self.gamma.adjoint() } else { self.gamma };
        (0..n)
            .map(|i| {
                let (f, g) = self.fg(i);
                let (a, b) = if adjoint { (hi[i], lo[i]) } else { (lo[i], hi[i]) };
                // forward: f Gamma a + g Gamma b;  adjoint: g Gamma^* a + f Gamma^* b
                let (p, q) = if adjoint { (g, f) } else { (f, g) };
                let ca = [gam[(0, 0)] * a[0] + gam[(0, 1)] * a[1], gam[(1, 0)] * a[0] + gam[(1, 1)] * a[1]];
                let cb = [gam[(0, 0)] * b[0] + gam[(0, 1)] * b[1], gam[(1, 0)] * b[0] + gam[(1, 1)] * b[1]];
                let mut o = [ZERO; 4];
                for r in 0..4 {
                    o[r] = p[0][r] * ca[0] + p[1][r] * ca[1] + q[0][r] * cb[0] + q[1][r] * cb[1];
                }
                if adjoint {
                    let m = (self.dinv[i] * ma).adjoint();
                    let mut t = [ZERO; 4];
                    for r in 0..4 {
                        for k in 0..4 {
                            t[r] += m[(r, k)] * o[k];
                        }
                    }
                    o = t;
                }
                o.map(|z| z * w[i])
            })
            .collect()
    }
}

fn v(a: &Vec4) -> nalgebra::Vector4<C64> {
    nalgebra::Vector4::new(a[0], a[1], a[2], a[3])
}

/// Pointwise `G(x, y)`.
pub fn green_eval(x: f64, y: f64, lambda: C64, pot: &Potentials, side: Side, opts: &JostOptions) -> Result<Matrix4<C64>> {
    let mut pts = vec![x, -x, y, -y, 0.0];
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    let gd = GreenData::on_points(lambda, pot, side, &pts, opts)?;
    let i = pts.iter().position(|p| *p == x).unwrap_or(0);
    let j = pts.iter().position(|p| *p == y).unwrap_or(0);
    Ok(gd.kernel(i, j))
}

/// Cross-check of the boundary values by a finite offset `lambda -+ eps` off the cut.
pub fn green_eval_offset(x: f64, y: f64, lambda: C64, pot: &Potentials, side: Side, eps: f64, opts: &JostOptions) -> Result<Matrix4<C64>> {
    let shift = if side == Side::Minus { -eps } else { eps };
    green_eval(x, y, lambda + shift, pot, Side::Minus, opts)
}

/// Closed-form free Green's function `K(x - y) (-alpha)` from spectral projectors of the constant matrix.
///
/// The free exponents are `+-sqrt(1 - (omega -+ i lambda)^2)`; they must be distinct (`lambda != 0`)
/// and off the imaginary axis (`lambda` in the gap).
pub fn free_green(x: f64, y: f64, lambda: C64, omega: f64) -> Matrix4<C64> {
    let m = free_matrix(lambda, omega);
    let i = C64::new(0.0, 1.0);
    let s1 = (c(1.0) - (c(omega) - i * lambda).powi(2)).sqrt();
    let s2 = (c(1.0) - (c(omega) + i * lambda).powi(2)).sqrt();
    let ev = [s1, -s1, s2, -s2];
    let id = Matrix4::<C64>::identity();
    let z = x - y;
    let mut k = Matrix4::<C64>::zeros();
    for a in 0..4 {
        let mu = ev[a];
        let stable = mu.re < 0.0;
        if (z > 0.0 && !stable) || (z < 0.0 && stable) {
            continue;
        }
        let mut p = id;
        for b in 0..4 {
            if b != a {
                p = p * (m - id * ev[b]) / (mu - ev[b]);
            }
        }
        let sgn = if z == 0.0 { if stable { 0.5 } else { -0.5 } } else if stable { 1.0 } else { -1.0 };
        k += p * ((mu * z).exp() * sgn);
    }
    k * minus_alpha()
}

/// Residual of `-alpha (d/dx - M) G(., y_j)` away from `y_j` (relative to `max |G|`) and the
/// jump defect `| -alpha (G(y+0) - G(y-0)) - I |`.
pub fn delta_identity_residual(gd: &GreenData, pot: &Potentials, j: usize, halfwidth: usize) -> (f64, f64) {
    let n = gd.x.len();
    let dx = gd.x[1] - gd.x[0];
    let lo = j.saturating_sub(halfwidth).max(2);
    let hi = (j + halfwidth).min(n - 3);
    let cols: Vec<Matrix4<C64>> = (lo - 2..=hi + 2).map(|i| gd.kernel(i, j)).collect();
    let ma = minus_alpha();
    let mut worst: f64 = 0.0;
    let mut gmax: f64 = 0.0;
    for c in &cols {
        gmax = gmax.max(c.norm());
    }
    for i in lo..=hi {
        if i.abs_diff(j) <= 2 {
            continue;
        }
        let k = i - (lo - 2);
        let d = (cols[k - 2] - cols[k - 1] * c(8.0) + cols[k + 1] * c(8.0) - cols[k + 2]) / c(12.0 * dx);
        let mm = crate::linearization::coefficient_matrix(gd.x[i], gd.lambda, gd.omega, pot);
        let r = ma * (d - mm * cols[k]);
        worst = worst.max(r.norm());
    }
    let (up, dn) = gd.one_sided(j);
    let jump = (ma * (up - dn) - Matrix4::identity()).norm();
    (worst / gmax.max(1e-300), jump)
}

#[derive(Debug, Clone)]
pub struct LapRow {
    pub lambda: C64,
    pub estimate: std::result::Result<f64, GnError>,
}

#[derive(Debug, Clone)]
pub struct LapTable {
    pub s_weight: f64,
    pub rows: Vec<LapRow>,
    pub sup: f64,
}

/// Power-iteration estimate of `|| <x>^-s (JL - lambda)^-1 <x>^-s ||` on `L^2`.
pub fn weighted_norm(gd: &GreenData, s_weight: f64, iters: usize) -> f64 {
    let n = gd.x.len();
    let dx = gd.x[1] - gd.x[0];
    let w: Vec<f64> = gd.x.iter().map(|x| (1.0 + x * x).powf(-s_weight / 2.0)).collect();
    let mut h: Vec<Vec4> = (0..n)
        .map(|i| {
            let t = gd.x[i];
            [c((-t * t / 8.0).exp()), c(0.3 * t * (-t * t / 8.0).exp()), c(0.5 * (-t * t / 4.0).exp()), C64::new(0.0, 0.2)]
        })
        .collect();
    let norm = |h: &[Vec4]| (h.iter().map(|p| p.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum::<f64>() * dx).sqrt();
    let mut est = 0.0;
    for _ in 0..iters {
        let nh = norm(&h);
        h.iter_mut().for_each(|p| *p = p.map(|z| z / nh));
        let u = gd.apply_weighted(&h, &w, false);
        let back = gd.apply_weighted(&u, &w, true);
        est = norm(&back).sqrt();
        h = back;
    }
    est
}

pub fn lap_bound_probe(pot: &Potentials, s_weight: f64, lambdas: &[C64], side: Side, opts: &JostOptions) -> Result<LapTable> {
    if !(s_weight > 3.0) {
        return Err(GnError::InvalidParameter(format!("weight must exceed 3, got {s_weight}")));
    }
    let rows: Vec<LapRow> = lambdas
        .par_iter()
        .map(|&l| LapRow { lambda: l, estimate: GreenData::new(l, pot, side, opts).map(|gd| weighted_norm(&gd, s_weight, 30)) })
        .collect();
    let sup = rows.iter().filter_map(|r| r.estimate.as_ref().ok()).fold(0.0, |a: f64, &b| a.max(b));
    Ok(LapTable { s_weight, rows, sup })
}

/// Fitted constant `sup |G(x,y)| / (min(<x>,<y>) <y>)` over a sampled box of half-width `r`.
pub fn growth_constant(gd: &GreenData, r: f64, stride: usize) -> f64 {
    let idx: Vec<usize> = (0..gd.x.len()).step_by(stride.max(1)).filter(|&i| gd.x[i].abs() <= r).collect();
    let jp = |t: f64| (1.0 + t * t).sqrt();
    idx.par_iter()
        .map(|&i| {
            idx.iter()
                .map(|&j| gd.kernel(i, j).norm() / (jp(gd.x[i]).min(jp(gd.x[j])) * jp(gd.x[j])))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Slopes of `log sup |G|` against `log <R>` along `x` (with `|y| <= 2`) and along `y` (with `|x| <= 2`).
pub fn growth_exponents(gd: &GreenData, radii: &[f64]) -> (f64, f64) {
    let n = gd.x.len();
    let near: Vec<usize> = (0..n).filter(|&i| gd.x[i].abs() <= 2.0).step_by(20).collect();
    let at = |r: f64| -> usize {
        let mut best = 0;
        for i in 0..n {
            if (gd.x[i] - r).abs() < (gd.x[best] - r).abs() {
                best = i;
            }
        }
        best
    };
    let mut px = Vec::new();
    let mut py = Vec::new();
    for &r in radii {
        let (a, b) = (at(r), at(-r));
        let mut sx: f64 = 0.0;
        let mut sy: f64 = 0.0;
        for &k in &near {
            for &e in &[a, b] {
                sx = sx.max(gd.kernel(e, k).norm());
                sy = sy.max(gd.kernel(k, e).norm());
            }
        }
        let l = (1.0 + r * r).sqrt().ln();
        px.push((l, sx.max(1e-300).ln()));
        py.push((l, sy.max(1e-300).ln()));
    }
    (crate::linearization::fit_slope(&px), crate::linearization::fit_slope(&py))
}
