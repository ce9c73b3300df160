//! Evans function, zero location and continuation, threshold probes and Krein signatures.

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{GnError, Result};
use crate::jost::{decaying_pair, JostOptions};
use crate::linearization::{bold_beta, free_eigenstructure_side, j4, potentials, Potentials, Side, Vec4};
use crate::model::make_power_model;
use crate::solitary_wave::{default_x_max, solve_profile};

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    X,
    Xperp,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParityClass {
    X,
    Xperp,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Imaginary,
    Real,
}

#[derive(Debug, Clone, Copy)]
pub struct EvansSample {
    pub lambda: C64,
    pub omega: f64,
    pub e: C64,
    pub e_x: C64,
    pub e_xperp: C64,
    pub drift: f64,
}

impl EvansSample {
    pub fn value(&self, parity: Parity) -> C64 {
        match parity {
            Parity::X => self.e_x,
            Parity::Xperp => self.e_xperp,
            Parity::Full => self.e,
        }
    }
}

fn det4(c: [Vec4; 4]) -> C64 {
    Matrix4::from_fn(|r, k| c[k][r]).determinant()
}

/// `det[a1, a2, b1, b2]` and its Hadamard scale.
fn det_scaled(a1: &Vec4, a2: &Vec4, b1: &Vec4, b2: &Vec4) -> (C64, f64) {
    let n = |v: &Vec4| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    (det4([*a1, *a2, *b1, *b2]), n(a1) * n(a2) * n(b1) * n(b2))
}

pub fn evans_eval(lambda: C64, pot: &Potentials, opts: &JostOptions) -> Result<EvansSample> {
    let [f1, f2] = decaying_pair(lambda, pot, &[1.0, 0.0, -1.0], opts)?;
    let (p, z, m) = (0, 1, 2);
    let b = bold_beta;
    let (e0, scale) = det_scaled(&f1.samples[z], &f2.samples[z], &b(&f1.samples[z]), &b(&f2.samples[z]));
    let (ep, _) = det_scaled(&f1.samples[p], &f2.samples[p], &b(&f1.samples[m]), &b(&f2.samples[m]));
    let (em, _) = det_scaled(&f1.samples[m], &f2.samples[m], &b(&f1.samples[p]), &b(&f2.samples[p]));
    let drift = (ep - e0).norm().max((em - e0).norm()) / scale.max(e0.norm()).max(1e-300);
    let a = f1.samples[z];
    let c = f2.samples[z];
    Ok(EvansSample {
        lambda,
        omega: pot.omega(),
        e: e0,
        e_x: a[1] * c[3] - a[3] * c[1],
        e_xperp: a[0] * c[2] - a[2] * c[0],
        drift,
    })
}

/// Parallel evaluation preserving input order.
pub fn evans_batch(lambdas: &[C64], pot: &Potentials, opts: &JostOptions) -> Vec<Result<EvansSample>> {
    lambdas.par_iter().map(|&l| evans_eval(l, pot, opts)).collect()
}

/// Winding number of `f` along the boundary of the rectangle `[lo, hi]` (counter-clockwise).
///
/// Edges are refined until consecutive phase increments stay below `pi/4`.
/// Returns the winding and the smallest `|f|` seen on the contour.
pub fn winding_rect<F>(f: &F, lo: C64, hi: C64, n_per_edge: usize) -> Result<(i32, f64)>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    let corners = [lo, C64::new(hi.re, lo.im), hi, C64::new(lo.re, hi.im), lo];
    let mut ts: Vec<C64> = Vec::new();
    for e in 0..4 {
        for i in 0..n_per_edge {
            let t = i as f64 / n_per_edge as f64;
            ts.push(corners[e] + (corners[e + 1] - corners[e]) * t);
        }
    }
    winding_closed(f, ts)
}

/// Winding along a closed polygon given by `pts` (last point joins the first).
pub fn winding_closed<F>(f: &F, mut pts: Vec<C64>) -> Result<(i32, f64)>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    let mut vals: Vec<C64> = pts.par_iter().map(|&z| f(z)).collect::<Result<_>>()?;
    for _ in 0..14 {
        let n = pts.len();
        let bad: Vec<usize> = (0..n).filter(|&i| (vals[(i + 1) % n] / vals[i]).arg().abs() > std::f64::consts::FRAC_PI_4).collect();
        if bad.is_empty() {
            break;
        }
        let mids: Vec<C64> = bad.iter().map(|&i| (pts[i] + pts[(i + 1) % n]) * 0.5).collect();
        let mv: Vec<C64> = mids.par_iter().map(|&z| f(z)).collect::<Result<_>>()?;
        let mut np = Vec::with_capacity(n + bad.len());
        let mut nv = Vec::with_capacity(n + bad.len());
        let mut k = 0;
        for i in 0..n {
            np.push(pts[i]);
            nv.push(vals[i]);
            if k < bad.len() && bad[k] == i {
                np.push(mids[k]);
                nv.push(mv[k]);
                k += 1;
            }
        }
        pts = np;
        vals = nv;
    }
    let n = vals.len();
    let mut total = 0.0;
    let mut min_abs = f64::INFINITY;
    for i in 0..n {
        let d = (vals[(i + 1) % n] / vals[i]).arg();
        if d.abs() > std::f64::consts::FRAC_PI_2 {
            return Err(GnError::NoConvergence("phase under-resolved on contour".into()));
        }
        total += d;
        min_abs = min_abs.min(vals[i].norm());
    }
    Ok(((total / std::f64::consts::TAU).round() as i32, min_abs))
}

fn parity_fn<'a>(pot: &'a Potentials, opts: &'a JostOptions, parity: Parity) -> impl Fn(C64) -> Result<C64> + Sync + 'a {
    move |l| evans_eval(l, pot, opts).map(|s| s.value(parity))
}

#[derive(Debug, Clone)]
pub struct Bracket {
    pub lo: C64,
    pub hi: C64,
    pub center: C64,
    pub min_abs: f64,
    /// Winding over a small rectangle around `center`; `None` where no analytic neighborhood exists.
    pub winding: Option<i32>,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub samples: Vec<Result<EvansSample>>,
    pub brackets: Vec<Bracket>,
}

/// Distance along the imaginary axis to the nearest threshold, or infinity on the real axis.
fn gap_room(lambda: C64, omega: f64) -> f64 {
    let edge = 1.0 - omega.abs();
    if lambda.re.abs() > 1e-14 {
        return f64::INFINITY;
    }
    edge - lambda.im.abs()
}

fn avoid_thresholds(lambda: C64, omega: f64, axis: Axis) -> C64 {
    let fe = free_eigenstructure_side(lambda, omega, Side::Minus);
    if fe.is_threshold(0) || fe.is_threshold(1) {
        match axis {
            Axis::Imaginary => lambda + I * 1e-6,
            Axis::Real => lambda + 1e-6,
        }
    } else {
        lambda
    }
}

pub fn scan_segment(pot: &Potentials, axis: Axis, from: f64, to: f64, n: usize, parity: Parity, opts: &JostOptions) -> ScanResult {
    let omega = pot.omega();
    let n = n.max(2);
    let dir = match axis {
        Axis::Imaginary => I,
        Axis::Real => C64::new(1.0, 0.0),
    };
    let lambdas: Vec<C64> = (0..n)
        .map(|i| avoid_thresholds(dir * (from + (to - from) * i as f64 / (n - 1) as f64), omega, axis))
        .collect();
    let samples = evans_batch(&lambdas, pot, opts);
    let mags: Vec<f64> = samples.iter().map(|s| s.as_ref().map(|s| s.value(parity).norm()).unwrap_or(f64::NAN)).collect();
    let step = ((to - from) / (n - 1) as f64).abs();
    let f = parity_fn(pot, opts, parity);
    let mut brackets = Vec::new();
    for i in 1..n - 1 {
        if !(mags[i] <= mags[i - 1] && mags[i] <= mags[i + 1]) {
            continue;
        }
        let center = lambdas[i];
        let r = step;
        let room = gap_room(center, omega);
        let winding = if room > 1.5 * r || (axis == Axis::Real && center.re.abs() > 1.5 * r) {
            winding_rect(&f, center - C64::new(r, r), center + C64::new(r, r), 8).ok().map(|w| w.0)
        } else {
            None
        };
        let keep = match winding {
            Some(w) => w != 0,
            None => mags[i] < 1e-3,
        };
        if keep {
            brackets.push(Bracket { lo: lambdas[i - 1], hi: lambdas[i + 1], center, min_abs: mags[i], winding });
        }
    }
    ScanResult { samples, brackets }
}

#[derive(Debug, Clone, Copy)]
pub struct LocatedZero {
    pub lambda: C64,
    pub multiplicity: i32,
    pub radius: f64,
    pub abs_value: f64,
    pub iterations: usize,
}

/// Winding certificate around `center` with the smallest radius in `1e-4 .. 3e-2`
/// whose contour stays well above the numerical noise at the center.
pub fn certify<F>(f: &F, center: C64, room: f64) -> Result<(i32, f64)>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    let noise = f(center)?.norm().max(1e-13);
    let mut r: f64 = 1e-4;
    loop {
        let rr = r.min(0.5 * room);
        let (w, m) = winding_rect(f, center - C64::new(rr, rr), center + C64::new(rr, rr), 8)?;
        if m > 10.0 * noise || rr >= 3e-2 || rr < r {
            return Ok((w, rr));
        }
        r *= 10f64.sqrt();
    }
}

/// On the cut only the axis direction is available: a simple zero shows as a phase flip of `E` across it.
fn certify_embedded<F>(f: &F, z: C64, fz: C64, it: usize) -> Result<LocatedZero>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    let noise = fz.norm().max(1e-13);
    let mut r: f64 = 1e-4;
    loop {
        let (a, b) = (f(z - I * r)?, f(z + I * r)?);
        if a.norm().min(b.norm()) > 10.0 * noise || r >= 3e-2 {
            if (b / a).arg().abs() > std::f64::consts::FRAC_PI_2 {
                return Ok(LocatedZero { lambda: z, multiplicity: 1, radius: r, abs_value: fz.norm(), iterations: it });
            }
            return Err(GnError::NotAZero(fz.norm()));
        }
        r *= 10f64.sqrt();
    }
}

pub fn locate_zero(bracket: &Bracket, parity: Parity, pot: &Potentials, opts: &JostOptions) -> Result<LocatedZero> {
    let f = parity_fn(pot, opts, parity);
    let omega = pot.omega();
    let on_imag = bracket.center.re.abs() < 1e-14;
    let half = (bracket.hi - bracket.lo).norm() * 0.5;
    let room = gap_room(bracket.center, omega).min(if on_imag { f64::INFINITY } else { bracket.center.re.abs() });
    let m0 = bracket.winding.unwrap_or(1).max(1) as f64;
    let mut z = bracket.center;
    let mut fz = f(z)?;
    let mut it = 0;
    let mut converged = false;
    while it < 60 {
        it += 1;
        // along the axis, since the one-sided limits on the cut differ across it
        let h = if on_imag { I * (1e-6 * z.norm().max(1.0)) } else { C64::new(1e-6 * z.norm().max(1.0), 0.0) };
        let d = (f(z + h)? - f(z - h)?) / (2.0 * h);
        if d.norm() == 0.0 {
            break;
        }
        let mut step = -fz / d * m0;
        if on_imag {
            step = C64::new(0.0, step.im);
        }
        let mut accepted = false;
        for _ in 0..30 {
            let zn = z + step;
            let fzn = f(zn)?;
            if fzn.norm() <= fz.norm() {
                z = zn;
                fz = fzn;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || step.norm() < 1e-13 * z.norm().max(1.0) {
            converged = accepted || step.norm() < 1e-12;
            break;
        }
    }
    if !converged && (z - bracket.center).norm() > 4.0 * half.max(1e-3) {
        // fall back to golden-section on |f| along the bracket
        let (mut a, mut b) = (bracket.lo, bracket.hi);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - (b - a) * g;
        let mut d = a + (b - a) * g;
        let (mut fc, mut fd) = (f(c)?.norm(), f(d)?.norm());
        while (b - a).norm() > 1e-12 && it < 200 {
            it += 1;
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - (b - a) * g;
                fc = f(c)?.norm();
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + (b - a) * g;
                fd = f(d)?.norm();
            }
        }
        z = (a + b) * 0.5;
        fz = f(z)?;
    }
    if it >= 60 && !converged && fz.norm() > 1e-8 {
        return Err(GnError::NoConvergence(format!("locate_zero stalled at {z} with |E| = {:e}", fz.norm())));
    }
    let room = room.min(gap_room(z, omega));
    if on_imag && room <= 0.0 {
        return certify_embedded(&f, z, fz, it);
    }
    let (w, radius) = certify(&f, z, if room.is_finite() { room } else { 1.0 })?;
    if w == 0 {
        return Err(GnError::NotAZero(fz.norm()));
    }
    Ok(LocatedZero { lambda: z, multiplicity: w, radius, abs_value: fz.norm(), iterations: it })
}

#[derive(Debug, Clone)]
pub struct WindingCell {
    pub lo: C64,
    pub hi: C64,
    pub winding: i32,
    pub min_abs: f64,
}

#[derive(Debug, Clone)]
pub struct OffAxisScan {
    pub cells: Vec<WindingCell>,
    /// Certified zeros on the real axis inside the scanned strips.
    pub axis_zeros: Vec<LocatedZero>,
    /// Total winding not accounted for by the axis zeros.
    pub off_axis: i32,
}

/// Coarse winding scan of `re_min <= |Re λ| <= re_max`, `|Im λ| <= im_max`.
///
/// Each half plane is cut into an upper and a lower rectangle and a strip `|Im λ| <= strip`
/// around the real axis; the strip winding is compared with the certified real zeros inside it.
pub fn off_axis_scan(pot: &Potentials, re_min: f64, re_max: f64, im_max: f64, strip: f64, opts: &JostOptions) -> Result<OffAxisScan> {
    if !(0.0 < re_min && re_min < re_max && 0.0 < strip && strip < im_max) {
        return Err(GnError::InvalidParameter(format!("bad scan box re in [{re_min}, {re_max}], im <= {im_max}, strip {strip}")));
    }
    let f = parity_fn(pot, opts, Parity::Full);
    let mut cells = Vec::new();
    let mut axis_zeros: Vec<LocatedZero> = Vec::new();
    let mut off_axis = 0;
    for s in [1.0, -1.0] {
        let (a, b) = if s > 0.0 { (re_min, re_max) } else { (-re_max, -re_min) };
        let mut strip_w = 0;
        for (lo, hi) in [(-im_max, -strip), (-strip, strip), (strip, im_max)] {
            let (w, m) = winding_rect(&f, C64::new(a, lo), C64::new(b, hi), 16)?;
            cells.push(WindingCell { lo: C64::new(a, lo), hi: C64::new(b, hi), winding: w, min_abs: m });
            if lo == -strip {
                strip_w = w;
            } else {
                off_axis += w;
            }
        }
        let n = ((b - a) / 0.005).ceil() as usize + 1;
        let scan = scan_segment(pot, Axis::Real, a, b, n, Parity::Full, opts);
        let mut found = 0;
        for br in &scan.brackets {
            let z = locate_zero(br, Parity::Full, pot, opts)?;
            let dup = axis_zeros.iter().any(|y| (y.lambda - z.lambda).norm() < 1e-6);
            if !dup && z.lambda.re > a && z.lambda.re < b {
                found += z.multiplicity;
                axis_zeros.push(z);
            }
        }
        off_axis += strip_w - found;
    }
    Ok(OffAxisScan { cells, axis_zeros, off_axis })
}

/// Classifies a zero by which parity-restricted functions wind around it.
pub fn parity_classify_zero(lambda: C64, pot: &Potentials, opts: &JostOptions) -> Result<ParityClass> {
    let s = evans_eval(lambda, pot, opts)?;
    if s.e.norm() > 1e-6 {
        return Err(GnError::NotAZero(s.e.norm()));
    }
    let room = gap_room(lambda, pot.omega());
    let room = if room.is_finite() { room } else { lambda.re.abs().max(1e-3) };
    let wx = certify(&parity_fn(pot, opts, Parity::X), lambda, room).map(|w| w.0).unwrap_or(0);
    let wp = certify(&parity_fn(pot, opts, Parity::Xperp), lambda, room).map(|w| w.0).unwrap_or(0);
    match (wx > 0, wp > 0) {
        (true, true) => Ok(ParityClass::Both),
        (true, false) => Ok(ParityClass::X),
        (false, true) => Ok(ParityClass::Xperp),
        (false, false) => {
            let tol = 1e-8;
            let (ax, ap) = (s.e_x.norm(), s.e_xperp.norm());
            if ax < 10.0 * tol && ap < 10.0 * tol {
                Err(GnError::AmbiguousParity { ex: ax, exp: ap })
            } else if ax < ap {
                Ok(ParityClass::X)
            } else {
                Ok(ParityClass::Xperp)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ZeroCurve {
    pub k: i64,
    pub parity: Parity,
    pub omegas: Vec<f64>,
    pub lambdas: Vec<C64>,
    pub multiplicities: Vec<i32>,
    /// Why tracking stopped before `omega_to`, if it did.
    pub stop: Option<String>,
}

/// Predictor-corrector continuation of a zero in `omega`.
pub fn track_curve(
    k: i64,
    omega_from: f64,
    omega_to: f64,
    step: f64,
    seed: C64,
    parity: Parity,
    n: usize,
    opts: &JostOptions,
) -> Result<ZeroCurve> {
    let model = make_power_model(k)?;
    let step = step.abs() * (omega_to - omega_from).signum();
    let mut curve = ZeroCurve { k, parity, omegas: vec![], lambdas: vec![], multiplicities: vec![], stop: None };
    let solve_at = |omega: f64, guess: C64| -> Result<Option<LocatedZero>> {
        let wave = std::sync::Arc::new(solve_profile(&model, omega, default_x_max(omega), n)?);
        let pot = potentials(&wave);
        let h = 2e-3 * guess.norm().max(0.1);
        let dir = if guess.re.abs() < 1e-14 { I } else { C64::new(1.0, 0.0) };
        let br = Bracket { lo: guess - dir * h, hi: guess + dir * h, center: guess, min_abs: 0.0, winding: None };
        Ok(locate_zero(&br, parity, &pot, opts).ok())
    };
    let nsteps = ((omega_to - omega_from) / step).round().max(0.0) as usize;
    let mut guess = seed;
    // slope of the previous step, per unit omega
    let mut slope: Option<C64> = None;
    for i in 0..=nsteps {
        let omega = omega_from + step * i as f64;
        if gap_room(guess, omega) < 1e-3 {
            curve.stop = Some(format!("reached the essential spectrum edge at omega = {omega}"));
            break;
        }
        let tol = match slope {
            Some(s) => 0.05 + 0.5 * (s * step).norm(),
            None if i == 0 => 0.05,
            None => 0.02,
        };
        match solve_at(omega, guess)? {
            Some(z) if (z.lambda - guess).norm() < tol => {
                curve.omegas.push(omega);
                curve.lambdas.push(z.lambda);
                curve.multiplicities.push(z.multiplicity);
            }
            _ => {
                if curve.omegas.is_empty() {
                    return Err(GnError::LostZero(omega_from));
                }
                curve.stop = Some(format!("lost zero after omega = {}", curve.omegas.last().unwrap()));
                return Ok(curve);
            }
        }
        let m = curve.lambdas.len();
        if m >= 2 {
            slope = Some((curve.lambdas[m - 1] - curve.lambdas[m - 2]) / step);
        } else if nsteps > 0 {
            // first tangent from a short auxiliary step
            let h = step / 8.0;
            if let Some(z) = solve_at(omega + h, curve.lambdas[0])? {
                if (z.lambda - curve.lambdas[0]).norm() < 0.02 {
                    slope = Some((z.lambda - curve.lambdas[0]) / h);
                }
            }
        }
        guess = curve.lambdas[m - 1] + slope.unwrap_or(C64::new(0.0, 0.0)) * step;
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threshold {
    GapEdge,
    Embedded,
}

#[derive(Debug, Clone, Copy)]
pub struct ThresholdReport {
    pub lambda_threshold: C64,
    /// Normalized parity values `D = 2 E_X`, `2 E_Xperp` extrapolated to the threshold.
    pub d_x: C64,
    pub d_xperp: C64,
    /// `|D|` in the parity that carries no resonance for the free problem:
    /// `Xperp` at the gap edge, `X` at the embedded threshold.
    pub indicator: f64,
    pub resonance_suspected: bool,
}

/// Probes `i(1 -+ |omega|)` from inside the essential spectrum, extrapolating in `sqrt(offset)`.
pub fn threshold_probe(pot: &Potentials, which: Threshold, opts: &JostOptions) -> Result<ThresholdReport> {
    let w = pot.omega().abs();
    let (lt, sgn) = match which {
        Threshold::GapEdge => (1.0 - w, 1.0),
        Threshold::Embedded => (1.0 + w, -1.0),
    };
    let e1 = 1e-4;
    let e2 = 4e-4;
    let s1 = evans_eval(I * (lt + sgn * e1), pot, opts)?;
    let s2 = evans_eval(I * (lt + sgn * e2), pot, opts)?;
    // linear in sqrt(offset): sqrt ratio is 2
    let ext = |a: C64, b: C64| a * 2.0 - b;
    let d_x = ext(s1.e_x, s2.e_x) * 2.0;
    let d_xperp = ext(s1.e_xperp, s2.e_xperp) * 2.0;
    Ok(ThresholdReport {
        lambda_threshold: I * lt,
        d_x,
        d_xperp,
        indicator: if which == Threshold::GapEdge { d_xperp.norm() } else { d_x.norm() },
        resonance_suspected: d_x.norm().min(d_xperp.norm()) < 1e-3,
    })
}

/// `<Phi, i J Phi>` by trapezoid quadrature.
pub fn krein_charge(phi: &[Vec4], dx: f64) -> f64 {
    let mut acc = 0.0;
    for (i, p) in phi.iter().enumerate() {
        let jp = j4(p);
        let mut s = C64::new(0.0, 0.0);
        for r in 0..4 {
            s += p[r].conj() * I * jp[r];
        }
        let w = if i == 0 || i + 1 == phi.len() { 0.5 } else { 1.0 };
        acc += w * s.re;
    }
    acc * dx
}

#[derive(Debug, Clone, Copy)]
pub struct KreinSignature {
    pub sign: i32,
    pub charge: f64,
    pub norm_sqr: f64,
}

pub fn signature_of(phi: &[Vec4], dx: f64) -> Result<KreinSignature> {
    let charge = krein_charge(phi, dx);
    let n2: f64 = phi.iter().map(|p| p.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum::<f64>() * dx;
    if charge.abs() < 1e-6 * n2 {
        return Err(GnError::NullSignature(charge));
    }
    Ok(KreinSignature { sign: charge.signum() as i32, charge, norm_sqr: n2 })
}

/// L^2 eigenfunction at a located zero, on the wave's full grid.
pub fn eigenfunction(lambda: C64, pot: &Potentials, opts: &JostOptions) -> Result<Vec<Vec4>> {
    let x = &pot.x;
    let n = x.len();
    let mid = n / 2;
    let pts: Vec<f64> = x[mid..].iter().rev().copied().collect();
    let [f1, f2] = decaying_pair(lambda, pot, &pts, opts)?;
    let z = pts.len() - 1;
    let b = bold_beta;
    let m = DMatrix::<C64>::from_fn(4, 4, |r, c| match c {
        0 => f1.samples[z][r],
        1 => f2.samples[z][r],
        2 => -b(&f1.samples[z])[r],
        _ => -b(&f2.samples[z])[r],
    });
    let svd = m.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| GnError::NoConvergence("svd".into()))?;
    let (imin, _) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |a, (i, &s)| if s < a.1 { (i, s) } else { a });
    let c: Vec<C64> = (0..4).map(|k| vt[(imin, k)].conj()).collect();
    let mut phi = vec![[C64::new(0.0, 0.0); 4]; n];
    for (i, xi) in x.iter().enumerate() {
        if *xi >= 0.0 {
            let p = z - (i - mid);
            for r in 0..4 {
                phi[i][r] = c[0] * f1.samples[p][r] + c[1] * f2.samples[p][r];
            }
        } else {
            // g_j(x) = beta f_j(-x)
            let p = z - (n - 1 - i - mid);
            let g1 = b(&f1.samples[p]);
            let g2 = b(&f2.samples[p]);
            for r in 0..4 {
                phi[i][r] = c[2] * g1[r] + c[3] * g2[r];
            }
        }
    }
    Ok(phi)
}

pub fn krein_signature(lambda: C64, pot: &Potentials, opts: &JostOptions) -> Result<KreinSignature> {
    let phi = eigenfunction(lambda, pot, opts)?;
    signature_of(&phi, pot.dx())
}
