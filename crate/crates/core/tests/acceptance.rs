use std::sync::Arc;
use std::time::{Duration, Instant};

use gnlab_core::evans::*;
use gnlab_core::evolution::*;
use gnlab_core::jost::{connection_matrices, JostOptions};
use gnlab_core::linearization::*;
use gnlab_core::model::make_power_model;
use gnlab_core::resolvent::*;
use gnlab_core::solitary_wave::{default_x_max, solve_wave, DEFAULT_N};
use gnlab_core::C64;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

const I: C64 = C64::new(0.0, 1.0);

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn pot_n(k: i64, omega: f64, n: usize) -> Result<Potentials, String> {
    let m = make_power_model(k).map_err(|e| e.to_string())?;
    let w = solve_wave(&m, omega, default_x_max(omega), n).map_err(|e| e.to_string())?;
    Ok(potentials(&Arc::new(w)))
}

fn pot(k: i64, omega: f64) -> Result<Potentials, String> {
    pot_n(k, omega, DEFAULT_N)
}

fn opts() -> JostOptions {
    JostOptions::default()
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn kernel_and_jordan() -> Outcome {
    let p = pot_n(2, 0.3, 8192)?;
    let (_, r) = kernel_vectors_checked(&p).map_err(s)?;
    ensure(r.jl_jphi <= 1e-7 * r.phi_norm && r.jl_dxphi <= 1e-7 * r.phi_norm, || format!("kernel residuals {r:?}"))?;
    ensure(r.chain1 <= 1e-5 && r.chain2 <= 1e-5, || format!("Jordan residuals {r:?}"))?;
    Ok(format!("|JLJphi| {:.1e}, |JLdxphi| {:.1e}, chain {:.1e} / {:.1e}", r.jl_jphi, r.jl_dxphi, r.chain1, r.chain2))
}

fn two_omega_eigenvalues() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut min_ex = f64::INFINITY;
    for k in [2, 3] {
        for omega in [0.1, 0.2, 0.3] {
            let p = pot(k, omega)?;
            let scan = scan_segment(&p, Axis::Imaginary, 0.01, 0.99 - omega, 400, Parity::Xperp, &opts());
            let target = I * (2.0 * omega);
            let b = scan
                .brackets
                .iter()
                .min_by(|a, b| (a.center - target).norm().total_cmp(&(b.center - target).norm()))
                .ok_or_else(|| format!("k={k} omega={omega}: no Xperp bracket"))?;
            let z = locate_zero(b, Parity::Xperp, &p, &opts()).map_err(s)?;
            let err = (z.lambda - target).norm();
            ensure(err <= 1e-4, || format!("k={k} omega={omega}: zero at {} (error {err:.1e})", z.lambda))?;
            let class = parity_classify_zero(z.lambda, &p, &opts()).map_err(s)?;
            ensure(class == ParityClass::Xperp, || format!("k={k} omega={omega}: class {class:?}"))?;
            let ex = evans_eval(z.lambda, &p, &opts()).map_err(s)?.e_x.norm();
            ensure(ex >= 1e-3, || format!("k={k} omega={omega}: |E_X| = {ex:.1e}"))?;
            worst = worst.max(err);
            min_ex = min_ex.min(ex);
        }
    }
    Ok(format!("max |lambda - 2 omega i| {worst:.1e}, min |E_X| {min_ex:.3}"))
}

fn large_lambda_normalization() -> Outcome {
    let mut range = (f64::INFINITY, 0.0f64);
    for k in [1, 2, 3] {
        for omega in [0.2, 0.3] {
            let p = pot(k, omega)?;
            for big in [30.0, 50.0, 80.0] {
                let e = evans_eval(I * big, &p, &opts()).map_err(s)?.e.norm();
                ensure((0.9..=1.1).contains(&e), || format!("k={k} omega={omega} Lambda={big}: |E| = {e}"))?;
                range = (range.0.min(e), range.1.max(e));
            }
        }
    }
    Ok(format!("|E| in [{:.4}, {:.4}]", range.0, range.1))
}

fn axis_zeros_besides_origin(p: &Potentials, to: f64, parity: Parity) -> Result<Vec<C64>, String> {
    let scan = scan_segment(p, Axis::Imaginary, 0.0, to, 600, parity, &opts());
    let mut zs = Vec::new();
    for b in &scan.brackets {
        if b.center.norm() < 0.02 {
            continue;
        }
        if let Ok(z) = locate_zero(b, parity, p, &opts()) {
            if z.lambda.norm() > 1e-3 {
                zs.push(z.lambda);
            }
        }
    }
    Ok(zs)
}

fn stability_window() -> Outcome {
    let z15 = axis_zeros_besides_origin(&pot(2, 0.15)?, 1.15, Parity::X)?;
    ensure(!z15.is_empty(), || "k=2 omega=0.15: no X-parity zero".into())?;
    let z28 = axis_zeros_besides_origin(&pot(2, 0.28)?, 1.28, Parity::X)?;
    ensure(z28.is_empty(), || format!("k=2 omega=0.28: X-parity zeros {z28:?}"))?;
    for omega in [0.2, 0.3] {
        let z = axis_zeros_besides_origin(&pot(3, omega)?, 1.0 + omega, Parity::X)?;
        ensure(z.is_empty(), || format!("k=3 omega={omega}: X-parity zeros {z:?}"))?;
    }
    let p = pot(3, 0.9)?;
    let scan = scan_segment(&p, Axis::Real, 0.0008, 0.59, 200, Parity::Full, &opts());
    let b = scan.brackets.first().ok_or("k=3 omega=0.9: no real bracket")?;
    let z = locate_zero(b, Parity::Full, &p, &opts()).map_err(s)?;
    ensure(z.lambda.re > 0.0008 && z.lambda.re < 0.59 && z.lambda.im.abs() < 1e-8, || format!("real zero at {}", z.lambda))?;
    Ok(format!("k=2: X zero {:.5}i at 0.15, none at 0.28; k=3: none at 0.2, 0.3, real zero {:.5} at 0.9", z15[0].im, z.lambda.re))
}

fn resolvent_identities() -> Outcome {
    let p = pot(2, 0.3)?;
    let mut rng = StdRng::seed_from_u64(20);
    let mut worst_det: f64 = 0.0;
    let mut worst_gamma: f64 = 0.0;
    for _ in 0..20 {
        let lam = if rng.random_range(0.0..1.0) < 0.5 {
            I * rng.random_range(0.05..3.0)
        } else {
            C64::new(rng.random_range(0.01..0.5), rng.random_range(-2.0..2.0))
        };
        let y: f64 = rng.random_range(-4.0..4.0);
        let e = evans_eval(lam, &p, &opts()).map_err(s)?.e.norm_sqr();
        let gd = GreenData::on_points(lam, &p, Side::Minus, &[-y.abs(), 0.0, y.abs()], &opts()).map_err(s)?;
        let d = gd.delta(if y < 0.0 { 0 } else { 2 }).determinant().norm();
        worst_det = worst_det.max((d - e).abs() / e);
        let b = connection_matrices(lam, &p, false, &opts()).map_err(s)?.b;
        let g = gamma_matrix(&b).map_err(s)?;
        worst_gamma = worst_gamma.max((g.determinant() + 1.0).norm()).max((b[(1, 0)] * g[(0, 0)] + b[(1, 1)] * g[(1, 0)]).norm() / b.norm());
    }
    ensure(worst_det <= 1e-8, || format!("|det Delta| vs |E|^2: {worst_det:.1e}"))?;
    ensure(worst_gamma <= 1e-12, || format!("Gamma identities: {worst_gamma:.1e}"))?;

    let mut worst_delta: f64 = 0.0;
    for lam in [I * 0.45, I * 1.1, C64::new(0.2, 0.3)] {
        let gd = GreenData::new(lam, &p, Side::Minus, &opts()).map_err(s)?;
        for y in [-5.0, -1.3, 0.0, 0.7, 4.2] {
            let j = gd.x.iter().position(|x| *x >= y).unwrap_or(gd.x.len() - 1);
            let (res, _) = delta_identity_residual(&gd, &p, j, 200);
            worst_delta = worst_delta.max(res);
        }
    }
    ensure(worst_delta <= 1e-4, || format!("delta identity residual {worst_delta:.1e}"))?;

    let free = Potentials::scaled(&Arc::new(solve_wave(&make_power_model(2).map_err(s)?, 0.3, default_x_max(0.3), DEFAULT_N).map_err(s)?), 0.0, 0.0);
    let pts: Vec<f64> = (-8..=8).map(|i| i as f64 * 0.75).collect();
    let mut worst_free: f64 = 0.0;
    for lam in [I * 0.45, C64::new(0.3, 0.1), C64::new(0.05, 0.0)] {
        let gd = GreenData::on_points(lam, &free, Side::Minus, &pts, &opts()).map_err(s)?;
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                worst_free = worst_free.max((gd.kernel(i, j) - free_green(pts[i], pts[j], lam, 0.3)).norm());
            }
        }
    }
    ensure(worst_free <= 1e-8, || format!("free Green's function error {worst_free:.1e}"))?;
    Ok(format!("det {worst_det:.1e}, Gamma {worst_gamma:.1e}, delta {worst_delta:.1e}, free {worst_free:.1e}"))
}

fn no_complex_spectrum() -> Outcome {
    let mut axis = 0;
    for k in [1, 2, 3] {
        for omega in [0.1, 0.2, 0.3, 0.4, 0.5] {
            let p = pot(k, omega)?;
            let r = off_axis_scan(&p, 0.01, 0.59, 2.5, 0.01, &opts()).map_err(s)?;
            ensure(r.off_axis == 0, || format!("k={k} omega={omega}: off-axis winding {}", r.off_axis))?;
            axis += r.axis_zeros.len();
        }
    }
    Ok(format!("15 parameter pairs, zero off-axis winding, {axis} certified real-axis zeros"))
}

fn evolution_conservation() -> Outcome {
    let grid = Grid::new(60.0, 512).map_err(s)?;
    let model = make_power_model(2).map_err(s)?;
    let fam = WaveFamily::new(&model, 0.3, &grid).map_err(s)?;
    let (mut st, _) = init_state(&fam, 0.3, &grid, &PerturbationSpec::standard(0.1), 0.05).map_err(s)?;
    let q0 = charge(&grid, &st);
    let mut parity: f64 = 0.0;
    for _ in 0..10_000 {
        step(&grid, &model, &mut st).map_err(s)?;
        parity = parity.max(parity_error(&grid, &st));
    }
    let drift = (charge(&grid, &st) - q0).abs() / q0;
    ensure(drift <= 1e-10, || format!("charge drift {drift:.1e}"))?;
    ensure(parity <= 1e-12, || format!("parity error {parity:.1e}"))?;

    let pert = PerturbationSpec::standard(0.2);
    let run = |dt: f64| -> Result<EvolutionState, String> {
        let (mut st, _) = init_state(&fam, 0.3, &grid, &pert, dt).map_err(s)?;
        for _ in 0..(4.0 / dt).round() as usize {
            step(&grid, &model, &mut st).map_err(s)?;
        }
        Ok(st)
    };
    let dist = |a: &EvolutionState, b: &EvolutionState| {
        let t: f64 = a.psi1.iter().zip(&b.psi1).chain(a.psi2.iter().zip(&b.psi2)).map(|(p, q)| (p - q).norm_sqr()).sum();
        t.sqrt()
    };
    let (c, h, r) = (run(0.04)?, run(0.02)?, run(0.005)?);
    let ratio = dist(&c, &r) / dist(&h, &r);
    ensure((ratio - 4.0).abs() <= 0.3, || format!("Richardson ratio {ratio:.3}"))?;
    Ok(format!("charge drift {drift:.1e} per 1e4 steps, parity {parity:.1e}, Richardson {ratio:.3}"))
}

fn window_variation(tr: &ModulationTrack, a: f64, b: f64) -> f64 {
    let (lo, hi) = tr
        .times
        .iter()
        .zip(&tr.omega)
        .filter(|(t, _)| **t >= a && **t <= b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (_, o)| (l.min(*o), h.max(*o)));
    hi - lo
}

fn asymptotic_stability() -> Outcome {
    let mut cfg = EvolveConfig::new(2, 0.3, 1e-2, 200.0, 2048, 0.0025, 200.0);
    cfg.damping = 5.0;
    let out = evolve_run(&cfg).map_err(s)?;
    let tr = &out.track;
    ensure(tr.tube_exits.is_empty(), || format!("left the tube at {:?}", tr.tube_exits))?;
    let var: Vec<f64> = (0..4).map(|w| window_variation(tr, 50.0 * w as f64, 50.0 * (w + 1) as f64)).collect();
    ensure(var.windows(2).all(|p| p[1] < p[0]), || format!("omega window variation {var:?}"))?;
    let n = tr.omega.len();
    let (o0, mid, end) = (tr.omega[0], tr.omega[n / 2], tr.omega[n - 1]);
    ensure((end - mid).abs() < (mid - o0).abs(), || format!("omega(0) {o0}, omega(T/2) {mid}, omega(T) {end}"))?;
    let peak = tr.weighted_z.iter().cloned().fold(0.0, f64::max);
    let last = *tr.weighted_z.last().unwrap();
    let decay = peak / last;
    ensure(decay >= 3.0, || format!("weighted Z decay factor {decay:.2}"))?;
    ensure(tr.max_orth <= 1e-8, || format!("orthogonality residual {:.1e}", tr.max_orth))?;

    let mut cfg = EvolveConfig::new(3, 0.9, 1e-3, 200.0, 2048, 0.04, 150.0);
    cfg.damping = 5.0;
    let out = evolve_run(&cfg).map_err(s)?;
    let tr = &out.track;
    let z0 = tr.h1_z[0];
    let grown = tr.h1_z.iter().cloned().fold(0.0, f64::max) / z0;
    ensure(grown >= 10.0, || format!("instability growth {grown:.1}"))?;
    Ok(format!("omega variation {:.1e} -> {:.1e}, weighted Z decay x{decay:.1}; k=3 growth x{grown:.0}", var[0], var[3]))
}

fn boundary_artifact() -> Outcome {
    let mut base = EvolveConfig::new(1, 0.5, 3e-2, 100.0, 250, 0.2, 10_000.0);
    base.extract_every = 2.0;
    let rows = boundary_scaling_experiment(&base, &[100.0, 200.0, 400.0]);
    let mut onsets = Vec::new();
    for (l, r) in &rows {
        onsets.push(*r.as_ref().map_err(|e| format!("L={l}: {e}"))?);
    }
    ensure(onsets.windows(2).all(|p| p[1] > p[0]), || format!("onsets {onsets:?}"))?;
    Ok(format!("onsets {:.0} / {:.0} / {:.0} for L = 100 / 200 / 400", onsets[0], onsets[1], onsets[2]))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        ("kernel and Jordan residuals", kernel_and_jordan, Duration::from_secs(30)),
        ("2 omega i eigenvalues", two_omega_eigenvalues, Duration::from_secs(180)),
        ("large lambda normalization", large_lambda_normalization, Duration::from_secs(60)),
        ("stability window", stability_window, Duration::from_secs(600)),
        ("resolvent identities", resolvent_identities, Duration::from_secs(120)),
        ("no off-axis spectrum", no_complex_spectrum, Duration::from_secs(900)),
        ("evolution conservation and order", evolution_conservation, Duration::from_secs(300)),
        ("asymptotic stability check", asymptotic_stability, Duration::from_secs(1200)),
        ("boundary artifact scaling", boundary_artifact, Duration::from_secs(900)),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let el = t.elapsed();
        let out = out.and_then(|m| if el <= *budget { Ok(m) } else { Err(format!("{m}; over budget {el:.1?} > {budget:?}")) });
        match out {
            Ok(m) => println!("criterion {}: PASS {name} ({m}) [{el:.1?}]", i + 1),
            Err(m) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({m}) [{el:.1?}]", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
