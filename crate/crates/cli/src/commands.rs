use std::path::Path;
use std::sync::Arc;

use gnlab_core::evans::*;
use gnlab_core::evolution::*;
use gnlab_core::jost::JostOptions;
use gnlab_core::linearization::{bold_beta, potentials, Potentials, Side};
use gnlab_core::model::make_power_model;
use gnlab_core::resolvent::{delta_identity_residual, green_eval, GreenData};
use gnlab_core::solitary_wave::*;
use gnlab_core::{GnError, C64};
use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{fmt_f64, Params};
use crate::output::{Artifacts, Cell, Table};
use crate::{CliError, Command, EvansCommand, EvolveCommand, GreenCommand, SpectrumCommand};

const I: C64 = C64::new(0.0, 1.0);

type Outcome = Result<String, CliError>;

pub fn dispatch(cmd: &Command, p: &mut Params, out: &Path) -> Outcome {
    match cmd {
        Command::Wave(_) => wave(p, out),
        Command::Evans(EvansCommand::Scan(_)) => evans_scan(p, out),
        Command::Evans(EvansCommand::Locate(_)) => evans_locate(p, out),
        Command::Evans(EvansCommand::Track(_)) => evans_track(p, out),
        Command::Spectrum(SpectrumCommand::Sweep(_)) => spectrum_sweep(p, out),
        Command::Green(GreenCommand::Check(_)) => green_check(p, out),
        Command::Evolve(EvolveCommand::Run(_)) => evolve(p, out),
        Command::Evolve(EvolveCommand::Boundary(_)) => boundary(p, out),
        Command::Selftest(_) => crate::selftest::selftest(p, out),
    }
}

fn omega_in_gap(p: &mut Params, key: &str, default: Option<f64>) -> Result<f64, CliError> {
    let om = p.f64(key, default)?;
    if !(om > 0.0 && om < 1.0) {
        return Err(GnError::InvalidParameter(format!("{key} must lie in (0,1), got {om}")).into());
    }
    Ok(om)
}

fn parity(p: &mut Params) -> Result<Parity, CliError> {
    Ok(match p.choice("parity", Some("full"), &["X", "Xperp", "full"])?.as_str() {
        "X" => Parity::X,
        "Xperp" => Parity::Xperp,
        _ => Parity::Full,
    })
}

fn parity_name(par: Parity) -> &'static str {
    match par {
        Parity::X => "X",
        Parity::Xperp => "Xperp",
        Parity::Full => "full",
    }
}

fn wave_pot(k: i64, omega: f64) -> Result<Potentials, CliError> {
    let m = make_power_model(k)?;
    Ok(potentials(&Arc::new(solve_wave(&m, omega, default_x_max(omega), DEFAULT_N)?)))
}

fn write(a: &Artifacts, stem: &str, p: &Params) -> Result<String, CliError> {
    let paths = a.write(stem, p)?;
    Ok(paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))
}

fn wave(p: &mut Params, out: &Path) -> Outcome {
    let k = p.int("k", Some(2))?;
    let omega = omega_in_gap(p, "omega", Some(0.3))?;
    let x_max = p.f64("x_max", Some(default_x_max(omega)))?;
    let n = p.count("n", Some(DEFAULT_N))?;
    p.finish()?;
    let model = make_power_model(k)?;
    let w = solve_wave(&model, omega, x_max, n)?;
    let (q, en, dq) = charge_energy(&w)?;
    let rate = decay_check(&w)?;
    let (x, v, u) = w.full_grid();
    let mut t = Table::new("wave", &["x", "v", "u", "s"]);
    for i in 0..x.len() {
        t.push(vec![x[i].into(), v[i].into(), u[i].into(), (v[i] * v[i] - u[i] * u[i]).into()]);
    }
    let mut a = Artifacts::new(out, "wave", p);
    a.add(t);
    a.note("turning_point", w.gamma);
    a.note("charge", q);
    a.note("energy", en);
    a.note("dq_domega", dq);
    a.note("decay_rate", rate);
    a.note("delta", delta(omega));
    let files = write(&a, "wave", p)?;
    Ok(format!("wave k={k} omega={}: Q={}, dQ/domega={}, decay {} -> {files}", fmt_f64(omega), fmt_f64(q), fmt_f64(dq), fmt_f64(rate)))
}

fn evans_scan(p: &mut Params, out: &Path) -> Outcome {
    let k = p.int("k", Some(2))?;
    let omega = omega_in_gap(p, "omega", Some(0.3))?;
    let axis = match p.choice("axis", Some("imag"), &["imag", "real"])?.as_str() {
        "real" => Axis::Real,
        _ => Axis::Imaginary,
    };
    let from = p.f64("from", Some(0.01))?;
    let to = p.f64("to", Some(1.4))?;
    let n = p.count("n", Some(400))?;
    let par = parity(p)?;
    p.finish()?;
    let pot = wave_pot(k, omega)?;
    let r = scan_segment(&pot, axis, from, to, n, par, &JostOptions::default());
    let mut t = Table::new("evans_scan", &["re", "im", "abs", "arg", "status"]);
    let mut failures = 0;
    for s in &r.samples {
        match s {
            Ok(s) => {
                let e = s.value(par);
                t.push(vec![s.lambda.re.into(), s.lambda.im.into(), e.norm().into(), e.arg().into(), "ok".into()]);
            }
            Err(e) => {
                failures += 1;
                t.push(vec![Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, e.to_string().into()]);
            }
        }
    }
    let mut b = Table::new("evans_brackets", &["re", "im", "min_abs", "winding"]);
    for br in &r.brackets {
        b.push(vec![br.center.re.into(), br.center.im.into(), br.min_abs.into(), br.winding.map_or(Cell::Empty, |w| Cell::Int(w as i64))]);
    }
    let mut a = Artifacts::new(out, "evans scan", p);
    a.add(t);
    a.add(b);
    a.note("brackets", r.brackets.len());
    a.note("failed_samples", failures);
    let files = write(&a, "evans_scan", p)?;
    let list: Vec<String> = r.brackets.iter().map(|b| format!("{}{:+}i", fmt_f64(b.center.re), b.center.im)).collect();
    Ok(format!("evans scan: {} bracket(s) [{}] -> {files}", r.brackets.len(), list.join(", ")))
}

fn evans_locate(p: &mut Params, out: &Path) -> Outcome {
    let k = p.int("k", Some(2))?;
    let omega = omega_in_gap(p, "omega", Some(0.3))?;
    let re = p.f64("re", Some(0.0))?;
    let im = p.f64("im", None)?;
    let par = parity(p)?;
    let h = p.f64("halfwidth", Some(1e-3))?;
    p.finish()?;
    let pot = wave_pot(k, omega)?;
    let center = C64::new(re, im);
    let dir = if re == 0.0 { I } else { C64::new(1.0, 0.0) };
    let min_abs = evans_eval(center, &pot, &JostOptions::default())?.value(par).norm();
    let br = Bracket { lo: center - dir * h, hi: center + dir * h, center, min_abs, winding: None };
    let z = locate_zero(&br, par, &pot, &JostOptions::default())?;
    let class = match parity_classify_zero(z.lambda, &pot, &JostOptions::default()) {
        Ok(c) => format!("{c:?}"),
        Err(e) => format!("unclassified: {e}"),
    };
    let mut t = Table::new("evans_locate", &["re", "im", "multiplicity", "radius", "abs", "iterations", "class"]);
    t.push(vec![
        z.lambda.re.into(),
        z.lambda.im.into(),
        Cell::Int(z.multiplicity as i64),
        z.radius.into(),
        z.abs_value.into(),
        Cell::Int(z.iterations as i64),
        class.clone().into(),
    ]);
    let mut a = Artifacts::new(out, "evans locate", p);
    a.add(t);
    a.tolerance("certificate_radius", z.radius);
    let files = write(&a, "evans_locate", p)?;
    Ok(format!("evans locate: zero {}{:+}i (multiplicity {}, {class}) -> {files}", fmt_f64(z.lambda.re), z.lambda.im, z.multiplicity))
}

fn evans_track(p: &mut Params, out: &Path) -> Outcome {
    let k = p.int("k", Some(2))?;
    let from = omega_in_gap(p, "from", None)?;
    let to = omega_in_gap(p, "to", None)?;
    let step = p.f64("step", Some(0.01))?;
    let seed = C64::new(p.f64("seed_re", Some(0.0))?, p.f64("seed_im", None)?);
    let par = parity(p)?;
    let n = p.count("n", Some(4096))?;
    p.finish()?;
    let c = track_curve(k, from, to, step, seed, par, n, &JostOptions::default())?;
    let mut t = Table::new("evans_track", &["omega", "re", "im", "multiplicity"]);
    for i in 0..c.omegas.len() {
        t.push(vec![c.omegas[i].into(), c.lambdas[i].re.into(), c.lambdas[i].im.into(), Cell::Int(c.multiplicities[i] as i64)]);
    }
    let mut a = Artifacts::new(out, "evans track", p);
    a.add(t);
    a.note("stop", c.stop.clone());
    let files = write(&a, "evans_track", p)?;
    let stop = c.stop.map(|s| format!(", stopped: {s}")).unwrap_or_default();
    Ok(format!("evans track: {} point(s){stop} -> {files}", c.omegas.len()))
}

struct SweepRow {
    omega: f64,
    zeros: Vec<(Parity, LocatedZero)>,
    failures: Vec<(Parity, String)>,
}

fn sweep_one(k: i64, omega: f64, parities: &[Parity], n: usize) -> SweepRow {
    let opts = JostOptions::default();
    let mut row = SweepRow { omega, zeros: Vec::new(), failures: Vec::new() };
    let pot = match wave_pot(k, omega) {
        Ok(p) => p,
        Err(e) => {
            row.failures = parities.iter().map(|&par| (par, e.to_string())).collect();
            return row;
        }
    };
    for &par in parities {
        let scans = [
            scan_segment(&pot, Axis::Imaginary, 0.005, 1.0 + omega - 0.005, n, par, &opts),
            scan_segment(&pot, Axis::Real, 0.0008, 0.59, n.div_ceil(3).max(3), par, &opts),
        ];
        let mut found: Vec<LocatedZero> = Vec::new();
        for s in &scans {
            if s.samples.iter().any(|x| x.is_err()) {
                row.failures.push((par, "scan samples failed".into()));
            }
            for b in &s.brackets {
                match locate_zero(b, par, &pot, &opts) {
                    Ok(z) if !found.iter().any(|y| (y.lambda - z.lambda).norm() < 1e-6) => found.push(z),
                    Ok(_) => {}
                    Err(GnError::NotAZero(_)) => {}
                    Err(e) => row.failures.push((par, format!("near {}: {e}", b.center))),
                }
            }
        }
        row.zeros.extend(found.into_iter().map(|z| (par, z)));
    }
    row
}

fn spectrum_sweep(p: &mut Params, out: &Path) -> Outcome {
    let k = p.int("k", Some(2))?;
    let omegas = if let Ok(v) = p.f64_list("omegas", None) {
        v
    } else {
        let from = p.f64("omega_from", Some(0.05))?;
        let to = p.f64("omega_to", Some(0.95))?;
        let step = p.f64("omega_step", Some(0.05))?;
        if !(step > 0.0) || to < from {
            return Err(GnError::InvalidParameter("need omega_step > 0 and omega_to >= omega_from".into()).into());
        }
        let m = ((to - from) / step + 1e-9).floor() as usize;
        (0..=m).map(|i| from + step * i as f64).collect()
    };
    for &om in &omegas {
        if !(om > 0.0 && om < 1.0) {
            return Err(GnError::InvalidParameter(format!("omegas must lie in (0,1), got {om}")).into());
        }
    }
    let parities: Vec<Parity> = p
        .choice_list("parities", "X,Xperp", &["X", "Xperp", "full"])?
        .iter()
        .map(|s| match s.as_str() {
            "X" => Parity::X,
            "Xperp" => Parity::Xperp,
            _ => Parity::Full,
        })
        .collect();
    let n = p.count("n", Some(400))?;
    p.finish()?;
    // ordered by input index, whatever the completion order
    let rows: Vec<SweepRow> = omegas.par_iter().map(|&om| sweep_one(k, om, &parities, n)).collect();
    let mut a = Artifacts::new(out, "spectrum sweep", p);
    let mut total = 0;
    let mut failed = 0;
    for &par in &parities {
        let name = format!("spectrum_{}", parity_name(par));
        let mut t = Table::new(&name, &["omega", "re", "im", "multiplicity", "gap_edge", "embedded_edge", "status"]);
        for r in &rows {
            let zs: Vec<&LocatedZero> = r.zeros.iter().filter(|(q, _)| *q == par).map(|(_, z)| z).collect();
            let fails: Vec<&String> = r.failures.iter().filter(|(q, _)| *q == par).map(|(_, m)| m).collect();
            let status = if fails.is_empty() { "ok".to_string() } else { format!("partial: {}", fails.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("; ")) };
            if !fails.is_empty() {
                failed += 1;
            }
            let edges = |t: &mut Table, re: Cell, im: Cell, m: Cell, st: String| {
                t.push(vec![r.omega.into(), re, im, m, (1.0 - r.omega).into(), (1.0 + r.omega).into(), st.into()]);
            };
            if zs.is_empty() {
                edges(&mut t, Cell::Empty, Cell::Empty, Cell::Empty, if fails.is_empty() { "no_zero".into() } else { status.clone() });
            }
            for z in zs {
                total += 1;
                edges(&mut t, z.lambda.re.into(), z.lambda.im.into(), Cell::Int(z.multiplicity as i64), status.clone());
            }
        }
        a.add(t);
    }
    a.note("omegas", omegas.len());
    a.note("zeros", total);
    a.note("flagged_rows", failed);
    let files = write(&a, "spectrum", p)?;
    Ok(format!("spectrum sweep k={k}: {} frequencies, {total} zero(s), {failed} flagged row(s) -> {files}", omegas.len()))
}

fn green_check(p: &mut Params, out: &Path) -> Outcome {
    let k = p.int("k", Some(2))?;
    let omega = omega_in_gap(p, "omega", Some(0.3))?;
    let lambda = C64::new(p.f64("re", Some(0.0))?, p.f64("im", Some(0.45))?);
    let side = match p.choice("side", Some("minus"), &["minus", "plus"])?.as_str() {
        "plus" => Side::Plus,
        _ => Side::Minus,
    };
    p.finish()?;
    let pot = wave_pot(k, omega)?;
    let opts = JostOptions::default();
    let e2 = evans_eval(lambda, &pot, &opts)?.e.norm_sqr();
    let ys = [-3.0, -1.0, 0.0, 1.0, 3.0];
    let gd = GreenData::on_points(lambda, &pot, side, &ys, &opts)?;
    let det = ys.iter().enumerate().map(|(i, _)| (gd.delta(i).determinant().norm() - e2).abs() / e2).fold(0.0, f64::max);
    let full = GreenData::new(lambda, &pot, side, &opts)?;
    let mut delta: f64 = 0.0;
    let mut jump: f64 = 0.0;
    for y in [-2.5, -0.5, 0.0, 1.5] {
        let j = full.x.iter().position(|x| *x >= y).unwrap_or(full.x.len() - 1);
        let (r, jp) = delta_identity_residual(&full, &pot, j, 200);
        delta = delta.max(r);
        jump = jump.max(jp);
    }
    let b = Matrix4::from_diagonal(&Vector4::from(bold_beta(&[C64::new(1.0, 0.0); 4])));
    let g = green_eval(1.0, 0.5, lambda, &pot, side, &opts)?;
    let h = green_eval(-1.0, -0.5, lambda, &pot, side, &opts)?;
    let refl = (h - b * g * b).norm() / g.norm().max(1.0);
    let gamma = (gd.gamma.determinant() + 1.0).norm();
    let checks = [("det_delta_vs_evans_squared", det, 1e-8), ("det_gamma_plus_one", gamma, 1e-12), ("delta_identity", delta, 1e-4), ("jump", jump, 1e-10), ("reflection", refl, 1e-8)];
    let mut t = Table::new("green_check", &["check", "value", "tolerance", "pass"]);
    let mut a = Artifacts::new(out, "green check", p);
    let mut bad = Vec::new();
    for (name, v, tol) in checks {
        let ok = v <= tol;
        if !ok {
            bad.push(name);
        }
        t.push(vec![name.into(), v.into(), tol.into(), if ok { "yes" } else { "no" }.into()]);
        a.tolerance(name, tol);
    }
    a.add(t);
    a.note("failed", json!(bad));
    let files = write(&a, "green_check", p)?;
    if !bad.is_empty() {
        return Err(CliError::Failed(format!("green check failed: {} ({files})", bad.join(", "))));
    }
    Ok(format!("green check at lambda={}{:+}i: all {} checks pass -> {files}", fmt_f64(lambda.re), lambda.im, checks.len()))
}

fn evolve_config(p: &mut Params, t_default: f64) -> Result<EvolveConfig, CliError> {
    let k = p.int("k", Some(2))?;
    let omega0 = omega_in_gap(p, "omega0", Some(0.3))?;
    let eps = p.f64("eps", Some(1e-2))?;
    let l = p.f64("l", Some(200.0))?;
    let n = p.count("n", Some(2048))?;
    let dt = p.f64("dt", Some(0.01))?;
    let t_end = p.f64("t_end", Some(t_default))?;
    let mut c = EvolveConfig::new(k, omega0, eps, l, n, dt, t_end);
    c.extract_every = p.f64("extract_every", Some(0.5))?;
    c.damping = p.f64("damping", Some(0.0))?;
    if !(c.extract_every > 0.0 && t_end >= 0.0 && c.damping >= 0.0) {
        return Err(GnError::InvalidParameter("need extract_every > 0, t_end >= 0, damping >= 0".into()).into());
    }
    Ok(c)
}

fn evolve(p: &mut Params, out: &Path) -> Outcome {
    let cfg = evolve_config(p, 20.0)?;
    p.finish()?;
    let o = evolve_run(&cfg)?;
    let tr = &o.track;
    let mut t = Table::new("evolve", &["t", "omega", "gamma", "Q", "E", "weighted_Z", "H1_Z", "parity_err"]);
    for i in 0..tr.times.len() {
        t.push(vec![
            tr.times[i].into(),
            tr.omega[i].into(),
            tr.gamma[i].into(),
            tr.q[i].into(),
            tr.energy[i].into(),
            tr.weighted_z[i].into(),
            tr.h1_z[i].into(),
            tr.parity_err[i].into(),
        ]);
    }
    let mut a = Artifacts::new(out, "evolve run", p);
    a.add(t);
    a.note("perturbation_h1", o.perturbation_h1);
    a.note("tube_exits", json!(tr.tube_exits));
    a.note("max_orthogonality_residual", tr.max_orth);
    a.note("steps", o.state.steps);
    a.tolerance("orthogonality", 1e-8);
    let files = write(&a, "evolve", p)?;
    let last = tr.omega.last().copied().unwrap_or(f64::NAN);
    Ok(format!("evolve run: {} extractions, final omega {}, {} tube exit(s) -> {files}", tr.times.len(), fmt_f64(last), tr.tube_exits.len()))
}

fn boundary(p: &mut Params, out: &Path) -> Outcome {
    let cfg = evolve_config(p, 10_000.0)?;
    let ls = p.f64_list("ls", Some(vec![100.0, 200.0, 400.0]))?;
    p.finish()?;
    if ls.iter().any(|l| !(*l > 0.0)) {
        return Err(GnError::InvalidParameter("box lengths must be positive".into()).into());
    }
    let rows = boundary_scaling_experiment(&cfg, &ls);
    let mut t = Table::new("boundary", &["L", "onset", "status"]);
    let mut onsets = Vec::new();
    for (l, r) in &rows {
        match r {
            Ok(t0) => {
                t.push(vec![(*l).into(), (*t0).into(), "onset".into()]);
                onsets.push(fmt_f64(*t0));
            }
            Err(GnError::NoArtifact(_)) => {
                t.push(vec![(*l).into(), Cell::Empty, "no_artifact".into()]);
                onsets.push("none".into());
            }
            Err(e) => return Err(e.clone().into()),
        }
    }
    let mut a = Artifacts::new(out, "evolve boundary", p);
    a.add(t);
    let files = write(&a, "boundary", p)?;
    Ok(format!("evolve boundary: onsets [{}] -> {files}", onsets.join(", ")))
}
