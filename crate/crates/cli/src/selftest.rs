//! Invariant suite at k=2, omega=0.3.

use std::path::Path;
use std::sync::Arc;

use gnlab_core::evans::{evans_eval, locate_zero, Bracket, Parity};
use gnlab_core::evolution::{charge, init_state, parity_error, step, Grid, PerturbationSpec, WaveFamily};
use gnlab_core::jost::{connection_matrices, JostOptions};
use gnlab_core::linearization::*;
use gnlab_core::model::{dirac_matrices, make_power_model};
use gnlab_core::resolvent::{gamma_matrix, GreenData};
use gnlab_core::solitary_wave::{default_x_max, solve_wave, DEFAULT_N};
use gnlab_core::{GnError, C64};
use nalgebra::{Matrix2, Matrix4};
use sha2::{Digest, Sha256};

use crate::config::{fmt_f64, Params};
use crate::output::{Artifacts, Table};
use crate::CliError;

const K: i64 = 2;
const OMEGA: f64 = 0.3;
const I: C64 = C64::new(0.0, 1.0);

struct Check {
    name: &'static str,
    value: f64,
    tol: f64,
    note: String,
}

fn record(out: &mut Vec<Check>, name: &'static str, tol: f64, r: Result<f64, GnError>) {
    let (value, note) = match r {
        Ok(v) if v.is_nan() => (f64::INFINITY, "not computable".to_string()),
        Ok(v) => (v, String::new()),
        Err(e) => (f64::INFINITY, e.to_string()),
    };
    out.push(Check { name, value, tol, note });
}

fn matrix_identities() -> f64 {
    let ms = dirac_matrices();
    let i2 = Matrix2::<C64>::identity();
    let i4 = Matrix4::<C64>::identity();
    [
        (ms.alpha2 * ms.alpha2 - i2).norm(),
        (ms.beta2 * ms.beta2 - i2).norm(),
        (ms.alpha2 * ms.beta2 + ms.beta2 * ms.alpha2).norm(),
        (ms.j4 * ms.j4 + i4).norm(),
        (ms.sigma.adjoint() - ms.sigma).norm(),
        (ms.sigma * ms.sigma - i4).norm(),
        (ms.bold_alpha * ms.bold_alpha - i4).norm(),
        (ms.bold_beta * ms.bold_beta - i4).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

fn evolution_checks() -> Result<(f64, f64), GnError> {
    let grid = Grid::new(60.0, 512)?;
    let model = make_power_model(K)?;
    let fam = WaveFamily::new(&model, OMEGA, &grid)?;
    let (mut st, _) = init_state(&fam, OMEGA, &grid, &PerturbationSpec::standard(0.1), 0.05)?;
    let q0 = charge(&grid, &st);
    let mut par: f64 = 0.0;
    for _ in 0..2000 {
        step(&grid, &model, &mut st)?;
        par = par.max(parity_error(&grid, &st));
    }
    Ok(((charge(&grid, &st) - q0).abs() / q0, par))
}

fn run_checks(fault: f64) -> Result<Vec<Check>, GnError> {
    let opts = JostOptions::default();
    let mut c = Vec::new();
    c.push(Check { name: "matrix-identities", value: matrix_identities(), tol: 0.0, note: String::new() });

    let wave = Arc::new(solve_wave(&make_power_model(K)?, OMEGA, default_x_max(OMEGA), DEFAULT_N)?);
    let vmax = wave.v.iter().fold(0.0f64, |m, v| m.max(v * v));
    let h = wave.first_integral().iter().fold(0.0f64, |m, h| m.max(h.abs())) / vmax;
    c.push(Check { name: "H-conservation", value: h, tol: 1e-8, note: String::new() });
    let (_, v, u) = wave.full_grid();
    let n = v.len();
    let wp = (0..n).map(|i| (v[i] - v[n - 1 - i]).abs().max((u[i] + u[n - 1 - i]).abs())).fold(0.0, f64::max);
    c.push(Check { name: "wave-parity", value: wp, tol: 0.0, note: String::new() });

    let pot = Potentials::scaled(&wave, 1.0, fault);
    c.push(Check { name: "W-parity", value: pot.parity_residual(), tol: 1e-12, note: String::new() });
    let target = 2.0 * K as f64 * wave.delta();
    record(&mut c, "W-decay", 0.05, Ok(pot.decay_exponent().map_or(f64::NAN, |a| (a - target).abs() / target)));

    match kernel_vectors(&pot) {
        Ok(kb) => {
            let r = kernel_residuals(&pot, &kb);
            c.push(Check { name: "kernel", value: r.jl_jphi.max(r.jl_dxphi) / r.phi_norm, tol: 1e-7, note: String::new() });
            c.push(Check { name: "jordan-chain", value: r.chain1.max(r.chain2), tol: 1e-5, note: String::new() });
            let pd = parity_defect(&kb.j_phi, false).max(parity_defect(&kb.dom_phi, false)).max(parity_defect(&kb.dx_phi, true)).max(parity_defect(&kb.jordan2, true));
            c.push(Check { name: "kernel-parity", value: pd, tol: 1e-12, note: String::new() });
        }
        Err(e) => {
            record(&mut c, "kernel", 1e-7, Err(e.clone()));
            record(&mut c, "jordan-chain", 1e-5, Err(e));
        }
    }

    let tr = [(0.0, C64::new(0.3, 0.7)), (1.3, C64::new(-2.0, 5.0)), (-0.4, I * 0.6)]
        .iter()
        .map(|&(x, l)| coefficient_matrix(x, l, OMEGA, &pot).trace().norm())
        .fold(0.0, f64::max);
    c.push(Check { name: "trace-M", value: tr, tol: 0.0, note: String::new() });

    let mut drift: f64 = 0.0;
    let mut fact: f64 = 0.0;
    for l in [I * 0.45, I * 1.1, C64::new(0.2, 0.3), C64::new(0.05, 1.7)] {
        match evans_eval(l, &pot, &opts) {
            Ok(s) => {
                drift = drift.max(s.drift);
                fact = fact.max((s.e.norm() - 4.0 * s.e_x.norm() * s.e_xperp.norm()).abs() / s.e.norm());
            }
            Err(e) => {
                drift = f64::NAN;
                c.push(Check { name: "evans-eval", value: f64::INFINITY, tol: 0.0, note: e.to_string() });
            }
        }
    }
    record(&mut c, "evans-drift", 1e-6, Ok(drift));
    record(&mut c, "evans-factorization", 1e-6, Ok(fact));
    record(&mut c, "evans-large-lambda", 0.1, evans_eval(I * 50.0, &pot, &opts).map(|s| (s.e.norm() - 1.0).abs()));
    let br = Bracket { lo: I * 0.58, hi: I * 0.62, center: I * 0.6, min_abs: 0.0, winding: None };
    record(&mut c, "two-omega-eigenvalue", 1e-4, locate_zero(&br, Parity::Xperp, &pot, &opts).map(|z| (z.lambda - I * 0.6).norm()));

    let lam = C64::new(0.0, 0.45);
    record(
        &mut c,
        "gamma",
        1e-12,
        connection_matrices(lam, &pot, false, &opts).and_then(|cm| {
            let g = gamma_matrix(&cm.b)?;
            Ok((g.determinant() + 1.0).norm().max((cm.b[(1, 0)] * g[(0, 0)] + cm.b[(1, 1)] * g[(1, 0)]).norm() / cm.b.norm()))
        }),
    );
    let ys = [-4.0, -1.5, -0.5, 0.0, 0.5, 1.5, 4.0];
    let dets = evans_eval(lam, &pot, &opts).and_then(|s| {
        let gd = GreenData::on_points(lam, &pot, Side::Minus, &ys, &opts)?;
        let e2 = s.e.norm_sqr();
        let d: Vec<f64> = (0..ys.len()).map(|i| gd.delta(i).determinant().norm()).collect();
        let spread = d.iter().fold(0.0f64, |m, x| m.max((x - d[0]).abs())) / d[0];
        let vs = d.iter().fold(0.0f64, |m, x| m.max((x - e2).abs())) / e2;
        Ok((spread, vs))
    });
    record(&mut c, "det-delta-spread", 1e-7, dets.clone().map(|d| d.0));
    record(&mut c, "det-delta-vs-evans", 1e-8, dets.map(|d| d.1));

    let ev = evolution_checks();
    record(&mut c, "charge-conservation", 1e-10, ev.clone().map(|e| e.0));
    record(&mut c, "evolution-parity", 1e-12, ev.map(|e| e.1));
    Ok(c)
}

pub fn selftest(p: &mut Params, out: &Path) -> Result<String, CliError> {
    let fault = p.f64("fault", Some(0.0))?;
    p.finish()?;
    let checks = run_checks(fault)?;
    let mut t = Table::new("selftest", &["check", "value", "tolerance", "pass", "note"]);
    let mut failed = Vec::new();
    let mut h = Sha256::new();
    for c in &checks {
        let ok = c.value <= c.tol;
        if !ok {
            failed.push(c.name);
        }
        h.update(format!("{},{},{},{}\n", c.name, fmt_f64(c.value), fmt_f64(c.tol), ok).as_bytes());
        t.push(vec![c.name.into(), c.value.into(), c.tol.into(), if ok { "yes" } else { "no" }.into(), c.note.clone().into()]);
    }
    let report: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    let mut a = Artifacts::new(out, "selftest", p);
    for c in &checks {
        a.tolerance(c.name, c.tol);
    }
    a.add(t);
    a.note("report_hash", report.clone());
    a.note("failed", failed.clone());
    a.write("selftest", p)?;
    if failed.is_empty() {
        Ok(format!("selftest: {} invariants pass, report {report}", checks.len()))
    } else {
        Err(CliError::Failed(format!("selftest: failed invariants: {} (report {report})", failed.join(", "))))
    }
}
