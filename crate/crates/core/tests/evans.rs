use std::sync::Arc;

use gnlab_core::evans::*;
use gnlab_core::jost::JostOptions;
use gnlab_core::linearization::*;
use gnlab_core::model::make_power_model;
use gnlab_core::solitary_wave::{default_x_max, solve_wave, DEFAULT_N};
use gnlab_core::{GnError, C64};
use nalgebra::Matrix4;
use proptest::prelude::*;

const I: C64 = C64::new(0.0, 1.0);

fn wave(k: i64, omega: f64) -> Arc<gnlab_core::solitary_wave::SolitaryWave> {
    let m = make_power_model(k).unwrap();
    Arc::new(solve_wave(&m, omega, default_x_max(omega), DEFAULT_N).unwrap())
}

fn pot(k: i64, omega: f64) -> Potentials {
    potentials(&wave(k, omega))
}

fn opts() -> JostOptions {
    JostOptions::default()
}

#[test]
fn known_values() {
    let p = pot(2, 0.3);
    let e0 = evans_eval(C64::new(0.0, 0.0), &p, &opts()).unwrap();
    assert!(e0.e.norm() <= 1e-8, "E(0) = {}", e0.e);
    let e6 = evans_eval(I * 0.6, &p, &opts()).unwrap();
    assert!(e6.e.norm() <= 1e-6, "E(0.6i) = {}", e6.e);
    let big = evans_eval(I * 50.0, &p, &opts()).unwrap();
    assert!((big.e.norm() - 1.0).abs() <= 0.05);
}

#[test]
fn drift_and_factorization() {
    let p = pot(2, 0.3);
    let lams = [I * 0.2, I * 0.9, I * 1.7, I * 5.0, C64::new(0.1, 0.3), C64::new(0.3, 0.0)];
    for s in evans_batch(&lams, &p, &opts()) {
        let s = s.unwrap();
        assert!(s.drift <= 1e-6, "{}: drift {}", s.lambda, s.drift);
        let f = 4.0 * s.e_x.norm() * s.e_xperp.norm();
        assert!((s.e.norm() - f).abs() <= 1e-6 * s.e.norm(), "{}", s.lambda);
    }
}

fn quad(v: &[f64]) -> [Vec4; 2] {
    let c = |i: usize| C64::new(v[2 * i], v[2 * i + 1]);
    [[c(0), c(1), c(2), c(3)], [c(4), c(5), c(6), c(7)]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // |det[a, c, beta a, beta c]| = 4 |det of rows 2,4| |det of rows 1,3|
    #[test]
    fn factorization_identity(v in proptest::collection::vec(-1.0f64..1.0, 16)) {
        let [a, c] = quad(&v);
        let (ba, bc) = (bold_beta(&a), bold_beta(&c));
        let cols = [a, c, ba, bc];
        let d = Matrix4::from_fn(|r, k| cols[k][r]).determinant();
        let odd = a[1] * c[3] - a[3] * c[1];
        let even = a[0] * c[2] - a[2] * c[0];
        let rhs = 4.0 * odd.norm() * even.norm();
        prop_assert!((d.norm() - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn evans_is_x_independent(re in 0.0f64..0.5, im in 0.0f64..4.0) {
        let p = pot(2, 0.3);
        let s = evans_eval(C64::new(re, im) + 1e-3, &p, &opts()).unwrap();
        prop_assert!(s.drift <= 1e-6);
    }
}

#[test]
fn stub_winding() {
    let f = |z: C64| -> gnlab_core::Result<C64> { Ok(z * z) };
    let (w, _) = winding_rect(&f, C64::new(-0.1, -0.1), C64::new(0.1, 0.1), 8).unwrap();
    assert_eq!(w, 2);
    let (w, _) = winding_rect(&f, C64::new(0.05, 0.05), C64::new(0.2, 0.2), 8).unwrap();
    assert_eq!(w, 0);
    let g = |z: C64| -> gnlab_core::Result<C64> { Ok((z - 0.3).powi(3) / (z + 0.5)) };
    let (w, _) = winding_rect(&g, C64::new(-1.0, -1.0), C64::new(1.0, 1.0), 8).unwrap();
    assert_eq!(w, 2);
}

#[test]
fn parity_classification() {
    let p = pot(2, 0.3);
    assert_eq!(parity_classify_zero(I * 0.6, &p, &opts()).unwrap(), ParityClass::Xperp);
    assert_eq!(parity_classify_zero(C64::new(0.0, 0.0), &p, &opts()).unwrap(), ParityClass::Both);
    assert!(matches!(parity_classify_zero(I * 0.3, &p, &opts()), Err(GnError::NotAZero(_))));
}

#[test]
fn scans_on_the_imaginary_axis() {
    let p = pot(2, 0.3);
    let r = scan_segment(&p, Axis::Imaginary, 0.01, 1.4, 400, Parity::Xperp, &opts());
    assert_eq!(r.samples.len(), 400);
    let b = r.brackets.iter().find(|b| (b.center - I * 0.6).norm() < 0.01).expect("bracket at 2 omega i");
    let z = locate_zero(b, Parity::Xperp, &p, &opts()).unwrap();
    assert!((z.lambda - I * 0.6).norm() <= 1e-4, "{}", z.lambda);
    assert!(z.multiplicity >= 1);

    let p = pot(2, 0.28);
    let r = scan_segment(&p, Axis::Imaginary, 0.0, 0.72, 400, Parity::X, &opts());
    assert!(r.brackets.is_empty(), "{:?}", r.brackets);
}

#[test]
fn real_axis_instability() {
    let p = pot(3, 0.9);
    let r = scan_segment(&p, Axis::Real, 0.0008, 0.59, 200, Parity::Full, &opts());
    assert!(!r.brackets.is_empty());
    let z = locate_zero(&r.brackets[0], Parity::Full, &p, &opts()).unwrap();
    assert!(z.lambda.re > 0.0008 && z.lambda.re < 0.59 && z.lambda.im.abs() < 1e-8);
    assert!(matches!(krein_signature(z.lambda, &p, &opts()), Err(GnError::NullSignature(_))));
}

#[test]
fn multiplicity_at_origin() {
    let p = pot(2, 0.3);
    let f = |l: C64| evans_eval(l, &p, &opts()).map(|s| s.e);
    let (w, r) = certify(&f, C64::new(0.0, 0.0), 0.7).unwrap();
    assert!(w >= 2, "winding {w} at radius {r}");
}

#[test]
fn two_omega_line_slope() {
    let c = track_curve(2, 0.05, 0.30, 0.05, I * 0.1, Parity::Xperp, 4096, &opts()).unwrap();
    assert_eq!(c.omegas.len(), 6);
    let n = c.omegas.len();
    let slope = (c.lambdas[n - 1].im - c.lambdas[0].im) / (c.omegas[n - 1] - c.omegas[0]);
    assert!((slope - 2.0).abs() <= 0.01, "slope {slope}");
    for (o, l) in c.omegas.iter().zip(&c.lambdas) {
        assert!((l - I * (2.0 * o)).norm() <= 1e-4);
    }
}

#[test]
fn x_curve_leaves_before_stability_window() {
    let p = pot(2, 0.15);
    let r = scan_segment(&p, Axis::Imaginary, 0.01, 0.84, 300, Parity::X, &opts());
    let b = r.brackets.first().expect("X-parity eigenvalue at omega = 0.15");
    let z = locate_zero(b, Parity::X, &p, &opts()).unwrap();
    let c = track_curve(2, 0.15, 0.28, 0.01, z.lambda, Parity::X, 4096, &opts()).unwrap();
    assert!(c.stop.is_some());
    assert!(*c.omegas.last().unwrap() < 0.28);
}

#[test]
fn threshold_probes() {
    for (k, omega) in [(2, 0.3), (3, 0.5)] {
        let p = pot(k, omega);
        let r = threshold_probe(&p, Threshold::Embedded, &opts()).unwrap();
        assert!(!r.resonance_suspected, "k={k} omega={omega}: {r:?}");
        assert!((r.lambda_threshold - I * (1.0 + omega)).norm() < 1e-15);
    }
    // free problem: the constant-asymptotics parity carries a resonance, the other stays O(1)
    let free = Potentials::scaled(&wave(2, 0.3), 0.0, 0.0);
    for which in [Threshold::GapEdge, Threshold::Embedded] {
        let r = threshold_probe(&free, which, &opts()).unwrap();
        assert!(r.indicator >= 0.5, "{which:?}: {r:?}");
        assert!(r.resonance_suspected);
    }
}

#[test]
fn krein_signatures() {
    let p = pot(2, 0.3);
    let kb = kernel_vectors(&p).unwrap();
    let up = krein_signature(I * 0.6, &p, &opts()).unwrap();
    let down = krein_signature(-I * 0.6, &p, &opts()).unwrap();
    assert_eq!(up.sign, -down.sign);
    // the explicit eigenvector gives the same sign by direct quadrature
    let e = two_omega_eigenvector(&kb, 1.0);
    let dx = p.dx();
    let direct: f64 = e
        .iter()
        .map(|v| {
            let jv = j4(v);
            (0..4).map(|r| (v[r].conj() * I * jv[r]).re).sum::<f64>()
        })
        .sum::<f64>()
        * dx;
    assert_eq!(up.sign as f64, direct.signum());
    assert!((krein_charge(&e, dx) - direct).abs() <= 1e-6 * direct.abs());
    let null = vec![[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]; 10];
    assert!(matches!(signature_of(&null, 0.1), Err(GnError::NullSignature(_))));
}

#[test]
fn off_axis_scan_accounts_for_real_pairs() {
    let r = off_axis_scan(&pot(3, 0.9), 0.01, 0.59, 2.5, 0.01, &opts()).unwrap();
    assert_eq!(r.off_axis, 0);
    assert_eq!(r.axis_zeros.len(), 2);
    assert!((r.axis_zeros[0].lambda + r.axis_zeros[1].lambda).norm() <= 1e-8);
    assert_eq!(r.cells.iter().map(|c| c.winding).sum::<i32>(), 2);

    let r = off_axis_scan(&pot(2, 0.3), 0.01, 0.59, 2.5, 0.01, &opts()).unwrap();
    assert_eq!(r.off_axis, 0);
    assert!(r.axis_zeros.is_empty());
    assert!(r.cells.iter().all(|c| c.winding == 0 && c.min_abs > 0.0));
    assert!(off_axis_scan(&pot(2, 0.3), 0.5, 0.1, 2.5, 0.01, &opts()).is_err());
}

#[test]
fn embedded_two_omega_zero() {
    for (k, omega) in [(2, 0.4), (3, 0.9)] {
        let p = pot(k, omega);
        let target = I * (2.0 * omega);
        let r = scan_segment(&p, Axis::Imaginary, 2.0 * omega - 0.02, 2.0 * omega + 0.02, 41, Parity::Xperp, &opts());
        let b = r.brackets.first().expect("bracket on the cut");
        assert!(b.winding.is_none());
        let z = locate_zero(b, Parity::Xperp, &p, &opts()).unwrap();
        assert!((z.lambda - target).norm() <= 1e-8, "k={k}: {}", z.lambda);
        assert_eq!(z.multiplicity, 1);
    }
}
