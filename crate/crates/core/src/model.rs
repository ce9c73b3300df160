//! Nonlinearity and the fixed Dirac / symplectic matrices.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64 as C64;

use crate::error::{GnError, Result};

/// A scalar self-interaction `f(s)` with derivative and antiderivative.
#[derive(Clone, Copy)]
pub struct CustomNonlinearity {
    pub f: fn(f64) -> f64,
    pub fprime: fn(f64) -> f64,
    pub big_f: fn(f64) -> f64,
}

impl std::fmt::Debug for CustomNonlinearity {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fmt.write_str("CustomNonlinearity")
    }
}

/// Gross-Neveu nonlinearity. The mass is fixed to one.
#[derive(Debug, Clone, Copy)]
pub struct Model {
    pub k: u32,
    custom: Option<CustomNonlinearity>,
}

pub fn make_power_model(k: i64) -> Result<Model> {
    if k < 1 || k > 64 {
        return Err(GnError::InvalidParameter(format!("exponent k must be in 1..=64, got {k}")));
    }
    Ok(Model { k: k as u32, custom: None })
}

impl Model {
    /// Hook for a general smooth `f`; `k` is the vanishing order at zero.
    pub fn custom(k: u32, nl: CustomNonlinearity) -> Model {
        Model { k, custom: Some(nl) }
    }

    pub fn is_power(&self) -> bool {
        self.custom.is_none()
    }

    #[inline]
    pub fn f(&self, s: f64) -> f64 {
        match self.custom {
            None => s.powi(self.k as i32),
            Some(c) => (c.f)(s),
        }
    }

    #[inline]
    pub fn fprime(&self, s: f64) -> f64 {
        match self.custom {
            None => self.k as f64 * s.powi(self.k as i32 - 1),
            Some(c) => (c.fprime)(s),
        }
    }

    #[inline]
    pub fn big_f(&self, s: f64) -> f64 {
        match self.custom {
            None => s.powi(self.k as i32 + 1) / (self.k as f64 + 1.0),
            Some(c) => (c.big_f)(s),
        }
    }
}

/// Dirac and symplectic matrices in the real four-component representation.
#[derive(Debug, Clone)]
pub struct MatrixSet {
    pub alpha2: Matrix2<C64>,
    pub beta2: Matrix2<C64>,
    pub sigma1: Matrix2<C64>,
    pub sigma3: Matrix2<C64>,
    pub j4: Matrix4<C64>,
    pub bold_alpha: Matrix4<C64>,
    pub bold_beta: Matrix4<C64>,
    pub sigma: Matrix4<C64>,
}

const fn r(x: f64) -> C64 {
    C64::new(x, 0.0)
}

const I: C64 = C64::new(0.0, 1.0);

pub fn dirac_matrices() -> MatrixSet {
    let z = r(0.0);
    let o = r(1.0);
    let m = r(-1.0);
    // alpha = -sigma_2
    let alpha2 = Matrix2::new(z, I, -I, z);
    let beta2 = Matrix2::new(o, z, z, m);
    let sigma1 = Matrix2::new(z, o, o, z);
    let sigma3 = beta2;
    #[rustfmt::skip]
    let j4 = Matrix4::new(
        z, z, o, z,
        z, z, z, o,
        m, z, z, z,
        z, m, z, z,
    );
    #[rustfmt::skip]
    let bold_alpha = Matrix4::new(
        z, z, z, m,
        z, z, o, z,
        z, o, z, z,
        m, z, z, z,
    );
    #[rustfmt::skip]
    let bold_beta = Matrix4::new(
        o, z, z, z,
        z, m, z, z,
        z, z, o, z,
        z, z, z, m,
    );
    let sigma = j4 * I;
    MatrixSet { alpha2, beta2, sigma1, sigma3, j4, bold_alpha, bold_beta, sigma }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_values() {
        let m2 = make_power_model(2).unwrap();
        assert_eq!(m2.f(1.0), 1.0);
        assert!((m2.big_f(1.0) - 1.0 / 3.0).abs() < 1e-16);
        let m1 = make_power_model(1).unwrap();
        assert_eq!(m1.f(0.5), 0.5);
        assert_eq!(m1.big_f(0.5), 0.125);
        let m3 = make_power_model(3).unwrap();
        assert_eq!(m3.f(-1.0), -1.0);
        assert_eq!(m3.big_f(-1.0), 0.25);
        assert_eq!(m3.fprime(2.0), 12.0);
        assert!(make_power_model(0).is_err());
        assert!(make_power_model(-3).is_err());
    }

    #[test]
    fn antiderivative_matches_quadrature() {
        for k in 1..=4 {
            let m = make_power_model(k).unwrap();
            for i in 0..=40 {
                let s = -2.0 + 0.1 * i as f64;
                // Gauss-Legendre, 5 nodes, exact for these polynomials
                let nodes = [
                    (0.0, 0.568_888_888_888_888_9),
                    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
                    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
                    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
                    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
                ];
                let q: f64 = nodes.iter().map(|&(t, w)| w * m.f(0.5 * s * (t + 1.0))).sum::<f64>() * 0.5 * s;
                assert!((q - m.big_f(s)).abs() <= 1e-10, "k={k} s={s}");
                let h = 1e-5;
                let fd = (m.big_f(s + h) - m.big_f(s - h)) / (2.0 * h);
                assert!((fd - m.f(s)).abs() <= 1e-6 * m.f(s).abs().max(1.0));
            }
        }
    }

    #[test]
    fn matrix_identities() {
        let ms = dirac_matrices();
        let i2 = Matrix2::<C64>::identity();
        let i4 = Matrix4::<C64>::identity();
        assert_eq!(ms.alpha2 * ms.alpha2, i2);
        assert_eq!(ms.beta2 * ms.beta2, i2);
        assert_eq!(ms.alpha2 * ms.beta2 + ms.beta2 * ms.alpha2, Matrix2::zeros());
        assert_eq!(ms.j4 * ms.j4, -i4);
        assert_eq!(ms.sigma.adjoint(), ms.sigma);
        assert_eq!(ms.sigma * ms.sigma, i4);
        assert_eq!(ms.bold_alpha * ms.bold_alpha, i4);
        assert_eq!(ms.bold_beta * ms.bold_beta, i4);
    }

    #[test]
    fn sigma_spectrum() {
        let ms = dirac_matrices();
        // spectral projectors of Sigma onto +1 and -1, each of rank two
        let p = (ms.sigma + Matrix4::identity()) * r(0.5);
        let q = (Matrix4::identity() - ms.sigma) * r(0.5);
        assert_eq!(p * p, p);
        assert_eq!(q * q, q);
        let tr_p: C64 = p.trace();
        let tr_q: C64 = q.trace();
        assert_eq!(tr_p, r(2.0));
        assert_eq!(tr_q, r(2.0));
    }
}
