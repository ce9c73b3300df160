//! Numerical laboratory for solitary waves of the Gross-Neveu nonlinear Dirac equation.

pub mod error;
pub mod model;
pub mod ode;
pub mod solitary_wave;
pub mod linearization;
pub mod jost;
pub mod evans;
pub mod resolvent;
pub mod evolution;

pub use error::{GnError, Result};
pub use num_complex::Complex64 as C64;
