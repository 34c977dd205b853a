//! Numerical laboratory for the oscillatory integral operator
//! `T_λ f(x, y) = ∫ e^{iλ(x^m t^k + y^n t^l)} ψ(x, y, t) f(t) dt`.

pub mod analytic;
pub mod decay;
pub mod error;
pub mod phase;
pub mod norms;
pub mod operator;
pub mod quad;

pub use error::{Error, Result};
pub use num_complex::Complex64;
