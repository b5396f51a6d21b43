//! Discrete Benamou–Brenier optimal transport on ε-neighborhood geometric
//! graphs over the flat torus, with the continuum reference stack and the
//! experiment harness used to test Gromov–Hausdorff convergence of the
//! discrete spaces `(P(X_n), W_n)` to `(P(T^d), W / sqrt(alpha_d sigma))`.

pub mod error;
pub mod quadrature;
pub mod torus;
pub mod graph;
pub mod interp;
pub mod continuum;
pub mod discrete;
pub mod harness;

pub use error::{GraphotError, Result};
