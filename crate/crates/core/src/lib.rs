//! Numerical core for the heterogeneous multiscale method (HMM) applied to
//! slow-fast stochastic reaction-diffusion systems on `(0, 1)` with
//! homogeneous Dirichlet boundary conditions:
//!
//! ```text
//! dX = (A X + F(X, Y)) dt
//! dY = (1/ε) (B Y + G(X, Y)) dt + (1/√ε) dW
//! ```
//!
//! Fields live in the truncated sine basis `e_k(ξ) = √2 sin(kπξ)`, nonlinear
//! terms are evaluated pseudo-spectrally on the collocation grid
//! `ξ_i = i / (K + 1)`, and all randomness comes from counter-based keyed
//! streams so that every trajectory is reproducible from a seed.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod averaging;
pub mod coefficients;
pub mod direct;
mod error;
pub mod hmm;
mod math;
pub mod microsolver;
pub mod noise;
pub mod quadrature;
pub mod spectral;
mod system;

pub use error::{Error, Result};
pub use system::SlowFastSystem;
