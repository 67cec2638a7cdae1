//! Pseudospectral laboratory for the higher-order nonlinear Schrodinger
//! equation
//!
//! ```text
//! i u_t + omega u_xx + i beta u_xxx + gamma |u|^2 u + i delta |u|^2 u_x
//!     + i eps u^2 conj(u)_x = 0
//! ```
//!
//! on a periodic box standing in for the line.

pub mod error;
pub mod experiments;
pub mod hnls_model;
pub mod identities;
pub mod integrators;
pub mod spectral_grid;
pub mod weights;

pub use error::{Error, Result};
pub use hnls_model::EquationParams;
pub use spectral_grid::{Field, Grid, SpectralField};
