//! Numerical engines for jump probabilities and decay rates of repeatedly
//! measured quantum systems.
//!
//! The crate is organized around a model-agnostic description of the
//! measurement: a kernel acting on the detector state, conditioned on which
//! pair of system levels it dresses. On top of that sit
//!
//! - [`jump`]: the second-order jump probability during a measurement cycle,
//!   its pulsed free/measurement/interference decomposition, decay rates and
//!   survival probabilities;
//! - [`spectral`]: the overlap form of the decay rate — reservoir coupling
//!   spectrum times measurement-induced level broadening — and Zeno /
//!   anti-Zeno regime sweeps;
//! - [`oracle`]: exact propagation of small system ⊗ reservoir ⊗ detector
//!   compounds used to validate the perturbative results to their error
//!   order.
//!
//! Everything uses natural units, ℏ = 1: energies and rates are angular
//! frequencies, times are their inverses.

pub mod error;
pub mod jump;
pub mod linalg;
pub mod measurement;
pub mod oracle;
pub mod quad;
pub mod spectral;
pub mod system;

pub use error::{Result, ZenoError};
