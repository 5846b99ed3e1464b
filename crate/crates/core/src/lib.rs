//! Jump-diffusion SDE simulation, the non-local Fokker–Planck equation and
//! the probes that compare the two.
//!
//! The crate is organised bottom-up:
//!
//! * [`sde`] holds coefficient data, Poisson jump sampling and the
//!   jump-adapted Euler simulator that produces [`sde::PathEnsemble`]s.
//! * [`fpe`] solves the 1-D non-local Fokker–Planck equation on a truncated
//!   grid and evaluates the generator on test functions.
//! * [`probes`] turns ensembles and densities into numbers: Wasserstein-1
//!   distances, martingale defects and first-moment bounds.
//! * [`limits`] builds coefficient sequences (mollified, vanishing noise,
//!   vanishing jumps) and runs convergence experiments.

pub mod error;
pub mod fpe;
pub mod limits;
pub mod probes;
pub mod quadrature;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};
