//! Coefficient data and sample-path simulation for
//! `dX = b(t,X) dt + σ(t,X) dB + γ ∫ g(t,X₋,u) N(dt,du)`
//! with a finite atomic mark measure `ν`.

mod coefficients;
mod ensemble;
mod initial;
mod jumps;
mod mark;
mod path;
mod validate;

pub use coefficients::{CoefficientSet, CoefficientSetBuilder, DiffusionFn, DriftFn, JumpAmplitude, JumpFn};
pub use ensemble::{marginal, simulate_ensemble, simulate_marginals, AbortedPath, EnsembleConfig, PathEnsemble};
pub use initial::InitialLaw;
pub use jumps::{sample_jumps, sample_jumps_with, JumpEvent, JumpList};
pub use mark::{Atom, MarkMeasure};
pub use path::{simulate_path, simulate_path_with, PathSample};
pub use validate::{validate_coefficients, validate_coefficients_with, GrowthWitness, ValidationOptions, ValidationReport};
