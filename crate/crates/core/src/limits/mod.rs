//! Coefficient sequences and convergence experiments.

mod experiment;
mod mollifier;
mod sequence;

pub use experiment::{limit_experiment, ConvergenceRow, ConvergenceTable, ExperimentSeeds};
pub use mollifier::{mollified_diffusion_matrix, mollifier_density, mollify_coefficients, CacheSpec, MollifierScheme, MOLLIFIER_MASS};
pub use sequence::{build_sequence, gamma_seq, l1loc_discrepancy, SequenceKind, SequenceSpec};
