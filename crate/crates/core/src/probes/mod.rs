//! Quantitative verdicts on laws, ensembles and densities.

mod defect;
mod law;
mod moments;

pub use defect::{
    chi_dictionary, martingale_defect, martingale_defect_batch, DefectReport, FunctionalKind, PathFunctional,
};
pub use law::{w1_against_atoms, w1_against_density, w1_to_point, wasserstein1, EmpiricalLaw, MAX_LEAK_FOR_W1};
pub use moments::{
    empirical_sup_moment, lambda, lambda_moment, lambda_n_eval, moment_bound, moment_bound_check, moment_bound_for,
    BoundReport, KAPPA_BDG, LAMBDA_PLATEAU,
};
