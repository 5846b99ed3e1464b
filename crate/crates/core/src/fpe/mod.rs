//! One-dimensional non-local Fokker–Planck equation
//! `∂_t v = −∂_x(b v) + ∂_xx(a v) + Σ_k w_k [v(· − γu_k) − v]`
//! on a truncated domain with absorbing boundaries.

mod generator;
mod grid;
mod solver;
mod test_function;
mod weak;

pub use generator::apply_generator;
pub use grid::{Grid1D, GridDensity1D};
pub use solver::{fpe_step, solve_fpe, uniform_checkpoints, DensityTrajectory, FpeStepper, ManifestEntry};
pub use test_function::{BumpShape, SmoothFunction, TestFunction};
pub use weak::{max_jump_shift, streaming_weak_residuals, weak_form_residual};
