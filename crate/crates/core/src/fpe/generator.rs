use super::test_function::SmoothFunction;
use crate::sde::CoefficientSet;

/// `(𝓐_t + 𝓑_t)φ(x) = b φ′ + a φ″ + Σ_k w_k [φ(x + γ g(t,x,u_k)) − φ(x)]`
/// with `a = ½σσ*`, for a scalar state.
pub fn apply_generator<F: SmoothFunction + ?Sized>(cs: &CoefficientSet, t: f64, phi: &F, x: f64) -> f64 {
    debug_assert_eq!(cs.dim(), 1, "generator is evaluated on scalar states");
    let b = cs.drift_1d(t, x);
    let a = cs.diffusion_coeff_1d(t, x);
    let mut out = 0.0;
    if b != 0.0 {
        out += b * phi.d1(x);
    }
    if a != 0.0 {
        out += a * phi.d2(x);
    }
    let gamma = cs.jump_scale();
    if gamma != 0.0 {
        let fx = phi.value(x);
        for atom in cs.nu().atoms() {
            let shift = gamma * cs.jump_1d(t, x, &atom.mark);
            out += atom.weight * (phi.value(x + shift) - fx);
        }
    }
    out
}
