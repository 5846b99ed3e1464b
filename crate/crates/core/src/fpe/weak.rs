use super::generator::apply_generator;
use super::grid::{Grid1D, GridDensity1D};
use super::solver::{DensityTrajectory, FpeStepper};
use super::test_function::SmoothFunction;
use crate::sde::CoefficientSet;
use crate::{Error, Result};

/// `max_k |γ u_k|`, or 0 when no jumps are applied.
pub fn max_jump_shift(cs: &CoefficientSet) -> f64 {
    if cs.jumps_vanish() {
        return 0.0;
    }
    let gamma = cs.jump_scale().abs();
    cs.nu()
        .atoms()
        .iter()
        .map(|a| gamma * a.mark.iter().map(|m| m * m).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// `μ_t(φ) − μ_0(φ) − ∫₀ᵗ μ_s((𝓐_s + 𝓑_s)φ) ds` over a solved trajectory.
///
/// Spatial integrals are cell sums at the centres; the time integral is the
/// trapezoid rule over the stored checkpoints up to `t`, so the trajectory
/// should carry enough of them. The support of `φ` must stay at least
/// `max_k |γ u_k|` away from the boundary.
pub fn weak_form_residual<F: SmoothFunction + ?Sized>(
    traj: &DensityTrajectory,
    cs: &CoefficientSet,
    phi: &F,
    t: f64,
) -> Result<f64> {
    if cs.dim() != 1 {
        return Err(Error::Dimension("weak form is evaluated for scalar states".into()));
    }
    let end = traj
        .index_of(t)
        .ok_or_else(|| Error::InvalidArgument(format!("t = {t} is not a checkpoint of the trajectory")))?;
    let grid = *traj.last().grid();
    check_margin(cs, &grid, phi)?;

    let snaps = &traj.snapshots()[..=end];
    let gen_integral = |k: usize| {
        let s = &snaps[k];
        s.integrate(|x| apply_generator(cs, s.time(), phi, x))
    };
    let mut integral = 0.0;
    let mut prev = gen_integral(0);
    for k in 1..snaps.len() {
        let cur = gen_integral(k);
        integral += 0.5 * (snaps[k].time() - snaps[k - 1].time()) * (prev + cur);
        prev = cur;
    }
    let mu_t = snaps[end].integrate(|x| phi.value(x));
    let mu_0 = snaps[0].integrate(|x| phi.value(x));
    Ok(mu_t - mu_0 - integral)
}

fn check_margin<F: SmoothFunction + ?Sized>(cs: &CoefficientSet, grid: &Grid1D, phi: &F) -> Result<()> {
    let margin = max_jump_shift(cs);
    let support = phi
        .support()
        .ok_or_else(|| Error::InvalidArgument("test function must have compact support".into()))?;
    if support.0 < grid.x_min() + margin || support.1 > grid.x_max() - margin {
        return Err(Error::SupportMargin {
            support,
            domain: (grid.x_min(), grid.x_max()),
            margin,
        });
    }
    Ok(())
}

/// Weak-form residuals at `horizon` for several test functions, with the time
/// integral accumulated by the trapezoid rule over every solver step instead
/// of stored checkpoints.
pub fn streaming_weak_residuals<F: SmoothFunction>(
    cs: &CoefficientSet,
    v0: &GridDensity1D,
    horizon: f64,
    dt: f64,
    phis: &[F],
) -> Result<Vec<f64>> {
    if cs.dim() != 1 {
        return Err(Error::Dimension("weak form is evaluated for scalar states".into()));
    }
    if !(dt > 0.0 && dt.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!("need dt > 0 and horizon >= 0, got {dt}, {horizon}")));
    }
    let grid = *v0.grid();
    for phi in phis {
        check_margin(cs, &grid, phi)?;
    }
    // generator values on the cells each φ can see
    let centers: Vec<f64> = grid.centers().collect();
    let table = |t: f64| -> Vec<Vec<f64>> {
        phis.iter()
            .map(|phi| centers.iter().map(|&x| apply_generator(cs, t, phi, x)).collect())
            .collect()
    };
    let pair = |g: &[Vec<f64>], v: &GridDensity1D| -> Vec<f64> {
        g.iter()
            .map(|gi| gi.iter().zip(v.values()).map(|(a, b)| a * b).sum::<f64>() * grid.dx())
            .collect()
    };
    let homogeneous = cs.is_time_homogeneous();
    let mut g = table(0.0);
    let mut stepper = FpeStepper::new(cs, grid)?;
    let mut state = v0.clone();
    state.time = 0.0;
    let mut integral = vec![0.0; phis.len()];
    let mut prev = pair(&g, &state);
    let snap = 1e-12 * horizon.max(1.0);
    while horizon - state.time > snap {
        let h = (horizon - state.time).min(dt);
        let next = stepper.step(&state, h)?;
        if !homogeneous {
            g = table(next.time);
        }
        let cur = pair(&g, &next);
        for ((acc, p), c) in integral.iter_mut().zip(&prev).zip(&cur) {
            *acc += 0.5 * h * (p + c);
        }
        prev = cur;
        state = next;
    }
    Ok(phis
        .iter()
        .zip(&integral)
        .map(|(phi, i)| state.integrate(|x| phi.value(x)) - v0.integrate(|x| phi.value(x)) - i)
        .collect())
}
