use std::f64::consts::PI;

use serde::Serialize;

use crate::fpe::GridDensity1D;
use crate::sde::{CoefficientSet, PathEnsemble};

/// Universal constant used for the first-moment BDG inequality.
pub const KAPPA_BDG: f64 = 6.0;

/// `λ(r)` for `r ≥ 2`.
pub const LAMBDA_PLATEAU: f64 = 1.5;

/// Increasing concave profile: `r` on `[0,1]`, `λ′ = (1 + cos π(r−1))/2` on
/// `[1,2]`, constant beyond 2.
pub fn lambda(r: f64) -> f64 {
    if r <= 1.0 {
        r
    } else if r >= 2.0 {
        LAMBDA_PLATEAU
    } else {
        let s = r - 1.0;
        1.0 + 0.5 * s + (PI * s).sin() / (2.0 * PI)
    }
}

/// `λ_n(x) = n λ(ρ(x)/n)` with `ρ(x) = (1 + |x|²)^{1/2}`.
pub fn lambda_n_eval(n: u32, x: &[f64]) -> f64 {
    assert!(n >= 1, "lambda_n needs n >= 1");
    let rho = (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let n = n as f64;
    n * lambda(rho / n)
}

/// `∫ λ_n v dx` for a grid density (midpoint rule).
pub fn lambda_moment(v: &GridDensity1D, n: u32) -> f64 {
    v.integrate(|x| lambda_n_eval(n, &[x]))
}

/// `E sup_t |X_t|` over the ensemble.
pub fn empirical_sup_moment(ens: &PathEnsemble) -> f64 {
    let n = ens.len().max(1) as f64;
    ens.paths().iter().map(|p| p.sup_norm()).sum::<f64>() / n
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub c1: f64,
    pub c2: f64,
    pub nu_mass: f64,
    pub kappa: f64,
    /// Bundled constant `κ max(C1, √(C2 ν(U)), C1 + √(C2 ν(U)))`.
    pub c_bundle: f64,
    pub t0: f64,
    pub blocks: u64,
    pub horizon: f64,
    pub mu0_first_moment: f64,
    /// Serialized as `null` when it overflows.
    pub bound: f64,
    pub empirical: f64,
    /// `bound / empirical`.
    pub slack: f64,
    pub pass: bool,
}

/// Evaluates `E sup |X| ≤ 2^{k+1} μ0(|·|) + 2^{k+1} − 1` with `k = ⌊T/t0⌋`
/// and `t0` the root of `C(t0 + √t0) = 1/2`.
pub fn moment_bound(empirical: f64, horizon: f64, mu0_first_moment: f64, c1: f64, c2: f64, nu_mass: f64) -> BoundReport {
    let root = (c2 * nu_mass).max(0.0).sqrt();
    let c = KAPPA_BDG * c1.max(root).max(c1 + root);
    let t0 = if c > 0.0 {
        let s = (-c + (c * c + 2.0 * c).sqrt()) / (2.0 * c);
        s * s
    } else {
        f64::INFINITY
    };
    let ratio = horizon / t0;
    let blocks = if ratio.is_finite() { ratio.floor() } else { f64::INFINITY };
    let pow = if blocks + 1.0 > 1100.0 { f64::INFINITY } else { 2f64.powi(blocks as i32 + 1) };
    let bound = if pow.is_finite() { pow * mu0_first_moment + pow - 1.0 } else { f64::INFINITY };
    let slack = if empirical > 0.0 { bound / empirical } else { f64::INFINITY };
    BoundReport {
        c1,
        c2,
        nu_mass,
        kappa: KAPPA_BDG,
        c_bundle: c,
        t0,
        blocks: if blocks.is_finite() { blocks as u64 } else { u64::MAX },
        horizon,
        mu0_first_moment,
        bound,
        empirical,
        slack,
        pass: empirical <= bound,
    }
}

/// Checks the sup-moment bound on an ensemble with explicit constants.
pub fn moment_bound_check(ens: &PathEnsemble, mu0_first_moment: f64, c1: f64, c2: f64, nu_mass: f64) -> BoundReport {
    moment_bound(empirical_sup_moment(ens), ens.horizon(), mu0_first_moment, c1, c2, nu_mass)
}

/// Same, reading the constants off `cs`. The jump hypothesis is stated for
/// `f = γ g`, so `γ² C2` is used.
pub fn moment_bound_for(ens: &PathEnsemble, cs: &CoefficientSet, mu0_first_moment: f64) -> BoundReport {
    let g = cs.jump_scale();
    moment_bound_check(ens, mu0_first_moment, cs.c1(), g * g * cs.c2(), cs.nu().total_mass())
}
