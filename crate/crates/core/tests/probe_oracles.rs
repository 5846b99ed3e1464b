use std::f64::consts::PI;

use superpose_core::fpe::{solve_fpe, Grid1D, GridDensity1D, SmoothFunction, TestFunction};
use superpose_core::probes::{
    chi_dictionary, lambda, lambda_moment, lambda_n_eval, martingale_defect, martingale_defect_batch, moment_bound,
    moment_bound_check, w1_against_atoms, w1_against_density, EmpiricalLaw, PathFunctional, LAMBDA_PLATEAU,
};
use superpose_core::sde::{simulate_ensemble, simulate_marginals, CoefficientSet, EnsembleConfig, InitialLaw, MarkMeasure};

fn brownian() -> CoefficientSet {
    CoefficientSet::builder(1, 1).scalar_diffusion(|_, _| 1.0).build().unwrap()
}

/// `E f(W_r)` for `W_r ~ N(0, r)` by composite Simpson on ±10 std.
fn gaussian_expectation(r: f64, f: impl Fn(f64) -> f64) -> f64 {
    if r == 0.0 {
        return f(0.0);
    }
    let s = r.sqrt();
    let m = 4000;
    let h = 20.0 * s / m as f64;
    let mut acc = 0.0;
    for k in 0..=m {
        let x = -10.0 * s + k as f64 * h;
        let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(x) * (-x * x / (2.0 * r)).exp();
    }
    acc * h / 3.0 / (s * (2.0 * PI).sqrt())
}

#[test]
fn brownian_motion_has_no_defect() {
    let ens = simulate_ensemble(&brownian(), &InitialLaw::dirac(0.0), &EnsembleConfig::new(1.0, 100, 20_000, 31)).unwrap();
    let phis = TestFunction::dictionary();
    let chis = chi_dictionary(0.5, 0.0);
    for r in martingale_defect_batch(&ens, &brownian(), &phis, &chis, 0.5, 1.0).unwrap() {
        assert!(r.estimate.abs() <= 3.5 * r.stderr + 2e-3, "{} {}: {} ± {}", r.phi, r.chi, r.estimate, r.stderr);
    }
}

#[test]
fn drift_mismatch_defect_matches_gaussian_oracle() {
    // the generator of B_t + δt applied to Brownian paths leaves −δ ∫ E φ′(W_r) dr
    let delta = 0.5;
    let phi = TestFunction::bump(0.5, 1.0);
    let ens = simulate_ensemble(&brownian(), &InitialLaw::dirac(0.0), &EnsembleConfig::new(1.0, 200, 40_000, 32)).unwrap();
    let wrong = brownian().with_drift_offset(delta);
    let rep = martingale_defect(&ens, &wrong, &phi, &PathFunctional::constant(0.0, 1.0), 0.0, 1.0).unwrap();
    let m = 200;
    let oracle = -delta
        * (0..=m)
            .map(|k| {
                let r = k as f64 / m as f64;
                let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                w * gaussian_expectation(r, |x| phi.d1(x))
            })
            .sum::<f64>()
        / (3.0 * m as f64);
    assert!(oracle.abs() > 0.1, "oracle {oracle} should be far from zero");
    assert!((rep.estimate - oracle).abs() <= 3.0 * rep.stderr + 5e-3, "{} vs {oracle}", rep.estimate);
}

#[test]
fn moment_bound_adversarial_fixture() {
    // X_t = 1 + 0.6 t, so E sup|X| = 1.6
    let cs = CoefficientSet::builder(1, 1).scalar_drift(|_, _| 0.6).growth(0.01, 1e-12).build().unwrap();
    let ens = simulate_ensemble(&cs, &InitialLaw::dirac(1.0), &EnsembleConfig::new(1.0, 10, 8, 1)).unwrap();
    let rep = moment_bound_check(&ens, 1.0, 0.01, 0.0, 0.0);
    // C = 6·0.01 and u = √t0 solves C(u² + u) = 1/2
    let c = 6.0 * 0.01;
    let u = (-1.0 + (1.0f64 + 2.0 / c).sqrt()) / 2.0;
    let t0 = u * u;
    assert!(t0 > 1.0);
    assert!((rep.t0 - t0).abs() < 1e-12);
    assert!((rep.empirical - 1.6).abs() < 1e-12);
    assert!((rep.bound - 3.0).abs() < 1e-12);
    assert!(rep.pass);
    assert!(!moment_bound(2.0 * rep.empirical, 1.0, 1.0, 0.01, 0.0, 0.0).pass);
}

#[test]
fn moment_bound_blocks_double_per_block() {
    for (horizon, blocks) in [(0.5, 0.0), (1.0, 1.0), (2.5, 2.0)] {
        // C = 6 max(0.5, 0, 0.5) = 3, t0 = ((−3 + √15)/6)²
        let t0 = ((-3.0 + 15f64.sqrt()) / 6.0).powi(2);
        let r = moment_bound(0.0, horizon * t0 * 1.0001, 2.0, 0.5, 0.0, 0.0);
        let p = 2f64.powi(blocks as i32 + 1);
        assert_eq!(r.blocks as f64, blocks);
        assert!((r.bound - (p * 2.0 + p - 1.0)).abs() < 1e-9);
    }
}

#[test]
fn ou_ensemble_respects_moment_bound() {
    let cs = CoefficientSet::builder(1, 1)
        .scalar_drift(|_, x| -x)
        .scalar_diffusion(|_, _| 1.0)
        .additive_jumps(1.0, MarkMeasure::dirac(1.0, 0.5).unwrap())
        .growth(1.0, 0.25)
        .build()
        .unwrap();
    let ens = simulate_ensemble(&cs, &InitialLaw::gaussian(0.0, 1.0), &EnsembleConfig::new(1.0, 100, 5000, 5)).unwrap();
    let rep = moment_bound_check(&ens, (2.0 / PI).sqrt(), 1.0, 0.25, 1.0);
    assert!(rep.pass && rep.slack >= 2.0);
}

/// Inverse CDF of a piecewise-constant density at the `N` mid-quantiles.
fn quantile_samples(v: &GridDensity1D, n: usize) -> Vec<f64> {
    let g = v.grid();
    let mut out = Vec::with_capacity(n);
    let (mut cell, mut below) = (0usize, 0.0);
    for k in 0..n {
        let q = (k as f64 + 0.5) / n as f64 * v.mass();
        while below + v.values()[cell] * g.dx() < q {
            below += v.values()[cell] * g.dx();
            cell += 1;
        }
        out.push(g.edge(cell) + (q - below) / v.values()[cell]);
    }
    out
}

/// `∫ |F_N − F| dx` by the midpoint rule on a fine mesh over the grid.
fn brute_w1(xs: &[f64], v: &GridDensity1D) -> f64 {
    let g = v.grid();
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = 1_200_000;
    let h = (g.x_max() - g.x_min()) / m as f64;
    let (mut acc, mut cdf, mut j) = (0.0, 0.0, 0);
    for k in 0..m {
        let x = g.x_min() + (k as f64 + 0.5) * h;
        let dens = v.values()[g.cell_of(x)];
        let mid = cdf + 0.5 * h * dens;
        while j < sorted.len() && sorted[j] <= x {
            j += 1;
        }
        acc += (j as f64 / sorted.len() as f64 - mid).abs() * h;
        cdf += h * dens;
    }
    acc
}

#[test]
fn w1_of_quantile_samples_against_their_density_is_small() {
    let grid = Grid1D::cell_centered(-6.0, 6.0, 0.05).unwrap();
    let v = GridDensity1D::from_initial_law(grid, &InitialLaw::gaussian(0.3, 1.2)).unwrap();
    for n in [200, 2000] {
        let xs = quantile_samples(&v, n);
        let law = EmpiricalLaw::new(xs.clone(), 0.0).unwrap();
        let w = w1_against_density(&law, &v).unwrap();
        assert!((w - brute_w1(&xs, &v)).abs() < 1e-5, "N={n}: {w}");
        assert!(w <= 3.5 / n as f64, "N={n}: {w}");
    }
    let shifted = EmpiricalLaw::new(quantile_samples(&v, 2000).iter().map(|x| x + 0.25).collect(), 0.0).unwrap();
    let w = w1_against_density(&shifted, &v).unwrap();
    assert!((w - 0.25).abs() < 2e-3, "{w}");
}

#[test]
fn compound_poisson_simulation_agrees_with_its_fpe() {
    let cs = CoefficientSet::builder(1, 1)
        .additive_jumps(1.0, MarkMeasure::dirac(3.0, 0.7).unwrap())
        .build()
        .unwrap();
    let mu0 = InitialLaw::gaussian(0.0, 0.3);
    let grid = Grid1D::cell_centered(-3.0, 10.0, 0.01).unwrap();
    let v0 = GridDensity1D::from_initial_law(grid, &mu0).unwrap();
    let traj = solve_fpe(&cs, &v0, 1.0, 0.01, &[]).unwrap();
    let (laws, _) = simulate_marginals(&cs, &mu0, &EnsembleConfig::new(1.0, 10, 20_000, 77), &[1.0]).unwrap();
    let w = w1_against_density(&laws[0], traj.last()).unwrap();
    assert!(w <= 0.02, "{w}");
}

#[test]
fn w1_against_atoms_matches_hand_values() {
    let law = EmpiricalLaw::new(vec![0.0, 0.0, 1.0, 3.0], 0.0).unwrap();
    // CDFs differ by 1/2 on [0,1) and 1/4 on [1,3) against δ_0
    assert!((w1_against_atoms(&law, &[(0.0, 1.0)]).unwrap() - 1.0).abs() < 1e-12);
    // against ½δ_0 + ½δ_2: |1/2−1/2| on [0,1), |3/4−1/2| on [1,2), |3/4−1| on [2,3)
    assert!((w1_against_atoms(&law, &[(0.0, 1.0), (2.0, 1.0)]).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn lambda_n_properties() {
    for k in 0..400 {
        let x = -20.0 + 0.1 * k as f64;
        let rho = (1.0 + x * x).sqrt();
        let mut prev = 0.0;
        for n in [1, 2, 4, 8, 16, 32] {
            let l = lambda_n_eval(n, &[x]);
            assert!(l <= rho + 1e-12 && l <= LAMBDA_PLATEAU * n as f64 + 1e-12);
            assert!(l >= prev - 1e-12, "λ_n increases with n");
            if rho <= n as f64 {
                assert!((l - rho).abs() < 1e-12);
            }
            prev = l;
        }
    }
    // concavity of λ on a fine grid
    for k in 1..299 {
        let r = 0.01 * k as f64;
        assert!(lambda(r - 0.01) + lambda(r + 0.01) - 2.0 * lambda(r) <= 1e-12);
    }
}

#[test]
fn lambda_moment_of_a_point_mass() {
    let grid = Grid1D::cell_centered(-5.0, 5.0, 0.01).unwrap();
    let v = GridDensity1D::from_fn(grid, |x| if (x - 3.0).abs() < 0.005 { 100.0 } else { 0.0 }).unwrap();
    let rho = (1.0f64 + 9.0).sqrt();
    assert!((lambda_moment(&v, 8) - rho).abs() < 1e-2);
    assert!((lambda_moment(&v, 1) - LAMBDA_PLATEAU).abs() < 1e-12);
}
