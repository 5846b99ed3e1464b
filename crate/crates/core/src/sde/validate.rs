use rand::Rng;
use serde::Serialize;

use super::coefficients::CoefficientSet;
use crate::rng::stream_rng;

/// Where a growth ratio was largest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthWitness {
    pub ratio: f64,
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub t_max: f64,
    /// Probes draw each coordinate from `[-radius, radius]`.
    pub radius: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { t_max: 1.0, radius: 10.0 }
    }
}

/// Spot-check of the linear-growth hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub n_probe: usize,
    /// `(|b| + ‖σ‖) / (C1 (1 + |x|))`.
    pub drift_diffusion: GrowthWitness,
    /// `Σ_k w_k |g|² / (C2 (1 + |x|)²)`.
    pub jump_square: GrowthWitness,
    /// `Σ_k w_k |g| / (√(ν(U) C2) (1 + |x|))`; implied by the square bound.
    pub jump_linear: GrowthWitness,
    pub violation: bool,
}

const RATIO_SLACK: f64 = 1e-12;

pub fn validate_coefficients(cs: &CoefficientSet, n_probe: usize, seed: u64) -> ValidationReport {
    validate_coefficients_with(cs, n_probe, seed, ValidationOptions::default())
}

/// Evaluates the growth ratios at `x = 0`, at `±radius` along each axis and at
/// `n_probe` uniform random points of `[0, t_max] × [-radius, radius]^d`.
pub fn validate_coefficients_with(
    cs: &CoefficientSet,
    n_probe: usize,
    seed: u64,
    opts: ValidationOptions,
) -> ValidationReport {
    let d = cs.dim();
    let mut probes: Vec<(f64, Vec<f64>)> = Vec::new();
    for t in [0.0, opts.t_max] {
        probes.push((t, vec![0.0; d]));
        for i in 0..d {
            for s in [-1.0, 1.0] {
                let mut x = vec![0.0; d];
                x[i] = s * opts.radius;
                probes.push((t, x));
            }
        }
    }
    let mut rng = stream_rng(seed, 0);
    for _ in 0..n_probe.max(1) {
        let t = opts.t_max * rng.random::<f64>();
        let x = (0..d).map(|_| opts.radius * (2.0 * rng.random::<f64>() - 1.0)).collect();
        probes.push((t, x));
    }

    let nu = cs.nu();
    let nu_mass = nu.total_mass();
    let mut b = vec![0.0; d];
    let mut sigma = vec![0.0; d * cs.noise_dim()];
    let mut g = vec![0.0; d];
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let empty = |_: ()| GrowthWitness {
        ratio: 0.0,
        t: 0.0,
        x: vec![0.0; d],
    };
    let (mut dd, mut js, mut jl) = (empty(()), empty(()), empty(()));

    for (t, x) in probes {
        let r = 1.0 + norm(&x);
        cs.drift_into(t, &x, &mut b);
        cs.diffusion_into(t, &x, &mut sigma);
        let ratio = (norm(&b) + norm(&sigma)) / (cs.c1() * r);
        let (mut sq, mut lin) = (0.0, 0.0);
        for atom in nu.atoms() {
            cs.jump_into(t, &x, &atom.mark, &mut g);
            let gn = norm(&g);
            sq += atom.weight * gn * gn;
            lin += atom.weight * gn;
        }
        let sq_ratio = sq / (cs.c2() * r * r);
        let lin_ratio = if nu_mass > 0.0 {
            lin / ((nu_mass * cs.c2()).sqrt() * r)
        } else {
            0.0
        };
        for (w, v) in [(&mut dd, ratio), (&mut js, sq_ratio), (&mut jl, lin_ratio)] {
            // NaN ratios count as violations
            if v > w.ratio || v.is_nan() {
                *w = GrowthWitness { ratio: v, t, x: x.clone() };
            }
        }
    }
    let bad = |w: &GrowthWitness| w.ratio.is_nan() || w.ratio > 1.0 + RATIO_SLACK;
    let violation = bad(&dd) || bad(&js);
    ValidationReport {
        n_probe,
        drift_diffusion: dd,
        jump_square: js,
        jump_linear: jl,
        violation,
    }
}
