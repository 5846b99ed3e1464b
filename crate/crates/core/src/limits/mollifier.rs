use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::quadrature::composite_gauss_legendre;
use crate::sde::CoefficientSet;
use crate::{Error, Result};

/// `∫_{-1}^{1} exp(−1/(1−x²)) dx`.
pub const MOLLIFIER_MASS: f64 = 0.443_993_816_168_079_4;

const PANELS: usize = 2;
const ORDER: usize = 16;
const NEGATIVE_TOL: f64 = 1e-12;

fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// Unit-mass `exp(−1/(1−|x|²))` on the unit ball of `ℝ^d`, `d ≤ 3`.
pub fn mollifier_density(x: &[f64]) -> f64 {
    bump(x.iter().map(|v| v * v).sum()) / unit_mass(x.len())
}

/// Mass of the unnormalised bump in dimension `d`, by radial quadrature.
fn unit_mass(d: usize) -> f64 {
    static MASSES: OnceLock<[f64; 4]> = OnceLock::new();
    let m = MASSES.get_or_init(|| {
        let nodes = composite_gauss_legendre(0.0, 1.0, 400, 16);
        let radial = |k: i32| nodes.iter().map(|&(r, w)| w * r.powi(k) * bump(r * r)).sum::<f64>();
        [
            1.0,
            2.0 * radial(0),
            2.0 * std::f64::consts::PI * radial(1),
            4.0 * std::f64::consts::PI * radial(2),
        ]
    });
    assert!((1..=3).contains(&d), "mollifier is tabulated for d <= 3");
    m[d]
}

/// Tabulates time-homogeneous scalar mollified coefficients on
/// `[-half_width, half_width]` and interpolates linearly inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheSpec {
    pub half_width: f64,
    pub points: usize,
}

/// Quadrature for `∫_{B_{1/n}} φ_n(z) f(x − z) dz`. The discrete weights are
/// renormalised to sum to one so constants are reproduced exactly.
#[derive(Debug, Clone)]
pub struct MollifierScheme {
    n: u32,
    dim: usize,
    /// Nodes on `B₁`, flattened; scaled by `1/n` when applied.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    raw_mass: f64,
    cache: Option<CacheSpec>,
}

impl MollifierScheme {
    pub fn new(n: u32, dim: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("mollifier index n must be at least 1".into()));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::Unsupported(format!("mollification in dimension {dim}")));
        }
        let axis = composite_gauss_legendre(-1.0, 1.0, PANELS, ORDER);
        let c = 1.0 / unit_mass(dim);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let total = axis.len().pow(dim as u32);
        let mut z = vec![0.0; dim];
        for flat in 0..total {
            let mut k = flat;
            let mut w = c;
            for zi in z.iter_mut() {
                let (x, wx) = axis[k % axis.len()];
                k /= axis.len();
                *zi = x;
                w *= wx;
            }
            let r2: f64 = z.iter().map(|v| v * v).sum();
            let wt = w * bump(r2);
            if wt > 0.0 {
                nodes.extend_from_slice(&z);
                weights.push(wt);
            }
        }
        let raw_mass: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= raw_mass);
        Ok(Self {
            n,
            dim,
            nodes,
            weights,
            raw_mass,
            cache: None,
        })
    }

    pub fn with_cache(mut self, cache: CacheSpec) -> Result<Self> {
        if !(cache.half_width > 0.0) || cache.points < 2 {
            return Err(Error::InvalidArgument("cache needs a positive width and at least 2 points".into()));
        }
        self.cache = Some(cache);
        Ok(self)
    }

    pub fn n(&self) -> u32 {
        self.n
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.weights.len()
    }
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
    pub fn cache(&self) -> Option<CacheSpec> {
        self.cache
    }

    /// Quadrature mass of `φ` before renormalisation.
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `(z/n, w)` pairs.
    pub fn offsets(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.nodes.chunks(self.dim).zip(self.weights.iter().copied())
    }

    /// `Σ_k w_k f(x − z_k/n)` for a vector-valued `f` with `out.len()` outputs.
    pub fn convolve(&self, x: &[f64], out: &mut [f64], mut f: impl FnMut(&[f64], &mut [f64])) {
        let inv = 1.0 / self.n as f64;
        let mut y = vec![0.0; self.dim];
        let mut buf = vec![0.0; out.len()];
        out.iter_mut().for_each(|o| *o = 0.0);
        for (z, w) in self.offsets() {
            for ((yi, xi), zi) in y.iter_mut().zip(x).zip(z) {
                *yi = xi - zi * inv;
            }
            f(&y, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += w * b;
            }
        }
    }
}

/// Linear interpolation table on a uniform grid.
struct Table {
    lo: f64,
    h: f64,
    values: Vec<f64>,
}

impl Table {
    fn build(spec: CacheSpec, f: impl Fn(f64) -> f64) -> Self {
        let lo = -spec.half_width;
        let h = 2.0 * spec.half_width / (spec.points - 1) as f64;
        Self {
            lo,
            h,
            values: (0..spec.points).map(|i| f(lo + i as f64 * h)).collect(),
        }
    }

    fn get(&self, x: f64) -> Option<f64> {
        let s = (x - self.lo) / self.h;
        if !(s >= 0.0) || s > (self.values.len() - 1) as f64 {
            return None;
        }
        let i = (s.floor() as usize).min(self.values.len() - 2);
        let th = s - i as f64;
        Some(self.values[i] * (1.0 - th) + self.values[i + 1] * th)
    }
}

/// `σ = √(2a)` for a symmetric PSD `d×d` matrix, row-major.
fn psd_sqrt_2a(a: &[f64], d: usize, out: &mut [f64]) -> Result<()> {
    let m = DMatrix::from_row_slice(d, d, a);
    let eig = SymmetricEigen::new(m);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let mut lam = eig.eigenvalues.clone();
    for v in lam.iter_mut() {
        if *v < -NEGATIVE_TOL * scale {
            return Err(Error::NegativeDiffusion {
                value: *v,
                x: Vec::new(),
            });
        }
        *v = (2.0 * v.max(0.0)).sqrt();
    }
    let q = &eig.eigenvectors;
    let s = q * DMatrix::from_diagonal(&lam) * q.transpose();
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = s[(i, j)];
        }
    }
    Ok(())
}

/// Mollified `aⁿ(t, x)` (row-major `d×d`).
fn mollified_a(base: &CoefficientSet, scheme: &MollifierScheme, t: f64, x: &[f64], out: &mut [f64]) {
    scheme.convolve(x, out, |y, buf| base.diffusion_matrix_into(t, y, buf));
}

/// `bⁿ = φ_n * b`, `aⁿ = φ_n * a`, `σⁿ = √(2aⁿ)`; jumps untouched.
///
/// The growth constant is widened to `2(1 + 1/n) C1`, which bounds
/// `|bⁿ| + ‖σⁿ‖` whenever the base satisfies its hypothesis with `C1`.
pub fn mollify_coefficients(base: &CoefficientSet, scheme: &MollifierScheme) -> Result<CoefficientSet> {
    let d = base.dim();
    if d != scheme.dim() {
        return Err(Error::Dimension(format!(
            "scheme is for dimension {}, coefficients have {d}",
            scheme.dim()
        )));
    }
    let n = scheme.n();
    let scheme = Arc::new(scheme.clone());
    let b0 = base.clone();
    let cache = scheme.cache().filter(|_| d == 1 && base.is_time_homogeneous());

    let drift: crate::sde::DriftFn = match cache {
        Some(spec) => {
            let (b, s) = (b0.clone(), scheme.clone());
            let table = Table::build(spec, move |x| {
                let mut o = [0.0];
                s.convolve(&[x], &mut o, |y, buf| b.drift_into(0.0, y, buf));
                o[0]
            });
            let (b, s) = (b0.clone(), scheme.clone());
            Arc::new(move |t, x: &[f64], out: &mut [f64]| match table.get(x[0]) {
                Some(v) => out[0] = v,
                None => s.convolve(x, out, |y, buf| b.drift_into(t, y, buf)),
            })
        }
        None => {
            let (b, s) = (b0.clone(), scheme.clone());
            Arc::new(move |t, x: &[f64], out: &mut [f64]| s.convolve(x, out, |y, buf| b.drift_into(t, y, buf)))
        }
    };

    let diffusion: crate::sde::DiffusionFn = if d == 1 {
        let scalar_a = {
            let (b, s) = (b0.clone(), scheme.clone());
            move |t: f64, x: f64| {
                let mut o = [0.0];
                mollified_a(&b, &s, t, &[x], &mut o);
                o[0]
            }
        };
        match cache {
            Some(spec) => {
                let table = Table::build(spec, {
                    let f = scalar_a.clone();
                    move |x| f(0.0, x)
                });
                Arc::new(move |t, x: &[f64], out: &mut [f64]| {
                    let a = table.get(x[0]).unwrap_or_else(|| scalar_a(t, x[0]));
                    out[0] = (2.0 * a.max(0.0)).sqrt();
                })
            }
            None => Arc::new(move |t, x: &[f64], out: &mut [f64]| {
                out[0] = (2.0 * scalar_a(t, x[0]).max(0.0)).sqrt();
            }),
        }
    } else {
        let (b, s) = (b0.clone(), scheme.clone());
        Arc::new(move |t, x: &[f64], out: &mut [f64]| {
            let mut a = vec![0.0; d * d];
            mollified_a(&b, &s, t, x, &mut a);
            if psd_sqrt_2a(&a, d, out).is_err() {
                out.iter_mut().for_each(|o| *o = f64::NAN);
            }
        })
    };

    let c1 = 2.0 * (1.0 + 1.0 / n as f64) * base.c1();
    Ok(base
        .clone()
        .with_label(format!("{}~moll{n}", base.label()))
        .with_drift(drift)
        .with_diffusion(diffusion, d)
        .with_growth(c1, base.c2()))
}

/// Mollified diffusion matrix at one point, failing if it is not PSD.
pub fn mollified_diffusion_matrix(
    base: &CoefficientSet,
    scheme: &MollifierScheme,
    t: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    let d = base.dim();
    let mut a = vec![0.0; d * d];
    mollified_a(base, scheme, t, x, &mut a);
    let mut s = vec![0.0; d * d];
    psd_sqrt_2a(&a, d, &mut s).map_err(|e| match e {
        Error::NegativeDiffusion { value, .. } => Error::NegativeDiffusion { value, x: x.to_vec() },
        other => other,
    })?;
    Ok(a)
}
