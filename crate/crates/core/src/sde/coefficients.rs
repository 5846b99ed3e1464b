use std::fmt;
use std::sync::Arc;

use super::mark::MarkMeasure;
use crate::{Error, Result};

/// `b(t, x)` written into a length-`d` buffer.
pub type DriftFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// `σ(t, x)` written row-major into a length-`d·m` buffer.
pub type DiffusionFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// `g(t, x, u)` written into a length-`d` buffer.
pub type JumpFn = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;

/// How a mark `u` turns into a jump of the state.
#[derive(Clone)]
pub enum JumpAmplitude {
    /// `g(t, x, u) = u`: state-independent shifts, the form the grid solver handles.
    Additive,
    General(JumpFn),
}

impl fmt::Debug for JumpAmplitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpAmplitude::Additive => f.write_str("Additive"),
            JumpAmplitude::General(_) => f.write_str("General(..)"),
        }
    }
}

/// Drift, diffusion and jump data of one SDE, with its growth constants.
///
/// The jump coefficient is `f(t,x,u) = γ·g(t,x,u)`. `c1` bounds
/// `|b| + ‖σ‖ ≤ c1 (1 + |x|)` and `c2` bounds `Σ_k w_k |g(t,x,u_k)|² ≤ c2 (1 + |x|)²`.
#[derive(Clone)]
pub struct CoefficientSet {
    label: String,
    dim: usize,
    noise_dim: usize,
    drift: DriftFn,
    diffusion: DiffusionFn,
    jump_scale: f64,
    amplitude: JumpAmplitude,
    nu: MarkMeasure,
    c1: f64,
    c2: f64,
    time_homogeneous: bool,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("jump_scale", &self.jump_scale)
            .field("amplitude", &self.amplitude)
            .field("nu", &self.nu)
            .field("c1", &self.c1)
            .field("c2", &self.c2)
            .finish_non_exhaustive()
    }
}

fn zero_fn() -> DriftFn {
    Arc::new(|_, _, out: &mut [f64]| out.fill(0.0))
}

impl CoefficientSet {
    pub fn builder(dim: usize, noise_dim: usize) -> CoefficientSetBuilder {
        CoefficientSetBuilder {
            set: CoefficientSet {
                label: String::new(),
                dim,
                noise_dim,
                drift: zero_fn(),
                diffusion: zero_fn(),
                jump_scale: 0.0,
                amplitude: JumpAmplitude::Additive,
                nu: MarkMeasure::zero(),
                c1: 1.0,
                c2: 1.0,
                time_homogeneous: false,
            },
        }
    }

    /// All coefficients identically zero, in one dimension.
    pub fn zero() -> Self {
        Self::builder(1, 1).label("zero").time_homogeneous(true).build().expect("zero set is valid")
    }

    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }
    /// `γ`.
    pub fn jump_scale(&self) -> f64 {
        self.jump_scale
    }
    pub fn amplitude(&self) -> &JumpAmplitude {
        &self.amplitude
    }
    pub fn nu(&self) -> &MarkMeasure {
        &self.nu
    }
    pub fn c1(&self) -> f64 {
        self.c1
    }
    pub fn c2(&self) -> f64 {
        self.c2
    }
    pub fn is_time_homogeneous(&self) -> bool {
        self.time_homogeneous
    }
    pub fn has_additive_jumps(&self) -> bool {
        matches!(self.amplitude, JumpAmplitude::Additive)
    }
    /// True when no jump is ever applied (`γ = 0` or `ν = 0`).
    pub fn jumps_vanish(&self) -> bool {
        self.jump_scale == 0.0 || self.nu.is_zero()
    }

    pub fn drift_fn(&self) -> &DriftFn {
        &self.drift
    }
    pub fn diffusion_fn(&self) -> &DiffusionFn {
        &self.diffusion
    }

    #[inline]
    pub fn drift_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.drift)(t, x, out)
    }

    #[inline]
    pub fn diffusion_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(t, x, out)
    }

    #[inline]
    pub fn jump_into(&self, t: f64, x: &[f64], mark: &[f64], out: &mut [f64]) {
        match &self.amplitude {
            JumpAmplitude::Additive => out.copy_from_slice(mark),
            JumpAmplitude::General(g) => g(t, x, mark, out),
        }
    }

    /// `a = ½ σσ*` written row-major into a `d×d` buffer.
    pub fn diffusion_matrix_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let (d, m) = (self.dim, self.noise_dim);
        let mut sigma = vec![0.0; d * m];
        self.diffusion_into(t, x, &mut sigma);
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..m {
                    s += sigma[i * m + k] * sigma[j * m + k];
                }
                out[i * d + j] = 0.5 * s;
            }
        }
    }

    /// Scalar drift for `d = 1`.
    #[inline]
    pub fn drift_1d(&self, t: f64, x: f64) -> f64 {
        let mut out = [0.0];
        (self.drift)(t, &[x], &mut out);
        out[0]
    }

    /// Scalar `a(t,x) = ½ Σ_k σ_{1k}²` for `d = 1`.
    #[inline]
    pub fn diffusion_coeff_1d(&self, t: f64, x: f64) -> f64 {
        if self.noise_dim == 1 {
            let mut out = [0.0];
            (self.diffusion)(t, &[x], &mut out);
            0.5 * out[0] * out[0]
        } else {
            let mut out = vec![0.0; self.noise_dim];
            (self.diffusion)(t, &[x], &mut out);
            0.5 * out.iter().map(|s| s * s).sum::<f64>()
        }
    }

    /// Scalar `g(t, x, u)` for `d = 1`.
    #[inline]
    pub fn jump_1d(&self, t: f64, x: f64, mark: &[f64]) -> f64 {
        match &self.amplitude {
            JumpAmplitude::Additive => mark[0],
            JumpAmplitude::General(g) => {
                let mut out = [0.0];
                g(t, &[x], mark, &mut out);
                out[0]
            }
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_drift(mut self, drift: DriftFn) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_diffusion(mut self, diffusion: DiffusionFn, noise_dim: usize) -> Self {
        self.diffusion = diffusion;
        self.noise_dim = noise_dim;
        self
    }

    pub fn with_jump_scale(mut self, gamma: f64) -> Self {
        self.jump_scale = gamma;
        self
    }

    pub fn with_growth(mut self, c1: f64, c2: f64) -> Self {
        self.c1 = c1;
        self.c2 = c2;
        self
    }

    pub fn with_time_homogeneous(mut self, yes: bool) -> Self {
        self.time_homogeneous = yes;
        self
    }

    pub fn with_drift_offset(self, offset: f64) -> Self {
        let base = self.drift.clone();
        self.with_drift(Arc::new(move |t, x, out: &mut [f64]| {
            base(t, x, out);
            out.iter_mut().for_each(|o| *o += offset);
        }))
    }
}

pub struct CoefficientSetBuilder {
    set: CoefficientSet,
}

impl CoefficientSetBuilder {
    pub fn label(mut self, label: impl Into<String>) -> Self {
        self.set.label = label.into();
        self
    }

    pub fn drift(mut self, f: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.set.drift = Arc::new(f);
        self
    }

    /// Scalar drift `b(t, x)`; only meaningful for `d = 1`.
    pub fn scalar_drift(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.set.drift = Arc::new(move |t, x: &[f64], out: &mut [f64]| out[0] = f(t, x[0]));
        self
    }

    pub fn diffusion(mut self, f: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.set.diffusion = Arc::new(f);
        self
    }

    /// Scalar diffusion `σ(t, x)`; only meaningful for `d = m = 1`.
    pub fn scalar_diffusion(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.set.diffusion = Arc::new(move |t, x: &[f64], out: &mut [f64]| out[0] = f(t, x[0]));
        self
    }

    pub fn jumps(mut self, gamma: f64, amplitude: JumpAmplitude, nu: MarkMeasure) -> Self {
        self.set.jump_scale = gamma;
        self.set.amplitude = amplitude;
        self.set.nu = nu;
        self
    }

    /// Jumps `γ·u` with marks drawn from `nu`.
    pub fn additive_jumps(self, gamma: f64, nu: MarkMeasure) -> Self {
        self.jumps(gamma, JumpAmplitude::Additive, nu)
    }

    pub fn growth(mut self, c1: f64, c2: f64) -> Self {
        self.set.c1 = c1;
        self.set.c2 = c2;
        self
    }

    pub fn time_homogeneous(mut self, yes: bool) -> Self {
        self.set.time_homogeneous = yes;
        self
    }

    pub fn build(self) -> Result<CoefficientSet> {
        let s = self.set;
        if s.dim == 0 || s.noise_dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "state and noise dimensions must be positive (got d = {}, m = {})",
                s.dim, s.noise_dim
            )));
        }
        if !(s.c1 > 0.0 && s.c1.is_finite() && s.c2 > 0.0 && s.c2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "growth constants must be positive (got C1 = {}, C2 = {})",
                s.c1, s.c2
            )));
        }
        if !s.jump_scale.is_finite() {
            return Err(Error::InvalidArgument(format!("jump scale {} is not finite", s.jump_scale)));
        }
        if s.has_additive_jumps() {
            if let Some(md) = s.nu.mark_dim() {
                if md != s.dim {
                    return Err(Error::Dimension(format!(
                        "additive jumps need marks of dimension {} (got {md})",
                        s.dim
                    )));
                }
            }
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_helpers_match_general_evaluation() {
        let cs = CoefficientSet::builder(1, 2)
            .drift(|_, x, out| out[0] = -x[0])
            .diffusion(|_, _, out| {
                out[0] = 1.0;
                out[1] = 2.0;
            })
            .additive_jumps(0.5, MarkMeasure::dirac(1.0, 0.3).unwrap())
            .build()
            .unwrap();
        assert_eq!(cs.drift_1d(0.0, 2.0), -2.0);
        assert_eq!(cs.diffusion_coeff_1d(0.0, 2.0), 2.5);
        let mut a = [0.0];
        cs.diffusion_matrix_into(0.0, &[2.0], &mut a);
        assert_eq!(a[0], 2.5);
        assert_eq!(cs.jump_1d(0.0, 5.0, &[0.3]), 0.3);
        assert!(!cs.jumps_vanish());
    }

    #[test]
    fn builder_rejects_bad_constants_and_dims() {
        assert!(CoefficientSet::builder(0, 1).build().is_err());
        assert!(CoefficientSet::builder(1, 1).growth(0.0, 1.0).build().is_err());
        let nu = MarkMeasure::new(vec![super::super::Atom { mark: vec![1.0, 1.0], weight: 1.0 }]).unwrap();
        assert!(CoefficientSet::builder(1, 1).additive_jumps(1.0, nu).build().is_err());
    }

    #[test]
    fn drift_offset_shifts_every_component() {
        let cs = CoefficientSet::zero().with_drift_offset(0.5);
        assert_eq!(cs.drift_1d(0.3, -4.0), 0.5);
    }
}
