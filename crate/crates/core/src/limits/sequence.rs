use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mollifier::{mollify_coefficients, CacheSpec, MollifierScheme};
use crate::quadrature::{composite_gauss_legendre, gauss_legendre};
use crate::sde::{CoefficientSet, InitialLaw};
use crate::{Error, Result};

/// `γⁿ = nγ/(n+1)`.
pub fn gamma_seq(gamma: f64, n: u32) -> f64 {
    let n = n as f64;
    n * gamma / (n + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceKind {
    /// Mollified drift and diffusion, `γⁿ = nγ/(n+1)`.
    Mollify,
    /// `γⁿ = γ/n`; the limit has no jumps.
    KillJumps,
    /// `σⁿ = σ/n`, `γⁿ = nγ/(n+1)`; the limit has no Brownian part.
    KillDiffusion,
    /// `σⁿ = I/n`, `γⁿ = γ/n`; the limit is an ODE.
    KillBoth,
}

impl SequenceKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mollify => "mollify",
            Self::KillJumps => "kill-jumps",
            Self::KillDiffusion => "kill-diffusion",
            Self::KillBoth => "kill-both",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mollify" => Ok(Self::Mollify),
            "kill-jumps" => Ok(Self::KillJumps),
            "kill-diffusion" => Ok(Self::KillDiffusion),
            "kill-both" => Ok(Self::KillBoth),
            other => Err(Error::InvalidArgument(format!("unknown sequence kind '{other}'"))),
        }
    }

    /// Coefficients the sequence converges to.
    pub fn limit_of(self, base: &CoefficientSet) -> CoefficientSet {
        let d = base.dim();
        let zero_sigma = || -> crate::sde::DiffusionFn { Arc::new(|_, _, out: &mut [f64]| out.fill(0.0)) };
        let label = format!("{}~{}-limit", base.label(), self.name());
        match self {
            Self::Mollify => base.clone(),
            Self::KillJumps => base.clone().with_jump_scale(0.0).with_label(label),
            Self::KillDiffusion => base.clone().with_diffusion(zero_sigma(), d).with_label(label),
            Self::KillBoth => base
                .clone()
                .with_jump_scale(0.0)
                .with_diffusion(zero_sigma(), d)
                .with_label(label),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SequenceSpec {
    pub kind: SequenceKind,
    pub ns: Vec<u32>,
    pub base: CoefficientSet,
    pub target: CoefficientSet,
    pub initial: InitialLaw,
    pub cache: Option<CacheSpec>,
}

impl SequenceSpec {
    /// Spec whose target is the natural limit of `kind` applied to `base`.
    pub fn new(kind: SequenceKind, ns: Vec<u32>, base: CoefficientSet, initial: InitialLaw) -> Self {
        let target = kind.limit_of(&base);
        Self {
            kind,
            ns,
            base,
            target,
            initial,
            cache: None,
        }
    }

    pub fn with_target(mut self, target: CoefficientSet) -> Self {
        self.target = target;
        self
    }

    pub fn with_cache(mut self, cache: CacheSpec) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.ns[0] == 0 {
            return Err(Error::InvalidArgument("sequence needs n values >= 1".into()));
        }
        if self.ns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "n values must be strictly increasing, got {:?}",
                self.ns
            )));
        }
        if self.base.dim() != self.target.dim() || self.base.dim() != self.initial.dim() {
            return Err(Error::Dimension("base, target and initial law dimensions differ".into()));
        }
        self.initial.validate()
    }
}

/// One coefficient set per `n` in `spec.ns`.
pub fn build_sequence(spec: &SequenceSpec) -> Result<Vec<CoefficientSet>> {
    spec.validate()?;
    let base = &spec.base;
    let d = base.dim();
    let gamma = base.jump_scale();
    spec.ns
        .iter()
        .map(|&n| {
            let nf = n as f64;
            let label = format!("{}~{}[{n}]", base.label(), spec.kind.name());
            let cs = match spec.kind {
                SequenceKind::Mollify => {
                    let mut scheme = MollifierScheme::new(n, d)?;
                    if let Some(c) = spec.cache {
                        scheme = scheme.with_cache(c)?;
                    }
                    mollify_coefficients(base, &scheme)?.with_jump_scale(gamma_seq(gamma, n))
                }
                SequenceKind::KillJumps => base.clone().with_jump_scale(gamma / nf),
                SequenceKind::KillDiffusion => {
                    let sigma = base.diffusion_fn().clone();
                    let scaled: crate::sde::DiffusionFn = Arc::new(move |t, x, out: &mut [f64]| {
                        sigma(t, x, out);
                        out.iter_mut().for_each(|o| *o /= nf);
                    });
                    base.clone()
                        .with_diffusion(scaled, base.noise_dim())
                        .with_jump_scale(gamma_seq(gamma, n))
                }
                SequenceKind::KillBoth => {
                    let ident: crate::sde::DiffusionFn = Arc::new(move |_, _, out: &mut [f64]| {
                        out.fill(0.0);
                        for i in 0..d {
                            out[i * d + i] = 1.0 / nf;
                        }
                    });
                    // ‖I/n‖ ≤ √d covers the new noise uniformly in n
                    base.clone()
                        .with_diffusion(ident, d)
                        .with_jump_scale(gamma / nf)
                        .with_growth(base.c1() + (d as f64).sqrt(), base.c2())
                }
            };
            Ok(cs.with_label(label))
        })
        .collect()
}

/// `∫_{t_window} ∫_{box} (|bⁿ − b| + ‖aⁿ − a‖) dx dt`.
///
/// Time uses `n_quad`-point Gauss–Legendre, space composite 3-point rules
/// with `n_quad` panels per axis. Time-homogeneous pairs are evaluated once.
pub fn l1loc_discrepancy(
    cs_n: &CoefficientSet,
    cs: &CoefficientSet,
    lo: &[f64],
    hi: &[f64],
    t_window: (f64, f64),
    n_quad: usize,
) -> Result<f64> {
    let d = cs.dim();
    if cs_n.dim() != d || lo.len() != d || hi.len() != d {
        return Err(Error::Dimension("box and coefficient dimensions differ".into()));
    }
    if n_quad < 16 {
        return Err(Error::InvalidArgument(format!("n_quad must be at least 16, got {n_quad}")));
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a < b)) || !(t_window.0 <= t_window.1) {
        return Err(Error::InvalidArgument("empty integration box".into()));
    }
    let axes: Vec<Vec<(f64, f64)>> = lo
        .iter()
        .zip(hi)
        .map(|(&a, &b)| composite_gauss_legendre(a, b, n_quad, 3))
        .collect();
    let (ta, tb) = t_window;
    let times: Vec<(f64, f64)> = if cs.is_time_homogeneous() && cs_n.is_time_homogeneous() {
        vec![(ta, tb - ta)]
    } else {
        let (x, w) = gauss_legendre(n_quad);
        let (m, r) = (0.5 * (ta + tb), 0.5 * (tb - ta));
        x.iter().zip(&w).map(|(xi, wi)| (m + r * xi, r * wi)).collect()
    };
    let per = axes[0].len();
    let total = per.pow(d as u32);
    let mut x = vec![0.0; d];
    let (mut b1, mut b2) = (vec![0.0; d], vec![0.0; d]);
    let (mut a1, mut a2) = (vec![0.0; d * d], vec![0.0; d * d]);
    let mut acc = 0.0;
    for &(t, wt) in &times {
        for flat in 0..total {
            let mut k = flat;
            let mut w = wt;
            for (i, xi) in x.iter_mut().enumerate() {
                let (p, wp) = axes[i][k % per];
                k /= per;
                *xi = p;
                w *= wp;
            }
            cs_n.drift_into(t, &x, &mut b1);
            cs.drift_into(t, &x, &mut b2);
            cs_n.diffusion_matrix_into(t, &x, &mut a1);
            cs.diffusion_matrix_into(t, &x, &mut a2);
            let db = b1.iter().zip(&b2).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            let da = a1.iter().zip(&a2).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            acc += w * (db + da);
        }
    }
    Ok(acc)
}
