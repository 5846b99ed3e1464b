use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::PolarNormal;
use crate::{Error, Result};

/// Initial law `μ0` of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum InitialLaw {
    Dirac { point: Vec<f64> },
    /// Independent coordinates `N(mean_i, std²)`.
    Gaussian { mean: Vec<f64>, std: f64 },
    /// Uniform on `[lo, hi]`, scalar state only.
    Uniform { lo: f64, hi: f64 },
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

impl InitialLaw {
    pub fn dirac(x: f64) -> Self {
        InitialLaw::Dirac { point: vec![x] }
    }

    pub fn gaussian(mean: f64, std: f64) -> Self {
        InitialLaw::Gaussian { mean: vec![mean], std }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        InitialLaw::Uniform { lo, hi }
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialLaw::Dirac { point } => point.len(),
            InitialLaw::Gaussian { mean, .. } => mean.len(),
            InitialLaw::Uniform { .. } => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            InitialLaw::Dirac { point } => !point.is_empty() && point.iter().all(|p| p.is_finite()),
            InitialLaw::Gaussian { mean, std } => {
                !mean.is_empty() && mean.iter().all(|p| p.is_finite()) && std.is_finite() && *std >= 0.0
            }
            InitialLaw::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("malformed initial law {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, normal: &mut PolarNormal, out: &mut [f64]) {
        match self {
            InitialLaw::Dirac { point } => out.copy_from_slice(point),
            InitialLaw::Gaussian { mean, std } => {
                for (o, m) in out.iter_mut().zip(mean) {
                    *o = m + std * normal.sample(rng);
                }
            }
            InitialLaw::Uniform { lo, hi } => out[0] = lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    /// `μ0(|·|)` when it has a closed form.
    pub fn first_abs_moment(&self) -> Option<f64> {
        match self {
            InitialLaw::Dirac { point } => Some(point.iter().map(|p| p * p).sum::<f64>().sqrt()),
            InitialLaw::Gaussian { mean, std } if mean.len() == 1 => {
                let (m, s) = (mean[0], *std);
                if s == 0.0 {
                    return Some(m.abs());
                }
                // folded normal mean
                Some(s * (2.0 / PI).sqrt() * (-m * m / (2.0 * s * s)).exp() + m * (1.0 - 2.0 * std_normal_cdf(-m / s)))
            }
            InitialLaw::Gaussian { mean, std } if *std == 0.0 => Some(mean.iter().map(|p| p * p).sum::<f64>().sqrt()),
            InitialLaw::Gaussian { .. } => None,
            InitialLaw::Uniform { lo, hi } => {
                let (a, b) = (*lo, *hi);
                let prim = |x: f64| 0.5 * x * x.abs();
                Some((prim(b) - prim(a)) / (b - a))
            }
        }
    }

    pub fn mean_1d(&self) -> Option<f64> {
        match self {
            InitialLaw::Dirac { point } if point.len() == 1 => Some(point[0]),
            InitialLaw::Gaussian { mean, .. } if mean.len() == 1 => Some(mean[0]),
            InitialLaw::Uniform { lo, hi } => Some(0.5 * (lo + hi)),
            _ => None,
        }
    }

    /// Distribution function for scalar laws.
    pub fn cdf_1d(&self, x: f64) -> Option<f64> {
        match self {
            InitialLaw::Dirac { point } if point.len() == 1 => Some(if x >= point[0] { 1.0 } else { 0.0 }),
            InitialLaw::Gaussian { mean, std } if mean.len() == 1 => {
                if *std == 0.0 {
                    Some(if x >= mean[0] { 1.0 } else { 0.0 })
                } else {
                    Some(std_normal_cdf((x - mean[0]) / std))
                }
            }
            InitialLaw::Uniform { lo, hi } => Some(((x - lo) / (hi - lo)).clamp(0.0, 1.0)),
            _ => None,
        }
    }
}
