use serde::Serialize;

use crate::fpe::GridDensity1D;
use crate::{Error, Result};

/// Samples of one fixed-time marginal, stored flat (`len · dim` values).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalLaw {
    dim: usize,
    samples: Vec<f64>,
    time: f64,
    fingerprint: u64,
}

impl EmpiricalLaw {
    pub fn new(samples: Vec<f64>, time: f64) -> Result<Self> {
        Self::with_dim(samples, 1, time)
    }

    pub fn with_dim(samples: Vec<f64>, dim: usize, time: f64) -> Result<Self> {
        if dim == 0 || samples.is_empty() || !samples.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "empirical law needs a nonempty sample ({} values, dimension {dim})",
                samples.len()
            )));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("empirical law contains non-finite samples".into()));
        }
        Ok(Self {
            dim,
            samples,
            time,
            fingerprint: 0,
        })
    }

    pub fn with_fingerprint(mut self, fp: u64) -> Self {
        self.fingerprint = fp;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Unbiased sample variance (scalar laws).
    pub fn variance(&self) -> f64 {
        let n = self.samples.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let m = self.mean();
        self.samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    }

    fn sorted(&self) -> Vec<f64> {
        let mut s = self.samples.clone();
        s.sort_by(f64::total_cmp);
        s
    }

    fn require_scalar(&self) -> Result<()> {
        if self.dim == 1 {
            Ok(())
        } else {
            Err(Error::Dimension(format!("W1 is computed for scalar laws, got dimension {}", self.dim)))
        }
    }
}

/// `∫ |F_A − F_B|` for two sorted weighted point sets with unit total weight.
fn w1_discrete(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut prev: Option<f64> = None;
    let mut acc = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => unreachable!(),
        };
        if let Some(p) = prev {
            acc += (fa - fb).abs() * (x - p);
        }
        while i < a.len() && a[i].0 == x {
            fa += a[i].1;
            i += 1;
        }
        while j < b.len() && b[j].0 == x {
            fb += b[j].1;
            j += 1;
        }
        prev = Some(x);
    }
    acc
}

/// Exact `W1` between two scalar empirical laws: sorted-sample coupling for
/// equal sizes, the CDF-difference integral otherwise.
pub fn wasserstein1(a: &EmpiricalLaw, b: &EmpiricalLaw) -> Result<f64> {
    a.require_scalar()?;
    b.require_scalar()?;
    let (sa, sb) = (a.sorted(), b.sorted());
    if sa.len() == sb.len() {
        let n = sa.len() as f64;
        return Ok(sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / n);
    }
    let wa = 1.0 / sa.len() as f64;
    let wb = 1.0 / sb.len() as f64;
    let pa: Vec<(f64, f64)> = sa.into_iter().map(|x| (x, wa)).collect();
    let pb: Vec<(f64, f64)> = sb.into_iter().map(|x| (x, wb)).collect();
    Ok(w1_discrete(&pa, &pb))
}

/// `W1` between an empirical law and a finite weighted law `Σ w_k δ_{x_k}`
/// (weights are normalised).
pub fn w1_against_atoms(a: &EmpiricalLaw, atoms: &[(f64, f64)]) -> Result<f64> {
    a.require_scalar()?;
    let total: f64 = atoms.iter().map(|p| p.1).sum();
    if !(total > 0.0) || atoms.iter().any(|p| !(p.1 >= 0.0 && p.0.is_finite())) {
        return Err(Error::InvalidArgument("atomic law needs nonnegative weights with positive sum".into()));
    }
    let mut pb: Vec<(f64, f64)> = atoms.iter().map(|&(x, w)| (x, w / total)).collect();
    pb.sort_by(|p, q| p.0.total_cmp(&q.0));
    let w = 1.0 / a.len() as f64;
    let pa: Vec<(f64, f64)> = a.sorted().into_iter().map(|x| (x, w)).collect();
    Ok(w1_discrete(&pa, &pb))
}

/// `W1(A, δ_c) = mean |x − c|`.
pub fn w1_to_point(a: &EmpiricalLaw, c: f64) -> Result<f64> {
    a.require_scalar()?;
    Ok(a.samples.iter().map(|x| (x - c).abs()).sum::<f64>() / a.len() as f64)
}

/// Largest leaked mass for which a grid density is still compared.
pub const MAX_LEAK_FOR_W1: f64 = 1e-3;

/// `∫ |F_emp − F_v|`, exact over the merged breakpoints (samples and cell
/// edges). `F_v` is piecewise linear and renormalised to the grid mass.
pub fn w1_against_density(a: &EmpiricalLaw, v: &GridDensity1D) -> Result<f64> {
    a.require_scalar()?;
    let mass = v.mass();
    if mass < 1.0 - MAX_LEAK_FOR_W1 {
        return Err(Error::ExcessLeak {
            leaked: 1.0 - mass,
            limit: MAX_LEAK_FOR_W1,
        });
    }
    let grid = v.grid();
    let dx = grid.dx();
    let n = grid.n_cells();
    let vals = v.values();
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    for x in vals {
        cum.push(cum.last().unwrap() + x * dx / mass);
    }
    // F_v on cell i at offset x
    let fv = |i: usize, x: f64| (cum[i] + vals[i] * (x - grid.edge(i)) / mass).clamp(0.0, 1.0);

    let samples = a.sorted();
    let ns = samples.len();
    let w = 1.0 / ns as f64;

    // |c − L| integrated over [p, q] with L linear from lp to lq
    let seg = |c: f64, lp: f64, lq: f64, h: f64| {
        let (d1, d2) = (lp - c, lq - c);
        if d1 * d2 >= 0.0 {
            0.5 * (d1.abs() + d2.abs()) * h
        } else {
            h * (d1 * d1 + d2 * d2) / (2.0 * (d1.abs() + d2.abs()))
        }
    };

    let mut acc = 0.0;
    let mut k = 0;
    let mut femp = 0.0;
    // left of the grid: F_v = 0
    while k < ns && samples[k] < grid.x_min() {
        let next = if k + 1 < ns { samples[k + 1].min(grid.x_min()) } else { grid.x_min() };
        femp += w;
        acc += femp * (next - samples[k]);
        k += 1;
    }
    // inside the grid: cell by cell, splitting at samples
    for i in 0..n {
        let (lo, hi) = (grid.edge(i), grid.edge(i + 1));
        let mut p = lo;
        loop {
            while k < ns && samples[k] <= p {
                femp += w;
                k += 1;
            }
            let q = if k < ns && samples[k] < hi { samples[k] } else { hi };
            acc += seg(femp.min(1.0), fv(i, p), fv(i, q), q - p);
            if q >= hi {
                break;
            }
            p = q;
        }
    }
    // right of the grid: F_v = 1
    let mut p = grid.x_max();
    while k < ns {
        while k < ns && samples[k] <= p {
            femp += w;
            k += 1;
        }
        if k < ns {
            acc += (1.0 - femp).abs() * (samples[k] - p);
            p = samples[k];
        }
    }
    Ok(acc)
}
