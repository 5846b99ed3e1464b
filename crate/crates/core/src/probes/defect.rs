use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fpe::SmoothFunction;
use crate::sde::{CoefficientSet, PathEnsemble, PathSample};
use crate::{Error, Result};

const MAX_FACTORS: usize = 3;
const CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalKind {
    Constant { value: f64 },
    /// `Π_j sigmoid(slope_j · (w_{τ_j} − center))`.
    SigmoidProduct { times: Vec<f64>, slopes: Vec<f64>, center: f64 },
}

/// A bounded path functional `χ` depending only on `w` up to `cutoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFunctional {
    pub cutoff: f64,
    pub kind: FunctionalKind,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl PathFunctional {
    pub fn constant(cutoff: f64, value: f64) -> Self {
        Self {
            cutoff,
            kind: FunctionalKind::Constant { value },
        }
    }

    pub fn sigmoid_product(cutoff: f64, times: Vec<f64>, slopes: Vec<f64>, center: f64) -> Result<Self> {
        if times.is_empty() || times.len() > MAX_FACTORS || times.len() != slopes.len() {
            return Err(Error::InvalidArgument(format!(
                "sigmoid product takes 1 to {MAX_FACTORS} (time, slope) pairs"
            )));
        }
        if times.iter().any(|&t| !(0.0..=cutoff).contains(&t)) {
            return Err(Error::InvalidArgument(format!(
                "evaluation times must lie in [0, {cutoff}]"
            )));
        }
        Ok(Self {
            cutoff,
            kind: FunctionalKind::SigmoidProduct { times, slopes, center },
        })
    }

    /// `sup |χ|`.
    pub fn bound(&self) -> f64 {
        match &self.kind {
            FunctionalKind::Constant { value } => value.abs(),
            FunctionalKind::SigmoidProduct { .. } => 1.0,
        }
    }

    pub fn evaluate(&self, path: &PathSample) -> f64 {
        match &self.kind {
            FunctionalKind::Constant { value } => *value,
            FunctionalKind::SigmoidProduct { times, slopes, center } => times
                .iter()
                .zip(slopes)
                .map(|(&t, &k)| sigmoid(k * (path.value_at(t)[0] - center)))
                .product(),
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            FunctionalKind::Constant { value } => format!("const({value})"),
            FunctionalKind::SigmoidProduct { times, slopes, center } => times
                .iter()
                .zip(slopes)
                .map(|(t, k)| format!("sig({k}*(w[{t}]-{center}))"))
                .collect::<Vec<_>>()
                .join("*"),
        }
    }
}

/// Dictionary of `B_s`-measurable functionals used when probing the
/// martingale property on `[s, t]`.
pub fn chi_dictionary(s: f64, center: f64) -> Vec<PathFunctional> {
    let mk = |times: Vec<f64>, slopes: Vec<f64>| PathFunctional::sigmoid_product(s, times, slopes, center).unwrap();
    vec![
        PathFunctional::constant(s, 1.0),
        mk(vec![s], vec![1.0]),
        mk(vec![0.5 * s], vec![-1.0]),
        mk(vec![0.0, 0.5 * s, s], vec![1.0, 1.0, -1.0]),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectReport {
    pub phi: String,
    pub chi: String,
    pub s: f64,
    pub t: f64,
    pub n_paths: usize,
    /// Sample mean of `χ(w) · [φ(w_t) − φ(w_s) − ∫_s^t 𝓛φ(r, w_r) dr]`.
    pub estimate: f64,
    pub stderr: f64,
}

impl DefectReport {
    /// `|estimate| / stderr`; zero if both vanish.
    pub fn z_score(&self) -> f64 {
        if self.estimate == 0.0 {
            0.0
        } else {
            self.estimate.abs() / self.stderr
        }
    }
}

/// Shared generator evaluation against several test functions at one point.
struct GeneratorAt<'a> {
    cs: &'a CoefficientSet,
    shifts: Vec<(f64, f64)>,
}

impl<'a> GeneratorAt<'a> {
    fn new(cs: &'a CoefficientSet) -> Self {
        Self {
            cs,
            shifts: Vec::with_capacity(cs.nu().atoms().len()),
        }
    }

    fn eval<F: SmoothFunction>(&mut self, t: f64, x: f64, phis: &[F], out: &mut [f64]) {
        let b = self.cs.drift_1d(t, x);
        let a = self.cs.diffusion_coeff_1d(t, x);
        let gamma = self.cs.jump_scale();
        self.shifts.clear();
        if gamma != 0.0 {
            for atom in self.cs.nu().atoms() {
                self.shifts.push((atom.weight, gamma * self.cs.jump_1d(t, x, &atom.mark)));
            }
        }
        for (phi, o) in phis.iter().zip(out.iter_mut()) {
            let mut g = b * phi.d1(x) + a * phi.d2(x);
            if !self.shifts.is_empty() {
                let fx = phi.value(x);
                for &(w, h) in &self.shifts {
                    g += w * (phi.value(x + h) - fx);
                }
            }
            *o = g;
        }
    }
}

/// `φ(w_t) − φ(w_s) − ∫_s^t 𝓛φ` for each `φ`, trapezoidal on the path's own
/// partition. Segment left ends use right limits, right ends use left limits.
fn path_increments<F: SmoothFunction>(
    gen: &mut GeneratorAt<'_>,
    path: &PathSample,
    phis: &[F],
    s: f64,
    t: f64,
    out: &mut [f64],
    ga: &mut [f64],
    gb: &mut [f64],
) {
    let times = path.times();
    let ks = path.index_at(s);
    let kt = path.index_at(t);
    let xs = path.value(ks)[0];
    // w_t is the right limit at t
    let xt = path.value(kt)[0];
    for (o, phi) in out.iter_mut().zip(phis) {
        *o = phi.value(xt) - phi.value(xs);
    }
    let mut ra = s;
    let mut xa = xs;
    gen.eval(ra, xa, phis, ga);
    let mut k = ks + 1;
    loop {
        let (rb, xb_left, xb_right, last) = if k <= kt && times[k] < t {
            (times[k], path.left_limit(k)[0], path.value(k)[0], false)
        } else {
            let left = if k <= kt && times[k] == t { path.left_limit(k)[0] } else { path.value(k - 1)[0] };
            (t, left, left, true)
        };
        let h = rb - ra;
        if h > 0.0 {
            gen.eval(rb, xb_left, phis, gb);
            for ((o, a), b) in out.iter_mut().zip(ga.iter()).zip(gb.iter()) {
                *o -= 0.5 * h * (a + b);
            }
        }
        if last {
            break;
        }
        ra = rb;
        xa = xb_right;
        gen.eval(ra, xa, phis, ga);
        k += 1;
    }
}

/// Martingale defect estimates for every pair in `phis × chis`, ordered
/// with `chi` varying fastest.
pub fn martingale_defect_batch<F: SmoothFunction + Sync>(
    ens: &PathEnsemble,
    cs: &CoefficientSet,
    phis: &[F],
    chis: &[PathFunctional],
    s: f64,
    t: f64,
) -> Result<Vec<DefectReport>> {
    if cs.dim() != 1 {
        return Err(Error::Dimension("martingale defect is computed for scalar states".into()));
    }
    if !(0.0 <= s && s < t) {
        return Err(Error::InvalidArgument(format!("need 0 <= s < t, got s = {s}, t = {t}")));
    }
    if t > ens.horizon() {
        return Err(Error::TimeOutOfRange {
            t,
            horizon: ens.horizon(),
        });
    }
    if let Some(c) = chis.iter().find(|c| c.cutoff > s) {
        return Err(Error::InvalidArgument(format!(
            "functional {} looks past s = {s}",
            c.describe()
        )));
    }
    let n = ens.len();
    if n == 0 {
        return Err(Error::InvalidArgument("ensemble has no paths".into()));
    }
    let (np, nc) = (phis.len(), chis.len());
    let chunk_sums: Vec<Vec<(f64, f64)>> = ens
        .paths()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut gen = GeneratorAt::new(cs);
            let mut y = vec![0.0; np];
            let mut ga = vec![0.0; np];
            let mut gb = vec![0.0; np];
            let mut sums = vec![(0.0, 0.0); np * nc];
            for path in chunk {
                path_increments(&mut gen, path, phis, s, t, &mut y, &mut ga, &mut gb);
                for (j, chi) in chis.iter().enumerate() {
                    let c = chi.evaluate(path);
                    for (i, yi) in y.iter().enumerate() {
                        let z = c * yi;
                        let e = &mut sums[i * nc + j];
                        e.0 += z;
                        e.1 += z * z;
                    }
                }
            }
            sums
        })
        .collect();
    let mut total = vec![(0.0, 0.0); np * nc];
    for cs in &chunk_sums {
        for (t, c) in total.iter_mut().zip(cs) {
            t.0 += c.0;
            t.1 += c.1;
        }
    }
    let nf = n as f64;
    let mut out = Vec::with_capacity(np * nc);
    for (i, phi) in phis.iter().enumerate() {
        for (j, chi) in chis.iter().enumerate() {
            let (s1, s2) = total[i * nc + j];
            let mean = s1 / nf;
            let var = if n > 1 { ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
            out.push(DefectReport {
                phi: phi.label(),
                chi: chi.describe(),
                s,
                t,
                n_paths: n,
                estimate: mean,
                stderr: (var / nf).sqrt(),
            });
        }
    }
    Ok(out)
}

/// Martingale defect for a single `(φ, χ)` pair.
pub fn martingale_defect<F: SmoothFunction + Sync>(
    ens: &PathEnsemble,
    cs: &CoefficientSet,
    phi: &F,
    chi: &PathFunctional,
    s: f64,
    t: f64,
) -> Result<DefectReport> {
    let mut v = martingale_defect_batch(ens, cs, std::slice::from_ref(phi), std::slice::from_ref(chi), s, t)?;
    Ok(v.pop().expect("one pair requested"))
}
