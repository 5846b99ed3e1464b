use rand::Rng;

use super::coefficients::CoefficientSet;
use super::jumps::sample_jumps_with;
use crate::rng::{stream_rng, PolarNormal};
use crate::{Error, Result};

/// Discretised càdlàg path on a jump-adapted time grid.
///
/// `values` hold right limits. At a jump time the left limit is kept
/// separately in `pre_jump`; everywhere else left and right limits agree.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    dim: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    jump_index: Vec<usize>,
    jump_atoms: Vec<usize>,
    pre_jump: Vec<f64>,
}

impl PathSample {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of time points.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("paths always contain t = 0")
    }

    /// Right-limit value at time point `k`.
    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// Position of time point `k` in the jump list, if a jump happens there.
    pub fn jump_at(&self, k: usize) -> Option<usize> {
        self.jump_index.binary_search(&k).ok()
    }

    /// Left-limit value at time point `k`.
    pub fn left_limit(&self, k: usize) -> &[f64] {
        match self.jump_at(k) {
            Some(j) => &self.pre_jump[j * self.dim..(j + 1) * self.dim],
            None => self.value(k),
        }
    }

    pub fn jump_count(&self) -> usize {
        self.jump_index.len()
    }

    /// `(time, atom, left limit)` for every jump.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, usize, &[f64])> + '_ {
        self.jump_index
            .iter()
            .zip(&self.jump_atoms)
            .enumerate()
            .map(move |(j, (&k, &atom))| (self.times[k], atom, &self.pre_jump[j * self.dim..(j + 1) * self.dim]))
    }

    /// Index of the last time point `≤ t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Càdlàg evaluation `w_t`: the right-limit value at the last time point `≤ t`.
    pub fn value_at(&self, t: f64) -> &[f64] {
        self.value(self.index_at(t))
    }

    pub fn initial(&self) -> &[f64] {
        self.value(0)
    }

    pub fn terminal(&self) -> &[f64] {
        self.value(self.len() - 1)
    }

    /// `sup_t |w_t|` over grid values and left limits.
    pub fn sup_norm(&self) -> f64 {
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let a = self.values.chunks(self.dim).map(norm).fold(0.0, f64::max);
        let b = self.pre_jump.chunks(self.dim).map(norm).fold(0.0, f64::max);
        a.max(b)
    }
}

/// Simulates one path from substream 0 of `seed`.
pub fn simulate_path(cs: &CoefficientSet, x0: &[f64], horizon: f64, n_steps: usize, seed: u64) -> Result<PathSample> {
    simulate_path_with(cs, x0, horizon, n_steps, &mut stream_rng(seed, 0))
}

/// Jump-adapted Euler scheme.
///
/// The jump times are sampled first and merged with the uniform grid
/// `{kT/n}`. Between consecutive times the state moves by
/// `b Δt + σ √Δt Z`; at a jump time the drift/diffusion increment is applied
/// first and then `X ← X₋ + γ g(t, X₋, u)`. Normal draws are consumed on every
/// sub-step regardless of `σ`, so sequences that only rescale `σ` or `γ`
/// share their random inputs.
pub fn simulate_path_with<R: Rng + ?Sized>(
    cs: &CoefficientSet,
    x0: &[f64],
    horizon: f64,
    n_steps: usize,
    rng: &mut R,
) -> Result<PathSample> {
    let d = cs.dim();
    let m = cs.noise_dim();
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    if x0.len() != d {
        return Err(Error::Dimension(format!("initial state has {} components, SDE has {d}", x0.len())));
    }
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { path: None, time: 0.0 });
    }
    let jumps = sample_jumps_with(cs.nu(), horizon, rng)?;
    let atoms = cs.nu().atoms();
    let gamma = cs.jump_scale();

    let cap = n_steps + 1 + jumps.len();
    let mut path = PathSample {
        dim: d,
        times: Vec::with_capacity(cap),
        values: Vec::with_capacity(cap * d),
        jump_index: Vec::with_capacity(jumps.len()),
        jump_atoms: Vec::with_capacity(jumps.len()),
        pre_jump: Vec::with_capacity(jumps.len() * d),
    };

    let mut x = x0.to_vec();
    let mut b = vec![0.0; d];
    let mut sigma = vec![0.0; d * m];
    let mut z = vec![0.0; m];
    let mut g = vec![0.0; d];
    let mut normal = PolarNormal::new();

    path.times.push(0.0);
    path.values.extend_from_slice(&x);

    let grid = |k: usize| if k == n_steps { horizon } else { horizon * k as f64 / n_steps as f64 };
    let mut t = 0.0;
    let mut k = 1;
    let mut j = 0;
    while k <= n_steps || j < jumps.events.len() {
        let tg = if k <= n_steps { grid(k) } else { f64::INFINITY };
        let tj = jumps.events.get(j).map_or(f64::INFINITY, |e| e.time);
        let t_next = tg.min(tj);
        let dt = t_next - t;
        if dt > 0.0 {
            cs.drift_into(t, &x, &mut b);
            cs.diffusion_into(t, &x, &mut sigma);
            for zk in z.iter_mut() {
                *zk = normal.sample(rng);
            }
            let sq = dt.sqrt();
            for i in 0..d {
                let noise: f64 = (0..m).map(|c| sigma[i * m + c] * z[c]).sum();
                x[i] += b[i] * dt + noise * sq;
            }
        }
        t = t_next;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { path: None, time: t });
        }
        if tj == t_next {
            let ev = jumps.events[j];
            path.jump_index.push(path.times.len());
            path.jump_atoms.push(ev.atom);
            path.pre_jump.extend_from_slice(&x);
            cs.jump_into(t, &x, &atoms[ev.atom].mark, &mut g);
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi += gamma * gi;
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { path: None, time: t });
            }
            j += 1;
        }
        if tg == t_next {
            k += 1;
        }
        path.times.push(t);
        path.values.extend_from_slice(&x);
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::MarkMeasure;

    fn const_drift(b: f64) -> CoefficientSet {
        CoefficientSet::builder(1, 1).scalar_drift(move |_, _| b).build().unwrap()
    }

    #[test]
    fn no_dynamics_keeps_initial_state() {
        let p = simulate_path(&CoefficientSet::zero(), &[1.25], 1.0, 10, 1).unwrap();
        assert_eq!(p.len(), 11);
        assert!((0..p.len()).all(|k| p.value(k) == [1.25]));
    }

    #[test]
    fn constant_drift_is_exact() {
        let p = simulate_path(&const_drift(1.0), &[0.0], 1.0, 7, 2).unwrap();
        assert!((p.terminal()[0] - 1.0).abs() < 1e-15);
        assert_eq!(p.horizon(), 1.0);
    }

    #[test]
    fn grid_contains_uniform_points_and_jumps() {
        let cs = CoefficientSet::builder(1, 1)
            .additive_jumps(1.0, MarkMeasure::dirac(20.0, 1.0).unwrap())
            .build()
            .unwrap();
        let p = simulate_path(&cs, &[0.0], 1.0, 4, 3).unwrap();
        for k in 0..=4 {
            let tk = k as f64 / 4.0;
            assert!(p.times().contains(&tk));
        }
        assert_eq!(p.len(), 5 + p.jump_count());
        assert!(p.times().windows(2).all(|w| w[0] < w[1]));
        for (k, _) in p.times().iter().enumerate() {
            if p.jump_at(k).is_some() {
                assert_eq!(p.value(k)[0], p.left_limit(k)[0] + 1.0);
            } else {
                assert_eq!(p.value(k), p.left_limit(k));
            }
        }
        assert_eq!(p.terminal()[0], p.jump_count() as f64);
    }

    #[test]
    fn zero_jump_scale_never_jumps() {
        let cs = CoefficientSet::builder(1, 1)
            .scalar_diffusion(|_, _| 1.0)
            .additive_jumps(0.0, MarkMeasure::dirac(10.0, 3.0).unwrap())
            .build()
            .unwrap();
        let p = simulate_path(&cs, &[0.0], 1.0, 10, 4).unwrap();
        assert!(p.jump_count() > 0);
        assert!((0..p.len()).all(|k| p.value(k) == p.left_limit(k)));
    }

    #[test]
    fn overflow_aborts_with_diagnostic() {
        let cs = CoefficientSet::builder(1, 1).scalar_drift(|_, x| x * x * 1e200).build().unwrap();
        let err = simulate_path(&cs, &[1e100], 1.0, 10, 5).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn value_at_is_right_continuous() {
        let cs = CoefficientSet::builder(1, 1)
            .additive_jumps(1.0, MarkMeasure::dirac(4.0, 1.0).unwrap())
            .build()
            .unwrap();
        let p = (0..).map(|s| simulate_path(&cs, &[0.0], 1.0, 2, s).unwrap()).find(|p| p.jump_count() == 2).unwrap();
        let (t1, _, _) = p.jumps().next().unwrap();
        assert_eq!(p.value_at(t1)[0], 1.0);
        assert_eq!(p.value_at(t1 - 1e-12)[0], 0.0);
        assert_eq!(p.value_at(1.0)[0], 2.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let cs = CoefficientSet::zero();
        assert!(simulate_path(&cs, &[0.0], 1.0, 0, 1).is_err());
        assert!(simulate_path(&cs, &[0.0, 1.0], 1.0, 3, 1).is_err());
        assert!(simulate_path(&cs, &[0.0], -1.0, 3, 1).is_err());
    }
}
