use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use super::mark::MarkMeasure;
use crate::rng::stream_rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    /// Index into the mark measure's atoms.
    pub atom: usize,
}

/// One realisation of the Poisson random measure on `(0, T] × U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpList {
    pub events: Vec<JumpEvent>,
    pub horizon: f64,
}

impl JumpList {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Samples jumps with intensity `dt ν(du)` on `[0, T]` from substream 0 of `seed`.
pub fn sample_jumps(nu: &MarkMeasure, horizon: f64, seed: u64) -> Result<JumpList> {
    sample_jumps_with(nu, horizon, &mut stream_rng(seed, 0))
}

/// Count `~ Poisson(T ν(U))`, then i.i.d. uniform times and i.i.d. atoms with
/// probabilities `w_k / ν(U)`.
pub fn sample_jumps_with<R: Rng + ?Sized>(nu: &MarkMeasure, horizon: f64, rng: &mut R) -> Result<JumpList> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    if nu.is_zero() {
        return Ok(JumpList { events: Vec::new(), horizon });
    }
    let intensity = horizon * nu.total_mass();
    let count = Poisson::new(intensity)
        .map_err(|e| Error::InvalidArgument(format!("Poisson intensity {intensity}: {e}")))?
        .sample(rng) as usize;
    if count == 0 {
        return Ok(JumpList { events: Vec::new(), horizon });
    }

    let mut times: Vec<f64> = Vec::with_capacity(count);
    loop {
        times.clear();
        times.extend((0..count).map(|_| horizon * (1.0 - rng.random::<f64>())));
        times.sort_by(f64::total_cmp);
        if times.windows(2).all(|w| w[0] < w[1]) {
            break;
        }
    }

    let atoms = nu.atoms();
    let events = if atoms.len() == 1 {
        times.into_iter().map(|time| JumpEvent { time, atom: 0 }).collect()
    } else {
        let pick = WeightedIndex::new(atoms.iter().map(|a| a.weight))
            .map_err(|e| Error::InvalidMeasure(e.to_string()))?;
        times
            .into_iter()
            .map(|time| JumpEvent { time, atom: pick.sample(rng) })
            .collect()
    };
    Ok(JumpList { events, horizon })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_intensity_gives_no_events() {
        let jl = sample_jumps(&MarkMeasure::zero(), 1.0, 3).unwrap();
        assert!(jl.is_empty());
    }

    #[test]
    fn rejects_nonpositive_horizon() {
        assert!(sample_jumps(&MarkMeasure::dirac(1.0, 1.0).unwrap(), 0.0, 1).is_err());
    }

    #[test]
    fn times_sorted_inside_horizon_and_deterministic() {
        let nu = MarkMeasure::scalar(&[(-1.0, 5.0), (1.0, 5.0)]).unwrap();
        let a = sample_jumps(&nu, 2.0, 9).unwrap();
        let b = sample_jumps(&nu, 2.0, 9).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
        assert!(a.events.windows(2).all(|w| w[0].time < w[1].time));
        assert!(a.events.iter().all(|e| e.time > 0.0 && e.time <= 2.0 && e.atom < 2));
    }

    #[test]
    fn mean_count_matches_intensity() {
        // ν = 2 δ_1 on [0, 1]: count ~ Poisson(2).
        let nu = MarkMeasure::dirac(2.0, 1.0).unwrap();
        let reps = 100_000;
        let mut rng = stream_rng(17, 0);
        let total: usize = (0..reps).map(|_| sample_jumps_with(&nu, 1.0, &mut rng).unwrap().len()).sum();
        let mean = total as f64 / reps as f64;
        assert!((mean - 2.0).abs() <= 3.0 * (2.0f64 / reps as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn atom_frequencies_follow_weights() {
        let nu = MarkMeasure::scalar(&[(-1.0, 1.0), (1.0, 1.0)]).unwrap();
        let mut rng = stream_rng(23, 0);
        let (mut n, mut first) = (0usize, 0usize);
        for _ in 0..20_000 {
            for e in sample_jumps_with(&nu, 1.0, &mut rng).unwrap().events {
                n += 1;
                first += usize::from(e.atom == 0);
            }
        }
        let p = first as f64 / n as f64;
        assert!((p - 0.5).abs() <= 3.0 * (0.25 / n as f64).sqrt(), "p {p} over {n}");
    }
}
