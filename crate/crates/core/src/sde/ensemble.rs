use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::coefficients::CoefficientSet;
use super::initial::InitialLaw;
use super::path::{simulate_path_with, PathSample};
use crate::probes::EmpiricalLaw;
use crate::rng::{derive_seed, stream_rng, PolarNormal};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub master_seed: u64,
}

impl EnsembleConfig {
    pub fn new(horizon: f64, n_steps: usize, n_paths: usize, master_seed: u64) -> Self {
        Self {
            horizon,
            n_steps,
            n_paths,
            master_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.n_steps == 0 || self.n_paths == 0 {
            return Err(Error::InvalidArgument("n_steps and n_paths must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbortedPath {
    pub index: usize,
    /// Time at which the state stopped being finite.
    pub time: f64,
    pub reason: String,
}

/// Independent sample paths; path `i` depends only on `(master_seed, i)`.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    paths: Vec<PathSample>,
    path_ids: Vec<usize>,
    aborted: Vec<AbortedPath>,
    config: EnsembleConfig,
    fingerprint: u64,
}

fn fingerprint(cs: &CoefficientSet, mu0: &InitialLaw, cfg: &EnsembleConfig) -> u64 {
    let mut h = Sha256::new();
    h.update(cs.label().as_bytes());
    h.update((cs.dim() as u64).to_le_bytes());
    h.update(serde_json::to_vec(mu0).unwrap_or_default());
    h.update(serde_json::to_vec(cfg).unwrap_or_default());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 output has 32 bytes"))
}

/// Seed of the stream that draws initial states.
fn initial_seed(master: u64) -> u64 {
    derive_seed(master, "initial", 0)
}

fn simulate_one(cs: &CoefficientSet, mu0: &InitialLaw, cfg: &EnsembleConfig, i: usize) -> Result<PathSample> {
    let mut init_rng = stream_rng(initial_seed(cfg.master_seed), i as u64);
    let mut x0 = vec![0.0; cs.dim()];
    mu0.sample(&mut init_rng, &mut PolarNormal::new(), &mut x0);
    let mut rng = stream_rng(cfg.master_seed, i as u64);
    simulate_path_with(cs, &x0, cfg.horizon, cfg.n_steps, &mut rng).map_err(|e| match e {
        Error::NonFinite { time, .. } => Error::NonFinite { path: Some(i), time },
        other => other,
    })
}

fn check_inputs(cs: &CoefficientSet, mu0: &InitialLaw, cfg: &EnsembleConfig) -> Result<()> {
    cfg.validate()?;
    mu0.validate()?;
    if mu0.dim() != cs.dim() {
        return Err(Error::Dimension(format!(
            "initial law has dimension {}, SDE has {}",
            mu0.dim(),
            cs.dim()
        )));
    }
    Ok(())
}

/// Simulates `n_paths` paths with initial states drawn i.i.d. from `mu0`.
///
/// Paths whose state overflows are dropped and listed in
/// [`PathEnsemble::aborted`]; the rest are kept in index order.
pub fn simulate_ensemble(cs: &CoefficientSet, mu0: &InitialLaw, cfg: &EnsembleConfig) -> Result<PathEnsemble> {
    check_inputs(cs, mu0, cfg)?;
    let results: Vec<Result<PathSample>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| simulate_one(cs, mu0, cfg, i))
        .collect();
    let mut paths = Vec::with_capacity(results.len());
    let mut path_ids = Vec::with_capacity(results.len());
    let mut aborted = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => {
                paths.push(p);
                path_ids.push(i);
            }
            Err(e @ Error::NonFinite { time, .. }) => aborted.push(AbortedPath {
                index: i,
                time,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(PathEnsemble {
        paths,
        path_ids,
        aborted,
        config: *cfg,
        fingerprint: fingerprint(cs, mu0, cfg),
    })
}

/// Marginals at `times` of the ensemble [`simulate_ensemble`] would produce,
/// without keeping the paths in memory.
pub fn simulate_marginals(
    cs: &CoefficientSet,
    mu0: &InitialLaw,
    cfg: &EnsembleConfig,
    times: &[f64],
) -> Result<(Vec<EmpiricalLaw>, Vec<AbortedPath>)> {
    check_inputs(cs, mu0, cfg)?;
    for &t in times {
        check_time(t, cfg.horizon)?;
    }
    let d = cs.dim();
    let results: Vec<Result<Vec<f64>>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            simulate_one(cs, mu0, cfg, i).map(|p| {
                let mut v = Vec::with_capacity(times.len() * d);
                for &t in times {
                    v.extend_from_slice(p.value_at(t));
                }
                v
            })
        })
        .collect();
    let mut columns = vec![Vec::with_capacity(cfg.n_paths * d); times.len()];
    let mut aborted = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => {
                for (c, chunk) in columns.iter_mut().zip(v.chunks(d)) {
                    c.extend_from_slice(chunk);
                }
            }
            Err(e @ Error::NonFinite { time, .. }) => aborted.push(AbortedPath {
                index: i,
                time,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    let fp = fingerprint(cs, mu0, cfg);
    let laws = columns
        .into_iter()
        .zip(times)
        .map(|(c, &t)| EmpiricalLaw::with_dim(c, d, t).map(|l| l.with_fingerprint(fp)))
        .collect::<Result<Vec<_>>>()?;
    Ok((laws, aborted))
}

fn check_time(t: f64, horizon: f64) -> Result<()> {
    if (0.0..=horizon).contains(&t) {
        Ok(())
    } else {
        Err(Error::TimeOutOfRange { t, horizon })
    }
}

/// Law of `w_t` under the ensemble, using càdlàg values.
pub fn marginal(ens: &PathEnsemble, t: f64) -> Result<EmpiricalLaw> {
    check_time(t, ens.config.horizon)?;
    let d = ens.paths.first().map_or(1, |p| p.dim());
    let mut samples = Vec::with_capacity(ens.paths.len() * d);
    for p in &ens.paths {
        samples.extend_from_slice(p.value_at(t));
    }
    Ok(EmpiricalLaw::with_dim(samples, d, t)?.with_fingerprint(ens.fingerprint))
}

impl PathEnsemble {
    pub fn paths(&self) -> &[PathSample] {
        &self.paths
    }

    /// Original index of each kept path.
    pub fn path_ids(&self) -> &[usize] {
        &self.path_ids
    }

    pub fn aborted(&self) -> &[AbortedPath] {
        &self.aborted
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn master_seed(&self) -> u64 {
        self.config.master_seed
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.config.horizon
    }

    /// Long-format dump: one row per path and time point (right limits).
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let d = self.paths.first().map_or(1, |p| p.dim());
        if d == 1 {
            writeln!(w, "time,path_id,value")?;
        } else {
            let cols: Vec<String> = (0..d).map(|i| format!("value_{i}")).collect();
            writeln!(w, "time,path_id,{}", cols.join(","))?;
        }
        for (p, id) in self.paths.iter().zip(&self.path_ids) {
            for k in 0..p.len() {
                write!(w, "{},{}", p.times()[k], id)?;
                for v in p.value(k) {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}
