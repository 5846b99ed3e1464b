use std::io::{self, Write};

use serde::Serialize;

use super::sequence::{build_sequence, SequenceSpec};
use crate::probes::{wasserstein1, EmpiricalLaw};
use crate::rng::derive_seed;
use crate::sde::{simulate_marginals, CoefficientSet, EnsembleConfig, InitialLaw};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: u32,
    pub t: f64,
    pub w1: f64,
    /// `W1` between two independent target ensembles of the same size.
    pub noise_floor: f64,
    pub mean_n: f64,
    pub mean_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSeeds {
    pub master: u64,
    pub target: u64,
    pub noise_floor: u64,
    pub members: Vec<(u32, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub kind: String,
    pub base: String,
    pub target: String,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub checkpoints: Vec<f64>,
    pub seeds: ExperimentSeeds,
    pub assumptions: Vec<String>,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn rows_for(&self, n: u32) -> impl Iterator<Item = &ConvergenceRow> + '_ {
        self.rows.iter().filter(move |r| r.n == n)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "n,t,w1,noise_floor,mean_n,mean_target")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{},{}", r.n, r.t, r.w1, r.noise_floor, r.mean_n, r.mean_target)?;
        }
        Ok(())
    }

    /// Everything except the rows, for the JSON manifest.
    pub fn manifest(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("table serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("rows");
        }
        v
    }
}

fn marginals(
    cs: &CoefficientSet,
    mu0: &InitialLaw,
    cfg: &EnsembleConfig,
    times: &[f64],
) -> Result<Vec<EmpiricalLaw>> {
    let (laws, aborted) = simulate_marginals(cs, mu0, cfg, times)?;
    match aborted.first() {
        Some(a) => Err(Error::NonFinite {
            path: Some(a.index),
            time: a.time,
        }),
        None => Ok(laws),
    }
}

fn assumption_log(spec: &SequenceSpec) -> Vec<String> {
    let mut out = vec![
        "uniform density bound on the sequence members is assumed, not verified".to_string(),
        "laws are compared through fixed-time marginals only".to_string(),
    ];
    match spec.kind {
        super::SequenceKind::KillJumps | super::SequenceKind::KillDiffusion => out.push(
            "regularity of the base coefficients (BV / Sobolev in x) is assumed for the shipped problems".into(),
        ),
        super::SequenceKind::Mollify => out.push("base drift and diffusion are assumed continuous in x".into()),
        super::SequenceKind::KillBoth => {}
    }
    out
}

/// Simulates the target twice (for the noise floor) and every member of the
/// sequence once, then tabulates marginal `W1` at each checkpoint.
pub fn limit_experiment(
    spec: &SequenceSpec,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    checkpoints: &[f64],
    master_seed: u64,
) -> Result<ConvergenceTable> {
    let members = build_sequence(spec)?;
    if checkpoints.is_empty() {
        return Err(Error::InvalidArgument("at least one checkpoint is required".into()));
    }
    let target_seed = derive_seed(master_seed, "target", 0);
    let floor_seed = derive_seed(master_seed, "target", 1);
    let cfg = |seed| EnsembleConfig::new(horizon, n_steps, n_paths, seed);
    let target = marginals(&spec.target, &spec.initial, &cfg(target_seed), checkpoints)?;
    let twin = marginals(&spec.target, &spec.initial, &cfg(floor_seed), checkpoints)?;
    let floors = target
        .iter()
        .zip(&twin)
        .map(|(a, b)| wasserstein1(a, b))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut member_seeds = Vec::new();
    for (cs, &n) in members.iter().zip(&spec.ns) {
        let seed = derive_seed(master_seed, "member", n as u64);
        member_seeds.push((n, seed));
        let laws = marginals(cs, &spec.initial, &cfg(seed), checkpoints)?;
        for ((law, tl), (&t, &floor)) in laws.iter().zip(&target).zip(checkpoints.iter().zip(&floors)) {
            rows.push(ConvergenceRow {
                n,
                t,
                w1: wasserstein1(law, tl)?,
                noise_floor: floor,
                mean_n: law.mean(),
                mean_target: tl.mean(),
            });
        }
    }
    Ok(ConvergenceTable {
        kind: spec.kind.name().to_string(),
        base: spec.base.label().to_string(),
        target: spec.target.label().to_string(),
        horizon,
        n_steps,
        n_paths,
        checkpoints: checkpoints.to_vec(),
        seeds: ExperimentSeeds {
            master: master_seed,
            target: target_seed,
            noise_floor: floor_seed,
            members: member_seeds,
        },
        assumptions: assumption_log(spec),
        rows,
    })
}
