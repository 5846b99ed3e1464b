//! Experiment configuration: one JSON document, unknown keys rejected.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use superpose_core::limits::{CacheSpec, SequenceKind};

use crate::catalog;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    SolveFpe,
    Superpose,
    Defect,
    Limit,
    MomentBound,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::SolveFpe => "solve-fpe",
            Self::Superpose => "superpose",
            Self::Defect => "defect",
            Self::Limit => "limit",
            Self::MomentBound => "moment-bound",
        }
    }

    fn uses_paths(self) -> bool {
        !matches!(self, Self::SolveFpe)
    }

    fn uses_grid(self) -> bool {
        matches!(self, Self::SolveFpe | Self::Superpose)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub kind: SequenceKind,
    pub ns: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<CacheSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryConfig {
    pub center: f64,
    pub spread: f64,
}

/// Acceptance thresholds. Each applies to a subset of kinds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_aborted: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_mass_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_leak: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_w1: Option<f64>,
    /// Allowed `|estimate| − 3·stderr`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defect_tolerance: Option<f64>,
    /// Drift offset of the perturbed-generator control; 0 disables it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_drift_offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_control_fraction: Option<f64>,
    /// Largest-n W1 must be within this multiple of the noise floor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_slack: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub problem: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    /// FPE time step; the stability limit capped at `dx` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// `[s, t]` for the martingale defect.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<DictionaryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Checks>,
}

/// Parses a config, reporting serde's line and column on failure.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
}

fn bad(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("field '{field}': {msg}"))
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be positive and finite, got {v}")))
    }
}

fn forbid<T>(field: &str, v: &Option<T>, kind: ExperimentKind) -> Result<(), CliError> {
    if v.is_some() {
        Err(bad(field, format!("is not used by kind '{}'", kind.name())))
    } else {
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn horizon(&self) -> f64 {
        self.horizon.expect("resolved config")
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps.expect("resolved config")
    }
    pub fn n_paths(&self) -> usize {
        self.n_paths.expect("resolved config")
    }
    pub fn checkpoints(&self) -> &[f64] {
        self.checkpoints.as_deref().expect("resolved config")
    }
    pub fn master_seed(&self) -> u64 {
        self.master_seed.expect("resolved config")
    }
    pub fn checks(&self) -> &Checks {
        self.checks.as_ref().expect("resolved config")
    }

    /// Validates every field and fills every default explicitly, so the
    /// result can be written out and re-run as is. `dt` stays unset when
    /// absent; the runner fills it from the stability limit.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let problem = catalog::find(&self.problem)?;
        let params = problem.resolve(&self.params)?;
        let kind = self.kind;
        let mut out = self.clone();
        out.params = params.map().clone();

        let horizon = self.horizon.unwrap_or(1.0);
        positive("horizon", horizon)?;
        out.horizon = Some(horizon);
        out.master_seed = Some(self.master_seed.unwrap_or(0));
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(bad("threads", "must be at least 1"));
            }
        }

        if kind.uses_paths() {
            let n_steps = self.n_steps.unwrap_or(100);
            let n_paths = self.n_paths.unwrap_or(10_000);
            if n_steps == 0 {
                return Err(bad("n_steps", "must be at least 1"));
            }
            if n_paths == 0 {
                return Err(bad("n_paths", "must be at least 1"));
            }
            out.n_steps = Some(n_steps);
            out.n_paths = Some(n_paths);
        } else {
            forbid("n_steps", &self.n_steps, kind)?;
            forbid("n_paths", &self.n_paths, kind)?;
        }

        if kind.uses_grid() {
            let g = self.grid.unwrap_or(GridConfig {
                x_min: problem.grid.x_min,
                x_max: problem.grid.x_max,
                dx: problem.grid.dx,
            });
            positive("grid.dx", g.dx)?;
            if !(g.x_min < g.x_max) || !g.x_min.is_finite() || !g.x_max.is_finite() {
                return Err(bad("grid", format!("need x_min < x_max, got [{}, {}]", g.x_min, g.x_max)));
            }
            out.grid = Some(g);
            if let Some(dt) = self.dt {
                positive("dt", dt)?;
            }
        } else {
            forbid("grid", &self.grid, kind)?;
            forbid("dt", &self.dt, kind)?;
        }

        let cps = self.checkpoints.clone().unwrap_or_else(|| vec![horizon]);
        if cps.is_empty() {
            return Err(bad("checkpoints", "must not be empty"));
        }
        if let Some(c) = cps.iter().find(|&&c| !(0.0..=horizon).contains(&c)) {
            return Err(bad("checkpoints", format!("{c} is outside [0, {horizon}]")));
        }
        if cps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("checkpoints", "must be strictly increasing"));
        }
        out.checkpoints = Some(cps);

        if kind == ExperimentKind::Defect {
            let w = self.window.unwrap_or([0.0, horizon]);
            if !(0.0 <= w[0] && w[0] < w[1] && w[1] <= horizon) {
                return Err(bad("window", format!("need 0 <= s < t <= {horizon}, got {w:?}")));
            }
            out.window = Some(w);
            let d = self.dictionary.unwrap_or(DictionaryConfig {
                center: problem.dictionary.0,
                spread: problem.dictionary.1,
            });
            positive("dictionary.spread", d.spread)?;
            out.dictionary = Some(d);
        } else {
            forbid("window", &self.window, kind)?;
            forbid("dictionary", &self.dictionary, kind)?;
        }

        if kind == ExperimentKind::Limit {
            let s = self
                .sequence
                .clone()
                .ok_or_else(|| bad("sequence", "is required for kind 'limit'"))?;
            if s.ns.is_empty() || s.ns[0] == 0 || s.ns.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad("sequence.ns", "must be nonempty, >= 1 and strictly increasing"));
            }
            if let Some(c) = s.cache {
                positive("sequence.cache.half_width", c.half_width)?;
                if c.points < 2 {
                    return Err(bad("sequence.cache.points", "must be at least 2"));
                }
            }
            out.sequence = Some(s);
        } else {
            forbid("sequence", &self.sequence, kind)?;
        }

        out.checks = Some(resolve_checks(kind, self.checks.clone().unwrap_or_default())?);
        Ok(out)
    }
}

fn resolve_checks(kind: ExperimentKind, c: Checks) -> Result<Checks, CliError> {
    use ExperimentKind::*;
    let allowed: &[&str] = match kind {
        Simulate => &["max_aborted"],
        SolveFpe => &["max_mass_error", "max_leak"],
        Superpose => &["max_aborted", "max_mass_error", "max_leak", "max_w1"],
        Defect => &["max_aborted", "defect_tolerance", "control_drift_offset", "min_control_fraction"],
        Limit => &["floor_factor"],
        MomentBound => &["max_aborted", "min_slack"],
    };
    let present = [
        ("max_aborted", c.max_aborted.is_some()),
        ("max_mass_error", c.max_mass_error.is_some()),
        ("max_leak", c.max_leak.is_some()),
        ("max_w1", c.max_w1.is_some()),
        ("defect_tolerance", c.defect_tolerance.is_some()),
        ("control_drift_offset", c.control_drift_offset.is_some()),
        ("min_control_fraction", c.min_control_fraction.is_some()),
        ("floor_factor", c.floor_factor.is_some()),
        ("min_slack", c.min_slack.is_some()),
    ];
    for (name, set) in present {
        if set && !allowed.contains(&name) {
            return Err(bad(&format!("checks.{name}"), format!("is not used by kind '{}'", kind.name())));
        }
    }
    for (name, v) in [
        ("max_mass_error", c.max_mass_error),
        ("max_leak", c.max_leak),
        ("max_w1", c.max_w1),
        ("defect_tolerance", c.defect_tolerance),
        ("floor_factor", c.floor_factor),
        ("min_slack", c.min_slack),
    ] {
        if let Some(v) = v {
            positive(&format!("checks.{name}"), v)?;
        }
    }
    if let Some(f) = c.min_control_fraction {
        if !(0.0..=1.0).contains(&f) {
            return Err(bad("checks.min_control_fraction", "must lie in [0, 1]"));
        }
    }
    if let Some(o) = c.control_drift_offset {
        if !o.is_finite() {
            return Err(bad("checks.control_drift_offset", "must be finite"));
        }
    }
    let mut out = Checks::default();
    let on = |name: &str| allowed.contains(&name);
    if on("max_aborted") {
        out.max_aborted = Some(c.max_aborted.unwrap_or(0));
    }
    if on("max_mass_error") {
        out.max_mass_error = Some(c.max_mass_error.unwrap_or(1e-9));
    }
    if on("max_leak") {
        out.max_leak = Some(c.max_leak.unwrap_or(1e-4));
    }
    if on("max_w1") {
        out.max_w1 = Some(c.max_w1.unwrap_or(0.02));
    }
    if on("defect_tolerance") {
        out.defect_tolerance = Some(c.defect_tolerance.unwrap_or(0.01));
        out.control_drift_offset = Some(c.control_drift_offset.unwrap_or(0.5));
        out.min_control_fraction = Some(c.min_control_fraction.unwrap_or(0.8));
    }
    if on("floor_factor") {
        // only meaningful when the target is random; no default
        out.floor_factor = c.floor_factor;
    }
    if on("min_slack") {
        out.min_slack = Some(c.min_slack.unwrap_or(1.5));
    }
    Ok(out)
}
