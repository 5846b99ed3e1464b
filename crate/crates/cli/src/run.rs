//! Experiment execution and artifact output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use superpose_core::fpe::{solve_fpe, DensityTrajectory, FpeStepper, Grid1D, GridDensity1D, TestFunction};
use superpose_core::limits::{limit_experiment, SequenceSpec};
use superpose_core::probes::{
    chi_dictionary, martingale_defect_batch, moment_bound_for, w1_against_density, DefectReport,
};
use superpose_core::sde::{simulate_ensemble, simulate_marginals, CoefficientSet, EnsembleConfig, InitialLaw};

use crate::catalog;
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckResult {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value >= threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: Status,
    pub out_dir: PathBuf,
    pub checks: Vec<CheckResult>,
    pub summary: Value,
}

/// What one experiment kind produces.
struct KindOutput {
    checks: Vec<CheckResult>,
    results: Value,
    csvs: Vec<(String, String)>,
    /// FPE step actually used, written back into the repro stanza.
    dt: Option<f64>,
}

/// Writes `bytes` to `dir/name` via a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

/// Runs a config (resolving it first) and writes `summary.json`,
/// `repro.json` and the CSV tables into `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let resolved = config.resolve()?;
    fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = resolved.threads {
            b = b.num_threads(t);
        }
        b.build().map_err(|e| CliError::Runtime(e.to_string()))?
    };
    let threads = pool.current_num_threads();
    let result = pool.install(|| execute(&resolved));

    let problem = catalog::find(&resolved.problem)?;
    let mut summary = json!({
        "kind": resolved.kind.name(),
        "problem": resolved.problem,
        "params": resolved.params,
        "assumptions": problem.assumptions,
        "master_seed": resolved.master_seed(),
        "threads": threads,
    });
    match result {
        Ok(out) => {
            let mut repro = resolved.clone();
            repro.out = None;
            repro.threads = None;
            if resolved.kind == ExperimentKind::SolveFpe || resolved.kind == ExperimentKind::Superpose {
                repro.dt = out.dt;
            }
            let mut artifacts = Vec::new();
            for (name, body) in &out.csvs {
                write_atomic(out_dir, name, body.as_bytes())?;
                artifacts.push(name.clone());
            }
            let repro_text = serde_json::to_string_pretty(&repro).expect("config serializes");
            write_atomic(out_dir, "repro.json", repro_text.as_bytes())?;
            artifacts.push("repro.json".into());
            let status = if out.checks.iter().all(|c| c.pass) { Status::Pass } else { Status::Fail };
            let o = summary.as_object_mut().expect("object");
            o.insert("status".into(), json!(status));
            o.insert("partial".into(), json!(false));
            o.insert("checks".into(), json!(out.checks));
            o.insert("results".into(), out.results);
            o.insert("artifacts".into(), json!(artifacts));
            o.insert("elapsed_seconds".into(), json!(started.elapsed().as_secs_f64()));
            write_atomic(out_dir, "summary.json", serde_json::to_string_pretty(&summary).unwrap().as_bytes())?;
            Ok(RunOutcome {
                status,
                out_dir: out_dir.to_path_buf(),
                checks: out.checks,
                summary,
            })
        }
        Err(e) => {
            let o = summary.as_object_mut().expect("object");
            o.insert("status".into(), json!("error"));
            o.insert("partial".into(), json!(true));
            o.insert("error".into(), json!(e.to_string()));
            // best effort: the original error matters more than this write
            let _ = write_atomic(out_dir, "summary.json", serde_json::to_string_pretty(&summary).unwrap().as_bytes());
            Err(e)
        }
    }
}

fn execute(cfg: &ExperimentConfig) -> Result<KindOutput, CliError> {
    let problem = catalog::find(&cfg.problem)?;
    let params = problem.resolve(&cfg.params)?;
    let (cs, mu0) = problem.build(&params)?;
    match cfg.kind {
        ExperimentKind::Simulate => simulate(cfg, &cs, &mu0),
        ExperimentKind::SolveFpe => solve(cfg, &cs, &mu0),
        ExperimentKind::Superpose => superpose(cfg, &cs, &mu0),
        ExperimentKind::Defect => defect(cfg, &cs, &mu0),
        ExperimentKind::Limit => limit(cfg, &cs, &mu0),
        ExperimentKind::MomentBound => moment(cfg, &cs, &mu0),
    }
}

fn ensemble_config(cfg: &ExperimentConfig) -> EnsembleConfig {
    EnsembleConfig::new(cfg.horizon(), cfg.n_steps(), cfg.n_paths(), cfg.master_seed())
}

fn simulate(cfg: &ExperimentConfig, cs: &CoefficientSet, mu0: &InitialLaw) -> Result<KindOutput, CliError> {
    let mut times = vec![0.0];
    times.extend(cfg.checkpoints().iter().copied().filter(|&t| t > 0.0));
    let (laws, aborted) = simulate_marginals(cs, mu0, &ensemble_config(cfg), &times)?;
    let ids: Vec<usize> = {
        let skip: Vec<usize> = aborted.iter().map(|a| a.index).collect();
        (0..cfg.n_paths()).filter(|i| !skip.contains(i)).collect()
    };
    let mut csv = String::from("time,path_id,value\n");
    let mut stats = Vec::new();
    for law in &laws {
        for (id, x) in ids.iter().zip(law.samples()) {
            writeln!(csv, "{},{},{}", law.time(), id, x).unwrap();
        }
        let s = law.samples();
        stats.push(json!({
            "t": law.time(),
            "mean": law.mean(),
            "variance": law.variance(),
            "min": s.iter().copied().fold(f64::INFINITY, f64::min),
            "max": s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }));
    }
    let terminal_equals_initial = laws.first().map(|l| l.samples()) == laws.last().map(|l| l.samples());
    let max_aborted = cfg.checks().max_aborted.unwrap_or(0);
    Ok(KindOutput {
        checks: vec![CheckResult::at_most("aborted_paths", aborted.len() as f64, max_aborted as f64)],
        results: json!({
            "aborted": aborted,
            "marginals": stats,
            "terminal_equals_initial": terminal_equals_initial,
        }),
        csvs: vec![("marginals.csv".into(), csv)],
        dt: None,
    })
}

fn fpe_setup(cfg: &ExperimentConfig, cs: &CoefficientSet, mu0: &InitialLaw) -> Result<(GridDensity1D, f64), CliError> {
    let g = cfg.grid.expect("resolved grid");
    let grid = Grid1D::cell_centered(g.x_min, g.x_max, g.dx).map_err(|e| CliError::Config(e.to_string()))?;
    let v0 = GridDensity1D::from_initial_law(grid, mu0)?;
    // without diffusion the CFL step can be 1/ν(U), far too coarse in time
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => FpeStepper::new(cs, grid)?.max_stable_dt(0.0).min(grid.dx()).min(cfg.horizon()),
    };
    Ok((v0, dt))
}

fn fpe_checks(cfg: &ExperimentConfig, traj: &DensityTrajectory) -> Vec<CheckResult> {
    let last = traj.last();
    let c = cfg.checks();
    vec![
        CheckResult::at_most(
            "mass_error",
            (last.mass() + last.leaked_mass() - 1.0).abs(),
            c.max_mass_error.unwrap_or(1e-9),
        ),
        CheckResult::at_most("leaked_mass", last.leaked_mass(), c.max_leak.unwrap_or(1e-4)),
        CheckResult::at_least("min_density", traj.min_value(), 0.0),
    ]
}

fn manifest_csv(traj: &DensityTrajectory) -> String {
    let mut s = String::from("time,mass,leaked_mass,first_moment,mean,min_value\n");
    for m in traj.manifest() {
        writeln!(s, "{},{},{},{},{},{}", m.time, m.mass, m.leaked_mass, m.first_moment, m.mean, m.min_value).unwrap();
    }
    s
}

fn solve(cfg: &ExperimentConfig, cs: &CoefficientSet, mu0: &InitialLaw) -> Result<KindOutput, CliError> {
    let (v0, dt) = fpe_setup(cfg, cs, mu0)?;
    let traj = solve_fpe(cs, &v0, cfg.horizon(), dt, cfg.checkpoints())?;
    let mut density = String::from("time,x_center,v\n");
    for snap in traj.snapshots() {
        for (x, v) in snap.grid().centers().zip(snap.values()) {
            writeln!(density, "{},{},{}", snap.time(), x, v).unwrap();
        }
    }
    Ok(KindOutput {
        checks: fpe_checks(cfg, &traj),
        results: json!({
            "dt": dt,
            "n_steps": traj.n_steps(),
            "manifest": traj.manifest(),
        }),
        csvs: vec![("manifest.csv".into(), manifest_csv(&traj)), ("density.csv".into(), density)],
        dt: Some(dt),
    })
}

fn superpose(cfg: &ExperimentConfig, cs: &CoefficientSet, mu0: &InitialLaw) -> Result<KindOutput, CliError> {
    let (v0, dt) = fpe_setup(cfg, cs, mu0)?;
    let traj = solve_fpe(cs, &v0, cfg.horizon(), dt, cfg.checkpoints())?;
    let (laws, aborted) = simulate_marginals(cs, mu0, &ensemble_config(cfg), cfg.checkpoints())?;
    let mut csv = String::from("t,w1,mc_mean,fpe_mean,mc_variance,fpe_variance,leaked_mass\n");
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for law in &laws {
        let v = traj.at(law.time()).expect("checkpoints are recorded");
        let w1 = w1_against_density(law, v)?;
        worst = worst.max(w1);
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            law.time(),
            w1,
            law.mean(),
            v.mean(),
            law.variance(),
            v.variance(),
            v.leaked_mass()
        )
        .unwrap();
        rows.push(json!({"t": law.time(), "w1": w1, "mc_mean": law.mean(), "fpe_mean": v.mean()}));
    }
    let c = cfg.checks();
    let mut checks = fpe_checks(cfg, &traj);
    checks.push(CheckResult::at_most("aborted_paths", aborted.len() as f64, c.max_aborted.unwrap_or(0) as f64));
    checks.push(CheckResult::at_most("max_w1", worst, c.max_w1.unwrap_or(0.02)));
    Ok(KindOutput {
        checks,
        results: json!({"dt": dt, "rows": rows, "aborted": aborted}),
        csvs: vec![("superpose.csv".into(), csv), ("manifest.csv".into(), manifest_csv(&traj))],
        dt: Some(dt),
    })
}

fn defect_csv(reports: &[DefectReport], flag: &str, pass: impl Fn(&DefectReport) -> bool) -> String {
    let mut s = format!("phi,chi,s,t,estimate,stderr,{flag}\n");
    for r in reports {
        writeln!(s, "\"{}\",\"{}\",{},{},{},{},{}", r.phi, r.chi, r.s, r.t, r.estimate, r.stderr, pass(r)).unwrap();
    }
    s
}

fn defect(cfg: &ExperimentConfig, cs: &CoefficientSet, mu0: &InitialLaw) -> Result<KindOutput, CliError> {
    let ens = simulate_ensemble(cs, mu0, &ensemble_config(cfg))?;
    let [s, t] = cfg.window.expect("resolved window");
    let d = cfg.dictionary.expect("resolved dictionary");
    let phis = TestFunction::dictionary_around(d.center, d.spread);
    let chis = chi_dictionary(s, d.center);
    let c = cfg.checks();
    let tol = c.defect_tolerance.unwrap_or(0.01);
    let reports = martingale_defect_batch(&ens, cs, &phis, &chis, s, t)?;
    let ok = |r: &DefectReport| r.estimate.abs() <= 3.0 * r.stderr + tol;
    let worst = reports.iter().map(|r| r.estimate.abs() - 3.0 * r.stderr).fold(f64::NEG_INFINITY, f64::max);
    let mut checks = vec![
        CheckResult::at_most("aborted_paths", ens.aborted().len() as f64, c.max_aborted.unwrap_or(0) as f64),
        CheckResult::at_most("max_excess_over_3se", worst, tol),
    ];
    let mut csvs = vec![("defect.csv".into(), defect_csv(&reports, "pass", ok))];
    let mut results = json!({"pairs": reports.len(), "max_excess_over_3se": worst, "reports": reports});
    let offset = c.control_drift_offset.unwrap_or(0.0);
    if offset != 0.0 {
        let wrong = cs.clone().with_drift_offset(offset);
        let control = martingale_defect_batch(&ens, &wrong, &phis, &chis, s, t)?;
        let detected = |r: &DefectReport| r.estimate.abs() > 3.0 * r.stderr;
        let frac = control.iter().filter(|r| detected(r)).count() as f64 / control.len() as f64;
        checks.push(CheckResult::at_least(
            "control_detection_fraction",
            frac,
            c.min_control_fraction.unwrap_or(0.8),
        ));
        csvs.push(("control.csv".into(), defect_csv(&control, "detected", detected)));
        results["control_detection_fraction"] = json!(frac);
    }
    Ok(KindOutput {
        checks,
        results,
        csvs,
        dt: None,
    })
}

fn limit(cfg: &ExperimentConfig, cs: &CoefficientSet, mu0: &InitialLaw) -> Result<KindOutput, CliError> {
    let seq = cfg.sequence.clone().expect("resolved sequence");
    let mut spec = SequenceSpec::new(seq.kind, seq.ns.clone(), cs.clone(), mu0.clone());
    if let Some(c) = seq.cache {
        spec = spec.with_cache(c);
    }
    let table = limit_experiment(
        &spec,
        cfg.horizon(),
        cfg.n_steps(),
        cfg.n_paths(),
        cfg.checkpoints(),
        cfg.master_seed(),
    )?;
    let n_max = *seq.ns.last().expect("nonempty");
    let mut checks = Vec::new();
    for &t in cfg.checkpoints() {
        let rows: Vec<_> = table.rows.iter().filter(|r| r.t == t).collect();
        // largest rise between consecutive n, in units of the noise floor
        let rise = rows
            .windows(2)
            .map(|w| w[1].w1 - w[0].w1 - w[0].noise_floor)
            .fold(f64::NEG_INFINITY, f64::max);
        if rows.len() > 1 {
            checks.push(CheckResult::at_most(format!("w1_rise_beyond_floor(t={t})"), rise, 0.0));
        }
    }
    if let Some(factor) = cfg.checks().floor_factor {
        for r in table.rows_for(n_max) {
            checks.push(CheckResult::at_most(
                format!("w1_over_floor(n={n_max}, t={})", r.t),
                r.w1 / r.noise_floor,
                factor,
            ));
        }
    }
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    Ok(KindOutput {
        checks,
        results: json!({"manifest": table.manifest(), "rows": table.rows}),
        csvs: vec![("convergence.csv".into(), String::from_utf8(csv).expect("ascii"))],
        dt: None,
    })
}

fn moment(cfg: &ExperimentConfig, cs: &CoefficientSet, mu0: &InitialLaw) -> Result<KindOutput, CliError> {
    let ens = simulate_ensemble(cs, mu0, &ensemble_config(cfg))?;
    let m0 = mu0
        .first_abs_moment()
        .ok_or_else(|| CliError::Config("initial law has no closed-form first moment".into()))?;
    let rep = moment_bound_for(&ens, cs, m0);
    let c = cfg.checks();
    let checks = vec![
        CheckResult::at_most("aborted_paths", ens.aborted().len() as f64, c.max_aborted.unwrap_or(0) as f64),
        CheckResult::at_most("empirical_minus_bound", rep.empirical - rep.bound, 0.0),
        CheckResult::at_least("slack", rep.slack, c.min_slack.unwrap_or(1.5)),
    ];
    let csv = format!(
        "empirical,bound,slack,t0,blocks,c_bundle,mu0_first_moment\n{},{},{},{},{},{},{}\n",
        rep.empirical, rep.bound, rep.slack, rep.t0, rep.blocks, rep.c_bundle, rep.mu0_first_moment
    );
    Ok(KindOutput {
        checks,
        results: json!(rep),
        csvs: vec![("moment.csv".into(), csv)],
        dt: None,
    })
}
