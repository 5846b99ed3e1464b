//! Built-in problems. Coefficients are referenced by name and numeric
//! parameters only.

use std::collections::BTreeMap;

use serde::Serialize;
use superpose_core::sde::{validate_coefficients, CoefficientSet, InitialLaw, MarkMeasure};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub help: &'static str,
}

/// Grid used for density computations unless the config overrides it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DefaultGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
}

pub struct Problem {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [ParamSpec],
    pub assumptions: &'static [&'static str],
    pub grid: DefaultGrid,
    /// Centre and spread of the test-function dictionary.
    pub dictionary: (f64, f64),
    build: fn(&Params) -> Result<(CoefficientSet, InitialLaw), CliError>,
}

/// Resolved parameter values.
pub struct Params(BTreeMap<String, f64>);

impl Params {
    pub fn get(&self, key: &str) -> f64 {
        self.0[key]
    }
    pub fn map(&self) -> &BTreeMap<String, f64> {
        &self.0
    }
}

const fn p(name: &'static str, default: f64, help: &'static str) -> ParamSpec {
    ParamSpec { name, default, help }
}

fn core(e: superpose_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn dirac_jumps(lambda: f64, h: f64) -> Result<MarkMeasure, CliError> {
    if lambda == 0.0 {
        Ok(MarkMeasure::zero())
    } else {
        MarkMeasure::dirac(lambda, h).map_err(core)
    }
}

fn gaussian_or_dirac(m: f64, s: f64) -> InitialLaw {
    if s == 0.0 {
        InitialLaw::dirac(m)
    } else {
        InitialLaw::gaussian(m, s)
    }
}

fn build_zero(p: &Params) -> Result<(CoefficientSet, InitialLaw), CliError> {
    let cs = CoefficientSet::builder(1, 1)
        .label("zero")
        .time_homogeneous(true)
        .build()
        .map_err(core)?;
    Ok((cs, InitialLaw::dirac(p.get("x0"))))
}

fn build_brownian(p: &Params) -> Result<(CoefficientSet, InitialLaw), CliError> {
    let s = p.get("sigma");
    let cs = CoefficientSet::builder(1, 1)
        .label("brownian")
        .scalar_diffusion(move |_, _| s)
        .growth(s.abs().max(1e-12), 1.0)
        .time_homogeneous(true)
        .build()
        .map_err(core)?;
    Ok((cs, InitialLaw::dirac(p.get("x0"))))
}

fn build_cpoisson(p: &Params) -> Result<(CoefficientSet, InitialLaw), CliError> {
    let (lambda, h) = (p.get("lambda"), p.get("h"));
    let cs = CoefficientSet::builder(1, 1)
        .label("cpoisson")
        .additive_jumps(1.0, dirac_jumps(lambda, h)?)
        .growth(1.0, (lambda * h * h).max(1e-12))
        .time_homogeneous(true)
        .build()
        .map_err(core)?;
    Ok((cs, InitialLaw::dirac(p.get("x0"))))
}

fn build_ou_jump(p: &Params) -> Result<(CoefficientSet, InitialLaw), CliError> {
    let (theta, sigma, gamma) = (p.get("theta"), p.get("sigma"), p.get("gamma"));
    let (lambda, h) = (p.get("lambda"), p.get("h"));
    let cs = CoefficientSet::builder(1, 1)
        .label("ou_jump")
        .scalar_drift(move |_, x| -theta * x)
        .scalar_diffusion(move |_, _| sigma)
        .additive_jumps(gamma, dirac_jumps(lambda, h)?)
        .growth(theta.abs().max(sigma.abs()).max(1e-12), (lambda * h * h).max(1e-12))
        .time_homogeneous(true)
        .build()
        .map_err(core)?;
    Ok((cs, gaussian_or_dirac(p.get("m0"), p.get("s0"))))
}

fn build_rough_drift(p: &Params) -> Result<(CoefficientSet, InitialLaw), CliError> {
    let (sigma, gamma) = (p.get("sigma"), p.get("gamma"));
    let (lambda, h) = (p.get("lambda"), p.get("h"));
    let cs = CoefficientSet::builder(1, 1)
        .label("rough_drift")
        .scalar_drift(|_, x| x.abs().min(2.0) - 1.0)
        .scalar_diffusion(move |_, _| sigma)
        .additive_jumps(gamma, dirac_jumps(lambda, h)?)
        .growth(1.0 + sigma.abs(), (lambda * h * h).max(1e-12))
        .time_homogeneous(true)
        .build()
        .map_err(core)?;
    Ok((cs, gaussian_or_dirac(p.get("m0"), p.get("s0"))))
}

fn build_cor39_ode(p: &Params) -> Result<(CoefficientSet, InitialLaw), CliError> {
    let (theta, gamma) = (p.get("theta"), p.get("gamma"));
    let (lambda, h) = (p.get("lambda"), p.get("h"));
    let cs = CoefficientSet::builder(1, 1)
        .label("cor39_ode")
        .scalar_drift(move |_, x| -theta * x)
        .additive_jumps(gamma, dirac_jumps(lambda, h)?)
        .growth(theta.abs().max(1e-12), (lambda * h * h).max(1e-12))
        .time_homogeneous(true)
        .build()
        .map_err(core)?;
    Ok((cs, InitialLaw::dirac(p.get("x0"))))
}

fn build_thm41_additive(p: &Params) -> Result<(CoefficientSet, InitialLaw), CliError> {
    let (theta, beta, sigma, gamma) = (p.get("theta"), p.get("beta"), p.get("sigma"), p.get("gamma"));
    let (lambda, h) = (p.get("lambda"), p.get("h"));
    // The compensated form dX = (b + γ∫u ν(du)) dt + σ dB + γ∫u Ñ(dt,du)
    // is the raw-measure equation with drift b.
    let cs = CoefficientSet::builder(1, 1)
        .label("thm41_additive")
        .scalar_drift(move |_, x| beta - theta * x)
        .scalar_diffusion(move |_, _| sigma)
        .additive_jumps(gamma, dirac_jumps(lambda, h)?)
        .growth(
            theta.abs().max(beta.abs() + sigma.abs()).max(1e-12),
            (lambda * h * h).max(1e-12),
        )
        .time_homogeneous(true)
        .build()
        .map_err(core)?;
    Ok((cs, gaussian_or_dirac(p.get("m0"), p.get("s0"))))
}

const JUMP_PARAMS: [ParamSpec; 3] = [
    p("gamma", 1.0, "jump scale"),
    p("lambda", 1.0, "jump rate, nu = lambda * delta_h"),
    p("h", 0.5, "jump mark"),
];

static PROBLEMS: &[Problem] = &[
    Problem {
        name: "zero",
        summary: "b = sigma = 0, no jumps; the law stays at x0",
        params: &[p("x0", 0.0, "initial point")],
        assumptions: &["growth bounds hold trivially"],
        grid: DefaultGrid { x_min: -4.0, x_max: 4.0, dx: 0.01 },
        dictionary: (0.0, 1.0),
        build: build_zero,
    },
    Problem {
        name: "brownian",
        summary: "dX = sigma dB from x0",
        params: &[p("sigma", 1.0, "noise level"), p("x0", 0.0, "initial point")],
        assumptions: &["constant coefficients; C1 = |sigma|"],
        grid: DefaultGrid { x_min: -8.0, x_max: 8.0, dx: 0.01 },
        dictionary: (0.0, 1.0),
        build: build_brownian,
    },
    Problem {
        name: "cpoisson",
        summary: "compound Poisson: b = sigma = 0, gamma = 1, g = u, nu = lambda * delta_h",
        params: &[
            p("lambda", 3.0, "jump rate"),
            p("h", 0.7, "jump size"),
            p("x0", 0.0, "initial point"),
        ],
        assumptions: &["C2 = lambda h^2 bounds the integrated squared jump"],
        grid: DefaultGrid { x_min: -1.0, x_max: 10.0, dx: 0.01 },
        dictionary: (2.0, 1.0),
        build: build_cpoisson,
    },
    Problem {
        name: "ou_jump",
        summary: "b = -theta x, constant sigma, gamma g = gamma u, nu = lambda * delta_h, Gaussian start",
        params: &[
            p("theta", 1.0, "mean reversion"),
            p("sigma", 1.0, "noise level"),
            JUMP_PARAMS[0],
            JUMP_PARAMS[1],
            JUMP_PARAMS[2],
            p("m0", 0.0, "initial mean"),
            p("s0", 1.0, "initial standard deviation (0 gives a point mass)"),
        ],
        assumptions: &[
            "Lipschitz coefficients: strong existence and uniqueness",
            "C1 = max(theta, sigma), C2 = lambda h^2",
        ],
        grid: DefaultGrid { x_min: -8.0, x_max: 8.0, dx: 0.01 },
        dictionary: (0.0, 1.0),
        build: build_ou_jump,
    },
    Problem {
        name: "rough_drift",
        summary: "b = min(|x|, 2) - 1 (kinks at 0 and +-2), constant sigma, nu = lambda * delta_h",
        params: &[
            p("sigma", 1.0, "noise level"),
            JUMP_PARAMS[0],
            JUMP_PARAMS[1],
            JUMP_PARAMS[2],
            p("m0", 0.0, "initial mean"),
            p("s0", 1.0, "initial standard deviation (0 gives a point mass)"),
        ],
        assumptions: &[
            "drift continuous and bounded but not differentiable",
            "C1 = 1 + sigma, C2 = lambda h^2",
            "uniform density bound along the mollified sequence assumed",
        ],
        grid: DefaultGrid { x_min: -8.0, x_max: 10.0, dx: 0.01 },
        dictionary: (0.0, 0.5),
        build: build_rough_drift,
    },
    Problem {
        name: "cor39_ode",
        summary: "b = -theta x with jumps gamma * delta_h; kill-both adds sigma^n = (1/n) I and gamma/n, \
                  converging to the ODE x' = -theta x",
        params: &[
            p("theta", 1.0, "decay rate"),
            JUMP_PARAMS[0],
            JUMP_PARAMS[1],
            JUMP_PARAMS[2],
            p("x0", 1.0, "initial point"),
        ],
        assumptions: &["C1 = theta (the kill-both sequence adds sqrt(d) for its noise), C2 = lambda h^2"],
        grid: DefaultGrid { x_min: -3.0, x_max: 4.0, dx: 0.01 },
        dictionary: (0.5, 0.25),
        build: build_cor39_ode,
    },
    Problem {
        name: "thm41_additive",
        summary: "additive jumps f = gamma u with b = beta - theta x and constant sigma, written with the \
                  compensated martingale measure; Gaussian density start",
        params: &[
            p("theta", 1.0, "mean reversion"),
            p("beta", 0.5, "drift offset"),
            p("sigma", 0.5, "noise level"),
            p("gamma", 1.0, "jump scale"),
            p("lambda", 2.0, "jump rate"),
            p("h", -0.4, "jump mark"),
            p("m0", 0.0, "initial mean"),
            p("s0", 0.5, "initial standard deviation"),
        ],
        assumptions: &[
            "smooth drift with bounded divergence, constant sigma",
            "initial law has a bounded density",
            "compensated drift b + gamma int u nu(du) pairs with the Fokker-Planck drift b",
        ],
        grid: DefaultGrid { x_min: -6.0, x_max: 6.0, dx: 0.01 },
        dictionary: (0.0, 0.5),
        build: build_thm41_additive,
    },
];

pub fn problems() -> &'static [Problem] {
    PROBLEMS
}

pub fn find(name: &str) -> Result<&'static Problem, CliError> {
    PROBLEMS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<_> = PROBLEMS.iter().map(|p| p.name).collect();
        CliError::Config(format!("unknown problem '{name}' (known: {})", names.join(", ")))
    })
}

impl Problem {
    /// Fills defaults and rejects unknown keys.
    pub fn resolve(&self, given: &BTreeMap<String, f64>) -> Result<Params, CliError> {
        for (k, v) in given {
            if !self.params.iter().any(|p| p.name == k) {
                return Err(CliError::Config(format!("problem '{}' has no parameter '{k}'", self.name)));
            }
            if !v.is_finite() {
                return Err(CliError::Config(format!("parameter '{k}' must be finite")));
            }
        }
        let mut out = BTreeMap::new();
        for spec in self.params {
            out.insert(spec.name.to_string(), given.get(spec.name).copied().unwrap_or(spec.default));
        }
        Ok(Params(out))
    }

    /// Builds the coefficients and initial law, refusing parameter choices
    /// that break the stated growth constants.
    pub fn build(&self, params: &Params) -> Result<(CoefficientSet, InitialLaw), CliError> {
        let (cs, mu0) = (self.build)(params)?;
        mu0.validate().map_err(core)?;
        let rep = validate_coefficients(&cs, 256, 0);
        if rep.violation {
            return Err(CliError::Config(format!(
                "problem '{}' violates its growth constants for these parameters",
                self.name
            )));
        }
        Ok((cs, mu0))
    }

    pub fn build_default(&self) -> Result<(CoefficientSet, InitialLaw), CliError> {
        self.build(&self.resolve(&BTreeMap::new())?)
    }
}

/// Deterministic text listing.
pub fn catalog_list() -> String {
    let mut s = String::new();
    for pr in PROBLEMS {
        s.push_str(&format!("{}\n  {}\n", pr.name, pr.summary));
        for p in pr.params {
            s.push_str(&format!("  param {:<8} default {:<6} {}\n", p.name, p.default, p.help));
        }
        for a in pr.assumptions {
            s.push_str(&format!("  assumes: {a}\n"));
        }
        s.push_str(&format!(
            "  grid [{}, {}] dx {}\n\n",
            pr.grid.x_min, pr.grid.x_max, pr.grid.dx
        ));
    }
    s
}
