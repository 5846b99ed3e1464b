use std::io::{self, Write};

use serde::Serialize;

use super::grid::{Grid1D, GridDensity1D};
use crate::sde::CoefficientSet;
use crate::{Error, Result};

const CFL_SLACK: f64 = 1e-12;
const SHIFT_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct Shift {
    /// Source cell of target `i` is `i + offset` (and `i + offset + 1`).
    offset: isize,
    theta: f64,
    weight: f64,
}

/// Explicit conservative update for one grid.
///
/// * drift: first-order upwind flux of `b v` at cell faces,
/// * diffusion: central difference of `a v`,
/// * jumps: `Σ_k w_k [v(x − γu_k) − v(x)]`, off-grid values by linear
///   interpolation between centres.
///
/// Ghost cells outside the domain hold zero, so all boundary fluxes are
/// outflows and are booked into the leaked mass.
pub struct FpeStepper<'a> {
    cs: &'a CoefficientSet,
    grid: Grid1D,
    b_faces: Vec<f64>,
    a_cells: Vec<f64>,
    shifts: Vec<Shift>,
    nu_mass: f64,
    max_rate: f64,
    coeff_time: Option<f64>,
}

impl<'a> FpeStepper<'a> {
    pub fn new(cs: &'a CoefficientSet, grid: Grid1D) -> Result<Self> {
        if cs.dim() != 1 {
            return Err(Error::Unsupported(format!("grid solver is scalar, SDE has dimension {}", cs.dim())));
        }
        let dx = grid.dx();
        let mut shifts = Vec::new();
        let mut nu_mass = 0.0;
        if !cs.jumps_vanish() {
            if !cs.has_additive_jumps() {
                return Err(Error::Unsupported(
                    "grid solver handles state-independent jumps g(t,x,u) = u only".into(),
                ));
            }
            nu_mass = cs.nu().total_mass();
            for atom in cs.nu().atoms() {
                let p = -cs.jump_scale() * atom.mark[0] / dx;
                let mut offset = p.floor();
                let mut theta = p - offset;
                if theta < SHIFT_SNAP {
                    theta = 0.0;
                } else if theta > 1.0 - SHIFT_SNAP {
                    offset += 1.0;
                    theta = 0.0;
                }
                shifts.push(Shift {
                    offset: offset as isize,
                    theta,
                    weight: atom.weight,
                });
            }
        }
        let n = grid.n_cells();
        Ok(Self {
            cs,
            grid,
            b_faces: vec![0.0; n + 1],
            a_cells: vec![0.0; n],
            shifts,
            nu_mass,
            max_rate: 0.0,
            coeff_time: None,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn refresh(&mut self, t: f64) {
        if self.coeff_time == Some(t) || (self.cs.is_time_homogeneous() && self.coeff_time.is_some()) {
            return;
        }
        let g = self.grid;
        for (i, b) in self.b_faces.iter_mut().enumerate() {
            *b = self.cs.drift_1d(t, g.edge(i));
        }
        for (i, a) in self.a_cells.iter_mut().enumerate() {
            *a = self.cs.diffusion_coeff_1d(t, g.center(i));
        }
        let dx = g.dx();
        self.max_rate = (0..g.n_cells())
            .map(|i| {
                let out_drift = self.b_faces[i + 1].max(0.0) + (-self.b_faces[i]).max(0.0);
                out_drift / dx + 2.0 * self.a_cells[i] / (dx * dx) + self.nu_mass
            })
            .fold(0.0, f64::max);
        self.coeff_time = Some(t);
    }

    /// Largest stable step at time `t`:
    /// `1 / max_i [(b⁺_{i+½} + b⁻_{i−½})/Δx + 2a_i/Δx² + ν(U)]`.
    pub fn max_stable_dt(&mut self, t: f64) -> f64 {
        self.refresh(t);
        if self.max_rate > 0.0 {
            1.0 / self.max_rate
        } else {
            f64::INFINITY
        }
    }

    /// Advances `state` by `dt`.
    pub fn step(&mut self, state: &GridDensity1D, dt: f64) -> Result<GridDensity1D> {
        if state.grid != self.grid {
            return Err(Error::InvalidArgument("density lives on a different grid".into()));
        }
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be nonnegative, got {dt}")));
        }
        self.refresh(state.time);
        if dt * self.max_rate > 1.0 + CFL_SLACK {
            return Err(Error::Cfl { dt, max_dt: 1.0 / self.max_rate });
        }
        let n = self.grid.n_cells();
        let dx = self.grid.dx();
        let v = &state.v;
        let (b, a) = (&self.b_faces, &self.a_cells);
        let cell = |j: isize| if j >= 0 && (j as usize) < n { v[j as usize] } else { 0.0 };

        // net rightward flux through face i (between cells i-1 and i)
        let flux = |i: usize| {
            let left = if i > 0 { v[i - 1] } else { 0.0 };
            let right = if i < n { v[i] } else { 0.0 };
            let a_left = if i > 0 { a[i - 1] } else { 0.0 };
            let a_right = if i < n { a[i] } else { 0.0 };
            b[i].max(0.0) * left - (-b[i]).max(0.0) * right - (a_right * right - a_left * left) / dx
        };

        let mut out = Vec::with_capacity(n);
        let mut f_left = flux(0);
        let boundary_out = -f_left;
        let mut inflow_total = 0.0;
        for i in 0..n {
            let f_right = flux(i + 1);
            let mut inflow = 0.0;
            for s in &self.shifts {
                let j = i as isize + s.offset;
                let val = if s.theta == 0.0 {
                    cell(j)
                } else {
                    (1.0 - s.theta) * cell(j) + s.theta * cell(j + 1)
                };
                inflow += s.weight * val;
            }
            inflow_total += inflow;
            out.push(v[i] - dt / dx * (f_right - f_left) + dt * (inflow - self.nu_mass * v[i]));
            f_left = f_right;
        }
        let boundary_out = boundary_out + f_left;
        let jump_out = dx * (self.nu_mass * v.iter().sum::<f64>() - inflow_total);
        Ok(GridDensity1D {
            grid: self.grid,
            v: out,
            leaked_mass: state.leaked_mass + dt * (boundary_out + jump_out),
            time: state.time + dt,
        })
    }
}

/// One explicit step; refuses steps above the stability limit.
pub fn fpe_step(state: &GridDensity1D, cs: &CoefficientSet, dt: f64) -> Result<GridDensity1D> {
    FpeStepper::new(cs, state.grid)?.step(state, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub time: f64,
    pub mass: f64,
    pub leaked_mass: f64,
    pub first_moment: f64,
    pub mean: f64,
    pub min_value: f64,
}

/// Densities at checkpoint times.
#[derive(Debug, Clone)]
pub struct DensityTrajectory {
    snapshots: Vec<GridDensity1D>,
    dt: f64,
    n_steps: usize,
    min_value: f64,
}

impl DensityTrajectory {
    pub fn snapshots(&self) -> &[GridDensity1D] {
        &self.snapshots
    }
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }
    /// Snapshot whose time is within `1e-12·max(1, t)` of `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.snapshots.iter().position(|s| (s.time - t).abs() <= tol)
    }
    pub fn at(&self, t: f64) -> Option<&GridDensity1D> {
        self.index_of(t).map(|i| &self.snapshots[i])
    }
    pub fn last(&self) -> &GridDensity1D {
        self.snapshots.last().expect("trajectory holds at least v0")
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
    /// Smallest cell value seen over every step, not only at checkpoints.
    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        self.snapshots
            .iter()
            .map(|s| ManifestEntry {
                time: s.time,
                mass: s.mass(),
                leaked_mass: s.leaked_mass,
                first_moment: s.first_moment(),
                mean: s.mean(),
                min_value: s.min_value(),
            })
            .collect()
    }

    /// `x_center,v` rows of snapshot `k`.
    pub fn write_density_csv<W: Write>(&self, k: usize, w: &mut W) -> io::Result<()> {
        let s = &self.snapshots[k];
        writeln!(w, "x_center,v")?;
        for (x, v) in s.grid.centers().zip(&s.v) {
            writeln!(w, "{x},{v}")?;
        }
        Ok(())
    }
}

/// `k` equally spaced checkpoints `T/k, 2T/k, …, T`.
pub fn uniform_checkpoints(horizon: f64, k: usize) -> Vec<f64> {
    (1..=k).map(|i| if i == k { horizon } else { horizon * i as f64 / k as f64 }).collect()
}

/// Integrates from `v0` to `horizon` with step `dt`, recording `v0`, every
/// checkpoint and the final state. Steps are shortened to land exactly on
/// checkpoints.
pub fn solve_fpe(
    cs: &CoefficientSet,
    v0: &GridDensity1D,
    horizon: f64,
    dt: f64,
    checkpoints: &[f64],
) -> Result<DensityTrajectory> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be nonnegative, got {horizon}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if (v0.accounted_mass() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "initial density has mass {} (expected 1)",
            v0.accounted_mass()
        )));
    }
    let mut targets: Vec<f64> = Vec::with_capacity(checkpoints.len() + 1);
    for &c in checkpoints {
        if !(0.0..=horizon).contains(&c) {
            return Err(Error::TimeOutOfRange { t: c, horizon });
        }
        targets.push(c);
    }
    targets.push(horizon);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let mut stepper = FpeStepper::new(cs, v0.grid)?;
    let mut state = v0.clone();
    state.time = 0.0;
    let mut snapshots = vec![state.clone()];
    let mut min_value = state.min_value();
    let mut n_steps = 0;
    let snap = 1e-12 * horizon.max(1.0);
    for &target in targets.iter().filter(|&&t| t > 0.0) {
        while target - state.time > snap {
            let h = (target - state.time).min(dt);
            let mut next = stepper.step(&state, h)?;
            if target - next.time <= snap {
                next.time = target;
            }
            min_value = min_value.min(next.min_value());
            state = next;
            n_steps += 1;
        }
        snapshots.push(state.clone());
    }
    Ok(DensityTrajectory {
        snapshots,
        dt,
        n_steps,
        min_value,
    })
}
