use serde::{Deserialize, Serialize};

use crate::quadrature::gauss_legendre;
use crate::sde::InitialLaw;
use crate::{Error, Result};

/// Uniform cell grid on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
}

impl Grid1D {
    pub const MIN_CELLS: usize = 8;

    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::InvalidArgument(format!("grid bounds [{x_min}, {x_max}] are not an interval")));
        }
        if n_cells < Self::MIN_CELLS {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {} cells, got {n_cells}",
                Self::MIN_CELLS
            )));
        }
        Ok(Self { x_min, x_max, n_cells })
    }

    /// Grid of spacing `dx` whose cell centres are the multiples of `dx`
    /// from `round(lo/dx)·dx` to `round(hi/dx)·dx`.
    pub fn cell_centered(lo: f64, hi: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidArgument(format!("cell width must be positive, got {dx}")));
        }
        let (a, b) = ((lo / dx).round(), (hi / dx).round());
        if b < a {
            return Err(Error::InvalidArgument(format!("grid bounds [{lo}, {hi}] are not an interval")));
        }
        Self::new((a - 0.5) * dx, (b + 0.5) * dx, (b - a) as usize + 1)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }
    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }
    /// Left edge of cell `i`; `edge(n_cells) = x_max`.
    pub fn edge(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }
    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(move |i| self.center(i))
    }
    /// Index of the cell containing `x`, clamped to the grid.
    pub fn cell_of(&self, x: f64) -> usize {
        let p = ((x - self.x_min) / self.dx()).floor();
        p.clamp(0.0, (self.n_cells - 1) as f64) as usize
    }
}

/// Cell-averaged probability density with a ledger of mass lost through the
/// boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity1D {
    pub(crate) grid: Grid1D,
    pub(crate) v: Vec<f64>,
    pub(crate) leaked_mass: f64,
    pub(crate) time: f64,
}

impl GridDensity1D {
    pub fn from_cells(grid: Grid1D, v: Vec<f64>, time: f64) -> Result<Self> {
        if v.len() != grid.n_cells() {
            return Err(Error::Dimension(format!("{} cell values for {} cells", v.len(), grid.n_cells())));
        }
        if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidArgument(format!("cell value {bad} is not a nonnegative number")));
        }
        Ok(Self {
            grid,
            v,
            leaked_mass: 0.0,
            time,
        })
    }

    fn normalized(grid: Grid1D, mut v: Vec<f64>) -> Result<Self> {
        let mass: f64 = v.iter().sum::<f64>() * grid.dx();
        if !(mass > 0.0) {
            return Err(Error::InvalidArgument("density has no mass on the grid".into()));
        }
        v.iter_mut().for_each(|x| *x /= mass);
        Self::from_cells(grid, v, 0.0)
    }

    /// Exact cell averages of `law`, renormalised to unit mass on the grid.
    /// A Dirac mass goes entirely into the cell containing it.
    pub fn from_initial_law(grid: Grid1D, law: &InitialLaw) -> Result<Self> {
        law.validate()?;
        if law.dim() != 1 {
            return Err(Error::Dimension(format!("grid densities are scalar, law has dimension {}", law.dim())));
        }
        let dx = grid.dx();
        let v = match law {
            InitialLaw::Dirac { point } => {
                let mut v = vec![0.0; grid.n_cells()];
                if point[0] < grid.x_min() || point[0] > grid.x_max() {
                    return Err(Error::InvalidArgument(format!("Dirac mass at {} lies off the grid", point[0])));
                }
                v[grid.cell_of(point[0])] = 1.0 / dx;
                v
            }
            InitialLaw::Gaussian { std, mean } if *std == 0.0 => {
                return Self::from_initial_law(grid, &InitialLaw::Dirac { point: mean.clone() })
            }
            _ => {
                let cdf = |x: f64| law.cdf_1d(x).expect("scalar law has a CDF");
                (0..grid.n_cells())
                    .map(|i| ((cdf(grid.edge(i + 1)) - cdf(grid.edge(i))) / dx).max(0.0))
                    .collect()
            }
        };
        Self::normalized(grid, v)
    }

    /// Cell averages of a nonnegative function (4-point Gauss rule per cell),
    /// renormalised to unit mass.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let (xs, ws) = gauss_legendre(4);
        let dx = grid.dx();
        let v = (0..grid.n_cells())
            .map(|i| {
                let c = grid.center(i);
                xs.iter().zip(&ws).map(|(x, w)| 0.5 * w * f(c + 0.5 * dx * x)).sum::<f64>()
            })
            .collect();
        Self::normalized(grid, v)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.v
    }
    pub fn leaked_mass(&self) -> f64 {
        self.leaked_mass
    }
    pub fn time(&self) -> f64 {
        self.time
    }

    /// `Δx Σ v_i`.
    pub fn mass(&self) -> f64 {
        self.grid.dx() * self.v.iter().sum::<f64>()
    }

    /// Mass on the grid plus leaked mass.
    pub fn accounted_mass(&self) -> f64 {
        self.mass() + self.leaked_mass
    }

    pub fn min_value(&self) -> f64 {
        self.v.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn moment(&self, f: impl Fn(f64) -> f64) -> f64 {
        let dx = self.grid.dx();
        self.grid.centers().zip(&self.v).map(|(x, v)| f(x) * v).sum::<f64>() * dx
    }

    /// `Δx Σ |x_i| v_i`.
    pub fn first_moment(&self) -> f64 {
        self.moment(f64::abs)
    }

    /// `Δx Σ x_i v_i / mass`.
    pub fn mean(&self) -> f64 {
        self.moment(|x| x) / self.mass()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.moment(|x| (x - m) * (x - m)) / self.mass()
    }

    /// `Δx Σ φ(x_i) v_i`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.moment(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = Grid1D::new(-1.0, 1.0, 8).unwrap();
        assert_eq!(g.dx(), 0.25);
        assert_eq!(g.center(0), -0.875);
        assert_eq!(g.edge(8), 1.0);
        assert_eq!(g.cell_of(0.0), 4);
        assert_eq!(g.cell_of(5.0), 7);
        assert!(Grid1D::new(1.0, 1.0, 8).is_err());
        assert!(Grid1D::new(0.0, 1.0, 7).is_err());
    }

    #[test]
    fn cell_centered_grid_puts_centres_on_the_lattice() {
        let g = Grid1D::cell_centered(-1.0, 10.0, 0.01).unwrap();
        assert_eq!(g.n_cells(), 1101);
        assert!(g.center(100).abs() < 1e-12);
        assert!((g.center(170) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn symmetric_density_has_zero_mean_positive_first_moment() {
        let g = Grid1D::new(-6.0, 6.0, 600).unwrap();
        let d = GridDensity1D::from_initial_law(g, &InitialLaw::gaussian(0.0, 1.0)).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-12);
        assert!(d.mean().abs() < 1e-12);
        assert!((d.first_moment() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn dirac_like_density_first_moment() {
        let g = Grid1D::new(-4.0, 4.0, 800).unwrap();
        let d = GridDensity1D::from_initial_law(g, &InitialLaw::dirac(2.3)).unwrap();
        assert!((d.first_moment() - 2.3).abs() <= g.dx());
    }

    #[test]
    fn uniform_first_moment() {
        let g = Grid1D::new(-1.0, 2.0, 300).unwrap();
        let d = GridDensity1D::from_initial_law(g, &InitialLaw::uniform(0.0, 1.0)).unwrap();
        assert!((d.first_moment() - 0.5).abs() <= g.dx());
    }

    #[test]
    fn rejects_negative_cells() {
        let g = Grid1D::new(0.0, 1.0, 8).unwrap();
        assert!(GridDensity1D::from_cells(g, vec![-1.0; 8], 0.0).is_err());
        assert!(GridDensity1D::from_cells(g, vec![1.0; 7], 0.0).is_err());
    }
}
