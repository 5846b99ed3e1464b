use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One atom `weight · δ_mark` of a mark measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub mark: Vec<f64>,
    pub weight: f64,
}

/// Finite atomic measure on the mark space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkMeasure {
    atoms: Vec<Atom>,
    total_mass: f64,
}

impl MarkMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if let Some(first) = atoms.first() {
            let dim = first.mark.len();
            for a in &atoms {
                if a.mark.len() != dim {
                    return Err(Error::InvalidMeasure(format!(
                        "atoms have marks of dimension {} and {}",
                        dim,
                        a.mark.len()
                    )));
                }
                if !(a.weight.is_finite() && a.weight > 0.0) {
                    return Err(Error::InvalidMeasure(format!("atom weight {} is not positive", a.weight)));
                }
                if a.mark.iter().any(|m| !m.is_finite()) {
                    return Err(Error::InvalidMeasure(format!("atom mark {:?} is not finite", a.mark)));
                }
            }
        }
        let total_mass = atoms.iter().map(|a| a.weight).sum();
        Ok(Self { atoms, total_mass })
    }

    pub fn zero() -> Self {
        Self {
            atoms: Vec::new(),
            total_mass: 0.0,
        }
    }

    /// `mass · δ_mark` on a scalar mark space.
    pub fn dirac(mass: f64, mark: f64) -> Result<Self> {
        Self::new(vec![Atom { mark: vec![mark], weight: mass }])
    }

    /// Atomic measure from `(mark, weight)` pairs on a scalar mark space.
    pub fn scalar(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(m, w)| Atom { mark: vec![m], weight: w }).collect())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `ν(U)`.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mark_dim(&self) -> Option<usize> {
        self.atoms.first().map(|a| a.mark.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_mass_is_sum_of_weights() {
        let m = MarkMeasure::scalar(&[(-1.0, 0.25), (1.0, 0.5), (2.0, 1e-3)]).unwrap();
        let s: f64 = m.atoms().iter().map(|a| a.weight).sum();
        assert!((m.total_mass() - s).abs() <= 1e-12 * s);
        assert_eq!(m.mark_dim(), Some(1));
    }

    #[test]
    fn rejects_bad_atoms() {
        assert!(MarkMeasure::dirac(0.0, 1.0).is_err());
        assert!(MarkMeasure::dirac(-1.0, 1.0).is_err());
        assert!(MarkMeasure::dirac(1.0, f64::NAN).is_err());
        let mixed = vec![
            Atom { mark: vec![1.0], weight: 1.0 },
            Atom { mark: vec![1.0, 2.0], weight: 1.0 },
        ];
        assert!(MarkMeasure::new(mixed).is_err());
    }

    #[test]
    fn empty_measure_has_zero_mass() {
        let m = MarkMeasure::new(vec![]).unwrap();
        assert!(m.is_zero());
        assert_eq!(m.total_mass(), 0.0);
    }
}
