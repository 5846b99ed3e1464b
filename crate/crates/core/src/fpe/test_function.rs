use serde::{Deserialize, Serialize};

/// Scalar `C²` function with its first two derivatives.
pub trait SmoothFunction {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
    /// Closed interval outside which the function and its derivatives vanish.
    fn support(&self) -> Option<(f64, f64)> {
        None
    }
    fn label(&self) -> String {
        "phi".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpShape {
    /// `(1 − s²)³` with `s = (x − c)/r`.
    Poly3,
}

/// Compactly supported `C²` bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: f64,
    pub radius: f64,
    pub shape: BumpShape,
}

impl TestFunction {
    pub fn bump(center: f64, radius: f64) -> Self {
        assert!(radius > 0.0, "bump radius must be positive");
        Self {
            center,
            radius,
            shape: BumpShape::Poly3,
        }
    }

    /// Five centres `c + spread·{-2,-1,0,1,2}` times three radii `spread·{½,1,2}`.
    pub fn dictionary_around(center: f64, spread: f64) -> Vec<Self> {
        let mut out = Vec::with_capacity(15);
        for k in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            for r in [0.5, 1.0, 2.0] {
                out.push(Self::bump(center + k * spread, r * spread));
            }
        }
        out
    }

    pub fn dictionary() -> Vec<Self> {
        Self::dictionary_around(0.0, 1.0)
    }

    fn scaled(&self, x: f64) -> Option<f64> {
        let s = (x - self.center) / self.radius;
        (s.abs() < 1.0).then_some(s)
    }

    pub fn describe(&self) -> String {
        format!("bump(c={}, r={})", self.center, self.radius)
    }
}

impl SmoothFunction for TestFunction {
    fn value(&self, x: f64) -> f64 {
        self.scaled(x).map_or(0.0, |s| (1.0 - s * s).powi(3))
    }

    fn d1(&self, x: f64) -> f64 {
        self.scaled(x).map_or(0.0, |s| -6.0 * s * (1.0 - s * s).powi(2) / self.radius)
    }

    fn d2(&self, x: f64) -> f64 {
        self.scaled(x)
            .map_or(0.0, |s| (1.0 - s * s) * (30.0 * s * s - 6.0) / (self.radius * self.radius))
    }

    fn support(&self) -> Option<(f64, f64)> {
        Some((self.center - self.radius, self.center + self.radius))
    }

    fn label(&self) -> String {
        self.describe()
    }
}
