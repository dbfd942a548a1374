use alloc::vec;
use alloc::vec::Vec;

use super::{Bounds, GroundTruth, Rational};
use crate::error::{Error, Result};
use crate::num::powi;

/// A non-negative loss `K` on a compact box with an analytic gradient.
pub trait Landscape: Sync {
    fn bounds(&self) -> &Bounds;

    fn dim(&self) -> usize {
        self.bounds().dim()
    }

    /// `K(w) >= 0`.
    fn loss(&self, w: &[f64]) -> f64;

    /// Writes `∇K(w)` into `grad` and returns `K(w)`.
    fn loss_grad(&self, w: &[f64], grad: &mut [f64]) -> f64;

    /// A point `w*` with `K(w*) = 0`.
    fn reference_point(&self) -> &[f64];

    fn ground_truth(&self) -> Option<GroundTruth> {
        None
    }
}

/// `K(w) = Σ (w_i - c_i)^2`, the regular model with `λ = d/2`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    bounds: Bounds,
    center: Vec<f64>,
    curvature: Vec<f64>,
}

impl Quadratic {
    pub fn new(bounds: Bounds) -> Self {
        let d = bounds.dim();
        Self {
            bounds,
            center: vec![0.0; d],
            curvature: vec![1.0; d],
        }
    }

    /// Moves the minimum to `center`, which must lie in the box.
    pub fn with_center(mut self, center: Vec<f64>) -> Result<Self> {
        if !self.bounds.contains(&center) {
            return Err(Error::InvalidSpec("quadratic center outside bounds".into()));
        }
        self.center = center;
        Ok(self)
    }

    /// Per-coordinate curvatures `K = Σ c_i (w_i - w*_i)^2`.
    pub fn with_curvature(mut self, curvature: Vec<f64>) -> Result<Self> {
        if curvature.len() != self.bounds.dim() || curvature.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidSpec("curvatures must be positive, one per coordinate".into()));
        }
        self.curvature = curvature;
        Ok(self)
    }
}

impl Landscape for Quadratic {
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn loss(&self, w: &[f64]) -> f64 {
        w.iter()
            .zip(&self.center)
            .zip(&self.curvature)
            .map(|((x, c), k)| k * (x - c) * (x - c))
            .sum()
    }

    fn loss_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        for (((g, x), c), k) in grad.iter_mut().zip(w).zip(&self.center).zip(&self.curvature) {
            *g = 2.0 * k * (x - c);
        }
        self.loss(w)
    }

    fn reference_point(&self) -> &[f64] {
        &self.center
    }

    fn ground_truth(&self) -> Option<GroundTruth> {
        Some(GroundTruth {
            lambda: Rational::new(self.dim() as u32, 2).reduced(),
            multiplicity: 1,
        })
    }
}

/// Exponents and active coordinates of a normal-crossing monomial.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormalCrossingSpec {
    /// `k_i >= 1` per coordinate (ignored on inactive coordinates).
    pub exponents: Vec<u32>,
    pub active: Vec<bool>,
}

impl NormalCrossingSpec {
    /// All coordinates active.
    pub fn all_active(exponents: Vec<u32>) -> Self {
        let active = vec![true; exponents.len()];
        Self { exponents, active }
    }

    pub fn validate(&self) -> Result<()> {
        if self.exponents.is_empty() || self.exponents.len() != self.active.len() {
            return Err(Error::InvalidSpec("exponents and active flags must have equal non-zero length".into()));
        }
        if !self.active.iter().any(|&a| a) {
            return Err(Error::InvalidSpec("normal crossing needs at least one active coordinate".into()));
        }
        if self.exponents.iter().zip(&self.active).any(|(&k, &a)| a && k == 0) {
            return Err(Error::InvalidSpec("active exponents must be >= 1".into()));
        }
        Ok(())
    }

    /// `λ = min 1/(2k_i)` over active coordinates, `m` = number attaining it.
    pub fn ground_truth(&self) -> GroundTruth {
        let k_max = self
            .exponents
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .map(|(&k, _)| k)
            .max()
            .unwrap_or(1);
        let multiplicity = self
            .exponents
            .iter()
            .zip(&self.active)
            .filter(|(&k, &a)| a && k == k_max)
            .count() as u32;
        GroundTruth {
            lambda: Rational::new(1, 2 * k_max),
            multiplicity,
        }
    }
}

/// `K(w) = Π_{i active} (w_i - c_i)^{2 k_i}`.
#[derive(Clone, Debug)]
pub struct NormalCrossing {
    spec: NormalCrossingSpec,
    bounds: Bounds,
    center: Vec<f64>,
}

impl NormalCrossing {
    pub fn new(spec: NormalCrossingSpec, bounds: Bounds) -> Result<Self> {
        spec.validate()?;
        if spec.exponents.len() != bounds.dim() {
            return Err(Error::InvalidSpec("spec dimension differs from bounds dimension".into()));
        }
        let center = vec![0.0; bounds.dim()];
        if !bounds.contains(&center) {
            return Err(Error::InvalidSpec("bounds must contain the origin".into()));
        }
        Ok(Self { spec, bounds, center })
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Result<Self> {
        if !self.bounds.contains(&center) {
            return Err(Error::InvalidSpec("normal-crossing center outside bounds".into()));
        }
        self.center = center;
        Ok(self)
    }

    pub fn spec(&self) -> &NormalCrossingSpec {
        &self.spec
    }
}

impl Landscape for NormalCrossing {
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn loss(&self, w: &[f64]) -> f64 {
        let mut acc = 1.0;
        for (i, &k) in self.spec.exponents.iter().enumerate() {
            if self.spec.active[i] {
                acc *= powi(w[i] - self.center[i], 2 * k);
            }
        }
        acc
    }

    fn loss_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let terms: Vec<(usize, f64, u32)> = (0..w.len())
            .filter(|&i| self.spec.active[i])
            .map(|i| (i, w[i] - self.center[i], self.spec.exponents[i]))
            .collect();
        for (j, &(i, x, k)) in terms.iter().enumerate() {
            // d/dx x^{2k} = 2k x^{2k-1}, times the other factors.
            let mut g = 2.0 * k as f64 * powi(x, 2 * k - 1);
            for (jj, &(_, y, kk)) in terms.iter().enumerate() {
                if jj != j {
                    g *= powi(y, 2 * kk);
                }
            }
            grad[i] = g;
        }
        self.loss(w)
    }

    fn reference_point(&self) -> &[f64] {
        &self.center
    }

    fn ground_truth(&self) -> Option<GroundTruth> {
        Some(self.spec.ground_truth())
    }
}

/// `K ≡ 0`. Every point is a minimum; the LLC is zero.
#[derive(Clone, Debug)]
pub struct Flat {
    bounds: Bounds,
    origin: Vec<f64>,
}

impl Flat {
    pub fn new(bounds: Bounds) -> Self {
        let origin = bounds.lo().iter().zip(bounds.hi()).map(|(l, h)| 0.5 * (l + h)).collect();
        Self { bounds, origin }
    }
}

impl Landscape for Flat {
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn loss(&self, _w: &[f64]) -> f64 {
        0.0
    }

    fn loss_grad(&self, _w: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        0.0
    }

    fn reference_point(&self) -> &[f64] {
        &self.origin
    }
}
