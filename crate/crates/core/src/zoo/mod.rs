//! Loss landscapes and statistical models the experiments run on.

mod categorical;
mod landscape;
mod mlp;

pub use categorical::{CategoricalModel, KlLandscape, SingularBernoulli};
pub use landscape::{Flat, Landscape, NormalCrossing, NormalCrossingSpec, Quadratic};
pub use mlp::{train_sgd, Checkpoint, Dataset, LossKind, MlpModel, MlpSpec, TeacherTask, TrainConfig};

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::rng::RngStream;

/// Axis-aligned compact parameter box `W = Π [lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(invalid!("bounds need matching non-empty lo/hi, got {} and {}", lo.len(), hi.len()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l < h)) {
            return Err(invalid!("every bound interval must be finite with lo < hi"));
        }
        Ok(Self { lo, hi })
    }

    /// The cube `[-half_width, half_width]^d`.
    pub fn symmetric(d: usize, half_width: f64) -> Result<Self> {
        Self::new(alloc::vec![-half_width; d], alloc::vec![half_width; d])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        w.len() == self.dim() && w.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, h))| *l <= *x && *x <= *h)
    }

    /// Clamps `w` into the box, returning how many coordinates moved.
    pub fn clamp(&self, w: &mut [f64]) -> usize {
        let mut moved = 0;
        for (x, (l, h)) in w.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            if *x < *l {
                *x = *l;
                moved += 1;
            } else if *x > *h {
                *x = *h;
                moved += 1;
            }
        }
        moved
    }

    /// Fills `out` with a uniform draw from the box.
    pub fn sample(&self, rng: &mut RngStream, out: &mut [f64]) {
        for (x, (l, h)) in out.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *x = rng.uniform_in(*l, *h);
        }
    }
}

/// A parameter vector known to lie inside its box.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamPoint {
    w: Vec<f64>,
    bounds: Bounds,
}

impl ParamPoint {
    pub fn new(w: Vec<f64>, bounds: Bounds) -> Result<Self> {
        if w.len() != bounds.dim() {
            return Err(invalid!("point has dimension {}, bounds have {}", w.len(), bounds.dim()));
        }
        if !bounds.contains(&w) {
            return Err(invalid!("point lies outside its bounds"));
        }
        Ok(Self { w, bounds })
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn into_parts(self) -> (Vec<f64>, Bounds) {
        (self.w, self.bounds)
    }
}

/// Positive rational `num/den`, used for exact learning coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rational {
    pub num: u32,
    pub den: u32,
}

impl Rational {
    pub const fn new(num: u32, den: u32) -> Self {
        Self { num, den }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn reduced(self) -> Self {
        let g = gcd(self.num, self.den).max(1);
        Self::new(self.num / g, self.den / g)
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Known learning coefficient and multiplicity of a landscape's zero set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundTruth {
    pub lambda: Rational,
    pub multiplicity: u32,
}
