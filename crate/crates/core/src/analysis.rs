//! Critical-threshold versus LLC fits and the bits-per-coordinate law.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::fit::{simple_fit, FitResult};
use crate::num::{ln, log2};
use crate::volume::VolumeCurve;

/// Predicted critical bits per coordinate,
/// `(λ/d) log₂(1/ε) + ((m−1)/d) log₂(log(1/ε))`.
pub fn bits_per_coordinate(lambda: f64, d: usize, epsilon: f64, multiplicity: u32) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    if !(lambda > 0.0) || d == 0 || multiplicity == 0 {
        return Err(invalid!("need lambda > 0, d >= 1 and m >= 1"));
    }
    let d = d as f64;
    let mut bits = lambda / d * log2(1.0 / epsilon);
    if multiplicity > 1 {
        bits += (multiplicity - 1) as f64 / d * log2(ln(1.0 / epsilon));
    }
    Ok(bits)
}

/// Critical bits per coordinate read off a volume curve: a grid of `n_q`
/// levels per axis has cells of volume `Vol(W)/n_q^d`, and the critical
/// grid is the one whose cell matches `V(ε)`, so
/// `log₂ n_q* = (1/d) log₂(Vol(W)/V(ε))`. One value per ladder point.
pub fn volume_critical_bits(curve: &VolumeCurve, d: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(invalid!("dimension must be positive"));
    }
    curve
        .volumes
        .iter()
        .zip(&curve.epsilons)
        .map(|(&v, &e)| {
            if v > 0.0 {
                Ok(log2(curve.total_volume / v) / d as f64)
            } else {
                Err(Error::InsufficientData(format!("no volume samples at epsilon {e}")))
            }
        })
        .collect()
}

/// Slope of `bits` on `log₂(1/ε)`.
pub fn bits_slope(epsilons: &[f64], bits: &[f64]) -> Result<FitResult> {
    if epsilons.len() != bits.len() {
        return Err(invalid!("{} epsilons but {} bit values", epsilons.len(), bits.len()));
    }
    let x: Vec<f64> = epsilons.iter().map(|&e| log2(1.0 / e)).collect();
    simple_fit(&x, bits)
}

/// One checkpoint's LLC and critical value for a scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnalysisPoint {
    pub step: u64,
    pub lambda_hat: f64,
    pub critical_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnalysisResult {
    pub points: Vec<AnalysisPoint>,
    /// `true` where the point entered the fit.
    pub included: Vec<bool>,
    /// Critical value against λ̂ over the included points.
    pub fit: FitResult,
}

impl AnalysisResult {
    pub fn slope(&self) -> f64 {
        self.fit.slope()
    }

    pub fn intercept(&self) -> f64 {
        self.fit.intercept()
    }

    pub fn r_squared(&self) -> f64 {
        self.fit.r_squared
    }
}

/// Fits critical value on λ̂, leaving out the listed steps. The stored
/// points are never altered.
pub fn analyze(points: &[AnalysisPoint], exclude_steps: &[u64]) -> Result<AnalysisResult> {
    let included: Vec<bool> = points.iter().map(|p| !exclude_steps.contains(&p.step)).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .zip(&included)
        .filter(|(_, &inc)| inc)
        .map(|(p, _)| (p.lambda_hat, p.critical_value))
        .unzip();
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!("{} included points, need at least 3", x.len())));
    }
    let fit = simple_fit(&x, &y)?;
    Ok(AnalysisResult {
        points: points.to_vec(),
        included,
        fit,
    })
}

/// Joins λ̂ (keyed by step) onto critical values (keyed by step). Steps
/// missing from either side are an error.
pub fn join(llc: &[(u64, f64)], critical: &[(u64, f64)]) -> Result<Vec<AnalysisPoint>> {
    let mut out = Vec::with_capacity(critical.len());
    for &(step, value) in critical {
        let lambda = llc
            .iter()
            .find(|(s, _)| *s == step)
            .map(|(_, l)| *l)
            .ok_or_else(|| invalid!("no LLC estimate for step {step}"))?;
        out.push(AnalysisPoint {
            step,
            lambda_hat: lambda,
            critical_value: value,
        });
    }
    if let Some((s, _)) = llc.iter().find(|(s, _)| !critical.iter().any(|(c, _)| c == s)) {
        return Err(invalid!("no critical value for step {s}"));
    }
    Ok(out)
}
