//! Monte-Carlo sublevel-set volumes and the `c ε^λ (−log ε)^{m−1}` fit.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::fit::linear_fit;
use crate::num::{ln, log10, sqrt};
use crate::rng::{rng_stream, stream_id, tag};
use crate::zoo::{Bounds, Landscape};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VolumeCurve {
    /// Strictly descending.
    pub epsilons: Vec<f64>,
    pub volumes: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub mc_samples: usize,
    pub total_volume: f64,
}

impl VolumeCurve {
    pub fn len(&self) -> usize {
        self.epsilons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epsilons.is_empty()
    }
}

/// `Vol{w ∈ W : K(w) ≤ ε}` with its binomial standard error.
pub fn mc_sublevel_volume<L: Landscape + ?Sized>(landscape: &L, epsilon: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let c = volume_curve(landscape, &[epsilon], samples, seed)?;
    Ok((c.volumes[0], c.standard_errors[0]))
}

/// Volumes over an ε ladder from one shared sample set, so the curve is
/// monotone by construction. Samples are split into blocks of
/// `2^16` draws with one random stream each.
pub fn volume_curve<L: Landscape + ?Sized>(landscape: &L, epsilons: &[f64], samples: usize, seed: u64) -> Result<VolumeCurve> {
    volume_curve_with(landscape.bounds(), |w| landscape.loss(w), epsilons, samples, seed)
}

pub(crate) const BLOCK: usize = 1 << 16;

/// [`volume_curve`] for an arbitrary function on a box.
pub fn volume_curve_with(
    bounds: &Bounds,
    f: impl Fn(&[f64]) -> f64,
    epsilons: &[f64],
    samples: usize,
    seed: u64,
) -> Result<VolumeCurve> {
    check_ladder(epsilons, samples)?;
    let mut hits = vec![0u64; epsilons.len()];
    let mut w = vec![0.0; bounds.dim()];
    let blocks = samples.div_ceil(BLOCK);
    for b in 0..blocks {
        let mut rng = rng_stream(seed, stream_id(tag::VOLUME, b as u64));
        let count = BLOCK.min(samples - b * BLOCK);
        for _ in 0..count {
            bounds.sample(&mut rng, &mut w);
            count_hits(f(&w), epsilons, &mut hits);
        }
    }
    Ok(curve_from_hits(epsilons, &hits, samples, bounds.volume()))
}

pub(crate) fn check_ladder(epsilons: &[f64], samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(invalid!("need at least one sample"));
    }
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(invalid!("epsilons must be positive and finite"));
    }
    if epsilons.windows(2).any(|p| p[1] >= p[0]) {
        return Err(invalid!("epsilon ladder must be strictly descending"));
    }
    Ok(())
}

/// Adds one sample with value `k` to the hit counts of a descending ladder.
#[inline]
pub(crate) fn count_hits(k: f64, epsilons: &[f64], hits: &mut [u64]) {
    for (h, e) in hits.iter_mut().zip(epsilons) {
        if k <= *e {
            *h += 1;
        } else {
            break;
        }
    }
}

pub(crate) fn curve_from_hits(epsilons: &[f64], hits: &[u64], samples: usize, total_volume: f64) -> VolumeCurve {
    let n = samples as f64;
    let (volumes, standard_errors) = hits
        .iter()
        .map(|&h| {
            let f = h as f64 / n;
            (total_volume * f, total_volume * sqrt(f * (1.0 - f) / n))
        })
        .unzip();
    VolumeCurve {
        epsilons: epsilons.to_vec(),
        volumes,
        standard_errors,
        mc_samples: samples,
        total_volume,
    }
}

/// `2^{-hi}, ..., 2^{-lo}` in descending order.
pub fn dyadic_ladder(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| libm::exp2(-(k as f64))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MultiplicityMode {
    Fixed(u32),
    /// Best of `m ∈ {1, 2, 3}`.
    SelectByFit,
}

/// Which ladder points a fit may use.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitWindowConfig {
    pub max_epsilon: f64,
    pub max_relative_se: f64,
    pub min_points: usize,
    pub min_decades: f64,
}

impl Default for FitWindowConfig {
    fn default() -> Self {
        Self {
            max_epsilon: 0.25,
            max_relative_se: 0.2,
            min_points: 4,
            min_decades: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingFit {
    pub lambda: f64,
    pub multiplicity: u32,
    pub log_c: f64,
    /// Weighted R² of `log V` against the fitted law.
    pub r_squared: f64,
    /// `(ε_min, ε_max)` of the points used.
    pub epsilon_window: (f64, f64),
    pub points_used: usize,
    /// `(m, λ, R²)` for every multiplicity tried.
    pub candidates: Vec<(u32, f64, f64)>,
}

pub fn fit_scaling(curve: &VolumeCurve, mode: MultiplicityMode) -> Result<ScalingFit> {
    fit_scaling_with(curve, mode, &FitWindowConfig::default())
}

/// Weighted least squares of
/// `log V − (m−1) log(−log ε) = log c + λ log ε` for each candidate `m`,
/// with weights `(V/SE)²` (inverse variance of `log V`).
pub fn fit_scaling_with(curve: &VolumeCurve, mode: MultiplicityMode, window: &FitWindowConfig) -> Result<ScalingFit> {
    let n = curve.len();
    if curve.volumes.len() != n || curve.standard_errors.len() != n {
        return Err(invalid!("curve vectors differ in length"));
    }
    let mut xs = Vec::new();
    let mut loglog = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    let mut eps_used = Vec::new();
    for i in 0..n {
        let (e, v, se) = (curve.epsilons[i], curve.volumes[i], curve.standard_errors[i]);
        if e > window.max_epsilon || e >= 1.0 || v <= 0.0 || v >= curve.total_volume {
            continue;
        }
        let rel = if se > 0.0 { se / v } else { 0.0 };
        if rel > window.max_relative_se {
            continue;
        }
        xs.push(ln(e));
        loglog.push(ln(-ln(e)));
        ys.push(ln(v));
        // Exact (noiseless) curves carry zero SE; weight them equally.
        ws.push(if se > 0.0 { (v / se) * (v / se) } else { 1.0 });
        eps_used.push(e);
    }
    if ws.iter().any(|&w| w == 1.0) && ws.iter().any(|&w| w != 1.0) {
        return Err(invalid!("curve mixes zero and non-zero standard errors"));
    }
    if xs.len() < window.min_points {
        return Err(Error::FitWindow(format!(
            "{} usable points, need {}",
            xs.len(),
            window.min_points
        )));
    }
    let (e_min, e_max) = (eps_used[eps_used.len() - 1], eps_used[0]);
    if log10(e_max / e_min) < window.min_decades {
        return Err(Error::FitWindow(format!(
            "usable points span {:.2} decades, need {}",
            log10(e_max / e_min),
            window.min_decades
        )));
    }

    let candidates: Vec<u32> = match mode {
        MultiplicityMode::Fixed(m) if m >= 1 => vec![m],
        MultiplicityMode::Fixed(_) => return Err(invalid!("multiplicity must be >= 1")),
        MultiplicityMode::SelectByFit => vec![1, 2, 3],
    };

    let w_sum: f64 = ws.iter().sum();
    let y_mean = ws.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / w_sum;
    let ss_tot: f64 = ws.iter().zip(&ys).map(|(w, y)| w * (y - y_mean) * (y - y_mean)).sum();

    let mut results = Vec::new();
    for &m in &candidates {
        let shifted: Vec<f64> = ys.iter().zip(&loglog).map(|(y, l)| y - (m as f64 - 1.0) * l).collect();
        let f = linear_fit(&[&xs], &shifted, Some(&ws))?;
        let ss_res: f64 = ws.iter().zip(&f.residuals).map(|(w, r)| w * r * r).sum();
        let r2 = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 0.0 };
        results.push((m, f.slope(), f.intercept(), r2, ss_res));
    }
    // Same parameter count for every m, so the smallest residual wins.
    let best = results
        .iter()
        .min_by(|a, b| a.4.total_cmp(&b.4))
        .copied()
        .expect("at least one candidate");
    Ok(ScalingFit {
        lambda: best.1,
        multiplicity: best.0,
        log_c: best.2,
        r_squared: best.3,
        epsilon_window: (e_min, e_max),
        points_used: xs.len(),
        candidates: results.iter().map(|r| (r.0, r.1, r.3)).collect(),
    })
}
