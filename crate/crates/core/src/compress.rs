//! Quantization, low-rank factorization, Gaussian noise and structured
//! pruning, each with the search for its critical compression level.
//!
//! Losses are supplied as closures `Fn(&[f64]) -> f64` over flat parameter
//! vectors; ΔLoss is always `loss(compressed) − loss(original)` with the
//! same closure.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::{svd, Matrix};
use crate::num::{ceil, exp, floor, ln, round, sqrt};
use crate::rng::{rng_stream, stream_id, tag};
use crate::zoo::MlpModel;

// ---------------------------------------------------------------- quantization

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuantizationSpec {
    pub n_q: u32,
    pub m_clamp: f64,
}

impl QuantizationSpec {
    pub fn new(n_q: u32, m_clamp: f64) -> Result<Self> {
        if n_q < 4 || n_q % 2 != 0 {
            return Err(Error::InvalidSpec(format!("n_q must be even and >= 4, got {n_q}")));
        }
        if !(m_clamp > 0.0 && m_clamp.is_finite()) {
            return Err(Error::InvalidSpec(format!("clamp must be positive, got {m_clamp}")));
        }
        Ok(Self { n_q, m_clamp })
    }

    /// Grid spacing `Δ = m / (n_q/2 − 1)`.
    pub fn step(&self) -> f64 {
        self.m_clamp / (self.n_q / 2 - 1) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum QuantMode {
    /// Clamp chosen to minimise the quantized loss.
    LossMinimized,
    /// Clamp fixed at `max |w|`.
    MaxAbs,
}

/// Clamps to `[−m, m]` and rounds to the nearest multiple of `Δ`.
pub fn quantize(w: &[f64], spec: &QuantizationSpec) -> Result<Vec<f64>> {
    let spec = QuantizationSpec::new(spec.n_q, spec.m_clamp)?;
    let mut out = w.to_vec();
    quantize_in_place(&mut out, &spec);
    Ok(out)
}

pub(crate) fn quantize_in_place(w: &mut [f64], spec: &QuantizationSpec) {
    let m = spec.m_clamp;
    let delta = spec.step();
    let half = (spec.n_q / 2 - 1) as f64;
    for x in w.iter_mut() {
        let k = round(x.clamp(-m, m) / delta).clamp(-half, half);
        // `+ 0.0` folds −0 into +0.
        *x = k * delta + 0.0;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MSearchConfig {
    pub grid_points: usize,
    /// Lower end of the geometric grid as a fraction of `max |w|`.
    pub lower_fraction: f64,
    /// Golden-section stops once the bracket is this small relative to its
    /// midpoint.
    pub relative_tolerance: f64,
}

impl Default for MSearchConfig {
    fn default() -> Self {
        Self {
            grid_points: 64,
            lower_fraction: 0.1,
            relative_tolerance: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantOutcome {
    pub n_q: u32,
    /// Chosen clamp; 0 when every parameter is 0.
    pub m_clamp: f64,
    pub loss: f64,
    pub delta_loss: f64,
}

fn quantized_loss<F: Fn(&[f64]) -> f64>(params: &[f64], n_q: u32, m: f64, loss: &F, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend_from_slice(params);
    quantize_in_place(buf, &QuantizationSpec { n_q, m_clamp: m });
    loss(buf)
}

fn max_abs(w: &[f64]) -> f64 {
    w.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Quantizes at `n_q` with the clamp picked by `mode` and reports ΔLoss
/// against `baseline`.
pub fn quantize_with_mode<F: Fn(&[f64]) -> f64>(
    params: &[f64],
    n_q: u32,
    mode: QuantMode,
    loss: &F,
    baseline: f64,
    cfg: &MSearchConfig,
) -> Result<QuantOutcome> {
    QuantizationSpec::new(n_q, 1.0)?;
    let top = max_abs(params);
    if top == 0.0 {
        return Ok(QuantOutcome {
            n_q,
            m_clamp: 0.0,
            loss: baseline,
            delta_loss: 0.0,
        });
    }
    if !top.is_finite() {
        return Err(invalid!("non-finite parameter"));
    }
    let mut buf = Vec::with_capacity(params.len());
    let (m, l) = match mode {
        QuantMode::MaxAbs => {
            let l = quantized_loss(params, n_q, top, loss, &mut buf);
            if !l.is_finite() {
                return Err(Error::QuantizationFailed(format!("non-finite loss at n_q = {n_q}")));
            }
            (top, l)
        }
        QuantMode::LossMinimized => search_clamp(params, n_q, top, loss, cfg, &mut buf)?,
    };
    Ok(QuantOutcome {
        n_q,
        m_clamp: m,
        loss: l,
        delta_loss: l - baseline,
    })
}

/// Geometric sweep over `[lower·top, top]` followed by golden-section
/// refinement around the best grid point. `top` is always a candidate.
fn search_clamp<F: Fn(&[f64]) -> f64>(
    params: &[f64],
    n_q: u32,
    top: f64,
    loss: &F,
    cfg: &MSearchConfig,
    buf: &mut Vec<f64>,
) -> Result<(f64, f64)> {
    let k = cfg.grid_points.max(2);
    let lo = cfg.lower_fraction.clamp(1e-12, 1.0) * top;
    let ratio = ln(top / lo);
    let grid: Vec<f64> = (0..k)
        .map(|i| if i + 1 == k { top } else { lo * exp(ratio * i as f64 / (k - 1) as f64) })
        .collect();
    let mut best: Option<(f64, f64)> = None;
    let mut best_i = 0;
    let consider = |m: f64, l: f64, best: &mut Option<(f64, f64)>| -> bool {
        if l.is_finite() && best.is_none_or(|(_, bl)| l < bl) {
            *best = Some((m, l));
            return true;
        }
        false
    };
    for (i, &m) in grid.iter().enumerate() {
        let l = quantized_loss(params, n_q, m, loss, buf);
        if consider(m, l, &mut best) {
            best_i = i;
        }
    }
    if best.is_none() {
        return Err(Error::QuantizationFailed(format!(
            "every clamp candidate gave a non-finite loss at n_q = {n_q}"
        )));
    }

    let mut a = grid[best_i.saturating_sub(1)];
    let mut b = grid[(best_i + 1).min(k - 1)];
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let eval = |m: f64, buf: &mut Vec<f64>| {
        let l = quantized_loss(params, n_q, m, loss, buf);
        if l.is_finite() {
            l
        } else {
            f64::INFINITY
        }
    };
    let mut fc = eval(c, buf);
    let mut fd = eval(d, buf);
    consider(c, fc, &mut best);
    consider(d, fd, &mut best);
    let mut iters = 0;
    while (b - a) > cfg.relative_tolerance * 0.5 * (a + b) && iters < 200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c, buf);
            consider(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d, buf);
            consider(d, fd, &mut best);
        }
        iters += 1;
    }
    Ok(best.expect("checked above"))
}

/// Clamp minimising the quantized loss, with its ΔLoss.
pub fn quantize_loss_min_m<F: Fn(&[f64]) -> f64>(
    params: &[f64],
    n_q: u32,
    loss: &F,
    cfg: &MSearchConfig,
) -> Result<QuantOutcome> {
    let baseline = loss(params);
    quantize_with_mode(params, n_q, QuantMode::LossMinimized, loss, baseline, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CriticalNqConfig {
    pub mode: QuantMode,
    pub cap: u32,
    pub m_search: MSearchConfig,
}

impl Default for CriticalNqConfig {
    fn default() -> Self {
        Self {
            mode: QuantMode::LossMinimized,
            cap: 1 << 16,
            m_search: MSearchConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalNq {
    pub n_q: u32,
    pub outcome: QuantOutcome,
    /// Every `n_q` evaluated, in evaluation order.
    pub evaluations: Vec<QuantOutcome>,
}

/// Smallest even `n_q ≥ 4` with `ΔLoss ≤ ε`, by doubling, bisection over
/// even values and a final walk down while `n_q − 2` still passes.
pub fn critical_nq<F: Fn(&[f64]) -> f64>(
    params: &[f64],
    epsilon: f64,
    loss: &F,
    cfg: &CriticalNqConfig,
) -> Result<CriticalNq> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(invalid!("epsilon must be finite and non-negative"));
    }
    if cfg.cap < 4 {
        return Err(invalid!("n_q cap must be at least 4"));
    }
    let baseline = loss(params);
    let mut evals: Vec<QuantOutcome> = Vec::new();
    let at = |n: u32, evals: &mut Vec<QuantOutcome>| -> Result<QuantOutcome> {
        if let Some(o) = evals.iter().find(|o| o.n_q == n) {
            return Ok(*o);
        }
        let o = quantize_with_mode(params, n, cfg.mode, loss, baseline, &cfg.m_search)?;
        evals.push(o);
        Ok(o)
    };
    let passes = |o: &QuantOutcome| o.delta_loss <= epsilon;

    let mut lo = 0u32;
    let mut hi = 4u32;
    loop {
        if passes(&at(hi, &mut evals)?) {
            break;
        }
        if hi >= cfg.cap {
            return Err(Error::UnreachableTolerance(format!(
                "ΔLoss above {epsilon} for every n_q up to {}",
                cfg.cap
            )));
        }
        lo = hi;
        hi = (hi * 2).min(cfg.cap & !1);
    }
    while lo >= 4 && hi - lo > 2 {
        let mid = (lo + hi) / 4 * 2;
        if passes(&at(mid, &mut evals)?) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    while hi > 4 && passes(&at(hi - 2, &mut evals)?) {
        hi -= 2;
    }
    let outcome = at(hi, &mut evals)?;
    Ok(CriticalNq {
        n_q: hi,
        outcome,
        evaluations: evals,
    })
}

// ---------------------------------------------------------------- factorization

#[derive(Clone, Debug, PartialEq)]
pub struct FactorizedMatrix {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
    pub rank: usize,
    pub params_before: usize,
    /// `d1·n + n + n·d2`.
    pub params_after: usize,
}

impl FactorizedMatrix {
    pub fn reconstruct(&self) -> Matrix {
        let (d1, d2) = (self.u.rows(), self.v.cols());
        Matrix::from_fn(d1, d2, |i, j| (0..self.rank).map(|k| self.u.get(i, k) * self.s[k] * self.v.get(k, j)).sum())
    }

    pub fn compression_fraction(&self) -> f64 {
        self.params_after as f64 / self.params_before as f64
    }
}

/// Retained rank `ceil(keep · min(d1, d2))`.
pub fn retained_rank(keep_fraction: f64, d1: usize, d2: usize) -> usize {
    let r = d1.min(d2);
    (ceil(keep_fraction * r as f64 - 1e-9) as usize).clamp(1, r)
}

fn check_keep(keep_fraction: f64) -> Result<()> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(invalid!("keep fraction must lie in (0, 1], got {keep_fraction}"));
    }
    Ok(())
}

/// Truncated SVD keeping the `ceil(keep · min(d1, d2))` largest singular
/// values.
pub fn factorize_matrix(a: &Matrix, keep_fraction: f64) -> Result<FactorizedMatrix> {
    check_keep(keep_fraction)?;
    let (d1, d2) = (a.rows(), a.cols());
    let n = retained_rank(keep_fraction, d1, d2);
    let full = svd(a)?;
    let u = Matrix::from_fn(d1, n, |i, k| full.u.get(i, k));
    let v = Matrix::from_fn(n, d2, |k, j| full.v.get(k, j));
    Ok(FactorizedMatrix {
        u,
        s: full.s[..n].to_vec(),
        v,
        rank: n,
        params_before: d1 * d2,
        params_after: d1 * n + n + n * d2,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LayerSelection {
    /// Every weight matrix except the first and the last.
    Hidden,
    All,
    Explicit(Vec<usize>),
}

impl LayerSelection {
    pub fn resolve(&self, layers: usize) -> Result<Vec<usize>> {
        let v: Vec<usize> = match self {
            LayerSelection::Hidden => (1..layers.saturating_sub(1)).collect(),
            LayerSelection::All => (0..layers).collect(),
            LayerSelection::Explicit(v) => v.clone(),
        };
        if v.is_empty() {
            return Err(invalid!("layer selection is empty for a network with {layers} weight matrices"));
        }
        if let Some(l) = v.iter().find(|&&l| l >= layers) {
            return Err(invalid!("layer {l} does not exist"));
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorizedModel {
    /// Dense parameters with every selected matrix replaced by its
    /// truncation.
    pub params: Vec<f64>,
    pub ranks: Vec<(usize, usize)>,
    pub params_before: usize,
    pub params_after: usize,
    /// Whole-model parameter count after over before.
    pub compression_fraction: f64,
}

/// Factorizes the selected weight matrices of an MLP parameter vector.
pub fn factorize(
    model: &MlpModel,
    params: &[f64],
    keep_fraction: f64,
    selection: &LayerSelection,
) -> Result<FactorizedModel> {
    check_keep(keep_fraction)?;
    let spec = model.spec();
    if params.len() != spec.param_count() {
        return Err(invalid!("{} parameters for a network with {}", params.len(), spec.param_count()));
    }
    let layers = selection.resolve(spec.num_layers())?;
    let mut out = params.to_vec();
    let mut ranks = Vec::new();
    let mut after = spec.param_count();
    for &l in &layers {
        let f = factorize_matrix(&model.weight_matrix(params, l), keep_fraction)?;
        out[spec.weight_range(l)].copy_from_slice(f.reconstruct().as_slice());
        after = after - f.params_before + f.params_after;
        ranks.push((l, f.rank));
    }
    Ok(FactorizedModel {
        params: out,
        ranks,
        params_before: spec.param_count(),
        params_after: after,
        compression_fraction: after as f64 / spec.param_count() as f64,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalFraction {
    pub keep_fraction: f64,
    pub compression_fraction: f64,
    pub delta_loss: f64,
    /// Grid denominator: the largest `min(d1, d2)` among selected layers.
    pub resolution: usize,
    /// `(keep, compression fraction, ΔLoss)` for every grid point evaluated.
    pub evaluations: Vec<(f64, f64, f64)>,
}

/// Smallest keep fraction on the grid `k/R` whose factorization keeps
/// `ΔLoss ≤ ε`, by bisection plus a final walk down.
pub fn critical_compression_fraction<F: Fn(&[f64]) -> f64>(
    model: &MlpModel,
    params: &[f64],
    epsilon: f64,
    selection: &LayerSelection,
    loss: &F,
) -> Result<CriticalFraction> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(invalid!("epsilon must be finite and non-negative"));
    }
    let spec = model.spec();
    let layers = selection.resolve(spec.num_layers())?;
    let res = layers
        .iter()
        .map(|&l| {
            let (r, c) = spec.weight_shape(l);
            r.min(c)
        })
        .max()
        .unwrap_or(1);
    let baseline = loss(params);
    let mut evals: Vec<(usize, f64, f64)> = Vec::new();
    let at = |k: usize, evals: &mut Vec<(usize, f64, f64)>| -> Result<(f64, f64)> {
        if let Some(e) = evals.iter().find(|e| e.0 == k) {
            return Ok((e.1, e.2));
        }
        let f = factorize(model, params, k as f64 / res as f64, selection)?;
        let d = loss(&f.params) - baseline;
        evals.push((k, f.compression_fraction, d));
        Ok((f.compression_fraction, d))
    };
    let passes = |d: f64| d <= epsilon;

    let mut hi = res;
    if !passes(at(hi, &mut evals)?.1) {
        return Err(Error::UnreachableTolerance(format!(
            "ΔLoss above {epsilon} even at full rank"
        )));
    }
    let mut lo = 0usize;
    if passes(at(1, &mut evals)?.1) {
        hi = 1;
    } else {
        lo = 1;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if passes(at(mid, &mut evals)?.1) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    while hi > 1 && passes(at(hi - 1, &mut evals)?.1) {
        hi -= 1;
    }
    let (frac, delta) = at(hi, &mut evals)?;
    Ok(CriticalFraction {
        keep_fraction: hi as f64 / res as f64,
        compression_fraction: frac,
        delta_loss: delta,
        resolution: res,
        evaluations: evals.iter().map(|&(k, f, d)| (k as f64 / res as f64, f, d)).collect(),
    })
}

// ---------------------------------------------------------------- noise

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoiseMode {
    /// `w + σ z`.
    Absolute,
    /// `w + w σ z`.
    Relative,
}

/// Perturbs `w` with standard normals from stream `(seed, draw)`.
pub fn add_noise(w: &[f64], sigma: f64, mode: NoiseMode, seed: u64, draw: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid!("sigma must be finite and non-negative"));
    }
    let mut rng = rng_stream(seed, stream_id(tag::NOISE, draw));
    let z = rng.normals(w.len());
    Ok(apply_noise(w, &z, sigma, mode))
}

fn apply_noise(w: &[f64], z: &[f64], sigma: f64, mode: NoiseMode) -> Vec<f64> {
    w.iter()
        .zip(z)
        .map(|(&x, &n)| match mode {
            NoiseMode::Absolute => x + sigma * n,
            NoiseMode::Relative => x + x * sigma * n,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SigmaSearchConfig {
    pub lower: f64,
    pub upper: f64,
    pub draws: usize,
    /// Stop once `hi/lo − 1` falls below this.
    pub relative_tolerance: f64,
    pub seed: u64,
}

impl Default for SigmaSearchConfig {
    fn default() -> Self {
        Self {
            lower: 1e-6,
            upper: 10.0,
            draws: 8,
            relative_tolerance: 1e-4,
            seed: 0,
        }
    }
}

/// Mean-ΔLoss curve in σ on common random numbers.
pub struct NoiseCurve<'a, F: Fn(&[f64]) -> f64> {
    params: &'a [f64],
    noises: Vec<Vec<f64>>,
    mode: NoiseMode,
    loss: &'a F,
    baseline: f64,
}

impl<'a, F: Fn(&[f64]) -> f64> NoiseCurve<'a, F> {
    pub fn new(params: &'a [f64], mode: NoiseMode, loss: &'a F, draws: usize, seed: u64) -> Result<Self> {
        if draws == 0 {
            return Err(invalid!("need at least one noise draw"));
        }
        let noises = (0..draws as u64)
            .map(|d| rng_stream(seed, stream_id(tag::NOISE, d)).normals(params.len()))
            .collect();
        Ok(Self {
            params,
            noises,
            mode,
            loss,
            baseline: loss(params),
        })
    }

    /// Mean ΔLoss over the draws at `sigma`.
    pub fn delta(&self, sigma: f64) -> f64 {
        let total: f64 = self
            .noises
            .iter()
            .map(|z| (self.loss)(&apply_noise(self.params, z, sigma, self.mode)))
            .sum();
        total / self.noises.len() as f64 - self.baseline
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalSigma {
    pub sigma: f64,
    pub delta_loss: f64,
}

/// Smallest σ (to the configured tolerance) whose mean ΔLoss reaches ε,
/// by geometric bisection on `[lower, upper]`.
pub fn critical_sigma<F: Fn(&[f64]) -> f64>(
    params: &[f64],
    epsilon: f64,
    mode: NoiseMode,
    loss: &F,
    cfg: &SigmaSearchConfig,
) -> Result<CriticalSigma> {
    if !(cfg.lower > 0.0 && cfg.upper > cfg.lower) {
        return Err(invalid!("sigma bracket must satisfy 0 < lower < upper"));
    }
    let curve = NoiseCurve::new(params, mode, loss, cfg.draws, cfg.seed)?;
    let d_lo = curve.delta(cfg.lower);
    if d_lo >= epsilon {
        return Ok(CriticalSigma {
            sigma: cfg.lower,
            delta_loss: d_lo,
        });
    }
    let d_hi = curve.delta(cfg.upper);
    if !(d_hi >= epsilon) {
        return Err(Error::UnreachableTolerance(format!(
            "mean ΔLoss {d_hi} at σ = {} stays below {epsilon}",
            cfg.upper
        )));
    }
    let (mut lo, mut hi, mut d_at_hi) = (cfg.lower, cfg.upper, d_hi);
    while hi / lo - 1.0 > cfg.relative_tolerance {
        let mid = sqrt(lo * hi);
        let d = curve.delta(mid);
        if d >= epsilon {
            hi = mid;
            d_at_hi = d;
        } else {
            lo = mid;
        }
    }
    Ok(CriticalSigma {
        sigma: hi,
        delta_loss: d_at_hi,
    })
}

// ---------------------------------------------------------------- pruning

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RetrainConfig {
    pub steps: u64,
    /// Learning rate of the original training run; retraining uses a tenth.
    pub base_learning_rate: f64,
    pub batch_size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PruneOutcome {
    /// `(hidden layer index, unit)` pairs, hidden layers counted from 1.
    pub pruned: Vec<(usize, usize)>,
    pub no_op: bool,
    pub final_params: Vec<f64>,
    /// Parameters at the lowest training loss seen.
    pub best_params: Vec<f64>,
    pub baseline_loss: f64,
    pub min_loss: f64,
    pub delta_loss: f64,
    /// `false` for weights tied to pruned units.
    pub mask: Vec<bool>,
}

/// Zeroes the in/out weights of `⌊(1−p) N_h⌋` random hidden units (biases
/// kept), retrains with their gradients masked and reports the best
/// training loss seen against the unpruned baseline.
pub fn prune_and_retrain(
    model: &MlpModel,
    params: &[f64],
    keep_fraction: f64,
    retrain: &RetrainConfig,
    seed: u64,
) -> Result<PruneOutcome> {
    check_keep(keep_fraction)?;
    let spec = model.spec();
    if params.len() != spec.param_count() {
        return Err(invalid!("{} parameters for a network with {}", params.len(), spec.param_count()));
    }
    let n_h = spec.hidden_units();
    if n_h == 0 {
        return Err(invalid!("network has no hidden units to prune"));
    }
    let count = floor((1.0 - keep_fraction) * n_h as f64 + 1e-9) as usize;
    let mut rng = rng_stream(seed, stream_id(tag::PRUNE, 0));
    let chosen = rng.sample_without_replacement(n_h, count);

    let mut units = Vec::new();
    let mut mask = vec![true; params.len()];
    let mut w = params.to_vec();
    for &flat in &chosen {
        let (mut layer, mut u) = (1, flat);
        while u >= spec.layers[layer] {
            u -= spec.layers[layer];
            layer += 1;
        }
        units.push((layer, u));
        // Incoming: row u of matrix layer-1. Outgoing: column u of matrix layer.
        let (_, cols_in) = spec.weight_shape(layer - 1);
        let start = spec.weight_range(layer - 1).start + u * cols_in;
        for i in start..start + cols_in {
            w[i] = 0.0;
            mask[i] = false;
        }
        let (rows_out, cols_out) = spec.weight_shape(layer);
        let base = spec.weight_range(layer).start;
        for r in 0..rows_out {
            let i = base + r * cols_out + u;
            w[i] = 0.0;
            mask[i] = false;
        }
    }
    units.sort_unstable();

    let baseline = model.full_loss(params);
    let mut best_loss = model.full_loss(&w);
    let mut best_params = w.clone();
    let mut train_rng = rng_stream(seed, stream_id(tag::PRUNE, 1));
    model.sgd(
        &mut w,
        retrain.steps,
        retrain.base_learning_rate / 10.0,
        retrain.batch_size,
        &mut train_rng,
        Some(&mask),
        |_, p| {
            let l = model.full_loss(p);
            if l < best_loss {
                best_loss = l;
                best_params.copy_from_slice(p);
            }
            Ok(())
        },
    )?;
    Ok(PruneOutcome {
        no_op: count == 0,
        pruned: units,
        final_params: w,
        best_params,
        baseline_loss: baseline,
        min_loss: best_loss,
        delta_loss: best_loss - baseline,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n_q: u32, m: f64) -> QuantizationSpec {
        QuantizationSpec::new(n_q, m).unwrap()
    }

    #[test]
    fn hand_evaluated_grid() {
        assert_eq!(quantize(&[0.6, -0.26, 1.7], &spec(4, 1.0)).unwrap(), vec![1.0, 0.0, 1.0]);
        let q = quantize(&[0.44], &spec(8, 0.9)).unwrap()[0];
        assert!((q - 0.3).abs() < 1e-15);
    }

    #[test]
    fn invalid_levels() {
        assert!(matches!(QuantizationSpec::new(2, 1.0), Err(Error::InvalidSpec(_))));
        assert!(QuantizationSpec::new(7, 1.0).is_err());
        assert!(QuantizationSpec::new(8, 0.0).is_err());
    }

    #[test]
    fn negative_zero_is_folded() {
        let q = quantize(&[-0.1], &spec(4, 1.0)).unwrap();
        assert!(q[0] == 0.0 && q[0].is_sign_positive());
    }

    #[test]
    fn zero_vector_is_critical_at_four() {
        let loss = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>();
        let c = critical_nq(&[0.0; 5], 0.1, &loss, &CriticalNqConfig::default()).unwrap();
        assert_eq!(c.n_q, 4);
        assert_eq!(c.outcome.delta_loss, 0.0);
    }

    #[test]
    fn representable_optimum_is_found() {
        let loss = |w: &[f64]| (w[0] - 0.5) * (w[0] - 0.5);
        let o = quantize_loss_min_m(&[0.5], 4, &loss, &MSearchConfig::default()).unwrap();
        assert_eq!(o.delta_loss, 0.0);
        assert_eq!(o.m_clamp, 0.5);
    }

    #[test]
    fn unreachable_cap() {
        let loss = |w: &[f64]| if w[0] == 0.123456789 { 0.0 } else { 1.0 };
        let cfg = CriticalNqConfig {
            cap: 64,
            ..CriticalNqConfig::default()
        };
        let e = critical_nq(&[0.123456789, 1.0], 0.5, &loss, &cfg).unwrap_err();
        assert!(matches!(e, Error::UnreachableTolerance(_)));
    }

    #[test]
    fn retained_rank_rounds_up() {
        assert_eq!(retained_rank(1.0, 16, 8), 8);
        assert_eq!(retained_rank(0.5, 16, 16), 8);
        assert_eq!(retained_rank(0.01, 16, 16), 1);
        assert_eq!(retained_rank(3.0 / 16.0, 16, 16), 3);
    }

    #[test]
    fn full_rank_factorization_accounting() {
        let a = Matrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 - 5.0 + 0.1 * (i * j) as f64);
        let f = factorize_matrix(&a, 1.0).unwrap();
        assert_eq!(f.params_after, 4 * 3 + 3 + 3 * 3);
        assert!((f.compression_fraction() - 24.0 / 12.0).abs() < 1e-15);
        assert!(f.reconstruct().sub(&a).unwrap().frobenius_norm() < 1e-10);
        assert!(factorize_matrix(&a, 0.0).is_err());
    }

    #[test]
    fn noise_edge_cases() {
        let w = [0.5, -1.0, 2.0];
        assert_eq!(add_noise(&w, 0.0, NoiseMode::Absolute, 1, 0).unwrap(), w.to_vec());
        assert_eq!(add_noise(&[0.0; 4], 3.0, NoiseMode::Relative, 1, 0).unwrap(), vec![0.0; 4]);
        assert_eq!(
            add_noise(&w, 0.2, NoiseMode::Absolute, 5, 2).unwrap(),
            add_noise(&w, 0.2, NoiseMode::Absolute, 5, 2).unwrap()
        );
    }

    #[test]
    fn sigma_at_lower_bound_for_zero_tolerance() {
        let loss = |w: &[f64]| w[0] * w[0];
        let s = critical_sigma(&[0.0], 0.0, NoiseMode::Absolute, &loss, &SigmaSearchConfig::default()).unwrap();
        assert_eq!(s.sigma, 1e-6);
    }

    #[test]
    fn sigma_unreachable() {
        let loss = |_: &[f64]| 0.0;
        let e = critical_sigma(&[0.0], 0.5, NoiseMode::Absolute, &loss, &SigmaSearchConfig::default()).unwrap_err();
        assert!(matches!(e, Error::UnreachableTolerance(_)));
    }
}
