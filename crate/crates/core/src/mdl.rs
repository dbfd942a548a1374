//! Two-part codes on finite outcome spaces.
//!
//! KL divergences are in nats throughout; convert with [`nats_to_bits`] at
//! the reporting boundary.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::num::{exp, hypot, ln, sqrt};
use crate::rng::{rng_stream, stream_id, tag, RngStream};
use crate::zoo::CategoricalModel;

const SUM_TOL: f64 = 1e-12;

pub fn nats_to_bits(x: f64) -> f64 {
    x / core::f64::consts::LN_2
}

/// `Σ q log(q/p)` with the convention `0 log 0 = 0`. No validation.
#[inline]
pub fn kl_raw(q: &[f64], p: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in q.iter().zip(p) {
        if a > 0.0 {
            acc += a * ln(a / b);
        }
    }
    acc
}

/// A distribution on a finite outcome space with every entry at least
/// `m_simplex`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimplexDist {
    probs: Vec<f64>,
    m_simplex: f64,
}

impl SimplexDist {
    pub fn new(probs: Vec<f64>, m_simplex: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid!("empty distribution"));
        }
        if !(0.0..=1.0 / probs.len() as f64).contains(&m_simplex) {
            return Err(invalid!("lower bound {m_simplex} impossible on {} outcomes", probs.len()));
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !p.is_finite()) || (sum - 1.0).abs() > SUM_TOL {
            return Err(invalid!("probabilities must be finite and sum to 1 (sum {sum})"));
        }
        if let Some(p) = probs.iter().find(|&&p| p < m_simplex) {
            return Err(invalid!("entry {p} below the simplex bound {m_simplex}"));
        }
        Ok(Self { probs, m_simplex })
    }

    /// Bernoulli distribution `(1 - p1, p1)`.
    pub fn bernoulli(p1: f64, m_simplex: f64) -> Result<Self> {
        Self::new(vec![1.0 - p1, p1], m_simplex)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn m_simplex(&self) -> f64 {
        self.m_simplex
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// `KL(q‖p)` in nats.
pub fn kl(q: &SimplexDist, p: &SimplexDist) -> Result<f64> {
    if q.len() != p.len() {
        return Err(invalid!("outcome spaces differ: {} vs {}", q.len(), p.len()));
    }
    Ok(kl_raw(&q.probs, &p.probs).max(0.0))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn neg_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| x * ln(x)).sum()
}

/// Flattened distributions `p_w` for a batch of parameters, with cached
/// `Σ p log p`, so that `KL(p_w‖c) = negent - Σ p log c` is a dot product.
struct Pushforward {
    k: usize,
    probs: Vec<f64>,
    negent: Vec<f64>,
}

impl Pushforward {
    fn new(k: usize) -> Self {
        Self {
            k,
            probs: Vec::new(),
            negent: Vec::new(),
        }
    }

    fn push<M: CategoricalModel + ?Sized>(&mut self, model: &M, w: &[f64], buf: &mut [f64]) {
        model.distribution(w, buf);
        self.negent.push(neg_entropy(buf));
        self.probs.extend_from_slice(buf);
    }

    fn len(&self) -> usize {
        self.negent.len()
    }

    fn dist(&self, i: usize) -> &[f64] {
        &self.probs[i * self.k..(i + 1) * self.k]
    }

    /// `KL(p_i‖c)` given `log c`.
    #[inline]
    fn kl_to(&self, i: usize, log_c: &[f64]) -> f64 {
        let p = self.dist(i);
        self.negent[i] - p.iter().zip(log_c).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Settings for [`build_eps_net`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetConfig {
    /// Grid points per axis in the pushforward pool (box corners included).
    pub grid_per_axis: usize,
    /// Extra uniform parameter draws added to the pool.
    pub pool_samples: usize,
    /// Uniform draws over `W` used for every center's `V^R`.
    pub mc_samples: usize,
    pub audit_samples: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            grid_per_axis: 257,
            pool_samples: 1 << 16,
            mc_samples: 1_000_000,
            audit_samples: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpsilonNet {
    pub epsilon: f64,
    pub centers: Vec<Vec<f64>>,
    /// A parameter mapping to each center.
    pub center_params: Vec<Vec<f64>>,
    pub vr_volumes: Vec<f64>,
    pub vr_standard_errors: Vec<f64>,
    /// `log(Vol(W) / V^R)` in nats.
    pub code_lengths: Vec<f64>,
    pub total_volume: f64,
    /// Largest audited `min_c KL(p_w‖c)`.
    pub audit_max_gap: f64,
}

impl EpsilonNet {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// `Σ V^R / Vol(W)`; exceeds 1 by the overlap of the ε-balls.
    pub fn kraft_mass(&self) -> f64 {
        self.vr_volumes.iter().sum::<f64>() / self.total_volume
    }

    /// Center minimising `KL(p‖c)`; ties go to the lowest index.
    pub fn nearest_center(&self, p: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (j, c) in self.centers.iter().enumerate() {
            let d = kl_raw(p, c);
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    }
}

/// Greedy farthest-point ε-net of the model image in `KL(p‖center)`,
/// audited on fresh uniform draws, with Monte-Carlo `V^R` per center on
/// common random numbers.
pub fn build_eps_net<M: CategoricalModel>(model: &M, epsilon: f64, cfg: &NetConfig, seed: u64) -> Result<EpsilonNet> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid!("epsilon must be positive, got {epsilon}"));
    }
    if cfg.grid_per_axis < 2 || cfg.mc_samples == 0 {
        return Err(invalid!("net needs at least 2 grid points per axis and one volume sample"));
    }
    let k = model.outcomes();
    let d = model.dim();
    let bounds = model.bounds();
    let mut buf = vec![0.0; k];
    let mut w = vec![0.0; d];

    let mut pool = Pushforward::new(k);
    let mut pool_w: Vec<f64> = Vec::new();
    let g = cfg.grid_per_axis;
    let grid_points = (g as u64).checked_pow(d as u32).filter(|&n| n <= 1 << 24);
    let grid_points = grid_points.ok_or_else(|| invalid!("grid of {g}^{d} points is too large"))?;
    for idx in 0..grid_points {
        let mut r = idx;
        for j in 0..d {
            let t = (r % g as u64) as f64 / (g - 1) as f64;
            r /= g as u64;
            w[j] = bounds.lo()[j] + t * (bounds.hi()[j] - bounds.lo()[j]);
        }
        pool.push(model, &w, &mut buf);
        pool_w.extend_from_slice(&w);
    }
    let mut rng = rng_stream(seed, stream_id(tag::NET, 0));
    for _ in 0..cfg.pool_samples {
        bounds.sample(&mut rng, &mut w);
        pool.push(model, &w, &mut buf);
        pool_w.extend_from_slice(&w);
    }

    let mut gap = vec![f64::INFINITY; pool.len()];
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let mut center_params: Vec<Vec<f64>> = Vec::new();
    let mut next = 0usize;
    loop {
        let c = pool.dist(next).to_vec();
        let log_c: Vec<f64> = c.iter().map(|&x| ln(x)).collect();
        center_params.push(pool_w[next * d..(next + 1) * d].to_vec());
        centers.push(c);
        let mut far = (0usize, f64::NEG_INFINITY);
        for (i, gi) in gap.iter_mut().enumerate() {
            let v = pool.kl_to(i, &log_c);
            if v < *gi {
                *gi = v;
            }
            if *gi > far.1 {
                far = (i, *gi);
            }
        }
        if far.1 <= epsilon {
            break;
        }
        next = far.0;
    }

    let log_centers: Vec<Vec<f64>> = centers.iter().map(|c| c.iter().map(|&x| ln(x)).collect()).collect();

    let mut audit = Pushforward::new(k);
    let mut audit_rng = rng_stream(seed, stream_id(tag::AUDIT, 0));
    let mut audit_max_gap: f64 = 0.0;
    for i in 0..cfg.audit_samples {
        bounds.sample(&mut audit_rng, &mut w);
        audit.push(model, &w, &mut buf);
        let best = log_centers
            .iter()
            .map(|lc| audit.kl_to(i, lc))
            .fold(f64::INFINITY, f64::min);
        if best > epsilon {
            return Err(Error::CoveringFailure {
                witness: w.clone(),
                gap: best,
                epsilon,
            });
        }
        audit_max_gap = audit_max_gap.max(best);
    }

    let total_volume = bounds.volume();
    let mut vol_rng = rng_stream(seed, stream_id(tag::NET, 1));
    let mut hits = vec![0u64; centers.len()];
    let mut sample = Pushforward::new(k);
    for _ in 0..cfg.mc_samples {
        bounds.sample(&mut vol_rng, &mut w);
        sample.probs.clear();
        sample.negent.clear();
        sample.push(model, &w, &mut buf);
        for (h, lc) in hits.iter_mut().zip(&log_centers) {
            if sample.kl_to(0, lc) <= epsilon {
                *h += 1;
            }
        }
    }
    let n = cfg.mc_samples as f64;
    let mut vr_volumes = Vec::with_capacity(hits.len());
    let mut vr_standard_errors = Vec::with_capacity(hits.len());
    let mut code_lengths = Vec::with_capacity(hits.len());
    for (j, &h) in hits.iter().enumerate() {
        if h == 0 {
            return Err(Error::InsufficientData(format!(
                "center {j} received no volume samples at epsilon {epsilon}; raise mc_samples"
            )));
        }
        let frac = h as f64 / n;
        vr_volumes.push(total_volume * frac);
        vr_standard_errors.push(total_volume * sqrt(frac * (1.0 - frac) / n));
        code_lengths.push(-ln(frac));
    }

    Ok(EpsilonNet {
        epsilon,
        centers,
        center_params,
        vr_volumes,
        vr_standard_errors,
        code_lengths,
        total_volume,
        audit_max_gap,
    })
}

/// One draw of the two-part code at `ε = a/n`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RedundancyRun {
    pub n: u64,
    pub a: f64,
    pub seed: u64,
    pub counts: Vec<u64>,
    pub center: usize,
    /// Nats.
    pub code_length: f64,
    /// `n·K_n(p*_n)` in nats.
    pub excess_data: f64,
    /// Nats.
    pub redundancy: f64,
}

/// Draws `n` symbols from the model's truth, picks the net center nearest
/// the MLE and assembles `R_n = log(Vol(W)/V^R) + n K_n(p*)`.
///
/// `net` must have been built at `ε = a/n`.
pub fn two_part_redundancy<M: CategoricalModel>(
    model: &M,
    net: &EpsilonNet,
    n: u64,
    a: f64,
    seed: u64,
) -> Result<RedundancyRun> {
    if n == 0 || !(a > 0.0) {
        return Err(invalid!("need n >= 1 and a > 0"));
    }
    let eps = a / n as f64;
    if (net.epsilon - eps).abs() > 1e-12 * eps {
        return Err(invalid!("net built at epsilon {} but a/n = {eps}", net.epsilon));
    }
    let q = model.truth();
    let mut rng = rng_stream(seed, stream_id(tag::REDUNDANCY, n));
    let counts = rng.multinomial(n, &q);
    redundancy_from_counts(model, net, &q, counts, a, seed)
}

/// Bookkeeping half of [`two_part_redundancy`] for given counts.
pub fn redundancy_from_counts<M: CategoricalModel>(
    model: &M,
    net: &EpsilonNet,
    q: &[f64],
    counts: Vec<u64>,
    a: f64,
    seed: u64,
) -> Result<RedundancyRun> {
    if counts.len() != q.len() || q.len() != model.outcomes() {
        return Err(invalid!("counts, truth and model disagree on the outcome count"));
    }
    let n: u64 = counts.iter().sum();
    let p_hat = model.mle(&counts);
    let (center, _) = net.nearest_center(&p_hat);
    let p_star = &net.centers[center];
    let excess_data: f64 = counts
        .iter()
        .zip(q.iter().zip(p_star))
        .filter(|(&c, _)| c > 0)
        .map(|(&c, (&qx, &px))| c as f64 * ln(qx / px))
        .sum();
    let code_length = net.code_lengths[center];
    Ok(RedundancyRun {
        n,
        a,
        seed,
        counts,
        center,
        code_length,
        excess_data,
        redundancy: code_length + excess_data,
    })
}

fn require_restricted(x: &[f64], m: f64, name: &str) -> Result<()> {
    SimplexDist::new(x.to_vec(), m).map(|_| ()).map_err(|e| match e {
        Error::InvalidInput(msg) => invalid!("{name}: {msg}"),
        other => other,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichCheck {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub holds: bool,
}

// Absolute slack for round-off in the audited inequalities.
const AUDIT_SLACK: f64 = 1e-14;

/// `½‖p−q‖² ≤ KL(q‖p) ≤ ‖p−q‖²/(2m)`.
pub fn validate_kl_l2(q: &[f64], p: &[f64], m_simplex: f64) -> Result<SandwichCheck> {
    require_restricted(q, m_simplex, "q")?;
    require_restricted(p, m_simplex, "p")?;
    if q.len() != p.len() {
        return Err(invalid!("outcome spaces differ"));
    }
    let d2 = sq_dist(p, q);
    let value = kl_raw(q, p);
    let lower = 0.5 * d2;
    let upper = d2 / (2.0 * m_simplex);
    Ok(SandwichCheck {
        lower,
        value,
        upper,
        holds: lower <= value + AUDIT_SLACK && value <= upper + AUDIT_SLACK,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangleCheck {
    /// `KL(p‖p')`.
    pub lhs: f64,
    /// `(KL(q‖p) + KL(q‖p')) / (2m)`.
    pub rhs: f64,
    pub holds: bool,
}

pub fn validate_triangle(q: &[f64], p: &[f64], p2: &[f64], m_simplex: f64) -> Result<TriangleCheck> {
    require_restricted(q, m_simplex, "q")?;
    require_restricted(p, m_simplex, "p")?;
    require_restricted(p2, m_simplex, "p'")?;
    if q.len() != p.len() || q.len() != p2.len() {
        return Err(invalid!("outcome spaces differ"));
    }
    let lhs = kl_raw(p, p2);
    let rhs = (kl_raw(q, p) + kl_raw(q, p2)) / (2.0 * m_simplex);
    Ok(TriangleCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + AUDIT_SLACK,
    })
}

/// `(c − KL)·KL ≤ Var_q[log q/p] ≤ (c' − KL)·KL` with
/// `c = 2/max(1, e^{−inf ℓ})`, `c' = 2/min(1, e^{−sup ℓ})`.
pub fn validate_variance_bound(q: &[f64], p: &[f64]) -> Result<SandwichCheck> {
    if q.len() != p.len() || q.is_empty() {
        return Err(invalid!("outcome spaces differ"));
    }
    if q.iter().chain(p).any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(invalid!("log ratio must be finite: all probabilities positive"));
    }
    let ell: Vec<f64> = q.iter().zip(p).map(|(a, b)| ln(a / b)).collect();
    let sup = ell.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let inf = ell.iter().cloned().fold(f64::INFINITY, f64::min);
    let k = kl_raw(q, p);
    let second: f64 = q.iter().zip(&ell).map(|(a, l)| a * l * l).sum();
    let value = second - k * k;
    let c = 2.0 / exp(-inf).max(1.0);
    let c_up = 2.0 / exp(-sup).min(1.0);
    let lower = (c - k) * k;
    let upper = (c_up - k) * k;
    Ok(SandwichCheck {
        lower,
        value,
        upper,
        holds: lower <= value + AUDIT_SLACK && value <= upper + AUDIT_SLACK,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluctuationReport {
    pub n: u64,
    pub kl: f64,
    /// `n·(K_n − KL)` per trial.
    pub scaled: Vec<f64>,
    pub mean: f64,
    pub standard_error: f64,
    pub p99_abs: f64,
    /// Bernstein variance proxy `n·Var_q[log q/p]`.
    pub bernstein_c: f64,
    /// `max_x |log q/p − KL|`.
    pub bernstein_m: f64,
    /// `(t, P̂(|n(K_n − KL)| ≥ t), 2·exp(−(t²/2)/(C + Mt/3)))`.
    pub tail: Vec<(f64, f64, f64)>,
}

/// Empirical distribution of `n·(K_n − KL(q‖p))` over independent data sets.
pub fn validate_kn_fluctuation(q: &[f64], p: &[f64], n: u64, trials: usize, seed: u64) -> Result<FluctuationReport> {
    if q.len() != p.len() || n == 0 || trials == 0 {
        return Err(invalid!("need matching outcome spaces, n >= 1 and trials >= 1"));
    }
    if q.iter().chain(p).any(|&x| !(x > 0.0)) {
        return Err(invalid!("probabilities must be positive"));
    }
    let k = kl_raw(q, p);
    let ell: Vec<f64> = q.iter().zip(p).map(|(a, b)| ln(a / b)).collect();
    let mut rng: RngStream = rng_stream(seed, stream_id(tag::LEMMA, n));
    let scaled: Vec<f64> = (0..trials)
        .map(|_| {
            let counts = rng.multinomial(n, q);
            let sum: f64 = counts.iter().zip(&ell).map(|(&c, l)| c as f64 * l).sum();
            sum - n as f64 * k
        })
        .collect();
    let t = trials as f64;
    let mean = scaled.iter().sum::<f64>() / t;
    let var = if trials > 1 {
        scaled.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (t - 1.0)
    } else {
        0.0
    };
    let mut abs: Vec<f64> = scaled.iter().map(|x| x.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let p99_abs = quantile_sorted(&abs, 0.99);

    let var_ell: f64 = q.iter().zip(&ell).map(|(a, l)| a * (l - k) * (l - k)).sum();
    let bernstein_c = n as f64 * var_ell;
    let bernstein_m = ell.iter().map(|l| (l - k).abs()).fold(0.0, f64::max);
    let tail = [0.5, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&s| {
            let th = s * sqrt(bernstein_c.max(f64::MIN_POSITIVE));
            let frac = abs.iter().filter(|&&x| x >= th).count() as f64 / t;
            let bound = (2.0 * exp(-0.5 * th * th / (bernstein_c + bernstein_m * th / 3.0))).min(1.0);
            (th, frac, bound)
        })
        .collect();
    Ok(FluctuationReport {
        n,
        kl: k,
        scaled,
        mean,
        standard_error: sqrt(var / t),
        p99_abs,
        bernstein_c,
        bernstein_m,
        tail,
    })
}

/// Linear-interpolated quantile of ascending data.
pub(crate) fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = prob.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq)]
pub struct InclusionCheck {
    pub c: f64,
    pub epsilon: f64,
    /// `V_q(ε)`, `V^R_{p*}(Cε)`, `V_q(C(C+1)ε/2)`.
    pub volumes: [f64; 3],
    pub standard_errors: [f64; 3],
    pub holds: bool,
}

/// Monte-Carlo check of `V_q(ε) ≤ V^R_{p*}(Cε) ≤ V_q(C(C+1)ε/2)` with
/// `C = 1/m`, on common random numbers. Each inequality may fail by up to
/// three combined standard errors.
pub fn validate_volume_inclusions<M: CategoricalModel>(
    model: &M,
    q: &[f64],
    p_star: &[f64],
    epsilon: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<InclusionCheck> {
    let m = model.m_simplex();
    require_restricted(q, m, "q")?;
    require_restricted(p_star, m, "p*")?;
    if !(epsilon > 0.0) || mc_samples == 0 {
        return Err(invalid!("need epsilon > 0 and at least one sample"));
    }
    if kl_raw(q, p_star) > epsilon {
        return Err(invalid!("KL(q‖p*) = {} exceeds epsilon {epsilon}", kl_raw(q, p_star)));
    }
    let c = 1.0 / m;
    let outer = 0.5 * c * (c + 1.0) * epsilon;
    let bounds = model.bounds();
    let mut rng = rng_stream(seed, stream_id(tag::LEMMA, 1 << 40));
    let mut w = vec![0.0; model.dim()];
    let mut p = vec![0.0; model.outcomes()];
    let mut hits = [0u64; 3];
    for _ in 0..mc_samples {
        bounds.sample(&mut rng, &mut w);
        model.distribution(&w, &mut p);
        let fwd = kl_raw(q, &p);
        if fwd <= epsilon {
            hits[0] += 1;
        }
        if kl_raw(&p, p_star) <= c * epsilon {
            hits[1] += 1;
        }
        if fwd <= outer {
            hits[2] += 1;
        }
    }
    let vol = bounds.volume();
    let n = mc_samples as f64;
    let volumes = hits.map(|h| vol * h as f64 / n);
    let standard_errors = hits.map(|h| {
        let f = h as f64 / n;
        vol * sqrt(f * (1.0 - f) / n)
    });
    let combined = |i: usize, j: usize| hypot(standard_errors[i], standard_errors[j]);
    let holds =
        volumes[0] <= volumes[1] + 3.0 * combined(0, 1) && volumes[1] <= volumes[2] + 3.0 * combined(1, 2);
    Ok(InclusionCheck {
        c,
        epsilon,
        volumes,
        standard_errors,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::SingularBernoulli;

    #[test]
    fn kl_identity_and_asymmetry() {
        let q = SimplexDist::new(vec![0.2, 0.3, 0.5], 0.1).unwrap();
        let p = SimplexDist::new(vec![0.6, 0.2, 0.2], 0.1).unwrap();
        assert_eq!(kl(&q, &q).unwrap(), 0.0);
        let a = kl(&q, &p).unwrap();
        let b = kl(&p, &q).unwrap();
        assert!(a > 0.0 && b > 0.0 && (a - b).abs() > 1e-3);
    }

    #[test]
    fn kl_rejects_mismatched_spaces() {
        let q = SimplexDist::bernoulli(0.5, 0.2).unwrap();
        let p = SimplexDist::new(vec![0.3, 0.3, 0.4], 0.2).unwrap();
        assert!(matches!(kl(&q, &p), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn simplex_bound_enforced() {
        assert!(SimplexDist::bernoulli(0.1, 0.2).is_err());
        assert!(SimplexDist::new(vec![0.5, 0.6], 0.2).is_err());
    }

    #[test]
    fn bernoulli_reference_value() {
        let v = kl_raw(&[0.5, 0.5], &[0.46, 0.54]);
        let direct = 0.5 * libm::log(0.5 / 0.54) + 0.5 * libm::log(0.5 / 0.46);
        assert!((v - direct).abs() < 1e-16);
    }

    #[test]
    fn coincident_checks_are_zero() {
        let q = [0.3, 0.3, 0.4];
        let s = validate_kl_l2(&q, &q, 0.2).unwrap();
        assert_eq!((s.lower, s.value, s.upper, s.holds), (0.0, 0.0, 0.0, true));
        let t = validate_triangle(&q, &q, &q, 0.2).unwrap();
        assert_eq!((t.lhs, t.rhs), (0.0, 0.0));
        let v = validate_variance_bound(&q, &q).unwrap();
        assert_eq!((v.lower, v.value, v.upper), (0.0, 0.0, 0.0));
    }

    #[test]
    fn validators_reject_points_outside_the_restricted_simplex() {
        assert!(validate_kl_l2(&[0.1, 0.9], &[0.5, 0.5], 0.2).is_err());
        assert!(validate_triangle(&[0.5, 0.5], &[0.5, 0.5], &[0.95, 0.05], 0.2).is_err());
    }

    #[test]
    fn coarse_net_is_a_single_center() {
        let m = SingularBernoulli::default_model();
        let cfg = NetConfig {
            grid_per_axis: 9,
            pool_samples: 0,
            mc_samples: 1000,
            audit_samples: 1000,
        };
        let net = build_eps_net(&m, 10.0, &cfg, 1).unwrap();
        assert_eq!(net.len(), 1);
        assert_eq!(net.vr_volumes[0], 1.0);
        assert_eq!(net.code_lengths[0], 0.0);
    }

    #[test]
    fn redundancy_is_code_plus_excess() {
        let m = SingularBernoulli::default_model();
        let cfg = NetConfig {
            grid_per_axis: 33,
            pool_samples: 256,
            mc_samples: 20_000,
            audit_samples: 1000,
        };
        let n = 256;
        let net = build_eps_net(&m, 1.0 / n as f64, &cfg, 3).unwrap();
        let run = two_part_redundancy(&m, &net, n, 1.0, 9).unwrap();
        assert_eq!(run.redundancy, run.code_length + run.excess_data);
        assert_eq!(run.counts.iter().sum::<u64>(), n);
        assert!(two_part_redundancy(&m, &net, n, 2.0, 9).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.99) - 3.96).abs() < 1e-12);
    }
}
