//! Local learning coefficient estimation with (preconditioned) SGLD.
//!
//! Chains sample the localized tempered posterior
//! `∝ exp(−nβ L(w) − γ/2 ‖w − w*‖²)` started at `w*`; the estimate is
//! `λ̂ = nβ (E[L] − L(w*))` with the expectation replaced by post-burn-in
//! chain averages.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::num::sqrt;
use crate::rng::{rng_stream, stream_id, tag, RngStream};
use crate::zoo::{Bounds, Landscape, MlpModel};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Preconditioner {
    None,
    /// Per-coordinate scale `1/(√v + stabilizer)` with `v` an exponential
    /// moving average of squared drift gradients.
    RmsProp { decay: f64, stabilizer: f64 },
}

impl Preconditioner {
    pub fn rmsprop() -> Self {
        Preconditioner::RmsProp {
            decay: 0.99,
            stabilizer: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LlcConfig {
    /// The product `nβ`.
    pub beta_n: f64,
    pub gamma: f64,
    pub step_size: f64,
    pub chains: usize,
    pub steps_per_chain: usize,
    pub burn_in: usize,
    /// Minibatch size for dataset-backed losses.
    pub batch_size: usize,
    /// Batches averaged for the baseline `L(w*)` of dataset-backed losses.
    pub baseline_batches: usize,
    pub preconditioner: Preconditioner,
}

impl Default for LlcConfig {
    fn default() -> Self {
        Self {
            beta_n: 30.0,
            gamma: 300.0,
            step_size: 1e-4,
            chains: 4,
            steps_per_chain: 2000,
            burn_in: 200,
            batch_size: 64,
            baseline_batches: 16,
            preconditioner: Preconditioner::None,
        }
    }
}

impl LlcConfig {
    /// Sets `steps_per_chain` and the default 10% burn-in.
    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps_per_chain = steps;
        self.burn_in = steps / 10;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_n > 0.0 && self.beta_n.is_finite()) {
            return Err(invalid!("beta_n must be positive"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid!("gamma must be non-negative"));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(invalid!("step_size must be positive"));
        }
        if self.chains == 0 {
            return Err(invalid!("need at least one chain"));
        }
        if self.burn_in >= self.steps_per_chain {
            return Err(invalid!(
                "burn_in {} must be below steps_per_chain {}",
                self.burn_in,
                self.steps_per_chain
            ));
        }
        if self.batch_size == 0 || self.baseline_batches == 0 {
            return Err(invalid!("batch_size and baseline_batches must be positive"));
        }
        if let Preconditioner::RmsProp { decay, stabilizer } = self.preconditioner {
            if !(0.0..1.0).contains(&decay) || !(stabilizer > 0.0) {
                return Err(invalid!("rmsprop needs decay in [0, 1) and a positive stabilizer"));
            }
        }
        Ok(())
    }
}

/// A loss the sampler can query: a full-batch analytic landscape or a
/// minibatched dataset loss.
pub trait LossOracle: Sync {
    fn dim(&self) -> usize;

    /// Box the chains are clamped to, if any.
    fn bounds(&self) -> Option<&Bounds>;

    /// Loss and gradient at `w` for one sampler step; `rng` draws minibatch
    /// indices where needed.
    fn step_loss_grad(&self, w: &[f64], grad: &mut [f64], batch_size: usize, rng: &mut RngStream) -> f64;

    /// `L(w*)`, averaged over `batches` minibatches where applicable.
    fn baseline(&self, w_star: &[f64], batch_size: usize, batches: usize, rng: &mut RngStream) -> f64;
}

impl<L: Landscape + ?Sized> LossOracle for L {
    fn dim(&self) -> usize {
        Landscape::dim(self)
    }

    fn bounds(&self) -> Option<&Bounds> {
        Some(Landscape::bounds(self))
    }

    fn step_loss_grad(&self, w: &[f64], grad: &mut [f64], _batch_size: usize, _rng: &mut RngStream) -> f64 {
        self.loss_grad(w, grad)
    }

    fn baseline(&self, w_star: &[f64], _batch_size: usize, _batches: usize, _rng: &mut RngStream) -> f64 {
        self.loss(w_star)
    }
}

/// An [`MlpModel`]'s training loss, sampled on minibatches drawn with
/// replacement.
pub struct MinibatchLoss<'a> {
    pub model: &'a MlpModel,
    pub bounds: Option<Bounds>,
}

impl<'a> MinibatchLoss<'a> {
    pub fn new(model: &'a MlpModel) -> Self {
        Self { model, bounds: None }
    }

    fn batch(&self, batch_size: usize, rng: &mut RngStream) -> Vec<usize> {
        let n = self.model.data().len();
        if batch_size >= n {
            (0..n).collect()
        } else {
            (0..batch_size).map(|_| rng.below(n)).collect()
        }
    }
}

impl LossOracle for MinibatchLoss<'_> {
    fn dim(&self) -> usize {
        self.model.param_count()
    }

    fn bounds(&self) -> Option<&Bounds> {
        self.bounds.as_ref()
    }

    fn step_loss_grad(&self, w: &[f64], grad: &mut [f64], batch_size: usize, rng: &mut RngStream) -> f64 {
        let batch = self.batch(batch_size, rng);
        self.model.loss_grad_into(w, &batch, grad)
    }

    fn baseline(&self, w_star: &[f64], batch_size: usize, batches: usize, rng: &mut RngStream) -> f64 {
        let mut grad = vec![0.0; w_star.len()];
        let total: f64 = (0..batches)
            .map(|_| {
                let batch = self.batch(batch_size, rng);
                self.model.loss_grad_into(w_star, &batch, &mut grad)
            })
            .sum();
        total / batches as f64
    }
}

/// One SGLD update:
/// `w' = w − (ε/2)(nβ ∇L + γ(w − w*)) + √ε ξ`, clamped to `bounds`.
pub fn sgld_step(
    w: &[f64],
    grad_loss: &[f64],
    w_star: &[f64],
    cfg: &LlcConfig,
    noise: &[f64],
    bounds: Option<&Bounds>,
) -> Result<Vec<f64>> {
    check_dims(w, grad_loss, w_star, noise)?;
    let mut out = w.to_vec();
    sgld_update(&mut out, grad_loss, w_star, cfg, noise);
    finish(&mut out, bounds)?;
    Ok(out)
}

/// Running second-moment state for [`psgld_step`].
#[derive(Clone, Debug, PartialEq)]
pub struct RmsState {
    pub v: Vec<f64>,
}

impl RmsState {
    pub fn new(d: usize) -> Self {
        Self { v: vec![0.0; d] }
    }
}

/// One preconditioned SGLD update. With drift `g = nβ ∇L + γ(w − w*)`,
/// `v ← ρ v + (1−ρ) g²`, `G = 1/(√v + δ)`:
/// `w' = w − (ε/2) G g + √(ε G) ξ`, clamped to `bounds`.
pub fn psgld_step(
    w: &[f64],
    grad_loss: &[f64],
    w_star: &[f64],
    cfg: &LlcConfig,
    noise: &[f64],
    state: &mut RmsState,
    bounds: Option<&Bounds>,
) -> Result<Vec<f64>> {
    check_dims(w, grad_loss, w_star, noise)?;
    if state.v.len() != w.len() {
        return Err(invalid!("accumulator has dimension {}, parameters {}", state.v.len(), w.len()));
    }
    let Preconditioner::RmsProp { decay, stabilizer } = cfg.preconditioner else {
        return Err(invalid!("psgld_step needs an rmsprop preconditioner in the config"));
    };
    let mut out = w.to_vec();
    psgld_update(&mut out, grad_loss, w_star, cfg, noise, &mut state.v, decay, stabilizer);
    finish(&mut out, bounds)?;
    Ok(out)
}

fn check_dims(w: &[f64], g: &[f64], w_star: &[f64], noise: &[f64]) -> Result<()> {
    let d = w.len();
    if g.len() != d || w_star.len() != d || noise.len() != d {
        return Err(invalid!("sampler vectors must all have dimension {d}"));
    }
    Ok(())
}

fn finish(w: &mut [f64], bounds: Option<&Bounds>) -> Result<usize> {
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::ChainDiverged {
            chain: 0,
            step: 0,
            partial_means: Vec::new(),
        });
    }
    Ok(bounds.map_or(0, |b| b.clamp(w)))
}

#[inline]
fn sgld_update(w: &mut [f64], grad: &[f64], w_star: &[f64], cfg: &LlcConfig, noise: &[f64]) {
    let half = 0.5 * cfg.step_size;
    let scale = sqrt(cfg.step_size);
    for i in 0..w.len() {
        let drift = cfg.beta_n * grad[i] + cfg.gamma * (w[i] - w_star[i]);
        w[i] += -half * drift + scale * noise[i];
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn psgld_update(
    w: &mut [f64],
    grad: &[f64],
    w_star: &[f64],
    cfg: &LlcConfig,
    noise: &[f64],
    v: &mut [f64],
    decay: f64,
    stabilizer: f64,
) {
    for i in 0..w.len() {
        let drift = cfg.beta_n * grad[i] + cfg.gamma * (w[i] - w_star[i]);
        v[i] = decay * v[i] + (1.0 - decay) * drift * drift;
        let g = 1.0 / (sqrt(v[i]) + stabilizer);
        w[i] += -0.5 * cfg.step_size * g * drift + sqrt(cfg.step_size * g) * noise[i];
    }
}

/// Output of one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainResult {
    /// `L(w_t)` for `t = 0..steps`, where `w_0 = w*`.
    pub trace: Vec<f64>,
    pub mean_loss: f64,
    /// Mean `‖w_t − w*‖` after burn-in.
    pub mean_distance: f64,
    pub clamp_events: u64,
}

/// Runs chain `chain` on its own random streams.
pub fn run_chain<O: LossOracle + ?Sized>(
    oracle: &O,
    w_star: &[f64],
    cfg: &LlcConfig,
    seed: u64,
    chain: usize,
) -> Result<ChainResult> {
    let d = oracle.dim();
    let mut noise_rng = rng_stream(seed, stream_id(tag::LLC_CHAIN, 2 * chain as u64));
    let mut batch_rng = rng_stream(seed, stream_id(tag::LLC_CHAIN, 2 * chain as u64 + 1));
    let mut w = w_star.to_vec();
    let mut grad = vec![0.0; d];
    let mut noise = vec![0.0; d];
    let mut v = vec![0.0; d];
    let mut trace = Vec::with_capacity(cfg.steps_per_chain);
    let mut dist_sum = 0.0;
    let mut clamp_events = 0u64;
    let bounds = oracle.bounds();

    for step in 0..cfg.steps_per_chain {
        let loss = oracle.step_loss_grad(&w, &mut grad, cfg.batch_size, &mut batch_rng);
        if !loss.is_finite() {
            return Err(diverged(chain, step));
        }
        trace.push(loss);
        if step >= cfg.burn_in {
            dist_sum += sqrt(w.iter().zip(w_star).map(|(a, b)| (a - b) * (a - b)).sum());
        }
        noise_rng.fill_normal(&mut noise);
        match cfg.preconditioner {
            Preconditioner::None => sgld_update(&mut w, &grad, w_star, cfg, &noise),
            Preconditioner::RmsProp { decay, stabilizer } => {
                psgld_update(&mut w, &grad, w_star, cfg, &noise, &mut v, decay, stabilizer)
            }
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(diverged(chain, step));
        }
        if let Some(b) = bounds {
            clamp_events += b.clamp(&mut w) as u64;
        }
    }
    let kept = (cfg.steps_per_chain - cfg.burn_in) as f64;
    let mean_loss = trace[cfg.burn_in..].iter().sum::<f64>() / kept;
    Ok(ChainResult {
        trace,
        mean_loss,
        mean_distance: dist_sum / kept,
        clamp_events,
    })
}

fn diverged(chain: usize, step: usize) -> Error {
    Error::ChainDiverged {
        chain,
        step,
        partial_means: Vec::new(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LlcEstimate {
    pub lambda_hat: f64,
    pub per_chain_means: Vec<f64>,
    pub baseline_loss: f64,
    /// Per-chain loss trajectories.
    pub trace: Vec<Vec<f64>>,
    pub config: LlcConfig,
    pub clamp_events: u64,
    /// Mean post-burn-in `‖w − w*‖` across chains.
    pub mean_distance: f64,
    /// Set when `lambda_hat < 0`; the value is reported as is.
    pub negative: bool,
}

impl LlcEstimate {
    /// Folds chain results in chain order.
    pub fn from_chains(chains: Vec<ChainResult>, baseline_loss: f64, config: LlcConfig) -> Self {
        let per_chain_means: Vec<f64> = chains.iter().map(|c| c.mean_loss).collect();
        let lambda_hat = estimator(&per_chain_means, baseline_loss, config.beta_n);
        let mean_distance = chains.iter().map(|c| c.mean_distance).sum::<f64>() / chains.len() as f64;
        let clamp_events = chains.iter().map(|c| c.clamp_events).sum();
        Self {
            lambda_hat,
            per_chain_means,
            baseline_loss,
            trace: chains.into_iter().map(|c| c.trace).collect(),
            config,
            clamp_events,
            mean_distance,
            negative: lambda_hat < 0.0,
        }
    }

    /// `λ̂` rebuilt from the stored traces and baseline.
    pub fn recompute(&self) -> f64 {
        let b = self.config.burn_in;
        let means: Vec<f64> = self
            .trace
            .iter()
            .map(|t| t[b..].iter().sum::<f64>() / (t.len() - b) as f64)
            .collect();
        estimator(&means, self.baseline_loss, self.config.beta_n)
    }
}

fn estimator(chain_means: &[f64], baseline: f64, beta_n: f64) -> f64 {
    let mean = chain_means.iter().sum::<f64>() / chain_means.len() as f64;
    beta_n * (mean - baseline)
}

/// `L(w*)` on its own stream.
pub fn baseline_loss<O: LossOracle + ?Sized>(oracle: &O, w_star: &[f64], cfg: &LlcConfig, seed: u64) -> f64 {
    let mut rng = rng_stream(seed, stream_id(tag::LLC_BASELINE, 0));
    oracle.baseline(w_star, cfg.batch_size, cfg.baseline_batches, &mut rng)
}

/// Validates inputs shared by every estimation entry point.
pub fn check_inputs<O: LossOracle + ?Sized>(oracle: &O, w_star: &[f64], cfg: &LlcConfig) -> Result<()> {
    cfg.validate()?;
    if w_star.len() != oracle.dim() {
        return Err(invalid!("w* has dimension {}, loss has {}", w_star.len(), oracle.dim()));
    }
    if let Some(b) = oracle.bounds() {
        if !b.contains(w_star) {
            return Err(invalid!("w* lies outside the parameter box"));
        }
    }
    Ok(())
}

/// Estimates `λ̂(w*)`; deterministic in `seed`. Chains run in index order.
pub fn estimate_llc<O: LossOracle + ?Sized>(oracle: &O, w_star: &[f64], cfg: &LlcConfig, seed: u64) -> Result<LlcEstimate> {
    check_inputs(oracle, w_star, cfg)?;
    let baseline = baseline_loss(oracle, w_star, cfg, seed);
    let mut chains: Vec<ChainResult> = Vec::with_capacity(cfg.chains);
    for c in 0..cfg.chains {
        match run_chain(oracle, w_star, cfg, seed, c) {
            Ok(r) => chains.push(r),
            Err(Error::ChainDiverged { chain, step, .. }) => {
                return Err(Error::ChainDiverged {
                    chain,
                    step,
                    partial_means: chains.iter().map(|r| r.mean_loss).collect(),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(LlcEstimate::from_chains(chains, baseline, cfg.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{Flat, Quadratic};

    fn cfg() -> LlcConfig {
        LlcConfig {
            gamma: 0.0,
            step_size: 0.01,
            ..LlcConfig::default()
        }
    }

    #[test]
    fn fixed_point_without_forces() {
        let w = [0.3, -0.2];
        let out = sgld_step(&w, &[0.0, 0.0], &[0.0, 0.0], &cfg(), &[0.0, 0.0], None).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn pure_diffusion() {
        let c = cfg();
        let out = sgld_step(&[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0], &c, &[1.0, 0.0], None).unwrap();
        assert_eq!(out, vec![sqrt(c.step_size), 0.0]);
    }

    #[test]
    fn non_finite_update_is_divergence() {
        let e = sgld_step(&[0.0], &[f64::INFINITY], &[0.0], &cfg(), &[0.0], None).unwrap_err();
        assert!(matches!(e, Error::ChainDiverged { .. }));
    }

    #[test]
    fn psgld_with_unit_preconditioner_matches_sgld_on_zero_gradients() {
        let mut c = cfg();
        c.preconditioner = Preconditioner::RmsProp {
            decay: 0.9,
            stabilizer: 1.0,
        };
        let mut st = RmsState::new(2);
        let a = psgld_step(&[0.1, 0.2], &[0.0, 0.0], &[0.0, 0.0], &c, &[0.5, -1.5], &mut st, None).unwrap();
        let b = sgld_step(&[0.1, 0.2], &[0.0, 0.0], &[0.0, 0.0], &c, &[0.5, -1.5], None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let mut c = LlcConfig::default();
        c.burn_in = c.steps_per_chain;
        assert!(c.validate().is_err());
        assert!(LlcConfig { chains: 0, ..LlcConfig::default() }.validate().is_err());
        assert!(LlcConfig::default().validate().is_ok());
    }

    #[test]
    fn flat_landscape_gives_zero() {
        let f = Flat::new(Bounds::symmetric(2, 1.0).unwrap());
        let est = estimate_llc(&f, &[0.0, 0.0], &LlcConfig::default().with_steps(200), 1).unwrap();
        assert_eq!(est.lambda_hat, 0.0);
    }

    #[test]
    fn identity_and_determinism() {
        let q = Quadratic::new(Bounds::symmetric(2, 1.0).unwrap());
        let c = LlcConfig {
            gamma: 1.0,
            step_size: 1e-3,
            ..LlcConfig::default().with_steps(400)
        };
        let a = estimate_llc(&q, &[0.0, 0.0], &c, 7).unwrap();
        let b = estimate_llc(&q, &[0.0, 0.0], &c, 7).unwrap();
        assert_eq!(a, b);
        assert!((a.recompute() - a.lambda_hat).abs() < 1e-12);
        assert_eq!(a.per_chain_means.len(), c.chains);
    }

    #[test]
    fn w_star_outside_bounds_is_rejected() {
        let q = Quadratic::new(Bounds::symmetric(1, 1.0).unwrap());
        assert!(estimate_llc(&q, &[2.0], &LlcConfig::default(), 0).is_err());
    }
}
