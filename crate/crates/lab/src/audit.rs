//! Random instances and pass/fail bookkeeping for the lemma audits.

use smdl_core::mdl::{
    kl_raw, validate_kl_l2, validate_kn_fluctuation, validate_triangle, validate_variance_bound,
    validate_volume_inclusions,
};
use smdl_core::rng::{rng_stream, stream_id, tag, RngStream};
use smdl_core::zoo::{Bounds, CategoricalModel, SingularBernoulli};

use crate::config::{AuditConfig, BernoulliConfig};
use crate::error::{Context, Result};

/// Offset that keeps instance streams clear of the validators' own streams.
const INSTANCE_STREAMS: u64 = 1 << 44;

/// Uniform point of the simplex shrunk onto `{p : p_i ≥ m}`.
pub fn restricted_point(rng: &mut RngStream, k: usize, m: f64) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.uniform()).ln()).collect();
    let s: f64 = e.iter().sum();
    let scale = 1.0 - k as f64 * m;
    let mut p: Vec<f64> = e.iter().map(|x| m + scale * x / s).collect();
    // Absorb rounding so the entries sum to one.
    let total: f64 = p.iter().sum();
    let last = p.len() - 1;
    p[last] += 1.0 - total;
    p
}

/// Outcome of one validator over many instances.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditRow {
    pub validator: &'static str,
    pub instances: usize,
    pub violations: usize,
    /// Smallest slack seen; negative on a violation.
    pub worst_margin: f64,
}

impl AuditRow {
    fn new(validator: &'static str) -> Self {
        Self {
            validator,
            instances: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
        }
    }

    fn record(&mut self, holds: bool, margin: f64) {
        self.instances += 1;
        if !holds {
            self.violations += 1;
        }
        self.worst_margin = self.worst_margin.min(margin);
    }
}

fn instance_rng(seed: u64, index: usize) -> RngStream {
    rng_stream(seed, stream_id(tag::LEMMA, INSTANCE_STREAMS + index as u64))
}

pub fn audit_kl_l2(cfg: &AuditConfig, seed: u64) -> Result<AuditRow> {
    let mut row = AuditRow::new("kl_l2_sandwich");
    for i in 0..cfg.instances {
        let mut rng = instance_rng(seed, i);
        let q = restricted_point(&mut rng, cfg.outcomes, cfg.m_simplex);
        let p = restricted_point(&mut rng, cfg.outcomes, cfg.m_simplex);
        let c = validate_kl_l2(&q, &p, cfg.m_simplex).context(|| "kl/l2 sandwich".into())?;
        row.record(c.holds, (c.value - c.lower).min(c.upper - c.value));
    }
    Ok(row)
}

pub fn audit_triangle(cfg: &AuditConfig, seed: u64) -> Result<AuditRow> {
    let mut row = AuditRow::new("pseudo_triangle");
    for i in 0..cfg.instances {
        let mut rng = instance_rng(seed, cfg.instances + i);
        let q = restricted_point(&mut rng, cfg.outcomes, cfg.m_simplex);
        let p = restricted_point(&mut rng, cfg.outcomes, cfg.m_simplex);
        let p2 = restricted_point(&mut rng, cfg.outcomes, cfg.m_simplex);
        let c = validate_triangle(&q, &p, &p2, cfg.m_simplex).context(|| "pseudo-triangle".into())?;
        row.record(c.holds, c.rhs - c.lhs);
    }
    Ok(row)
}

pub fn audit_variance(cfg: &AuditConfig, seed: u64) -> Result<AuditRow> {
    let mut row = AuditRow::new("variance_bound");
    for i in 0..cfg.instances {
        let mut rng = instance_rng(seed, 2 * cfg.instances + i);
        let q = restricted_point(&mut rng, cfg.outcomes, cfg.m_simplex);
        let p = restricted_point(&mut rng, cfg.outcomes, cfg.m_simplex);
        let c = validate_variance_bound(&q, &p).context(|| "variance bound".into())?;
        row.record(c.holds, (c.value - c.lower).min(c.upper - c.value));
    }
    Ok(row)
}

/// Empirical tail frequencies of `n(K_n − KL)` against the Bernstein bound,
/// with three binomial standard errors of slack.
pub fn audit_fluctuation(cfg: &AuditConfig, seed: u64) -> Result<AuditRow> {
    let f = &cfg.fluctuation;
    let mut row = AuditRow::new("kn_fluctuation");
    for i in 0..f.instances {
        let mut rng = instance_rng(seed, 3 * cfg.instances + i);
        let q = restricted_point(&mut rng, cfg.outcomes, cfg.m_simplex);
        let p = restricted_point(&mut rng, cfg.outcomes, cfg.m_simplex);
        let r = validate_kn_fluctuation(&q, &p, f.n, f.trials, seed.wrapping_add(i as u64))
            .context(|| "K_n fluctuation".into())?;
        let t = f.trials as f64;
        let margin = r
            .tail
            .iter()
            .map(|&(_, frac, bound)| bound + 3.0 * (bound.max(1.0 / t) * (1.0 - bound).max(1.0 / t) / t).sqrt() - frac)
            .fold(f64::INFINITY, f64::min);
        row.record(margin >= 0.0, margin);
    }
    Ok(row)
}

pub fn bernoulli_model(c: &BernoulliConfig) -> Result<SingularBernoulli> {
    let bounds = Bounds::new(c.lo.clone(), c.hi.clone()).context(|| "bernoulli model bounds".into())?;
    SingularBernoulli::new(bounds, c.m_simplex).context(|| "bernoulli model".into())
}

/// One `(q, p*, ε)` configuration: `q` is a model distribution, `ε` is
/// log-uniform in `[1e-3, 1e-1]` and `p*` is uniform over the Bernoulli
/// parameters with `KL(q‖p*) ≤ ε` inside the restricted simplex.
pub fn inclusion_instance(model: &SingularBernoulli, seed: u64, index: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let mut rng = rng_stream(seed, stream_id(tag::LEMMA, 2 * INSTANCE_STREAMS + index as u64));
    let mut w = vec![0.0; 2];
    model.bounds().sample(&mut rng, &mut w);
    let mut q = vec![0.0; 2];
    model.distribution(&w, &mut q);
    let eps = 10f64.powf(-3.0 + 2.0 * rng.uniform());
    let m = model.m_simplex();
    let kl_at = |p1: f64| kl_raw(&q, &[1.0 - p1, p1]);
    let edge = |mut inside: f64, mut outside: f64| {
        if kl_at(outside) <= eps {
            return outside;
        }
        for _ in 0..100 {
            let mid = 0.5 * (inside + outside);
            if kl_at(mid) <= eps {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let lo = edge(q[1], m);
    let hi = edge(q[1], 1.0 - m);
    let p1 = lo + (hi - lo) * rng.uniform();
    (q, vec![1.0 - p1, p1], eps)
}

pub fn audit_inclusion(cfg: &AuditConfig, seed: u64) -> Result<AuditRow> {
    let a = &cfg.inclusion;
    let model = bernoulli_model(&a.model)?;
    let mut row = AuditRow::new("volume_inclusion");
    for i in 0..a.instances {
        let (q, p_star, eps) = inclusion_instance(&model, seed, i);
        let c = validate_volume_inclusions(&model, &q, &p_star, eps, a.mc_samples, seed.wrapping_add(i as u64))
            .context(|| format!("volume inclusions, instance {i}"))?;
        let se = |x: usize, y: usize| c.standard_errors[x].hypot(c.standard_errors[y]);
        let margin = (c.volumes[1] + 3.0 * se(0, 1) - c.volumes[0]).min(c.volumes[2] + 3.0 * se(1, 2) - c.volumes[1]);
        row.record(c.holds, margin);
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restricted_points_are_valid() {
        let mut rng = rng_stream(1, 0);
        for k in [2, 3, 5] {
            for _ in 0..200 {
                let p = restricted_point(&mut rng, k, 0.1);
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(p.iter().all(|&x| x >= 0.1 - 1e-12));
            }
        }
    }

    #[test]
    fn inclusion_instances_respect_epsilon() {
        let model = SingularBernoulli::default_model();
        for i in 0..50 {
            let (q, p, eps) = inclusion_instance(&model, 3, i);
            assert!(kl_raw(&q, &p) <= eps);
            assert!(p[1] >= 0.2 && p[1] <= 0.8);
        }
    }
}
