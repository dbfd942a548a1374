use alloc::vec;
use alloc::vec::Vec;

use super::{Bounds, GroundTruth, Landscape, Rational};
use crate::error::{Error, Result};
use crate::mdl::kl_raw;

/// A parametric family `w ↦ p_w` on a finite outcome space whose image lies
/// in the restricted simplex `{p : min_x p(x) >= m_simplex}`.
pub trait CategoricalModel: Sync {
    fn outcomes(&self) -> usize;

    fn bounds(&self) -> &Bounds;

    fn dim(&self) -> usize {
        self.bounds().dim()
    }

    fn m_simplex(&self) -> f64;

    /// Writes `p_w` into `out` (length [`outcomes`](Self::outcomes)).
    fn distribution(&self, w: &[f64], out: &mut [f64]);

    /// Writes `∂p_w(x)/∂w_j` row-major (`outcomes × dim`).
    fn jacobian(&self, w: &[f64], out: &mut [f64]);

    /// Parameter `w†` of the data-generating distribution `q = p_{w†}`.
    fn truth_param(&self) -> &[f64];

    fn truth(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.outcomes()];
        self.distribution(self.truth_param(), &mut q);
        q
    }

    /// Maximum-likelihood distribution in the model image for the given
    /// outcome counts.
    fn mle(&self, counts: &[u64]) -> Vec<f64>;

    /// Learning coefficient of `w ↦ KL(q‖p_w)` at the truth, when known.
    fn ground_truth(&self) -> Option<GroundTruth> {
        None
    }
}

/// Bernoulli model `p_w(1) = 1/2 + w_1 w_2` on a box inside `[-b, b]^2`.
///
/// `KL(q‖p_w)` at `q = uniform` vanishes on both axes, giving a
/// normal-crossing zero set with `(λ, m) = (1/2, 2)`.
#[derive(Clone, Debug)]
pub struct SingularBernoulli {
    bounds: Bounds,
    m_simplex: f64,
    truth: Vec<f64>,
    image: (f64, f64),
}

impl SingularBernoulli {
    pub fn new(bounds: Bounds, m_simplex: f64) -> Result<Self> {
        if bounds.dim() != 2 {
            return Err(Error::InvalidSpec("singular Bernoulli model is two-dimensional".into()));
        }
        if !(m_simplex > 0.0 && m_simplex < 0.5) {
            return Err(Error::InvalidSpec("m_simplex must lie in (0, 1/2)".into()));
        }
        let b = bounds
            .lo()
            .iter()
            .chain(bounds.hi())
            .fold(0.0f64, |acc, x| acc.max(x.abs()));
        if 0.5 - b * b < m_simplex {
            return Err(Error::InvalidSpec(alloc::format!(
                "bounds reach |w| = {b}; need 1/2 - b^2 >= m_simplex = {m_simplex}"
            )));
        }
        let corners = [
            bounds.lo()[0] * bounds.lo()[1],
            bounds.lo()[0] * bounds.hi()[1],
            bounds.hi()[0] * bounds.lo()[1],
            bounds.hi()[0] * bounds.hi()[1],
        ];
        let lo = corners.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0);
        let hi = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
        let truth = vec![0.0, 0.0];
        if !bounds.contains(&truth) {
            return Err(Error::InvalidSpec("bounds must contain the origin".into()));
        }
        Ok(Self {
            bounds,
            m_simplex,
            truth,
            image: (0.5 + lo, 0.5 + hi),
        })
    }

    /// `[-1/2, 1/2]^2` with `m_simplex = 0.2`.
    pub fn default_model() -> Self {
        Self::new(Bounds::symmetric(2, 0.5).expect("static bounds"), 0.2).expect("static spec")
    }

    /// Moves the data-generating parameter to `w†`.
    pub fn with_truth(mut self, truth: Vec<f64>) -> Result<Self> {
        if !self.bounds.contains(&truth) {
            return Err(Error::InvalidSpec("truth parameter outside bounds".into()));
        }
        self.truth = truth;
        Ok(self)
    }

    /// Range of `p_w(1)` over the box.
    pub fn image(&self) -> (f64, f64) {
        self.image
    }

    #[inline]
    pub fn p1(&self, w: &[f64]) -> f64 {
        0.5 + w[0] * w[1]
    }
}

impl CategoricalModel for SingularBernoulli {
    fn outcomes(&self) -> usize {
        2
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn m_simplex(&self) -> f64 {
        self.m_simplex
    }

    fn distribution(&self, w: &[f64], out: &mut [f64]) {
        let p = self.p1(w);
        out[0] = 1.0 - p;
        out[1] = p;
    }

    fn jacobian(&self, w: &[f64], out: &mut [f64]) {
        // rows: outcome 0, outcome 1; cols: w1, w2
        out[0] = -w[1];
        out[1] = -w[0];
        out[2] = w[1];
        out[3] = w[0];
    }

    fn truth_param(&self) -> &[f64] {
        &self.truth
    }

    fn mle(&self, counts: &[u64]) -> Vec<f64> {
        let n = counts[0] + counts[1];
        let freq = if n == 0 { 0.5 } else { counts[1] as f64 / n as f64 };
        let p = freq.clamp(self.image.0, self.image.1);
        vec![1.0 - p, p]
    }

    fn ground_truth(&self) -> Option<GroundTruth> {
        if self.truth.iter().all(|&x| x == 0.0) {
            Some(GroundTruth {
                lambda: Rational::new(1, 2),
                multiplicity: 2,
            })
        } else {
            None
        }
    }
}

/// `K(w) = KL(q‖p_w)` as a landscape over the model's parameter box.
pub struct KlLandscape<'a, M: CategoricalModel> {
    model: &'a M,
    q: Vec<f64>,
    reference: Vec<f64>,
}

impl<'a, M: CategoricalModel> KlLandscape<'a, M> {
    /// Divergence from the model's own data-generating distribution.
    pub fn new(model: &'a M) -> Self {
        Self {
            q: model.truth(),
            reference: model.truth_param().to_vec(),
            model,
        }
    }

    /// Divergence from `p_{w_ref}`.
    pub fn around(model: &'a M, w_ref: &[f64]) -> Self {
        let mut q = vec![0.0; model.outcomes()];
        model.distribution(w_ref, &mut q);
        Self {
            q,
            reference: w_ref.to_vec(),
            model,
        }
    }
}

impl<M: CategoricalModel> Landscape for KlLandscape<'_, M> {
    fn bounds(&self) -> &Bounds {
        self.model.bounds()
    }

    fn loss(&self, w: &[f64]) -> f64 {
        let mut p = vec![0.0; self.model.outcomes()];
        self.model.distribution(w, &mut p);
        kl_raw(&self.q, &p)
    }

    fn loss_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let k = self.model.outcomes();
        let d = self.model.dim();
        let mut p = vec![0.0; k];
        let mut jac = vec![0.0; k * d];
        self.model.distribution(w, &mut p);
        self.model.jacobian(w, &mut jac);
        for (j, g) in grad.iter_mut().enumerate() {
            *g = -(0..k).map(|x| self.q[x] / p[x] * jac[x * d + j]).sum::<f64>();
        }
        kl_raw(&self.q, &p)
    }

    fn reference_point(&self) -> &[f64] {
        &self.reference
    }

    fn ground_truth(&self) -> Option<GroundTruth> {
        if self.reference.as_slice() == self.model.truth_param() {
            self.model.ground_truth()
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_on_and_off_the_axes() {
        let m = SingularBernoulli::default_model();
        let k = KlLandscape::new(&m);
        let mut p = [0.0; 2];
        m.distribution(&[0.0, 0.3], &mut p);
        assert_eq!(p[1], 0.5);
        assert_eq!(k.loss(&[0.0, 0.3]), 0.0);

        m.distribution(&[0.2, 0.2], &mut p);
        assert!((p[1] - 0.54).abs() < 1e-15);
        let expected = 0.5 * libm::log(0.5 / 0.54) + 0.5 * libm::log(0.5 / 0.46);
        assert!((k.loss(&[0.2, 0.2]) - expected).abs() < 1e-15);
        assert!((expected - 3.210_284e-3).abs() < 1e-9);
    }

    #[test]
    fn rejects_bounds_that_leave_the_restricted_simplex() {
        let b = Bounds::symmetric(2, 0.6).unwrap();
        assert!(matches!(SingularBernoulli::new(b, 0.2), Err(Error::InvalidSpec(_))));
        let b = Bounds::symmetric(2, 0.5).unwrap();
        assert!(SingularBernoulli::new(b, 0.26).is_err());
    }

    #[test]
    fn mle_is_clamped_into_the_image() {
        let m = SingularBernoulli::default_model();
        assert_eq!(m.image(), (0.25, 0.75));
        assert_eq!(m.mle(&[0, 10])[1], 0.75);
        assert_eq!(m.mle(&[10, 0])[1], 0.25);
        assert_eq!(m.mle(&[6, 4])[1], 0.4);
    }

    #[test]
    fn ground_truth_only_at_uniform() {
        let m = SingularBernoulli::default_model();
        let gt = m.ground_truth().unwrap();
        assert_eq!((gt.lambda, gt.multiplicity), (Rational::new(1, 2), 2));
        let shifted = SingularBernoulli::default_model().with_truth(vec![0.1, 0.2]).unwrap();
        assert!(shifted.ground_truth().is_none());
    }
}
