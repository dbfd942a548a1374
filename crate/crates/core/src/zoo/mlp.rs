//! A small tanh multilayer perceptron with exact reverse-mode gradients and
//! a plain SGD trainer that emits checkpoints.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::num::{exp, ln, sqrt, tanh};
use crate::rng::{rng_stream, stream_id, tag, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LossKind {
    /// Mean over samples and outputs of the squared error.
    Mse,
    /// Mean over samples of softmax cross-entropy against one-hot targets.
    CrossEntropy,
}

/// Layer widths `[in, h_1, ..., h_k, out]`; tanh on hidden layers, linear
/// output.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlpSpec {
    pub layers: Vec<usize>,
    pub loss: LossKind,
}

impl MlpSpec {
    pub fn new(layers: Vec<usize>, loss: LossKind) -> Result<Self> {
        if layers.len() < 2 || layers.iter().any(|&w| w == 0) {
            return Err(invalid!("an MLP needs at least two positive layer widths"));
        }
        Ok(Self { layers, loss })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len() - 1
    }

    /// Σ (in·out + out) over layers.
    pub fn param_count(&self) -> usize {
        self.layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn layer_offset(&self, l: usize) -> usize {
        self.layers.windows(2).take(l).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Flat range of layer `l`'s weight matrix (`out × in`, row-major).
    pub fn weight_range(&self, l: usize) -> core::ops::Range<usize> {
        let off = self.layer_offset(l);
        off..off + self.layers[l] * self.layers[l + 1]
    }

    pub fn bias_range(&self, l: usize) -> core::ops::Range<usize> {
        let start = self.weight_range(l).end;
        start..start + self.layers[l + 1]
    }

    /// `(rows, cols)` of layer `l`'s weight matrix.
    pub fn weight_shape(&self, l: usize) -> (usize, usize) {
        (self.layers[l + 1], self.layers[l])
    }

    pub fn hidden_units(&self) -> usize {
        self.layers[1..self.layers.len() - 1].iter().sum()
    }

    /// Stable FNV-1a digest of the architecture.
    pub fn spec_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(self.layers.len() as u64);
        for &w in &self.layers {
            feed(w as u64);
        }
        feed(match self.loss {
            LossKind::Mse => 1,
            LossKind::CrossEntropy => 2,
        });
        h
    }
}

/// Fixed inputs and targets. Cross-entropy targets are one-hot rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub targets: Matrix,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }
}

/// Synthetic teacher-student task: a random teacher MLP labels Gaussian
/// inputs.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TeacherTask {
    pub samples: usize,
    pub teacher_layers: Vec<usize>,
    /// Scale of the teacher's weights relative to `1/sqrt(fan_in)`.
    pub teacher_scale: f64,
    /// Gaussian label noise (MSE) or logit temperature (cross-entropy;
    /// 0 means argmax labels).
    pub noise: f64,
    pub loss: LossKind,
    pub seed: u64,
}

impl TeacherTask {
    pub fn generate(&self) -> Result<Dataset> {
        let spec = MlpSpec::new(self.teacher_layers.clone(), self.loss)?;
        let (d_in, d_out) = (spec.layers[0], *spec.layers.last().unwrap());
        let mut rng = rng_stream(self.seed, stream_id(tag::TEACHER, 0));
        let teacher_params = init_params(&spec, self.teacher_scale, &mut rng);
        let inputs = Matrix::from_fn(self.samples, d_in, |_, _| rng.normal());
        let mut targets = Matrix::zeros(self.samples, d_out);
        let mut scratch = Forward::new(&spec);
        for i in 0..self.samples {
            scratch.run(&spec, &teacher_params, inputs.row(i));
            let out = scratch.output();
            match self.loss {
                LossKind::Mse => {
                    for (o, &v) in out.iter().enumerate() {
                        targets.set(i, o, v + self.noise * rng.normal());
                    }
                }
                LossKind::CrossEntropy => {
                    let label = if self.noise > 0.0 {
                        let logits: Vec<f64> = out.iter().map(|v| v / self.noise).collect();
                        let probs = softmax(&logits);
                        let u = rng.uniform();
                        let mut acc = 0.0;
                        let mut pick = probs.len() - 1;
                        for (c, p) in probs.iter().enumerate() {
                            acc += p;
                            if u < acc {
                                pick = c;
                                break;
                            }
                        }
                        pick
                    } else {
                        argmax(out)
                    };
                    targets.set(i, label, 1.0);
                }
            }
        }
        Ok(Dataset { inputs, targets })
    }
}

#[derive(Clone, Debug)]
pub struct MlpModel {
    spec: MlpSpec,
    data: Dataset,
}

impl MlpModel {
    pub fn new(spec: MlpSpec, data: Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(invalid!("dataset is empty"));
        }
        if data.inputs.cols() != spec.layers[0] || data.targets.cols() != *spec.layers.last().unwrap() {
            return Err(invalid!(
                "dataset shape {}→{} does not match network {}→{}",
                data.inputs.cols(),
                data.targets.cols(),
                spec.layers[0],
                spec.layers.last().unwrap()
            ));
        }
        if data.targets.rows() != data.inputs.rows() {
            return Err(invalid!("inputs and targets have different sample counts"));
        }
        Ok(Self { spec, data })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    /// Seeded initialisation: `N(0, scale²/fan_in)` weights, zero biases.
    pub fn init_params(&self, seed: u64, scale: f64) -> Vec<f64> {
        let mut rng = rng_stream(seed, stream_id(tag::INIT, 0));
        init_params(&self.spec, scale, &mut rng)
    }

    /// Batch loss and its exact gradient.
    pub fn loss_and_grad(&self, params: &[f64], batch: &[usize]) -> Result<(f64, Vec<f64>)> {
        self.check(params, batch)?;
        let mut grad = vec![0.0; params.len()];
        let loss = self.loss_grad_into(params, batch, &mut grad);
        Ok((loss, grad))
    }

    pub fn batch_loss(&self, params: &[f64], batch: &[usize]) -> Result<f64> {
        self.check(params, batch)?;
        let mut scratch = Forward::new(&self.spec);
        let total: f64 = batch.iter().map(|&i| self.sample_loss(&mut scratch, params, i)).sum();
        Ok(total / batch.len() as f64)
    }

    /// Loss over the whole dataset.
    pub fn full_loss(&self, params: &[f64]) -> f64 {
        assert_eq!(params.len(), self.param_count(), "parameter length mismatch");
        let mut scratch = Forward::new(&self.spec);
        let n = self.data.len();
        (0..n).map(|i| self.sample_loss(&mut scratch, params, i)).sum::<f64>() / n as f64
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut scratch = Forward::new(&self.spec);
        scratch.run(&self.spec, params, x);
        scratch.output().to_vec()
    }

    fn check(&self, params: &[f64], batch: &[usize]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(invalid!("{} parameters for a network with {}", params.len(), self.param_count()));
        }
        if batch.is_empty() {
            return Err(invalid!("empty batch"));
        }
        if let Some(&i) = batch.iter().find(|&&i| i >= self.data.len()) {
            return Err(invalid!("batch index {i} outside dataset of {}", self.data.len()));
        }
        Ok(())
    }

    fn sample_loss(&self, scratch: &mut Forward, params: &[f64], i: usize) -> f64 {
        scratch.run(&self.spec, params, self.data.inputs.row(i));
        let y = self.data.targets.row(i);
        match self.spec.loss {
            LossKind::Mse => {
                let out = scratch.output();
                out.iter().zip(y).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() / out.len() as f64
            }
            LossKind::CrossEntropy => {
                let out = scratch.output();
                let lse = log_sum_exp(out);
                out.iter().zip(y).map(|(o, t)| t * (lse - o)).sum()
            }
        }
    }

    /// Unchecked batch loss + gradient; `grad` is overwritten.
    pub fn loss_grad_into(&self, params: &[f64], batch: &[usize], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let spec = &self.spec;
        let layers = spec.num_layers();
        let mut fwd = Forward::new(spec);
        let mut delta: Vec<f64> = Vec::new();
        let mut next: Vec<f64> = Vec::new();
        let mut total = 0.0;
        let inv_b = 1.0 / batch.len() as f64;

        for &i in batch {
            fwd.run(spec, params, self.data.inputs.row(i));
            let y = self.data.targets.row(i);
            let out = fwd.output();
            delta.clear();
            match spec.loss {
                LossKind::Mse => {
                    let k = out.len() as f64;
                    for (o, t) in out.iter().zip(y) {
                        total += (o - t) * (o - t) / k;
                        delta.push(2.0 * (o - t) / k * inv_b);
                    }
                }
                LossKind::CrossEntropy => {
                    let lse = log_sum_exp(out);
                    let ysum: f64 = y.iter().sum();
                    for (o, t) in out.iter().zip(y) {
                        total += t * (lse - o);
                        delta.push((exp(o - lse) * ysum - t) * inv_b);
                    }
                }
            }

            for l in (0..layers).rev() {
                let (rows, cols) = spec.weight_shape(l);
                let a_prev = fwd.activation(l);
                let w_off = spec.weight_range(l).start;
                let b_off = spec.bias_range(l).start;
                for r in 0..rows {
                    let d = delta[r];
                    grad[b_off + r] += d;
                    let g_row = &mut grad[w_off + r * cols..w_off + (r + 1) * cols];
                    for (g, a) in g_row.iter_mut().zip(a_prev) {
                        *g += d * a;
                    }
                }
                if l > 0 {
                    next.clear();
                    next.resize(cols, 0.0);
                    for r in 0..rows {
                        let d = delta[r];
                        let w_row = &params[w_off + r * cols..w_off + (r + 1) * cols];
                        for (n, w) in next.iter_mut().zip(w_row) {
                            *n += w * d;
                        }
                    }
                    for (n, a) in next.iter_mut().zip(a_prev) {
                        *n *= 1.0 - a * a;
                    }
                    core::mem::swap(&mut delta, &mut next);
                }
            }
        }
        total * inv_b
    }

    /// Runs `steps` plain SGD updates in place. Coordinates with
    /// `mask[i] == false` receive no update. `observe` sees the parameters
    /// after each step (1-based step index).
    pub fn sgd(
        &self,
        params: &mut [f64],
        steps: u64,
        learning_rate: f64,
        batch_size: usize,
        rng: &mut RngStream,
        mask: Option<&[bool]>,
        mut observe: impl FnMut(u64, &[f64]) -> Result<()>,
    ) -> Result<()> {
        let n = self.data.len();
        let bs = batch_size.clamp(1, n);
        let mut grad = vec![0.0; params.len()];
        let mut batch = vec![0usize; bs];
        for step in 1..=steps {
            if bs == n {
                batch.iter_mut().enumerate().for_each(|(j, b)| *b = j);
            } else {
                batch.iter_mut().for_each(|b| *b = rng.below(n));
            }
            let loss = self.loss_grad_into(params, &batch, &mut grad);
            if !loss.is_finite() || loss > 1e6 {
                return Err(Error::TrainingDiverged { step, loss });
            }
            match mask {
                Some(m) => {
                    for ((p, g), &keep) in params.iter_mut().zip(&grad).zip(m) {
                        if keep {
                            *p -= learning_rate * g;
                        }
                    }
                }
                None => {
                    for (p, g) in params.iter_mut().zip(&grad) {
                        *p -= learning_rate * g;
                    }
                }
            }
            observe(step, params)?;
        }
        Ok(())
    }

    /// Copies layer `l`'s weight matrix out of a flat parameter vector.
    pub fn weight_matrix(&self, params: &[f64], l: usize) -> Matrix {
        let (r, c) = self.spec.weight_shape(l);
        Matrix::new(r, c, params[self.spec.weight_range(l)].to_vec()).expect("shape from spec")
    }
}

/// Trainer settings. Checkpoint `s` holds the parameters after `s` updates.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub steps: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub init_scale: f64,
    pub checkpoints: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub params: Vec<f64>,
    pub train_loss: f64,
    pub spec_hash: u64,
    pub seed: u64,
}

/// Trains from the seeded initialisation, snapshotting at each scheduled
/// step. Deterministic in `cfg.seed`.
pub fn train_sgd(model: &MlpModel, cfg: &TrainConfig) -> Result<Vec<Checkpoint>> {
    if cfg.steps == 0 {
        return Err(invalid!("training needs at least one step"));
    }
    if let Some(&s) = cfg.checkpoints.iter().find(|&&s| s > cfg.steps) {
        return Err(invalid!("checkpoint step {s} beyond {} training steps", cfg.steps));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(invalid!("learning rate must be positive"));
    }
    let mut schedule = cfg.checkpoints.clone();
    schedule.sort_unstable();
    schedule.dedup();

    let mut params = model.init_params(cfg.seed, cfg.init_scale);
    let snapshot = |step: u64, p: &[f64]| Checkpoint {
        step,
        params: p.to_vec(),
        train_loss: model.full_loss(p),
        spec_hash: model.spec().spec_hash(),
        seed: cfg.seed,
    };
    let mut out = Vec::with_capacity(schedule.len());
    if schedule.is_empty() {
        return Ok(out);
    }
    if schedule[0] == 0 {
        out.push(snapshot(0, &params));
    }
    let last = *schedule.last().unwrap();
    if last == 0 {
        return Ok(out);
    }
    let mut rng = rng_stream(cfg.seed, stream_id(tag::TRAIN, 0));
    let mut next = out.len();
    model.sgd(&mut params, last, cfg.learning_rate, cfg.batch_size, &mut rng, None, |step, p| {
        if next < schedule.len() && schedule[next] == step {
            out.push(snapshot(step, p));
            next += 1;
        }
        Ok(())
    })?;
    Ok(out)
}

fn init_params(spec: &MlpSpec, scale: f64, rng: &mut RngStream) -> Vec<f64> {
    let mut p = vec![0.0; spec.param_count()];
    for l in 0..spec.num_layers() {
        let std = scale / sqrt(spec.layers[l] as f64);
        for x in &mut p[spec.weight_range(l)] {
            *x = std * rng.normal();
        }
    }
    p
}

/// Per-layer activations for one sample. `acts[0]` is the input.
struct Forward {
    acts: Vec<Vec<f64>>,
}

impl Forward {
    fn new(spec: &MlpSpec) -> Self {
        Self {
            acts: spec.layers.iter().map(|&w| vec![0.0; w]).collect(),
        }
    }

    fn run(&mut self, spec: &MlpSpec, params: &[f64], x: &[f64]) {
        self.acts[0].copy_from_slice(x);
        let layers = spec.num_layers();
        for l in 0..layers {
            let (rows, cols) = spec.weight_shape(l);
            let w = &params[spec.weight_range(l)];
            let b = &params[spec.bias_range(l)];
            let (prev, rest) = self.acts.split_at_mut(l + 1);
            let a_prev = &prev[l];
            let out = &mut rest[0];
            for r in 0..rows {
                let z: f64 = b[r] + w[r * cols..(r + 1) * cols].iter().zip(a_prev).map(|(w, a)| w * a).sum::<f64>();
                out[r] = if l + 1 < layers { tanh(z) } else { z };
            }
        }
    }

    fn activation(&self, l: usize) -> &[f64] {
        &self.acts[l]
    }

    fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + ln(z.iter().map(|v| exp(v - m)).sum::<f64>())
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|v| exp(v - lse)).collect()
}

fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in z.iter().enumerate() {
        if *v > z[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(loss: LossKind) -> MlpModel {
        let task = TeacherTask {
            samples: 32,
            teacher_layers: vec![3, 4, 2],
            teacher_scale: 1.5,
            noise: 0.1,
            loss,
            seed: 5,
        };
        let spec = MlpSpec::new(vec![3, 5, 2], loss).unwrap();
        MlpModel::new(spec, task.generate().unwrap()).unwrap()
    }

    #[test]
    fn param_count_matches_layout() {
        let spec = MlpSpec::new(vec![4, 16, 4], LossKind::Mse).unwrap();
        assert_eq!(spec.param_count(), 4 * 16 + 16 + 16 * 4 + 4);
        assert_eq!(spec.bias_range(1).end, spec.param_count());
        assert_eq!(spec.hidden_units(), 16);
    }

    #[test]
    fn zero_network_on_zero_targets_is_exact_minimum() {
        let spec = MlpSpec::new(vec![3, 4, 2], LossKind::Mse).unwrap();
        let data = Dataset {
            inputs: Matrix::from_fn(5, 3, |i, j| (i + j) as f64 * 0.1),
            targets: Matrix::zeros(5, 2),
        };
        let m = MlpModel::new(spec, data).unwrap();
        let (loss, grad) = m.loss_and_grad(&vec![0.0; m.param_count()], &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = toy(LossKind::Mse);
        assert!(m.loss_and_grad(&[0.0; 3], &[0]).is_err());
        assert!(m.loss_and_grad(&vec![0.0; m.param_count()], &[]).is_err());
        assert!(m.loss_and_grad(&vec![0.0; m.param_count()], &[999]).is_err());
    }

    #[test]
    fn cross_entropy_targets_are_one_hot() {
        let m = toy(LossKind::CrossEntropy);
        for i in 0..m.data().len() {
            let row = m.data().targets.row(i);
            assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn empty_schedule_gives_no_checkpoints() {
        let m = toy(LossKind::Mse);
        let cfg = TrainConfig {
            steps: 10,
            learning_rate: 0.05,
            batch_size: 8,
            seed: 1,
            init_scale: 1.0,
            checkpoints: vec![],
        };
        assert!(train_sgd(&m, &cfg).unwrap().is_empty());
    }

    #[test]
    fn step_zero_checkpoint_is_the_initialisation() {
        let m = toy(LossKind::Mse);
        let cfg = TrainConfig {
            steps: 10,
            learning_rate: 0.05,
            batch_size: 8,
            seed: 1,
            init_scale: 1.0,
            checkpoints: vec![0],
        };
        let cps = train_sgd(&m, &cfg).unwrap();
        assert_eq!(cps.len(), 1);
        assert_eq!(cps[0].step, 0);
        assert_eq!(cps[0].params, m.init_params(1, 1.0));
    }

    #[test]
    fn divergence_names_the_step() {
        let m = toy(LossKind::Mse);
        let cfg = TrainConfig {
            steps: 200,
            learning_rate: 1e4,
            batch_size: 8,
            seed: 1,
            init_scale: 1.0,
            checkpoints: vec![200],
        };
        match train_sgd(&m, &cfg) {
            Err(Error::TrainingDiverged { step, .. }) => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
