//! The learner: an ℓ2-regularized softmax classifier.
//!
//! Parameters are a flat vector: `num_classes` weight rows of length `d_in`
//! followed by `num_classes` biases. The ℓ2 penalty covers the full vector,
//! biases included, which makes the objective exactly `reg_coeff`-strongly
//! convex and guarantees every client objective attains its minimum at a
//! finite point — the property the theory diagnostics lean on.

use crate::dataset::{Partition, Sample};
use crate::error::{Error, Result};
use rand::seq::index;
use rand_chacha::ChaCha12Rng;

/// Flat parameter/gradient vector, the universal currency of the simulator.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(dim: usize) -> Self {
        ParamVector {
            values: vec![0.0; dim],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        ParamVector { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sq_dist(&self, other: &ParamVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// self += scale * other
    pub fn add_scaled(&mut self, scale: f64, other: &ParamVector) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        debug_assert_eq!(self.dim(), other.dim());
        ParamVector {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scaled(&self, scale: f64) -> ParamVector {
        ParamVector {
            values: self.values.iter().map(|v| v * scale).collect(),
        }
    }
}

/// Loss definition: softmax cross-entropy over `num_classes` on `d_in`
/// features plus `(reg_coeff / 2) * ||params||²` over the full parameter
/// vector (weights and biases alike), so the objective is exactly
/// `reg_coeff`-strongly convex and every finite-data instance has an
/// attained minimizer. `reg_coeff` doubles as the constant μ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSpec {
    pub num_classes: usize,
    pub d_in: usize,
    pub reg_coeff: f64,
}

impl LossSpec {
    pub fn dim(&self) -> usize {
        self.num_classes * self.d_in + self.num_classes
    }

    /// Index range of the weight block (biases occupy the tail).
    pub fn weight_dims(&self) -> usize {
        self.num_classes * self.d_in
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config("num_classes must be >= 2".into()));
        }
        if self.d_in < 1 {
            return Err(Error::Config("d_in must be >= 1".into()));
        }
        if !self.reg_coeff.is_finite() || self.reg_coeff < 0.0 {
            return Err(Error::Config(format!(
                "reg_coeff must be finite and >= 0, got {}",
                self.reg_coeff
            )));
        }
        Ok(())
    }
}

/// Per-round learning rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LrSchedule {
    Constant(f64),
    /// η_t = 1 / (μ (t + γ)) with γ = 4L/μ: the decay under which the
    /// convergence bound is stated. Non-increasing in t.
    TheoremDecay { mu: f64, l: f64 },
}

impl LrSchedule {
    /// Learning rate for 1-based round `t`.
    pub fn eta(&self, t: usize) -> f64 {
        match *self {
            LrSchedule::Constant(eta) => eta,
            LrSchedule::TheoremDecay { mu, l } => {
                let gamma = 4.0 * l / mu;
                1.0 / (mu * (t as f64 + gamma))
            }
        }
    }

    /// γ offset of the decay schedule (0 for constant rates).
    pub fn gamma(&self) -> f64 {
        match *self {
            LrSchedule::Constant(_) => 0.0,
            LrSchedule::TheoremDecay { mu, l } => 4.0 * l / mu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LrSchedule::Constant(eta) => {
                if !eta.is_finite() || eta <= 0.0 {
                    return Err(Error::Config(format!(
                        "constant learning rate must be > 0, got {eta}"
                    )));
                }
            }
            LrSchedule::TheoremDecay { mu, l } => {
                if !(mu > 0.0) || !mu.is_finite() {
                    return Err(Error::Config(format!("decay schedule needs mu > 0, got {mu}")));
                }
                if !(l > 0.0) || !l.is_finite() {
                    return Err(Error::Config(format!("decay schedule needs L > 0, got {l}")));
                }
            }
        }
        Ok(())
    }
}

/// What a client uploads after its local steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UploadMode {
    /// A fresh mini-batch gradient evaluated at the final local iterate
    /// (the literal protocol reading; default).
    LastBatchGradient,
    /// (w_start − w_final) / η_t, the accumulated local update recast as a
    /// gradient. Provided for comparison.
    PseudoGradient,
}

fn logits(params: &ParamVector, spec: &LossSpec, x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(spec.num_classes);
    for class in 0..spec.num_classes {
        let row = &params.values[class * spec.d_in..(class + 1) * spec.d_in];
        let mut z = params.values[spec.weight_dims() + class];
        for (w, f) in row.iter().zip(x) {
            z += w * f;
        }
        out.push(z);
    }
    out
}

/// log(Σ exp(z_j)) computed stably.
fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Average loss over `samples`: cross-entropy + (reg/2)·||params||².
pub fn loss(params: &ParamVector, samples: &[Sample], spec: &LossSpec) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("loss over an empty sample list".into()));
    }
    check_dims(params, spec)?;
    let mut total = 0.0;
    for s in samples {
        let z = logits(params, spec, &s.features);
        total += log_sum_exp(&z) - z[s.label];
    }
    Ok(total / samples.len() as f64 + 0.5 * spec.reg_coeff * params.norm_sq())
}

/// Analytic gradient of `loss` over `batch`.
pub fn grad_minibatch(params: &ParamVector, batch: &[Sample], spec: &LossSpec) -> Result<ParamVector> {
    if batch.is_empty() {
        return Err(Error::Domain("gradient over an empty batch".into()));
    }
    check_dims(params, spec)?;
    let mut grad = vec![0.0; spec.dim()];
    for s in batch {
        let z = logits(params, spec, &s.features);
        let lse = log_sum_exp(&z);
        for class in 0..spec.num_classes {
            // softmax probability minus the one-hot target
            let coeff = (z[class] - lse).exp() - f64::from(u8::from(class == s.label));
            let row = &mut grad[class * spec.d_in..(class + 1) * spec.d_in];
            for (g, f) in row.iter_mut().zip(&s.features) {
                *g += coeff * f;
            }
            grad[spec.weight_dims() + class] += coeff;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    for g in grad.iter_mut() {
        *g *= inv;
    }
    for (g, w) in grad.iter_mut().zip(&params.values) {
        *g += spec.reg_coeff * w;
    }
    Ok(ParamVector::from_values(grad))
}

/// Exact gradient over a whole partition.
pub fn grad_full(params: &ParamVector, partition: &Partition, spec: &LossSpec) -> Result<ParamVector> {
    if partition.samples.is_empty() {
        return Err(Error::Domain(format!(
            "client {} has an empty partition",
            partition.client_id
        )));
    }
    grad_minibatch(params, &partition.samples, spec)
}

/// Predicted class: argmax logit, ties to the lowest class index.
pub fn predict(params: &ParamVector, spec: &LossSpec, sample: &Sample) -> usize {
    let z = logits(params, spec, &sample.features);
    let mut best = 0;
    for (class, &v) in z.iter().enumerate().skip(1) {
        if v > z[best] {
            best = class;
        }
    }
    best
}

/// Intermediate iterates and per-step gradient norms from one local run;
/// consumed by the theory diagnostics (visited-iterate constants).
#[derive(Clone, Debug)]
pub struct LocalTrace {
    /// w_0 .. w_τ (τ+1 entries).
    pub iterates: Vec<ParamVector>,
    /// Squared norm of each training-step mini-batch gradient (τ entries).
    pub step_grad_sq: Vec<f64>,
    /// Squared norm of the uploaded last-batch gradient, when that mode is on.
    pub upload_grad_sq: Option<f64>,
}

pub(crate) fn sample_batch(
    partition: &Partition,
    batch_size: usize,
    rng: &mut ChaCha12Rng,
) -> Vec<Sample> {
    index::sample(rng, partition.n(), batch_size)
        .iter()
        .map(|i| partition.samples[i].clone())
        .collect()
}

/// `tau` local SGD steps from `start`, then the upload gradient.
///
/// Each step samples a mini-batch uniformly without replacement from the
/// client's own stream and moves against its gradient at the round's
/// learning rate (one rate per round — every local step of round `t` uses
/// η_t). The upload is either a fresh mini-batch gradient at the final
/// iterate or the pseudo-gradient `(start − final) / η_t`.
#[allow(clippy::too_many_arguments)]
pub fn local_sgd(
    start: &ParamVector,
    partition: &Partition,
    spec: &LossSpec,
    tau: usize,
    batch_size: usize,
    schedule: &LrSchedule,
    round_t: usize,
    mode: UploadMode,
    rng: &mut ChaCha12Rng,
) -> Result<(ParamVector, ParamVector)> {
    local_sgd_traced(
        start, partition, spec, tau, batch_size, schedule, round_t, mode, rng,
    )
    .map(|(final_params, upload, _)| (final_params, upload))
}

/// `local_sgd` plus the visited-iterate trace.
#[allow(clippy::too_many_arguments)]
pub fn local_sgd_traced(
    start: &ParamVector,
    partition: &Partition,
    spec: &LossSpec,
    tau: usize,
    batch_size: usize,
    schedule: &LrSchedule,
    round_t: usize,
    mode: UploadMode,
    rng: &mut ChaCha12Rng,
) -> Result<(ParamVector, ParamVector, LocalTrace)> {
    if tau < 1 {
        return Err(Error::Config("tau must be >= 1".into()));
    }
    if batch_size < 1 || batch_size > partition.n() {
        return Err(Error::Config(format!(
            "batch_size {} invalid for client {} with {} samples",
            batch_size,
            partition.client_id,
            partition.n()
        )));
    }
    let eta = schedule.eta(round_t);
    let mut w = start.clone();
    let mut trace = LocalTrace {
        iterates: Vec::with_capacity(tau + 1),
        step_grad_sq: Vec::with_capacity(tau),
        upload_grad_sq: None,
    };
    trace.iterates.push(w.clone());
    for _ in 0..tau {
        let batch = sample_batch(partition, batch_size, rng);
        let g = grad_minibatch(&w, &batch, spec)?;
        trace.step_grad_sq.push(g.norm_sq());
        w.add_scaled(-eta, &g);
        if !w.is_finite() {
            return Err(Error::Domain(format!(
                "client {}: non-finite parameters during local training",
                partition.client_id
            )));
        }
        trace.iterates.push(w.clone());
    }
    let upload = match mode {
        UploadMode::LastBatchGradient => {
            let batch = sample_batch(partition, batch_size, rng);
            let g = grad_minibatch(&w, &batch, spec)?;
            trace.upload_grad_sq = Some(g.norm_sq());
            g
        }
        UploadMode::PseudoGradient => {
            if eta == 0.0 {
                return Err(Error::Domain(
                    "pseudo-gradient upload is undefined at zero learning rate".into(),
                ));
            }
            start.sub(&w).scaled(1.0 / eta)
        }
    };
    Ok((w, upload, trace))
}

fn check_dims(params: &ParamVector, spec: &LossSpec) -> Result<()> {
    if params.dim() != spec.dim() {
        return Err(Error::Domain(format!(
            "parameter dimension {} does not match spec dimension {}",
            params.dim(),
            spec.dim()
        )));
    }
    Ok(())
}
