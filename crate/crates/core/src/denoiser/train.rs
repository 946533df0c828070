use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Denoiser;
use crate::diffusion::{loss_and_grad, noisy_sample, DiffusionContext, Example, LossConfig, ModelInput};
use crate::error::{domain, Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Stochastic gradient with heavy-ball momentum.
    #[default]
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine decay from `lr` to 0 over the run.
    Cosine,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Noise draws per example per epoch.
    pub draws: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub optimizer: OptimizerKind,
    pub schedule: LrSchedule,
    /// Global gradient-norm clip; 0 disables.
    pub clip: f64,
    /// Hold types fixed and drop the type loss.
    pub csp: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            draws: 8,
            batch_size: 8,
            lr: 1e-3,
            momentum: 0.9,
            optimizer: OptimizerKind::Sgd,
            schedule: LrSchedule::Constant,
            clip: 1.0,
            csp: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 || self.batch_size == 0 {
            return Err(Error::Config("train.draws and train.batch_size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("train.lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("train.momentum must be in [0, 1), got {}", self.momentum)));
        }
        if !(self.clip >= 0.0) {
            return Err(Error::Config("train.clip must be non-negative".into()));
        }
        Ok(())
    }
}

pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    momentum: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    steps: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, momentum: f64, model: &Denoiser) -> Self {
        let v = if kind == OptimizerKind::Adam { model.zero_grad() } else { Vec::new() };
        Self { kind, lr, momentum, m: model.zero_grad(), v, steps: 0 }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step(&mut self, model: &mut Denoiser, grad: &[Vec<f64>]) {
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for ((t, m), g) in model.tensors.iter_mut().zip(&mut self.m).zip(grad) {
                    for ((w, mi), gi) in t.data.iter_mut().zip(m).zip(g) {
                        *mi = self.momentum * *mi + gi;
                        *w -= self.lr * *mi;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (0.9, 0.999, 1e-8);
                let c1 = 1.0 - f64::powi(b1, self.steps);
                let c2 = 1.0 - f64::powi(b2, self.steps);
                for (((t, m), v), g) in model.tensors.iter_mut().zip(&mut self.m).zip(&mut self.v).zip(grad) {
                    for (((w, mi), vi), gi) in t.data.iter_mut().zip(m).zip(v).zip(g) {
                        *mi = b1 * *mi + (1.0 - b1) * gi;
                        *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                        *w -= self.lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}

/// Trains in place and returns the mean total loss of every epoch.
///
/// Noise is drawn sequentially from `rng`; the per-draw forward/backward
/// passes run in parallel and are summed in a fixed order, so the result
/// depends only on the seed.
pub fn train(
    model: &mut Denoiser,
    data: &[Example],
    ctx: &DiffusionContext,
    loss_cfg: &LossConfig,
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if data.is_empty() {
        return domain("empty training set");
    }
    if let Some(ex) = data.iter().find(|ex| ex.state.types.iter().any(|r| r.len() != model.config.types)) {
        return domain(format!("training example of group {} has the wrong type width", ex.layout.group));
    }
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, cfg.momentum, model);
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.len()).flat_map(|i| std::iter::repeat_n(i, cfg.draws)).collect();
    for epoch in 0..cfg.epochs {
        if cfg.schedule == LrSchedule::Cosine {
            let frac = epoch as f64 / cfg.epochs as f64;
            opt.set_lr(cfg.lr * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos()));
        }
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let draws: Vec<_> = batch
                .iter()
                .map(|&i| {
                    let t = rng.random_range(1..=ctx.steps());
                    (i, noisy_sample(&data[i], ctx, t, cfg.csp, rng))
                })
                .collect();
            let net: &Denoiser = model;
            let results: Vec<(f64, Vec<Vec<f64>>)> = draws
                .par_iter()
                .map(|(i, (state, targets))| {
                    let layout = &data[*i].layout;
                    let (raw, cache) = net.forward(&ModelInput::new(state, layout, ctx))?;
                    let (parts, g) = loss_and_grad(&raw, targets, layout, loss_cfg, !cfg.csp);
                    Ok((parts.total, net.backward(&cache, &g)))
                })
                .collect::<Result<_>>()?;
            let scale = 1.0 / results.len() as f64;
            let mut grad = model.zero_grad();
            for (l, g) in &results {
                epoch_loss += l;
                for (acc, gi) in grad.iter_mut().zip(g) {
                    for (a, x) in acc.iter_mut().zip(gi) {
                        *a += x * scale;
                    }
                }
            }
            if cfg.clip > 0.0 {
                let norm = grad.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
                if norm > cfg.clip {
                    let f = cfg.clip / norm;
                    grad.iter_mut().flatten().for_each(|x| *x *= f);
                }
            }
            opt.step(model, &grad);
        }
        trace.push(epoch_loss / order.len() as f64);
    }
    Ok(trace)
}

/// Trailing moving average with the given window.
pub fn smoothed(trace: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..trace.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            trace[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}
