//! The training engine: adaptive-moment gradient steps on the task loss
//! interleaved with closed-form group proximal maps.
//!
//! Each iteration takes a gradient step on the smooth task loss and then
//! applies, per node group, either the group-Lasso shrinkage (unimportant
//! nodes) or the anchored drift shrinkage (important nodes). Both maps have
//! closed forms that hit their targets *exactly*: a group whose norm falls
//! under the threshold becomes the all-zero vector bitwise, and a group whose
//! drift falls under its threshold becomes its anchor bitwise. No cleanup
//! thresholds exist anywhere downstream.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::eval::mean_loss;
use crate::importance::{apply_mask, mask_grads, UnimportantSet, ZeroMask};
use crate::layout::{group_l2_norm, GroupLayout};
use crate::nn::{task_loss_and_grad, GradientSet, NetworkParams};
use crate::rng::Rng;
use crate::tasks::TaskData;
use crate::Result;

/// Learning-rate plateau policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauCfg {
    /// Consecutive non-improving epochs before a decay.
    pub patience: u32,
    /// Division factor applied on decay.
    pub factor: f64,
    /// Hard floor for the learning rate.
    pub lr_min: f64,
}

impl Default for PlateauCfg {
    fn default() -> Self {
        PlateauCfg { patience: 5, factor: 3.0, lr_min: 1e-5 }
    }
}

/// All hyperparameters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Group-Lasso weight on unimportant nodes.
    pub mu: f64,
    /// Drift-penalty weight on important nodes.
    pub lambda: f64,
    /// Probability of re-randomizing an unimportant node after a task.
    pub rho: f64,
    /// Importance decay factor.
    pub eta: f64,
    /// Base learning rate.
    pub alpha: f64,
    /// Epochs per task.
    pub epochs: usize,
    pub batch_size: usize,
    pub plateau: PlateauCfg,
    /// Apply the proximal map after every minibatch instead of once per epoch.
    pub prox_per_minibatch: bool,
    /// Use the decayed learning rate in the proximal threshold (the default)
    /// rather than the initial one.
    pub prox_tracks_decayed_lr: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            mu: 10.0,
            lambda: 400.0,
            rho: 0.3,
            eta: 0.9,
            alpha: 1e-3,
            epochs: 20,
            batch_size: 256,
            plateau: PlateauCfg::default(),
            prox_per_minibatch: false,
            prox_tracks_decayed_lr: true,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.mu < 0.0 || self.lambda < 0.0 {
            return Err(Error::Config("mu and lambda must be >= 0".into()));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Config(format!("rho must be in (0, 1], got {}", self.rho)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Config(format!("eta must be in (0, 1], got {}", self.eta)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config("alpha must be > 0".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be >= 1".into()));
        }
        if !(self.plateau.factor > 1.0) || !(self.plateau.lr_min > 0.0) {
            return Err(Error::Config("plateau factor must be > 1 and lr_min > 0".into()));
        }
        Ok(())
    }
}

/// Adaptive-moment (Adam) state, reset at every task boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m_hidden: Vec<Vec<f64>>,
    pub v_hidden: Vec<Vec<f64>>,
    pub m_heads: Vec<Vec<f64>>,
    pub v_heads: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &NetworkParams) -> Self {
        let zeros = |ts: &[Vec<f64>]| -> Vec<Vec<f64>> {
            ts.iter().map(|t| vec![0.0; t.len()]).collect()
        };
        let head_ws: Vec<Vec<f64>> = params.heads.iter().map(|h| h.w.clone()).collect();
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m_hidden: zeros(&params.hidden),
            v_hidden: zeros(&params.hidden),
            m_heads: zeros(&head_ws),
            v_heads: zeros(&head_ws),
        }
    }
}

struct AdamStep {
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
    lr: f64,
}

fn adam_update(theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], s: &AdamStep) {
    for i in 0..theta.len() {
        let gi = g[i];
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * gi;
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * gi * gi;
        let m_hat = m[i] / s.bc1;
        let v_hat = v[i] / s.bc2;
        theta[i] -= s.lr * m_hat / (libm::sqrt(v_hat) + s.eps);
    }
}

/// One adaptive-moment step on the task loss.
///
/// Masked coordinates have their gradient zeroed before touching the moment
/// accumulators, so they receive no update and stay at exact zero. Only the
/// active task's head is visited; the others are untouched bitwise.
pub fn gradient_step(
    params: &mut NetworkParams,
    grads: &mut GradientSet,
    adam: &mut AdamState,
    lr: f64,
    task_id: usize,
    layout: &GroupLayout,
    mask: &ZeroMask,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::Numeric("non-finite gradient; step aborted".into()));
    }
    mask_grads(grads, layout, mask);
    adam.step += 1;
    let step = AdamStep {
        beta1: adam.beta1,
        beta2: adam.beta2,
        eps: adam.eps,
        bc1: 1.0 - libm::pow(adam.beta1, adam.step as f64),
        bc2: 1.0 - libm::pow(adam.beta2, adam.step as f64),
        lr,
    };
    for l in 0..params.hidden.len() {
        adam_update(
            &mut params.hidden[l],
            &grads.hidden[l],
            &mut adam.m_hidden[l],
            &mut adam.v_hidden[l],
            &step,
        );
    }
    adam_update(
        &mut params.heads[task_id].w,
        &grads.heads[task_id],
        &mut adam.m_heads[task_id],
        &mut adam.v_heads[task_id],
        &step,
    );
    Ok(())
}

/// Group-Lasso proximal map: `(1 - threshold/|v|)+ . v`.
///
/// Returns the exact zero vector when `|v| <= threshold`.
pub fn prox_group_lasso(v: &mut [f64], threshold: f64) {
    debug_assert!(threshold >= 0.0);
    let norm = group_l2_norm(v);
    if norm <= threshold {
        v.fill(0.0);
    } else if threshold > 0.0 {
        let scale = 1.0 - threshold / norm;
        for x in v.iter_mut() {
            *x *= scale;
        }
    }
}

/// Anchored drift proximal map: `gamma . v + (1 - gamma) . anchor` with
/// `gamma = (1 - threshold/|v - anchor|)+`.
///
/// Returns the anchor bitwise when `|v - anchor| <= threshold`.
pub fn prox_group_freeze(v: &mut [f64], anchor: &[f64], threshold: f64) {
    debug_assert_eq!(v.len(), anchor.len());
    debug_assert!(threshold >= 0.0);
    let mut s = 0.0;
    for (x, a) in v.iter().zip(anchor) {
        let d = x - a;
        s += d * d;
    }
    let norm = libm::sqrt(s);
    if norm <= threshold {
        v.copy_from_slice(anchor);
    } else if threshold > 0.0 {
        let gamma = 1.0 - threshold / norm;
        for (x, a) in v.iter_mut().zip(anchor) {
            *x = gamma * *x + (1.0 - gamma) * a;
        }
    }
}

/// Apply the node-wise proximal map to every hidden group.
///
/// Unimportant nodes get the group-Lasso map with threshold `lr * mu`;
/// important nodes get the anchored map with threshold
/// `lr * lambda * omega_n`. Heads are never touched. Group independence makes
/// the sweep order irrelevant to the result.
#[allow(clippy::too_many_arguments)]
pub fn prox_sweep(
    params: &mut NetworkParams,
    layout: &GroupLayout,
    omega: &[f64],
    g0: &UnimportantSet,
    prev: &NetworkParams,
    mu: f64,
    lambda: f64,
    lr: f64,
) {
    for node in layout.nodes() {
        let (l, n) = (node.layer as usize, node.node as usize);
        let flat = layout.flat_index(node);
        if g0.contains_flat(flat) {
            prox_group_lasso(params.group_mut(l, n), lr * mu);
        } else {
            let anchor = prev.group(l, n);
            prox_group_freeze(params.group_mut(l, n), anchor, lr * lambda * omega[flat]);
        }
    }
}

/// Validation-plateau learning-rate scheduler: decay by `factor` after
/// `patience` consecutive epochs without improvement, floored at `lr_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    cfg: PlateauCfg,
    lr: f64,
    best: f64,
    stale: u32,
}

impl PlateauScheduler {
    pub fn new(initial_lr: f64, cfg: PlateauCfg) -> Self {
        PlateauScheduler { cfg, lr: initial_lr, best: f64::INFINITY, stale: 0 }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Feed one epoch's validation loss; returns the (possibly decayed) rate.
    pub fn step(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best {
            self.best = val_loss;
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.cfg.patience {
                self.lr = (self.lr / self.cfg.factor).max(self.cfg.lr_min);
                self.stale = 0;
            }
        }
        self.lr
    }

    /// Raw state for checkpointing.
    pub fn state(&self) -> (f64, f64, u32) {
        (self.lr, self.best, self.stale)
    }

    pub fn from_state(cfg: PlateauCfg, lr: f64, best: f64, stale: u32) -> Self {
        PlateauScheduler { cfg, lr, best, stale }
    }
}

/// How a task is optimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainMode {
    /// Gradient steps on the task loss plus the proximal sweep (the method).
    Pgd,
    /// Plain adaptive-moment training, no penalties (baseline).
    Finetune,
    /// Both penalties folded into the gradient as almost-everywhere
    /// derivatives, no proximal map (ablation).
    NoPgd,
}

/// Per-task training context shared by every step.
pub struct TaskContext<'a> {
    pub layout: &'a GroupLayout,
    /// Importance values from the end of the previous task.
    pub omega: &'a [f64],
    /// Unimportant set from the end of the previous task (exact for PGD,
    /// thresholded for the no-PGD ablation).
    pub g0: &'a UnimportantSet,
    /// Parameters the task started from; the freeze anchor.
    pub prev: &'a NetworkParams,
    pub mask: &'a ZeroMask,
}

/// Subgradients of both penalties, added to the task gradient (no-PGD mode).
fn add_penalty_subgradients(
    grads: &mut GradientSet,
    params: &NetworkParams,
    ctx: &TaskContext<'_>,
    mu: f64,
    lambda: f64,
) {
    for node in ctx.layout.nodes() {
        let (l, n) = (node.layer as usize, node.node as usize);
        let flat = ctx.layout.flat_index(node);
        let row_len = ctx.layout.group_len(l);
        let g = &mut grads.hidden[l][n * row_len..(n + 1) * row_len];
        let v = params.group(l, n);
        if ctx.g0.contains_flat(flat) {
            let norm = group_l2_norm(v);
            if norm > 0.0 {
                for (gi, &vi) in g.iter_mut().zip(v) {
                    *gi += mu * vi / norm;
                }
            }
        } else {
            let anchor = ctx.prev.group(l, n);
            let mut s = 0.0;
            for (x, a) in v.iter().zip(anchor) {
                let d = x - a;
                s += d * d;
            }
            let norm = libm::sqrt(s);
            if norm > 0.0 {
                let c = lambda * ctx.omega[flat];
                for ((gi, &vi), &ai) in g.iter_mut().zip(v).zip(anchor) {
                    *gi += c * (vi - ai) / norm;
                }
            }
        }
    }
}

/// Summary of one task's optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    pub epochs: usize,
    pub final_lr: f64,
    pub final_val_loss: f64,
}

/// Train one task for `hp.epochs` epochs.
///
/// Each epoch runs adaptive-moment minibatch steps over a seeded shuffle of
/// the train set, then (Pgd mode) one proximal sweep using the scheduler's
/// current rate as threshold scale, then a validation pass that feeds the
/// plateau scheduler. Bitwise deterministic for fixed `(seed, task_index)`.
#[allow(clippy::too_many_arguments)]
pub fn train_task(
    params: &mut NetworkParams,
    data: &TaskData,
    task_id: usize,
    ctx: &TaskContext<'_>,
    hp: &Hyperparams,
    mode: TrainMode,
    adam: &mut AdamState,
    sched: &mut PlateauScheduler,
    seed: u64,
    task_index: u64,
) -> Result<TrainStats> {
    hp.validate()?;
    if data.train.is_empty() {
        return Err(Error::Data(format!("task {task_id} has no training data")));
    }
    let n = data.train.len();
    let mut xb: Vec<f64> = Vec::new();
    let mut yb: Vec<usize> = Vec::new();
    let mut val_loss = f64::INFINITY;
    for epoch in 0..hp.epochs {
        let lr = sched.lr();
        let prox_lr = if hp.prox_tracks_decayed_lr { lr } else { hp.alpha };
        let mut order =
            Rng::substream(seed, "batch", &[task_index, epoch as u64]).permutation(n);
        let mut start = 0usize;
        while start < n {
            let end = (start + hp.batch_size).min(n);
            order[start..end].sort_unstable();
            data.train.gather(&order[start..end], &mut xb, &mut yb);
            let (_, mut grads) = task_loss_and_grad(params, &xb, &yb, task_id)?;
            if mode == TrainMode::NoPgd {
                add_penalty_subgradients(&mut grads, params, ctx, hp.mu, hp.lambda);
            }
            gradient_step(params, &mut grads, adam, lr, task_id, ctx.layout, ctx.mask)?;
            apply_mask(params, ctx.mask);
            if mode == TrainMode::Pgd && hp.prox_per_minibatch {
                prox_sweep(params, ctx.layout, ctx.omega, ctx.g0, ctx.prev, hp.mu, hp.lambda, prox_lr);
                apply_mask(params, ctx.mask);
            }
            start = end;
        }
        if mode == TrainMode::Pgd && !hp.prox_per_minibatch {
            prox_sweep(params, ctx.layout, ctx.omega, ctx.g0, ctx.prev, hp.mu, hp.lambda, prox_lr);
            apply_mask(params, ctx.mask);
        }
        let val_set = if data.val.is_empty() { &data.train } else { &data.val };
        val_loss = mean_loss(params, val_set, task_id, hp.batch_size)?;
        if !val_loss.is_finite() {
            return Err(Error::Numeric(format!("validation loss diverged at epoch {epoch}")));
        }
        sched.step(val_loss);
    }
    Ok(TrainStats { epochs: hp.epochs, final_lr: sched.lr(), final_val_loss: val_loss })
}
