//! Experiment orchestration: the per-task outer loop over a task stream,
//! the fine-tuning baseline, the no-proximal-update ablation, checkpointing
//! at every task boundary, and result emission.
//!
//! A run is a pure function of `(config, seed)`: every random draw comes from
//! named substreams of the seed, and resuming from any boundary checkpoint
//! reproduces the uninterrupted run bit for bit.

use std::path::{Path, PathBuf};
use std::time::Instant;

use agscl_core::eval::accuracy;
use agscl_core::importance::{
    rand_init, zero_init, OmegaRegistry, UnimportantSet, ZeroMask,
};
use agscl_core::layout::{GroupLayout, NodeId};
use agscl_core::metrics::{
    aopc_curve, drop_area, frozen_groups, frozen_groups_thresholded, reg_param_count,
    AccuracyMatrix, PruneOrder,
};
use agscl_core::nn::{mean_node_activations, NetSpec, NetworkParams};
use agscl_core::optim::{
    train_task, AdamState, PlateauScheduler, TaskContext, TrainMode,
};
use agscl_core::rng::Rng;
use agscl_core::tasks::TaskStream;
use agscl_core::Error as CoreError;

use crate::checkpoint::CheckpointState;
use crate::config::{ExperimentConfig, Method};
use crate::error::AppResult;
use crate::report::{emit_results, AopcSummary, CapacityRow, RunReport};

/// Live state of one seeded run.
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub config_json: String,
    pub seed: u64,
    pub stream: TaskStream,
    pub spec: NetSpec,
    pub layout: GroupLayout,
    pub params: NetworkParams,
    /// Snapshot the current task started from (the freeze anchor).
    pub prev: NetworkParams,
    pub omega: OmegaRegistry,
    pub mask: ZeroMask,
    pub matrix: AccuracyMatrix,
    pub capacity: Vec<CapacityRow>,
    pub wallclock: Vec<f64>,
    pub tasks_done: usize,
    last_adam: Option<AdamState>,
    last_sched: (f64, f64, u32),
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig, seed: u64) -> AppResult<Self> {
        cfg.validate()?;
        let config_json =
            serde_json::to_string(&cfg).expect("config serialization cannot fail");
        let stream = cfg.build_stream(seed)?;
        let spec = cfg.build_net_spec(&stream)?;
        let layout = GroupLayout::build(&spec);
        let params = NetworkParams::init(&spec, &mut Rng::substream(seed, "init", &[]));
        let prev = params.clone();
        let omega = OmegaRegistry::new(layout.total_nodes(), cfg.hp.eta)?;
        Ok(Experiment {
            cfg,
            config_json,
            seed,
            stream,
            spec,
            layout,
            params,
            prev,
            omega,
            mask: ZeroMask::new(),
            matrix: AccuracyMatrix::new(),
            capacity: Vec::new(),
            wallclock: Vec::new(),
            tasks_done: 0,
            last_adam: None,
            last_sched: (0.0, f64::INFINITY, 0),
        })
    }

    pub fn is_done(&self) -> bool {
        self.tasks_done >= self.stream.len()
    }

    fn mode(&self) -> TrainMode {
        match self.cfg.method {
            Method::Finetune => TrainMode::Finetune,
            Method::Agscl if self.cfg.ablation.no_pgd => TrainMode::NoPgd,
            Method::Agscl => TrainMode::Pgd,
        }
    }

    fn derive_g0(&self) -> UnimportantSet {
        if self.cfg.ablation.no_pgd {
            self.omega.derive_g0_thresholded(self.cfg.tau())
        } else {
            self.omega.derive_g0()
        }
    }

    /// Train the next task and do all post-task bookkeeping.
    pub fn step_task(&mut self) -> AppResult<()> {
        if self.is_done() {
            return Err(CoreError::Usage("all tasks already trained".into()).into());
        }
        let started = Instant::now();
        let t = self.tasks_done;
        let mode = self.mode();
        let hp = self.cfg.hyperparams();
        let g0 = self.derive_g0();
        let mut adam = AdamState::new(&self.params);
        let mut sched = PlateauScheduler::new(hp.alpha, hp.plateau);
        {
            let ctx = TaskContext {
                layout: &self.layout,
                omega: self.omega.values(),
                g0: &g0,
                prev: &self.prev,
                mask: &self.mask,
            };
            train_task(
                &mut self.params,
                &self.stream.tasks[t],
                t,
                &ctx,
                &hp,
                mode,
                &mut adam,
                &mut sched,
                self.seed,
                t as u64,
            )?;
        }

        if mode != TrainMode::Finetune {
            // Importance update from mean train-set activations.
            let means = mean_node_activations(
                &self.params,
                &self.stream.tasks[t].train.x,
                t,
                hp.batch_size,
            )?;
            // Capacity is measured against the snapshot this task started
            // from, before the re-initialization steps disturb anything.
            let frozen = if t == 0 {
                0
            } else if self.cfg.ablation.no_pgd {
                frozen_groups_thresholded(&self.params, &self.prev, &self.layout, self.cfg.tau())
            } else {
                frozen_groups(&self.params, &self.prev, &self.layout)
            };
            self.omega.update(&means)?;
            let g0_post = self.derive_g0();
            let (reg_nodes, reg_scalars) = reg_param_count(&self.layout);
            let total = self.layout.total_nodes();
            self.capacity.push(CapacityRow {
                task: t + 1,
                sparsity: g0_post.len() as f64 / total as f64,
                used_capacity: frozen as f64 / total as f64,
                g0_size: g0_post.len(),
                frozen_nodes: frozen,
                reg_nodes,
                reg_scalars,
            });
            // Re-initializations, zero first, random second.
            if !self.cfg.ablation.no_zero_init {
                zero_init(&mut self.params, &self.layout, &g0_post, &mut self.mask, (t + 1) as u32);
            }
            if !self.cfg.ablation.no_rand_init {
                rand_init(
                    &mut self.params,
                    &self.layout,
                    &g0_post,
                    &mut self.mask,
                    hp.rho,
                    &mut Rng::substream(self.seed, "randinit", &[t as u64]),
                )?;
            }
        }

        // Accuracy row over every task seen so far, measured on the exact
        // parameter state the next task will start from.
        for j in 0..=t {
            let acc = accuracy(&self.params, &self.stream.tasks[j].test, j, hp.batch_size)?;
            self.matrix.record(t, j, acc)?;
        }
        self.prev = self.params.clone();
        self.last_adam = Some(adam);
        self.last_sched = sched.state();
        self.wallclock.push(started.elapsed().as_secs_f64());
        self.tasks_done += 1;
        Ok(())
    }

    /// Pruning-order curves on the current parameters, averaged over the
    /// test sets of all tasks trained so far.
    pub fn compute_aopc(&self) -> AppResult<Vec<AopcSummary>> {
        let fractions = &self.cfg.aopc_fractions;
        let hp = self.cfg.hyperparams();
        let mut out = Vec::new();
        for (mode_ix, mode) in [PruneOrder::Highest, PruneOrder::Lowest, PruneOrder::Random]
            .into_iter()
            .enumerate()
        {
            let mut mean = vec![0.0; fractions.len()];
            for j in 0..self.tasks_done {
                let mut rng = Rng::substream(self.seed, "aopc", &[mode_ix as u64, j as u64]);
                let curve = aopc_curve(
                    &self.params,
                    &self.layout,
                    self.omega.values(),
                    &self.stream.tasks[j].test,
                    j,
                    mode,
                    fractions,
                    hp.batch_size,
                    &mut rng,
                )?;
                for (m, a) in mean.iter_mut().zip(&curve.accuracy) {
                    *m += a;
                }
            }
            for m in mean.iter_mut() {
                *m /= self.tasks_done.max(1) as f64;
            }
            let area = drop_area(fractions, &mean);
            out.push(AopcSummary {
                mode: mode.label().to_string(),
                fractions: fractions.clone(),
                mean_accuracy: mean,
                area,
            });
        }
        Ok(out)
    }

    /// Assemble the report for the tasks completed so far.
    pub fn finalize(&self) -> AppResult<RunReport> {
        if self.tasks_done == 0 {
            return Err(CoreError::Usage("no tasks trained yet".into()).into());
        }
        let mut matrix = self.matrix.clone();
        matrix.a_star = self.cfg.a_star.clone();
        let average_accuracy_per_task: Vec<f64> =
            (0..self.tasks_done).map(|i| matrix.average_accuracy(i).unwrap()).collect();
        let final_average_accuracy = *average_accuracy_per_task.last().unwrap();
        let a_star = match self.cfg.method {
            Method::Finetune => {
                Some((0..self.tasks_done).map(|i| matrix.entry(i, i).unwrap()).collect())
            }
            Method::Agscl => None,
        };
        let aopc = if self.mode() == TrainMode::Finetune {
            Vec::new()
        } else {
            self.compute_aopc()?
        };
        let (reg_nodes, reg_scalars) = reg_param_count(&self.layout);
        Ok(RunReport {
            seed: self.seed,
            plasticity: matrix.plasticity(),
            stability: matrix.stability(),
            matrix,
            average_accuracy_per_task,
            final_average_accuracy,
            capacity: self.capacity.clone(),
            aopc,
            reg_nodes,
            reg_scalars,
            a_star,
            wallclock_per_task: self.wallclock.clone(),
            config: self.cfg.clone(),
        })
    }

    pub fn to_checkpoint(&self) -> CheckpointState {
        let adam = self.last_adam.as_ref();
        let mask: Vec<(u32, u32, u64, u32)> = self
            .mask
            .iter()
            .map(|(n, c, task)| (n.layer, n.node, c as u64, task))
            .collect();
        CheckpointState {
            config_json: self.config_json.clone(),
            seed: self.seed,
            tasks_done: self.tasks_done,
            hidden: self.params.hidden.clone(),
            heads: self.params.heads.clone(),
            omega: self.omega.values().to_vec(),
            eta: self.omega.eta(),
            mask,
            adam_step: adam.map(|a| a.step).unwrap_or(0),
            adam_m_hidden: adam.map(|a| a.m_hidden.clone()).unwrap_or_default(),
            adam_v_hidden: adam.map(|a| a.v_hidden.clone()).unwrap_or_default(),
            adam_m_heads: adam.map(|a| a.m_heads.clone()).unwrap_or_default(),
            adam_v_heads: adam.map(|a| a.v_heads.clone()).unwrap_or_default(),
            sched_lr: self.last_sched.0,
            sched_best: self.last_sched.1,
            sched_stale: self.last_sched.2,
            matrix: self.matrix.clone(),
            capacity: self.capacity.clone(),
            wallclock: self.wallclock.clone(),
        }
    }

    pub fn from_checkpoint(state: CheckpointState) -> AppResult<Self> {
        let cfg = ExperimentConfig::from_json(&state.config_json)?;
        let stream = cfg.build_stream(state.seed)?;
        let spec = cfg.build_net_spec(&stream)?;
        let layout = GroupLayout::build(&spec);
        let params = NetworkParams::from_raw(
            spec.geoms().to_vec(),
            spec.input.dim(),
            state.hidden,
            state.heads,
        )?;
        let omega = OmegaRegistry::from_values(state.omega, state.eta)?;
        if omega.len() != layout.total_nodes() {
            return Err(CoreError::Config("importance registry size mismatch".into()).into());
        }
        let mut mask = ZeroMask::new();
        for (layer, node, coord, task) in state.mask {
            mask.insert(NodeId { layer, node }, coord as usize, task);
        }
        let mut adam = AdamState::new(&params);
        adam.step = state.adam_step;
        if !state.adam_m_hidden.is_empty() {
            adam.m_hidden = state.adam_m_hidden;
            adam.v_hidden = state.adam_v_hidden;
            adam.m_heads = state.adam_m_heads;
            adam.v_heads = state.adam_v_heads;
        }
        Ok(Experiment {
            config_json: serde_json::to_string(&cfg).expect("config serialization"),
            cfg,
            seed: state.seed,
            stream,
            spec,
            layout,
            prev: params.clone(),
            params,
            omega,
            mask,
            matrix: state.matrix,
            capacity: state.capacity,
            wallclock: state.wallclock,
            tasks_done: state.tasks_done,
            last_adam: Some(adam),
            last_sched: (state.sched_lr, state.sched_best, state.sched_stale),
        })
    }
}

/// Resolve an output directory against the optional environment root.
pub fn resolve_out_dir(configured: &str, cli_override: Option<&Path>) -> PathBuf {
    let base = cli_override.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(configured));
    if base.is_relative() {
        if let Ok(root) = std::env::var("AGSCL_OUTPUT_ROOT") {
            if !root.is_empty() {
                return PathBuf::from(root).join(base);
            }
        }
    }
    base
}

pub fn seed_dir(base: &Path, seed: u64) -> PathBuf {
    base.join(format!("seed_{seed}"))
}

pub fn checkpoint_path(seed_dir: &Path, tasks_done: usize) -> PathBuf {
    seed_dir.join("checkpoints").join(format!("task_{tasks_done:02}.ckpt"))
}

/// Run one seed start to finish, checkpointing at every task boundary and
/// emitting result files at the end.
///
/// On a numeric abort mid-task the last boundary checkpoint is already on
/// disk; the error propagates after that state is safe.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> AppResult<RunReport> {
    let mut ex = Experiment::new(cfg.clone(), seed)?;
    run_to_completion(&mut ex, dir)
}

/// Drive an experiment (fresh or resumed) to completion.
pub fn run_to_completion(ex: &mut Experiment, dir: &Path) -> AppResult<RunReport> {
    while !ex.is_done() {
        ex.step_task()?;
        ex.to_checkpoint().save(&checkpoint_path(dir, ex.tasks_done))?;
    }
    let report = ex.finalize()?;
    emit_results(&report, dir)?;
    Ok(report)
}

/// Run every configured seed under `base/seed_<s>/`.
pub fn run_all(cfg: &ExperimentConfig, base: &Path) -> AppResult<Vec<RunReport>> {
    let mut reports = Vec::new();
    for &seed in &cfg.seeds {
        reports.push(run_seed(cfg, seed, &seed_dir(base, seed))?);
    }
    Ok(reports)
}
