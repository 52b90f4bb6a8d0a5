//! Quantitative instruments: accuracy matrix, plasticity/stability, sparsity
//! and used capacity, importance-validation pruning curves, and the
//! regularization-memory footprint.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::eval::accuracy_pruned;
use crate::layout::GroupLayout;
use crate::nn::NetworkParams;
use crate::rng::Rng;
use crate::tasks::Dataset;
use crate::Result;

/// Lower-triangular record: `entry(i, j)` is the accuracy of task `j` after
/// training task `i` (both zero-based, `j <= i`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AccuracyMatrix {
    rows: Vec<Vec<f64>>,
    /// Per-task fine-tuning reference accuracies (the plasticity denominator).
    pub a_star: Option<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of completed tasks (rows).
    pub fn tasks(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, a_star: Option<Vec<f64>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::Usage("rows must form a lower triangle".into()));
            }
        }
        Ok(AccuracyMatrix { rows, a_star })
    }

    pub fn record(&mut self, after_task: usize, task: usize, acc: f64) -> Result<()> {
        if task > after_task {
            return Err(Error::Usage(format!(
                "accuracy of task {task} is undefined after task {after_task}"
            )));
        }
        if after_task > self.rows.len() {
            return Err(Error::Usage(format!(
                "record rows in order; task {after_task} after {} rows",
                self.rows.len()
            )));
        }
        if after_task == self.rows.len() {
            self.rows.push(vec![f64::NAN; after_task + 1]);
        }
        self.rows[after_task][task] = acc;
        Ok(())
    }

    pub fn entry(&self, after_task: usize, task: usize) -> Result<f64> {
        if after_task >= self.rows.len() || task > after_task {
            return Err(Error::Usage(format!(
                "no entry ({after_task}, {task}) in a {}-task matrix",
                self.rows.len()
            )));
        }
        Ok(self.rows[after_task][task])
    }

    /// Mean accuracy over all tasks seen up to and including `after_task`.
    pub fn average_accuracy(&self, after_task: usize) -> Result<f64> {
        if after_task >= self.rows.len() {
            return Err(Error::Usage(format!("no row for task {after_task}")));
        }
        let row = &self.rows[after_task];
        Ok(row.iter().sum::<f64>() / row.len() as f64)
    }

    /// Per-task forward-transfer ratio `A_ii / A*_i`; `None` where the
    /// reference is missing or zero.
    pub fn plasticity_per_task(&self) -> Vec<Option<f64>> {
        let t = self.rows.len();
        let Some(a_star) = &self.a_star else {
            return vec![None; t];
        };
        (0..t)
            .map(|i| match a_star.get(i) {
                Some(&s) if s > 0.0 => Some(self.rows[i][i] / s),
                _ => None,
            })
            .collect()
    }

    /// Mean forward-transfer ratio; `None` if any reference is missing.
    pub fn plasticity(&self) -> Option<f64> {
        let per = self.plasticity_per_task();
        if per.is_empty() || per.iter().any(|p| p.is_none()) {
            return None;
        }
        Some(per.iter().map(|p| p.unwrap()).sum::<f64>() / per.len() as f64)
    }

    /// Per-task retention ratio: final accuracy over the historical best.
    pub fn stability_per_task(&self) -> Vec<f64> {
        let t = self.rows.len();
        if t == 0 {
            return Vec::new();
        }
        (0..t)
            .map(|j| {
                let best = (j..t).map(|i| self.rows[i][j]).fold(f64::NEG_INFINITY, f64::max);
                if best > 0.0 {
                    self.rows[t - 1][j] / best
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// Mean retention ratio; at most 1 by construction.
    pub fn stability(&self) -> Option<f64> {
        let per = self.stability_per_task();
        if per.is_empty() {
            return None;
        }
        Some(per.iter().sum::<f64>() / per.len() as f64)
    }
}

/// `|G0| / |G|`.
pub fn sparsity(g0_size: usize, total_nodes: usize) -> f64 {
    g0_size as f64 / total_nodes as f64
}

/// Count of groups bitwise-equal to their previous snapshot.
///
/// The comparison is on raw bit patterns: a group differing in one coordinate
/// by even 1e-300 is not frozen. This matches the exactness contract of the
/// proximal updates.
pub fn frozen_groups(params: &NetworkParams, prev: &NetworkParams, layout: &GroupLayout) -> usize {
    let mut frozen = 0usize;
    for node in layout.nodes() {
        let (l, n) = (node.layer as usize, node.node as usize);
        let a = params.group(l, n);
        let b = prev.group(l, n);
        if a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()) {
            frozen += 1;
        }
    }
    frozen
}

/// Fraction of groups bitwise-frozen since the previous task.
pub fn used_capacity(params: &NetworkParams, prev: &NetworkParams, layout: &GroupLayout) -> f64 {
    frozen_groups(params, prev, layout) as f64 / layout.total_nodes() as f64
}

/// Threshold variant for the no-proximal-update ablation: a group is frozen
/// when its drift norm is below `tau`.
pub fn frozen_groups_thresholded(
    params: &NetworkParams,
    prev: &NetworkParams,
    layout: &GroupLayout,
    tau: f64,
) -> usize {
    let mut frozen = 0usize;
    for node in layout.nodes() {
        let (l, n) = (node.layer as usize, node.node as usize);
        let mut s = 0.0;
        for (x, y) in params.group(l, n).iter().zip(prev.group(l, n)) {
            let d = x - y;
            s += d * d;
        }
        if libm::sqrt(s) < tau {
            frozen += 1;
        }
    }
    frozen
}

/// Regularization-memory footprint: `(node_count, hidden_scalar_count)`.
///
/// Node-wise importance storage needs one value per node; weight-wise schemes
/// need one per hidden scalar. The ratio of the two is the claimed saving.
pub fn reg_param_count(layout: &GroupLayout) -> (usize, usize) {
    (layout.total_nodes(), layout.total_scalars())
}

/// Node-pruning order for importance-validation curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneOrder {
    Highest,
    Lowest,
    Random,
}

impl PruneOrder {
    pub fn label(&self) -> &'static str {
        match self {
            PruneOrder::Highest => "highest",
            PruneOrder::Lowest => "lowest",
            PruneOrder::Random => "random",
        }
    }
}

/// Accuracy-vs-prune-fraction curve for one task snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct AopcCurve {
    pub mode: PruneOrder,
    pub fractions: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub task: usize,
}

/// Rank nodes for pruning: by importance descending/ascending with ties (and
/// the random order) broken deterministically.
fn prune_ranking(omega: &[f64], mode: PruneOrder, rng: &mut Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..omega.len()).collect();
    match mode {
        PruneOrder::Highest => {
            idx.sort_by(|&a, &b| {
                omega[b].partial_cmp(&omega[a]).unwrap().then(a.cmp(&b))
            });
        }
        PruneOrder::Lowest => {
            idx.sort_by(|&a, &b| {
                omega[a].partial_cmp(&omega[b]).unwrap().then(a.cmp(&b))
            });
        }
        PruneOrder::Random => rng.shuffle(&mut idx),
    }
    idx
}

/// Evaluate accuracy while pruning growing prefixes of the node ranking.
///
/// Pruning zeroes activations through a forward-pass mask; the parameters are
/// never modified. Fraction 0 reproduces the unpruned accuracy exactly.
#[allow(clippy::too_many_arguments)]
pub fn aopc_curve(
    params: &NetworkParams,
    layout: &GroupLayout,
    omega: &[f64],
    data: &Dataset,
    task_id: usize,
    mode: PruneOrder,
    fractions: &[f64],
    batch_size: usize,
    rng: &mut Rng,
) -> Result<AopcCurve> {
    if fractions.is_empty() || fractions[0] != 0.0 {
        return Err(Error::Usage("fractions must start at 0".into()));
    }
    if fractions.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Usage("fractions must be sorted ascending".into()));
    }
    let total = layout.total_nodes();
    let ranking = prune_ranking(omega, mode, rng);
    let mut pruned = vec![false; total];
    let mut accuracy = Vec::with_capacity(fractions.len());
    let mut cut = 0usize;
    for &f in fractions {
        let want = libm::ceil(f * total as f64) as usize;
        while cut < want.min(total) {
            pruned[ranking[cut]] = true;
            cut += 1;
        }
        accuracy.push(accuracy_pruned(params, data, task_id, batch_size, Some(&pruned))?);
    }
    Ok(AopcCurve { mode, fractions: fractions.to_vec(), accuracy, task: task_id })
}

/// Trapezoid area of the accuracy-drop curve (drop relative to fraction 0).
pub fn aopc_area(curve: &AopcCurve) -> f64 {
    let base = curve.accuracy[0];
    let mut area = 0.0;
    for w in 0..curve.fractions.len().saturating_sub(1) {
        let d0 = base - curve.accuracy[w];
        let d1 = base - curve.accuracy[w + 1];
        area += 0.5 * (d0 + d1) * (curve.fractions[w + 1] - curve.fractions[w]);
    }
    area
}

/// Trapezoid area of a drop curve given as mean accuracies (aggregated form).
pub fn drop_area(fractions: &[f64], accuracy: &[f64]) -> f64 {
    let base = accuracy[0];
    let mut area = 0.0;
    for w in 0..fractions.len().saturating_sub(1) {
        area += 0.5 * ((base - accuracy[w]) + (base - accuracy[w + 1]))
            * (fractions[w + 1] - fractions[w]);
    }
    area
}
