//! Node importance and post-task re-initialization bookkeeping.
//!
//! Importance is the exponentially averaged mean ReLU activation of a node.
//! Nodes whose importance is exactly zero are "unimportant": their outgoing
//! weights are pinned to zero for all later tasks (so nothing downstream can
//! be disturbed by them), and their incoming groups are probabilistically
//! re-drawn so they can learn again. The zero test is exact by design: the
//! proximal updates produce exact zeros, so no threshold is needed.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::layout::{GroupLayout, NodeId};
use crate::nn::NetworkParams;
use crate::rng::Rng;
use crate::Result;

/// Per-node importance values, flat-indexed to match `GroupLayout`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaRegistry {
    eta: f64,
    values: Vec<f64>,
}

impl OmegaRegistry {
    /// Fresh registry: every node starts unimportant.
    pub fn new(total_nodes: usize, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Config(format!("eta must be in (0, 1], got {eta}")));
        }
        Ok(OmegaRegistry { eta, values: vec![0.0; total_nodes] })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rebuild from checkpointed values.
    pub fn from_values(values: Vec<f64>, eta: f64) -> Result<Self> {
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::Data("importance values must be nonnegative".into()));
        }
        let mut r = Self::new(values.len(), eta)?;
        r.values = values;
        Ok(r)
    }

    /// Post-task update: decay by eta, then add the task's mean activations.
    pub fn update(&mut self, activation_means: &[f64]) -> Result<()> {
        if activation_means.len() != self.values.len() {
            return Err(Error::Data(format!(
                "activation means cover {} nodes, registry has {}",
                activation_means.len(),
                self.values.len()
            )));
        }
        if let Some(bad) = activation_means.iter().find(|&&m| !(m >= 0.0)) {
            return Err(Error::Data(format!("negative or non-finite mean activation {bad}")));
        }
        for (v, &m) in self.values.iter_mut().zip(activation_means) {
            *v = self.eta * *v + m;
        }
        Ok(())
    }

    /// The unimportant set: nodes whose importance is exactly zero.
    pub fn derive_g0(&self) -> UnimportantSet {
        let members: Vec<bool> = self.values.iter().map(|&v| v == 0.0).collect();
        UnimportantSet::from_members(members)
    }

    /// Threshold variant used only by the no-proximal-update ablation, where
    /// exact zeros never occur.
    pub fn derive_g0_thresholded(&self, tau: f64) -> UnimportantSet {
        let members: Vec<bool> = self.values.iter().map(|&v| v < tau).collect();
        UnimportantSet::from_members(members)
    }
}

/// Set of unimportant nodes, flat-indexed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnimportantSet {
    members: Vec<bool>,
    count: usize,
}

impl UnimportantSet {
    pub fn from_members(members: Vec<bool>) -> Self {
        let count = members.iter().filter(|&&m| m).count();
        UnimportantSet { members, count }
    }

    /// Every node unimportant (the state before the first task).
    pub fn all(total_nodes: usize) -> Self {
        UnimportantSet { members: vec![true; total_nodes], count: total_nodes }
    }

    pub fn contains_flat(&self, flat: usize) -> bool {
        self.members[flat]
    }

    pub fn contains(&self, layout: &GroupLayout, node: NodeId) -> bool {
        self.members[layout.flat_index(node)]
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn total(&self) -> usize {
        self.members.len()
    }

    /// Member nodes in ascending flat order.
    pub fn iter<'a>(&'a self, layout: &'a GroupLayout) -> impl Iterator<Item = NodeId> + 'a {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(move |(flat, _)| layout.node_at(flat))
    }
}

/// Persistent record of outgoing weights pinned at zero.
///
/// Keyed by the upper node that owns the coordinate; an entry can only be
/// removed by re-randomizing that owning node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ZeroMask {
    entries: BTreeMap<NodeId, BTreeMap<usize, u32>>,
}

impl ZeroMask {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(|m| m.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, upper: NodeId, coord: usize) -> bool {
        self.entries.get(&upper).is_some_and(|m| m.contains_key(&coord))
    }

    /// Task index at which an entry was created.
    pub fn created_at(&self, upper: NodeId, coord: usize) -> Option<u32> {
        self.entries.get(&upper).and_then(|m| m.get(&coord).copied())
    }

    pub fn insert(&mut self, upper: NodeId, coord: usize, task: u32) {
        // First creation wins; re-masking the same coordinate later keeps the
        // original provenance.
        self.entries.entry(upper).or_default().entry(coord).or_insert(task);
    }

    /// Drop every entry owned by `upper` (its group was re-randomized).
    pub fn remove_upper(&mut self, upper: NodeId) {
        self.entries.remove(&upper);
    }

    /// Deterministic iteration over `(upper, coord, created_task)`.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, usize, u32)> + '_ {
        self.entries
            .iter()
            .flat_map(|(&n, m)| m.iter().map(move |(&c, &t)| (n, c, t)))
    }
}

/// Pin the outgoing weights of every unimportant node to zero and record them
/// in the mask. Heads are never touched.
pub fn zero_init(
    params: &mut NetworkParams,
    layout: &GroupLayout,
    g0: &UnimportantSet,
    mask: &mut ZeroMask,
    task: u32,
) {
    for node in layout.nodes() {
        if !g0.contains(layout, node) {
            continue;
        }
        let Some((start, span)) = layout.outgoing_range(node) else {
            continue;
        };
        let upper_layer = node.layer as usize + 1;
        for m in 0..layout.layer_nodes(upper_layer) {
            let row = params.group_mut(upper_layer, m);
            row[start..start + span].fill(0.0);
            for c in start..start + span {
                mask.insert(NodeId::new(upper_layer, m), c, task);
            }
        }
    }
}

/// Re-draw the incoming group of each unimportant node with probability rho,
/// releasing any mask entries owned by the re-drawn node.
///
/// Must run after `zero_init` for the same task: zeroing first fixes the
/// connections into important upper nodes, and re-drawing then frees only the
/// connections into upper nodes that are themselves unimportant.
pub fn rand_init(
    params: &mut NetworkParams,
    layout: &GroupLayout,
    g0: &UnimportantSet,
    mask: &mut ZeroMask,
    rho: f64,
    rng: &mut Rng,
) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Config(format!("rho must be in (0, 1], got {rho}")));
    }
    for node in layout.nodes() {
        if !g0.contains(layout, node) {
            continue;
        }
        if rng.next_f64() < rho {
            params.reinit_group(node.layer as usize, node.node as usize, rng);
            mask.remove_upper(node);
        }
    }
    Ok(())
}

/// Force every masked coordinate back to exact zero.
pub fn apply_mask(params: &mut NetworkParams, mask: &ZeroMask) {
    for (upper, coord, _) in mask.iter() {
        params.group_mut(upper.layer as usize, upper.node as usize)[coord] = 0.0;
    }
}

/// Zero the gradient of every masked coordinate (before it can reach the
/// optimizer's moment accumulators).
pub fn mask_grads(
    grads: &mut crate::nn::GradientSet,
    layout: &GroupLayout,
    mask: &ZeroMask,
) {
    for (upper, coord, _) in mask.iter() {
        let l = upper.layer as usize;
        let row_len = layout.group_len(l);
        grads.hidden[l][upper.node as usize * row_len + coord] = 0.0;
    }
}
