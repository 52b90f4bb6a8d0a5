//! Canonical addressing of node groups.
//!
//! Every hidden node owns its incoming weights plus bias (one contiguous row
//! in `NetworkParams`), and exposes where its outgoing weights sit inside the
//! rows of the next layer. Task heads are deliberately outside this map: they
//! are task-private, carry no importance value, and are never masked.

use alloc::vec::Vec;

use crate::error::Error;
use crate::nn::{LayerGeom, LayerKind, NetSpec, NetworkParams};
use crate::Result;

/// One hidden node: `(layer, node)`, both zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub layer: u32,
    pub node: u32,
}

impl NodeId {
    pub fn new(layer: usize, node: usize) -> Self {
        NodeId { layer: layer as u32, node: node as u32 }
    }
}

/// Immutable group map for one architecture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupLayout {
    geoms: Vec<LayerGeom>,
    /// Flat node index of the first node in each layer.
    offsets: Vec<usize>,
    /// Length of the slice a node occupies inside each upper-layer row.
    /// `out_slice[l]` is the span for a node of layer `l` within rows of
    /// layer `l + 1` (dense source: 1; conv source into dense: its spatial
    /// plane; conv into conv: one kernel slice).
    out_slice: Vec<usize>,
    total_nodes: usize,
    total_scalars: usize,
}

impl GroupLayout {
    pub fn build(spec: &NetSpec) -> Self {
        let geoms: Vec<LayerGeom> = spec.geoms().to_vec();
        let mut offsets = Vec::with_capacity(geoms.len());
        let mut total_nodes = 0usize;
        let mut total_scalars = 0usize;
        for g in &geoms {
            offsets.push(total_nodes);
            total_nodes += g.rows;
            total_scalars += g.rows * g.row_len;
        }
        let mut out_slice = Vec::with_capacity(geoms.len());
        for l in 0..geoms.len() {
            if l + 1 < geoms.len() {
                let src = &geoms[l];
                let span = match geoms[l + 1].kind {
                    // A flattened source node covers its whole spatial plane.
                    LayerKind::Dense => src.out_h * src.out_w,
                    LayerKind::Conv2d { kernel_h, kernel_w, .. } => kernel_h * kernel_w,
                };
                out_slice.push(span);
            } else {
                // Last hidden layer feeds only heads, which are excluded.
                out_slice.push(0);
            }
        }
        GroupLayout { geoms, offsets, out_slice, total_nodes, total_scalars }
    }

    pub fn layer_count(&self) -> usize {
        self.geoms.len()
    }

    pub fn layer_nodes(&self, layer: usize) -> usize {
        self.geoms[layer].rows
    }

    /// Total node count across hidden layers.
    pub fn total_nodes(&self) -> usize {
        self.total_nodes
    }

    /// Total trainable hidden scalars (weights and biases; heads excluded).
    pub fn total_scalars(&self) -> usize {
        self.total_scalars
    }

    pub fn group_len(&self, layer: usize) -> usize {
        self.geoms[layer].row_len
    }

    pub fn contains(&self, node: NodeId) -> bool {
        (node.layer as usize) < self.geoms.len()
            && (node.node as usize) < self.geoms[node.layer as usize].rows
    }

    /// Flat index of a node (layer-major), matching activation-mean order.
    pub fn flat_index(&self, node: NodeId) -> usize {
        self.offsets[node.layer as usize] + node.node as usize
    }

    pub fn node_at(&self, flat: usize) -> NodeId {
        let mut layer = 0;
        while layer + 1 < self.offsets.len() && self.offsets[layer + 1] <= flat {
            layer += 1;
        }
        NodeId::new(layer, flat - self.offsets[layer])
    }

    /// All nodes in ascending `(layer, node)` order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.geoms
            .iter()
            .enumerate()
            .flat_map(|(l, g)| (0..g.rows).map(move |n| NodeId::new(l, n)))
    }

    /// Range a source node occupies inside each row of the next layer,
    /// or `None` for the last hidden layer (heads are excluded).
    pub fn outgoing_range(&self, node: NodeId) -> Option<(usize, usize)> {
        let l = node.layer as usize;
        if l + 1 >= self.geoms.len() {
            return None;
        }
        let span = self.out_slice[l];
        Some((node.node as usize * span, span))
    }

    /// Materialized outgoing coordinates: `(upper node, coordinate within the
    /// upper node's group)` for every scalar the node feeds upward.
    pub fn outgoing_coords(&self, node: NodeId) -> Vec<(NodeId, usize)> {
        let Some((start, span)) = self.outgoing_range(node) else {
            return Vec::new();
        };
        let l = node.layer as usize;
        let upper_rows = self.geoms[l + 1].rows;
        let mut out = Vec::with_capacity(upper_rows * span);
        for m in 0..upper_rows {
            for c in start..start + span {
                out.push((NodeId::new(l + 1, m), c));
            }
        }
        out
    }
}

/// Read view of one node's group.
pub fn group_view<'a>(
    params: &'a NetworkParams,
    layout: &GroupLayout,
    node: NodeId,
) -> Result<&'a [f64]> {
    if !layout.contains(node) {
        return Err(Error::Lookup(alloc::format!(
            "no node ({}, {})",
            node.layer,
            node.node
        )));
    }
    Ok(params.group(node.layer as usize, node.node as usize))
}

/// Write view of one node's group.
pub fn group_view_mut<'a>(
    params: &'a mut NetworkParams,
    layout: &GroupLayout,
    node: NodeId,
) -> Result<&'a mut [f64]> {
    if !layout.contains(node) {
        return Err(Error::Lookup(alloc::format!(
            "no node ({}, {})",
            node.layer,
            node.node
        )));
    }
    Ok(params.group_mut(node.layer as usize, node.node as usize))
}

/// Euclidean norm of a group slice.
pub fn group_l2_norm(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for &x in v {
        s += x * x;
    }
    libm::sqrt(s)
}
