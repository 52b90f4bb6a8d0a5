//! Dataset-level evaluation: accuracy and loss over fixed-order batches.

use alloc::vec::Vec;

use crate::nn::{cross_entropy, forward_impl, NetworkParams};
use crate::tasks::Dataset;
use crate::Result;

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Classification accuracy of `params` on `data` under head `task_id`,
/// optionally with a set of nodes pruned (activations forced to zero).
pub fn accuracy_pruned(
    params: &NetworkParams,
    data: &Dataset,
    task_id: usize,
    batch_size: usize,
    prune: Option<&[bool]>,
) -> Result<f64> {
    let n = data.len();
    let mut correct = 0usize;
    let mut start = 0usize;
    while start < n {
        let end = (start + batch_size).min(n);
        let trace = forward_impl(
            params,
            &data.x[start * data.dim..end * data.dim],
            task_id,
            prune,
        )?;
        for b in 0..end - start {
            let row = &trace.logits[b * trace.head_dim..(b + 1) * trace.head_dim];
            if argmax(row) == data.y[start + b] {
                correct += 1;
            }
        }
        start = end;
    }
    Ok(correct as f64 / n as f64)
}

pub fn accuracy(
    params: &NetworkParams,
    data: &Dataset,
    task_id: usize,
    batch_size: usize,
) -> Result<f64> {
    accuracy_pruned(params, data, task_id, batch_size, None)
}

/// Mean cross-entropy of `params` on `data` under head `task_id`.
pub fn mean_loss(
    params: &NetworkParams,
    data: &Dataset,
    task_id: usize,
    batch_size: usize,
) -> Result<f64> {
    let n = data.len();
    let mut total = 0.0;
    let mut start = 0usize;
    while start < n {
        let end = (start + batch_size).min(n);
        let trace = forward_impl(params, &data.x[start * data.dim..end * data.dim], task_id, None)?;
        let batch_loss = cross_entropy(&trace, &data.y[start..end])?;
        total += batch_loss * (end - start) as f64;
        start = end;
    }
    Ok(total / n as f64)
}

/// Predicted labels for a whole dataset (test helpers).
pub fn predictions(
    params: &NetworkParams,
    data: &Dataset,
    task_id: usize,
    batch_size: usize,
) -> Result<Vec<usize>> {
    let n = data.len();
    let mut out = Vec::with_capacity(n);
    let mut start = 0usize;
    while start < n {
        let end = (start + batch_size).min(n);
        let trace = forward_impl(params, &data.x[start * data.dim..end * data.dim], task_id, None)?;
        for b in 0..end - start {
            out.push(argmax(&trace.logits[b * trace.head_dim..(b + 1) * trace.head_dim]));
        }
        start = end;
    }
    Ok(out)
}
