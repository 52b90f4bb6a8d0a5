//! Task streams: synthetic Gaussian-cluster tasks plus split/permuted
//! variants of IDX-format image datasets.
//!
//! All streams are pure functions of their parameters and a seed; train,
//! validation, and test partitions are disjoint, and labels inside each task
//! are remapped to `0..classes` so every task gets its own dense head.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::rng::Rng;
use crate::Result;

/// In-memory labeled dataset, examples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub classes: usize,
    pub x: Vec<f64>,
    pub y: Vec<usize>,
}

impl Dataset {
    pub fn empty(dim: usize, classes: usize) -> Self {
        Dataset { dim, classes, x: Vec::new(), y: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn example(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    fn push(&mut self, x: &[f64], y: usize) {
        self.x.extend_from_slice(x);
        self.y.push(y);
    }

    /// Gather a minibatch by example indices into reusable buffers.
    pub fn gather(&self, idxs: &[usize], xb: &mut Vec<f64>, yb: &mut Vec<usize>) {
        xb.clear();
        yb.clear();
        for &i in idxs {
            xb.extend_from_slice(self.example(i));
            yb.push(self.y[i]);
        }
    }
}

/// One task of a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub name: String,
    pub classes: usize,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Ordered task sequence with a common input width.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskStream {
    pub dim: usize,
    /// Image geometry when the data came from an image source.
    pub image_hw: Option<(usize, usize)>,
    pub tasks: Vec<TaskData>,
}

impl TaskStream {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn head_dims(&self) -> Vec<usize> {
        self.tasks.iter().map(|t| t.classes).collect()
    }
}

/// Synthetic stream: each class is a unit-covariance Gaussian cluster whose
/// mean sits on a sphere of radius `separation`. 80/10/10 split per class.
pub fn synth_tasks(
    n_tasks: usize,
    classes_per_task: usize,
    dim: usize,
    samples_per_class: usize,
    separation: f64,
    seed: u64,
) -> Result<TaskStream> {
    if n_tasks == 0 || classes_per_task == 0 || dim == 0 {
        return Err(Error::Config("synthetic task counts must all be >= 1".into()));
    }
    if samples_per_class < 3 {
        return Err(Error::Config(
            "need at least 3 samples per class for a train/val/test split".into(),
        ));
    }
    if !(separation >= 0.0) {
        return Err(Error::Config(format!("separation must be >= 0, got {separation}")));
    }
    let mut tasks = Vec::with_capacity(n_tasks);
    for t in 0..n_tasks {
        let mut rng = Rng::substream(seed, "synth", &[t as u64]);
        let mut means = vec![0.0; classes_per_task * dim];
        for c in 0..classes_per_task {
            let m = &mut means[c * dim..(c + 1) * dim];
            let mut norm = 0.0;
            for v in m.iter_mut() {
                *v = rng.normal();
                norm += *v * *v;
            }
            let norm = libm::sqrt(norm);
            if norm > 0.0 {
                for v in m.iter_mut() {
                    *v *= separation / norm;
                }
            }
        }
        let n_val = (samples_per_class / 10).max(1);
        let n_test = (samples_per_class / 10).max(1);
        let n_train = samples_per_class.saturating_sub(n_val + n_test).max(1);
        let mut train = Dataset::empty(dim, classes_per_task);
        let mut val = Dataset::empty(dim, classes_per_task);
        let mut test = Dataset::empty(dim, classes_per_task);
        let mut buf = vec![0.0; dim];
        for c in 0..classes_per_task {
            let m = &means[c * dim..(c + 1) * dim];
            for s in 0..samples_per_class {
                for (b, &mu) in buf.iter_mut().zip(m) {
                    *b = mu + rng.normal();
                }
                if s < n_train {
                    train.push(&buf, c);
                } else if s < n_train + n_val {
                    val.push(&buf, c);
                } else if s < n_train + n_val + n_test {
                    test.push(&buf, c);
                } else {
                    train.push(&buf, c);
                }
            }
        }
        tasks.push(TaskData {
            name: format!("synth-{t}"),
            classes: classes_per_task,
            train,
            val,
            test,
        });
    }
    Ok(TaskStream { dim, image_hw: None, tasks })
}

/// Raw IDX image dataset: u8 pixels with matching u8 labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxDataset {
    pub n: usize,
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    if offset + 4 > bytes.len() {
        return Err(Error::Format {
            offset,
            message: format!("need 4 bytes, file has {}", bytes.len()),
        });
    }
    Ok(u32::from_be_bytes([bytes[offset], bytes[offset + 1], bytes[offset + 2], bytes[offset + 3]]))
}

/// Parse a big-endian IDX image file (magic 0x00000803, 3 dimensions).
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("expected image magic 0x{IDX_IMAGES_MAGIC:08x}, got 0x{magic:08x}"),
        });
    }
    let n = read_be_u32(bytes, 4)? as usize;
    let h = read_be_u32(bytes, 8)? as usize;
    let w = read_be_u32(bytes, 12)? as usize;
    let expected = 16 + n * h * w;
    if bytes.len() != expected {
        return Err(Error::Format {
            offset: bytes.len().min(expected),
            message: format!("expected {expected} bytes for {n}x{h}x{w} images, got {}", bytes.len()),
        });
    }
    Ok((n, h, w, bytes[16..].to_vec()))
}

/// Parse a big-endian IDX label file (magic 0x00000801, 1 dimension).
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("expected label magic 0x{IDX_LABELS_MAGIC:08x}, got 0x{magic:08x}"),
        });
    }
    let n = read_be_u32(bytes, 4)? as usize;
    let expected = 8 + n;
    if bytes.len() != expected {
        return Err(Error::Format {
            offset: bytes.len().min(expected),
            message: format!("expected {expected} bytes for {n} labels, got {}", bytes.len()),
        });
    }
    Ok(bytes[8..].to_vec())
}

/// Combine parsed image and label buffers, checking that counts agree.
pub fn idx_dataset(image_bytes: &[u8], label_bytes: &[u8]) -> Result<IdxDataset> {
    let (n, height, width, pixels) = parse_idx_images(image_bytes)?;
    let labels = parse_idx_labels(label_bytes)?;
    if labels.len() != n {
        return Err(Error::Data(format!(
            "image count {n} does not match label count {}",
            labels.len()
        )));
    }
    Ok(IdxDataset { n, height, width, pixels, labels })
}

fn pixels_to_f64(src: &[u8], dst: &mut Vec<f64>) {
    dst.extend(src.iter().map(|&p| p as f64 / 255.0));
}

/// Split an image dataset into tasks by class partition.
///
/// Task `j` holds exactly the train/test examples of its classes, labels
/// remapped to `0..cell.len()`; `val_fraction` of each task's train examples
/// (seeded shuffle) is held out for validation.
pub fn split_tasks(
    train: &IdxDataset,
    test: &IdxDataset,
    partition: &[Vec<u8>],
    val_fraction: f64,
    seed: u64,
) -> Result<TaskStream> {
    if partition.is_empty() {
        return Err(Error::Config("class partition must be nonempty".into()));
    }
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::Config(format!("val_fraction must be in [0, 1), got {val_fraction}")));
    }
    let mut seen = [false; 256];
    for cell in partition {
        if cell.is_empty() {
            return Err(Error::Config("empty partition cell".into()));
        }
        for &c in cell {
            if seen[c as usize] {
                return Err(Error::Config(format!("class {c} appears in two partition cells")));
            }
            seen[c as usize] = true;
        }
    }
    if train.height != test.height || train.width != test.width {
        return Err(Error::Data("train/test image geometry differs".into()));
    }
    let dim = train.height * train.width;
    let mut tasks = Vec::with_capacity(partition.len());
    for (j, cell) in partition.iter().enumerate() {
        let classes = cell.len();
        let remap = |label: u8| cell.iter().position(|&c| c == label);
        let mut pool = Dataset::empty(dim, classes);
        for i in 0..train.n {
            if let Some(y) = remap(train.labels[i]) {
                pixels_to_f64(&train.pixels[i * dim..(i + 1) * dim], &mut pool.x);
                pool.y.push(y);
            }
        }
        let mut test_ds = Dataset::empty(dim, classes);
        for i in 0..test.n {
            if let Some(y) = remap(test.labels[i]) {
                pixels_to_f64(&test.pixels[i * dim..(i + 1) * dim], &mut test_ds.x);
                test_ds.y.push(y);
            }
        }
        if pool.is_empty() || test_ds.is_empty() {
            return Err(Error::Data(format!("task {j} has no examples for classes {cell:?}")));
        }
        let mut order = Rng::substream(seed, "valsplit", &[j as u64]).permutation(pool.len());
        let n_val = ((pool.len() as f64 * val_fraction) as usize).min(pool.len() - 1);
        let mut val = Dataset::empty(dim, classes);
        let mut train_ds = Dataset::empty(dim, classes);
        let (val_idx, train_idx) = order.split_at_mut(n_val);
        // Keep example order deterministic within each side.
        val_idx.sort_unstable();
        train_idx.sort_unstable();
        for &i in val_idx.iter() {
            val.push(pool.example(i), pool.y[i]);
        }
        for &i in train_idx.iter() {
            train_ds.push(pool.example(i), pool.y[i]);
        }
        let name = format!("split-{j}-classes{cell:?}");
        tasks.push(TaskData { name, classes, train: train_ds, val, test: test_ds });
    }
    Ok(TaskStream { dim, image_hw: Some((train.height, train.width)), tasks })
}

/// Pixel-permutation stream: task `j` applies one fixed seeded permutation to
/// every image; task 0 is the identity. All tasks keep the full label set.
pub fn permuted_tasks(
    train: &IdxDataset,
    test: &IdxDataset,
    n_tasks: usize,
    val_fraction: f64,
    seed: u64,
) -> Result<TaskStream> {
    if n_tasks == 0 {
        return Err(Error::Config("need at least one task".into()));
    }
    if train.height != test.height || train.width != test.width {
        return Err(Error::Data("train/test image geometry differs".into()));
    }
    let dim = train.height * train.width;
    let classes = train.labels.iter().map(|&l| l as usize).max().unwrap_or(0) + 1;
    let mut tasks = Vec::with_capacity(n_tasks);
    for j in 0..n_tasks {
        let perm: Vec<usize> = if j == 0 {
            (0..dim).collect()
        } else {
            Rng::substream(seed, "perm", &[j as u64]).permutation(dim)
        };
        let apply = |src: &IdxDataset| {
            let mut ds = Dataset::empty(dim, classes);
            let mut buf = vec![0.0; dim];
            for i in 0..src.n {
                let img = &src.pixels[i * dim..(i + 1) * dim];
                for (d, &p) in buf.iter_mut().zip(&perm) {
                    *d = img[p] as f64 / 255.0;
                }
                ds.push(&buf, src.labels[i] as usize);
            }
            ds
        };
        let pool = apply(train);
        let test_ds = apply(test);
        let mut order = Rng::substream(seed, "valsplit", &[j as u64]).permutation(pool.len());
        let n_val = ((pool.len() as f64 * val_fraction) as usize).min(pool.len() - 1);
        let (val_idx, train_idx) = order.split_at_mut(n_val);
        val_idx.sort_unstable();
        train_idx.sort_unstable();
        let mut val = Dataset::empty(dim, classes);
        let mut train_ds = Dataset::empty(dim, classes);
        for &i in val_idx.iter() {
            val.push(pool.example(i), pool.y[i]);
        }
        for &i in train_idx.iter() {
            train_ds.push(pool.example(i), pool.y[i]);
        }
        tasks.push(TaskData {
            name: format!("permuted-{j}"),
            classes,
            train: train_ds,
            val,
            test: test_ds,
        });
    }
    Ok(TaskStream { dim, image_hw: Some((train.height, train.width)), tasks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_is_deterministic() {
        let a = synth_tasks(3, 2, 10, 30, 5.0, 42).unwrap();
        let b = synth_tasks(3, 2, 10, 30, 5.0, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synth_tasks(3, 2, 10, 30, 5.0, 43).unwrap());
    }

    #[test]
    fn synth_partitions_are_disjoint_and_labeled_densely() {
        let s = synth_tasks(2, 3, 8, 50, 4.0, 7).unwrap();
        for t in &s.tasks {
            assert_eq!(t.train.len() + t.val.len() + t.test.len(), 3 * 50);
            for ds in [&t.train, &t.val, &t.test] {
                assert!(ds.y.iter().all(|&y| y < 3));
            }
            for c in 0..3 {
                assert!(t.train.y.contains(&c));
            }
        }
    }

    /// Independent linear oracle: multinomial logistic regression trained by
    /// plain gradient descent, no shared code with the network stack.
    fn linear_oracle_accuracy(train: &Dataset, test: &Dataset) -> f64 {
        let (d, c) = (train.dim, train.classes);
        let mut w = vec![0.0; c * (d + 1)];
        let lr = 0.5;
        for _ in 0..200 {
            let mut grad = vec![0.0; c * (d + 1)];
            for i in 0..train.len() {
                let x = train.example(i);
                let mut z = vec![0.0; c];
                for k in 0..c {
                    let row = &w[k * (d + 1)..(k + 1) * (d + 1)];
                    z[k] = row[d] + row[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
                let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = z.iter().map(|&v| libm::exp(v - m)).sum();
                for k in 0..c {
                    let p = libm::exp(z[k] - m) / sum - if train.y[i] == k { 1.0 } else { 0.0 };
                    let g = &mut grad[k * (d + 1)..(k + 1) * (d + 1)];
                    for (gj, &xj) in g[..d].iter_mut().zip(x) {
                        *gj += p * xj;
                    }
                    g[d] += p;
                }
            }
            for (wi, gi) in w.iter_mut().zip(&grad) {
                *wi -= lr * gi / train.len() as f64;
            }
        }
        let mut correct = 0usize;
        for i in 0..test.len() {
            let x = test.example(i);
            let mut best = (f64::NEG_INFINITY, 0usize);
            for k in 0..c {
                let row = &w[k * (d + 1)..(k + 1) * (d + 1)];
                let z = row[d] + row[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                if z > best.0 {
                    best = (z, k);
                }
            }
            if best.1 == test.y[i] {
                correct += 1;
            }
        }
        correct as f64 / test.len() as f64
    }

    #[test]
    fn well_separated_clusters_are_linearly_classifiable() {
        let s = synth_tasks(1, 2, 20, 200, 10.0, 11).unwrap();
        let t = &s.tasks[0];
        let acc = linear_oracle_accuracy(&t.train, &t.test);
        assert!(acc > 0.99, "linear oracle accuracy {acc}");
    }

    #[test]
    fn zero_separation_is_chance_level() {
        let s = synth_tasks(1, 2, 20, 300, 0.0, 11).unwrap();
        let t = &s.tasks[0];
        let acc = linear_oracle_accuracy(&t.train, &t.test);
        assert!((acc - 0.5).abs() < 0.15, "chance-level expected, got {acc}");
    }

    fn tiny_idx(n: usize, h: usize, w: usize, label_of: impl Fn(usize) -> u8) -> IdxDataset {
        let mut pixels = Vec::with_capacity(n * h * w);
        for i in 0..n {
            for p in 0..h * w {
                pixels.push(((i * 37 + p * 11) % 251) as u8);
            }
        }
        IdxDataset { n, height: h, width: w, pixels, labels: (0..n).map(label_of).collect() }
    }

    fn encode_images(ds: &IdxDataset) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        b.extend_from_slice(&(ds.n as u32).to_be_bytes());
        b.extend_from_slice(&(ds.height as u32).to_be_bytes());
        b.extend_from_slice(&(ds.width as u32).to_be_bytes());
        b.extend_from_slice(&ds.pixels);
        b
    }

    fn encode_labels(ds: &IdxDataset) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        b.extend_from_slice(&(ds.n as u32).to_be_bytes());
        b.extend_from_slice(&ds.labels);
        b
    }

    #[test]
    fn idx_round_trip() {
        let ds = tiny_idx(12, 4, 5, |i| (i % 10) as u8);
        let parsed = idx_dataset(&encode_images(&ds), &encode_labels(&ds)).unwrap();
        assert_eq!(parsed, ds);
    }

    #[test]
    fn truncated_idx_reports_expected_length() {
        let ds = tiny_idx(5, 3, 3, |i| i as u8);
        let mut bytes = encode_images(&ds);
        bytes.truncate(bytes.len() - 7);
        match parse_idx_images(&bytes) {
            Err(Error::Format { message, .. }) => {
                assert!(message.contains("expected 61 bytes"), "{message}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_magic_kind_is_rejected() {
        let ds = tiny_idx(5, 3, 3, |i| i as u8);
        // Image magic in a label position: wrong kind.
        let bytes = encode_images(&ds);
        assert!(matches!(parse_idx_labels(&bytes), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn split_remaps_labels_and_partitions_examples() {
        let train = tiny_idx(40, 3, 3, |i| (i % 10) as u8);
        let test = tiny_idx(20, 3, 3, |i| (i % 10) as u8);
        let partition: Vec<Vec<u8>> =
            vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7], vec![8, 9]];
        let s = split_tasks(&train, &test, &partition, 0.25, 3).unwrap();
        assert_eq!(s.len(), 5);
        let total_train: usize = s.tasks.iter().map(|t| t.train.len() + t.val.len()).sum();
        let total_test: usize = s.tasks.iter().map(|t| t.test.len()).sum();
        assert_eq!(total_train, 40);
        assert_eq!(total_test, 20);
        for t in &s.tasks {
            assert_eq!(t.classes, 2);
            for ds in [&t.train, &t.val, &t.test] {
                assert!(ds.y.iter().all(|&y| y < 2));
            }
        }
    }

    #[test]
    fn overlapping_partition_cells_are_rejected() {
        let train = tiny_idx(20, 3, 3, |i| (i % 4) as u8);
        let test = tiny_idx(8, 3, 3, |i| (i % 4) as u8);
        let r = split_tasks(&train, &test, &[vec![0, 1], vec![1, 2]], 0.1, 3);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn permuted_task_zero_is_identity() {
        let train = tiny_idx(10, 4, 4, |i| (i % 3) as u8);
        let test = tiny_idx(6, 4, 4, |i| (i % 3) as u8);
        let s = permuted_tasks(&train, &test, 3, 0.0, 9).unwrap();
        let expect: Vec<f64> = train.pixels[..16].iter().map(|&p| p as f64 / 255.0).collect();
        assert_eq!(s.tasks[0].train.example(0), &expect[..]);
        // Later tasks really permute.
        assert_ne!(s.tasks[1].train.example(0), &expect[..]);
        // Same seed, same permutations.
        let s2 = permuted_tasks(&train, &test, 3, 0.0, 9).unwrap();
        assert_eq!(s, s2);
    }

    #[test]
    fn permutations_preserve_pixel_multisets() {
        let train = tiny_idx(4, 3, 5, |i| i as u8);
        let test = tiny_idx(2, 3, 5, |i| i as u8);
        let s = permuted_tasks(&train, &test, 4, 0.0, 1).unwrap();
        for t in &s.tasks {
            let mut a: Vec<u64> = t.train.example(0).iter().map(|&v| v.to_bits()).collect();
            let mut b: Vec<u64> =
                s.tasks[0].train.example(0).iter().map(|&v| v.to_bits()).collect();
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b);
        }
    }
}
