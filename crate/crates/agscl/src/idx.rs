//! IDX files on disk: loading (gzip-transparent), writing, and a seeded
//! generator for desk-scale image datasets.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use agscl_core::rng::Rng;
use agscl_core::tasks::{idx_dataset, IdxDataset};

use crate::error::{io_err, AppError, AppResult};

fn read_maybe_gz(path: &Path) -> AppResult<Vec<u8>> {
    let raw = fs::read(path).map_err(io_err(path))?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(io_err(path))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Load an image/label pair of IDX files; `.gz` content is inflated
/// transparently regardless of extension.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> AppResult<IdxDataset> {
    let images = read_maybe_gz(images_path)?;
    let labels = read_maybe_gz(labels_path)?;
    idx_dataset(&images, &labels).map_err(AppError::from)
}

pub fn encode_idx_images(ds: &IdxDataset) -> Vec<u8> {
    let mut b = Vec::with_capacity(16 + ds.pixels.len());
    b.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    b.extend_from_slice(&(ds.n as u32).to_be_bytes());
    b.extend_from_slice(&(ds.height as u32).to_be_bytes());
    b.extend_from_slice(&(ds.width as u32).to_be_bytes());
    b.extend_from_slice(&ds.pixels);
    b
}

pub fn encode_idx_labels(ds: &IdxDataset) -> Vec<u8> {
    let mut b = Vec::with_capacity(8 + ds.labels.len());
    b.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    b.extend_from_slice(&(ds.n as u32).to_be_bytes());
    b.extend_from_slice(&ds.labels);
    b
}

/// Write an IDX image/label pair to disk.
pub fn write_idx(ds: &IdxDataset, images_path: &Path, labels_path: &Path) -> AppResult<()> {
    fs::write(images_path, encode_idx_images(ds)).map_err(io_err(images_path))?;
    fs::write(labels_path, encode_idx_labels(ds)).map_err(io_err(labels_path))?;
    Ok(())
}

/// Seeded synthetic image dataset: every class template is a mixture over one
/// small shared dictionary of Gaussian-bump patterns, plus per-example pixel
/// noise. Classes are well separated (a linear model reaches high accuracy),
/// but because all classes draw on the same low-rank pattern space, training
/// on later classes repurposes exactly the features earlier classes relied on.
pub fn generate_blob_dataset(
    seed: u64,
    classes: usize,
    train_per_class: usize,
    test_per_class: usize,
    height: usize,
    width: usize,
) -> (IdxDataset, IdxDataset) {
    let dim = height * width;
    // Shared dictionary of smooth bump patterns. Consecutive class pairs mix
    // a sliding window of the dictionary: adjacent pairs overlap (so later
    // training disturbs the features earlier pairs rely on), distant pairs do
    // not (so the disturbance is never undone by even-later tasks).
    let window = 4usize;
    let stride = 2usize;
    let n_windows = classes.div_ceil(2);
    let n_basis = stride * n_windows.saturating_sub(1) + window;
    let mut basis = vec![vec![0.0f64; dim]; n_basis];
    for (b, pat) in basis.iter_mut().enumerate() {
        let mut rng = Rng::substream(seed, "basis", &[b as u64]);
        for _ in 0..2 {
            let cy = (0.15 + 0.7 * rng.next_f64()) * height as f64;
            let cx = (0.15 + 0.7 * rng.next_f64()) * width as f64;
            let sigma = 1.5 + 2.5 * rng.next_f64();
            let amp = if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
            for y in 0..height {
                for x in 0..width {
                    let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                    pat[y * width + x] += amp * (-d2 / (2.0 * sigma * sigma)).exp();
                }
            }
        }
    }
    // Per-class mixing coefficients over the class's window, redrawn until
    // the two classes sharing a window are well separated.
    let mut coefs: Vec<Vec<f64>> = Vec::with_capacity(classes);
    {
        let mut rng = Rng::substream(seed, "class-coef", &[]);
        while coefs.len() < classes {
            let cand: Vec<f64> = (0..window).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
            let partner = coefs.len() & !1;
            let far_enough = coefs[partner..].iter().all(|prev| {
                let d2: f64 = prev.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum();
                d2 > 1.5
            });
            if far_enough {
                coefs.push(cand);
            }
        }
    }
    let mut templates = vec![vec![0.0f64; dim]; classes];
    for (c, tpl) in templates.iter_mut().enumerate() {
        let base = (c / 2) * stride;
        for (k, pat) in basis[base..base + window].iter().enumerate() {
            for (t, &p) in tpl.iter_mut().zip(pat) {
                *t += coefs[c][k] * p;
            }
        }
        let max = tpl.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-9);
        for v in tpl.iter_mut() {
            *v /= max;
        }
    }

    let render = |split: &str, per_class: usize| -> IdxDataset {
        let n = classes * per_class;
        let mut pixels = vec![0u8; n * dim];
        let mut labels = vec![0u8; n];
        // Interleave classes, then shuffle example order.
        let mut order: Vec<usize> = (0..n).collect();
        Rng::substream(seed, split, &[u64::MAX]).shuffle(&mut order);
        for (slot, &ex) in order.iter().enumerate() {
            let c = ex / per_class;
            let i = ex % per_class;
            let mut rng = Rng::substream(seed, split, &[c as u64, i as u64]);
            labels[slot] = c as u8;
            let px = &mut pixels[slot * dim..(slot + 1) * dim];
            for (p, &t) in px.iter_mut().zip(&templates[c]) {
                let v = 0.5 + 0.35 * t + 0.2 * rng.normal();
                *p = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            }
        }
        IdxDataset { n, height, width, pixels, labels }
    };

    (render("train", train_per_class), render("test", test_per_class))
}
