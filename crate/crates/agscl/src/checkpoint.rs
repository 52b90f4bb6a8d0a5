//! Checkpoint format: a little-endian binary snapshot of everything a run
//! needs to continue from a task boundary, with an embedded checksum.
//!
//! Layout: 8-byte magic, u32 format version, u64 payload length, payload,
//! u64 FNV-1a checksum of the payload. Floats are stored as raw bits, so a
//! save/load/save cycle is byte-identical.

use std::fs;
use std::path::Path;

use agscl_core::metrics::AccuracyMatrix;
use agscl_core::nn::HeadParams;

use crate::error::{io_err, AppError, AppResult};
use crate::report::CapacityRow;

pub const MAGIC: &[u8; 8] = b"AGSCKPT\0";
pub const VERSION: u32 = 1;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.u64(v.len() as u64);
        self.buf.extend_from_slice(v);
    }

    pub fn str(&mut self, v: &str) {
        self.bytes(v.as_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
    }

    pub fn f64s2(&mut self, v: &[Vec<f64>]) {
        self.u64(v.len() as u64);
        for t in v {
            self.f64s(t);
        }
    }

    pub fn finish(self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.buf.len() + 28);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.buf.len() as u64).to_le_bytes());
        let checksum = fnv1a(&self.buf);
        out.extend_from_slice(&self.buf);
        out.extend_from_slice(&checksum.to_le_bytes());
        out
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Validate magic, version, length, and checksum, returning the payload.
    pub fn open(bytes: &'a [u8]) -> AppResult<Self> {
        if bytes.len() < 28 {
            return Err(AppError::Checkpoint("file too short".into()));
        }
        if &bytes[..8] != MAGIC {
            return Err(AppError::Checkpoint("bad magic; not a checkpoint".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(AppError::Checkpoint(format!(
                "format version {version} needs migration; this build reads version {VERSION}"
            )));
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        if bytes.len() != 20 + len + 8 {
            return Err(AppError::Checkpoint(format!(
                "payload length {len} does not match file size {}",
                bytes.len()
            )));
        }
        let payload = &bytes[20..20 + len];
        let stored = u64::from_le_bytes(bytes[20 + len..].try_into().unwrap());
        let computed = fnv1a(payload);
        if stored != computed {
            return Err(AppError::Checkpoint(format!(
                "checksum mismatch: stored {stored:#x}, computed {computed:#x}"
            )));
        }
        Ok(Reader { buf: payload, pos: 0 })
    }

    fn take(&mut self, n: usize) -> AppResult<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(AppError::Checkpoint("truncated payload".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self) -> AppResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> AppResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> AppResult<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    pub fn bytes(&mut self) -> AppResult<&'a [u8]> {
        let n = self.u64()? as usize;
        self.take(n)
    }

    pub fn str(&mut self) -> AppResult<String> {
        let b = self.bytes()?;
        String::from_utf8(b.to_vec())
            .map_err(|_| AppError::Checkpoint("invalid utf8 string".into()))
    }

    pub fn f64s(&mut self) -> AppResult<Vec<f64>> {
        let n = self.u64()? as usize;
        let mut v = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            v.push(self.f64()?);
        }
        Ok(v)
    }

    pub fn f64s2(&mut self) -> AppResult<Vec<Vec<f64>>> {
        let n = self.u64()? as usize;
        let mut v = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            v.push(self.f64s()?);
        }
        Ok(v)
    }

    pub fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

/// Everything persisted at a task boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointState {
    pub config_json: String,
    pub seed: u64,
    pub tasks_done: usize,
    pub hidden: Vec<Vec<f64>>,
    pub heads: Vec<HeadParams>,
    pub omega: Vec<f64>,
    pub eta: f64,
    /// (layer, node, coord, created_task) per masked coordinate.
    pub mask: Vec<(u32, u32, u64, u32)>,
    pub adam_step: u64,
    pub adam_m_hidden: Vec<Vec<f64>>,
    pub adam_v_hidden: Vec<Vec<f64>>,
    pub adam_m_heads: Vec<Vec<f64>>,
    pub adam_v_heads: Vec<Vec<f64>>,
    pub sched_lr: f64,
    pub sched_best: f64,
    pub sched_stale: u32,
    pub matrix: AccuracyMatrix,
    pub capacity: Vec<CapacityRow>,
    pub wallclock: Vec<f64>,
}

impl CheckpointState {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.str(&self.config_json);
        w.u64(self.seed);
        w.u64(self.tasks_done as u64);
        w.f64s2(&self.hidden);
        w.u64(self.heads.len() as u64);
        for h in &self.heads {
            w.u64(h.rows as u64);
            w.u64(h.row_len as u64);
            w.f64s(&h.w);
        }
        w.f64s(&self.omega);
        w.f64(self.eta);
        w.u64(self.mask.len() as u64);
        for &(layer, node, coord, task) in &self.mask {
            w.u32(layer);
            w.u32(node);
            w.u64(coord);
            w.u32(task);
        }
        w.u64(self.adam_step);
        w.f64s2(&self.adam_m_hidden);
        w.f64s2(&self.adam_v_hidden);
        w.f64s2(&self.adam_m_heads);
        w.f64s2(&self.adam_v_heads);
        w.f64(self.sched_lr);
        w.f64(self.sched_best);
        w.u32(self.sched_stale);
        w.u64(self.matrix.tasks() as u64);
        for row in self.matrix.rows() {
            w.f64s(row);
        }
        match &self.matrix.a_star {
            Some(a) => {
                w.u32(1);
                w.f64s(a);
            }
            None => w.u32(0),
        }
        w.u64(self.capacity.len() as u64);
        for c in &self.capacity {
            w.u64(c.task as u64);
            w.f64(c.sparsity);
            w.f64(c.used_capacity);
            w.u64(c.g0_size as u64);
            w.u64(c.frozen_nodes as u64);
            w.u64(c.reg_nodes as u64);
            w.u64(c.reg_scalars as u64);
        }
        w.f64s(&self.wallclock);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> AppResult<Self> {
        let mut r = Reader::open(bytes)?;
        let config_json = r.str()?;
        let seed = r.u64()?;
        let tasks_done = r.u64()? as usize;
        let hidden = r.f64s2()?;
        let n_heads = r.u64()? as usize;
        let mut heads = Vec::with_capacity(n_heads);
        for _ in 0..n_heads {
            let rows = r.u64()? as usize;
            let row_len = r.u64()? as usize;
            let w = r.f64s()?;
            heads.push(HeadParams { rows, row_len, w });
        }
        let omega = r.f64s()?;
        let eta = r.f64()?;
        let n_mask = r.u64()? as usize;
        let mut mask = Vec::with_capacity(n_mask.min(1 << 24));
        for _ in 0..n_mask {
            let layer = r.u32()?;
            let node = r.u32()?;
            let coord = r.u64()?;
            let task = r.u32()?;
            mask.push((layer, node, coord, task));
        }
        let adam_step = r.u64()?;
        let adam_m_hidden = r.f64s2()?;
        let adam_v_hidden = r.f64s2()?;
        let adam_m_heads = r.f64s2()?;
        let adam_v_heads = r.f64s2()?;
        let sched_lr = r.f64()?;
        let sched_best = r.f64()?;
        let sched_stale = r.u32()?;
        let n_rows = r.u64()? as usize;
        let mut rows = Vec::with_capacity(n_rows.min(1 << 16));
        for _ in 0..n_rows {
            rows.push(r.f64s()?);
        }
        let a_star = if r.u32()? == 1 { Some(r.f64s()?) } else { None };
        let matrix = AccuracyMatrix::from_rows(rows, a_star)
            .map_err(|e| AppError::Checkpoint(e.to_string()))?;
        let n_cap = r.u64()? as usize;
        let mut capacity = Vec::with_capacity(n_cap.min(1 << 16));
        for _ in 0..n_cap {
            capacity.push(CapacityRow {
                task: r.u64()? as usize,
                sparsity: r.f64()?,
                used_capacity: r.f64()?,
                g0_size: r.u64()? as usize,
                frozen_nodes: r.u64()? as usize,
                reg_nodes: r.u64()? as usize,
                reg_scalars: r.u64()? as usize,
            });
        }
        let wallclock = r.f64s()?;
        if !r.done() {
            return Err(AppError::Checkpoint("trailing bytes in payload".into()));
        }
        Ok(CheckpointState {
            config_json,
            seed,
            tasks_done,
            hidden,
            heads,
            omega,
            eta,
            mask,
            adam_step,
            adam_m_hidden,
            adam_v_hidden,
            adam_m_heads,
            adam_v_heads,
            sched_lr,
            sched_best,
            sched_stale,
            matrix,
            capacity,
            wallclock,
        })
    }

    pub fn save(&self, path: &Path) -> AppResult<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        fs::write(path, self.encode()).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        Self::decode(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_state() -> CheckpointState {
        let mut matrix = AccuracyMatrix::new();
        matrix.record(0, 0, 0.875).unwrap();
        matrix.record(1, 0, 0.75).unwrap();
        matrix.record(1, 1, 0.9).unwrap();
        CheckpointState {
            config_json: r#"{"name":"t"}"#.into(),
            seed: 42,
            tasks_done: 2,
            hidden: vec![vec![0.5, -0.25, 1e-300], vec![3.0]],
            heads: vec![HeadParams { rows: 2, row_len: 2, w: vec![1.0, 2.0, 3.0, 4.0] }],
            omega: vec![0.0, 0.7],
            eta: 0.9,
            mask: vec![(1, 0, 3, 1), (1, 2, 0, 2)],
            adam_step: 17,
            adam_m_hidden: vec![vec![0.1, 0.2, 0.3], vec![0.4]],
            adam_v_hidden: vec![vec![0.5, 0.6, 0.7], vec![0.8]],
            adam_m_heads: vec![vec![0.0; 4]],
            adam_v_heads: vec![vec![0.0; 4]],
            sched_lr: 1e-3,
            sched_best: f64::INFINITY,
            sched_stale: 3,
            matrix,
            capacity: vec![CapacityRow {
                task: 1,
                sparsity: 0.8,
                used_capacity: 0.0,
                g0_size: 160,
                frozen_nodes: 0,
                reg_nodes: 200,
                reg_scalars: 88_600,
            }],
            wallclock: vec![1.5, 2.5],
        }
    }

    #[test]
    fn encode_decode_encode_is_byte_identical() {
        let state = sample_state();
        let bytes = state.encode();
        let decoded = CheckpointState::decode(&bytes).unwrap();
        assert_eq!(decoded, state);
        assert_eq!(decoded.encode(), bytes);
    }

    #[test]
    fn any_flipped_byte_is_detected() {
        let bytes = sample_state().encode();
        for pos in [0usize, 9, 21, bytes.len() / 2, bytes.len() - 1] {
            let mut bad = bytes.clone();
            bad[pos] ^= 0x40;
            assert!(
                CheckpointState::decode(&bad).is_err(),
                "flip at {pos} went undetected"
            );
        }
    }

    #[test]
    fn version_mismatch_is_an_explicit_migration_error() {
        let mut bytes = sample_state().encode();
        bytes[8..12].copy_from_slice(&99u32.to_le_bytes());
        match CheckpointState::decode(&bytes) {
            Err(AppError::Checkpoint(m)) => assert!(m.contains("migration"), "{m}"),
            other => panic!("expected checkpoint error, got {other:?}"),
        }
    }
}
