//! Run results and their on-disk forms: three CSV files plus `summary.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use agscl_core::metrics::AccuracyMatrix;

use crate::config::ExperimentConfig;
use crate::error::{io_err, AppResult};

/// Per-task capacity snapshot (taken right after training, before the
/// re-initialization steps). `task` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub task: usize,
    pub sparsity: f64,
    pub used_capacity: f64,
    pub g0_size: usize,
    pub frozen_nodes: usize,
    pub reg_nodes: usize,
    pub reg_scalars: usize,
}

/// One pruning-order curve, averaged over all task test sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AopcSummary {
    pub mode: String,
    pub fractions: Vec<f64>,
    pub mean_accuracy: Vec<f64>,
    /// Trapezoid area of the accuracy-drop curve.
    pub area: f64,
}

/// Everything a finished run reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub matrix: AccuracyMatrix,
    pub average_accuracy_per_task: Vec<f64>,
    pub final_average_accuracy: f64,
    pub plasticity: Option<f64>,
    pub stability: Option<f64>,
    pub capacity: Vec<CapacityRow>,
    pub aopc: Vec<AopcSummary>,
    pub reg_nodes: usize,
    pub reg_scalars: usize,
    /// Diagonal accuracies when this run is the fine-tuning reference.
    pub a_star: Option<Vec<f64>>,
    /// Seconds per task; excluded from summary.json to keep it reproducible.
    pub wallclock_per_task: Vec<f64>,
    pub config: ExperimentConfig,
}

/// The deterministic JSON summary (no timing data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub final_average_accuracy: f64,
    pub average_accuracy_per_task: Vec<f64>,
    pub plasticity: Option<f64>,
    pub stability: Option<f64>,
    pub a_star: Option<Vec<f64>>,
    pub reg_nodes: usize,
    pub reg_scalars: usize,
    pub config: ExperimentConfig,
}

impl RunReport {
    pub fn summary(&self) -> Summary {
        Summary {
            seed: self.seed,
            final_average_accuracy: self.final_average_accuracy,
            average_accuracy_per_task: self.average_accuracy_per_task.clone(),
            plasticity: self.plasticity,
            stability: self.stability,
            a_star: self.a_star.clone(),
            reg_nodes: self.reg_nodes,
            reg_scalars: self.reg_scalars,
            config: self.config.clone(),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> AppResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

/// Write `accuracy_matrix.csv`, `capacity.csv`, `aopc.csv`, `summary.json`,
/// and `resolved_config.json` into `dir`. Task numbers in the CSVs are
/// 1-based.
pub fn emit_results(report: &RunReport, dir: &Path) -> AppResult<()> {
    let mut acc = String::from("after_task,task,accuracy\n");
    for (i, row) in report.matrix.rows().iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            acc.push_str(&format!("{},{},{}\n", i + 1, j + 1, v));
        }
    }
    write_file(&dir.join("accuracy_matrix.csv"), &acc)?;

    let mut cap = String::from("task,sparsity,used_capacity,g0_size,reg_param_count\n");
    for c in &report.capacity {
        cap.push_str(&format!(
            "{},{},{},{},{}\n",
            c.task, c.sparsity, c.used_capacity, c.g0_size, c.reg_nodes
        ));
    }
    write_file(&dir.join("capacity.csv"), &cap)?;

    let mut aopc = String::from("mode,fraction,accuracy\n");
    for s in &report.aopc {
        for (f, a) in s.fractions.iter().zip(&s.mean_accuracy) {
            aopc.push_str(&format!("{},{},{}\n", s.mode, f, a));
        }
    }
    write_file(&dir.join("aopc.csv"), &aopc)?;

    let summary = serde_json::to_string_pretty(&report.summary())
        .expect("summary serialization cannot fail");
    write_file(&dir.join("summary.json"), &summary)?;

    let cfg = serde_json::to_string_pretty(&report.config)
        .expect("config serialization cannot fail");
    write_file(&dir.join("resolved_config.json"), &cfg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    fn small_report() -> RunReport {
        let cfg = ExperimentConfig::from_json(
            r#"{ "model": { "dense": [4] },
                 "data": { "kind": "synthetic", "tasks": 5, "classes_per_task": 2,
                           "dim": 4, "samples_per_class": 20, "separation": 4.0 } }"#,
        )
        .unwrap();
        let mut matrix = AccuracyMatrix::new();
        for i in 0..5 {
            for j in 0..=i {
                matrix.record(i, j, 0.5 + 0.01 * (i * 5 + j) as f64).unwrap();
            }
        }
        RunReport {
            seed: 1,
            average_accuracy_per_task: (0..5).map(|i| matrix.average_accuracy(i).unwrap()).collect(),
            final_average_accuracy: matrix.average_accuracy(4).unwrap(),
            plasticity: None,
            stability: matrix.stability(),
            matrix,
            capacity: (1..=5)
                .map(|t| CapacityRow {
                    task: t,
                    sparsity: 1.0 - t as f64 * 0.1,
                    used_capacity: if t >= 2 { 0.2 } else { 0.0 },
                    g0_size: 100 - t * 10,
                    frozen_nodes: t,
                    reg_nodes: 100,
                    reg_scalars: 2000,
                })
                .collect(),
            aopc: vec![AopcSummary {
                mode: "highest".into(),
                fractions: vec![0.0, 0.5, 1.0],
                mean_accuracy: vec![0.9, 0.6, 0.5],
                area: 0.2,
            }],
            reg_nodes: 100,
            reg_scalars: 2000,
            a_star: None,
            wallclock_per_task: vec![0.1; 5],
            config: cfg,
        }
    }

    #[test]
    fn accuracy_csv_has_the_full_lower_triangle() {
        let dir = std::env::temp_dir().join("agscl-report-test");
        emit_results(&small_report(), &dir).unwrap();
        let text = fs::read_to_string(dir.join("accuracy_matrix.csv")).unwrap();
        // Header plus 15 data rows for 5 tasks.
        assert_eq!(text.lines().count(), 16);
        assert!(text.starts_with("after_task,task,accuracy"));
    }

    #[test]
    fn summary_json_parses_and_echoes_the_config() {
        let dir = std::env::temp_dir().join("agscl-report-test2");
        let report = small_report();
        emit_results(&report, &dir).unwrap();
        let text = fs::read_to_string(dir.join("summary.json")).unwrap();
        let parsed: Summary = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.config, report.config);
        assert_eq!(parsed.seed, 1);
    }

    #[test]
    fn capacity_csv_sparsity_is_non_increasing() {
        let dir = std::env::temp_dir().join("agscl-report-test3");
        emit_results(&small_report(), &dir).unwrap();
        let text = fs::read_to_string(dir.join("capacity.csv")).unwrap();
        let sparsities: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert!(sparsities.windows(2).all(|w| w[1] <= w[0]));
    }
}
