//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line. The calibrated experiment (5-task split of a 10-class IDX
//! dataset, MLP 784-100-100, seeds 3/4/5) is built once and shared.
//!
//! Calibrated regression bounds, frozen from the first calibrated run:
//! method-vs-baseline gap >= 10 accuracy points per seed, method stability
//! >= 0.95, baseline stability <= 0.90.

use std::path::{Path, PathBuf};
use std::sync::LazyLock;
use std::time::Instant;

use agscl::checkpoint::CheckpointState;
use agscl::config::ExperimentConfig;
use agscl::idx::{generate_blob_dataset, write_idx};
use agscl::report::RunReport;
use agscl::runner::{checkpoint_path, run_to_completion, Experiment};

use agscl_core::importance::{
    apply_mask, rand_init, zero_init, OmegaRegistry, UnimportantSet, ZeroMask,
};
use agscl_core::layout::{group_l2_norm, GroupLayout, NodeId};
use agscl_core::metrics::reg_param_count;
use agscl_core::nn::{
    cross_entropy, forward, task_loss_and_grad, InputShape, LayerSpec, NetSpec, NetworkParams,
};
use agscl_core::optim::{prox_group_freeze, prox_group_lasso, prox_sweep};
use agscl_core::rng::Rng;

const DATASET_SEED: u64 = 1234;
const RUN_SEEDS: [u64; 3] = [3, 4, 5];

fn work_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("agscl-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("create acceptance work dir");
    dir
}

fn calibrated_config(data_dir: &Path, method: &str, no_pgd: bool) -> ExperimentConfig {
    let json = format!(
        r#"{{
        "name": "calibrated-desk-split",
        "model": {{ "dense": [100, 100] }},
        "data": {{ "kind": "split_idx",
            "train_images": "{d}/train-images.idx",
            "train_labels": "{d}/train-labels.idx",
            "test_images": "{d}/test-images.idx",
            "test_labels": "{d}/test-labels.idx",
            "partition": [[0,1],[2,3],[4,5],[6,7],[8,9]] }},
        "hp": {{ "mu": 40.0, "lambda": 400.0, "rho": 0.3, "epochs": 40 }},
        "method": "{method}",
        "ablation": {{ "no_pgd": {no_pgd} }},
        "seeds": [3, 4, 5],
        "output_dir": "runs"
    }}"#,
        d = data_dir.display(),
    );
    ExperimentConfig::from_json(&json).expect("calibrated config parses")
}

struct Calibrated {
    dir: PathBuf,
    ags: Vec<RunReport>,
    ft: Vec<RunReport>,
    no_pgd: RunReport,
    build_seconds: f64,
}

static CALIBRATED: LazyLock<Calibrated> = LazyLock::new(|| {
    let started = Instant::now();
    let dir = work_dir();
    let data_dir = dir.join("data");
    std::fs::create_dir_all(&data_dir).unwrap();
    let (train, test) = generate_blob_dataset(DATASET_SEED, 10, 700, 200, 28, 28);
    write_idx(&train, &data_dir.join("train-images.idx"), &data_dir.join("train-labels.idx"))
        .unwrap();
    write_idx(&test, &data_dir.join("test-images.idx"), &data_dir.join("test-labels.idx"))
        .unwrap();

    let run = |method: &str, no_pgd: bool, seed: u64| -> RunReport {
        let cfg = calibrated_config(&data_dir, method, no_pgd);
        let tag = if no_pgd { "no_pgd".to_string() } else { method.to_string() };
        let out = dir.join(&tag).join(format!("seed_{seed}"));
        let mut ex = Experiment::new(cfg, seed).unwrap();
        run_to_completion(&mut ex, &out).unwrap()
    };

    let ags: Vec<RunReport> = RUN_SEEDS.iter().map(|&s| run("agscl", false, s)).collect();
    let ft: Vec<RunReport> = RUN_SEEDS.iter().map(|&s| run("finetune", false, s)).collect();
    let no_pgd = run("agscl", true, RUN_SEEDS[0]);
    Calibrated { dir, ags, ft, no_pgd, build_seconds: started.elapsed().as_secs_f64() }
});

// ---------------------------------------------------------------------------
// Criterion 1: closed-form proximal maps match a brute-force minimizer.
// ---------------------------------------------------------------------------

fn prox_oracle(v: &[f64], theta0: &[f64], c: f64, alpha: f64) -> Vec<f64> {
    let d: Vec<f64> = v.iter().zip(theta0).map(|(a, b)| a - b).collect();
    let dist = group_l2_norm(&d);
    if dist == 0.0 {
        return theta0.to_vec();
    }
    let obj = |g: f64| c * g * dist + (1.0 - g) * (1.0 - g) * dist * dist / (2.0 * alpha);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if obj(m1) <= obj(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let g = 0.5 * (lo + hi);
    theta0.iter().zip(v).map(|(t, x)| t + g * (x - t)).collect()
}

#[test]
fn criterion_01_prox_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = Rng::from_seed(0xC1);
    for _ in 0..100 {
        let dim = 1 + rng.below(50);
        let c = (5.0 * rng.next_f64()).max(1e-3);
        let alpha = rng.next_f64().max(1e-3);
        let theta0: Vec<f64> = (0..dim).map(|_| 2.0 * rng.normal()).collect();
        let v: Vec<f64> = (0..dim).map(|_| 2.0 * rng.normal()).collect();

        let want = prox_oracle(&v, &theta0, c, alpha);
        let mut got = v.clone();
        prox_group_freeze(&mut got, &theta0, alpha * c);
        for (w, g) in want.iter().zip(&got) {
            assert!((w - g).abs() <= 1e-6, "freeze prox off by {}", (w - g).abs());
        }

        let zero = vec![0.0; dim];
        let want = prox_oracle(&v, &zero, c, alpha);
        let mut got = v.clone();
        prox_group_lasso(&mut got, alpha * c);
        for (w, g) in want.iter().zip(&got) {
            assert!((w - g).abs() <= 1e-6, "lasso prox off by {}", (w - g).abs());
        }
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 5.0, "criterion 1 took {secs:.1}s");
    println!("criterion 1 PASS: prox closed forms match brute force on 100 instances ({secs:.2}s)");
}

// ---------------------------------------------------------------------------
// Criterion 2: exact sparsification/freezing in a full sweep, zero tolerance.
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_sweep_exactness_is_bitwise() {
    let spec = NetSpec::new(
        InputShape::Flat(12),
        vec![LayerSpec::dense(12, 30), LayerSpec::dense(30, 20)],
        vec![4],
    )
    .unwrap();
    let layout = GroupLayout::build(&spec);
    let mut params = NetworkParams::init(&spec, &mut Rng::from_seed(2));
    let prev = NetworkParams::init(&spec, &mut Rng::from_seed(3));
    let mut rng = Rng::from_seed(4);
    let total = layout.total_nodes();

    // Random split into lasso and freeze populations, random importances.
    let members: Vec<bool> = (0..total).map(|_| rng.next_f64() < 0.5).collect();
    let g0 = UnimportantSet::from_members(members);
    let omega: Vec<f64> = (0..total)
        .map(|i| if g0.contains_flat(i) { 0.0 } else { 0.2 + rng.next_f64() })
        .collect();
    // Put some groups on each side of their thresholds.
    for node in layout.nodes() {
        let (l, n) = (node.layer as usize, node.node as usize);
        let flat = layout.flat_index(node);
        if g0.contains_flat(flat) {
            if rng.next_f64() < 0.5 {
                // Shrink below the lasso threshold.
                let norm = group_l2_norm(params.group(l, n));
                let scale = 0.5 * 0.04 / norm.max(1e-12);
                for x in params.group_mut(l, n) {
                    *x *= scale;
                }
            }
        } else if rng.next_f64() < 0.5 {
            // Move close to the anchor, below the freeze threshold.
            let anchor: Vec<f64> = prev.group(l, n).to_vec();
            for (x, a) in params.group_mut(l, n).iter_mut().zip(&anchor) {
                *x = a + 1e-6 * (*x - a);
            }
        }
    }

    let (mu, lambda, lr) = (40.0, 400.0, 1e-3);
    let before = params.clone();
    prox_sweep(&mut params, &layout, &omega, &g0, &prev, mu, lambda, lr);

    let mut zeroed = 0;
    let mut frozen = 0;
    for node in layout.nodes() {
        let (l, n) = (node.layer as usize, node.node as usize);
        let flat = layout.flat_index(node);
        let out = params.group(l, n);
        if g0.contains_flat(flat) {
            let pre_norm = group_l2_norm(before.group(l, n));
            if pre_norm <= lr * mu {
                zeroed += 1;
                assert!(
                    out.iter().all(|x| x.to_bits() == 0.0f64.to_bits()),
                    "group under threshold is not the bitwise zero vector"
                );
            } else {
                // Strictly shrunk, never "almost zero".
                let post = group_l2_norm(out);
                assert!(post > 0.0 && post < pre_norm);
            }
        } else {
            let anchor = prev.group(l, n);
            let drift: Vec<f64> =
                before.group(l, n).iter().zip(anchor).map(|(x, a)| x - a).collect();
            let thr = lr * lambda * omega[flat];
            if group_l2_norm(&drift) <= thr {
                frozen += 1;
                for (x, a) in out.iter().zip(anchor) {
                    assert_eq!(x.to_bits(), a.to_bits(), "frozen group is not bitwise its anchor");
                }
            } else {
                let post: Vec<f64> = out.iter().zip(anchor).map(|(x, a)| x - a).collect();
                let post_norm = group_l2_norm(&post);
                assert!(post_norm > 0.0 && post_norm < group_l2_norm(&drift));
            }
        }
    }
    assert!(zeroed >= 3, "fixture must exercise the zero branch, got {zeroed}");
    assert!(frozen >= 3, "fixture must exercise the freeze branch, got {frozen}");
    println!(
        "criterion 2 PASS: sweep produced {zeroed} bitwise-zero and {frozen} bitwise-frozen groups"
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: gradients vs central finite differences.
// ---------------------------------------------------------------------------

fn finite_diff_worst_error(spec: &NetSpec, x: &[f64], y: &[usize]) -> f64 {
    let mut p = NetworkParams::init(spec, &mut Rng::from_seed(17));
    let (_, grads) = task_loss_and_grad(&p, x, y, 0).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    let loss_at = |p: &NetworkParams| {
        let t = forward(p, x, 0).unwrap();
        cross_entropy(&t, y).unwrap()
    };
    for l in 0..p.hidden.len() {
        for i in 0..p.hidden[l].len() {
            let orig = p.hidden[l][i];
            p.hidden[l][i] = orig + h;
            let up = loss_at(&p);
            p.hidden[l][i] = orig - h;
            let dn = loss_at(&p);
            p.hidden[l][i] = orig;
            let fd = (up - dn) / (2.0 * h);
            let an = grads.hidden[l][i];
            worst = worst.max((fd - an).abs() / an.abs().max(fd.abs()).max(1e-3));
        }
    }
    for hd in 0..p.heads.len() {
        for i in 0..p.heads[hd].w.len() {
            let orig = p.heads[hd].w[i];
            p.heads[hd].w[i] = orig + h;
            let up = loss_at(&p);
            p.heads[hd].w[i] = orig - h;
            let dn = loss_at(&p);
            p.heads[hd].w[i] = orig;
            let fd = (up - dn) / (2.0 * h);
            let an = grads.heads[hd][i];
            worst = worst.max((fd - an).abs() / an.abs().max(fd.abs()).max(1e-3));
        }
    }
    worst
}

#[test]
fn criterion_03_gradients_match_finite_differences() {
    let started = Instant::now();
    let mut rng = Rng::from_seed(0xC3);

    let mlp = NetSpec::new(
        InputShape::Flat(10),
        vec![LayerSpec::dense(10, 16), LayerSpec::dense(16, 12)],
        vec![4],
    )
    .unwrap();
    let x: Vec<f64> = (0..40).map(|_| rng.normal()).collect();
    let worst_mlp = finite_diff_worst_error(&mlp, &x, &[0, 1, 2, 3]);
    assert!(worst_mlp < 1e-4, "MLP worst relative error {worst_mlp}");

    let conv = NetSpec::new(
        InputShape::Image { channels: 1, height: 8, width: 8 },
        vec![LayerSpec::conv2d(1, 4, 3, 3, 1, 1), LayerSpec::dense(256, 8)],
        vec![3],
    )
    .unwrap();
    let x: Vec<f64> = (0..128).map(|_| rng.normal()).collect();
    let worst_conv = finite_diff_worst_error(&conv, &x, &[2, 0]);
    assert!(worst_conv < 1e-4, "conv worst relative error {worst_conv}");

    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 30.0, "criterion 3 took {secs:.1}s");
    println!(
        "criterion 3 PASS: worst relative gradient error {:.2e} (mlp), {:.2e} (conv) ({secs:.1}s)",
        worst_mlp, worst_conv
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: forgetting gap on the calibrated 5-task split.
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_forgetting_gap() {
    let cal = &*CALIBRATED;
    assert!(
        cal.build_seconds < 900.0,
        "calibrated runs took {:.0}s, budget is 15 min",
        cal.build_seconds
    );
    for (i, seed) in RUN_SEEDS.iter().enumerate() {
        let ags = &cal.ags[i];
        let ft = &cal.ft[i];
        let gap = ags.final_average_accuracy - ft.final_average_accuracy;
        let s_ags = ags.stability.expect("stability defined");
        let s_ft = ft.stability.expect("stability defined");
        assert!(
            gap >= 0.10,
            "seed {seed}: gap {gap:.3} below the 10-point bound ({} vs {})",
            ags.final_average_accuracy,
            ft.final_average_accuracy
        );
        assert!(s_ags >= 0.95, "seed {seed}: method stability {s_ags:.3} < 0.95");
        assert!(s_ft <= 0.90, "seed {seed}: baseline stability {s_ft:.3} > 0.90");
        println!(
            "criterion 4 [seed {seed}]: gap {:+.3} (method {:.3} vs baseline {:.3}), S {:.3} vs {:.3}",
            gap, ags.final_average_accuracy, ft.final_average_accuracy, s_ags, s_ft
        );
    }
    println!(
        "criterion 4 PASS: gap >= 10 points, method S >= 0.95, baseline S <= 0.90 on all seeds \
         ({:.0}s for all calibrated runs)",
        cal.build_seconds
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: sparsity/capacity dynamics.
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_sparsity_and_capacity_dynamics() {
    let cal = &*CALIBRATED;
    for (i, seed) in RUN_SEEDS.iter().enumerate() {
        let rows = &cal.ags[i].capacity;
        assert_eq!(rows.len(), 5);
        for w in rows.windows(2) {
            assert!(
                w[1].sparsity <= w[0].sparsity,
                "seed {seed}: sparsity increased {} -> {}",
                w[0].sparsity,
                w[1].sparsity
            );
        }
        for row in rows.iter().filter(|r| r.task >= 2) {
            assert!(
                row.used_capacity > 0.0,
                "seed {seed}: used capacity zero at task {}",
                row.task
            );
        }
    }
    println!("criterion 5 PASS: sparsity non-increasing, used capacity > 0 from task 2 on");
}

// ---------------------------------------------------------------------------
// Criterion 6: importance-ordering of pruning curves.
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_aopc_ordering() {
    let cal = &*CALIBRATED;
    for (i, seed) in RUN_SEEDS.iter().enumerate() {
        let aopc = &cal.ags[i].aopc;
        let area = |mode: &str| {
            aopc.iter().find(|s| s.mode == mode).map(|s| s.area).expect("aopc mode present")
        };
        let (hi, rnd, lo) = (area("highest"), area("random"), area("lowest"));
        assert!(
            hi >= rnd && rnd >= lo,
            "seed {seed}: expected highest >= random >= lowest, got {hi:.4}, {rnd:.4}, {lo:.4}"
        );
        println!("criterion 6 [seed {seed}]: drop areas {hi:.3} >= {rnd:.3} >= {lo:.3}");
    }
    println!("criterion 6 PASS: pruning high-importance nodes hurts most on all seeds");
}

// ---------------------------------------------------------------------------
// Criterion 7: the no-proximal-update ablation underperforms.
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_no_pgd_ablation_is_worse() {
    let cal = &*CALIBRATED;
    let pgd = cal.ags[0].final_average_accuracy;
    let ablated = cal.no_pgd.final_average_accuracy;
    assert!(
        ablated < pgd,
        "no-PGD run ({ablated:.3}) should be strictly below the PGD run ({pgd:.3})"
    );
    println!("criterion 7 PASS: no-PGD {ablated:.3} < PGD {pgd:.3} at identical budget");
}

// ---------------------------------------------------------------------------
// Criterion 8: regularization-memory footprint.
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_memory_footprint() {
    let cal = &*CALIBRATED;
    let spec = NetSpec::new(
        InputShape::Flat(784),
        vec![LayerSpec::dense(784, 100), LayerSpec::dense(100, 100)],
        vec![2; 5],
    )
    .unwrap();
    let layout = GroupLayout::build(&spec);
    let (nodes, scalars) = reg_param_count(&layout);
    assert_eq!(nodes, 200);
    assert_eq!(scalars, 88_600);
    let ratio = nodes as f64 / scalars as f64;
    assert!(ratio < 1.0 / 400.0, "node/weight ratio {ratio} not under 1/400");

    // The stored importance registry in a checkpoint has exactly one entry
    // per node.
    let ckpt = checkpoint_path(&cal.dir.join("agscl").join("seed_3"), 5);
    let state = CheckpointState::load(&ckpt).unwrap();
    assert_eq!(state.omega.len(), nodes);
    println!(
        "criterion 8 PASS: {nodes} node values vs {scalars} weights (ratio {ratio:.5}), \
         checkpoint stores exactly {nodes} importance entries"
    );
}

// ---------------------------------------------------------------------------
// Criterion 9: mask permanence, nullified transfer, importance persistence,
// and re-init ordering on randomized fixtures.
// ---------------------------------------------------------------------------

fn random_small_net(rng: &mut Rng) -> (NetSpec, GroupLayout, NetworkParams) {
    let d0 = 3 + rng.below(5);
    let d1 = 4 + rng.below(6);
    let d2 = 3 + rng.below(5);
    let heads = 2 + rng.below(2);
    let spec = NetSpec::new(
        InputShape::Flat(d0),
        vec![LayerSpec::dense(d0, d1), LayerSpec::dense(d1, d2)],
        vec![2; heads],
    )
    .unwrap();
    let layout = GroupLayout::build(&spec);
    let params = NetworkParams::init(&spec, &mut Rng::from_seed(rng.next_u64()));
    (spec, layout, params)
}

#[test]
fn criterion_09_mask_and_importance_property_suite() {
    let started = Instant::now();
    let mut rng = Rng::from_seed(0xC9);

    // Mask survival + nullified transfer, randomized.
    for case in 0..250 {
        let (_, layout, mut params) = random_small_net(&mut rng);
        let total = layout.total_nodes();
        let members: Vec<bool> = (0..total).map(|_| rng.next_f64() < 0.4).collect();
        let g0 = UnimportantSet::from_members(members);
        let mut mask = ZeroMask::new();
        zero_init(&mut params, &layout, &g0, &mut mask, 1);
        let survivors: Vec<(NodeId, usize)> = mask
            .iter()
            .filter(|(upper, _, _)| !g0.contains(&layout, *upper))
            .map(|(u, c, _)| (u, c))
            .collect();
        // Two later "tasks" of random re-draws; important uppers never redraw.
        for t in 0..2u64 {
            let later: Vec<bool> = (0..total)
                .map(|i| g0.contains_flat(i) && rng.next_f64() < 0.7)
                .collect();
            let later = UnimportantSet::from_members(later);
            if !later.is_empty() {
                rand_init(
                    &mut params,
                    &layout,
                    &later,
                    &mut mask,
                    0.8,
                    &mut Rng::from_seed(case as u64 * 31 + t),
                )
                .unwrap();
            }
            apply_mask(&mut params, &mask);
        }
        for &(upper, coord) in &survivors {
            assert!(mask.contains(upper, coord), "case {case}: mask entry vanished");
            assert_eq!(
                params.group(upper.layer as usize, upper.node as usize)[coord],
                0.0,
                "case {case}: masked coordinate drifted"
            );
        }
    }

    // Nullified transfer: fully masked node cannot influence anything above.
    for case in 0..250 {
        let (_, layout, mut params) = random_small_net(&mut rng);
        let victim = NodeId::new(0, rng.below(layout.layer_nodes(0)));
        let mut members = vec![false; layout.total_nodes()];
        members[layout.flat_index(victim)] = true;
        let g0 = UnimportantSet::from_members(members);
        let mut mask = ZeroMask::new();
        zero_init(&mut params, &layout, &g0, &mut mask, 1);
        let dim = params.input_dim();
        let x: Vec<f64> = (0..dim * 3).map(|_| rng.normal()).collect();
        let before = forward(&params, &x, 0).unwrap();
        for w in params.group_mut(victim.layer as usize, victim.node as usize) {
            *w = 10.0 * rng.normal();
        }
        let after = forward(&params, &x, 0).unwrap();
        assert_eq!(before.hidden[1], after.hidden[1], "case {case}: upper activations moved");
        assert_eq!(before.logits, after.logits, "case {case}: logits moved");
    }

    // Importance positivity persistence and monotone unimportant-set size.
    for case in 0..250 {
        let n = 1 + rng.below(30);
        let mut omega = OmegaRegistry::new(n, 0.9).unwrap();
        let mut prev_g0 = omega.derive_g0().len();
        let mut ever_positive = vec![false; n];
        for _ in 0..8 {
            let means: Vec<f64> = (0..n)
                .map(|_| if rng.next_f64() < 0.4 { 0.0 } else { rng.next_f64() })
                .collect();
            omega.update(&means).unwrap();
            for (i, &m) in means.iter().enumerate() {
                if m > 0.0 {
                    ever_positive[i] = true;
                }
            }
            for (i, &was_positive) in ever_positive.iter().enumerate() {
                if was_positive {
                    assert!(omega.value(i) > 0.0, "case {case}: importance fell back to zero");
                }
            }
            let g0 = omega.derive_g0().len();
            assert!(g0 <= prev_g0, "case {case}: unimportant set grew");
            prev_g0 = g0;
        }
    }

    // Re-init ordering: zero-then-random differs from random-then-zero
    // whenever unimportant nodes are stacked in adjacent layers.
    for case in 0..250 {
        let (_, layout, params) = random_small_net(&mut rng);
        let mut members = vec![false; layout.total_nodes()];
        members[layout.flat_index(NodeId::new(0, rng.below(layout.layer_nodes(0))))] = true;
        members[layout.flat_index(NodeId::new(1, rng.below(layout.layer_nodes(1))))] = true;
        let g0 = UnimportantSet::from_members(members);
        let seed = 7000 + case as u64;
        let run = |zero_first: bool| {
            let mut p = params.clone();
            let mut mask = ZeroMask::new();
            let mut r = Rng::from_seed(seed);
            if zero_first {
                zero_init(&mut p, &layout, &g0, &mut mask, 1);
                rand_init(&mut p, &layout, &g0, &mut mask, 1.0, &mut r).unwrap();
            } else {
                rand_init(&mut p, &layout, &g0, &mut mask, 1.0, &mut r).unwrap();
                zero_init(&mut p, &layout, &g0, &mut mask, 1);
            }
            (p, mask.len())
        };
        let (mandated, mandated_masks) = run(true);
        let (swapped, swapped_masks) = run(false);
        assert!(
            mandated != swapped || mandated_masks != swapped_masks,
            "case {case}: order made no difference on a stacked fixture"
        );
    }

    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 60.0, "criterion 9 took {secs:.1}s");
    println!("criterion 9 PASS: 1000 randomized property cases ({secs:.1}s)");
}

// ---------------------------------------------------------------------------
// Criterion 10: determinism and checkpoint-resume equivalence.
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_determinism_and_resume() {
    let cal = &*CALIBRATED;
    let data_dir = cal.dir.join("data");
    let cfg = calibrated_config(&data_dir, "agscl", false);
    let seed = RUN_SEEDS[0];

    // Identical rerun of the calibrated run: summary.json must match byte
    // for byte (the original lives in cal.dir/agscl/seed_3).
    let rerun_dir = cal.dir.join("rerun").join(format!("seed_{seed}"));
    let mut rerun = Experiment::new(cfg.clone(), seed).unwrap();
    run_to_completion(&mut rerun, &rerun_dir).unwrap();
    let original = std::fs::read(cal.dir.join("agscl").join("seed_3").join("summary.json")).unwrap();
    let repeated = std::fs::read(rerun_dir.join("summary.json")).unwrap();
    assert_eq!(original, repeated, "summary.json differs between identical runs");

    // Resume from every task boundary of the calibrated run.
    let source = cal.dir.join("agscl").join("seed_3");
    for boundary in 1..=4usize {
        let ckpt = checkpoint_path(&source, boundary);
        let state = CheckpointState::load(&ckpt).unwrap();
        let mut resumed = Experiment::from_checkpoint(state).unwrap();
        assert_eq!(resumed.tasks_done, boundary);
        let out = cal.dir.join(format!("resume_{boundary}")).join(format!("seed_{seed}"));
        run_to_completion(&mut resumed, &out).unwrap();
        let resumed_summary = std::fs::read(out.join("summary.json")).unwrap();
        assert_eq!(
            original, resumed_summary,
            "resume from boundary {boundary} diverged from the uninterrupted run"
        );
    }
    println!("criterion 10 PASS: bitwise-identical rerun and resume from all 4 boundaries");
}
