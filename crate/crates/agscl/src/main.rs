//! CLI for continual-learning experiments.
//!
//! Verbs:
//!   run <config.json> [--out DIR]          run every configured seed
//!   resume <checkpoint> [--out DIR]        continue a run from a boundary
//!   aopc <checkpoint> [--out DIR] [--fractions 0,0.1,...]
//!                                          pruning curves at a snapshot
//!   report <checkpoint> [--out DIR]        re-emit result files
//!   gen-data <dir> [--seed N] [--classes N] [--train-per-class N]
//!            [--test-per-class N] [--side N]
//!                                          write a synthetic IDX dataset
//!
//! `AGSCL_OUTPUT_ROOT` prefixes relative output directories.
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric abort.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agscl::checkpoint::CheckpointState;
use agscl::config::ExperimentConfig;
use agscl::error::{io_err, AppError, AppResult};
use agscl::idx::{generate_blob_dataset, write_idx};
use agscl::report::emit_results;
use agscl::runner::{resolve_out_dir, run_to_completion, seed_dir, Experiment};

struct Args {
    positional: Vec<String>,
    out: Option<PathBuf>,
    fractions: Option<Vec<f64>>,
    seed: u64,
    classes: usize,
    train_per_class: usize,
    test_per_class: usize,
    side: usize,
}

fn parse_args(mut argv: std::env::Args) -> AppResult<(String, Args)> {
    let _bin = argv.next();
    let verb = argv
        .next()
        .ok_or_else(|| AppError::Cli("missing verb; try run/resume/aopc/report/gen-data".into()))?;
    let mut args = Args {
        positional: Vec::new(),
        out: None,
        fractions: None,
        seed: 1,
        classes: 10,
        train_per_class: 700,
        test_per_class: 200,
        side: 28,
    };
    let mut rest: Vec<String> = argv.collect();
    rest.reverse();
    while let Some(a) = rest.pop() {
        let mut take = |name: &str| -> AppResult<String> {
            rest.pop().ok_or_else(|| AppError::Cli(format!("{name} needs a value")))
        };
        match a.as_str() {
            "--out" => args.out = Some(PathBuf::from(take("--out")?)),
            "--fractions" => {
                let spec = take("--fractions")?;
                let fr: Result<Vec<f64>, _> = spec.split(',').map(str::parse::<f64>).collect();
                args.fractions =
                    Some(fr.map_err(|e| AppError::Cli(format!("bad fraction list: {e}")))?);
            }
            "--seed" => {
                args.seed = take("--seed")?
                    .parse()
                    .map_err(|e| AppError::Cli(format!("bad seed: {e}")))?
            }
            "--classes" => {
                args.classes = take("--classes")?
                    .parse()
                    .map_err(|e| AppError::Cli(format!("bad class count: {e}")))?
            }
            "--train-per-class" => {
                args.train_per_class = take("--train-per-class")?
                    .parse()
                    .map_err(|e| AppError::Cli(format!("bad count: {e}")))?
            }
            "--test-per-class" => {
                args.test_per_class = take("--test-per-class")?
                    .parse()
                    .map_err(|e| AppError::Cli(format!("bad count: {e}")))?
            }
            "--side" => {
                args.side = take("--side")?
                    .parse()
                    .map_err(|e| AppError::Cli(format!("bad image side: {e}")))?
            }
            flag if flag.starts_with("--") => {
                return Err(AppError::Cli(format!("unknown flag {flag}")));
            }
            _ => args.positional.push(a),
        }
    }
    Ok((verb, args))
}

fn cmd_run(args: &Args) -> AppResult<()> {
    let cfg_path = args
        .positional
        .first()
        .ok_or_else(|| AppError::Cli("run needs a config path".into()))?;
    let cfg = ExperimentConfig::from_path(Path::new(cfg_path))?;
    let base = resolve_out_dir(&cfg.output_dir, args.out.as_deref());
    for &seed in &cfg.seeds {
        let dir = seed_dir(&base, seed);
        let mut ex = Experiment::new(cfg.clone(), seed)?;
        let report = run_to_completion(&mut ex, &dir)?;
        println!(
            "seed {seed}: final average accuracy {:.4}, stability {}, results in {}",
            report.final_average_accuracy,
            report
                .stability
                .map(|s| format!("{s:.4}"))
                .unwrap_or_else(|| "n/a".into()),
            dir.display()
        );
    }
    Ok(())
}

fn load_experiment(args: &Args, verb: &str) -> AppResult<(Experiment, PathBuf)> {
    let ckpt_path = args
        .positional
        .first()
        .ok_or_else(|| AppError::Cli(format!("{verb} needs a checkpoint path")))?;
    let ckpt_path = Path::new(ckpt_path);
    let state = CheckpointState::load(ckpt_path)?;
    let ex = Experiment::from_checkpoint(state)?;
    // Default output: the seed directory the checkpoint lives under
    // (…/seed_N/checkpoints/task_NN.ckpt).
    let default_dir = ckpt_path
        .parent()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let dir = args.out.clone().unwrap_or(default_dir);
    Ok((ex, dir))
}

fn cmd_resume(args: &Args) -> AppResult<()> {
    let (mut ex, dir) = load_experiment(args, "resume")?;
    let report = run_to_completion(&mut ex, &dir)?;
    println!(
        "seed {}: resumed through task {}, final average accuracy {:.4}, results in {}",
        report.seed,
        ex.tasks_done,
        report.final_average_accuracy,
        dir.display()
    );
    Ok(())
}

fn cmd_aopc(args: &Args) -> AppResult<()> {
    let (mut ex, dir) = load_experiment(args, "aopc")?;
    if let Some(fr) = &args.fractions {
        ex.cfg.aopc_fractions = fr.clone();
    }
    let summaries = ex.compute_aopc()?;
    let mut text = String::from("mode,fraction,accuracy\n");
    for s in &summaries {
        for (f, a) in s.fractions.iter().zip(&s.mean_accuracy) {
            text.push_str(&format!("{},{},{}\n", s.mode, f, a));
        }
    }
    let path = dir.join(format!("aopc_task_{:02}.csv", ex.tasks_done));
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    std::fs::write(&path, text).map_err(io_err(&path))?;
    for s in &summaries {
        println!("{}: drop area {:.4}", s.mode, s.area);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_report(args: &Args) -> AppResult<()> {
    let (ex, dir) = load_experiment(args, "report")?;
    let report = ex.finalize()?;
    emit_results(&report, &dir)?;
    println!("re-emitted results for seed {} into {}", report.seed, dir.display());
    Ok(())
}

fn cmd_gen_data(args: &Args) -> AppResult<()> {
    let dir = args
        .positional
        .first()
        .ok_or_else(|| AppError::Cli("gen-data needs a target directory".into()))?;
    let dir = Path::new(dir);
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let (train, test) = generate_blob_dataset(
        args.seed,
        args.classes,
        args.train_per_class,
        args.test_per_class,
        args.side,
        args.side,
    );
    write_idx(&train, &dir.join("train-images.idx"), &dir.join("train-labels.idx"))?;
    write_idx(&test, &dir.join("test-images.idx"), &dir.join("test-labels.idx"))?;
    println!(
        "wrote {} train and {} test images ({}x{}, {} classes) to {}",
        train.n,
        test.n,
        args.side,
        args.side,
        args.classes,
        dir.display()
    );
    Ok(())
}

fn dispatch() -> AppResult<()> {
    let (verb, args) = parse_args(std::env::args())?;
    match verb.as_str() {
        "run" => cmd_run(&args),
        "resume" => cmd_resume(&args),
        "aopc" => cmd_aopc(&args),
        "report" => cmd_report(&args),
        "gen-data" => cmd_gen_data(&args),
        other => Err(AppError::Cli(format!("unknown verb {other}"))),
    }
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
