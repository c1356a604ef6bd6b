//! Subcommand implementations and the exit-code contract.
//!
//! Exit codes: 0 success, 1 runtime failure (divergence), 2 usage or
//! config error. Individual benchmark run failures become failed table
//! cells; the benchmark exits nonzero only when every run fails.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use gmpl_core::data::{file_checksum, load_dataset, split_dataset, DatasetSplit};
use gmpl_core::lfa::LatentFactors;
use gmpl_core::trainer::{
    estimate_missing, grid_search_sgd, train_gmpl, train_pso, train_sgd, Algorithm, TrainConfig,
    TrainReport,
};
use gmpl_core::Error;

use crate::config::{apply_opts, TrainOpts};
use crate::{BenchmarkArgs, EvaluateArgs, Partition, SplitArgs, TrainArgs};

pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> CliError {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> CliError {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        let code = match e {
            Error::Diverged { .. } | Error::AllParticlesDiverged { .. } => 1,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<String> for CliError {
    fn from(message: String) -> CliError {
        CliError::usage(message)
    }
}

/// Everything needed to reproduce a run's output bytes (timing aside).
#[derive(Debug, Serialize)]
struct RunManifest {
    config: TrainConfig,
    dataset: DatasetFingerprint,
    seeds: Vec<u64>,
    outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
struct DatasetFingerprint {
    path: String,
    entries: usize,
    checksum: String,
}

fn fingerprint(dir: &Path, split: &DatasetSplit) -> DatasetFingerprint {
    let mut sums = Vec::new();
    for name in ["train.txt", "validation.txt", "test.txt"] {
        if let Ok(sum) = file_checksum(&dir.join(name)) {
            sums.push(sum);
        }
    }
    DatasetFingerprint {
        path: dir.display().to_string(),
        entries: split.train.len() + split.validation.len() + split.test.len(),
        checksum: sums.join("+"),
    }
}

fn parse_ratios(s: &str) -> Result<(f64, f64, f64), CliError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::usage(format!("bad ratios {s:?}; expected \"train,val,test\"")))?;
    if parts.len() != 3 {
        return Err(CliError::usage(format!(
            "expected three ratios, got {}",
            parts.len()
        )));
    }
    Ok((parts[0], parts[1], parts[2]))
}

fn out_dir(explicit: &Option<PathBuf>) -> PathBuf {
    explicit
        .clone()
        .or_else(|| std::env::var_os("GMPL_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn cmd_split(args: SplitArgs) -> Result<(), CliError> {
    if !args.data.exists() {
        return Err(CliError::usage(format!(
            "dataset file not found: {}",
            args.data.display()
        )));
    }
    let data = load_dataset(&args.data, args.delimiter)?;
    let ratios = parse_ratios(&args.ratios)?;
    let split = split_dataset(&data, ratios, args.seed)?;
    let mut manifest = split.manifest();
    manifest.source = Some(args.data.display().to_string());
    manifest.source_entries = Some(data.len());
    manifest.source_checksum = Some(file_checksum(&args.data)?);
    split.write_dir(&args.out, &manifest)?;
    println!(
        "wrote {} / {} / {} entries to {}",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        args.out.display()
    );
    Ok(())
}

fn build_config(seed: u64, algorithm: Algorithm, opts: &TrainOpts) -> Result<TrainConfig, CliError> {
    let mut cfg = TrainConfig {
        seed,
        algorithm,
        ..TrainConfig::default()
    };
    apply_opts(&mut cfg, opts)?;
    cfg.seed = seed;
    cfg.algorithm = algorithm;
    Ok(cfg)
}

fn run_one(
    split: &DatasetSplit,
    cfg: &TrainConfig,
    grid: bool,
) -> Result<(LatentFactors, TrainReport), CliError> {
    match cfg.algorithm {
        Algorithm::GmPso => Ok(train_gmpl(split, cfg)?),
        Algorithm::Pso => Ok(train_pso(split, cfg)?),
        Algorithm::Sgd => {
            if grid {
                return Ok(grid_search_sgd(split, cfg)?);
            }
            if cfg.fixed_eta.is_none() {
                return Err(CliError::usage("fixed_eta required (pass --eta or --grid)"));
            }
            if cfg.fixed_lambda.is_none() {
                return Err(CliError::usage(
                    "fixed_lambda required (pass --lambda or --grid)",
                ));
            }
            Ok(train_sgd(split, cfg)?)
        }
    }
}

/// Write model/curve/summary/manifest for one finished run; returns the stem.
fn write_run(
    dir: &Path,
    dataset_label: &str,
    split_dir: &Path,
    split: &DatasetSplit,
    cfg: &TrainConfig,
    factors: &LatentFactors,
    report: &TrainReport,
) -> Result<String, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
    let stem = format!("{}-seed{}", cfg.algorithm, cfg.seed);
    factors.write_file(&dir.join(format!("{stem}.model.txt")))?;
    write_text(&dir.join(format!("{stem}.curve.csv")), &report.curve_csv())?;
    let mut summary = serde_json::to_string_pretty(&report.summary_json(dataset_label)).unwrap();
    summary.push('\n');
    write_text(&dir.join(format!("{stem}.summary.json")), &summary)?;
    let manifest = RunManifest {
        config: cfg.clone(),
        dataset: fingerprint(split_dir, split),
        seeds: vec![cfg.seed],
        outputs: ["model.txt", "curve.csv", "summary.json"]
            .iter()
            .map(|ext| format!("{stem}.{ext}"))
            .collect(),
    };
    let mut json = serde_json::to_string_pretty(&manifest).unwrap();
    json.push('\n');
    write_text(&dir.join(format!("{stem}.manifest.json")), &json)?;
    Ok(stem)
}

pub fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let split = DatasetSplit::read_dir(&args.split_dir)?;
    let cfg = build_config(args.seed, args.algorithm, &args.opts)?;
    let (factors, report) = run_one(&split, &cfg, args.grid)?;
    let dir = out_dir(&args.out);
    let label = args.split_dir.display().to_string();
    write_run(
        &dir,
        &label,
        &args.split_dir,
        &split,
        &cfg,
        &factors,
        &report,
    )?;
    println!("final test RMSE: {}", report.final_test_rmse);
    Ok(())
}

pub fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let split = DatasetSplit::read_dir(&args.split_dir)?;
    let factors = LatentFactors::read_file(&args.model)?;
    if factors.n_users() != split.n_users() || factors.n_items() != split.n_items() {
        return Err(CliError::usage(format!(
            "model is {}x{} but split is {}x{}",
            factors.n_users(),
            factors.n_items(),
            split.n_users(),
            split.n_items()
        )));
    }
    let (name, part) = match args.partition {
        Partition::Train => ("train", &split.train),
        Partition::Validation => ("validation", &split.validation),
        Partition::Test => ("test", &split.test),
    };
    let rmse = factors.rmse(part.entries())?;
    println!("{name} RMSE: {rmse}");

    if let Some(path) = &args.pairs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(u), Some(i)) = (it.next(), it.next()) else {
                return Err(CliError::usage(format!(
                    "{}:{}: expected \"user item\"",
                    path.display(),
                    lineno + 1
                )));
            };
            pairs.push((u.to_string(), i.to_string()));
        }
        let preds = estimate_missing(&factors, &split.train, &pairs);
        for ((u, i), pred) in pairs.iter().zip(preds) {
            match pred {
                Ok(v) => println!("{u} {i} {v}"),
                Err(e) => println!("{u} {i} ERROR: {e}"),
            }
        }
    }
    Ok(())
}

struct RunSpec {
    split_index: usize,
    algorithm: Algorithm,
    seed: u64,
}

struct RunOutcome {
    dataset: String,
    algorithm: Algorithm,
    seed: u64,
    result: Result<TrainReport, String>,
}

fn sample_sd(xs: &[f64], mean: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
    var.sqrt()
}

pub fn cmd_benchmark(args: BenchmarkArgs) -> Result<(), CliError> {
    if args.split_dirs.is_empty() {
        return Err(CliError::usage("at least one --split-dir is required"));
    }
    if args.algorithms.is_empty() {
        return Err(CliError::usage("algorithm list must not be empty"));
    }
    if args.seeds.is_empty() {
        return Err(CliError::usage("seed list must not be empty"));
    }

    let mut splits = Vec::new();
    let mut labels = Vec::new();
    for dir in &args.split_dirs {
        splits.push(DatasetSplit::read_dir(dir)?);
        let label = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        labels.push(label);
    }

    let mut specs = Vec::new();
    for (split_index, _) in splits.iter().enumerate() {
        for &algorithm in &args.algorithms {
            for &seed in &args.seeds {
                specs.push(RunSpec {
                    split_index,
                    algorithm,
                    seed,
                });
            }
        }
    }

    let dir = out_dir(&args.out);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;

    // Each run owns its state; results come back in spec order.
    let outcomes: Vec<RunOutcome> = specs
        .par_iter()
        .map(|spec| {
            let split = &splits[spec.split_index];
            let label = &labels[spec.split_index];
            let result = build_config(spec.seed, spec.algorithm, &args.opts)
                .and_then(|cfg| {
                    let (factors, report) = run_one(split, &cfg, args.grid)?;
                    let run_dir = dir.join(label);
                    write_run(
                        &run_dir,
                        label,
                        &args.split_dirs[spec.split_index],
                        split,
                        &cfg,
                        &factors,
                        &report,
                    )?;
                    Ok(report)
                })
                .map_err(|e| e.message);
            RunOutcome {
                dataset: label.clone(),
                algorithm: spec.algorithm,
                seed: spec.seed,
                result,
            }
        })
        .collect();

    // Aggregate table: one row per dataset x algorithm.
    let mut table = String::from(
        "dataset,algorithm,runs,failures,rmse_mean,rmse_sd,rmse,\
         seconds_mean,seconds_sd,time_to_best_mean\n",
    );
    for label in &labels {
        for &algorithm in &args.algorithms {
            let cell: Vec<&RunOutcome> = outcomes
                .iter()
                .filter(|o| &o.dataset == label && o.algorithm == algorithm)
                .collect();
            let ok: Vec<&TrainReport> =
                cell.iter().filter_map(|o| o.result.as_ref().ok()).collect();
            let failures = cell.len() - ok.len();
            if ok.is_empty() {
                table.push_str(&format!(
                    "{label},{algorithm},{},{failures},,,failed,,,\n",
                    cell.len()
                ));
                continue;
            }
            let rmses: Vec<f64> = ok.iter().map(|r| r.final_test_rmse).collect();
            let secs: Vec<f64> = ok.iter().map(|r| r.total_seconds).collect();
            let to_best: Vec<f64> = ok.iter().map(|r| r.time_to_best_s).collect();
            let rmse_mean = rmses.iter().sum::<f64>() / rmses.len() as f64;
            let rmse_sd = sample_sd(&rmses, rmse_mean);
            let sec_mean = secs.iter().sum::<f64>() / secs.len() as f64;
            let sec_sd = sample_sd(&secs, sec_mean);
            let tb_mean = to_best.iter().sum::<f64>() / to_best.len() as f64;
            table.push_str(&format!(
                "{label},{algorithm},{},{failures},{rmse_mean},{rmse_sd},\
                 {rmse_mean:.4} \u{b1} {rmse_sd:.1E},{sec_mean},{sec_sd},{tb_mean}\n",
                cell.len()
            ));
        }
    }
    write_text(&dir.join("table.csv"), &table)?;

    let failed: Vec<&RunOutcome> = outcomes.iter().filter(|o| o.result.is_err()).collect();
    for o in &failed {
        eprintln!(
            "run failed: {} {} seed {}: {}",
            o.dataset,
            o.algorithm,
            o.seed,
            o.result.as_ref().unwrap_err()
        );
    }
    println!(
        "{} runs, {} failed; table at {}",
        outcomes.len(),
        failed.len(),
        dir.join("table.csv").display()
    );
    if failed.len() == outcomes.len() {
        return Err(CliError::runtime("all benchmark runs failed"));
    }
    Ok(())
}
