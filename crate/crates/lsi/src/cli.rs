//! Command-line surface.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure. Every failure
//! prints a single `error: ...` line to stderr.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::blobs::gen_blobs;
use crate::dataset::Dataset;
use crate::emb::{read_emb, write_emb};
use crate::error::{Error, Result};
use crate::experiments::{
    auroc_from_scores, corrupt_class_features, corrupt_labels, dp_sweep, partition_by_lsi,
    size_effect, subset_curves,
};
use crate::laplace::HessianMode;
use crate::loo::{run_loo, LooJob};
use crate::probe::ProbeShape;
use crate::results::{
    format_f64, read_json, read_lsi_csv, read_summary, write_json, write_results, RunManifest,
};
use crate::stats::{summarize_with_bins, DEFAULT_HISTOGRAM_BINS};
use crate::trainer::{DpConfig, TrainConfig};

#[derive(Parser)]
#[command(
    name = "lsi",
    version,
    about = "Per-sample information from leave-one-out probe retraining"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HessianArg {
    Diag,
    Full,
}

impl From<HessianArg> for HessianMode {
    fn from(arg: HessianArg) -> Self {
        match arg {
            HessianArg::Diag => HessianMode::Diag,
            HessianArg::Full => HessianMode::Full,
        }
    }
}

/// Training and orchestration flags shared by every command that retrains.
#[derive(Args, Clone)]
struct JobArgs {
    /// Number of seeds (0, 1, ..., N-1)
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 0.04)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 0.01)]
    weight_decay: f64,
    /// Hidden width of the probe
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, value_enum, default_value_t = HessianArg::Diag)]
    hessian: HessianArg,
    /// Worker threads (falls back to LSI_WORKERS, then to the CPU count)
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated checkpoint epochs, e.g. 10,500,800
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<usize>,
}

impl JobArgs {
    fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds).collect()
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            epochs: self.epochs,
            init_seed: 0,
        }
    }

    fn worker_count(&self) -> usize {
        resolve_workers(self.workers)
    }

    fn job(&self, data: &Dataset) -> Result<LooJob> {
        let shape = ProbeShape::new(data.dim(), self.hidden, data.num_classes() as usize)?;
        let mut job = LooJob::new(shape, self.train_config(), self.seed_list());
        job.hessian_mode = self.hessian.into();
        job.checkpoint_epochs = self.checkpoints.clone();
        job.worker_count = self.worker_count();
        job.progress = true;
        Ok(job)
    }

    fn manifest(&self, command: &str, data: &Dataset, dp: Option<&DpConfig>) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            dataset_fingerprint: format!("{:016x}", data.fingerprint()),
            seeds: self.seed_list(),
            hessian_mode: HessianMode::from(self.hessian).to_string(),
            worker_count: self.worker_count(),
            lr: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            epochs: self.epochs,
            hidden_dim: self.hidden,
            checkpoint_epochs: self.checkpoints.clone(),
            clip_norm: dp.map(|d| d.clip_norm),
            noise_multiplier: dp.map(|d| d.noise_multiplier),
            noise_seed: dp.map(|d| d.noise_seed),
            wall_clock_seconds: 0.0,
            clamp_total_full: 0,
            clamp_total_loo: 0,
        }
    }
}

fn resolve_workers(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("LSI_WORKERS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
    })
    .filter(|&w| w > 0)
    .unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|p| p.get())
            .unwrap_or(1)
    })
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic blob dataset as an EMB1 file
    Gen {
        #[arg(long)]
        classes: u32,
        #[arg(long)]
        per_class: usize,
        #[arg(long)]
        dim: usize,
        /// Pairwise distance between class means
        #[arg(long)]
        sep: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the leave-one-out computation and write a results directory
    Lsi {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        job: JobArgs,
    },
    /// Corrupt labels (--flip-rate) or one class's features (--class-id)
    Corrupt {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, conflicts_with_all = ["class_id", "noise_scale"])]
        flip_rate: Option<f64>,
        /// Where to record the flipped sample ids (JSON)
        #[arg(long, requires = "flip_rate")]
        flipped_out: Option<PathBuf>,
        #[arg(long, requires = "noise_scale")]
        class_id: Option<u32>,
        /// Noise std as a multiple of the class's per-dimension feature std
        #[arg(long, requires = "class_id")]
        noise_scale: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Split a dataset into low/mid/high thirds by a previous run's ordering
    Partition {
        #[arg(long)]
        data: PathBuf,
        /// Results directory of a previous `lsi` run on the same dataset
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated block fractions (must sum to 1)
        #[arg(long, value_delimiter = ',', num_args = 3)]
        fractions: Option<Vec<f64>>,
    },
    /// Train one probe per partition block and emit accuracy curves
    SubsetTrain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        run: PathBuf,
        /// Held-out EMB1 dataset for test accuracy
        #[arg(long)]
        holdout: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        job: JobArgs,
    },
    /// Compare leave-one-out values on the full dataset vs a stratified subset
    SizeEffect {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        job: JobArgs,
    },
    /// Leave-one-out sweep over clipping norms and noise multipliers
    DpSweep {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated clipping norms; `inf` disables clipping
        #[arg(long, value_delimiter = ',', required = true)]
        clips: Vec<String>,
        /// Comma-separated noise multipliers
        #[arg(long, value_delimiter = ',', required = true)]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        noise_seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        job: JobArgs,
    },
    /// Ranking-stability table from a checkpointed run
    Stability {
        #[arg(long)]
        run: PathBuf,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot-ready histogram and summary (plus AUROC when flips are known)
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON file with flipped sample ids (from `corrupt --flipped-out`)
        #[arg(long)]
        flipped: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_HISTOGRAM_BINS)]
        bins: usize,
    },
}

/// Parses argv and runs; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return 0;
            }
            let first_line = err.to_string();
            let first_line = first_line.lines().next().unwrap_or("bad arguments");
            eprintln!("error: {}", first_line.trim_start_matches("error: "));
            return 1;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen {
            classes,
            per_class,
            dim,
            sep,
            seed,
            out,
        } => {
            let data = gen_blobs(classes, per_class, dim, sep, seed)?;
            write_emb(&out, &data)?;
            println!(
                "wrote {} ({} rows, dim {}, {} classes)",
                out.display(),
                data.len(),
                data.dim(),
                data.num_classes()
            );
            Ok(())
        }
        Command::Lsi { data, out, job } => {
            let dataset = read_emb(&data)?;
            let loo_job = job.job(&dataset)?;
            let started = Instant::now();
            let table = run_loo(&dataset, &loo_job)?;
            let mut manifest = job.manifest("lsi", &dataset, None);
            manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
            let (clamp_full, clamp_loo) = table.total_clamp_counts();
            manifest.clamp_total_full = clamp_full;
            manifest.clamp_total_loo = clamp_loo;
            write_results(&table, &manifest, &out)?;
            println!(
                "wrote {} ({} records)",
                out.join("lsi.csv").display(),
                table.records.len()
            );
            Ok(())
        }
        Command::Corrupt {
            data,
            out,
            flip_rate,
            flipped_out,
            class_id,
            noise_scale,
            seed,
        } => {
            let dataset = read_emb(&data)?;
            match (flip_rate, class_id.zip(noise_scale)) {
                (Some(rate), None) => {
                    let (corrupted, flipped) = corrupt_labels(&dataset, rate, seed)?;
                    write_emb(&out, &corrupted)?;
                    let ids: Vec<usize> = flipped.iter().copied().collect();
                    if let Some(path) = flipped_out {
                        write_json(&path, &ids)?;
                    }
                    println!("wrote {} ({} labels flipped)", out.display(), ids.len());
                    Ok(())
                }
                (None, Some((class, scale))) => {
                    let corrupted = corrupt_class_features(&dataset, class, scale, seed)?;
                    write_emb(&out, &corrupted)?;
                    println!("wrote {} (class {class} noised at scale {scale})", out.display());
                    Ok(())
                }
                _ => Err(Error::InvalidArgument(
                    "pass either --flip-rate or --class-id with --noise-scale".into(),
                )),
            }
        }
        Command::Partition {
            data,
            run,
            out,
            fractions,
        } => {
            let dataset = read_emb(&data)?;
            let summary = read_summary(&run)?;
            let fractions = match fractions {
                Some(f) => [f[0], f[1], f[2]],
                None => [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            };
            let partition = partition_by_lsi(&dataset, &summary.per_sample_mean, fractions)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            for (name, block) in [
                ("low", &partition.low),
                ("mid", &partition.mid),
                ("high", &partition.high),
            ] {
                write_emb(out.join(format!("{name}.emb")), &block.data)?;
            }
            #[derive(serde::Serialize)]
            struct PartitionIds<'a> {
                low: &'a [usize],
                mid: &'a [usize],
                high: &'a [usize],
            }
            write_json(
                out.join("partition.json"),
                &PartitionIds {
                    low: &partition.low.ids,
                    mid: &partition.mid.ids,
                    high: &partition.high.ids,
                },
            )?;
            println!(
                "wrote {} (blocks of {}, {}, {})",
                out.display(),
                partition.low.data.len(),
                partition.mid.data.len(),
                partition.high.data.len()
            );
            Ok(())
        }
        Command::SubsetTrain {
            data,
            run,
            holdout,
            out,
            job,
        } => {
            let dataset = read_emb(&data)?;
            let holdout = read_emb(&holdout)?;
            let summary = read_summary(&run)?;
            let partition = partition_by_lsi(
                &dataset,
                &summary.per_sample_mean,
                [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            )?;
            let shape = ProbeShape::new(dataset.dim(), job.hidden, dataset.num_classes() as usize)?;
            let checkpoints = if job.checkpoints.is_empty() {
                default_checkpoints(job.epochs)
            } else {
                job.checkpoints.clone()
            };

            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let mut csv = String::from("seed,block,epoch,train_acc,test_acc\n");
            let mut baselines = Vec::new();
            for seed in job.seed_list() {
                let cfg = TrainConfig {
                    init_seed: seed,
                    ..job.train_config()
                };
                let curves = subset_curves(&partition, &holdout, shape, &cfg, &checkpoints)?;
                for (name, curve) in [
                    ("low", &curves.low),
                    ("mid", &curves.mid),
                    ("high", &curves.high),
                ] {
                    for &(epoch, train_acc, test_acc) in &curve.points {
                        csv.push_str(&format!(
                            "{seed},{name},{epoch},{},{}\n",
                            format_f64(train_acc),
                            format_f64(test_acc)
                        ));
                    }
                }
                baselines.push(curves);
            }
            let csv_path = out.join("curves.csv");
            std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
            #[derive(serde::Serialize)]
            struct Baselines {
                train_low: f64,
                train_mid: f64,
                train_high: f64,
                test: f64,
            }
            let b = &baselines[0];
            write_json(
                out.join("baseline.json"),
                &Baselines {
                    train_low: b.low.train_baseline,
                    train_mid: b.mid.train_baseline,
                    train_high: b.high.train_baseline,
                    test: b.test_baseline,
                },
            )?;
            println!("wrote {}", csv_path.display());
            Ok(())
        }
        Command::SizeEffect {
            data,
            fraction,
            seed,
            out,
            job,
        } => {
            let dataset = read_emb(&data)?;
            let loo_job = job.job(&dataset)?;
            let effect = size_effect(&dataset, fraction, seed, &loo_job)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let manifest_full = job.manifest("size-effect/full", &dataset, None);
            write_results(&effect.full, &manifest_full, out.join("full"))?;
            let manifest_subset = job.manifest("size-effect/subset", &dataset, None);
            write_results(&effect.subset, &manifest_subset, out.join("subset"))?;
            #[derive(serde::Serialize)]
            struct SizeEffectReport<'a> {
                fraction: f64,
                subset_ids: &'a [usize],
                median_full: f64,
                median_subset: f64,
                median_ratio: f64,
            }
            write_json(
                out.join("size_effect.json"),
                &SizeEffectReport {
                    fraction,
                    subset_ids: &effect.subset_ids,
                    median_full: effect.median_full,
                    median_subset: effect.median_subset,
                    median_ratio: effect.median_ratio,
                },
            )?;
            println!(
                "median ratio subset/full = {:.3} ({} -> {} samples)",
                effect.median_ratio,
                effect.full.num_samples(),
                effect.subset.num_samples()
            );
            Ok(())
        }
        Command::DpSweep {
            data,
            clips,
            sigmas,
            noise_seed,
            out,
            job,
        } => {
            let dataset = read_emb(&data)?;
            let clip_norms: Vec<f64> = clips
                .iter()
                .map(|s| parse_clip(s))
                .collect::<Result<_>>()?;
            let loo_job = job.job(&dataset)?;
            let cells = dp_sweep(&dataset, &clip_norms, &sigmas, noise_seed, &loo_job)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            #[derive(serde::Serialize)]
            struct CellRow {
                clip: String,
                sigma: f64,
                median: f64,
                variance: f64,
                dir: String,
            }
            let mut rows = Vec::new();
            for cell in &cells {
                let clip_label = if cell.clip_norm.is_infinite() {
                    "inf".to_string()
                } else {
                    format!("{}", cell.clip_norm)
                };
                let dir_name = format!("c{clip_label}_s{}", cell.noise_multiplier);
                let stats = crate::stats::summarize(&cell.table.per_sample_mean)?;
                let mut manifest = job.manifest("dp-sweep", &dataset, None);
                manifest.clip_norm = Some(cell.clip_norm);
                manifest.noise_multiplier = Some(cell.noise_multiplier);
                manifest.noise_seed = Some(noise_seed);
                write_results(&cell.table, &manifest, out.join(&dir_name))?;
                rows.push(CellRow {
                    clip: clip_label,
                    sigma: cell.noise_multiplier,
                    median: stats.median,
                    variance: stats.variance,
                    dir: dir_name,
                });
            }
            write_json(out.join("sweep.json"), &rows)?;
            println!("wrote {} ({} cells)", out.display(), cells.len());
            Ok(())
        }
        Command::Stability { run, out } => {
            let summary = read_summary(&run)?;
            if summary.checkpoint_mean_lsi.is_empty() {
                return Err(Error::EmptyInput(
                    "run has no checkpoints; rerun `lsi` with --checkpoints",
                ));
            }
            let mut csv = String::from("epoch,spearman\n");
            for (&epoch, means) in &summary.checkpoint_mean_lsi {
                let r = crate::stats::spearman(means, &summary.per_sample_mean)?;
                csv.push_str(&format!("{epoch},{}\n", format_f64(r)));
            }
            std::fs::write(&out, csv).map_err(|e| Error::io(&out, e))?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Report {
            run,
            out,
            flipped,
            bins,
        } => {
            let summary = read_summary(&run)?;
            // Consistency check between the two result files.
            let rows = read_lsi_csv(run.join("lsi.csv"))?;
            if rows.len() != summary.n * summary.seeds.len() {
                return Err(Error::MalformedResults {
                    path: run.join("lsi.csv"),
                    reason: format!(
                        "expected {} rows, found {}",
                        summary.n * summary.seeds.len(),
                        rows.len()
                    ),
                });
            }
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let stats = summarize_with_bins(&summary.per_sample_mean, bins)?;
            let mut hist_csv = String::from("bin_lo,bin_hi,count\n");
            let width = (stats.histogram.hi - stats.histogram.lo) / bins as f64;
            for (b, &count) in stats.histogram.counts.iter().enumerate() {
                let lo = stats.histogram.lo + b as f64 * width;
                let hi = if b + 1 == bins {
                    stats.histogram.hi
                } else {
                    stats.histogram.lo + (b + 1) as f64 * width
                };
                hist_csv.push_str(&format!(
                    "{},{},{count}\n",
                    format_f64(lo),
                    format_f64(hi)
                ));
            }
            let hist_path = out.join("histogram.csv");
            std::fs::write(&hist_path, hist_csv).map_err(|e| Error::io(&hist_path, e))?;

            let auroc = match flipped {
                Some(path) => {
                    let ids: Vec<usize> = read_json(&path)?;
                    let set: BTreeSet<usize> = ids.into_iter().collect();
                    Some(auroc_from_scores(&summary.per_sample_mean, &set)?)
                }
                None => None,
            };
            #[derive(serde::Serialize)]
            struct Report<'a> {
                n: usize,
                seeds: &'a [u64],
                stats: &'a crate::stats::Summary,
                checkpoint_spearman: &'a [crate::results::CheckpointCorrelation],
                seed_disagreement: Option<f64>,
                /// AUROC of mean LSI against the known flipped set.
                auroc: Option<f64>,
            }
            write_json(
                out.join("report.json"),
                &Report {
                    n: summary.n,
                    seeds: &summary.seeds,
                    stats: &summary.stats,
                    checkpoint_spearman: &summary.checkpoint_spearman,
                    seed_disagreement: summary.seed_disagreement,
                    auroc,
                },
            )?;
            println!("wrote {}", out.join("report.json").display());
            Ok(())
        }
    }
}

fn parse_clip(s: &str) -> Result<f64> {
    if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("none") {
        return Ok(f64::INFINITY);
    }
    s.parse::<f64>()
        .map_err(|_| Error::InvalidArgument(format!("bad clip norm: {s}")))
}

fn default_checkpoints(epochs: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=10).map(|k| k * epochs / 10).filter(|&e| e > 0).collect();
    out.dedup();
    out
}
