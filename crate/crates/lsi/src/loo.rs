//! Leave-one-out orchestration: one full-data training run plus `n` retrained
//! runs per seed, posterior fits, divergence evaluation, and seed averaging.
//!
//! Sample jobs are statically partitioned into contiguous blocks over the
//! worker threads and merged by sample index, so the result is bitwise
//! identical for any `worker_count`. Leave-one-out runs reuse the full run's
//! initialization for their seed, isolating the removed sample's effect from
//! initialization noise.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::laplace::{fit_posterior, lsi, HessianMode, LsiRecord, Posterior};
use crate::probe::{LossSpec, ProbeShape, FULL_HESSIAN_CAP};
use crate::rng;
use crate::stats::spearman;
use crate::trainer::{train_inner, DpConfig, TrainConfig, TrainResult};

/// Stream tag for the full-data run's DP noise (leave-one-out runs use their
/// sample index).
const FULL_RUN_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone)]
pub struct LooJob {
    pub shape: ProbeShape,
    pub cfg: TrainConfig,
    pub seeds: Vec<u64>,
    pub hessian_mode: HessianMode,
    pub checkpoint_epochs: Vec<usize>,
    pub worker_count: usize,
    pub dp: Option<DpConfig>,
    /// Emit one progress line per completed percent to stderr.
    pub progress: bool,
}

impl LooJob {
    pub fn new(shape: ProbeShape, cfg: TrainConfig, seeds: Vec<u64>) -> Self {
        LooJob {
            shape,
            cfg,
            seeds,
            hessian_mode: HessianMode::Diag,
            checkpoint_epochs: Vec::new(),
            worker_count: 1,
            dp: None,
            progress: false,
        }
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        if data.len() < 2 {
            return Err(Error::InvalidArgument(
                "leave-one-out needs at least 2 samples".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::EmptyInput("seed list"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::InvalidArgument("seeds must be distinct".into()));
        }
        if self.worker_count == 0 {
            return Err(Error::InvalidArgument("worker_count must be >= 1".into()));
        }
        if self.hessian_mode == HessianMode::Full && self.shape.param_count() > FULL_HESSIAN_CAP {
            return Err(Error::HessianCapExceeded {
                param_count: self.shape.param_count(),
                cap: FULL_HESSIAN_CAP,
            });
        }
        self.cfg.validate()?;
        if let Some(dp) = &self.dp {
            dp.validate()?;
        }
        Ok(())
    }

    fn dp_for(&self, seed: u64, stream: u64) -> Option<DpConfig> {
        self.dp.map(|dp| DpConfig {
            noise_seed: rng::mix3(dp.noise_seed, seed, stream),
            ..dp
        })
    }
}

/// Per-sample, per-seed results plus seed-averaged summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct LsiTable {
    /// `n * seeds.len()` records, ordered by sample id, then by seed in job
    /// order.
    pub records: Vec<LsiRecord>,
    pub seeds: Vec<u64>,
    pub per_sample_mean: Vec<f64>,
    /// Sample ids sorted by descending mean value; ties by ascending id.
    pub ranking: Vec<usize>,
    /// Seed-averaged per-sample values at each checkpoint epoch.
    pub checkpoint_mean_lsi: BTreeMap<usize, Vec<f64>>,
}

impl LsiTable {
    pub fn num_samples(&self) -> usize {
        self.per_sample_mean.len()
    }

    /// Values of one seed (by position in `seeds`), indexed by sample id.
    pub fn seed_values(&self, seed_index: usize) -> Vec<f64> {
        let s = self.seeds.len();
        (0..self.num_samples())
            .map(|i| self.records[i * s + seed_index].lsi)
            .collect()
    }

    /// Ranking permutation per checkpoint epoch (descending mean value).
    pub fn checkpoint_rankings(&self) -> BTreeMap<usize, Vec<usize>> {
        self.checkpoint_mean_lsi
            .iter()
            .map(|(&epoch, means)| (epoch, ranking_of(means)))
            .collect()
    }

    pub fn total_clamp_counts(&self) -> (usize, usize) {
        let full = self.records.iter().map(|r| r.clamp_count_full).sum();
        let loo = self.records.iter().map(|r| r.clamp_count_loo).sum();
        (full, loo)
    }
}

pub(crate) fn ranking_of(values: &[f64]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..values.len()).collect();
    ids.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .expect("non-finite value")
            .then(a.cmp(&b))
    });
    ids
}

struct SampleOutcome {
    record: LsiRecord,
    checkpoint_lsi: Vec<(usize, f64)>,
}

struct Progress {
    done: AtomicUsize,
    total: usize,
    last_pct: AtomicUsize,
    enabled: bool,
}

impl Progress {
    fn tick(&self) {
        let done = self.done.fetch_add(1, Ordering::Relaxed) + 1;
        if !self.enabled {
            return;
        }
        let pct = done * 100 / self.total;
        let prev = self.last_pct.fetch_max(pct, Ordering::Relaxed);
        if pct > prev {
            eprintln!("lsi: {pct}% ({done}/{} runs)", self.total);
        }
    }
}

/// Runs the full leave-one-out computation.
///
/// For each seed: train on the full dataset, then for each sample retrain on
/// the dataset without it (same initialization), fit both posteriors, and
/// record the divergence. Any failed run aborts the job, listing the
/// offending `(seed, sample)` pairs.
pub fn run_loo(data: &Dataset, job: &LooJob) -> Result<LsiTable> {
    job.validate(data)?;
    let n = data.len();
    let n_seeds = job.seeds.len();
    let spec = LossSpec::new(job.cfg.weight_decay)?;

    let progress = Progress {
        done: AtomicUsize::new(0),
        total: n_seeds * (n + 1),
        last_pct: AtomicUsize::new(0),
        enabled: job.progress,
    };

    // records[i * n_seeds + s]
    let mut records: Vec<Option<LsiRecord>> = vec![None; n * n_seeds];
    let mut checkpoint_sums: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut failures: Vec<(u64, usize)> = Vec::new();
    let mut first_failure: Option<String> = None;

    for (seed_index, &seed) in job.seeds.iter().enumerate() {
        let cfg = TrainConfig {
            init_seed: seed,
            ..job.cfg
        };
        let full = train_inner(
            data,
            job.shape,
            &cfg,
            &job.checkpoint_epochs,
            job.dp_for(seed, FULL_RUN_STREAM).as_ref(),
        )?;
        let post_full = fit_posterior(&full.theta_hat, data, &spec, job.hessian_mode)?;
        let post_full_checkpoints: Vec<(usize, Posterior)> = full
            .checkpoints
            .iter()
            .map(|(epoch, theta)| {
                fit_posterior(theta, data, &spec, job.hessian_mode).map(|p| (*epoch, p))
            })
            .collect::<Result<_>>()?;
        progress.tick();

        let chunk = n.div_ceil(job.worker_count);
        let outcomes: Vec<Vec<(usize, Result<SampleOutcome>)>> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for w in 0..job.worker_count {
                let lo = w * chunk;
                let hi = ((w + 1) * chunk).min(n);
                if lo >= hi {
                    continue;
                }
                let cfg = &cfg;
                let post_full = &post_full;
                let post_full_checkpoints = &post_full_checkpoints;
                let progress = &progress;
                let spec = &spec;
                handles.push(scope.spawn(move || {
                    let mut out = Vec::with_capacity(hi - lo);
                    for i in lo..hi {
                        let result = loo_sample(
                            data,
                            job,
                            cfg,
                            spec,
                            seed,
                            i,
                            post_full,
                            post_full_checkpoints,
                        );
                        progress.tick();
                        out.push((i, result));
                    }
                    out
                }));
            }
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });

        for (i, outcome) in outcomes.into_iter().flatten() {
            match outcome {
                Ok(sample) => {
                    for &(epoch, value) in &sample.checkpoint_lsi {
                        checkpoint_sums
                            .entry(epoch)
                            .or_insert_with(|| vec![0.0; n])[i] += value;
                    }
                    records[i * n_seeds + seed_index] = Some(sample.record);
                }
                Err(err) => {
                    if first_failure.is_none() {
                        first_failure = Some(err.to_string());
                    }
                    failures.push((seed, i));
                }
            }
        }
    }

    if !failures.is_empty() {
        failures.sort_unstable();
        if let Some(detail) = first_failure {
            eprintln!("lsi: first failure: {detail}");
        }
        return Err(Error::LooFailed { pairs: failures });
    }

    let records: Vec<LsiRecord> = records.into_iter().map(|r| r.unwrap()).collect();
    let per_sample_mean: Vec<f64> = (0..n)
        .map(|i| {
            records[i * n_seeds..(i + 1) * n_seeds]
                .iter()
                .map(|r| r.lsi)
                .sum::<f64>()
                / n_seeds as f64
        })
        .collect();
    let ranking = ranking_of(&per_sample_mean);
    let checkpoint_mean_lsi = checkpoint_sums
        .into_iter()
        .map(|(epoch, sums)| {
            (
                epoch,
                sums.into_iter().map(|s| s / n_seeds as f64).collect(),
            )
        })
        .collect();

    Ok(LsiTable {
        records,
        seeds: job.seeds.clone(),
        per_sample_mean,
        ranking,
        checkpoint_mean_lsi,
    })
}

#[allow(clippy::too_many_arguments)]
fn loo_sample(
    data: &Dataset,
    job: &LooJob,
    cfg: &TrainConfig,
    spec: &LossSpec,
    seed: u64,
    sample_id: usize,
    post_full: &Posterior,
    post_full_checkpoints: &[(usize, Posterior)],
) -> Result<SampleOutcome> {
    let loo_data = data.remove_row(sample_id);
    let loo: TrainResult = train_inner(
        &loo_data,
        job.shape,
        cfg,
        &job.checkpoint_epochs,
        job.dp_for(seed, sample_id as u64).as_ref(),
    )?;
    let post_loo = fit_posterior(&loo.theta_hat, &loo_data, spec, job.hessian_mode)?;
    let value = lsi(post_full, &post_loo)?;

    let mut checkpoint_lsi = Vec::with_capacity(post_full_checkpoints.len());
    for ((epoch, post_full_ck), (loo_epoch, theta_ck)) in
        post_full_checkpoints.iter().zip(&loo.checkpoints)
    {
        debug_assert_eq!(epoch, loo_epoch);
        let post_loo_ck = fit_posterior(theta_ck, &loo_data, spec, job.hessian_mode)?;
        checkpoint_lsi.push((*epoch, lsi(post_full_ck, &post_loo_ck)?));
    }

    Ok(SampleOutcome {
        record: LsiRecord {
            sample_id,
            seed,
            lsi: value,
            clamp_count_full: post_full.clamp_count,
            clamp_count_loo: post_loo.clamp_count,
        },
        checkpoint_lsi,
    })
}

/// Spearman correlation between each checkpoint's seed-averaged ranking and
/// the final ranking, ascending by epoch.
pub fn ranking_stability(table: &LsiTable) -> Result<Vec<(usize, f64)>> {
    if table.checkpoint_mean_lsi.is_empty() {
        return Err(Error::EmptyInput("checkpoint rankings"));
    }
    table
        .checkpoint_mean_lsi
        .iter()
        .map(|(&epoch, means)| spearman(means, &table.per_sample_mean).map(|r| (epoch, r)))
        .collect()
}

/// Mean pairwise Spearman correlation between single-seed rankings; measures
/// how much the seed averaging matters.
pub fn seed_disagreement(table: &LsiTable) -> Result<f64> {
    let s = table.seeds.len();
    if s < 2 {
        return Err(Error::Degenerate(
            "seed disagreement needs at least 2 seeds".to_string(),
        ));
    }
    let per_seed: Vec<Vec<f64>> = (0..s).map(|idx| table.seed_values(idx)).collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..s {
        for b in (a + 1)..s {
            total += spearman(&per_seed[a], &per_seed[b])?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blobs::gen_blobs;

    fn small_job(seeds: Vec<u64>) -> LooJob {
        let shape = ProbeShape::new(2, 4, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 120,
            ..TrainConfig::default()
        };
        LooJob::new(shape, cfg, seeds)
    }

    #[test]
    fn duplicate_samples_get_equal_values() {
        let one = gen_blobs(2, 1, 2, 4.0, 3).unwrap();
        // Duplicate both rows: removal of either copy leaves the same data.
        let features: Vec<f32> = one
            .features()
            .iter()
            .chain(one.features().iter())
            .copied()
            .collect();
        let labels: Vec<u32> = one.labels().iter().chain(one.labels().iter()).copied().collect();
        let data = Dataset::new(
            [&features[0..2], &features[4..6], &features[2..4], &features[6..8]].concat(),
            vec![labels[0], labels[2], labels[1], labels[3]],
            2,
            2,
        )
        .unwrap();
        assert_eq!(data.row(0), data.row(1));
        assert_eq!(data.row(2), data.row(3));

        let job = small_job(vec![0]);
        let table = run_loo(&data, &job).unwrap();
        assert!((table.per_sample_mean[0] - table.per_sample_mean[1]).abs() < 1e-9);
        assert!((table.per_sample_mean[2] - table.per_sample_mean[3]).abs() < 1e-9);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let data = gen_blobs(2, 6, 2, 4.0, 7).unwrap();
        let mut job = small_job(vec![0, 1]);
        job.checkpoint_epochs = vec![60, 120];
        let serial = run_loo(&data, &job).unwrap();
        job.worker_count = 4;
        let parallel = run_loo(&data, &job).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn table_is_complete_and_nonnegative() {
        let data = gen_blobs(2, 5, 2, 4.0, 11).unwrap();
        let job = small_job(vec![3, 9]);
        let table = run_loo(&data, &job).unwrap();
        assert_eq!(table.records.len(), 10 * 2);
        for i in 0..10 {
            for (s, &seed) in job.seeds.iter().enumerate() {
                let r = &table.records[i * 2 + s];
                assert_eq!(r.sample_id, i);
                assert_eq!(r.seed, seed);
                assert!(r.lsi >= 0.0);
            }
        }
        assert_eq!(table.ranking.len(), 10);
        let mut sorted = table.ranking.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn permuting_rows_permutes_means() {
        let data = gen_blobs(2, 4, 2, 3.0, 19).unwrap();
        let job = small_job(vec![0]);
        let base = run_loo(&data, &job).unwrap();

        let perm: Vec<usize> = vec![5, 2, 7, 0, 3, 6, 1, 4];
        let permuted = data.select(&perm).unwrap();
        let shuffled = run_loo(&permuted, &job).unwrap();
        for (new_pos, &old_pos) in perm.iter().enumerate() {
            let a = base.per_sample_mean[old_pos];
            let b = shuffled.per_sample_mean[new_pos];
            assert!(
                (a - b).abs() <= 1e-5 * a.abs().max(1e-12),
                "sample {old_pos}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn flipped_label_stands_out() {
        let clean = gen_blobs(2, 15, 2, 5.0, 23).unwrap();
        let mut labels = clean.labels().to_vec();
        labels[4] = 1 - labels[4];
        let data = Dataset::new(clean.features().to_vec(), labels, 2, 2).unwrap();

        let mut job = small_job(vec![0]);
        job.cfg.epochs = 300;
        job.worker_count = 2;
        let table = run_loo(&data, &job).unwrap();

        let mut clean_values: Vec<f64> = (0..30)
            .filter(|&i| i != 4)
            .map(|i| table.per_sample_mean[i])
            .collect();
        clean_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median_clean = clean_values[clean_values.len() / 2];
        assert!(
            table.per_sample_mean[4] > median_clean,
            "flipped {} vs clean median {median_clean}",
            table.per_sample_mean[4]
        );
    }

    #[test]
    fn ranking_stability_final_checkpoint_is_one() {
        let data = gen_blobs(2, 5, 2, 4.0, 29).unwrap();
        let mut job = small_job(vec![0]);
        job.checkpoint_epochs = vec![10, 120]; // 120 == epochs
        let table = run_loo(&data, &job).unwrap();
        let stability = ranking_stability(&table).unwrap();
        assert_eq!(stability.len(), 2);
        assert_eq!(stability[0].0, 10);
        let (last_epoch, last_r) = stability[1];
        assert_eq!(last_epoch, 120);
        assert!((last_r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ranking_stability_requires_checkpoints() {
        let data = gen_blobs(2, 3, 2, 4.0, 31).unwrap();
        let table = run_loo(&data, &small_job(vec![0])).unwrap();
        assert!(ranking_stability(&table).is_err());
    }

    #[test]
    fn identical_checkpoint_rankings_give_identical_correlations() {
        let data = gen_blobs(2, 5, 2, 4.0, 37).unwrap();
        let mut job = small_job(vec![0]);
        job.checkpoint_epochs = vec![120];
        let table = run_loo(&data, &job).unwrap();
        // Duplicate the final checkpoint under two epochs: same means, so the
        // correlations must agree exactly.
        let mut doubled = table.clone();
        let means = doubled.checkpoint_mean_lsi[&120].clone();
        doubled.checkpoint_mean_lsi.insert(60, means);
        let stability = ranking_stability(&doubled).unwrap();
        assert_eq!(stability[0].1.to_bits(), stability[1].1.to_bits());
    }

    #[test]
    fn seed_disagreement_basics() {
        let data = gen_blobs(2, 4, 2, 4.0, 41).unwrap();
        let one_seed = run_loo(&data, &small_job(vec![0])).unwrap();
        assert!(seed_disagreement(&one_seed).is_err());

        let table = run_loo(&data, &small_job(vec![0, 1])).unwrap();
        let d = seed_disagreement(&table).unwrap();
        assert!((-1.0..=1.0).contains(&d));

        // Identical per-seed values -> perfect agreement.
        let mut cloned = table.clone();
        let n_seeds = cloned.seeds.len();
        for i in 0..cloned.num_samples() {
            let v = cloned.records[i * n_seeds].lsi;
            for s in 1..n_seeds {
                cloned.records[i * n_seeds + s].lsi = v;
            }
        }
        assert!((seed_disagreement(&cloned).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_jobs_are_rejected() {
        let data = gen_blobs(2, 3, 2, 4.0, 43).unwrap();
        let mut job = small_job(vec![0, 0]);
        assert!(run_loo(&data, &job).is_err()); // duplicate seeds
        job.seeds = vec![];
        assert!(run_loo(&data, &job).is_err()); // empty seeds
        job.seeds = vec![0];
        job.worker_count = 0;
        assert!(run_loo(&data, &job).is_err());

        let single = gen_blobs(2, 1, 2, 4.0, 1).unwrap();
        let mut too_small_rows = Vec::new();
        too_small_rows.extend_from_slice(single.row(0));
        let tiny = Dataset::new(too_small_rows, vec![0], 2, 2).unwrap();
        assert!(run_loo(&tiny, &small_job(vec![0])).is_err());
    }
}
