//! Corruption, partitioning, dataset-size, and DP sweep studies built on the
//! leave-one-out engine.

use std::collections::BTreeSet;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::loo::{run_loo, LooJob, LsiTable};
use crate::probe::{accuracy, ProbeShape};
use crate::rng::Rng;
use crate::stats::{average_ranks, median};
use crate::trainer::{train, DpConfig, TrainConfig};

/// Flips the labels of exactly `round(rate * n)` rows, chosen uniformly
/// without replacement; each new label is drawn uniformly from the other
/// `C - 1` classes, so a flipped label always differs from the original.
pub fn corrupt_labels(
    data: &Dataset,
    rate: f64,
    seed: u64,
) -> Result<(Dataset, BTreeSet<usize>)> {
    if data.num_classes() < 2 {
        return Err(Error::InvalidArgument(
            "label flips need at least 2 classes".into(),
        ));
    }
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument("flip rate must be in [0, 1]".into()));
    }
    let n = data.len();
    let count = (rate * n as f64).round() as usize;
    let mut rng = Rng::new(seed);

    // Partial Fisher-Yates: the first `count` entries are a uniform draw
    // without replacement.
    let mut ids: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = i + rng.next_below((n - i) as u64) as usize;
        ids.swap(i, j);
    }
    let flipped: BTreeSet<usize> = ids[..count].iter().copied().collect();

    let mut labels = data.labels().to_vec();
    for &i in &flipped {
        let old = labels[i];
        let draw = rng.next_below(data.num_classes() as u64 - 1) as u32;
        labels[i] = if draw >= old { draw + 1 } else { draw };
    }
    let corrupted = Dataset::new(
        data.features().to_vec(),
        labels,
        data.dim(),
        data.num_classes(),
    )?;
    Ok((corrupted, flipped))
}

/// Adds i.i.d. Gaussian noise to every feature of every row in `class_id`,
/// with per-dimension std `scale` times that dimension's pre-corruption
/// sample std within the class. Other rows are untouched.
pub fn corrupt_class_features(
    data: &Dataset,
    class_id: u32,
    scale: f64,
    seed: u64,
) -> Result<Dataset> {
    if class_id >= data.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "class {class_id} out of range"
        )));
    }
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::InvalidArgument(
            "noise scale must be finite and nonnegative".into(),
        ));
    }
    let rows = data.class_rows(class_id);
    if rows.len() < 2 {
        return Err(Error::Degenerate(format!(
            "class {class_id} has {} samples; need >= 2 for a std estimate",
            rows.len()
        )));
    }
    if scale == 0.0 {
        return Ok(data.clone());
    }

    let d = data.dim();
    let m = rows.len() as f64;
    let mut mean = vec![0.0f64; d];
    for &r in &rows {
        for (j, &v) in data.row(r).iter().enumerate() {
            mean[j] += v as f64 / m;
        }
    }
    let mut std = vec![0.0f64; d];
    for &r in &rows {
        for (j, &v) in data.row(r).iter().enumerate() {
            let dv = v as f64 - mean[j];
            std[j] += dv * dv;
        }
    }
    for s in std.iter_mut() {
        *s = (*s / (m - 1.0)).sqrt();
    }

    let mut rng = Rng::new(seed);
    let mut features = data.features().to_vec();
    for &r in &rows {
        for j in 0..d {
            let noisy = features[r * d + j] as f64 + scale * std[j] * rng.normal();
            features[r * d + j] = noisy as f32;
        }
    }
    Dataset::new(features, data.labels().to_vec(), d, data.num_classes())
}

/// One block of an information-stratified partition.
#[derive(Debug, Clone)]
pub struct PartitionBlock {
    pub data: Dataset,
    /// Original row ids, ascending.
    pub ids: Vec<usize>,
}

/// Low/mid/high split by per-class mean LSI rank.
#[derive(Debug, Clone)]
pub struct LsiPartition {
    pub low: PartitionBlock,
    pub mid: PartitionBlock,
    pub high: PartitionBlock,
}

/// Splits per class by ascending mean value (ties by sample id) at the
/// cumulative fraction boundaries: sizes floor at the low/mid boundaries,
/// the remainder goes to the high block. Class proportions are preserved
/// within one sample per class.
pub fn partition_by_lsi(
    data: &Dataset,
    per_sample_mean: &[f64],
    fractions: [f64; 3],
) -> Result<LsiPartition> {
    if per_sample_mean.len() != data.len() {
        return Err(Error::DimensionMismatch {
            context: "partition ordering vs dataset",
            expected: data.len(),
            got: per_sample_mean.len(),
        });
    }
    let total: f64 = fractions.iter().sum();
    if fractions.iter().any(|&f| f < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(
            "fractions must be nonnegative and sum to 1".into(),
        ));
    }

    let mut blocks: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for class in 0..data.num_classes() {
        let mut rows = data.class_rows(class);
        rows.sort_by(|&a, &b| {
            per_sample_mean[a]
                .partial_cmp(&per_sample_mean[b])
                .expect("non-finite value")
                .then(a.cmp(&b))
        });
        let m = rows.len();
        let c0 = (fractions[0] * m as f64).floor() as usize;
        let c1 = ((fractions[0] + fractions[1]) * m as f64).floor() as usize;
        let c1 = c1.max(c0).min(m);
        blocks[0].extend_from_slice(&rows[..c0]);
        blocks[1].extend_from_slice(&rows[c0..c1]);
        blocks[2].extend_from_slice(&rows[c1..]);
    }
    let make = |ids: &mut Vec<usize>| -> Result<PartitionBlock> {
        ids.sort_unstable();
        Ok(PartitionBlock {
            data: data.select(ids)?,
            ids: ids.clone(),
        })
    };
    Ok(LsiPartition {
        low: make(&mut blocks[0])?,
        mid: make(&mut blocks[1])?,
        high: make(&mut blocks[2])?,
    })
}

/// Accuracy traces for one partition block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCurve {
    /// (epoch, train accuracy on the block, test accuracy on the holdout).
    pub points: Vec<(usize, f64, f64)>,
    /// Majority-class baseline of the training block.
    pub train_baseline: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetCurves {
    pub low: BlockCurve,
    pub mid: BlockCurve,
    pub high: BlockCurve,
    /// Majority-class baseline of the holdout split.
    pub test_baseline: f64,
}

/// Trains one probe per block, reporting train/test accuracy at every
/// checkpoint epoch plus majority-class baselines.
pub fn subset_curves(
    partition: &LsiPartition,
    holdout: &Dataset,
    shape: ProbeShape,
    cfg: &TrainConfig,
    checkpoint_epochs: &[usize],
) -> Result<SubsetCurves> {
    if checkpoint_epochs.is_empty() {
        return Err(Error::EmptyInput("checkpoint epochs"));
    }
    let curve = |block: &PartitionBlock| -> Result<BlockCurve> {
        let result = train(&block.data, shape, cfg, checkpoint_epochs)?;
        let mut points = Vec::with_capacity(result.checkpoints.len());
        for (epoch, theta) in &result.checkpoints {
            points.push((
                *epoch,
                accuracy(theta, &block.data)?,
                accuracy(theta, holdout)?,
            ));
        }
        Ok(BlockCurve {
            points,
            train_baseline: block.data.majority_fraction(),
        })
    };
    Ok(SubsetCurves {
        low: curve(&partition.low)?,
        mid: curve(&partition.mid)?,
        high: curve(&partition.high)?,
        test_baseline: holdout.majority_fraction(),
    })
}

#[derive(Debug, Clone)]
pub struct SizeEffect {
    pub full: LsiTable,
    pub subset: LsiTable,
    pub subset_ids: Vec<usize>,
    pub median_full: f64,
    pub median_subset: f64,
    /// median(subset) / median(full).
    pub median_ratio: f64,
}

/// Runs the leave-one-out computation on the full dataset and on a
/// label-stratified uniform subsample of the given fraction, reporting the
/// ratio of median values. Per-class subset counts are `round(fraction * m)`
/// clamped to `1..=m`.
pub fn size_effect(
    data: &Dataset,
    fraction: f64,
    seed: u64,
    job: &LooJob,
) -> Result<SizeEffect> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument("fraction must be in (0, 1]".into()));
    }
    let mut rng = Rng::new(seed);
    let mut subset_ids: Vec<usize> = Vec::new();
    for class in 0..data.num_classes() {
        let mut rows = data.class_rows(class);
        if rows.is_empty() {
            continue;
        }
        let want = ((fraction * rows.len() as f64).round() as usize).clamp(1, rows.len());
        for i in 0..want {
            let j = i + rng.next_below((rows.len() - i) as u64) as usize;
            rows.swap(i, j);
        }
        subset_ids.extend_from_slice(&rows[..want]);
    }
    subset_ids.sort_unstable();
    if subset_ids.len() < 2 {
        return Err(Error::Degenerate(
            "stratified subset has fewer than 2 samples".to_string(),
        ));
    }
    let subset_data = data.select(&subset_ids)?;

    let full = run_loo(data, job)?;
    let subset = run_loo(&subset_data, job)?;
    let median_full = median(&full.per_sample_mean)?;
    let median_subset = median(&subset.per_sample_mean)?;
    Ok(SizeEffect {
        median_ratio: median_subset / median_full,
        median_full,
        median_subset,
        full,
        subset,
        subset_ids,
    })
}

#[derive(Debug, Clone)]
pub struct DpCell {
    pub clip_norm: f64,
    pub noise_multiplier: f64,
    pub table: LsiTable,
}

/// Full LOO computation per `(clip, sigma)` grid cell using the DP trainer.
/// `noise_seed` tags the DP noise streams; the grid order is the Cartesian
/// product in the order given.
pub fn dp_sweep(
    data: &Dataset,
    clip_norms: &[f64],
    sigmas: &[f64],
    noise_seed: u64,
    job: &LooJob,
) -> Result<Vec<DpCell>> {
    if clip_norms.is_empty() || sigmas.is_empty() {
        return Err(Error::EmptyInput("dp sweep grid"));
    }
    let mut cells = Vec::with_capacity(clip_norms.len() * sigmas.len());
    for &clip_norm in clip_norms {
        for &noise_multiplier in sigmas {
            let mut cell_job = job.clone();
            cell_job.dp = Some(DpConfig {
                clip_norm,
                noise_multiplier,
                noise_seed,
            });
            let table = run_loo(data, &cell_job)?;
            cells.push(DpCell {
                clip_norm,
                noise_multiplier,
                table,
            });
        }
    }
    Ok(cells)
}

/// AUROC of the mean LSI as a score for membership in `positives`
/// (rank-based, ties averaged).
pub fn mislabel_auroc(table: &LsiTable, positives: &BTreeSet<usize>) -> Result<f64> {
    auroc_from_scores(&table.per_sample_mean, positives)
}

/// Rank-based AUROC (Mann-Whitney form) of `scores` against the indicator of
/// `positives`.
pub fn auroc_from_scores(scores: &[f64], positives: &BTreeSet<usize>) -> Result<f64> {
    let n = scores.len();
    if positives.is_empty() {
        return Err(Error::EmptyInput("positive set"));
    }
    if positives.len() >= n || positives.iter().any(|&i| i >= n) {
        return Err(Error::InvalidArgument(
            "positives must be a proper subset of sample ids".into(),
        ));
    }
    let ranks = average_ranks(scores);
    let n_pos = positives.len() as f64;
    let n_neg = (n - positives.len()) as f64;
    let rank_sum: f64 = positives.iter().map(|&i| ranks[i]).sum();
    Ok((rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blobs::gen_blobs;
    use crate::laplace::LsiRecord;

    fn table_with_means(means: &[f64]) -> LsiTable {
        LsiTable {
            records: means
                .iter()
                .enumerate()
                .map(|(i, &m)| LsiRecord {
                    sample_id: i,
                    seed: 0,
                    lsi: m,
                    clamp_count_full: 0,
                    clamp_count_loo: 0,
                })
                .collect(),
            seeds: vec![0],
            per_sample_mean: means.to_vec(),
            ranking: crate::loo::ranking_of(means),
            checkpoint_mean_lsi: Default::default(),
        }
    }

    #[test]
    fn corrupt_labels_zero_rate_is_identity() {
        let data = gen_blobs(2, 10, 2, 4.0, 1).unwrap();
        let (out, flipped) = corrupt_labels(&data, 0.0, 5).unwrap();
        assert_eq!(out, data);
        assert!(flipped.is_empty());
    }

    #[test]
    fn corrupt_labels_full_rate_changes_every_label() {
        let data = gen_blobs(3, 10, 3, 4.0, 1).unwrap();
        let (out, flipped) = corrupt_labels(&data, 1.0, 5).unwrap();
        assert_eq!(flipped.len(), 30);
        for i in 0..30 {
            assert_ne!(out.label(i), data.label(i), "row {i}");
        }
    }

    #[test]
    fn corrupt_labels_exact_count_and_reproducible() {
        let data = gen_blobs(2, 50, 2, 4.0, 1).unwrap();
        let (a, flipped_a) = corrupt_labels(&data, 0.1, 7).unwrap();
        let (b, flipped_b) = corrupt_labels(&data, 0.1, 7).unwrap();
        assert_eq!(flipped_a.len(), 10);
        assert_eq!(flipped_a, flipped_b);
        assert_eq!(a, b);
        let (_, flipped_c) = corrupt_labels(&data, 0.1, 8).unwrap();
        assert_ne!(flipped_a, flipped_c);
        for &i in &flipped_a {
            assert_ne!(a.label(i), data.label(i));
        }
    }

    #[test]
    fn corrupt_labels_rejects_single_class() {
        let data = Dataset::new(vec![0.0, 1.0], vec![0, 0], 1, 1).unwrap();
        assert!(corrupt_labels(&data, 0.5, 0).is_err());
    }

    #[test]
    fn class_noise_targets_only_the_class() {
        let data = gen_blobs(2, 20, 3, 4.0, 2).unwrap();
        let out = corrupt_class_features(&data, 1, 0.5, 9).unwrap();
        for &r in &data.class_rows(0) {
            assert_eq!(data.row(r), out.row(r), "row {r} must be untouched");
        }
        let changed = data
            .class_rows(1)
            .iter()
            .filter(|&&r| data.row(r) != out.row(r))
            .count();
        assert_eq!(changed, 20);
    }

    #[test]
    fn class_noise_zero_scale_is_identity() {
        let data = gen_blobs(2, 5, 2, 4.0, 2).unwrap();
        assert_eq!(corrupt_class_features(&data, 0, 0.0, 1).unwrap(), data);
    }

    #[test]
    fn class_noise_matches_requested_std() {
        let data = gen_blobs(2, 300, 4, 4.0, 3).unwrap();
        let out = corrupt_class_features(&data, 0, 1.0, 11).unwrap();
        let rows = data.class_rows(0);
        // Per-dimension std of the injected noise should be close to the
        // class's own std (which is ~1 by construction).
        for j in 0..4 {
            let mut diffs: Vec<f64> = rows
                .iter()
                .map(|&r| out.row(r)[j] as f64 - data.row(r)[j] as f64)
                .collect();
            let m = diffs.iter().sum::<f64>() / diffs.len() as f64;
            for d in diffs.iter_mut() {
                *d -= m;
            }
            let var = diffs.iter().map(|d| d * d).sum::<f64>() / (diffs.len() - 1) as f64;
            let ratio = var.sqrt(); // target std ~ 1.0
            assert!((0.9..=1.1).contains(&ratio), "dim {j}: noise std {ratio}");
        }
    }

    #[test]
    fn class_noise_needs_two_samples() {
        let data = Dataset::new(vec![0.0, 1.0, 2.0, 3.0], vec![0, 1], 2, 2).unwrap();
        assert!(matches!(
            corrupt_class_features(&data, 0, 1.0, 0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn partition_thirds_are_exact_on_divisible_classes() {
        let data = gen_blobs(2, 6, 2, 4.0, 4).unwrap();
        let means: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let p = partition_by_lsi(&data, &means, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        for block in [&p.low, &p.mid, &p.high] {
            assert_eq!(block.data.len(), 4);
            for class in 0..2 {
                assert_eq!(block.data.class_rows(class).len(), 2);
            }
        }
        // Disjoint union equals the input id set.
        let mut all: Vec<usize> = p
            .low
            .ids
            .iter()
            .chain(&p.mid.ids)
            .chain(&p.high.ids)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn partition_ties_break_by_sample_id() {
        let data = gen_blobs(1, 6, 2, 0.0, 4).unwrap();
        let means = vec![5.0; 6];
        let p = partition_by_lsi(&data, &means, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert_eq!(p.low.ids, vec![0, 1]);
        assert_eq!(p.mid.ids, vec![2, 3]);
        assert_eq!(p.high.ids, vec![4, 5]);
    }

    #[test]
    fn partition_rejects_mismatched_ordering() {
        let data = gen_blobs(2, 3, 2, 4.0, 4).unwrap();
        assert!(partition_by_lsi(&data, &[0.0; 5], [0.4, 0.3, 0.3]).is_err());
        assert!(partition_by_lsi(&data, &[0.0; 6], [0.5, 0.3, 0.3]).is_err());
    }

    #[test]
    fn auroc_hand_values() {
        let table = table_with_means(&[0.1, 0.2, 0.9, 0.8]);
        let top: BTreeSet<usize> = [2, 3].into_iter().collect();
        assert_eq!(mislabel_auroc(&table, &top).unwrap(), 1.0);
        let bottom: BTreeSet<usize> = [0, 1].into_iter().collect();
        assert_eq!(mislabel_auroc(&table, &bottom).unwrap(), 0.0);

        let flat = table_with_means(&[0.5; 6]);
        let some: BTreeSet<usize> = [1, 4].into_iter().collect();
        assert_eq!(mislabel_auroc(&flat, &some).unwrap(), 0.5);
    }

    #[test]
    fn auroc_rejects_degenerate_sets() {
        let table = table_with_means(&[0.1, 0.2, 0.3]);
        assert!(mislabel_auroc(&table, &BTreeSet::new()).is_err());
        let all: BTreeSet<usize> = (0..3).collect();
        assert!(mislabel_auroc(&table, &all).is_err());
        let out_of_range: BTreeSet<usize> = [7].into_iter().collect();
        assert!(mislabel_auroc(&table, &out_of_range).is_err());
    }

    #[test]
    fn size_effect_degenerate_fraction_gives_ratio_one() {
        let data = gen_blobs(2, 4, 2, 4.0, 6).unwrap();
        let shape = ProbeShape::new(2, 3, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 80,
            ..TrainConfig::default()
        };
        let job = LooJob::new(shape, cfg, vec![0]);
        let effect = size_effect(&data, 1.0, 3, &job).unwrap();
        assert_eq!(effect.subset_ids, (0..8).collect::<Vec<_>>());
        assert!((effect.median_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn size_effect_subset_counts_are_stratified() {
        let data = gen_blobs(2, 10, 2, 4.0, 6).unwrap();
        let shape = ProbeShape::new(2, 3, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 40,
            ..TrainConfig::default()
        };
        let job = LooJob::new(shape, cfg, vec![0]);
        let effect = size_effect(&data, 0.2, 3, &job).unwrap();
        assert_eq!(effect.subset.num_samples(), 4);
        let subset_data = data.select(&effect.subset_ids).unwrap();
        for class in 0..2 {
            assert_eq!(subset_data.class_rows(class).len(), 2);
        }
    }

    #[test]
    fn dp_sweep_disabled_cell_matches_plain_run() {
        let data = gen_blobs(2, 4, 2, 4.0, 8).unwrap();
        let shape = ProbeShape::new(2, 3, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 60,
            ..TrainConfig::default()
        };
        let job = LooJob::new(shape, cfg, vec![0, 1]);
        let plain = run_loo(&data, &job).unwrap();
        let cells = dp_sweep(&data, &[f64::INFINITY], &[0.0], 123, &job).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].table, plain);
    }
}
