//! Rank and summary statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Average ranks (1-based); ties receive the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("non-finite value"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j share the same value; mean rank of that run.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of the average-rank vectors.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "spearman",
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::Degenerate(
            "spearman requires at least 2 observations".to_string(),
        ));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    pearson(&ra, &rb)
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        saa += dx * dx;
        sbb += dy * dy;
        sab += dx * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Degenerate(
            "zero rank variance (all values tied)".to_string(),
        ));
    }
    Ok(sab / (saa * sbb).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

/// Summary statistics over a sample of values.
///
/// Variance is the unbiased sample variance (n-1 denominator, 0 for n=1);
/// skewness is the moment coefficient g1 = m3 / m2^(3/2), defined as 0 when
/// the sample variance vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub variance: f64,
    pub skewness: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
}

pub const DEFAULT_HISTOGRAM_BINS: usize = 50;

pub fn summarize(values: &[f64]) -> Result<Summary> {
    summarize_with_bins(values, DEFAULT_HISTOGRAM_BINS)
}

pub fn summarize_with_bins(values: &[f64], bins: usize) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::EmptyInput("summarize"));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram bins must be > 0".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for &v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    let variance = if values.len() > 1 { m2 / (n - 1.0) } else { 0.0 };
    let central2 = m2 / n;
    let skewness = if central2 > 0.0 {
        (m3 / n) / central2.powf(1.5)
    } else {
        0.0
    };

    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value"));
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);

    let mut counts = vec![0u64; bins];
    let width = max - min;
    for &v in values {
        let idx = if width == 0.0 {
            0
        } else {
            // Half-open bins, except the last which closes at max.
            (((v - min) / width * bins as f64) as usize).min(bins - 1)
        };
        counts[idx] += 1;
    }

    Ok(Summary {
        mean,
        median,
        variance,
        skewness,
        min,
        max,
        histogram: Histogram {
            lo: min,
            hi: max,
            counts,
        },
    })
}

/// Median of a sample (convenience over [`summarize`] for sweep reports).
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("median"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value"));
    Ok(if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_identical_ranking() {
        assert_eq!(spearman(&[1.0, 5.0, 9.0], &[1.0, 5.0, 9.0]).unwrap(), 1.0);
    }

    #[test]
    fn spearman_reversed_ranking() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn spearman_single_swap() {
        // 1 - 6 * sum(d^2) / (n (n^2 - 1)) with sum(d^2) = 2, n = 3.
        let r = spearman(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spearman_error_paths() {
        assert!(spearman(&[1.0], &[1.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn ranks_average_ties() {
        let r = average_ranks(&[10.0, 20.0, 20.0, 30.0]);
        assert_eq!(r, vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn summarize_constant_sample() {
        let s = summarize(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.skewness, 0.0);
        assert_eq!(s.histogram.counts.iter().sum::<u64>(), 3);
    }

    #[test]
    fn summarize_right_tail_has_positive_skew() {
        let s = summarize(&[0.0, 0.0, 0.0, 0.0, 10.0]).unwrap();
        assert!(s.skewness > 0.0);
    }

    #[test]
    fn summarize_hand_values() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((s.mean - 2.5).abs() < 1e-15);
        assert!((s.median - 2.5).abs() < 1e-15);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 4.0);
    }

    #[test]
    fn summarize_rejects_empty() {
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn histogram_counts_sum_to_n() {
        let values: Vec<f64> = (0..137).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = summarize_with_bins(&values, 10).unwrap();
        assert_eq!(s.histogram.counts.len(), 10);
        assert_eq!(s.histogram.counts.iter().sum::<u64>(), 137);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Spearman only sees ranks, so any strictly increasing transform
            // of either argument leaves it bitwise unchanged.
            #[test]
            fn spearman_invariant_under_monotone_transforms(
                a in proptest::collection::vec(-100.0f64..100.0, 2..40),
                b_seed in 0u64..1000,
                scale in 0.01f64..10.0,
                offset in -50.0f64..50.0,
            ) {
                let mut rng = crate::rng::Rng::new(b_seed);
                let b: Vec<f64> = a.iter().map(|_| rng.normal()).collect();
                let base = match spearman(&a, &b) {
                    Ok(r) => r,
                    Err(_) => return Ok(()), // tied-constant draw
                };
                let affine: Vec<f64> = a.iter().map(|&x| scale * x + offset).collect();
                let cubed: Vec<f64> = b.iter().map(|&x| x * x * x).collect();
                prop_assert_eq!(spearman(&affine, &b).unwrap().to_bits(), base.to_bits());
                prop_assert_eq!(spearman(&a, &cubed).unwrap().to_bits(), base.to_bits());
                prop_assert!((-1.0..=1.0).contains(&base));
            }

            #[test]
            fn summary_bounds_hold(
                values in proptest::collection::vec(-1e6f64..1e6, 1..200),
            ) {
                let s = summarize(&values).unwrap();
                prop_assert!(s.min <= s.median && s.median <= s.max);
                prop_assert!(s.min <= s.mean && s.mean <= s.max);
                prop_assert!(s.variance >= 0.0);
                prop_assert_eq!(
                    s.histogram.counts.iter().sum::<u64>(),
                    values.len() as u64
                );
            }
        }
    }
}
