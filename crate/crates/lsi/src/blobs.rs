//! Synthetic Gaussian-blob datasets.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Gaussian blobs: class means sit at the vertices of a regular simplex with
/// pairwise distance `separation`; within-class noise is unit isotropic.
/// Rows are grouped by class (class 0 first), `per_class` rows each.
///
/// A regular simplex with `classes` vertices needs `dim >= classes - 1`;
/// larger class counts are rejected.
pub fn gen_blobs(
    classes: u32,
    per_class: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes == 0 || per_class == 0 || dim == 0 {
        return Err(Error::InvalidArgument(
            "classes, per_class, and dim must be positive".into(),
        ));
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(Error::InvalidArgument(
            "separation must be finite and nonnegative".into(),
        ));
    }
    let c = classes as usize;
    if c > dim + 1 {
        return Err(Error::InvalidArgument(format!(
            "cannot place {c} equidistant class means in {dim} dimensions (need dim >= classes - 1)"
        )));
    }

    let means = simplex_means(c, dim, separation);
    let mut rng = Rng::new(seed);
    let n = c * per_class;
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (class, mean) in means.iter().enumerate() {
        for _ in 0..per_class {
            for &m in mean {
                features.push((m + rng.normal()) as f32);
            }
            labels.push(class as u32);
        }
    }
    Dataset::new(features, labels, dim, classes)
}

/// `c` points in `R^dim` with all pairwise distances equal to `separation`.
fn simplex_means(c: usize, dim: usize, separation: f64) -> Vec<Vec<f64>> {
    let scale = separation / (2.0f64).sqrt();
    if c <= dim {
        // Scaled basis vectors: |e_i - e_j| = sqrt(2).
        return (0..c)
            .map(|i| {
                let mut v = vec![0.0; dim];
                v[i] = scale;
                v
            })
            .collect();
    }

    // c == dim + 1: centered regular simplex. Take w_i = e_i - 1/c in R^c
    // (edge sqrt(2)), express in an orthonormal basis of the zero-sum
    // hyperplane, then scale.
    let big = c; // ambient dimension c = dim + 1
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for k in 0..dim {
        // u_k = e_k - e_{c-1}, then Gram-Schmidt.
        let mut u = vec![0.0; big];
        u[k] = 1.0;
        u[big - 1] = -1.0;
        for b in &basis {
            let dot: f64 = u.iter().zip(b).map(|(x, y)| x * y).sum();
            for (ui, bi) in u.iter_mut().zip(b) {
                *ui -= dot * bi;
            }
        }
        let norm: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        for ui in u.iter_mut() {
            *ui /= norm;
        }
        basis.push(u);
    }
    (0..c)
        .map(|i| {
            let mut w = vec![-1.0 / c as f64; big];
            w[i] += 1.0;
            basis
                .iter()
                .map(|b| scale * w.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
                .collect()
        })
        .collect()
}
