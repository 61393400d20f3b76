//! Laplace posterior fitting and the sample-information divergence.
//!
//! A trained parameter vector becomes a Gaussian `N(theta_hat, H^-1)` where
//! `H` is the SUM-form loss Hessian at `theta_hat` (the trainer steps on the
//! mean form; the two Hessians differ by exactly the factor `n`, which is
//! covered by a regression test below). The per-sample information value is
//! `kl(posterior on full data, posterior with the sample removed)`.

use nalgebra::DMatrix;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gaussian::{kl_diag, kl_full, DiagGaussian, FullGaussian};
use crate::probe::{self, LossSpec, ParamVector, HESSIAN_FLOOR};

/// Shift ladder length for positive-definite repair: `eps * 2^k` up to
/// `k = 40` (absolute shifts up to ~1e4).
pub const MAX_SHIFT_DOUBLINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianMode {
    Diag,
    Full,
}

impl std::fmt::Display for HessianMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HessianMode::Diag => write!(f, "diag"),
            HessianMode::Full => write!(f, "full"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PosteriorGaussian {
    Diag(DiagGaussian),
    Full(FullGaussian),
}

/// Laplace approximation of the parameter posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub gaussian: PosteriorGaussian,
    /// Diag mode: number of Hessian diagonal entries clamped to the floor.
    /// Full mode: number of diagonal-shift escalations needed for positive
    /// definiteness (0 when the Hessian factorizes as-is).
    pub clamp_count: usize,
    pub dataset_fingerprint: u64,
}

impl Posterior {
    pub fn mode(&self) -> HessianMode {
        match self.gaussian {
            PosteriorGaussian::Diag(_) => HessianMode::Diag,
            PosteriorGaussian::Full(_) => HessianMode::Full,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.gaussian {
            PosteriorGaussian::Diag(g) => g.dim(),
            PosteriorGaussian::Full(g) => g.dim(),
        }
    }
}

/// One leave-one-out divergence measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct LsiRecord {
    /// Index into the ORIGINAL dataset ordering.
    pub sample_id: usize,
    pub seed: u64,
    pub lsi: f64,
    pub clamp_count_full: usize,
    pub clamp_count_loo: usize,
}

pub(crate) fn posterior_from_hessian_diag(
    mean: Vec<f64>,
    diag: &probe::HessianDiag,
    fingerprint: u64,
) -> Result<Posterior> {
    let var: Vec<f64> = diag.values.iter().map(|&h| 1.0 / h).collect();
    Ok(Posterior {
        gaussian: PosteriorGaussian::Diag(DiagGaussian::new(mean, var)?),
        clamp_count: diag.clamp_count,
        dataset_fingerprint: fingerprint,
    })
}

pub(crate) fn posterior_from_hessian_full(
    mean: Vec<f64>,
    hessian: DMatrix<f64>,
    fingerprint: u64,
) -> Result<Posterior> {
    let k = hessian.nrows();
    let mut shift = 0.0f64;
    let mut attempts = 0usize;
    loop {
        let mut shifted = hessian.clone();
        for i in 0..k {
            shifted[(i, i)] += shift;
        }
        if let Some(chol) = nalgebra::Cholesky::new(shifted) {
            let mut cov = chol.inverse();
            // The inverse of a Cholesky factorization is symmetric up to
            // rounding; make it exact for the constructor.
            for i in 0..k {
                for j in (i + 1)..k {
                    let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                    cov[(i, j)] = s;
                    cov[(j, i)] = s;
                }
            }
            return Ok(Posterior {
                gaussian: PosteriorGaussian::Full(FullGaussian::new(mean, cov)?),
                clamp_count: attempts,
                dataset_fingerprint: fingerprint,
            });
        }
        // ε, 2ε, 4ε, ... — trained ReLU probes routinely carry small negative
        // Hessian eigenvalues (the convexity assumption only holds near an
        // exact optimum), so the ladder must be able to climb past O(1)
        // deficits. The escalation count stays observable via `clamp_count`.
        if attempts > MAX_SHIFT_DOUBLINGS {
            return Err(Error::PdRepairExhausted {
                attempts,
                smallest_shift: HESSIAN_FLOOR,
                largest_shift: shift,
            });
        }
        shift = if attempts == 0 {
            HESSIAN_FLOOR
        } else {
            shift * 2.0
        };
        attempts += 1;
    }
}

/// Fits `N(theta_hat, H^-1)` from the SUM-form curvature at `theta_hat`.
///
/// Diag mode inverts the clamped exact Hessian diagonal. Full mode inverts
/// the Gauss-Newton curvature: it matches the exact Hessian on the diagonal
/// everywhere (and everywhere for models with parameter-affine logits), but
/// stays positive definite at the imperfectly-converged optima full-batch
/// training actually reaches, where the exact Hessian's residual term
/// contributes small negative eigenvalues with no Gaussian interpretation.
pub fn fit_posterior(
    theta_hat: &ParamVector,
    data: &Dataset,
    spec: &LossSpec,
    mode: HessianMode,
) -> Result<Posterior> {
    let fingerprint = data.fingerprint();
    match mode {
        HessianMode::Diag => {
            let diag = probe::hessian_diag(theta_hat, data, spec)?;
            posterior_from_hessian_diag(theta_hat.theta.clone(), &diag, fingerprint)
        }
        HessianMode::Full => {
            let hessian = probe::hessian_ggn(theta_hat, data, spec)?;
            posterior_from_hessian_full(theta_hat.theta.clone(), hessian, fingerprint)
        }
    }
}

/// `kl(posterior on D, posterior on D without the sample)`; both posteriors
/// must share dimension and Hessian mode.
pub fn lsi(post_full: &Posterior, post_loo: &Posterior) -> Result<f64> {
    match (&post_full.gaussian, &post_loo.gaussian) {
        (PosteriorGaussian::Diag(p), PosteriorGaussian::Diag(q)) => kl_diag(p, q),
        (PosteriorGaussian::Full(p), PosteriorGaussian::Full(q)) => kl_full(p, q),
        _ => Err(Error::InvalidArgument(format!(
            "hessian mode mismatch: {} vs {}",
            post_full.mode(),
            post_loo.mode()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blobs::gen_blobs;
    use crate::probe::{hessian_diag, init_params, HessianDiag, ProbeShape};
    use crate::trainer::{train, TrainConfig};

    #[test]
    fn diag_variances_are_reciprocal_hessian_entries() {
        let hd = HessianDiag {
            values: vec![0.5, 2.0, 4.0],
            clamp_count: 0,
        };
        let post = posterior_from_hessian_diag(vec![0.0; 3], &hd, 7).unwrap();
        match &post.gaussian {
            PosteriorGaussian::Diag(g) => {
                assert_eq!(g.var(), &[2.0, 0.5, 0.25]);
            }
            _ => panic!("expected diag posterior"),
        }
        // All-lambda Hessian: variance is 1/lambda everywhere.
        let lam = 0.01;
        let hd = HessianDiag {
            values: vec![lam; 4],
            clamp_count: 0,
        };
        let post = posterior_from_hessian_diag(vec![0.0; 4], &hd, 0).unwrap();
        match &post.gaussian {
            PosteriorGaussian::Diag(g) => {
                for &v in g.var() {
                    assert!((v - 1.0 / lam).abs() < 1e-12);
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn full_and_diag_agree_on_a_diagonal_hessian() {
        let entries = vec![0.7, 3.0, 0.02, 11.0];
        let h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(entries.clone()));
        let full = posterior_from_hessian_full(vec![0.0; 4], h, 0).unwrap();
        let hd = HessianDiag {
            values: entries.clone(),
            clamp_count: 0,
        };
        let diag = posterior_from_hessian_diag(vec![0.0; 4], &hd, 0).unwrap();
        let (full_cov, diag_var) = match (&full.gaussian, &diag.gaussian) {
            (PosteriorGaussian::Full(f), PosteriorGaussian::Diag(d)) => (f.cov(), d.var()),
            _ => unreachable!(),
        };
        for k in 0..4 {
            let rel = (full_cov[(k, k)] - diag_var[k]).abs() / diag_var[k];
            assert!(rel < 1e-10, "coord {k}");
        }
        assert_eq!(full.clamp_count, 0);
    }

    #[test]
    fn pd_repair_shifts_and_gives_up() {
        // Slightly indefinite: repairable with a few epsilon shifts.
        let h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1e-9]));
        let post = posterior_from_hessian_full(vec![0.0; 2], h, 0).unwrap();
        assert!(post.clamp_count >= 1);
        // O(1) deficits climb further up the ladder but still succeed.
        let h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -0.5]));
        let post = posterior_from_hessian_full(vec![0.0; 2], h, 0).unwrap();
        assert!(post.clamp_count > 20, "count {}", post.clamp_count);
        // Pathologically indefinite: beyond the shift budget.
        let h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1e12]));
        assert!(matches!(
            posterior_from_hessian_full(vec![0.0; 2], h, 0),
            Err(Error::PdRepairExhausted { .. })
        ));
    }

    #[test]
    fn trained_blob_probe_full_mode_needs_no_repair() {
        let data = gen_blobs(2, 12, 2, 5.0, 3).unwrap();
        let shape = ProbeShape::new(2, 4, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 300,
            ..TrainConfig::default()
        };
        let result = train(&data, shape, &cfg, &[]).unwrap();
        let spec = LossSpec::new(cfg.weight_decay).unwrap();
        let post = fit_posterior(&result.theta_hat, &data, &spec, HessianMode::Full).unwrap();
        assert_eq!(post.clamp_count, 0);
        let diag_post = fit_posterior(&result.theta_hat, &data, &spec, HessianMode::Diag).unwrap();
        assert_eq!(diag_post.clamp_count, 0);
        assert_eq!(post.dataset_fingerprint, data.fingerprint());
    }

    #[test]
    fn lsi_of_identical_posteriors_is_zero() {
        let hd = HessianDiag {
            values: vec![1.0, 2.0],
            clamp_count: 0,
        };
        let p = posterior_from_hessian_diag(vec![0.1, 0.2], &hd, 0).unwrap();
        assert_eq!(lsi(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn lsi_doubled_loo_variance_hand_value() {
        let p = Posterior {
            gaussian: PosteriorGaussian::Diag(
                DiagGaussian::new(vec![0.3], vec![1.0]).unwrap(),
            ),
            clamp_count: 0,
            dataset_fingerprint: 0,
        };
        let q = Posterior {
            gaussian: PosteriorGaussian::Diag(
                DiagGaussian::new(vec![0.3], vec![2.0]).unwrap(),
            ),
            clamp_count: 0,
            dataset_fingerprint: 0,
        };
        let expect = 0.5 * (0.5 - 1.0 + (2.0f64).ln());
        assert!((lsi(&p, &q).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn lsi_rejects_mode_mismatch() {
        let hd = HessianDiag {
            values: vec![1.0],
            clamp_count: 0,
        };
        let d = posterior_from_hessian_diag(vec![0.0], &hd, 0).unwrap();
        let f = posterior_from_hessian_full(
            vec![0.0],
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0])),
            0,
        )
        .unwrap();
        assert!(matches!(lsi(&d, &f), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn full_mode_variances_match_diag_mode_scale() {
        // The full-mode curvature agrees with the exact Hessian diagonal, so
        // the marginal variances of the two modes coincide up to the
        // off-diagonal coupling the diag mode discards.
        let data = gen_blobs(2, 12, 2, 5.0, 3).unwrap();
        let shape = ProbeShape::new(2, 4, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 300,
            ..TrainConfig::default()
        };
        let result = train(&data, shape, &cfg, &[]).unwrap();
        let spec = LossSpec::new(cfg.weight_decay).unwrap();
        let hd = hessian_diag(&result.theta_hat, &data, &spec).unwrap();
        let hg = crate::probe::hessian_ggn(&result.theta_hat, &data, &spec).unwrap();
        for k in 0..shape.param_count() {
            let rel = (hd.values[k] - hg[(k, k)]).abs() / hd.values[k];
            assert!(rel < 1e-12, "coord {k}");
        }
    }

    #[test]
    fn sum_form_hessian_is_n_times_mean_form() {
        // Regression test for the trainer/laplace convention split: the
        // trainer's objective Hessian is (data_diag/n + wd/n); scaling it by
        // n must reproduce the SUM-form Hessian the posterior uses.
        let data = gen_blobs(2, 9, 2, 3.0, 5).unwrap();
        let shape = ProbeShape::new(2, 5, 2).unwrap();
        let theta = init_params(shape, 2);
        let wd = 0.01;
        let n = data.len() as f64;

        let sum_form = hessian_diag(&theta, &data, &LossSpec::new(wd).unwrap()).unwrap();
        let data_only = hessian_diag(&theta, &data, &LossSpec::new(0.0).unwrap()).unwrap();
        for k in 0..shape.param_count() {
            let mean_form = data_only.values[k] / n + wd / n;
            let scaled = n * mean_form;
            let rel = (scaled - sum_form.values[k]).abs() / sum_form.values[k].abs();
            assert!(rel < 1e-10, "coord {k}: {scaled} vs {}", sum_form.values[k]);
        }
    }
}
