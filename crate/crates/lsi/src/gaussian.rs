//! Gaussian posteriors and closed-form KL divergence.
//!
//! Divergences are always taken as `kl(p, q)` with `p` the posterior fitted
//! on the full dataset and `q` the posterior fitted on the dataset with one
//! sample removed. Log-determinants are accumulated as sums of logs of
//! factor diagonals, never as products of variances.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Gaussian with diagonal covariance, stored as per-coordinate variances.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::DimensionMismatch {
                context: "DiagGaussian mean vs var",
                expected: mean.len(),
                got: var.len(),
            });
        }
        if let Some((index, &value)) = var
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::NonPositiveVariance { index, value });
        }
        Ok(DiagGaussian { mean, var })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }
}

/// Gaussian with a full symmetric positive-definite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FullGaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl FullGaussian {
    /// Validates symmetry (1e-10 relative to the largest entry) and positive
    /// definiteness (via a successful Cholesky factorization).
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let k = mean.len();
        if cov.nrows() != k || cov.ncols() != k {
            return Err(Error::DimensionMismatch {
                context: "FullGaussian mean vs cov",
                expected: k,
                got: cov.nrows(),
            });
        }
        let max_abs = cov.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-10 * max_abs.max(1e-300);
        for i in 0..k {
            for j in (i + 1)..k {
                if (cov[(i, j)] - cov[(j, i)]).abs() > tol {
                    return Err(Error::NotPositiveDefinite(format!(
                        "asymmetric at ({i},{j}): {} vs {}",
                        cov[(i, j)],
                        cov[(j, i)]
                    )));
                }
            }
        }
        if Cholesky::new(cov.clone()).is_none() {
            return Err(Error::NotPositiveDefinite(
                "Cholesky factorization failed".to_string(),
            ));
        }
        Ok(FullGaussian {
            mean: DVector::from_vec(mean),
            cov,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    fn cholesky(&self) -> Result<Cholesky<f64, nalgebra::Dyn>> {
        Cholesky::new(self.cov.clone()).ok_or_else(|| {
            Error::NotPositiveDefinite("Cholesky factorization failed".to_string())
        })
    }
}

/// KL(p || q) for diagonal Gaussians:
/// `1/2 sum_k [ p.var/q.var - 1 - ln(p.var/q.var) + (q.mean - p.mean)^2 / q.var ]`.
///
/// Each summand is evaluated as `x - ln_1p(x)` with `x = (p.var - q.var)/q.var`
/// plus the quadratic term, so every contribution is nonnegative and the
/// result stays accurate when the two posteriors are nearly identical.
pub fn kl_diag(p: &DiagGaussian, q: &DiagGaussian) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            context: "kl_diag",
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let mut acc = 0.0;
    for k in 0..p.dim() {
        let x = (p.var[k] - q.var[k]) / q.var[k];
        let dm = q.mean[k] - p.mean[k];
        acc += x - x.ln_1p() + dm * dm / q.var[k];
    }
    Ok(0.5 * acc)
}

/// KL(p || q) for full-covariance Gaussians:
/// `1/2 [ tr(Sq^-1 Sp) - K + (mq - mp)^T Sq^-1 (mq - mp) + ln(det Sq / det Sp) ]`.
///
/// Evaluated through the Cholesky factors `Sp = Lp Lp^T`, `Sq = Lq Lq^T` with
/// `M = Lq^-1 Lp`: the trace becomes `||M||_F^2`, the log-det ratio
/// `-2 sum ln M_ii`, and the quadratic form `||Lq^-1 (mq - mp)||^2`. Grouping
/// `M_ii^2 - 1 - 2 ln M_ii` per coordinate keeps every term nonnegative.
pub fn kl_full(p: &FullGaussian, q: &FullGaussian) -> Result<f64> {
    let k = p.dim();
    if q.dim() != k {
        return Err(Error::DimensionMismatch {
            context: "kl_full",
            expected: k,
            got: q.dim(),
        });
    }
    let chol_p = p.cholesky()?;
    let chol_q = q.cholesky()?;
    // `l_dirty` leaves garbage above the diagonal; only the lower triangle is
    // read below.
    let lp = chol_p.l_dirty();
    let lq = chol_q.l_dirty();

    // M = Lq^-1 Lp by forward substitution, one column at a time.
    let mut acc = 0.0;
    let mut col = vec![0.0f64; k];
    for j in 0..k {
        col[..j].fill(0.0);
        for i in j..k {
            col[i] = lp[(i, j)];
        }
        forward_substitute(lq, &mut col);
        // Column j of the lower-triangular M: rows j.. hold data, with the
        // diagonal element at row j.
        for (i, &v) in col.iter().enumerate().skip(j) {
            if i == j {
                let u = v * v - 1.0;
                acc += u - u.ln_1p(); // M_jj^2 - 1 - 2 ln M_jj
            } else {
                acc += v * v;
            }
        }
    }

    let mut dm: Vec<f64> = (0..k).map(|i| q.mean[i] - p.mean[i]).collect();
    forward_substitute(lq, &mut dm);
    acc += dm.iter().map(|v| v * v).sum::<f64>();

    Ok(0.5 * acc)
}

/// Solves `L x = b` in place for lower-triangular `L`.
fn forward_substitute(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l[(i, j)] * b[j];
        }
        b[i] = s / l[(i, i)];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(mean: &[f64], var: &[f64]) -> DiagGaussian {
        DiagGaussian::new(mean.to_vec(), var.to_vec()).unwrap()
    }

    #[test]
    fn kl_diag_identical_is_exactly_zero() {
        let p = diag(&[0.3, -1.2, 4.0], &[0.5, 2.0, 0.01]);
        assert_eq!(kl_diag(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_diag_unit_variance_mean_shift() {
        // K=1, N(0,1) vs N(1,1): (delta mu)^2 / 2 = 0.5.
        let p = diag(&[0.0], &[1.0]);
        let q = diag(&[1.0], &[1.0]);
        assert!((kl_diag(&p, &q).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kl_diag_variance_ratio() {
        // K=1, N(0,2) vs N(0,1): (2 - 1 + ln(1/2)) / 2, cross-checked against
        // the Monte-Carlo oracle in tests/kl_oracle.rs.
        let p = diag(&[0.0], &[2.0]);
        let q = diag(&[0.0], &[1.0]);
        let expect = 0.5 * (2.0 - 1.0 + (0.5f64).ln());
        assert!((kl_diag(&p, &q).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn kl_diag_rejects_bad_inputs() {
        let p = diag(&[0.0], &[1.0]);
        let q = diag(&[0.0, 1.0], &[1.0, 1.0]);
        assert!(matches!(
            kl_diag(&p, &q),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            DiagGaussian::new(vec![0.0], vec![0.0]),
            Err(Error::NonPositiveVariance { .. })
        ));
        assert!(matches!(
            DiagGaussian::new(vec![0.0], vec![-1.0]),
            Err(Error::NonPositiveVariance { .. })
        ));
    }

    #[test]
    fn kl_full_identical_is_zero() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let p = FullGaussian::new(vec![1.0, -1.0], cov).unwrap();
        let v = kl_full(&p, &p).unwrap();
        assert!(v.abs() < 1e-14, "{v}");
    }

    #[test]
    fn kl_full_reduces_to_kl_diag_on_diagonal_covariances() {
        let mean_p = vec![0.1, -0.4, 2.0, 0.0];
        let mean_q = vec![0.0, 0.2, 1.5, -0.3];
        let var_p = vec![0.7, 1.3, 0.2, 4.0];
        let var_q = vec![1.1, 0.9, 0.25, 3.0];
        let dp = diag(&mean_p, &var_p);
        let dq = diag(&mean_q, &var_q);
        let fp = FullGaussian::new(mean_p, DMatrix::from_diagonal(&DVector::from_vec(var_p)))
            .unwrap();
        let fq = FullGaussian::new(mean_q, DMatrix::from_diagonal(&DVector::from_vec(var_q)))
            .unwrap();
        let a = kl_diag(&dp, &dq).unwrap();
        let b = kl_full(&fp, &fq).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn full_gaussian_rejects_non_pd_and_asymmetric() {
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            FullGaussian::new(vec![0.0, 0.0], not_pd),
            Err(Error::NotPositiveDefinite(_))
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.1, 1.0]);
        assert!(FullGaussian::new(vec![0.0, 0.0], asym).is_err());
    }

    #[test]
    fn kl_is_asymmetric_in_its_arguments() {
        let p = diag(&[0.0], &[2.0]);
        let q = diag(&[0.0], &[1.0]);
        let pq = kl_diag(&p, &q).unwrap();
        let qp = kl_diag(&q, &p).unwrap();
        assert!((pq - qp).abs() > 1e-3);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn gaussian_pair() -> impl Strategy<Value = (DiagGaussian, DiagGaussian)> {
            (1usize..8).prop_flat_map(|k| {
                let means = proptest::collection::vec(-5.0f64..5.0, k);
                let vars = proptest::collection::vec(0.05f64..10.0, k);
                (means.clone(), vars.clone(), means, vars).prop_map(|(mp, vp, mq, vq)| {
                    (
                        DiagGaussian::new(mp, vp).unwrap(),
                        DiagGaussian::new(mq, vq).unwrap(),
                    )
                })
            })
        }

        proptest! {
            #[test]
            fn kl_diag_is_nonnegative((p, q) in gaussian_pair()) {
                let v = kl_diag(&p, &q).unwrap();
                prop_assert!(v >= 0.0, "kl = {v}");
            }

            #[test]
            fn kl_diag_is_zero_iff_equal((p, q) in gaussian_pair()) {
                prop_assert_eq!(kl_diag(&p, &p).unwrap(), 0.0);
                let v = kl_diag(&p, &q).unwrap();
                if v <= 1e-12 {
                    for k in 0..p.dim() {
                        prop_assert!((p.mean()[k] - q.mean()[k]).abs() < 1e-5);
                        prop_assert!((p.var()[k] - q.var()[k]).abs() / q.var()[k] < 1e-5);
                    }
                }
            }

            #[test]
            fn kl_full_is_nonnegative_on_random_pd_pairs(
                k in 1usize..6,
                seed in 0u64..1000,
            ) {
                let mut rng = crate::rng::Rng::new(seed);
                let mut random_pd = |k: usize| {
                    let a = DMatrix::from_fn(k, k, |_, _| rng.normal());
                    &a * a.transpose() + DMatrix::identity(k, k) * 0.1
                };
                let cp = random_pd(k);
                let cq = random_pd(k);
                let mp: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
                let mq: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
                let p = FullGaussian::new(mp, cp).unwrap();
                let q = FullGaussian::new(mq, cq).unwrap();
                let v = kl_full(&p, &q).unwrap();
                prop_assert!(v >= 0.0, "kl = {v}");
            }
        }
    }
}
