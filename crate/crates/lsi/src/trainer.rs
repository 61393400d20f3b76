//! Full-batch Nesterov gradient descent, plus the differentially private
//! variant (per-sample clipping and Gaussian noise).
//!
//! Each step optimizes the per-sample mean objective
//! `(1/n) sum_i [ l_i + (wd/2n) ||theta||^2 ]`, i.e. the SUM-form loss scaled
//! by `1/n`, so the default learning rate transfers across dataset sizes and
//! the Laplace fit's SUM-form Hessian is exactly `n` times the objective
//! Hessian. Both trainers compute the step gradient through the identical
//! per-sample accumulation, which makes the DP trainer with clipping and
//! noise disabled bitwise identical to the plain one.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::probe::{
    self, sample_forward, sample_grad_accumulate, LossSpec, ParamVector, ProbeShape, Workspace,
};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub init_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.04,
            momentum: 0.9,
            weight_decay: 0.01,
            epochs: 1000,
            init_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::InvalidArgument("learning rate must be >= 0".into()));
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return Err(Error::InvalidArgument("momentum must be in [0, 1)".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument("weight decay must be >= 0".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be positive".into()));
        }
        Ok(())
    }
}

/// Per-sample clipping norm and Gaussian noise multiplier. An infinite
/// `clip_norm` disables clipping; the per-coordinate noise applied to the
/// averaged clipped gradient has standard deviation `clip_norm * sigma / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpConfig {
    pub clip_norm: f64,
    pub noise_multiplier: f64,
    pub noise_seed: u64,
}

impl DpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_norm > 0.0) {
            return Err(Error::InvalidArgument("clip norm must be positive".into()));
        }
        if !(self.noise_multiplier.is_finite() && self.noise_multiplier >= 0.0) {
            return Err(Error::InvalidArgument(
                "noise multiplier must be finite and nonnegative".into(),
            ));
        }
        if self.clip_norm.is_infinite() && self.noise_multiplier > 0.0 {
            return Err(Error::InvalidArgument(
                "infinite clip norm with positive noise gives unbounded noise".into(),
            ));
        }
        Ok(())
    }

    /// Whether the mechanism is a no-op (no clipping, no noise).
    pub fn is_disabled(&self) -> bool {
        self.clip_norm.is_infinite() && self.noise_multiplier == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub theta_hat: ParamVector,
    pub loss_trace: Vec<f64>,
    pub grad_norm_final: f64,
    pub checkpoints: Vec<(usize, ParamVector)>,
}

/// Mean-objective gradient at `params`, accumulated per sample in ascending
/// index order. With `clip = Some(c)` each per-sample gradient (including its
/// `wd/n` regularizer share) is scaled by `1 / max(1, ||g_i|| / c)` first.
fn mean_gradient_into(
    params: &ParamVector,
    data: &Dataset,
    weight_decay: f64,
    clip: Option<f64>,
    out: &mut [f64],
    sample_buf: &mut [f64],
    ws: &mut Workspace,
) {
    let n = data.len() as f64;
    let wd_share = weight_decay / n;
    out.fill(0.0);
    for i in 0..data.len() {
        let x = data.row(i);
        sample_forward(params, x, data.label(i), ws);
        sample_buf.fill(0.0);
        sample_grad_accumulate(params, x, data.label(i), ws, sample_buf);
        if wd_share != 0.0 {
            for (g, &t) in sample_buf.iter_mut().zip(&params.theta) {
                *g += wd_share * t;
            }
        }
        match clip {
            Some(c) if c.is_finite() => {
                let norm = sample_buf.iter().map(|v| v * v).sum::<f64>().sqrt();
                let factor = 1.0 / (norm / c).max(1.0);
                debug_assert!(
                    norm * factor <= c * (1.0 + 1e-12),
                    "clipped norm {} exceeds {c}",
                    norm * factor
                );
                for (o, &g) in out.iter_mut().zip(sample_buf.iter()) {
                    *o += g * factor;
                }
            }
            _ => {
                for (o, &g) in out.iter_mut().zip(sample_buf.iter()) {
                    *o += g;
                }
            }
        }
    }
    for o in out.iter_mut() {
        *o /= n;
    }
}

/// Mean objective `(sum_i l_i + (wd/2)||theta||^2) / n`.
fn mean_objective(params: &ParamVector, data: &Dataset, weight_decay: f64) -> Result<f64> {
    let sum_loss = probe::dataset_loss(params, data)?;
    let reg = 0.5 * weight_decay * params.theta.iter().map(|t| t * t).sum::<f64>();
    Ok((sum_loss + reg) / data.len() as f64)
}

pub(crate) fn train_inner(
    data: &Dataset,
    shape: ProbeShape,
    cfg: &TrainConfig,
    checkpoint_epochs: &[usize],
    dp: Option<&DpConfig>,
) -> Result<TrainResult> {
    cfg.validate()?;
    if let Some(dp) = dp {
        dp.validate()?;
    }
    if data.dim() != shape.input_dim || data.num_classes() as usize != shape.num_classes {
        return Err(Error::DimensionMismatch {
            context: "dataset vs probe shape",
            expected: shape.input_dim,
            got: data.dim(),
        });
    }
    let mut checkpoints_wanted: Vec<usize> = checkpoint_epochs.to_vec();
    checkpoints_wanted.sort_unstable();
    checkpoints_wanted.dedup();
    if checkpoints_wanted.iter().any(|&e| e == 0 || e > cfg.epochs) {
        return Err(Error::InvalidArgument(format!(
            "checkpoint epochs must lie in 1..={}",
            cfg.epochs
        )));
    }

    let k = shape.param_count();
    let mut theta = probe::init_params(shape, cfg.init_seed);
    let mut velocity = vec![0.0f64; k];
    let mut lookahead = ParamVector::zeros(shape);
    let mut grad = vec![0.0f64; k];
    let mut sample_buf = vec![0.0f64; k];
    let mut ws = Workspace::new(shape);

    let clip = dp.map(|d| d.clip_norm);
    let noise_std = dp
        .map(|d| d.clip_norm * d.noise_multiplier / data.len() as f64)
        .filter(|&s| s > 0.0);
    let mut noise_rng = dp.map(|d| Rng::new(d.noise_seed));

    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let mut checkpoints = Vec::with_capacity(checkpoints_wanted.len());

    for epoch in 0..cfg.epochs {
        for ((la, &t), &v) in lookahead
            .theta
            .iter_mut()
            .zip(&theta.theta)
            .zip(&velocity)
        {
            *la = t + cfg.momentum * v;
        }
        mean_gradient_into(
            &lookahead,
            data,
            cfg.weight_decay,
            clip,
            &mut grad,
            &mut sample_buf,
            &mut ws,
        );
        if let Some(std) = noise_std {
            let rng = noise_rng.as_mut().expect("noise implies dp config");
            for g in grad.iter_mut() {
                *g += std * rng.normal();
            }
        }
        for (v, &g) in velocity.iter_mut().zip(&grad) {
            *v = cfg.momentum * *v - cfg.lr * g;
        }
        for (t, &v) in theta.theta.iter_mut().zip(&velocity) {
            *t += v;
        }

        let loss = mean_objective(&theta, data, cfg.weight_decay)
            .map_err(|_| Error::Divergence { epoch })?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        loss_trace.push(loss);

        if checkpoints_wanted.binary_search(&(epoch + 1)).is_ok() {
            checkpoints.push((epoch + 1, theta.clone()));
        }
    }

    mean_gradient_into(
        &theta,
        data,
        cfg.weight_decay,
        None,
        &mut grad,
        &mut sample_buf,
        &mut ws,
    );
    let grad_norm_final = grad.iter().map(|v| v * v).sum::<f64>().sqrt();

    Ok(TrainResult {
        theta_hat: theta,
        loss_trace,
        grad_norm_final,
        checkpoints,
    })
}

/// Full-batch Nesterov descent: `v <- m v - lr * grad(theta + m v)`,
/// `theta <- theta + v`. Deterministic given `(data, shape, cfg)`.
pub fn train(
    data: &Dataset,
    shape: ProbeShape,
    cfg: &TrainConfig,
    checkpoint_epochs: &[usize],
) -> Result<TrainResult> {
    train_inner(data, shape, cfg, checkpoint_epochs, None)
}

/// DP variant: per-sample gradients of `l_i + (wd/2n)||theta||^2` are clipped
/// to `dp.clip_norm`, averaged over the full batch, and perturbed with
/// per-coordinate Gaussian noise of std `clip_norm * sigma / n` before the
/// Nesterov update. With clipping and noise disabled the trajectory is
/// bitwise identical to [`train`].
pub fn train_dp(
    data: &Dataset,
    shape: ProbeShape,
    cfg: &TrainConfig,
    dp: &DpConfig,
) -> Result<TrainResult> {
    train_inner(data, shape, cfg, &[], Some(dp))
}

/// Per-sample gradients `g_i = grad l_i + (wd/n) theta` — exactly the vectors
/// the DP trainer clips.
pub fn per_sample_grads(
    params: &ParamVector,
    data: &Dataset,
    spec: &LossSpec,
) -> Result<Vec<Vec<f64>>> {
    if data.dim() != params.shape.input_dim
        || data.num_classes() as usize != params.shape.num_classes
    {
        return Err(Error::DimensionMismatch {
            context: "dataset vs probe shape",
            expected: params.shape.input_dim,
            got: data.dim(),
        });
    }
    let wd_share = spec.weight_decay / data.len() as f64;
    let mut ws = Workspace::new(params.shape);
    let mut out = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let x = data.row(i);
        sample_forward(params, x, data.label(i), &mut ws);
        let mut g = vec![0.0f64; params.shape.param_count()];
        sample_grad_accumulate(params, x, data.label(i), &mut ws, &mut g);
        if wd_share != 0.0 {
            for (gk, &t) in g.iter_mut().zip(&params.theta) {
                *gk += wd_share * t;
            }
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("per-sample gradient"));
        }
        out.push(g);
    }
    Ok(out)
}

/// L2 norms of the per-sample gradient contributions.
pub fn per_sample_grad_norms(
    params: &ParamVector,
    data: &Dataset,
    spec: &LossSpec,
) -> Result<Vec<f64>> {
    Ok(per_sample_grads(params, data, spec)?
        .iter()
        .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect())
}

/// `g / max(1, ||g||_2 / c)`.
pub fn clip_to_norm(g: &[f64], c: f64) -> Vec<f64> {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let factor = 1.0 / (norm / c).max(1.0);
    g.iter().map(|v| v * factor).collect()
}
