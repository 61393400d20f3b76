//! One-hidden-layer ReLU classifier with exact loss, gradient, and Hessian
//! (diagonal and full) evaluation.
//!
//! The total loss is the SUM form `L = sum_n l(x_n, y_n) + (wd/2) ||theta||^2`
//! with `l` the softmax cross-entropy. The trainer steps on `L / n`; the
//! Laplace fit consumes the sum form directly.

use nalgebra::DMatrix;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Curvature floor: Hessian diagonal entries below this are clamped up and
/// counted, so near-flat directions yield large but finite variances.
pub const HESSIAN_FLOOR: f64 = 1e-8;

/// Largest parameter count for which the dense Hessian path is allowed.
pub const FULL_HESSIAN_CAP: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeShape {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
}

impl ProbeShape {
    pub fn new(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || num_classes == 0 {
            return Err(Error::InvalidArgument(
                "probe dimensions must be positive".into(),
            ));
        }
        Ok(ProbeShape {
            input_dim,
            hidden_dim,
            num_classes,
        })
    }

    /// Total parameter count `d*h + h + h*C + C`.
    pub fn param_count(&self) -> usize {
        let (d, h, c) = (self.input_dim, self.hidden_dim, self.num_classes);
        d * h + h + h * c + c
    }

    #[inline]
    fn b1_offset(&self) -> usize {
        self.input_dim * self.hidden_dim
    }

    #[inline]
    fn w2_offset(&self) -> usize {
        self.b1_offset() + self.hidden_dim
    }

    #[inline]
    fn b2_offset(&self) -> usize {
        self.w2_offset() + self.hidden_dim * self.num_classes
    }
}

/// Flat parameter vector with fixed layout:
/// `[W1 row-major (h x d), b1 (h), W2 row-major (C x h), b2 (C)]`.
/// The layout is part of the checkpoint/result format contract.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub theta: Vec<f64>,
    pub shape: ProbeShape,
}

impl ParamVector {
    pub fn zeros(shape: ProbeShape) -> Self {
        ParamVector {
            theta: vec![0.0; shape.param_count()],
            shape,
        }
    }

    pub fn new(theta: Vec<f64>, shape: ProbeShape) -> Result<Self> {
        if theta.len() != shape.param_count() {
            return Err(Error::DimensionMismatch {
                context: "ParamVector length",
                expected: shape.param_count(),
                got: theta.len(),
            });
        }
        Ok(ParamVector { theta, shape })
    }

    pub fn w1(&self) -> &[f64] {
        &self.theta[..self.shape.b1_offset()]
    }

    pub fn b1(&self) -> &[f64] {
        &self.theta[self.shape.b1_offset()..self.shape.w2_offset()]
    }

    pub fn w2(&self) -> &[f64] {
        &self.theta[self.shape.w2_offset()..self.shape.b2_offset()]
    }

    pub fn b2(&self) -> &[f64] {
        &self.theta[self.shape.b2_offset()..]
    }
}

/// Weight decay coefficient for the `(wd/2) ||theta||^2` regularizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub weight_decay: f64,
}

impl LossSpec {
    pub fn new(weight_decay: f64) -> Result<Self> {
        if !(weight_decay.is_finite() && weight_decay >= 0.0) {
            return Err(Error::InvalidArgument(
                "weight decay must be finite and nonnegative".into(),
            ));
        }
        Ok(LossSpec { weight_decay })
    }
}

/// Hessian diagonal after clamping at [`HESSIAN_FLOOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct HessianDiag {
    pub values: Vec<f64>,
    pub clamp_count: usize,
}

/// Scratch space for per-sample evaluation; one per worker.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    pub a: Vec<f64>,  // hidden pre-activations
    pub z: Vec<f64>,  // hidden activations
    pub p: Vec<f64>,  // class probabilities
    pub ds: Vec<f64>, // logit gradient
}

impl Workspace {
    pub fn new(shape: ProbeShape) -> Self {
        Workspace {
            a: vec![0.0; shape.hidden_dim],
            z: vec![0.0; shape.hidden_dim],
            p: vec![0.0; shape.num_classes],
            ds: vec![0.0; shape.num_classes],
        }
    }
}

fn check_data(params: &ParamVector, data: &Dataset) -> Result<()> {
    if data.dim() != params.shape.input_dim {
        return Err(Error::DimensionMismatch {
            context: "dataset feature dim vs probe input dim",
            expected: params.shape.input_dim,
            got: data.dim(),
        });
    }
    if data.num_classes() as usize != params.shape.num_classes {
        return Err(Error::DimensionMismatch {
            context: "dataset classes vs probe classes",
            expected: params.shape.num_classes,
            got: data.num_classes() as usize,
        });
    }
    Ok(())
}

/// Forward pass for one sample; fills `ws.a`, `ws.z`, `ws.p` and returns the
/// cross-entropy `-ln p_y` via logsumexp.
pub(crate) fn sample_forward(params: &ParamVector, x: &[f32], y: u32, ws: &mut Workspace) -> f64 {
    let shape = params.shape;
    let (d, h, c) = (shape.input_dim, shape.hidden_dim, shape.num_classes);
    let w1 = params.w1();
    let b1 = params.b1();
    let w2 = params.w2();
    let b2 = params.b2();

    for j in 0..h {
        let row = &w1[j * d..(j + 1) * d];
        let mut acc = b1[j];
        for (wi, &xi) in row.iter().zip(x) {
            acc += wi * xi as f64;
        }
        ws.a[j] = acc;
        ws.z[j] = acc.max(0.0);
    }

    let mut smax = f64::NEG_INFINITY;
    for cc in 0..c {
        let row = &w2[cc * h..(cc + 1) * h];
        let mut acc = b2[cc];
        for (wj, &zj) in row.iter().zip(&ws.z) {
            acc += wj * zj;
        }
        ws.p[cc] = acc; // logits, normalized below
        smax = smax.max(acc);
    }

    let s_y = ws.p[y as usize];
    let mut zsum = 0.0;
    for pc in ws.p.iter_mut() {
        *pc = (*pc - smax).exp();
        zsum += *pc;
    }
    for pc in ws.p.iter_mut() {
        *pc /= zsum;
    }
    zsum.ln() + smax - s_y
}

/// Accumulates this sample's loss gradient into `out` (`out += grad l_i`).
/// Requires `ws` filled by [`sample_forward`] for the same `(params, x)`.
pub(crate) fn sample_grad_accumulate(
    params: &ParamVector,
    x: &[f32],
    y: u32,
    ws: &mut Workspace,
    out: &mut [f64],
) {
    let shape = params.shape;
    let (d, h, c) = (shape.input_dim, shape.hidden_dim, shape.num_classes);
    let w2 = params.w2();
    let (b1_off, w2_off, b2_off) = (shape.b1_offset(), shape.w2_offset(), shape.b2_offset());

    for cc in 0..c {
        ws.ds[cc] = ws.p[cc] - if cc == y as usize { 1.0 } else { 0.0 };
    }

    for cc in 0..c {
        let dsc = ws.ds[cc];
        let grow = &mut out[w2_off + cc * h..w2_off + (cc + 1) * h];
        for (g, &zj) in grow.iter_mut().zip(&ws.z) {
            *g += dsc * zj;
        }
        out[b2_off + cc] += dsc;
    }

    for j in 0..h {
        if ws.a[j] <= 0.0 {
            continue; // ReLU gate closed; subgradient 0 at the kink
        }
        let mut dz = 0.0;
        for cc in 0..c {
            dz += ws.ds[cc] * w2[cc * h + j];
        }
        let grow = &mut out[j * d..(j + 1) * d];
        for (g, &xi) in grow.iter_mut().zip(x) {
            *g += dz * xi as f64;
        }
        out[b1_off + j] += dz;
    }
}

/// Accumulates this sample's exact Hessian diagonal into `out`.
/// Requires `ws` filled by [`sample_forward`].
///
/// The network output is piecewise affine in each single parameter, so the
/// per-coordinate second derivative reduces to the curvature of the softmax
/// cross-entropy in the logits: `p_c (1 - p_c) z_j^2` for W2 entries and
/// `Var_p(W2[:, j]) x_i^2` for W1 entries (almost everywhere in theta).
pub(crate) fn sample_hessian_diag_accumulate(
    params: &ParamVector,
    x: &[f32],
    ws: &Workspace,
    out: &mut [f64],
) {
    let shape = params.shape;
    let (d, h, c) = (shape.input_dim, shape.hidden_dim, shape.num_classes);
    let w2 = params.w2();
    let (b1_off, w2_off, b2_off) = (shape.b1_offset(), shape.w2_offset(), shape.b2_offset());

    for cc in 0..c {
        let pc = ws.p[cc];
        let curv = pc * (1.0 - pc);
        let hrow = &mut out[w2_off + cc * h..w2_off + (cc + 1) * h];
        for (hv, &zj) in hrow.iter_mut().zip(&ws.z) {
            *hv += curv * zj * zj;
        }
        out[b2_off + cc] += curv;
    }

    for j in 0..h {
        if ws.a[j] <= 0.0 {
            continue;
        }
        let (mut m1, mut m2) = (0.0, 0.0);
        for cc in 0..c {
            let w = w2[cc * h + j];
            m1 += ws.p[cc] * w;
            m2 += ws.p[cc] * w * w;
        }
        let r = m2 - m1 * m1; // variance of W2[:, j] under p, nonnegative
        let hrow = &mut out[j * d..(j + 1) * d];
        for (hv, &xi) in hrow.iter_mut().zip(x) {
            *hv += r * (xi as f64) * (xi as f64);
        }
        out[b1_off + j] += r;
    }
}

/// Class probabilities for one input.
pub fn forward(params: &ParamVector, x: &[f32]) -> Result<Vec<f64>> {
    if x.len() != params.shape.input_dim {
        return Err(Error::DimensionMismatch {
            context: "forward input",
            expected: params.shape.input_dim,
            got: x.len(),
        });
    }
    let mut ws = Workspace::new(params.shape);
    sample_forward(params, x, 0, &mut ws);
    if ws.p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forward probabilities"));
    }
    Ok(ws.p)
}

/// Sum of per-sample cross-entropies (no regularizer).
pub fn dataset_loss(params: &ParamVector, data: &Dataset) -> Result<f64> {
    check_data(params, data)?;
    let mut ws = Workspace::new(params.shape);
    let mut total = 0.0;
    for i in 0..data.len() {
        total += sample_forward(params, data.row(i), data.label(i), &mut ws);
    }
    Ok(total)
}

/// SUM-form loss and gradient:
/// `L = sum_i l_i + (wd/2)||theta||^2`, `grad = sum_i grad l_i + wd * theta`.
/// Samples are accumulated in ascending index order.
pub fn loss_and_grad(
    params: &ParamVector,
    data: &Dataset,
    spec: &LossSpec,
) -> Result<(f64, Vec<f64>)> {
    check_data(params, data)?;
    let mut ws = Workspace::new(params.shape);
    let mut grad = vec![0.0; params.shape.param_count()];
    let mut loss = 0.0;
    for i in 0..data.len() {
        let x = data.row(i);
        loss += sample_forward(params, x, data.label(i), &mut ws);
        sample_grad_accumulate(params, x, data.label(i), &mut ws, &mut grad);
    }
    let wd = spec.weight_decay;
    if wd != 0.0 {
        for (g, &t) in grad.iter_mut().zip(&params.theta) {
            *g += wd * t;
        }
        loss += 0.5 * wd * params.theta.iter().map(|t| t * t).sum::<f64>();
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    Ok((loss, grad))
}

/// Exact diagonal of the SUM-form Hessian, clamped at [`HESSIAN_FLOOR`].
///
/// Uses the analytic per-sample expression; `hessian_diag_fd` provides the
/// finite-difference reference the analytic path is validated against.
pub fn hessian_diag(params: &ParamVector, data: &Dataset, spec: &LossSpec) -> Result<HessianDiag> {
    check_data(params, data)?;
    let mut ws = Workspace::new(params.shape);
    let mut diag = vec![0.0; params.shape.param_count()];
    for i in 0..data.len() {
        let x = data.row(i);
        sample_forward(params, x, data.label(i), &mut ws);
        sample_hessian_diag_accumulate(params, x, &ws, &mut diag);
    }
    for v in diag.iter_mut() {
        *v += spec.weight_decay;
    }
    if diag.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("hessian diagonal"));
    }
    let mut clamp_count = 0;
    for v in diag.iter_mut() {
        if *v < HESSIAN_FLOOR {
            *v = HESSIAN_FLOOR;
            clamp_count += 1;
        }
    }
    Ok(HessianDiag {
        values: diag,
        clamp_count,
    })
}

fn fd_step(theta_k: f64) -> f64 {
    1e-4 * theta_k.abs().max(1.0)
}

/// Finite-difference reference for the Hessian diagonal (unclamped):
/// central differences of the analytic gradient, step `1e-4 * max(1, |theta_k|)`.
pub fn hessian_diag_fd(params: &ParamVector, data: &Dataset, spec: &LossSpec) -> Result<Vec<f64>> {
    check_data(params, data)?;
    let k = params.shape.param_count();
    let mut probe = params.clone();
    let mut out = vec![0.0; k];
    for kk in 0..k {
        let h = fd_step(params.theta[kk]);
        probe.theta[kk] = params.theta[kk] + h;
        let (_, gp) = loss_and_grad(&probe, data, spec)?;
        probe.theta[kk] = params.theta[kk] - h;
        let (_, gm) = loss_and_grad(&probe, data, spec)?;
        probe.theta[kk] = params.theta[kk];
        out[kk] = (gp[kk] - gm[kk]) / (2.0 * h);
    }
    Ok(out)
}

/// Exact SUM-form Hessian (almost everywhere in `theta`), symmetric by
/// construction. Only for `K <=` [`FULL_HESSIAN_CAP`].
///
/// Evaluated analytically with the ReLU activation pattern held fixed, the
/// same piecewise Hessian reverse-over-reverse autodiff produces. The
/// finite-difference route ([`hessian_full_fd`]) is kept as a reference but
/// is only trustworthy away from the kinks: at a trained optimum some hidden
/// pre-activation usually sits within the FD step of zero, and differencing
/// across the kink fabricates large spurious curvature.
pub fn hessian_full(params: &ParamVector, data: &Dataset, spec: &LossSpec) -> Result<DMatrix<f64>> {
    hessian_dense(params, data, spec, true)
}

/// Gauss-Newton curvature: the exact Hessian without the residual-weighted
/// correction term, positive semidefinite by construction (and positive
/// definite once the weight decay is added). Identical to [`hessian_full`]
/// for a model whose logits are affine in the parameters, and identical to
/// it on the diagonal everywhere.
///
/// The full-covariance Laplace fit uses this curvature: away from an exact
/// optimum the exact Hessian of a ReLU probe carries small negative
/// eigenvalues, which have no consistent Gaussian interpretation.
pub fn hessian_ggn(params: &ParamVector, data: &Dataset, spec: &LossSpec) -> Result<DMatrix<f64>> {
    hessian_dense(params, data, spec, false)
}

fn hessian_dense(
    params: &ParamVector,
    data: &Dataset,
    spec: &LossSpec,
    include_correction: bool,
) -> Result<DMatrix<f64>> {
    check_data(params, data)?;
    let shape = params.shape;
    let k = shape.param_count();
    if k > FULL_HESSIAN_CAP {
        return Err(Error::HessianCapExceeded {
            param_count: k,
            cap: FULL_HESSIAN_CAP,
        });
    }
    let (d, h, c) = (shape.input_dim, shape.hidden_dim, shape.num_classes);
    let w2 = params.w2();
    let (b1_off, w2_off, b2_off) = (shape.b1_offset(), shape.w2_offset(), shape.b2_offset());
    let w1_at = |j: usize, i: usize| j * d + i;
    let b1_at = |j: usize| b1_off + j;
    let w2_at = |cc: usize, j: usize| w2_off + cc * h + j;
    let b2_at = |cc: usize| b2_off + cc;

    let mut ws = Workspace::new(shape);
    let mut hess: DMatrix<f64> = DMatrix::zeros(k, k);
    // Softmax curvature S = diag(p) - p p^T, its action su_j = S (g_j W2[:,j]),
    // and the hidden-pair form B[j][j'] = u_j^T S u_j'.
    let mut smat = vec![0.0f64; c * c];
    let mut su = vec![0.0f64; h * c];
    let mut bmat = vec![0.0f64; h * h];

    for idx in 0..data.len() {
        let x = data.row(idx);
        let y = data.label(idx);
        sample_forward(params, x, y, &mut ws);
        let p = &ws.p;
        let z = &ws.z;

        for ca in 0..c {
            for cb in 0..c {
                smat[ca * c + cb] = if ca == cb {
                    p[ca] * (1.0 - p[ca])
                } else {
                    -p[ca] * p[cb]
                };
            }
        }
        for j in 0..h {
            let active = ws.a[j] > 0.0;
            if !active {
                su[j * c..(j + 1) * c].fill(0.0);
                continue;
            }
            let mut m1 = 0.0;
            for cc in 0..c {
                m1 += p[cc] * w2[cc * h + j];
            }
            for cc in 0..c {
                su[j * c + cc] = p[cc] * (w2[cc * h + j] - m1);
            }
        }
        for ja in 0..h {
            for jb in ja..h {
                // u_ja^T S u_jb = sum_c u_ja[c] * su_jb[c]; u is zero for
                // inactive units, which su already encodes for jb.
                let mut acc = 0.0;
                if ws.a[ja] > 0.0 {
                    for cc in 0..c {
                        acc += w2[cc * h + ja] * su[jb * c + cc];
                    }
                }
                bmat[ja * h + jb] = acc;
                bmat[jb * h + ja] = acc;
            }
        }

        for ja in 0..h {
            let ga = ws.a[ja] > 0.0;
            // W1-W1, W1-b1, b1-b1
            for jb in ja..h {
                let b = bmat[ja * h + jb];
                if b != 0.0 {
                    for i in 0..d {
                        let xi = x[i] as f64;
                        for i2 in 0..d {
                            hess[(w1_at(ja, i), w1_at(jb, i2))] += b * xi * x[i2] as f64;
                        }
                        hess[(w1_at(ja, i), b1_at(jb))] += b * xi;
                        if ja != jb {
                            hess[(w1_at(jb, i), b1_at(ja))] += b * xi;
                        }
                    }
                    hess[(b1_at(ja), b1_at(jb))] += b;
                }
            }
            // (W1/b1)-W2 and (W1/b1)-b2: Gauss-Newton part su[ja][c] * z_jb,
            // plus (for the exact Hessian) the residual correction q_c on the
            // matching hidden unit.
            for cc in 0..c {
                let s_u = su[ja * c + cc];
                let q = p[cc] - if cc == y as usize { 1.0 } else { 0.0 };
                for jb in 0..h {
                    let mut v = s_u * z[jb];
                    if include_correction && jb == ja && ga {
                        v += q;
                    }
                    if v != 0.0 {
                        for i in 0..d {
                            hess[(w1_at(ja, i), w2_at(cc, jb))] += v * x[i] as f64;
                        }
                        hess[(b1_at(ja), w2_at(cc, jb))] += v;
                    }
                }
                if s_u != 0.0 {
                    for i in 0..d {
                        hess[(w1_at(ja, i), b2_at(cc))] += s_u * x[i] as f64;
                    }
                    hess[(b1_at(ja), b2_at(cc))] += s_u;
                }
            }
        }
        // W2-W2, W2-b2, b2-b2
        for ca in 0..c {
            for cb in 0..c {
                let s = smat[ca * c + cb];
                if s == 0.0 {
                    continue;
                }
                for ja in 0..h {
                    let sz = s * z[ja];
                    if sz != 0.0 {
                        for jb in 0..h {
                            hess[(w2_at(ca, ja), w2_at(cb, jb))] += sz * z[jb];
                        }
                    }
                    hess[(w2_at(ca, ja), b2_at(cb))] += sz;
                }
                hess[(b2_at(ca), b2_at(cb))] += s;
            }
        }
    }

    // Every pair was accumulated at its upper-triangle position (blocks that
    // also touched the lower triangle wrote mirror-equal values); one copy
    // pass makes the matrix exactly symmetric.
    for col in 0..k {
        for row in (col + 1)..k {
            hess[(row, col)] = hess[(col, row)];
        }
    }

    let wd = spec.weight_decay;
    if wd != 0.0 {
        for i in 0..k {
            hess[(i, i)] += wd;
        }
    }
    if hess.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("full hessian"));
    }
    Ok(hess)
}

/// Full Hessian via central finite differences of the analytic gradient,
/// symmetrized as `(H + H^T) / 2`, with the max-abs symmetry defect of the
/// raw matrix. Reference route for validating [`hessian_full`]; only
/// meaningful away from the ReLU kinks.
pub fn hessian_full_fd(
    params: &ParamVector,
    data: &Dataset,
    spec: &LossSpec,
) -> Result<(DMatrix<f64>, f64)> {
    check_data(params, data)?;
    let k = params.shape.param_count();
    if k > FULL_HESSIAN_CAP {
        return Err(Error::HessianCapExceeded {
            param_count: k,
            cap: FULL_HESSIAN_CAP,
        });
    }
    let mut probe = params.clone();
    let mut raw = DMatrix::zeros(k, k);
    for col in 0..k {
        let h = fd_step(params.theta[col]);
        probe.theta[col] = params.theta[col] + h;
        let (_, gp) = loss_and_grad(&probe, data, spec)?;
        probe.theta[col] = params.theta[col] - h;
        let (_, gm) = loss_and_grad(&probe, data, spec)?;
        probe.theta[col] = params.theta[col];
        for row in 0..k {
            raw[(row, col)] = (gp[row] - gm[row]) / (2.0 * h);
        }
    }
    let mut defect = 0.0f64;
    let mut sym = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            defect = defect.max((raw[(i, j)] - raw[(j, i)]).abs());
            sym[(i, j)] = 0.5 * (raw[(i, j)] + raw[(j, i)]);
        }
    }
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("full hessian"));
    }
    Ok((sym, defect))
}

/// Fraction of samples whose argmax class equals the label; argmax ties are
/// broken toward the lowest class index.
pub fn accuracy(params: &ParamVector, data: &Dataset) -> Result<f64> {
    check_data(params, data)?;
    let mut ws = Workspace::new(params.shape);
    let mut correct = 0usize;
    for i in 0..data.len() {
        sample_forward(params, data.row(i), data.label(i), &mut ws);
        let mut best = 0usize;
        for (c, &pc) in ws.p.iter().enumerate() {
            if pc > ws.p[best] {
                best = c;
            }
        }
        if best == data.label(i) as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Smallest `|a_j|` over all samples and hidden units. Finite-difference
/// curvature checks are only meaningful away from the ReLU kinks; test
/// instances are resampled until this clears the FD step comfortably.
pub fn min_preactivation_magnitude(params: &ParamVector, data: &Dataset) -> Result<f64> {
    check_data(params, data)?;
    let mut ws = Workspace::new(params.shape);
    let mut min_abs = f64::INFINITY;
    for i in 0..data.len() {
        sample_forward(params, data.row(i), data.label(i), &mut ws);
        for &a in &ws.a {
            min_abs = min_abs.min(a.abs());
        }
    }
    Ok(min_abs)
}

/// He-style initialization: weights drawn from fan-in scaled Gaussians
/// (`std = sqrt(2 / fan_in)`), biases zero. Draw order is W1 then W2 in
/// memory order, from a fresh generator seeded with `seed`.
pub fn init_params(shape: ProbeShape, seed: u64) -> ParamVector {
    let mut rng = Rng::new(seed);
    let mut params = ParamVector::zeros(shape);
    let std_w1 = (2.0 / shape.input_dim as f64).sqrt();
    let std_w2 = (2.0 / shape.hidden_dim as f64).sqrt();
    let b1_off = shape.b1_offset();
    let w2_off = shape.w2_offset();
    let b2_off = shape.b2_offset();
    for k in 0..b1_off {
        params.theta[k] = std_w1 * rng.normal();
    }
    for k in w2_off..b2_off {
        params.theta[k] = std_w2 * rng.normal();
    }
    params
}
