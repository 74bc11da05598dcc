//! Exact gradients of the total loss with respect to every trainable
//! parameter, plus a central finite-difference oracle used by tests.
//!
//! Label gradients are ambient (Euclidean); conversion to Riemannian
//! gradients happens in `optim`, so the oracle comparison stays in one
//! coordinate system. Clamp boundaries (ball projection, temperature floor)
//! are treated as zero-gradient saturation regions.

use crate::balls::{EPS_RHO, TAU_MIN};
use crate::error::{Error, Result};
use crate::geometry;
use crate::losses::{self, LossBreakdown, LossConfig};
use crate::projector::{self, sigmoid, HeadMode, ModelParams, TempMode};

/// Ambient gradients, shaped like `ModelParams`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub d_w: Vec<f64>,
    pub d_b: Vec<f64>,
    pub d_labels: Vec<Vec<f64>>,
    /// Mirrors `ModelParams::log_tau`; stays zero in fixed-temperature mode.
    pub d_log_tau: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            d_w: vec![0.0; params.w.len()],
            d_b: vec![0.0; params.b.len()],
            d_labels: params.labels.iter().map(|c| vec![0.0; c.len()]).collect(),
            d_log_tau: vec![0.0; params.log_tau.len()],
        }
    }

    pub fn global_norm(&self) -> f64 {
        let mut s = geometry::norm_sq(&self.d_w) + geometry::norm_sq(&self.d_b);
        for c in &self.d_labels {
            s += geometry::norm_sq(c);
        }
        s += geometry::norm_sq(&self.d_log_tau);
        s.sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for x in self
            .d_w
            .iter_mut()
            .chain(self.d_b.iter_mut())
            .chain(self.d_labels.iter_mut().flatten())
            .chain(self.d_log_tau.iter_mut())
        {
            *x *= factor;
        }
    }

    /// Flattened view in the same order as `flatten_params`.
    pub fn flatten(&self, include_log_tau: bool) -> Vec<f64> {
        let mut out = self.d_w.clone();
        out.extend_from_slice(&self.d_b);
        for c in &self.d_labels {
            out.extend_from_slice(c);
        }
        if include_log_tau {
            out.extend_from_slice(&self.d_log_tau);
        }
        out
    }
}

/// Whether log_tau participates in optimization.
pub fn log_tau_trainable(params: &ModelParams) -> bool {
    !matches!(params.temp_mode, TempMode::Fixed(_)) && params.mode == HeadMode::Hyperbolic
}

/// Flat parameter vector: W, b, label embeddings row by row, then log_tau
/// when trainable.
pub fn flatten_params(params: &ModelParams) -> Vec<f64> {
    let mut out = params.w.clone();
    out.extend_from_slice(&params.b);
    for c in &params.labels {
        out.extend_from_slice(c);
    }
    if log_tau_trainable(params) {
        out.extend_from_slice(&params.log_tau);
    }
    out
}

pub fn unflatten_params(params: &ModelParams, flat: &[f64]) -> ModelParams {
    let mut p = params.clone();
    let mut off = 0;
    let wl = p.w.len();
    p.w.copy_from_slice(&flat[off..off + wl]);
    off += wl;
    let bl = p.b.len();
    p.b.copy_from_slice(&flat[off..off + bl]);
    off += bl;
    for c in &mut p.labels {
        let cl = c.len();
        c.copy_from_slice(&flat[off..off + cl]);
        off += cl;
    }
    if log_tau_trainable(params) {
        let tl = p.log_tau.len();
        p.log_tau.copy_from_slice(&flat[off..off + tl]);
        off += tl;
    }
    debug_assert_eq!(off, flat.len());
    p
}

/// The geometric regularizers only apply to the hyperbolic head; the
/// Euclidean ablation baseline trains on plain assumed-negative BCE.
fn effective_cfg(params: &ModelParams, cfg: &LossConfig) -> LossConfig {
    match params.mode {
        HeadMode::Hyperbolic => *cfg,
        HeadMode::EuclideanBaseline => LossConfig {
            lambda1: 0.0,
            lambda2: 0.0,
            ..*cfg
        },
    }
}

/// Total loss of a batch, via the reference forward pass.
pub fn loss_value(
    params: &ModelParams,
    feats: &[&[f64]],
    pos: &[usize],
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    let scores: Vec<Vec<f64>> = feats
        .iter()
        .map(|f| projector::forward(params, f))
        .collect::<Result<_>>()?;
    losses::total_loss(&scores, pos, &params.labels, &effective_cfg(params, cfg))
}

/// Chains a gradient taken at the norm-clamped embedding back to the raw
/// stored vector. Inside the clamp-free band the map is the identity; on a
/// clamp only the direction component survives (rescaled).
fn chain_through_norm_clamp(raw: &[f64], clamped_rho: f64, grad_clamped: &[f64]) -> Vec<f64> {
    let raw_rho = geometry::norm(raw);
    if raw_rho == 0.0 {
        return vec![0.0; raw.len()];
    }
    if raw_rho == clamped_rho {
        return grad_clamped.to_vec();
    }
    let scale = clamped_rho / raw_rho;
    let hat: Vec<f64> = raw.iter().map(|x| x / raw_rho).collect();
    let radial = geometry::dot(grad_clamped, &hat);
    grad_clamped
        .iter()
        .zip(&hat)
        .map(|(g, h)| scale * (g - radial * h))
        .collect()
}

/// Exact gradients of the batch total loss.
pub fn loss_gradients(
    params: &ModelParams,
    feats: &[&[f64]],
    pos: &[usize],
    cfg: &LossConfig,
) -> Result<(LossBreakdown, Gradients)> {
    if feats.len() != pos.len() {
        return Err(Error::Shape(format!(
            "{} feature rows vs {} targets",
            feats.len(),
            pos.len()
        )));
    }
    let cfg = effective_cfg(params, cfg);
    let k = params.k;
    let n = params.n;
    let d = params.d;
    let batch = feats.len();
    let mut g = Gradients::zeros_like(params);
    let mut cls_sum = 0.0;

    match params.mode {
        HeadMode::Hyperbolic => {
            let balls = params.label_balls()?;
            let taus: Vec<f64> = (0..k).map(|i| params.tau(i)).collect();
            for (f, &pos_idx) in feats.iter().zip(pos) {
                params.check_feature_dim(f)?;
                if pos_idx >= k {
                    return Err(Error::Shape(format!(
                        "positive index {pos_idx} out of range for {k} labels"
                    )));
                }
                let z = projector::affine(&params.w, &params.b, f);
                let x = projector::mobius_linear(&params.w, &params.b, f)?;
                let xc = x.coords();
                let mut grad_x = vec![0.0; n];
                let mut sample_cls = 0.0;
                for i in 0..k {
                    let ball = &balls[i];
                    let rho = ball.rho;
                    let tau = taus[i];
                    let diff: Vec<f64> = ball.center.iter().zip(xc).map(|(c, p)| c - p).collect();
                    let dist = geometry::norm(&diff);
                    let m = ball.radius - dist;
                    let s = ball.alpha / tau * m;
                    let p = sigmoid(s);
                    let y = if i == pos_idx { 1.0 } else { 0.0 };
                    sample_cls += if y > 0.5 {
                        -p.max(1e-12).ln()
                    } else {
                        -(1.0 - p).max(1e-12).ln()
                    };
                    let g_s = (p - y) / (k as f64 * batch as f64);

                    let u: Vec<f64> = diff.iter().map(|v| v / dist).collect();
                    for (gx, ui) in grad_x.iter_mut().zip(&u) {
                        *gx += g_s * ball.alpha / tau * ui;
                    }

                    // chain through r(rho), c*(c) and alpha(rho)
                    let chat: Vec<f64> = ball.embedding.coords().iter().map(|v| v / rho).collect();
                    let r_prime = -1.0 / (2.0 * rho * rho) - 0.5;
                    let kappa = (1.0 + rho * rho) / (2.0 * rho * rho);
                    let kappa_prime = -1.0 / (rho * rho * rho);
                    let alpha_prime = 4.0 * rho / ((1.0 - rho * rho) * (1.0 - rho * rho));
                    let u_dot_chat = geometry::dot(&u, &chat);
                    let grad_c_cl: Vec<f64> = (0..n)
                        .map(|a| {
                            let dm_dc = r_prime * chat[a]
                                - kappa * u[a]
                                - kappa_prime * rho * u_dot_chat * chat[a];
                            g_s * (m * alpha_prime / tau * chat[a] + ball.alpha / tau * dm_dc)
                        })
                        .collect();
                    let back = chain_through_norm_clamp(&params.labels[i], rho, &grad_c_cl);
                    for (acc, v) in g.d_labels[i].iter_mut().zip(&back) {
                        *acc += v;
                    }

                    if log_tau_trainable(params) {
                        // tau floor is a saturation region
                        let lt = match params.temp_mode {
                            TempMode::LearnableScalar => params.log_tau[0],
                            TempMode::LearnablePerClass => params.log_tau[i],
                            TempMode::Fixed(_) => unreachable!(),
                        };
                        if lt.exp() > TAU_MIN {
                            let idx = match params.temp_mode {
                                TempMode::LearnableScalar => 0,
                                _ => i,
                            };
                            g.d_log_tau[idx] += g_s * (-s);
                        }
                    }
                }
                cls_sum += sample_cls / k as f64;

                // back through exp0 (projection clamp region saturates on its own)
                let nz = geometry::norm(&z);
                let grad_z = if nz < 1e-12 {
                    grad_x
                } else {
                    let t = nz.tanh();
                    let a = t / nz;
                    let sech2 = 1.0 - t * t;
                    let zhat: Vec<f64> = z.iter().map(|v| v / nz).collect();
                    let radial = geometry::dot(&grad_x, &zhat);
                    grad_x
                        .iter()
                        .zip(&zhat)
                        .map(|(gx, zh)| a * (gx - radial * zh) + sech2 * radial * zh)
                        .collect()
                };
                for i in 0..n {
                    for (j, fj) in f.iter().enumerate().take(d) {
                        g.d_w[i * d + j] += grad_z[i] * fj;
                    }
                    g.d_b[i] += grad_z[i];
                }
            }
        }
        HeadMode::EuclideanBaseline => {
            for (f, &pos_idx) in feats.iter().zip(pos) {
                params.check_feature_dim(f)?;
                if pos_idx >= k {
                    return Err(Error::Shape(format!(
                        "positive index {pos_idx} out of range for {k} labels"
                    )));
                }
                let x = projector::affine(&params.w, &params.b, f);
                let mut grad_x = vec![0.0; n];
                let mut sample_cls = 0.0;
                for i in 0..k {
                    let s = geometry::dot(&params.labels[i], &x);
                    let p = sigmoid(s);
                    let y = if i == pos_idx { 1.0 } else { 0.0 };
                    sample_cls += if y > 0.5 {
                        -p.max(1e-12).ln()
                    } else {
                        -(1.0 - p).max(1e-12).ln()
                    };
                    let g_s = (p - y) / (k as f64 * batch as f64);
                    for (acc, xv) in g.d_labels[i].iter_mut().zip(&x) {
                        *acc += g_s * xv;
                    }
                    for (gx, cv) in grad_x.iter_mut().zip(&params.labels[i]) {
                        *gx += g_s * cv;
                    }
                }
                cls_sum += sample_cls / k as f64;
                for i in 0..n {
                    for (j, fj) in f.iter().enumerate().take(d) {
                        g.d_w[i * d + j] += grad_x[i] * fj;
                    }
                    g.d_b[i] += grad_x[i];
                }
            }
        }
    }

    let cls = if batch > 0 {
        cls_sum / batch as f64
    } else {
        0.0
    };

    // double-well regularizer on raw label norms
    let rhos: Vec<f64> = params.labels.iter().map(|c| geometry::norm(c)).collect();
    let reg = losses::double_well(&rhos, &cfg.double_well);
    if cfg.lambda1 != 0.0 {
        for (i, c) in params.labels.iter().enumerate() {
            let rho = rhos[i];
            if rho > 0.0 {
                let dwg = cfg.lambda1 * losses::double_well_term_grad(rho, &cfg.double_well);
                for (acc, v) in g.d_labels[i].iter_mut().zip(c) {
                    *acc += dwg * v / rho;
                }
            }
        }
    }

    // uniformity on normalized embeddings
    let uni = losses::uniformity(&params.labels);
    if cfg.lambda2 != 0.0 && k >= 2 {
        let units: Vec<Vec<f64>> = params
            .labels
            .iter()
            .map(|c| {
                let nn = geometry::norm(c).max(EPS_RHO);
                c.iter().map(|x| x / nn).collect()
            })
            .collect();
        let w_pair = 2.0 * cfg.lambda2 / (k * (k - 1)) as f64;
        for i in 0..k {
            let rho = rhos[i];
            for j in 0..k {
                if i == j {
                    continue;
                }
                let dp = geometry::dot(&units[i], &units[j]);
                let sign = if dp >= 0.0 { 1.0 } else { -1.0 };
                if rho >= EPS_RHO {
                    for a in 0..params.labels[i].len() {
                        g.d_labels[i][a] +=
                            w_pair * sign * (units[j][a] - dp * units[i][a]) / rho;
                    }
                } else {
                    // below the floor the normalizer is constant
                    for a in 0..params.labels[i].len() {
                        g.d_labels[i][a] += w_pair * sign * units[j][a] / EPS_RHO;
                    }
                }
            }
        }
    }

    let breakdown = LossBreakdown {
        cls,
        reg,
        uni,
        total: cls + cfg.lambda1 * reg + cfg.lambda2 * uni,
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
    };

    for (name, slice) in [("W", &g.d_w[..]), ("b", &g.d_b[..]), ("log_tau", &g.d_log_tau[..])] {
        if slice.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(name.into()));
        }
    }
    for (i, c) in g.d_labels.iter().enumerate() {
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("labels[{i}]")));
        }
    }
    Ok((breakdown, g))
}

/// Central-difference gradient oracle: (L(theta + h) - L(theta - h)) / 2h for
/// every scalar parameter, evaluating the full total loss each time.
pub fn finite_diff_oracle(
    params: &ModelParams,
    feats: &[&[f64]],
    pos: &[usize],
    cfg: &LossConfig,
    h: f64,
) -> Result<Gradients> {
    let flat = flatten_params(params);
    let mut grads = vec![0.0; flat.len()];
    for i in 0..flat.len() {
        let mut plus = flat.clone();
        plus[i] += h;
        let lp = loss_value(&unflatten_params(params, &plus), feats, pos, cfg)?.total;
        let mut minus = flat.clone();
        minus[i] -= h;
        let lm = loss_value(&unflatten_params(params, &minus), feats, pos, cfg)?.total;
        grads[i] = (lp - lm) / (2.0 * h);
    }
    // unflatten into Gradients
    let mut g = Gradients::zeros_like(params);
    let mut off = 0;
    let wl = g.d_w.len();
    g.d_w.copy_from_slice(&grads[off..off + wl]);
    off += wl;
    let bl = g.d_b.len();
    g.d_b.copy_from_slice(&grads[off..off + bl]);
    off += bl;
    for c in &mut g.d_labels {
        let cl = c.len();
        c.copy_from_slice(&grads[off..off + cl]);
        off += cl;
    }
    if log_tau_trainable(params) {
        let tl = g.d_log_tau.len();
        g.d_log_tau.copy_from_slice(&grads[off..off + tl]);
    }
    Ok(g)
}
