//! Parameter updates: Riemannian Adam for label embeddings on the ball,
//! standard Adam for Euclidean parameters (W, b, log tau), and global
//! gradient clipping.
//!
//! Moment buffers for label embeddings are kept in ambient coordinates
//! without parallel transport; the retraction is a Möbius translation of the
//! exponentiated tangent step followed by ball projection.

use crate::balls::TAU_MIN;
use crate::error::Result;
use crate::geometry::{self, exp0, mobius_add, HyperbolicPoint, TangentVector};
use crate::grad::{log_tau_trainable, Gradients};
use crate::projector::{HeadMode, ModelParams};

pub const ADAM_BETA_M: f64 = 0.9;
pub const ADAM_BETA_V: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment accumulators for one tensor.
#[derive(Debug, Clone)]
pub struct MomentState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl MomentState {
    pub fn zeros(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// Optimizer state for the whole model: per-parameter moments, the shared
/// step counter, learning rates and the clipping threshold.
#[derive(Debug, Clone)]
pub struct OptimState {
    pub lr_riem: f64,
    pub lr_euc: f64,
    pub clip_norm: f64,
    pub t: u64,
    pub w: MomentState,
    pub b: MomentState,
    pub labels: Vec<MomentState>,
    pub log_tau: MomentState,
}

impl OptimState {
    pub fn new(params: &ModelParams, lr_riem: f64, lr_euc: f64, clip_norm: f64) -> Self {
        Self {
            lr_riem,
            lr_euc,
            clip_norm,
            t: 0,
            w: MomentState::zeros(params.w.len()),
            b: MomentState::zeros(params.b.len()),
            labels: params
                .labels
                .iter()
                .map(|c| MomentState::zeros(c.len()))
                .collect(),
            log_tau: MomentState::zeros(params.log_tau.len()),
        }
    }
}

/// Rescales all gradient entries so the global L2 norm is at most clip_norm.
pub fn clip_gradients(mut g: Gradients, clip_norm: f64) -> Gradients {
    let norm = g.global_norm();
    if norm > clip_norm {
        g.scale(clip_norm / norm);
    }
    g
}

/// Bias-corrected Adam update for a Euclidean tensor, applied in place.
pub fn adam_step(
    param: &mut [f64],
    grad: &[f64],
    state: &mut MomentState,
    lr: f64,
    t: u64,
) {
    let bc_m = 1.0 - ADAM_BETA_M.powi(t as i32);
    let bc_v = 1.0 - ADAM_BETA_V.powi(t as i32);
    for i in 0..param.len() {
        state.m[i] = ADAM_BETA_M * state.m[i] + (1.0 - ADAM_BETA_M) * grad[i];
        state.v[i] = ADAM_BETA_V * state.v[i] + (1.0 - ADAM_BETA_V) * grad[i] * grad[i];
        let m_hat = state.m[i] / bc_m;
        let v_hat = state.v[i] / bc_v;
        param[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// Riemannian Adam step for one label embedding.
///
/// The ambient gradient is rescaled by the inverse metric ((1 - rho^2) / 2)^2,
/// Adam moments are tracked on the rescaled gradient, and the resulting step
/// is retracted via Möbius translation of its exponential.
pub fn riemannian_adam_step(
    label: &mut Vec<f64>,
    ambient_grad: &[f64],
    state: &mut MomentState,
    lr: f64,
    t: u64,
) -> Result<()> {
    let rho_sq = geometry::norm_sq(label);
    let metric = (1.0 - rho_sq) / 2.0;
    let scale = metric * metric;
    let bc_m = 1.0 - ADAM_BETA_M.powi(t as i32);
    let bc_v = 1.0 - ADAM_BETA_V.powi(t as i32);
    let mut step = vec![0.0; label.len()];
    for i in 0..label.len() {
        let g_r = ambient_grad[i] * scale;
        state.m[i] = ADAM_BETA_M * state.m[i] + (1.0 - ADAM_BETA_M) * g_r;
        state.v[i] = ADAM_BETA_V * state.v[i] + (1.0 - ADAM_BETA_V) * g_r * g_r;
        let m_hat = state.m[i] / bc_m;
        let v_hat = state.v[i] / bc_v;
        step[i] = -lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    let point = HyperbolicPoint::project(label.clone())?;
    let moved = mobius_add(&point, &exp0(&TangentVector::new(step)?))?;
    *label = moved.coords().to_vec();
    Ok(())
}

/// One full optimization step: clip, Adam on W/b/log tau, Riemannian Adam on
/// label embeddings (hyperbolic mode) or plain Adam on them (baseline mode).
pub fn step(state: &mut OptimState, params: &mut ModelParams, grads: Gradients) -> Result<()> {
    let g = clip_gradients(grads, state.clip_norm);
    state.t += 1;
    let t = state.t;
    adam_step(&mut params.w, &g.d_w, &mut state.w, state.lr_euc, t);
    adam_step(&mut params.b, &g.d_b, &mut state.b, state.lr_euc, t);
    match params.mode {
        HeadMode::Hyperbolic => {
            for (i, c) in params.labels.iter_mut().enumerate() {
                riemannian_adam_step(c, &g.d_labels[i], &mut state.labels[i], state.lr_riem, t)?;
            }
        }
        HeadMode::EuclideanBaseline => {
            for (i, c) in params.labels.iter_mut().enumerate() {
                adam_step(c, &g.d_labels[i], &mut state.labels[i], state.lr_riem, t);
            }
        }
    }
    if log_tau_trainable(params) {
        adam_step(
            &mut params.log_tau,
            &g.d_log_tau,
            &mut state.log_tau,
            state.lr_euc,
            t,
        );
        // keep tau above its floor
        for lt in &mut params.log_tau {
            if *lt < TAU_MIN.ln() {
                *lt = TAU_MIN.ln();
            }
        }
    }
    Ok(())
}
