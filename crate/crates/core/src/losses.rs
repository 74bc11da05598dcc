//! The three training-loss terms and their weighted sum: assumed-negative
//! binary cross-entropy, the double-well radial regularizer, and the angular
//! uniformity loss.

use serde::{Deserialize, Serialize};

use crate::balls::EPS_RHO;
use crate::error::{Error, Result};
use crate::geometry;
use crate::projector::sigmoid;

/// Parameters of the bistable radial energy landscape.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DoubleWellParams {
    /// Gaussian sharpness multiplier. With `beta1_as_width` the same value is
    /// read as a width instead: exponent -((rho - c) / beta1)^2.
    pub beta1: f64,
    /// Boundary-mask steepness.
    pub beta2: f64,
    /// Inner well position.
    pub c1: f64,
    /// Outer well position.
    pub c2: f64,
    pub beta1_as_width: bool,
}

impl Default for DoubleWellParams {
    fn default() -> Self {
        Self {
            beta1: 0.1,
            beta2: 500.0,
            c1: 0.1,
            c2: 0.9,
            beta1_as_width: false,
        }
    }
}

/// Per-term breakdown of the total loss. The identity
/// total = cls + lambda1 * reg + lambda2 * uni holds exactly.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LossBreakdown {
    pub cls: f64,
    pub reg: f64,
    pub uni: f64,
    pub total: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LossConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub double_well: DoubleWellParams,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda1: 10.0,
            lambda2: 1.0,
            double_well: DoubleWellParams::default(),
        }
    }
}

/// Assumed-negative binary cross-entropy: the observed label is the one
/// positive, every other label is treated as negative. Mean over K.
pub fn bce_an(scores: &[f64], pos_idx: usize) -> Result<f64> {
    let k = scores.len();
    if pos_idx >= k {
        return Err(Error::Shape(format!(
            "positive index {pos_idx} out of range for {k} labels"
        )));
    }
    let mut sum = 0.0;
    for (i, &s) in scores.iter().enumerate() {
        let p = sigmoid(s);
        let term = if i == pos_idx {
            -p.max(1e-12).ln()
        } else {
            -(1.0 - p).max(1e-12).ln()
        };
        sum += term;
    }
    Ok(sum / k as f64)
}

fn gaussian(rho: f64, c: f64, beta1: f64, as_width: bool) -> f64 {
    let d = rho - c;
    if as_width {
        (-(d / beta1) * (d / beta1)).exp()
    } else {
        (-beta1 * d * d).exp()
    }
}

/// One label's double-well energy at norm rho.
pub fn double_well_term(rho: f64, p: &DoubleWellParams) -> f64 {
    let inner_mask = 1.0 - (-p.beta2 * rho * rho).exp();
    let outer_mask = 1.0 - (-p.beta2 * (1.0 - rho) * (1.0 - rho)).exp();
    -gaussian(rho, p.c1, p.beta1, p.beta1_as_width) * inner_mask
        - gaussian(rho, p.c2, p.beta1, p.beta1_as_width) * outer_mask
}

/// Derivative of `double_well_term` with respect to rho.
pub fn double_well_term_grad(rho: f64, p: &DoubleWellParams) -> f64 {
    let g1 = gaussian(rho, p.c1, p.beta1, p.beta1_as_width);
    let g2 = gaussian(rho, p.c2, p.beta1, p.beta1_as_width);
    let dg = |d: f64, g: f64| {
        if p.beta1_as_width {
            g * (-2.0 * d / (p.beta1 * p.beta1))
        } else {
            g * (-2.0 * p.beta1 * d)
        }
    };
    let e_in = (-p.beta2 * rho * rho).exp();
    let e_out = (-p.beta2 * (1.0 - rho) * (1.0 - rho)).exp();
    let inner_mask = 1.0 - e_in;
    let outer_mask = 1.0 - e_out;
    let d_inner_mask = 2.0 * p.beta2 * rho * e_in;
    let d_outer_mask = -2.0 * p.beta2 * (1.0 - rho) * e_out;
    -dg(rho - p.c1, g1) * inner_mask - g1 * d_inner_mask
        - dg(rho - p.c2, g2) * outer_mask
        - g2 * d_outer_mask
}

/// Double-well regularizer summed over labels (no normalization by K).
pub fn double_well(rhos: &[f64], p: &DoubleWellParams) -> f64 {
    rhos.iter().map(|&rho| double_well_term(rho, p)).sum()
}

/// Mean absolute cosine over ordered label pairs; 0 for K < 2.
pub fn uniformity(labels: &[Vec<f64>]) -> f64 {
    let k = labels.len();
    if k < 2 {
        return 0.0;
    }
    let units: Vec<Vec<f64>> = labels
        .iter()
        .map(|c| {
            let n = geometry::norm(c).max(EPS_RHO);
            c.iter().map(|x| x / n).collect()
        })
        .collect();
    let mut sum = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                sum += geometry::dot(&units[i], &units[j]).abs();
            }
        }
    }
    sum / (k * (k - 1)) as f64
}

/// Total loss over a batch: cls is the batch mean of `bce_an`, reg the
/// double-well energy of the current label norms, uni the uniformity loss.
pub fn total_loss(
    scores: &[Vec<f64>],
    pos: &[usize],
    labels: &[Vec<f64>],
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    if scores.len() != pos.len() {
        return Err(Error::Shape(format!(
            "{} score rows vs {} targets",
            scores.len(),
            pos.len()
        )));
    }
    let mut cls = 0.0;
    for (s, &p) in scores.iter().zip(pos) {
        cls += bce_an(s, p)?;
    }
    if !scores.is_empty() {
        cls /= scores.len() as f64;
    }
    let rhos: Vec<f64> = labels.iter().map(|c| geometry::norm(c)).collect();
    let reg = double_well(&rhos, &cfg.double_well);
    let uni = uniformity(labels);
    Ok(LossBreakdown {
        cls,
        reg,
        uni,
        total: cls + cfg.lambda1 * reg + cfg.lambda2 * uni,
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
    })
}
