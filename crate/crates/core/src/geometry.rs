//! Poincaré ball kernel: distances, Möbius addition, exp/log maps at the
//! origin, conformal factors, and safe projection into the open unit ball.
//!
//! Curvature is fixed at -1 (unit ball). All arithmetic is f64 and all
//! operations are pure functions, safe to call concurrently.

use crate::error::{Error, Result};

/// Points are kept at norm <= 1 - EPS_BALL so conformal factors stay bounded.
pub const EPS_BALL: f64 = 1e-5;

/// Guard for the Möbius denominator; inside the clamped ball it is provably
/// bounded away from zero, so this error path never fires in practice.
pub const EPS_DEN: f64 = 1e-15;

/// A point strictly inside the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicPoint {
    coords: Vec<f64>,
}

/// A tangent vector at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    coords: Vec<f64>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

impl HyperbolicPoint {
    /// Constructs a point, projecting into the ball when the input norm
    /// exceeds 1 - EPS_BALL. Errors on non-finite coordinates.
    pub fn project(coords: Vec<f64>) -> Result<Self> {
        if !all_finite(&coords) {
            return Err(Error::NonFinite);
        }
        let n = norm(&coords);
        let max = 1.0 - EPS_BALL;
        if n <= max {
            Ok(Self { coords })
        } else {
            let scale = max / n;
            Ok(Self {
                coords: coords.iter().map(|x| x * scale).collect(),
            })
        }
    }

    pub fn origin(dim: usize) -> Self {
        Self {
            coords: vec![0.0; dim],
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }
}

impl TangentVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if !all_finite(&coords) {
            return Err(Error::NonFinite);
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }
}

/// Safe projection of an arbitrary finite vector into the ball.
pub fn project_to_ball(coords: Vec<f64>) -> Result<HyperbolicPoint> {
    HyperbolicPoint::project(coords)
}

/// Conformal factor lambda_x = 2 / (1 - ||x||^2). Always >= 2 inside the ball.
pub fn conformal_factor(x: &HyperbolicPoint) -> f64 {
    2.0 / (1.0 - norm_sq(x.coords()))
}

/// Möbius addition x (+) y, the hyperbolic analogue of vector addition.
pub fn mobius_add(x: &HyperbolicPoint, y: &HyperbolicPoint) -> Result<HyperbolicPoint> {
    let (xs, ys) = (x.coords(), y.coords());
    let xy = dot(xs, ys);
    let x2 = norm_sq(xs);
    let y2 = norm_sq(ys);
    let den = 1.0 + 2.0 * xy + x2 * y2;
    if den.abs() < EPS_DEN {
        return Err(Error::DegenerateDenominator);
    }
    let cx = (1.0 + 2.0 * xy + y2) / den;
    let cy = (1.0 - x2) / den;
    let coords = xs
        .iter()
        .zip(ys)
        .map(|(a, b)| cx * a + cy * b)
        .collect();
    HyperbolicPoint::project(coords)
}

/// Geodesic distance d(u, v) = arccosh(1 + 2||u-v||^2 / ((1-||u||^2)(1-||v||^2))).
///
/// The arccosh argument is clamped to >= 1 against rounding.
pub fn distance(u: &HyperbolicPoint, v: &HyperbolicPoint) -> f64 {
    let diff_sq: f64 = u
        .coords()
        .iter()
        .zip(v.coords())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let den = (1.0 - norm_sq(u.coords())) * (1.0 - norm_sq(v.coords()));
    let arg = (1.0 + 2.0 * diff_sq / den).max(1.0);
    arg.acosh()
}

/// Exponential map at the origin: exp0(v) = tanh(||v||) v / ||v||.
pub fn exp0(v: &TangentVector) -> HyperbolicPoint {
    let n = v.norm();
    if n == 0.0 {
        return HyperbolicPoint::origin(v.coords().len());
    }
    let scale = n.tanh() / n;
    // tanh keeps the result strictly inside; project only applies near the clamp.
    HyperbolicPoint::project(v.coords().iter().map(|x| x * scale).collect())
        .expect("finite by construction")
}

/// Logarithm map at the origin, inverse of exp0.
pub fn log0(x: &HyperbolicPoint) -> TangentVector {
    let n = x.norm();
    if n == 0.0 {
        return TangentVector {
            coords: vec![0.0; x.dim()],
        };
    }
    let scale = n.atanh() / n;
    TangentVector {
        coords: x.coords().iter().map(|c| c * scale).collect(),
    }
}
