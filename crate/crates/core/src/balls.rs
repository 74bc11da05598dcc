//! Label balls: construction from embeddings, signed-distance membership,
//! temperature-adaptive scores, and pairwise relation classification.
//!
//! A label embedding c with norm rho defines a Euclidean ball of radius
//! r = (1 - rho^2) / (2 rho) centered at c* = c (1 + r / rho). The ball
//! boundary meets the unit sphere at right angles (||c*||^2 - r^2 = 1) and
//! passes through c itself (||c*|| - r = rho).

use crate::error::{Error, Result};
use crate::geometry::{HyperbolicPoint, EPS_BALL};

/// Radius formula has a pole at rho = 0; embeddings below this norm are
/// clamped outward, keeping radii finite.
pub const EPS_RHO: f64 = 1e-5;

/// Lower bound on the temperature, bounding alpha / tau.
pub const TAU_MIN: f64 = 1e-3;

const TIE_TOL: f64 = 1e-12;

/// One label's ball: embedding plus derived radius, center and scaling factor.
#[derive(Debug, Clone)]
pub struct LabelBall {
    pub embedding: HyperbolicPoint,
    /// Norm of the (clamped) embedding, in [EPS_RHO, 1 - EPS_BALL].
    pub rho: f64,
    pub radius: f64,
    /// Euclidean ball center; lies outside the unit ball.
    pub center: Vec<f64>,
    /// Hyperbolic scaling factor alpha = 2 / (1 - rho^2).
    pub alpha: f64,
}

/// Relation between two label balls, decided from center distance and radii.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationKind {
    Contains,
    ContainedBy,
    Overlap,
    Disjoint,
}

impl RelationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RelationKind::Contains => "contains",
            RelationKind::ContainedBy => "contained_by",
            RelationKind::Overlap => "overlap",
            RelationKind::Disjoint => "disjoint",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BallRelation {
    pub kind: RelationKind,
    /// Distance to the nearest classification boundary; positive means the
    /// relation is decided with slack.
    pub margin: f64,
}

/// Builds a label ball, clamping near-zero embeddings outward to EPS_RHO.
/// An exactly-zero embedding is nudged to EPS_RHO along axis 0.
pub fn ball_from_embedding(c: &HyperbolicPoint) -> LabelBall {
    let mut coords = c.coords().to_vec();
    let mut rho = c.norm();
    if rho < EPS_RHO {
        if rho == 0.0 {
            coords[0] = EPS_RHO;
        } else {
            let scale = EPS_RHO / rho;
            for x in &mut coords {
                *x *= scale;
            }
        }
        rho = EPS_RHO;
    }
    let embedding = HyperbolicPoint::project(coords).expect("finite by construction");
    let rho = rho.min(1.0 - EPS_BALL);
    let radius = (1.0 - rho * rho) / (2.0 * rho);
    let scale = 1.0 + radius / rho;
    let center = embedding.coords().iter().map(|x| x * scale).collect();
    let alpha = 2.0 / (1.0 - rho * rho);
    LabelBall {
        embedding,
        rho,
        radius,
        center,
        alpha,
    }
}

/// Signed distance from x to the ball boundary: r - ||c* - x||.
/// Positive inside the ball, zero on its boundary.
pub fn membership(x: &HyperbolicPoint, b: &LabelBall) -> f64 {
    let dist_sq: f64 = b
        .center
        .iter()
        .zip(x.coords())
        .map(|(c, p)| (c - p) * (c - p))
        .sum();
    b.radius - dist_sq.sqrt()
}

/// Temperature-adaptive classification score s = (alpha / tau) * membership.
pub fn score(x: &HyperbolicPoint, b: &LabelBall, tau: f64) -> Result<f64> {
    if !(tau >= TAU_MIN) {
        return Err(Error::InvalidTemperature(tau));
    }
    Ok(b.alpha / tau * membership(x, b))
}

/// Classifies the relation between two balls from D = ||a.center - b.center||:
/// contains if D <= r_a - r_b, contained_by if D <= r_b - r_a, disjoint if
/// D >= r_a + r_b, otherwise overlap. Ties within 1e-12 resolve to the
/// non-overlap kind.
pub fn ball_relation(a: &LabelBall, b: &LabelBall) -> BallRelation {
    let d_sq: f64 = a
        .center
        .iter()
        .zip(&b.center)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let d = d_sq.sqrt();
    let diff = a.radius - b.radius;
    let sum = a.radius + b.radius;
    if d <= diff + TIE_TOL {
        BallRelation {
            kind: RelationKind::Contains,
            margin: diff - d,
        }
    } else if d <= -diff + TIE_TOL {
        BallRelation {
            kind: RelationKind::ContainedBy,
            margin: -diff - d,
        }
    } else if d >= sum - TIE_TOL {
        BallRelation {
            kind: RelationKind::Disjoint,
            margin: d - sum,
        }
    } else {
        let slack_inner = d - diff.abs();
        let slack_outer = sum - d;
        BallRelation {
            kind: RelationKind::Overlap,
            margin: slack_inner.min(slack_outer),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ball_at(rho: f64, dir: &[f64]) -> LabelBall {
        let nn = geometry::norm(dir);
        let c = HyperbolicPoint::project(dir.iter().map(|x| x / nn * rho).collect()).unwrap();
        ball_from_embedding(&c)
    }

    #[test]
    fn construction_examples() {
        let b = ball_at(0.5, &[1.0, 0.0]);
        assert!((b.radius - 0.75).abs() < 1e-12);
        assert!((geometry::norm(&b.center) - 1.25).abs() < 1e-12);

        let b = ball_at(0.9, &[0.0, 1.0]);
        assert!((b.radius - 0.19 / 1.8).abs() < 1e-9);
        assert!((geometry::norm(&b.center) - 1.81 / 1.8).abs() < 1e-9);
    }

    #[test]
    fn construction_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let rho = rng.gen_range(0.01..0.999);
            let b = ball_at(rho, &[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.3]);
            let cn = geometry::norm(&b.center);
            assert!((cn * cn - b.radius * b.radius - 1.0).abs() < 1e-9);
            assert!((cn - b.radius - b.rho).abs() < 1e-9);
            assert!((membership(&b.embedding, &b)).abs() < 1e-12);
            let origin = HyperbolicPoint::origin(3);
            assert!((membership(&origin, &b) + b.rho).abs() < 1e-12);
        }
    }

    #[test]
    fn near_zero_embedding_is_clamped() {
        let z = HyperbolicPoint::origin(4);
        let b = ball_from_embedding(&z);
        assert!((b.rho - EPS_RHO).abs() < 1e-18);
        assert!(b.embedding.coords()[0] > 0.0);
        let tiny = HyperbolicPoint::project(vec![0.0, 1e-9, 0.0, 0.0]).unwrap();
        let b = ball_from_embedding(&tiny);
        assert!((b.rho - EPS_RHO).abs() < 1e-18);
        assert!(b.embedding.coords()[1] > 0.0 && b.embedding.coords()[0] == 0.0);
    }

    #[test]
    fn membership_example() {
        let b = ball_at(0.5, &[1.0, 0.0]);
        let x = HyperbolicPoint::project(vec![0.7, 0.0]).unwrap();
        assert!((membership(&x, &b) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn score_behaviour() {
        let b = ball_at(0.5, &[1.0, 0.0]);
        let origin = HyperbolicPoint::origin(2);
        let s = score(&origin, &b, 1.0).unwrap();
        assert!((s + 4.0 / 3.0).abs() < 1e-12);
        let half = score(&origin, &b, 0.5).unwrap();
        assert!((half - 2.0 * s).abs() < 1e-12);
        assert!((score(&b.embedding, &b, 2.0).unwrap()).abs() < 1e-12);
        assert!(matches!(
            score(&origin, &b, 1e-4),
            Err(Error::InvalidTemperature(_))
        ));
    }

    #[test]
    fn relation_examples() {
        // origin-proximate balls are the large ones
        let a = ball_at(0.3, &[1.0, 0.0]);
        let b = ball_at(0.8, &[1.0, 0.0]);
        let rel = ball_relation(&a, &b);
        assert_eq!(rel.kind, RelationKind::Contains);
        assert!(rel.margin > 0.0);
        let rev = ball_relation(&b, &a);
        assert_eq!(rev.kind, RelationKind::ContainedBy);
        assert!((rev.margin - rel.margin).abs() < 1e-12);

        let same = ball_relation(&a, &a);
        assert_eq!(same.kind, RelationKind::Contains);
        assert!(same.margin.abs() < 1e-12);

        let l = ball_at(0.9, &[1.0, 0.0]);
        let r = ball_at(0.9, &[-1.0, 0.0]);
        let rel = ball_relation(&l, &r);
        assert_eq!(rel.kind, RelationKind::Disjoint);
        assert_eq!(ball_relation(&r, &l).kind, RelationKind::Disjoint);
    }

    #[test]
    fn relation_overlap_case() {
        let a = ball_at(0.6, &[1.0, 0.0]);
        let b = ball_at(0.6, &[0.9, 0.43589]);
        let rel = ball_relation(&a, &b);
        assert_eq!(rel.kind, RelationKind::Overlap);
        assert_eq!(ball_relation(&b, &a).kind, RelationKind::Overlap);
        assert!(rel.margin > 0.0);
    }

    #[test]
    fn membership_positive_exactly_on_ray_segment() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let rho = rng.gen_range(0.2..0.9);
            let b = ball_at(rho, &[1.0, 0.0]);
            let hi = (geometry::norm(&b.center) + b.radius).min(1.0);
            for _ in 0..50 {
                let t = rng.gen_range(0.0..0.999);
                let x = HyperbolicPoint::project(vec![t, 0.0]).unwrap();
                let m = membership(&x, &b);
                let inside = t > rho && t < hi;
                if (t - rho).abs() > 1e-9 && (t - hi).abs() > 1e-9 {
                    assert_eq!(m > 0.0, inside, "rho={rho} t={t} m={m}");
                }
            }
        }
    }
}
