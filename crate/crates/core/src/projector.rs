//! Model parameters and the classifier forward pass.
//!
//! Euclidean features are mapped into the ball by a tangent-space affine map
//! followed by the exponential map (the Möbius linear layer); each label ball
//! then produces a temperature-adaptive score. A plain affine head is kept
//! alongside as the Euclidean ablation baseline.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::balls::{self, LabelBall, TAU_MIN};
use crate::error::{Error, Result};
use crate::geometry::{self, exp0, HyperbolicPoint, TangentVector};

pub const MODEL_VERSION: u32 = 1;

/// How the temperature tau is parameterized. All variants store log(tau) so
/// positivity needs no projection; the fixed variant is never optimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TempMode {
    Fixed(f64),
    LearnableScalar,
    LearnablePerClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    Hyperbolic,
    EuclideanBaseline,
}

/// The full trainable state: projection weights, label embeddings and
/// temperature parameters.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub mode: HeadMode,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    /// Projection weights, row-major n x d.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    /// K label embeddings of dimension n. In hyperbolic mode these satisfy
    /// the ball invariant; in baseline mode they are free class vectors.
    pub labels: Vec<Vec<f64>>,
    pub temp_mode: TempMode,
    /// log(tau): length 1 for fixed/scalar modes, K for per-class.
    pub log_tau: Vec<f64>,
}

impl ModelParams {
    /// Seeded initialization: W, b uniform in (-1/sqrt(d), 1/sqrt(d)); label
    /// embeddings at random directions with norm uniform in (0.3, 0.7);
    /// log(tau) = 0.
    pub fn init(
        mode: HeadMode,
        n: usize,
        d: usize,
        k: usize,
        temp_mode: TempMode,
        rng: &mut impl Rng,
    ) -> Self {
        let bound = 1.0 / (d as f64).sqrt();
        let w: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-bound..bound)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        let labels: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let nn = geometry::norm(&dir).max(1e-12);
                let rho = rng.gen_range(0.3..0.7);
                dir.iter().map(|x| x / nn * rho).collect()
            })
            .collect();
        let log_tau = match temp_mode {
            TempMode::Fixed(tau) => vec![tau.ln()],
            TempMode::LearnableScalar => vec![0.0],
            TempMode::LearnablePerClass => vec![0.0; k],
        };
        Self {
            mode,
            n,
            d,
            k,
            w,
            b,
            labels,
            temp_mode,
            log_tau,
        }
    }

    /// Temperature for label i under the current mode.
    pub fn tau(&self, i: usize) -> f64 {
        let lt = match self.temp_mode {
            TempMode::Fixed(_) | TempMode::LearnableScalar => self.log_tau[0],
            TempMode::LearnablePerClass => self.log_tau[i],
        };
        lt.exp().max(TAU_MIN)
    }

    /// Label balls for the current embeddings (hyperbolic mode).
    pub fn label_balls(&self) -> Result<Vec<LabelBall>> {
        self.labels
            .iter()
            .map(|c| Ok(balls::ball_from_embedding(&HyperbolicPoint::project(c.clone())?)))
            .collect()
    }

    pub fn check_feature_dim(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.d {
            return Err(Error::Shape(format!(
                "feature dimension {} does not match model d = {}",
                f.len(),
                self.d
            )));
        }
        Ok(())
    }
}

/// Tangent-space affine map z = W f + b.
pub(crate) fn affine(w: &[f64], b: &[f64], f: &[f64]) -> Vec<f64> {
    let n = b.len();
    let d = f.len();
    let mut z = b.to_vec();
    for (i, zi) in z.iter_mut().enumerate().take(n) {
        *zi += geometry::dot(&w[i * d..(i + 1) * d], f);
    }
    z
}

/// Möbius linear layer: exp0(W f + b), projected into the ball.
pub fn mobius_linear(w: &[f64], b: &[f64], f: &[f64]) -> Result<HyperbolicPoint> {
    if w.len() != b.len() * f.len() {
        return Err(Error::Shape(format!(
            "W has {} entries, expected {} x {}",
            w.len(),
            b.len(),
            f.len()
        )));
    }
    let z = affine(w, b, f);
    Ok(exp0(&TangentVector::new(z)?))
}

/// Classifier forward pass: one score per label.
pub fn forward(params: &ModelParams, f: &[f64]) -> Result<Vec<f64>> {
    params.check_feature_dim(f)?;
    match params.mode {
        HeadMode::Hyperbolic => {
            let x = mobius_linear(&params.w, &params.b, f)?;
            let balls = params.label_balls()?;
            balls
                .iter()
                .enumerate()
                .map(|(i, ball)| balls::score(&x, ball, params.tau(i)))
                .collect()
        }
        HeadMode::EuclideanBaseline => {
            let x = affine(&params.w, &params.b, f);
            Ok(params.labels.iter().map(|c| geometry::dot(c, &x)).collect())
        }
    }
}

pub fn sigmoid(s: f64) -> f64 {
    let p = if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    };
    p.clamp(1e-12, 1.0 - 1e-12)
}

/// Element-wise sigmoid of forward scores.
pub fn predict_probs(params: &ModelParams, f: &[f64]) -> Result<Vec<f64>> {
    Ok(forward(params, f)?.into_iter().map(sigmoid).collect())
}

// ---------------------------------------------------------------------------
// Persistence: one JSON document, numbers round-trip exactly.

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LogTauRepr {
    Scalar(f64),
    PerClass(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    version: u32,
    mode: HeadMode,
    n: usize,
    d: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "W")]
    w: Vec<f64>,
    b: Vec<f64>,
    labels: Vec<Vec<f64>>,
    temp_mode: String,
    log_tau: LogTauRepr,
}

pub fn save_model(params: &ModelParams, path: &Path) -> Result<()> {
    let (temp_mode, log_tau) = match params.temp_mode {
        TempMode::Fixed(_) => ("fixed".to_string(), LogTauRepr::Scalar(params.log_tau[0])),
        TempMode::LearnableScalar => (
            "learnable_scalar".to_string(),
            LogTauRepr::Scalar(params.log_tau[0]),
        ),
        TempMode::LearnablePerClass => (
            "learnable_per_class".to_string(),
            LogTauRepr::PerClass(params.log_tau.clone()),
        ),
    };
    let doc = ModelDoc {
        version: MODEL_VERSION,
        mode: params.mode,
        n: params.n,
        d: params.d,
        k: params.k,
        w: params.w.clone(),
        b: params.b.clone(),
        labels: params.labels.clone(),
        temp_mode,
        log_tau,
    };
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Config(format!("model serialization failed: {e}")))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    let text = fs::read_to_string(path)?;
    let doc: ModelDoc = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    if doc.version != MODEL_VERSION {
        return Err(Error::Config(format!(
            "unsupported model version {}",
            doc.version
        )));
    }
    if doc.w.len() != doc.n * doc.d || doc.b.len() != doc.n || doc.labels.len() != doc.k {
        return Err(Error::Shape("model document dimensions disagree".into()));
    }
    if doc.labels.iter().any(|c| c.len() != doc.n) {
        return Err(Error::Shape("label embedding dimension mismatch".into()));
    }
    let (temp_mode, log_tau) = match (doc.temp_mode.as_str(), doc.log_tau) {
        ("fixed", LogTauRepr::Scalar(lt)) => (TempMode::Fixed(lt.exp()), vec![lt]),
        ("learnable_scalar", LogTauRepr::Scalar(lt)) => (TempMode::LearnableScalar, vec![lt]),
        ("learnable_per_class", LogTauRepr::PerClass(v)) if v.len() == doc.k => {
            (TempMode::LearnablePerClass, v)
        }
        (other, _) => {
            return Err(Error::Config(format!(
                "unrecognized temp_mode/log_tau combination: {other}"
            )))
        }
    };
    Ok(ModelParams {
        mode: doc.mode,
        n: doc.n,
        d: doc.d,
        k: doc.k,
        w: doc.w,
        b: doc.b,
        labels: doc.labels,
        temp_mode,
        log_tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_model(mode: HeadMode) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        ModelParams::init(mode, 4, 3, 2, TempMode::LearnablePerClass, &mut rng)
    }

    #[test]
    fn mobius_linear_examples() {
        let x = mobius_linear(&[0.0; 6], &[0.0; 2], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x.norm(), 0.0);

        // identity weights, zero bias
        let w = vec![1.0, 0.0, 0.0, 1.0];
        let x = mobius_linear(&w, &[0.0, 0.0], &[0.5, 0.0]).unwrap();
        assert!((x.coords()[0] - 0.5f64.tanh()).abs() < 1e-12);
        assert_eq!(x.coords()[1], 0.0);

        let huge = mobius_linear(&w, &[0.0, 0.0], &[100.0, -40.0]).unwrap();
        assert!(huge.norm() < 1.0);

        assert!(matches!(
            mobius_linear(&w, &[0.0, 0.0], &[1.0, 2.0, 3.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn forward_single_label_example() {
        // K = 1 label at rho 0.5, x lands at the origin, tau = 1
        let params = ModelParams {
            mode: HeadMode::Hyperbolic,
            n: 2,
            d: 2,
            k: 1,
            w: vec![0.0; 4],
            b: vec![0.0; 2],
            labels: vec![vec![0.5, 0.0]],
            temp_mode: TempMode::Fixed(1.0),
            log_tau: vec![0.0],
        };
        let s = forward(&params, &[3.0, -1.0]).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0] + 4.0 / 3.0).abs() < 1e-12);
        let p = predict_probs(&params, &[3.0, -1.0]).unwrap();
        assert!((p[0] - 0.2086085273).abs() < 1e-9);
    }

    #[test]
    fn score_zero_at_label_embedding() {
        let mut params = small_model(HeadMode::Hyperbolic);
        // choose W so x equals the first label embedding: impossible in general,
        // so check via a direct ball score instead
        params.labels[0] = vec![0.4, 0.1, 0.0, 0.0];
        let ball = params.label_balls().unwrap().remove(0);
        let s = balls::score(&ball.embedding, &ball, params.tau(0)).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn shared_temperature_scaling_preserves_argmax() {
        let params = small_model(HeadMode::Hyperbolic);
        let f = [0.2, -0.4, 0.9];
        let s1 = forward(&params, &f).unwrap();
        let mut doubled = params.clone();
        doubled.temp_mode = TempMode::Fixed(2.0);
        doubled.log_tau = vec![2.0f64.ln()];
        let mut unit = params;
        unit.temp_mode = TempMode::Fixed(1.0);
        unit.log_tau = vec![0.0];
        let s_unit = forward(&unit, &f).unwrap();
        let s2 = forward(&doubled, &f).unwrap();
        for (a, b) in s_unit.iter().zip(&s2) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
        drop(s1);
    }

    #[test]
    fn forward_is_deterministic() {
        let params = small_model(HeadMode::Hyperbolic);
        let f = [0.1, 0.2, 0.3];
        let a = forward(&params, &f).unwrap();
        let b = forward(&params, &f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn baseline_matches_standalone_affine() {
        let params = small_model(HeadMode::EuclideanBaseline);
        let f = [0.5, -1.0, 2.0];
        let scores = forward(&params, &f).unwrap();
        // independent affine transcription
        let mut x = params.b.clone();
        for i in 0..params.n {
            for j in 0..params.d {
                x[i] += params.w[i * params.d + j] * f[j];
            }
        }
        for (i, s) in scores.iter().enumerate() {
            let expect: f64 = params.labels[i].iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((s - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn model_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        for mode in [HeadMode::Hyperbolic, HeadMode::EuclideanBaseline] {
            let params = small_model(mode);
            save_model(&params, &path).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(loaded.w, params.w);
            assert_eq!(loaded.b, params.b);
            assert_eq!(loaded.labels, params.labels);
            assert_eq!(loaded.log_tau, params.log_tau);
            assert_eq!(loaded.mode, params.mode);
        }
    }

    #[test]
    fn sigmoid_clamps() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(1e6) <= 1.0 - 1e-12);
        assert!(sigmoid(-1e6) >= 1e-12);
    }
}
