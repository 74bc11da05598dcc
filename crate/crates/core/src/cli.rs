//! Command implementations behind the binary: data generation, training,
//! evaluation, correlation analysis and response-map export. All commands are
//! config-driven and deterministic given (config, seed).

use std::fs;
use std::path::Path;

use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, SynthConfig};
use crate::error::{Error, Result};
use crate::eval;
use crate::grad;
use crate::losses::{DoubleWellParams, LossBreakdown, LossConfig};
use crate::optim::OptimState;
use crate::projector::{self, HeadMode, ModelParams, TempMode};

/// JSON form of the temperature mode: a name string, or `{"fixed": tau}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TempModeRepr {
    Fixed { fixed: f64 },
    Name(String),
}

impl TempModeRepr {
    pub fn resolve(&self) -> Result<TempMode> {
        match self {
            TempModeRepr::Fixed { fixed } => {
                if *fixed <= 0.0 {
                    return Err(Error::Config(format!(
                        "temp_mode.fixed must be positive, got {fixed}"
                    )));
                }
                Ok(TempMode::Fixed(*fixed))
            }
            TempModeRepr::Name(s) => match s.as_str() {
                "learnable_scalar" => Ok(TempMode::LearnableScalar),
                "learnable_per_class" => Ok(TempMode::LearnablePerClass),
                other => Err(Error::Config(format!(
                    "temp_mode: unknown value `{other}` (expected learnable_scalar, \
                     learnable_per_class, or {{\"fixed\": tau}})"
                ))),
            },
        }
    }
}

/// Paths to a pre-generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub features: String,
    pub labels_single: String,
    #[serde(default)]
    pub labels_full: Option<String>,
}

fn d_epochs() -> usize {
    60
}
fn d_batch() -> usize {
    128
}
fn d_n() -> usize {
    16
}
// The label-ball head needs larger steps than typical fine-tuning rates on
// the small synthetic benchmark; these converge within the default 60 epochs.
fn d_lr_riem() -> f64 {
    1e-2
}
fn d_lr_euc() -> f64 {
    1e-3
}
fn d_clip() -> f64 {
    1.0
}
fn d_lambda1() -> f64 {
    10.0
}
fn d_lambda2() -> f64 {
    1.0
}
fn d_beta1() -> f64 {
    0.1
}
fn d_beta2() -> f64 {
    500.0
}
fn d_c1() -> f64 {
    0.1
}
fn d_c2() -> f64 {
    0.9
}
fn d_temp_mode() -> TempModeRepr {
    TempModeRepr::Name("learnable_per_class".into())
}
fn d_mode() -> HeadMode {
    HeadMode::Hyperbolic
}

/// Full training configuration, read from a single JSON document. Unknown
/// keys are rejected. Either `data` (CSV paths) or `synth` must be present
/// for training; `gen-data` requires `synth`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_n")]
    pub n: usize,
    /// Expected feature dimension; validated against the dataset if set.
    #[serde(default)]
    pub d: Option<usize>,
    /// Expected label count; validated against the dataset if set.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_lr_riem")]
    pub lr_riem: f64,
    #[serde(default = "d_lr_euc")]
    pub lr_euc: f64,
    #[serde(default = "d_clip")]
    pub clip_norm: f64,
    #[serde(default = "d_lambda1")]
    pub lambda1: f64,
    #[serde(default = "d_lambda2")]
    pub lambda2: f64,
    #[serde(default = "d_beta1")]
    pub beta1: f64,
    #[serde(default = "d_beta2")]
    pub beta2: f64,
    #[serde(default = "d_c1")]
    pub c1: f64,
    #[serde(default = "d_c2")]
    pub c2: f64,
    #[serde(default)]
    pub beta1_as_width: bool,
    #[serde(default = "d_temp_mode")]
    pub temp_mode: TempModeRepr,
    #[serde(default = "d_mode")]
    pub mode: HeadMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub data: Option<DataPaths>,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config deserializes via defaults")
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        for (name, v) in [
            ("lr_riem", self.lr_riem),
            ("lr_euc", self.lr_euc),
            ("clip_norm", self.clip_norm),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        self.temp_mode.resolve()?;
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        Ok(())
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            double_well: DoubleWellParams {
                beta1: self.beta1,
                beta2: self.beta2,
                c1: self.c1,
                c2: self.c2,
                beta1_as_width: self.beta1_as_width,
            },
        }
    }
}

/// Reads and validates a config file.
pub fn load_train_config(path: &Path) -> Result<TrainConfig> {
    let text = fs::read_to_string(path)?;
    let cfg: TrainConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Resolves the training dataset: CSV paths win over the synth block.
pub fn load_training_data(cfg: &TrainConfig) -> Result<Dataset> {
    let ds = if let Some(paths) = &cfg.data {
        data::load_dataset(
            Path::new(&paths.features),
            Path::new(&paths.labels_single),
            paths.labels_full.as_deref().map(Path::new),
        )?
    } else if let Some(synth) = &cfg.synth {
        data::generate_synthetic(synth)?
    } else {
        return Err(Error::Config(
            "config needs either a `data` block or a `synth` block".into(),
        ));
    };
    if let Some(d) = cfg.d {
        if d != ds.feature_dim {
            return Err(Error::Config(format!(
                "config says d = {d} but dataset has feature_dim = {}",
                ds.feature_dim
            )));
        }
    }
    if let Some(k) = cfg.k {
        if k != ds.num_labels {
            return Err(Error::Config(format!(
                "config says k = {k} but dataset has {} labels",
                ds.num_labels
            )));
        }
    }
    Ok(ds)
}

/// Seeded mini-batch training. Batches come from a fresh shuffle each epoch;
/// the last short batch is kept. Returns the trained model and one
/// LossBreakdown per epoch (epoch mean, weighted by batch size).
pub fn train_model(cfg: &TrainConfig, ds: &Dataset) -> Result<(ModelParams, Vec<LossBreakdown>)> {
    let temp_mode = cfg.temp_mode.resolve()?;
    let loss_cfg = cfg.loss_config();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(
        cfg.mode,
        cfg.n,
        ds.feature_dim,
        ds.num_labels,
        temp_mode,
        &mut rng,
    );
    let mut state = OptimState::new(&params, cfg.lr_riem, cfg.lr_euc, cfg.clip_norm);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums = LossBreakdown {
            cls: 0.0,
            reg: 0.0,
            uni: 0.0,
            total: 0.0,
            lambda1: loss_cfg.lambda1,
            lambda2: loss_cfg.lambda2,
        };
        for chunk in order.chunks(cfg.batch_size) {
            let feats: Vec<&[f64]> = chunk.iter().map(|&i| ds.features[i].as_slice()).collect();
            let pos: Vec<usize> = chunk.iter().map(|&i| ds.observed_pos[i]).collect();
            let (breakdown, grads) = grad::loss_gradients(&params, &feats, &pos, &loss_cfg)?;
            crate::optim::step(&mut state, &mut params, grads)?;
            let w = chunk.len() as f64 / ds.len() as f64;
            sums.cls += w * breakdown.cls;
            sums.reg += w * breakdown.reg;
            sums.uni += w * breakdown.uni;
            sums.total += w * breakdown.total;
        }
        history.push(sums);
    }
    Ok((params, history))
}

fn metrics_path(model_path: &Path) -> std::path::PathBuf {
    let mut os = model_path.as_os_str().to_os_string();
    os.push(".metrics.csv");
    os.into()
}

fn append_metrics(path: &Path, history: &[LossBreakdown]) -> Result<()> {
    let mut out = String::new();
    if !path.exists() {
        out.push_str("epoch,cls,reg,uni,total\n");
    }
    for (e, h) in history.iter().enumerate() {
        out.push_str(&format!("{},{},{},{},{}\n", e + 1, h.cls, h.reg, h.uni, h.total));
    }
    use std::io::Write;
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Generates the synthetic dataset and writes the three CSVs into out_dir.
pub fn cmd_gen_data(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let cfg = load_train_config(config_path)?;
    let mut synth = cfg
        .synth
        .ok_or_else(|| Error::Config("gen-data requires a `synth` block".into()))?;
    if let Some(s) = seed {
        synth.seed = s;
    }
    synth.validate()?;
    let ds = data::generate_synthetic(&synth)?;
    fs::create_dir_all(out_dir)?;
    data::save_features(&out_dir.join("features.csv"), &ds.ids, &ds.features)?;
    data::save_single_labels(&out_dir.join("labels_single.csv"), &ds.ids, &ds.observed_pos)?;
    let full = ds
        .full_labels
        .as_ref()
        .expect("synthetic data always carries full labels");
    data::save_full_labels(&out_dir.join("labels_full.csv"), &ds.ids, full)?;
    println!(
        "wrote {} samples: K = {}, d = {}, S = {}",
        out_dir.display(),
        ds.num_labels,
        ds.feature_dim,
        ds.len()
    );
    Ok(())
}

/// Trains a model and writes it to out_model_path, with per-epoch losses
/// appended to `<out>.metrics.csv` beside it.
pub fn cmd_train(config_path: &Path, out_model_path: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = load_train_config(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let ds = load_training_data(&cfg)?;
    let (params, history) = train_model(&cfg, &ds)?;
    projector::save_model(&params, out_model_path)?;
    append_metrics(&metrics_path(out_model_path), &history)?;
    if let (Some(first), Some(last)) = (history.first(), history.last()) {
        println!(
            "trained {} epochs: total loss {} -> {}",
            history.len(),
            first.total,
            last.total
        );
    } else {
        println!("trained 0 epochs: model equals initialization");
    }
    Ok(())
}

/// Evaluates a model against full ground-truth labels; prints the JSON report.
pub fn cmd_eval(model_path: &Path, features: &Path, labels_full: &Path) -> Result<()> {
    let params = projector::load_model(model_path)?;
    let ds = load_eval_dataset(features, labels_full)?;
    let report = eval::mean_ap(&params, &ds)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
    println!("{json}");
    Ok(())
}

/// Builds an evaluation dataset from features + full labels only; observed
/// positives are synthesized from the first positive column (unused by mAP).
pub fn load_eval_dataset(features: &Path, labels_full: &Path) -> Result<Dataset> {
    let tmp = tempfile_single_labels(features, labels_full)?;
    data::load_dataset(features, tmp.path(), Some(labels_full))
}

fn tempfile_single_labels(
    features: &Path,
    labels_full: &Path,
) -> Result<tempfile_shim::NamedTemp> {
    // Derive a single-positive file so load_dataset's shape checks apply.
    let full = data::load_full_labels_only(labels_full)?;
    let ids = data::load_feature_ids(features)?;
    if ids.len() != full.0.len() {
        return Err(Error::InvalidDataset(format!(
            "{} feature rows but {} full-label rows",
            ids.len(),
            full.0.len()
        )));
    }
    let pos: Vec<usize> = full
        .1
        .iter()
        .map(|row| row.iter().position(|&y| y == 1).unwrap_or(0))
        .collect();
    let tmp = tempfile_shim::NamedTemp::new()?;
    data::save_single_labels(tmp.path(), &full.0, &pos)?;
    Ok(tmp)
}

/// Small RAII temp file helper over std; avoids leaking the derived CSV.
mod tempfile_shim {
    use std::path::{Path, PathBuf};

    pub struct NamedTemp {
        path: PathBuf,
    }

    impl NamedTemp {
        pub fn new() -> std::io::Result<Self> {
            let path = std::env::temp_dir().join(format!(
                "hyperball-{}-{:x}.csv",
                std::process::id(),
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .unwrap()
                    .as_nanos()
            ));
            Ok(Self { path })
        }

        pub fn path(&self) -> &Path {
            &self.path
        }
    }

    impl Drop for NamedTemp {
        fn drop(&mut self) {
            let _ = std::fs::remove_file(&self.path);
        }
    }
}

/// Writes the co-occurrence/distance correlation CSV and prints pearson_r.
pub fn cmd_analyze(model_path: &Path, labels_full: &Path, out_csv: &Path) -> Result<()> {
    let params = projector::load_model(model_path)?;
    let (_, full) = data::load_full_labels_only(labels_full)?;
    let report = eval::cooccurrence_analysis(&params, &full)?;
    eval::write_correlation_csv(out_csv, &report)?;
    println!(
        "pearson_r = {} over {} pairs",
        report.pearson_r, report.num_pairs
    );
    Ok(())
}

/// Exports a response-map grid CSV for one label.
pub fn cmd_export_map(
    model_path: &Path,
    label_idx: usize,
    resolution: usize,
    out_csv: &Path,
) -> Result<()> {
    let params = projector::load_model(model_path)?;
    let rows = eval::export_response_map(&params, label_idx, resolution)?;
    eval::write_response_map_csv(out_csv, &rows)?;
    println!(
        "wrote {} grid rows for label {label_idx} at resolution {resolution}",
        rows.len()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.epochs, 60);
        assert_eq!(cfg.batch_size, 128);
        assert_eq!(cfg.n, 16);
        assert_eq!(cfg.lr_riem, 1e-2);
        assert_eq!(cfg.lr_euc, 1e-3);
        assert_eq!(cfg.clip_norm, 1.0);
        assert_eq!(cfg.lambda1, 10.0);
        assert_eq!(cfg.lambda2, 1.0);
        assert_eq!(cfg.mode, HeadMode::Hyperbolic);
        assert!(matches!(
            cfg.temp_mode.resolve().unwrap(),
            TempMode::LearnablePerClass
        ));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = serde_json::from_str::<TrainConfig>("{\"epoch\": 3}").unwrap_err();
        assert!(err.to_string().contains("epoch"));
    }

    #[test]
    fn temp_mode_representations() {
        let cfg: TrainConfig =
            serde_json::from_str("{\"temp_mode\": {\"fixed\": 0.5}}").unwrap();
        assert!(matches!(cfg.temp_mode.resolve().unwrap(), TempMode::Fixed(t) if t == 0.5));
        let cfg: TrainConfig =
            serde_json::from_str("{\"temp_mode\": \"learnable_scalar\"}").unwrap();
        assert!(matches!(
            cfg.temp_mode.resolve().unwrap(),
            TempMode::LearnableScalar
        ));
        let cfg: TrainConfig = serde_json::from_str("{\"temp_mode\": \"warm\"}").unwrap();
        assert!(cfg.temp_mode.resolve().is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = TrainConfig::default();
        cfg.lr_riem = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = TrainConfig::default();
        cfg.lambda1 = -1.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let mut cfg = TrainConfig::default();
        cfg.epochs = 0;
        cfg.synth = Some(SynthConfig {
            samples: 16,
            ..SynthConfig::default()
        });
        let ds = load_training_data(&cfg).unwrap();
        let (params, history) = train_model(&cfg, &ds).unwrap();
        assert!(history.is_empty());
        let temp = cfg.temp_mode.resolve().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init = ModelParams::init(cfg.mode, cfg.n, ds.feature_dim, ds.num_labels, temp, &mut rng);
        assert_eq!(params.w, init.w);
        assert_eq!(params.labels, init.labels);
    }

    #[test]
    fn training_is_deterministic() {
        let mut cfg = TrainConfig::default();
        cfg.epochs = 2;
        cfg.batch_size = 32;
        cfg.synth = Some(SynthConfig {
            samples: 64,
            d: 8,
            ..SynthConfig::default()
        });
        let ds = load_training_data(&cfg).unwrap();
        let (a, ha) = train_model(&cfg, &ds).unwrap();
        let (b, hb) = train_model(&cfg, &ds).unwrap();
        assert_eq!(a.w, b.w);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.log_tau, b.log_tau);
        assert_eq!(ha.len(), hb.len());
        for (x, y) in ha.iter().zip(&hb) {
            assert_eq!(x.total, y.total);
        }
    }

    #[test]
    fn missing_data_and_synth_is_config_error() {
        let cfg = TrainConfig::default();
        assert!(matches!(
            load_training_data(&cfg),
            Err(Error::Config(_))
        ));
    }
}
