//! Synthetic hierarchical single-positive datasets and CSV ingestion.
//!
//! Label layout for the generator: superclass labels occupy indices
//! 0..num_super; the subclasses of superclass s occupy
//! num_super + s * subs_per_super .. num_super + (s + 1) * subs_per_super.
//!
//! All randomness comes from ChaCha8, a portable counter-based generator, so
//! datasets reproduce bit-for-bit across platforms for a fixed seed.
//!
//! File formats (UTF-8, LF line endings, ids are arbitrary non-empty strings
//! without commas):
//!   features:      header `id,f0,...,f{d-1}`
//!   single labels: header `id,pos_idx`
//!   full labels:   header `id,y0,...,y{K-1}`, entries 0/1

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature matrix plus single-positive supervision, with the full label
/// matrix retained when known (synthetic data, evaluation splits).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub observed_pos: Vec<usize>,
    pub full_labels: Option<Vec<Vec<u8>>>,
    pub num_labels: usize,
    pub feature_dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    fn validate(&self) -> Result<()> {
        for (s, &p) in self.observed_pos.iter().enumerate() {
            if p >= self.num_labels {
                return Err(Error::InvalidDataset(format!(
                    "sample {s}: positive index {p} out of range for {} labels",
                    self.num_labels
                )));
            }
        }
        if let Some(full) = &self.full_labels {
            for (s, row) in full.iter().enumerate() {
                if row.iter().all(|&y| y == 0) {
                    return Err(Error::InvalidDataset(format!(
                        "sample {s}: full-label row has no positives"
                    )));
                }
                if row[self.observed_pos[s]] != 1 {
                    return Err(Error::InvalidDataset(format!(
                        "sample {s}: observed positive {} is not set in the full labels",
                        self.observed_pos[s]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Synthetic generator settings: a superclass/subclass hierarchy with planted
/// co-occurrence pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_super: usize,
    pub subs_per_super: usize,
    /// (first label, second label, activation probability); whenever the
    /// first label is active the second activates with the given probability.
    #[serde(default)]
    pub cooccur_pairs: Vec<(usize, usize, f64)>,
    pub d: usize,
    pub samples: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_super: 5,
            subs_per_super: 2,
            cooccur_pairs: vec![(0, 1, 0.7), (1, 2, 0.4), (3, 4, 0.55)],
            d: 32,
            samples: 4000,
            noise_sigma: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn num_labels(&self) -> usize {
        self.num_super * (1 + self.subs_per_super)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_super == 0 {
            return Err(Error::Config("num_super must be positive".into()));
        }
        if self.subs_per_super == 0 {
            return Err(Error::Config("subs_per_super must be positive".into()));
        }
        if self.d == 0 || self.samples == 0 {
            return Err(Error::Config("d and samples must be positive".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        let k = self.num_labels();
        for &(a, b, p) in &self.cooccur_pairs {
            if a >= k || b >= k {
                return Err(Error::Config(format!(
                    "cooccur pair ({a}, {b}) out of range for {k} labels"
                )));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "cooccur probability {p} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream layout simple.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Generates a synthetic hierarchical SPMLL dataset. Per sample: one
/// superclass and 1-2 of its subclasses activate, planted co-occurrence pairs
/// fire, and the feature vector is the sum of active label prototypes plus
/// Gaussian noise.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let k = cfg.num_labels();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let prototypes: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..cfg.d).map(|_| standard_normal(&mut rng)).collect())
        .collect();

    let mut full = Vec::with_capacity(cfg.samples);
    let mut features = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        let mut active = vec![0u8; k];
        let sup = rng.gen_range(0..cfg.num_super);
        active[sup] = 1;
        let sub_count = rng.gen_range(1..=cfg.subs_per_super.min(2));
        let base = cfg.num_super + sup * cfg.subs_per_super;
        // choose sub_count distinct subclasses of this superclass
        let mut choices: Vec<usize> = (0..cfg.subs_per_super).collect();
        for picked in 0..sub_count {
            let j = rng.gen_range(picked..choices.len());
            choices.swap(picked, j);
            active[base + choices[picked]] = 1;
        }
        for &(a, b, p) in &cfg.cooccur_pairs {
            if active[a] == 1 && rng.gen_range(0.0..1.0) < p {
                active[b] = 1;
            }
        }
        let mut f = vec![0.0; cfg.d];
        for (label, proto) in prototypes.iter().enumerate() {
            if active[label] == 1 {
                for (x, p) in f.iter_mut().zip(proto) {
                    *x += p;
                }
            }
        }
        for x in f.iter_mut() {
            *x += cfg.noise_sigma * standard_normal(&mut rng);
        }
        full.push(active);
        features.push(f);
    }

    let observed_pos = mask_to_single_positive(&full, cfg.seed.wrapping_add(1))?;
    let ds = Dataset {
        ids: (0..cfg.samples).map(|i| format!("s{i:06}")).collect(),
        features,
        observed_pos,
        full_labels: Some(full),
        num_labels: k,
        feature_dim: cfg.d,
    };
    ds.validate()?;
    Ok(ds)
}

/// Picks one positive per row uniformly at random (seeded).
pub fn mask_to_single_positive(full_labels: &[Vec<u8>], seed: u64) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    full_labels
        .iter()
        .enumerate()
        .map(|(s, row)| {
            let positives: Vec<usize> = row
                .iter()
                .enumerate()
                .filter(|(_, &y)| y == 1)
                .map(|(i, _)| i)
                .collect();
            if positives.is_empty() {
                return Err(Error::InvalidDataset(format!(
                    "sample {s}: no positive labels to mask"
                )));
            }
            Ok(positives[rng.gen_range(0..positives.len())])
        })
        .collect()
}

/// Seeded shuffle then split; the two parts are disjoint and exhaustive.
pub fn train_eval_split(ds: &Dataset, frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::Config(format!("split fraction {frac} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let cut = (ds.len() as f64 * frac).round() as usize;
    let take = |idx: &[usize]| Dataset {
        ids: idx.iter().map(|&i| ds.ids[i].clone()).collect(),
        features: idx.iter().map(|&i| ds.features[i].clone()).collect(),
        observed_pos: idx.iter().map(|&i| ds.observed_pos[i]).collect(),
        full_labels: ds
            .full_labels
            .as_ref()
            .map(|full| idx.iter().map(|&i| full[i].clone()).collect()),
        num_labels: ds.num_labels,
        feature_dim: ds.feature_dim,
    };
    Ok((take(&order[..cut]), take(&order[cut..])))
}

// ---------------------------------------------------------------------------
// CSV serialization

fn fmt_float(x: f64) -> String {
    // shortest representation that round-trips f64
    let mut s = format!("{x}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

pub fn save_features(path: &Path, ids: &[String], features: &[Vec<f64>]) -> Result<()> {
    let d = features.first().map_or(0, |f| f.len());
    let mut out = String::from("id");
    for j in 0..d {
        out.push_str(&format!(",f{j}"));
    }
    out.push('\n');
    for (id, f) in ids.iter().zip(features) {
        out.push_str(id);
        for x in f {
            out.push(',');
            out.push_str(&fmt_float(*x));
        }
        out.push('\n');
    }
    write_atomic(path, &out)
}

pub fn save_single_labels(path: &Path, ids: &[String], pos: &[usize]) -> Result<()> {
    let mut out = String::from("id,pos_idx\n");
    for (id, p) in ids.iter().zip(pos) {
        out.push_str(&format!("{id},{p}\n"));
    }
    write_atomic(path, &out)
}

pub fn save_full_labels(path: &Path, ids: &[String], full: &[Vec<u8>]) -> Result<()> {
    let k = full.first().map_or(0, |r| r.len());
    let mut out = String::from("id");
    for j in 0..k {
        out.push_str(&format!(",y{j}"));
    }
    out.push('\n');
    for (id, row) in ids.iter().zip(full) {
        out.push_str(id);
        for y in row {
            out.push_str(&format!(",{y}"));
        }
        out.push('\n');
    }
    write_atomic(path, &out)
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(contents.as_bytes())?;
    Ok(())
}

struct CsvReader {
    path: String,
    lines: Vec<String>,
}

impl CsvReader {
    fn open(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(Self {
            path: path.display().to_string(),
            lines: text.lines().map(str::to_string).collect(),
        })
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }

    /// Checks the header and returns (id, fields) per data row with its
    /// 1-based line number.
    fn rows(&self, expected_header: &dyn Fn(&[&str]) -> bool) -> Result<Vec<(usize, &str, Vec<&str>)>> {
        let header = self
            .lines
            .first()
            .ok_or_else(|| self.err(1, "empty file"))?;
        let cols: Vec<&str> = header.split(',').collect();
        if !expected_header(&cols) {
            return Err(self.err(1, format!("unexpected header `{header}`")));
        }
        let width = cols.len();
        let mut rows = Vec::new();
        for (i, line) in self.lines.iter().enumerate().skip(1) {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != width {
                return Err(self.err(
                    i + 1,
                    format!("expected {width} columns, found {}", fields.len()),
                ));
            }
            if fields[0].is_empty() {
                return Err(self.err(i + 1, "empty id"));
            }
            rows.push((i + 1, fields[0], fields[1..].to_vec()));
        }
        Ok(rows)
    }
}

fn features_header(cols: &[&str]) -> bool {
    cols.first() == Some(&"id")
        && cols.len() >= 2
        && cols[1..]
            .iter()
            .enumerate()
            .all(|(j, c)| *c == format!("f{j}"))
}

fn full_header(cols: &[&str]) -> bool {
    cols.first() == Some(&"id")
        && cols.len() >= 2
        && cols[1..]
            .iter()
            .enumerate()
            .all(|(j, c)| *c == format!("y{j}"))
}

/// Loads a dataset from feature and label CSVs; row ids must align across
/// files in order.
pub fn load_dataset(
    features_path: &Path,
    single_labels_path: &Path,
    full_labels_path: Option<&Path>,
) -> Result<Dataset> {
    let freader = CsvReader::open(features_path)?;
    let frows = freader.rows(&features_header)?;
    let mut ids = Vec::with_capacity(frows.len());
    let mut features = Vec::with_capacity(frows.len());
    for (line, id, fields) in &frows {
        let mut f = Vec::with_capacity(fields.len());
        for (j, field) in fields.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                freader.err(*line, format!("column f{j}: invalid float `{field}`"))
            })?;
            if !v.is_finite() {
                return Err(freader.err(*line, format!("column f{j}: non-finite value")));
            }
            f.push(v);
        }
        ids.push(id.to_string());
        features.push(f);
    }
    let feature_dim = features.first().map_or(0, |f| f.len());

    let sreader = CsvReader::open(single_labels_path)?;
    let srows = sreader.rows(&|cols| cols == ["id", "pos_idx"])?;
    if srows.len() != ids.len() {
        return Err(Error::InvalidDataset(format!(
            "{} feature rows but {} single-label rows",
            ids.len(),
            srows.len()
        )));
    }
    let mut observed_pos = Vec::with_capacity(srows.len());
    for (i, (line, id, fields)) in srows.iter().enumerate() {
        if *id != ids[i] {
            return Err(sreader.err(*line, format!("id `{id}` does not match features id `{}`", ids[i])));
        }
        let p: usize = fields[0]
            .parse()
            .map_err(|_| sreader.err(*line, format!("invalid label index `{}`", fields[0])))?;
        observed_pos.push(p);
    }

    let (full_labels, num_labels) = if let Some(full_path) = full_labels_path {
        let greader = CsvReader::open(full_path)?;
        let grows = greader.rows(&full_header)?;
        if grows.len() != ids.len() {
            return Err(Error::InvalidDataset(format!(
                "{} feature rows but {} full-label rows",
                ids.len(),
                grows.len()
            )));
        }
        let mut full = Vec::with_capacity(grows.len());
        for (i, (line, id, fields)) in grows.iter().enumerate() {
            if *id != ids[i] {
                return Err(greader.err(*line, format!("id `{id}` does not match features id `{}`", ids[i])));
            }
            let mut row = Vec::with_capacity(fields.len());
            for (j, field) in fields.iter().enumerate() {
                match *field {
                    "0" => row.push(0u8),
                    "1" => row.push(1u8),
                    other => {
                        return Err(greader.err(
                            *line,
                            format!("column y{j}: expected 0 or 1, found `{other}`"),
                        ))
                    }
                }
            }
            full.push(row);
        }
        let k = full.first().map_or(0, |r| r.len());
        (Some(full), k)
    } else {
        (None, observed_pos.iter().max().map_or(0, |&m| m + 1))
    };

    let ds = Dataset {
        ids,
        features,
        observed_pos,
        full_labels,
        num_labels,
        feature_dim,
    };
    ds.validate()?;
    Ok(ds)
}

/// Loads only the ids from a features CSV (for alignment checks).
pub fn load_feature_ids(path: &Path) -> Result<Vec<String>> {
    let reader = CsvReader::open(path)?;
    let rows = reader.rows(&features_header)?;
    Ok(rows.iter().map(|(_, id, _)| id.to_string()).collect())
}

/// Loads a full-labels CSV on its own, returning (ids, label rows).
pub fn load_full_labels_only(path: &Path) -> Result<(Vec<String>, Vec<Vec<u8>>)> {
    let reader = CsvReader::open(path)?;
    let rows = reader.rows(&full_header)?;
    let mut ids = Vec::with_capacity(rows.len());
    let mut full = Vec::with_capacity(rows.len());
    for (line, id, fields) in &rows {
        let mut row = Vec::with_capacity(fields.len());
        for (j, field) in fields.iter().enumerate() {
            match *field {
                "0" => row.push(0u8),
                "1" => row.push(1u8),
                other => {
                    return Err(reader.err(
                        *line,
                        format!("column y{j}: expected 0 or 1, found `{other}`"),
                    ))
                }
            }
        }
        ids.push(id.to_string());
        full.push(row);
    }
    Ok((ids, full))
}
