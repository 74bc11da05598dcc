//! Evaluation and geometric analysis: mean average precision against full
//! ground truth, co-occurrence vs. embedding-distance correlation, pairwise
//! ball relations, and 2-D response-map export.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::balls::{ball_relation, BallRelation};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{distance, HyperbolicPoint, EPS_BALL};
use crate::projector::{self, HeadMode, ModelParams};

/// Per-class average precision plus their mean. Classes without positives in
/// the evaluation set are flagged with `None` and excluded from the mean.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub map: f64,
    pub per_class_ap: Vec<Option<f64>>,
    pub num_eval_samples: usize,
}

/// One row per unordered label pair: empirical co-occurrence probability and
/// hyperbolic distance between the two label embeddings.
#[derive(Debug, Clone)]
pub struct CorrelationReport {
    pub pairs: Vec<(usize, usize, f64, f64)>,
    pub pearson_r: f64,
    pub num_pairs: usize,
}

/// Average precision with descending score order; ties break by ascending
/// sample index, making the ranking deterministic.
pub fn average_precision(scores: &[f64], truths: &[u8]) -> Result<f64> {
    if scores.len() != truths.len() {
        return Err(Error::Shape(format!(
            "{} scores vs {} truths",
            scores.len(),
            truths.len()
        )));
    }
    let num_pos = truths.iter().filter(|&&t| t == 1).count();
    if num_pos == 0 {
        return Err(Error::UndefinedMetric(
            "average precision undefined without positives".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut hits = 0usize;
    let mut ap = 0.0;
    for (rank, &idx) in order.iter().enumerate() {
        if truths[idx] == 1 {
            hits += 1;
            ap += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(ap / num_pos as f64)
}

/// Scores every evaluation sample with `predict_probs` and reports per-class
/// AP and their mean.
pub fn mean_ap(params: &ModelParams, ds: &Dataset) -> Result<EvalReport> {
    let full = ds.full_labels.as_ref().ok_or_else(|| {
        Error::InvalidDataset("mAP evaluation requires full ground-truth labels".into())
    })?;
    let k = ds.num_labels;
    let mut probs = vec![Vec::with_capacity(ds.len()); k];
    for f in &ds.features {
        let p = projector::predict_probs(params, f)?;
        if p.len() != k {
            return Err(Error::Shape(format!(
                "model produces {} scores but dataset has {k} labels",
                p.len()
            )));
        }
        for (c, v) in p.into_iter().enumerate() {
            probs[c].push(v);
        }
    }
    let mut per_class_ap = Vec::with_capacity(k);
    let mut sum = 0.0;
    let mut counted = 0usize;
    for c in 0..k {
        let truths: Vec<u8> = full.iter().map(|row| row[c]).collect();
        if truths.iter().all(|&t| t == 0) {
            per_class_ap.push(None);
            continue;
        }
        let ap = average_precision(&probs[c], &truths)?;
        per_class_ap.push(Some(ap));
        sum += ap;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric(
            "no class has positives in the evaluation set".into(),
        ));
    }
    Ok(EvalReport {
        map: sum / counted as f64,
        per_class_ap,
        num_eval_samples: ds.len(),
    })
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedMetric(
            "Pearson correlation undefined with zero variance".into(),
        ));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Correlates empirical pairwise co-occurrence probability with the
/// hyperbolic distance between label embeddings, over all unordered pairs.
pub fn cooccurrence_analysis(
    params: &ModelParams,
    full_labels: &[Vec<u8>],
) -> Result<CorrelationReport> {
    if params.mode != HeadMode::Hyperbolic {
        return Err(Error::Unsupported(
            "co-occurrence analysis requires a hyperbolic model".into(),
        ));
    }
    let k = params.k;
    if k < 3 {
        return Err(Error::Unsupported(format!(
            "co-occurrence analysis needs at least 3 labels, got {k}"
        )));
    }
    let s = full_labels.len();
    if s == 0 {
        return Err(Error::InvalidDataset("no samples".into()));
    }
    let points: Vec<HyperbolicPoint> = params
        .labels
        .iter()
        .map(|c| HyperbolicPoint::project(c.clone()))
        .collect::<Result<_>>()?;
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            let both = full_labels
                .iter()
                .filter(|row| row[i] == 1 && row[j] == 1)
                .count();
            let prob = both as f64 / s as f64;
            let dist = distance(&points[i], &points[j]);
            pairs.push((i, j, prob, dist));
        }
    }
    let probs: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let dists: Vec<f64> = pairs.iter().map(|p| p.3).collect();
    let pearson_r = pearson(&probs, &dists)?;
    let num_pairs = pairs.len();
    Ok(CorrelationReport {
        pairs,
        pearson_r,
        num_pairs,
    })
}

/// Ball relation for every unordered label pair.
pub fn relation_report(params: &ModelParams) -> Result<Vec<(usize, usize, BallRelation)>> {
    if params.mode != HeadMode::Hyperbolic {
        return Err(Error::Unsupported(
            "ball relations require a hyperbolic model".into(),
        ));
    }
    let balls = params.label_balls()?;
    let mut out = Vec::with_capacity(params.k * (params.k - 1) / 2);
    for i in 0..params.k {
        for j in (i + 1)..params.k {
            out.push((i, j, ball_relation(&balls[i], &balls[j])));
        }
    }
    Ok(out)
}

/// One response-map grid cell; `prob` is None outside the unit disk.
pub type GridRow = (f64, f64, Option<f64>);

/// Samples label `label_idx`'s response on a resolution x resolution grid
/// over [-0.999, 0.999]^2. Row-major order: y varies slowest.
pub fn export_response_map(
    params: &ModelParams,
    label_idx: usize,
    resolution: usize,
) -> Result<Vec<GridRow>> {
    if params.mode != HeadMode::Hyperbolic {
        return Err(Error::Unsupported(
            "response maps require a hyperbolic model".into(),
        ));
    }
    if params.n != 2 {
        return Err(Error::Unsupported(format!(
            "response maps need a 2-dimensional ball, model has n = {}",
            params.n
        )));
    }
    if label_idx >= params.k {
        return Err(Error::Config(format!(
            "label index {label_idx} out of range for {} labels",
            params.k
        )));
    }
    if resolution == 0 {
        return Err(Error::Config("resolution must be positive".into()));
    }
    let ball = &params.label_balls()?[label_idx];
    let tau = params.tau(label_idx);
    let coord = |i: usize| -> f64 {
        if resolution == 1 {
            0.0
        } else {
            -0.999 + 1.998 * i as f64 / (resolution - 1) as f64
        }
    };
    let mut rows = Vec::with_capacity(resolution * resolution);
    for iy in 0..resolution {
        let y = coord(iy);
        for ix in 0..resolution {
            let x = coord(ix);
            let norm = (x * x + y * y).sqrt();
            let prob = if norm <= 1.0 - EPS_BALL {
                let p = HyperbolicPoint::project(vec![x, y])?;
                Some(projector::sigmoid(crate::balls::score(&p, ball, tau)?))
            } else {
                None
            };
            rows.push((x, y, prob));
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// CSV / JSON writers for the analysis artifacts

pub fn write_response_map_csv(path: &Path, rows: &[GridRow]) -> Result<()> {
    let mut out = String::from("x,y,prob\n");
    for (x, y, prob) in rows {
        match prob {
            Some(p) => out.push_str(&format!("{x},{y},{p}\n")),
            None => out.push_str(&format!("{x},{y},nan\n")),
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_correlation_csv(path: &Path, report: &CorrelationReport) -> Result<()> {
    let mut out = String::from("label_i,label_j,cooccur_prob,center_distance\n");
    for (i, j, prob, dist) in &report.pairs {
        out.push_str(&format!("{i},{j},{prob},{dist}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}
