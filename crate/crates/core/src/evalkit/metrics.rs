use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{EvalError, EvalReport};
use crate::simindex::{CorpusIndex, Metric};

/// `(recall, precision)` after each distinct score threshold, descending.
pub fn precision_recall_points(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::new();
    let (mut seen, mut hits, mut i) = (0usize, 0usize, 0usize);
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            seen += 1;
            hits += usize::from(labels[order[i]]);
            i += 1;
        }
        points.push((hits as f64 / positives as f64, hits as f64 / seen as f64));
    }
    Ok(points)
}

/// Σ (rᵢ − rᵢ₋₁)·pᵢ over the distinct score thresholds.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    let points = precision_recall_points(scores, labels)?;
    let mut prev = 0.0;
    let mut ap = 0.0;
    for (r, p) in points {
        ap += (r - prev) * p;
        prev = r;
    }
    Ok(ap)
}

/// AP of the same-class classifier over all index pairs `i < j`
/// (and `i == j` when `self_pairs`).
pub fn pair_average_precision(index: &CorpusIndex, metric: Metric, self_pairs: bool) -> Result<EvalReport, EvalError> {
    let labels = class_labels(index)?;
    let pairs = index.pairwise_scores_par(metric, self_pairs);
    let scores: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let same: Vec<bool> = pairs.iter().map(|&(i, j, _)| labels[i] == labels[j]).collect();
    let pr_points = precision_recall_points(&scores, &same)?;
    let value = average_precision(&scores, &same)?;
    Ok(EvalReport {
        metric: "ap".into(),
        value,
        n_queries: pairs.len(),
        skipped: 0,
        per_query: Vec::new(),
        pr_points,
        per_class: per_class(&labels),
        config: None,
        seed: None,
    })
}

fn class_labels(index: &CorpusIndex) -> Result<Vec<String>, EvalError> {
    index
        .ids()
        .iter()
        .zip(index.labels())
        .map(|(id, l)| l.clone().ok_or_else(|| EvalError::MissingLabel(id.clone())))
        .collect()
}

fn per_class(labels: &[String]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for l in labels {
        *m.entry(l.clone()).or_insert(0) += 1;
    }
    m
}

/// MAP@R over an index, every program querying all others.
pub fn map_at_r(index: &CorpusIndex, metric: Metric) -> Result<EvalReport, EvalError> {
    let labels = class_labels(index)?;
    Ok(map_at_r_by(index.ids(), &labels, |i, j| index.score(i, j, metric)))
}

/// MAP@R for an arbitrary pairwise `score`. `ids` must be sorted; ties in the
/// ranking go to the smaller id. Queries whose class has no other member are
/// skipped and counted.
pub fn map_at_r_by<F>(ids: &[String], labels: &[String], score: F) -> EvalReport
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let class_sizes = per_class(labels);
    let per_query: Vec<Option<f64>> = (0..ids.len())
        .into_par_iter()
        .map(|q| {
            let r = class_sizes[&labels[q]] - 1;
            if r == 0 {
                return None;
            }
            let mut ranked: Vec<(usize, f64)> = (0..ids.len()).filter(|&j| j != q).map(|j| (j, score(q, j))).collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(ids[a.0].cmp(&ids[b.0])));
            let mut hits = 0usize;
            let mut sum = 0.0;
            for (i, &(j, _)) in ranked.iter().take(r).enumerate() {
                if labels[j] == labels[q] {
                    hits += 1;
                    sum += hits as f64 / (i + 1) as f64;
                }
            }
            Some(sum / r as f64)
        })
        .collect();
    let skipped = per_query.iter().filter(|v| v.is_none()).count();
    if skipped > 0 {
        log::warn!("{skipped} queries skipped: no other program of the same class");
    }
    let answered: Vec<(String, f64)> = ids
        .iter()
        .zip(&per_query)
        .filter_map(|(id, v)| v.map(|v| (id.clone(), v)))
        .collect();
    let value = if answered.is_empty() {
        0.0
    } else {
        answered.iter().map(|q| q.1).sum::<f64>() / answered.len() as f64
    };
    EvalReport {
        metric: "map@r".into(),
        value,
        n_queries: answered.len(),
        skipped,
        per_query: answered,
        pr_points: Vec::new(),
        per_class: class_sizes,
        config: None,
        seed: None,
    }
}
