//! Evaluation of class-score predictions against projected ground truth.
//!
//! ROC and precision-recall sweeps walk the scores in descending order and
//! treat each run of equal scores as one threshold step. AUC is accumulated
//! in integer arithmetic and divided once, so it equals the tie-aware
//! pairwise statistic up to a single rounding.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use serde::Serialize;

use crate::adapters::normalize_filename_with;
use crate::error::{Error, Result};
use crate::manifest::UnifiedManifest;
use crate::numfmt::{ser_round6, ser_round6_opt, ser_round6_points};
use crate::splitter::SplitFilter;

/// Number of points on the false-positive-rate grid of the macro ROC curve.
pub const MACRO_GRID_POINTS: usize = 1001;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub class_order: Vec<String>,
    pub rows: IndexMap<String, Vec<f64>>,
}

impl PredictionSet {
    pub fn new(class_order: Vec<String>, rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if class_order.is_empty() {
            return Err(Error::InvalidPredictions("no classes".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = class_order.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::InvalidPredictions(format!("class `{dup}` listed twice")));
        }
        let mut map = IndexMap::with_capacity(rows.len());
        for (id, scores) in rows {
            if scores.len() != class_order.len() {
                return Err(Error::InvalidPredictions(format!(
                    "row `{id}` has {} scores, expected {}",
                    scores.len(),
                    class_order.len()
                )));
            }
            if scores.iter().any(|s| !s.is_finite()) {
                return Err(Error::InvalidPredictions(format!("row `{id}` has a non-finite score")));
            }
            if map.contains_key(&id) {
                return Err(Error::InvalidPredictions(format!("duplicate row `{id}`")));
            }
            map.insert(id, scores);
        }
        Ok(Self { class_order, rows: map })
    }

    /// CSV with header `id,<class_1>,...,<class_C>`.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
        if headers.get(0) != Some("id") {
            return Err(Error::MissingColumn {
                path: path.to_path_buf(),
                column: "id".into(),
            });
        }
        let class_order: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let line = i + 2;
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            };
            if rec.len() != headers.len() {
                return Err(parse_err(format!(
                    "expected {} fields, found {}",
                    headers.len(),
                    rec.len()
                )));
            }
            let scores = rec
                .iter()
                .skip(1)
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| parse_err(format!("bad score `{s}`: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push((rec[0].to_string(), scores));
        }
        Self::new(class_order, rows)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["id".to_string()];
        header.extend(self.class_order.iter().cloned());
        out.write_record(&header)?;
        for (id, scores) in &self.rows {
            let mut row = vec![id.clone()];
            row.extend(scores.iter().map(|s| s.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Highest-scoring class per row; ties go to the earliest class.
pub fn argmax_predict(p: &PredictionSet) -> IndexMap<String, String> {
    p.rows
        .iter()
        .map(|(id, scores)| (id.clone(), p.class_order[argmax(scores)].clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// rows = true class, columns = predicted class
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Each row divided by its sum; zero rows stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let s: u64 = row.iter().sum();
                row.iter()
                    .map(|&v| if s == 0 { 0.0 } else { v as f64 / s as f64 })
                    .collect()
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["true\\pred".to_string()];
        header.extend(self.classes.iter().cloned());
        out.write_record(&header)?;
        for (c, row) in self.counts.iter().enumerate() {
            let mut line = vec![self.classes[c].clone()];
            line.extend(row.iter().map(u64::to_string));
            out.write_record(&line)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn confusion_matrix(
    gt: &IndexMap<String, String>,
    pred: &IndexMap<String, String>,
    classes: &[String],
) -> Result<ConfusionMatrix> {
    let idx: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let missing: Vec<String> = gt.keys().filter(|id| !pred.contains_key(*id)).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::MissingPrediction(missing));
    }
    let lookup = |c: &str| {
        idx.get(c)
            .copied()
            .ok_or_else(|| Error::ClassOrderMismatch(format!("class `{c}` is not in the class order")))
    };
    let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
    for (id, t) in gt {
        counts[lookup(t)?][lookup(&pred[id])?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

/// Mean recall over classes with ground-truth support.
pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for c in 0..cm.classes.len() {
        let support = cm.row_sum(c);
        if support > 0 {
            sum += cm.counts[c][c] as f64 / support as f64;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct F1Scores {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub support: Vec<u64>,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

pub fn f1_scores(cm: &ConfusionMatrix) -> Result<F1Scores> {
    let k = cm.classes.len();
    let (mut precision, mut recall, mut f1, mut support) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0; k]);
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let (mut macro_sum, mut macro_n, mut weighted) = (0.0, 0usize, 0.0);
    for c in 0..k {
        let tp = cm.counts[c][c] as f64;
        let predicted = cm.col_sum(c);
        support[c] = cm.row_sum(c);
        precision[c] = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        recall[c] = if support[c] == 0 { 0.0 } else { tp / support[c] as f64 };
        let denom = precision[c] + recall[c];
        f1[c] = if denom == 0.0 {
            0.0
        } else {
            2.0 * precision[c] * recall[c] / denom
        };
        if support[c] > 0 {
            macro_sum += f1[c];
            macro_n += 1;
            weighted += f1[c] * support[c] as f64;
        }
    }
    Ok(F1Scores {
        precision,
        recall,
        f1,
        support,
        macro_f1: macro_sum / macro_n as f64,
        weighted_f1: weighted / total as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// (fpr, tpr) from (0, 0) to (1, 1), one point per distinct score.
    pub points: Vec<[f64; 2]>,
    pub auc: f64,
}

/// Indices sorted by descending score, split into runs of equal score.
fn tie_blocks(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match blocks.last_mut() {
            Some(block) if scores[block[0]] == scores[i] => block.push(i),
            _ => blocks.push(vec![i]),
        }
    }
    blocks
}

pub fn binary_roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let p = labels.iter().filter(|&&l| l).count() as u128;
    let n = labels.len() as u128 - p;
    if p == 0 || n == 0 {
        return Err(Error::DegenerateLabels(p > 0));
    }
    let mut points = vec![[0.0, 0.0]];
    let (mut tp, mut fp) = (0u128, 0u128);
    // twice the area in units of 1/(P·N)
    let mut area2 = 0u128;
    for block in tie_blocks(scores) {
        let dtp = block.iter().filter(|&&i| labels[i]).count() as u128;
        let dfp = block.len() as u128 - dtp;
        area2 += dfp * (2 * tp + dtp);
        tp += dtp;
        fp += dfp;
        points.push([fp as f64 / n as f64, tp as f64 / p as f64]);
    }
    Ok(RocCurve {
        points,
        auc: area2 as f64 / (2 * p * n) as f64,
    })
}

/// Step-wise AP with each run of tied scores consumed as one block.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let p = labels.iter().filter(|&&l| l).count();
    if p == 0 {
        return Err(Error::NoPositives);
    }
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    for block in tie_blocks(scores) {
        let dtp = block.iter().filter(|&&i| labels[i]).count();
        tp += dtp;
        seen += block.len();
        if dtp > 0 {
            ap += (dtp as f64 / p as f64) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}

/// TPR of a monotone ROC curve at `fpr`; at vertical segments the highest TPR.
fn tpr_at(points: &[[f64; 2]], fpr: f64) -> f64 {
    let after = points.partition_point(|p| p[0] <= fpr);
    if after == 0 {
        return 0.0;
    }
    let last = points[after - 1];
    if last[0] == fpr || after == points.len() {
        return last[1];
    }
    let next = points[after];
    last[1] + (next[1] - last[1]) * (fpr - last[0]) / (next[0] - last[0])
}

/// Vertical average of the given curves on the fixed FPR grid.
pub fn macro_roc_curve(curves: &[&RocCurve]) -> Vec<[f64; 2]> {
    if curves.is_empty() {
        return Vec::new();
    }
    (0..MACRO_GRID_POINTS)
        .map(|i| {
            let x = i as f64 / (MACRO_GRID_POINTS - 1) as f64;
            let y = curves.iter().map(|c| tpr_at(&c.points, x)).sum::<f64>() / curves.len() as f64;
            [x, y]
        })
        .collect()
}

pub fn combined_metric(macro_auc: f64, balanced_acc: f64) -> Result<f64> {
    for v in [macro_auc, balanced_acc] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange(v));
        }
    }
    Ok((macro_auc + balanced_acc) / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassAuc {
    pub per_class: Vec<Option<RocCurve>>,
    pub macro_auc: Option<f64>,
    pub micro: Option<RocCurve>,
    pub macro_curve: Vec<[f64; 2]>,
}

/// One-vs-rest AUCs. `scores[i]` is the score row of record `i`, `gt[i]` its
/// class index.
pub fn multiclass_auc(scores: &[&[f64]], gt: &[usize], n_classes: usize) -> MulticlassAuc {
    let mut per_class = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let column: Vec<f64> = scores.iter().map(|row| row[c]).collect();
        let labels: Vec<bool> = gt.iter().map(|&g| g == c).collect();
        per_class.push(binary_roc_auc(&column, &labels).ok());
    }
    let defined: Vec<&RocCurve> = per_class.iter().flatten().collect();
    let macro_auc = (!defined.is_empty()).then(|| defined.iter().map(|c| c.auc).sum::<f64>() / defined.len() as f64);
    let macro_curve = macro_roc_curve(&defined);

    let flat_scores: Vec<f64> = scores.iter().flat_map(|row| row.iter().copied()).collect();
    let flat_labels: Vec<bool> = gt.iter().flat_map(|&g| (0..n_classes).map(move |c| c == g)).collect();
    let micro = binary_roc_auc(&flat_scores, &flat_labels).ok();
    MulticlassAuc {
        per_class,
        macro_auc,
        micro,
        macro_curve,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub support: u64,
    #[serde(serialize_with = "ser_round6_opt")]
    pub recall: Option<f64>,
    #[serde(serialize_with = "ser_round6")]
    pub precision: f64,
    #[serde(serialize_with = "ser_round6")]
    pub f1: f64,
    #[serde(serialize_with = "ser_round6_opt")]
    pub auc: Option<f64>,
    #[serde(serialize_with = "ser_round6_opt")]
    pub average_precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve(#[serde(serialize_with = "ser_round6_points")] pub Vec<[f64; 2]>);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurves {
    pub per_class: IndexMap<String, Curve>,
    pub micro: Option<Curve>,
    #[serde(rename = "macro")]
    pub macro_avg: Option<Curve>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub n_records: u64,
    pub per_class: IndexMap<String, ClassMetrics>,
    #[serde(serialize_with = "ser_round6")]
    pub balanced_accuracy: f64,
    #[serde(serialize_with = "ser_round6")]
    pub macro_f1: f64,
    #[serde(serialize_with = "ser_round6")]
    pub weighted_f1: f64,
    #[serde(serialize_with = "ser_round6_opt")]
    pub macro_auc: Option<f64>,
    #[serde(serialize_with = "ser_round6_opt")]
    pub micro_auc: Option<f64>,
    #[serde(serialize_with = "ser_round6_opt")]
    pub macro_map: Option<f64>,
    #[serde(serialize_with = "ser_round6_opt")]
    pub combined: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub roc_curves: RocCurves,
    pub warnings: Vec<String>,
}

pub fn write_curve_csv<W: Write>(points: &[[f64; 2]], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["fpr", "tpr"])?;
    for p in points {
        out.write_record([p[0].to_string(), p[1].to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions<'a> {
    pub split: Option<&'a SplitFilter>,
    /// Canonical class order the prediction header must reproduce.
    pub expected_classes: Option<&'a [String]>,
    /// Look predictions up by filename match key instead of record id.
    pub match_by_filename: bool,
    pub case_insensitive: bool,
}

pub fn evaluate(p: &PredictionSet, m: &UnifiedManifest, opts: &EvalOptions) -> Result<MetricsReport> {
    if let Some(expected) = opts.expected_classes {
        if expected != p.class_order.as_slice() {
            return Err(Error::ClassOrderMismatch(format!(
                "predictions have [{}], expected [{}]",
                p.class_order.join(","),
                expected.join(",")
            )));
        }
    }
    let class_idx: HashMap<&str, usize> = p.class_order.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let n_classes = p.class_order.len();
    let mut warnings = Vec::new();

    let mut gt_idx = Vec::new();
    let mut rows: Vec<&[f64]> = Vec::new();
    let mut missing = Vec::new();
    let mut used = HashSet::new();
    for r in &m.records {
        if !opts.split.is_none_or(|f| f.keeps(&r.record_id)) {
            continue;
        }
        let class = r
            .canonical_class
            .as_deref()
            .ok_or_else(|| Error::UnprojectedRecord(r.record_id.clone()))?;
        let &c = class_idx
            .get(class)
            .ok_or_else(|| Error::ClassOrderMismatch(format!("ground-truth class `{class}` has no score column")))?;
        let key = if opts.match_by_filename {
            normalize_filename_with(&r.file_path, opts.case_insensitive).0
        } else {
            r.record_id.clone()
        };
        match p.rows.get_key_value(&key) {
            Some((k, scores)) => {
                used.insert(k.as_str());
                gt_idx.push(c);
                rows.push(scores);
            }
            None => missing.push(r.record_id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingPrediction(missing));
    }
    if rows.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let extra = p.rows.len() - used.len();
    if extra > 0 {
        warnings.push(format!("{extra} prediction row(s) match no evaluated record"));
    }

    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (row, &g) in rows.iter().zip(&gt_idx) {
        counts[g][argmax(row)] += 1;
    }
    let cm = ConfusionMatrix {
        classes: p.class_order.clone(),
        counts,
    };
    let bal = balanced_accuracy(&cm)?;
    let f1 = f1_scores(&cm)?;
    let auc = multiclass_auc(&rows, &gt_idx, n_classes);

    let mut per_class = IndexMap::new();
    let mut curves = IndexMap::new();
    let mut ap_sum = 0.0;
    let mut ap_n = 0usize;
    for (c, name) in p.class_order.iter().enumerate() {
        let column: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        let labels: Vec<bool> = gt_idx.iter().map(|&g| g == c).collect();
        let ap = average_precision(&column, &labels).ok();
        if let Some(v) = ap {
            ap_sum += v;
            ap_n += 1;
        }
        if f1.support[c] == 0 {
            warnings.push(format!(
                "class `{name}` has no ground-truth records; skipped in balanced accuracy, macro F1, macro AUC and mAP"
            ));
        } else if auc.per_class[c].is_none() {
            warnings.push(format!("class `{name}` has no negatives; skipped in macro AUC"));
        }
        if let Some(curve) = &auc.per_class[c] {
            curves.insert(name.clone(), Curve(curve.points.clone()));
        }
        per_class.insert(
            name.clone(),
            ClassMetrics {
                support: f1.support[c],
                recall: (f1.support[c] > 0).then_some(f1.recall[c]),
                precision: f1.precision[c],
                f1: f1.f1[c],
                auc: auc.per_class[c].as_ref().map(|r| r.auc),
                average_precision: ap,
            },
        );
    }
    let macro_map = (ap_n > 0).then(|| ap_sum / ap_n as f64);
    let combined = match auc.macro_auc {
        Some(a) => Some(combined_metric(a, bal)?),
        None => None,
    };
    Ok(MetricsReport {
        n_records: rows.len() as u64,
        per_class,
        balanced_accuracy: bal,
        macro_f1: f1.macro_f1,
        weighted_f1: f1.weighted_f1,
        macro_auc: auc.macro_auc,
        micro_auc: auc.micro.as_ref().map(|r| r.auc),
        macro_map,
        combined,
        confusion: cm,
        roc_curves: RocCurves {
            per_class: curves,
            micro: auc.micro.map(|r| Curve(r.points)),
            macro_avg: (!auc.macro_curve.is_empty()).then_some(Curve(auc.macro_curve)),
        },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(counts: Vec<Vec<u64>>) -> ConfusionMatrix {
        let classes = (0..counts.len()).map(|i| format!("c{i}")).collect();
        ConfusionMatrix { classes, counts }
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn argmax_examples() {
        let p = PredictionSet::new(
            names(&["a", "b", "c"]),
            vec![("r1".into(), vec![0.1, 0.7, 0.2]), ("r2".into(), vec![0.4, 0.4, 0.2])],
        )
        .unwrap();
        let pred = argmax_predict(&p);
        assert_eq!(pred["r1"], "b");
        assert_eq!(pred["r2"], "a");
    }

    #[test]
    fn prediction_validation() {
        assert!(PredictionSet::new(names(&["a", "b"]), vec![("r".into(), vec![0.1])]).is_err());
        assert!(PredictionSet::new(names(&["a"]), vec![("r".into(), vec![f64::NAN])]).is_err());
        assert!(PredictionSet::new(names(&["a"]), vec![("r".into(), vec![1.0]), ("r".into(), vec![1.0])]).is_err());
    }

    #[test]
    fn confusion_example() {
        let classes = names(&["0", "1"]);
        let gt: IndexMap<String, String> = [("a", "0"), ("b", "1"), ("c", "1")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let pred: IndexMap<String, String> = [("a", "0"), ("b", "1"), ("c", "0")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        assert_eq!(
            confusion_matrix(&gt, &pred, &classes).unwrap().counts,
            vec![vec![1, 0], vec![1, 1]]
        );
        let mut partial = pred.clone();
        partial.shift_remove("c");
        assert!(matches!(
            confusion_matrix(&gt, &partial, &classes),
            Err(Error::MissingPrediction(v)) if v == vec!["c".to_string()]
        ));
    }

    #[test]
    fn balanced_accuracy_examples() {
        assert_eq!(balanced_accuracy(&cm(vec![vec![3, 0], vec![0, 4]])).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&cm(vec![vec![5, 5], vec![0, 10]])).unwrap(), 0.75);
        assert_eq!(balanced_accuracy(&cm(vec![vec![0, 10], vec![0, 10]])).unwrap(), 0.5);
        assert!(matches!(
            balanced_accuracy(&cm(vec![vec![0, 0], vec![0, 0]])),
            Err(Error::EmptyMatrix)
        ));
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_scores(&cm(vec![vec![2, 0], vec![0, 2]])).unwrap().macro_f1, 1.0);
        let f = f1_scores(&cm(vec![vec![1, 1], vec![1, 1]])).unwrap();
        assert_eq!(f.f1, vec![0.5, 0.5]);
        assert_eq!(f.macro_f1, 0.5);
        let f = f1_scores(&cm(vec![vec![0, 3], vec![0, 3]])).unwrap();
        assert_eq!(f.f1[0], 0.0);
    }

    #[test]
    fn roc_examples() {
        assert_eq!(
            binary_roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true])
                .unwrap()
                .auc,
            1.0
        );
        assert_eq!(binary_roc_auc(&[0.3; 4], &[false, true, true, false]).unwrap().auc, 0.5);
        let r = binary_roc_auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
        assert_eq!(r.auc, 0.75);
        assert_eq!(r.points.first(), Some(&[0.0, 0.0]));
        assert_eq!(r.points.last(), Some(&[1.0, 1.0]));
        assert!(matches!(
            binary_roc_auc(&[0.1], &[true]),
            Err(Error::DegenerateLabels(true))
        ));
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        let ap = average_precision(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
        let ap = average_precision(&[0.5; 5], &[true, false, true, false, false]).unwrap();
        assert!((ap - 0.4).abs() < 1e-15);
        assert!(matches!(average_precision(&[0.5], &[false]), Err(Error::NoPositives)));
    }

    #[test]
    fn combined_examples() {
        assert!((combined_metric(0.991, 0.785).unwrap() - 0.888).abs() < 5e-4);
        assert!((combined_metric(0.992, 0.916).unwrap() - 0.954).abs() < 1e-12);
        assert_eq!(combined_metric(1.0, 1.0).unwrap(), 1.0);
        assert!(matches!(combined_metric(1.2, 0.5), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn macro_curve_interpolates() {
        let a = RocCurve {
            points: vec![[0.0, 0.0], [0.0, 0.5], [0.5, 1.0], [1.0, 1.0]],
            auc: 0.0,
        };
        assert_eq!(tpr_at(&a.points, 0.0), 0.5);
        assert_eq!(tpr_at(&a.points, 0.25), 0.75);
        assert_eq!(tpr_at(&a.points, 1.0), 1.0);
        let curve = macro_roc_curve(&[&a]);
        assert_eq!(curve.len(), MACRO_GRID_POINTS);
        assert_eq!(curve[250], [0.25, 0.75]);
    }

    #[test]
    fn uniform_scores_give_half() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0 / 3.0; 3]; 6];
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let auc = multiclass_auc(&refs, &[0, 1, 2, 0, 1, 2], 3);
        for c in &auc.per_class {
            assert_eq!(c.as_ref().unwrap().auc, 0.5);
        }
        assert_eq!(auc.macro_auc, Some(0.5));
    }
}
