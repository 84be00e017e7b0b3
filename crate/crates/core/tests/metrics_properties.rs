mod common;

use indexmap::IndexMap;
use proptest::prelude::*;

use gicurate_core::metrics::{
    argmax_predict, average_precision, balanced_accuracy, binary_roc_auc, confusion_matrix, f1_scores, EvalOptions,
    MetricsReport,
};
use gicurate_core::{evaluate, PredictionSet, UnifiedManifest};

use common::projected;

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut hits, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    hits += 1.0;
                } else if scores[i] == scores[j] {
                    hits += 0.5;
                }
            }
        }
    }
    hits / pairs
}

/// Σ over distinct positive scores t of (positives at t / P) · precision(score ≥ t).
fn ranked_list_ap(scores: &[f64], labels: &[bool]) -> f64 {
    let p = labels.iter().filter(|&&l| l).count() as f64;
    let mut thresholds: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut ap = 0.0;
    for t in thresholds {
        let at = scores.iter().zip(labels).filter(|(&s, &l)| l && s == t).count() as f64;
        let above = scores.iter().filter(|&&s| s >= t).count() as f64;
        let above_pos = scores.iter().zip(labels).filter(|(&s, &l)| l && s >= t).count() as f64;
        ap += at / p * (above_pos / above);
    }
    ap
}

fn binary_case() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..=200).prop_flat_map(|n| {
        (
            prop::collection::vec((0u32..=20).prop_map(|k| k as f64 / 20.0), n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

/// Random multiclass instance: ground-truth class per record and score rows.
fn multiclass_case() -> impl Strategy<Value = (usize, Vec<usize>, Vec<Vec<f64>>)> {
    (2usize..=6, 4usize..=120).prop_flat_map(|(c, n)| {
        (
            Just(c),
            prop::collection::vec(0..c, n),
            prop::collection::vec(prop::collection::vec((0u32..=10).prop_map(|k| k as f64 / 10.0), c), n),
        )
    })
}

fn build(c: usize, gt: &[usize], scores: &[Vec<f64>]) -> (UnifiedManifest, PredictionSet) {
    let rows: Vec<_> = gt.iter().map(|&g| (format!("k{g}"), None)).collect();
    let m = projected(&rows);
    let classes: Vec<String> = (0..c).map(|i| format!("k{i}")).collect();
    let preds = m
        .records
        .iter()
        .zip(scores)
        .map(|(r, s)| (r.record_id.clone(), s.clone()))
        .collect();
    (m, PredictionSet::new(classes, preds).unwrap())
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

fn scalars(r: &MetricsReport) -> Vec<f64> {
    let mut v = vec![r.balanced_accuracy, r.macro_f1, r.weighted_f1];
    v.extend(
        [r.macro_auc, r.micro_auc, r.macro_map, r.combined]
            .into_iter()
            .flatten(),
    );
    for m in r.per_class.values() {
        v.push(m.precision);
        v.push(m.f1);
        v.extend([m.recall, m.auc, m.average_precision].into_iter().flatten());
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn auc_and_ap_match_oracles((scores, labels) in binary_case()) {
        let has_pos = labels.iter().any(|&l| l);
        let has_neg = labels.iter().any(|&l| !l);
        match binary_roc_auc(&scores, &labels) {
            Ok(r) => {
                prop_assert!(has_pos && has_neg);
                prop_assert!((r.auc - pairwise_auc(&scores, &labels)).abs() < 1e-12);
                prop_assert!(r.points.windows(2).all(|w| w[0][0] <= w[1][0] && w[0][1] <= w[1][1]));
            }
            Err(_) => prop_assert!(!(has_pos && has_neg)),
        }
        if has_pos {
            let ap = average_precision(&scores, &labels).unwrap();
            prop_assert!((ap - ranked_list_ap(&scores, &labels)).abs() < 1e-12);
            prop_assert!(in_unit(ap));
        }
    }

    #[test]
    fn auc_complement_and_monotone_invariance((scores, labels) in binary_case()) {
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let auc = binary_roc_auc(&scores, &labels).unwrap().auc;
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        prop_assert!((binary_roc_auc(&scores, &flipped).unwrap().auc - (1.0 - auc)).abs() < 1e-12);
        let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + s * s * s).collect();
        prop_assert_eq!(binary_roc_auc(&warped, &labels).unwrap().auc, auc);
    }

    #[test]
    fn confusion_and_balanced_accuracy((c, gt, scores) in multiclass_case()) {
        let (m, p) = build(c, &gt, &scores);
        let truth: IndexMap<String, String> = m
            .records
            .iter()
            .map(|r| (r.record_id.clone(), r.canonical_class.clone().unwrap()))
            .collect();
        let cm = confusion_matrix(&truth, &argmax_predict(&p), &p.class_order).unwrap();
        prop_assert_eq!(cm.total(), gt.len() as u64);
        for k in 0..c {
            prop_assert_eq!(cm.row_sum(k), gt.iter().filter(|&&g| g == k).count() as u64);
        }
        let norm = cm.row_normalized();
        let diag: Vec<f64> = (0..c).filter(|&k| cm.row_sum(k) > 0).map(|k| norm[k][k]).collect();
        let via_rows = diag.iter().sum::<f64>() / diag.len() as f64;
        prop_assert!((balanced_accuracy(&cm).unwrap() - via_rows).abs() < 1e-12);
        let f = f1_scores(&cm).unwrap();
        prop_assert!(in_unit(f.macro_f1) && in_unit(f.weighted_f1));
    }

    #[test]
    fn report_scalars_and_combined((c, gt, scores) in multiclass_case()) {
        let (m, p) = build(c, &gt, &scores);
        let r = evaluate(&p, &m, &EvalOptions::default()).unwrap();
        prop_assert!(scalars(&r).into_iter().all(in_unit));
        if let Some(auc) = r.macro_auc {
            prop_assert_eq!(r.combined, Some((auc + r.balanced_accuracy) / 2.0));
        }
        prop_assert_eq!(r.n_records, gt.len() as u64);
    }

    #[test]
    fn record_order_does_not_matter((c, gt, scores) in multiclass_case(), seed in any::<u64>()) {
        let (m, p) = build(c, &gt, &scores);
        let mut shuffled = m.clone();
        gicurate_core::SplitMix64::new(seed).shuffle(&mut shuffled.records);
        let mut rows: Vec<(String, Vec<f64>)> = p.rows.clone().into_iter().collect();
        rows.reverse();
        let p2 = PredictionSet::new(p.class_order.clone(), rows).unwrap();
        prop_assert_eq!(evaluate(&p, &m, &EvalOptions::default()).unwrap(), evaluate(&p2, &shuffled, &EvalOptions::default()).unwrap());
    }
}

#[test]
fn three_class_macro_is_mean_of_pairwise() {
    let gt = [0usize, 1, 2, 0, 1, 2];
    let scores = vec![
        vec![0.6, 0.3, 0.1],
        vec![0.2, 0.5, 0.3],
        vec![0.3, 0.3, 0.4],
        vec![0.4, 0.4, 0.2],
        vec![0.5, 0.2, 0.3],
        vec![0.1, 0.2, 0.7],
    ];
    let (m, p) = build(3, &gt, &scores);
    let r = evaluate(&p, &m, &EvalOptions::default()).unwrap();
    let mut sum = 0.0;
    for k in 0..3 {
        let col: Vec<f64> = scores.iter().map(|s| s[k]).collect();
        let labels: Vec<bool> = gt.iter().map(|&g| g == k).collect();
        sum += pairwise_auc(&col, &labels);
    }
    assert!((r.macro_auc.unwrap() - sum / 3.0).abs() < 1e-12);
}

#[test]
fn uniform_random_scores_near_half() {
    let mut rng = gicurate_core::SplitMix64::new(2024);
    let c = 4;
    let gt: Vec<usize> = (0..2000).map(|i| i % c).collect();
    let scores: Vec<Vec<f64>> = gt.iter().map(|_| (0..c).map(|_| rng.next_f64()).collect()).collect();
    let (m, p) = build(c, &gt, &scores);
    let r = evaluate(&p, &m, &EvalOptions::default()).unwrap();
    assert!((r.macro_auc.unwrap() - 0.5).abs() <= 0.05, "{:?}", r.macro_auc);
}

#[test]
fn one_hot_correct_predictions_score_one() {
    let gt = [0usize, 1, 2, 2, 1, 0, 0];
    let scores: Vec<Vec<f64>> = gt
        .iter()
        .map(|&g| (0..3).map(|k| if k == g { 1.0 } else { 0.0 }).collect())
        .collect();
    let (m, p) = build(3, &gt, &scores);
    let r = evaluate(&p, &m, &EvalOptions::default()).unwrap();
    assert_eq!(r.balanced_accuracy, 1.0);
    assert_eq!(r.macro_auc, Some(1.0));
    assert_eq!(r.micro_auc, Some(1.0));
    assert_eq!(r.combined, Some(1.0));
    assert_eq!(r.macro_map, Some(1.0));
}

#[test]
fn zero_support_class_skipped_with_warning() {
    let gt = [0usize, 1, 0, 1];
    let scores = vec![
        vec![0.7, 0.2, 0.1],
        vec![0.1, 0.8, 0.1],
        vec![0.6, 0.3, 0.1],
        vec![0.2, 0.3, 0.5],
    ];
    let (m, p) = build(3, &gt, &scores);
    let r = evaluate(&p, &m, &EvalOptions::default()).unwrap();
    assert_eq!(r.per_class["k2"].auc, None);
    assert_eq!(r.per_class["k2"].recall, None);
    assert_eq!(r.balanced_accuracy, 0.75);
    assert!(r.warnings.iter().any(|w| w.contains("k2")));
    let json = serde_json::to_value(&r).unwrap();
    assert!(json["per_class"]["k2"]["auc"].is_null());
}

#[test]
fn missing_prediction_and_class_order() {
    let (m, p) = build(2, &[0, 1], &[vec![0.9, 0.1], vec![0.1, 0.9]]);
    let mut short = p.clone();
    short.rows.shift_remove(&m.records[1].record_id);
    assert!(matches!(
        evaluate(&short, &m, &EvalOptions::default()),
        Err(gicurate_core::Error::MissingPrediction(ids)) if ids == vec![m.records[1].record_id.clone()]
    ));
    let expected = vec!["k1".to_string(), "k0".to_string()];
    let opts = EvalOptions {
        expected_classes: Some(&expected),
        ..EvalOptions::default()
    };
    assert!(matches!(
        evaluate(&p, &m, &opts),
        Err(gicurate_core::Error::ClassOrderMismatch(_))
    ));
}

#[test]
fn report_json_rounds_to_six_decimals() {
    let gt = [0usize, 1, 1];
    let scores = vec![vec![0.5, 0.5], vec![0.2, 0.8], vec![0.6, 0.4]];
    let (m, p) = build(2, &gt, &scores);
    let r = evaluate(&p, &m, &EvalOptions::default()).unwrap();
    let text = serde_json::to_string(&r).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let f1 = json["macro_f1"].as_f64().unwrap();
    assert_eq!(f1, (r.macro_f1 * 1e6).round() / 1e6);
    assert!(!text.contains("0.6666666"));
}
