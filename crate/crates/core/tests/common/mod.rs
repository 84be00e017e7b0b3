#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use gicurate_core::manifest::{DatasetDescriptor, ImageRecord, Modality, SplitType, UnifiedManifest};

pub fn descriptor(id: &str) -> DatasetDescriptor {
    DatasetDescriptor {
        dataset_id: id.to_string(),
        name: id.to_string(),
        year: 2024,
        modalities: [Modality::Vce].into_iter().collect(),
        split_type: SplitType::PatientId,
        declared_image_count: None,
    }
}

/// Projected manifest from `(class, patient)` pairs; `None` patients become
/// singleton groups.
pub fn projected(rows: &[(String, Option<String>)]) -> UnifiedManifest {
    let records = rows
        .iter()
        .enumerate()
        .map(|(i, (class, patient))| {
            let mut r = ImageRecord::new("d", &format!("img/{i:05}.jpg"), class);
            r.canonical_class = Some(class.clone());
            r.patient_id = patient.clone();
            r
        })
        .collect();
    UnifiedManifest::new(vec![descriptor("d")], records)
}

/// Manifest from group specs: each group is a list of class indices.
pub fn from_groups(groups: &[Vec<usize>]) -> UnifiedManifest {
    let mut rows = Vec::new();
    for (g, classes) in groups.iter().enumerate() {
        let patient = (classes.len() > 1).then(|| format!("P{g}"));
        for &c in classes {
            rows.push((format!("c{c}"), patient.clone()));
        }
    }
    projected(&rows)
}

/// Group key as the default fallback chain would derive it, recomputed here
/// without the library.
pub fn naive_group(r: &ImageRecord) -> String {
    match (&r.patient_id, &r.video_id) {
        (Some(p), _) if !p.is_empty() => format!("patient:{p}"),
        (_, Some(v)) if !v.is_empty() => format!("video:{v}"),
        _ => format!("record:{}", r.record_id),
    }
}

/// Splits each group's records landed in.
pub fn splits_per_group<'a>(
    m: &UnifiedManifest,
    assignment: impl Fn(&str) -> Option<&'a str>,
) -> BTreeMap<String, BTreeSet<&'a str>> {
    let mut out: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    for r in &m.records {
        if let Some(s) = assignment(&r.record_id) {
            out.entry(naive_group(r)).or_default().insert(s);
        }
    }
    out
}

/// Direct evaluation of the stratification objective.
pub fn oracle_cost(counts: &[Vec<u64>], ratios: &[f64], lambda: f64) -> f64 {
    let n_classes = counts.first().map_or(0, Vec::len);
    let totals: Vec<f64> = (0..n_classes)
        .map(|c| counts.iter().map(|row| row[c]).sum::<u64>() as f64)
        .collect();
    let n: f64 = totals.iter().sum();
    let mut cost = 0.0;
    for (s, row) in counts.iter().enumerate() {
        for c in 0..n_classes {
            let d = (row[c] as f64 - ratios[s] * totals[c]) / totals[c].max(1.0);
            cost += d * d;
        }
        if n > 0.0 {
            let size: f64 = row.iter().sum::<u64>() as f64;
            let d = (size - ratios[s] * n) / n;
            cost += lambda * d * d;
        }
    }
    cost
}
