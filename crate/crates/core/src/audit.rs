//! Leakage audits: group exclusivity of split assignments and cross-dataset
//! filename overlap.

use std::collections::{BTreeSet, HashMap};

use indexmap::IndexMap;
use serde::Serialize;

use crate::adapters::{extract_group_key, normalize_filename_with, GroupPolicy, MatchKey};
use crate::error::Result;
use crate::manifest::UnifiedManifest;
use crate::splitter::{AssignmentRow, FoldAssignment, SplitAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AuditKind {
    GroupSpansSplits,
    UnassignedRecord,
    DuplicateAssignment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditViolation {
    pub kind: AuditKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_key: Option<String>,
    pub record_ids: Vec<String>,
    pub splits: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct AuditReport {
    pub violations: Vec<AuditViolation>,
    pub passed: bool,
    /// Assignment rows naming records absent from the manifest.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl AuditReport {
    pub fn count(&self, kind: AuditKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

/// Check assignment rows against the manifest's groups. Groups are derived
/// from the manifest with `policy`; group keys stored in the rows are ignored.
pub fn audit_group_integrity(m: &UnifiedManifest, rows: &[AssignmentRow], policy: &GroupPolicy) -> Result<AuditReport> {
    let mut splits_of: HashMap<&str, Vec<&str>> = HashMap::with_capacity(rows.len());
    for row in rows {
        splits_of
            .entry(row.record_id.as_str())
            .or_default()
            .push(row.split.as_str());
    }

    let mut report = AuditReport::default();
    let mut known = std::collections::HashSet::with_capacity(m.records.len());
    // group key -> split -> records
    let mut groups: IndexMap<String, IndexMap<&str, Vec<&str>>> = IndexMap::new();
    for r in &m.records {
        known.insert(r.record_id.as_str());
        let key = extract_group_key(r, policy)?;
        match splits_of.get(r.record_id.as_str()) {
            None => report.violations.push(AuditViolation {
                kind: AuditKind::UnassignedRecord,
                group_key: Some(key.0),
                record_ids: vec![r.record_id.clone()],
                splits: Vec::new(),
            }),
            Some(splits) => {
                if splits.len() > 1 {
                    report.violations.push(AuditViolation {
                        kind: AuditKind::DuplicateAssignment,
                        group_key: Some(key.0.clone()),
                        record_ids: vec![r.record_id.clone()],
                        splits: splits.iter().map(|s| s.to_string()).collect(),
                    });
                }
                let by_split = groups.entry(key.0).or_default();
                for s in splits.iter().collect::<BTreeSet<_>>() {
                    by_split.entry(s).or_default().push(&r.record_id);
                }
            }
        }
    }

    for (key, by_split) in &groups {
        if by_split.len() < 2 {
            continue;
        }
        let mut splits: Vec<&str> = by_split.keys().copied().collect();
        splits.sort_unstable();
        let mut record_ids: Vec<String> = Vec::new();
        for rids in by_split.values() {
            for rid in rids {
                if !record_ids.iter().any(|x| x == rid) {
                    record_ids.push(rid.to_string());
                }
            }
        }
        report.violations.push(AuditViolation {
            kind: AuditKind::GroupSpansSplits,
            group_key: Some(key.clone()),
            record_ids,
            splits: splits.into_iter().map(str::to_string).collect(),
        });
    }

    for row in rows {
        if !known.contains(row.record_id.as_str()) {
            report
                .warnings
                .push(format!("assignment row for unknown record `{}`", row.record_id));
        }
    }
    report.passed = report.violations.is_empty();
    Ok(report)
}

pub fn audit_split(m: &UnifiedManifest, a: &SplitAssignment, policy: &GroupPolicy) -> Result<AuditReport> {
    audit_group_integrity(m, &a.rows(), policy)
}

pub fn audit_folds(m: &UnifiedManifest, f: &FoldAssignment, policy: &GroupPolicy) -> Result<AuditReport> {
    audit_group_integrity(m, &f.rows(), policy)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverlapPair {
    pub match_key: String,
    pub record_id_a: String,
    pub record_id_b: String,
    pub dataset_a: String,
    pub dataset_b: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct OverlapReport {
    pub pairs: Vec<OverlapPair>,
    /// Distinct records involved in at least one pair, per dataset.
    pub per_dataset: IndexMap<String, u64>,
    pub warnings: Vec<String>,
}

impl OverlapReport {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn keyed(
    m: &UnifiedManifest,
    case_insensitive: bool,
    side: &str,
    warnings: &mut Vec<String>,
) -> IndexMap<MatchKey, Vec<usize>> {
    let mut by_key: IndexMap<MatchKey, Vec<usize>> = IndexMap::new();
    for (i, r) in m.records.iter().enumerate() {
        by_key
            .entry(normalize_filename_with(&r.file_path, case_insensitive))
            .or_default()
            .push(i);
    }
    for (key, idx) in &by_key {
        if idx.len() > 1 {
            let ids: Vec<&str> = idx.iter().map(|&i| m.records[i].record_id.as_str()).collect();
            warnings.push(format!(
                "manifest {side}: match key `{key}` shared by {} records ({})",
                idx.len(),
                ids.join(", ")
            ));
        }
    }
    by_key
}

/// Every pair of records, one from each manifest, with equal match keys.
pub fn detect_overlap(a: &UnifiedManifest, b: &UnifiedManifest) -> OverlapReport {
    detect_overlap_with(a, b, false)
}

pub fn detect_overlap_with(a: &UnifiedManifest, b: &UnifiedManifest, case_insensitive: bool) -> OverlapReport {
    let mut report = OverlapReport::default();
    let ka = keyed(a, case_insensitive, "a", &mut report.warnings);
    let kb = keyed(b, case_insensitive, "b", &mut report.warnings);
    let mut involved: IndexMap<&str, BTreeSet<&str>> = IndexMap::new();
    for (key, ia) in &ka {
        let Some(ib) = kb.get(key) else { continue };
        for &i in ia {
            let ra = &a.records[i];
            for &j in ib {
                let rb = &b.records[j];
                involved.entry(&ra.dataset_id).or_default().insert(&ra.record_id);
                involved.entry(&rb.dataset_id).or_default().insert(&rb.record_id);
                report.pairs.push(OverlapPair {
                    match_key: key.0.clone(),
                    record_id_a: ra.record_id.clone(),
                    record_id_b: rb.record_id.clone(),
                    dataset_a: ra.dataset_id.clone(),
                    dataset_b: rb.dataset_id.clone(),
                });
            }
        }
    }
    report.per_dataset = involved
        .into_iter()
        .map(|(d, ids)| (d.to_string(), ids.len() as u64))
        .collect();
    report
}
