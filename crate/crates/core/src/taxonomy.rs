//! Canonical class taxonomy, label mapping profiles and granularity projection.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::UnifiedManifest;

/// Marker used in profile files for labels that are deliberately dropped.
pub const EXCLUDED: &str = "EXCLUDED";

/// The ten finding classes shared by the capsule challenge data, in canonical order.
pub const CE24_CLASSES: [&str; 10] = [
    "normal_mucosa",
    "bleeding",
    "ulcer",
    "polyp",
    "erosion",
    "angioectasia",
    "lymphangiectasia",
    "erythema",
    "foreign_body",
    "worms",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyNode {
    pub class_id: String,
    pub display_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct TaxonomyFile {
    version: String,
    nodes: Vec<TaxonomyNode>,
}

/// A validated class forest.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    version: String,
    nodes: Vec<TaxonomyNode>,
    index: HashMap<String, usize>,
}

impl Taxonomy {
    pub fn new(version: impl Into<String>, nodes: Vec<TaxonomyNode>) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if n.class_id == EXCLUDED {
                return Err(Error::UnknownTaxonomyClass(format!(
                    "`{EXCLUDED}` is reserved and cannot be a class id"
                )));
            }
            if index.insert(n.class_id.clone(), i).is_some() {
                return Err(Error::DuplicateClassId(n.class_id.clone()));
            }
        }
        for n in &nodes {
            if let Some(p) = &n.parent {
                if !index.contains_key(p) {
                    return Err(Error::UnknownParent {
                        class_id: n.class_id.clone(),
                        parent: p.clone(),
                    });
                }
            }
        }
        let taxonomy = Self {
            version: version.into(),
            nodes,
            index,
        };
        taxonomy.check_acyclic()?;
        Ok(taxonomy)
    }

    fn check_acyclic(&self) -> Result<()> {
        // 0 = unvisited, 1 = on current path, 2 = done
        let mut state = vec![0u8; self.nodes.len()];
        for start in 0..self.nodes.len() {
            let mut path = Vec::new();
            let mut cur = Some(start);
            while let Some(i) = cur {
                match state[i] {
                    2 => break,
                    1 => return Err(Error::CycleDetected(self.nodes[i].class_id.clone())),
                    _ => {}
                }
                state[i] = 1;
                path.push(i);
                cur = self.nodes[i].parent.as_ref().map(|p| self.index[p]);
            }
            for i in path {
                state[i] = 2;
            }
        }
        Ok(())
    }

    /// Flat taxonomy of the ten challenge classes.
    pub fn ce24_10() -> Self {
        let nodes = CE24_CLASSES
            .iter()
            .map(|c| TaxonomyNode {
                class_id: c.to_string(),
                display_name: c.replace('_', " "),
                parent: None,
            })
            .collect();
        Self::new("ce24_10", nodes).expect("built-in taxonomy is valid")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::parse(text, Path::new("<inline>"))
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let file: TaxonomyFile = serde_json::from_str(text).map_err(|e| Error::json(path, e))?;
        Self::new(file.version, file.nodes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TaxonomyFile {
            version: self.version.clone(),
            nodes: self.nodes.clone(),
        })
        .expect("taxonomy serializes")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn nodes(&self) -> &[TaxonomyNode] {
        &self.nodes
    }

    pub fn contains(&self, class_id: &str) -> bool {
        self.index.contains_key(class_id)
    }

    pub fn parent(&self, class_id: &str) -> Option<&str> {
        let i = *self.index.get(class_id)?;
        self.nodes[i].parent.as_deref()
    }

    pub fn roots(&self) -> impl Iterator<Item = &TaxonomyNode> {
        self.nodes.iter().filter(|n| n.parent.is_none())
    }

    /// `class_id` followed by its ancestors up to the root.
    pub fn ancestors_or_self<'a>(&'a self, class_id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        let mut cur = self.index.get(class_id).map(|_| class_id);
        std::iter::from_fn(move || {
            let here = cur?;
            cur = self.parent(here);
            Some(here)
        })
    }

    /// Nearest ancestor-or-self contained in `targets`.
    pub fn nearest_target<'a>(&'a self, class_id: &'a str, targets: &HashSet<&str>) -> Option<&'a str> {
        self.ancestors_or_self(class_id).find(|c| targets.contains(c))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LabelTarget {
    Class(String),
    Excluded,
}

impl Serialize for LabelTarget {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LabelTarget::Class(c) => s.serialize_str(c),
            LabelTarget::Excluded => s.serialize_str(EXCLUDED),
        }
    }
}

impl<'de> Deserialize<'de> for LabelTarget {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(if s == EXCLUDED {
            LabelTarget::Excluded
        } else {
            LabelTarget::Class(s)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingEntry {
    pub dataset_id: String,
    pub raw_label: String,
    pub class_id: LabelTarget,
}

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    profile_id: String,
    target_classes: Vec<String>,
    entries: Vec<MappingEntry>,
}

/// Per-dataset raw-label mapping plus the projection granularity.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingProfile {
    pub profile_id: String,
    pub target_classes: Vec<String>,
    entries: IndexMap<(String, String), LabelTarget>,
}

impl MappingProfile {
    pub fn new(profile_id: impl Into<String>, target_classes: Vec<String>) -> Self {
        Self {
            profile_id: profile_id.into(),
            target_classes,
            entries: IndexMap::new(),
        }
    }

    /// The ten-class challenge profile. Entries are dataset-specific and
    /// must be added by the caller.
    pub fn ce24_10() -> Self {
        Self::new("ce24_10", CE24_CLASSES.iter().map(|c| c.to_string()).collect())
    }

    /// Add a mapping; labels are trimmed. Re-adding the same key with a
    /// different target is an error.
    pub fn insert(&mut self, dataset_id: &str, raw_label: &str, target: LabelTarget) -> Result<()> {
        let key = (dataset_id.trim().to_string(), raw_label.trim().to_string());
        match self.entries.get(&key) {
            Some(existing) if *existing != target => Err(Error::ConflictingMapping {
                dataset_id: key.0,
                raw_label: key.1,
            }),
            Some(_) => Ok(()),
            None => {
                self.entries.insert(key, target);
                Ok(())
            }
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, &LabelTarget)> {
        self.entries.iter().map(|((d, l), t)| (d.as_str(), l.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Check targets and entry classes against `taxonomy`.
    pub fn validate(&self, taxonomy: &Taxonomy) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.target_classes {
            if !seen.insert(c.as_str()) {
                return Err(Error::DuplicateTargetClass(c.clone()));
            }
            if !taxonomy.contains(c) {
                return Err(Error::UnknownTaxonomyClass(c.clone()));
            }
        }
        for target in self.entries.values() {
            if let LabelTarget::Class(c) = target {
                if !taxonomy.contains(c) {
                    return Err(Error::UnknownTaxonomyClass(c.clone()));
                }
            }
        }
        Ok(())
    }

    /// Exact (trimmed, case-sensitive) lookup.
    pub fn resolve_label(&self, dataset_id: &str, raw_label: &str) -> Result<&LabelTarget> {
        let key = (dataset_id.trim().to_string(), raw_label.trim().to_string());
        self.entries.get(&key).ok_or(Error::UnmappedLabel {
            dataset_id: key.0,
            raw_label: key.1,
        })
    }

    /// Distinct (dataset, raw label) pairs in `m` with no entry, in first-seen order.
    pub fn unmapped_in(&self, m: &UnifiedManifest) -> Vec<(String, String)> {
        let mut seen = HashSet::new();
        let mut missing = Vec::new();
        for r in &m.records {
            let key = (r.dataset_id.trim().to_string(), r.raw_label.trim().to_string());
            if !self.entries.contains_key(&key) && seen.insert(key.clone()) {
                missing.push(key);
            }
        }
        missing
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::parse(text, Path::new("<inline>"))
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let file: ProfileFile = serde_json::from_str(text).map_err(|e| Error::json(path, e))?;
        let mut profile = Self::new(file.profile_id, file.target_classes);
        for e in file.entries {
            profile.insert(&e.dataset_id, &e.raw_label, e.class_id)?;
        }
        Ok(profile)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_json(&self) -> String {
        let file = ProfileFile {
            profile_id: self.profile_id.clone(),
            target_classes: self.target_classes.clone(),
            entries: self
                .entries
                .iter()
                .map(|((d, l), t)| MappingEntry {
                    dataset_id: d.clone(),
                    raw_label: l.clone(),
                    class_id: t.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("profile serializes")
    }
}

/// Accounting for one projection pass.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ProjectionSummary {
    pub profile_id: String,
    pub input_records: u64,
    pub kept: u64,
    pub dropped_excluded: u64,
    pub dropped_no_ancestor: u64,
    /// Mapped classes that had no ancestor among the targets, with counts.
    pub no_ancestor_classes: IndexMap<String, u64>,
    /// Kept records per target class, in target order.
    pub kept_per_class: IndexMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub manifest: UnifiedManifest,
    pub summary: ProjectionSummary,
}

/// Map every record to its nearest target class, dropping excluded labels
/// and classes without a target ancestor.
pub fn project(m: &UnifiedManifest, taxonomy: &Taxonomy, profile: &MappingProfile) -> Result<Projection> {
    profile.validate(taxonomy)?;
    let unmapped = profile.unmapped_in(m);
    if !unmapped.is_empty() {
        return Err(Error::UnmappedLabels(unmapped));
    }
    let targets: HashSet<&str> = profile.target_classes.iter().map(String::as_str).collect();
    let mut summary = ProjectionSummary {
        profile_id: profile.profile_id.clone(),
        input_records: m.records.len() as u64,
        kept_per_class: profile.target_classes.iter().map(|c| (c.clone(), 0)).collect(),
        ..Default::default()
    };
    let mut out = m.filtered(|_| false);
    out.records.reserve(m.records.len());
    for r in &m.records {
        match profile.resolve_label(&r.dataset_id, &r.raw_label)? {
            LabelTarget::Excluded => summary.dropped_excluded += 1,
            LabelTarget::Class(c) => match taxonomy.nearest_target(c, &targets) {
                Some(target) => {
                    let mut rec = r.clone();
                    rec.canonical_class = Some(target.to_string());
                    out.records.push(rec);
                    summary.kept += 1;
                    *summary.kept_per_class.get_mut(target).expect("target tracked") += 1;
                }
                None => {
                    summary.dropped_no_ancestor += 1;
                    *summary.no_ancestor_classes.entry(c.clone()).or_default() += 1;
                }
            },
        }
    }
    Ok(Projection { manifest: out, summary })
}

/// Record counts per class, with every class of `classes` present (zero if absent).
pub fn class_counts(m: &UnifiedManifest, classes: &[String]) -> Result<IndexMap<String, u64>> {
    let mut counts: IndexMap<String, u64> = classes.iter().map(|c| (c.clone(), 0)).collect();
    for r in &m.records {
        let c = r
            .canonical_class
            .as_deref()
            .ok_or_else(|| Error::UnprojectedRecord(r.record_id.clone()))?;
        match counts.get_mut(c) {
            Some(n) => *n += 1,
            None => {
                return Err(Error::UnknownClass {
                    record_id: r.record_id.clone(),
                    class_id: c.to_string(),
                })
            }
        }
    }
    Ok(counts)
}
