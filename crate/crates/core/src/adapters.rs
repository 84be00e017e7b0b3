//! Per-dataset ingestion, filename match keys and group keys.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::manifest::{DatasetDescriptor, ImageRecord, Modality, SplitType, UnifiedManifest};

/// Filename-derived key used to match copies of the same image across datasets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatchKey(pub String);

impl MatchKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MatchKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Final path component with its last extension removed. Only `/` and `\`
/// are treated as separators; nothing else is normalized.
pub fn normalize_filename(file_path: &str) -> MatchKey {
    let name = file_path.rsplit(['/', '\\']).next().unwrap_or(file_path);
    let stem = match name.rfind('.') {
        Some(0) | None => name,
        Some(i) => &name[..i],
    };
    MatchKey(stem.to_string())
}

/// Case-folded variant of [`normalize_filename`] for case-mangling filesystems.
pub fn normalize_filename_with(file_path: &str, case_insensitive: bool) -> MatchKey {
    let key = normalize_filename(file_path);
    if case_insensitive {
        MatchKey(key.0.to_lowercase())
    } else {
        key
    }
}

/// Key of the group (patient, video or single record) a record belongs to.
/// Always prefixed with its source tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupKey(pub String);

impl GroupKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GroupSource {
    PatientId,
    VideoId,
    RecordId,
}

impl GroupSource {
    fn tag(self) -> &'static str {
        match self {
            GroupSource::PatientId => "patient",
            GroupSource::VideoId => "video",
            GroupSource::RecordId => "record",
        }
    }
}

impl FromStr for GroupSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "patient_id" | "patient" => Ok(GroupSource::PatientId),
            "video_id" | "video" => Ok(GroupSource::VideoId),
            "record_id" | "record" => Ok(GroupSource::RecordId),
            other => Err(Error::InvalidGroupPolicy(format!("unknown group source `{other}`"))),
        }
    }
}

/// Ordered fallback chain of group key sources.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GroupSource>", into = "Vec<GroupSource>")]
pub struct GroupPolicy {
    chain: Vec<GroupSource>,
}

impl GroupPolicy {
    pub fn new(chain: Vec<GroupSource>) -> Result<Self> {
        if chain.is_empty() {
            return Err(Error::InvalidGroupPolicy("fallback chain is empty".into()));
        }
        let distinct: BTreeSet<_> = chain.iter().map(|s| *s as u8).collect();
        if distinct.len() != chain.len() {
            return Err(Error::InvalidGroupPolicy("source listed twice".into()));
        }
        if let Some(pos) = chain.iter().position(|s| *s == GroupSource::RecordId) {
            if pos != chain.len() - 1 {
                return Err(Error::InvalidGroupPolicy("RECORD_ID must be last".into()));
            }
        }
        Ok(Self { chain })
    }

    pub fn chain(&self) -> &[GroupSource] {
        &self.chain
    }

    /// Parse a comma-separated chain such as `patient_id,video_id,record_id`.
    pub fn parse(text: &str) -> Result<Self> {
        let chain = text
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Self::new(chain)
    }
}

impl Default for GroupPolicy {
    /// `PATIENT_ID, VIDEO_ID, RECORD_ID`
    fn default() -> Self {
        Self {
            chain: vec![GroupSource::PatientId, GroupSource::VideoId, GroupSource::RecordId],
        }
    }
}

impl TryFrom<Vec<GroupSource>> for GroupPolicy {
    type Error = Error;
    fn try_from(chain: Vec<GroupSource>) -> Result<Self> {
        Self::new(chain)
    }
}

impl From<GroupPolicy> for Vec<GroupSource> {
    fn from(p: GroupPolicy) -> Self {
        p.chain
    }
}

/// First available source in the policy's chain, tagged with its source.
pub fn extract_group_key(record: &ImageRecord, policy: &GroupPolicy) -> Result<GroupKey> {
    for source in &policy.chain {
        let value = match source {
            GroupSource::PatientId => record.patient_id.as_deref(),
            GroupSource::VideoId => record.video_id.as_deref(),
            GroupSource::RecordId => Some(record.record_id.as_str()),
        };
        if let Some(v) = value.filter(|v| !v.is_empty()) {
            return Ok(GroupKey(format!("{}:{v}", source.tag())));
        }
    }
    Err(Error::NoGroupKey(record.record_id.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Layout {
    CsvManifest,
    DirectoryPerClass,
    FilenamePattern,
}

/// Column names for the CSV layout. `path` and `label` are required.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvColumns {
    pub path: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

fn default_csv_file() -> String {
    "labels.csv".to_string()
}

/// One dataset's ingestion recipe, including its descriptor fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub dataset_id: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default = "default_split_type")]
    pub split_type: SplitType,
    #[serde(default)]
    pub declared_image_count: Option<u64>,
    pub layout: Layout,
    pub root: PathBuf,
    #[serde(default)]
    pub csv_columns: Option<CsvColumns>,
    /// CSV file relative to `root`.
    #[serde(default = "default_csv_file")]
    pub csv_file: String,
    #[serde(default)]
    pub pattern: Option<String>,
    #[serde(default)]
    pub modality: Option<String>,
}

fn default_split_type() -> SplitType {
    SplitType::None
}

impl AdapterConfig {
    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidAdapterConfig {
            dataset_id: self.dataset_id.clone(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset_id.trim().is_empty() {
            return Err(self.invalid("empty dataset_id"));
        }
        match self.layout {
            Layout::CsvManifest if self.csv_columns.is_none() => {
                Err(self.invalid("CSV_MANIFEST layout requires csv_columns"))
            }
            Layout::FilenamePattern if self.pattern.is_none() => {
                Err(self.invalid("FILENAME_PATTERN layout requires pattern"))
            }
            _ => Ok(()),
        }
    }

    /// Resolve `root` against the directory of the file the config came from.
    pub fn rebase(&mut self, base: &Path) {
        if self.root.is_relative() {
            self.root = base.join(&self.root);
        }
    }

    /// Record modality (first listed) and all declared modalities; the field
    /// may hold a comma-separated list such as `GST,COL,VCE`.
    fn modalities(&self) -> (Modality, BTreeSet<Modality>, Vec<String>) {
        let mut all = BTreeSet::new();
        let mut first = None;
        let mut warnings = Vec::new();
        if let Some(list) = &self.modality {
            for s in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (m, known) = Modality::parse_lenient(s);
                if !known {
                    warnings.push(format!("{}: unknown modality `{s}` mapped to UNKNOWN", self.dataset_id));
                }
                first.get_or_insert(m);
                all.insert(m);
            }
        }
        let first = first.unwrap_or(Modality::Unknown);
        if all.is_empty() {
            all.insert(first);
        }
        (first, all, warnings)
    }

    fn descriptor(&self, modalities: BTreeSet<Modality>) -> DatasetDescriptor {
        DatasetDescriptor {
            dataset_id: self.dataset_id.clone(),
            name: self.name.clone().unwrap_or_else(|| self.dataset_id.clone()),
            year: self.year.unwrap_or(0),
            modalities,
            split_type: self.split_type,
            declared_image_count: self.declared_image_count,
        }
    }
}

/// Outcome of [`ingest`]: one dataset's manifest plus non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub manifest: UnifiedManifest,
    pub warnings: Vec<String>,
}

pub fn ingest(config: &AdapterConfig) -> Result<Ingested> {
    config.validate()?;
    if !config.root.is_dir() {
        return Err(config.invalid(format!("root `{}` is not a directory", config.root.display())));
    }
    let (modality, modalities, mut warnings) = config.modalities();
    let mut records = match config.layout {
        Layout::CsvManifest => ingest_csv(config)?,
        Layout::DirectoryPerClass => ingest_directory(config)?,
        Layout::FilenamePattern => ingest_pattern(config)?,
    };
    for r in &mut records {
        r.modality = modality;
    }
    if records.is_empty() {
        warnings.push(format!("{}: dataset is empty", config.dataset_id));
    }
    if let Some(declared) = config.declared_image_count {
        if declared != records.len() as u64 {
            return Err(Error::CountMismatch {
                dataset_id: config.dataset_id.clone(),
                declared,
                found: records.len() as u64,
            });
        }
    }
    Ok(Ingested {
        manifest: UnifiedManifest::new(vec![config.descriptor(modalities)], records),
        warnings,
    })
}

fn ingest_csv(config: &AdapterConfig) -> Result<Vec<ImageRecord>> {
    let columns = config.csv_columns.as_ref().expect("validated");
    let path = config.root.join(&config.csv_file);
    let mut reader = csv::Reader::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(&path, e))?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.clone(),
                column: name.to_string(),
            })
    };
    let path_col = find(&columns.path)?;
    let label_col = find(&columns.label)?;
    let optional = |name: &Option<String>| name.as_deref().map(find).transpose();
    let patient_col = optional(&columns.patient_id)?;
    let video_col = optional(&columns.video_id)?;
    let split_col = optional(&columns.split)?;

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::csv(&path, e))?;
        let line = i + 2;
        let cell = |col: usize| row.get(col).map(str::trim).unwrap_or("");
        let present = |col: Option<usize>| col.map(cell).filter(|v| !v.is_empty()).map(str::to_string);
        let file_path = cell(path_col);
        if file_path.is_empty() {
            return Err(Error::Parse {
                path: path.clone(),
                line,
                message: "empty path".into(),
            });
        }
        let mut record = ImageRecord::new(&config.dataset_id, file_path, cell(label_col));
        record.patient_id = present(patient_col);
        record.video_id = present(video_col);
        if let Some(s) = present(split_col) {
            record.split_hint = Some(s.parse().map_err(|e: Error| Error::Parse {
                path: path.clone(),
                line,
                message: e.to_string(),
            })?);
        }
        records.push(record);
    }
    Ok(records)
}

/// Relative paths of regular, non-hidden files under `root`, sorted.
fn list_files(root: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(root).follow_links(true) {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        if entry.file_name().to_string_lossy().starts_with('.') {
            continue;
        }
        let rel = entry.path().strip_prefix(root).expect("walk stays under root");
        let rel: Vec<String> = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        files.push(rel.join("/"));
    }
    files.sort();
    Ok(files)
}

fn ingest_directory(config: &AdapterConfig) -> Result<Vec<ImageRecord>> {
    let mut records = Vec::new();
    for rel in list_files(&config.root)? {
        let Some((dir, _)) = rel.rsplit_once('/') else {
            // files directly under root carry no class folder
            continue;
        };
        records.push(ImageRecord::new(&config.dataset_id, &rel, dir));
    }
    Ok(records)
}

/// Compiled `{label}`/`{patient_id}`/`{video_id}`/`{*}` filename pattern.
#[derive(Debug, Clone)]
pub struct FilenamePattern {
    source: String,
    regex: Regex,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatternCaptures {
    pub label: Option<String>,
    pub patient_id: Option<String>,
    pub video_id: Option<String>,
}

impl FilenamePattern {
    pub fn compile(pattern: &str) -> Result<Self> {
        let invalid = |reason: &str| Error::InvalidPattern {
            pattern: pattern.to_string(),
            reason: reason.to_string(),
        };
        let mut re = String::from("^");
        let mut rest = pattern;
        let mut seen = BTreeSet::new();
        while let Some(open) = rest.find('{') {
            re.push_str(&regex::escape(&rest[..open]));
            let close = rest[open..].find('}').ok_or_else(|| invalid("unclosed `{`"))? + open;
            let name = &rest[open + 1..close];
            match name {
                "*" => re.push_str(".*?"),
                "label" | "patient_id" | "video_id" => {
                    if !seen.insert(name) {
                        return Err(invalid("capture used twice"));
                    }
                    re.push_str(&format!("(?P<{name}>.+?)"));
                }
                _ => return Err(invalid(&format!("unknown capture `{name}`"))),
            }
            rest = &rest[close + 1..];
        }
        re.push_str(&regex::escape(rest));
        re.push('$');
        if !seen.contains("label") {
            return Err(invalid("pattern must capture {label}"));
        }
        let regex = Regex::new(&re).map_err(|e| invalid(&e.to_string()))?;
        Ok(Self {
            source: pattern.to_string(),
            regex,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn captures(&self, file_name: &str) -> Option<PatternCaptures> {
        let caps = self.regex.captures(file_name)?;
        let get = |n: &str| caps.name(n).map(|m| m.as_str().to_string());
        Some(PatternCaptures {
            label: get("label"),
            patient_id: get("patient_id"),
            video_id: get("video_id"),
        })
    }
}

fn ingest_pattern(config: &AdapterConfig) -> Result<Vec<ImageRecord>> {
    let pattern = FilenamePattern::compile(config.pattern.as_deref().expect("validated"))?;
    let mut records = Vec::new();
    for rel in list_files(&config.root)? {
        let name = rel.rsplit('/').next().unwrap_or(&rel);
        let caps = pattern
            .captures(name)
            .ok_or_else(|| Error::PatternMismatch(rel.clone()))?;
        let mut record = ImageRecord::new(&config.dataset_id, &rel, caps.label.as_deref().unwrap_or_default());
        record.patient_id = caps.patient_id;
        record.video_id = caps.video_id;
        records.push(record);
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum CollectionEntry {
    Path(PathBuf),
    Inline(Box<AdapterConfig>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CollectionFile {
    datasets: Vec<CollectionEntry>,
}

/// Load a collection file listing adapter configs (inline objects or paths
/// to per-dataset config files). Relative roots resolve against the file
/// that declared them.
pub fn load_collection(path: &Path) -> Result<Vec<AdapterConfig>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: CollectionFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    file.datasets
        .into_iter()
        .map(|entry| match entry {
            CollectionEntry::Inline(c) => {
                let mut c = *c;
                c.rebase(base);
                Ok(c)
            }
            CollectionEntry::Path(p) => {
                let p = base.join(p);
                let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                let mut c: AdapterConfig = serde_json::from_str(&text).map_err(|e| Error::json(&p, e))?;
                c.rebase(p.parent().unwrap_or(Path::new("")));
                Ok(c)
            }
        })
        .collect()
}

/// Serialize configs as a collection file with inline entries.
pub fn collection_json(configs: &[AdapterConfig]) -> String {
    let file = CollectionFile {
        datasets: configs
            .iter()
            .cloned()
            .map(|c| CollectionEntry::Inline(Box::new(c)))
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("collection serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn touch(root: &Path, rel: &str) {
        let p = root.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, b"x").unwrap();
    }

    fn config(root: &Path, layout: Layout) -> AdapterConfig {
        AdapterConfig {
            dataset_id: "ds".into(),
            name: None,
            year: None,
            split_type: SplitType::None,
            declared_image_count: None,
            layout,
            root: root.to_path_buf(),
            csv_columns: None,
            csv_file: default_csv_file(),
            pattern: None,
            modality: Some("VCE".into()),
        }
    }

    #[test]
    fn match_keys() {
        assert_eq!(normalize_filename("KID/images/abc_123.jpg").as_str(), "abc_123");
        assert_eq!(
            normalize_filename("abc_123.jpg"),
            normalize_filename("cropped/abc_123.png")
        );
        assert_eq!(normalize_filename("archive.tar.gz").as_str(), "archive.tar");
        assert_eq!(normalize_filename("dir\\Name.JPG").as_str(), "Name");
        assert_eq!(normalize_filename("noext").as_str(), "noext");
        assert_eq!(normalize_filename(".hidden").as_str(), ".hidden");
        assert_ne!(normalize_filename("A.jpg"), normalize_filename("a.jpg"));
        assert_eq!(
            normalize_filename_with("A.jpg", true),
            normalize_filename_with("x/a.png", true)
        );
    }

    #[test]
    fn group_keys_follow_chain() {
        let mut r = ImageRecord::new("ds", "a.jpg", "ulcer");
        let pr = GroupPolicy::new(vec![GroupSource::PatientId, GroupSource::RecordId]).unwrap();
        r.patient_id = Some("P12".into());
        assert_eq!(extract_group_key(&r, &pr).unwrap().as_str(), "patient:P12");
        r.patient_id = None;
        assert_eq!(extract_group_key(&r, &pr).unwrap().as_str(), "record:ds/a.jpg");
        r.video_id = Some("V3".into());
        let full = GroupPolicy::default();
        assert_eq!(extract_group_key(&r, &full).unwrap().as_str(), "video:V3");
        let patient_only = GroupPolicy::new(vec![GroupSource::PatientId]).unwrap();
        assert!(matches!(
            extract_group_key(&r, &patient_only),
            Err(Error::NoGroupKey(_))
        ));
    }

    #[test]
    fn patient_and_video_keys_never_collide() {
        let mut a = ImageRecord::new("ds", "a.jpg", "x");
        a.patient_id = Some("7".into());
        let mut b = ImageRecord::new("ds", "b.jpg", "x");
        b.video_id = Some("7".into());
        let p = GroupPolicy::default();
        assert_ne!(extract_group_key(&a, &p).unwrap(), extract_group_key(&b, &p).unwrap());
    }

    #[test]
    fn group_policy_rules() {
        assert!(GroupPolicy::new(vec![]).is_err());
        assert!(GroupPolicy::new(vec![GroupSource::RecordId, GroupSource::PatientId]).is_err());
        assert!(GroupPolicy::new(vec![GroupSource::PatientId, GroupSource::PatientId]).is_err());
        let p = GroupPolicy::parse("patient_id, video_id,record_id").unwrap();
        assert_eq!(p, GroupPolicy::default());
        assert!(GroupPolicy::parse("study_id").is_err());
    }

    #[test]
    fn directory_layout() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "ulcer/b.jpg");
        touch(dir.path(), "ulcer/a.jpg");
        touch(dir.path(), "polyp/c.jpg");
        let out = ingest(&config(dir.path(), Layout::DirectoryPerClass)).unwrap();
        let labels: Vec<_> = out.manifest.records.iter().map(|r| r.raw_label.as_str()).collect();
        let paths: Vec<_> = out.manifest.records.iter().map(|r| r.file_path.as_str()).collect();
        assert_eq!(paths, vec!["polyp/c.jpg", "ulcer/a.jpg", "ulcer/b.jpg"]);
        assert_eq!(labels, vec!["polyp", "ulcer", "ulcer"]);
        assert_eq!(out.manifest.records[1].record_id, "ds/ulcer/a.jpg");
        assert_eq!(out.manifest.records[0].modality, Modality::Vce);
    }

    #[test]
    fn directory_layout_nested_labels() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "lower-gi/polyps/x.jpg");
        let out = ingest(&config(dir.path(), Layout::DirectoryPerClass)).unwrap();
        assert_eq!(out.manifest.records[0].raw_label, "lower-gi/polyps");
    }

    #[test]
    fn csv_layout_with_patients() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("labels.csv"),
            "file,finding,pid,fold\n\
             a.jpg,ulcer,P1,train\n\
             b.jpg,ulcer,P1,train\n\
             c.jpg,polyp,P2,val\n\
             d.jpg,polyp,P3,FOLD(1)\n\
             e.jpg,bleeding,P3,test\n",
        )
        .unwrap();
        let mut c = config(dir.path(), Layout::CsvManifest);
        c.csv_columns = Some(CsvColumns {
            path: "file".into(),
            label: "finding".into(),
            patient_id: Some("pid".into()),
            video_id: None,
            split: Some("fold".into()),
        });
        c.declared_image_count = Some(5);
        let out = ingest(&c).unwrap();
        let recs = &out.manifest.records;
        assert_eq!(recs.len(), 5);
        assert!(recs.iter().all(|r| r.patient_id.is_some()));
        assert_eq!(recs[3].split_hint, Some(crate::manifest::SplitHint::Fold(1)));
        assert_eq!(out.manifest.datasets[0].declared_image_count, Some(5));

        c.declared_image_count = Some(6);
        assert!(matches!(
            ingest(&c),
            Err(Error::CountMismatch {
                declared: 6,
                found: 5,
                ..
            })
        ));

        c.declared_image_count = None;
        c.csv_columns.as_mut().unwrap().video_id = Some("vid".into());
        assert!(matches!(ingest(&c), Err(Error::MissingColumn { column, .. }) if column == "vid"));
    }

    #[test]
    fn pattern_layout() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "P07_bleeding_0001.png");
        let mut c = config(dir.path(), Layout::FilenamePattern);
        c.pattern = Some("{patient_id}_{label}_{*}.png".into());
        let out = ingest(&c).unwrap();
        let r = &out.manifest.records[0];
        assert_eq!(r.patient_id.as_deref(), Some("P07"));
        assert_eq!(r.raw_label, "bleeding");

        touch(dir.path(), "notes.txt");
        assert!(matches!(ingest(&c), Err(Error::PatternMismatch(f)) if f == "notes.txt"));
    }

    #[test]
    fn pattern_compile_errors() {
        assert!(FilenamePattern::compile("{patient_id}_{*}.png").is_err());
        assert!(FilenamePattern::compile("{label}_{colour}.png").is_err());
        assert!(FilenamePattern::compile("{label.png").is_err());
    }

    #[test]
    fn empty_dataset_warns_and_layout_fields_checked() {
        let dir = tempfile::tempdir().unwrap();
        let out = ingest(&config(dir.path(), Layout::DirectoryPerClass)).unwrap();
        assert!(out.manifest.is_empty());
        assert_eq!(out.warnings.len(), 1);
        assert!(matches!(
            ingest(&config(dir.path(), Layout::CsvManifest)),
            Err(Error::InvalidAdapterConfig { .. })
        ));
    }

    #[test]
    fn collection_paths_and_inline() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = config(Path::new("a"), Layout::DirectoryPerClass);
        a.dataset_id = "a".into();
        fs::write(
            dir.path().join("b.json"),
            serde_json::to_string(&{
                let mut b = a.clone();
                b.dataset_id = "b".into();
                b.root = "bdir".into();
                b
            })
            .unwrap(),
        )
        .unwrap();
        let text = format!("{{\"datasets\": [{}, \"b.json\"]}}", serde_json::to_string(&a).unwrap());
        fs::write(dir.path().join("collection.json"), text).unwrap();
        let configs = load_collection(&dir.path().join("collection.json")).unwrap();
        assert_eq!(configs.len(), 2);
        assert_eq!(configs[0].root, dir.path().join("a"));
        assert_eq!(configs[1].root, dir.path().join("bdir"));
    }
}
