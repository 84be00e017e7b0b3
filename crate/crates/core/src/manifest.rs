//! Unified manifest model, merging, validation and distribution tables.
//!
//! On disk a manifest is line-delimited JSON: the first line is a header
//! object carrying `schema_version`, the dataset descriptors and provenance;
//! every following line is one [`ImageRecord`].

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Modality {
    Vce,
    Gst,
    Col,
    #[default]
    Unknown,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Vce => "VCE",
            Modality::Gst => "GST",
            Modality::Col => "COL",
            Modality::Unknown => "UNKNOWN",
        }
    }

    /// Parse a modality string; unrecognized strings map to `Unknown` and
    /// report `false` as the second element.
    pub fn parse_lenient(s: &str) -> (Modality, bool) {
        match s.trim().to_ascii_uppercase().as_str() {
            "VCE" => (Modality::Vce, true),
            "GST" => (Modality::Gst, true),
            "COL" => (Modality::Col, true),
            "UNKNOWN" => (Modality::Unknown, true),
            _ => (Modality::Unknown, false),
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Modality {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Modality {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Modality::parse_lenient(&s).0)
    }
}

/// Split information carried by the source dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitHint {
    Train,
    Val,
    Test,
    Fold(u32),
}

impl fmt::Display for SplitHint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitHint::Train => f.write_str("TRAIN"),
            SplitHint::Val => f.write_str("VAL"),
            SplitHint::Test => f.write_str("TEST"),
            SplitHint::Fold(k) => write!(f, "FOLD({k})"),
        }
    }
}

impl FromStr for SplitHint {
    type Err = Error;

    /// Accepts `TRAIN`, `VAL`, `TEST`, `FOLD(k)` and the common lowercase
    /// spellings found in dataset metadata (`train`, `validation`, `fold3`).
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "train" | "training" => return Ok(SplitHint::Train),
            "val" | "valid" | "validation" => return Ok(SplitHint::Val),
            "test" | "testing" => return Ok(SplitHint::Test),
            _ => {}
        }
        let digits = t
            .strip_prefix("fold(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| t.strip_prefix("fold_"))
            .or_else(|| t.strip_prefix("fold"));
        digits
            .and_then(|d| d.trim().parse().ok())
            .map(SplitHint::Fold)
            .ok_or_else(|| Error::InvalidSplitHint(s.to_string()))
    }
}

impl Serialize for SplitHint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SplitHint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One labeled image's metadata row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub record_id: String,
    pub dataset_id: String,
    pub file_path: String,
    pub raw_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    #[serde(default)]
    pub modality: Modality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_hint: Option<SplitHint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
}

impl ImageRecord {
    /// Minimal record with the id built from dataset and path.
    pub fn new(dataset_id: &str, file_path: &str, raw_label: &str) -> Self {
        Self {
            record_id: record_id_for(dataset_id, file_path),
            dataset_id: dataset_id.to_string(),
            file_path: normalize_separators(file_path),
            raw_label: raw_label.to_string(),
            canonical_class: None,
            patient_id: None,
            video_id: None,
            modality: Modality::Unknown,
            split_hint: None,
            width: None,
            height: None,
        }
    }
}

pub fn normalize_separators(path: &str) -> String {
    path.replace('\\', "/")
}

/// `<dataset_id>/<file_path>` with separators normalized to `/`.
pub fn record_id_for(dataset_id: &str, file_path: &str) -> String {
    format!("{dataset_id}/{}", normalize_separators(file_path))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SplitType {
    None,
    PatientId,
    KfoldCv,
    TrainValTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub dataset_id: String,
    pub name: String,
    pub year: i32,
    pub modalities: BTreeSet<Modality>,
    pub split_type: SplitType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_image_count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDigest {
    pub source: String,
    pub sha256: String,
}

impl SourceDigest {
    /// SHA-256 of the file's bytes; `source` is the path as given.
    pub fn of_file(path: &Path) -> Result<Self> {
        use sha2::{Digest, Sha256};
        let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut hasher = Sha256::new();
        std::io::copy(&mut file, &mut hasher).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            source: path.display().to_string(),
            sha256: hex::encode(hasher.finalize()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Provenance {
    #[serde(default)]
    pub sources: Vec<SourceDigest>,
    #[serde(default)]
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UnifiedManifest {
    pub records: Vec<ImageRecord>,
    pub datasets: Vec<DatasetDescriptor>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    datasets: Vec<DatasetDescriptor>,
    #[serde(default)]
    provenance: Provenance,
}

impl UnifiedManifest {
    pub fn new(datasets: Vec<DatasetDescriptor>, records: Vec<ImageRecord>) -> Self {
        Self {
            records,
            datasets,
            provenance: Provenance {
                sources: Vec::new(),
                tool_version: crate::TOOL_VERSION.to_string(),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dataset(&self, dataset_id: &str) -> Option<&DatasetDescriptor> {
        self.datasets.iter().find(|d| d.dataset_id == dataset_id)
    }

    /// Records per dataset id, in dataset order.
    pub fn dataset_counts(&self) -> Vec<(String, u64)> {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for r in &self.records {
            *counts.entry(r.dataset_id.as_str()).or_default() += 1;
        }
        self.datasets
            .iter()
            .map(|d| {
                let n = counts.get(d.dataset_id.as_str()).copied().unwrap_or(0);
                (d.dataset_id.clone(), n)
            })
            .collect()
    }

    /// Keep only records accepted by `keep`; descriptors are retained with
    /// their declared counts cleared, since the subset no longer matches them.
    pub fn filtered(&self, mut keep: impl FnMut(&ImageRecord) -> bool) -> UnifiedManifest {
        let records: Vec<ImageRecord> = self.records.iter().filter(|r| keep(r)).cloned().collect();
        let mut datasets = self.datasets.clone();
        for d in &mut datasets {
            d.declared_image_count = None;
        }
        UnifiedManifest {
            records,
            datasets,
            provenance: self.provenance.clone(),
        }
    }

    pub fn write_to<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(w);
        let header = Header {
            schema_version: SCHEMA_VERSION,
            datasets: self.datasets.clone(),
            provenance: self.provenance.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(f).map_err(|e| Error::io(path, e))
    }

    /// Parse a manifest stream. Returns the manifest plus warnings (unknown
    /// modality strings).
    pub fn read_from<R: BufRead>(reader: R, path: &Path) -> Result<(UnifiedManifest, Vec<String>)> {
        let mut lines = reader.lines().enumerate();
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let header: Header = loop {
            match lines.next() {
                None => return Err(parse_err(1, "missing header line".into())),
                Some((i, line)) => {
                    let line = line.map_err(|e| Error::io(path, e))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    break serde_json::from_str(&line).map_err(|e| parse_err(i + 1, format!("invalid header: {e}")))?;
                }
            }
        };
        if header.schema_version != SCHEMA_VERSION {
            return Err(parse_err(
                1,
                format!("unsupported schema_version {}", header.schema_version),
            ));
        }
        let mut warnings = Vec::new();
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: ImageRecord =
                serde_json::from_str(&line).map_err(|e| parse_err(i + 1, format!("invalid record: {e}")))?;
            if record.modality == Modality::Unknown {
                if let Some(raw) = raw_modality(&line) {
                    if !Modality::parse_lenient(&raw).1 {
                        warnings.push(format!(
                            "{}:{}: unknown modality `{raw}` mapped to UNKNOWN",
                            path.display(),
                            i + 1
                        ));
                    }
                }
            }
            records.push(record);
        }
        Ok((
            UnifiedManifest {
                records,
                datasets: header.datasets,
                provenance: header.provenance,
            },
            warnings,
        ))
    }

    pub fn load(path: &Path) -> Result<(UnifiedManifest, Vec<String>)> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(f), path)
    }
}

fn raw_modality(line: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(line).ok()?;
    v.get("modality")?.as_str().map(str::to_string)
}

/// Concatenate manifests in input order.
pub fn merge_manifests(inputs: Vec<UnifiedManifest>) -> Result<UnifiedManifest> {
    let mut seen_datasets = HashSet::new();
    for m in &inputs {
        for d in &m.datasets {
            if !seen_datasets.insert(d.dataset_id.clone()) {
                return Err(Error::DuplicateDatasetId(d.dataset_id.clone()));
            }
        }
    }
    let total = inputs.iter().map(|m| m.records.len()).sum();
    let mut owner: HashMap<String, String> = HashMap::with_capacity(total);
    let mut merged = UnifiedManifest::new(Vec::new(), Vec::with_capacity(total));
    for m in inputs {
        for r in &m.records {
            if let Some(first) = owner.insert(r.record_id.clone(), r.dataset_id.clone()) {
                return Err(Error::DuplicateRecordId {
                    record_id: r.record_id.clone(),
                    first_dataset: first,
                    second_dataset: r.dataset_id.clone(),
                });
            }
        }
        merged.datasets.extend(m.datasets);
        merged.records.extend(m.records);
        merged.provenance.sources.extend(m.provenance.sources);
    }
    Ok(merged)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    EmptyRecordId,
    DuplicateRecordId,
    EmptyDatasetId,
    EmptyFilePath,
    EmptyRawLabel,
    EmptyPatientId,
    EmptyVideoId,
    InvalidDimension,
    UnknownDataset,
    DuplicateDatasetId,
    CountMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_id: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

/// Check every record and manifest invariant; findings are report entries.
pub fn validate_manifest(m: &UnifiedManifest) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut push = |kind, record_id: Option<&str>, dataset_id: Option<&str>, detail: String| {
        report.violations.push(Violation {
            kind,
            record_id: record_id.map(str::to_string),
            dataset_id: dataset_id.map(str::to_string),
            detail,
        })
    };

    let mut dataset_ids = HashSet::new();
    for d in &m.datasets {
        if !dataset_ids.insert(d.dataset_id.as_str()) {
            push(
                ViolationKind::DuplicateDatasetId,
                None,
                Some(&d.dataset_id),
                "dataset id declared twice".into(),
            );
        }
    }

    let mut seen = HashSet::with_capacity(m.records.len());
    for r in &m.records {
        let rid = Some(r.record_id.as_str());
        let did = Some(r.dataset_id.as_str());
        if r.record_id.is_empty() {
            push(
                ViolationKind::EmptyRecordId,
                rid,
                did,
                format!("record with path `{}`", r.file_path),
            );
        } else if !seen.insert(r.record_id.as_str()) {
            push(
                ViolationKind::DuplicateRecordId,
                rid,
                did,
                "record id appears twice".into(),
            );
        }
        if r.dataset_id.is_empty() {
            push(ViolationKind::EmptyDatasetId, rid, did, "empty dataset_id".into());
        } else if !dataset_ids.contains(r.dataset_id.as_str()) {
            push(
                ViolationKind::UnknownDataset,
                rid,
                did,
                "dataset_id has no descriptor".into(),
            );
        }
        if r.file_path.is_empty() {
            push(ViolationKind::EmptyFilePath, rid, did, "empty file_path".into());
        }
        if r.raw_label.trim().is_empty() {
            push(ViolationKind::EmptyRawLabel, rid, did, "empty raw_label".into());
        }
        if r.patient_id.as_deref() == Some("") {
            push(
                ViolationKind::EmptyPatientId,
                rid,
                did,
                "patient_id present but empty".into(),
            );
        }
        if r.video_id.as_deref() == Some("") {
            push(
                ViolationKind::EmptyVideoId,
                rid,
                did,
                "video_id present but empty".into(),
            );
        }
        for (name, dim) in [("width", r.width), ("height", r.height)] {
            if dim == Some(0) {
                push(ViolationKind::InvalidDimension, rid, did, format!("{name} must be > 0"));
            }
        }
    }

    for (dataset_id, found) in m.dataset_counts() {
        let declared = m.dataset(&dataset_id).and_then(|d| d.declared_image_count);
        if let Some(declared) = declared {
            if declared != found {
                push(
                    ViolationKind::CountMismatch,
                    None,
                    Some(&dataset_id),
                    format!("declared {declared} images, found {found}"),
                );
            }
        }
    }
    report
}

/// Per-(dataset, class) counts with totals and per-class dataset shares.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionTable {
    pub datasets: Vec<String>,
    pub classes: Vec<String>,
    /// `cells[d][c]`
    pub cells: Vec<Vec<u64>>,
    pub totals_row: Vec<u64>,
    pub column_percentages: Vec<Vec<f64>>,
}

impl DistributionTable {
    pub fn cell(&self, dataset_id: &str, class_id: &str) -> Option<u64> {
        let d = self.datasets.iter().position(|x| x == dataset_id)?;
        let c = self.classes.iter().position(|x| x == class_id)?;
        Some(self.cells[d][c])
    }

    pub fn total(&self, class_id: &str) -> Option<u64> {
        let c = self.classes.iter().position(|x| x == class_id)?;
        Some(self.totals_row[c])
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["dataset".to_string()];
        header.extend(self.classes.iter().cloned());
        out.write_record(&header)?;
        for (d, row) in self.datasets.iter().zip(&self.cells) {
            let mut rec = vec![d.clone()];
            rec.extend(row.iter().map(u64::to_string));
            out.write_record(&rec)?;
        }
        let mut total = vec!["total".to_string()];
        total.extend(self.totals_row.iter().map(u64::to_string));
        out.write_record(&total)?;
        out.flush()?;
        Ok(())
    }
}

/// Distribution of canonical classes across datasets. Columns follow
/// `classes`; rows follow the manifest's dataset order.
pub fn summarize(m: &UnifiedManifest, classes: &[String]) -> Result<DistributionTable> {
    let class_idx: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut datasets: Vec<String> = m.datasets.iter().map(|d| d.dataset_id.clone()).collect();
    let mut dataset_idx: HashMap<String, usize> = datasets.iter().enumerate().map(|(i, d)| (d.clone(), i)).collect();
    let mut cells: Vec<Vec<u64>> = vec![vec![0; classes.len()]; datasets.len()];

    for r in &m.records {
        let class = r
            .canonical_class
            .as_deref()
            .ok_or_else(|| Error::UnprojectedRecord(r.record_id.clone()))?;
        let c = *class_idx.get(class).ok_or_else(|| Error::UnknownClass {
            record_id: r.record_id.clone(),
            class_id: class.to_string(),
        })?;
        let d = match dataset_idx.get(&r.dataset_id) {
            Some(&d) => d,
            None => {
                // records without a descriptor still get a row, after the declared ones
                datasets.push(r.dataset_id.clone());
                cells.push(vec![0; classes.len()]);
                dataset_idx.insert(r.dataset_id.clone(), datasets.len() - 1);
                datasets.len() - 1
            }
        };
        cells[d][c] += 1;
    }

    let totals_row: Vec<u64> = (0..classes.len())
        .map(|c| cells.iter().map(|row| row[c]).sum())
        .collect();
    let column_percentages = cells
        .iter()
        .map(|row| {
            row.iter()
                .zip(&totals_row)
                .map(|(&n, &t)| if t == 0 { 0.0 } else { n as f64 / t as f64 })
                .collect()
        })
        .collect();
    Ok(DistributionTable {
        datasets,
        classes: classes.to_vec(),
        cells,
        totals_row,
        column_percentages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn descriptor(id: &str, declared: Option<u64>) -> DatasetDescriptor {
        DatasetDescriptor {
            dataset_id: id.into(),
            name: id.to_uppercase(),
            year: 2022,
            modalities: [Modality::Vce].into_iter().collect(),
            split_type: SplitType::None,
            declared_image_count: declared,
        }
    }

    fn manifest(id: &str, n: usize, class: Option<&str>) -> UnifiedManifest {
        let records = (0..n)
            .map(|i| {
                let mut r = ImageRecord::new(id, &format!("img/{i}.jpg"), "lbl");
                r.canonical_class = class.map(str::to_string);
                r
            })
            .collect();
        UnifiedManifest::new(vec![descriptor(id, Some(n as u64))], records)
    }

    #[test]
    fn merge_empty_is_empty() {
        let m = merge_manifests(vec![]).unwrap();
        assert!(m.is_empty());
        assert!(m.datasets.is_empty());
    }

    #[test]
    fn merge_preserves_order_and_counts() {
        let m = merge_manifests(vec![manifest("a", 3, None), manifest("b", 4, None)]).unwrap();
        assert_eq!(m.len(), 7);
        assert!(m.records[..3].iter().all(|r| r.dataset_id == "a"));
        assert!(m.records[3..].iter().all(|r| r.dataset_id == "b"));
        assert_eq!(m.records[0].record_id, "a/img/0.jpg");
    }

    #[test]
    fn merge_rejects_duplicate_dataset() {
        let err = merge_manifests(vec![manifest("a", 1, None), manifest("a", 1, None)]).unwrap_err();
        assert!(matches!(err, Error::DuplicateDatasetId(id) if id == "a"));
    }

    #[test]
    fn merge_rejects_duplicate_record_and_names_both() {
        let a = manifest("a", 2, None);
        let mut b = manifest("b", 1, None);
        b.records[0].record_id = "a/img/1.jpg".into();
        match merge_manifests(vec![a, b]).unwrap_err() {
            Error::DuplicateRecordId {
                record_id,
                first_dataset,
                second_dataset,
            } => {
                assert_eq!(record_id, "a/img/1.jpg");
                assert_eq!(first_dataset, "a");
                assert_eq!(second_dataset, "b");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validate_clean_and_broken() {
        let m = manifest("a", 3, None);
        assert!(validate_manifest(&m).is_empty());

        let mut bad = m.clone();
        bad.records[1].raw_label = String::new();
        let report = validate_manifest(&bad);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, ViolationKind::EmptyRawLabel);
        assert_eq!(report.violations[0].record_id.as_deref(), Some("a/img/1.jpg"));
    }

    #[test]
    fn validate_count_mismatch() {
        let mut m = manifest("a", 99, None);
        m.datasets[0].declared_image_count = Some(100);
        let report = validate_manifest(&m);
        assert_eq!(report.count(ViolationKind::CountMismatch), 1);
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn validate_dimensions_and_empty_patient() {
        let mut m = manifest("a", 2, None);
        m.records[0].width = Some(0);
        m.records[1].patient_id = Some(String::new());
        let report = validate_manifest(&m);
        assert_eq!(report.count(ViolationKind::InvalidDimension), 1);
        assert_eq!(report.count(ViolationKind::EmptyPatientId), 1);
    }

    #[test]
    fn summarize_single_record() {
        let m = manifest("d", 1, Some("bleeding"));
        let t = summarize(&m, &["bleeding".to_string()]).unwrap();
        assert_eq!(t.cell("d", "bleeding"), Some(1));
        assert_eq!(t.total("bleeding"), Some(1));
        assert_eq!(t.column_percentages[0][0], 1.0);
    }

    #[test]
    fn summarize_even_split_percentages() {
        let m = merge_manifests(vec![manifest("a", 5, Some("ulcer")), manifest("b", 5, Some("ulcer"))]).unwrap();
        let t = summarize(&m, &["ulcer".to_string(), "polyp".to_string()]).unwrap();
        assert_eq!(t.column_percentages[0][0], 0.5);
        assert_eq!(t.column_percentages[1][0], 0.5);
        assert_eq!(t.totals_row, vec![10, 0]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "dataset,ulcer,polyp\na,5,0\nb,5,0\ntotal,10,0\n"
        );
    }

    #[test]
    fn summarize_requires_projection() {
        let m = manifest("a", 1, None);
        assert!(matches!(summarize(&m, &["x".into()]), Err(Error::UnprojectedRecord(_))));
    }

    #[test]
    fn jsonl_roundtrip_and_unknown_modality_warning() {
        let mut m = manifest("a", 2, Some("ulcer"));
        m.records[0].patient_id = Some("P1".into());
        m.records[0].split_hint = Some(SplitHint::Fold(2));
        m.records[1].modality = Modality::Col;
        let bytes = m.to_bytes();
        let (back, warnings) = UnifiedManifest::read_from(&bytes[..], Path::new("m.jsonl")).unwrap();
        assert_eq!(back, m);
        assert!(warnings.is_empty());
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("\"split_hint\":\"FOLD(2)\""));
        assert!(!text.lines().nth(2).unwrap().contains("patient_id"));

        let odd = text.replace("\"modality\":\"COL\"", "\"modality\":\"capsule\"");
        let (back, warnings) = UnifiedManifest::read_from(odd.as_bytes(), Path::new("m.jsonl")).unwrap();
        assert_eq!(back.records[1].modality, Modality::Unknown);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("m.jsonl:3"));
    }

    #[test]
    fn parse_error_carries_line() {
        let text = "{\"schema_version\":1,\"datasets\":[]}\n{\"record_id\":1}\n";
        let err = UnifiedManifest::read_from(text.as_bytes(), Path::new("x.jsonl")).unwrap_err();
        assert!(err.to_string().starts_with("x.jsonl:2:"), "{err}");
    }

    #[test]
    fn split_hint_parsing() {
        assert_eq!("train".parse::<SplitHint>().unwrap(), SplitHint::Train);
        assert_eq!("Validation".parse::<SplitHint>().unwrap(), SplitHint::Val);
        assert_eq!("FOLD(3)".parse::<SplitHint>().unwrap(), SplitHint::Fold(3));
        assert_eq!("fold1".parse::<SplitHint>().unwrap(), SplitHint::Fold(1));
        assert!("holdout".parse::<SplitHint>().is_err());
    }
}
