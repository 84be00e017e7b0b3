//! Deterministic synthetic collections (metadata only, no pixels).
//!
//! `endoextend24` reproduces the ten source datasets at their published
//! image counts. Class cells the sources publish are pinned; all other cells
//! are filled by largest-remainder apportionment and flagged `synthetic` in
//! the fixture metadata.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use indexmap::IndexMap;
use serde::Serialize;

use crate::adapters::{AdapterConfig, CsvColumns, GroupPolicy, Layout};
use crate::error::{Error, Result};
use crate::manifest::{DatasetDescriptor, ImageRecord, Modality, SplitHint, SplitType, UnifiedManifest};
use crate::rng::SplitMix64;
use crate::splitter::{stratified_group_shuffle_split, write_rows, AssignmentRow, SplitSpec};
use crate::taxonomy::{project, LabelTarget, MappingProfile, Taxonomy, TaxonomyNode, CE24_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Endoextend24,
    Tiny,
    PlantedLeak,
    PlantedOverlap,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Endoextend24,
        Preset::Tiny,
        Preset::PlantedLeak,
        Preset::PlantedOverlap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Endoextend24 => "endoextend24",
            Preset::Tiny => "tiny",
            Preset::PlantedLeak => "planted-leak",
            Preset::PlantedOverlap => "planted-overlap",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// One source dataset as published.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceDataset {
    pub id: &'static str,
    pub name: &'static str,
    pub year: i32,
    pub modalities: &'static [Modality],
    pub split_type: SplitType,
    pub images: u64,
    pub resolution: Option<(u32, u32)>,
}

use Modality::{Col, Gst, Vce};

pub const SOURCE_DATASETS: [SourceDataset; 10] = [
    SourceDataset {
        id: "see_ai",
        name: "The SEE-AI Project",
        year: 2023,
        modalities: &[Vce],
        split_type: SplitType::None,
        images: 18481,
        resolution: Some((576, 576)),
    },
    SourceDataset {
        id: "kid2",
        name: "KID 2",
        year: 2017,
        modalities: &[Vce],
        split_type: SplitType::None,
        images: 2371,
        resolution: Some((360, 360)),
    },
    SourceDataset {
        id: "kid1",
        name: "KID 1",
        year: 2017,
        modalities: &[Vce],
        split_type: SplitType::None,
        images: 77,
        resolution: Some((360, 360)),
    },
    SourceDataset {
        id: "ers",
        name: "ERS",
        year: 2022,
        modalities: &[Gst, Col, Vce],
        split_type: SplitType::PatientId,
        images: 121399,
        resolution: None,
    },
    SourceDataset {
        id: "limuc",
        name: "LIMUC",
        year: 2022,
        modalities: &[Col],
        split_type: SplitType::PatientId,
        images: 11276,
        resolution: Some((352, 288)),
    },
    SourceDataset {
        id: "medfmc",
        name: "MedFMC",
        year: 2023,
        modalities: &[Col],
        split_type: SplitType::PatientId,
        images: 3865,
        resolution: Some((1280, 1024)),
    },
    SourceDataset {
        id: "kvasir_capsule",
        name: "Kvasir-Capsule",
        year: 2021,
        modalities: &[Vce],
        split_type: SplitType::KfoldCv,
        images: 47238,
        resolution: Some((336, 336)),
    },
    SourceDataset {
        id: "hyper_kvasir",
        name: "HyperKvasir",
        year: 2020,
        modalities: &[Gst, Col],
        split_type: SplitType::KfoldCv,
        images: 10662,
        resolution: None,
    },
    SourceDataset {
        id: "crohn_ipi",
        name: "CrohnIPI",
        year: 2020,
        modalities: &[Vce],
        split_type: SplitType::KfoldCv,
        images: 3498,
        resolution: Some((320, 320)),
    },
    SourceDataset {
        id: "gastrovision",
        name: "GastroVision",
        year: 2023,
        modalities: &[Gst, Col],
        split_type: SplitType::TrainValTest,
        images: 8000,
        resolution: None,
    },
];

pub const COLLECTION_TOTAL: u64 = 226_867;

/// Published class totals, in allocation order (rarest first).
pub const PUBLISHED_TOTALS: [(&str, u64); 5] = [
    ("worms", 201),
    ("foreign_body", 675),
    ("ulcer", 12334),
    ("bleeding", 27450),
    ("normal_mucosa", 67434),
];

/// Published (dataset, class) cells.
pub const PINNED_CELLS: [(&str, &str, u64); 5] = [
    ("ers", "normal_mucosa", 20469),
    ("kvasir_capsule", "normal_mucosa", 34338),
    ("limuc", "ulcer", 5166),
    ("hyper_kvasir", "polyp", 1028),
    ("hyper_kvasir", "ulcer", 851),
];

/// Relative weights for classes without a published total.
const UNPUBLISHED_WEIGHTS: [(&str, u64); 5] = [
    ("polyp", 30),
    ("erosion", 25),
    ("angioectasia", 15),
    ("lymphangiectasia", 10),
    ("erythema", 20),
];

const HYPER_KVASIR_CLASSES: [&str; 7] = [
    "normal_mucosa",
    "polyp",
    "ulcer",
    "bleeding",
    "erosion",
    "erythema",
    "angioectasia",
];

/// Classes a dataset can plausibly contain.
pub fn class_affinity(dataset_id: &str) -> Vec<&'static str> {
    match dataset_id {
        "limuc" => vec!["normal_mucosa", "ulcer", "erosion", "erythema", "bleeding"],
        "medfmc" => vec!["normal_mucosa", "polyp", "ulcer", "bleeding", "erosion"],
        "hyper_kvasir" => HYPER_KVASIR_CLASSES.to_vec(),
        "gastrovision" => {
            let mut v = HYPER_KVASIR_CLASSES.to_vec();
            v.push("foreign_body");
            v
        }
        _ => CE24_CLASSES.to_vec(),
    }
}

/// Largest-remainder apportionment of `total` by `weights`; remainders tie
/// to the lower index.
pub fn apportion(total: u64, weights: &[u64]) -> Vec<u64> {
    let sum: u128 = weights.iter().map(|&w| w as u128).sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let mut out = Vec::with_capacity(weights.len());
    let mut rem = Vec::with_capacity(weights.len());
    let mut given = 0u64;
    for (i, &w) in weights.iter().enumerate() {
        let prod = total as u128 * w as u128;
        let q = (prod / sum) as u64;
        out.push(q);
        rem.push((prod % sum, i));
        given += q;
    }
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in rem.iter().take((total - given) as usize) {
        out[i] += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CellSource {
    Published,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellMeta {
    pub dataset_id: String,
    pub class_id: String,
    pub count: u64,
    pub source: CellSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlantedPair {
    pub match_key: String,
    pub record_id_a: String,
    pub record_id_b: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureMeta {
    pub preset: Preset,
    pub seed: u64,
    pub total_records: u64,
    pub dataset_counts: IndexMap<String, u64>,
    pub class_totals: IndexMap<String, u64>,
    pub published_class_totals: IndexMap<String, u64>,
    pub cells: Vec<CellMeta>,
    pub groups: IndexMap<String, u64>,
    pub notes: Vec<String>,
}

/// A generated collection; [`Fixture::write`] lays it out on disk.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub manifests: Vec<UnifiedManifest>,
    pub taxonomy: Taxonomy,
    pub profile: MappingProfile,
    pub meta: FixtureMeta,
    pub assignment: Option<Vec<AssignmentRow>>,
    pub external_split: Option<Vec<(String, String)>>,
    pub planted_pairs: Option<Vec<PlantedPair>>,
}

impl Fixture {
    pub fn merged(&self) -> Result<UnifiedManifest> {
        crate::manifest::merge_manifests(self.manifests.clone())
    }

    fn adapter_configs(&self) -> Vec<AdapterConfig> {
        self.manifests
            .iter()
            .flat_map(|m| &m.datasets)
            .map(|d| AdapterConfig {
                dataset_id: d.dataset_id.clone(),
                name: Some(d.name.clone()),
                year: Some(d.year),
                split_type: d.split_type,
                declared_image_count: d.declared_image_count,
                layout: Layout::CsvManifest,
                root: PathBuf::from("sources").join(&d.dataset_id),
                csv_columns: Some(CsvColumns {
                    path: "path".into(),
                    label: "label".into(),
                    patient_id: Some("patient_id".into()),
                    video_id: Some("video_id".into()),
                    split: Some("split".into()),
                }),
                csv_file: "labels.csv".into(),
                pattern: None,
                modality: Some(d.modalities.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(",")),
            })
            .collect()
    }

    /// Write manifests, CSV sources, collection config, taxonomy, profile,
    /// metadata and any preset-specific files under `out`.
    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let mut put = |rel: PathBuf, bytes: Vec<u8>| -> Result<()> {
            let path = out.join(&rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        for m in &self.manifests {
            let id = &m.datasets[0].dataset_id;
            put(PathBuf::from("manifests").join(format!("{id}.jsonl")), m.to_bytes())?;
            put(PathBuf::from("sources").join(id).join("labels.csv"), source_csv(m))?;
        }
        put(
            "collection.json".into(),
            with_newline(crate::adapters::collection_json(&self.adapter_configs())),
        )?;
        put("taxonomy.json".into(), with_newline(self.taxonomy.to_json()))?;
        put("profile.json".into(), with_newline(self.profile.to_json()))?;
        put(
            "fixture_meta.json".into(),
            with_newline(serde_json::to_string_pretty(&self.meta).expect("meta serializes")),
        )?;
        if let Some(rows) = &self.assignment {
            let mut buf = Vec::new();
            write_rows(rows, &mut buf).map_err(|e| Error::csv(out.join("assignment.csv"), e))?;
            put("assignment.csv".into(), buf)?;
        }
        if let Some(pairs) = &self.external_split {
            let mut buf = Vec::new();
            write_csv_rows(
                &mut buf,
                &["match_key", "split"],
                pairs.iter().map(|(k, s)| vec![k.as_str(), s.as_str()]),
            )
            .map_err(|e| Error::csv(out.join("external_split.csv"), e))?;
            put("external_split.csv".into(), buf)?;
        }
        if let Some(pairs) = &self.planted_pairs {
            let mut buf = Vec::new();
            write_csv_rows(
                &mut buf,
                &["match_key", "record_id_a", "record_id_b"],
                pairs
                    .iter()
                    .map(|p| vec![p.match_key.as_str(), p.record_id_a.as_str(), p.record_id_b.as_str()]),
            )
            .map_err(|e| Error::csv(out.join("planted_pairs.csv"), e))?;
            put("planted_pairs.csv".into(), buf)?;
        }
        Ok(written)
    }
}

fn with_newline(mut s: String) -> Vec<u8> {
    s.push('\n');
    s.into_bytes()
}

fn write_csv_rows<'a, W: Write>(w: W, header: &[&str], rows: impl Iterator<Item = Vec<&'a str>>) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

fn source_csv(m: &UnifiedManifest) -> Vec<u8> {
    let mut buf = Vec::new();
    let hints: Vec<String> = m
        .records
        .iter()
        .map(|r| r.split_hint.map(|h| h.to_string()).unwrap_or_default())
        .collect();
    write_csv_rows(
        &mut buf,
        &["path", "label", "patient_id", "video_id", "split"],
        m.records.iter().zip(&hints).map(|(r, h)| {
            vec![
                r.file_path.as_str(),
                r.raw_label.as_str(),
                r.patient_id.as_deref().unwrap_or(""),
                r.video_id.as_deref().unwrap_or(""),
                h.as_str(),
            ]
        }),
    )
    .expect("in-memory CSV");
    buf
}

pub fn generate(preset: Preset, seed: u64) -> Result<Fixture> {
    match preset {
        Preset::Endoextend24 => Ok(endoextend24(seed)),
        Preset::Tiny => Ok(tiny(seed, Preset::Tiny)),
        Preset::PlantedLeak => planted_leak(seed),
        Preset::PlantedOverlap => Ok(planted_overlap(seed)),
    }
}

/// Fine-grained labels some sources use, with their taxonomy parent.
const FINE_LABELS: [(&str, &str); 3] = [
    ("gastric_ulcer", "ulcer"),
    ("duodenal_ulcer", "ulcer"),
    ("colitis_erosion", "erosion"),
];

fn fixture_taxonomy() -> Taxonomy {
    let mut nodes: Vec<TaxonomyNode> = CE24_CLASSES
        .iter()
        .map(|c| TaxonomyNode {
            class_id: c.to_string(),
            display_name: c.replace('_', " "),
            parent: None,
        })
        .collect();
    for (child, parent) in FINE_LABELS {
        nodes.push(TaxonomyNode {
            class_id: child.to_string(),
            display_name: child.replace('_', " "),
            parent: Some(parent.to_string()),
        });
    }
    Taxonomy::new("ce24-fixture-1", nodes).expect("fixture taxonomy is valid")
}

/// Raw label for a record of `class` in `dataset`; ERS uses finer labels
/// for part of its ulcer and erosion records.
fn raw_label(dataset: &str, class: &str, rng: &mut SplitMix64) -> String {
    if dataset == "ers" {
        match class {
            "ulcer" => return ["ulcer", "gastric_ulcer", "duodenal_ulcer"][rng.below(3) as usize].into(),
            "erosion" if rng.below(2) == 0 => return "colitis_erosion".into(),
            _ => {}
        }
    }
    class.to_string()
}

fn profile_for(manifests: &[UnifiedManifest]) -> MappingProfile {
    let mut profile = MappingProfile::ce24_10();
    for m in manifests {
        for r in &m.records {
            let target = if CE24_CLASSES.contains(&r.raw_label.as_str()) {
                r.raw_label.clone()
            } else {
                FINE_LABELS
                    .iter()
                    .find(|(c, _)| *c == r.raw_label)
                    .map(|(c, _)| c.to_string())
                    .expect("fixture labels are known")
            };
            profile
                .insert(&r.dataset_id, &r.raw_label, LabelTarget::Class(target))
                .expect("consistent fixture mapping");
        }
    }
    profile
}

fn unique_name(tag: &str, rng: &mut SplitMix64, used: &mut HashSet<u64>) -> String {
    loop {
        let v = rng.next_u64();
        if used.insert(v) {
            return format!("{tag}_{v:016x}");
        }
    }
}

/// Per (dataset, class) counts for the ten sources.
pub fn allocate_cells() -> Vec<CellMeta> {
    let classes = CE24_CLASSES;
    let nd = SOURCE_DATASETS.len();
    let mut cells = vec![[0u64; 10]; nd];
    let mut pinned = vec![[false; 10]; nd];
    let ci = |c: &str| classes.iter().position(|x| *x == c).expect("known class");
    let di = |d: &str| SOURCE_DATASETS.iter().position(|x| x.id == d).expect("known dataset");
    let mut capacity: Vec<u64> = SOURCE_DATASETS.iter().map(|d| d.images).collect();
    for (d, c, n) in PINNED_CELLS {
        let (d, c) = (di(d), ci(c));
        cells[d][c] = n;
        pinned[d][c] = true;
        capacity[d] -= n;
    }
    let affinity: Vec<Vec<usize>> = SOURCE_DATASETS
        .iter()
        .map(|d| class_affinity(d.id).into_iter().map(ci).collect())
        .collect();

    for (class, total) in PUBLISHED_TOTALS {
        let c = ci(class);
        let already: u64 = (0..nd).map(|d| cells[d][c]).sum();
        let eligible: Vec<usize> = (0..nd).filter(|&d| affinity[d].contains(&c) && !pinned[d][c]).collect();
        let weights: Vec<u64> = eligible.iter().map(|&d| capacity[d]).collect();
        for (&d, n) in eligible.iter().zip(apportion(total - already, &weights)) {
            assert!(n <= capacity[d], "allocation exceeds capacity");
            cells[d][c] += n;
            capacity[d] -= n;
        }
    }

    for d in 0..nd {
        let eligible: Vec<(usize, u64)> = UNPUBLISHED_WEIGHTS
            .iter()
            .map(|(c, w)| (ci(c), *w))
            .filter(|(c, _)| affinity[d].contains(c) && !pinned[d][*c])
            .collect();
        let weights: Vec<u64> = eligible.iter().map(|(_, w)| *w).collect();
        for (&(c, _), n) in eligible.iter().zip(apportion(capacity[d], &weights)) {
            cells[d][c] += n;
        }
        capacity[d] = 0;
    }

    let mut out = Vec::new();
    for (d, ds) in SOURCE_DATASETS.iter().enumerate() {
        for (c, class) in classes.iter().enumerate() {
            out.push(CellMeta {
                dataset_id: ds.id.to_string(),
                class_id: class.to_string(),
                count: cells[d][c],
                source: if pinned[d][c] {
                    CellSource::Published
                } else {
                    CellSource::Synthetic
                },
            });
        }
    }
    out
}

/// Approximate number of patient/video groups across grouped datasets.
pub const TARGET_GROUPS: u64 = 5000;

fn endoextend24(seed: u64) -> Fixture {
    let mut rng = SplitMix64::new(seed);
    let cells = allocate_cells();
    let grouped: Vec<&SourceDataset> = SOURCE_DATASETS
        .iter()
        .filter(|d| matches!(d.split_type, SplitType::PatientId | SplitType::KfoldCv))
        .collect();
    let grouped_total: u64 = grouped.iter().map(|d| d.images).sum();
    let group_counts = apportion(TARGET_GROUPS, &grouped.iter().map(|d| d.images).collect::<Vec<_>>());

    let mut manifests = Vec::new();
    let mut groups_meta = IndexMap::new();
    for ds in &SOURCE_DATASETS {
        let mut labels: Vec<&str> = Vec::with_capacity(ds.images as usize);
        for cell in cells.iter().filter(|c| c.dataset_id == ds.id) {
            let class = CE24_CLASSES.iter().find(|c| **c == cell.class_id).expect("class");
            labels.extend(std::iter::repeat_n(*class, cell.count as usize));
        }
        rng.shuffle(&mut labels);
        let mut used = HashSet::new();
        let mut records: Vec<ImageRecord> = labels
            .iter()
            .map(|class| {
                let name = unique_name(ds.id, &mut rng, &mut used);
                let mut r = ImageRecord::new(ds.id, &format!("images/{name}.jpg"), &raw_label(ds.id, class, &mut rng));
                r.modality = ds.modalities[0];
                if let Some((w, h)) = ds.resolution {
                    r.width = Some(w);
                    r.height = Some(h);
                }
                r
            })
            .collect();

        if let Some(pos) = grouped.iter().position(|g| g.id == ds.id) {
            let n_groups = group_counts[pos].max(1) as usize;
            let bounds = group_bounds(records.len(), n_groups, &mut rng);
            for (g, w) in bounds.windows(2).enumerate() {
                for r in &mut records[w[0]..w[1]] {
                    let id = format!(
                        "{}{g:05}",
                        if ds.split_type == SplitType::PatientId {
                            "P"
                        } else {
                            "V"
                        }
                    );
                    if ds.split_type == SplitType::PatientId {
                        r.patient_id = Some(id);
                    } else {
                        r.video_id = Some(id);
                        r.split_hint = Some(SplitHint::Fold((g % 2) as u32));
                    }
                }
            }
            groups_meta.insert(ds.id.to_string(), n_groups as u64);
        } else {
            groups_meta.insert(ds.id.to_string(), records.len() as u64);
        }
        if ds.split_type == SplitType::TrainValTest {
            for r in &mut records {
                r.split_hint = Some(match rng.below(10) {
                    0..=5 => SplitHint::Train,
                    6 | 7 => SplitHint::Val,
                    _ => SplitHint::Test,
                });
            }
        }
        let descriptor = DatasetDescriptor {
            dataset_id: ds.id.to_string(),
            name: ds.name.to_string(),
            year: ds.year,
            modalities: ds.modalities.iter().copied().collect(),
            split_type: ds.split_type,
            declared_image_count: Some(ds.images),
        };
        manifests.push(UnifiedManifest::new(vec![descriptor], records));
    }

    let mut class_totals: IndexMap<String, u64> = CE24_CLASSES.iter().map(|c| (c.to_string(), 0)).collect();
    for c in &cells {
        class_totals[&c.class_id] += c.count;
    }
    let profile = profile_for(&manifests);
    Fixture {
        meta: FixtureMeta {
            preset: Preset::Endoextend24,
            seed,
            total_records: COLLECTION_TOTAL,
            dataset_counts: SOURCE_DATASETS.iter().map(|d| (d.id.to_string(), d.images)).collect(),
            class_totals,
            published_class_totals: PUBLISHED_TOTALS.iter().map(|(c, n)| (c.to_string(), *n)).collect(),
            cells,
            groups: groups_meta,
            notes: vec![
                "no pixel data; file names are synthetic".into(),
                format!(
                    "cells marked synthetic are a deterministic largest-remainder allocation, not published counts; {grouped_total} records carry patient or video groups"
                ),
            ],
        },
        manifests,
        taxonomy: fixture_taxonomy(),
        profile,
        assignment: None,
        external_split: None,
        planted_pairs: None,
    }
}

/// `n_groups + 1` increasing boundaries from 0 to `n` with random interior
/// cut points, so every group is non-empty.
fn group_bounds(n: usize, n_groups: usize, rng: &mut SplitMix64) -> Vec<usize> {
    let n_groups = n_groups.min(n).max(1);
    let mut bounds = vec![0];
    bounds.extend(rng.sample_indices(n - 1, n_groups - 1).into_iter().map(|i| i + 1));
    bounds.push(n);
    bounds
}

fn tiny_manifest(seed: u64) -> UnifiedManifest {
    let mut rng = SplitMix64::new(seed);
    let mut labels: Vec<&str> = CE24_CLASSES[..4]
        .iter()
        .flat_map(|c| std::iter::repeat_n(*c, 10))
        .collect();
    rng.shuffle(&mut labels);
    let records = labels
        .iter()
        .enumerate()
        .map(|(i, class)| {
            let mut r = ImageRecord::new("tiny", &format!("images/tiny_{i:02}.jpg"), class);
            r.patient_id = Some(format!("P{}", i / 4));
            r.modality = Vce;
            r
        })
        .collect();
    let descriptor = DatasetDescriptor {
        dataset_id: "tiny".into(),
        name: "Tiny".into(),
        year: 2024,
        modalities: [Vce].into_iter().collect(),
        split_type: SplitType::PatientId,
        declared_image_count: Some(40),
    };
    UnifiedManifest::new(vec![descriptor], records)
}

fn simple_meta(preset: Preset, seed: u64, manifests: &[UnifiedManifest], notes: Vec<String>) -> FixtureMeta {
    let mut class_totals: IndexMap<String, u64> = IndexMap::new();
    let mut cells: IndexMap<(String, String), u64> = IndexMap::new();
    let mut groups = IndexMap::new();
    for m in manifests {
        let mut keys = HashSet::new();
        for r in &m.records {
            *class_totals.entry(r.raw_label.clone()).or_default() += 1;
            *cells.entry((r.dataset_id.clone(), r.raw_label.clone())).or_default() += 1;
            keys.insert(crate::adapters::extract_group_key(r, &GroupPolicy::default()).expect("record id fallback"));
        }
        groups.insert(m.datasets[0].dataset_id.clone(), keys.len() as u64);
    }
    FixtureMeta {
        preset,
        seed,
        total_records: manifests.iter().map(|m| m.len() as u64).sum(),
        dataset_counts: manifests
            .iter()
            .map(|m| (m.datasets[0].dataset_id.clone(), m.len() as u64))
            .collect(),
        class_totals,
        published_class_totals: IndexMap::new(),
        cells: cells
            .into_iter()
            .map(|((dataset_id, class_id), count)| CellMeta {
                dataset_id,
                class_id,
                count,
                source: CellSource::Synthetic,
            })
            .collect(),
        groups,
        notes,
    }
}

fn tiny(seed: u64, preset: Preset) -> Fixture {
    let manifests = vec![tiny_manifest(seed)];
    let profile = profile_for(&manifests);
    Fixture {
        meta: simple_meta(
            preset,
            seed,
            &manifests,
            vec!["40 records, 4 classes of 10, patients P0..P9 with 4 records each".into()],
        ),
        manifests,
        taxonomy: Taxonomy::ce24_10(),
        profile,
        assignment: None,
        external_split: None,
        planted_pairs: None,
    }
}

/// The patient whose records are split across train and val.
pub const PLANTED_LEAK_PATIENT: &str = "P9";

fn planted_leak(seed: u64) -> Result<Fixture> {
    let mut fx = tiny(seed, Preset::PlantedLeak);
    let projected = project(&fx.manifests[0], &fx.taxonomy, &fx.profile)?.manifest;
    let spec = SplitSpec::new(
        SplitSpec::default_names(2),
        vec![0.8, 0.2],
        seed,
        GroupPolicy::default(),
    )?;
    let mut rows = stratified_group_shuffle_split(&projected, &spec)?.rows();
    let victim = projected
        .records
        .iter()
        .find(|r| r.patient_id.as_deref() == Some(PLANTED_LEAK_PATIENT))
        .expect("tiny has P9")
        .record_id
        .clone();
    let row = rows.iter_mut().find(|r| r.record_id == victim).expect("assigned");
    row.split = if row.split == "train" {
        "val".into()
    } else {
        "train".into()
    };
    fx.meta.notes.push(format!(
        "assignment.csv: clean 80/20 split with record `{victim}` of patient {PLANTED_LEAK_PATIENT} moved to `{}`",
        row.split
    ));
    fx.assignment = Some(rows);
    Ok(fx)
}

/// Source sizes for the overlap preset, and the share copied into the
/// challenge manifest.
const OVERLAP_SOURCES: [(&str, &str, usize); 3] = [
    ("see_ai", "The SEE-AI Project", 600),
    ("kid2", "KID 2", 150),
    ("kvasir_capsule", "Kvasir-Capsule", 800),
];
const OVERLAP_COPY_PERCENT: u64 = 70;
const OVERLAP_EXTRAS: usize = 300;

fn planted_overlap(seed: u64) -> Fixture {
    let mut rng = SplitMix64::new(seed);
    let mut used = HashSet::new();
    let mut manifests = Vec::new();
    let mut ce24_records = Vec::new();
    let mut planted = Vec::new();
    let pick_class = |rng: &mut SplitMix64| CE24_CLASSES[rng.below(CE24_CLASSES.len() as u64) as usize];

    for (id, name, n) in OVERLAP_SOURCES {
        let mut records = Vec::with_capacity(n);
        for _ in 0..n {
            let file = unique_name(id, &mut rng, &mut used);
            let mut r = ImageRecord::new(id, &format!("frames/{file}.jpg"), pick_class(&mut rng));
            r.modality = Vce;
            records.push(r);
        }
        let k = (n as u64 * OVERLAP_COPY_PERCENT / 100) as usize;
        for i in rng.sample_indices(n, k) {
            let src = &records[i];
            let stem = src
                .file_path
                .rsplit('/')
                .next()
                .unwrap()
                .trim_end_matches(".jpg")
                .to_string();
            let mut copy = ImageRecord::new("ce24", &format!("{id}/{}/{stem}.png", src.raw_label), &src.raw_label);
            copy.modality = Vce;
            planted.push(PlantedPair {
                match_key: stem,
                record_id_a: src.record_id.clone(),
                record_id_b: copy.record_id.clone(),
            });
            ce24_records.push(copy);
        }
        manifests.push(UnifiedManifest::new(
            vec![DatasetDescriptor {
                dataset_id: id.into(),
                name: name.into(),
                year: 2023,
                modalities: [Vce].into_iter().collect(),
                split_type: SplitType::None,
                declared_image_count: Some(n as u64),
            }],
            records,
        ));
    }
    for _ in 0..OVERLAP_EXTRAS {
        let file = unique_name("aiims", &mut rng, &mut used);
        let class = pick_class(&mut rng);
        let mut r = ImageRecord::new("ce24", &format!("aiims/{class}/{file}.png"), class);
        r.modality = Vce;
        ce24_records.push(r);
    }
    let mut order: Vec<usize> = (0..ce24_records.len()).collect();
    rng.shuffle(&mut order);
    let n_train = ce24_records.len() * 4 / 5;
    let mut split_of = vec![""; ce24_records.len()];
    for (rank, &i) in order.iter().enumerate() {
        split_of[i] = if rank < n_train { "train" } else { "val" };
    }
    let external: Vec<(String, String)> = ce24_records
        .iter()
        .zip(&split_of)
        .map(|(r, s)| (crate::adapters::normalize_filename(&r.file_path).0, s.to_string()))
        .collect();
    let n_ce24 = ce24_records.len() as u64;
    manifests.push(UnifiedManifest::new(
        vec![DatasetDescriptor {
            dataset_id: "ce24".into(),
            name: "Capsule Vision 2024 Challenge".into(),
            year: 2024,
            modalities: [Vce].into_iter().collect(),
            split_type: SplitType::TrainValTest,
            declared_image_count: Some(n_ce24),
        }],
        ce24_records,
    ));
    let profile = profile_for(&manifests);
    let notes = vec![format!(
        "ce24 holds {} renamed-extension copies of source frames plus {OVERLAP_EXTRAS} unique extras; see planted_pairs.csv",
        planted.len()
    )];
    Fixture {
        meta: simple_meta(Preset::PlantedOverlap, seed, &manifests, notes),
        manifests,
        taxonomy: Taxonomy::ce24_10(),
        profile,
        assignment: None,
        external_split: Some(external),
        planted_pairs: Some(planted),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_total() {
        assert_eq!(SOURCE_DATASETS.iter().map(|d| d.images).sum::<u64>(), COLLECTION_TOTAL);
    }

    #[test]
    fn apportion_examples() {
        assert_eq!(apportion(10, &[1, 1, 1]), vec![4, 3, 3]);
        assert_eq!(apportion(7, &[0, 5]), vec![0, 7]);
        assert_eq!(apportion(0, &[3, 4]), vec![0, 0]);
        assert_eq!(apportion(5, &[2, 1, 1]).iter().sum::<u64>(), 5);
    }

    #[test]
    fn allocation_respects_totals_and_affinity() {
        let cells = allocate_cells();
        for d in &SOURCE_DATASETS {
            let sum: u64 = cells.iter().filter(|c| c.dataset_id == d.id).map(|c| c.count).sum();
            assert_eq!(sum, d.images, "{}", d.id);
            let allowed = class_affinity(d.id);
            for c in cells.iter().filter(|c| c.dataset_id == d.id && c.count > 0) {
                assert!(allowed.contains(&c.class_id.as_str()), "{} {}", d.id, c.class_id);
            }
        }
        for (class, total) in PUBLISHED_TOTALS {
            let sum: u64 = cells.iter().filter(|c| c.class_id == class).map(|c| c.count).sum();
            assert_eq!(sum, total, "{class}");
        }
        for (d, c, n) in PINNED_CELLS {
            let cell = cells.iter().find(|x| x.dataset_id == d && x.class_id == c).unwrap();
            assert_eq!((cell.count, &cell.source), (n, &CellSource::Published));
        }
    }

    #[test]
    fn presets_parse() {
        for p in Preset::ALL {
            assert_eq!(p.as_str().parse::<Preset>().unwrap(), p);
        }
        assert!(matches!("huge".parse::<Preset>(), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn tiny_shape() {
        let fx = generate(Preset::Tiny, 24).unwrap();
        let m = &fx.manifests[0];
        assert_eq!(m.len(), 40);
        assert_eq!(fx.meta.groups["tiny"], 10);
        assert!(fx.meta.class_totals.values().all(|&n| n == 10));
    }

    #[test]
    fn group_bounds_cover() {
        let mut rng = SplitMix64::new(3);
        let b = group_bounds(100, 7, &mut rng);
        assert_eq!(b.len(), 8);
        assert_eq!((b[0], b[7]), (0, 100));
        assert!(b.windows(2).all(|w| w[0] < w[1]));
    }
}
