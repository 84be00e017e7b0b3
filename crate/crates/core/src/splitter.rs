//! Patient-grouped stratified splitting.
//!
//! All split kinds share one objective, [`split_cost`]: the squared relative
//! deviation of every (split, class) count from its proportional target,
//! normalized by the class total, plus a weighted term for split sizes.
//! Normalizing by class totals gives rare findings the same weight as
//! common ones.
//!
//! The shuffle split places whole groups greedily, rarest class first, then
//! runs single-group moves until no move lowers the cost. The result is
//! therefore locally optimal: moving any one group to another split never
//! reduces [`split_cost`].

use std::cmp::{Ordering, Reverse};
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::adapters::{extract_group_key, normalize_filename_with, GroupKey, GroupPolicy, MatchKey};
use crate::error::{Error, Result};
use crate::manifest::UnifiedManifest;
use crate::rng;

const RATIO_SUM_TOLERANCE: f64 = 1e-9;

fn default_lambda() -> f64 {
    1.0
}

/// Target split layout and the knobs of the greedy objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub split_names: Vec<String>,
    pub ratios: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub group_policy: GroupPolicy,
    #[serde(default = "default_lambda")]
    pub size_term_weight: f64,
}

impl SplitSpec {
    pub fn new(split_names: Vec<String>, ratios: Vec<f64>, seed: u64, group_policy: GroupPolicy) -> Result<Self> {
        let spec = Self {
            split_names,
            ratios,
            seed,
            group_policy,
            size_term_weight: default_lambda(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.size_term_weight = lambda;
        self.validate()?;
        Ok(self)
    }

    /// `train`/`val` (and `test`) for two or three ratios, `split<i>` otherwise.
    pub fn default_names(n: usize) -> Vec<String> {
        match n {
            2 => vec!["train".into(), "val".into()],
            3 => vec!["train".into(), "val".into(), "test".into()],
            _ => (0..n).map(|i| format!("split{i}")).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.split_names.len() != self.ratios.len() {
            return bad(format!(
                "{} split names but {} ratios",
                self.split_names.len(),
                self.ratios.len()
            ));
        }
        if self.ratios.len() < 2 {
            return bad("at least two splits are required".into());
        }
        let mut names = HashSet::new();
        for n in &self.split_names {
            if n.is_empty() || !names.insert(n.as_str()) {
                return bad(format!("split names must be non-empty and distinct (`{n}`)"));
            }
        }
        if let Some(r) = self.ratios.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return bad(format!("ratio {r} outside (0, 1)"));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > RATIO_SUM_TOLERANCE {
            return bad(format!("ratios sum to {sum}, expected 1"));
        }
        if !(self.size_term_weight >= 0.0 && self.size_term_weight.is_finite()) {
            return bad(format!(
                "size term weight {} must be non-negative",
                self.size_term_weight
            ));
        }
        Ok(())
    }
}

/// Per (split, class) record counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    pub splits: Vec<String>,
    pub classes: Vec<String>,
    counts: Vec<u64>,
}

impl CountTable {
    pub fn zeros(splits: Vec<String>, classes: Vec<String>) -> Self {
        let counts = vec![0; splits.len() * classes.len()];
        Self {
            splits,
            classes,
            counts,
        }
    }

    pub fn get(&self, split: usize, class: usize) -> u64 {
        self.counts[split * self.classes.len() + class]
    }

    pub fn set(&mut self, split: usize, class: usize, value: u64) {
        let c = self.classes.len();
        self.counts[split * c + class] = value;
    }

    pub fn add(&mut self, split: usize, class: usize, delta: u64) {
        let c = self.classes.len();
        self.counts[split * c + class] += delta;
    }

    pub fn sub(&mut self, split: usize, class: usize, delta: u64) {
        let c = self.classes.len();
        self.counts[split * c + class] -= delta;
    }

    pub fn by_name(&self, split: &str, class: &str) -> Option<u64> {
        let s = self.splits.iter().position(|x| x == split)?;
        let c = self.classes.iter().position(|x| x == class)?;
        Some(self.get(s, c))
    }

    pub fn split_total(&self, split: usize) -> u64 {
        let c = self.classes.len();
        self.counts[split * c..(split + 1) * c].iter().sum()
    }

    pub fn class_total(&self, class: usize) -> u64 {
        (0..self.splits.len()).map(|s| self.get(s, class)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn raw(&self) -> &[u64] {
        &self.counts
    }
}

impl Serialize for CountTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut outer = s.serialize_map(Some(self.splits.len()))?;
        for (si, split) in self.splits.iter().enumerate() {
            let row: IndexMap<&str, u64> = self
                .classes
                .iter()
                .enumerate()
                .map(|(ci, c)| (c.as_str(), self.get(si, ci)))
                .collect();
            outer.serialize_entry(split, &row)?;
        }
        outer.end()
    }
}

/// Shared cost kernel. Totals are passed in so callers that maintain them
/// incrementally get bitwise the same value as a fresh evaluation.
fn cost_kernel(
    counts: &[u64],
    class_totals: &[u64],
    split_totals: &[u64],
    total: u64,
    ratios: &[f64],
    lambda: f64,
) -> f64 {
    let n_classes = class_totals.len();
    let mut cost = 0.0;
    for (s, &r) in ratios.iter().enumerate() {
        let row = &counts[s * n_classes..(s + 1) * n_classes];
        for (c, &t) in class_totals.iter().enumerate() {
            let dev = (row[c] as f64 - r * t as f64) / t.max(1) as f64;
            cost += dev * dev;
        }
    }
    if total > 0 {
        let n = total as f64;
        let mut size = 0.0;
        for (s, &r) in ratios.iter().enumerate() {
            let dev = (split_totals[s] as f64 - r * n) / n;
            size += dev * dev;
        }
        cost += lambda * size;
    }
    cost
}

fn cost_from_counts(counts: &[u64], n_splits: usize, n_classes: usize, ratios: &[f64], lambda: f64) -> f64 {
    let mut class_totals = vec![0u64; n_classes];
    let mut split_totals = vec![0u64; n_splits];
    for s in 0..n_splits {
        for c in 0..n_classes {
            let v = counts[s * n_classes + c];
            class_totals[c] += v;
            split_totals[s] += v;
        }
    }
    let total = split_totals.iter().sum();
    cost_kernel(counts, &class_totals, &split_totals, total, ratios, lambda)
}

/// Stratification objective for `counts` under explicit ratios; class and
/// record totals are taken from `counts` itself.
pub fn split_cost_with(counts: &CountTable, ratios: &[f64], lambda: f64) -> f64 {
    assert_eq!(counts.splits.len(), ratios.len(), "one ratio per split");
    cost_from_counts(
        &counts.counts,
        counts.splits.len(),
        counts.classes.len(),
        ratios,
        lambda,
    )
}

/// `Σ_s Σ_c ((n[s][c] − r_s·T_c)/max(T_c,1))² + λ·Σ_s ((N_s − r_s·N)/N)²`.
pub fn split_cost(counts: &CountTable, spec: &SplitSpec) -> f64 {
    split_cost_with(counts, &spec.ratios, spec.size_term_weight)
}

/// Record-to-split mapping with the groups that constrained it.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    /// record id → split name, in manifest order.
    pub assignment: IndexMap<String, String>,
    pub group_of: IndexMap<String, GroupKey>,
    /// `None` for assignments imposed from outside (see [`enforce_external_split`]).
    pub spec: Option<SplitSpec>,
    pub split_names: Vec<String>,
    pub achieved_counts: CountTable,
    pub cost: f64,
    pub warnings: Vec<String>,
    pub match_report: Option<MatchReport>,
}

/// One line of an assignment CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub record_id: String,
    #[serde(default)]
    pub group_key: String,
    pub split: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssignmentSidecar {
    pub spec: Option<SplitSpec>,
    pub split_names: Vec<String>,
    pub cost: f64,
    pub achieved_counts: IndexMap<String, IndexMap<String, u64>>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_report: Option<MatchReport>,
}

impl SplitAssignment {
    pub fn split_of(&self, record_id: &str) -> Option<&str> {
        self.assignment.get(record_id).map(String::as_str)
    }

    pub fn rows(&self) -> Vec<AssignmentRow> {
        self.assignment
            .iter()
            .map(|(rid, split)| AssignmentRow {
                record_id: rid.clone(),
                group_key: self.group_of.get(rid).map(|g| g.0.clone()).unwrap_or_default(),
                split: split.clone(),
            })
            .collect()
    }

    /// Records per split, in split order.
    pub fn split_sizes(&self) -> Vec<(String, u64)> {
        self.split_names
            .iter()
            .enumerate()
            .map(|(s, name)| (name.clone(), self.achieved_counts.split_total(s)))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        write_rows(&self.rows(), w)
    }

    pub fn sidecar(&self) -> AssignmentSidecar {
        let t = &self.achieved_counts;
        let achieved_counts = t
            .splits
            .iter()
            .enumerate()
            .map(|(s, split)| {
                let row = t
                    .classes
                    .iter()
                    .enumerate()
                    .map(|(c, class)| (class.clone(), t.get(s, c)))
                    .collect();
                (split.clone(), row)
            })
            .collect();
        AssignmentSidecar {
            spec: self.spec.clone(),
            split_names: self.split_names.clone(),
            cost: self.cost,
            achieved_counts,
            warnings: self.warnings.clone(),
            match_report: self.match_report.clone(),
        }
    }

    /// Write `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let f = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(f).map_err(|e| Error::csv(&csv_path, e))?;
        let json_path = dir.join(format!("{stem}.json"));
        let mut text = serde_json::to_string_pretty(&self.sidecar()).map_err(|e| Error::json(&json_path, e))?;
        text.push('\n');
        std::fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))
    }

    /// Rebuild an assignment from CSV rows and the manifest the rows refer to.
    /// Class counts come from the manifest; the cost is recomputed against
    /// `spec` when given, otherwise against the realized split fractions.
    pub fn from_rows(
        m: &UnifiedManifest,
        rows: &[AssignmentRow],
        spec: Option<SplitSpec>,
        split_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let class_of: HashMap<&str, &str> = m
            .records
            .iter()
            .map(|r| {
                r.canonical_class
                    .as_deref()
                    .map(|c| (r.record_id.as_str(), c))
                    .ok_or_else(|| Error::UnprojectedRecord(r.record_id.clone()))
            })
            .collect::<Result<_>>()?;
        let by_row: HashMap<&str, &AssignmentRow> = rows.iter().map(|r| (r.record_id.as_str(), r)).collect();
        if let Some(unknown) = rows.iter().find(|r| !class_of.contains_key(r.record_id.as_str())) {
            return Err(Error::UnknownRecord(unknown.record_id.clone()));
        }
        let mut names = split_names
            .or_else(|| spec.as_ref().map(|s| s.split_names.clone()))
            .unwrap_or_default();
        for r in rows {
            if !names.contains(&r.split) {
                names.push(r.split.clone());
            }
        }
        let classes = sorted_classes(class_of.values().copied());
        let mut table = CountTable::zeros(names.clone(), classes.clone());
        let class_idx = index_of(&classes);
        let split_idx = index_of(&names);
        let mut assignment = IndexMap::new();
        let mut group_of = IndexMap::new();
        for r in &m.records {
            if let Some(row) = by_row.get(r.record_id.as_str()) {
                let s = split_idx[row.split.as_str()];
                table.add(s, class_idx[class_of[r.record_id.as_str()]], 1);
                assignment.insert(r.record_id.clone(), row.split.clone());
                if !row.group_key.is_empty() {
                    group_of.insert(r.record_id.clone(), GroupKey(row.group_key.clone()));
                }
            }
        }
        let cost = match &spec {
            Some(spec) if spec.split_names == names => split_cost(&table, spec),
            _ => split_cost_with(&table, &realized_ratios(&table), default_lambda()),
        };
        Ok(Self {
            assignment,
            group_of,
            spec,
            split_names: names,
            achieved_counts: table,
            cost,
            warnings: Vec::new(),
            match_report: None,
        })
    }
}

pub fn write_rows<W: Write>(rows: &[AssignmentRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    if rows.is_empty() {
        out.write_record(["record_id", "group_key", "split"])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<AssignmentRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    for required in ["record_id", "split"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::MissingColumn {
                path: path.to_path_buf(),
                column: required.into(),
            });
        }
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::csv(path, e)))
        .collect()
}

pub fn read_sidecar(path: &Path) -> Result<AssignmentSidecar> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Restricts a manifest to the records assigned to one split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitFilter {
    pub split: String,
    records: HashSet<String>,
}

impl SplitFilter {
    pub fn from_rows(rows: &[AssignmentRow], split: &str) -> Self {
        Self {
            split: split.to_string(),
            records: rows
                .iter()
                .filter(|r| r.split == split)
                .map(|r| r.record_id.clone())
                .collect(),
        }
    }

    pub fn from_assignment(a: &SplitAssignment, split: &str) -> Self {
        Self::from_rows(&a.rows(), split)
    }

    pub fn keeps(&self, record_id: &str) -> bool {
        self.records.contains(record_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn sorted_classes<'a>(classes: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut v: Vec<String> = classes
        .collect::<HashSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect();
    v.sort();
    v
}

fn index_of(names: &[String]) -> HashMap<&str, usize> {
    names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
}

fn realized_ratios(table: &CountTable) -> Vec<f64> {
    let n = table.total().max(1) as f64;
    (0..table.splits.len())
        .map(|s| table.split_total(s) as f64 / n)
        .collect()
}

struct Group {
    key: GroupKey,
    records: Vec<usize>,
    /// sparse (class index, count)
    classes: Vec<(usize, u64)>,
    size: u64,
}

/// Records of a projected manifest bucketed into groups.
struct Grouped {
    classes: Vec<String>,
    record_class: Vec<usize>,
    groups: Vec<Group>,
}

fn group_records(m: &UnifiedManifest, policy: &GroupPolicy) -> Result<Grouped> {
    let mut labels = Vec::with_capacity(m.records.len());
    for r in &m.records {
        let c = r
            .canonical_class
            .as_deref()
            .ok_or_else(|| Error::UnprojectedRecord(r.record_id.clone()))?;
        labels.push(c);
    }
    let classes = sorted_classes(labels.iter().copied());
    let class_idx = index_of(&classes);
    let record_class: Vec<usize> = labels.iter().map(|c| class_idx[c]).collect();

    let mut by_key: HashMap<GroupKey, usize> = HashMap::new();
    let mut groups: Vec<Group> = Vec::new();
    for (i, r) in m.records.iter().enumerate() {
        let key = extract_group_key(r, policy)?;
        let g = *by_key.entry(key.clone()).or_insert_with(|| {
            groups.push(Group {
                key,
                records: Vec::new(),
                classes: Vec::new(),
                size: 0,
            });
            groups.len() - 1
        });
        let group = &mut groups[g];
        group.records.push(i);
        group.size += 1;
        let c = record_class[i];
        match group.classes.iter_mut().find(|(k, _)| *k == c) {
            Some((_, n)) => *n += 1,
            None => group.classes.push((c, 1)),
        }
    }
    for g in &mut groups {
        g.classes.sort_unstable();
    }
    Ok(Grouped {
        classes,
        record_class,
        groups,
    })
}

/// Greedy placement order: rarest class present first, then larger groups,
/// then a seeded per-group tiebreak.
fn placement_order(grouped: &Grouped, seed: u64) -> Vec<usize> {
    let n_classes = grouped.classes.len();
    let mut totals = vec![0u64; n_classes];
    for &c in &grouped.record_class {
        totals[c] += 1;
    }
    let mut by_rarity: Vec<usize> = (0..n_classes).collect();
    by_rarity.sort_by(|&a, &b| {
        totals[a]
            .cmp(&totals[b])
            .then_with(|| grouped.classes[a].cmp(&grouped.classes[b]))
    });
    let mut rank = vec![0usize; n_classes];
    for (r, &c) in by_rarity.iter().enumerate() {
        rank[c] = r;
    }
    let mut keyed: Vec<(usize, Reverse<u64>, u64, usize)> = grouped
        .groups
        .iter()
        .enumerate()
        .map(|(g, group)| {
            let rarest = group.classes.iter().map(|(c, _)| rank[*c]).min().unwrap_or(usize::MAX);
            (rarest, Reverse(group.size), rng::keyed(seed, group.key.as_str()), g)
        })
        .collect();
    keyed.sort_by(|a, b| {
        (a.0, a.1, a.2)
            .cmp(&(b.0, b.1, b.2))
            .then_with(|| grouped.groups[a.3].key.cmp(&grouped.groups[b.3].key))
    });
    keyed.into_iter().map(|k| k.3).collect()
}

struct State<'a> {
    n_classes: usize,
    ratios: &'a [f64],
    lambda: f64,
    counts: Vec<u64>,
    class_totals: Vec<u64>,
    split_totals: Vec<u64>,
    total: u64,
}

impl State<'_> {
    fn place(&mut self, group: &Group, s: usize) {
        for &(c, n) in &group.classes {
            self.counts[s * self.n_classes + c] += n;
        }
        self.split_totals[s] += group.size;
    }

    fn unplace(&mut self, group: &Group, s: usize) {
        for &(c, n) in &group.classes {
            self.counts[s * self.n_classes + c] -= n;
        }
        self.split_totals[s] -= group.size;
    }

    fn cost(&self) -> f64 {
        cost_kernel(
            &self.counts,
            &self.class_totals,
            &self.split_totals,
            self.total,
            self.ratios,
            self.lambda,
        )
    }
}

/// Greedy placement plus single-move descent. Returns the split index per group.
fn assign_groups(grouped: &Grouped, spec: &SplitSpec) -> (Vec<usize>, CountTable, f64) {
    let n_splits = spec.ratios.len();
    let n_classes = grouped.classes.len();
    let order = placement_order(grouped, spec.seed);
    let mut state = State {
        n_classes,
        ratios: &spec.ratios,
        lambda: spec.size_term_weight,
        counts: vec![0; n_splits * n_classes],
        class_totals: vec![0; n_classes],
        split_totals: vec![0; n_splits],
        total: 0,
    };
    let mut split_of = vec![usize::MAX; grouped.groups.len()];

    for &g in &order {
        let group = &grouped.groups[g];
        for &(c, n) in &group.classes {
            state.class_totals[c] += n;
        }
        state.total += group.size;
        let mut best: Option<(f64, f64, usize)> = None;
        for s in 0..n_splits {
            let fill = state.split_totals[s] as f64 / spec.ratios[s];
            state.place(group, s);
            let cost = state.cost();
            state.unplace(group, s);
            let better = match best {
                None => true,
                Some((bc, bf, _)) => match cost.partial_cmp(&bc).unwrap_or(Ordering::Equal) {
                    Ordering::Less => true,
                    Ordering::Equal => fill < bf,
                    Ordering::Greater => false,
                },
            };
            if better {
                best = Some((cost, fill, s));
            }
        }
        let (_, _, s) = best.expect("at least two splits");
        state.place(group, s);
        split_of[g] = s;
    }

    // Descent: move single groups while that strictly lowers the cost.
    let mut current = state.cost();
    loop {
        let mut improved = false;
        for &g in &order {
            let group = &grouped.groups[g];
            let from = split_of[g];
            state.unplace(group, from);
            let mut best = (current, from);
            for s in (0..n_splits).filter(|&s| s != from) {
                state.place(group, s);
                let cost = state.cost();
                state.unplace(group, s);
                if cost < best.0 {
                    best = (cost, s);
                }
            }
            state.place(group, best.1);
            if best.1 != from {
                split_of[g] = best.1;
                current = best.0;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }

    let table = CountTable {
        splits: spec.split_names.clone(),
        classes: grouped.classes.clone(),
        counts: state.counts.clone(),
    };
    let cost = split_cost(&table, spec);
    (split_of, table, cost)
}

fn build_assignment(
    m: &UnifiedManifest,
    grouped: &Grouped,
    split_of: &[usize],
    names: &[String],
) -> (IndexMap<String, String>, IndexMap<String, GroupKey>) {
    let mut record_group = vec![0usize; m.records.len()];
    for (g, group) in grouped.groups.iter().enumerate() {
        for &i in &group.records {
            record_group[i] = g;
        }
    }
    let mut assignment = IndexMap::with_capacity(m.records.len());
    let mut group_of = IndexMap::with_capacity(m.records.len());
    for (i, r) in m.records.iter().enumerate() {
        let g = record_group[i];
        assignment.insert(r.record_id.clone(), names[split_of[g]].clone());
        group_of.insert(r.record_id.clone(), grouped.groups[g].key.clone());
    }
    (assignment, group_of)
}

fn degenerate_warnings(spec: &SplitSpec, table: &CountTable) -> Vec<String> {
    let n = table.total() as f64;
    let mut warnings = Vec::new();
    for (s, name) in spec.split_names.iter().enumerate() {
        let target = spec.ratios[s] * n;
        if target < 1.0 && n > 0.0 {
            warnings.push(format!(
                "degenerate spec: split `{name}` targets {target:.3} records (< 1)"
            ));
        }
        if table.split_total(s) == 0 && n > 0.0 {
            warnings.push(format!("split `{name}` received no records"));
        }
    }
    warnings
}

/// Group-exclusive stratified split into `spec.split_names` at `spec.ratios`.
pub fn stratified_group_shuffle_split(m: &UnifiedManifest, spec: &SplitSpec) -> Result<SplitAssignment> {
    spec.validate()?;
    let grouped = group_records(m, &spec.group_policy)?;
    let (split_of, table, cost) = assign_groups(&grouped, spec);
    let (assignment, group_of) = build_assignment(m, &grouped, &split_of, &spec.split_names);
    let warnings = degenerate_warnings(spec, &table);
    Ok(SplitAssignment {
        assignment,
        group_of,
        spec: Some(spec.clone()),
        split_names: spec.split_names.clone(),
        achieved_counts: table,
        cost,
        warnings,
        match_report: None,
    })
}

/// Record-to-fold mapping; `split` holds the same data with folds named `fold<i>`.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: IndexMap<String, usize>,
    pub split: SplitAssignment,
}

impl FoldAssignment {
    pub fn rows(&self) -> Vec<AssignmentRow> {
        self.split.rows()
    }
}

pub fn fold_names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("fold{i}")).collect()
}

/// Group-exclusive stratified k-fold: a shuffle split with `k` equal ratios.
pub fn stratified_group_kfold(
    m: &UnifiedManifest,
    k: usize,
    seed: u64,
    group_policy: &GroupPolicy,
    lambda: f64,
) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidSpec(format!("k = {k}, need at least 2")));
    }
    let grouped = group_records(m, group_policy)?;
    if k > grouped.groups.len() {
        return Err(Error::KTooLarge {
            k,
            groups: grouped.groups.len(),
        });
    }
    let spec =
        SplitSpec::new(fold_names(k), vec![1.0 / k as f64; k], seed, group_policy.clone())?.with_lambda(lambda)?;
    let (split_of, table, cost) = assign_groups(&grouped, &spec);
    let (assignment, group_of) = build_assignment(m, &grouped, &split_of, &spec.split_names);
    let fold_of = assignment
        .iter()
        .map(|(rid, name)| {
            let idx = spec.split_names.iter().position(|n| n == name).expect("fold name");
            (rid.clone(), idx)
        })
        .collect();
    let warnings = degenerate_warnings(&spec, &table);
    Ok(FoldAssignment {
        k,
        fold_of,
        split: SplitAssignment {
            assignment,
            group_of,
            split_names: spec.split_names.clone(),
            spec: Some(spec),
            achieved_counts: table,
            cost,
            warnings,
            match_report: None,
        },
    })
}

/// Move whole groups from `from_split` to `to_split` until `from_split`
/// holds at most `target_from_fraction` of all assigned records. Each move
/// takes the group whose transfer leaves the lowest cost under the updated
/// ratios. Other splits are untouched.
pub fn rebalance(
    m: &UnifiedManifest,
    a: &SplitAssignment,
    from_split: &str,
    to_split: &str,
    target_from_fraction: f64,
) -> Result<SplitAssignment> {
    let names = &a.split_names;
    let from = names
        .iter()
        .position(|n| n == from_split)
        .ok_or_else(|| Error::UnknownSplit(from_split.to_string()))?;
    let to = names
        .iter()
        .position(|n| n == to_split)
        .ok_or_else(|| Error::UnknownSplit(to_split.to_string()))?;
    if from == to {
        return Err(Error::InvalidSpec("source and destination split are the same".into()));
    }
    let total = a.achieved_counts.total();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    let current = a.achieved_counts.split_total(from) as f64 / total as f64;
    if (current - target_from_fraction).abs() <= 1e-12 {
        return Ok(a.clone());
    }
    if target_from_fraction.is_nan() || target_from_fraction <= 0.0 || target_from_fraction > current {
        return Err(Error::UnreachableTarget(format!(
            "target fraction {target_from_fraction} must lie in (0, {current:.6}] for split `{from_split}`"
        )));
    }

    // updated ratios: the moved mass goes to the destination
    let mut ratios = match &a.spec {
        Some(spec) => spec.ratios.clone(),
        None => realized_ratios(&a.achieved_counts),
    };
    ratios[from] = target_from_fraction;
    ratios[to] = 1.0 - (0..ratios.len()).filter(|&s| s != to).map(|s| ratios[s]).sum::<f64>();
    let lambda = a.spec.as_ref().map_or(default_lambda(), |s| s.size_term_weight);
    let new_spec = match &a.spec {
        Some(spec) => {
            let mut s = spec.clone();
            s.ratios = ratios.clone();
            s.validate()?;
            Some(s)
        }
        None => None,
    };

    // groups currently in the source split, bucketed by class signature
    let class_idx = index_of(&a.achieved_counts.classes);
    let class_of: HashMap<&str, usize> = m
        .records
        .iter()
        .filter_map(|r| {
            r.canonical_class
                .as_deref()
                .map(|c| (r.record_id.as_str(), class_idx.get(c).copied()))
        })
        .filter_map(|(rid, c)| c.map(|c| (rid, c)))
        .collect();
    let mut members: IndexMap<GroupKey, Vec<&str>> = IndexMap::new();
    for (rid, split) in &a.assignment {
        if split != from_split {
            continue;
        }
        let key = a
            .group_of
            .get(rid)
            .cloned()
            .unwrap_or_else(|| GroupKey(format!("record:{rid}")));
        members.entry(key).or_default().push(rid.as_str());
    }
    let mut buckets: IndexMap<Vec<(usize, u64)>, Vec<GroupKey>> = IndexMap::new();
    for (key, rids) in &members {
        let mut sig: Vec<(usize, u64)> = Vec::new();
        for rid in rids {
            let c = *class_of.get(rid).ok_or_else(|| Error::UnknownRecord(rid.to_string()))?;
            match sig.iter_mut().find(|(k, _)| *k == c) {
                Some((_, n)) => *n += 1,
                None => sig.push((c, 1)),
            }
        }
        sig.sort_unstable();
        buckets.entry(sig).or_default().push(key.clone());
    }
    for keys in buckets.values_mut() {
        keys.reverse(); // pop() yields first-seen
    }

    let n_classes = a.achieved_counts.classes.len();
    let mut counts = a.achieved_counts.clone();
    let mut from_count = counts.split_total(from);
    let limit = target_from_fraction * total as f64;
    let mut moved: HashSet<GroupKey> = HashSet::new();
    let mut groups_left = members.len();
    while from_count as f64 > limit + 1e-9 {
        if groups_left <= 1 {
            return Err(Error::UnreachableTarget(format!(
                "split `{from_split}` would be emptied before reaching {target_from_fraction}"
            )));
        }
        let mut best: Option<(f64, usize)> = None;
        for (b, (sig, keys)) in buckets.iter().enumerate() {
            if keys.is_empty() {
                continue;
            }
            for &(c, n) in sig {
                counts.sub(from, c, n);
                counts.add(to, c, n);
            }
            let cost = cost_from_counts(counts.raw(), names.len(), n_classes, &ratios, lambda);
            for &(c, n) in sig {
                counts.add(from, c, n);
                counts.sub(to, c, n);
            }
            if best.is_none_or(|(bc, _)| cost < bc) {
                best = Some((cost, b));
            }
        }
        let (_, b) = best.expect("non-empty source split");
        let (sig, keys) = buckets.get_index_mut(b).expect("bucket");
        let key = keys.pop().expect("non-empty bucket");
        for &(c, n) in sig.iter() {
            counts.sub(from, c, n);
            counts.add(to, c, n);
            from_count -= n;
        }
        moved.insert(key);
        groups_left -= 1;
    }

    let mut out = a.clone();
    for (rid, split) in out.assignment.iter_mut() {
        if split == from_split {
            let key = a
                .group_of
                .get(rid)
                .cloned()
                .unwrap_or_else(|| GroupKey(format!("record:{rid}")));
            if moved.contains(&key) {
                *split = to_split.to_string();
            }
        }
    }
    out.cost = cost_from_counts(counts.raw(), names.len(), n_classes, &ratios, lambda);
    out.achieved_counts = counts;
    out.spec = new_spec;
    out.warnings.push(format!(
        "rebalanced {} group(s) from `{from_split}` to `{to_split}` (target {target_from_fraction})",
        moved.len()
    ));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnmatchedPolicy {
    ErrorOnUnmatched,
    PassthroughUnmatched,
}

/// Match key → split map supplied from outside (e.g. a challenge split).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSplit {
    entries: IndexMap<MatchKey, String>,
    split_names: Vec<String>,
}

impl ExternalSplit {
    /// Keys are normalized with [`normalize_filename_with`], so either bare
    /// keys or file names may be supplied.
    pub fn from_pairs<I, K, S>(pairs: I, case_insensitive: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (K, S)>,
        K: AsRef<str>,
        S: Into<String>,
    {
        let mut entries: IndexMap<MatchKey, String> = IndexMap::new();
        let mut split_names: Vec<String> = Vec::new();
        for (key, split) in pairs {
            let key = normalize_filename_with(key.as_ref(), case_insensitive);
            let split = split.into();
            if let Some(existing) = entries.get(&key) {
                if *existing != split {
                    return Err(Error::ConflictingExternalEntry {
                        key: key.0,
                        first: existing.clone(),
                        second: split,
                    });
                }
                continue;
            }
            if !split_names.contains(&split) {
                split_names.push(split.clone());
            }
            entries.insert(key, split);
        }
        if entries.is_empty() {
            return Err(Error::EmptyExternalSplit);
        }
        Ok(Self { entries, split_names })
    }

    /// CSV with header `match_key,split`.
    pub fn read_csv(path: &Path, case_insensitive: bool) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            match_key: String,
            split: String,
        }
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let rows: Vec<Row> = reader
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::csv(path, e))?;
        Self::from_pairs(rows.into_iter().map(|r| (r.match_key, r.split)), case_insensitive)
    }

    pub fn get(&self, key: &MatchKey) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn split_names(&self) -> &[String] {
        &self.split_names
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchCounts {
    pub matched: u64,
    pub unmatched: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchReport {
    pub per_dataset: IndexMap<String, MatchCounts>,
    /// Records left for a later splitting pass.
    pub unmatched_records: Vec<String>,
}

/// Assign every record whose filename key appears in `external` to that
/// split. Unmatched records are left unassigned (passthrough) or rejected.
pub fn enforce_external_split(
    m: &UnifiedManifest,
    external: &ExternalSplit,
    policy: UnmatchedPolicy,
    group_policy: &GroupPolicy,
    case_insensitive: bool,
) -> Result<SplitAssignment> {
    if external.is_empty() {
        return Err(Error::EmptyExternalSplit);
    }
    let mut first_by_key: HashMap<(&str, MatchKey), &str> = HashMap::new();
    let mut report = MatchReport::default();
    for d in &m.datasets {
        report.per_dataset.insert(d.dataset_id.clone(), MatchCounts::default());
    }
    let mut matched: Vec<(usize, &str)> = Vec::new();
    for (i, r) in m.records.iter().enumerate() {
        let key = normalize_filename_with(&r.file_path, case_insensitive);
        let entry = report.per_dataset.entry(r.dataset_id.clone()).or_default();
        match external.get(&key) {
            Some(split) => {
                if let Some(first) = first_by_key.insert((r.dataset_id.as_str(), key.clone()), &r.record_id) {
                    return Err(Error::AmbiguousMatch {
                        key: key.0,
                        dataset_id: r.dataset_id.clone(),
                        first: first.to_string(),
                        second: r.record_id.clone(),
                    });
                }
                entry.matched += 1;
                matched.push((i, split));
            }
            None => {
                entry.unmatched += 1;
                report.unmatched_records.push(r.record_id.clone());
            }
        }
    }
    if policy == UnmatchedPolicy::ErrorOnUnmatched && !report.unmatched_records.is_empty() {
        return Err(Error::UnmatchedRecords(report.unmatched_records));
    }

    let names = external.split_names().to_vec();
    let mut labels = Vec::with_capacity(matched.len());
    for &(i, _) in &matched {
        let r = &m.records[i];
        labels.push(
            r.canonical_class
                .as_deref()
                .ok_or_else(|| Error::UnprojectedRecord(r.record_id.clone()))?,
        );
    }
    let classes = sorted_classes(labels.iter().copied());
    let class_idx = index_of(&classes);
    let split_idx = index_of(&names);
    let mut table = CountTable::zeros(names.clone(), classes.clone());
    let mut assignment = IndexMap::with_capacity(matched.len());
    let mut group_of = IndexMap::with_capacity(matched.len());
    for (&(i, split), class) in matched.iter().zip(&labels) {
        let r = &m.records[i];
        table.add(split_idx[split], class_idx[class], 1);
        assignment.insert(r.record_id.clone(), split.to_string());
        group_of.insert(r.record_id.clone(), extract_group_key(r, group_policy)?);
    }
    let cost = split_cost_with(&table, &realized_ratios(&table), default_lambda());
    let mut warnings = Vec::new();
    if !report.unmatched_records.is_empty() {
        warnings.push(format!(
            "{} record(s) unmatched and left for a subsequent split",
            report.unmatched_records.len()
        ));
    }
    Ok(SplitAssignment {
        assignment,
        group_of,
        spec: None,
        split_names: names,
        achieved_counts: table,
        cost,
        warnings,
        match_report: Some(report),
    })
}
