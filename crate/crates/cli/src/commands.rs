use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};

use gicurate_core::adapters::{load_collection, Layout};
use gicurate_core::audit::{audit_group_integrity, detect_overlap_with};
use gicurate_core::fixtures::{self, Preset};
use gicurate_core::manifest::SourceDigest;
use gicurate_core::metrics::{write_curve_csv, EvalOptions};
use gicurate_core::splitter::{read_rows, read_sidecar, ExternalSplit, SplitFilter, UnmatchedPolicy};
use gicurate_core::{
    evaluate, ingest, merge_manifests, project, rebalance, stratified_group_kfold, stratified_group_shuffle_split,
    summarize, validate_manifest, GroupPolicy, MappingProfile, PredictionSet, SplitAssignment, SplitSpec, Taxonomy,
    UnifiedManifest,
};

use crate::{
    AuditArgs, Command, EnforceArgs, EvaluateArgs, FixturesArgs, IngestArgs, KfoldArgs, ManifestInput, MapArgs,
    MergeArgs, OverlapArgs, RebalanceArgs, SplitArgs, SplitFilterArgs, SummarizeArgs, Unmatched, WeightsArgs,
};

pub enum Outcome {
    Success,
    /// The command ran but its check did not pass.
    Failed,
}

pub fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Merge(a) => cmd_merge(a),
        Command::Map(a) => cmd_map(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Split(a) => cmd_split(a),
        Command::Kfold(a) => cmd_kfold(a),
        Command::Rebalance(a) => cmd_rebalance(a),
        Command::EnforceSplit(a) => cmd_enforce(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Overlap(a) => cmd_overlap(a),
        Command::Weights(a) => cmd_weights(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Fixtures(a) => cmd_fixtures(a),
    }
}

fn load_one(path: &Path) -> Result<UnifiedManifest> {
    let (m, warnings) = UnifiedManifest::load(path)?;
    for w in warnings {
        warn!("{}: {w}", path.display());
    }
    info!("loaded {} records from {}", m.len(), path.display());
    Ok(m)
}

fn load_manifests(input: &ManifestInput) -> Result<UnifiedManifest> {
    let mut all = input
        .manifests
        .iter()
        .map(|p| load_one(p))
        .collect::<Result<Vec<_>>>()?;
    if all.len() == 1 {
        return Ok(all.pop().expect("one manifest"));
    }
    Ok(merge_manifests(all)?)
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    create_parent(path)?;
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let bytes = json_bytes(value)?;
    match out {
        Some(path) => write_file(path, &bytes),
        None => Ok(std::io::stdout().write_all(&bytes)?),
    }
}

fn csv_to_file(path: &Path, write: impl FnOnce(BufWriter<File>) -> csv::Result<()>) -> Result<()> {
    create_parent(path)?;
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write(BufWriter::new(f)).with_context(|| format!("writing {}", path.display()))
}

fn group_policy(chain: &str) -> Result<GroupPolicy> {
    GroupPolicy::parse(chain).context("--group-chain")
}

fn report_warnings(warnings: &[String]) {
    for w in warnings {
        warn!("{w}");
    }
}

fn cmd_ingest(a: IngestArgs) -> Result<Outcome> {
    let configs = load_collection(&a.collection)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for config in &configs {
        let mut ingested = ingest(config)?;
        report_warnings(&ingested.warnings);
        if config.layout == Layout::CsvManifest {
            let csv_path = config.root.join(&config.csv_file);
            ingested
                .manifest
                .provenance
                .sources
                .push(SourceDigest::of_file(&csv_path)?);
        }
        let path = a.out.join(format!("{}.jsonl", config.dataset_id));
        ingested.manifest.save(&path)?;
        println!("{}\t{}", config.dataset_id, ingested.manifest.len());
    }
    Ok(Outcome::Success)
}

fn cmd_merge(a: MergeArgs) -> Result<Outcome> {
    let mut inputs = Vec::new();
    for path in &a.input.manifests {
        let mut m = load_one(path)?;
        m.provenance.sources = vec![SourceDigest::of_file(path)?];
        inputs.push(m);
    }
    let merged = merge_manifests(inputs)?;
    let report = validate_manifest(&merged);
    if !report.is_empty() {
        for v in &report.violations {
            eprintln!("{:?}: {}", v.kind, v.detail);
        }
        eprintln!(
            "merged manifest has {} violation(s); nothing written",
            report.violations.len()
        );
        return Ok(Outcome::Failed);
    }
    merged.save(&a.out)?;
    for (dataset, n) in merged.dataset_counts() {
        println!("{dataset}\t{n}");
    }
    println!("total\t{}", merged.len());
    Ok(Outcome::Success)
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.summary.json"))
}

fn cmd_map(a: MapArgs) -> Result<Outcome> {
    let m = load_manifests(&a.input)?;
    let taxonomy = Taxonomy::load(&a.taxonomy)?;
    let profile = MappingProfile::load(&a.profile)?;
    profile.validate(&taxonomy)?;
    let projection = project(&m, &taxonomy, &profile)?;
    projection.manifest.save(&a.out)?;
    write_file(&summary_path(&a.out), &json_bytes(&projection.summary)?)?;
    println!(
        "kept {} of {} records ({} excluded, {} without target ancestor)",
        projection.summary.kept,
        projection.summary.input_records,
        projection.summary.dropped_excluded,
        projection.summary.dropped_no_ancestor
    );
    Ok(Outcome::Success)
}

fn cmd_summarize(a: SummarizeArgs) -> Result<Outcome> {
    let m = load_manifests(&a.input)?;
    let classes = match &a.profile {
        Some(p) => MappingProfile::load(p)?.target_classes.clone(),
        None => {
            let mut v: Vec<String> = m
                .records
                .iter()
                .filter_map(|r| r.canonical_class.clone())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            v.dedup();
            v
        }
    };
    let table = summarize(&m, &classes)?;
    match &a.out {
        Some(path) => csv_to_file(path, |w| table.write_csv(w))?,
        None => table.write_csv(std::io::stdout().lock())?,
    }
    Ok(Outcome::Success)
}

fn parse_ratios(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("--ratios: `{s}` is not a number"))
        })
        .collect()
}

fn save_assignment(a: &SplitAssignment, out: &Path) -> Result<()> {
    a.save(out, "assignment")?;
    report_warnings(&a.warnings);
    for (name, n) in a.split_sizes() {
        println!("{name}\t{n}");
    }
    println!("cost\t{}", a.cost);
    Ok(())
}

fn cmd_split(a: SplitArgs) -> Result<Outcome> {
    let m = load_manifests(&a.input)?;
    let ratios = parse_ratios(&a.ratios)?;
    let names = if a.split_names.is_empty() {
        SplitSpec::default_names(ratios.len())
    } else {
        a.split_names.clone()
    };
    let spec = SplitSpec::new(names, ratios, a.seed, group_policy(&a.grouping.group_chain)?)?.with_lambda(a.lambda)?;
    let assignment = stratified_group_shuffle_split(&m, &spec)?;
    save_assignment(&assignment, &a.out)?;
    Ok(Outcome::Success)
}

fn cmd_kfold(a: KfoldArgs) -> Result<Outcome> {
    let m = load_manifests(&a.input)?;
    let folds = stratified_group_kfold(&m, a.k, a.seed, &group_policy(&a.grouping.group_chain)?, a.lambda)?;
    save_assignment(&folds.split, &a.out)?;
    Ok(Outcome::Success)
}

fn cmd_rebalance(a: RebalanceArgs) -> Result<Outcome> {
    let m = load_manifests(&a.input)?;
    let rows = read_rows(&a.assignment)?;
    let sidecar_path = a.assignment.with_extension("json");
    let (spec, names) = if sidecar_path.is_file() {
        let side = read_sidecar(&sidecar_path)?;
        (side.spec, Some(side.split_names))
    } else {
        (None, None)
    };
    let current = SplitAssignment::from_rows(&m, &rows, spec, names)?;
    let moved = rebalance(&m, &current, &a.from, &a.to, a.target)?;
    save_assignment(&moved, &a.out)?;
    Ok(Outcome::Success)
}

fn cmd_enforce(a: EnforceArgs) -> Result<Outcome> {
    let m = load_manifests(&a.input)?;
    let external = ExternalSplit::read_csv(&a.external, a.case_insensitive)?;
    let policy = match a.unmatched {
        Unmatched::Error => UnmatchedPolicy::ErrorOnUnmatched,
        Unmatched::Passthrough => UnmatchedPolicy::PassthroughUnmatched,
    };
    let assignment = gicurate_core::enforce_external_split(
        &m,
        &external,
        policy,
        &group_policy(&a.grouping.group_chain)?,
        a.case_insensitive,
    )?;
    save_assignment(&assignment, &a.out)?;
    if let Some(report) = &assignment.match_report {
        for (dataset, c) in &report.per_dataset {
            println!("{dataset}\tmatched {}\tunmatched {}", c.matched, c.unmatched);
        }
        if !report.unmatched_records.is_empty() {
            let rest: std::collections::HashSet<&str> = report.unmatched_records.iter().map(String::as_str).collect();
            let remainder = m.filtered(|r| rest.contains(r.record_id.as_str()));
            remainder.save(&a.out.join("unmatched.jsonl"))?;
        }
    }
    Ok(Outcome::Success)
}

fn cmd_audit(a: AuditArgs) -> Result<Outcome> {
    let m = load_manifests(&a.input)?;
    let mut rows = Vec::new();
    for path in &a.assignments {
        rows.extend(read_rows(path)?);
    }
    let report = audit_group_integrity(&m, &rows, &group_policy(&a.grouping.group_chain)?)?;
    report_warnings(&report.warnings);
    emit_json(&report, a.out.as_deref())?;
    if report.passed {
        eprintln!("audit passed");
        Ok(Outcome::Success)
    } else {
        eprintln!("audit failed: {} violation(s)", report.violations.len());
        Ok(Outcome::Failed)
    }
}

fn cmd_overlap(a: OverlapArgs) -> Result<Outcome> {
    if a.manifests.len() != 2 {
        crate::usage_error(format!(
            "--manifest must be given exactly twice for overlap (got {})",
            a.manifests.len()
        ));
    }
    let left = load_one(&a.manifests[0])?;
    let right = load_one(&a.manifests[1])?;
    let report = detect_overlap_with(&left, &right, a.case_insensitive);
    report_warnings(&report.warnings);
    emit_json(&report, a.out.as_deref())?;
    eprintln!("{} overlapping pair(s)", report.pairs.len());
    if a.strict && !report.is_empty() {
        return Ok(Outcome::Failed);
    }
    Ok(Outcome::Success)
}

fn split_filter(args: &SplitFilterArgs) -> Result<Option<SplitFilter>> {
    match (&args.assignment, &args.split_name) {
        (Some(path), Some(name)) => {
            let rows = read_rows(path)?;
            let filter = SplitFilter::from_rows(&rows, name);
            if filter.is_empty() {
                bail!("--split-name `{name}` selects no records of {}", path.display());
            }
            Ok(Some(filter))
        }
        _ => Ok(None),
    }
}

fn cmd_weights(a: WeightsArgs) -> Result<Outcome> {
    let m = load_manifests(&a.input)?;
    let filter = split_filter(&a.filter)?;
    let table = gicurate_core::compute_weights(&m, filter.as_ref())?;
    csv_to_file(&a.out, |w| table.write_csv(w))?;
    for (class, mass) in &table.class_mass {
        info!("{class}: mass {mass}");
    }
    println!(
        "{} weights over {} classes",
        table.weights.len(),
        table.class_mass.len()
    );
    Ok(Outcome::Success)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<Outcome> {
    let m = load_manifests(&a.input)?;
    let preds = PredictionSet::read_csv(&a.pred)?;
    let filter = split_filter(&a.filter)?;
    let expected = match &a.profile {
        Some(p) => Some(MappingProfile::load(p)?.target_classes.clone()),
        None => None,
    };
    let opts = EvalOptions {
        split: filter.as_ref(),
        expected_classes: expected.as_deref(),
        match_by_filename: a.match_by_filename,
        case_insensitive: a.case_insensitive,
    };
    let report = evaluate(&preds, &m, &opts)?;
    report_warnings(&report.warnings);

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_file(&a.out.join("report.json"), &json_bytes(&report)?)?;
    csv_to_file(&a.out.join("confusion.csv"), |w| report.confusion.write_csv(w))?;
    for (class, curve) in &report.roc_curves.per_class {
        csv_to_file(&a.out.join(format!("roc_{class}.csv")), |w| {
            write_curve_csv(&curve.0, w)
        })?;
    }
    if let Some(curve) = &report.roc_curves.micro {
        csv_to_file(&a.out.join("roc_micro.csv"), |w| write_curve_csv(&curve.0, w))?;
    }
    if let Some(curve) = &report.roc_curves.macro_avg {
        csv_to_file(&a.out.join("roc_macro.csv"), |w| write_curve_csv(&curve.0, w))?;
    }
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6}"));
    println!("records\t{}", report.n_records);
    println!("balanced_accuracy\t{:.6}", report.balanced_accuracy);
    println!("macro_f1\t{:.6}", report.macro_f1);
    println!("weighted_f1\t{:.6}", report.weighted_f1);
    println!("macro_auc\t{}", show(report.macro_auc));
    println!("micro_auc\t{}", show(report.micro_auc));
    println!("macro_map\t{}", show(report.macro_map));
    println!("combined\t{}", show(report.combined));
    Ok(Outcome::Success)
}

fn cmd_fixtures(a: FixturesArgs) -> Result<Outcome> {
    let preset: Preset = a.preset.parse()?;
    let fixture = fixtures::generate(preset, a.seed)?;
    let written = fixture.write(&a.out)?;
    info!("wrote {} files under {}", written.len(), a.out.display());
    for (dataset, n) in &fixture.meta.dataset_counts {
        println!("{dataset}\t{n}");
    }
    println!("total\t{}", fixture.meta.total_records);
    Ok(Outcome::Success)
}
