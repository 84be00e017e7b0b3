mod common;

use std::collections::{BTreeMap, HashMap};

use proptest::prelude::*;

use gicurate_core::splitter::{fold_names, CountTable};
use gicurate_core::{
    rebalance, split_cost, stratified_group_kfold, stratified_group_shuffle_split, Error, GroupPolicy, SplitAssignment,
    SplitSpec, UnifiedManifest,
};

use common::{from_groups, oracle_cost, projected, splits_per_group};

fn groups_strategy(max_groups: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    (2usize..=5).prop_flat_map(move |n_classes| {
        prop::collection::vec(prop::collection::vec(0..n_classes, 1..=5), 1..=max_groups)
    })
}

fn ratios_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1u32..=10, 2..=4).prop_map(|w| {
        let sum: u32 = w.iter().sum();
        w.iter().map(|&x| x as f64 / sum as f64).collect()
    })
}

fn spec(ratios: &[f64], seed: u64) -> SplitSpec {
    SplitSpec::new(
        SplitSpec::default_names(ratios.len()),
        ratios.to_vec(),
        seed,
        GroupPolicy::default(),
    )
    .unwrap()
}

fn table_rows(t: &CountTable) -> Vec<Vec<u64>> {
    (0..t.splits.len())
        .map(|s| (0..t.classes.len()).map(|c| t.get(s, c)).collect())
        .collect()
}

/// Every single-group move, evaluated with the library objective.
fn best_single_move(m: &UnifiedManifest, a: &SplitAssignment, s: &SplitSpec) -> f64 {
    let t = &a.achieved_counts;
    let class_idx: HashMap<&str, usize> = t.classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let split_idx: HashMap<&str, usize> = t.splits.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut groups: BTreeMap<&str, (usize, Vec<usize>)> = BTreeMap::new();
    for r in &m.records {
        let g = a.group_of[&r.record_id].as_str();
        let entry = groups
            .entry(g)
            .or_insert((split_idx[a.assignment[&r.record_id].as_str()], vec![0; t.classes.len()]));
        entry.1[class_idx[r.canonical_class.as_deref().unwrap()]] += 1;
    }
    let mut best = f64::INFINITY;
    for (from, counts) in groups.values() {
        for to in (0..t.splits.len()).filter(|to| to != from) {
            let mut moved = t.clone();
            for (c, &n) in counts.iter().enumerate() {
                moved.sub(*from, c, n as u64);
                moved.add(to, c, n as u64);
            }
            best = best.min(split_cost(&moved, s));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn exclusive_complete_and_locally_optimal(groups in groups_strategy(50), ratios in ratios_strategy(), seed in any::<u64>()) {
        let m = from_groups(&groups);
        let s = spec(&ratios, seed);
        let a = stratified_group_shuffle_split(&m, &s).unwrap();

        prop_assert_eq!(a.assignment.len(), m.len());
        for r in &m.records {
            prop_assert!(a.assignment.contains_key(&r.record_id));
        }
        let per_group = splits_per_group(&m, |rid| a.split_of(rid));
        prop_assert!(per_group.values().all(|s| s.len() == 1));

        prop_assert_eq!(a.cost, split_cost(&a.achieved_counts, &s));
        let oracle = oracle_cost(&table_rows(&a.achieved_counts), &ratios, 1.0);
        prop_assert!((a.cost - oracle).abs() < 1e-12, "{} vs {}", a.cost, oracle);
        prop_assert!(best_single_move(&m, &a, &s) >= a.cost);
    }

    #[test]
    fn deterministic(groups in groups_strategy(30), seed in any::<u64>()) {
        let m = from_groups(&groups);
        let s = spec(&[0.7, 0.3], seed);
        prop_assert_eq!(stratified_group_shuffle_split(&m, &s).unwrap(), stratified_group_shuffle_split(&m, &s).unwrap());
    }

    #[test]
    fn record_order_does_not_matter(groups in groups_strategy(30), seed in any::<u64>()) {
        let m = from_groups(&groups);
        let mut reversed = m.clone();
        reversed.records.reverse();
        let s = spec(&[0.8, 0.2], seed);
        let a = stratified_group_shuffle_split(&m, &s).unwrap();
        let b = stratified_group_shuffle_split(&reversed, &s).unwrap();
        for (rid, split) in &a.assignment {
            prop_assert_eq!(split, &b.assignment[rid]);
        }
        prop_assert_eq!(a.cost, b.cost);
    }

    #[test]
    fn kfold_matches_equal_ratio_split(groups in groups_strategy(40), k in 2usize..=5, seed in any::<u64>()) {
        let m = from_groups(&groups);
        let n_groups = groups.len();
        match stratified_group_kfold(&m, k, seed, &GroupPolicy::default(), 1.0) {
            Err(Error::KTooLarge { .. }) => prop_assert!(k > n_groups),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
            Ok(f) => {
                let s = SplitSpec::new(fold_names(k), vec![1.0 / k as f64; k], seed, GroupPolicy::default()).unwrap();
                let a = stratified_group_shuffle_split(&m, &s).unwrap();
                prop_assert_eq!(f.split.cost, a.cost);
                let per_group = splits_per_group(&m, |rid| f.split.split_of(rid));
                prop_assert!(per_group.values().all(|s| s.len() == 1));
                prop_assert_eq!(f.fold_of.len(), m.len());
            }
        }
    }

    #[test]
    fn divisible_singletons_are_exact(per_class in prop::collection::vec(1u64..=6, 2..=5), seed in any::<u64>(), which in 0usize..3) {
        let (ratios, unit): (Vec<f64>, u64) = match which {
            0 => (vec![0.8, 0.2], 5),
            1 => (vec![1.0 / 3.0; 3], 3),
            _ => (vec![0.2; 5], 5),
        };
        let mut rows = Vec::new();
        for (c, n) in per_class.iter().enumerate() {
            for _ in 0..n * unit {
                rows.push((format!("c{c}"), None));
            }
        }
        let m = projected(&rows);
        let s = SplitSpec::new(SplitSpec::default_names(ratios.len()), ratios.clone(), seed, GroupPolicy::default()).unwrap();
        let a = stratified_group_shuffle_split(&m, &s).unwrap();
        prop_assert_eq!(a.cost, 0.0);
        for (c, n) in per_class.iter().enumerate() {
            for (si, r) in ratios.iter().enumerate() {
                let want = (r * (n * unit) as f64).round() as u64;
                prop_assert_eq!(a.achieved_counts.get(si, c), want);
            }
        }
    }

    #[test]
    fn rebalance_only_moves_whole_groups_one_way(groups in groups_strategy(40), seed in any::<u64>()) {
        let m = from_groups(&groups);
        let a = stratified_group_shuffle_split(&m, &spec(&[0.6, 0.4], seed)).unwrap();
        let total = m.len() as f64;
        let current = a.achieved_counts.split_total(1) as f64 / total;
        let target = current * 0.5;
        match rebalance(&m, &a, "val", "train", target) {
            Ok(b) => {
                prop_assert!(b.achieved_counts.split_total(1) as f64 <= target * total + 1e-9);
                for (rid, split) in &a.assignment {
                    if split == "train" {
                        prop_assert_eq!(&b.assignment[rid], "train");
                    }
                }
                let per_group = splits_per_group(&m, |rid| b.split_of(rid));
                prop_assert!(per_group.values().all(|s| s.len() == 1));
                prop_assert_eq!(b.cost, split_cost(&b.achieved_counts, b.spec.as_ref().unwrap()));
            }
            Err(Error::UnreachableTarget(_)) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}

#[test]
fn ten_and_ten_split_eight_two() {
    let rows: Vec<_> = (0..20)
        .map(|i| (if i < 10 { "A" } else { "B" }.to_string(), None))
        .collect();
    let m = projected(&rows);
    for seed in 0..20 {
        let a = stratified_group_shuffle_split(&m, &spec(&[0.8, 0.2], seed)).unwrap();
        assert_eq!(a.achieved_counts.by_name("val", "A"), Some(2));
        assert_eq!(a.achieved_counts.by_name("val", "B"), Some(2));
        assert_eq!(a.cost, 0.0);
    }
}

#[test]
fn rare_class_spread_before_common() {
    // two rare-class patients must not both land in the small split
    let mut rows = Vec::new();
    for p in 0..2 {
        rows.push(("rare".to_string(), Some(format!("R{p}"))));
    }
    for i in 0..40 {
        rows.push(("common".to_string(), Some(format!("C{}", i / 2))));
    }
    let m = projected(&rows);
    let a = stratified_group_shuffle_split(&m, &spec(&[0.5, 0.5], 3)).unwrap();
    assert_eq!(a.achieved_counts.by_name("train", "rare"), Some(1));
    assert_eq!(a.achieved_counts.by_name("val", "rare"), Some(1));
}
