//! Class-balanced sampling weights.
//!
//! Each record of class `c` gets `1/(C·n_c)`, where `C` is the number of
//! classes present and `n_c` the count of `c`. Weights sum to one and every
//! class carries mass `1/C`.

use std::io::Write;

use indexmap::IndexMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifest::UnifiedManifest;
use crate::numfmt::sig17;
use crate::splitter::SplitFilter;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightTable {
    /// record id → weight, in manifest order.
    pub weights: IndexMap<String, f64>,
    /// class id → summed weight, classes sorted.
    pub class_mass: IndexMap<String, f64>,
}

impl WeightTable {
    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    /// `record_id,weight` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["record_id", "weight"])?;
        for (rid, weight) in &self.weights {
            out.write_record([rid.as_str(), sig17(*weight).as_str()])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn compute_weights(m: &UnifiedManifest, split: Option<&SplitFilter>) -> Result<WeightTable> {
    let mut selected = Vec::new();
    for r in &m.records {
        if split.is_none_or(|f| f.keeps(&r.record_id)) {
            let class = r
                .canonical_class
                .as_deref()
                .ok_or_else(|| Error::UnprojectedRecord(r.record_id.clone()))?;
            selected.push((r.record_id.as_str(), class));
        }
    }
    if selected.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut counts: IndexMap<&str, u64> = IndexMap::new();
    for (_, c) in &selected {
        *counts.entry(c).or_default() += 1;
    }
    counts.sort_keys();
    let n_classes = counts.len() as f64;

    let weights: IndexMap<String, f64> = selected
        .iter()
        .map(|(rid, c)| (rid.to_string(), 1.0 / (n_classes * counts[c] as f64)))
        .collect();
    let mut class_mass: IndexMap<String, f64> = counts.keys().map(|c| (c.to_string(), 0.0)).collect();
    for ((_, c), w) in selected.iter().zip(weights.values()) {
        *class_mass.get_mut(*c).expect("class present") += w;
    }
    Ok(WeightTable { weights, class_mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::ImageRecord;

    fn manifest(classes: &[&str]) -> UnifiedManifest {
        let records = classes
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut r = ImageRecord::new("d", &format!("{i}.jpg"), c);
                r.canonical_class = Some(c.to_string());
                r
            })
            .collect();
        UnifiedManifest::new(Vec::new(), records)
    }

    #[test]
    fn balanced_classes() {
        let t = compute_weights(
            &manifest(&["A"; 5].iter().chain(&["B"; 5]).copied().collect::<Vec<_>>()),
            None,
        )
        .unwrap();
        assert!(t.weights.values().all(|w| (w - 0.1).abs() < 1e-15));
        assert_eq!(t.class_mass.values().copied().collect::<Vec<_>>(), vec![0.5, 0.5]);
    }

    #[test]
    fn three_to_one() {
        let t = compute_weights(&manifest(&["A", "A", "B", "A"]), None).unwrap();
        assert!((t.weights["d/0.jpg"] - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(t.weights["d/2.jpg"], 0.5);
        assert!((t.class_mass["A"] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_class_and_empty() {
        let t = compute_weights(&manifest(&["A"; 4]), None).unwrap();
        assert!(t.weights.values().all(|w| *w == 0.25));
        assert_eq!(t.class_mass["A"], 1.0);
        assert!(matches!(compute_weights(&manifest(&[]), None), Err(Error::EmptyInput)));
    }

    #[test]
    fn csv_rendering() {
        let t = compute_weights(&manifest(&["A", "A", "A", "B"]), None).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "record_id,weight\nd/0.jpg,0.16666666666666666\nd/1.jpg,0.16666666666666666\nd/2.jpg,0.16666666666666666\nd/3.jpg,0.50000000000000000\n"
        );
    }
}
