use std::path::Path;

use super::FeatureVector;
use crate::{Error, Result};

/// One exported embedding: `id, label, f0, f1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    pub label: Option<String>,
    pub feature: FeatureVector,
}

/// Writes records as CSV. Floats use the shortest round-trip representation,
/// so reading the file back is lossless.
pub fn write_feature_csv(path: impl AsRef<Path>, records: &[FeatureRecord]) -> Result<()> {
    let dim = records.first().map_or(0, |r| r.feature.dim());
    if records.iter().any(|r| r.feature.dim() != dim) {
        return Err(Error::invalid("feature records differ in dimension"));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.id.clone(), r.label.clone().unwrap_or_default()];
        row.extend(r.feature.values().iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() < 3 {
            return Err(Error::format("feature csv", "rows need id, label and values"));
        }
        let values = rec
            .iter()
            .skip(2)
            .map(|s| s.parse::<f64>().map_err(|e| Error::format("feature csv", e)))
            .collect::<Result<Vec<_>>>()?;
        let label = Some(rec[1].to_string()).filter(|l| !l.is_empty());
        out.push(FeatureRecord {
            id: rec[0].to_string(),
            label,
            feature: FeatureVector::new(values)?,
        });
    }
    Ok(out)
}
