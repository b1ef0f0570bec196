use std::path::Path;

use crate::error::{Error, Result};

/// Vote counts for the scores 1..=10.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AvaLabel {
    pub counts: [u64; 10],
}

impl AvaLabel {
    pub fn new(counts: [u64; 10]) -> Self {
        AvaLabel { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// `Σ s·n_s / Σ n_s` over s = 1..=10.
pub fn ava_weighted_mean(label: &AvaLabel) -> Result<f64> {
    let total = label.total();
    if total == 0 {
        return Err(Error::InvalidLabel("score histogram has no votes".into()));
    }
    let weighted: f64 = label
        .counts
        .iter()
        .enumerate()
        .map(|(i, &n)| (i + 1) as f64 * n as f64)
        .sum();
    Ok(weighted / total as f64)
}

/// Reads `image_id,count_1,…,count_10` rows; a header row is required.
pub fn read_ava_csv(path: impl AsRef<Path>) -> Result<Vec<(String, AvaLabel)>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != 11 {
            return Err(Error::InvalidLabel(format!(
                "{}: row {} has {} fields, expected 11",
                path.display(),
                line + 2,
                record.len()
            )));
        }
        let mut counts = [0u64; 10];
        for (slot, field) in counts.iter_mut().zip(record.iter().skip(1)) {
            *slot = field.trim().parse().map_err(|_| {
                Error::InvalidLabel(format!(
                    "{}: row {}: bad count {field:?}",
                    path.display(),
                    line + 2
                ))
            })?;
        }
        out.push((record[0].to_string(), AvaLabel::new(counts)));
    }
    Ok(out)
}

pub fn write_ava_csv(path: impl AsRef<Path>, rows: &[(String, AvaLabel)]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["image_id".to_string()];
    header.extend((1..=10).map(|s| format!("count_{s}")));
    writer.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (id, label) in rows {
        let mut rec = vec![id.clone()];
        rec.extend(label.counts.iter().map(u64::to_string));
        writer.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Input(format!("{}: {e}", path.display()))
}
