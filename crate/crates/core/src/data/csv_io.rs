use std::path::Path;

use super::{Dataset, FeatureRecord};
use crate::{Error, Result};

/// Reads `id,label,<feature>...`. Empty cells, `NA`, and non-finite numbers
/// (`nan`, `inf`) are missing values. Labels are non-negative class indices;
/// the class count is one more than the largest label seen.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    load(path.as_ref(), None)
}

/// Like [`load_csv`] but with a fixed class count; larger labels are errors.
pub fn load_csv_with_classes(path: impl AsRef<Path>, num_classes: usize) -> Result<Dataset> {
    load(path.as_ref(), Some(num_classes))
}

fn load(path: &Path, num_classes: Option<usize>) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let header = reader
        .headers()
        .map_err(|e| csv_err(e, 1))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    if header.len() < 3 || header[0] != "id" || header[1] != "label" {
        return Err(Error::Parse {
            row: 1,
            message: "header must be id,label,<feature names...>".into(),
        });
    }
    let feature_names = header[2..].to_vec();

    let mut records = Vec::new();
    let mut max_label = 0;
    for (k, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_err(e, k + 2))?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(k + 2);
        if row.len() != header.len() {
            return Err(Error::Parse {
                row: line,
                message: format!("expected {} columns, found {}", header.len(), row.len()),
            });
        }
        let label: usize = row[1].parse().map_err(|_| Error::Parse {
            row: line,
            message: format!("unknown label '{}': labels must be class indices", &row[1]),
        })?;
        if let Some(n) = num_classes {
            if label >= n {
                return Err(Error::Parse {
                    row: line,
                    message: format!("unknown label {label}: model has {n} classes"),
                });
            }
        }
        max_label = max_label.max(label);
        let features = row
            .iter()
            .skip(2)
            .zip(&feature_names)
            .map(|(cell, name)| parse_cell(cell, name, line))
            .collect::<Result<Vec<_>>>()?;
        records.push(FeatureRecord {
            id: row[0].to_string(),
            label,
            features,
        });
    }
    let classes = num_classes.unwrap_or(max_label + 1);
    let class_names = (0..classes).map(|c| c.to_string()).collect();
    Dataset::new(records, feature_names, class_names)
}

fn parse_cell(cell: &str, name: &str, line: usize) -> Result<Option<f64>> {
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    let v: f64 = cell.parse().map_err(|_| Error::Parse {
        row: line,
        message: format!("non-numeric value '{cell}' in feature '{name}'"),
    })?;
    Ok(v.is_finite().then_some(v))
}

fn csv_err(e: csv::Error, row: usize) -> Error {
    Error::Parse {
        row,
        message: e.to_string(),
    }
}

pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| to_io(path, e))?;
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend(dataset.feature_names.iter().cloned());
    w.write_record(&header).map_err(|e| to_io(path, e))?;
    for r in &dataset.records {
        let mut row = vec![r.id.clone(), r.label.to_string()];
        row.extend(r.features.iter().map(|v| v.map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row).map_err(|e| to_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a `feature_name,group_name` modality map, preserving row order.
pub fn load_modality_map(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader.headers().map_err(|e| csv_err(e, 1))?.clone();
    if header.len() != 2 || &header[0] != "feature_name" || &header[1] != "group_name" {
        return Err(Error::Parse {
            row: 1,
            message: "modality map header must be feature_name,group_name".into(),
        });
    }
    reader
        .records()
        .enumerate()
        .map(|(k, row)| {
            let row = row.map_err(|e| csv_err(e, k + 2))?;
            Ok((row[0].to_string(), row[1].to_string()))
        })
        .collect()
}

pub fn write_modality_map(map: &[(String, String)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| to_io(path, e))?;
    w.write_record(["feature_name", "group_name"]).map_err(|e| to_io(path, e))?;
    for (f, g) in map {
        w.write_record([f, g]).map_err(|e| to_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn to_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}
