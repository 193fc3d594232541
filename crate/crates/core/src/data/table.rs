use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::Attr;

/// Column roles for [`load_table`]. Category maps are inferred when absent:
/// integer-valued columns are used as-is, anything else is indexed in sorted
/// order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableSchema {
    pub features: Vec<String>,
    pub label: String,
    pub attribute: String,
    pub label_map: Option<BTreeMap<String, usize>>,
    pub attribute_map: Option<BTreeMap<String, Attr>>,
    /// Overrides the class count implied by the labels seen.
    pub num_classes: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct LoadedTable {
    pub dataset: Dataset,
    pub label_map: BTreeMap<String, usize>,
    pub attribute_map: BTreeMap<String, Attr>,
}

fn table_err(path: &Path, row: usize, msg: impl Into<String>) -> Error {
    Error::Table {
        path: path.to_path_buf(),
        row,
        msg: msg.into(),
    }
}

fn infer_map(values: &[String]) -> BTreeMap<String, usize> {
    let distinct: BTreeSet<&String> = values.iter().collect();
    if distinct.iter().all(|v| v.parse::<usize>().is_ok()) {
        distinct.into_iter().map(|v| (v.clone(), v.parse().unwrap())).collect()
    } else {
        distinct.into_iter().enumerate().map(|(i, v)| (v.clone(), i)).collect()
    }
}

/// Row numbers in errors are 1-based file lines (the header is line 1).
pub fn load_table(path: impl AsRef<Path>, schema: &TableSchema) -> Result<LoadedTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => table_err(path, 1, format!("{other:?}")),
        })?;
    let header = reader.headers()?.clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| table_err(path, 1, format!("missing column `{name}`")))
    };
    if schema.features.is_empty() {
        return Err(Error::Config("table schema names no feature columns".into()));
    }
    let feature_cols = schema.features.iter().map(|f| column(f)).collect::<Result<Vec<_>>>()?;
    let label_col = column(&schema.label)?;
    let attr_col = column(&schema.attribute)?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = record
            .as_ref()
            .ok()
            .and_then(|r| r.position())
            .map_or(i + 2, |p| p.line() as usize);
        let record = record.map_err(|e| table_err(path, line, e.to_string()))?;
        let features = feature_cols
            .iter()
            .zip(&schema.features)
            .map(|(&c, name)| {
                let raw = record.get(c).unwrap_or("");
                raw.parse::<f64>()
                    .map_err(|_| table_err(path, line, format!("column `{name}`: cannot parse `{raw}` as a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        let label = record.get(label_col).unwrap_or("").to_string();
        let attr = record.get(attr_col).unwrap_or("").to_string();
        rows.push((line, features, label, attr));
    }

    let label_map = match &schema.label_map {
        Some(m) => m.clone(),
        None => infer_map(&rows.iter().map(|r| r.2.clone()).collect::<Vec<_>>()),
    };
    let attribute_map: BTreeMap<String, Attr> = match &schema.attribute_map {
        Some(m) => m.clone(),
        None => {
            let inferred = infer_map(&rows.iter().map(|r| r.3.clone()).collect::<Vec<_>>());
            if inferred.values().any(|&v| v > 1) {
                return Err(table_err(
                    path,
                    1,
                    format!(
                        "attribute column `{}` must be binary; declare a mapping",
                        schema.attribute
                    ),
                ));
            }
            inferred.into_iter().map(|(k, v)| (k, v as Attr)).collect()
        }
    };
    let num_classes = schema
        .num_classes
        .unwrap_or_else(|| label_map.values().max().map_or(0, |m| m + 1));

    let mut samples = Vec::with_capacity(rows.len());
    for (line, features, label, attr) in rows {
        let label = *label_map
            .get(&label)
            .ok_or_else(|| table_err(path, line, format!("unknown label category `{label}`")))?;
        if label >= num_classes {
            return Err(table_err(
                path,
                line,
                format!("label {label} out of range for {num_classes} classes"),
            ));
        }
        let attribute = *attribute_map
            .get(&attr)
            .ok_or_else(|| table_err(path, line, format!("unknown attribute category `{attr}`")))?;
        if attribute > 1 {
            return Err(table_err(path, line, format!("attribute {attribute} is not binary")));
        }
        samples.push(Sample {
            features,
            label,
            attribute,
        });
    }
    if samples.is_empty() {
        return Err(table_err(path, 1, "table has no data rows"));
    }
    Ok(LoadedTable {
        dataset: Dataset::new(samples, schema.features.len(), num_classes)?,
        label_map,
        attribute_map,
    })
}

/// Writes `f0..f{d-1},label,attribute` with round-trip float formatting.
pub fn save_table(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    })?;
    let mut header: Vec<String> = (0..ds.feature_dim()).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    header.push("attribute".into());
    w.write_record(&header)?;
    for s in ds.samples() {
        let mut row: Vec<String> = s.features.iter().map(|v| format!("{v:?}")).collect();
        row.push(s.label.to_string());
        row.push(s.attribute.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Category dictionary as `label.<name> = index` / `attribute.<name> = index`.
pub fn write_mapping_sidecar(path: impl AsRef<Path>, table: &LoadedTable) -> Result<PathBuf> {
    let path = path.as_ref().to_path_buf();
    let mut out = String::new();
    for (k, v) in &table.label_map {
        let _ = writeln!(out, "label.{k} = {v}");
    }
    for (k, v) in &table.attribute_map {
        let _ = writeln!(out, "attribute.{k} = {v}");
    }
    std::fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
