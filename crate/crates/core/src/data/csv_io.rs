use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::dataset::Dataset;
use crate::error::{Error, Result};

/// Which columns of a CSV file hold features and which holds the label.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    /// Feature column names in order; `None` takes every non-label column.
    pub features: Option<Vec<String>>,
    pub label: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            features: None,
            label: "label".to_string(),
        }
    }
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Parse a headed CSV. Row numbers in errors count data rows from 1.
/// Labels are re-indexed densely: numerically when every label is an
/// integer, lexicographically otherwise.
pub fn read_csv<R: Read>(input: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let label_col = header
        .iter()
        .position(|h| *h == schema.label)
        .ok_or_else(|| Error::Schema(format!("label column '{}' not in header", schema.label)))?;
    let feature_cols: Vec<usize> = match &schema.features {
        Some(names) => names
            .iter()
            .map(|name| {
                header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::Schema(format!("feature column '{name}' not in header")))
            })
            .collect::<Result<_>>()?,
        None => (0..header.len()).filter(|&i| i != label_col).collect(),
    };
    if feature_cols.is_empty() {
        return Err(Error::Schema("no feature columns".into()));
    }

    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        for &c in &feature_cols {
            let cell = record.get(c).unwrap_or("");
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                column: header[c].clone(),
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: header[c].clone(),
                    message: format!("'{cell}' is not finite"),
                });
            }
            values.push(v);
        }
        let label = record.get(label_col).ok_or_else(|| Error::Parse {
            row,
            column: schema.label.clone(),
            message: "missing label".into(),
        })?;
        raw_labels.push(label.trim().to_string());
    }
    if raw_labels.is_empty() {
        return Err(Error::invalid("csv has no data rows"));
    }

    let all_integer = raw_labels.iter().all(|l| l.parse::<i64>().is_ok());
    let mut distinct: Vec<&String> = raw_labels.iter().collect();
    if all_integer {
        distinct.sort_by_key(|l| l.parse::<i64>().unwrap());
    } else {
        distinct.sort();
    }
    distinct.dedup();
    let index: BTreeMap<&String, usize> = distinct.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let labels = raw_labels.iter().map(|l| index[l]).collect();

    let dim = feature_cols.len();
    let n = raw_labels.len();
    let features = DMatrix::from_column_slice(dim, n, &values);
    Dataset::new(features, labels, distinct.len())
}

/// Header `f0,…,f{dim−1},label`; floats in shortest round-trip form.
pub fn write_csv<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::InvalidState(format!("csv write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..ds.dim()).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(to_err)?;
    for (col, &label) in ds.features().column_iter().zip(ds.labels()) {
        let mut row: Vec<String> = col.iter().map(|v| v.to_string()).collect();
        row.push(label.to_string());
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::InvalidState(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_fixture() {
        let text = "f0,f1,label\n1.5,2,cat\n-3,0.25,dog\n4,5e-1,cat\n";
        let ds = read_csv(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(ds.features(), &DMatrix::from_row_slice(2, 3, &[1.5, -3.0, 4.0, 2.0, 0.25, 0.5]));
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.num_classes(), 2);
    }

    #[test]
    fn numeric_labels_are_ordered_numerically() {
        let text = "x,label\n0,10\n1,2\n2,7\n";
        let ds = read_csv(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(ds.labels(), &[2, 0, 1]);
    }

    #[test]
    fn parse_error_names_row() {
        let text = "f0,f1,label\n1,2,0\n3,abc,1\n5,6,0\n";
        match read_csv(text.as_bytes(), &CsvSchema::default()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "f1");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_label_column() {
        let text = "f0,y\n1,0\n";
        let schema = CsvSchema::default();
        assert!(matches!(read_csv(text.as_bytes(), &schema), Err(Error::Schema(_))));
    }

    #[test]
    fn explicit_feature_columns() {
        let text = "a,b,label,c\n1,2,0,3\n4,5,1,6\n";
        let schema = CsvSchema {
            features: Some(vec!["c".into(), "a".into()]),
            label: "label".into(),
        };
        let ds = read_csv(text.as_bytes(), &schema).unwrap();
        assert_eq!(ds.features(), &DMatrix::from_row_slice(2, 2, &[3.0, 6.0, 1.0, 4.0]));
    }

    #[test]
    fn export_round_trip() {
        let f = DMatrix::from_row_slice(2, 3, &[0.1, 1e-300, -7.25, 3.0, 2.0 / 3.0, 0.0]);
        let ds = Dataset::new(f, vec![1, 0, 2], 3).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert_eq!(back, ds);
    }
}
