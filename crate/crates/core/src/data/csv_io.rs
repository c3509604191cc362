use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use super::{ColumnKind, ColumnRole, ColumnSchema, Dataset, RawDataset, RawFeature, RawValues};
use crate::error::{Error, Result};

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "NA"
}

/// Reads a CSV file described by `schema`.
///
/// Empty cells and the literal `NA` are treated as missing. Rows whose label
/// is missing are skipped; class ids are assigned in order of first
/// appearance.
pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<RawDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &ColumnSchema) -> Result<RawDataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Schema(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let position: HashMap<&str, usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();
    for spec in &schema.columns {
        if !position.contains_key(spec.name.as_str()) {
            return Err(Error::Schema(format!(
                "header lacks column '{}'",
                spec.name
            )));
        }
    }
    for h in &header {
        if schema.get(h).is_none() {
            return Err(Error::Schema(format!(
                "column '{h}' is not described by the schema"
            )));
        }
    }

    let label_spec = schema.label_column().expect("validated");
    let label_idx = position[label_spec.name.as_str()];
    let feature_specs: Vec<_> = schema
        .columns
        .iter()
        .filter(|c| c.role == ColumnRole::Feature)
        .collect();

    let mut features: Vec<RawFeature> = feature_specs
        .iter()
        .map(|spec| RawFeature {
            name: spec.name.clone(),
            kind: spec.kind,
            values: match spec.kind {
                ColumnKind::Categorical => RawValues::Categorical(Vec::new()),
                ColumnKind::Continuous | ColumnKind::Indicator => RawValues::Numeric(Vec::new()),
            },
        })
        .collect();

    let mut class_names: Vec<String> = Vec::new();
    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut skipped = 0usize;

    for (n, record) in rdr.records().enumerate() {
        let row = n + 1;
        let record = record.map_err(|e| Error::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        let label = record.get(label_idx).unwrap_or("");
        if is_missing(label) {
            skipped += 1;
            continue;
        }
        let label = label.trim();
        let id = match class_ids.get(label) {
            Some(&id) => id,
            None => {
                let id = class_names.len();
                class_ids.insert(label.to_string(), id);
                class_names.push(label.to_string());
                id
            }
        };
        labels.push(id);

        for (spec, feature) in feature_specs.iter().zip(features.iter_mut()) {
            let cell = record.get(position[spec.name.as_str()]).unwrap_or("");
            match &mut feature.values {
                RawValues::Numeric(v) => {
                    if is_missing(cell) {
                        v.push(None);
                    } else {
                        let x: f64 = cell.trim().parse().map_err(|_| Error::MalformedRow {
                            row,
                            reason: format!("column '{}': '{}' is not a number", spec.name, cell),
                        })?;
                        if !x.is_finite() {
                            return Err(Error::MalformedRow {
                                row,
                                reason: format!("column '{}': non-finite value", spec.name),
                            });
                        }
                        v.push(Some(x));
                    }
                }
                RawValues::Categorical(v) => {
                    v.push((!is_missing(cell)).then(|| cell.trim().to_string()));
                }
            }
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} row(s) with a missing label");
    }
    Ok(RawDataset {
        features,
        labels,
        class_names,
        label_name: label_spec.name.clone(),
    })
}

pub(super) fn write_dataset(data: &Dataset, path: &Path, label_name: &str) -> Result<()> {
    let wrap = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.push(label_name);
    w.write_record(&header).map_err(wrap)?;
    for (i, row) in data.features().rows().into_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        rec.push(data.class_names()[data.labels()[i]].clone());
        w.write_record(&rec).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(text: &str) -> ColumnSchema {
        ColumnSchema::from_toml_str(text).unwrap()
    }

    const SCHEMA: &str = r#"
        [[column]]
        name = "x"
        [[column]]
        name = "c"
        kind = "categorical"
        [[column]]
        name = "y"
        role = "label"
    "#;

    #[test]
    fn labels_in_first_appearance_order() {
        let csv = "x,c,y\n1,r,a\n2,g,b\n3,r,a\n";
        let raw = read_csv(csv.as_bytes(), &schema(SCHEMA)).unwrap();
        assert_eq!(raw.class_names, vec!["a", "b"]);
        assert_eq!(raw.labels, vec![0, 1, 0]);
    }

    #[test]
    fn empty_and_na_cells_are_missing() {
        let csv = "x,c,y\n,r,a\nNA,NA,b\n3,r,a\n";
        let raw = read_csv(csv.as_bytes(), &schema(SCHEMA)).unwrap();
        assert_eq!(raw.n_rows(), 3);
        assert_eq!(
            raw.features[0].values,
            RawValues::Numeric(vec![None, None, Some(3.0)])
        );
        assert!(raw.features[1].values.is_missing(1));
    }

    #[test]
    fn header_missing_label_column_is_an_error() {
        let csv = "x,c\n1,r\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &schema(SCHEMA)),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn unknown_header_column_is_an_error() {
        let csv = "x,c,y,extra\n1,r,a,0\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &schema(SCHEMA)),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn malformed_rows_report_their_number() {
        let csv = "x,c,y\n1,r,a\nfoo,r,b\n";
        match read_csv(csv.as_bytes(), &schema(SCHEMA)) {
            Err(Error::MalformedRow { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
        let ragged = "x,c,y\n1,r,a\n1,r\n";
        assert!(matches!(
            read_csv(ragged.as_bytes(), &schema(SCHEMA)),
            Err(Error::MalformedRow { row: 2, .. })
        ));
    }

    #[test]
    fn rows_with_missing_labels_are_skipped() {
        let csv = "x,c,y\n1,r,a\n2,g,\n3,r,b\n";
        let raw = read_csv(csv.as_bytes(), &schema(SCHEMA)).unwrap();
        assert_eq!(raw.labels, vec![0, 1]);
    }
}
