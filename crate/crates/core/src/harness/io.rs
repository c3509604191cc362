//! CSV persistence for result, summary and degradation tables.
//!
//! Floats use the shortest representation that parses back to the same
//! value, so write-then-read is lossless. Empty cells encode `None`.

use std::path::Path;
use std::str::FromStr;

use super::block::{BlockResult, BlockStatus, RESULT_COLUMNS};
use super::sweep::{MeanStd, SummaryRow};
use crate::error::{Error, Result};

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_table(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(header).map_err(&err)?;
    for row in rows {
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_results(rows: &[BlockResult], path: impl AsRef<Path>) -> Result<()> {
    let records = rows.iter().map(|r| {
        vec![
            r.target.clone(),
            r.filter_threshold.to_string(),
            r.classifier.clone(),
            r.family.to_string(),
            r.weighting.to_string(),
            r.run.to_string(),
            r.seed.to_string(),
            match r.status {
                BlockStatus::Ok => "ok".into(),
                BlockStatus::Skipped => "skipped".into(),
            },
            r.skip_reason.clone(),
            opt(r.n_classes),
            opt(r.n_train_samples),
            opt(r.cvcf),
            opt(r.ir),
            opt(r.necd),
            opt(r.accuracy),
            opt(r.macro_f1),
            opt(r.weighted_f1),
            opt(r.minority_recall),
            opt(r.training_seconds),
        ]
    });
    write_table(path.as_ref(), &RESULT_COLUMNS, records)
}

fn parse<T: FromStr>(row: usize, column: &str, text: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    text.parse().map_err(|e: T::Err| Error::MalformedRow {
        row,
        reason: format!("column '{column}': {e}"),
    })
}

fn parse_opt<T: FromStr>(row: usize, column: &str, text: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if text.is_empty() {
        Ok(None)
    } else {
        parse(row, column, text).map(Some)
    }
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<BlockResult>> {
    let path = path.as_ref();
    let err = csv_err(path);
    let mut reader = csv::Reader::from_path(path).map_err(&err)?;
    let header = reader.headers().map_err(&err)?.clone();
    if header.iter().ne(RESULT_COLUMNS.iter().copied()) {
        return Err(Error::Schema(format!(
            "{}: expected columns {}",
            path.display(),
            RESULT_COLUMNS.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(&err)?;
        let row = i + 1;
        let f = |j: usize| rec.get(j).unwrap_or("");
        let c = |j: usize| RESULT_COLUMNS[j];
        out.push(BlockResult {
            target: f(0).to_string(),
            filter_threshold: parse(row, c(1), f(1))?,
            classifier: f(2).to_string(),
            family: parse(row, c(3), f(3))?,
            weighting: parse(row, c(4), f(4))?,
            run: parse(row, c(5), f(5))?,
            seed: parse(row, c(6), f(6))?,
            status: match f(7) {
                "ok" => BlockStatus::Ok,
                "skipped" => BlockStatus::Skipped,
                other => {
                    return Err(Error::MalformedRow {
                        row,
                        reason: format!("unknown status '{other}'"),
                    })
                }
            },
            skip_reason: f(8).to_string(),
            n_classes: parse_opt(row, c(9), f(9))?,
            n_train_samples: parse_opt(row, c(10), f(10))?,
            cvcf: parse_opt(row, c(11), f(11))?,
            ir: parse_opt(row, c(12), f(12))?,
            necd: parse_opt(row, c(13), f(13))?,
            accuracy: parse_opt(row, c(14), f(14))?,
            macro_f1: parse_opt(row, c(15), f(15))?,
            weighted_f1: parse_opt(row, c(16), f(16))?,
            minority_recall: parse_opt(row, c(17), f(17))?,
            training_seconds: parse_opt(row, c(18), f(18))?,
        });
    }
    Ok(out)
}

const SUMMARY_METRICS: [&str; 5] = [
    "accuracy",
    "macro_f1",
    "weighted_f1",
    "minority_recall",
    "training_seconds",
];

fn metric_cells(s: &SummaryRow) -> [Option<MeanStd>; 5] {
    [
        s.accuracy,
        s.macro_f1,
        s.weighted_f1,
        s.minority_recall,
        s.training_seconds,
    ]
}

pub fn write_summary(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    let mut header: Vec<String> = [
        "target",
        "filter_threshold",
        "classifier",
        "n_runs",
        "n_ok",
        "cvcf",
        "ir",
        "necd",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for m in SUMMARY_METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let records = rows.iter().map(|s| {
        let mut rec = vec![
            s.target.clone(),
            s.filter_threshold.to_string(),
            s.classifier.clone(),
            s.n_runs.to_string(),
            s.n_ok.to_string(),
            opt(s.cvcf),
            opt(s.ir),
            opt(s.necd),
        ];
        for cell in metric_cells(s) {
            rec.push(opt(cell.map(|m| m.mean)));
            rec.push(opt(cell.map(|m| m.std)));
        }
        rec
    });
    write_table(path.as_ref(), &header, records)
}

/// Per classifier, the mean metrics against the imbalance of each block,
/// ordered by classifier then increasing imbalance ratio.
pub fn write_degradation(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    let mut ordered: Vec<&SummaryRow> = rows.iter().filter(|s| s.weighted_f1.is_some()).collect();
    ordered.sort_by(|a, b| {
        (&a.classifier, &a.target)
            .cmp(&(&b.classifier, &b.target))
            .then(
                a.ir.unwrap_or(f64::NAN)
                    .total_cmp(&b.ir.unwrap_or(f64::NAN)),
            )
            .then(a.filter_threshold.cmp(&b.filter_threshold))
    });
    let header = [
        "classifier",
        "target",
        "filter_threshold",
        "cvcf",
        "ir",
        "necd",
        "weighted_f1_mean",
        "weighted_f1_std",
        "macro_f1_mean",
        "accuracy_mean",
    ];
    let records = ordered.into_iter().map(|s| {
        vec![
            s.classifier.clone(),
            s.target.clone(),
            s.filter_threshold.to_string(),
            opt(s.cvcf),
            opt(s.ir),
            opt(s.necd),
            opt(s.weighted_f1.map(|m| m.mean)),
            opt(s.weighted_f1.map(|m| m.std)),
            opt(s.macro_f1.map(|m| m.mean)),
            opt(s.accuracy.map(|m| m.mean)),
        ]
    });
    write_table(path.as_ref(), &header, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Family;
    use crate::weighting::WeightingStrategy;

    fn row(run: usize, ok: bool) -> BlockResult {
        BlockResult {
            target: "y, with comma".into(),
            filter_threshold: 5,
            classifier: "gbt-effective".into(),
            family: Family::Gbt,
            weighting: WeightingStrategy::Effective,
            run,
            seed: u64::MAX - run as u64,
            status: if ok {
                BlockStatus::Ok
            } else {
                BlockStatus::Skipped
            },
            skip_reason: if ok {
                String::new()
            } else {
                "only 1 class left; \"quoted\"".into()
            },
            n_classes: ok.then_some(7),
            n_train_samples: ok.then_some(600),
            cvcf: ok.then_some(0.1 + 0.2),
            ir: ok.then_some(1.0 / 3.0),
            necd: ok.then_some(f64::MIN_POSITIVE),
            accuracy: ok.then_some(0.12345678901234568),
            macro_f1: ok.then_some(1e-300),
            weighted_f1: ok.then_some(0.9999999999999999),
            minority_recall: ok.then_some(0.0),
            training_seconds: ok.then_some(1e-9),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let rows = vec![row(0, true), row(1, false), row(2, true)];
        write_results(&rows, &p).unwrap();
        assert_eq!(read_results(&p).unwrap(), rows);
    }

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_results(&[], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.trim_end(), RESULT_COLUMNS.join(","));
        assert!(read_results(&p).unwrap().is_empty());
    }

    #[test]
    fn missing_file_names_the_path() {
        let e = read_results("/nonexistent/dir/r.csv").unwrap_err();
        assert!(e.to_string().contains("/nonexistent/dir/r.csv"));
    }
}
