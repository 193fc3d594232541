use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::ReportFormat;
use super::run::{Predictions, RunResult, RESULT_FIELDS};
use crate::error::{Error, Result};
use crate::fairness::{Criterion, EoddAggregation, FateReport, MetricsReport};
use crate::Attr;

/// One row of the long-form record file.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRecord {
    pub method: String,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

/// Files written by [`emit_report`].
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub records: PathBuf,
    pub summary: PathBuf,
    pub scatter: PathBuf,
    pub curves: PathBuf,
}

const SUMMARY_METRICS: [(&str, &str); 7] = [
    ("accuracy", "Accuracy↑"),
    ("precision", "Precision↑"),
    ("recall", "Recall↑"),
    ("f1", "F1↑"),
    ("eopp0", "EOpp0↓"),
    ("eopp1", "EOpp1↓"),
    ("eodd", "Eodd↓"),
];
const FATE_COLUMNS: [(Criterion, &str); 3] = [
    (Criterion::EOpp0, "E_0↑"),
    (Criterion::EOpp1, "E_1↑"),
    (Criterion::EOdd, "E_2↑"),
];

fn writer_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

fn fate_cell(baseline: bool, v: Option<f64>) -> String {
    match (baseline, v) {
        (true, _) => "/".into(),
        (false, Some(v)) => pct(v),
        (false, None) => "n/a".into(),
    }
}

/// Long-form rows: `method,seed,metric,value` with shortest round-trip floats.
pub fn write_long_form(results: &[RunResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(writer_err(path))?;
    w.write_record(["method", "seed", "metric", "value"])?;
    for r in results {
        for s in &r.seeds {
            for f in RESULT_FIELDS {
                let v = s.get(f).expect("known field");
                w.write_record([r.label.as_str(), &s.seed.to_string(), f, &format!("{v:?}")])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_long_form(path: impl AsRef<Path>) -> Result<Vec<LongRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(writer_err(path))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |msg: String| Error::Table {
            path: path.to_path_buf(),
            row: i + 2,
            msg,
        };
        if rec.len() != 4 {
            return Err(bad(format!("expected 4 fields, got {}", rec.len())));
        }
        out.push(LongRecord {
            method: rec[0].to_string(),
            seed: rec[1].parse().map_err(|_| bad(format!("bad seed `{}`", &rec[1])))?,
            metric: rec[2].to_string(),
            value: rec[3].parse().map_err(|_| bad(format!("bad value `{}`", &rec[3])))?,
        });
    }
    Ok(out)
}

/// Aggregate table in the paper's column order, values ×10⁻² at 2 decimals.
/// `fates` pairs run labels with FATE; runs without an entry are baselines
/// and print `/`.
pub fn summary_table(results: &[RunResult], fates: &[(String, FateReport)], format: ReportFormat) -> String {
    let mut header: Vec<String> = vec!["Method".into()];
    header.extend(SUMMARY_METRICS.iter().map(|(_, h)| h.to_string()));
    header.extend(FATE_COLUMNS.iter().map(|(_, h)| h.to_string()));

    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            let fate = fates.iter().find(|(l, _)| *l == r.label).map(|(_, f)| f);
            let mut row = vec![r.label.clone()];
            for (f, _) in SUMMARY_METRICS {
                row.push(match format {
                    ReportFormat::Markdown => format!("{} ± {}", pct(r.mean(f)), pct(r.std(f))),
                    ReportFormat::Csv => format!("{},{}", pct(r.mean(f)), pct(r.std(f))),
                });
            }
            for (c, _) in FATE_COLUMNS {
                row.push(fate_cell(fate.is_none(), fate.and_then(|f| f.get(c))));
            }
            row
        })
        .collect();

    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
            for row in rows {
                let _ = writeln!(out, "| {} |", row.join(" | "));
            }
        }
        ReportFormat::Csv => {
            let mut cols = vec!["method".to_string()];
            for (f, _) in SUMMARY_METRICS {
                cols.push(format!("{f}_mean"));
                cols.push(format!("{f}_std"));
            }
            cols.extend(["fate_eopp0", "fate_eopp1", "fate_eodd"].map(String::from));
            let _ = writeln!(out, "{}", cols.join(","));
            for row in rows {
                let _ = writeln!(out, "{}", row.join(","));
            }
        }
    }
    out
}

/// Writes the record, summary, scatter and curve files into `dir`.
pub fn emit_report(
    results: &[RunResult],
    fates: &[(String, FateReport)],
    format: ReportFormat,
    dir: impl AsRef<Path>,
) -> Result<ReportFiles> {
    let dir = dir.as_ref();
    if results.is_empty() {
        return Err(Error::EmptyInput("report"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles {
        records: dir.join("records.csv"),
        summary: dir.join(match format {
            ReportFormat::Markdown => "summary.md",
            ReportFormat::Csv => "summary.csv",
        }),
        scatter: dir.join("scatter.csv"),
        curves: dir.join("curves.csv"),
    };
    write_long_form(results, &files.records)?;
    fs::write(&files.summary, summary_table(results, fates, format)).map_err(|e| Error::io(&files.summary, e))?;

    let mut w = csv::Writer::from_path(&files.scatter).map_err(writer_err(&files.scatter))?;
    w.write_record(["method", "accuracy", "eopp0", "eopp1", "eodd"])?;
    for r in results {
        let mut row = vec![r.label.clone()];
        row.extend(["accuracy", "eopp0", "eopp1", "eodd"].map(|f| format!("{:?}", r.mean(f))));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(&files.scatter, e))?;

    let mut w = csv::Writer::from_path(&files.curves).map_err(writer_err(&files.curves))?;
    w.write_record([
        "method",
        "seed",
        "model",
        "epoch",
        "train_loss",
        "val_accuracy",
        "selected",
    ])?;
    for r in results {
        for s in &r.seeds {
            for m in &s.models {
                let model = m.group.map_or("shared".to_string(), |g| format!("group{g}"));
                for (e, (l, a)) in m.curves.train_loss.iter().zip(&m.curves.val_accuracy).enumerate() {
                    w.write_record([
                        r.label.clone(),
                        s.seed.to_string(),
                        model.clone(),
                        e.to_string(),
                        format!("{l:?}"),
                        format!("{a:?}"),
                        u8::from(e == m.best_epoch).to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(&files.curves, e))?;
    Ok(files)
}

/// `sample_id,label,pred,attr,p_0,...,p_{C-1}`
pub fn write_predictions(p: &Predictions, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let classes = p.probs.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_path(path).map_err(writer_err(path))?;
    let mut header: Vec<String> = ["sample_id", "label", "pred", "attr"].map(String::from).to_vec();
    header.extend((0..classes).map(|c| format!("p_{c}")));
    w.write_record(&header)?;
    for i in 0..p.preds.len() {
        let mut row = vec![
            p.sample_ids[i].to_string(),
            p.labels[i].to_string(),
            p.preds[i].to_string(),
            p.attrs[i].to_string(),
        ];
        row.extend(p.probs[i].iter().map(|v| format!("{v:?}")));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Predictions> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(writer_err(path))?;
    let header = r.headers()?.clone();
    let fixed = ["sample_id", "label", "pred", "attr"];
    if header.len() < 4 || header.iter().take(4).ne(fixed) {
        return Err(Error::Table {
            path: path.to_path_buf(),
            row: 1,
            msg: format!("header must start with {}", fixed.join(",")),
        });
    }
    let classes = header.len() - 4;
    let mut p = Predictions::default();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let bad = |msg: String| Error::Table {
            path: path.to_path_buf(),
            row,
            msg,
        };
        let int = |j: usize| {
            rec[j]
                .parse::<usize>()
                .map_err(|_| bad(format!("column `{}`: bad integer `{}`", fixed[j], &rec[j])))
        };
        p.sample_ids.push(int(0)?);
        p.labels.push(int(1)?);
        p.preds.push(int(2)?);
        let a = int(3)?;
        if a > 1 {
            return Err(bad(format!("attribute {a} is not binary")));
        }
        p.attrs.push(a as Attr);
        p.probs.push(
            (0..classes)
                .map(|c| {
                    rec[4 + c]
                        .parse::<f64>()
                        .map_err(|_| bad(format!("column p_{c}: bad number `{}`", &rec[4 + c])))
                })
                .collect::<Result<_>>()?,
        );
    }
    Ok(p)
}

/// Metrics from a prediction file. The class count is the number of
/// probability columns, or `max(label, pred) + 1` when there are none.
pub fn evaluate_predictions(
    path: impl AsRef<Path>,
    num_classes: Option<usize>,
    aggregation: EoddAggregation,
) -> Result<MetricsReport> {
    let p = read_predictions(path)?;
    let c = num_classes.unwrap_or_else(|| match p.probs.first().map_or(0, Vec::len) {
        0 => p.labels.iter().chain(&p.preds).max().map_or(0, |m| m + 1).max(2),
        n => n,
    });
    MetricsReport::compute(&p.preds, &p.labels, &p.attrs, c, aggregation)
}
