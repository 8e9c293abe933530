//! CSV and JSON serialization of result tables.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detectors::Scheme;
use crate::error::{Error, Result};
use crate::experiment::{Metadata, ResultRow, ResultTable};

pub const CSV_HEADER: [&str; 10] = [
    "scheme",
    "M",
    "K",
    "beta",
    "drop",
    "sum_se",
    "sum_se_stderr",
    "detequiv_sum_se",
    "trials",
    "seed",
];

/// Round to 9 significant digits.
pub fn sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| sig9(v).to_string()).unwrap_or_default()
}

#[derive(Serialize, Deserialize)]
struct CsvRecord {
    scheme: Scheme,
    #[serde(rename = "M")]
    antennas: usize,
    #[serde(rename = "K")]
    users_per_cell: usize,
    beta: usize,
    drop: usize,
    sum_se: Option<f64>,
    sum_se_stderr: Option<f64>,
    detequiv_sum_se: Option<f64>,
    trials: usize,
    seed: u64,
}

pub fn write_csv<W: Write>(table: &ResultTable, out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &table.rows {
        w.write_record([
            r.scheme.name().to_string(),
            r.antennas.to_string(),
            r.users_per_cell.to_string(),
            r.beta.to_string(),
            r.drop.to_string(),
            cell(r.sum_se),
            cell(r.sum_se_stderr),
            cell(r.detequiv_sum_se),
            r.trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(table: &ResultTable) -> String {
    let mut buf = Vec::new();
    write_csv(table, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

/// Parse CSV rows. The CSV carries no metadata, so the table gets the seed of
/// its first row and an empty timestamp.
pub fn read_csv_str(text: &str) -> std::result::Result<ResultTable, csv::Error> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rd.deserialize() {
        let r: CsvRecord = rec?;
        rows.push(ResultRow {
            scheme: r.scheme,
            antennas: r.antennas,
            users_per_cell: r.users_per_cell,
            beta: r.beta,
            drop: r.drop,
            sum_se: r.sum_se,
            sum_se_stderr: r.sum_se_stderr,
            detequiv_sum_se: r.detequiv_sum_se,
            trials: r.trials,
            seed: r.seed,
            per_cell_sum_se: Vec::new(),
            error: None,
        });
    }
    let seed = rows.first().map_or(0, |r| r.seed);
    Ok(ResultTable {
        metadata: Metadata {
            seed,
            version: format!("v{}", env!("CARGO_PKG_VERSION")),
            timestamp: String::new(),
        },
        rows,
    })
}

pub fn json_string(table: &ResultTable) -> String {
    let mut rounded = table.clone();
    for r in &mut rounded.rows {
        r.sum_se = r.sum_se.map(sig9);
        r.sum_se_stderr = r.sum_se_stderr.map(sig9);
        r.detequiv_sum_se = r.detequiv_sum_se.map(sig9);
        r.per_cell_sum_se.iter_mut().for_each(|x| *x = sig9(*x));
    }
    serde_json::to_string_pretty(&rounded).expect("result table always serializes")
}

pub fn read_json_str(text: &str) -> serde_json::Result<ResultTable> {
    serde_json::from_str(text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    /// Guess from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }

    pub fn render(self, table: &ResultTable) -> String {
        match self {
            Format::Csv => csv_string(table),
            Format::Json => json_string(table),
        }
    }
}

pub fn write_table(table: &ResultTable, path: &Path, format: Format) -> Result<()> {
    std::fs::write(path, format.render(table)).map_err(|e| Error::io(path, e))
}

pub fn read_table(path: &Path) -> Result<ResultTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let format_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    match Format::from_path(path) {
        Format::Csv => read_csv_str(&text).map_err(|e| format_err(e.to_string())),
        Format::Json => read_json_str(&text).map_err(|e| format_err(e.to_string())),
    }
}
