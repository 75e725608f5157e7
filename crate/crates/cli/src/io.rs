use std::fs;
use std::io::Write;
use std::path::Path;

use esac_core::DataMatrix;

use crate::CliError;

/// Reads a CSV with one row per time point and one column per series.
///
/// A first row with no numeric field is taken as a header.
pub fn read_matrix(path: &Path) -> Result<DataMatrix, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_matrix(&text)
}

pub fn parse_matrix(text: &str) -> Result<DataMatrix, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut p = None;
    let mut n = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse(e.to_string()))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if line == 0 && record.iter().all(|f| f.parse::<f64>().is_err()) {
            p = Some(record.len());
            continue;
        }
        let width = *p.get_or_insert(record.len());
        if record.len() != width {
            return Err(CliError::Parse(format!(
                "row {} has {} fields, expected {width}",
                line + 1,
                record.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Parse(format!("row {}, column {}: {field:?} is not a number", line + 1, col + 1))
            })?;
            values.push(v);
        }
        n += 1;
    }
    let p = p.ok_or_else(|| CliError::Parse("input is empty".into()))?;
    DataMatrix::from_time_major(p, n, values).map_err(CliError::from_input)
}

/// Writes the matrix back in the same layout, without a header.
pub fn write_matrix(path: &Path, x: &DataMatrix) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.to_string()))?;
    for row in x.as_time_major().chunks(x.p()) {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.write_all(b"\n"))
                .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}
