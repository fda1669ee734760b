//! The norm ledger: one CSV row per observation.
//!
//! The first line is `# peq-ledger <version>`, the second the column header:
//! every [`NormRecord`] field in order (starting with `t`), then the bound
//! certificate values `K1, K6, K2, Kz, KV, Kt`. Values are written in the
//! shortest form that parses back to the same `f64`.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use crate::energetics::{BoundCertificate, NormRecord};
use crate::error::{Error, Result};

pub const LEDGER_VERSION: u32 = 1;
pub const CERTIFICATE_COLUMNS: [&str; 6] = ["K1", "K6", "K2", "Kz", "KV", "Kt"];

/// A parsed ledger row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerRow {
    pub norms: NormRecord,
    /// `[K1, K6, K2, Kz, KV, Kt]`.
    pub certificate: [f64; 6],
}

fn version_line() -> String {
    format!("# peq-ledger {LEDGER_VERSION}\n")
}

/// The column names in file order.
pub fn ledger_header() -> Vec<&'static str> {
    NormRecord::FIELDS.iter().chain(CERTIFICATE_COLUMNS.iter()).copied().collect()
}

fn csv_line(fields: impl IntoIterator<Item = String>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(fields).map_err(|e| Error::Format(e.to_string()))?;
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

fn header_bytes() -> Result<Vec<u8>> {
    let mut out = version_line().into_bytes();
    out.extend(csv_line(ledger_header().into_iter().map(String::from))?);
    Ok(out)
}

/// Creates (or truncates) a ledger holding only the header.
pub fn write_ledger_header(path: &Path) -> Result<()> {
    std::fs::write(path, header_bytes()?)?;
    Ok(())
}

fn certificate_values(c: &BoundCertificate) -> [f64; 6] {
    [c.k1, c.k6, c.k2, c.kz, c.kv, c.kt]
}

/// Appends one row, writing the header first when the file is new or empty.
/// The row goes out in a single write on a file opened for appending.
pub fn append_ledger_row(norms: &NormRecord, certificate: &BoundCertificate, path: &Path) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut buf = if f.metadata()?.len() == 0 { header_bytes()? } else { Vec::new() };
    let values = norms.values().into_iter().chain(certificate_values(certificate));
    buf.extend(csv_line(values.map(|v| format!("{v:e}")))?);
    f.write_all(&buf)?;
    Ok(())
}

fn parse_value(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse { line, message: format!("`{s}` is not a number: {e}") })
}

/// Reads a ledger, checking the version line and the header.
pub fn read_ledger(path: &Path) -> Result<Vec<LedgerRow>> {
    let text = std::fs::read_to_string(path)?;
    let Some((first, rest)) = text.split_once('\n') else {
        return Err(Error::Format(format!("{} is not a ledger: missing version line", path.display())));
    };
    let version = first
        .strip_prefix("# peq-ledger ")
        .ok_or_else(|| Error::Format(format!("{} is not a ledger: missing version line", path.display())))?;
    if version.trim() != LEDGER_VERSION.to_string() {
        return Err(Error::Format(format!("unsupported ledger version {}, expected {LEDGER_VERSION}", version.trim())));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(rest.as_bytes());
    let header = reader.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    let want = ledger_header();
    if header.iter().ne(want.iter().copied()) {
        return Err(Error::Format(format!("unexpected ledger columns: {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let line = n + 3;
        let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let values: Vec<f64> = rec.iter().map(|s| parse_value(s, line)).collect::<Result<_>>()?;
        let split = NormRecord::FIELDS.len();
        let mut certificate = [0.0; 6];
        certificate.copy_from_slice(&values[split..]);
        rows.push(LedgerRow { norms: NormRecord::from_values(&values[..split])?, certificate });
    }
    Ok(rows)
}
