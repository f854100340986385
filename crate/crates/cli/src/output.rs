//! CSV tables with a leading `# manifest:` comment line.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly.

use std::io::Write;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn manifest_line(config_hash: &str, seed: Option<u64>) -> String {
    let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    format!(
        "# manifest: config_sha256={config_hash} seed={seed} version={}",
        env!("CARGO_PKG_VERSION")
    )
}

/// Writes the manifest line followed by the CSV table.
pub fn write_table<W: Write>(mut out: W, manifest: &str, table: &Table) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::validation(format!("write failed: {e}"));
    writeln!(out, "{manifest}").map_err(io)?;
    let mut writer = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::validation(format!("write failed: {e}"));
    writer.write_record(&table.header).map_err(csv_err)?;
    for row in &table.rows {
        writer.write_record(row).map_err(csv_err)?;
    }
    writer.flush().map_err(io)?;
    Ok(())
}

pub fn render(manifest: &str, table: &Table) -> String {
    let mut buf = Vec::new();
    write_table(&mut buf, manifest, table).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}
