//! Report emission as JSON or CSV.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::CliError;

/// Rows of one CSV table.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// A float with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn opt_int(x: Option<u64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config: &'a RunConfig,
    report: &'a T,
}

/// Writes `report` with its config block to the configured destination.
/// CSV output starts with a `# config:` comment line holding the block.
pub fn emit<T: Serialize>(config: &RunConfig, report: &T, table: &Table) -> Result<(), CliError> {
    let sink: Box<dyn Write> = match &config.output {
        Some(path) if path != Path::new("-") => Box::new(File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?),
        _ => Box::new(io::stdout().lock()),
    };
    let mut out = BufWriter::new(sink);
    match config.format.unwrap_or(Format::Json) {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &Envelope { config, report }).map_err(|e| CliError::Io(e.to_string()))?;
            out.write_all(b"\n").map_err(|e| CliError::Io(e.to_string()))?;
        }
        Format::Csv => {
            let block = serde_json::to_string(config).map_err(|e| CliError::Io(e.to_string()))?;
            writeln!(out, "# config: {block}").map_err(|e| CliError::Io(e.to_string()))?;
            write_table(&mut out, table)?;
        }
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn write_table(out: &mut impl Write, table: &Table) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(&table.header).map_err(err)?;
    for row in &table.rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(num(-2.5), "-2.5000000000000000e0");
    }

    #[test]
    fn table_uses_lf() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), num(0.5)]);
        let mut buf = Vec::new();
        write_table(&mut buf, &t).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n1,5.0000000000000000e-1\n");
    }
}
