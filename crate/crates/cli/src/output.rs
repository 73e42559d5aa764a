//! Output plumbing: text tables, JSON and CSV.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::args::Cli;
use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct Format {
    pub json: bool,
    pub csv: Option<PathBuf>,
}

impl Format {
    pub fn from_cli(cli: &Cli) -> Self {
        Self {
            json: cli.json_out,
            csv: cli.csv.clone(),
        }
    }
}

/// CSV float: 17 significant digits.
pub fn f17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Text float.
pub fn short(v: f64) -> String {
    format!("{v:.6e}")
}

pub fn write_json<T: Serialize>(value: &T, out: &mut dyn Write) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Header plus rows of preformatted cells.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, out: impl Write) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// To `path`, or to `out` when the path is `-`.
    pub fn write_csv_to(&self, path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
        if path == Path::new("-") {
            self.write_csv(out)
        } else {
            let f = File::create(path)
                .map_err(|e| CliError::validation(format!("cannot create {}: {e}", path.display())))?;
            self.write_csv(io::BufWriter::new(f))
        }
    }
}

/// Aligned `key  value` lines.
pub fn write_pairs(pairs: &[(&str, String)], out: &mut dyn Write) -> io::Result<()> {
    let width = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in pairs {
        writeln!(out, "{k:<width$}  {v}")?;
    }
    Ok(())
}
