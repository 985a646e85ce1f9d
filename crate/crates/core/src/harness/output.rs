//! CSV result files.

use super::experiment::PerRow;
use crate::Result;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub const CSV_HEADER: [&str; 7] = ["detector", "esn0_db", "per", "ci_lo", "ci_hi", "trials", "seconds"];

/// Writes result rows, flushing after every batch so partial runs leave a
/// usable file behind.
pub struct CsvSink {
    writer: csv::Writer<Box<dyn Write>>,
}

impl CsvSink {
    pub fn new(out: Box<dyn Write>) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        writer.write_record(CSV_HEADER)?;
        writer.flush()?;
        Ok(CsvSink { writer })
    }

    /// File at `path`, or stdout.
    pub fn create(path: Option<&Path>) -> Result<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(std::io::stdout()),
        };
        Self::new(out)
    }

    pub fn write(&mut self, rows: &[PerRow]) -> Result<()> {
        for r in rows {
            self.writer.serialize(r)?;
        }
        self.writer.flush()?;
        Ok(())
    }
}
