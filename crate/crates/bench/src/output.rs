//! CSV and JSON writers. Floats use Rust's shortest round-trip formatting, so
//! identical values give identical bytes.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Columns appended to every CSV row.
#[derive(Debug, Clone)]
pub struct Meta {
    pub scenario: String,
    pub seed: u64,
    pub version: String,
}

/// A metadata column.
#[derive(Debug, Clone, Copy)]
pub enum Col {
    Scenario,
    Seed,
    Version,
}

impl Col {
    fn name(self) -> &'static str {
        match self {
            Col::Scenario => "scenario",
            Col::Seed => "seed",
            Col::Version => "version",
        }
    }
}

/// Scenario, seed, version: the usual trailing columns.
pub const TRAILING: [Col; 3] = [Col::Scenario, Col::Seed, Col::Version];

pub struct Table {
    writer: csv::Writer<BufWriter<File>>,
    trailing: Vec<String>,
    width: usize,
}

impl Table {
    /// A CSV with `columns` followed by the metadata columns `trailing`.
    pub fn create(path: &Path, columns: &[&str], meta: &Meta, trailing: &[Col]) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        let header = columns.iter().copied().chain(trailing.iter().map(|c| c.name()));
        writer.write_record(header)?;
        let trailing = trailing
            .iter()
            .map(|c| match c {
                Col::Scenario => meta.scenario.clone(),
                Col::Seed => meta.seed.to_string(),
                Col::Version => meta.version.clone(),
            })
            .collect();
        Ok(Table { writer, trailing, width: columns.len() })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        assert_eq!(fields.len(), self.width, "row width");
        self.writer.write_record(fields.iter().chain(&self.trailing))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}
