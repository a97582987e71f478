//! Artifact writing: JSON reports, CSV tables and NDJSON traces.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

/// Column order of every deviation summary table.
pub const SUMMARY_HEADER: [&str; 5] = ["instance", "participant", "deviation", "delta", "verdict"];

/// Writes a line to stdout. A closed pipe (`prrr ... | head`) is not an
/// error; the command still finishes and sets its exit code.
pub fn emit(line: &str) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

pub struct Output {
    dir: Option<PathBuf>,
    /// Print the JSON report on stdout instead of the text summary.
    pub json: bool,
}

impl Output {
    pub fn new(dir: Option<PathBuf>, json: bool) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Self { dir, json })
    }

    fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(name))
    }

    /// Text line for the human summary; suppressed in JSON mode.
    pub fn say(&self, line: impl AsRef<str>) {
        if !self.json {
            emit(line.as_ref());
        }
    }

    pub fn report<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        if self.json {
            emit(&text);
        }
        if let Some(p) = self.path(name) {
            fs::write(&p, text + "\n").with_context(|| format!("writing {}", p.display()))?;
        }
        Ok(())
    }

    pub fn table(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let Some(p) = self.path(name) else { return Ok(()) };
        let mut w = csv::Writer::from_path(&p).with_context(|| format!("writing {}", p.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// NDJSON sink: a file under the output directory, or stdout.
    pub fn lines(&self, name: &str) -> Result<Box<dyn Write>> {
        Ok(match self.path(name) {
            Some(p) => Box::new(BufWriter::new(File::create(&p).with_context(|| format!("writing {}", p.display()))?)),
            None => Box::new(BufWriter::new(std::io::stdout())),
        })
    }

    pub fn has_dir(&self) -> bool {
        self.dir.is_some()
    }
}
