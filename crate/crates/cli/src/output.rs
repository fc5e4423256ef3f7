//! Atomic result files, CSV tables and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Output directory that records every file it writes.
pub struct Sink {
    dir: PathBuf,
    files: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Writes `bytes` to a temporary sibling and renames it into place.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let ctx = |what: &str| format!("{what} {}", target.display());
        let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(ctx("creating"), e))?;
        f.write_all(bytes).map_err(|e| CliError::io(ctx("writing"), e))?;
        f.sync_all().map_err(|e| CliError::io(ctx("syncing"), e))?;
        drop(f);
        fs::rename(&tmp, &target).map_err(|e| CliError::io(ctx("renaming into"), e))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).expect("results serialize");
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        self.write(name, table.render().as_bytes())
    }
}

/// CSV table with `# key = value` header comments.
pub struct Table {
    meta: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { meta: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn row(&mut self, cells: &[Cell]) {
        assert_eq!(cells.len(), self.columns.len(), "row width");
        let mut line = String::new();
        for (k, c) in cells.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            match c {
                Cell::F(x) => write!(line, "{x:e}").unwrap(),
                Cell::U(x) => write!(line, "{x}").unwrap(),
            }
        }
        self.rows.push(line);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            writeln!(s, "# {k} = {v}").unwrap();
        }
        writeln!(s, "{}", self.columns.join(",")).unwrap();
        for r in &self.rows {
            writeln!(s, "{r}").unwrap();
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Cell {
    F(f64),
    U(u64),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub kind: &'a str,
    pub version: &'a str,
    pub schema_version: u32,
    pub config_sha256: String,
    pub seed: u64,
    /// Realization seeds in realization order.
    pub realization_seeds: Vec<u64>,
    pub threads: usize,
    pub wall_time_s: f64,
    pub files: &'a [String],
}
