use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// 17 significant digits, which round-trips every finite `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV table held in memory until it is written.
#[derive(Debug, Clone)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Files staged in the destination directory and renamed into place only by
/// [`Staged::commit`]. Dropping without committing removes them.
#[derive(Default)]
pub struct Staged {
    files: Vec<(tempfile::NamedTempFile, PathBuf)>,
}

impl Staged {
    pub fn add(&mut self, path: &Path, contents: &str) -> CliResult<()> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let fail = |e: std::io::Error| CliError::Data(format!("{}: {e}", path.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
        tmp.write_all(contents.as_bytes()).map_err(fail)?;
        tmp.as_file().sync_all().map_err(fail)?;
        self.files.push((tmp, path.to_path_buf()));
        Ok(())
    }

    pub fn commit(self) -> CliResult<()> {
        for (tmp, path) in self.files {
            tmp.persist(&path)
                .map_err(|e| CliError::Data(format!("{}: {}", path.display(), e.error)))?;
        }
        Ok(())
    }
}
