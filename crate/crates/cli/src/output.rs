//! Output files: atomic writes, a common JSON envelope, CSV cells.

use crate::error::CliError;
use quasicorr::{Complex64, ModuleVector};
use serde_json::{json, Value};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub struct OutputDir {
    dir: PathBuf,
    config_hash: String,
}

impl OutputDir {
    pub fn create(dir: &Path, config_hash: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            config_hash: config_hash.to_string(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// `{command, config_hash, version, result}` with sorted keys.
    pub fn json(&self, name: &str, command: &str, result: Value) -> Result<PathBuf, CliError> {
        let doc = json!({
            "command": command,
            "config_hash": self.config_hash,
            "version": VERSION,
            "result": result,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("json value serializes");
        text.push('\n');
        self.raw(name, text.as_bytes())
    }

    /// CSV with a leading `# config=` comment line.
    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let mut text = format!("# config={}\n{}\n", self.config_hash, header.join(","));
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.raw(name, text.as_bytes())
    }

    pub fn text(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let text = format!("# config={}\n{body}", self.config_hash);
        self.raw(name, text.as_bytes())
    }

    fn raw(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        write_atomic(&path, bytes)?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }
}

/// Shortest round-trip form of a float.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn vec_cell(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(" ")
}

pub fn int_cell(m: &ModuleVector) -> String {
    m.coords.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn complex_cells(z: Option<Complex64>) -> [String; 2] {
    match z {
        Some(z) => [num(z.re), num(z.im)],
        None => [String::new(), String::new()],
    }
}
