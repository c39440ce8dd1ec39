//! CSV and JSON writers. Every CSV starts with a block of `# key: value`
//! lines describing how it was produced.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Round-trip formatting with 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// `inf` for an unreached time.
pub fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "inf".into(), num)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Header {
    pub entries: Vec<(String, String)>,
}

impl Header {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.entries.push((key.to_string(), value.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Standard provenance lines.
    pub fn tool() -> Self {
        Self::new().with("tool", format!("spinchaos {}", env!("CARGO_PKG_VERSION")))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes a CSV with a header block, a column line and rows.
pub fn write_csv<I>(path: &Path, header: &Header, columns: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for (k, v) in &header.entries {
        // keep multi-line values on one comment line
        writeln!(w, "# {k}: {}", v.replace('\n', " ")).map_err(io)?;
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(columns).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        csv.write_record(&row).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    }
    csv.flush().map_err(io)?;
    Ok(())
}

/// Reads the `# key: value` block at the top of a file.
pub fn read_header(path: &Path) -> Result<Header> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = Header::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let Some(rest) = line.strip_prefix("# ") else { break };
        if let Some((k, v)) = rest.split_once(": ") {
            header.entries.push((k.to_string(), v.to_string()));
        }
    }
    Ok(header)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
