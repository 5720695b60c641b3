use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes a CSV with a header, the rows and a trailing
/// `# config_hash=<hex>` line.
pub fn write_csv(path: &Path, header: &str, rows: &[String], config_hash: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut s = String::with_capacity(64 * (rows.len() + 2));
    s.push_str(header);
    s.push('\n');
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    s.push_str("# config_hash=");
    s.push_str(config_hash);
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// `{:.16e}`, with `nan` for missing values.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}
