//! Series reading and atomic table writing.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::CliError;

/// Reads a plain-text series: one finite decimal per line, '#' comments
/// ignored, one optional leading header line auto-detected. Failures name
/// the offending line.
pub fn read_series(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    let mut header_allowed = true;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                values.push(v);
                header_allowed = false;
            }
            Ok(v) => {
                return Err(CliError::data(format!(
                    "{}:{}: non-finite sample {v}",
                    path.display(),
                    idx + 1
                )))
            }
            Err(_) if header_allowed => {
                // First non-comment line may be a column header.
                header_allowed = false;
            }
            Err(_) => {
                return Err(CliError::data(format!(
                    "{}:{}: expected a number, found '{line}'",
                    path.display(),
                    idx + 1
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(CliError::data(format!(
            "{}: no numeric samples found",
            path.display()
        )));
    }
    Ok(values)
}

/// Writes `content` to `path` atomically (temp file + rename in the same
/// directory).
pub fn write_atomic(path: &Path, content: &str) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into())
    ));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::data(format!("cannot write {}: {e}", path.display()))
    })
}

/// Formats an optional value for a table cell; missing values are empty.
pub fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
