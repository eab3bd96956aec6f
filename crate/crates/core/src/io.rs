//! CSV and JSON writing helpers.
//!
//! Floats are written with Rust's shortest-roundtrip formatting, which is
//! deterministic across runs and platforms; the byte-identical-output
//! contract of the CLI rests on this.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// Render rows of f64 columns as CSV under the given header.
pub fn csv_string(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Write a string to disk, creating parent directories as needed.
pub fn write_text(path: &Path, text: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)
}

/// Serialize a value as pretty JSON and write it.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    write_text(path, &(text + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_formatting_is_stable() {
        let rows = vec![vec![1.0, 0.25], vec![1e-7, 0.1 + 0.2]];
        let a = csv_string(&["x", "y"], rows.clone().into_iter());
        let b = csv_string(&["x", "y"], rows.into_iter());
        assert_eq!(a, b);
        assert!(a.starts_with("x,y\n1,0.25\n"));
    }
}
