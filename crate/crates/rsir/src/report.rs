//! Result persistence: one pretty-printed JSON file per run plus flat CSV
//! where a trajectory exists. Struct fields serialize in declaration order,
//! so files are byte-stable and diffable.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

/// Ensure the output directory exists and return it.
pub fn ensure_out_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

/// Write a serializable value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    ensure_out_dir(dir)?;
    let path = dir.join(name);
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| crate::error::Error::Contract(format!("serialize {name}: {e}")))?;
    body.push('\n');
    std::fs::write(&path, body)?;
    Ok(path)
}

/// Write plain text (CSV, config, logs).
pub fn write_text(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    ensure_out_dir(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, body)?;
    Ok(path)
}

/// Render a flat key-value block (stats reports and summaries).
pub fn key_value_block(pairs: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Demo {
        b: u32,
        a: u32,
    }

    #[test]
    fn json_field_order_follows_declaration() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_json(dir.path(), "demo.json", &Demo { b: 1, a: 2 }).unwrap();
        let body = std::fs::read_to_string(path).unwrap();
        let b_pos = body.find("\"b\"").unwrap();
        let a_pos = body.find("\"a\"").unwrap();
        assert!(b_pos < a_pos);
    }
}
