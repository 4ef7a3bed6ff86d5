use std::fs;
use std::path::{Path, PathBuf};

use qattr::eval::report::Table;
use serde::Serialize;

pub type CmdResult = Result<(), Vec<String>>;

pub fn fail<T>(msg: String) -> Result<T, Vec<String>> {
    Err(vec![msg])
}

/// Parallelism cap from QA_THREADS; commands here run single-threaded, so
/// the cap is recorded in the manifest rather than driving a pool.
pub fn thread_cap() -> usize {
    std::env::var("QA_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

pub fn ensure_out_dir(dir: &Path) -> Result<(), Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| vec![format!("cannot create {}: {e}", dir.display())])
}

pub fn write_text(path: &Path, content: &str) -> Result<(), Vec<String>> {
    fs::write(path, content).map_err(|e| vec![format!("cannot write {}: {e}", path.display())])
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Vec<String>> {
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| vec![format!("cannot serialize {}: {e}", path.display())])?;
    body.push('\n');
    write_text(path, &body)
}

pub fn read_to_string(path: &Path) -> Result<String, Vec<String>> {
    fs::read_to_string(path).map_err(|e| vec![format!("cannot read {}: {e}", path.display())])
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Vec<String>> {
    let body = read_to_string(path)?;
    serde_json::from_str(&body).map_err(|e| vec![format!("{}: {e}", path.display())])
}

/// Emit one table as both `<stem>.csv` and `<stem>.txt`.
pub fn write_table(dir: &Path, stem: &str, table: &Table) -> Result<(), Vec<String>> {
    let csv = table.to_csv().map_err(|e| vec![format!("{stem}: {e}")])?;
    write_text(&dir.join(format!("{stem}.csv")), &csv)?;
    write_text(&dir.join(format!("{stem}.txt")), &table.to_text())
}

/// Files directly under `dir` with the given extension, sorted by name so
/// every run sees the same order.
pub fn files_with_ext(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, Vec<String>> {
    let entries =
        fs::read_dir(dir).map_err(|e| vec![format!("cannot read {}: {e}", dir.display())])?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| vec![format!("{}: {e}", dir.display())])?;
        let path = entry.path();
        if path.is_file() && path.extension().and_then(|s| s.to_str()) == Some(ext) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn file_label(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}
