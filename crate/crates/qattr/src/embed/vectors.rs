//! Text vector files for exporting and importing character vectors.
//!
//! Format: first line `dim N`, then one `id v_1 ... v_N` line per vector.
//! Values are written as shortest-round-trip f32 decimals, so a save/load
//! cycle is exact at f32 precision. Ids must be whitespace-free.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// A character's embedding: unit norm, or all zeros for characters the
/// encoder had no material for.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacterVector {
    pub character_id: String,
    pub vector: Vec<f64>,
}

impl CharacterVector {
    pub fn is_zero(&self) -> bool {
        self.vector.iter().all(|&v| v == 0.0)
    }
}

/// Write vectors sorted by id.
pub fn save_vectors(vectors: &BTreeMap<String, Vec<f64>>, path: &Path) -> Result<()> {
    let dim = match vectors.values().next() {
        Some(v) => v.len(),
        None => return Err(Error::InvalidInput("no vectors to save".into())),
    };
    let mut out = String::new();
    writeln!(out, "dim {dim}").expect("string write");
    for (id, v) in vectors {
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(Error::InvalidInput(format!(
                "vector id \"{id}\" must be non-empty and whitespace-free"
            )));
        }
        if v.len() != dim {
            return Err(Error::Dimension { expected: dim, got: v.len() });
        }
        out.push_str(id);
        for x in v {
            write!(out, " {}", *x as f32).expect("string write");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_vectors(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    parse_vectors(&text)
}

pub fn parse_vectors(text: &str) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(Error::Format("empty vector file".into()));
    };
    let dim: usize = header
        .strip_prefix("dim ")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| Error::Format(format!("expected header \"dim N\", got \"{header}\"")))?;
    if dim == 0 {
        return Err(Error::Format("vector dim must be positive".into()));
    }

    let mut vectors = BTreeMap::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let id = parts.next().expect("non-empty line has a first field");
        let values: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::parse(lineno + 1, format!("bad float \"{p}\"")))
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::parse(
                lineno + 1,
                format!("vector \"{id}\" has {} values, header says {dim}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(lineno + 1, format!("vector \"{id}\" has a non-finite value")));
        }
        if vectors.insert(id.to_string(), values).is_some() {
            return Err(Error::parse(lineno + 1, format!("duplicate vector id \"{id}\"")));
        }
    }
    Ok(vectors)
}
