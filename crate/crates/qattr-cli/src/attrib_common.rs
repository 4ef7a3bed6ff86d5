//! Shared plumbing for the attribution commands: cross-validation fold
//! files and the character/quote vector sources feeding augmented scorers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qattr::attrib::{build_character_embeddings, quote_vectors, Arity, CharSource, ScorerModel};
use qattr::corpus::AnnotatedNovel;
use qattr::embed::{load_vectors, EmbeddingModel};
use serde::Deserialize;

use crate::util::{fail, read_json};

/// One cross-validation fold: its held-out novels by id. Training uses
/// the complement. A fold with an empty test list covers all novels.
#[derive(Debug, Clone, Deserialize)]
pub struct Fold {
    pub name: String,
    pub test: Vec<String>,
}

pub fn load_folds(path: Option<&Path>, novels: &[AnnotatedNovel]) -> Result<Vec<Fold>, Vec<String>> {
    let Some(path) = path else {
        return Ok(vec![Fold { name: "all".into(), test: Vec::new() }]);
    };
    let folds: Vec<Fold> = read_json(path)?;
    if folds.is_empty() {
        return fail(format!("{}: fold file lists no folds", path.display()));
    }
    let mut errors = Vec::new();
    for (i, fold) in folds.iter().enumerate() {
        if fold.name.trim().is_empty() {
            errors.push(format!("fold #{i} has an empty name"));
        }
        if folds.iter().filter(|f| f.name == fold.name).count() > 1 {
            errors.push(format!("duplicate fold name \"{}\"", fold.name));
        }
        for id in &fold.test {
            if !novels.iter().any(|n| &n.id == id) {
                errors.push(format!("fold \"{}\" references unknown novel \"{id}\"", fold.name));
            }
        }
    }
    errors.sort();
    errors.dedup();
    if errors.is_empty() {
        Ok(folds)
    } else {
        Err(errors)
    }
}

/// Split novels into (train, test) for one fold. An empty test list means
/// the fold covers everything on both sides.
pub fn partition<'a>(
    fold: &Fold,
    novels: &'a [AnnotatedNovel],
) -> (Vec<&'a AnnotatedNovel>, Vec<&'a AnnotatedNovel>) {
    if fold.test.is_empty() {
        return (novels.iter().collect(), novels.iter().collect());
    }
    novels.iter().partition(|n| !fold.test.contains(&n.id))
}

/// Flags selecting where augmented-scorer character and quote vectors
/// come from.
#[derive(clap::Args)]
pub struct AugmentArgs {
    /// Trained embedder for gold/predicted character collections.
    #[arg(long)]
    pub embedder: Option<PathBuf>,
    /// gold | predicted | vectors-file (augmented arity only).
    #[arg(long)]
    pub char_source: Option<String>,
    /// Context-only scorer that attributes explicit quotes when
    /// --char-source predicted.
    #[arg(long)]
    pub base_scorer: Option<PathBuf>,
    /// Character vectors file for --char-source vectors-file.
    #[arg(long)]
    pub char_vectors: Option<PathBuf>,
    /// Quote vectors file for --char-source vectors-file.
    #[arg(long)]
    pub quote_vectors: Option<PathBuf>,
}

impl AugmentArgs {
    fn any_set(&self) -> bool {
        self.embedder.is_some()
            || self.char_source.is_some()
            || self.base_scorer.is_some()
            || self.char_vectors.is_some()
            || self.quote_vectors.is_some()
    }
}

pub enum AugmentProvider {
    None,
    Model { embedder: EmbeddingModel, source: CharSource, base: Option<ScorerModel> },
    Files { chars: BTreeMap<String, Vec<f64>>, quotes: BTreeMap<String, Vec<f64>> },
}

impl AugmentProvider {
    /// Resolve flags against the scorer arity. Returns the provider, a
    /// human-readable source label, and the character vector width.
    pub fn resolve(arity: Arity, args: &AugmentArgs) -> Result<(Self, Option<String>, usize), Vec<String>> {
        if arity == Arity::ContextOnly {
            if args.any_set() {
                return fail("a context-only scorer takes no character or quote vector inputs".into());
            }
            return Ok((AugmentProvider::None, None, 0));
        }
        let source = args.char_source.as_deref().unwrap_or("gold");
        match source {
            "gold" | "predicted" => {
                let Some(embedder_path) = &args.embedder else {
                    return fail(format!("--char-source {source} requires --embedder"));
                };
                let embedder = EmbeddingModel::load(embedder_path).map_err(|e| vec![e.to_string()])?;
                let (char_source, base) = if source == "gold" {
                    (CharSource::Gold, None)
                } else {
                    let Some(base_path) = &args.base_scorer else {
                        return fail("--char-source predicted requires --base-scorer".into());
                    };
                    let base = ScorerModel::load(base_path).map_err(|e| vec![e.to_string()])?;
                    if base.config.arity != Arity::ContextOnly {
                        return fail("--base-scorer must be a context-only scorer".into());
                    }
                    (CharSource::Predicted, Some(base))
                };
                let dim = embedder.dim;
                Ok((
                    AugmentProvider::Model { embedder, source: char_source, base },
                    Some(source.to_string()),
                    dim,
                ))
            }
            "vectors-file" => {
                let (Some(chars_path), Some(quotes_path)) = (&args.char_vectors, &args.quote_vectors)
                else {
                    return fail(
                        "--char-source vectors-file requires --char-vectors and --quote-vectors".into(),
                    );
                };
                let chars = load_vectors(chars_path).map_err(|e| vec![e.to_string()])?;
                let quotes = load_vectors(quotes_path).map_err(|e| vec![e.to_string()])?;
                let dim = chars
                    .values()
                    .next()
                    .or_else(|| quotes.values().next())
                    .map(|v| v.len())
                    .unwrap_or(0);
                if dim == 0 {
                    return fail("vector files define no vectors".into());
                }
                Ok((AugmentProvider::Files { chars, quotes }, Some(source.to_string()), dim))
            }
            other => fail(format!(
                "unknown char source \"{other}\" (use gold, predicted, or vectors-file)"
            )),
        }
    }

    /// Character and quote vectors for one novel, or None in
    /// context-only mode.
    pub fn for_novel(
        &self,
        novel: &AnnotatedNovel,
    ) -> Result<Option<(BTreeMap<String, Vec<f64>>, BTreeMap<String, Vec<f64>>)>, Vec<String>> {
        match self {
            AugmentProvider::None => Ok(None),
            AugmentProvider::Model { embedder, source, base } => {
                let chars = build_character_embeddings(novel, embedder, *source, base.as_ref())
                    .map_err(|e| vec![format!("{}: {e}", novel.id)])?;
                let quotes =
                    quote_vectors(novel, embedder).map_err(|e| vec![format!("{}: {e}", novel.id)])?;
                Ok(Some((chars, quotes)))
            }
            AugmentProvider::Files { chars, quotes } => Ok(Some((chars.clone(), quotes.clone()))),
        }
    }
}

pub fn parse_arity(name: &str) -> Result<Arity, Vec<String>> {
    match name {
        "context-only" => Ok(Arity::ContextOnly),
        "augmented" => Ok(Arity::Augmented),
        other => fail(format!("unknown arity \"{other}\" (use context-only or augmented)")),
    }
}
