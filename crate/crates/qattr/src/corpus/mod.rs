//! Canonical in-memory corpora: tokenization, drama plays, annotated novels.

pub mod drama;
pub mod novel;
pub mod stats;
pub mod token;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use drama::{parse_play, Play, Segment, SegmentKind, Utterance};
pub use novel::{parse_novel, resolve_alias, AnnotatedNovel, Chapter, Mention, Quote, QuoteType};
pub use stats::{corpus_stats, CorpusStats, SplitStats};
pub use token::{tokenize, Token};

/// A speaking character of a play or novel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Character {
    pub id: String,
    pub canonical_name: String,
    /// Always contains `canonical_name`.
    pub aliases: BTreeSet<String>,
}

impl Character {
    pub fn new(id: &str, canonical_name: &str) -> Self {
        let mut aliases = BTreeSet::new();
        aliases.insert(canonical_name.to_string());
        Character {
            id: id.to_string(),
            canonical_name: canonical_name.to_string(),
            aliases,
        }
    }

    /// Character whose id doubles as its name, as in drama markup.
    pub fn simple(id: &str) -> Self {
        Character::new(id, id)
    }

    pub fn with_aliases(id: &str, canonical_name: &str, aliases: &[&str]) -> Self {
        let mut ch = Character::new(id, canonical_name);
        ch.aliases.extend(aliases.iter().map(|a| a.to_string()));
        ch
    }
}
