//! Quotation attribution: masked context windows, candidate mentions, a
//! trainable mention scorer, and accuracy evaluation.

pub mod candidates;
pub mod context;
pub mod pipeline;
pub mod scorer;
pub mod train;

pub use candidates::{enumerate_candidates, is_unanswerable, CandidateMention};
pub use context::{build_context, ContextSegment, ALTQUOTE_TOKEN, DEFAULT_WINDOW, QUOTE_TOKEN};
pub use pipeline::{
    attribute, build_character_embeddings, evaluate_attribution, metrics_table, predictions_table,
    quote_vectors, AttributionMetrics, AttributionOutcome, CharSource, TypeAccuracy, ABSTAIN_LABEL,
};
pub use scorer::{Arity, MentionMode, ScorerConfig, ScorerModel};
pub use train::{train_scorer, training_examples, ScorerExample};
