//! Built-in function-word lists for stylometric features.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// English function words plus common early-modern forms, so drama text
/// keeps its style markers.
const BUILTIN_EN: &[&str] = &[
    // determiners, articles
    "a", "an", "the", "this", "that", "these", "those", "each", "every", "either", "neither",
    "some", "any", "no", "all", "both", "such", "what", "which", "whose",
    // pronouns
    "i", "me", "my", "mine", "myself", "we", "us", "our", "ours", "ourselves", "you", "your",
    "yours", "yourself", "he", "him", "his", "himself", "she", "her", "hers", "herself", "it",
    "its", "itself", "they", "them", "their", "theirs", "themselves", "who", "whom", "one",
    "none", "something", "nothing", "anything", "everything", "somebody", "nobody", "everyone",
    // archaic pronouns and verb forms
    "thou", "thee", "thy", "thine", "thyself", "ye", "hath", "doth", "dost", "art", "wilt",
    "shalt", "hast", "tis", "twas", "wherefore", "whence", "thither", "hither", "henceforth",
    // auxiliaries and copulas
    "am", "is", "are", "was", "were", "be", "been", "being", "have", "has", "had", "having",
    "do", "does", "did", "doing", "will", "would", "shall", "should", "may", "might", "must",
    "can", "could", "ought", "need", "dare",
    // negation and hedges
    "not", "never", "nor", "naught", "hardly", "scarcely", "perhaps", "maybe", "rather",
    // prepositions
    "of", "in", "on", "at", "by", "for", "with", "about", "against", "between", "into",
    "through", "during", "before", "after", "above", "below", "to", "from", "up", "down",
    "out", "off", "over", "under", "again", "further", "upon", "unto", "within", "without",
    "amongst", "amid", "betwixt", "toward", "towards", "near", "beside", "besides", "beyond",
    // conjunctions
    "and", "but", "or", "yet", "if", "because", "as", "until", "while", "whilst", "since",
    "than", "though", "although", "unless", "whether", "once", "when", "whenever", "where",
    "wherever", "why", "how", "lest", "albeit",
    // adverbial particles and degree words
    "so", "too", "very", "just", "quite", "almost", "even", "only", "still", "already",
    "then", "there", "here", "now", "ever", "also", "thus", "hence", "therefore", "however",
    "indeed", "anon", "oft", "ere", "soon", "away", "more", "most", "less", "least", "much",
    "many", "few", "enough",
    // interjections and discourse markers
    "aye", "nay", "yea", "yes", "oh", "ah", "alas", "lo", "fie", "tut", "pray", "prithee",
    "marry", "forsooth", "verily", "well", "come", "go", "hark", "sirrah", "madam", "sir",
];

/// Resolve a function-word list id to its word set.
pub fn function_word_set(id: &str) -> Result<&'static BTreeSet<&'static str>> {
    match id {
        "builtin-en" => {
            static SET: OnceLock<BTreeSet<&'static str>> = OnceLock::new();
            Ok(SET.get_or_init(|| BUILTIN_EN.iter().copied().collect()))
        }
        other => Err(Error::InvalidInput(format!("unknown function-word list \"{other}\""))),
    }
}
