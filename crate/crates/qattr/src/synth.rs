//! Deterministic synthetic corpora with controlled style signals, used by
//! the end-to-end tests and handy for smoke-testing the CLI.
//!
//! Drama generator: all characters in a scene draw from the same topic
//! pool, so collections within a segment look alike and a plain random
//! projection verifies speakers near chance. Each character additionally
//! leans on a private set of function words and a preferred terminal
//! punctuation mark; that channel is a small, consistent fraction of the
//! token mass that contrastive training can isolate.
//!
//! Novel generator: explicit quotes carry the speaker name right after the
//! quote, anaphoric quotes a linked pronoun, implicit quotes only two
//! positionally balanced name mentions. The quote text itself is styled,
//! so implicit quotes are only resolvable through character/quote vectors.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::novel::AnnotatedNovel;
use crate::corpus::{parse_novel, parse_play, Play};
use crate::error::Result;
use crate::seed::{derive_seed, SeedPart};

/// One character's private style: favored function words and a preferred
/// terminal punctuation mark. The six profiles are pairwise disjoint.
#[derive(Debug, Clone, Copy)]
pub struct StyleProfile {
    pub words: [&'static str; 4],
    pub punct: char,
}

pub const STYLE_PROFILES: [StyleProfile; 6] = [
    StyleProfile { words: ["thou", "thee", "thy", "prithee"], punct: '!' },
    StyleProfile { words: ["aye", "nay", "hath", "doth"], punct: '?' },
    StyleProfile { words: ["indeed", "quite", "rather", "perhaps"], punct: ';' },
    StyleProfile { words: ["unto", "betwixt", "whilst", "ere"], punct: ':' },
    StyleProfile { words: ["verily", "forsooth", "marry", "anon"], punct: ',' },
    StyleProfile { words: ["hither", "thither", "whence", "wherefore"], punct: '.' },
];

/// Shared filler function words every character uses at the same rate.
pub const COMMON_WORDS: [&str; 8] = ["the", "and", "of", "to", "in", "a", "for", "with"];

/// Topic vocabulary; none of these are function words.
const CONTENT_WORDS: [&str; 48] = [
    "castle", "river", "moon", "sword", "crown", "letter", "horse", "night",
    "storm", "harbor", "road", "garden", "tower", "forest", "banner", "feast",
    "winter", "lantern", "bridge", "market", "chapel", "meadow", "falcon", "vessel",
    "anchor", "cliff", "valley", "ember", "thread", "mirror", "saddle", "goblet",
    "parchment", "candle", "orchard", "hollow", "spire", "quarry", "fountain", "gallery",
    "cloak", "archway", "cellar", "rampart", "beacon", "thicket", "harvest", "footpath",
];

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

#[derive(Debug, Clone)]
pub struct AvSpec {
    pub plays: usize,
    /// Characters per play, at most `STYLE_PROFILES.len()`.
    pub characters: usize,
    pub scenes: usize,
    pub lines_per_character: usize,
    /// Probability that a line's extra function word comes from the
    /// speaker's private set rather than the shared pool.
    pub signature_word_rate: f64,
    /// Probability that a line ends with the speaker's preferred mark.
    pub signature_punct_rate: f64,
    pub topic_words_per_scene: usize,
}

impl Default for AvSpec {
    fn default() -> Self {
        AvSpec {
            plays: 40,
            characters: 6,
            scenes: 16,
            lines_per_character: 18,
            signature_word_rate: 0.24,
            signature_punct_rate: 0.28,
            topic_words_per_scene: 10,
        }
    }
}

fn any_signature_word(rng: &mut ChaCha8Rng) -> &'static str {
    let p = &STYLE_PROFILES[rng.random_range(0..STYLE_PROFILES.len())];
    p.words[rng.random_range(0..p.words.len())]
}

fn style_line(rng: &mut ChaCha8Rng, profile: &StyleProfile, topic: &[&str], spec: &AvSpec) -> String {
    let body = rng.random_range(9..=13);
    let mut words: Vec<&str> = Vec::with_capacity(body + 2);
    for _ in 0..body {
        if rng.random_bool(0.25) {
            words.push(pick(rng, &COMMON_WORDS));
        } else {
            words.push(pick(rng, topic));
        }
    }
    // Two marker slots per line. Everyone uses markers at the same rate;
    // only the bias toward the speaker's own set differs, so the raw
    // overlap between characters stays high while the skew is learnable.
    for _ in 0..2 {
        let extra = if rng.random_bool(spec.signature_word_rate) {
            pick(rng, &profile.words)
        } else {
            any_signature_word(rng)
        };
        let at = rng.random_range(0..=words.len());
        words.insert(at, extra);
    }
    let punct = if rng.random_bool(spec.signature_punct_rate) {
        profile.punct
    } else {
        STYLE_PROFILES[rng.random_range(0..STYLE_PROFILES.len())].punct
    };
    format!("{}{}", words.join(" "), punct)
}

/// Markup for one synthetic play. Deterministic in (spec, play_idx, seed).
pub fn av_play_markup(spec: &AvSpec, play_idx: usize, seed: u64) -> String {
    assert!(
        spec.characters <= STYLE_PROFILES.len(),
        "only {} style profiles available",
        STYLE_PROFILES.len()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        seed,
        [SeedPart::Str("synth-av"), SeedPart::Num(play_idx as u64)],
    ));
    let mut out = format!(
        "<play id=\"synth-{play_idx:03}\" title=\"Synthetic Play {play_idx}\" author=\"generator\">\n"
    );
    for scene in 0..spec.scenes {
        let mut topic: Vec<&str> = CONTENT_WORDS.to_vec();
        topic.shuffle(&mut rng);
        topic.truncate(spec.topic_words_per_scene);
        out.push_str(&format!("<scene n=\"{}\">\n", scene + 1));
        for _ in 0..spec.lines_per_character {
            for c in 0..spec.characters {
                let line = style_line(&mut rng, &STYLE_PROFILES[c], &topic, spec);
                out.push_str(&format!("<sp who=\"c{c}\">{line}</sp>\n"));
            }
        }
        out.push_str("</scene>\n");
    }
    out.push_str("</play>\n");
    out
}

/// Generate and parse a whole synthetic corpus.
pub fn av_corpus(spec: &AvSpec, seed: u64) -> Result<Vec<Play>> {
    (0..spec.plays).map(|i| parse_play(&av_play_markup(spec, i, seed))).collect()
}

pub const NOVEL_CHAR_IDS: [&str; 2] = ["a", "b"];
pub const NOVEL_CHAR_NAMES: [&str; 2] = ["Ada", "Bram"];

#[derive(Debug, Clone)]
pub struct AttribSpec {
    /// Each round contributes four explicit, two anaphoric, and four
    /// implicit quotes with speaker identity and mention order balanced,
    /// so mention position carries no information about implicit speakers.
    pub rounds: usize,
    /// Word tokens inside each quote, before the terminal mark.
    pub quote_words: usize,
    pub signature_words_per_quote: usize,
}

impl Default for AttribSpec {
    fn default() -> Self {
        AttribSpec { rounds: 5, quote_words: 5, signature_words_per_quote: 2 }
    }
}

struct NovelBuilder {
    tokens: Vec<String>,
    quotes: Vec<serde_json::Value>,
    mentions: Vec<serde_json::Value>,
}

impl NovelBuilder {
    fn new() -> Self {
        NovelBuilder { tokens: Vec::new(), quotes: Vec::new(), mentions: Vec::new() }
    }

    fn push(&mut self, tok: &str) -> usize {
        self.tokens.push(tok.to_string());
        self.tokens.len() - 1
    }

    fn push_all(&mut self, toks: &[&str]) {
        for t in toks {
            self.push(t);
        }
    }

    /// Push a single-token name and record its mention.
    fn name_mention(&mut self, speaker: usize) -> usize {
        let at = self.push(NOVEL_CHAR_NAMES[speaker]);
        self.mentions.push(serde_json::json!({
            "start_tok": at,
            "end_tok": at + 1,
            "entity_id": NOVEL_CHAR_IDS[speaker],
        }));
        at
    }

    fn filler(&mut self, rng: &mut ChaCha8Rng, topic: &[&str]) {
        self.push("The");
        self.push(pick(rng, topic));
        self.push_all(&["stood", "by", "the"]);
        self.push(pick(rng, topic));
        self.push(".");
    }

    /// Quote-mark delimited styled quote; records the quote annotation.
    fn styled_quote(
        &mut self,
        rng: &mut ChaCha8Rng,
        spec: &AttribSpec,
        id: &str,
        quote_type: &str,
        speaker: usize,
        topic: &[&str],
    ) {
        let profile = &STYLE_PROFILES[speaker];
        let mut words: Vec<&str> = Vec::with_capacity(spec.quote_words);
        for _ in 0..spec.signature_words_per_quote.min(spec.quote_words) {
            words.push(pick(rng, &profile.words));
        }
        while words.len() < spec.quote_words {
            if rng.random_bool(0.3) {
                words.push(pick(rng, &COMMON_WORDS));
            } else {
                words.push(pick(rng, topic));
            }
        }
        words.shuffle(rng);

        let start = self.push("\"");
        for w in words {
            self.push(w);
        }
        self.push(&profile.punct.to_string());
        let end = self.push("\"") + 1;
        self.quotes.push(serde_json::json!({
            "id": id,
            "start_tok": start,
            "end_tok": end,
            "type": quote_type,
            "speaker_id": NOVEL_CHAR_IDS[speaker],
            "chapter": 0,
        }));
    }

    /// Document text plus annotation JSON, ready to write as input files.
    fn raw(self, id: &str) -> (String, String) {
        let text = self.tokens.join(" ");
        let annotation = serde_json::json!({
            "id": id,
            "characters": [
                {"id": NOVEL_CHAR_IDS[0], "name": NOVEL_CHAR_NAMES[0]},
                {"id": NOVEL_CHAR_IDS[1], "name": NOVEL_CHAR_NAMES[1]},
            ],
            "chapters": [{"start_tok": 0, "end_tok": self.tokens.len()}],
            "quotes": self.quotes,
            "mentions": self.mentions,
        });
        (text, annotation.to_string())
    }

    fn finish(self, id: &str) -> Result<AnnotatedNovel> {
        let (text, annotation) = self.raw(id);
        parse_novel(&text, &annotation)
    }
}

/// `"..." said Ada . Bram stood by the <topic> .`
/// Gold mention adjacent to the quote, distractor a few tokens later.
fn explicit_block(
    b: &mut NovelBuilder,
    rng: &mut ChaCha8Rng,
    spec: &AttribSpec,
    id: &str,
    speaker: usize,
    topic: &[&str],
) {
    b.styled_quote(rng, spec, id, "explicit", speaker, topic);
    b.push("said");
    b.name_mention(speaker);
    b.push(".");
    b.name_mention(1 - speaker);
    b.push_all(&["stood", "by", "the"]);
    b.push(pick(rng, topic));
    b.push(".");
}

/// `Ada and Bram walked by the <topic> . "..." he said .`
/// The pronoun carries the gold entity link.
fn anaphoric_block(
    b: &mut NovelBuilder,
    rng: &mut ChaCha8Rng,
    spec: &AttribSpec,
    id: &str,
    speaker: usize,
    first: usize,
    topic: &[&str],
) {
    b.name_mention(first);
    b.push("and");
    b.name_mention(1 - first);
    b.push_all(&["walked", "by", "the"]);
    b.push(pick(rng, topic));
    b.push(".");
    b.styled_quote(rng, spec, id, "anaphoric", speaker, topic);
    let at = b.push("he");
    b.mentions.push(serde_json::json!({
        "start_tok": at,
        "end_tok": at + 1,
        "entity_id": NOVEL_CHAR_IDS[speaker],
    }));
    b.push_all(&["said", "."]);
}

/// `Ada and Bram stood by the <topic> . "..."`
/// No narrative cue: only the styled quote text identifies the speaker.
fn implicit_block(
    b: &mut NovelBuilder,
    rng: &mut ChaCha8Rng,
    spec: &AttribSpec,
    id: &str,
    speaker: usize,
    first: usize,
    topic: &[&str],
) {
    b.name_mention(first);
    b.push("and");
    b.name_mention(1 - first);
    b.push_all(&["stood", "by", "the"]);
    b.push(pick(rng, topic));
    b.push(".");
    b.styled_quote(rng, spec, id, "implicit", speaker, topic);
}

/// One synthetic novel. Deterministic in (spec, novel_idx, seed).
pub fn attrib_novel(spec: &AttribSpec, novel_idx: usize, seed: u64) -> Result<AnnotatedNovel> {
    attrib_builder(spec, novel_idx, seed).finish(&format!("synthnovel-{novel_idx}"))
}

/// Raw text and annotation JSON for the same novel `attrib_novel` builds.
pub fn attrib_novel_raw(spec: &AttribSpec, novel_idx: usize, seed: u64) -> (String, String) {
    attrib_builder(spec, novel_idx, seed).raw(&format!("synthnovel-{novel_idx}"))
}

fn attrib_builder(spec: &AttribSpec, novel_idx: usize, seed: u64) -> NovelBuilder {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        seed,
        [SeedPart::Str("synth-attrib"), SeedPart::Num(novel_idx as u64)],
    ));
    let mut topic: Vec<&str> = CONTENT_WORDS.to_vec();
    topic.shuffle(&mut rng);
    topic.truncate(12);

    let mut b = NovelBuilder::new();
    b.filler(&mut rng, &topic);
    for round in 0..spec.rounds {
        for k in 0..4 {
            explicit_block(&mut b, &mut rng, spec, &format!("e{round}-{k}"), k % 2, &topic);
            b.filler(&mut rng, &topic);
        }
        for k in 0..2 {
            anaphoric_block(
                &mut b,
                &mut rng,
                spec,
                &format!("a{round}-{k}"),
                k,
                (round + k) % 2,
                &topic,
            );
            b.filler(&mut rng, &topic);
        }
        // The four (speaker, mention-order) combinations in every round.
        // Two fillers keep the next block's lead names out of any window
        // wide enough to reach this block's own lead names.
        for (k, (speaker, first)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
            implicit_block(&mut b, &mut rng, spec, &format!("i{round}-{k}"), speaker, first, &topic);
            b.filler(&mut rng, &topic);
            b.filler(&mut rng, &topic);
        }
    }
    b
}

pub fn attrib_novels(spec: &AttribSpec, count: usize, seed: u64) -> Result<Vec<AnnotatedNovel>> {
    (0..count).map(|i| attrib_novel(spec, i, seed)).collect()
}

/// Fixture with `total` quotes of which the first `missing` have no
/// in-window mention of their gold speaker (only the other character is
/// mentioned), making them unanswerable by construction.
pub fn unanswerable_novel(total: usize, missing: usize, seed: u64) -> Result<AnnotatedNovel> {
    assert!(missing <= total);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        seed,
        [SeedPart::Str("synth-unanswerable"), SeedPart::Num(total as u64), SeedPart::Num(missing as u64)],
    ));
    let spec = AttribSpec::default();
    let mut topic: Vec<&str> = CONTENT_WORDS.to_vec();
    topic.shuffle(&mut rng);
    topic.truncate(12);

    let mut b = NovelBuilder::new();
    b.filler(&mut rng, &topic);
    for i in 0..total {
        let speaker = i % 2;
        if i < missing {
            // Gold speaker appears nowhere near the quote.
            b.styled_quote(&mut rng, &spec, &format!("q{i}"), "implicit", speaker, &topic);
            b.name_mention(1 - speaker);
            b.push_all(&["stood", "by", "the"]);
            b.push(pick(&mut rng, &topic));
            b.push(".");
        } else {
            explicit_block(&mut b, &mut rng, &spec, &format!("q{i}"), speaker, &topic);
        }
        b.filler(&mut rng, &topic);
        b.filler(&mut rng, &topic);
    }
    b.finish("synthnovel-unanswerable")
}

/// A small novel with randomized layout: quote spans, mentions (inside and
/// outside quotes, linked and unlinked, resolvable and not), names, and an
/// ambiguous alias. Structurally valid by construction; content is
/// arbitrary. Used by the masking/candidate property suite.
pub fn random_novel(seed: u64) -> Result<AnnotatedNovel> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(derive_seed(seed, [SeedPart::Str("synth-random"), SeedPart::Num(seed)]));
    let names = ["Ada", "Bram", "Cora", "Dane"];
    let n_chars = rng.random_range(2..=4usize);
    let n = rng.random_range(40..=200usize);

    let mut tokens: Vec<String> = (0..n)
        .map(|_| {
            if rng.random_bool(0.1) {
                ".".to_string()
            } else if rng.random_bool(0.1) {
                names[rng.random_range(0..n_chars)].to_string()
            } else {
                pick(&mut rng, &CONTENT_WORDS).to_string()
            }
        })
        .collect();

    // Non-overlapping quote spans with gaps.
    let mut quotes = Vec::new();
    let mut pos = rng.random_range(0..6usize);
    let mut qi = 0;
    while pos + 6 < n {
        let len = rng.random_range(1..=5usize);
        let types = ["explicit", "anaphoric", "implicit"];
        let quote_type = types[rng.random_range(0..3)];
        let speaker: Option<String> = if rng.random_bool(0.8) {
            Some(format!("c{}", rng.random_range(0..n_chars)))
        } else {
            None
        };
        quotes.push(serde_json::json!({
            "id": format!("q{qi}"),
            "start_tok": pos,
            "end_tok": pos + len,
            "type": quote_type,
            "speaker_id": speaker,
            "chapter": 0,
        }));
        qi += 1;
        pos += len + rng.random_range(1..=14usize);
    }

    let mut mentions = Vec::new();
    for _ in 0..rng.random_range(0..=14usize) {
        let start = rng.random_range(0..n);
        let end = (start + rng.random_range(1..=2usize)).min(n);
        let roll = rng.random_range(0..10u32);
        if roll < 5 {
            // Linked mention; surface text is irrelevant.
            let entity = format!("c{}", rng.random_range(0..n_chars));
            mentions.push(serde_json::json!({
                "start_tok": start,
                "end_tok": end,
                "entity_id": entity,
            }));
        } else if roll < 8 {
            // Unlinked mention over a name token: resolved by alias.
            let c = rng.random_range(0..n_chars);
            tokens[start] = names[c].to_string();
            mentions.push(serde_json::json!({"start_tok": start, "end_tok": start + 1}));
        } else {
            // Unlinked and ambiguous or unresolvable.
            if rng.random_bool(0.5) && n_chars >= 2 {
                tokens[start] = "Twin".to_string();
            }
            mentions.push(serde_json::json!({"start_tok": start, "end_tok": start + 1}));
        }
    }

    let characters: Vec<serde_json::Value> = (0..n_chars)
        .map(|c| {
            // Two characters share the alias "Twin" so it never resolves.
            let aliases: Vec<&str> = if c < 2 { vec!["Twin"] } else { vec![] };
            serde_json::json!({"id": format!("c{c}"), "name": names[c], "aliases": aliases})
        })
        .collect();

    let text = tokens.join(" ");
    let annotation = serde_json::json!({
        "id": format!("rand-{seed}"),
        "characters": characters,
        "chapters": [{"start_tok": 0, "end_tok": n}],
        "quotes": quotes,
        "mentions": mentions,
    });
    parse_novel(&text, &annotation.to_string())
}
