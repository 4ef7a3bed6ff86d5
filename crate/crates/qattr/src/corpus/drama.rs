//! Parser for the drama-play markup format.
//!
//! Format: a single `<play id="..." title="..." author="...">` element
//! containing optional `<act n="...">` blocks, optional `<scene n="...">`
//! blocks, and speaker lines `<sp who="CHARACTER">text</sp>`. Tags are
//! lowercase, attribute values double-quoted, and nesting never exceeds
//! play > act > scene > sp. Text outside `<sp>` blocks (stage directions)
//! is discarded.
//!
//! Segmentation: scenes when any `<scene>` tag is present, else acts, else
//! a single whole-play segment (flagged ineligible for scene-level splits).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::token::{tokenize, Token};
use crate::corpus::Character;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SegmentKind {
    Scene,
    Act,
    WholePlay,
}

/// One speaker line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker_id: String,
    pub text: String,
    /// Tokenization of `text`; offsets are relative to `text`.
    pub tokens: Vec<Token>,
    /// Position within the owning segment, 0-based.
    pub segment_ordinal: usize,
}

/// A contiguous stretch of a play: a scene, an act, or the whole play.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Human-readable position, e.g. "a2.s1".
    pub label: String,
    pub utterances: Vec<Utterance>,
    /// Speaker ids appearing in this segment.
    pub characters: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Play {
    pub id: String,
    pub title: String,
    pub author: String,
    pub segments: Vec<Segment>,
    pub characters: BTreeMap<String, Character>,
    /// False when the markup had neither `<scene>` nor `<act>` tags.
    pub scene_split_eligible: bool,
}

impl Play {
    pub fn utterance_count(&self) -> usize {
        self.segments.iter().map(|s| s.utterances.len()).sum()
    }
}

/// Parse a single play from markup. Errors carry 1-based line numbers.
pub fn parse_play(markup: &str) -> Result<Play> {
    let mut scanner = Scanner::new(markup);

    let mut header: Option<(String, String, String, usize)> = None;
    let mut play_closed = false;
    let mut acts: Vec<String> = Vec::new();
    let mut scenes: Vec<SceneRec> = Vec::new();
    let mut sps: Vec<SpRec> = Vec::new();

    let mut open_act: Option<usize> = None;
    let mut open_act_line = 0;
    let mut open_scene: Option<usize> = None;
    let mut open_scene_line = 0;
    let mut open_sp: Option<SpOpen> = None;

    while let Some(event) = scanner.next_event()? {
        match event {
            Event::Text { text, .. } => {
                if let Some(sp) = open_sp.as_mut() {
                    sp.text.push_str(text);
                }
                // Otherwise a stage direction or inter-tag whitespace: dropped.
            }
            Event::Open { name, attrs, line } => {
                if play_closed {
                    return Err(Error::parse(line, format!("<{name}> after </play>")));
                }
                if let Some(sp) = &open_sp {
                    return Err(Error::parse(
                        line,
                        format!("<{name}> inside <sp> opened on line {}", sp.line),
                    ));
                }
                match name {
                    "play" => {
                        if header.is_some() {
                            return Err(Error::parse(line, "multiple <play> tags"));
                        }
                        let id = require_attr(&attrs, "play", "id", line)?;
                        let title = require_attr(&attrs, "play", "title", line)?;
                        let author = require_attr(&attrs, "play", "author", line)?;
                        reject_unknown_attrs(&attrs, &["id", "title", "author"], "play", line)?;
                        header = Some((id, title, author, line));
                    }
                    "act" => {
                        ensure_in_play(&header, play_closed, "act", line)?;
                        if open_act.is_some() || open_scene.is_some() {
                            return Err(Error::parse(line, "<act> nested inside act or scene"));
                        }
                        let n = require_attr(&attrs, "act", "n", line)?;
                        reject_unknown_attrs(&attrs, &["n"], "act", line)?;
                        open_act = Some(acts.len());
                        open_act_line = line;
                        acts.push(n);
                    }
                    "scene" => {
                        ensure_in_play(&header, play_closed, "scene", line)?;
                        if open_scene.is_some() {
                            return Err(Error::parse(line, "<scene> nested inside scene"));
                        }
                        let n = require_attr(&attrs, "scene", "n", line)?;
                        reject_unknown_attrs(&attrs, &["n"], "scene", line)?;
                        open_scene = Some(scenes.len());
                        open_scene_line = line;
                        scenes.push(SceneRec { n, act: open_act });
                    }
                    "sp" => {
                        ensure_in_play(&header, play_closed, "sp", line)?;
                        let who = require_attr(&attrs, "sp", "who", line)?;
                        reject_unknown_attrs(&attrs, &["who"], "sp", line)?;
                        let who = who.trim().to_string();
                        if who.is_empty() {
                            return Err(Error::parse(line, "<sp> has empty who attribute"));
                        }
                        if who.contains(',') {
                            return Err(Error::parse(
                                line,
                                format!("<sp who=\"{who}\">: multi-speaker lines are not supported"),
                            ));
                        }
                        open_sp = Some(SpOpen { who, text: String::new(), line });
                    }
                    other => {
                        return Err(Error::parse(line, format!("unknown tag <{other}>")));
                    }
                }
            }
            Event::Close { name, line } => match name {
                "sp" => {
                    let sp = open_sp
                        .take()
                        .ok_or_else(|| Error::parse(line, "</sp> without open <sp>"))?;
                    let text = sp.text.trim().to_string();
                    let tokens = tokenize(&text);
                    if tokens.is_empty() {
                        return Err(Error::parse(
                            sp.line,
                            format!("empty utterance for speaker \"{}\"", sp.who),
                        ));
                    }
                    sps.push(SpRec {
                        who: sp.who,
                        text,
                        tokens,
                        line: sp.line,
                        act: open_act,
                        scene: open_scene,
                    });
                }
                "scene" => {
                    if open_sp.is_some() {
                        return Err(Error::parse(line, "</scene> inside <sp>"));
                    }
                    if open_scene.take().is_none() {
                        return Err(Error::parse(line, "</scene> without open <scene>"));
                    }
                }
                "act" => {
                    if open_sp.is_some() || open_scene.is_some() {
                        return Err(Error::parse(line, "</act> closes unfinished scene or sp"));
                    }
                    if open_act.take().is_none() {
                        return Err(Error::parse(line, "</act> without open <act>"));
                    }
                }
                "play" => {
                    if open_sp.is_some() || open_scene.is_some() || open_act.is_some() {
                        return Err(Error::parse(line, "</play> closes unfinished element"));
                    }
                    if header.is_none() || play_closed {
                        return Err(Error::parse(line, "</play> without open <play>"));
                    }
                    play_closed = true;
                }
                other => {
                    return Err(Error::parse(line, format!("unknown closing tag </{other}>")));
                }
            },
        }
    }

    if let Some(sp) = &open_sp {
        return Err(Error::parse(sp.line, "unclosed <sp> at end of input"));
    }
    if open_scene.is_some() {
        return Err(Error::parse(open_scene_line, "unclosed <scene> at end of input"));
    }
    if open_act.is_some() {
        return Err(Error::parse(open_act_line, "unclosed <act> at end of input"));
    }
    let (id, title, author, play_line) =
        header.ok_or_else(|| Error::parse(1, "no <play> element found"))?;
    if !play_closed {
        return Err(Error::parse(play_line, "unclosed <play> at end of input"));
    }

    assemble_play(id, title, author, acts, scenes, sps)
}

struct SceneRec {
    n: String,
    act: Option<usize>,
}

struct SpRec {
    who: String,
    text: String,
    tokens: Vec<Token>,
    line: usize,
    act: Option<usize>,
    scene: Option<usize>,
}

struct SpOpen {
    who: String,
    text: String,
    line: usize,
}

fn ensure_in_play(
    header: &Option<(String, String, String, usize)>,
    play_closed: bool,
    tag: &str,
    line: usize,
) -> Result<()> {
    if header.is_none() || play_closed {
        return Err(Error::parse(line, format!("<{tag}> outside <play>")));
    }
    Ok(())
}

fn require_attr(attrs: &[(String, String)], tag: &str, key: &str, line: usize) -> Result<String> {
    attrs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.clone())
        .ok_or_else(|| Error::parse(line, format!("<{tag}> missing required attribute {key}")))
}

fn reject_unknown_attrs(
    attrs: &[(String, String)],
    allowed: &[&str],
    tag: &str,
    line: usize,
) -> Result<()> {
    for (k, _) in attrs {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::parse(line, format!("<{tag}> has unknown attribute {k}")));
        }
    }
    let mut seen = BTreeSet::new();
    for (k, _) in attrs {
        if !seen.insert(k) {
            return Err(Error::parse(line, format!("<{tag}> repeats attribute {k}")));
        }
    }
    Ok(())
}

fn assemble_play(
    id: String,
    title: String,
    author: String,
    acts: Vec<String>,
    scenes: Vec<SceneRec>,
    sps: Vec<SpRec>,
) -> Result<Play> {
    let kind = if !scenes.is_empty() {
        SegmentKind::Scene
    } else if !acts.is_empty() {
        SegmentKind::Act
    } else {
        SegmentKind::WholePlay
    };

    let mut segments: Vec<Segment> = match kind {
        SegmentKind::Scene => scenes
            .iter()
            .map(|s| {
                let label = match s.act {
                    Some(a) => format!("a{}.s{}", acts[a], s.n),
                    None => format!("s{}", s.n),
                };
                empty_segment(kind, label)
            })
            .collect(),
        SegmentKind::Act => acts
            .iter()
            .map(|n| empty_segment(kind, format!("a{n}")))
            .collect(),
        SegmentKind::WholePlay => vec![empty_segment(kind, "play".to_string())],
    };

    let mut characters: BTreeMap<String, Character> = BTreeMap::new();
    for sp in sps {
        let seg_idx = match kind {
            SegmentKind::Scene => sp.scene.ok_or_else(|| {
                Error::parse(sp.line, "speaker line outside <scene> in a play that uses scenes")
            })?,
            SegmentKind::Act => sp.act.ok_or_else(|| {
                Error::parse(sp.line, "speaker line outside <act> in a play that uses acts")
            })?,
            SegmentKind::WholePlay => 0,
        };
        characters
            .entry(sp.who.clone())
            .or_insert_with(|| Character::simple(&sp.who));
        let seg = &mut segments[seg_idx];
        seg.characters.insert(sp.who.clone());
        seg.utterances.push(Utterance {
            speaker_id: sp.who,
            text: sp.text,
            tokens: sp.tokens,
            segment_ordinal: seg.utterances.len(),
        });
    }

    Ok(Play {
        id,
        title,
        author,
        segments,
        characters,
        scene_split_eligible: kind != SegmentKind::WholePlay,
    })
}

fn empty_segment(kind: SegmentKind, label: String) -> Segment {
    Segment {
        kind,
        label,
        utterances: Vec::new(),
        characters: BTreeSet::new(),
    }
}

enum Event<'a> {
    Text { text: &'a str },
    Open { name: &'a str, attrs: Vec<(String, String)>, line: usize },
    Close { name: &'a str, line: usize },
}

struct Scanner<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Scanner<'a> {
    fn new(src: &'a str) -> Self {
        Scanner { src, pos: 0, line: 1 }
    }

    fn advance_to(&mut self, new_pos: usize) {
        self.line += self.src[self.pos..new_pos].matches('\n').count();
        self.pos = new_pos;
    }

    fn next_event(&mut self) -> Result<Option<Event<'a>>> {
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let rest = &self.src[self.pos..];
        match rest.find('<') {
            Some(0) => {
                let open_line = self.line;
                let body_start = self.pos + 1;
                let Some(end) = find_tag_end(&self.src[body_start..]) else {
                    return Err(Error::parse(open_line, "unclosed tag (no matching >)"));
                };
                let body = &self.src[body_start..body_start + end];
                let event = parse_tag(body, open_line)?;
                self.advance_to(body_start + end + 1);
                Ok(Some(event))
            }
            Some(offset) => {
                let text = &rest[..offset];
                self.advance_to(self.pos + offset);
                Ok(Some(Event::Text { text }))
            }
            None => {
                let text = rest;
                self.advance_to(self.src.len());
                Ok(Some(Event::Text { text }))
            }
        }
    }
}

/// Byte offset of the `>` that ends the tag, skipping quoted attribute values.
fn find_tag_end(s: &str) -> Option<usize> {
    let mut in_quote = false;
    for (i, ch) in s.char_indices() {
        match ch {
            '"' => in_quote = !in_quote,
            '>' if !in_quote => return Some(i),
            _ => {}
        }
    }
    None
}

fn parse_tag(body: &str, line: usize) -> Result<Event<'_>> {
    if let Some(name) = body.strip_prefix('/') {
        let name = name.trim();
        if name.is_empty() || !is_tag_name(name) {
            return Err(Error::parse(line, format!("malformed closing tag </{name}>")));
        }
        return Ok(Event::Close { name, line });
    }

    let name_end = body
        .find(|c: char| !c.is_ascii_lowercase())
        .unwrap_or(body.len());
    let name = &body[..name_end];
    if name.is_empty() {
        return Err(Error::parse(line, format!("malformed tag <{body}>")));
    }
    let mut attrs = Vec::new();
    let mut rest = body[name_end..].trim_start();
    while !rest.is_empty() {
        let eq = rest
            .find('=')
            .ok_or_else(|| Error::parse(line, format!("<{name}>: attribute without value")))?;
        let key = rest[..eq].trim();
        if key.is_empty() || !is_tag_name(key) {
            return Err(Error::parse(line, format!("<{name}>: malformed attribute name")));
        }
        let after_eq = rest[eq + 1..].trim_start();
        let Some(value_rest) = after_eq.strip_prefix('"') else {
            return Err(Error::parse(
                line,
                format!("<{name}>: attribute {key} value must be double-quoted"),
            ));
        };
        let Some(close) = value_rest.find('"') else {
            return Err(Error::parse(line, format!("<{name}>: unterminated attribute value")));
        };
        attrs.push((key.to_string(), value_rest[..close].to_string()));
        rest = value_rest[close + 1..].trim_start();
    }
    Ok(Event::Open { name, attrs, line })
}

fn is_tag_name(s: &str) -> bool {
    s.chars().all(|c| c.is_ascii_lowercase())
}
