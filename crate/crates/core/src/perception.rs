//! Active perception: indexes interactive accessibility nodes into numbered
//! marks, renders the textual observation handed to the decision agent, and
//! turns `Select` requests into exact drag coordinates using OCR tokens.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action_space::{Action, Point, ScreenMeta};
use crate::backends::{AgentRole, Backend, BackendError, ChatMessage};
use crate::prompts;

/// Axis-aligned pixel rectangle, right and bottom exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub left: u32,
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
}

impl Rect {
    pub const fn new(left: u32, top: u32, right: u32, bottom: u32) -> Self {
        Self {
            left,
            top,
            right,
            bottom,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.right <= self.left || self.bottom <= self.top
    }

    pub fn center(&self) -> Point {
        Point::new((self.left + self.right) / 2, (self.top + self.bottom) / 2)
    }

    pub fn left_middle(&self) -> Point {
        Point::new(self.left, (self.top + self.bottom) / 2)
    }

    pub fn right_middle(&self) -> Point {
        Point::new(self.right, (self.top + self.bottom) / 2)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.left && p.x < self.right && p.y >= self.top && p.y < self.bottom
    }

    pub fn within(&self, meta: ScreenMeta) -> bool {
        self.right <= meta.width && self.bottom <= meta.height
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct A11yNode {
    pub role: String,
    pub name: String,
    pub bbox: Rect,
    pub interactive: bool,
    #[serde(default)]
    pub children: Vec<A11yNode>,
}

impl A11yNode {
    pub fn new(role: &str, name: impl Into<String>, bbox: Rect, interactive: bool) -> Self {
        Self {
            role: role.to_string(),
            name: name.into(),
            bbox,
            interactive,
            children: Vec::new(),
        }
    }

    pub fn with_children(mut self, children: Vec<A11yNode>) -> Self {
        self.children = children;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Element {
    pub mark: u32,
    pub role: String,
    pub name: String,
    pub bbox: Rect,
    pub center: Point,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementIndex {
    pub entries: Vec<Element>,
}

impl ElementIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn by_mark(&self, mark: u32) -> Option<&Element> {
        self.entries.get(mark.checked_sub(1)? as usize)
    }

    pub fn find(&self, role: &str, name: &str) -> Option<&Element> {
        self.entries
            .iter()
            .find(|e| e.role == role && e.name == name)
    }
}

/// Collects interactive nodes depth-first and numbers them in reading order.
pub fn index_elements(tree: &A11yNode) -> ElementIndex {
    fn walk<'a>(node: &'a A11yNode, out: &mut Vec<&'a A11yNode>) {
        if node.interactive {
            out.push(node);
        }
        for child in &node.children {
            walk(child, out);
        }
    }
    let mut nodes = Vec::new();
    walk(tree, &mut nodes);
    // stable: equal top-left keeps depth-first order
    nodes.sort_by_key(|n| (n.bbox.top, n.bbox.left));
    let entries = nodes
        .into_iter()
        .zip(1..)
        .map(|(n, mark)| Element {
            mark,
            role: n.role.clone(),
            name: n.name.clone(),
            bbox: n.bbox,
            center: n.bbox.center(),
        })
        .collect();
    ElementIndex { entries }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcrToken {
    pub text: String,
    pub bbox: Rect,
    pub line_id: u32,
    pub column: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSpan {
    pub start_token: usize,
    pub end_token: usize,
    pub start_point: Point,
    pub end_point: Point,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub window_title: String,
    pub elements: ElementIndex,
    pub tokens: Vec<OcrToken>,
    pub meta: ScreenMeta,
    pub state_digest: String,
}

impl Observation {
    /// Whether every element and token lies inside the screen.
    pub fn geometry_ok(&self) -> bool {
        self.elements
            .entries
            .iter()
            .map(|e| e.bbox)
            .chain(self.tokens.iter().map(|t| t.bbox))
            .all(|b| !b.is_degenerate() && b.within(self.meta))
    }

    /// Token text joined into lines, keyed by line id.
    pub fn text_lines(&self) -> Vec<(u32, Vec<&OcrToken>)> {
        let mut lines: BTreeMap<u32, Vec<&OcrToken>> = BTreeMap::new();
        for token in &self.tokens {
            lines.entry(token.line_id).or_default().push(token);
        }
        lines.into_iter().collect()
    }

    pub fn transcript(&self) -> String {
        self.text_lines()
            .into_iter()
            .map(|(_, toks)| {
                toks.iter()
                    .map(|t| t.text.as_str())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Deterministic text layout of an observation: the window title, one line
/// per marked element, then the OCR text line by line.
pub fn render_observation(obs: &Observation) -> String {
    let mut out = format!("Window: {}\n", obs.window_title);
    for e in &obs.elements.entries {
        out.push_str(&format!(
            "[{}] {} \"{}\" @ ({}, {})\n",
            e.mark,
            e.role,
            e.name.replace('"', "\\\""),
            e.center.x,
            e.center.y
        ));
    }
    for (_, toks) in obs.text_lines() {
        let anchor = toks[0].bbox.left_middle();
        let words: Vec<&str> = toks.iter().map(|t| t.text.as_str()).collect();
        out.push_str(&format!("text {}: {}\n", anchor, words.join(" ")));
    }
    out
}

const EDGE_PUNCTUATION: &[char] = &['.', ',', ';', ':', '!', '?', '"', '\''];

/// Matching form of a word: edge punctuation trimmed, lowercased.
pub fn normalize_word(word: &str) -> String {
    word.trim_matches(EDGE_PUNCTUATION).to_lowercase()
}

fn phrase_words(phrase: &str) -> Vec<String> {
    phrase
        .split_whitespace()
        .map(normalize_word)
        .filter(|w| !w.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum LocateError {
    #[error("start text `{phrase}` not found (nearest: {suggestions:?})")]
    StartNotFound {
        phrase: String,
        suggestions: Vec<String>,
    },
    #[error("end text `{phrase}` not found after the start (nearest: {suggestions:?})")]
    EndNotFound {
        phrase: String,
        suggestions: Vec<String>,
    },
}

/// Windows of `len` normalized tokens within edit distance 2 of `phrase`,
/// closest first. Diagnostics only.
fn suggestions(words: &[String], normalized: &[String], from: usize) -> Vec<String> {
    let target = words.join(" ");
    let len = words.len().max(1);
    let mut found: Vec<(usize, usize, String)> = Vec::new();
    if normalized.len() >= len {
        for start in from..=normalized.len() - len {
            let window = normalized[start..start + len].join(" ");
            let dist = strsim::levenshtein(&target, &window);
            if dist <= 2 && !found.iter().any(|(_, _, w)| *w == window) {
                found.push((dist, start, window));
            }
        }
    }
    found.sort();
    found.into_iter().take(5).map(|(_, _, w)| w).collect()
}

fn occurs_at(normalized: &[String], words: &[String], at: usize) -> bool {
    !words.is_empty()
        && at + words.len() <= normalized.len()
        && normalized[at..at + words.len()] == *words
}

/// Finds the earliest occurrence of `start_text` and then the earliest
/// occurrence of `end_text` that begins at or after it and does not end
/// before it.
pub fn locate_span(
    start_text: &str,
    end_text: &str,
    tokens: &[OcrToken],
) -> Result<TextSpan, LocateError> {
    let normalized: Vec<String> = tokens.iter().map(|t| normalize_word(&t.text)).collect();
    let start_words = phrase_words(start_text);
    let end_words = phrase_words(end_text);

    let start = (0..normalized.len())
        .find(|&i| occurs_at(&normalized, &start_words, i))
        .ok_or_else(|| LocateError::StartNotFound {
            phrase: start_text.to_string(),
            suggestions: suggestions(&start_words, &normalized, 0),
        })?;
    let start_last = start + start_words.len() - 1;

    let end_begin = (start..normalized.len())
        .find(|&j| occurs_at(&normalized, &end_words, j) && j + end_words.len() > start_last)
        .ok_or_else(|| LocateError::EndNotFound {
            phrase: end_text.to_string(),
            suggestions: suggestions(&end_words, &normalized, start),
        })?;
    let end = end_begin + end_words.len() - 1;

    Ok(TextSpan {
        start_token: start,
        end_token: end,
        start_point: tokens[start].bbox.left_middle(),
        end_point: tokens[end].bbox.right_middle(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Intent {
    pub start_text: String,
    pub end_text: String,
}

/// Parses the `START:` / `END:` reply of the intention agent.
pub fn parse_intent(reply: &str) -> Option<Intent> {
    let mut start = None;
    let mut end = None;
    for line in reply.lines() {
        let Some((label, value)) = line.split_once(':') else {
            continue;
        };
        let value = value.trim();
        match label.trim().to_ascii_lowercase().as_str() {
            "start" if start.is_none() && !value.is_empty() => start = Some(value.to_string()),
            "end" if end.is_none() && !value.is_empty() => end = Some(value.to_string()),
            _ => {}
        }
    }
    Some(Intent {
        start_text: start?,
        end_text: end?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum SelectError {
    #[error("select target is empty")]
    EmptyTarget,
    #[error("intention reply not understood: {0}")]
    IntentParseFailure(String),
    #[error(transparent)]
    Locate(#[from] LocateError),
    #[error("intention backend: {0}")]
    Backend(#[from] BackendError),
}

pub fn intention_prompt(target: &str, obs: &Observation) -> String {
    prompts::fill(
        prompts::INTENTION,
        &[("target", target), ("transcript", &obs.transcript())],
    )
}

/// Resolves a `Select (target)` into the drag that selects that text.
pub fn resolve_select(
    target: &str,
    obs: &Observation,
    backend: &dyn Backend,
) -> Result<Action, SelectError> {
    if target.trim().is_empty() {
        return Err(SelectError::EmptyTarget);
    }
    let messages = [ChatMessage::user(intention_prompt(target, obs))];
    let reply = backend.complete(&messages, AgentRole::Intention)?;
    let intent = parse_intent(&reply).ok_or_else(|| SelectError::IntentParseFailure(reply.clone()))?;
    let span = locate_span(&intent.start_text, &intent.end_text, &obs.tokens)?;
    Ok(Action::Drag {
        from: span.start_point,
        to: span.end_point,
    })
}

/// Lays words out on a monospace grid starting at `origin`, one token per
/// word, `line_id` fixed. Used by tests and the simulator alike.
pub fn layout_line(words: &str, origin: Point, glyph: (u32, u32), line_id: u32) -> Vec<OcrToken> {
    let (gw, gh) = glyph;
    let mut out = Vec::new();
    let mut col = 0u32;
    for word in words.split(' ') {
        let len = word.chars().count() as u32;
        if len > 0 {
            out.push(OcrToken {
                text: word.to_string(),
                bbox: Rect::new(
                    origin.x + col * gw,
                    origin.y,
                    origin.x + (col + len) * gw,
                    origin.y + gh,
                ),
                line_id,
                column: origin.x / gw + col,
            });
        }
        col += len + 1;
    }
    out
}
