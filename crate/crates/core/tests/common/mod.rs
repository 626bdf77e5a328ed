//! Helpers shared by the integration tests: asset paths, random generators
//! and independent oracles.

#![allow(dead_code)]

use std::path::PathBuf;

use deskagent::action_space::{Action, Key, Point, ScreenMeta};
use deskagent::perception::{layout_line, OcrToken};
use proptest::prelude::*;

pub fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets")
}

pub fn scenario_path(name: &str) -> PathBuf {
    assets().join("scenarios").join(format!("{name}.json"))
}

pub fn script_path(name: &str) -> PathBuf {
    assets().join("scripts").join(format!("{name}.txt"))
}

pub fn corpus_path() -> PathBuf {
    assets().join("corpus.json")
}

pub fn recovery_corpus_path() -> PathBuf {
    assets().join("fixtures").join("recovery_corpus.json")
}

pub const FUZZ_SCREEN: ScreenMeta = ScreenMeta {
    width: 1920,
    height: 1080,
};

fn arb_point() -> impl Strategy<Value = Point> {
    (0..FUZZ_SCREEN.width, 0..FUZZ_SCREEN.height).prop_map(|(x, y)| Point::new(x, y))
}

/// Single-line text with at least one visible character.
fn arb_text() -> impl Strategy<Value = String> {
    "[^\r\n]{0,12}[!-~][^\r\n]{0,12}"
}

fn arb_key() -> impl Strategy<Value = Key> {
    proptest::sample::select(Key::table())
}

/// Actions that pass `validate_action` on [`FUZZ_SCREEN`].
pub fn arb_valid_action() -> impl Strategy<Value = Action> {
    prop_oneof![
        arb_text().prop_map(|t| Action::OpenApp {
            name: t.trim().to_string()
        }),
        arb_point().prop_map(|at| Action::Click { at }),
        arb_point().prop_map(|at| Action::DoubleClick { at }),
        arb_text().prop_map(|t| Action::Select {
            target: t.trim().to_string()
        }),
        (arb_point(), arb_text()).prop_map(|(at, text)| Action::Type { at, text }),
        (arb_point(), arb_point()).prop_map(|(from, to)| Action::Drag { from, to }),
        (arb_point(), -500i32..=500).prop_map(|(at, amount)| Action::Scroll { at, amount }),
        proptest::collection::vec(arb_key(), 1..4).prop_map(|keys| Action::Shortcut { keys }),
        Just(Action::Stop),
    ]
}

/// Words for random documents. Some carry edge punctuation or capitals so
/// matching has to normalize.
pub const VOCAB: &[&str] = &[
    "the", "The", "cat", "dog.", "sat", "on", "mat,", "a", "quick", "brown", "fox", "lazy",
    "\"quoted\"", "end!", "Start", "report;", "day", "night", "it's", "red", "blue",
];

/// A document of `words` laid out on wrapped lines of `per_line` words.
pub fn layout_document(words: &[String], per_line: usize) -> Vec<OcrToken> {
    let mut tokens = Vec::new();
    for (line, chunk) in words.chunks(per_line.max(1)).enumerate() {
        let origin = Point::new(16, 80 + line as u32 * 16);
        tokens.extend(layout_line(&chunk.join(" "), origin, (8, 16), line as u32));
    }
    tokens
}

/// Matching form used by the oracle, written independently of the
/// library: lowercase and strip `.,;:!?"'` from both ends.
pub fn oracle_norm(word: &str) -> String {
    word.trim_matches(|c| ".,;:!?\"'".contains(c)).to_lowercase()
}

/// Brute-force span search: every pair of (start window, end window), keep
/// the pairs where the end window starts at or after the start window and
/// does not finish inside it, and take the smallest by (start, end) token.
pub fn brute_force_span(start: &str, end: &str, tokens: &[OcrToken]) -> Option<(usize, usize)> {
    let norm: Vec<String> = tokens.iter().map(|t| oracle_norm(&t.text)).collect();
    let phrase = |p: &str| -> Vec<String> {
        p.split_whitespace()
            .map(oracle_norm)
            .filter(|w| !w.is_empty())
            .collect()
    };
    let (s, e) = (phrase(start), phrase(end));
    if s.is_empty() || e.is_empty() {
        return None;
    }
    let matches_at = |words: &Vec<String>, i: usize| {
        i + words.len() <= norm.len() && (0..words.len()).all(|k| norm[i + k] == words[k])
    };
    let mut best: Option<(usize, usize)> = None;
    for i in 0..norm.len() {
        if !matches_at(&s, i) {
            continue;
        }
        for j in i..norm.len() {
            if !matches_at(&e, j) {
                continue;
            }
            let (first, last) = (i, j + e.len() - 1);
            if last < i + s.len() - 1 {
                continue;
            }
            if best.is_none_or(|b| (first, last) < b) {
                best = Some((first, last));
            }
        }
    }
    best
}

/// A random document plus start/end phrases. Phrases are usually cut from
/// the document (sometimes recased), occasionally made up.
pub fn arb_span_case() -> impl Strategy<Value = (Vec<String>, usize, String, String)> {
    (1usize..=200, 1usize..=20)
        .prop_flat_map(|(n, per_line)| {
            (
                proptest::collection::vec(proptest::sample::select(VOCAB), n),
                Just(per_line),
                arb_phrase(n),
                arb_phrase(n),
            )
        })
        .prop_map(|(words, per_line, s, e)| {
            let words: Vec<String> = words.into_iter().map(String::from).collect();
            let s = s.render(&words);
            let e = e.render(&words);
            (words, per_line, s, e)
        })
}

#[derive(Debug, Clone)]
pub enum PhraseSpec {
    Window { at: usize, len: usize, upper: bool },
    Invented(String),
}

impl PhraseSpec {
    fn render(&self, words: &[String]) -> String {
        match self {
            PhraseSpec::Window { at, len, upper } => {
                let at = (*at).min(words.len() - 1);
                let end = (at + len).min(words.len());
                let text = words[at..end].join(" ");
                if *upper {
                    text.to_uppercase()
                } else {
                    text
                }
            }
            PhraseSpec::Invented(s) => s.clone(),
        }
    }
}

fn arb_phrase(n: usize) -> impl Strategy<Value = PhraseSpec> {
    prop_oneof![
        8 => (0..n, 1usize..=3, any::<bool>())
            .prop_map(|(at, len, upper)| PhraseSpec::Window { at, len, upper }),
        1 => "(zebra|moon|cat sat|the end)".prop_map(PhraseSpec::Invented),
    ]
}
