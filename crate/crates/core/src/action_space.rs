//! Constrained action vocabulary shared by the decision agent, traces and the
//! simulated desktop.
//!
//! Canonical surface syntax, one action per line:
//!
//! ```text
//! Open App (Browser)
//! Click (512, 384)
//! Double Click (512, 384)
//! Select (the last paragraph)
//! Type (100, 200) [hello world]
//! Drag (10, 20) (30, 40)
//! Scroll (640, 400) (-3)
//! Shortcut (ctrl+s)
//! Stop
//! ```
//!
//! Parsing is tolerant: kind names ignore case, spaces and underscores
//! (`openapp`, `Open_App` and `OPEN APP` are the same kind) and whitespace
//! around tuple members is ignored. Serialization always emits the form above.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer pixel position on screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

impl Point {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A normalized key name from the fixed key table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Key(String);

const MODIFIERS: [&str; 4] = ["ctrl", "alt", "shift", "cmd"];
const NAMED_KEYS: [&str; 3] = ["enter", "tab", "esc"];

impl Key {
    /// Normalizes `name` against the key table. Returns `None` for names
    /// outside the table.
    pub fn parse(name: &str) -> Option<Key> {
        let lower = name.trim().to_ascii_lowercase();
        let canonical = match lower.as_str() {
            "control" => "ctrl",
            "command" | "win" | "super" | "meta" => "cmd",
            "return" => "enter",
            "escape" => "esc",
            other => other,
        };
        let ok = MODIFIERS.contains(&canonical)
            || NAMED_KEYS.contains(&canonical)
            || (canonical.len() == 1 && canonical.chars().all(|c| c.is_ascii_alphanumeric()))
            || canonical
                .strip_prefix('f')
                .and_then(|n| n.parse::<u8>().ok())
                .is_some_and(|n| (1..=12).contains(&n) && !canonical.starts_with("f0"));
        ok.then(|| Key(canonical.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_modifier(&self) -> bool {
        MODIFIERS.contains(&self.0.as_str())
    }

    /// Every key in the table, modifiers first.
    pub fn table() -> Vec<Key> {
        let mut keys: Vec<Key> = MODIFIERS
            .iter()
            .chain(NAMED_KEYS.iter())
            .map(|k| Key(k.to_string()))
            .collect();
        keys.extend(('a'..='z').chain('0'..='9').map(|c| Key(c.to_string())));
        keys.extend((1..=12).map(|n| Key(format!("f{n}"))));
        keys
    }
}

impl TryFrom<String> for Key {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Key::parse(&value).ok_or_else(|| format!("unknown key name `{value}`"))
    }
}

impl From<Key> for String {
    fn from(key: Key) -> String {
        key.0
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One step of GUI interaction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    OpenApp { name: String },
    Click { at: Point },
    DoubleClick { at: Point },
    /// Resolved into a [`Action::Drag`] by the perception module before it
    /// reaches the environment.
    Select { target: String },
    Type { at: Point, text: String },
    Drag { from: Point, to: Point },
    /// Signed line count, positive scrolls up.
    Scroll { at: Point, amount: i32 },
    Shortcut { keys: Vec<Key> },
    Stop,
}

/// The nine action kinds, in vocabulary order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    OpenApp,
    Click,
    DoubleClick,
    Select,
    Type,
    Drag,
    Scroll,
    Shortcut,
    Stop,
}

impl ActionKind {
    pub const ALL: [ActionKind; 9] = [
        ActionKind::OpenApp,
        ActionKind::Click,
        ActionKind::DoubleClick,
        ActionKind::Select,
        ActionKind::Type,
        ActionKind::Drag,
        ActionKind::Scroll,
        ActionKind::Shortcut,
        ActionKind::Stop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::OpenApp => "Open App",
            ActionKind::Click => "Click",
            ActionKind::DoubleClick => "Double Click",
            ActionKind::Select => "Select",
            ActionKind::Type => "Type",
            ActionKind::Drag => "Drag",
            ActionKind::Scroll => "Scroll",
            ActionKind::Shortcut => "Shortcut",
            ActionKind::Stop => "Stop",
        }
    }

    fn from_name(name: &str) -> Option<ActionKind> {
        let folded: String = name
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
            .flat_map(char::to_lowercase)
            .collect();
        ActionKind::ALL.into_iter().find(|k| {
            k.name()
                .chars()
                .filter(|c| !c.is_whitespace())
                .flat_map(char::to_lowercase)
                .eq(folded.chars())
        })
    }
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::OpenApp { .. } => ActionKind::OpenApp,
            Action::Click { .. } => ActionKind::Click,
            Action::DoubleClick { .. } => ActionKind::DoubleClick,
            Action::Select { .. } => ActionKind::Select,
            Action::Type { .. } => ActionKind::Type,
            Action::Drag { .. } => ActionKind::Drag,
            Action::Scroll { .. } => ActionKind::Scroll,
            Action::Shortcut { .. } => ActionKind::Shortcut,
            Action::Stop => ActionKind::Stop,
        }
    }

    pub fn is_stop(&self) -> bool {
        matches!(self, Action::Stop)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.kind().name();
        match self {
            Action::OpenApp { name: app } => write!(f, "{name} ({app})"),
            Action::Click { at } | Action::DoubleClick { at } => write!(f, "{name} {at}"),
            Action::Select { target } => write!(f, "{name} ({target})"),
            Action::Type { at, text } => write!(f, "{name} {at} [{text}]"),
            Action::Drag { from, to } => write!(f, "{name} {from} {to}"),
            Action::Scroll { at, amount } => write!(f, "{name} {at} ({amount})"),
            Action::Shortcut { keys } => {
                let chord: Vec<&str> = keys.iter().map(Key::as_str).collect();
                write!(f, "{name} ({})", chord.join("+"))
            }
            Action::Stop => f.write_str(name),
        }
    }
}

/// Canonical text for `action`. Inverse of [`parse_action`] for valid actions.
pub fn serialize_action(action: &Action) -> String {
    action.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseErrorKind {
    UnknownKind,
    ArityMismatch,
    MalformedNumber,
    UnknownKey,
}

/// Parse failure with the byte span of the offending input.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind:?} at {}..{}: {message}", span.start, span.end)]
pub struct ActionParseError {
    pub kind: ParseErrorKind,
    pub span: Range<usize>,
    pub message: String,
}

impl ActionParseError {
    fn new(kind: ParseErrorKind, span: Range<usize>, message: impl Into<String>) -> Self {
        Self {
            kind,
            span,
            message: message.into(),
        }
    }
}

/// A delimited group found in the argument tail, with the byte range of its
/// contents relative to the full input.
#[derive(Debug)]
struct Group<'a> {
    body: &'a str,
    span: Range<usize>,
}

struct ArgScanner<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> ArgScanner<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.text.len()
    }

    /// Next `( ... )` group, closed by the first `)`.
    fn paren(&mut self) -> Option<Group<'a>> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        if !rest.starts_with('(') {
            return None;
        }
        let close = rest.find(')')?;
        let start = self.pos + 1;
        let end = self.pos + close;
        self.pos = end + 1;
        Some(Group {
            body: &self.text[start..end],
            span: start..end,
        })
    }

    /// Next `( ... )` group, closed by the last `)` on the line.
    fn greedy_paren(&mut self) -> Option<Group<'a>> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        if !rest.starts_with('(') {
            return None;
        }
        let close = rest.rfind(')')?;
        let start = self.pos + 1;
        let end = self.pos + close;
        self.pos = end + 1;
        Some(Group {
            body: &self.text[start..end],
            span: start..end,
        })
    }

    /// Next `[ ... ]` group, from the first `[` to the last `]`.
    fn greedy_bracket(&mut self) -> Option<Group<'a>> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        if !rest.starts_with('[') {
            return None;
        }
        let close = rest.rfind(']')?;
        let start = self.pos + 1;
        let end = self.pos + close;
        self.pos = end + 1;
        Some(Group {
            body: &self.text[start..end],
            span: start..end,
        })
    }

    fn remaining_span(&self) -> Range<usize> {
        self.pos..self.text.len()
    }
}

fn arity(span: Range<usize>, message: impl Into<String>) -> ActionParseError {
    ActionParseError::new(ParseErrorKind::ArityMismatch, span, message)
}

/// Splits a tuple body on commas and parses each member as an integer.
fn integers(group: &Group<'_>, expected: usize) -> Result<Vec<i64>, ActionParseError> {
    let mut values = Vec::with_capacity(expected);
    let mut offset = group.span.start;
    let members: Vec<&str> = group.body.split(',').collect();
    if members.len() != expected {
        return Err(arity(
            group.span.clone(),
            format!("expected {expected} values, found {}", members.len()),
        ));
    }
    for member in members {
        let trimmed = member.trim();
        let lead = member.len() - member.trim_start().len();
        let span = offset + lead..offset + lead + trimmed.len();
        let value = trimmed.parse::<i64>().map_err(|_| {
            ActionParseError::new(
                ParseErrorKind::MalformedNumber,
                span.clone(),
                format!("`{trimmed}` is not an integer"),
            )
        })?;
        values.push(value);
        offset += member.len() + 1;
    }
    Ok(values)
}

fn point(group: &Group<'_>) -> Result<Point, ActionParseError> {
    let values = integers(group, 2)?;
    let coord = |v: i64| {
        u32::try_from(v).map_err(|_| {
            ActionParseError::new(
                ParseErrorKind::MalformedNumber,
                group.span.clone(),
                format!("coordinate {v} is not a non-negative pixel value"),
            )
        })
    };
    Ok(Point::new(coord(values[0])?, coord(values[1])?))
}

fn require_point(
    scan: &mut ArgScanner<'_>,
    kind: ActionKind,
) -> Result<Point, ActionParseError> {
    let group = scan
        .paren()
        .ok_or_else(|| arity(scan.remaining_span(), format!("{} expects (x, y)", kind.name())))?;
    point(&group)
}

fn parse_keys(group: &Group<'_>) -> Result<Vec<Key>, ActionParseError> {
    let mut keys = Vec::new();
    let mut offset = group.span.start;
    for piece in group.body.split(|c: char| c == '+' || c == ',' || c.is_whitespace()) {
        let span = offset..offset + piece.len();
        offset += piece.len() + 1;
        if piece.is_empty() {
            continue;
        }
        let key = Key::parse(piece).ok_or_else(|| {
            ActionParseError::new(
                ParseErrorKind::UnknownKey,
                span,
                format!("`{piece}` is not in the key table"),
            )
        })?;
        keys.push(key);
    }
    if keys.is_empty() {
        return Err(arity(group.span.clone(), "Shortcut needs at least one key"));
    }
    Ok(keys)
}

/// Parses one decision line into a typed action.
pub fn parse_action(text: &str) -> Result<Action, ActionParseError> {
    let kind_end = text
        .find(['(', '['])
        .unwrap_or(text.len());
    let raw_kind = &text[..kind_end];
    let lead = raw_kind.len() - raw_kind.trim_start().len();
    let kind_span = lead..lead + raw_kind.trim().len();
    let kind = ActionKind::from_name(raw_kind.trim()).ok_or_else(|| {
        ActionParseError::new(
            ParseErrorKind::UnknownKind,
            kind_span.clone(),
            format!("`{}` is not an action kind", raw_kind.trim()),
        )
    })?;

    let mut scan = ArgScanner {
        text,
        pos: kind_end,
    };
    let action = match kind {
        ActionKind::OpenApp | ActionKind::Select => {
            let group = scan.greedy_paren().ok_or_else(|| {
                arity(scan.remaining_span(), format!("{} expects (text)", kind.name()))
            })?;
            let value = group.body.trim().to_string();
            if kind == ActionKind::OpenApp {
                Action::OpenApp { name: value }
            } else {
                Action::Select { target: value }
            }
        }
        ActionKind::Click => Action::Click {
            at: require_point(&mut scan, kind)?,
        },
        ActionKind::DoubleClick => Action::DoubleClick {
            at: require_point(&mut scan, kind)?,
        },
        ActionKind::Type => {
            let at = require_point(&mut scan, kind)?;
            let group = scan
                .greedy_bracket()
                .ok_or_else(|| arity(scan.remaining_span(), "Type expects [text]"))?;
            Action::Type {
                at,
                text: group.body.to_string(),
            }
        }
        ActionKind::Drag => {
            let from = require_point(&mut scan, kind)?;
            let to = require_point(&mut scan, kind)?;
            Action::Drag { from, to }
        }
        ActionKind::Scroll => {
            let at = require_point(&mut scan, kind)?;
            let group = scan
                .paren()
                .ok_or_else(|| arity(scan.remaining_span(), "Scroll expects (value)"))?;
            let value = integers(&group, 1)?[0];
            let amount = i32::try_from(value).map_err(|_| {
                ActionParseError::new(
                    ParseErrorKind::MalformedNumber,
                    group.span.clone(),
                    format!("scroll amount {value} out of range"),
                )
            })?;
            Action::Scroll { at, amount }
        }
        ActionKind::Shortcut => {
            let group = scan
                .paren()
                .ok_or_else(|| arity(scan.remaining_span(), "Shortcut expects (key+key)"))?;
            Action::Shortcut {
                keys: parse_keys(&group)?,
            }
        }
        ActionKind::Stop => Action::Stop,
    };
    if !scan.at_end() {
        return Err(arity(
            scan.remaining_span(),
            format!("unexpected trailing input after {}", kind.name()),
        ));
    }
    Ok(action)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenMeta {
    pub width: u32,
    pub height: u32,
}

impl ScreenMeta {
    pub fn new(width: u32, height: u32) -> Option<Self> {
        (width > 0 && height > 0).then_some(Self { width, height })
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x < self.width && p.y < self.height
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

fn check_point(meta: ScreenMeta, p: Point, x: &'static str, y: &'static str, out: &mut Vec<Violation>) {
    if p.x >= meta.width {
        out.push(Violation {
            field: x,
            message: format!("{x} out of bounds"),
        });
    }
    if p.y >= meta.height {
        out.push(Violation {
            field: y,
            message: format!("{y} out of bounds"),
        });
    }
}

fn check_text(text: &str, field: &'static str, what: &str, out: &mut Vec<Violation>) {
    if text.trim().is_empty() {
        out.push(Violation {
            field,
            message: format!("empty {what}"),
        });
    }
    if text.contains(['\n', '\r']) {
        out.push(Violation {
            field,
            message: format!("{what} contains a line break"),
        });
    }
}

/// Parenthesized values are trimmed on parse, so surrounding whitespace
/// could not survive a round trip.
fn check_trimmed(text: &str, field: &'static str, what: &str, out: &mut Vec<Violation>) {
    if !text.trim().is_empty() && text.trim() != text {
        out.push(Violation {
            field,
            message: format!("{what} has surrounding whitespace"),
        });
    }
}

/// Checks `action` against the screen bounds and the per-kind parameter rules.
/// Never fails early; every violation found is returned.
pub fn validate_action(action: &Action, meta: ScreenMeta) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    match action {
        Action::OpenApp { name } => {
            check_text(name, "name", "app name", &mut out);
            check_trimmed(name, "name", "app name", &mut out);
        }
        Action::Click { at } | Action::DoubleClick { at } | Action::Scroll { at, .. } => {
            check_point(meta, *at, "x", "y", &mut out)
        }
        Action::Select { target } => {
            check_text(target, "target", "select target", &mut out);
            check_trimmed(target, "target", "select target", &mut out);
        }
        Action::Type { at, text } => {
            check_point(meta, *at, "x", "y", &mut out);
            check_text(text, "text", "type text", &mut out);
        }
        Action::Drag { from, to } => {
            check_point(meta, *from, "x1", "y1", &mut out);
            check_point(meta, *to, "x2", "y2", &mut out);
        }
        Action::Shortcut { keys } => {
            if keys.is_empty() {
                out.push(Violation {
                    field: "keys",
                    message: "empty key list".into(),
                });
            }
        }
        Action::Stop => {}
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Human-readable description of the vocabulary, embedded in decision prompts.
pub fn vocabulary() -> &'static str {
    include_str!("../prompts/action_space.txt")
}
