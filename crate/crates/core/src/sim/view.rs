//! Screen geometry and the per-frame view shared by `observe` and `execute`.
//! Hit testing runs against the same controls that become marked elements,
//! so an element's center always lands on that element.

use crate::action_space::{Point, ScreenMeta};
use crate::perception::{layout_line, A11yNode, OcrToken, Rect};

use super::AppKind;

pub const SCREEN: ScreenMeta = ScreenMeta {
    width: 1280,
    height: 800,
};
pub const GLYPH_W: u32 = 8;
pub const GLYPH_H: u32 = 16;
pub const TOOLBAR_TOP: u32 = 32;
pub const TOOLBAR_BOTTOM: u32 = 56;
pub const CONTENT_TOP: u32 = 64;
pub const CONTENT_BOTTOM: u32 = 784;
pub const TEXT_LEFT: u32 = 16;
/// Characters per wrapped text line in document-like areas.
pub const WRAP_COLS: usize = 150;

/// Something the pointer or keyboard can act on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Control {
    Launch(AppKind),
    EditorButton(EditorButton),
    EditorFileName,
    Document,
    Cell(String),
    BrowserButton(BrowserButton),
    Address,
    TabButton(usize),
    Page,
    CalcKey(char),
    AlarmInput,
    AddAlarm,
    CityInput,
    AddCity,
    Folder(String),
    File(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditorButton {
    Bold,
    Underline,
    Center,
    Spacing15,
    Spacing10,
    Save,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrowserButton {
    Back,
    Forward,
    Refresh,
    NewTab,
    Go,
}

#[derive(Debug, Default)]
pub struct View {
    pub title: String,
    sections: Vec<A11yNode>,
    controls: Vec<(Control, Rect)>,
    pub tokens: Vec<OcrToken>,
    /// Global editor word index for each token, when the token is document text.
    pub token_words: Vec<Option<usize>>,
    next_line: u32,
}

impl View {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            ..Default::default()
        }
    }

    /// Adds a non-interactive grouping node; returns its handle.
    pub fn section(&mut self, role: &str, name: &str, rect: Rect) -> usize {
        self.sections.push(A11yNode::new(role, name, rect, false));
        self.sections.len() - 1
    }

    pub fn control(&mut self, section: usize, control: Control, role: &str, name: impl Into<String>, rect: Rect) {
        debug_assert!(
            self.controls.iter().all(|(_, r)| !overlaps(r, &rect)),
            "overlapping control {control:?}"
        );
        self.sections[section]
            .children
            .push(A11yNode::new(role, name, rect, true));
        self.controls.push((control, rect));
    }

    /// Lays a run of words at `origin` as its own OCR line; returns the index
    /// of its first token.
    pub fn text(&mut self, words: &str, origin: Point) -> usize {
        let line = self.begin_line();
        self.text_in_line(line, words, origin)
    }

    pub fn begin_line(&mut self) -> u32 {
        self.next_line += 1;
        self.next_line - 1
    }

    /// Adds words to an existing line. Callers add runs left to right.
    pub fn text_in_line(&mut self, line: u32, words: &str, origin: Point) -> usize {
        let first = self.tokens.len();
        let toks = layout_line(words, origin, (GLYPH_W, GLYPH_H), line);
        self.token_words.extend(std::iter::repeat_n(None, toks.len()));
        self.tokens.extend(toks);
        first
    }

    pub fn tree(&self) -> A11yNode {
        A11yNode::new(
            "window",
            self.title.clone(),
            Rect::new(0, 0, SCREEN.width, SCREEN.height),
            false,
        )
        .with_children(self.sections.clone())
    }

    pub fn hit(&self, p: Point) -> Option<&Control> {
        self.controls
            .iter()
            .find(|(_, rect)| rect.contains(p))
            .map(|(c, _)| c)
    }

    pub fn control_rect(&self, control: &Control) -> Option<Rect> {
        self.controls
            .iter()
            .find(|(c, _)| c == control)
            .map(|(_, r)| *r)
    }

    pub fn controls(&self) -> impl Iterator<Item = &(Control, Rect)> {
        self.controls.iter()
    }
}

fn overlaps(a: &Rect, b: &Rect) -> bool {
    a.left < b.right && b.left < a.right && a.top < b.bottom && b.top < a.bottom
}

/// Places buttons left to right in the toolbar row, each sized to its label.
pub struct ToolbarCursor {
    pub x: u32,
}

impl Default for ToolbarCursor {
    fn default() -> Self {
        Self::new()
    }
}

impl ToolbarCursor {
    pub fn new() -> Self {
        Self { x: 8 }
    }

    pub fn next(&mut self, label: &str) -> Rect {
        self.next_width(label.chars().count() as u32 * GLYPH_W + 16)
    }

    pub fn next_width(&mut self, width: u32) -> Rect {
        let rect = Rect::new(self.x, TOOLBAR_TOP, self.x + width, TOOLBAR_BOTTOM);
        self.x += width + 8;
        rect
    }
}

/// Greedy word wrap; each returned row is a range of word indices.
pub fn wrap(words: &[&str], cols: usize) -> Vec<std::ops::Range<usize>> {
    let mut rows = Vec::new();
    let mut start = 0;
    let mut width = 0;
    for (i, w) in words.iter().enumerate() {
        let len = w.chars().count();
        let needed = if i == start { len } else { width + 1 + len };
        if i > start && needed > cols {
            rows.push(start..i);
            start = i;
            width = len;
        } else {
            width = needed;
        }
    }
    rows.push(start..words.len());
    rows
}
