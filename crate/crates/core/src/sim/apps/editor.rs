//! Word-processor model: paragraphs of formatted words, a wrapped document
//! view, drag selection and a formatting ribbon.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::action_space::Point;
use crate::perception::Rect;
use crate::sim::view::{
    wrap, Control, EditorButton, ToolbarCursor, View, CONTENT_BOTTOM, CONTENT_TOP, GLYPH_H,
    GLYPH_W, TEXT_LEFT, WRAP_COLS,
};
use crate::sim::{AppKind, DesktopState, Selection};

const DOC_RECT: Rect = Rect::new(8, CONTENT_TOP, 1272, CONTENT_BOTTOM);
const TEXT_TOP: u32 = CONTENT_TOP + 8;
pub const VISIBLE_ROWS: usize = ((CONTENT_BOTTOM - TEXT_TOP) / GLYPH_H) as usize;
/// Typed words longer than this are split so every token stays on screen.
const MAX_WORD: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    pub text: String,
    #[serde(default)]
    pub bold: bool,
    #[serde(default)]
    pub underline: bool,
}

impl Word {
    pub fn plain(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            bold: false,
            underline: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub words: Vec<Word>,
    pub line_spacing: f64,
    pub centered: bool,
}

impl Paragraph {
    pub fn from_text(text: &str) -> Self {
        Self {
            words: split_words(text),
            line_spacing: 1.0,
            centered: false,
        }
    }

    pub fn text(&self) -> String {
        self.words
            .iter()
            .map(|w| w.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn split_words(text: &str) -> Vec<Word> {
    text.split_whitespace()
        .flat_map(|w| {
            let chars: Vec<char> = w.chars().collect();
            chars
                .chunks(MAX_WORD)
                .map(|c| Word::plain(c.iter().collect::<String>()))
                .collect::<Vec<_>>()
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EditorState {
    /// Name of the file this buffer was opened from or saved as.
    pub document: Option<String>,
    pub paragraphs: Vec<Paragraph>,
    pub scroll: u32,
    pub file_name_input: String,
}

/// One wrapped visual row of the document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub paragraph: usize,
    pub words: Range<usize>,
    /// Global index of the row's first word.
    pub first_global: usize,
    /// Leading blank columns (centered paragraphs).
    pub indent: usize,
}

impl EditorState {
    pub fn from_text(document: Option<String>, text: &str) -> Self {
        Self {
            document,
            paragraphs: text.lines().map(Paragraph::from_text).collect(),
            ..Default::default()
        }
    }

    pub fn text(&self) -> String {
        self.paragraphs
            .iter()
            .map(Paragraph::text)
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn word_count(&self) -> usize {
        self.paragraphs.iter().map(|p| p.words.len()).sum()
    }

    /// (paragraph, word) of a global word index.
    pub fn locate_word(&self, global: usize) -> Option<(usize, usize)> {
        let mut base = 0;
        for (p, para) in self.paragraphs.iter().enumerate() {
            if global < base + para.words.len() {
                return Some((p, global - base));
            }
            base += para.words.len();
        }
        None
    }

    fn words_mut(&mut self, range: Range<usize>) -> impl Iterator<Item = &mut Word> {
        self.paragraphs
            .iter_mut()
            .flat_map(|p| p.words.iter_mut())
            .skip(range.start)
            .take(range.len())
    }

    fn paragraphs_touched(&self, sel: &Selection) -> Range<usize> {
        let first = self.locate_word(sel.start).map_or(0, |(p, _)| p);
        let last = self.locate_word(sel.end).map_or(first, |(p, _)| p);
        first..last + 1
    }

    pub fn rows(&self) -> Vec<Row> {
        let mut rows = Vec::new();
        let mut base = 0;
        for (p, para) in self.paragraphs.iter().enumerate() {
            let words: Vec<&str> = para.words.iter().map(|w| w.text.as_str()).collect();
            for range in wrap(&words, WRAP_COLS) {
                let width: usize = words[range.clone()]
                    .iter()
                    .map(|w| w.chars().count() + 1)
                    .sum::<usize>()
                    .saturating_sub(1);
                let indent = if para.centered {
                    (WRAP_COLS.saturating_sub(width)) / 2
                } else {
                    0
                };
                rows.push(Row {
                    paragraph: p,
                    first_global: base + range.start,
                    words: range,
                    indent,
                });
            }
            base += para.words.len();
        }
        rows
    }

    fn max_scroll(&self) -> u32 {
        self.rows().len().saturating_sub(VISIBLE_ROWS) as u32
    }

    pub fn scroll_by(&mut self, amount: i32) {
        let target = self.scroll as i64 - amount as i64;
        self.scroll = target.clamp(0, self.max_scroll() as i64) as u32;
    }

    /// Inserts typed words at the row/column under `at`, or appends a new
    /// paragraph when the point is below the text.
    fn insert_at(&mut self, at: Point, text: &str) {
        let words = split_words(text);
        if words.is_empty() {
            return;
        }
        let rows = self.rows();
        let row_index = (at.y.saturating_sub(TEXT_TOP) / GLYPH_H) as usize + self.scroll as usize;
        let Some(row) = rows.get(row_index) else {
            self.paragraphs.push(Paragraph {
                words,
                line_spacing: 1.0,
                centered: false,
            });
            return;
        };
        let col = (at.x.saturating_sub(TEXT_LEFT) / GLYPH_W) as usize;
        let col = col.saturating_sub(row.indent);
        let para = &mut self.paragraphs[row.paragraph];
        let mut start_col = 0;
        let mut insert = row.words.end;
        for w in row.words.clone() {
            if start_col >= col {
                insert = w;
                break;
            }
            start_col += para.words[w].text.chars().count() + 1;
        }
        para.words.splice(insert..insert, words);
    }
}

pub fn view(editor: &EditorState, selection: Option<&Selection>) -> View {
    let name = editor.document.as_deref().unwrap_or("Untitled");
    let mut title = format!("Editor - {name}");
    if let Some(sel) = selection {
        title.push_str(&format!(" ({} words selected)", sel.end - sel.start + 1));
    }
    let mut v = View::new(title);

    let bar = v.section("toolbar", "Ribbon", Rect::new(0, 24, 1280, 64));
    let mut cursor = ToolbarCursor::new();
    for (button, label) in [
        (EditorButton::Bold, "Bold"),
        (EditorButton::Underline, "Underline"),
        (EditorButton::Center, "Center"),
        (EditorButton::Spacing15, "Line Spacing 1.5"),
        (EditorButton::Spacing10, "Line Spacing 1.0"),
        (EditorButton::Save, "Save"),
    ] {
        let rect = cursor.next(label);
        v.control(bar, Control::EditorButton(button), "button", label, rect);
    }
    let name_box = cursor.next_width(320);
    let label = if editor.file_name_input.is_empty() {
        "File name".to_string()
    } else {
        format!("File name: {}", editor.file_name_input)
    };
    v.control(bar, Control::EditorFileName, "edit", label, name_box);

    let doc = v.section("pane", "Document area", DOC_RECT);
    v.control(doc, Control::Document, "edit", "Document", DOC_RECT);

    let rows = editor.rows();
    for (screen_row, row) in rows
        .iter()
        .skip(editor.scroll as usize)
        .take(VISIBLE_ROWS)
        .enumerate()
    {
        let para = &editor.paragraphs[row.paragraph];
        let words: Vec<&str> = para.words[row.words.clone()]
            .iter()
            .map(|w| w.text.as_str())
            .collect();
        let origin = Point::new(
            TEXT_LEFT + row.indent as u32 * GLYPH_W,
            TEXT_TOP + screen_row as u32 * GLYPH_H,
        );
        let first = v.text(&words.join(" "), origin);
        for k in 0..words.len() {
            v.token_words[first + k] = Some(row.first_global + k);
        }
    }
    v
}

/// Document token nearest to `p` on its row: one containing the point
/// (edges inclusive) wins, otherwise the closest by horizontal distance.
fn word_near(view: &View, p: Point) -> Option<usize> {
    view.tokens
        .iter()
        .zip(&view.token_words)
        .filter_map(|(t, w)| w.map(|w| (t, w)))
        .filter(|(t, _)| p.y >= t.bbox.top && p.y < t.bbox.bottom)
        .min_by_key(|(t, _)| {
            if p.x < t.bbox.left {
                t.bbox.left - p.x
            } else {
                p.x.saturating_sub(t.bbox.right)
            }
        })
        .map(|(_, w)| w)
}

fn word_under(view: &View, p: Point) -> Option<usize> {
    view.tokens
        .iter()
        .zip(&view.token_words)
        .find(|(t, w)| {
            w.is_some()
                && p.y >= t.bbox.top
                && p.y < t.bbox.bottom
                && p.x >= t.bbox.left
                && p.x <= t.bbox.right
        })
        .and_then(|(_, w)| *w)
}

pub fn drag(state: &mut DesktopState, view: &View, from: Point, to: Point) {
    let (Some(a), Some(b)) = (word_near(view, from), word_near(view, to)) else {
        return;
    };
    state.selection = Some(Selection {
        app: AppKind::Editor,
        start: a.min(b),
        end: a.max(b),
    });
}

fn toggle_words(editor: &mut EditorState, sel: Selection, get: fn(&mut Word) -> &mut bool) {
    let range = sel.start..sel.end + 1;
    let all_set = editor.words_mut(range.clone()).all(|w| *get(w));
    for w in editor.words_mut(range) {
        *get(w) = !all_set;
    }
}

fn apply_button(state: &mut DesktopState, button: EditorButton) {
    if button == EditorButton::Save {
        save(state);
        return;
    }
    let Some(sel) = state.selection.filter(|s| s.app == AppKind::Editor) else {
        return;
    };
    let Some(editor) = state.editor_mut() else {
        return;
    };
    match button {
        EditorButton::Bold => toggle_words(editor, sel, |w| &mut w.bold),
        EditorButton::Underline => toggle_words(editor, sel, |w| &mut w.underline),
        EditorButton::Center => {
            let range = editor.paragraphs_touched(&sel);
            let all = editor.paragraphs[range.clone()].iter().all(|p| p.centered);
            for p in &mut editor.paragraphs[range] {
                p.centered = !all;
            }
        }
        EditorButton::Spacing15 | EditorButton::Spacing10 => {
            let value = if button == EditorButton::Spacing15 { 1.5 } else { 1.0 };
            let range = editor.paragraphs_touched(&sel);
            for p in &mut editor.paragraphs[range] {
                p.line_spacing = value;
            }
        }
        EditorButton::Save => unreachable!(),
    }
}

fn save(state: &mut DesktopState) {
    let Some(editor) = state.editor_mut() else {
        return;
    };
    let name = match editor.file_name_input.trim() {
        "" => match &editor.document {
            Some(doc) => doc.clone(),
            None => return,
        },
        typed => typed.to_string(),
    };
    editor.document = Some(name.clone());
    editor.file_name_input.clear();
    let contents = editor.text();
    state.filesystem.write("Documents", &name, contents);
}

pub fn activate(state: &mut DesktopState, view: &View, control: &Control, at: Point, double: bool) {
    match control {
        Control::EditorButton(button) => apply_button(state, *button),
        Control::Document => {
            if double {
                if let Some(w) = word_under(view, at) {
                    state.selection = Some(Selection {
                        app: AppKind::Editor,
                        start: w,
                        end: w,
                    });
                    return;
                }
            }
            state.selection = None;
        }
        _ => {}
    }
}

pub fn type_into(state: &mut DesktopState, control: &Control, at: Point, text: &str) {
    match control {
        Control::EditorFileName => {
            if let Some(editor) = state.editor_mut() {
                editor.file_name_input = text.trim().to_string();
            }
        }
        Control::Document => {
            if let Some(editor) = state.editor_mut() {
                editor.insert_at(at, text);
                state.selection = None;
            }
        }
        _ => {}
    }
}

pub fn shortcut(state: &mut DesktopState, combo: &str) {
    match combo {
        "ctrl+b" => apply_button(state, EditorButton::Bold),
        "ctrl+u" => apply_button(state, EditorButton::Underline),
        "ctrl+e" => apply_button(state, EditorButton::Center),
        "ctrl+s" => save(state),
        "ctrl+a" => {
            let count = state.editor().map_or(0, EditorState::word_count);
            if count > 0 {
                state.selection = Some(Selection {
                    app: AppKind::Editor,
                    start: 0,
                    end: count - 1,
                });
            }
        }
        "ctrl+c" => {
            if let (Some(sel), Some(editor)) = (state.selection, state.editor()) {
                let words: Vec<String> = editor
                    .paragraphs
                    .iter()
                    .flat_map(|p| p.words.iter())
                    .skip(sel.start)
                    .take(sel.end - sel.start + 1)
                    .map(|w| w.text.clone())
                    .collect();
                state.clipboard = words.join(" ");
            }
        }
        "ctrl+v" => {
            let clip = state.clipboard.clone();
            if let Some(editor) = state.editor_mut() {
                for line in clip.lines().filter(|l| !l.trim().is_empty()) {
                    editor.paragraphs.push(Paragraph::from_text(line));
                }
                state.selection = None;
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_rows_are_indented() {
        let mut e = EditorState::from_text(None, "Title\nbody text");
        e.paragraphs[0].centered = true;
        let rows = e.rows();
        assert_eq!(rows[0].indent, (WRAP_COLS - 5) / 2);
        assert_eq!(rows[1].indent, 0);
        assert_eq!(rows[1].first_global, 1);
    }

    #[test]
    fn insert_before_word_under_point() {
        let mut e = EditorState::from_text(None, "alpha gamma");
        // column 6 is the start of "gamma"
        e.insert_at(Point::new(TEXT_LEFT + 6 * GLYPH_W, TEXT_TOP + 1), "beta");
        assert_eq!(e.text(), "alpha beta gamma");
        e.insert_at(Point::new(TEXT_LEFT, TEXT_TOP + 10 * GLYPH_H), "new para");
        assert_eq!(e.text(), "alpha beta gamma\nnew para");
    }

    #[test]
    fn long_words_are_split() {
        let e = EditorState::from_text(None, &"x".repeat(100));
        assert_eq!(e.word_count(), 3);
    }
}
