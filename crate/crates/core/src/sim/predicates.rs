//! Declarative success checks over a [`DesktopState`].

use serde::{Deserialize, Serialize};

use super::apps::clock::normalize_time;
use super::apps::sheet::parse_cell;
use super::DesktopState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextFormat {
    Bold,
    Underline,
    Centered,
    LineSpacing(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatePredicate {
    /// Spreadsheet cell (e.g. `B1`) holds exactly `text`, ignoring outer whitespace.
    CellEquals { cell: String, text: String },
    /// Editor buffer contains `text`; whitespace runs compare equal.
    BufferContains { text: String },
    /// Every paragraph in `from..=to` carries `format`. Paragraphs count from
    /// 0, so a leading title line is paragraph 0 and the body starts at 1.
    /// For word formats every word must carry it.
    RangeHasFormat {
        from: usize,
        to: usize,
        format: TextFormat,
    },
    /// An alarm is set for `time` (any form accepted by the clock app).
    AlarmExists { time: String },
    /// A world clock entry equals `city`, case-insensitively.
    WorldClockContains { city: String },
    FileExists { folder: String, name: String },
    /// Some tab (or tab `tab`, 1-based) shows a page containing `text`.
    PageShows {
        text: String,
        #[serde(default)]
        tab: Option<usize>,
    },
    DisplayEquals { text: String },
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn check(state: &DesktopState, p: &StatePredicate) -> bool {
    match p {
        StatePredicate::CellEquals { cell, text } => {
            parse_cell(cell).is_some()
                && state
                    .sheet()
                    .is_some_and(|s| s.get(cell).trim() == text.trim())
        }
        StatePredicate::BufferContains { text } => state
            .editor()
            .is_some_and(|e| squash(&e.text()).contains(&squash(text))),
        StatePredicate::RangeHasFormat { from, to, format } => {
            let Some(editor) = state.editor() else {
                return false;
            };
            if from > to || *to >= editor.paragraphs.len() {
                return false;
            }
            editor.paragraphs[*from..=*to].iter().all(|para| match format {
                TextFormat::Bold => para.words.iter().all(|w| w.bold),
                TextFormat::Underline => para.words.iter().all(|w| w.underline),
                TextFormat::Centered => para.centered,
                TextFormat::LineSpacing(v) => (para.line_spacing - v).abs() < 1e-9,
            })
        }
        StatePredicate::AlarmExists { time } => {
            let Some(want) = normalize_time(time) else {
                return false;
            };
            state.clock().is_some_and(|c| c.alarms.contains(&want))
        }
        StatePredicate::WorldClockContains { city } => state.clock().is_some_and(|c| {
            c.world_clocks
                .iter()
                .any(|w| w.trim().eq_ignore_ascii_case(city.trim()))
        }),
        StatePredicate::FileExists { folder, name } => {
            state.filesystem.read(folder, name).is_some()
        }
        StatePredicate::PageShows { text, tab } => {
            let Some(browser) = state.browser() else {
                return false;
            };
            let want = squash(&text.to_lowercase());
            let shows = |t: &super::Tab| {
                t.current
                    .as_ref()
                    .is_some_and(|p| squash(&p.text.to_lowercase()).contains(&want))
            };
            match tab {
                Some(n) => n
                    .checked_sub(1)
                    .and_then(|i| browser.tabs.get(i))
                    .is_some_and(shows),
                None => browser.tabs.iter().any(shows),
            }
        }
        StatePredicate::DisplayEquals { text } => state
            .calculator()
            .is_some_and(|c| c.display == text.trim()),
    }
}
