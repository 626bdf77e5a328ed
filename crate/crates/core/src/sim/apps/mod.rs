//! Per-application models and the dispatch from controls to them.

pub mod browser;
pub mod calculator;
pub mod clock;
pub mod editor;
pub mod files;
pub mod sheet;

pub use browser::{BrowserState, Page, Tab};
pub use calculator::CalculatorState;
pub use clock::ClockState;
pub use editor::{EditorState, Paragraph, Word};
pub use files::FilesState;
pub use sheet::SheetState;

use crate::action_space::Point;
use crate::perception::Rect;

use super::view::{Control, View, CONTENT_BOTTOM, CONTENT_TOP};
use super::{AppKind, DesktopState, Scenario};

/// Launcher shown when no application has focus.
pub fn desktop_view() -> View {
    let mut v = View::new("Desktop");
    let dock = v.section("list", "Applications", Rect::new(0, CONTENT_TOP, 240, CONTENT_BOTTOM));
    for (i, kind) in AppKind::ALL.iter().enumerate() {
        let top = CONTENT_TOP + 8 + i as u32 * 48;
        v.control(
            dock,
            Control::Launch(*kind),
            "button",
            kind.display_name(),
            Rect::new(16, top, 216, top + 40),
        );
    }
    v
}

pub fn activate(
    state: &mut DesktopState,
    view: &View,
    control: &Control,
    at: Point,
    double: bool,
    scenario: &Scenario,
) {
    match control {
        Control::Launch(kind) => state.open_app(*kind),
        Control::EditorButton(_) | Control::EditorFileName | Control::Document => {
            editor::activate(state, view, control, at, double)
        }
        Control::Cell(_) => sheet::activate(state, control),
        Control::BrowserButton(_) | Control::Address | Control::TabButton(_) | Control::Page => {
            browser::activate(state, control, &scenario.browser_results)
        }
        Control::CalcKey(_) => calculator::activate(state, control),
        Control::AlarmInput | Control::AddAlarm | Control::CityInput | Control::AddCity => {
            clock::activate(state, control)
        }
        Control::Folder(_) | Control::File(_) => files::activate(state, control, double),
    }
}

/// `Type` replaces the contents of edit boxes and inserts into documents.
pub fn type_into(state: &mut DesktopState, control: &Control, at: Point, text: &str) {
    match control {
        Control::EditorFileName | Control::Document => editor::type_into(state, control, at, text),
        Control::Cell(_) => sheet::type_into(state, control, text),
        Control::Address => browser::type_into(state, control, text),
        Control::AlarmInput | Control::CityInput => clock::type_into(state, control, text),
        _ => {}
    }
}

pub fn scroll(state: &mut DesktopState, control: &Control, amount: i32) {
    match control {
        Control::Document => {
            if let Some(e) = state.editor_mut() {
                e.scroll_by(amount)
            }
        }
        Control::Cell(_) => {
            if let Some(s) = state.sheet_mut() {
                s.scroll_by(amount)
            }
        }
        Control::Page => {
            if let Some(b) = state.browser_mut() {
                b.scroll_by(amount)
            }
        }
        _ => {}
    }
}

/// Routes a normalized chord to the focused application.
pub fn shortcut(state: &mut DesktopState, combo: &str, scenario: &Scenario) {
    match state.focused {
        Some(AppKind::Editor) => editor::shortcut(state, combo),
        Some(AppKind::Spreadsheet) => sheet::shortcut(state, combo),
        Some(AppKind::Browser) => browser::shortcut(state, combo, &scenario.browser_results),
        Some(AppKind::Calculator) => calculator::shortcut(state, combo),
        Some(AppKind::Clock) => clock::shortcut(state, combo),
        Some(AppKind::Files) => files::shortcut(state, combo),
        None => {}
    }
}
