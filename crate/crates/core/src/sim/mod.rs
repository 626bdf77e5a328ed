//! Deterministic simulated desktop.
//!
//! State lives in [`DesktopState`]; a [`Scenario`] fixes the initial state and
//! the canned browser results. [`observe`] renders the focused application as
//! an accessibility tree plus OCR tokens on an 8x16 monospace grid, and
//! [`execute`] applies one action as a state transition. Actions that hit
//! nothing actionable leave the state untouched.

mod apps;
mod predicates;
mod scenario;
pub mod view;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::action_space::{validate_action, Action, Key, Point, ScreenMeta};
use crate::perception::{index_elements, Observation, Rect};

pub use apps::{
    BrowserState, CalculatorState, ClockState, EditorState, FilesState, Page, Paragraph,
    SheetState, Tab, Word,
};
pub use predicates::{check, TextFormat, StatePredicate};
pub use scenario::{load_scenario, Scenario, ScenarioError, ScenarioFile};
use view::{Control, View, SCREEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppKind {
    Editor,
    Spreadsheet,
    Browser,
    Calculator,
    Clock,
    Files,
}

impl AppKind {
    pub const ALL: [AppKind; 6] = [
        AppKind::Editor,
        AppKind::Spreadsheet,
        AppKind::Browser,
        AppKind::Calculator,
        AppKind::Clock,
        AppKind::Files,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            AppKind::Editor => "Editor",
            AppKind::Spreadsheet => "Spreadsheet",
            AppKind::Browser => "Browser",
            AppKind::Calculator => "Calculator",
            AppKind::Clock => "Clock",
            AppKind::Files => "File Explorer",
        }
    }

    /// Resolves an application name as typed into the system search box.
    pub fn from_name(name: &str) -> Option<AppKind> {
        let folded: String = name
            .to_lowercase()
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect();
        Some(match folded.as_str() {
            "editor" | "notepad" | "word" | "texteditor" => AppKind::Editor,
            "spreadsheet" | "excel" | "sheets" => AppKind::Spreadsheet,
            "browser" | "chrome" | "webbrowser" => AppKind::Browser,
            "calculator" | "calc" => AppKind::Calculator,
            "clock" | "alarms" | "alarmsclock" => AppKind::Clock,
            "files" | "fileexplorer" | "explorer" => AppKind::Files,
            _ => return None,
        })
    }
}

impl fmt::Display for AppKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "app", rename_all = "snake_case")]
pub enum AppState {
    Editor(EditorState),
    Spreadsheet(SheetState),
    Browser(BrowserState),
    Calculator(CalculatorState),
    Clock(ClockState),
    Files(FilesState),
}

impl AppState {
    pub fn fresh(kind: AppKind) -> Self {
        match kind {
            AppKind::Editor => AppState::Editor(EditorState::default()),
            AppKind::Spreadsheet => AppState::Spreadsheet(SheetState::default()),
            AppKind::Browser => AppState::Browser(BrowserState::default()),
            AppKind::Calculator => AppState::Calculator(CalculatorState::default()),
            AppKind::Clock => AppState::Clock(ClockState::default()),
            AppKind::Files => AppState::Files(FilesState::default()),
        }
    }

    pub fn kind(&self) -> AppKind {
        match self {
            AppState::Editor(_) => AppKind::Editor,
            AppState::Spreadsheet(_) => AppKind::Spreadsheet,
            AppState::Browser(_) => AppKind::Browser,
            AppState::Calculator(_) => AppKind::Calculator,
            AppState::Clock(_) => AppKind::Clock,
            AppState::Files(_) => AppKind::Files,
        }
    }
}

/// Selected editor words, as inclusive global word indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub app: AppKind,
    pub start: usize,
    pub end: usize,
}

/// Virtual folder tree: folder name → file name → contents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filesystem {
    pub folders: BTreeMap<String, BTreeMap<String, String>>,
}

pub const DEFAULT_FOLDERS: [&str; 4] = ["Documents", "Downloads", "Music", "Pictures"];

impl Default for Filesystem {
    fn default() -> Self {
        Self {
            folders: DEFAULT_FOLDERS
                .iter()
                .map(|f| (f.to_string(), BTreeMap::new()))
                .collect(),
        }
    }
}

impl Filesystem {
    pub fn read(&self, folder: &str, name: &str) -> Option<&str> {
        self.folders.get(folder)?.get(name).map(String::as_str)
    }

    pub fn write(&mut self, folder: &str, name: &str, contents: String) {
        self.folders
            .entry(folder.to_string())
            .or_default()
            .insert(name.to_string(), contents);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DesktopState {
    pub apps: BTreeMap<AppKind, AppState>,
    pub focused: Option<AppKind>,
    pub clipboard: String,
    pub selection: Option<Selection>,
    pub filesystem: Filesystem,
}

macro_rules! app_accessors {
    ($get:ident, $get_mut:ident, $variant:ident, $ty:ty) => {
        pub fn $get(&self) -> Option<&$ty> {
            match self.apps.get(&AppKind::$variant) {
                Some(AppState::$variant(s)) => Some(s),
                _ => None,
            }
        }

        pub fn $get_mut(&mut self) -> Option<&mut $ty> {
            match self.apps.get_mut(&AppKind::$variant) {
                Some(AppState::$variant(s)) => Some(s),
                _ => None,
            }
        }
    };
}

impl DesktopState {
    app_accessors!(editor, editor_mut, Editor, EditorState);
    app_accessors!(sheet, sheet_mut, Spreadsheet, SheetState);
    app_accessors!(browser, browser_mut, Browser, BrowserState);
    app_accessors!(calculator, calculator_mut, Calculator, CalculatorState);
    app_accessors!(clock, clock_mut, Clock, ClockState);
    app_accessors!(files, files_mut, Files, FilesState);

    /// Hex SHA-256 over the canonical JSON encoding of the whole state.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("desktop state serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Opens `kind` if needed and gives it focus.
    pub fn open_app(&mut self, kind: AppKind) {
        self.apps
            .entry(kind)
            .or_insert_with(|| AppState::fresh(kind));
        self.focus(kind);
    }

    pub fn focus(&mut self, kind: AppKind) {
        if self.focused != Some(kind) {
            self.selection = None;
        }
        self.focused = Some(kind);
    }

    /// Invariant check: focus names an open app and the selection belongs to
    /// the focused app and lies within its buffer.
    pub fn is_consistent(&self) -> bool {
        let focus_ok = self.focused.is_none_or(|k| self.apps.contains_key(&k));
        let selection_ok = self.selection.is_none_or(|s| {
            Some(s.app) == self.focused
                && s.start <= s.end
                && self
                    .editor()
                    .is_some_and(|e| s.end < e.word_count())
        });
        focus_ok && selection_ok
    }
}

/// Result of one `execute` call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub changed: bool,
    /// What the action landed on, for logs.
    pub target: Option<String>,
}

pub(crate) fn build_view(state: &DesktopState) -> View {
    match state.focused.and_then(|k| state.apps.get(&k)) {
        None => apps::desktop_view(),
        Some(AppState::Editor(e)) => apps::editor::view(e, state.selection.as_ref()),
        Some(AppState::Spreadsheet(s)) => apps::sheet::view(s),
        Some(AppState::Browser(b)) => apps::browser::view(b),
        Some(AppState::Calculator(c)) => apps::calculator::view(c),
        Some(AppState::Clock(c)) => apps::clock::view(c),
        Some(AppState::Files(f)) => apps::files::view(f, &state.filesystem),
    }
}

/// Observation of the focused application.
pub fn observe(state: &DesktopState, scenario: &Scenario) -> Observation {
    let view = build_view(state);
    Observation {
        elements: index_elements(&view.tree()),
        window_title: view.title,
        tokens: view.tokens,
        meta: scenario.screen,
        state_digest: state.digest(),
    }
}

/// Bounding box of the control a pointer action at `p` would land on.
pub fn hit_box(state: &DesktopState, p: Point) -> Option<Rect> {
    let view = build_view(state);
    let found = view.hit(p)?;
    view.control_rect(found)
}

/// Applies `action` and returns the successor state.
pub fn execute(
    state: &DesktopState,
    scenario: &Scenario,
    action: &Action,
) -> (DesktopState, ExecutionResult) {
    let mut next = state.clone();
    let target = apply(&mut next, scenario, action);
    let changed = next != *state;
    (next, ExecutionResult { changed, target })
}

/// Modifier-normalized chord string: modifiers in table order, `cmd` folded
/// into `ctrl`, then the remaining keys as given.
pub fn chord(keys: &[Key]) -> String {
    let mut mods: Vec<&str> = Vec::new();
    let mut rest: Vec<&str> = Vec::new();
    for key in keys {
        let name = if key.as_str() == "cmd" { "ctrl" } else { key.as_str() };
        if key.is_modifier() {
            if !mods.contains(&name) {
                mods.push(name);
            }
        } else {
            rest.push(name);
        }
    }
    mods.sort_by_key(|m| ["ctrl", "alt", "shift"].iter().position(|x| x == m));
    mods.into_iter().chain(rest).collect::<Vec<_>>().join("+")
}

fn apply(state: &mut DesktopState, scenario: &Scenario, action: &Action) -> Option<String> {
    if validate_action(action, scenario.screen).is_err() {
        return None;
    }
    let view = build_view(state);
    let hit = |p: &Point| view.hit(*p).cloned();
    match action {
        Action::OpenApp { name } => {
            let kind = AppKind::from_name(name)?;
            state.open_app(kind);
            Some(kind.display_name().to_string())
        }
        Action::Click { at } | Action::DoubleClick { at } => {
            let control = hit(at)?;
            let double = matches!(action, Action::DoubleClick { .. });
            apps::activate(state, &view, &control, *at, double, scenario);
            Some(format!("{control:?}"))
        }
        Action::Type { at, text } => {
            let control = hit(at)?;
            apps::type_into(state, &control, *at, text);
            Some(format!("{control:?}"))
        }
        Action::Drag { from, to } => {
            let control = hit(from)?;
            if control == Control::Document && hit(to) == Some(Control::Document) {
                apps::editor::drag(state, &view, *from, *to);
            }
            Some(format!("{control:?}"))
        }
        Action::Scroll { at, amount } => {
            let control = hit(at)?;
            apps::scroll(state, &control, *amount);
            Some(format!("{control:?}"))
        }
        Action::Shortcut { keys } => {
            let combo = chord(keys);
            apps::shortcut(state, &combo, scenario);
            Some(combo)
        }
        Action::Select { .. } | Action::Stop => None,
    }
}

/// A running simulated desktop: a scenario plus its evolving state.
#[derive(Debug, Clone)]
pub struct Environment {
    scenario: Scenario,
    state: DesktopState,
}

impl Environment {
    pub fn new(scenario: Scenario) -> Self {
        let state = scenario.initial.clone();
        Self { scenario, state }
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self, ScenarioError> {
        let (_, scenario) = load_scenario(path)?;
        Ok(Self::new(scenario))
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn state(&self) -> &DesktopState {
        &self.state
    }

    pub fn screen(&self) -> ScreenMeta {
        self.scenario.screen
    }

    pub fn reset(&mut self) {
        self.state = self.scenario.initial.clone();
    }

    pub fn observe(&self) -> Observation {
        observe(&self.state, &self.scenario)
    }

    pub fn execute(&mut self, action: &Action) -> ExecutionResult {
        let (next, result) = execute(&self.state, &self.scenario, action);
        self.state = next;
        result
    }

    pub fn check(&self, predicate: &StatePredicate) -> bool {
        check(&self.state, predicate)
    }

    pub fn digest(&self) -> String {
        self.state.digest()
    }
}

/// Screen bounds used by every simulated scenario.
pub fn screen() -> ScreenMeta {
    SCREEN
}
