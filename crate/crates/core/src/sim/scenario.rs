//! Scenario files: JSON describing the initial desktop and canned web results.
//!
//! ```json
//! {
//!   "version": 1,
//!   "name": "travel_plan",
//!   "focused": "editor",
//!   "apps": {
//!     "editor": { "document": "travel_plan", "text": "line one\nline two" },
//!     "clock": {}
//!   },
//!   "files": { "Documents": { "travel_plan": "line one\nline two" } },
//!   "browser_results": { "weather tokyo": "Tokyo: 21°C, light rain" }
//! }
//! ```
//!
//! Every key under `apps` opens that app. Omitted sections take defaults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action_space::ScreenMeta;

use super::apps::sheet::parse_cell;
use super::apps::{BrowserState, CalculatorState, ClockState, EditorState, FilesState, SheetState};
use super::view::SCREEN;
use super::{AppKind, AppState, DesktopState, Filesystem};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported scenario version {0}")]
    Version(u32),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditorSection {
    #[serde(default)]
    pub document: Option<String>,
    #[serde(default)]
    pub text: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SheetSection {
    #[serde(default)]
    pub cells: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockSection {
    #[serde(default)]
    pub alarms: Vec<String>,
    #[serde(default)]
    pub world_clocks: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilesSection {
    #[serde(default)]
    pub cwd: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmptySection {}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrowserSection {
    /// One tab per query, already showing its canned result. Empty means a
    /// single blank tab.
    #[serde(default)]
    pub tabs: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppsSection {
    pub editor: Option<EditorSection>,
    pub spreadsheet: Option<SheetSection>,
    pub browser: Option<BrowserSection>,
    pub calculator: Option<EmptySection>,
    pub clock: Option<ClockSection>,
    pub files: Option<FilesSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub screen: Option<ScreenMeta>,
    #[serde(default)]
    pub focused: Option<AppKind>,
    #[serde(default)]
    pub clipboard: String,
    #[serde(default)]
    pub apps: AppsSection,
    /// Extra files per folder, on top of the default empty folders.
    #[serde(default)]
    pub files: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default)]
    pub browser_results: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub initial: DesktopState,
    pub browser_results: BTreeMap<String, String>,
    pub screen: ScreenMeta,
}

impl ScenarioFile {
    pub fn build(self) -> Result<Scenario, ScenarioError> {
        if self.version != SCENARIO_VERSION {
            return Err(ScenarioError::Version(self.version));
        }
        let screen = self.screen.unwrap_or(SCREEN);
        if screen.width < SCREEN.width || screen.height < SCREEN.height {
            return Err(ScenarioError::Invalid(format!(
                "screen {}x{} is smaller than the {}x{} layout",
                screen.width, screen.height, SCREEN.width, SCREEN.height
            )));
        }

        let mut state = DesktopState {
            clipboard: self.clipboard,
            filesystem: Filesystem::default(),
            ..Default::default()
        };
        for (folder, files) in self.files {
            for (name, contents) in files {
                state.filesystem.write(&folder, &name, contents);
            }
        }

        let apps = self.apps;
        if let Some(e) = apps.editor {
            let editor = EditorState::from_text(e.document, &e.text);
            state.apps.insert(AppKind::Editor, AppState::Editor(editor));
        }
        if let Some(s) = apps.spreadsheet {
            let mut sheet = SheetState::default();
            for (addr, value) in s.cells {
                let (col, row) = parse_cell(&addr)
                    .ok_or_else(|| ScenarioError::Invalid(format!("bad cell address {addr:?}")))?;
                sheet.set(&super::apps::sheet::cell_name(col, row), &value);
            }
            state.apps.insert(AppKind::Spreadsheet, AppState::Spreadsheet(sheet));
        }
        if let Some(b) = apps.browser {
            let browser = BrowserState::with_pages(&b.tabs, &self.browser_results);
            state.apps.insert(AppKind::Browser, AppState::Browser(browser));
        }
        if apps.calculator.is_some() {
            state.apps.insert(
                AppKind::Calculator,
                AppState::Calculator(CalculatorState::default()),
            );
        }
        if let Some(c) = apps.clock {
            let mut clock = ClockState::default();
            for raw in c.alarms {
                let t = super::apps::clock::normalize_time(&raw)
                    .ok_or_else(|| ScenarioError::Invalid(format!("bad alarm time {raw:?}")))?;
                clock.alarms.push(t);
            }
            clock.world_clocks = c.world_clocks;
            state.apps.insert(AppKind::Clock, AppState::Clock(clock));
        }
        if let Some(f) = apps.files {
            let mut files = FilesState::default();
            if let Some(cwd) = f.cwd {
                if !state.filesystem.folders.contains_key(&cwd) {
                    return Err(ScenarioError::Invalid(format!("unknown folder {cwd:?}")));
                }
                files.cwd = cwd;
            }
            state.apps.insert(AppKind::Files, AppState::Files(files));
        }

        if let Some(kind) = self.focused {
            if !state.apps.contains_key(&kind) {
                return Err(ScenarioError::Invalid(format!(
                    "focused app {kind} is not open"
                )));
            }
            state.focused = Some(kind);
        }

        Ok(Scenario {
            name: self.name,
            initial: state,
            browser_results: self.browser_results,
            screen,
        })
    }
}

impl Scenario {
    pub fn parse(json: &str) -> Result<Scenario, ScenarioError> {
        serde_json::from_str::<ScenarioFile>(json)?.build()
    }

    /// A scenario with no open apps and no canned results.
    pub fn empty() -> Scenario {
        Scenario {
            name: "empty".into(),
            initial: DesktopState::default(),
            browser_results: BTreeMap::new(),
            screen: SCREEN,
        }
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<(DesktopState, Scenario), ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let scenario = Scenario::parse(&text)?;
    Ok((scenario.initial.clone(), scenario))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_scenario_has_no_apps() {
        let s = Scenario::parse(r#"{"version": 1, "name": "empty"}"#).unwrap();
        assert!(s.initial.apps.is_empty());
        assert_eq!(s.initial.focused, None);
        assert_eq!(s, Scenario::empty());
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            r#"{"version": 2, "name": "x"}"#,
            r#"{"version": 1, "name": "x", "focused": "editor"}"#,
            r#"{"version": 1, "name": "x", "apps": {"spreadsheet": {"cells": {"Z9": "1"}}}}"#,
            r#"{"version": 1, "name": "x", "screen": {"width": 640, "height": 480}}"#,
            r#"{"version": 1, "name": "x", "bogus": true}"#,
        ] {
            assert!(Scenario::parse(bad).is_err(), "{bad}");
        }
    }
}
