//! File explorer over the virtual filesystem.

use serde::{Deserialize, Serialize};

use crate::perception::Rect;
use crate::sim::view::{Control, View, CONTENT_BOTTOM, CONTENT_TOP};
use crate::sim::{AppKind, AppState, DesktopState, EditorState, Filesystem};

const SIDEBAR_RIGHT: u32 = 240;
const ROW_H: u32 = 32;
const MAX_ROWS: usize = ((CONTENT_BOTTOM - CONTENT_TOP) / ROW_H) as usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilesState {
    pub cwd: String,
    pub selected: Option<String>,
}

impl Default for FilesState {
    fn default() -> Self {
        Self {
            cwd: "Documents".into(),
            selected: None,
        }
    }
}

fn row_rect(left: u32, right: u32, i: usize) -> Rect {
    let top = CONTENT_TOP + 8 + i as u32 * ROW_H;
    Rect::new(left, top, right, top + ROW_H - 8)
}

pub fn view(files: &FilesState, fs: &Filesystem) -> View {
    let mut v = View::new(format!("File Explorer - {}", files.cwd));
    let side = v.section("tree", "Folders", Rect::new(0, CONTENT_TOP, SIDEBAR_RIGHT, CONTENT_BOTTOM));
    for (i, folder) in fs.folders.keys().take(MAX_ROWS).enumerate() {
        v.control(
            side,
            Control::Folder(folder.clone()),
            "tree-item",
            folder.clone(),
            row_rect(8, SIDEBAR_RIGHT - 8, i),
        );
    }
    let list = v.section("list", "Files", Rect::new(SIDEBAR_RIGHT, CONTENT_TOP, 1280, CONTENT_BOTTOM));
    if let Some(entries) = fs.folders.get(&files.cwd) {
        for (i, name) in entries.keys().take(MAX_ROWS).enumerate() {
            let label = if files.selected.as_deref() == Some(name) {
                format!("{name} (selected)")
            } else {
                name.clone()
            };
            v.control(
                list,
                Control::File(name.clone()),
                "list-item",
                label,
                row_rect(SIDEBAR_RIGHT + 8, 1272, i),
            );
        }
    }
    v
}

/// Loads `folder/name` into the editor and focuses it.
fn open_file(state: &mut DesktopState, name: &str) {
    let Some(cwd) = state.files().map(|f| f.cwd.clone()) else {
        return;
    };
    let Some(contents) = state.filesystem.read(&cwd, name).map(str::to_string) else {
        return;
    };
    let editor = EditorState::from_text(Some(name.to_string()), &contents);
    state.apps.insert(AppKind::Editor, AppState::Editor(editor));
    state.focus(AppKind::Editor);
}

pub fn activate(state: &mut DesktopState, control: &Control, double: bool) {
    match control {
        Control::Folder(folder) => {
            if let Some(files) = state.files_mut() {
                files.cwd = folder.clone();
                files.selected = None;
            }
        }
        Control::File(name) => {
            if double {
                open_file(state, name);
            } else if let Some(files) = state.files_mut() {
                files.selected = Some(name.clone());
            }
        }
        _ => {}
    }
}

pub fn shortcut(state: &mut DesktopState, combo: &str) {
    if combo == "enter" {
        if let Some(name) = state.files().and_then(|f| f.selected.clone()) {
            open_file(state, &name);
        }
    }
}
