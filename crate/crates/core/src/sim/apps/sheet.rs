//! Spreadsheet model: a fixed A–F by 1–100 grid of text cells.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::action_space::Point;
use crate::perception::Rect;
use crate::sim::view::{Control, View, CONTENT_BOTTOM, CONTENT_TOP};
use crate::sim::DesktopState;

pub const COLUMNS: [char; 6] = ['A', 'B', 'C', 'D', 'E', 'F'];
pub const ROWS: u32 = 100;
const CELL_W: u32 = 160;
const CELL_H: u32 = 24;
const GRID_LEFT: u32 = 48;
const GRID_TOP: u32 = CONTENT_TOP + 24;
pub const VISIBLE_ROWS: u32 = (CONTENT_BOTTOM - GRID_TOP) / CELL_H;
/// Characters of cell text drawn before truncation.
const CELL_CHARS: usize = 18;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetState {
    /// Non-empty cells keyed by address such as `B3`.
    pub cells: BTreeMap<String, String>,
    pub active: String,
    pub scroll: u32,
}

impl Default for SheetState {
    fn default() -> Self {
        Self {
            cells: BTreeMap::new(),
            active: "A1".into(),
            scroll: 0,
        }
    }
}

/// Parses `B12` into (column index, 1-based row).
pub fn parse_cell(addr: &str) -> Option<(usize, u32)> {
    let mut chars = addr.trim().chars();
    let col = chars.next()?.to_ascii_uppercase();
    let col = COLUMNS.iter().position(|c| *c == col)?;
    let row: u32 = chars.as_str().parse().ok()?;
    (1..=ROWS).contains(&row).then_some((col, row))
}

pub fn cell_name(col: usize, row: u32) -> String {
    format!("{}{}", COLUMNS[col], row)
}

impl SheetState {
    pub fn get(&self, addr: &str) -> &str {
        self.cells.get(&addr.to_uppercase()).map_or("", String::as_str)
    }

    pub fn set(&mut self, addr: &str, value: &str) {
        let value = value.trim();
        if value.is_empty() {
            self.cells.remove(addr);
        } else {
            self.cells.insert(addr.to_string(), value.to_string());
        }
    }

    fn move_active(&mut self, dcol: i32, drow: i32) {
        let (col, row) = parse_cell(&self.active).unwrap_or((0, 1));
        let col = (col as i32 + dcol).clamp(0, COLUMNS.len() as i32 - 1) as usize;
        let row = (row as i32 + drow).clamp(1, ROWS as i32) as u32;
        self.active = cell_name(col, row);
        if row <= self.scroll {
            self.scroll = row - 1;
        } else if row > self.scroll + VISIBLE_ROWS {
            self.scroll = row - VISIBLE_ROWS;
        }
    }

    pub fn scroll_by(&mut self, amount: i32) {
        let target = self.scroll as i64 - amount as i64;
        self.scroll = target.clamp(0, (ROWS - VISIBLE_ROWS) as i64) as u32;
    }
}

fn cell_rect(col: usize, screen_row: u32) -> Rect {
    let left = GRID_LEFT + col as u32 * CELL_W;
    let top = GRID_TOP + screen_row * CELL_H;
    Rect::new(left, top, left + CELL_W, top + CELL_H)
}

pub fn view(sheet: &SheetState) -> View {
    let mut v = View::new(format!("Spreadsheet - {}", sheet.active));
    let grid = v.section("table", "Sheet1", Rect::new(0, CONTENT_TOP, 1280, CONTENT_BOTTOM));

    let header = v.begin_line();
    for (c, name) in COLUMNS.iter().enumerate() {
        let x = GRID_LEFT + c as u32 * CELL_W + CELL_W / 2 - 4;
        v.text_in_line(header, &name.to_string(), Point::new(x, CONTENT_TOP + 4));
    }

    for screen_row in 0..VISIBLE_ROWS {
        let row = sheet.scroll + screen_row + 1;
        let line = v.begin_line();
        let top = GRID_TOP + screen_row * CELL_H;
        v.text_in_line(line, &row.to_string(), Point::new(16, top + 4));
        for col in 0..COLUMNS.len() {
            let name = cell_name(col, row);
            let rect = cell_rect(col, screen_row);
            let value = sheet.get(&name);
            let label = if value.is_empty() {
                name.clone()
            } else {
                format!("{name}: {value}")
            };
            v.control(grid, Control::Cell(name), "cell", label, rect);
            if !value.is_empty() {
                let shown: String = value.chars().take(CELL_CHARS).collect();
                v.text_in_line(line, &shown, Point::new(rect.left + 8, rect.top + 4));
            }
        }
    }
    v
}

pub fn activate(state: &mut DesktopState, control: &Control) {
    if let (Control::Cell(name), Some(sheet)) = (control, state.sheet_mut()) {
        sheet.active = name.clone();
    }
}

pub fn type_into(state: &mut DesktopState, control: &Control, text: &str) {
    if let (Control::Cell(name), Some(sheet)) = (control, state.sheet_mut()) {
        sheet.active = name.clone();
        sheet.set(name, text);
    }
}

pub fn shortcut(state: &mut DesktopState, combo: &str) {
    let clipboard = state.clipboard.clone();
    let Some(sheet) = state.sheet_mut() else {
        return;
    };
    match combo {
        "enter" => sheet.move_active(0, 1),
        "tab" => sheet.move_active(1, 0),
        "shift+tab" => sheet.move_active(-1, 0),
        "ctrl+c" => {
            let value = sheet.get(&sheet.active.clone()).to_string();
            state.clipboard = value;
        }
        "ctrl+v" => {
            let active = sheet.active.clone();
            sheet.set(&active, &clipboard);
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_addresses_round_trip() {
        for col in 0..COLUMNS.len() {
            for row in [1, 50, ROWS] {
                assert_eq!(parse_cell(&cell_name(col, row)), Some((col, row)));
            }
        }
        assert_eq!(parse_cell("G1"), None);
        assert_eq!(parse_cell("A0"), None);
        assert_eq!(parse_cell("A101"), None);
    }

    #[test]
    fn enter_scrolls_active_row_into_view() {
        let mut s = SheetState {
            active: cell_name(0, VISIBLE_ROWS),
            ..Default::default()
        };
        s.move_active(0, 1);
        assert_eq!(s.scroll, 1);
        assert_eq!(s.active, cell_name(0, VISIBLE_ROWS + 1));
    }
}
