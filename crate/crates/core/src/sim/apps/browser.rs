//! Web browser model: tabs with an address box and canned result pages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::action_space::Point;
use crate::perception::Rect;
use crate::sim::view::{
    wrap, BrowserButton, Control, ToolbarCursor, View, CONTENT_BOTTOM, CONTENT_TOP, GLYPH_H,
    TEXT_LEFT, WRAP_COLS,
};
use crate::sim::DesktopState;

pub const MAX_TABS: usize = 6;
const TAB_W: u32 = 200;
const TAB_BOTTOM: u32 = CONTENT_TOP + 24;
const PAGE_RECT: Rect = Rect::new(8, TAB_BOTTOM + 8, 1272, CONTENT_BOTTOM);
const PAGE_TEXT_TOP: u32 = PAGE_RECT.top + 8;
const PAGE_ROWS: usize = ((CONTENT_BOTTOM - PAGE_TEXT_TOP) / GLYPH_H) as usize;
pub const NO_RESULTS: &str = "No results found.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub query: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tab {
    pub address_input: String,
    pub current: Option<Page>,
    pub back: Vec<Page>,
    pub forward: Vec<Page>,
    pub scroll: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrowserState {
    pub tabs: Vec<Tab>,
    pub active_tab: usize,
}

impl Default for BrowserState {
    fn default() -> Self {
        Self {
            tabs: vec![Tab::default()],
            active_tab: 0,
        }
    }
}

fn normalize(s: &str) -> String {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Canned page for `query`: the longest result key contained in the query,
/// compared on lowercase alphanumeric words.
pub fn lookup(results: &BTreeMap<String, String>, query: &str) -> String {
    let q = format!(" {} ", normalize(query));
    results
        .iter()
        .filter(|(k, _)| {
            let k = normalize(k);
            !k.is_empty() && q.contains(&format!(" {k} "))
        })
        .max_by_key(|(k, _)| normalize(k).len())
        .map_or_else(|| NO_RESULTS.to_string(), |(_, v)| v.clone())
}

impl BrowserState {
    /// One tab per query, each showing its canned result; the last is active.
    pub fn with_pages(queries: &[String], results: &BTreeMap<String, String>) -> Self {
        if queries.is_empty() {
            return Self::default();
        }
        let tabs: Vec<Tab> = queries
            .iter()
            .take(MAX_TABS)
            .map(|q| Tab {
                address_input: q.clone(),
                current: Some(Page {
                    query: q.clone(),
                    text: lookup(results, q),
                }),
                ..Default::default()
            })
            .collect();
        Self {
            active_tab: tabs.len() - 1,
            tabs,
        }
    }

    pub fn tab(&self) -> &Tab {
        &self.tabs[self.active_tab]
    }

    fn tab_mut(&mut self) -> &mut Tab {
        &mut self.tabs[self.active_tab]
    }

    fn navigate(&mut self, results: &BTreeMap<String, String>) {
        let tab = self.tab_mut();
        let query = tab.address_input.trim().to_string();
        if query.is_empty() {
            return;
        }
        let page = Page {
            text: lookup(results, &query),
            query,
        };
        if let Some(prev) = tab.current.replace(page) {
            tab.back.push(prev);
        }
        tab.forward.clear();
        tab.scroll = 0;
    }

    fn go_back(&mut self) {
        let tab = self.tab_mut();
        if let Some(prev) = tab.back.pop() {
            if let Some(cur) = tab.current.replace(prev) {
                tab.forward.push(cur);
            }
            tab.scroll = 0;
            tab.address_input = tab.current.as_ref().map(|p| p.query.clone()).unwrap_or_default();
        }
    }

    fn go_forward(&mut self) {
        let tab = self.tab_mut();
        if let Some(next) = tab.forward.pop() {
            if let Some(cur) = tab.current.replace(next) {
                tab.back.push(cur);
            }
            tab.scroll = 0;
            tab.address_input = tab.current.as_ref().map(|p| p.query.clone()).unwrap_or_default();
        }
    }

    fn new_tab(&mut self) {
        if self.tabs.len() < MAX_TABS {
            self.tabs.push(Tab::default());
            self.active_tab = self.tabs.len() - 1;
        }
    }

    fn close_tab(&mut self) {
        if self.tabs.len() > 1 {
            self.tabs.remove(self.active_tab);
            self.active_tab = self.active_tab.min(self.tabs.len() - 1);
        }
    }

    fn page_rows(&self) -> Vec<String> {
        let Some(page) = &self.tab().current else {
            return Vec::new();
        };
        let mut rows = Vec::new();
        for para in page.text.lines() {
            let words: Vec<&str> = para.split_whitespace().collect();
            if words.is_empty() {
                continue;
            }
            for r in wrap(&words, WRAP_COLS) {
                rows.push(words[r].join(" "));
            }
        }
        rows
    }

    pub fn scroll_by(&mut self, amount: i32) {
        let max = self.page_rows().len().saturating_sub(PAGE_ROWS) as i64;
        let tab = self.tab_mut();
        tab.scroll = (tab.scroll as i64 - amount as i64).clamp(0, max) as u32;
    }
}

fn tab_label(i: usize, tab: &Tab) -> String {
    match &tab.current {
        Some(p) => {
            let q: String = p.query.chars().take(14).collect();
            format!("Tab {}: {q}", i + 1)
        }
        None => format!("Tab {}: New Tab", i + 1),
    }
}

pub fn view(browser: &BrowserState) -> View {
    let tab = browser.tab();
    let page_title = tab.current.as_ref().map_or("New Tab", |p| p.query.as_str());
    let mut v = View::new(format!("Browser - {page_title}"));

    let bar = v.section("toolbar", "Navigation", Rect::new(0, 24, 1280, CONTENT_TOP));
    let mut cursor = ToolbarCursor::new();
    for (button, label) in [
        (BrowserButton::Back, "Back"),
        (BrowserButton::Forward, "Forward"),
        (BrowserButton::Refresh, "Refresh"),
        (BrowserButton::NewTab, "New Tab"),
    ] {
        let rect = cursor.next(label);
        v.control(bar, Control::BrowserButton(button), "button", label, rect);
    }
    let address = cursor.next_width(640);
    let label = if tab.address_input.is_empty() {
        "Address".to_string()
    } else {
        format!("Address: {}", tab.address_input)
    };
    v.control(bar, Control::Address, "edit", label, address);
    let go = cursor.next("Go");
    v.control(bar, Control::BrowserButton(BrowserButton::Go), "button", "Go", go);

    let strip = v.section("tablist", "Tabs", Rect::new(0, CONTENT_TOP, 1280, TAB_BOTTOM));
    for (i, t) in browser.tabs.iter().enumerate() {
        let left = 8 + i as u32 * (TAB_W + 8);
        let rect = Rect::new(left, CONTENT_TOP, left + TAB_W, TAB_BOTTOM);
        v.control(strip, Control::TabButton(i), "tab", tab_label(i, t), rect);
    }

    let pane = v.section("document", "Page", PAGE_RECT);
    v.control(pane, Control::Page, "document", page_title, PAGE_RECT);
    for (r, row) in browser
        .page_rows()
        .iter()
        .skip(tab.scroll as usize)
        .take(PAGE_ROWS)
        .enumerate()
    {
        v.text(row, Point::new(TEXT_LEFT, PAGE_TEXT_TOP + r as u32 * GLYPH_H));
    }
    v
}

pub fn activate(state: &mut DesktopState, control: &Control, results: &BTreeMap<String, String>) {
    let Some(browser) = state.browser_mut() else {
        return;
    };
    match control {
        Control::BrowserButton(BrowserButton::Back) => browser.go_back(),
        Control::BrowserButton(BrowserButton::Forward) => browser.go_forward(),
        Control::BrowserButton(BrowserButton::Refresh) => browser.tab_mut().scroll = 0,
        Control::BrowserButton(BrowserButton::NewTab) => browser.new_tab(),
        Control::BrowserButton(BrowserButton::Go) => browser.navigate(results),
        Control::TabButton(i) if *i < browser.tabs.len() => browser.active_tab = *i,
        _ => {}
    }
}

pub fn type_into(state: &mut DesktopState, control: &Control, text: &str) {
    if let (Control::Address, Some(browser)) = (control, state.browser_mut()) {
        browser.tab_mut().address_input = text.trim().to_string();
    }
}

pub fn shortcut(state: &mut DesktopState, combo: &str, results: &BTreeMap<String, String>) {
    let Some(browser) = state.browser_mut() else {
        return;
    };
    match combo {
        "enter" => browser.navigate(results),
        "ctrl+t" => browser.new_tab(),
        "ctrl+w" => browser.close_tab(),
        "ctrl+tab" => browser.active_tab = (browser.active_tab + 1) % browser.tabs.len(),
        _ => {}
    }
}
