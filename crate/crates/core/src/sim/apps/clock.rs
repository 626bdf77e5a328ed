//! Alarms and world clocks.

use serde::{Deserialize, Serialize};

use crate::action_space::Point;
use crate::perception::Rect;
use crate::sim::view::{Control, View, CONTENT_BOTTOM, CONTENT_TOP, GLYPH_H};
use crate::sim::DesktopState;

const LIST_TOP: u32 = CONTENT_TOP + 48;
const LIST_ROWS: usize = ((CONTENT_BOTTOM - LIST_TOP) / GLYPH_H) as usize;
const CITY_COLUMN: u32 = 640;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockState {
    /// Alarm times as `HH:MM`, in insertion order.
    pub alarms: Vec<String>,
    pub world_clocks: Vec<String>,
    pub alarm_input: String,
    pub city_input: String,
}

/// Normalizes `9:00`, `9am`, `10:30 pm`, `21:05` to 24-hour `HH:MM`.
pub fn normalize_time(raw: &str) -> Option<String> {
    let s: String = raw.to_lowercase().chars().filter(|c| !c.is_whitespace()).collect();
    let (body, meridiem) = if let Some(b) = s.strip_suffix("am") {
        (b, Some(false))
    } else if let Some(b) = s.strip_suffix("pm") {
        (b, Some(true))
    } else {
        (s.as_str(), None)
    };
    let (h, m) = match body.split_once(':') {
        Some((h, m)) => (h.parse::<u32>().ok()?, m.parse::<u32>().ok()?),
        None => (body.parse::<u32>().ok()?, 0),
    };
    if m > 59 {
        return None;
    }
    let h = match meridiem {
        Some(pm) => {
            if !(1..=12).contains(&h) {
                return None;
            }
            (h % 12) + if pm { 12 } else { 0 }
        }
        None if h <= 23 => h,
        None => return None,
    };
    Some(format!("{h:02}:{m:02}"))
}

impl ClockState {
    fn add_alarm(&mut self) {
        if let Some(t) = normalize_time(&self.alarm_input) {
            if !self.alarms.contains(&t) {
                self.alarms.push(t);
            }
            self.alarm_input.clear();
        }
    }

    fn add_city(&mut self) {
        let city = self.city_input.trim().to_string();
        if !city.is_empty() {
            if !self.world_clocks.iter().any(|c| c.eq_ignore_ascii_case(&city)) {
                self.world_clocks.push(city);
            }
            self.city_input.clear();
        }
    }
}

fn input_label(base: &str, value: &str) -> String {
    if value.is_empty() {
        base.to_string()
    } else {
        format!("{base}: {value}")
    }
}

pub fn view(clock: &ClockState) -> View {
    let mut v = View::new("Clock");
    let alarms = v.section("group", "Alarms", Rect::new(0, CONTENT_TOP, CITY_COLUMN, CONTENT_BOTTOM));
    v.control(
        alarms,
        Control::AlarmInput,
        "edit",
        input_label("Alarm time", &clock.alarm_input),
        Rect::new(16, CONTENT_TOP + 8, 336, CONTENT_TOP + 32),
    );
    v.control(
        alarms,
        Control::AddAlarm,
        "button",
        "Add Alarm",
        Rect::new(344, CONTENT_TOP + 8, 440, CONTENT_TOP + 32),
    );
    let cities = v.section("group", "World Clock", Rect::new(CITY_COLUMN, CONTENT_TOP, 1280, CONTENT_BOTTOM));
    v.control(
        cities,
        Control::CityInput,
        "edit",
        input_label("City", &clock.city_input),
        Rect::new(CITY_COLUMN + 16, CONTENT_TOP + 8, CITY_COLUMN + 336, CONTENT_TOP + 32),
    );
    v.control(
        cities,
        Control::AddCity,
        "button",
        "Add City",
        Rect::new(CITY_COLUMN + 344, CONTENT_TOP + 8, CITY_COLUMN + 440, CONTENT_TOP + 32),
    );

    // Both lists share rows, so one OCR line can hold an alarm and a city.
    let rows = clock.alarms.len().max(clock.world_clocks.len()).min(LIST_ROWS);
    for r in 0..rows {
        let line = v.begin_line();
        let y = LIST_TOP + r as u32 * GLYPH_H;
        if let Some(a) = clock.alarms.get(r) {
            v.text_in_line(line, &format!("Alarm {a}"), Point::new(16, y));
        }
        if let Some(c) = clock.world_clocks.get(r) {
            v.text_in_line(line, c, Point::new(CITY_COLUMN + 16, y));
        }
    }
    v
}

pub fn activate(state: &mut DesktopState, control: &Control) {
    let Some(clock) = state.clock_mut() else {
        return;
    };
    match control {
        Control::AddAlarm => clock.add_alarm(),
        Control::AddCity => clock.add_city(),
        _ => {}
    }
}

pub fn type_into(state: &mut DesktopState, control: &Control, text: &str) {
    let Some(clock) = state.clock_mut() else {
        return;
    };
    match control {
        Control::AlarmInput => clock.alarm_input = text.trim().to_string(),
        Control::CityInput => clock.city_input = text.trim().to_string(),
        _ => {}
    }
}

pub fn shortcut(state: &mut DesktopState, combo: &str) {
    if combo == "enter" {
        if let Some(clock) = state.clock_mut() {
            clock.add_alarm();
            clock.add_city();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_forms_normalize() {
        assert_eq!(normalize_time("9:00").as_deref(), Some("09:00"));
        assert_eq!(normalize_time("9am").as_deref(), Some("09:00"));
        assert_eq!(normalize_time("10:30 PM").as_deref(), Some("22:30"));
        assert_eq!(normalize_time("12 am").as_deref(), Some("00:00"));
        assert_eq!(normalize_time("12pm").as_deref(), Some("12:00"));
        assert_eq!(normalize_time("24:00"), None);
        assert_eq!(normalize_time("13pm"), None);
        assert_eq!(normalize_time("noon"), None);
    }
}
