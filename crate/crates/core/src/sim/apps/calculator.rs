//! Four-function calculator with immediate (left to right) evaluation.

use serde::{Deserialize, Serialize};

use crate::action_space::Point;
use crate::perception::Rect;
use crate::sim::view::{Control, View, CONTENT_TOP};
use crate::sim::DesktopState;

/// Button grid, top to bottom; `C` sits alone on the last row.
pub const KEYPAD: [&str; 5] = ["789/", "456*", "123-", "0.=+", "C"];
const KEY_W: u32 = 96;
const KEY_H: u32 = 56;
const KEYPAD_TOP: u32 = CONTENT_TOP + 48;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalculatorState {
    pub display: String,
    pub accumulator: Option<f64>,
    pub pending: Option<char>,
    /// The next digit starts a new number instead of extending the display.
    pub fresh: bool,
}

impl Default for CalculatorState {
    fn default() -> Self {
        Self {
            display: "0".into(),
            accumulator: None,
            pending: None,
            fresh: true,
        }
    }
}

fn format_number(v: f64) -> String {
    if !v.is_finite() {
        "Error".into()
    } else if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        let s = format!("{v:.10}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Applies `op` to two operands; `None` for division by zero.
pub fn apply_op(op: char, a: f64, b: f64) -> Option<f64> {
    match op {
        '+' => Some(a + b),
        '-' => Some(a - b),
        '*' => Some(a * b),
        '/' if b == 0.0 => None,
        '/' => Some(a / b),
        _ => Some(b),
    }
}

impl CalculatorState {
    pub fn press(&mut self, key: char) {
        if self.display == "Error" && key != 'C' {
            return;
        }
        match key {
            '0'..='9' => {
                if self.fresh || self.display == "0" {
                    self.display = key.to_string();
                } else {
                    self.display.push(key);
                }
                self.fresh = false;
            }
            '.' => {
                if self.fresh {
                    self.display = "0.".into();
                } else if !self.display.contains('.') {
                    self.display.push('.');
                }
                self.fresh = false;
            }
            '+' | '-' | '*' | '/' => {
                self.evaluate();
                if self.display != "Error" {
                    self.pending = Some(key);
                }
            }
            '=' => {
                self.evaluate();
                self.pending = None;
            }
            'C' => *self = Self::default(),
            _ => {}
        }
    }

    fn evaluate(&mut self) {
        let current: f64 = self.display.parse().unwrap_or(0.0);
        let result = match (self.accumulator, self.pending) {
            (Some(acc), Some(op)) if !self.fresh => apply_op(op, acc, current),
            (Some(acc), Some(_)) => Some(acc),
            _ => Some(current),
        };
        match result {
            Some(v) => {
                self.display = format_number(v);
                self.accumulator = Some(v);
            }
            None => {
                self.display = "Error".into();
                self.accumulator = None;
                self.pending = None;
            }
        }
        self.fresh = true;
    }
}

/// Rectangle of the key at (row, column) of [`KEYPAD`].
pub fn key_rect(row: usize, col: usize) -> Rect {
    let left = 16 + col as u32 * (KEY_W + 8);
    let top = KEYPAD_TOP + row as u32 * (KEY_H + 8);
    Rect::new(left, top, left + KEY_W, top + KEY_H)
}

pub fn view(calc: &CalculatorState) -> View {
    let mut v = View::new("Calculator");
    v.text(&calc.display, Point::new(16, CONTENT_TOP + 8));
    let pad = v.section("group", "Keypad", Rect::new(0, KEYPAD_TOP, 440, 800));
    for (r, row) in KEYPAD.iter().enumerate() {
        for (c, key) in row.chars().enumerate() {
            v.control(pad, Control::CalcKey(key), "button", key.to_string(), key_rect(r, c));
        }
    }
    v
}

pub fn activate(state: &mut DesktopState, control: &Control) {
    if let (Control::CalcKey(key), Some(calc)) = (control, state.calculator_mut()) {
        calc.press(*key);
    }
}

pub fn shortcut(state: &mut DesktopState, combo: &str) {
    let Some(calc) = state.calculator_mut() else {
        return;
    };
    let key = match combo {
        "enter" => '=',
        "esc" | "c" => 'C',
        "shift+8" => '*',
        digit if digit.len() == 1 && digit.as_bytes()[0].is_ascii_digit() => digit.as_bytes()[0] as char,
        _ => return,
    };
    calc.press(key);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(keys: &str) -> String {
        let mut c = CalculatorState::default();
        for k in keys.chars() {
            c.press(k);
        }
        c.display
    }

    #[test]
    fn evaluates_left_to_right() {
        assert_eq!(run("185-121="), "64");
        assert_eq!(run("2+3*4="), "20");
        assert_eq!(run("7/2="), "3.5");
        assert_eq!(run("1/0="), "Error");
        assert_eq!(run("1/0=C5"), "5");
    }

    #[test]
    fn keypad_fits_on_screen() {
        let last = key_rect(KEYPAD.len() - 1, 0);
        assert!(last.bottom <= 800);
    }
}
