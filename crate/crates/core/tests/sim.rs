//! Simulator behaviour checked from the outside: observation layout,
//! determinism, geometry, click targeting and predicate evaluation.

mod common;

use common::scenario_path;
use deskagent::action_space::{parse_action, Action, Key, Point};
use deskagent::perception::render_observation;
use deskagent::sim::{
    check, execute, hit_box, load_scenario, observe, DesktopState, Environment, Scenario,
    StatePredicate,
};
use proptest::prelude::*;

const SCENARIOS: &[&str] = &[
    "empty",
    "travel_plan",
    "population",
    "test_doc1",
    "meeting_memo",
    "test_doc2",
    "home_page",
    "sales_sheet",
];

const APPS: &[&str] = &[
    "Editor",
    "Spreadsheet",
    "Browser",
    "Calculator",
    "Clock",
    "File Explorer",
];

fn env(name: &str) -> Environment {
    Environment::from_path(scenario_path(name)).expect("bundled scenario loads")
}

fn act(env: &mut Environment, text: &str) -> bool {
    env.execute(&parse_action(text).expect("test action parses"))
        .changed
}

#[test]
fn calculator_index_matches_hand_built_table() {
    let mut e = env("empty");
    act(&mut e, "Open App (Calculator)");
    // Keypad rows as drawn, 96x56 keys on a 104x64 pitch from (16, 112).
    let expected: Vec<(u32, &str, (u32, u32))> = vec![
        (1, "7", (64, 140)),
        (2, "8", (168, 140)),
        (3, "9", (272, 140)),
        (4, "/", (376, 140)),
        (5, "4", (64, 204)),
        (6, "5", (168, 204)),
        (7, "6", (272, 204)),
        (8, "*", (376, 204)),
        (9, "1", (64, 268)),
        (10, "2", (168, 268)),
        (11, "3", (272, 268)),
        (12, "-", (376, 268)),
        (13, "0", (64, 332)),
        (14, ".", (168, 332)),
        (15, "=", (272, 332)),
        (16, "+", (376, 332)),
        (17, "C", (64, 396)),
    ];
    let obs = e.observe();
    let got: Vec<(u32, &str, (u32, u32))> = obs
        .elements
        .entries
        .iter()
        .map(|el| {
            assert_eq!(el.role, "button");
            (el.mark, el.name.as_str(), (el.center.x, el.center.y))
        })
        .collect();
    assert_eq!(got, expected);
    assert_eq!(obs.window_title, "Calculator");
}

#[test]
fn desktop_without_focus_lists_launchers_only() {
    let e = env("empty");
    let obs = e.observe();
    assert_eq!(obs.window_title, "Desktop");
    let names: Vec<&str> = obs.elements.entries.iter().map(|el| el.name.as_str()).collect();
    assert_eq!(names, APPS);
    assert!(obs.tokens.is_empty());
}

#[test]
fn travel_plan_scenario_opens_memo_and_empty_clock() {
    let (state, scenario) = load_scenario(scenario_path("travel_plan")).unwrap();
    let editor = state.editor().expect("editor open");
    assert!(editor.text().contains("Destination: Tokyo, Japan."));
    let clock = state.clock().expect("clock open");
    assert!(clock.alarms.is_empty() && clock.world_clocks.is_empty());
    assert_eq!(state, scenario.initial);
}

#[test]
fn loading_twice_gives_identical_observations() {
    for name in SCENARIOS {
        let (a, sa) = load_scenario(scenario_path(name)).unwrap();
        let (b, sb) = load_scenario(scenario_path(name)).unwrap();
        assert_eq!(
            render_observation(&observe(&a, &sa)),
            render_observation(&observe(&b, &sb)),
            "{name}"
        );
        assert_eq!(observe(&a, &sa), observe(&a, &sa), "{name}");
    }
}

#[test]
fn empty_scenario_has_no_apps() {
    let (state, _) = load_scenario(scenario_path("empty")).unwrap();
    assert_eq!(state, DesktopState::default());
}

/// A few states per scenario: as loaded, and with each app opened on top.
fn sample_states() -> Vec<(String, DesktopState, Scenario)> {
    let mut out = Vec::new();
    for name in SCENARIOS {
        let (state, scenario) = load_scenario(scenario_path(name)).unwrap();
        out.push((name.to_string(), state.clone(), scenario.clone()));
        for app in APPS {
            let (s, _) = execute(
                &state,
                &scenario,
                &Action::OpenApp {
                    name: app.to_string(),
                },
            );
            out.push((format!("{name}+{app}"), s, scenario.clone()));
        }
    }
    out
}

#[test]
fn every_element_center_hits_that_element() {
    for (label, state, scenario) in sample_states() {
        let obs = observe(&state, &scenario);
        for el in &obs.elements.entries {
            assert_eq!(
                hit_box(&state, el.center),
                Some(el.bbox),
                "{label}: [{}] {} {:?}",
                el.mark,
                el.name,
                el.center
            );
            let (_, result) = execute(&state, &scenario, &Action::Click { at: el.center });
            assert!(result.target.is_some(), "{label}: click on {} landed nowhere", el.name);
        }
    }
}

#[test]
fn observations_stay_inside_the_screen() {
    for (label, state, scenario) in sample_states() {
        let obs = observe(&state, &scenario);
        assert!(obs.geometry_ok(), "{label}");
        let marks: Vec<u32> = obs.elements.entries.iter().map(|e| e.mark).collect();
        assert_eq!(marks, (1..=marks.len() as u32).collect::<Vec<_>>(), "{label}");
    }
}

#[test]
fn click_on_empty_canvas_changes_nothing() {
    let (state, scenario) = load_scenario(scenario_path("sales_sheet")).unwrap();
    let (next, result) = execute(&state, &scenario, &Action::Click { at: Point::new(1100, 300) });
    assert_eq!(next, state);
    assert!(!result.changed);
}

#[test]
fn bold_button_bolds_the_selection() {
    let mut e = env("test_doc2");
    assert!(act(&mut e, "Drag (16, 80) (96, 80)"));
    assert!(act(&mut e, "Click (32, 44)"));
    let editor = e.state().editor().unwrap();
    assert!(editor.paragraphs[0].words.iter().all(|w| w.bold));
    assert!(editor.paragraphs[1].words.iter().all(|w| !w.bold));
}

#[test]
fn typed_cell_reads_back() {
    let mut e = env("empty");
    act(&mut e, "Open App (Spreadsheet)");
    let before = e.state().clone();
    assert!(act(&mut e, "Type (288, 100) [1.41 billion]"));
    // direct inspection of the sheet
    assert_eq!(e.state().sheet().unwrap().get("B1"), "1.41 billion");
    assert!(e.check(&StatePredicate::CellEquals {
        cell: "B1".into(),
        text: "1.41 billion".into()
    }));
    // nothing else in the sheet moved except the cell and the cursor
    let mut expected = before.sheet().unwrap().clone();
    expected.set("B1", "1.41 billion");
    let mut got = e.state().sheet().unwrap().clone();
    got.active = expected.active.clone();
    assert_eq!(got, expected);
}

#[test]
fn shortcut_alarm_flow_matches_state_diff() {
    let mut e = env("empty");
    act(&mut e, "Open App (Clock)");
    act(&mut e, "Type (176, 84) [9:00]");
    let before = e.state().clone();
    assert!(act(&mut e, "Shortcut (enter)"));
    let after = e.state().clone();
    let (b, a) = (before.clock().unwrap(), after.clock().unwrap());
    // the only new alarm is 09:00 and the input box was cleared
    let added: Vec<&String> = a.alarms.iter().filter(|t| !b.alarms.contains(t)).collect();
    assert_eq!(added, vec!["09:00"]);
    assert!(a.alarm_input.is_empty());
    assert_eq!(a.world_clocks, b.world_clocks);
    let alarm = |t: &str| StatePredicate::AlarmExists { time: t.into() };
    assert!(check(&after, &alarm("09:00")));
    assert!(check(&after, &alarm("9am")));
    assert!(!check(&before, &alarm("09:00")));
}

#[test]
fn file_predicate_is_false_before_saving() {
    let mut e = env("empty");
    let saved = StatePredicate::FileExists {
        folder: "Documents".into(),
        name: "TechCompanies".into(),
    };
    assert!(!e.check(&saved));
    act(&mut e, "Open App (Editor)");
    act(&mut e, "Type (640, 424) [Apple]");
    act(&mut e, "Type (752, 44) [TechCompanies]");
    act(&mut e, "Click (560, 44)");
    assert!(e.check(&saved));
}

#[test]
fn stop_never_changes_state() {
    for (label, state, scenario) in sample_states() {
        let (next, result) = execute(&state, &scenario, &Action::Stop);
        assert_eq!(next, state, "{label}");
        assert!(!result.changed);
    }
}

/// An action aimed at something on the current screen, or a random one.
fn arb_step() -> impl Strategy<Value = StepPick> {
    prop_oneof![
        4 => (any::<prop::sample::Index>(), 0u8..4, "[a-z0-9 :.]{1,10}")
            .prop_map(|(i, how, text)| StepPick::Element(i, how, text)),
        1 => (0u32..1280, 0u32..800).prop_map(|(x, y)| StepPick::Point(x, y)),
        1 => prop::sample::select(APPS).prop_map(StepPick::Open),
        1 => prop::sample::select(vec![
            "enter", "ctrl+b", "ctrl+u", "ctrl+e", "ctrl+a", "ctrl+c", "ctrl+v", "ctrl+s",
            "ctrl+t", "ctrl+w", "ctrl+tab", "shift+tab", "tab", "esc", "5",
        ])
        .prop_map(StepPick::Keys),
    ]
}

#[derive(Debug, Clone)]
enum StepPick {
    Element(prop::sample::Index, u8, String),
    Point(u32, u32),
    Open(&'static str),
    Keys(&'static str),
}

fn realize(pick: &StepPick, state: &DesktopState, scenario: &Scenario) -> Action {
    match pick {
        StepPick::Element(i, how, text) => {
            let obs = observe(state, scenario);
            if obs.elements.is_empty() {
                return Action::Stop;
            }
            let el = &obs.elements.entries[i.index(obs.elements.len())];
            let at = el.center;
            match how {
                0 => Action::Click { at },
                1 => Action::DoubleClick { at },
                2 => Action::Type {
                    at,
                    text: text.clone(),
                },
                _ => Action::Drag {
                    from: at,
                    to: Point::new(at.x + 40, at.y),
                },
            }
        }
        StepPick::Point(x, y) => Action::Click {
            at: Point::new(*x, *y),
        },
        StepPick::Open(name) => Action::OpenApp {
            name: name.to_string(),
        },
        StepPick::Keys(chord) => Action::Shortcut {
            keys: chord.split('+').map(|k| Key::parse(k).unwrap()).collect(),
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn digest_tracks_state_and_execution_is_pure(
        scenario_ix in 0..SCENARIOS.len(),
        picks in prop::collection::vec(arb_step(), 1..30),
    ) {
        let (mut state, scenario) = load_scenario(scenario_path(SCENARIOS[scenario_ix])).unwrap();
        let mut actions = Vec::new();
        for pick in &picks {
            let action = realize(pick, &state, &scenario);
            let (next, result) = execute(&state, &scenario, &action);
            // same input, same output
            let (again, _) = execute(&state, &scenario, &action);
            prop_assert_eq!(&next, &again);
            prop_assert_eq!(result.changed, next != state);
            prop_assert_eq!(next.digest() != state.digest(), next != state);
            prop_assert!(next.is_consistent(), "inconsistent after {}", action);
            prop_assert!(observe(&next, &scenario).geometry_ok(), "geometry after {}", action);
            actions.push(action);
            state = next;
        }
        // replaying the action list from the start lands on the same digest
        let mut replayed = scenario.initial.clone();
        for a in &actions {
            replayed = execute(&replayed, &scenario, a).0;
        }
        prop_assert_eq!(replayed.digest(), state.digest());
    }
}
