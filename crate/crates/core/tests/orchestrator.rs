//! The hierarchical loop end to end with scripted agents.

mod common;

use common::{scenario_path, script_path};
use deskagent::action_space::{Action, ActionKind};
use deskagent::agents::Judgment;
use deskagent::backends::{AgentRole, BackendScript, ScriptedBackend};
use deskagent::orchestrator::{
    audit_trace, replay, run_instruction, run_subtask, FailureReason, Outcome, RunConfig,
};
use deskagent::sim::{load_scenario, Environment};
use deskagent::trace::{read_trace, trace_to_string};

fn env(name: &str) -> Environment {
    Environment::from_path(scenario_path(name)).unwrap()
}

fn backend(entries: &[(AgentRole, &str)]) -> ScriptedBackend {
    let mut script = BackendScript::default();
    for (role, reply) in entries {
        script.push(*role, *reply);
    }
    ScriptedBackend::new(script)
}

fn step(action: &str, progress: &str) -> Vec<(AgentRole, String)> {
    vec![
        (AgentRole::Decision, format!("Thought: next\nAction: {action}")),
        (AgentRole::Reflection, "CORRECT".to_string()),
        (AgentRole::Progress, format!("SUMMARY: {progress}\nDONE: no")),
    ]
}

fn build(steps: Vec<Vec<(AgentRole, String)>>) -> ScriptedBackend {
    let mut script = BackendScript::default();
    for (role, reply) in steps.into_iter().flatten() {
        script.push(role, reply);
    }
    ScriptedBackend::new(script)
}

fn stop(summary: &str) -> Vec<(AgentRole, String)> {
    vec![
        (AgentRole::Decision, "Thought: done\nAction: Stop".to_string()),
        (AgentRole::Progress, format!("SUMMARY: {summary}\nDONE: yes")),
    ]
}

#[test]
fn three_step_subtask_ends_in_stop() {
    let mut e = env("empty");
    let b = build(vec![
        step("Open App (Clock)", "opened clock"),
        step("Type (176, 84) [10am]", "typed time"),
        stop("alarm set"),
    ]);
    // the alarm is never added, but Stop ends the subtask regardless
    let out = run_subtask(1, "Set an alarm", &mut e, &b, &RunConfig::default()).unwrap();
    assert_eq!(out.steps.len(), 3);
    assert!(out.failure.is_none());
    assert!(out.progress.done);
    assert_eq!(out.steps[2].resolved_action, Action::Stop);
    assert_eq!(out.steps[2].after_digest, out.steps[2].observation_digest);
}

#[test]
fn steps_taken_counts_up_by_one() {
    let mut e = env("empty");
    let b = build(vec![
        step("Open App (Calculator)", "opened"),
        step("Click (64, 140)", "7"),
        step("Click (376, 332)", "+"),
        step("Click (168, 140)", "8"),
        stop("done"),
    ]);
    let out = run_subtask(1, "Add 7 and 8", &mut e, &b, &RunConfig::default()).unwrap();
    let counts: Vec<u32> = out.steps.iter().map(|s| s.progress.steps_taken).collect();
    assert_eq!(counts, vec![1, 2, 3, 4, 5]);
}

#[test]
fn repeated_ineffective_click_trips_the_noop_limit() {
    let mut e = env("sales_sheet");
    let click = (AgentRole::Decision, "Thought: try\nAction: Click (1100, 300)");
    let tp = (AgentRole::Progress, "SUMMARY: trying\nDONE: no");
    let b = backend(&[click, tp, click, tp, click, tp, click, tp, click, tp]);
    let cfg = RunConfig::default();
    let out = run_subtask(1, "Fill B5", &mut e, &b, &cfg).unwrap();
    // count oracle: every scripted click is ineffective, so the loop stops
    // exactly when the run of NoChange judgments reaches the limit
    let no_change = out
        .steps
        .iter()
        .filter(|s| s.reflection.judgment == Judgment::NoChange)
        .count();
    assert_eq!(no_change, cfg.max_consecutive_noops as usize);
    assert_eq!(out.steps.len(), cfg.max_consecutive_noops as usize);
    assert_eq!(
        out.failure,
        Some(FailureReason::NoopLoopDetected {
            count: cfg.max_consecutive_noops
        })
    );
    assert_eq!(b.call_count(AgentRole::Reflection), 0);
}

#[test]
fn step_budget_bounds_the_record_list() {
    let mut e = env("empty");
    let mut steps = vec![step("Open App (Clock)", "opened")];
    for i in 0..10 {
        steps.push(step(&format!("Type (176, 84) [{}:00]", i + 1), "typing"));
    }
    let b = build(steps);
    let cfg = RunConfig {
        max_steps_per_subtask: 4,
        ..RunConfig::default()
    };
    let out = run_subtask(1, "Type forever", &mut e, &b, &cfg).unwrap();
    assert_eq!(out.steps.len(), 4);
    assert_eq!(
        out.failure,
        Some(FailureReason::StepBudgetExceeded { limit: 4 })
    );
}

#[test]
fn ineffective_click_then_new_tab_shortcut() {
    let (_, scenario) = load_scenario(scenario_path("home_page")).unwrap();
    let mut e = Environment::new(scenario);
    let b = ScriptedBackend::from_file(common::assets().join("fixtures/new_tab_recovery.txt"))
        .unwrap();
    let trace = run_instruction("Open a new browser tab.", &mut e, &b, &RunConfig::default())
        .unwrap();
    let steps: Vec<_> = trace.steps().collect();
    let judgments: Vec<Judgment> = steps.iter().map(|s| s.reflection.judgment).collect();
    assert_eq!(judgments, vec![Judgment::NoChange, Judgment::Correct]);
    assert_eq!(steps[0].resolved_action.kind(), ActionKind::Click);
    assert_eq!(steps[1].resolved_action.kind(), ActionKind::Shortcut);
    // the second decision saw the NoChange verdict
    assert_eq!(
        steps[1].reflection_in.as_ref().map(|r| r.judgment),
        Some(Judgment::NoChange)
    );
    assert_eq!(trace.outcome, Outcome::CompletedAll);
    assert_eq!(e.state().browser().unwrap().tabs.len(), 2);
}

#[test]
fn hub_holds_three_outputs_before_the_spreadsheet_subtask() {
    let mut e = env("population");
    let b = ScriptedBackend::from_file(script_path("population_sheet")).unwrap();
    let trace = run_instruction("populations", &mut e, &b, &RunConfig::default()).unwrap();
    assert_eq!(trace.outcome, Outcome::CompletedAll);
    assert_eq!(trace.plan.subtasks.len(), 4);
    assert_eq!(trace.hub.len(), 3);
    let last = &trace.subtasks[3];
    for out in ["1.41 billion", "341 million", "1.45 billion"] {
        assert!(last.text.contains(out), "{}", last.text);
    }
    assert!(audit_trace(&trace).is_empty());
}

#[test]
fn failed_producer_skips_its_consumer() {
    let mut e = env("empty");
    let mut script = BackendScript::default();
    script.push(
        AgentRole::Manager,
        "1. [Clock] Open the clock | deps: - | output: no\n\
         2. [Calculator] Work out 6 times 7 | deps: - | output: yes\n\
         3. [Clock] Set an alarm for {out:2}:00 | deps: 2 | output: no",
    );
    for (role, reply) in step("Open App (Clock)", "opened")
        .into_iter()
        .chain(stop("clock open"))
    {
        script.push(role, reply);
    }
    // subtask 2 gets an unparseable decision twice and fails
    script.push(AgentRole::Decision, "no idea");
    script.push(AgentRole::Decision, "still no idea");
    let b = ScriptedBackend::new(script);
    let trace = run_instruction("clock then maths", &mut e, &b, &RunConfig::default()).unwrap();
    assert!(matches!(
        trace.outcome,
        Outcome::FailedAtSubtask {
            id: 2,
            reason: FailureReason::DecisionParseFailure { .. }
        }
    ));
    let ids: Vec<u32> = trace.subtasks.iter().map(|r| r.id).collect();
    assert_eq!(ids, vec![1, 2], "subtask 3 must not appear");
    assert!(trace.subtasks[1].steps.is_empty());
    assert!(trace.hub.is_empty());
}

#[test]
fn single_independent_subtask_leaves_hub_empty() {
    let mut e = env("empty");
    let b = ScriptedBackend::from_file(script_path("alarm_10am")).unwrap();
    let trace = run_instruction("Set an alarm for 10am.", &mut e, &b, &RunConfig::default())
        .unwrap();
    assert_eq!(trace.outcome, Outcome::CompletedAll);
    assert!(trace.hub.is_empty());
    assert_eq!(e.state().clock().unwrap().alarms, vec!["10:00"]);
}

#[test]
fn select_becomes_a_drag_over_the_target() {
    let mut e = env("test_doc2");
    let b = ScriptedBackend::from_file(script_path("test_doc2_underline")).unwrap();
    let trace = run_instruction("underline", &mut e, &b, &RunConfig::default()).unwrap();
    let first = trace.steps().next().unwrap();
    assert_eq!(first.decision.action.kind(), ActionKind::Select);
    assert_eq!(first.resolved_action.kind(), ActionKind::Drag);
    let last_para = e.state().editor().unwrap().paragraphs.last().unwrap().clone();
    assert!(last_para.words.iter().all(|w| w.underline));
}

#[test]
fn failed_select_is_flagged_and_not_executed() {
    let mut e = env("test_doc2");
    let b = backend(&[
        (AgentRole::Manager, "1. [Editor] Underline the middle | deps: - | output: no"),
        (AgentRole::Decision, "Thought: select\nAction: Select (the middle)"),
        (AgentRole::Intention, "START: zebra\nEND: giraffe"),
        (AgentRole::Progress, "SUMMARY: selection failed\nDONE: no"),
        (AgentRole::Decision, "Thought: give up\nAction: Stop"),
        (AgentRole::Progress, "SUMMARY: stopped\nDONE: yes"),
    ]);
    let before = e.digest();
    let trace = run_instruction("underline", &mut e, &b, &RunConfig::default()).unwrap();
    let first = trace.steps().next().unwrap();
    assert_eq!(first.reflection.judgment, Judgment::UnexpectedChange);
    assert_eq!(first.after_digest, before);
    assert_eq!(e.digest(), before);
}

#[test]
fn trace_survives_jsonl_round_trip_and_replay() {
    let (_, scenario) = load_scenario(scenario_path("travel_plan")).unwrap();
    let mut e = Environment::new(scenario.clone());
    let b = ScriptedBackend::from_file(script_path("travel_world_clock")).unwrap();
    let trace = run_instruction("travel", &mut e, &b, &RunConfig::default()).unwrap();
    let text = trace_to_string(&trace);
    let back = read_trace(text.as_bytes()).unwrap();
    assert_eq!(back, trace);
    assert_eq!(trace_to_string(&back), text);
    assert_eq!(replay(&back, &scenario).final_state.digest(), trace.final_digest);
    assert_eq!(text.lines().count(), trace.steps().count() + 2);
}
