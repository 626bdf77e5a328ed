//! The four agent roles: prompt construction, backend calls and reply
//! parsing, plus the hub that carries subtask outputs into later subtasks.
//!
//! Reply formats, one item per line:
//!
//! * manager: `N. [app] template | deps: 1,2 | output: yes`
//!   (`deps: -` for none; templates may contain `{out:N}`)
//! * progress: `SUMMARY: ...`, `DONE: yes|no`, optional `OUTPUT: ...`
//! * decision: `Thought: ...` (may span lines) then `Action: <action>`
//! * reflection: `CORRECT`, `NO_CHANGE: ...` or `UNEXPECTED: ...`

use std::collections::BTreeMap;
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action_space::{parse_action, serialize_action, vocabulary, Action};
use crate::backends::{AgentRole, Backend, BackendError, ChatMessage};
use crate::perception::{render_observation, Observation};
use crate::prompts;
use crate::sim::AppKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtaskSpec {
    pub id: u32,
    pub template: String,
    pub app_hint: String,
    pub produces_output: bool,
    pub depends_on: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionPlan {
    pub instruction: String,
    pub subtasks: Vec<SubtaskSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunicationHub {
    pub outputs: BTreeMap<u32, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskProgress {
    pub summary: String,
    pub steps_taken: u32,
    pub done: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Judgment {
    UnexpectedChange,
    NoChange,
    Correct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reflection {
    pub judgment: Judgment,
    pub message: String,
}

impl Reflection {
    pub fn correct() -> Self {
        Self {
            judgment: Judgment::Correct,
            message: String::new(),
        }
    }

    pub fn no_change(message: impl Into<String>) -> Self {
        Self {
            judgment: Judgment::NoChange,
            message: message.into(),
        }
    }

    pub fn unexpected(message: impl Into<String>) -> Self {
        Self {
            judgment: Judgment::UnexpectedChange,
            message: message.into(),
        }
    }
}

/// Renders in the reflection reply format, e.g. `NO_CHANGE: nothing happened`.
impl fmt::Display for Reflection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let keyword = match self.judgment {
            Judgment::Correct => "CORRECT",
            Judgment::NoChange => "NO_CHANGE",
            Judgment::UnexpectedChange => "UNEXPECTED",
        };
        if self.message.is_empty() {
            f.write_str(keyword)
        } else {
            write!(f, "{keyword}: {}", self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionOutput {
    pub monologue: String,
    pub action: Action,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("instruction is empty")]
    EmptyInstruction,
    #[error("could not parse plan: {0}")]
    PlanParseFailure(String),
    #[error("subtask {id} depends on {dep}, which is not an earlier subtask")]
    DependencyCycle { id: u32, dep: u32 },
    #[error("hub already holds an output for subtask {0}")]
    DuplicateOutput(u32),
    #[error("subtask {id} needs the output of subtask {missing}, which is not in the hub")]
    UnresolvedDependency { id: u32, missing: u32 },
    #[error("could not parse progress reply: {0}")]
    ProgressParseFailure(String),
    #[error("could not parse decision reply: {0}")]
    DecisionParseFailure(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

static PLAN_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^\s*(\d+)\.\s*\[([^\]]+)\]\s*(.*?)\s*\|\s*deps:\s*([^|]*?)\s*\|\s*output:\s*(yes|no)\s*$",
    )
    .expect("plan regex")
});
static NUMBERED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*\d+\.").expect("numbered regex"));
static PLACEHOLDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\{out:(\d+)\}").expect("placeholder regex"));

/// Ids referenced by `{out:N}` placeholders, in order of appearance.
pub fn placeholders(template: &str) -> Vec<u32> {
    PLACEHOLDER
        .captures_iter(template)
        .filter_map(|c| c[1].parse().ok())
        .collect()
}

fn parse_deps(raw: &str) -> Result<Vec<u32>, AgentError> {
    let raw = raw.trim();
    if raw.is_empty() || raw == "-" || raw.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    let mut deps = Vec::new();
    for part in raw.split(',') {
        let id: u32 = part
            .trim()
            .parse()
            .map_err(|_| AgentError::PlanParseFailure(format!("bad dependency {part:?}")))?;
        if !deps.contains(&id) {
            deps.push(id);
        }
    }
    Ok(deps)
}

/// Parses a manager reply. Unnumbered lines are ignored; a numbered line in
/// the wrong shape is an error.
pub fn parse_plan(instruction: &str, reply: &str) -> Result<DecompositionPlan, AgentError> {
    let mut subtasks = Vec::new();
    for line in reply.lines() {
        if !NUMBERED.is_match(line) {
            continue;
        }
        let caps = PLAN_LINE
            .captures(line)
            .ok_or_else(|| AgentError::PlanParseFailure(format!("malformed plan line {line:?}")))?;
        let id: u32 = caps[1]
            .parse()
            .map_err(|_| AgentError::PlanParseFailure(format!("bad id in {line:?}")))?;
        let template = caps[3].trim().to_string();
        if template.is_empty() {
            return Err(AgentError::PlanParseFailure(format!("subtask {id} is empty")));
        }
        subtasks.push(SubtaskSpec {
            id,
            template,
            app_hint: caps[2].trim().to_string(),
            produces_output: caps[5].eq_ignore_ascii_case("yes"),
            depends_on: parse_deps(&caps[4])?,
        });
    }
    let plan = DecompositionPlan {
        instruction: instruction.to_string(),
        subtasks,
    };
    validate_plan(&plan)?;
    Ok(plan)
}

/// Checks the plan invariants: non-empty, ids `1..=K` in order, dependencies
/// only on earlier subtasks, and placeholders only on declared dependencies
/// that produce output.
pub fn validate_plan(plan: &DecompositionPlan) -> Result<(), AgentError> {
    if plan.subtasks.is_empty() {
        return Err(AgentError::PlanParseFailure("no numbered subtasks".into()));
    }
    for (i, spec) in plan.subtasks.iter().enumerate() {
        if spec.id as usize != i + 1 {
            return Err(AgentError::PlanParseFailure(format!(
                "expected subtask {} but found {}",
                i + 1,
                spec.id
            )));
        }
        for &dep in &spec.depends_on {
            if dep == 0 {
                return Err(AgentError::PlanParseFailure(format!(
                    "subtask {} depends on 0",
                    spec.id
                )));
            }
            if dep >= spec.id {
                return Err(AgentError::DependencyCycle { id: spec.id, dep });
            }
        }
        for dep in placeholders(&spec.template) {
            if dep >= spec.id {
                return Err(AgentError::DependencyCycle { id: spec.id, dep });
            }
            if !spec.depends_on.contains(&dep) {
                return Err(AgentError::PlanParseFailure(format!(
                    "subtask {} uses {{out:{dep}}} without listing it in deps",
                    spec.id
                )));
            }
            if !plan.subtasks[dep as usize - 1].produces_output {
                return Err(AgentError::PlanParseFailure(format!(
                    "subtask {} uses the output of subtask {dep}, which produces none",
                    spec.id
                )));
            }
        }
    }
    Ok(())
}

/// Sends `prompt` and parses the reply; on a parse failure, re-asks up to
/// `retries` times with `reminder` appended to the conversation.
fn ask<T>(
    backend: &dyn Backend,
    role: AgentRole,
    prompt: String,
    reminder: &str,
    retries: u32,
    parse: impl Fn(&str) -> Result<T, AgentError>,
) -> Result<T, AgentError> {
    let mut messages = vec![ChatMessage::user(prompt)];
    let mut attempt = 0;
    loop {
        let reply = backend.complete(&messages, role)?;
        match parse(&reply) {
            Ok(v) => return Ok(v),
            Err(e) if attempt >= retries => return Err(e),
            Err(e) => {
                attempt += 1;
                messages.push(ChatMessage::assistant(reply));
                messages.push(ChatMessage::user(format!("{e}. {reminder}")));
            }
        }
    }
}

pub fn manager_prompt(instruction: &str) -> String {
    let apps = AppKind::ALL
        .iter()
        .map(|k| k.display_name())
        .collect::<Vec<_>>()
        .join(", ");
    prompts::fill(prompts::MANAGER, &[("instruction", instruction), ("apps", &apps)])
}

pub fn manager_decompose(
    instruction: &str,
    backend: &dyn Backend,
    retries: u32,
) -> Result<DecompositionPlan, AgentError> {
    let instruction = instruction.trim();
    if instruction.is_empty() {
        return Err(AgentError::EmptyInstruction);
    }
    ask(
        backend,
        AgentRole::Manager,
        manager_prompt(instruction),
        "Reply only with lines of the form `N. [application] subtask | deps: - | output: no`.",
        retries,
        |reply| parse_plan(instruction, reply),
    )
}

impl CommunicationHub {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&str> {
        self.outputs.get(&id).map(String::as_str)
    }

    pub fn insert(&mut self, id: u32, output: impl Into<String>) -> Result<(), AgentError> {
        if self.outputs.contains_key(&id) {
            return Err(AgentError::DuplicateOutput(id));
        }
        self.outputs.insert(id, output.into());
        Ok(())
    }
}

/// Functional form of [`CommunicationHub::insert`].
pub fn hub_update(
    hub: &CommunicationHub,
    id: u32,
    output: &str,
) -> Result<CommunicationHub, AgentError> {
    let mut next = hub.clone();
    next.insert(id, output)?;
    Ok(next)
}

/// Substitutes every `{out:N}` in the template with the hub's entry for `N`.
pub fn instantiate_subtask(
    spec: &SubtaskSpec,
    hub: &CommunicationHub,
) -> Result<String, AgentError> {
    if let Some(missing) = placeholders(&spec.template)
        .into_iter()
        .find(|id| hub.get(*id).is_none())
    {
        return Err(AgentError::UnresolvedDependency {
            id: spec.id,
            missing,
        });
    }
    Ok(PLACEHOLDER
        .replace_all(&spec.template, |c: &regex::Captures| {
            let id: u32 = c[1].parse().unwrap_or(0);
            hub.get(id).unwrap_or_default().to_string()
        })
        .into_owned())
}

fn field<'a>(reply: &'a str, label: &str) -> Option<&'a str> {
    reply.lines().find_map(|line| {
        let line = line.trim();
        let (key, value) = line.split_once(':')?;
        key.trim().eq_ignore_ascii_case(label).then(|| value.trim())
    })
}

fn parse_flag(raw: &str) -> Option<bool> {
    match raw.trim().to_lowercase().as_str() {
        "yes" | "true" | "y" => Some(true),
        "no" | "false" | "n" => Some(false),
        _ => None,
    }
}

fn summary_or_placeholder(summary: &str) -> &str {
    if summary.is_empty() {
        "nothing done yet"
    } else {
        summary
    }
}

pub fn progress_prompt(subtask: &str, prev: &TaskProgress, action: &Action, r: &Reflection) -> String {
    prompts::fill(
        prompts::PROGRESS,
        &[
            ("subtask", subtask),
            ("summary", summary_or_placeholder(&prev.summary)),
            ("action", &serialize_action(action)),
            ("reflection", &r.to_string()),
        ],
    )
}

/// Parses a progress reply; an `OUTPUT` line is kept only when `DONE: yes`.
pub fn parse_progress(reply: &str, steps_taken: u32) -> Result<TaskProgress, AgentError> {
    let summary = field(reply, "SUMMARY")
        .ok_or_else(|| AgentError::ProgressParseFailure("missing SUMMARY line".into()))?;
    let done = field(reply, "DONE")
        .and_then(parse_flag)
        .ok_or_else(|| AgentError::ProgressParseFailure("missing or invalid DONE line".into()))?;
    let output = field(reply, "OUTPUT")
        .filter(|o| done && !o.is_empty())
        .map(str::to_string);
    Ok(TaskProgress {
        summary: summary.to_string(),
        steps_taken,
        done,
        output,
    })
}

pub fn progress_update(
    subtask: &str,
    prev: &TaskProgress,
    action: &Action,
    reflection: &Reflection,
    backend: &dyn Backend,
    retries: u32,
) -> Result<TaskProgress, AgentError> {
    let steps = prev.steps_taken + 1;
    ask(
        backend,
        AgentRole::Progress,
        progress_prompt(subtask, prev, action, reflection),
        "Reply with a `SUMMARY:` line, a `DONE: yes` or `DONE: no` line and an optional `OUTPUT:` line.",
        retries,
        |reply| parse_progress(reply, steps),
    )
}

pub fn decision_prompt(
    subtask: &str,
    obs: &Observation,
    prev: &TaskProgress,
    prev_reflection: Option<&Reflection>,
) -> String {
    let reflection = prev_reflection.map_or_else(|| "none".to_string(), |r| r.to_string());
    prompts::fill(
        prompts::DECISION,
        &[
            ("vocabulary", vocabulary().trim_end()),
            ("subtask", subtask),
            ("progress", summary_or_placeholder(&prev.summary)),
            ("reflection", &reflection),
            ("observation", render_observation(obs).trim_end()),
        ],
    )
}

/// Splits a decision reply into its monologue and the last `Action:` line.
pub fn parse_decision(reply: &str) -> Result<DecisionOutput, AgentError> {
    let mut monologue: Vec<&str> = Vec::new();
    let mut in_thought = false;
    let mut action_line = None;
    for line in reply.lines() {
        let trimmed = line.trim();
        if let Some(rest) = strip_label(trimmed, "Action") {
            action_line = Some(rest);
            in_thought = false;
        } else if let Some(rest) = strip_label(trimmed, "Thought") {
            in_thought = true;
            monologue.push(rest);
        } else if in_thought {
            monologue.push(trimmed);
        }
    }
    let line = action_line
        .ok_or_else(|| AgentError::DecisionParseFailure("no `Action:` line".into()))?;
    let action =
        parse_action(line).map_err(|e| AgentError::DecisionParseFailure(e.to_string()))?;
    Ok(DecisionOutput {
        monologue: monologue.join("\n").trim().to_string(),
        action,
    })
}

fn strip_label<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let (head, rest) = line.split_once(':')?;
    head.trim().eq_ignore_ascii_case(label).then(|| rest.trim())
}

pub fn decide(
    subtask: &str,
    obs: &Observation,
    prev: &TaskProgress,
    prev_reflection: Option<&Reflection>,
    backend: &dyn Backend,
    retries: u32,
) -> Result<DecisionOutput, AgentError> {
    ask(
        backend,
        AgentRole::Decision,
        decision_prompt(subtask, obs, prev, prev_reflection),
        "Reply with a `Thought:` line and then exactly one `Action:` line using the listed formats.",
        retries,
        parse_decision,
    )
}

pub fn reflection_prompt(
    subtask: &str,
    action: &Action,
    before: &Observation,
    after: &Observation,
) -> String {
    prompts::fill(
        prompts::REFLECTION,
        &[
            ("subtask", subtask),
            ("action", &serialize_action(action)),
            ("before", render_observation(before).trim_end()),
            ("after", render_observation(after).trim_end()),
        ],
    )
}

/// Reads the first non-empty line as a judgment. Anything unrecognised
/// becomes `UnexpectedChange` carrying the raw reply.
pub fn parse_reflection(reply: &str) -> Reflection {
    let line = reply.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let (keyword, message) = match line.split_once(':') {
        Some((k, m)) => (k.trim(), m.trim()),
        None => (line, ""),
    };
    match keyword.to_uppercase().replace([' ', '-'], "_").as_str() {
        "CORRECT" => Reflection {
            judgment: Judgment::Correct,
            message: message.to_string(),
        },
        "NO_CHANGE" => Reflection::no_change(message),
        "UNEXPECTED" | "UNEXPECTED_CHANGE" => Reflection::unexpected(message),
        _ => Reflection::unexpected(reply.trim()),
    }
}

pub const NO_CHANGE_MESSAGE: &str = "the screen did not change after the action";

/// Judges the last action. Identical digests mean nothing happened, which is
/// decided here without asking the backend.
pub fn reflect(
    subtask: &str,
    action: &Action,
    before: &Observation,
    after: &Observation,
    backend: &dyn Backend,
) -> Result<Reflection, AgentError> {
    if before.state_digest == after.state_digest {
        return Ok(Reflection::no_change(NO_CHANGE_MESSAGE));
    }
    let reply = backend.complete(
        &[ChatMessage::user(reflection_prompt(subtask, action, before, after))],
        AgentRole::Reflection,
    )?;
    Ok(parse_reflection(&reply))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_lines_parse() {
        let reply = "Here is the plan:\n\
            1. [Browser] Search the population of China | deps: - | output: yes\n\
            2. [Spreadsheet] Write {out:1} into cell B1 | deps: 1 | output: no\n";
        let plan = parse_plan("i", reply).unwrap();
        assert_eq!(plan.subtasks.len(), 2);
        assert_eq!(plan.subtasks[1].depends_on, vec![1]);
        assert!(plan.subtasks[0].produces_output);
        assert_eq!(plan.subtasks[1].app_hint, "Spreadsheet");
    }

    #[test]
    fn plan_errors() {
        let prose = "I would open the browser and then search.";
        assert!(matches!(
            parse_plan("i", prose),
            Err(AgentError::PlanParseFailure(_))
        ));
        let forward = "1. [Clock] a | deps: 2 | output: no\n2. [Clock] b | deps: - | output: no";
        assert!(matches!(
            parse_plan("i", forward),
            Err(AgentError::DependencyCycle { id: 1, dep: 2 })
        ));
        let undeclared = "1. [Browser] a | deps: - | output: yes\n2. [Editor] {out:1} | deps: - | output: no";
        assert!(matches!(
            parse_plan("i", undeclared),
            Err(AgentError::PlanParseFailure(_))
        ));
        let gap = "1. [Clock] a | deps: - | output: no\n3. [Clock] b | deps: - | output: no";
        assert!(parse_plan("i", gap).is_err());
        let bad_line = "1. Clock: set alarm";
        assert!(parse_plan("i", bad_line).is_err());
    }

    #[test]
    fn hub_rejects_duplicates() {
        let hub = hub_update(&CommunicationHub::default(), 1, "population 1.41B").unwrap();
        assert_eq!(hub.get(1), Some("population 1.41B"));
        assert!(matches!(
            hub_update(&hub, 1, "b"),
            Err(AgentError::DuplicateOutput(1))
        ));
    }

    #[test]
    fn instantiation() {
        let spec = |t: &str| SubtaskSpec {
            id: 2,
            template: t.into(),
            app_hint: String::new(),
            produces_output: false,
            depends_on: vec![1],
        };
        let mut hub = CommunicationHub::default();
        hub.insert(1, "1.41B").unwrap();
        assert_eq!(
            instantiate_subtask(&spec("Write {out:1} into cell B1"), &hub).unwrap(),
            "Write 1.41B into cell B1"
        );
        assert_eq!(
            instantiate_subtask(&spec("plain"), &CommunicationHub::default()).unwrap(),
            "plain"
        );
        assert!(matches!(
            instantiate_subtask(&spec("{out:2}"), &hub),
            Err(AgentError::UnresolvedDependency { missing: 2, .. })
        ));
    }

    #[test]
    fn reflection_replies() {
        assert_eq!(parse_reflection("CORRECT").judgment, Judgment::Correct);
        let r = parse_reflection("UNEXPECTED: wrong cell edited");
        assert_eq!(r, Reflection::unexpected("wrong cell edited"));
        assert_eq!(parse_reflection("NO_CHANGE: nothing").judgment, Judgment::NoChange);
        let garbage = parse_reflection("looks fine to me");
        assert_eq!(garbage, Reflection::unexpected("looks fine to me"));
        assert_eq!(parse_reflection(&r.to_string()), r);
    }

    #[test]
    fn decision_replies() {
        let d = parse_decision("Thought: click it\nAction: Click (10, 20)").unwrap();
        assert_eq!(d.monologue, "click it");
        assert_eq!(
            d.action,
            Action::Click {
                at: crate::action_space::Point::new(10, 20)
            }
        );
        let s = parse_decision("Thought: a\nmore\nAction: Select (the last paragraph)").unwrap();
        assert_eq!(s.monologue, "a\nmore");
        assert!(matches!(s.action, Action::Select { .. }));
        assert!(parse_decision("Thought: hmm").is_err());
        assert!(parse_decision("Action: Jump (1, 2)").is_err());
    }

    #[test]
    fn progress_replies() {
        let p = parse_progress("SUMMARY: searched\nDONE: yes\nOUTPUT: 1.41B", 3).unwrap();
        assert_eq!(p.output.as_deref(), Some("1.41B"));
        assert_eq!(p.steps_taken, 3);
        let p = parse_progress("SUMMARY: typing\nDONE: no\nOUTPUT: early", 1).unwrap();
        assert_eq!(p.output, None);
        assert!(parse_progress("DONE: yes", 1).is_err());
        assert!(parse_progress("SUMMARY: x\nDONE: maybe", 1).is_err());
    }
}
