//! The hierarchical run loop: plan the instruction, then for each subtask
//! iterate decide → (resolve Select) → execute → reflect → progress until the
//! subtask is done or a budget trips.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action_space::Action;
use crate::agents::{
    decide, instantiate_subtask, manager_decompose, progress_update, reflect, AgentError,
    CommunicationHub, DecisionOutput, DecompositionPlan, Judgment, Reflection, SubtaskSpec,
    TaskProgress,
};
use crate::backends::Backend;
use crate::perception::{render_observation, resolve_select, SelectError};
use crate::sim::{execute, DesktopState, Environment, Scenario};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Components that can be switched off to measure their contribution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    /// `Select` is never resolved to a drag; it fails as an unexpected outcome.
    pub no_apm: bool,
    /// No planning: the whole instruction runs as one subtask.
    pub no_manager: bool,
    /// Every step is judged correct without looking at the screen.
    pub no_reflection: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub max_steps_per_subtask: u32,
    pub max_consecutive_noops: u32,
    pub decision_parse_retries: u32,
    pub ablation: Ablation,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_steps_per_subtask: 25,
            max_consecutive_noops: 3,
            decision_parse_retries: 1,
            ablation: Ablation::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        for (name, v) in [
            ("max_steps_per_subtask", self.max_steps_per_subtask),
            ("max_consecutive_noops", self.max_consecutive_noops),
            ("decision_parse_retries", self.decision_parse_retries),
        ] {
            if v < 1 {
                return Err(OrchestratorError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("subtask text is empty")]
    EmptySubtask,
    #[error("planning failed: {0}")]
    Planning(#[source] AgentError),
}

/// Why a subtask stopped without finishing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FailureReason {
    StepBudgetExceeded { limit: u32 },
    NoopLoopDetected { count: u32 },
    UnresolvedDependency { missing: u32 },
    DecisionParseFailure { message: String },
    ProgressParseFailure { message: String },
    Backend { message: String },
}

impl From<AgentError> for FailureReason {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::DecisionParseFailure(m) => FailureReason::DecisionParseFailure { message: m },
            AgentError::ProgressParseFailure(m) => FailureReason::ProgressParseFailure { message: m },
            AgentError::UnresolvedDependency { missing, .. } => {
                FailureReason::UnresolvedDependency { missing }
            }
            other => FailureReason::Backend {
                message: other.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub subtask_id: u32,
    /// 1-based within the subtask.
    pub step_index: u32,
    pub observation_digest: String,
    pub rendered_observation: String,
    /// Progress handed to the decision agent for this step.
    pub progress_in: TaskProgress,
    /// Reflection on the previous step handed to the decision agent.
    pub reflection_in: Option<Reflection>,
    pub decision: DecisionOutput,
    /// The action actually executed; differs from the decision only for `Select`.
    pub resolved_action: Action,
    pub after_digest: String,
    pub reflection: Reflection,
    pub progress: TaskProgress,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtaskRun {
    pub id: u32,
    /// Concrete subtask text after hub substitution.
    pub text: String,
    pub steps: Vec<StepRecord>,
    pub progress: TaskProgress,
    pub end_digest: String,
    pub failure: Option<FailureReason>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Outcome {
    CompletedAll,
    FailedAtSubtask { id: u32, reason: FailureReason },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub instruction: String,
    pub scenario: String,
    pub initial_digest: String,
    pub plan: DecompositionPlan,
    pub subtasks: Vec<SubtaskRun>,
    pub hub: CommunicationHub,
    pub outcome: Outcome,
    pub final_digest: String,
}

impl Trace {
    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.subtasks.iter().flat_map(|s| s.steps.iter())
    }
}

/// Result of [`run_subtask`]: the final progress and records, plus the
/// failure reason when the subtask did not finish.
#[derive(Debug, Clone)]
pub struct SubtaskOutcome {
    pub progress: TaskProgress,
    pub steps: Vec<StepRecord>,
    pub failure: Option<FailureReason>,
}

pub fn run_subtask(
    id: u32,
    subtask: &str,
    env: &mut Environment,
    backend: &dyn Backend,
    cfg: &RunConfig,
) -> Result<SubtaskOutcome, OrchestratorError> {
    cfg.validate()?;
    if subtask.trim().is_empty() {
        return Err(OrchestratorError::EmptySubtask);
    }
    let retries = cfg.decision_parse_retries;
    let mut progress = TaskProgress::default();
    let mut last_reflection: Option<Reflection> = None;
    let mut steps = Vec::new();
    let mut noops = 0;

    let fail = |progress, steps, reason| {
        Ok(SubtaskOutcome {
            progress,
            steps,
            failure: Some(reason),
        })
    };

    for step_index in 1..=cfg.max_steps_per_subtask {
        let before = env.observe();
        let decision = match decide(subtask, &before, &progress, last_reflection.as_ref(), backend, retries) {
            Ok(d) => d,
            Err(e) => return fail(progress, steps, e.into()),
        };

        let mut select_failure = None;
        let resolved = match &decision.action {
            Action::Select { target } if cfg.ablation.no_apm => {
                select_failure = Some(format!("could not select `{target}`: text selection is unavailable"));
                decision.action.clone()
            }
            Action::Select { target } => match resolve_select(target, &before, backend) {
                Ok(drag) => drag,
                Err(SelectError::Backend(e)) => {
                    return fail(progress, steps, FailureReason::Backend { message: e.to_string() })
                }
                Err(e) => {
                    select_failure = Some(e.to_string());
                    decision.action.clone()
                }
            },
            other => other.clone(),
        };

        let stop = resolved == Action::Stop;
        let (after, reflection) = if stop {
            (before.clone(), Reflection::correct())
        } else if let Some(message) = select_failure {
            (before.clone(), Reflection::unexpected(message))
        } else {
            env.execute(&resolved);
            let after = env.observe();
            let reflection = if cfg.ablation.no_reflection {
                Reflection::correct()
            } else {
                match reflect(subtask, &resolved, &before, &after, backend) {
                    Ok(r) => r,
                    Err(e) => return fail(progress, steps, e.into()),
                }
            };
            (after, reflection)
        };

        let mut next = match progress_update(subtask, &progress, &resolved, &reflection, backend, retries) {
            Ok(p) => p,
            Err(e) => return fail(progress, steps, e.into()),
        };
        if stop {
            next.done = true;
        }

        noops = if reflection.judgment == Judgment::NoChange { noops + 1 } else { 0 };
        steps.push(StepRecord {
            subtask_id: id,
            step_index,
            observation_digest: before.state_digest.clone(),
            rendered_observation: render_observation(&before),
            progress_in: progress.clone(),
            reflection_in: last_reflection.clone(),
            decision,
            resolved_action: resolved,
            after_digest: after.state_digest,
            reflection: reflection.clone(),
            progress: next.clone(),
        });
        progress = next;
        last_reflection = Some(reflection);

        if progress.done {
            return Ok(SubtaskOutcome {
                progress,
                steps,
                failure: None,
            });
        }
        if noops >= cfg.max_consecutive_noops {
            return fail(progress, steps, FailureReason::NoopLoopDetected { count: noops });
        }
    }
    let limit = cfg.max_steps_per_subtask;
    fail(progress, steps, FailureReason::StepBudgetExceeded { limit })
}

/// The plan used when the manager is ablated: the instruction as one subtask.
pub fn single_subtask_plan(instruction: &str) -> DecompositionPlan {
    DecompositionPlan {
        instruction: instruction.to_string(),
        subtasks: vec![SubtaskSpec {
            id: 1,
            template: instruction.to_string(),
            app_hint: String::new(),
            produces_output: false,
            depends_on: Vec::new(),
        }],
    }
}

pub fn run_instruction(
    instruction: &str,
    env: &mut Environment,
    backend: &dyn Backend,
    cfg: &RunConfig,
) -> Result<Trace, OrchestratorError> {
    cfg.validate()?;
    let initial_digest = env.digest();
    let plan = if cfg.ablation.no_manager {
        single_subtask_plan(instruction.trim())
    } else {
        manager_decompose(instruction, backend, cfg.decision_parse_retries)
            .map_err(OrchestratorError::Planning)?
    };

    let mut hub = CommunicationHub::default();
    let mut runs = Vec::new();
    let mut outcome = Outcome::CompletedAll;
    for spec in &plan.subtasks {
        let text = match instantiate_subtask(spec, &hub) {
            Ok(t) => t,
            Err(e) => {
                outcome = Outcome::FailedAtSubtask {
                    id: spec.id,
                    reason: e.into(),
                };
                break;
            }
        };
        let result = run_subtask(spec.id, &text, env, backend, cfg)?;
        if result.failure.is_none() && spec.produces_output {
            if let Some(output) = &result.progress.output {
                hub.insert(spec.id, output.clone())
                    .expect("each subtask id runs once");
            }
        }
        let failure = result.failure.clone();
        runs.push(SubtaskRun {
            id: spec.id,
            text,
            steps: result.steps,
            progress: result.progress,
            end_digest: env.digest(),
            failure: failure.clone(),
        });
        if let Some(reason) = failure {
            outcome = Outcome::FailedAtSubtask { id: spec.id, reason };
            break;
        }
    }

    Ok(Trace {
        instruction: instruction.to_string(),
        scenario: env.scenario().name.clone(),
        initial_digest,
        plan,
        subtasks: runs,
        hub,
        outcome,
        final_digest: env.digest(),
    })
}

/// A step whose recorded inputs disagree with what the previous step produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WiringViolation {
    pub subtask_id: u32,
    pub step_index: u32,
    pub problem: String,
}

/// Checks the per-step dataflow of every subtask in the trace:
/// step 1 starts from empty progress and no reflection; step i receives
/// exactly the progress and reflection produced by step i−1; the step
/// counter advances by one; the executed action only differs from the
/// decision for `Select`; and each step starts from the state the previous
/// one left.
pub fn audit_trace(trace: &Trace) -> Vec<WiringViolation> {
    let mut out = Vec::new();
    for run in &trace.subtasks {
        let mut prev: Option<&StepRecord> = None;
        for (k, step) in run.steps.iter().enumerate() {
            let mut bad = |problem: &str| {
                out.push(WiringViolation {
                    subtask_id: run.id,
                    step_index: step.step_index,
                    problem: problem.to_string(),
                })
            };
            if step.step_index as usize != k + 1 {
                bad("step index out of sequence");
            }
            match prev {
                None => {
                    if step.progress_in != TaskProgress::default() {
                        bad("first step did not start from empty progress");
                    }
                    if step.reflection_in.is_some() {
                        bad("first step received a reflection");
                    }
                }
                Some(p) => {
                    if step.progress_in != p.progress {
                        bad("progress input differs from previous step's progress");
                    }
                    if step.reflection_in.as_ref() != Some(&p.reflection) {
                        bad("reflection input differs from previous step's reflection");
                    }
                    if step.observation_digest != p.after_digest {
                        bad("step did not start from the previous step's end state");
                    }
                }
            }
            if step.progress.steps_taken != step.progress_in.steps_taken + 1 {
                bad("progress step counter did not advance by one");
            }
            if !matches!(step.decision.action, Action::Select { .. })
                && step.resolved_action != step.decision.action
            {
                bad("executed action differs from the decision");
            }
            prev = Some(step);
        }
    }
    out
}

/// States reached by replaying a trace's executed actions from the
/// scenario's initial state.
#[derive(Debug, Clone)]
pub struct Replay {
    /// State at the end of each recorded subtask, in order.
    pub checkpoints: Vec<DesktopState>,
    pub final_state: DesktopState,
}

pub fn replay(trace: &Trace, scenario: &Scenario) -> Replay {
    let mut state = scenario.initial.clone();
    let mut checkpoints = Vec::new();
    for run in &trace.subtasks {
        for step in &run.steps {
            state = execute(&state, scenario, &step.resolved_action).0;
        }
        checkpoints.push(state.clone());
    }
    Replay {
        checkpoints,
        final_state: state,
    }
}
