//! Benchmark corpus, scoring, aggregate metrics and the batch runner.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action_space::Action;
use crate::agents::{DecompositionPlan, Judgment};
use crate::backends::{Backend, HttpBackend, HttpConfig, ScriptedBackend};
use crate::orchestrator::{replay, run_instruction, RunConfig, Trace};
use crate::sim::{check, load_scenario, Environment, Scenario, StatePredicate};
use crate::trace::write_trace;

pub const CORPUS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldSubtask {
    pub description: String,
    pub success: Vec<StatePredicate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkTask {
    pub id: String,
    pub instruction: String,
    /// Scenario file, relative to the corpus file.
    pub scenario: PathBuf,
    /// Scripted backend replies, relative to the corpus file.
    #[serde(default)]
    pub script: Option<PathBuf>,
    pub gold_subtasks: Vec<GoldSubtask>,
    #[serde(default)]
    pub gold_plan_keys: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corpus {
    pub version: u32,
    pub tasks: Vec<BenchmarkTask>,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("corpus has no tasks")]
    EmptyCorpus,
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus is not valid JSON: {0}")]
    CorpusParse(#[from] serde_json::Error),
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),
    #[error("trace does not belong to this scenario: {0}")]
    ScenarioMismatch(String),
    #[error("configuration file: {0}")]
    Config(String),
}

impl Corpus {
    /// Loads a corpus and makes every task path absolute relative to it.
    pub fn load(path: impl AsRef<Path>) -> Result<Corpus, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut corpus: Corpus = serde_json::from_str(&text)?;
        if corpus.version != CORPUS_VERSION {
            return Err(HarnessError::InvalidCorpus(format!(
                "unsupported version {}",
                corpus.version
            )));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        for task in &mut corpus.tasks {
            if task.gold_subtasks.is_empty() {
                return Err(HarnessError::InvalidCorpus(format!(
                    "task {} has no gold subtasks",
                    task.id
                )));
            }
            task.scenario = base.join(&task.scenario);
            if let Some(script) = &mut task.script {
                *script = base.join(&*script);
            }
        }
        Ok(corpus)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task_id: String,
    pub instruction_success: bool,
    pub subtask_successes: Vec<bool>,
    pub recovered: bool,
    pub plan_correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TaskScore {
    /// Score for a task whose run produced no trace.
    pub fn failed(task: &BenchmarkTask, error: impl Into<String>) -> Self {
        Self {
            task_id: task.id.clone(),
            instruction_success: false,
            subtask_successes: vec![false; task.gold_subtasks.len()],
            recovered: false,
            plan_correct: false,
            error: Some(error.into()),
        }
    }
}

fn normalize_phrase(s: &str) -> String {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Each key must be contained in a distinct plan subtask, in order; matching
/// is greedy on normalized text.
pub fn plan_matches(plan: &DecompositionPlan, keys: &[String]) -> bool {
    let mut subtasks = plan.subtasks.iter();
    keys.iter().all(|key| {
        let key = normalize_phrase(key);
        subtasks.any(|s| normalize_phrase(&s.template).contains(&key))
    })
}

/// A flagged step later followed, in the same subtask, by a correct step
/// that executed a different action. `Stop` executes nothing and so never
/// counts as the correcting step.
pub fn trace_recovered(trace: &Trace) -> bool {
    trace.subtasks.iter().any(|run| {
        run.steps.iter().enumerate().any(|(i, flagged)| {
            flagged.reflection.judgment != Judgment::Correct
                && run.steps[i + 1..].iter().any(|later| {
                    later.reflection.judgment == Judgment::Correct
                        && later.resolved_action != Action::Stop
                        && later.resolved_action != flagged.resolved_action
                })
        })
    })
}

/// Scores one run. Gold subtask k succeeds when all its predicates hold at
/// the end of some executed subtask, using states rebuilt by replaying the
/// trace from the scenario.
pub fn score_task(
    task: &BenchmarkTask,
    trace: &Trace,
    scenario: &Scenario,
) -> Result<TaskScore, HarnessError> {
    let initial = scenario.initial.digest();
    if trace.initial_digest != initial {
        return Err(HarnessError::ScenarioMismatch(format!(
            "trace starts from {} but the scenario starts from {}",
            trace.initial_digest, initial
        )));
    }
    let replayed = replay(trace, scenario);
    if replayed.final_state.digest() != trace.final_digest {
        return Err(HarnessError::ScenarioMismatch(
            "replaying the trace does not reproduce its final state".into(),
        ));
    }
    let mut checkpoints = replayed.checkpoints;
    if checkpoints.is_empty() {
        checkpoints.push(scenario.initial.clone());
    }
    let subtask_successes: Vec<bool> = task
        .gold_subtasks
        .iter()
        .map(|gold| {
            checkpoints
                .iter()
                .any(|state| gold.success.iter().all(|p| check(state, p)))
        })
        .collect();
    Ok(TaskScore {
        task_id: task.id.clone(),
        instruction_success: subtask_successes.iter().all(|s| *s),
        subtask_successes,
        recovered: trace_recovered(trace),
        plan_correct: plan_matches(&trace.plan, &task.gold_plan_keys),
        error: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tasks: usize,
    pub successes: usize,
    pub subtasks: usize,
    pub subtask_successes: usize,
    pub recovered: usize,
    pub plan_correct: usize,
    pub sr: f64,
    pub ssr: f64,
    pub recovery_rate: f64,
    pub manager_sr: f64,
    pub per_task: Vec<TaskScore>,
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

pub fn compute_report(scores: &[TaskScore]) -> Result<EvalReport, HarnessError> {
    if scores.is_empty() {
        return Err(HarnessError::EmptyCorpus);
    }
    let tasks = scores.len();
    let successes = scores.iter().filter(|s| s.instruction_success).count();
    let subtasks = scores.iter().map(|s| s.subtask_successes.len()).sum();
    let subtask_successes = scores
        .iter()
        .flat_map(|s| &s.subtask_successes)
        .filter(|ok| **ok)
        .count();
    let recovered = scores.iter().filter(|s| s.recovered).count();
    let plan_correct = scores.iter().filter(|s| s.plan_correct).count();
    Ok(EvalReport {
        tasks,
        successes,
        subtasks,
        subtask_successes,
        recovered,
        plan_correct,
        sr: ratio(successes, tasks),
        ssr: ratio(subtask_successes, subtasks),
        recovery_rate: ratio(recovered, tasks),
        manager_sr: ratio(plan_correct, tasks),
        per_task: scores.to_vec(),
    })
}

pub fn report_json(report: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Where agent replies come from during a benchmark run.
#[derive(Clone)]
pub enum BackendChoice {
    /// Each task replays its own script file.
    Scripted,
    /// All tasks share one HTTP client.
    Http(Arc<HttpBackend>),
}

/// Outcome of one task in a batch.
#[derive(Debug, Clone)]
pub struct TaskRun {
    pub score: TaskScore,
    pub trace: Option<Trace>,
}

/// Runs and scores one task. Errors become a failed score.
pub fn run_task(task: &BenchmarkTask, backend: &BackendChoice, cfg: &RunConfig) -> TaskRun {
    let (_, scenario) = match load_scenario(&task.scenario) {
        Ok(s) => s,
        Err(e) => {
            return TaskRun {
                score: TaskScore::failed(task, e.to_string()),
                trace: None,
            }
        }
    };
    let scripted;
    let backend: &dyn Backend = match backend {
        BackendChoice::Http(http) => http.as_ref(),
        BackendChoice::Scripted => {
            let Some(path) = &task.script else {
                return TaskRun {
                    score: TaskScore::failed(task, "task has no script"),
                    trace: None,
                };
            };
            scripted = match ScriptedBackend::from_file(path) {
                Ok(b) => b,
                Err(e) => {
                    return TaskRun {
                        score: TaskScore::failed(task, format!("{}: {e}", path.display())),
                        trace: None,
                    }
                }
            };
            &scripted
        }
    };
    let mut env = Environment::new(scenario.clone());
    let mut trace = match run_instruction(&task.instruction, &mut env, backend, cfg) {
        Ok(t) => t,
        Err(e) => {
            return TaskRun {
                score: TaskScore::failed(task, e.to_string()),
                trace: None,
            }
        }
    };
    trace.scenario = task.scenario.display().to_string();
    let score = score_task(task, &trace, &scenario)
        .unwrap_or_else(|e| TaskScore::failed(task, e.to_string()));
    TaskRun {
        score,
        trace: Some(trace),
    }
}

/// Runs every task on up to `jobs` worker threads. Results keep corpus order.
pub fn run_corpus(
    corpus: &Corpus,
    backend: &BackendChoice,
    cfg: &RunConfig,
    jobs: usize,
) -> Result<Vec<TaskRun>, HarnessError> {
    if corpus.tasks.is_empty() {
        return Err(HarnessError::EmptyCorpus);
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<TaskRun>>> = Mutex::new(vec![None; corpus.tasks.len()]);
    let workers = jobs.clamp(1, corpus.tasks.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(task) = corpus.tasks.get(i) else {
                    break;
                };
                tracing::debug!(task = %task.id, "running task");
                let run = run_task(task, backend, cfg);
                results.lock().expect("results lock")[i] = Some(run);
            });
        }
    });
    Ok(results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every task ran"))
        .collect())
}

/// Runs the corpus, writes `<task id>.jsonl` traces and `report.json` into
/// `out_dir`, and returns the report.
pub fn run_benchmark(
    corpus_path: impl AsRef<Path>,
    backend: &BackendChoice,
    cfg: &RunConfig,
    jobs: usize,
    out_dir: impl AsRef<Path>,
) -> Result<EvalReport, HarnessError> {
    let corpus = Corpus::load(corpus_path)?;
    let runs = run_corpus(&corpus, backend, cfg, jobs)?;
    let out_dir = out_dir.as_ref();
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| HarnessError::Io { path, source }
    };
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for run in &runs {
        if let Some(trace) = &run.trace {
            let path = out_dir.join(format!("{}.jsonl", run.score.task_id));
            let file = std::fs::File::create(&path).map_err(io_err(&path))?;
            write_trace(trace, std::io::BufWriter::new(file))
                .map_err(|e| HarnessError::Io {
                    path: path.display().to_string(),
                    source: std::io::Error::other(e.to_string()),
                })?;
        }
    }
    let scores: Vec<TaskScore> = runs.into_iter().map(|r| r.score).collect();
    let report = compute_report(&scores)?;
    let path = out_dir.join("report.json");
    std::fs::write(&path, report_json(&report)).map_err(io_err(&path))?;
    Ok(report)
}

/// Settings file (TOML):
///
/// ```toml
/// [run]
/// max_steps_per_subtask = 25
/// max_consecutive_noops = 3
/// decision_parse_retries = 1
///
/// [http]
/// url = "http://localhost:8000/v1/chat/completions"
/// model = "gpt-4o"
/// timeout_secs = 120
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub run: RunConfig,
    pub http: HttpConfig,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Settings, HarnessError> {
        let settings: Settings =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        settings
            .run
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(settings)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Settings, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::SubtaskSpec;

    fn score(success: bool, subtasks: &[bool], recovered: bool, plan: bool) -> TaskScore {
        TaskScore {
            task_id: "t".into(),
            instruction_success: success,
            subtask_successes: subtasks.to_vec(),
            recovered,
            plan_correct: plan,
            error: None,
        }
    }

    #[test]
    fn report_ratios() {
        let scores = vec![
            score(true, &[true, true], true, true),
            score(false, &[true, false], false, true),
            score(false, &[false], false, false),
            score(false, &[false, false, false], false, false),
        ];
        let r = compute_report(&scores).unwrap();
        assert_eq!((r.tasks, r.subtasks, r.subtask_successes), (4, 8, 3));
        assert_eq!(r.sr, 0.25);
        assert_eq!(r.ssr, 3.0 / 8.0);
        assert_eq!(r.recovery_rate, 0.25);
        assert_eq!(r.manager_sr, 0.5);
        assert!(matches!(compute_report(&[]), Err(HarnessError::EmptyCorpus)));
    }

    #[test]
    fn all_failures_give_zero_rates() {
        let r = compute_report(&[score(false, &[false], false, false)]).unwrap();
        assert_eq!((r.sr, r.ssr, r.recovery_rate, r.manager_sr), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(r.subtasks, 1);
    }

    #[test]
    fn plan_keys_match_in_order() {
        let plan = DecompositionPlan {
            instruction: "i".into(),
            subtasks: ["Search the population of China", "Write {out:1} into cell B1"]
                .iter()
                .enumerate()
                .map(|(i, t)| SubtaskSpec {
                    id: i as u32 + 1,
                    template: t.to_string(),
                    app_hint: String::new(),
                    produces_output: false,
                    depends_on: vec![],
                })
                .collect(),
        };
        let keys = |k: &[&str]| k.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(plan_matches(&plan, &keys(&["population of china", "cell b1"])));
        assert!(!plan_matches(&plan, &keys(&["cell b1", "population of china"])));
        // two keys cannot share one subtask
        assert!(!plan_matches(&plan, &keys(&["population", "china"])));
        assert!(plan_matches(&plan, &[]));
    }

    #[test]
    fn settings_defaults_and_validation() {
        let s = Settings::parse("").unwrap();
        assert_eq!(s.run, RunConfig::default());
        let s = Settings::parse("[run]\nmax_steps_per_subtask = 5\n").unwrap();
        assert_eq!(s.run.max_steps_per_subtask, 5);
        assert!(Settings::parse("[run]\nmax_consecutive_noops = 0\n").is_err());
        assert!(Settings::parse("[bogus]\n").is_err());
    }
}
