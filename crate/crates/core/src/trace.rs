//! JSONL trace files.
//!
//! Line 1 is a header, then one line per step, then a footer:
//!
//! ```text
//! {"type":"header","schema_version":1,"instruction":..,"scenario":..,"initial_digest":..,"plan":{..}}
//! {"type":"step","subtask_id":1,"step_index":1,..}
//! {"type":"footer","subtasks":[{"id":1,"text":..,"progress":{..},"end_digest":..,"failure":null}],"hub":{..},"outcome":{..},"final_digest":..}
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{CommunicationHub, DecompositionPlan, TaskProgress};
use crate::orchestrator::{
    FailureReason, Outcome, StepRecord, SubtaskRun, Trace, TRACE_SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported trace schema version {0}")]
    Version(u32),
    #[error("malformed trace: {0}")]
    Shape(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct SubtaskSummary {
    id: u32,
    text: String,
    progress: TaskProgress,
    end_digest: String,
    failure: Option<FailureReason>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header {
        schema_version: u32,
        instruction: String,
        scenario: String,
        initial_digest: String,
        plan: DecompositionPlan,
    },
    Step(Box<StepRecord>),
    Footer {
        subtasks: Vec<SubtaskSummary>,
        /// Hub outputs keyed by subtask id. Kept as string keys because
        /// integer map keys do not survive the tagged-enum buffering.
        hub: BTreeMap<String, String>,
        outcome: Outcome,
        final_digest: String,
    },
}

pub fn write_trace(trace: &Trace, mut out: impl Write) -> Result<(), TraceError> {
    let mut emit = |line: &Line| -> Result<(), TraceError> {
        serde_json::to_writer(&mut out, line).map_err(|source| TraceError::Json { line: 0, source })?;
        out.write_all(b"\n")?;
        Ok(())
    };
    emit(&Line::Header {
        schema_version: TRACE_SCHEMA_VERSION,
        instruction: trace.instruction.clone(),
        scenario: trace.scenario.clone(),
        initial_digest: trace.initial_digest.clone(),
        plan: trace.plan.clone(),
    })?;
    for step in trace.steps() {
        emit(&Line::Step(Box::new(step.clone())))?;
    }
    emit(&Line::Footer {
        subtasks: trace
            .subtasks
            .iter()
            .map(|s| SubtaskSummary {
                id: s.id,
                text: s.text.clone(),
                progress: s.progress.clone(),
                end_digest: s.end_digest.clone(),
                failure: s.failure.clone(),
            })
            .collect(),
        hub: trace
            .hub
            .outputs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect(),
        outcome: trace.outcome.clone(),
        final_digest: trace.final_digest.clone(),
    })
}

pub fn trace_to_string(trace: &Trace) -> String {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn read_trace(input: impl BufRead) -> Result<Trace, TraceError> {
    let mut header = None;
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut footer = None;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line =
            serde_json::from_str(&line).map_err(|source| TraceError::Json { line: i + 1, source })?;
        match parsed {
            Line::Header { .. } if header.is_some() => {
                return Err(TraceError::Shape("second header".into()))
            }
            Line::Header {
                schema_version, ..
            } if schema_version != TRACE_SCHEMA_VERSION => {
                return Err(TraceError::Version(schema_version))
            }
            h @ Line::Header { .. } => header = Some(h),
            _ if header.is_none() => return Err(TraceError::Shape("missing header".into())),
            _ if footer.is_some() => return Err(TraceError::Shape("content after footer".into())),
            Line::Step(s) => steps.push(*s),
            f @ Line::Footer { .. } => footer = Some(f),
        }
    }
    let Some(Line::Header {
        instruction,
        scenario,
        initial_digest,
        plan,
        ..
    }) = header
    else {
        return Err(TraceError::Shape("missing header".into()));
    };
    let Some(Line::Footer {
        subtasks,
        hub,
        outcome,
        final_digest,
    }) = footer
    else {
        return Err(TraceError::Shape("missing footer".into()));
    };

    let mut outputs = BTreeMap::new();
    for (k, v) in hub {
        let id: u32 = k
            .parse()
            .map_err(|_| TraceError::Shape(format!("hub key {k:?} is not a subtask id")))?;
        outputs.insert(id, v);
    }
    let hub = CommunicationHub { outputs };

    let mut runs: Vec<SubtaskRun> = subtasks
        .into_iter()
        .map(|s| SubtaskRun {
            id: s.id,
            text: s.text,
            steps: Vec::new(),
            progress: s.progress,
            end_digest: s.end_digest,
            failure: s.failure,
        })
        .collect();
    for step in steps {
        let run = runs
            .iter_mut()
            .find(|r| r.id == step.subtask_id)
            .ok_or_else(|| TraceError::Shape(format!("step for unknown subtask {}", step.subtask_id)))?;
        run.steps.push(step);
    }
    Ok(Trace {
        instruction,
        scenario,
        initial_digest,
        plan,
        subtasks: runs,
        hub,
        outcome,
        final_digest,
    })
}

pub fn load_trace(path: impl AsRef<std::path::Path>) -> Result<Trace, TraceError> {
    let file = std::fs::File::open(path)?;
    read_trace(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_headerless_input() {
        let err = read_trace("{\"type\":\"footer\",\"subtasks\":[],\"hub\":{},\"outcome\":{\"kind\":\"CompletedAll\"},\"final_digest\":\"x\"}\n".as_bytes());
        assert!(matches!(err, Err(TraceError::Shape(_))));
        assert!(matches!(read_trace("".as_bytes()), Err(TraceError::Shape(_))));
    }
}
