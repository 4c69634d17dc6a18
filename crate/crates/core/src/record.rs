/*
Copyright 2026 The telebench Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
//! Trial records and their JSONL persistence.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::Gains;
use crate::geometry::Pose;
use crate::operator::OperatorParams;
use crate::world::Benchmark;

pub const TRIAL_SCHEMA: &str = "trial.v1";

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("record schema mismatch on line {line}: expected {expected}, found {found}")]
    SchemaVersionMismatch {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("malformed record on line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TrialStart,
    Suggestion,
    Select,
    EnterAlignZone,
    ExitAlignZone,
    GripperClose,
    GripperOpen,
    Attach,
    Miss,
    Collision,
    Slip,
    Release,
    Drop,
    Place,
    Insert,
    Contact,
    Unreachable,
    Abandon,
    Present,
    Pause,
    Resume,
    Goal,
    Timeout,
    Failure,
    Abort,
}

impl EventKind {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            EventKind::Goal | EventKind::Timeout | EventKind::Failure | EventKind::Abort
        )
    }

    pub fn name(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    pub t: f64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<usize>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    FailureTimeout,
    FailureSlip,
    FailureMiss,
    Aborted,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Outcome::Success => "success",
            Outcome::FailureTimeout => "failure_timeout",
            Outcome::FailureSlip => "failure_slip",
            Outcome::FailureMiss => "failure_miss",
            Outcome::Aborted => "aborted",
        };
        f.write_str(s)
    }
}

/// Everything that parameterized a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialParams {
    pub gains: Gains,
    pub operator: OperatorParams,
    pub align_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub schema: String,
    /// Position in the benchmark plan.
    pub trial: usize,
    pub benchmark: Benchmark,
    pub task: u8,
    pub class: String,
    /// Dataset object for single-object trials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_index: Option<usize>,
    /// Recorded table pose for single-object trials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_index: Option<usize>,
    pub rep: usize,
    pub controller: String,
    pub operator: String,
    pub master_seed: u64,
    pub scene_seed: u64,
    pub operator_seed: u64,
    pub camera_seed: u64,
    pub dt: f64,
    pub t_max: f64,
    pub params: TrialParams,
    pub objects_total: usize,
    pub objects_done: usize,
    pub events: Vec<Event>,
    pub outcome: Outcome,
    pub completion_time: Option<f64>,
}

impl TrialRecord {
    pub fn is_success(&self) -> bool {
        self.outcome == Outcome::Success
    }

    /// Whether the first perception pass produced at least one suggestion.
    pub fn suggestion_available(&self) -> bool {
        self.events
            .iter()
            .find(|e| e.kind == EventKind::Suggestion)
            .and_then(|e| e.payload.get("count"))
            .and_then(|c| c.as_u64())
            .is_some_and(|c| c > 0)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    /// Checks the structural invariants: time-ordered events, exactly one
    /// terminal event (last), completion time iff success.
    pub fn check(&self) -> Result<(), String> {
        if self.events.windows(2).any(|w| w[1].tick < w[0].tick) {
            return Err("events out of order".into());
        }
        let terminals = self.events.iter().filter(|e| e.kind.is_terminal()).count();
        if terminals != 1 || !self.events.last().is_some_and(|e| e.kind.is_terminal()) {
            return Err(format!("{terminals} terminal events"));
        }
        if self.completion_time.is_some() != self.is_success() {
            return Err("completion time present iff success".into());
        }
        Ok(())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RecordError + '_ {
    move |source| RecordError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn persist(records: &[TrialRecord], path: &Path) -> Result<(), RecordError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        writeln!(w, "{}", r.to_json_line()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn load(path: &Path) -> Result<Vec<TrialRecord>, RecordError> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_lines(BufReader::new(file)).map_err(|e| match e {
        RecordError::Io { source, .. } => io_err(path)(source),
        other => other,
    })
}

pub fn parse_lines<R: BufRead>(reader: R) -> Result<Vec<TrialRecord>, RecordError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| RecordError::Io {
            path: String::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| RecordError::Parse {
            line: n,
            message: e.to_string(),
        })?;
        let found = value.get("schema").and_then(|v| v.as_str()).unwrap_or("");
        if found != TRIAL_SCHEMA {
            return Err(RecordError::SchemaVersionMismatch {
                line: n,
                expected: TRIAL_SCHEMA.into(),
                found: found.into(),
            });
        }
        out.push(serde_json::from_value(value).map_err(|e| RecordError::Parse {
            line: n,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
