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
//! Success rate, task effort and attention time, per class and pooled.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{EventKind, TrialRecord};
use crate::world::Benchmark;

pub const CSV_HEADER: &str =
    "benchmark,task,class,trials,success_rate,effort_mean_s,effort_std_s,attention_mean_s";
/// Class label of the pooled row.
pub const ACROSS_CLASSES: &str = "all";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no records")]
    EmptyInput,
    #[error("malformed timeline in trial {trial}: {message}")]
    MalformedTimeline { trial: usize, message: String },
}

pub fn success_rate(records: &[TrialRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let ok = records.iter().filter(|r| r.is_success()).count();
    Ok(ok as f64 / records.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effort {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n: usize,
}

/// Completion-time statistics over successful trials; `None` without any.
pub fn task_effort(records: &[TrialRecord]) -> Option<Effort> {
    let times: Vec<f64> = records
        .iter()
        .filter(|r| r.is_success())
        .filter_map(|r| r.completion_time)
        .collect();
    if times.is_empty() {
        return None;
    }
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    Some(Effort {
        mean,
        std: var.sqrt(),
        n: times.len(),
    })
}

/// Total time spent inside the alignment zone before acting: the sum of all
/// intervals opened by `enter_align_zone` and closed by `exit_align_zone` or
/// `gripper_close`.
pub fn attention_time(record: &TrialRecord) -> Result<f64, MetricsError> {
    let malformed = |message: String| MetricsError::MalformedTimeline {
        trial: record.trial,
        message,
    };
    let mut open: Option<f64> = None;
    let mut total = 0.0;
    for e in &record.events {
        match e.kind {
            EventKind::EnterAlignZone => {
                if open.is_some() {
                    return Err(malformed(format!("nested enter at t={}", e.t)));
                }
                open = Some(e.t);
            }
            EventKind::ExitAlignZone => match open.take() {
                Some(start) => total += e.t - start,
                None => return Err(malformed(format!("exit without enter at t={}", e.t))),
            },
            EventKind::GripperClose => {
                if let Some(start) = open.take() {
                    total += e.t - start;
                }
            }
            _ => {}
        }
    }
    if open.is_some() {
        return Err(malformed("unterminated align interval".into()));
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub benchmark: Benchmark,
    pub task: u8,
    pub class: String,
    pub trials: usize,
    pub success_rate: f64,
    pub effort: Option<Effort>,
    /// Mean over all trials of the group.
    pub attention_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
}

fn row(benchmark: Benchmark, task: u8, class: &str, group: &[&TrialRecord]) -> Result<MetricsRow, MetricsError> {
    let owned: Vec<TrialRecord> = group.iter().map(|r| (*r).clone()).collect();
    let mut attention = Vec::with_capacity(group.len());
    for r in group {
        attention.push(attention_time(r)?);
    }
    // Summing in a canonical order keeps the mean independent of input order.
    attention.sort_by(f64::total_cmp);
    let mut effort_records = owned.clone();
    effort_records.sort_by(|a, b| {
        a.completion_time
            .unwrap_or(f64::NAN)
            .total_cmp(&b.completion_time.unwrap_or(f64::NAN))
    });
    Ok(MetricsRow {
        benchmark,
        task,
        class: class.to_owned(),
        trials: group.len(),
        success_rate: success_rate(&owned)?,
        effort: task_effort(&effort_records),
        attention_mean: attention.iter().sum::<f64>() / attention.len() as f64,
    })
}

/// Groups by (benchmark, task, class) and adds one pooled row per
/// (benchmark, task) after its class rows.
pub fn aggregate(records: &[TrialRecord]) -> Result<MetricsReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut groups: BTreeMap<(Benchmark, u8), BTreeMap<String, Vec<&TrialRecord>>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.benchmark, r.task))
            .or_default()
            .entry(r.class.clone())
            .or_default()
            .push(r);
    }
    let mut rows = Vec::new();
    for ((benchmark, task), classes) in groups {
        let mut pooled = Vec::new();
        for (class, group) in &classes {
            rows.push(row(benchmark, task, class, group)?);
            pooled.extend(group.iter().copied());
        }
        rows.push(row(benchmark, task, ACROSS_CLASSES, &pooled)?);
    }
    Ok(MetricsReport { rows })
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

impl MetricsReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let (mean, std) = match r.effort {
                Some(e) => (num(e.mean), num(e.std)),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.benchmark,
                r.task,
                r.class,
                r.trials,
                num(r.success_rate),
                mean,
                std,
                num(r.attention_mean)
            );
        }
        out
    }

    pub fn row(&self, class: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.class == class)
    }
}

/// Completion-time statistics per dataset object, for single-object trials.
pub fn effort_by_object(records: &[TrialRecord]) -> BTreeMap<String, Option<Effort>> {
    let mut groups: BTreeMap<String, Vec<TrialRecord>> = BTreeMap::new();
    for r in records {
        if let Some(o) = &r.object {
            groups.entry(o.clone()).or_default().push(r.clone());
        }
    }
    groups
        .into_iter()
        .map(|(k, v)| (k, task_effort(&v)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::fixtures::{event, record};
    use crate::record::{EventKind as K, Outcome};

    #[test]
    fn success_rate_examples() {
        let ok = record("standard", Outcome::Success, Some(1.0), vec![event(1.0, K::Goal)]);
        let bad = record("standard", Outcome::FailureMiss, None, vec![event(1.0, K::Failure)]);
        let five = vec![ok.clone(), ok.clone(), ok.clone(), bad.clone(), bad];
        assert_eq!(success_rate(&five).unwrap(), 0.6);
        assert_eq!(success_rate(&[ok]).unwrap(), 1.0);
        assert_eq!(success_rate(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn effort_examples() {
        let mk = |t: f64| record("standard", Outcome::Success, Some(t), vec![event(t, K::Goal)]);
        let e = task_effort(&[mk(10.0), mk(20.0)]).unwrap();
        assert_eq!((e.mean, e.n), (15.0, 2));
        let e = task_effort(&[mk(42.5)]).unwrap();
        assert_eq!((e.mean, e.std), (42.5, 0.0));
        let fail = record("standard", Outcome::FailureTimeout, None, vec![event(120.0, K::Timeout)]);
        assert_eq!(task_effort(&[fail]), None);
    }

    #[test]
    fn attention_examples() {
        let r = record(
            "standard",
            Outcome::Success,
            Some(9.0),
            vec![event(5.0, K::EnterAlignZone), event(8.0, K::GripperClose), event(9.0, K::Goal)],
        );
        assert_eq!(attention_time(&r).unwrap(), 3.0);
        let r = record("standard", Outcome::Success, Some(9.0), vec![event(9.0, K::Goal)]);
        assert_eq!(attention_time(&r).unwrap(), 0.0);
        let r = record(
            "standard",
            Outcome::Success,
            Some(12.0),
            vec![
                event(5.0, K::EnterAlignZone),
                event(8.0, K::ExitAlignZone),
                event(10.0, K::EnterAlignZone),
                event(11.0, K::GripperClose),
                event(12.0, K::Goal),
            ],
        );
        assert_eq!(attention_time(&r).unwrap(), 4.0);
        let r = record("standard", Outcome::Aborted, None, vec![event(5.0, K::EnterAlignZone), event(6.0, K::Abort)]);
        assert!(attention_time(&r).is_err());
    }

    #[test]
    fn grouping_rows() {
        let s = record("standard", Outcome::Success, Some(4.0), vec![event(4.0, K::Goal)]);
        let t = record("transparent", Outcome::FailureMiss, None, vec![event(4.0, K::Failure)]);
        let mut recs = vec![s.clone(); 50];
        recs.extend(vec![t; 50]);
        let rep = aggregate(&recs).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert_eq!(rep.row(ACROSS_CLASSES).unwrap().trials, 100);
        let single = aggregate(&[s]).unwrap();
        let mut a = single.rows[0].clone();
        a.class = ACROSS_CLASSES.into();
        assert_eq!(a, single.rows[1]);
    }
}
