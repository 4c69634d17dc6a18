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
//! Side-by-side comparison of two record sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use telebench_core::metrics::{aggregate, MetricsError, MetricsRow, ACROSS_CLASSES};
use telebench_core::record::TrialRecord;
use telebench_core::world::Benchmark;

pub const COMPARE_HEADER: &str = "benchmark,task,class,trials_a,trials_b,\
success_rate_a,success_rate_b,success_rate_delta,\
effort_mean_a_s,effort_mean_b_s,effort_mean_delta_s,\
attention_mean_a_s,attention_mean_b_s,attention_mean_delta_s";

const BAR_WIDTH: usize = 40;

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn delta(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(b? - a?)
}

/// Per-class metric deltas, b minus a. Classes present on one side only
/// leave the other side's columns empty.
pub fn deltas_csv(a: &[TrialRecord], b: &[TrialRecord]) -> Result<String, MetricsError> {
    type Key = (Benchmark, u8, String);
    let index = |records: &[TrialRecord]| -> Result<BTreeMap<Key, MetricsRow>, MetricsError> {
        Ok(aggregate(records)?
            .rows
            .into_iter()
            .map(|r| ((r.benchmark, r.task, r.class.clone()), r))
            .collect())
    };
    let (ra, rb) = (index(a)?, index(b)?);
    // Pooled row last within each task, as in the report.
    let keys: BTreeSet<(Benchmark, u8, bool, &Key)> = ra
        .keys()
        .chain(rb.keys())
        .map(|k| (k.0, k.1, k.2 == ACROSS_CLASSES, k))
        .collect();
    let mut out = String::from(COMPARE_HEADER);
    out.push('\n');
    for (_, _, _, key) in keys {
        let (x, y) = (ra.get(key), rb.get(key));
        let trials = |r: Option<&MetricsRow>| r.map(|r| r.trials.to_string()).unwrap_or_default();
        let success = |r: Option<&MetricsRow>| r.map(|r| r.success_rate);
        let effort = |r: Option<&MetricsRow>| r.and_then(|r| r.effort).map(|e| e.mean);
        let attention = |r: Option<&MetricsRow>| r.map(|r| r.attention_mean);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            key.0,
            key.1,
            key.2,
            trials(x),
            trials(y),
            num(success(x)),
            num(success(y)),
            num(delta(success(x), success(y))),
            num(effort(x)),
            num(effort(y)),
            num(delta(effort(x), effort(y))),
            num(attention(x)),
            num(attention(y)),
            num(delta(attention(x), attention(y))),
        );
    }
    Ok(out)
}

/// Mean completion time of successful trials per \`class/object\`, or per
/// class for multi-object tasks.
pub fn mean_completion(records: &[TrialRecord]) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in records {
        if let Some(t) = r.completion_time {
            let key = match &r.object {
                Some(o) => format!("{}/{o}", r.class),
                None => r.class.clone(),
            };
            let e = sums.entry(key).or_default();
            e.0 += t;
            e.1 += 1;
        }
    }
    sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

/// Name for one side of the comparison: its controller when uniform.
pub fn label(records: &[TrialRecord], fallback: &str) -> String {
    let names: BTreeSet<&str> = records.iter().map(|r| r.controller.as_str()).collect();
    match names.into_iter().collect::<Vec<_>>().as_slice() {
        [one] => (*one).to_owned(),
        _ => fallback.to_owned(),
    }
}

/// Plain-text bars of mean completion time per object.
pub fn bar_chart(a: &[TrialRecord], b: &[TrialRecord]) -> String {
    let (la, lb) = (label(a, "a"), label(b, "b"));
    let (la, lb) = if la == lb { ("a".to_owned(), "b".to_owned()) } else { (la, lb) };
    let (ma, mb) = (mean_completion(a), mean_completion(b));
    let objects: BTreeSet<&String> = ma.keys().chain(mb.keys()).collect();
    let longest = ma.values().chain(mb.values()).copied().fold(0.0, f64::max);
    let name_w = objects.iter().map(|o| o.len()).max().unwrap_or(0);
    let label_w = la.len().max(lb.len());
    let mut out = String::from("mean completion time per object, s (successful trials)\n");
    if objects.is_empty() {
        out.push_str("no successful trials\n");
        return out;
    }
    for obj in objects {
        for (i, (name, means)) in [(&la, &ma), (&lb, &mb)].into_iter().enumerate() {
            let first = if i == 0 { obj.as_str() } else { "" };
            let (bar, value) = match means.get(obj) {
                Some(&t) => {
                    let n = if longest > 0.0 {
                        (t / longest * BAR_WIDTH as f64).round() as usize
                    } else {
                        0
                    };
                    ("#".repeat(n), format!("{t:.3}"))
                }
                None => (String::new(), "-".to_owned()),
            };
            let _ = writeln!(
                out,
                "{first:<name_w$}  {name:<label_w$} |{bar:<BAR_WIDTH$} {value}"
            );
        }
    }
    out
}
