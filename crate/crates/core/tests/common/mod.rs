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
//! Record builders shared by the integration tests.
#![allow(dead_code)]

use telebench_core::control::Gains;
use telebench_core::geometry::Pose;
use telebench_core::operator::OperatorParams;
use telebench_core::record::{Event, EventKind, Outcome, TrialParams, TrialRecord, TRIAL_SCHEMA};
use telebench_core::world::Benchmark;

pub fn event(t: f64, kind: EventKind) -> Event {
    Event {
        tick: (t * 100.0).round() as u64,
        t,
        kind,
        object: None,
        payload: serde_json::Value::Null,
    }
}

pub fn record(class: &str, outcome: Outcome, completion: Option<f64>, events: Vec<Event>) -> TrialRecord {
    TrialRecord {
        schema: TRIAL_SCHEMA.into(),
        trial: 0,
        benchmark: Benchmark::I,
        task: 1,
        class: class.into(),
        object: Some("cube_50".into()),
        object_index: Some(0),
        pose: Some(Pose::from_position(0.5, 0.0, 0.025)),
        pose_index: Some(0),
        scene_index: None,
        rep: 0,
        controller: "shared".into(),
        operator: "shared-follower".into(),
        master_seed: 1,
        scene_seed: 2,
        operator_seed: 3,
        camera_seed: 4,
        dt: 0.01,
        t_max: 120.0,
        params: TrialParams {
            gains: Gains::default(),
            operator: OperatorParams::default(),
            align_radius: 0.15,
        },
        objects_total: 1,
        objects_done: usize::from(outcome == Outcome::Success),
        events,
        outcome,
        completion_time: completion,
    }
}

/// A well-formed record whose timeline has the given alignment intervals,
/// each closed by an exit, followed by the terminal event.
pub fn with_intervals(class: &str, success: bool, end: f64, intervals: &[(f64, f64)]) -> TrialRecord {
    let mut events = vec![event(0.0, EventKind::TrialStart)];
    for (a, b) in intervals {
        events.push(event(*a, EventKind::EnterAlignZone));
        events.push(event(*b, EventKind::ExitAlignZone));
    }
    if success {
        events.push(event(end, EventKind::Goal));
        record(class, Outcome::Success, Some(end), events)
    } else {
        events.push(event(end, EventKind::Timeout));
        record(class, Outcome::FailureTimeout, None, events)
    }
}
