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
//! The `teleop.v1` wire format.
//!
//! A frame is a 4-byte big-endian payload length followed by a UTF-8 JSON
//! object carrying `v`, `seq` and a `type` tag. See `docs/teleop-v1.md`.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use telebench_core::control::{ControllerKind, Mode};
use telebench_core::geometry::Pose;
use telebench_core::grasp::{build_trajectory, GraspCandidate, PREGRASP_OFFSET};
use telebench_core::record::EventKind;
use telebench_core::world::{Benchmark, MaterialId, ObjectStatus};
use thiserror::Error;

pub const SCHEMA: &str = "teleop.v1";
pub const MAX_CLOUD_POINTS: usize = 2000;
/// Largest accepted payload, bytes.
pub const MAX_PAYLOAD: usize = 4 << 20;
const HEADER: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    MalformedMessage(String),
}

fn malformed<T>(why: impl Into<String>) -> Result<T, ProtocolError> {
    Err(ProtocolError::MalformedMessage(why.into()))
}

/// Position and unit quaternion as plain arrays, `q = [w, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseMsg {
    pub p: [f64; 3],
    pub q: [f64; 4],
}

impl From<&Pose> for PoseMsg {
    fn from(pose: &Pose) -> Self {
        let q = pose.orientation.quaternion();
        PoseMsg {
            p: pose.position.into(),
            q: [q.w, q.i, q.j, q.k],
        }
    }
}

impl PoseMsg {
    pub fn to_pose(&self) -> Pose {
        let [w, x, y, z] = self.q;
        Pose::new(
            Vector3::from(self.p),
            UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectMsg {
    pub id: usize,
    pub name: String,
    pub pose: PoseMsg,
    pub status: ObjectStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripperMsg {
    pub closed: bool,
    /// m
    pub opening: f64,
}

/// One suggested grasp with its approach polyline, pregrasp first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateMsg {
    pub id: String,
    pub score: f64,
    pub width: f64,
    pub waypoints: Vec<PoseMsg>,
}

impl From<&GraspCandidate> for CandidateMsg {
    fn from(c: &GraspCandidate) -> Self {
        let waypoints = match build_trajectory(c, PREGRASP_OFFSET) {
            Ok(t) => vec![(&t.pregrasp).into(), (&t.grasp).into()],
            Err(_) => vec![(&c.grasp).into()],
        };
        CandidateMsg {
            id: c.id.clone(),
            score: c.score,
            width: c.width,
            waypoints,
        }
    }
}

/// Requested controller for the next trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeRequest {
    Baseline,
    Shared,
}

impl From<ModeRequest> for ControllerKind {
    fn from(m: ModeRequest) -> Self {
        match m {
            ModeRequest::Baseline => ControllerKind::Baseline,
            ModeRequest::Shared => ControllerKind::Shared,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialAction {
    Start,
    Abort,
}

/// Which protocol trial a live session runs: trial `trial` of the plan the
/// scripted benchmark would build from the same fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartSpec {
    pub benchmark: Benchmark,
    pub task: u8,
    pub seed: u64,
    pub trial: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<MaterialId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
}

impl Default for StartSpec {
    fn default() -> Self {
        StartSpec {
            benchmark: Benchmark::I,
            task: 1,
            seed: 0,
            trial: 0,
            controller: None,
            class: None,
            object: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Message {
    // server to client
    State {
        t: f64,
        tick: u64,
        joints: [f64; 7],
        ee: PoseMsg,
        objects: Vec<ObjectMsg>,
        gripper: GripperMsg,
        mode: Mode,
        s: f64,
        /// Haptic force, N.
        feedback: [f64; 3],
        /// Master input applied at the last tick, after the staleness rule.
        input: [f64; 6],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        selected: Option<String>,
    },
    Suggestions {
        version: u64,
        candidates: Vec<CandidateMsg>,
    },
    TrialEvent {
        kind: EventKind,
        t: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        object: Option<usize>,
    },
    Cloud {
        version: u64,
        points: Vec<[f64; 3]>,
    },
    Error {
        message: String,
    },
    // client to server
    Input {
        u: [f64; 6],
        #[serde(default)]
        gripper_toggle: bool,
    },
    Select {
        id: String,
    },
    Mode {
        mode: ModeRequest,
    },
    TrialCtl {
        action: TrialAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spec: Option<StartSpec>,
    },
}

impl Message {
    pub fn tag(&self) -> &'static str {
        match self {
            Message::State { .. } => "state",
            Message::Suggestions { .. } => "suggestions",
            Message::TrialEvent { .. } => "trial_event",
            Message::Cloud { .. } => "cloud",
            Message::Error { .. } => "error",
            Message::Input { .. } => "input",
            Message::Select { .. } => "select",
            Message::Mode { .. } => "mode",
            Message::TrialCtl { .. } => "trial_ctl",
        }
    }

    pub fn from_client(&self) -> bool {
        matches!(
            self,
            Message::Input { .. } | Message::Select { .. } | Message::Mode { .. } | Message::TrialCtl { .. }
        )
    }

    /// Applies the decode-side normalization: input axes clamped to [-1, 1].
    fn normalize(&mut self) {
        if let Message::Input { u, .. } = self {
            for x in u.iter_mut() {
                *x = x.clamp(-1.0, 1.0);
            }
        }
    }

    fn check(&self) -> Result<(), ProtocolError> {
        if let Message::Cloud { points, .. } = self {
            if points.len() > MAX_CLOUD_POINTS {
                return malformed(format!("cloud carries {} points", points.len()));
            }
        }
        if let Message::TrialCtl { action, spec } = self {
            match (action, spec) {
                (TrialAction::Start, None) => return malformed("trial_ctl start needs a spec"),
                (TrialAction::Abort, Some(_)) => return malformed("trial_ctl abort takes no spec"),
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub seq: u64,
    pub msg: Message,
}

fn all_finite(v: &Value) -> bool {
    match v {
        Value::Number(n) => n.as_f64().is_some_and(f64::is_finite),
        Value::Array(a) => a.iter().all(all_finite),
        Value::Object(o) => o.values().all(all_finite),
        _ => true,
    }
}

/// Serializes one frame.
pub fn encode(env: &Envelope) -> Result<Vec<u8>, ProtocolError> {
    env.msg.check()?;
    let body = serde_json::to_value(&env.msg)
        .map_err(|e| ProtocolError::MalformedMessage(e.to_string()))?;
    // serde_json writes NaN and infinities as null, which would not decode.
    if has_non_finite(&env.msg) {
        return malformed("non-finite number");
    }
    let Value::Object(fields) = body else {
        return malformed("message is not an object");
    };
    let mut obj = Map::new();
    obj.insert("v".into(), SCHEMA.into());
    obj.insert("seq".into(), env.seq.into());
    obj.extend(fields);
    let payload = serde_json::to_vec(&Value::Object(obj)).expect("json values serialize");
    if payload.len() > MAX_PAYLOAD {
        return malformed(format!("payload of {} bytes", payload.len()));
    }
    let mut out = Vec::with_capacity(HEADER + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

fn has_non_finite(msg: &Message) -> bool {
    let bad = |xs: &[f64]| xs.iter().any(|x| !x.is_finite());
    let pose = |p: &PoseMsg| bad(&p.p) || bad(&p.q);
    match msg {
        Message::State { t, joints, ee, objects, gripper, s, feedback, input, .. } => {
            bad(&[*t, *s, gripper.opening])
                || bad(joints)
                || bad(input)
                || pose(ee)
                || bad(feedback)
                || objects.iter().any(|o| pose(&o.pose))
        }
        Message::Suggestions { candidates, .. } => candidates
            .iter()
            .any(|c| bad(&[c.score, c.width]) || c.waypoints.iter().any(pose)),
        Message::TrialEvent { t, .. } => bad(&[*t]),
        Message::Cloud { points, .. } => points.iter().any(|p| bad(p)),
        Message::Input { u, .. } => bad(u),
        _ => false,
    }
}

/// Parses one frame. Never panics.
pub fn decode(bytes: &[u8]) -> Result<Envelope, ProtocolError> {
    let Some((head, payload)) = bytes.split_first_chunk::<HEADER>() else {
        return malformed("frame shorter than its header");
    };
    let len = u32::from_be_bytes(*head) as usize;
    if len != payload.len() {
        return malformed(format!("length prefix {len} but {} payload bytes", payload.len()));
    }
    if len > MAX_PAYLOAD {
        return malformed(format!("payload of {len} bytes"));
    }
    let value: Value = serde_json::from_slice(payload)
        .map_err(|e| ProtocolError::MalformedMessage(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return malformed("payload is not an object");
    };
    match obj.remove("v") {
        Some(Value::String(v)) if v == SCHEMA => {}
        Some(v) => return malformed(format!("unsupported version {v}")),
        None => return malformed("missing v"),
    }
    let Some(seq) = obj.remove("seq").and_then(|s| s.as_u64()) else {
        return malformed("missing or invalid seq");
    };
    let body = Value::Object(obj);
    if !all_finite(&body) {
        return malformed("non-finite number");
    }
    let mut msg: Message =
        serde_json::from_value(body).map_err(|e| ProtocolError::MalformedMessage(e.to_string()))?;
    msg.check()?;
    msg.normalize();
    Ok(Envelope { seq, msg })
}

/// Keeps at most `MAX_CLOUD_POINTS` points by even striding.
pub fn decimate(points: &[Vector3<f64>]) -> Vec<[f64; 3]> {
    let n = points.len();
    let keep = n.min(MAX_CLOUD_POINTS);
    (0..keep).map(|k| points[k * n / keep].into()).collect()
}
