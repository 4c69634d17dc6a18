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
//! One operator's live session.
//!
//! The session owns the running trial and is advanced by its caller at the
//! simulation rate. It performs no I/O: inbound envelopes go to
//! [`Session::receive`], and every call returns the envelopes to send back.

use nalgebra::Vector3;
use telebench_core::bench::{plan, BenchmarkSpec, TrialRunner, DT};
use telebench_core::control::{ControllerKind, Gains, MasterInput};
use telebench_core::operator::OperatorKind;
use telebench_core::record::{EventKind, TrialRecord};

use crate::protocol::{
    decimate, Envelope, GripperMsg, Message, ObjectMsg, StartSpec, TrialAction,
};

/// Inputs older than this are treated as zero, s.
pub const STALE_AFTER: f64 = 0.2;
pub const SIM_HZ: u64 = 100;
pub const STATE_HZ: u64 = 30;
/// Sim tick period, s.
pub const TICK: f64 = DT;

/// Settings shared by every trial a session starts.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub controller: ControllerKind,
    pub gains: Gains,
    pub t_max: Option<f64>,
    pub align_radius: Option<f64>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            controller: ControllerKind::Shared,
            gains: Gains::default(),
            t_max: None,
            align_radius: None,
        }
    }
}

#[derive(Debug, Clone)]
struct Latest {
    u: [f64; 6],
    received: f64,
}

/// True on the sim ticks where the 30 Hz state stream is due.
pub fn state_due(tick: u64) -> bool {
    tick == 0 || tick * STATE_HZ / SIM_HZ != (tick - 1) * STATE_HZ / SIM_HZ
}

#[derive(Debug)]
pub struct Session {
    id: u64,
    seq: u64,
    connected: bool,
    config: SessionConfig,
    latest: Option<Latest>,
    toggle: bool,
    applied: [f64; 6],
    feedback: Vector3<f64>,
    runner: Option<TrialRunner>,
    sent_events: usize,
    sent_version: u64,
    records: Vec<TrialRecord>,
}

impl Session {
    pub fn new(id: u64, config: SessionConfig) -> Self {
        Session {
            id,
            seq: 0,
            connected: false,
            config,
            latest: None,
            toggle: false,
            applied: [0.0; 6],
            feedback: Vector3::zeros(),
            runner: None,
            sent_events: 0,
            sent_version: 0,
            records: Vec::new(),
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn controller(&self) -> ControllerKind {
        self.config.controller
    }

    /// The running trial, if any.
    pub fn trial(&self) -> Option<&TrialRunner> {
        self.runner.as_ref()
    }

    /// Records of trials finished since the last call.
    pub fn take_records(&mut self) -> Vec<TrialRecord> {
        std::mem::take(&mut self.records)
    }

    fn out(&mut self, msg: Message) -> Envelope {
        self.seq += 1;
        Envelope { seq: self.seq, msg }
    }

    /// An error reply in the session's sequence, for frames that did not decode.
    pub fn reject(&mut self, why: String) -> Vec<Envelope> {
        self.error(why)
    }

    fn error(&mut self, message: impl Into<String>) -> Vec<Envelope> {
        vec![self.out(Message::Error { message: message.into() })]
    }

    /// A client attached. A paused trial resumes, and the client receives a
    /// full snapshot.
    pub fn connect(&mut self) -> Vec<Envelope> {
        if self.connected {
            return Vec::new();
        }
        self.connected = true;
        self.latest = None;
        self.toggle = false;
        let Some(runner) = self.runner.as_mut() else {
            return Vec::new();
        };
        runner.log(EventKind::Resume, None, serde_json::Value::Null);
        self.sent_version = 0;
        let mut out = self.flush();
        out.push(self.state());
        out
    }

    /// The client went away. The trial clock stops until the next connect.
    pub fn disconnect(&mut self) {
        if !self.connected {
            return;
        }
        self.connected = false;
        self.latest = None;
        self.toggle = false;
        if let Some(runner) = self.runner.as_mut() {
            runner.log(EventKind::Pause, None, serde_json::Value::Null);
        }
    }

    /// Handles one decoded client envelope received at wall time `now`, s.
    pub fn receive(&mut self, env: Envelope, now: f64) -> Vec<Envelope> {
        if !env.msg.from_client() {
            return self.error(format!("{} is a server message", env.msg.tag()));
        }
        match env.msg {
            Message::Input { u, gripper_toggle } => {
                self.latest = Some(Latest { u, received: now });
                self.toggle |= gripper_toggle;
                Vec::new()
            }
            Message::Select { id } => {
                let selected = self.runner.as_mut().is_some_and(|r| r.select(&id));
                if !selected {
                    return self.error(format!("candidate {id:?} cannot be selected"));
                }
                let mut out = self.flush();
                out.push(self.state());
                out
            }
            Message::Mode { mode } => {
                self.config.controller = mode.into();
                Vec::new()
            }
            Message::TrialCtl { action: TrialAction::Abort, .. } => {
                let Some(runner) = self.runner.as_mut() else {
                    return self.error("no trial is running");
                };
                runner.abort();
                let out = self.flush();
                self.finish();
                out
            }
            Message::TrialCtl { action: TrialAction::Start, spec } => {
                self.start(&spec.unwrap_or_default())
            }
            _ => unreachable!("server messages rejected above"),
        }
    }

    fn start(&mut self, spec: &StartSpec) -> Vec<Envelope> {
        if self.runner.is_some() {
            return self.error("a trial is already running");
        }
        let bench = BenchmarkSpec {
            benchmark: spec.benchmark,
            task: spec.task,
            controller: spec.controller.unwrap_or(self.config.controller),
            operator: OperatorKind::Human,
            seed: spec.seed,
            classes: spec.class.map(|c| vec![c]),
            objects: spec.object.clone().map(|o| vec![o]),
            t_max: self.config.t_max,
            gains: self.config.gains,
            align_radius: self.config.align_radius.unwrap_or(BenchmarkSpec::default().align_radius),
            ..Default::default()
        };
        let setup = match plan(&bench) {
            Ok(p) => match p.trials.into_iter().nth(spec.trial) {
                Some(s) => s,
                None => return self.error(format!("the plan has no trial {}", spec.trial)),
            },
            Err(e) => return self.error(e.to_string()),
        };
        match TrialRunner::new(setup) {
            Ok(r) => self.runner = Some(r),
            Err(e) => return self.error(e.to_string()),
        }
        self.sent_events = 0;
        self.sent_version = 0;
        self.latest = None;
        self.toggle = false;
        self.applied = [0.0; 6];
        self.feedback = Vector3::zeros();
        let mut out = self.flush();
        out.push(self.state());
        out
    }

    /// Master input in force at `now`.
    fn input(&mut self, now: f64) -> MasterInput {
        let u = match &self.latest {
            Some(l) if now - l.received <= STALE_AFTER => l.u,
            _ => [0.0; 6],
        };
        let mut input = MasterInput::new(u);
        input.gripper_toggle = std::mem::take(&mut self.toggle);
        input
    }

    /// Advances the trial by one sim tick at wall time `now`, s.
    pub fn tick(&mut self, now: f64) -> Vec<Envelope> {
        if !self.connected || self.runner.is_none() {
            return Vec::new();
        }
        let input = self.input(now);
        let runner = self.runner.as_mut().expect("checked above");
        let Some(info) = runner.step(&input) else {
            return Vec::new();
        };
        self.applied = input.u;
        self.feedback = info.output.feedback.force;
        let mut out = self.flush();
        if state_due(info.tick) {
            out.push(self.state());
        }
        if self.runner.as_ref().is_some_and(TrialRunner::is_finished) {
            if !state_due(info.tick) {
                out.push(self.state());
            }
            self.finish();
        }
        out
    }

    fn finish(&mut self) {
        if let Some(runner) = self.runner.take() {
            self.records.push(runner.into_record());
        }
    }

    /// Trial events and suggestions not yet sent.
    fn flush(&mut self) -> Vec<Envelope> {
        let Some(runner) = self.runner.as_ref() else {
            return Vec::new();
        };
        let mut msgs: Vec<Message> = runner.events()[self.sent_events..]
            .iter()
            .map(|e| Message::TrialEvent { kind: e.kind, t: e.t, object: e.object })
            .collect();
        self.sent_events = runner.events().len();
        let version = runner.suggestion_version();
        if version != self.sent_version {
            self.sent_version = version;
            msgs.push(Message::Suggestions {
                version,
                candidates: runner.candidates().iter().map(Into::into).collect(),
            });
            if let Some(cloud) = runner.cloud() {
                msgs.push(Message::Cloud { version, points: decimate(&cloud.points) });
            }
        }
        msgs.into_iter().map(|m| self.out(m)).collect()
    }

    fn state(&mut self) -> Envelope {
        let runner = self.runner.as_ref().expect("state needs a trial");
        let world = runner.world();
        let ctrl = runner.controller();
        let objects = world
            .objects
            .iter()
            .enumerate()
            .map(|(i, o)| ObjectMsg {
                id: i,
                name: runner.env().object(i).name.clone(),
                pose: (&o.pose).into(),
                status: o.status,
            })
            .collect();
        let msg = Message::State {
            t: world.time(),
            tick: world.tick,
            joints: world.joints.0,
            ee: (&world.ee).into(),
            objects,
            gripper: GripperMsg { closed: world.gripper.closed, opening: world.gripper.opening },
            mode: ctrl.mode,
            s: ctrl.s,
            feedback: self.feedback.into(),
            input: self.applied,
            selected: ctrl.trajectory.as_ref().map(|t| t.candidate.clone()),
        };
        self.out(msg)
    }
}
