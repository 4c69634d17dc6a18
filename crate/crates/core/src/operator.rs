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
//! Scripted operators standing in for a human at the master device.
//!
//! Both models act on what they see `tau` seconds late: each action is
//! computed from the current observation and released after the latency
//! queue. The Cartesian model can only coordinate `k_axes` axes at a time
//! and re-plans which axes to move at every decision epoch.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector6;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{MasterInput, Mode};
use crate::geometry::{pose_error, Pose};
use crate::grasp::GraspCandidate;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("unknown operator {0:?} (expected ideal-cartesian or shared-follower)")]
    UnknownOperator(String),
    #[error("invalid operator parameters: {0}")]
    InvalidParams(String),
    #[error("human operators cannot be simulated")]
    NotScripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorKind {
    #[serde(rename = "ideal-cartesian")]
    IdealCartesian,
    #[serde(rename = "shared-follower")]
    SharedFollower,
    /// A live operator at the console. Recorded but never scripted.
    #[serde(rename = "human")]
    Human,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::IdealCartesian => "ideal-cartesian",
            OperatorKind::SharedFollower => "shared-follower",
            OperatorKind::Human => "human",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorKind {
    type Err = OperatorError;

    fn from_str(s: &str) -> Result<Self, OperatorError> {
        match s {
            "ideal-cartesian" => Ok(OperatorKind::IdealCartesian),
            "shared-follower" => Ok(OperatorKind::SharedFollower),
            "human" => Ok(OperatorKind::Human),
            other => Err(OperatorError::UnknownOperator(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorParams {
    /// Reaction latency, s.
    pub tau: f64,
    pub sigma_u: f64,
    pub k_axes: usize,
    /// Decision epoch, s.
    pub epoch: f64,
    pub deadband_lin: f64,
    pub deadband_ang: f64,
    /// Tighter deadbands used when lining a peg up with its hole.
    pub fine_lin: f64,
    pub fine_ang: f64,
    /// How long the error must stay inside the deadband before the operator
    /// acts on the gripper, s.
    pub settle: f64,
    /// Full-deflection speeds the operator expects, m/s and rad/s.
    pub v_lin: f64,
    pub omega: f64,
    pub seed: u64,
}

impl Default for OperatorParams {
    fn default() -> Self {
        OperatorParams {
            tau: 0.25,
            sigma_u: 0.05,
            k_axes: 2,
            epoch: 0.5,
            deadband_lin: 0.004,
            deadband_ang: 0.05,
            fine_lin: 0.0015,
            fine_ang: 0.02,
            settle: 0.1,
            v_lin: 0.15,
            omega: 0.5,
            seed: 0,
        }
    }
}

impl OperatorParams {
    pub fn validate(&self) -> Result<(), OperatorError> {
        let bad = |m: &str| Err(OperatorError::InvalidParams(m.to_owned()));
        if !(self.tau >= 0.0) {
            return bad("tau must be non-negative");
        }
        if !(self.sigma_u >= 0.0) {
            return bad("sigma_u must be non-negative");
        }
        if !(1..=6).contains(&self.k_axes) {
            return bad("k_axes must be between 1 and 6");
        }
        if !(self.epoch > 0.0) {
            return bad("epoch must be positive");
        }
        if !(self.deadband_lin > 0.0 && self.deadband_ang > 0.0) {
            return bad("deadbands must be positive");
        }
        if !(self.v_lin > 0.0 && self.omega > 0.0) {
            return bad("speeds must be positive");
        }
        Ok(())
    }
}

/// Where the held object has to go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlaceGoal {
    /// End-effector pose that lifts the object to its goal height.
    Lift { pose: Pose },
    /// Raise to `transport_z`, pass `via`, move to `above`, release.
    Basket {
        transport_z: f64,
        via: Vec<Pose>,
        above: Pose,
    },
    /// Raise to `transport_z`, pass `via`, align at `above`, push down to
    /// `inserted`.
    Hole {
        transport_z: f64,
        via: Vec<Pose>,
        above: Pose,
        inserted: Pose,
    },
}

/// The operator's view of the current task, in end-effector poses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskView {
    pub object: usize,
    pub grasp: Pose,
    /// Grasp closing across the other side, for retries.
    pub alternate_grasp: Pose,
    pub place: PlaceGoal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: f64,
    pub ee: Pose,
    pub gripper_closed: bool,
    pub holding: bool,
    pub mode: Mode,
    pub s: f64,
    pub candidates: Vec<GraspCandidate>,
    /// Bumped whenever the suggestion list is recomputed.
    pub suggestion_version: u64,
    pub task: Option<TaskView>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GraspStage {
    Reach,
    Descend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlaceStage {
    Raise,
    Transit,
    Align,
    Final,
}

/// Internal state of the Cartesian model.
#[derive(Debug, Clone)]
pub struct CartesianState {
    axes: Vec<usize>,
    next_epoch: f64,
    grasp_stage: GraspStage,
    place_stage: PlaceStage,
    object: Option<usize>,
    attempts: u32,
    settled_since: Option<f64>,
    /// Gripper state we are waiting to observe after a toggle.
    awaiting: Option<bool>,
    raise_from: Option<Pose>,
    via: usize,
    staged_for: Option<usize>,
    was_holding: bool,
}

impl Default for CartesianState {
    fn default() -> Self {
        CartesianState {
            axes: Vec::new(),
            next_epoch: 0.0,
            grasp_stage: GraspStage::Reach,
            place_stage: PlaceStage::Raise,
            object: None,
            attempts: 0,
            settled_since: None,
            awaiting: None,
            raise_from: None,
            via: 0,
            staged_for: None,
            was_holding: false,
        }
    }
}

/// Offset of the pregrasp waypoint above the grasp, m.
const PREGRASP_HEIGHT: f64 = 0.15;
/// Waypoint tolerance for pass-through subgoals.
const WAYPOINT_LIN: f64 = 0.01;
const WAYPOINT_ANG: f64 = 0.1;
/// Proportional horizon: full deflection until this many seconds from the
/// subgoal.
const HORIZON: f64 = 0.5;

fn error6(target: &Pose, current: &Pose) -> Vector6<f64> {
    pose_error(target, current)
}

fn within(e: &Vector6<f64>, lin: f64, ang: f64) -> bool {
    (0..3).all(|i| e[i].abs() < lin) && (3..6).all(|i| e[i].abs() < ang)
}

impl CartesianState {
    fn toggle(&mut self, closed_after: bool) -> MasterInput {
        self.awaiting = Some(closed_after);
        self.settled_since = None;
        MasterInput::toggle()
    }

    /// Whether `e` has stayed inside the deadband for the settle time.
    fn settled(&mut self, e: &Vector6<f64>, lin: f64, ang: f64, t: f64, settle: f64) -> bool {
        if within(e, lin, ang) {
            let since = *self.settled_since.get_or_insert(t);
            t - since >= settle - 1e-9
        } else {
            self.settled_since = None;
            false
        }
    }

    /// Axis-budgeted proportional command toward `target`.
    fn drive(
        &mut self,
        target: &Pose,
        obs: &Observation,
        params: &OperatorParams,
        lin_band: f64,
        ang_band: f64,
        rng: &mut ChaCha8Rng,
    ) -> MasterInput {
        let e = error6(target, &obs.ee);
        let band = |i: usize| if i < 3 { lin_band } else { ang_band };
        let speed = |i: usize| if i < 3 { params.v_lin } else { params.omega };
        let active = |i: usize| e[i].abs() >= band(i);
        if obs.t + 1e-9 >= self.next_epoch || self.axes.is_empty() {
            let mut ranked: Vec<usize> = (0..6).filter(|i| active(*i)).collect();
            ranked.sort_by(|a, b| {
                (e[*b].abs() / speed(*b))
                    .total_cmp(&(e[*a].abs() / speed(*a)))
                    .then(a.cmp(b))
            });
            ranked.truncate(params.k_axes);
            ranked.sort_unstable();
            self.axes = ranked;
            self.next_epoch = obs.t + params.epoch;
        }
        let mut u = [0.0; 6];
        let noise = Normal::new(0.0, params.sigma_u.max(0.0)).expect("finite sigma");
        for &i in &self.axes {
            if !active(i) {
                continue;
            }
            let p = (e[i] / (speed(i) * HORIZON)).clamp(-1.0, 1.0);
            let n = if params.sigma_u > 0.0 {
                noise.sample(rng)
            } else {
                0.0
            };
            u[i] = p + n;
        }
        MasterInput::new(u)
    }
}

/// Direct Cartesian teleoperation toward the visual targets.
pub fn cartesian_policy(
    obs: &Observation,
    params: &OperatorParams,
    state: &mut CartesianState,
    rng: &mut ChaCha8Rng,
) -> MasterInput {
    if let Some(expected) = state.awaiting {
        if obs.gripper_closed != expected {
            return MasterInput::zero();
        }
        state.awaiting = None;
    }
    let Some(task) = &obs.task else {
        return MasterInput::zero();
    };
    if state.object != Some(task.object) {
        state.object = Some(task.object);
        state.attempts = 0;
    }
    if state.object != state.staged_for || obs.holding != state.was_holding {
        state.staged_for = state.object;
        state.was_holding = obs.holding;
        state.place_stage = PlaceStage::Raise;
        state.grasp_stage = GraspStage::Reach;
        state.raise_from = None;
        state.settled_since = None;
    }
    if obs.holding {
        return place(obs, task, params, state, rng);
    }
    if obs.gripper_closed {
        // Closed on nothing: open and try again.
        state.attempts += 1;
        state.grasp_stage = GraspStage::Reach;
        return state.toggle(false);
    }
    let grasp = if state.attempts % 2 == 1 {
        task.alternate_grasp
    } else {
        task.grasp
    };
    let e = error6(&grasp, &obs.ee);
    // After a miss the operator aligns more carefully.
    let (lin, ang) = if state.attempts > 0 {
        (params.fine_lin, params.fine_ang)
    } else {
        (params.deadband_lin, params.deadband_ang)
    };
    if within(&e, lin, ang) {
        if state.settled(&e, lin, ang, obs.t, params.settle) {
            return state.toggle(true);
        }
        return MasterInput::zero();
    }
    state.settled_since = None;
    if state.grasp_stage == GraspStage::Reach {
        let pre = grasp.translated(&nalgebra::Vector3::new(0.0, 0.0, PREGRASP_HEIGHT));
        let ep = error6(&pre, &obs.ee);
        if within(&ep, WAYPOINT_LIN, WAYPOINT_ANG) {
            state.grasp_stage = GraspStage::Descend;
        } else {
            return state.drive(&pre, obs, params, lin, ang, rng);
        }
    }
    state.drive(&grasp, obs, params, lin, ang, rng)
}

/// Raises to the transport height and passes the via points. `None` once
/// the final approach can start.
fn transit(
    obs: &Observation,
    transport_z: f64,
    via: &[Pose],
    params: &OperatorParams,
    state: &mut CartesianState,
    rng: &mut ChaCha8Rng,
) -> Option<MasterInput> {
    let (lin, ang) = (params.deadband_lin, params.deadband_ang);
    if state.place_stage == PlaceStage::Raise {
        let from = *state.raise_from.get_or_insert(obs.ee);
        let mut up = from;
        up.position.z = transport_z;
        if obs.ee.position.z > transport_z - WAYPOINT_LIN {
            state.place_stage = PlaceStage::Transit;
            state.via = 0;
        } else {
            return Some(state.drive(&up, obs, params, lin, ang, rng));
        }
    }
    if state.place_stage == PlaceStage::Transit {
        while let Some(w) = via.get(state.via) {
            if within(&error6(w, &obs.ee), WAYPOINT_LIN, WAYPOINT_ANG) {
                state.via += 1;
            } else {
                return Some(state.drive(w, obs, params, WAYPOINT_LIN / 2.0, WAYPOINT_ANG / 2.0, rng));
            }
        }
        state.place_stage = PlaceStage::Align;
    }
    None
}

fn place(
    obs: &Observation,
    task: &TaskView,
    params: &OperatorParams,
    state: &mut CartesianState,
    rng: &mut ChaCha8Rng,
) -> MasterInput {
    let (lin, ang) = (params.deadband_lin, params.deadband_ang);
    match &task.place {
        PlaceGoal::Lift { pose } => {
            if within(&error6(pose, &obs.ee), lin, ang) {
                MasterInput::zero()
            } else {
                state.drive(pose, obs, params, lin, ang, rng)
            }
        }
        PlaceGoal::Basket {
            transport_z,
            via,
            above,
        } => {
            if let Some(u) = transit(obs, *transport_z, via, params, state, rng) {
                return u;
            }
            let e = error6(above, &obs.ee);
            if within(&e, WAYPOINT_LIN, WAYPOINT_ANG) {
                if state.settled(&e, WAYPOINT_LIN, WAYPOINT_ANG, obs.t, params.settle) {
                    return state.toggle(false);
                }
                return MasterInput::zero();
            }
            state.drive(above, obs, params, WAYPOINT_LIN / 2.0, WAYPOINT_ANG, rng)
        }
        PlaceGoal::Hole {
            transport_z,
            via,
            above,
            inserted,
        } => {
            if let Some(u) = transit(obs, *transport_z, via, params, state, rng) {
                return u;
            }
            let (flin, fang) = (params.fine_lin, params.fine_ang);
            let mut e = error6(above, &obs.ee);
            if state.place_stage == PlaceStage::Final {
                // Only the height may differ from the aligned pose.
                e[2] = 0.0;
                if !within(&e, 2.0 * flin, 2.0 * fang) {
                    state.place_stage = PlaceStage::Align;
                    state.settled_since = None;
                } else {
                    return state.drive(inserted, obs, params, flin, fang, rng);
                }
            }
            if state.settled(&e, flin, fang, obs.t, params.settle) {
                state.place_stage = PlaceStage::Final;
                state.settled_since = None;
                return state.drive(inserted, obs, params, flin, fang, rng);
            }
            if within(&e, flin, fang) {
                return MasterInput::zero();
            }
            state.drive(above, obs, params, flin, fang, rng)
        }
    }
}

/// Internal state of the shared-control follower.
#[derive(Debug, Clone, Default)]
pub struct SharedState {
    version: Option<u64>,
    selected: Option<String>,
    selected_at: f64,
    tried: Vec<String>,
    toggled: bool,
    awaiting: Option<bool>,
}

/// Follows suggested trajectories: selects the best candidate, pushes along
/// it, closes at the end. Falls back to the Cartesian model for everything
/// the suggestions do not cover.
pub fn shared_policy(
    obs: &Observation,
    params: &OperatorParams,
    state: &mut SharedState,
    cartesian: &mut CartesianState,
    rng: &mut ChaCha8Rng,
) -> MasterInput {
    if let Some(expected) = state.awaiting {
        if obs.gripper_closed != expected {
            return MasterInput::zero();
        }
        state.awaiting = None;
    }
    if state.version != Some(obs.suggestion_version) {
        state.version = Some(obs.suggestion_version);
        state.selected = None;
        state.tried.clear();
        state.toggled = false;
    }
    if obs.holding || (obs.mode != Mode::SharedFollowing && obs.candidates.is_empty()) {
        return cartesian_policy(obs, params, cartesian, rng);
    }
    // Whatever the Cartesian model was waiting for happened while it was
    // not in charge.
    cartesian.awaiting = None;
    if obs.gripper_closed && !obs.holding {
        // Missed: open, then pick another suggestion.
        state.awaiting = Some(false);
        state.selected = None;
        state.toggled = false;
        return MasterInput::toggle();
    }
    if obs.mode != Mode::SharedFollowing || state.selected.is_none() {
        if state.selected.is_some() && obs.t - state.selected_at <= params.tau + 0.1 {
            // Selection not yet visible through the latency.
            return MasterInput::zero();
        }
        let pick = obs
            .candidates
            .iter()
            .find(|c| !state.tried.contains(&c.id))
            .or_else(|| obs.candidates.first());
        return match pick {
            Some(c) => {
                state.tried.push(c.id.clone());
                state.selected = Some(c.id.clone());
                state.selected_at = obs.t;
                MasterInput::select(&c.id)
            }
            None => cartesian_policy(obs, params, cartesian, rng),
        };
    }
    let Some(cand) = obs
        .candidates
        .iter()
        .find(|c| Some(&c.id) == state.selected.as_ref())
    else {
        return MasterInput::zero();
    };
    if obs.s < 1.0 {
        let t = cand.approach.normalize();
        let n = Normal::new(0.0, params.sigma_u.max(0.0)).expect("finite sigma");
        let mut u = [t.x, t.y, t.z, 0.0, 0.0, 0.0];
        if params.sigma_u > 0.0 {
            for v in u.iter_mut().take(3) {
                *v += n.sample(rng);
            }
        }
        return MasterInput::new(u);
    }
    if state.toggled {
        return MasterInput::zero();
    }
    // The arm may still be catching up with the end of the trajectory.
    let e = error6(&cand.grasp, &obs.ee);
    if within(&e, params.deadband_lin, params.deadband_ang) {
        state.toggled = true;
        state.awaiting = Some(true);
        return MasterInput::toggle();
    }
    MasterInput::zero()
}

/// A scripted operator with its latency queue.
#[derive(Debug, Clone)]
pub struct Operator {
    pub kind: OperatorKind,
    pub params: OperatorParams,
    rng: ChaCha8Rng,
    queue: VecDeque<MasterInput>,
    delay: usize,
    cartesian: CartesianState,
    shared: SharedState,
}

impl Operator {
    pub fn new(kind: OperatorKind, params: OperatorParams, dt: f64) -> Result<Self, OperatorError> {
        params.validate()?;
        if kind == OperatorKind::Human {
            return Err(OperatorError::NotScripted);
        }
        let delay = (params.tau / dt).round() as usize;
        Ok(Operator {
            kind,
            params,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            queue: VecDeque::from(vec![MasterInput::zero(); delay]),
            delay,
            cartesian: CartesianState::default(),
            shared: SharedState::default(),
        })
    }

    /// Latency in ticks.
    pub fn delay(&self) -> usize {
        self.delay
    }

    /// Decides on `obs` and returns the action decided `tau` earlier.
    pub fn act(&mut self, obs: &Observation) -> MasterInput {
        let decided = match self.kind {
            OperatorKind::IdealCartesian => {
                cartesian_policy(obs, &self.params, &mut self.cartesian, &mut self.rng)
            }
            OperatorKind::Human => MasterInput::zero(),
            OperatorKind::SharedFollower => shared_policy(
                obs,
                &self.params,
                &mut self.shared,
                &mut self.cartesian,
                &mut self.rng,
            ),
        };
        self.queue.push_back(decided);
        self.queue.pop_front().expect("queue holds at least the new action")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::top_down;
    use nalgebra::Vector3;

    fn obs_at(ee: Pose, grasp: Pose) -> Observation {
        Observation {
            t: 0.0,
            ee,
            gripper_closed: false,
            holding: false,
            mode: Mode::Baseline,
            s: 0.0,
            candidates: Vec::new(),
            suggestion_version: 0,
            task: Some(TaskView {
                object: 0,
                grasp,
                alternate_grasp: grasp,
                place: PlaceGoal::Lift { pose: grasp },
            }),
        }
    }

    fn quiet() -> OperatorParams {
        OperatorParams {
            sigma_u: 0.0,
            settle: 0.0,
            ..OperatorParams::default()
        }
    }

    #[test]
    fn converged_closes() {
        let g = Pose::new(Vector3::new(0.5, 0.0, 0.03), top_down(3.0));
        let mut st = CartesianState::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = cartesian_policy(&obs_at(g, g), &quiet(), &mut st, &mut rng);
        assert_eq!(u.u, [0.0; 6]);
        assert!(u.gripper_toggle);
    }

    #[test]
    fn single_axis_error_saturates() {
        let g = Pose::new(Vector3::new(0.5, 0.0, 0.03), top_down(3.0));
        let ee = g.translated(&Vector3::new(-0.3, 0.0, 0.0));
        let mut st = CartesianState {
            grasp_stage: GraspStage::Descend,
            object: Some(0),
            staged_for: Some(0),
            ..CartesianState::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = cartesian_policy(&obs_at(ee, g), &quiet(), &mut st, &mut rng);
        assert_eq!(u.u, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(!u.gripper_toggle);
    }

    #[test]
    fn axis_budget_is_respected() {
        let g = Pose::new(Vector3::new(0.5, 0.0, 0.03), top_down(3.0));
        let ee = Pose::new(Vector3::new(0.3, 0.2, 0.4), top_down(2.0));
        for k in 1..=6 {
            let params = OperatorParams {
                k_axes: k,
                ..OperatorParams::default()
            };
            let mut st = CartesianState::default();
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
            let u = cartesian_policy(&obs_at(ee, g), &params, &mut st, &mut rng);
            assert!(u.u.iter().filter(|v| **v != 0.0).count() <= k);
        }
    }

    #[test]
    fn latency_delays_actions() {
        let g = Pose::new(Vector3::new(0.5, 0.0, 0.03), top_down(3.0));
        let mut op = Operator::new(OperatorKind::IdealCartesian, quiet(), 0.01).unwrap();
        assert_eq!(op.delay(), 25);
        for _ in 0..25 {
            assert_eq!(op.act(&obs_at(g, g)), MasterInput::zero());
        }
        assert!(op.act(&obs_at(g, g)).gripper_toggle);
    }

    fn shared_obs(s: f64, mode: Mode) -> Observation {
        let g = Pose::new(Vector3::new(0.5, 0.0, 0.03), top_down(3.0));
        let mk = |id: &str, score: f64| GraspCandidate {
            id: id.into(),
            grasp: g,
            approach: -Vector3::z(),
            width: 0.05,
            score,
            axis: 0,
        };
        let mut o = obs_at(g, g);
        o.mode = mode;
        o.s = s;
        o.candidates = vec![mk("c0", 0.9), mk("c1", 0.7)];
        o
    }

    #[test]
    fn shared_selects_top_then_pushes_then_toggles_once() {
        let params = quiet();
        let mut st = SharedState::default();
        let mut cart = CartesianState::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = shared_policy(&shared_obs(0.0, Mode::SharedUnavailable), &params, &mut st, &mut cart, &mut rng);
        assert_eq!(u.select_candidate.as_deref(), Some("c0"));
        let u = shared_policy(&shared_obs(0.4, Mode::SharedFollowing), &params, &mut st, &mut cart, &mut rng);
        assert_eq!(u.u, [0.0, 0.0, -1.0, 0.0, 0.0, 0.0]);
        assert!(!u.gripper_toggle);
        let u = shared_policy(&shared_obs(1.0, Mode::SharedFollowing), &params, &mut st, &mut cart, &mut rng);
        assert!(u.gripper_toggle);
        let u = shared_policy(&shared_obs(1.0, Mode::SharedFollowing), &params, &mut st, &mut cart, &mut rng);
        assert!(!u.gripper_toggle);
    }

    #[test]
    fn parameter_validation() {
        let bad = OperatorParams {
            k_axes: 0,
            ..OperatorParams::default()
        };
        assert!(bad.validate().is_err());
        assert!("nobody".parse::<OperatorKind>().is_err());
        assert_eq!("shared-follower".parse::<OperatorKind>().unwrap(), OperatorKind::SharedFollower);
    }
}
