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
//! Baseline Cartesian teleoperation and the trajectory-constrained shared
//! controller.

use std::fmt;
use std::str::FromStr;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{distance_to_segment, Pose};
use crate::grasp::{build_trajectory, GraspCandidate, Trajectory, PREGRASP_OFFSET};
use crate::world::GripperCommand;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("shared step without an active trajectory")]
    NoActiveTrajectory,
    #[error("unknown candidate {0:?}")]
    UnknownCandidate(String),
    #[error("unknown controller {0:?} (expected baseline or shared)")]
    UnknownController(String),
}

/// Master device input. Axis values are clamped to [-1, 1] on construction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MasterInput {
    pub u: [f64; 6],
    pub gripper_toggle: bool,
    pub select_candidate: Option<String>,
}

impl MasterInput {
    pub fn new(u: [f64; 6]) -> Self {
        MasterInput {
            u: clamp_axes(u),
            ..Default::default()
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn toggle() -> Self {
        MasterInput {
            gripper_toggle: true,
            ..Default::default()
        }
    }

    pub fn select(id: &str) -> Self {
        MasterInput {
            select_candidate: Some(id.to_owned()),
            ..Default::default()
        }
    }

    pub fn linear(&self) -> Vector3<f64> {
        Vector3::new(self.u[0], self.u[1], self.u[2])
    }

    pub fn angular(&self) -> Vector3<f64> {
        Vector3::new(self.u[3], self.u[4], self.u[5])
    }

    pub fn clamped(mut self) -> Self {
        self.u = clamp_axes(self.u);
        self
    }
}

/// Clamps to [-1, 1]; NaN becomes 0.
pub fn clamp_axes(u: [f64; 6]) -> [f64; 6] {
    u.map(|v| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HapticFeedback {
    pub force: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Baseline,
    SharedFollowing,
    SharedUnavailable,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::SharedFollowing => "shared_following",
            Mode::SharedUnavailable => "shared_unavailable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Baseline,
    Shared,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Baseline => "baseline",
            ControllerKind::Shared => "shared",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerKind {
    type Err = ControlError;

    fn from_str(s: &str) -> Result<Self, ControlError> {
        match s {
            "baseline" => Ok(ControllerKind::Baseline),
            "shared" => Ok(ControllerKind::Shared),
            other => Err(ControlError::UnknownController(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gains {
    /// m/s at full deflection
    pub v_lin: f64,
    /// rad/s at full deflection
    pub omega: f64,
    /// trajectory progress per second at full deflection
    pub s_rate: f64,
    /// N per unit off-trajectory input
    pub k_h: f64,
    pub f_max: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Gains {
            v_lin: 0.15,
            omega: 0.5,
            s_rate: 0.5,
            k_h: 3.0,
            f_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub kind: ControllerKind,
    pub mode: Mode,
    pub trajectory: Option<Trajectory>,
    pub s: f64,
    pub gains: Gains,
    /// Gripper state the operator believes in; flipped by each toggle.
    pub gripper_closed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharedStep {
    pub s: f64,
    pub pose: Pose,
    pub feedback: HapticFeedback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub desired: Pose,
    pub feedback: HapticFeedback,
    pub gripper: GripperCommand,
}

impl ControllerState {
    pub fn new(kind: ControllerKind, gains: Gains) -> Self {
        ControllerState {
            kind,
            mode: match kind {
                ControllerKind::Baseline => Mode::Baseline,
                ControllerKind::Shared => Mode::SharedUnavailable,
            },
            trajectory: None,
            s: 0.0,
            gains,
            gripper_closed: false,
        }
    }

    /// Drops the active trajectory after a grasp; the rest of the task is
    /// driven directly.
    pub fn on_attach(&mut self) {
        self.trajectory = None;
        self.s = 0.0;
        self.mode = Mode::Baseline;
    }

    /// New suggestion set for a shared controller. Any active trajectory is
    /// dropped; an empty set means no assistance until the next one.
    pub fn on_suggestions(&mut self, candidates: &[GraspCandidate]) {
        if self.kind != ControllerKind::Shared {
            return;
        }
        self.trajectory = None;
        self.s = 0.0;
        self.mode = if candidates.is_empty() {
            Mode::SharedUnavailable
        } else {
            Mode::Baseline
        };
    }

    /// Full per-tick control law: toggles, then the mode's motion law.
    pub fn step(&mut self, input: &MasterInput, ee: &Pose, dt: f64) -> ControlOutput {
        let gripper = if input.gripper_toggle {
            self.gripper_closed = !self.gripper_closed;
            if self.gripper_closed {
                GripperCommand::Close
            } else {
                GripperCommand::Open
            }
        } else {
            GripperCommand::Hold
        };
        if self.mode == Mode::SharedFollowing {
            if let Ok(step) = shared_step(self, input, dt) {
                self.s = step.s;
                return ControlOutput {
                    desired: step.pose,
                    feedback: step.feedback,
                    gripper,
                };
            }
        }
        ControlOutput {
            desired: baseline_step(self, input, ee, dt),
            feedback: HapticFeedback::default(),
            gripper,
        }
    }
}

/// Direct mapping: world-frame translation at `v_lin` and rotation at `omega`
/// per unit input.
pub fn baseline_step(state: &ControllerState, input: &MasterInput, ee: &Pose, dt: f64) -> Pose {
    let g = &state.gains;
    let u = input.clone().clamped();
    let lin = u.linear();
    let ang = u.angular();
    if lin == Vector3::zeros() && ang == Vector3::zeros() {
        return *ee;
    }
    let position = ee.position + lin * (g.v_lin * dt);
    let orientation = if ang == Vector3::zeros() {
        ee.orientation
    } else {
        UnitQuaternion::from_scaled_axis(ang * (g.omega * dt)) * ee.orientation
    };
    Pose::new(position, orientation)
}

/// Constrained motion: only the input component along the trajectory tangent
/// moves the arm; the rest is resisted by the feedback force.
pub fn shared_step(state: &ControllerState, input: &MasterInput, dt: f64) -> Result<SharedStep, ControlError> {
    let traj = match (&state.trajectory, state.mode) {
        (Some(t), Mode::SharedFollowing) => t,
        _ => return Err(ControlError::NoActiveTrajectory),
    };
    let g = &state.gains;
    let u = input.clone().clamped().linear();
    let u_par = u.dot(&traj.tangent);
    let u_perp = u - traj.tangent * u_par;
    let s = (state.s + u_par * g.s_rate * dt).clamp(0.0, 1.0);
    let pose = traj.pose_at(s).expect("s is clamped to [0, 1]");
    let mut force = -u_perp * g.k_h;
    let magnitude = force.norm();
    if magnitude > g.f_max {
        force *= g.f_max / magnitude;
    }
    Ok(SharedStep {
        s,
        pose,
        feedback: HapticFeedback { force },
    })
}

/// Activates the trajectory of candidate `id`. An empty candidate list puts
/// the controller in `shared_unavailable`.
pub fn select_trajectory(
    state: &ControllerState,
    candidates: &[GraspCandidate],
    id: &str,
) -> Result<ControllerState, ControlError> {
    let mut next = state.clone();
    if candidates.is_empty() {
        next.mode = Mode::SharedUnavailable;
        next.trajectory = None;
        next.s = 0.0;
        return Ok(next);
    }
    let c = candidates
        .iter()
        .find(|c| c.id == id)
        .ok_or_else(|| ControlError::UnknownCandidate(id.to_owned()))?;
    next.trajectory = Some(build_trajectory(c, PREGRASP_OFFSET).expect("positive offset"));
    next.mode = Mode::SharedFollowing;
    next.s = 0.0;
    Ok(next)
}

/// Distance from a commanded pose to the active trajectory segment.
pub fn trajectory_deviation(traj: &Trajectory, pose: &Pose) -> f64 {
    distance_to_segment(&pose.position, &traj.pregrasp.position, &traj.grasp.position)
}
