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
//! Rigid-body math and the 7-DOF arm model.
//!
//! The arm is a straight serial chain whose joints alternate between the local
//! `z` and `y` axes. Forward kinematics composes one rotation and one link
//! offset per joint; inverse kinematics is damped least squares over a
//! numerically differentiated Jacobian.

use std::f64::consts::PI;

use nalgebra::{
    Isometry3, Matrix6, Quaternion, SMatrix, Translation3, Unit, UnitQuaternion, Vector3, Vector6,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DOF: usize = 7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("joint {joint} at {angle:.4} rad is outside its limit by {excess:.4} rad")]
    JointLimitViolation { joint: usize, angle: f64, excess: f64 },
    #[error(
        "target unreachable: residual {position:.3e} m / {orientation:.3e} rad after {iterations} iterations"
    )]
    Unreachable {
        position: f64,
        orientation: f64,
        iterations: usize,
    },
    #[error("interpolation parameter {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("invalid arm model: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, KinematicsError>;

/// Position in meters plus a unit-quaternion orientation, world frame unless
/// stated otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    position: [f64; 3],
    /// w, x, y, z
    orientation: [f64; 4],
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let q = p.orientation.quaternion();
        PoseRepr {
            position: [p.position.x, p.position.y, p.position.z],
            orientation: [q.w, q.i, q.j, q.k],
        }
    }
}

impl TryFrom<PoseRepr> for Pose {
    type Error = String;

    fn try_from(r: PoseRepr) -> std::result::Result<Self, String> {
        if r.position.iter().chain(r.orientation.iter()).any(|v| !v.is_finite()) {
            return Err("pose contains non-finite values".into());
        }
        let [w, x, y, z] = r.orientation;
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if norm < 1e-6 {
            return Err("pose orientation has zero norm".into());
        }
        // Keep already-normalized values bit-exact so records round-trip.
        let orientation = if (norm - 1.0).abs() < 1e-9 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::from_quaternion(q)
        };
        Ok(Pose {
            position: Vector3::from(r.position),
            orientation,
        })
    }
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Pose {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Pose::new(Vector3::zeros(), UnitQuaternion::identity())
    }

    pub fn from_position(x: f64, y: f64, z: f64) -> Self {
        Pose::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Pose::new(iso.translation.vector, iso.rotation)
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    /// `self ∘ other`: `other` is expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.position + self.orientation * other.position,
            renormalize(self.orientation * other.orientation),
        )
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose::new(-(inv * self.position), inv)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation * p
    }

    pub fn translated(&self, delta: &Vector3<f64>) -> Pose {
        Pose::new(self.position + delta, self.orientation)
    }

    /// Tool axis (local `z`) expressed in the world frame.
    pub fn z_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::z()
    }

    pub fn x_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::x()
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.orientation.coords.iter().all(|v| v.is_finite())
    }

    /// Position and orientation error of `self` relative to `target`, as
    /// (meters, radians). Orientation error is the rotation-vector norm of the
    /// relative rotation.
    pub fn error_to(&self, target: &Pose) -> (f64, f64) {
        let e = pose_error(target, self);
        (
            Vector3::new(e[0], e[1], e[2]).norm(),
            Vector3::new(e[3], e[4], e[5]).norm(),
        )
    }
}

/// Re-normalizes a unit quaternion that may have drifted through repeated
/// composition.
pub fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(q.into_inner())
}

/// World-frame 6D error `target - current`: linear part in meters, angular part
/// as a rotation vector.
pub fn pose_error(target: &Pose, current: &Pose) -> Vector6<f64> {
    let dp = target.position - current.position;
    let dr = (target.orientation * current.orientation.inverse()).scaled_axis();
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

/// Linear and angular velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Twist {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

impl Twist {
    pub fn zero() -> Self {
        Twist {
            linear: Vector3::zeros(),
            angular: Vector3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(self.angular.iter()).all(|v| v.is_finite())
    }

    /// Applies the twist for `dt` seconds in the world frame.
    pub fn integrate(&self, pose: &Pose, dt: f64) -> Pose {
        let rot = UnitQuaternion::from_scaled_axis(self.angular * dt);
        Pose::new(
            pose.position + self.linear * dt,
            renormalize(rot * pose.orientation),
        )
    }
}

/// Seven joint angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointConfig(pub [f64; DOF]);

impl JointConfig {
    pub fn zeros() -> Self {
        JointConfig([0.0; DOF])
    }

    pub fn as_array(&self) -> &[f64; DOF] {
        &self.0
    }

    /// Tool pointing straight down above the middle of the workspace.
    pub fn home() -> Self {
        let shoulder = 0.3;
        let elbow = 1.8;
        JointConfig([0.0, shoulder, 0.0, elbow, 0.0, PI - shoulder - elbow, 0.0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimit {
    pub lower: f64,
    pub upper: f64,
}

impl JointLimit {
    pub fn symmetric(bound: f64) -> Self {
        JointLimit {
            lower: -bound,
            upper: bound,
        }
    }

    pub fn clamp(&self, q: f64) -> f64 {
        q.clamp(self.lower, self.upper)
    }

    /// How far `q` lies outside the interval; zero when inside.
    pub fn excess(&self, q: f64) -> f64 {
        if q < self.lower {
            self.lower - q
        } else if q > self.upper {
            q - self.upper
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    offsets: [f64; DOF],
    axes: [Unit<Vector3<f64>>; DOF],
    limits: [JointLimit; DOF],
}

impl Default for ArmModel {
    /// Approximation of an IIWA-class arm: 0.34 m shoulder, two 0.40 m links
    /// and a 0.126 m flange-to-tool offset.
    fn default() -> Self {
        let z = Vector3::z_axis();
        let y = Vector3::y_axis();
        let deg = PI / 180.0;
        let l1 = JointLimit::symmetric(170.0 * deg);
        let l2 = JointLimit::symmetric(120.0 * deg);
        let l7 = JointLimit::symmetric(175.0 * deg);
        ArmModel {
            offsets: [0.34, 0.0, 0.40, 0.0, 0.40, 0.0, 0.126],
            axes: [z, y, z, y, z, y, z],
            limits: [l1, l2, l1, l2, l1, l2, l7],
        }
    }
}

impl ArmModel {
    pub fn new(
        offsets: [f64; DOF],
        axes: [Vector3<f64>; DOF],
        limits: [JointLimit; DOF],
    ) -> Result<Self> {
        if offsets.iter().any(|o| !o.is_finite() || *o < 0.0) {
            return Err(KinematicsError::InvalidModel(
                "link offsets must be finite and non-negative".into(),
            ));
        }
        let mut unit_axes = [Vector3::z_axis(); DOF];
        for (slot, axis) in unit_axes.iter_mut().zip(axes.iter()) {
            if (axis.norm() - 1.0).abs() > 1e-9 {
                return Err(KinematicsError::InvalidModel(format!(
                    "joint axis {axis:?} is not unit-norm"
                )));
            }
            *slot = Unit::new_unchecked(*axis);
        }
        for l in &limits {
            if !(l.upper > l.lower) || (l.upper + l.lower).abs() > 1e-12 {
                return Err(KinematicsError::InvalidModel(
                    "joint limits must be non-empty and symmetric about zero".into(),
                ));
            }
        }
        Ok(ArmModel {
            offsets,
            axes: unit_axes,
            limits,
        })
    }

    pub fn limits(&self) -> &[JointLimit; DOF] {
        &self.limits
    }

    /// Sum of link offsets: the radius of the reachable ball around the base.
    pub fn reach(&self) -> f64 {
        self.offsets.iter().sum()
    }

    pub fn check_limits(&self, q: &JointConfig) -> Result<()> {
        for (joint, (angle, limit)) in q.0.iter().zip(self.limits.iter()).enumerate() {
            let excess = limit.excess(*angle);
            if excess > 0.0 || !angle.is_finite() {
                return Err(KinematicsError::JointLimitViolation {
                    joint,
                    angle: *angle,
                    excess,
                });
            }
        }
        Ok(())
    }

    pub fn clamp(&self, q: &JointConfig) -> JointConfig {
        let mut out = *q;
        for (a, l) in out.0.iter_mut().zip(self.limits.iter()) {
            *a = l.clamp(*a);
        }
        out
    }

    pub fn forward_kinematics(&self, q: &JointConfig) -> Result<Pose> {
        self.check_limits(q)?;
        Ok(self.fk_unchecked(q))
    }

    fn fk_unchecked(&self, q: &JointConfig) -> Pose {
        let mut t = Isometry3::identity();
        for i in 0..DOF {
            let rot = UnitQuaternion::from_axis_angle(&self.axes[i], q.0[i]);
            t *= Isometry3::from_parts(Translation3::new(0.0, 0.0, self.offsets[i]), rot);
        }
        let mut pose = Pose::from_isometry(&t);
        pose.orientation = renormalize(pose.orientation);
        pose
    }

    /// 6×7 Jacobian of the world-frame pose error by central differences.
    fn jacobian(&self, q: &JointConfig, step: f64) -> SMatrix<f64, 6, DOF> {
        let mut jac = SMatrix::<f64, 6, DOF>::zeros();
        for j in 0..DOF {
            let mut plus = *q;
            let mut minus = *q;
            plus.0[j] += step;
            minus.0[j] -= step;
            let a = self.fk_unchecked(&plus);
            let b = self.fk_unchecked(&minus);
            let col = pose_error(&a, &b) / (2.0 * step);
            jac.set_column(j, &col);
        }
        jac
    }

    pub fn solve_ik(&self, target: &Pose, q_init: &JointConfig) -> Result<JointConfig> {
        self.solve_ik_with(target, q_init, &IkParams::default())
    }

    pub fn solve_ik_with(
        &self,
        target: &Pose,
        q_init: &JointConfig,
        params: &IkParams,
    ) -> Result<JointConfig> {
        let fit = self.best_fit(target, q_init, params)?;
        if fit.converged {
            return Ok(fit.q);
        }
        Err(KinematicsError::Unreachable {
            position: fit.position_error,
            orientation: fit.orientation_error,
            iterations: params.max_iterations,
        })
    }

    /// Runs the same iteration as [`solve_ik_with`](Self::solve_ik_with) but
    /// returns the final iterate even when it misses the tolerances.
    pub fn best_fit(&self, target: &Pose, q_init: &JointConfig, params: &IkParams) -> Result<IkFit> {
        self.check_limits(q_init)?;
        let mut q = *q_init;
        let damping2 = params.damping * params.damping;
        let within = |r: (f64, f64)| {
            r.0 < params.position_tolerance && r.1 < params.orientation_tolerance
        };
        for _ in 0..params.max_iterations {
            let current = self.fk_unchecked(&q);
            let err = pose_error(target, &current);
            if within(split_norms(&err)) {
                break;
            }
            let jac = self.jacobian(&q, params.fd_step);
            let jjt = jac * jac.transpose() + Matrix6::identity() * damping2;
            let Some(y) = jjt.cholesky().map(|c| c.solve(&err)) else {
                break;
            };
            let mut dq = jac.transpose() * y;
            let largest = dq.amax();
            if largest > params.max_step {
                dq *= params.max_step / largest;
            }
            for (j, a) in q.0.iter_mut().enumerate() {
                *a = self.limits[j].clamp(*a + dq[j]);
            }
        }
        let residual = split_norms(&pose_error(target, &self.fk_unchecked(&q)));
        Ok(IkFit {
            q,
            position_error: residual.0,
            orientation_error: residual.1,
            converged: within(residual),
        })
    }
}

/// Result of a best-effort IK solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkFit {
    pub q: JointConfig,
    pub position_error: f64,
    pub orientation_error: f64,
    pub converged: bool,
}

fn split_norms(e: &Vector6<f64>) -> (f64, f64) {
    (
        Vector3::new(e[0], e[1], e[2]).norm(),
        Vector3::new(e[3], e[4], e[5]).norm(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkParams {
    pub damping: f64,
    pub max_iterations: usize,
    pub position_tolerance: f64,
    pub orientation_tolerance: f64,
    pub fd_step: f64,
    /// Largest joint change per iteration, radians.
    pub max_step: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        IkParams {
            damping: 0.1,
            max_iterations: 200,
            position_tolerance: 1e-4,
            orientation_tolerance: 1e-3,
            fd_step: 1e-6,
            max_step: 0.3,
        }
    }
}

/// Linear interpolation of position and shortest-arc slerp of orientation.
pub fn interpolate_pose(a: &Pose, b: &Pose, s: f64) -> Result<Pose> {
    if !(0.0..=1.0).contains(&s) {
        return Err(KinematicsError::OutOfRange(s));
    }
    if s == 0.0 {
        return Ok(*a);
    }
    if s == 1.0 {
        return Ok(*b);
    }
    let position = a.position + (b.position - a.position) * s;
    Ok(Pose::new(position, slerp(&a.orientation, &b.orientation, s)))
}

pub fn slerp(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, s: f64) -> UnitQuaternion<f64> {
    let qa = a.coords;
    let mut qb = b.coords;
    let mut dot = qa.dot(&qb);
    if dot < 0.0 {
        qb = -qb;
        dot = -dot;
    }
    let blended = if dot > 0.9995 {
        qa * (1.0 - s) + qb * s
    } else {
        let theta = dot.acos();
        let sin_theta = theta.sin();
        qa * (((1.0 - s) * theta).sin() / sin_theta) + qb * ((s * theta).sin() / sin_theta)
    };
    UnitQuaternion::from_quaternion(Quaternion::from(blended))
}

/// Orientation whose tool axis points straight down and whose closing axis
/// (local `x`) is the horizontal direction at `yaw` radians from world `x`.
pub fn top_down(yaw: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw)
        * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI)
}

/// Distance from `p` to the segment from `a` to `b`.
pub fn distance_to_segment(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_configuration_is_straight_up() {
        let arm = ArmModel::default();
        let pose = arm.forward_kinematics(&JointConfig::zeros()).unwrap();
        assert_relative_eq!(pose.position, Vector3::new(0.0, 0.0, 1.266), epsilon = 1e-12);
        assert!(pose.orientation.angle() < 1e-12);
    }

    #[test]
    fn shoulder_pitch_matches_hand_composition() {
        // Oracle: Rz(0)·T(0,0,.34)·Ry(π/2)·T(0,0,.926) by hand. Ry(π/2) maps
        // local z onto world x, so the remaining 0.926 m lies along +x.
        let arm = ArmModel::default();
        let mut q = JointConfig::zeros();
        q.0[1] = PI / 2.0;
        let pose = arm.forward_kinematics(&q).unwrap();
        assert_relative_eq!(pose.position, Vector3::new(0.926, 0.0, 0.34), epsilon = 1e-12);
        let expected = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), PI / 2.0);
        assert!(pose.orientation.angle_to(&expected) < 1e-12);
    }

    #[test]
    fn limit_violation_reports_joint_and_excess() {
        let arm = ArmModel::default();
        let mut q = JointConfig::zeros();
        q.0[0] = 3.1;
        match arm.forward_kinematics(&q) {
            Err(KinematicsError::JointLimitViolation { joint, excess, .. }) => {
                assert_eq!(joint, 0);
                assert_relative_eq!(excess, 3.1 - 170.0 * PI / 180.0, epsilon = 1e-12);
            }
            other => panic!("expected limit violation, got {other:?}"),
        }
    }

    #[test]
    fn ik_beyond_reach_is_unreachable() {
        let arm = ArmModel::default();
        let target = Pose::from_position(0.0, 0.0, 2.0);
        assert!(matches!(
            arm.solve_ik(&target, &JointConfig::home()),
            Err(KinematicsError::Unreachable { .. })
        ));
    }

    #[test]
    fn ik_at_target_returns_initial_guess() {
        let arm = ArmModel::default();
        let q = JointConfig::home();
        let target = arm.forward_kinematics(&q).unwrap();
        assert_eq!(arm.solve_ik(&target, &q).unwrap(), q);
    }

    #[test]
    fn ik_rejects_out_of_limit_seed() {
        let arm = ArmModel::default();
        let mut q = JointConfig::home();
        q.0[6] = 4.0;
        assert!(matches!(
            arm.solve_ik(&Pose::identity(), &q),
            Err(KinematicsError::JointLimitViolation { joint: 6, .. })
        ));
    }

    #[test]
    fn home_points_tool_down() {
        let arm = ArmModel::default();
        let pose = arm.forward_kinematics(&JointConfig::home()).unwrap();
        assert_relative_eq!(pose.z_axis(), -Vector3::z(), epsilon = 1e-9);
        assert!(pose.position.z > 0.3 && pose.position.x > 0.4);
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let a = Pose::from_position(0.0, 0.0, 0.0);
        let b = Pose::from_position(0.2, 0.0, 0.0);
        assert_eq!(interpolate_pose(&a, &b, 0.0).unwrap(), a);
        assert_eq!(interpolate_pose(&a, &b, 1.0).unwrap(), b);
        let mid = interpolate_pose(&a, &b, 0.5).unwrap();
        assert_relative_eq!(mid.position, Vector3::new(0.1, 0.0, 0.0), epsilon = 1e-15);
        assert!(matches!(
            interpolate_pose(&a, &b, 1.5),
            Err(KinematicsError::OutOfRange(_))
        ));
        assert!(interpolate_pose(&a, &b, f64::NAN).is_err());
    }

    #[test]
    fn slerp_takes_short_arc() {
        let a = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.1);
        let b_flipped = UnitQuaternion::new_unchecked(
            -UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.3).into_inner(),
        );
        let mid = slerp(&a, &b_flipped, 0.5);
        let expected = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.2);
        assert!(mid.angle_to(&expected) < 1e-12);
    }

    #[test]
    fn model_validation() {
        let good = ArmModel::default();
        let axes = good.axes.map(|a| a.into_inner());
        assert!(ArmModel::new(good.offsets, axes, good.limits).is_ok());
        let mut offsets = good.offsets;
        offsets[2] = -0.1;
        assert!(ArmModel::new(offsets, axes, good.limits).is_err());
        let mut limits = good.limits;
        limits[3] = JointLimit {
            lower: -1.0,
            upper: 2.0,
        };
        assert!(ArmModel::new(good.offsets, axes, limits).is_err());
    }

    #[test]
    fn pose_serde_round_trip_is_exact() {
        let pose = Pose::new(
            Vector3::new(0.123456789, -1.0 / 3.0, 2.0),
            top_down(0.7) * UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3),
        );
        let text = serde_json::to_string(&pose).unwrap();
        let back: Pose = serde_json::from_str(&text).unwrap();
        assert_eq!(back, pose);
    }
}
