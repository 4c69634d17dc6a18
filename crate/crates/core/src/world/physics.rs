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
use std::f64::consts::PI;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{
    Benchmark, GripperSpec, Hole, ObjectSpec, PegBoard, Presentation, SceneSpec, WorldError,
};
use crate::geometry::{ArmModel, IkParams, JointConfig, Pose};

pub const GRAVITY: f64 = 9.81;
/// Lift height for the Benchmark I goal, meters above the start height.
pub const LIFT_GOAL_HEIGHT: f64 = 0.10;
/// How long the lifted object must stay up, seconds.
pub const LIFT_HOLD_TIME: f64 = 1.0;
/// Nominal perpendicular grasp tolerance before material scaling, meters.
pub const GRASP_TOLERANCE: f64 = 0.005;
/// Lowest allowed end-effector height (fingertips at the table).
pub const MIN_EE_HEIGHT: f64 = 0.0;

/// Weight plus spring force on an object lifted `dz` above its anchor height.
/// A negative lift leaves the spring slack.
pub fn spring_load(k: f64, dz: f64, mass: f64) -> f64 {
    mass * GRAVITY + k * dz.max(0.0)
}

/// Two-finger Coulomb friction: the grasp holds iff `2·mu·F_g >= load`.
pub fn grasp_hold_check(mu: f64, closing_force: f64, load: f64) -> bool {
    2.0 * mu * closing_force >= load
}

/// Height above the start at which a grasp first fails, or `None` if it
/// holds at every height.
pub fn analytic_slip_height(mu: f64, closing_force: f64, mass: f64, k: f64) -> Option<f64> {
    let capacity = 2.0 * mu * closing_force;
    let weight = mass * GRAVITY;
    if capacity < weight {
        Some(0.0)
    } else if k > 0.0 {
        Some((capacity - weight) / k)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectStatus {
    /// Not yet presented.
    Hidden,
    Resting,
    Held,
    InBasket,
    Inserted,
    /// Fell off the table.
    Dropped,
    /// Taken out of play after repeated failed grasps.
    Removed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub pose: Pose,
    pub status: ObjectStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attachment {
    pub object: usize,
    /// Object pose in the end-effector frame, fixed while attached.
    pub relative: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperState {
    pub closed: bool,
    pub opening: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperCommand {
    Hold,
    Open,
    Close,
}

/// Arm tracking rate limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingLimits {
    /// m/s
    pub linear: f64,
    /// rad/s
    pub angular: f64,
}

impl Default for TrackingLimits {
    fn default() -> Self {
        TrackingLimits {
            linear: 0.3,
            angular: 1.5,
        }
    }
}

/// Everything about a world that does not change during a trial.
#[derive(Debug, Clone)]
pub struct Environment {
    pub scene: SceneSpec,
    pub arm: ArmModel,
    pub gripper: GripperSpec,
    pub tracking: TrackingLimits,
    /// Solver settings for per-step tracking. Tighter than the defaults so
    /// small steps do not drift.
    pub ik: IkParams,
}

impl Environment {
    pub fn new(scene: SceneSpec) -> Self {
        Environment {
            scene,
            arm: ArmModel::default(),
            gripper: GripperSpec::default(),
            tracking: TrackingLimits::default(),
            ik: IkParams {
                position_tolerance: 1e-7,
                orientation_tolerance: 1e-6,
                max_iterations: 50,
                ..IkParams::default()
            },
        }
    }

    pub fn object(&self, i: usize) -> &ObjectSpec {
        &self.scene.objects[i].object
    }

    pub fn spawn_pose(&self, i: usize) -> &Pose {
        &self.scene.objects[i].pose
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    pub dt: f64,
    pub joints: JointConfig,
    pub ee: Pose,
    pub gripper: GripperState,
    pub objects: Vec<ObjectState>,
    pub attachment: Option<Attachment>,
    /// Tick at which the held object first reached the lift goal height in
    /// the current uninterrupted hold.
    pub lift_since: Option<u64>,
    pub in_contact: bool,
}

impl WorldState {
    /// Arm at home, gripper open, objects at their spawn poses. Sequential
    /// scenes show only the first object.
    pub fn initial(env: &Environment, dt: f64) -> Self {
        let joints = JointConfig::home();
        let ee = env
            .arm
            .forward_kinematics(&joints)
            .expect("home configuration is within limits");
        let objects = env
            .scene
            .objects
            .iter()
            .enumerate()
            .map(|(i, p)| ObjectState {
                pose: p.pose,
                status: if env.scene.presentation == Presentation::Sequential && i > 0 {
                    ObjectStatus::Hidden
                } else {
                    ObjectStatus::Resting
                },
            })
            .collect();
        WorldState {
            tick: 0,
            dt,
            joints,
            ee,
            gripper: GripperState {
                closed: false,
                opening: env.gripper.max_opening,
            },
            objects,
            attachment: None,
            lift_since: None,
            in_contact: false,
        }
    }

    /// Simulated time. Integer rates divide instead of multiply so times
    /// print as exact decimals.
    pub fn time(&self) -> f64 {
        let hz = (1.0 / self.dt).round();
        if (1.0 / self.dt - hz).abs() < 1e-9 {
            self.tick as f64 / hz
        } else {
            self.tick as f64 * self.dt
        }
    }

    pub fn held(&self) -> Option<usize> {
        self.attachment.map(|a| a.object)
    }

    /// Makes a hidden object available on the table.
    pub fn present(&mut self, i: usize) {
        if self.objects[i].status == ObjectStatus::Hidden {
            self.objects[i].status = ObjectStatus::Resting;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorldEvent {
    GripperClose,
    GripperOpen,
    Attach { object: usize },
    Miss { object: Option<usize> },
    Collision { object: usize, other: usize },
    Slip { object: usize, height: f64 },
    Release { object: usize },
    Drop { object: usize },
    Place { object: usize },
    Insert { object: usize },
    Contact { surface: String },
    Unreachable { position_error: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttachOutcome {
    Attach,
    Miss,
    /// Another object is inside the finger sweep.
    Collision(usize),
}

fn to_local(pose: &Pose, dir: &Vector3<f64>) -> Vector3<f64> {
    pose.orientation.inverse() * dir
}

/// Whether the closing fingers can take `object` from the grasp frame.
/// Collisions with other objects are checked first.
pub fn attach_check(
    gripper: &GripperSpec,
    object: usize,
    grasp_pose: &Pose,
    world: &WorldState,
    env: &Environment,
) -> Result<AttachOutcome, WorldError> {
    if let Some(held) = world.held() {
        return Err(WorldError::AlreadyHolding(held));
    }
    let half = Vector3::from(gripper.finger_sweep) * 0.5;
    for (j, other) in world.objects.iter().enumerate() {
        if j == object || other.status != ObjectStatus::Resting {
            continue;
        }
        let r = env.object(j).shape.bounding_radius();
        let local = grasp_pose
            .inverse()
            .transform_point(&other.pose.position);
        let closest = local.zip_map(&half, |v, h| v.clamp(-h, h));
        if (local - closest).norm() < r {
            return Ok(AttachOutcome::Collision(j));
        }
    }
    let spec = env.object(object);
    let state = &world.objects[object];
    let closing = grasp_pose.x_axis();
    let width = spec.shape.width_along(&to_local(&state.pose, &closing));
    let d = state.pose.position - grasp_pose.position;
    let approach = grasp_pose.z_axis();
    let axial = d.dot(&approach);
    let perpendicular = (d - approach * axial).norm();
    let tolerance = GRASP_TOLERANCE * spec.material.grasp_tolerance_scale;
    if width <= gripper.max_opening
        && perpendicular < tolerance
        && axial.abs() <= gripper.finger_sweep[2] / 2.0
    {
        Ok(AttachOutcome::Attach)
    } else {
        Ok(AttachOutcome::Miss)
    }
}

/// Lowest point of `shape` at `pose`, assuming the frame origin is the
/// bounding-box center.
fn bottom_z(spec: &ObjectSpec, pose: &Pose) -> f64 {
    let up = to_local(pose, &Vector3::z());
    pose.position.z - 0.5 * spec.shape.width_along(&up)
}

fn yaw_of(q: &UnitQuaternion<f64>) -> f64 {
    let x = q * Vector3::x();
    x.y.atan2(x.x)
}

/// Absolute yaw offset modulo the footprint symmetry.
fn symmetric_yaw_error(yaw: f64, symmetry: f64) -> f64 {
    if symmetry <= 0.0 {
        return 0.0;
    }
    let r = yaw.rem_euclid(symmetry);
    r.min(symmetry - r)
}

/// Whether an object at `pose` fits through `hole`: lateral offset plus the
/// rim displacement caused by yaw misalignment must stay within the
/// clearance.
pub fn fits_hole(spec: &ObjectSpec, pose: &Pose, hole: &Hole, board: &PegBoard) -> bool {
    if spec.peg != Some(hole.shape) {
        return false;
    }
    let dx = pose.position.x - hole.center.x;
    let dy = pose.position.y - hole.center.y;
    let lateral = (dx * dx + dy * dy).sqrt();
    let yaw = yaw_of(&(board.pose.orientation.inverse() * pose.orientation));
    let yaw_err = symmetric_yaw_error(yaw, spec.shape.yaw_symmetry());
    lateral + spec.shape.footprint_radius() * yaw_err <= hole.clearance
}

/// Insertion predicate: center within the matching hole's clearance in the
/// board plane and below the board's top surface.
pub fn inserted_in(spec: &ObjectSpec, pose: &Pose, board: &PegBoard) -> bool {
    let Some(peg) = spec.peg else {
        return false;
    };
    let Some(hole) = board.hole_for(peg) else {
        return false;
    };
    let dx = pose.position.x - hole.center.x;
    let dy = pose.position.y - hole.center.y;
    (dx * dx + dy * dy).sqrt() <= hole.clearance && pose.position.z < board.top()
}

/// Surface the held object at `pose` would penetrate, if any.
fn penetration(env: &Environment, spec: &ObjectSpec, pose: &Pose) -> Option<&'static str> {
    let bottom = bottom_z(spec, pose);
    if bottom < -1e-9 {
        return Some("table");
    }
    if let Some(board) = &env.scene.peg_board {
        let r = spec.shape.footprint_radius();
        let top_z = pose.position.z + (pose.position.z - bottom);
        let overlaps_slab = bottom < board.top() && top_z > board.top() - board.thickness;
        if overlaps_slab && board.covers_xy(&pose.position, r) {
            let through_hole = board
                .holes
                .iter()
                .any(|h| fits_hole(spec, pose, h, board));
            if !through_hole {
                return Some("peg_board");
            }
        }
    }
    None
}

/// Moves `from` toward `to` by at most the rate limits over `dt`.
fn rate_limit(from: &Pose, to: &Pose, limits: &TrackingLimits, dt: f64) -> Pose {
    let dp = to.position - from.position;
    let max_lin = limits.linear * dt;
    let position = if dp.norm() > max_lin {
        from.position + dp * (max_lin / dp.norm())
    } else {
        to.position
    };
    let rel = to.orientation * from.orientation.inverse();
    let angle = rel.angle();
    let max_ang = limits.angular * dt;
    let orientation = if angle > max_ang {
        let step = UnitQuaternion::from_scaled_axis(rel.scaled_axis() * (max_ang / angle));
        step * from.orientation
    } else {
        to.orientation
    };
    Pose::new(position, orientation)
}

/// Settles a released object onto whatever is below it.
fn settle(env: &Environment, spec: &ObjectSpec, pose: &Pose) -> (Pose, ObjectStatus) {
    let yaw = yaw_of(&pose.orientation);
    let upright = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);
    let half = spec.shape.half_height();
    let p = pose.position;
    let at = |z: f64| Pose::new(Vector3::new(p.x, p.y, z), upright);
    if let Some(board) = &env.scene.peg_board {
        if inserted_in(spec, pose, board) {
            return (at(half), ObjectStatus::Inserted);
        }
        if board.covers_xy(&p, 0.0) && p.z > board.top() {
            return (at(board.top() + half), ObjectStatus::Resting);
        }
    }
    let basket = &env.scene.basket;
    if basket.contains_xy(&p) && p.z >= basket.min.z {
        return (at(basket.min.z + half), ObjectStatus::InBasket);
    }
    if env.scene.table.contains_xy(&p) {
        (at(half), ObjectStatus::Resting)
    } else {
        (at(-1.0), ObjectStatus::Dropped)
    }
}

fn release(next: &mut WorldState, env: &Environment, events: &mut Vec<WorldEvent>) {
    let Some(att) = next.attachment.take() else {
        return;
    };
    let i = att.object;
    let (pose, status) = settle(env, env.object(i), &next.objects[i].pose);
    next.objects[i] = ObjectState { pose, status };
    next.lift_since = None;
    events.push(WorldEvent::Release { object: i });
    match status {
        ObjectStatus::InBasket => events.push(WorldEvent::Place { object: i }),
        ObjectStatus::Inserted => events.push(WorldEvent::Insert { object: i }),
        ObjectStatus::Dropped => events.push(WorldEvent::Drop { object: i }),
        _ => {}
    }
}

/// Nearest resting object to `p`.
fn nearest_resting(world: &WorldState, p: &Vector3<f64>) -> Option<usize> {
    world
        .objects
        .iter()
        .enumerate()
        .filter(|(_, o)| o.status == ObjectStatus::Resting)
        .min_by(|(_, a), (_, b)| {
            (a.pose.position - p)
                .norm()
                .total_cmp(&(b.pose.position - p).norm())
        })
        .map(|(i, _)| i)
}

/// Advances the world by one step of `dt`.
pub fn step_world(
    world: &WorldState,
    env: &Environment,
    desired_ee: &Pose,
    command: GripperCommand,
    dt: f64,
) -> (WorldState, Vec<WorldEvent>) {
    let mut next = world.clone();
    let mut events = Vec::new();
    next.tick += 1;
    next.dt = dt;

    match command {
        GripperCommand::Close if !world.gripper.closed => {
            next.gripper.closed = true;
            next.gripper.opening = 0.0;
            events.push(WorldEvent::GripperClose);
            match nearest_resting(world, &world.ee.position) {
                Some(i) => match attach_check(&env.gripper, i, &world.ee, world, env) {
                    Ok(AttachOutcome::Attach) => {
                        next.attachment = Some(Attachment {
                            object: i,
                            relative: world.ee.inverse().compose(&world.objects[i].pose),
                        });
                        next.objects[i].status = ObjectStatus::Held;
                        next.gripper.opening = env
                            .object(i)
                            .shape
                            .width_along(&to_local(&world.objects[i].pose, &world.ee.x_axis()));
                        events.push(WorldEvent::Attach { object: i });
                    }
                    Ok(AttachOutcome::Collision(other)) => {
                        events.push(WorldEvent::Collision { object: i, other })
                    }
                    _ => events.push(WorldEvent::Miss { object: Some(i) }),
                },
                None => events.push(WorldEvent::Miss { object: None }),
            }
        }
        GripperCommand::Open if world.gripper.closed => {
            next.gripper.closed = false;
            next.gripper.opening = env.gripper.max_opening;
            events.push(WorldEvent::GripperOpen);
            release(&mut next, env, &mut events);
        }
        _ => {}
    }

    if *desired_ee != world.ee {
        let target = rate_limit(&world.ee, desired_ee, &env.tracking, dt);
        // Out-of-reach targets still move the arm to the closest pose found,
        // so the end effector slides along the workspace boundary.
        if let Ok(fit) = env.arm.best_fit(&target, &world.joints, &env.ik) {
            if !fit.converged {
                events.push(WorldEvent::Unreachable {
                    position_error: fit.position_error,
                });
            }
            let q = fit.q;
            let ee = env.arm.forward_kinematics(&q).expect("IK respects limits");
            let blocked = if ee.position.z < MIN_EE_HEIGHT {
                Some("table")
            } else if let Some(att) = next.attachment {
                penetration(env, env.object(att.object), &ee.compose(&att.relative))
            } else {
                None
            };
            match blocked {
                Some(surface) => {
                    if !world.in_contact {
                        events.push(WorldEvent::Contact {
                            surface: surface.into(),
                        });
                    }
                    next.in_contact = true;
                }
                None => {
                    next.joints = q;
                    next.ee = ee;
                    next.in_contact = false;
                }
            }
        }
    }

    if let Some(att) = next.attachment {
        let i = att.object;
        next.objects[i].pose = next.ee.compose(&att.relative);
        let spec = env.object(i);
        let start_z = env.spawn_pose(i).position.z;
        let dz = next.objects[i].pose.position.z - start_z;
        let k = spec.spring.map_or(0.0, |s| s.stiffness);
        let load = spring_load(k, dz, spec.mass);
        if !grasp_hold_check(spec.material.friction_mu, env.gripper.closing_force, load) {
            next.attachment = None;
            next.lift_since = None;
            let (pose, status) = settle(env, spec, &next.objects[i].pose);
            next.objects[i] = ObjectState { pose, status };
            events.push(WorldEvent::Slip {
                object: i,
                height: dz,
            });
        } else {
            if let Some(board) = &env.scene.peg_board {
                if inserted_in(spec, &next.objects[i].pose, board) {
                    next.gripper.closed = false;
                    next.gripper.opening = env.gripper.max_opening;
                    release(&mut next, env, &mut events);
                }
            }
            if next.attachment.is_some() {
                if dz >= LIFT_GOAL_HEIGHT {
                    next.lift_since.get_or_insert(next.tick);
                } else {
                    next.lift_since = None;
                }
            }
        }
    }

    (next, events)
}

/// Per-benchmark success predicate.
pub fn goal_check(benchmark: Benchmark, task: u8, world: &WorldState, scene: &SceneSpec) -> bool {
    match benchmark {
        Benchmark::I => match (world.held(), world.lift_since) {
            (Some(_), Some(since)) => {
                let needed = (LIFT_HOLD_TIME / world.dt).round() as u64;
                world.tick - since >= needed
            }
            _ => false,
        },
        Benchmark::II => {
            let count = if task == 1 { 1 } else { world.objects.len() };
            world.objects[..count].iter().all(|o| {
                world.attachment.is_none_or(|a| a.object >= count)
                    && o.status != ObjectStatus::Held
                    && scene.basket.contains(&o.pose.position)
            })
        }
        Benchmark::III => {
            let Some(board) = &scene.peg_board else {
                return false;
            };
            world
                .objects
                .iter()
                .zip(&scene.objects)
                .all(|(o, p)| o.status != ObjectStatus::Held && inserted_in(&p.object, &o.pose, board))
        }
    }
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::top_down;
    use crate::world::{
        default_basket, single_object_scene, MaterialClass, MaterialId, PlacedObject, Shape,
        Spring, TableSpec, SCENE_SCHEMA,
    };
    use approx::assert_relative_eq;

    fn cube_scene(material: MaterialClass, mass: f64, k: f64) -> Environment {
        let pose = Pose::new(Vector3::new(0.5, 0.0, 0.025), UnitQuaternion::identity());
        let object = ObjectSpec {
            name: "cube".into(),
            shape: Shape::Box {
                size: [0.05, 0.05, 0.05],
            },
            mass,
            material,
            spring: Some(Spring {
                stiffness: k,
                anchor: Vector3::new(0.5, 0.0, 0.0),
            }),
            peg: None,
        };
        Environment::new(SceneSpec {
            schema: SCENE_SCHEMA.into(),
            benchmark: Benchmark::I,
            task: 1,
            class: material.id.name().into(),
            seed: 0,
            table: TableSpec::default(),
            objects: vec![PlacedObject { object, pose }],
            basket: default_basket(),
            peg_board: None,
            presentation: Presentation::Simultaneous,
        })
    }

    fn grasp_at(p: Vector3<f64>) -> Pose {
        Pose::new(p, top_down(PI))
    }

    #[test]
    fn spring_load_examples() {
        assert_relative_eq!(spring_load(50.0, 0.10, 0.2), 6.962, epsilon = 1e-12);
        assert_relative_eq!(spring_load(50.0, 0.0, 0.2), 1.962, epsilon = 1e-12);
        assert_eq!(spring_load(0.0, 0.10, 0.0), 0.0);
    }

    #[test]
    fn hold_check_examples() {
        assert!(grasp_hold_check(0.5, 40.0, 6.962));
        assert!(!grasp_hold_check(0.0, 40.0, 1.0));
        let load = spring_load(100.0, 0.10, 1.0);
        assert_relative_eq!(load, 19.81, epsilon = 1e-12);
        assert!(!grasp_hold_check(0.2, 40.0, load));
    }

    #[test]
    fn attach_examples() {
        let env = cube_scene(MaterialClass::of(MaterialId::Standard), 0.3, 0.0);
        let world = WorldState::initial(&env, 0.01);
        let center = world.objects[0].pose.position;
        let g = env.gripper;
        assert_eq!(
            attach_check(&g, 0, &grasp_at(center), &world, &env).unwrap(),
            AttachOutcome::Attach
        );
        let off = center + Vector3::new(0.0, 0.05, 0.0);
        assert_eq!(
            attach_check(&g, 0, &grasp_at(off), &world, &env).unwrap(),
            AttachOutcome::Miss
        );
    }

    #[test]
    fn collision_with_object_in_sweep() {
        let mut env = cube_scene(MaterialClass::of(MaterialId::Standard), 0.3, 0.0);
        let mut second = env.scene.objects[0].clone();
        second.pose.position.x += 0.04;
        env.scene.objects.push(second);
        let world = WorldState::initial(&env, 0.01);
        let center = world.objects[0].pose.position;
        assert_eq!(
            attach_check(&env.gripper, 0, &grasp_at(center), &world, &env).unwrap(),
            AttachOutcome::Collision(1)
        );
    }

    #[test]
    fn already_holding_is_an_error() {
        let env = cube_scene(MaterialClass::of(MaterialId::Standard), 0.3, 0.0);
        let mut world = WorldState::initial(&env, 0.01);
        world.attachment = Some(Attachment {
            object: 0,
            relative: Pose::identity(),
        });
        assert_eq!(
            attach_check(&env.gripper, 0, &world.ee, &world, &env),
            Err(WorldError::AlreadyHolding(0))
        );
    }

    #[test]
    fn fixed_point_when_nothing_commanded() {
        let env = cube_scene(MaterialClass::of(MaterialId::Standard), 0.3, 0.0);
        let world = WorldState::initial(&env, 0.01);
        let (next, events) = step_world(&world, &env, &world.ee, GripperCommand::Hold, 0.01);
        assert!(events.is_empty());
        let mut expected = world.clone();
        expected.tick += 1;
        assert_eq!(next, expected);
        assert_relative_eq!(next.time(), 0.01);
    }

    /// Attaches the cube by placing the arm at its center.
    fn grasped(env: &Environment) -> WorldState {
        let mut world = WorldState::initial(env, 0.01);
        let target = grasp_at(world.objects[0].pose.position);
        let q = env.arm.solve_ik_with(&target, &world.joints, &env.ik).unwrap();
        world.joints = q;
        world.ee = env.arm.forward_kinematics(&q).unwrap();
        let (next, events) = step_world(&world, env, &world.ee, GripperCommand::Close, 0.01);
        assert!(events.contains(&WorldEvent::Attach { object: 0 }), "{events:?}");
        next
    }

    #[test]
    fn attached_object_follows_rigidly() {
        let env = cube_scene(MaterialClass::of(MaterialId::Standard), 0.3, 0.0);
        let world = grasped(&env);
        let before = world.objects[0].pose.position;
        let ee_before = world.ee.position;
        let mut w = world;
        for _ in 0..20 {
            let up = w.ee.translated(&Vector3::new(0.0, 0.0, 0.001));
            w = step_world(&w, &env, &up, GripperCommand::Hold, 0.01).0;
        }
        let raised = w.ee.position - ee_before;
        assert_relative_eq!(raised.z, 0.02, epsilon = 1e-5);
        let moved = w.objects[0].pose.position - before;
        assert_relative_eq!(moved, raised, epsilon = 1e-12);
    }

    #[test]
    fn slip_height_matches_analytic_solution() {
        let material = MaterialClass::new(MaterialId::MetallicSlippery, 0.15, 0.0, 0.0, 1.0).unwrap();
        let env = cube_scene(material, 0.3, 100.0);
        let expected = analytic_slip_height(0.15, 40.0, 0.3, 100.0).unwrap();
        assert_relative_eq!(expected, (12.0 - 2.943) / 100.0, epsilon = 1e-12);
        let mut w = grasped(&env);
        let step = 0.0015;
        for _ in 0..200 {
            let up = w.ee.translated(&Vector3::new(0.0, 0.0, step));
            let (next, events) = step_world(&w, &env, &up, GripperCommand::Hold, 0.01);
            if let Some(WorldEvent::Slip { height, .. }) =
                events.iter().find(|e| matches!(e, WorldEvent::Slip { .. }))
            {
                assert!(*height >= expected && *height < expected + step + 1e-4, "{height}");
                assert!(*height < LIFT_GOAL_HEIGHT);
                assert!(next.attachment.is_none());
                assert_relative_eq!(next.objects[0].pose.position.z, 0.025);
                return;
            }
            w = next;
        }
        panic!("no slip");
    }

    #[test]
    fn release_over_basket_places_object() {
        let scene = single_object_scene(
            Benchmark::II,
            1,
            MaterialId::Composed,
            0,
            &Pose::from_position(0.5, 0.0, 0.0),
            1,
        )
        .unwrap();
        let env = Environment::new(scene);
        let mut w = WorldState::initial(&env, 0.01);
        let center = default_basket().center();
        w.attachment = Some(Attachment {
            object: 0,
            relative: Pose::identity(),
        });
        w.objects[0].status = ObjectStatus::Held;
        w.objects[0].pose = Pose::from_position(center.x, center.y, 0.3);
        w.gripper.closed = true;
        let (next, events) = step_world(&w, &env, &w.ee, GripperCommand::Open, 0.01);
        assert!(events.contains(&WorldEvent::Place { object: 0 }));
        assert_eq!(next.objects[0].status, ObjectStatus::InBasket);
        assert!(goal_check(Benchmark::II, 1, &next, &env.scene));
    }

    #[test]
    fn lift_goal_needs_one_second() {
        let env = cube_scene(MaterialClass::of(MaterialId::Standard), 0.3, 0.0);
        let mut w = grasped(&env);
        w.lift_since = Some(w.tick);
        w.tick += 119;
        assert!(goal_check(Benchmark::I, 1, &w, &env.scene));
        w.tick -= 30;
        assert!(!goal_check(Benchmark::I, 1, &w, &env.scene));
    }

    #[test]
    fn wrong_hole_is_not_an_insertion() {
        let board = PegBoard::standard();
        let cube = super::super::dataset(Benchmark::III, MaterialId::Standard).unwrap()[0].clone();
        let pyramid_like = board.holes[2];
        let pose = Pose::from_position(pyramid_like.center.x, pyramid_like.center.y, 0.05);
        assert!(!inserted_in(&cube, &pose, &board));
        assert!(!fits_hole(&cube, &pose, &pyramid_like, &board));
        let square = board.holes[0];
        let pose = Pose::from_position(square.center.x, square.center.y, 0.05);
        assert!(inserted_in(&cube, &pose, &board));
        assert!(fits_hole(&cube, &pose, &square, &board));
    }

    #[test]
    fn symmetric_yaw() {
        assert_relative_eq!(symmetric_yaw_error(PI / 2.0 + 0.01, PI / 2.0), 0.01, epsilon = 1e-12);
        assert_relative_eq!(symmetric_yaw_error(-0.02, PI / 3.0), 0.02, epsilon = 1e-12);
        assert_eq!(symmetric_yaw_error(1.0, 0.0), 0.0);
        assert_relative_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
    }
}
