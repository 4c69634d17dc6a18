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
//! Benchmark protocols and the fixed-step trial loop.
//!
//! A trial runs perception once at the pre-defined view, then at 100 Hz:
//! operator decision, controller step, arm tracking and world update, event
//! logging. Multi-object scenes re-run perception whenever the set of
//! objects on the table changes.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::control::{
    select_trajectory, ControlOutput, ControllerKind, ControllerState, Gains,
    MasterInput, Mode,
};
use crate::geometry::{top_down, Pose};
use crate::grasp::{plan_scene, GraspCandidate, Trajectory};
use crate::metrics::{aggregate, MetricsError};
use crate::operator::{Observation, Operator, OperatorKind, OperatorParams, PlaceGoal, TaskView};
use crate::record::{Event, EventKind, Outcome, RecordError, TrialParams, TrialRecord, TRIAL_SCHEMA};
use crate::seed::{derive, stream};
use crate::sensing::{capture_cloud, default_view, preprocess, DepthCamera, PointCloud};
use crate::world::{
    dataset, generate_scene, goal_check, inserted_in, sample_workspace_pose, single_object_scene,
    step_world, wrap_angle, Benchmark, Environment, MaterialId, ObjectSpec, ObjectStatus,
    Presentation, SceneSpec, WorldError, WorldEvent, WorldState,
};

pub const DT: f64 = 0.01;
pub const T_MAX_SINGLE: f64 = 120.0;
pub const T_MAX_MULTI: f64 = 600.0;
pub const ALIGN_RADIUS: f64 = 0.15;
/// Failed grasps on one object before it is given up.
pub const MAX_ATTEMPTS: u32 = 3;
/// Lift commanded by the operator above the grasp, m. Above the goal height
/// so the hold is judged with some margin.
pub const LIFT_TARGET: f64 = 0.12;
/// End-effector height for carrying objects, m.
pub const TRANSPORT_Z: f64 = 0.25;
/// Radius of the transit arc, m.
pub const VIA_RADIUS: f64 = 0.55;
/// Largest angular step between transit waypoints, rad.
pub const VIA_STEP: f64 = PI / 9.0;
pub const DEFAULT_POSES: usize = 10;
pub const DEFAULT_REPS: usize = 5;
pub const DEFAULT_SCENES: usize = 10;
/// Class label of scenes mixing material classes.
pub const MIXED: &str = "mixed";
/// Trials run concurrently per flushed batch.
const BATCH: usize = 16;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// What to run. Unset counts fall back to the protocol values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    pub benchmark: Benchmark,
    pub task: u8,
    pub controller: ControllerKind,
    pub operator: OperatorKind,
    pub seed: u64,
    /// Material classes to run; all classes of the benchmark when unset.
    pub classes: Option<Vec<MaterialId>>,
    /// Dataset object names to run; all when unset.
    pub objects: Option<Vec<String>>,
    pub poses: Option<usize>,
    pub reps: Option<usize>,
    pub scenes: Option<usize>,
    pub t_max: Option<f64>,
    pub gains: Gains,
    pub operator_params: OperatorParams,
    pub align_radius: f64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            benchmark: Benchmark::I,
            task: 1,
            controller: ControllerKind::Shared,
            operator: OperatorKind::SharedFollower,
            seed: 0,
            classes: None,
            objects: None,
            poses: None,
            reps: None,
            scenes: None,
            t_max: None,
            gains: Gains::default(),
            operator_params: OperatorParams::default(),
            align_radius: ALIGN_RADIUS,
        }
    }
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if !self.benchmark.valid_task(self.task) {
            return bad(format!("benchmark {} has no task {}", self.benchmark, self.task));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("t_max must be positive, got {t}"));
            }
        }
        for (name, v) in [("poses", self.poses), ("reps", self.reps), ("scenes", self.scenes)] {
            if v == Some(0) {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if let Some(classes) = &self.classes {
            for c in classes {
                if !self.benchmark.classes().contains(c) {
                    return bad(format!("class {c} is not part of benchmark {}", self.benchmark));
                }
            }
        }
        if !(self.align_radius > 0.0) {
            return bad("align_radius must be positive".into());
        }
        self.operator_params
            .validate()
            .map_err(|e| BenchError::Config(e.to_string()))
    }

    fn classes(&self) -> Vec<MaterialId> {
        self.classes
            .clone()
            .unwrap_or_else(|| self.benchmark.classes().to_vec())
    }

    pub fn default_t_max(&self) -> f64 {
        if self.benchmark.is_single_object(self.task) {
            T_MAX_SINGLE
        } else {
            T_MAX_MULTI
        }
    }
}

/// Everything needed to run one trial, and to re-run it from its record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSetup {
    pub trial: usize,
    pub benchmark: Benchmark,
    pub task: u8,
    pub class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_index: Option<usize>,
    pub rep: usize,
    pub master_seed: u64,
    pub scene_seed: u64,
    pub operator_seed: u64,
    pub camera_seed: u64,
    pub controller: ControllerKind,
    pub operator: OperatorKind,
    pub dt: f64,
    pub t_max: f64,
    pub params: TrialParams,
}

impl TrialSetup {
    /// A single-object trial with the given seeds and default parameters.
    pub fn single(
        benchmark: Benchmark,
        task: u8,
        class: MaterialId,
        object_index: usize,
        pose: Pose,
        seed: u64,
        controller: ControllerKind,
        operator: OperatorKind,
    ) -> Result<Self, BenchError> {
        let objects = dataset(benchmark, class)?;
        let object = objects
            .get(object_index)
            .ok_or_else(|| BenchError::Config(format!("no object {object_index} in {class}")))?;
        Ok(TrialSetup {
            trial: 0,
            benchmark,
            task,
            class: class.name().into(),
            object: Some(object.name.clone()),
            object_index: Some(object_index),
            pose_index: None,
            pose: Some(pose),
            scene_index: None,
            rep: 0,
            master_seed: seed,
            scene_seed: derive(seed, &[stream::SCENE]),
            operator_seed: derive(seed, &[stream::OPERATOR]),
            camera_seed: derive(seed, &[stream::CAMERA]),
            controller,
            operator,
            dt: DT,
            t_max: T_MAX_SINGLE,
            params: TrialParams {
                gains: Gains::default(),
                operator: OperatorParams::default(),
                align_radius: ALIGN_RADIUS,
            },
        })
    }

    /// A multi-object trial on the scene generated from `scene_seed`.
    pub fn scene(
        benchmark: Benchmark,
        task: u8,
        class: Option<MaterialId>,
        seed: u64,
        controller: ControllerKind,
        operator: OperatorKind,
    ) -> Self {
        let class = match (benchmark, class) {
            (Benchmark::III, _) => MaterialId::Standard.name().to_owned(),
            (_, Some(c)) if task != 3 => c.name().to_owned(),
            _ => MIXED.to_owned(),
        };
        TrialSetup {
            trial: 0,
            benchmark,
            task,
            class,
            object: None,
            object_index: None,
            pose_index: None,
            pose: None,
            scene_index: None,
            rep: 0,
            master_seed: seed,
            scene_seed: derive(seed, &[stream::SCENE]),
            operator_seed: derive(seed, &[stream::OPERATOR]),
            camera_seed: derive(seed, &[stream::CAMERA]),
            controller,
            operator,
            dt: DT,
            t_max: T_MAX_MULTI,
            params: TrialParams {
                gains: Gains::default(),
                operator: OperatorParams::default(),
                align_radius: ALIGN_RADIUS,
            },
        }
    }

    fn material(&self) -> Option<MaterialId> {
        MaterialId::from_str(&self.class).ok()
    }

    /// Builds the trial's scene.
    pub fn build_scene(&self) -> Result<SceneSpec, BenchError> {
        if self.benchmark.is_single_object(self.task) {
            let class = self
                .material()
                .ok_or_else(|| BenchError::Config(format!("unknown class {}", self.class)))?;
            let (Some(index), Some(pose)) = (self.object_index, self.pose) else {
                return Err(BenchError::Config(
                    "single-object trials need an object and a pose".into(),
                ));
            };
            Ok(single_object_scene(
                self.benchmark,
                self.task,
                class,
                index,
                &pose,
                self.scene_seed,
            )?)
        } else {
            Ok(generate_scene(
                self.benchmark,
                self.task,
                self.material(),
                self.scene_seed,
            )?)
        }
    }

    /// Recovers the setup a record was produced from.
    pub fn from_record(r: &TrialRecord) -> Result<Self, BenchError> {
        let controller = ControllerKind::from_str(&r.controller)
            .map_err(|e| BenchError::Config(e.to_string()))?;
        let operator =
            OperatorKind::from_str(&r.operator).map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(TrialSetup {
            trial: r.trial,
            benchmark: r.benchmark,
            task: r.task,
            class: r.class.clone(),
            object: r.object.clone(),
            object_index: r.object_index,
            pose_index: r.pose_index,
            pose: r.pose,
            scene_index: r.scene_index,
            rep: r.rep,
            master_seed: r.master_seed,
            scene_seed: r.scene_seed,
            operator_seed: r.operator_seed,
            camera_seed: r.camera_seed,
            controller,
            operator,
            dt: r.dt,
            t_max: r.t_max,
            params: r.params.clone(),
        })
    }
}

/// The recorded trial plan: every seed and pose, in execution order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub spec: BenchmarkSpec,
    /// Table poses recorded for single-object protocols.
    pub poses: Vec<Pose>,
    pub trials: Vec<TrialSetup>,
}

impl TrialPlan {
    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }
}

/// `n` table poses, uniform over the workspace annulus.
pub fn generate_poses(seed: u64, n: usize) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_workspace_pose(&mut rng)).collect()
}

fn class_code(class: &str) -> u64 {
    MaterialId::from_str(class).map_or(u64::from(u8::MAX), |c| c.index())
}

/// Expands a benchmark spec into its protocol trial plan. Seeds depend on
/// the master seed and the trial's coordinates only, never on the
/// controller or operator, so plans for different algorithms share scenes.
pub fn plan(spec: &BenchmarkSpec) -> Result<TrialPlan, BenchError> {
    spec.validate()?;
    let bm = spec.benchmark;
    let task = spec.task;
    let master = spec.seed;
    let t_max = spec.t_max.unwrap_or_else(|| spec.default_t_max());
    let params = TrialParams {
        gains: spec.gains,
        operator: spec.operator_params,
        align_radius: spec.align_radius,
    };
    let mut trials = Vec::new();
    let mut poses = Vec::new();
    let base = |class: String, scene_seed: u64, coords: &[u64], rep: usize| {
        let mut path = vec![bm.index(), u64::from(task)];
        path.extend_from_slice(coords);
        path.push(rep as u64);
        let with = |s: u64| {
            let mut p = vec![s];
            p.extend_from_slice(&path);
            derive(master, &p)
        };
        let mut params = params.clone();
        params.operator.seed = with(stream::OPERATOR);
        TrialSetup {
            trial: 0,
            benchmark: bm,
            task,
            class,
            object: None,
            object_index: None,
            pose_index: None,
            pose: None,
            scene_index: None,
            rep,
            master_seed: master,
            scene_seed,
            operator_seed: with(stream::OPERATOR),
            camera_seed: with(stream::CAMERA),
            controller: spec.controller,
            operator: spec.operator,
            dt: DT,
            t_max,
            params,
        }
    };
    if bm.is_single_object(task) {
        let n = spec.poses.unwrap_or(DEFAULT_POSES);
        poses = generate_poses(derive(master, &[stream::POSES, bm.index(), u64::from(task)]), n);
        let reps = spec.reps.unwrap_or(DEFAULT_REPS);
        for class in spec.classes() {
            let objects = dataset(bm, class)?;
            if let Some(names) = &spec.objects {
                for name in names {
                    if !objects.iter().any(|o| &o.name == name) {
                        return Err(BenchError::Config(format!("no object {name} in class {class}")));
                    }
                }
            }
            for (oi, object) in objects.iter().enumerate() {
                if spec.objects.as_ref().is_some_and(|names| !names.contains(&object.name)) {
                    continue;
                }
                for (pi, pose) in poses.iter().enumerate() {
                    let coords = [class.index(), oi as u64, pi as u64];
                    let scene_seed = derive(master, &[stream::SCENE, bm.index(), u64::from(task), coords[0], coords[1], coords[2]]);
                    for rep in 0..reps {
                        let mut t = base(class.name().into(), scene_seed, &coords, rep);
                        t.object = Some(object.name.clone());
                        t.object_index = Some(oi);
                        t.pose_index = Some(pi);
                        t.pose = Some(*pose);
                        trials.push(t);
                    }
                }
            }
        }
    } else {
        let scenes = spec.scenes.unwrap_or(DEFAULT_SCENES);
        let reps = spec
            .reps
            .unwrap_or(if bm == Benchmark::III { 1 } else { DEFAULT_REPS });
        let classes: Vec<String> = match (bm, task) {
            (Benchmark::III, _) => vec![MaterialId::Standard.name().into()],
            (_, 3) => vec![MIXED.into()],
            _ => spec.classes().iter().map(|c| c.name().to_owned()).collect(),
        };
        for class in classes {
            let code = class_code(&class);
            for si in 0..scenes {
                let coords = [code, si as u64];
                let scene_seed = derive(master, &[stream::SCENE, bm.index(), u64::from(task), code, si as u64]);
                for rep in 0..reps {
                    let mut t = base(class.clone(), scene_seed, &coords, rep);
                    t.scene_index = Some(si);
                    trials.push(t);
                }
            }
        }
    }
    for (i, t) in trials.iter_mut().enumerate() {
        t.trial = i;
    }
    Ok(TrialPlan {
        spec: spec.clone(),
        poses,
        trials,
    })
}

fn yaw_of(q: &UnitQuaternion<f64>) -> f64 {
    let x = q * Vector3::x();
    x.y.atan2(x.x)
}

/// Top-down grasp through the object center, closing across its narrowest
/// footprint direction, or the perpendicular one. Among the equivalent
/// wrist yaws the one nearest the home yaw is used.
pub fn object_grasp(spec: &ObjectSpec, pose: &Pose, alternate: bool) -> Pose {
    let symmetry = spec.shape.yaw_symmetry();
    let yaw = if symmetry <= 0.0 {
        PI
    } else {
        let y0 = yaw_of(&pose.orientation)
            + spec.shape.narrowest_yaw()
            + if alternate { FRAC_PI_2 } else { 0.0 };
        let n = (2.0 * PI / symmetry).round() as usize;
        (0..n)
            .flat_map(|k| [0.0, PI].map(|m| wrap_angle(y0 + k as f64 * symmetry + m)))
            .min_by(|a, b| {
                wrap_angle(a - PI)
                    .abs()
                    .total_cmp(&wrap_angle(b - PI).abs())
                    .then(a.total_cmp(b))
            })
            .expect("at least one yaw")
    };
    Pose::new(pose.position, top_down(yaw))
}

/// Waypoints at the transport height along an arc around the base. Carrying
/// in a straight line between distant table points would cut through the
/// region the arm cannot reach at that height.
pub fn transit_via(from: &Vector3<f64>, to: &Vector3<f64>, orientation: &UnitQuaternion<f64>) -> Vec<Pose> {
    let a0 = from.y.atan2(from.x);
    let sweep = wrap_angle(to.y.atan2(to.x) - a0);
    let n = (sweep.abs() / VIA_STEP).ceil().max(1.0) as usize;
    (0..=n)
        .map(|k| {
            let a = a0 + sweep * k as f64 / n as f64;
            Pose::new(
                Vector3::new(VIA_RADIUS * a.cos(), VIA_RADIUS * a.sin(), TRANSPORT_Z),
                *orientation,
            )
        })
        .collect()
}

/// Per-tick trace for observers of a running trial.
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub tick: u64,
    pub input: MasterInput,
    /// Mode the control law ran in.
    pub mode: Mode,
    pub s: f64,
    pub output: ControlOutput,
    pub trajectory: Option<Trajectory>,
}

/// A trial in progress. Scripted runs and live sessions both drive it one
/// tick at a time.
#[derive(Debug, Clone)]
pub struct TrialRunner {
    setup: TrialSetup,
    env: Environment,
    world: WorldState,
    ctrl: ControllerState,
    candidates: Vec<GraspCandidate>,
    cloud: Option<PointCloud>,
    version: u64,
    perceived: Option<Vec<(usize, [u64; 3])>>,
    events: Vec<Event>,
    attempts: Vec<u32>,
    abandoned: Vec<bool>,
    active: Option<usize>,
    attach_ee: Option<Pose>,
    zone: Option<usize>,
    unreachable: bool,
    first_failure: Option<Outcome>,
    outcome: Option<Outcome>,
    completion: Option<f64>,
}

impl TrialRunner {
    pub fn new(setup: TrialSetup) -> Result<Self, BenchError> {
        if !(setup.t_max >= 0.0 && setup.dt > 0.0) {
            return Err(BenchError::Config("t_max and dt must be positive".into()));
        }
        let scene = setup.build_scene()?;
        let env = Environment::new(scene);
        let world = WorldState::initial(&env, setup.dt);
        let n = env.scene.objects.len();
        let ctrl = ControllerState::new(setup.controller, setup.params.gains);
        let mut runner = TrialRunner {
            setup,
            env,
            world,
            ctrl,
            candidates: Vec::new(),
            cloud: None,
            version: 0,
            perceived: None,
            events: Vec::new(),
            attempts: vec![0; n],
            abandoned: vec![false; n],
            active: None,
            attach_ee: None,
            zone: None,
            unreachable: false,
            first_failure: None,
            outcome: None,
            completion: None,
        };
        runner.log(
            EventKind::TrialStart,
            None,
            json!({ "scene_seed": runner.setup.scene_seed, "objects": n }),
        );
        if runner.env.scene.presentation == Presentation::Sequential && n > 0 {
            runner.log(EventKind::Present, Some(0), serde_json::Value::Null);
        }
        runner.update_active();
        runner.refresh_suggestions();
        Ok(runner)
    }

    pub fn setup(&self) -> &TrialSetup {
        &self.setup
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn controller(&self) -> &ControllerState {
        &self.ctrl
    }

    pub fn candidates(&self) -> &[GraspCandidate] {
        &self.candidates
    }

    /// The preprocessed cloud behind the current suggestions.
    pub fn cloud(&self) -> Option<&PointCloud> {
        self.cloud.as_ref()
    }

    pub fn suggestion_version(&self) -> u64 {
        self.version
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_finished(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    fn now(&self) -> (u64, f64) {
        (self.world.tick, self.world.time())
    }

    /// Appends an event at the current tick.
    pub fn log(&mut self, kind: EventKind, object: Option<usize>, payload: serde_json::Value) {
        let (tick, t) = self.now();
        self.events.push(Event {
            tick,
            t,
            kind,
            object,
            payload,
        });
    }

    fn finish(&mut self, outcome: Outcome, kind: EventKind, payload: serde_json::Value) {
        if self.outcome.is_some() {
            return;
        }
        self.close_zone();
        self.log(kind, None, payload);
        if outcome == Outcome::Success {
            self.completion = Some(self.world.time());
        }
        self.outcome = Some(outcome);
    }

    /// Ends the trial without a result.
    pub fn abort(&mut self) {
        self.finish(Outcome::Aborted, EventKind::Abort, serde_json::Value::Null);
    }

    fn single(&self) -> bool {
        self.setup.benchmark.is_single_object(self.setup.task)
    }

    fn update_active(&mut self) {
        if let Some(i) = self.world.held() {
            self.active = Some(i);
            return;
        }
        let ok = |w: &WorldState, i: usize| w.objects[i].status == ObjectStatus::Resting;
        if self.active.is_some_and(|i| ok(&self.world, i) && !self.abandoned[i]) {
            return;
        }
        let ee = self.world.ee.position;
        self.active = (0..self.world.objects.len())
            .filter(|&i| ok(&self.world, i) && !self.abandoned[i])
            .min_by(|&a, &b| {
                let d = |i: usize| (self.world.objects[i].pose.position - ee).xy().norm();
                d(a).total_cmp(&d(b)).then(a.cmp(&b))
            });
    }

    fn signature(&self) -> Vec<(usize, [u64; 3])> {
        self.world
            .objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.status == ObjectStatus::Resting)
            .map(|(i, o)| (i, o.pose.position.map(f64::to_bits).into()))
            .collect()
    }

    /// Re-runs perception when the objects on the table changed and the
    /// gripper is free.
    fn refresh_suggestions(&mut self) {
        if self.setup.controller != ControllerKind::Shared
            || self.world.held().is_some()
            || self.world.gripper.closed
        {
            return;
        }
        let sig = self.signature();
        if self.perceived.as_ref() == Some(&sig) {
            return;
        }
        self.perceived = Some(sig);
        let seed = derive(self.setup.camera_seed, &[self.version]);
        let cloud = capture_cloud(
            &self.env,
            &self.world,
            &DepthCamera::default(),
            &default_view(),
            seed,
        );
        let cloud = preprocess(&cloud);
        self.candidates = plan_scene(&cloud, &self.env.gripper);
        self.version += 1;
        self.ctrl.on_suggestions(&self.candidates);
        let count = self.candidates.len();
        let best = self.candidates.first().map(|c| c.id.clone());
        self.log(
            EventKind::Suggestion,
            None,
            json!({ "version": self.version, "count": count, "points": cloud.len(), "best": best }),
        );
        self.cloud = Some(cloud);
    }

    fn place_goal(&self, i: usize, grasp: &Pose, relative: &Pose) -> PlaceGoal {
        let spec = self.env.object(i);
        match self.setup.benchmark {
            Benchmark::I => PlaceGoal::Lift {
                pose: Pose::new(grasp.position + Vector3::z() * LIFT_TARGET, grasp.orientation),
            },
            Benchmark::II => {
                let b = &self.env.scene.basket;
                let c = b.center();
                let above = Pose::new(Vector3::new(c.x, c.y, b.max.z + 0.06), grasp.orientation);
                PlaceGoal::Basket {
                    transport_z: TRANSPORT_Z,
                    via: transit_via(&grasp.position, &above.position, &above.orientation),
                    above,
                }
            }
            Benchmark::III => {
                let board = self.env.scene.peg_board.as_ref().expect("assembly scenes have a board");
                let hole = spec
                    .peg
                    .and_then(|p| board.hole_for(p))
                    .map_or(board.pose.position, |h| h.center);
                // Object yaw snapped to the nearest hole-aligned yaw.
                let obj = grasp.compose(relative);
                let board_yaw = yaw_of(&board.pose.orientation);
                let sym = spec.shape.yaw_symmetry();
                let yaw = yaw_of(&obj.orientation);
                let target_yaw = if sym > 0.0 {
                    board_yaw + ((yaw - board_yaw) / sym).round() * sym
                } else {
                    yaw
                };
                let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), target_yaw);
                let half = spec.shape.half_height();
                let at = |z: f64| {
                    Pose::new(Vector3::new(hole.x, hole.y, z), q).compose(&relative.inverse())
                };
                let above = at(board.top() + half + 0.03);
                PlaceGoal::Hole {
                    transport_z: TRANSPORT_Z,
                    via: transit_via(&grasp.position, &above.position, &above.orientation),
                    above,
                    inserted: at(board.top() - 0.01),
                }
            }
        }
    }

    fn task_view(&self) -> Option<TaskView> {
        if let Some(att) = self.world.attachment {
            let i = att.object;
            let grasp = self.attach_ee.unwrap_or(self.world.ee);
            return Some(TaskView {
                object: i,
                grasp,
                alternate_grasp: grasp,
                place: self.place_goal(i, &grasp, &att.relative),
            });
        }
        let i = self.active?;
        let spec = self.env.object(i);
        let pose = &self.world.objects[i].pose;
        let grasp = object_grasp(spec, pose, false);
        Some(TaskView {
            object: i,
            grasp,
            alternate_grasp: object_grasp(spec, pose, true),
            place: self.place_goal(i, &grasp, &grasp.inverse().compose(pose)),
        })
    }

    /// What the operator sees before deciding.
    pub fn observation(&self) -> Observation {
        Observation {
            t: self.world.time(),
            ee: self.world.ee,
            gripper_closed: self.world.gripper.closed,
            holding: self.world.held().is_some(),
            mode: self.ctrl.mode,
            s: self.ctrl.s,
            candidates: self.candidates.clone(),
            suggestion_version: self.version,
            task: self.task_view(),
        }
    }

    /// Zone target of the current phase: the object center before a grasp,
    /// the hole while carrying a peg.
    fn zone_target(&self) -> Option<(usize, Vector3<f64>, Vector3<f64>)> {
        match (self.setup.benchmark, self.world.attachment) {
            (Benchmark::III, Some(att)) => {
                let i = att.object;
                let board = self.env.scene.peg_board.as_ref()?;
                let hole = board.hole_for(self.env.object(i).peg?)?;
                let target = Vector3::new(hole.center.x, hole.center.y, board.top());
                Some((i, self.world.objects[i].pose.position, target))
            }
            (Benchmark::III, None) | (_, Some(_)) => None,
            (_, None) => {
                let i = self.active?;
                Some((i, self.world.ee.position, self.world.objects[i].pose.position))
            }
        }
    }

    fn close_zone(&mut self) {
        if let Some(i) = self.zone.take() {
            self.log(EventKind::ExitAlignZone, Some(i), serde_json::Value::Null);
        }
    }

    fn track_zone(&mut self) {
        let r = self.setup.params.align_radius;
        let inside = self
            .zone_target()
            .filter(|(_, p, target)| (p - target).norm() < r)
            .map(|(i, _, _)| i);
        if self.zone.is_some() && self.zone != inside {
            self.close_zone();
        }
        if self.zone.is_none() {
            if let Some(i) = inside {
                self.zone = Some(i);
                self.log(EventKind::EnterAlignZone, Some(i), serde_json::Value::Null);
            }
        }
    }

    fn present_next(&mut self) {
        if self.env.scene.presentation != Presentation::Sequential {
            return;
        }
        if let Some(j) = self
            .world
            .objects
            .iter()
            .position(|o| o.status == ObjectStatus::Hidden)
        {
            self.world.present(j);
            self.log(EventKind::Present, Some(j), serde_json::Value::Null);
        }
    }

    fn fail_attempt(&mut self, i: usize) {
        self.attempts[i] += 1;
        if self.attempts[i] < MAX_ATTEMPTS || self.abandoned[i] {
            return;
        }
        self.abandoned[i] = true;
        self.log(
            EventKind::Abandon,
            Some(i),
            json!({ "attempts": self.attempts[i] }),
        );
        if self.single() {
            self.finish(Outcome::FailureMiss, EventKind::Failure, json!({ "reason": "miss" }));
            return;
        }
        self.first_failure.get_or_insert(Outcome::FailureMiss);
        // A failed object is taken out of play so the scene can continue.
        if self.world.objects[i].status == ObjectStatus::Resting {
            self.world.objects[i].status = ObjectStatus::Removed;
        }
        self.present_next();
    }

    fn lost(&mut self, i: usize, reason: &str) {
        if self.single() {
            self.finish(Outcome::FailureSlip, EventKind::Failure, json!({ "reason": reason }));
            return;
        }
        if self.world.objects[i].status == ObjectStatus::Dropped {
            self.first_failure.get_or_insert(Outcome::FailureSlip);
            self.present_next();
        } else {
            self.fail_attempt(i);
        }
    }

    fn record_world_event(&mut self, e: &WorldEvent) {
        let null = serde_json::Value::Null;
        match e {
            WorldEvent::GripperClose => {
                // Closing the gripper ends an alignment interval.
                if self.setup.benchmark != Benchmark::III {
                    self.zone = None;
                }
                self.log(EventKind::GripperClose, None, null);
            }
            WorldEvent::GripperOpen => self.log(EventKind::GripperOpen, None, null),
            WorldEvent::Attach { object } => {
                self.log(EventKind::Attach, Some(*object), null);
                self.ctrl.on_attach();
                self.attach_ee = Some(self.world.ee);
            }
            WorldEvent::Miss { object } => {
                self.log(EventKind::Miss, *object, null);
                if let Some(i) = object.or(self.active) {
                    self.fail_attempt(i);
                }
            }
            WorldEvent::Collision { object, other } => {
                self.log(EventKind::Collision, Some(*object), json!({ "other": other }));
                self.fail_attempt(*object);
            }
            WorldEvent::Slip { object, height } => {
                self.log(EventKind::Slip, Some(*object), json!({ "height": height }));
                self.attach_ee = None;
                self.lost(*object, "slip");
            }
            WorldEvent::Release { object } => {
                self.attach_ee = None;
                self.log(EventKind::Release, Some(*object), null);
            }
            WorldEvent::Drop { object } => {
                self.log(EventKind::Drop, Some(*object), null);
                self.lost(*object, "drop");
            }
            WorldEvent::Place { object } => self.log(EventKind::Place, Some(*object), null),
            WorldEvent::Insert { object } => {
                self.close_zone();
                self.log(EventKind::Insert, Some(*object), null);
                self.present_next();
            }
            WorldEvent::Contact { surface } => {
                self.log(EventKind::Contact, None, json!({ "surface": surface }))
            }
            WorldEvent::Unreachable { position_error } => {
                if !self.unreachable {
                    self.log(
                        EventKind::Unreachable,
                        None,
                        json!({ "position_error": position_error }),
                    );
                }
            }
        }
    }

    fn all_resolved(&self) -> bool {
        self.world.objects.iter().all(|o| {
            matches!(
                o.status,
                ObjectStatus::InBasket
                    | ObjectStatus::Inserted
                    | ObjectStatus::Dropped
                    | ObjectStatus::Removed
            )
        })
    }

    /// Binds the shared controller to candidate `id`. Returns false when the
    /// selection was ignored.
    pub fn select(&mut self, id: &str) -> bool {
        if self.is_finished()
            || self.ctrl.kind != ControllerKind::Shared
            || self.world.held().is_some()
        {
            return false;
        }
        match select_trajectory(&self.ctrl, &self.candidates, id) {
            Ok(next) => {
                self.ctrl = next;
                self.log(EventKind::Select, None, json!({ "candidate": id }));
                true
            }
            Err(_) => false,
        }
    }

    /// Advances one control tick with `input` as the master command.
    pub fn step(&mut self, input: &MasterInput) -> Option<StepInfo> {
        if self.is_finished() {
            return None;
        }
        if let Some(id) = &input.select_candidate {
            self.select(id);
        }
        let mode = self.ctrl.mode;
        let trajectory = self.ctrl.trajectory.clone();
        let dt = self.setup.dt;
        let output = self.ctrl.step(input, &self.world.ee, dt);
        let (next, events) = step_world(&self.world, &self.env, &output.desired, output.gripper, dt);
        self.world = next;
        self.ctrl.gripper_closed = self.world.gripper.closed;
        let unreachable = events
            .iter()
            .any(|e| matches!(e, WorldEvent::Unreachable { .. }));
        for e in &events {
            self.record_world_event(e);
        }
        self.unreachable = unreachable;
        if !self.is_finished() {
            self.update_active();
            self.track_zone();
            self.refresh_suggestions();
            self.check_terminal();
        }
        Some(StepInfo {
            tick: self.world.tick,
            input: input.clone(),
            mode,
            s: self.ctrl.s,
            output,
            trajectory,
        })
    }

    fn check_terminal(&mut self) {
        let (bm, task) = (self.setup.benchmark, self.setup.task);
        if goal_check(bm, task, &self.world, &self.env.scene) {
            self.finish(Outcome::Success, EventKind::Goal, serde_json::Value::Null);
        } else if !self.single() && self.all_resolved() {
            let outcome = self.first_failure.unwrap_or(Outcome::FailureMiss);
            self.finish(outcome, EventKind::Failure, json!({ "reason": "objects_lost" }));
        } else if self.world.time() >= self.setup.t_max - 1e-9 {
            self.finish(Outcome::FailureTimeout, EventKind::Timeout, serde_json::Value::Null);
        }
    }

    fn objects_done(&self) -> usize {
        match self.setup.benchmark {
            Benchmark::I => usize::from(self.outcome == Some(Outcome::Success)),
            Benchmark::II => self
                .world
                .objects
                .iter()
                .filter(|o| self.env.scene.basket.contains(&o.pose.position) && o.status == ObjectStatus::InBasket)
                .count(),
            Benchmark::III => {
                let Some(board) = &self.env.scene.peg_board else {
                    return 0;
                };
                self.world
                    .objects
                    .iter()
                    .zip(&self.env.scene.objects)
                    .filter(|(o, p)| o.status == ObjectStatus::Inserted && inserted_in(&p.object, &o.pose, board))
                    .count()
            }
        }
    }

    /// The trial record. Unfinished trials are recorded as aborted.
    pub fn into_record(mut self) -> TrialRecord {
        if !self.is_finished() {
            self.abort();
        }
        let s = &self.setup;
        TrialRecord {
            schema: TRIAL_SCHEMA.into(),
            trial: s.trial,
            benchmark: s.benchmark,
            task: s.task,
            class: s.class.clone(),
            object: s.object.clone(),
            object_index: s.object_index,
            pose: s.pose,
            pose_index: s.pose_index,
            scene_index: s.scene_index,
            rep: s.rep,
            controller: s.controller.name().into(),
            operator: s.operator.name().into(),
            master_seed: s.master_seed,
            scene_seed: s.scene_seed,
            operator_seed: s.operator_seed,
            camera_seed: s.camera_seed,
            dt: s.dt,
            t_max: s.t_max,
            params: s.params.clone(),
            objects_total: self.world.objects.len(),
            objects_done: self.objects_done(),
            outcome: self.outcome.expect("finished above"),
            completion_time: self.completion,
            events: self.events,
        }
    }
}

/// Runs a scripted trial to completion.
pub fn run_trial(setup: &TrialSetup) -> Result<TrialRecord, BenchError> {
    run_trial_observed(setup, |_, _| {})
}

/// Runs a scripted trial, calling `observer` after every tick.
pub fn run_trial_observed<F>(setup: &TrialSetup, mut observer: F) -> Result<TrialRecord, BenchError>
where
    F: FnMut(&TrialRunner, &StepInfo),
{
    let mut params = setup.params.operator;
    params.seed = setup.operator_seed;
    let mut operator = Operator::new(setup.operator, params, setup.dt)
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let mut runner = TrialRunner::new(setup.clone())?;
    while !runner.is_finished() {
        let input = operator.act(&runner.observation());
        if let Some(info) = runner.step(&input) {
            observer(&runner, &info);
        }
    }
    Ok(runner.into_record())
}

/// Runs every trial of `plan` in plan order, handing each batch of records
/// to `sink` as soon as it is complete.
pub fn run_plan<F>(plan: &TrialPlan, mut sink: F) -> Result<Vec<TrialRecord>, BenchError>
where
    F: FnMut(&[TrialRecord]) -> Result<(), BenchError>,
{
    let mut out = Vec::with_capacity(plan.len());
    for chunk in plan.trials.chunks(BATCH) {
        let results: Vec<Result<TrialRecord, BenchError>> = chunk.par_iter().map(run_trial).collect();
        let mut batch = Vec::with_capacity(chunk.len());
        let mut failure = None;
        for r in results {
            match r {
                Ok(rec) => batch.push(rec),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        sink(&batch)?;
        out.extend(batch);
        if let Some(e) = failure {
            return Err(e);
        }
    }
    Ok(out)
}

pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<Vec<TrialRecord>, BenchError> {
    run_plan(&plan(spec)?, |_| Ok(()))
}

/// Output file locations of a benchmark run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub plan: PathBuf,
    pub records: PathBuf,
    pub report: PathBuf,
}

impl OutputPaths {
    pub fn in_dir(dir: &Path) -> Self {
        OutputPaths {
            plan: dir.join("plan.json"),
            records: dir.join("records.jsonl"),
            report: dir.join("report.csv"),
        }
    }
}

pub fn write_report(records: &[TrialRecord], path: &Path) -> Result<(), BenchError> {
    let csv = aggregate(records)?.to_csv();
    fs::write(path, csv).map_err(io_err(path))
}

/// Runs `spec` and writes plan, records and report into `dir`. Records are
/// appended batch by batch so partial results survive a failure.
pub fn run_to_dir(spec: &BenchmarkSpec, dir: &Path) -> Result<Vec<TrialRecord>, BenchError> {
    let plan = plan(spec)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let paths = OutputPaths::in_dir(dir);
    let text = serde_json::to_string_pretty(&plan).expect("plans serialize");
    fs::write(&paths.plan, text + "\n").map_err(io_err(&paths.plan))?;
    File::create(&paths.records).map_err(io_err(&paths.records))?;
    let records = run_plan(&plan, |batch| {
        let mut f = OpenOptions::new()
            .append(true)
            .open(&paths.records)
            .map_err(io_err(&paths.records))?;
        let mut buf = String::new();
        for r in batch {
            buf.push_str(&r.to_json_line());
            buf.push('\n');
        }
        f.write_all(buf.as_bytes()).map_err(io_err(&paths.records))
    })?;
    write_report(&records, &paths.report)?;
    Ok(records)
}

/// Result of re-simulating a recorded trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub trial: usize,
    /// Index of the first differing event, if any.
    pub first_divergence: Option<usize>,
    pub identical: bool,
}

pub fn replay(record: &TrialRecord) -> Result<Replay, BenchError> {
    let setup = TrialSetup::from_record(record)?;
    let again = run_trial(&setup)?;
    let a = record
        .events
        .iter()
        .map(|e| serde_json::to_string(e).expect("events serialize"));
    let b: Vec<String> = again
        .events
        .iter()
        .map(|e| serde_json::to_string(e).expect("events serialize"))
        .collect();
    let first_divergence = a
        .clone()
        .zip(&b)
        .position(|(x, y)| &x != y)
        .or_else(|| (record.events.len() != b.len()).then(|| record.events.len().min(b.len())));
    Ok(Replay {
        trial: record.trial,
        first_divergence,
        identical: again.to_json_line() == record.to_json_line(),
    })
}

/// Ensures events carry times that are whole ticks.
pub fn on_tick_grid(record: &TrialRecord) -> bool {
    record
        .events
        .iter()
        .all(|e| (e.t - e.tick as f64 * record.dt).abs() < 1e-9)
}
