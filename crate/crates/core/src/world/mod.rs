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
//! Benchmark worlds: object datasets, scene generation, quasi-static physics
//! and goal predicates.

mod physics;
mod shape;

pub use physics::*;
pub use shape::Shape;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose;

pub const SCENE_SCHEMA: &str = "scene.v1";

/// Inner and outer radius of the object spawn annulus around the arm base.
pub const WORKSPACE_RADIUS: (f64, f64) = (0.4, 0.7);
/// Half-angle of the spawn sector in front of the arm, radians.
pub const WORKSPACE_HALF_ANGLE: f64 = PI / 6.0;
pub const MIN_SPAWN_SPACING: f64 = 0.05;
/// Extra clearance between footprints of simultaneously present objects.
pub const SPAWN_MARGIN: f64 = 0.02;
pub const MAX_PLACEMENT_REJECTIONS: usize = 10_000;
/// Consecutive rejections of one object before the clutter layout restarts.
pub const PLACEMENT_RESTART_AFTER: usize = 200;
pub const DEFAULT_SPRING_K: f64 = 120.0;
pub const CLUTTER_SIZE: usize = 10;
/// Center of the region where assembly pegs are presented.
pub const PRESENTATION_CENTER: [f64; 2] = [0.55, 0.1];
pub const PRESENTATION_RADIUS: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("no collision-free placement after {rejections} rejections (seed {seed})")]
    PlacementFailure { seed: u64, rejections: usize },
    #[error("invalid benchmark/task combination: {0}")]
    InvalidCombination(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("gripper already holds object {0}")]
    AlreadyHolding(usize),
    #[error("scene schema mismatch: expected {expected}, found {found}")]
    SchemaVersionMismatch { expected: String, found: String },
    #[error("scene parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, WorldError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Benchmark {
    I,
    II,
    III,
}

impl Benchmark {
    pub fn index(self) -> u64 {
        match self {
            Benchmark::I => 1,
            Benchmark::II => 2,
            Benchmark::III => 3,
        }
    }

    pub fn valid_task(self, task: u8) -> bool {
        match self {
            Benchmark::I | Benchmark::III => task == 1,
            Benchmark::II => (1..=3).contains(&task),
        }
    }

    /// Material classes of the benchmark's dataset.
    pub fn classes(self) -> &'static [MaterialId] {
        match self {
            Benchmark::I => &[
                MaterialId::Standard,
                MaterialId::Transparent,
                MaterialId::ShinySlippery,
            ],
            Benchmark::II => &[
                MaterialId::SoftDeformable,
                MaterialId::MetallicSlippery,
                MaterialId::Composed,
            ],
            Benchmark::III => &[MaterialId::Standard],
        }
    }

    pub fn is_clutter(self, task: u8) -> bool {
        self == Benchmark::II && task >= 2
    }

    pub fn is_single_object(self, task: u8) -> bool {
        self == Benchmark::I || (self == Benchmark::II && task == 1)
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Benchmark::I => "I",
            Benchmark::II => "II",
            Benchmark::III => "III",
        })
    }
}

impl FromStr for Benchmark {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "I" | "1" => Ok(Benchmark::I),
            "II" | "2" => Ok(Benchmark::II),
            "III" | "3" => Ok(Benchmark::III),
            other => Err(format!("unknown benchmark {other:?} (expected I, II or III)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialId {
    Standard,
    Transparent,
    ShinySlippery,
    SoftDeformable,
    MetallicSlippery,
    Composed,
}

impl MaterialId {
    pub const ALL: [MaterialId; 6] = [
        MaterialId::Standard,
        MaterialId::Transparent,
        MaterialId::ShinySlippery,
        MaterialId::SoftDeformable,
        MaterialId::MetallicSlippery,
        MaterialId::Composed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MaterialId::Standard => "standard",
            MaterialId::Transparent => "transparent",
            MaterialId::ShinySlippery => "shiny_slippery",
            MaterialId::SoftDeformable => "soft_deformable",
            MaterialId::MetallicSlippery => "metallic_slippery",
            MaterialId::Composed => "composed",
        }
    }

    pub fn index(self) -> u64 {
        MaterialId::ALL.iter().position(|m| *m == self).unwrap() as u64
    }
}

impl fmt::Display for MaterialId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MaterialId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        MaterialId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown material class {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialClass {
    pub id: MaterialId,
    pub friction_mu: f64,
    pub dropout_p: f64,
    pub depth_noise_sigma: f64,
    pub grasp_tolerance_scale: f64,
}

impl MaterialClass {
    pub fn new(
        id: MaterialId,
        friction_mu: f64,
        dropout_p: f64,
        depth_noise_sigma: f64,
        grasp_tolerance_scale: f64,
    ) -> Result<Self> {
        let m = MaterialClass {
            id,
            friction_mu,
            dropout_p,
            depth_noise_sigma,
            grasp_tolerance_scale,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=2.0).contains(&self.friction_mu)
            && (0.0..=1.0).contains(&self.dropout_p)
            && self.depth_noise_sigma >= 0.0
            && self.grasp_tolerance_scale >= 1.0;
        if ok {
            Ok(())
        } else {
            Err(WorldError::InvalidScene(format!(
                "material {} parameters out of range",
                self.id
            )))
        }
    }

    /// Default surrogate parameters for each class.
    pub fn of(id: MaterialId) -> Self {
        let (mu, drop, sigma, scale) = match id {
            MaterialId::Standard => (0.8, 0.02, 0.001, 1.0),
            MaterialId::Transparent => (0.8, 0.7, 0.003, 1.0),
            MaterialId::ShinySlippery => (0.2, 0.3, 0.005, 1.0),
            MaterialId::SoftDeformable => (0.3, 0.05, 0.002, 2.0),
            MaterialId::MetallicSlippery => (0.15, 0.4, 0.005, 1.0),
            MaterialId::Composed => (0.5, 0.1, 0.002, 1.0),
        };
        MaterialClass {
            id,
            friction_mu: mu,
            dropout_p: drop,
            depth_noise_sigma: sigma,
            grasp_tolerance_scale: scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PegShape {
    Square,
    Circle,
    Triangle,
    Hexagon,
}

impl PegShape {
    pub const ALL: [PegShape; 4] = [
        PegShape::Square,
        PegShape::Circle,
        PegShape::Triangle,
        PegShape::Hexagon,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spring {
    /// N/m
    pub stiffness: f64,
    pub anchor: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub shape: Shape,
    /// kg
    pub mass: f64,
    pub material: MaterialClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spring: Option<Spring>,
    /// Which peg-board hole the object belongs to, for assembly objects.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peg: Option<PegShape>,
}

impl ObjectSpec {
    fn new(name: &str, shape: Shape, mass: f64, material: MaterialId) -> Self {
        ObjectSpec {
            name: name.to_owned(),
            shape,
            mass,
            material: MaterialClass::of(material),
            spring: None,
            peg: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.shape.dimensions_valid() {
            return Err(WorldError::InvalidScene(format!(
                "{}: dimensions must be positive",
                self.name
            )));
        }
        if !(self.mass > 0.0) {
            return Err(WorldError::InvalidScene(format!(
                "{}: mass must be positive",
                self.name
            )));
        }
        if let Some(s) = &self.spring {
            if !(s.stiffness >= 0.0) {
                return Err(WorldError::InvalidScene(format!(
                    "{}: spring stiffness must be non-negative",
                    self.name
                )));
            }
        }
        self.material.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperSpec {
    pub max_opening: f64,
    /// Closing force, N.
    pub closing_force: f64,
    /// Box swept by the fingers in the grasp frame: closing axis, lateral,
    /// approach.
    pub finger_sweep: [f64; 3],
}

impl Default for GripperSpec {
    fn default() -> Self {
        GripperSpec {
            max_opening: 0.08,
            closing_force: 40.0,
            finger_sweep: [0.10, 0.02, 0.05],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn contains_xy(&self, p: &Vector3<f64>) -> bool {
        (0..2).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn center(&self) -> Vector3<f64> {
        (self.min + self.max) * 0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl TableSpec {
    pub fn contains_xy(&self, p: &Vector3<f64>) -> bool {
        p.x >= self.x[0] && p.x <= self.x[1] && p.y >= self.y[0] && p.y <= self.y[1]
    }
}

impl Default for TableSpec {
    fn default() -> Self {
        TableSpec {
            x: [-0.3, 0.9],
            y: [-0.8, 0.8],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    pub shape: PegShape,
    pub center: Vector3<f64>,
    pub clearance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PegBoard {
    /// Center of the board's top surface.
    pub pose: Pose,
    /// Footprint along x and y.
    pub size: [f64; 2],
    pub thickness: f64,
    pub holes: Vec<Hole>,
}

impl PegBoard {
    pub fn top(&self) -> f64 {
        self.pose.position.z
    }

    pub fn hole_for(&self, shape: PegShape) -> Option<&Hole> {
        self.holes.iter().find(|h| h.shape == shape)
    }

    pub fn covers_xy(&self, p: &Vector3<f64>, margin: f64) -> bool {
        let c = self.pose.position;
        (p.x - c.x).abs() <= self.size[0] / 2.0 + margin
            && (p.y - c.y).abs() <= self.size[1] / 2.0 + margin
    }

    /// Board used by the assembly benchmark: four holes in a row, 4 mm
    /// clearance, 2 cm thick, top surface 10 cm above the table.
    pub fn standard() -> Self {
        let center = Vector3::new(0.35, -0.5, 0.10);
        let holes = PegShape::ALL
            .iter()
            .enumerate()
            .map(|(i, shape)| Hole {
                shape: *shape,
                center: center + Vector3::new(-0.12 + 0.08 * i as f64, 0.0, 0.0),
                clearance: 0.004,
            })
            .collect();
        PegBoard {
            pose: Pose::new(center, UnitQuaternion::identity()),
            size: [0.36, 0.12],
            thickness: 0.02,
            holes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub object: ObjectSpec,
    pub pose: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Presentation {
    /// All objects are on the table from the start.
    Simultaneous,
    /// Objects are presented one after another at their spawn poses.
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub schema: String,
    pub benchmark: Benchmark,
    pub task: u8,
    /// Material class name, or `mixed` for cross-class clutter.
    pub class: String,
    pub seed: u64,
    pub table: TableSpec,
    pub objects: Vec<PlacedObject>,
    pub basket: Aabb,
    pub peg_board: Option<PegBoard>,
    pub presentation: Presentation,
}

pub fn default_basket() -> Aabb {
    Aabb {
        min: Vector3::new(-0.075, 0.45, 0.0),
        max: Vector3::new(0.175, 0.65, 0.15),
    }
}

impl SceneSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| WorldError::Parse(e.to_string()))?;
        let found = raw
            .get("schema")
            .and_then(|v| v.as_str())
            .unwrap_or("")
            .to_owned();
        if found != SCENE_SCHEMA {
            return Err(WorldError::SchemaVersionMismatch {
                expected: SCENE_SCHEMA.into(),
                found,
            });
        }
        let scene: SceneSpec =
            serde_json::from_value(raw).map_err(|e| WorldError::Parse(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.benchmark.valid_task(self.task) {
            return Err(WorldError::InvalidCombination(format!(
                "benchmark {} has no task {}",
                self.benchmark, self.task
            )));
        }
        for placed in &self.objects {
            placed.object.validate()?;
            let p = placed.pose.position;
            if !self.table.contains_xy(&p) {
                return Err(WorldError::InvalidScene(format!(
                    "{} lies outside the table",
                    placed.object.name
                )));
            }
            if p.z - placed.object.shape.half_height() < -1e-9 {
                return Err(WorldError::InvalidScene(format!(
                    "{} penetrates the table",
                    placed.object.name
                )));
            }
        }
        if self.presentation == Presentation::Simultaneous {
            for (i, a) in self.objects.iter().enumerate() {
                for b in &self.objects[i + 1..] {
                    let d = horizontal_distance(&a.pose.position, &b.pose.position);
                    if d < MIN_SPAWN_SPACING {
                        return Err(WorldError::InvalidScene(format!(
                            "{} and {} spawn {d:.3} m apart",
                            a.object.name, b.object.name
                        )));
                    }
                }
            }
        }
        if basket_intersects_spawn_region(&self.basket) {
            return Err(WorldError::InvalidScene(
                "basket overlaps the object spawn region".into(),
            ));
        }
        Ok(())
    }
}

fn horizontal_distance(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

pub fn in_spawn_region(p: &Vector3<f64>) -> bool {
    let r = (p.x * p.x + p.y * p.y).sqrt();
    let angle = p.y.atan2(p.x);
    r >= WORKSPACE_RADIUS.0 && r <= WORKSPACE_RADIUS.1 && angle.abs() <= WORKSPACE_HALF_ANGLE
}

fn basket_intersects_spawn_region(basket: &Aabb) -> bool {
    // Grid test over the basket footprint; the basket is small against the
    // 1 cm grid used here.
    let steps = 20;
    (0..=steps).any(|i| {
        (0..=steps).any(|j| {
            let x = basket.min.x + (basket.max.x - basket.min.x) * i as f64 / steps as f64;
            let y = basket.min.y + (basket.max.y - basket.min.y) * j as f64 / steps as f64;
            in_spawn_region(&Vector3::new(x, y, 0.0))
        })
    })
}

/// Samples a resting pose uniformly (by area) over the spawn annulus sector,
/// with uniform yaw. The returned pose is at table height.
pub fn sample_workspace_pose<R: Rng>(rng: &mut R) -> Pose {
    let (r0, r1) = WORKSPACE_RADIUS;
    let r = rng.random_range(r0 * r0..=r1 * r1).sqrt();
    let theta = rng.random_range(-WORKSPACE_HALF_ANGLE..=WORKSPACE_HALF_ANGLE);
    let yaw = rng.random_range(-PI / 2.0..PI / 2.0);
    Pose::new(
        Vector3::new(r * theta.cos(), r * theta.sin(), 0.0),
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
    )
}

/// Object datasets per benchmark and material class.
pub fn dataset(benchmark: Benchmark, class: MaterialId) -> Result<Vec<ObjectSpec>> {
    if !benchmark.classes().contains(&class) {
        return Err(WorldError::InvalidCombination(format!(
            "class {class} is not part of benchmark {benchmark}"
        )));
    }
    let cube = |s: f64| Shape::Box { size: [s, s, s] };
    let bx = |x: f64, y: f64, z: f64| Shape::Box { size: [x, y, z] };
    let objects = match benchmark {
        Benchmark::I => {
            let spring = Some(Spring {
                stiffness: DEFAULT_SPRING_K,
                anchor: Vector3::zeros(),
            });
            let mut v = vec![
                ObjectSpec::new("cube_50", cube(0.05), 0.30, class),
                ObjectSpec::new("cube_35", cube(0.035), 0.15, class),
                ObjectSpec::new(
                    "pyramid_50",
                    Shape::Pyramid {
                        base: 0.05,
                        height: 0.05,
                    },
                    0.20,
                    class,
                ),
                ObjectSpec::new("sphere_50", Shape::Sphere { radius: 0.025 }, 0.40, class),
                ObjectSpec::new("sphere_35", Shape::Sphere { radius: 0.0175 }, 0.10, class),
            ];
            for o in &mut v {
                o.spring = spring;
            }
            v
        }
        Benchmark::II => match class {
            MaterialId::SoftDeformable => vec![
                ObjectSpec::new("glove", bx(0.07, 0.04, 0.02), 0.10, class),
                ObjectSpec::new(
                    "wire_coil",
                    Shape::Cylinder {
                        radius: 0.03,
                        height: 0.025,
                    },
                    0.15,
                    class,
                ),
                ObjectSpec::new("tube", bx(0.12, 0.025, 0.025), 0.12, class),
                ObjectSpec::new("sponge", bx(0.06, 0.045, 0.03), 0.10, class),
            ],
            MaterialId::MetallicSlippery => vec![
                ObjectSpec::new("bolt", bx(0.07, 0.02, 0.02), 0.25, class),
                ObjectSpec::new(
                    "nut",
                    Shape::HexagonalPrism {
                        across_flats: 0.035,
                        height: 0.02,
                    },
                    0.15,
                    class,
                ),
                ObjectSpec::new("bracket", bx(0.05, 0.04, 0.015), 0.20, class),
                ObjectSpec::new(
                    "rod",
                    Shape::Cylinder {
                        radius: 0.015,
                        height: 0.06,
                    },
                    0.30,
                    class,
                ),
            ],
            _ => vec![
                ObjectSpec::new("l_joint", bx(0.09, 0.03, 0.03), 0.30, class),
                ObjectSpec::new("bolt_net", Shape::Sphere { radius: 0.032 }, 0.45, class),
                ObjectSpec::new("pipe_tee", bx(0.07, 0.035, 0.035), 0.35, class),
                ObjectSpec::new(
                    "chain_bag",
                    Shape::Cylinder {
                        radius: 0.03,
                        height: 0.03,
                    },
                    0.40,
                    class,
                ),
            ],
        },
        Benchmark::III => PegShape::ALL
            .iter()
            .map(|peg| {
                let (name, shape) = match peg {
                    PegShape::Square => ("peg_square", bx(0.035, 0.035, 0.05)),
                    PegShape::Circle => (
                        "peg_circle",
                        Shape::Cylinder {
                            radius: 0.0175,
                            height: 0.05,
                        },
                    ),
                    PegShape::Triangle => (
                        "peg_triangle",
                        Shape::TriangularPrism {
                            side: 0.04,
                            height: 0.05,
                        },
                    ),
                    PegShape::Hexagon => (
                        "peg_hexagon",
                        Shape::HexagonalPrism {
                            across_flats: 0.035,
                            height: 0.05,
                        },
                    ),
                };
                let mut o = ObjectSpec::new(name, shape, 0.10, class);
                o.peg = Some(*peg);
                o
            })
            .collect(),
    };
    Ok(objects)
}

/// Resting pose for `object` at the horizontal position and yaw of `at`.
pub fn resting_pose(object: &ObjectSpec, at: &Pose) -> Pose {
    Pose::new(
        Vector3::new(at.position.x, at.position.y, object.shape.half_height()),
        at.orientation,
    )
}

fn attach_spring(object: &mut ObjectSpec, pose: &Pose) {
    if let Some(spring) = object.spring.as_mut() {
        spring.anchor = Vector3::new(pose.position.x, pose.position.y, 0.0);
    }
}

/// Scene with a single dataset object at a given table pose. Used by the
/// single-object protocols where poses are drawn once and reused.
pub fn single_object_scene(
    benchmark: Benchmark,
    task: u8,
    class: MaterialId,
    object_index: usize,
    at: &Pose,
    seed: u64,
) -> Result<SceneSpec> {
    if !benchmark.is_single_object(task) {
        return Err(WorldError::InvalidCombination(format!(
            "benchmark {benchmark} task {task} is not a single-object task"
        )));
    }
    let objects = dataset(benchmark, class)?;
    let mut object = objects
        .get(object_index)
        .cloned()
        .ok_or_else(|| WorldError::InvalidScene(format!("no object {object_index}")))?;
    let pose = resting_pose(&object, at);
    attach_spring(&mut object, &pose);
    let scene = SceneSpec {
        schema: SCENE_SCHEMA.into(),
        benchmark,
        task,
        class: class.name().into(),
        seed,
        table: TableSpec::default(),
        objects: vec![PlacedObject { object, pose }],
        basket: default_basket(),
        peg_board: None,
        presentation: Presentation::Simultaneous,
    };
    scene.validate()?;
    Ok(scene)
}

/// Generates a benchmark scene. Deterministic in all arguments. `class` is
/// ignored for the cross-class clutter task and for assembly.
pub fn generate_scene(
    benchmark: Benchmark,
    task: u8,
    class: Option<MaterialId>,
    seed: u64,
) -> Result<SceneSpec> {
    if !benchmark.valid_task(task) {
        return Err(WorldError::InvalidCombination(format!(
            "benchmark {benchmark} has no task {task}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let needs_class = benchmark != Benchmark::III && !(benchmark == Benchmark::II && task == 3);
    let class = match class {
        Some(c) => Some(c),
        None if needs_class => {
            return Err(WorldError::InvalidCombination(format!(
                "benchmark {benchmark} task {task} needs a material class"
            )))
        }
        None => None,
    };
    if benchmark.is_single_object(task) {
        let class = class.expect("checked above");
        let n = dataset(benchmark, class)?.len();
        let index = rng.random_range(0..n);
        let at = sample_workspace_pose(&mut rng);
        return single_object_scene(benchmark, task, class, index, &at, seed);
    }
    match benchmark {
        Benchmark::II => clutter_scene(task, class, seed, &mut rng),
        _ => assembly_scene(seed, &mut rng),
    }
}

fn clutter_scene(
    task: u8,
    class: Option<MaterialId>,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<SceneSpec> {
    let pool: Vec<ObjectSpec> = if task == 2 {
        dataset(Benchmark::II, class.expect("task 2 has a class"))?
    } else {
        Benchmark::II
            .classes()
            .iter()
            .flat_map(|c| dataset(Benchmark::II, *c).expect("benchmark II class"))
            .collect()
    };
    let mut picks: Vec<ObjectSpec> = (0..CLUTTER_SIZE)
        .map(|_| pool[rng.random_range(0..pool.len())].clone())
        .collect();
    if task == 3 {
        // Cross-class scenes must actually mix classes.
        let first = picks[0].material.id;
        while picks.iter().all(|o| o.material.id == first) {
            let last = picks.len() - 1;
            picks[last] = pool[rng.random_range(0..pool.len())].clone();
        }
    }
    for (i, object) in picks.iter_mut().enumerate() {
        object.name = format!("{}#{i}", object.name);
    }
    let mut placed: Vec<PlacedObject> = Vec::with_capacity(picks.len());
    let mut rejections = 0;
    let mut stuck = 0;
    while placed.len() < picks.len() {
        let object = &picks[placed.len()];
        let at = sample_workspace_pose(rng);
        let pose = resting_pose(object, &at);
        let r = object.shape.footprint_radius();
        let clear = placed.iter().all(|p| {
            let d = horizontal_distance(&p.pose.position, &pose.position);
            d >= MIN_SPAWN_SPACING.max(r + p.object.shape.footprint_radius() + SPAWN_MARGIN)
        });
        if clear {
            placed.push(PlacedObject {
                object: object.clone(),
                pose,
            });
            stuck = 0;
            continue;
        }
        rejections += 1;
        if rejections >= MAX_PLACEMENT_REJECTIONS {
            return Err(WorldError::PlacementFailure { seed, rejections });
        }
        // Earlier objects can leave no room for a large one; lay out again.
        stuck += 1;
        if stuck >= PLACEMENT_RESTART_AFTER {
            placed.clear();
            stuck = 0;
        }
    }
    let scene = SceneSpec {
        schema: SCENE_SCHEMA.into(),
        benchmark: Benchmark::II,
        task,
        class: match (task, class) {
            (2, Some(c)) => c.name().into(),
            _ => "mixed".into(),
        },
        seed,
        table: TableSpec::default(),
        objects: placed,
        basket: default_basket(),
        peg_board: None,
        presentation: Presentation::Simultaneous,
    };
    scene.validate()?;
    Ok(scene)
}

/// Twelve pegs, three per shape, presented one at a time in seeded order.
fn assembly_scene(seed: u64, rng: &mut ChaCha8Rng) -> Result<SceneSpec> {
    let shapes = dataset(Benchmark::III, MaterialId::Standard)?;
    let mut order: Vec<ObjectSpec> = shapes
        .iter()
        .flat_map(|o| std::iter::repeat_n(o.clone(), 3))
        .collect();
    order.shuffle(rng);
    let objects = order
        .into_iter()
        .enumerate()
        .map(|(i, mut object)| {
            object.name = format!("{}#{i}", object.name);
            let r = PRESENTATION_RADIUS * rng.random_range(0.0f64..=1.0).sqrt();
            let a = rng.random_range(-PI..PI);
            let yaw = rng.random_range(-PI / 2.0..PI / 2.0);
            let at = Pose::new(
                Vector3::new(
                    PRESENTATION_CENTER[0] + r * a.cos(),
                    PRESENTATION_CENTER[1] + r * a.sin(),
                    0.0,
                ),
                UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
            );
            let pose = resting_pose(&object, &at);
            PlacedObject { object, pose }
        })
        .collect();
    let scene = SceneSpec {
        schema: SCENE_SCHEMA.into(),
        benchmark: Benchmark::III,
        task: 1,
        class: MaterialId::Standard.name().into(),
        seed,
        table: TableSpec::default(),
        objects,
        basket: default_basket(),
        peg_board: Some(PegBoard::standard()),
        presentation: Presentation::Sequential,
    };
    scene.validate()?;
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn generation_is_deterministic() {
        for (b, t, c) in [
            (Benchmark::I, 1, Some(MaterialId::Standard)),
            (Benchmark::II, 2, Some(MaterialId::Composed)),
            (Benchmark::II, 3, None),
            (Benchmark::III, 1, None),
        ] {
            let a = generate_scene(b, t, c, 99).unwrap();
            let again = generate_scene(b, t, c, 99).unwrap();
            assert_eq!(a.to_json(), again.to_json());
        }
    }

    #[test]
    fn same_class_clutter() {
        let scene = generate_scene(Benchmark::II, 2, Some(MaterialId::SoftDeformable), 7).unwrap();
        assert_eq!(scene.objects.len(), 10);
        assert!(scene
            .objects
            .iter()
            .all(|o| o.object.material.id == MaterialId::SoftDeformable));
    }

    #[test]
    fn cross_class_clutter() {
        let scene = generate_scene(Benchmark::II, 3, None, 7).unwrap();
        assert_eq!(scene.objects.len(), 10);
        let classes: BTreeSet<_> = scene.objects.iter().map(|o| o.object.material.id).collect();
        assert!(classes.len() >= 2);
    }

    #[test]
    fn assembly_presents_three_of_each_shape() {
        let scene = generate_scene(Benchmark::III, 1, None, 3).unwrap();
        assert_eq!(scene.objects.len(), 12);
        for shape in PegShape::ALL {
            let n = scene
                .objects
                .iter()
                .filter(|o| o.object.peg == Some(shape))
                .count();
            assert_eq!(n, 3);
        }
        assert_eq!(scene.presentation, Presentation::Sequential);
    }

    #[test]
    fn invalid_combinations_are_rejected() {
        assert!(generate_scene(Benchmark::I, 2, Some(MaterialId::Standard), 1).is_err());
        assert!(generate_scene(Benchmark::I, 1, None, 1).is_err());
        assert!(generate_scene(Benchmark::I, 1, Some(MaterialId::Composed), 1).is_err());
        assert!(generate_scene(Benchmark::II, 4, Some(MaterialId::Composed), 1).is_err());
    }

    #[test]
    fn spawn_poses_stay_in_the_annulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p = sample_workspace_pose(&mut rng);
            assert!(in_spawn_region(&p.position));
        }
    }

    #[test]
    fn material_table_invariants() {
        for id in MaterialId::ALL {
            MaterialClass::of(id).validate().unwrap();
        }
        assert!(MaterialClass::new(MaterialId::Standard, 2.5, 0.0, 0.0, 1.0).is_err());
        assert!(MaterialClass::new(MaterialId::Standard, 0.5, 0.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn scene_file_round_trip_and_schema_check() {
        let scene = generate_scene(Benchmark::III, 1, None, 11).unwrap();
        let text = scene.to_json();
        for key in ["\"benchmark\"", "\"task\"", "\"seed\"", "\"objects\"", "\"basket\"", "\"peg_board\""] {
            assert!(text.contains(key), "missing {key}");
        }
        assert_eq!(SceneSpec::from_json(&text).unwrap(), scene);
        let bumped = text.replace("scene.v1", "scene.v9");
        assert!(matches!(
            SceneSpec::from_json(&bumped),
            Err(WorldError::SchemaVersionMismatch { .. })
        ));
    }

    #[test]
    fn basket_is_disjoint_from_spawn_region() {
        assert!(!basket_intersects_spawn_region(&default_basket()));
        let bad = Aabb {
            min: Vector3::new(0.5, -0.05, 0.0),
            max: Vector3::new(0.6, 0.05, 0.1),
        };
        assert!(basket_intersects_spawn_region(&bad));
    }
}
