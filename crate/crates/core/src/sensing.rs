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
//! Simulated wrist depth camera and point-cloud preprocessing.

use std::fmt::Write as _;
use std::f64::consts::FRAC_PI_2;

use nalgebra::{Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{top_down, Pose};
use crate::world::{Environment, ObjectStatus, WorldState};

/// Depth noise on table returns, meters.
pub const TABLE_NOISE_SIGMA: f64 = 0.001;
pub const TABLE_EPSILON: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Camera pose in the end-effector frame. The optical axis is local +z,
    /// image columns run along local +x.
    pub mount: Pose,
}

impl Default for DepthCamera {
    fn default() -> Self {
        DepthCamera {
            fx: 140.0,
            fy: 140.0,
            cx: 80.0,
            cy: 60.0,
            width: 160,
            height: 120,
            mount: Pose::from_position(0.05, 0.0, 0.0),
        }
    }
}

impl DepthCamera {
    pub fn is_valid(&self) -> bool {
        self.fx > 0.0 && self.fy > 0.0 && self.width > 0 && self.height > 0
    }

    /// Unit ray through the center of pixel (u, v), camera frame.
    fn pixel_ray(&self, u: u32, v: u32) -> Vector3<f64> {
        Vector3::new(
            (u as f64 + 0.5 - self.cx) / self.fx,
            (v as f64 + 0.5 - self.cy) / self.fy,
            1.0,
        )
        .normalize()
    }
}

/// The single pre-defined capture view: looking straight down from 0.7 m
/// above the workspace center, image width along world y.
pub fn default_view() -> Pose {
    Pose::new(Vector3::new(0.55, 0.0, 0.70), top_down(FRAC_PI_2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub capture_pose: Pose,
    pub seed: u64,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        PointCloud {
            points,
            capture_pose: Pose::identity(),
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn with_points(&self, points: Vec<Vector3<f64>>) -> Self {
        PointCloud {
            points,
            capture_pose: self.capture_pose,
            seed: self.seed,
        }
    }

    /// One `x y z` line per point, 6 decimals.
    pub fn to_xyz(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 30);
        for p in &self.points {
            let _ = writeln!(out, "{:.6} {:.6} {:.6}", p.x, p.y, p.z);
        }
        out
    }

    /// Keeps at most `max` points by uniform striding.
    pub fn decimated(&self, max: usize) -> Vec<Vector3<f64>> {
        if self.points.len() <= max || max == 0 {
            return if max == 0 { Vec::new() } else { self.points.clone() };
        }
        let stride = self.points.len().div_ceil(max);
        self.points.iter().step_by(stride).copied().collect()
    }
}

/// Noise-free ray return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: Vector3<f64>,
    /// Range along the unit ray.
    pub range: f64,
    /// Depth along the optical axis per unit range.
    pub depth_scale: f64,
    pub object: Option<usize>,
}

/// Casts one ray per pixel against the table and the visible objects.
pub fn ray_cast(
    env: &Environment,
    world: &WorldState,
    camera: &DepthCamera,
    view: &Pose,
) -> Vec<RayHit> {
    let visible: Vec<(usize, Pose, f64)> = world
        .objects
        .iter()
        .enumerate()
        .filter(|(_, o)| o.status == ObjectStatus::Resting)
        .map(|(i, o)| (i, o.pose, env.object(i).shape.bounding_radius()))
        .collect();
    let origin = view.position;
    let mut hits = Vec::new();
    for v in 0..camera.height {
        for u in 0..camera.width {
            let local = camera.pixel_ray(u, v);
            let dir = view.orientation * local;
            let mut best: Option<(f64, Option<usize>)> = None;
            if dir.z < 0.0 {
                let t = -origin.z / dir.z;
                let p = origin + dir * t;
                if env.scene.table.contains_xy(&p) {
                    best = Some((t, None));
                }
            }
            for (i, pose, r) in &visible {
                // Bounding-sphere rejection before the exact test.
                let oc = pose.position - origin;
                let along = oc.dot(&dir);
                if (oc - dir * along).norm_squared() > r * r {
                    continue;
                }
                let o_local = pose.inverse().transform_point(&origin);
                let d_local = pose.orientation.inverse() * dir;
                if let Some(t) = env.object(*i).shape.ray_hit(&o_local, &d_local) {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, Some(*i)));
                    }
                }
            }
            if let Some((t, object)) = best {
                hits.push(RayHit {
                    point: origin + dir * t,
                    range: t,
                    depth_scale: local.z,
                    object,
                });
            }
        }
    }
    hits
}

/// Captures a degraded cloud: object returns drop out with the material's
/// probability and get Gaussian depth noise; table returns get
/// [`TABLE_NOISE_SIGMA`] noise and no dropout.
pub fn capture_cloud(
    env: &Environment,
    world: &WorldState,
    camera: &DepthCamera,
    view: &Pose,
    seed: u64,
) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let origin = view.position;
    let points = ray_cast(env, world, camera, view)
        .into_iter()
        .filter_map(|hit| {
            let sigma = match hit.object {
                Some(i) => {
                    let m = &env.object(i).material;
                    if rng.random::<f64>() < m.dropout_p {
                        return None;
                    }
                    m.depth_noise_sigma
                }
                None => TABLE_NOISE_SIGMA,
            };
            let noise: f64 = unit.sample(&mut rng) * sigma;
            let dir = (hit.point - origin) / hit.range;
            Some(origin + dir * (hit.range + noise / hit.depth_scale))
        })
        .collect();
    PointCloud {
        points,
        capture_pose: *view,
        seed,
    }
}

/// Plane `normal · p = offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Unit<Vector3<f64>>,
    pub offset: f64,
}

impl Plane {
    pub fn table() -> Self {
        Plane {
            normal: Vector3::z_axis(),
            offset: 0.0,
        }
    }

    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        (self.normal.dot(p) - self.offset).abs()
    }
}

pub fn remove_plane(cloud: &PointCloud, plane: &Plane, epsilon: f64) -> PointCloud {
    let kept = cloud
        .points
        .iter()
        .filter(|p| plane.distance(p) > epsilon)
        .copied()
        .collect();
    cloud.with_points(kept)
}

/// Mean distance from each point to its `k` nearest neighbors, brute force.
pub fn mean_knn_distances(points: &[Vector3<f64>], k: usize) -> Vec<f64> {
    let mut buf = Vec::with_capacity(points.len());
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            buf.clear();
            buf.extend(
                points
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, q)| (p - q).norm()),
            );
            let k = k.min(buf.len());
            buf.select_nth_unstable_by(k - 1, f64::total_cmp);
            buf[..k].iter().sum::<f64>() / k as f64
        })
        .collect()
}

/// Statistical outlier removal: drops points whose mean k-NN distance
/// exceeds the global mean by more than `alpha` population standard
/// deviations.
pub fn remove_outliers(cloud: &PointCloud, k: usize, alpha: f64) -> PointCloud {
    if cloud.points.len() <= k || k == 0 {
        return cloud.clone();
    }
    let d = mean_knn_distances(&cloud.points, k);
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let limit = mean + alpha * var.sqrt();
    let kept = cloud
        .points
        .iter()
        .zip(&d)
        .filter(|(_, di)| **di <= limit)
        .map(|(p, _)| *p)
        .collect();
    cloud.with_points(kept)
}

/// Table removal followed by outlier filtering with the default settings.
pub fn preprocess(cloud: &PointCloud) -> PointCloud {
    remove_outliers(&remove_plane(cloud, &Plane::table(), TABLE_EPSILON), 8, 2.0)
}
