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
//! PCA grasp planner: top-down antipodal candidates and straight-line
//! approach trajectories.

use nalgebra::{Matrix3, SymmetricEigen, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{interpolate_pose, top_down, KinematicsError, Pose};
use crate::sensing::PointCloud;
use crate::world::GripperSpec;

/// Fewest points a cluster needs before it gets suggestions.
pub const N_MIN: usize = 30;
pub const PREGRASP_OFFSET: f64 = 0.15;
/// Neighbor radius for Euclidean clustering.
pub const CLUSTER_RADIUS: f64 = 0.015;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraspError {
    #[error("insufficient points: {0}")]
    InsufficientPoints(usize),
    #[error("pregrasp offset must be positive, got {0}")]
    InvalidOffset(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalAxes {
    pub centroid: Vector3<f64>,
    /// Ordered by descending variance.
    pub axes: [Unit<Vector3<f64>>; 3],
    pub variances: [f64; 3],
    pub extents: [f64; 3],
}

pub fn principal_axes(points: &[Vector3<f64>]) -> Result<PrincipalAxes, GraspError> {
    if points.len() < N_MIN {
        return Err(GraspError::InsufficientPoints(points.len()));
    }
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vector3<f64>>() / n;
    let cov = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p - centroid;
        acc + d * d.transpose()
    }) / n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
    let axis = |k: usize| {
        let mut v: Vector3<f64> = eig.eigenvectors.column(order[k]).into_owned();
        // Sign convention: largest-magnitude component positive.
        if v[v.iamax()] < 0.0 {
            v = -v;
        }
        Unit::new_normalize(v)
    };
    let axes = [axis(0), axis(1), axis(2)];
    let extents = axes.map(|a| {
        2.0 * points
            .iter()
            .map(|p| (p - centroid).dot(&a).abs())
            .fold(0.0, f64::max)
    });
    Ok(PrincipalAxes {
        centroid,
        axes,
        variances: order.map(|i| eig.eigenvalues[i]),
        extents,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    pub id: String,
    pub grasp: Pose,
    pub approach: Vector3<f64>,
    pub width: f64,
    pub score: f64,
    /// 0 for the narrowest closing direction, 1 for its perpendicular.
    pub axis: usize,
}

/// Candidates for one object cluster. The closing direction starts at the
/// most horizontal principal axis projected into the table plane and is
/// refined to the narrowest span within ±45°, since square footprints leave
/// the in-plane axes arbitrary. The second candidate closes perpendicular to
/// the first. Width comes from the point span along each direction. The
/// horizontal center comes from the span of the top quarter of the cluster,
/// which the camera sees from every side, so oblique views do not shift it.
fn cluster_candidates(
    points: &[Vector3<f64>],
    gripper: &GripperSpec,
) -> Result<Vec<GraspCandidate>, GraspError> {
    let pa = principal_axes(points)?;
    let flattest = (0..3)
        .min_by(|a, b| pa.axes[*a].z.abs().total_cmp(&pa.axes[*b].z.abs()))
        .expect("three axes");
    let a = pa.axes[flattest];
    let mut base = a.y.atan2(a.x);
    if a.x.hypot(a.y) < 1e-6 {
        base = 0.0;
    }
    let top = points.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max);
    let cap: Vec<Vector3<f64>> = points.iter().filter(|p| p.z >= 0.75 * top).copied().collect();
    let cap = if cap.len() >= 3 { cap } else { points.to_vec() };
    let span_of = |pts: &[Vector3<f64>], d: &Vector3<f64>| {
        pts.iter()
            .map(|p| (p - pa.centroid).dot(d))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            })
    };
    let horizontal = |yaw: f64| Vector3::new(yaw.cos(), yaw.sin(), 0.0);
    let narrowest = (-90..90)
        .map(|k| base + (k as f64).to_radians())
        .map(|yaw| {
            let (lo, hi) = span_of(points, &horizontal(yaw));
            (yaw, hi - lo)
        })
        .fold((base, f64::INFINITY), |best, (yaw, w)| {
            if w < best.1 - 1e-12 {
                (yaw, w)
            } else {
                best
            }
        })
        .0;
    let mut out = Vec::new();
    for (axis, yaw) in [narrowest, narrowest + std::f64::consts::FRAC_PI_2]
        .into_iter()
        .enumerate()
    {
        let mut dir = horizontal(yaw);
        // Close along -x where possible so the wrist stays near its home yaw.
        if dir.x > 1e-12 || (dir.x.abs() <= 1e-12 && dir.y > 0.0) {
            dir = -dir;
        }
        let perp = Vector3::new(-dir.y, dir.x, 0.0);
        let (lo, hi) = span_of(points, &dir);
        let width = hi - lo;
        let (clo, chi) = span_of(&cap, &dir);
        let (plo, phi) = span_of(&cap, &perp);
        if !(width > 0.0) || width > gripper.max_opening {
            continue;
        }
        let mut center = pa.centroid + dir * (0.5 * (clo + chi)) + perp * (0.5 * (plo + phi));
        center.z = 0.5 * top;
        out.push(GraspCandidate {
            id: String::new(),
            grasp: Pose::new(center, top_down(dir.y.atan2(dir.x))),
            approach: -Vector3::z(),
            width,
            score: 1.0 / (1.0 + width / gripper.max_opening),
            axis,
        });
    }
    Ok(out)
}

fn rank(mut candidates: Vec<GraspCandidate>) -> Vec<GraspCandidate> {
    // Stable sort keeps cluster and axis order among equal scores.
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score));
    for (i, c) in candidates.iter_mut().enumerate() {
        c.id = format!("c{i}");
    }
    candidates
}

/// Candidates treating the whole cloud as one object.
pub fn generate_candidates(
    cloud: &PointCloud,
    gripper: &GripperSpec,
) -> Result<Vec<GraspCandidate>, GraspError> {
    Ok(rank(cluster_candidates(&cloud.points, gripper)?))
}

/// Euclidean clusters as index lists, in order of their first point.
pub fn euclidean_clusters(points: &[Vector3<f64>], radius: f64) -> Vec<Vec<usize>> {
    let r2 = radius * radius;
    let mut label = vec![usize::MAX; points.len()];
    let mut clusters = Vec::new();
    for seed in 0..points.len() {
        if label[seed] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        label[seed] = id;
        let mut members = vec![seed];
        let mut head = 0;
        while head < members.len() {
            let p = points[members[head]];
            head += 1;
            for (j, q) in points.iter().enumerate() {
                if label[j] == usize::MAX && (p - q).norm_squared() <= r2 {
                    label[j] = id;
                    members.push(j);
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    clusters
}

/// Candidates for every cluster with enough points, ranked together.
/// Clusters below [`N_MIN`] are skipped.
pub fn plan_scene(cloud: &PointCloud, gripper: &GripperSpec) -> Vec<GraspCandidate> {
    let mut all = Vec::new();
    for members in euclidean_clusters(&cloud.points, CLUSTER_RADIUS) {
        let pts: Vec<Vector3<f64>> = members.iter().map(|i| cloud.points[*i]).collect();
        if let Ok(c) = cluster_candidates(&pts, gripper) {
            all.extend(c);
        }
    }
    rank(all)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub candidate: String,
    pub pregrasp: Pose,
    pub grasp: Pose,
    pub tangent: Vector3<f64>,
}

impl Trajectory {
    pub fn pose_at(&self, s: f64) -> Result<Pose, KinematicsError> {
        interpolate_pose(&self.pregrasp, &self.grasp, s)
    }

    pub fn length(&self) -> f64 {
        (self.grasp.position - self.pregrasp.position).norm()
    }
}

pub fn build_trajectory(candidate: &GraspCandidate, offset: f64) -> Result<Trajectory, GraspError> {
    if !(offset > 0.0) {
        return Err(GraspError::InvalidOffset(offset));
    }
    let approach = candidate.approach.normalize();
    let pregrasp = candidate.grasp.translated(&(-approach * offset));
    Ok(Trajectory {
        candidate: candidate.id.clone(),
        pregrasp,
        grasp: candidate.grasp,
        tangent: approach,
    })
}
