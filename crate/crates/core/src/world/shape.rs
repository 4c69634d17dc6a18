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
//! Object shapes. Every shape is expressed in its own frame with the origin
//! at the center of its bounding box and `z` up when resting.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Full side lengths along x, y, z.
    Box { size: [f64; 3] },
    Sphere { radius: f64 },
    /// Axis along local z.
    Cylinder { radius: f64, height: f64 },
    /// Square base of side `base`, apex above the base center.
    Pyramid { base: f64, height: f64 },
    /// Equilateral triangle cross-section.
    TriangularPrism { side: f64, height: f64 },
    /// Regular hexagon cross-section measured across flats.
    HexagonalPrism { across_flats: f64, height: f64 },
}

/// Half-space `normal · x <= offset` in the shape frame.
#[derive(Debug, Clone, Copy)]
struct Plane {
    normal: Vector3<f64>,
    offset: f64,
}

impl Shape {
    pub fn dimensions_valid(&self) -> bool {
        let dims: &[f64] = match self {
            Shape::Box { size } => size,
            Shape::Sphere { radius } => std::slice::from_ref(radius),
            Shape::Cylinder { radius, height } => return *radius > 0.0 && *height > 0.0,
            Shape::Pyramid { base, height } => return *base > 0.0 && *height > 0.0,
            Shape::TriangularPrism { side, height } => return *side > 0.0 && *height > 0.0,
            Shape::HexagonalPrism {
                across_flats,
                height,
            } => return *across_flats > 0.0 && *height > 0.0,
        };
        dims.iter().all(|d| d.is_finite() && *d > 0.0)
    }

    pub fn height(&self) -> f64 {
        match *self {
            Shape::Box { size } => size[2],
            Shape::Sphere { radius } => 2.0 * radius,
            Shape::Cylinder { height, .. }
            | Shape::Pyramid { height, .. }
            | Shape::TriangularPrism { height, .. }
            | Shape::HexagonalPrism { height, .. } => height,
        }
    }

    pub fn half_height(&self) -> f64 {
        0.5 * self.height()
    }

    /// Radius of the smallest vertical cylinder around the local z axis that
    /// contains the shape.
    pub fn footprint_radius(&self) -> f64 {
        match *self {
            Shape::Box { size } => 0.5 * (size[0] * size[0] + size[1] * size[1]).sqrt(),
            Shape::Sphere { radius } | Shape::Cylinder { radius, .. } => radius,
            Shape::Pyramid { base, .. } => base / 2f64.sqrt(),
            Shape::TriangularPrism { side, .. } => side / 3f64.sqrt(),
            Shape::HexagonalPrism { across_flats, .. } => across_flats / 3f64.sqrt(),
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        let r = self.footprint_radius();
        let h = self.half_height();
        match self {
            Shape::Sphere { radius } => *radius,
            _ => (r * r + h * h).sqrt(),
        }
    }

    /// Extent of the shape along `dir` (shape frame, need not be normalized).
    pub fn width_along(&self, dir: &Vector3<f64>) -> f64 {
        let n = dir.norm();
        if n == 0.0 {
            return 0.0;
        }
        let d = dir / n;
        match *self {
            Shape::Sphere { radius } => 2.0 * radius,
            Shape::Cylinder { radius, height } => {
                let horizontal = (d.x * d.x + d.y * d.y).sqrt();
                2.0 * radius * horizontal + height * d.z.abs()
            }
            _ => {
                let (lo, hi) = self
                    .vertices()
                    .iter()
                    .map(|v| v.dot(&d))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                        (lo.min(p), hi.max(p))
                    });
                hi - lo
            }
        }
    }

    /// Closing-direction yaw (shape frame) with the smallest horizontal width,
    /// sampled every degree.
    pub fn narrowest_yaw(&self) -> f64 {
        match self {
            Shape::Sphere { .. } | Shape::Cylinder { .. } => 0.0,
            _ => (0..180)
                .map(|deg| deg as f64 * PI / 180.0)
                .map(|a| (a, self.width_along(&Vector3::new(a.cos(), a.sin(), 0.0))))
                .fold((0.0, f64::INFINITY), |best, (a, w)| {
                    if w < best.1 - 1e-12 {
                        (a, w)
                    } else {
                        best
                    }
                })
                .0,
        }
    }

    /// Rotational symmetry of the footprint about z, radians. Zero means any
    /// yaw is equivalent.
    pub fn yaw_symmetry(&self) -> f64 {
        match *self {
            Shape::Sphere { .. } | Shape::Cylinder { .. } => 0.0,
            Shape::Box { size } => {
                if (size[0] - size[1]).abs() < 1e-12 {
                    PI / 2.0
                } else {
                    PI
                }
            }
            Shape::Pyramid { .. } => PI / 2.0,
            Shape::TriangularPrism { .. } => 2.0 * PI / 3.0,
            Shape::HexagonalPrism { .. } => PI / 3.0,
        }
    }

    fn vertices(&self) -> Vec<Vector3<f64>> {
        match *self {
            Shape::Box { size } => {
                let h = Vector3::from(size) * 0.5;
                let mut out = Vec::with_capacity(8);
                for sx in [-1.0, 1.0] {
                    for sy in [-1.0, 1.0] {
                        for sz in [-1.0, 1.0] {
                            out.push(Vector3::new(sx * h.x, sy * h.y, sz * h.z));
                        }
                    }
                }
                out
            }
            Shape::Pyramid { base, height } => {
                let b = base / 2.0;
                let h = height / 2.0;
                vec![
                    Vector3::new(b, b, -h),
                    Vector3::new(-b, b, -h),
                    Vector3::new(-b, -b, -h),
                    Vector3::new(b, -b, -h),
                    Vector3::new(0.0, 0.0, h),
                ]
            }
            Shape::TriangularPrism { side, height } => {
                prism_vertices(3, side / 3f64.sqrt(), PI / 2.0, height)
            }
            Shape::HexagonalPrism {
                across_flats,
                height,
            } => prism_vertices(6, across_flats / 3f64.sqrt(), PI / 6.0, height),
            Shape::Sphere { radius } => vec![Vector3::new(radius, 0.0, 0.0)],
            Shape::Cylinder { radius, height } => {
                vec![Vector3::new(radius, 0.0, height / 2.0)]
            }
        }
    }

    fn planes(&self) -> Vec<Plane> {
        let cap = |h: f64| {
            [
                Plane {
                    normal: Vector3::z(),
                    offset: h,
                },
                Plane {
                    normal: -Vector3::z(),
                    offset: h,
                },
            ]
        };
        match *self {
            Shape::Box { size } => {
                let mut out = Vec::with_capacity(6);
                for axis in 0..3 {
                    let mut n = Vector3::zeros();
                    n[axis] = 1.0;
                    out.push(Plane {
                        normal: n,
                        offset: size[axis] / 2.0,
                    });
                    out.push(Plane {
                        normal: -n,
                        offset: size[axis] / 2.0,
                    });
                }
                out
            }
            Shape::Pyramid { base, height } => {
                let h = height / 2.0;
                let b = base / 2.0;
                let apex = Vector3::new(0.0, 0.0, h);
                let mut out = vec![Plane {
                    normal: -Vector3::z(),
                    offset: h,
                }];
                for (nx, ny) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
                    let n = Vector3::new(nx * height, ny * height, b).normalize();
                    out.push(Plane {
                        normal: n,
                        offset: n.dot(&apex),
                    });
                }
                out
            }
            Shape::TriangularPrism { side, height } => {
                let mut out = prism_planes(3, side / (2.0 * 3f64.sqrt()), -PI / 2.0);
                out.extend(cap(height / 2.0));
                out
            }
            Shape::HexagonalPrism {
                across_flats,
                height,
            } => {
                let mut out = prism_planes(6, across_flats / 2.0, 0.0);
                out.extend(cap(height / 2.0));
                out
            }
            Shape::Sphere { .. } | Shape::Cylinder { .. } => Vec::new(),
        }
    }

    /// First intersection distance `t >= 0` of the ray `origin + t·dir` with
    /// the shape surface, shape frame. `dir` must be unit length.
    pub fn ray_hit(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        match *self {
            Shape::Sphere { radius } => ray_sphere(origin, dir, radius),
            Shape::Cylinder { radius, height } => ray_cylinder(origin, dir, radius, height / 2.0),
            _ => ray_convex(origin, dir, &self.planes()),
        }
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        match *self {
            Shape::Sphere { radius } => p.norm() <= radius,
            Shape::Cylinder { radius, height } => {
                p.z.abs() <= height / 2.0 && (p.x * p.x + p.y * p.y).sqrt() <= radius
            }
            _ => self
                .planes()
                .iter()
                .all(|pl| pl.normal.dot(p) <= pl.offset + 1e-12),
        }
    }
}

fn prism_vertices(n: usize, circumradius: f64, phase: f64, height: f64) -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(2 * n);
    for k in 0..n {
        let a = phase + 2.0 * PI * k as f64 / n as f64;
        for z in [-height / 2.0, height / 2.0] {
            out.push(Vector3::new(circumradius * a.cos(), circumradius * a.sin(), z));
        }
    }
    out
}

fn prism_planes(n: usize, apothem: f64, phase: f64) -> Vec<Plane> {
    (0..n)
        .map(|k| {
            let a = phase + 2.0 * PI * k as f64 / n as f64;
            Plane {
                normal: Vector3::new(a.cos(), a.sin(), 0.0),
                offset: apothem,
            }
        })
        .collect()
}

fn ray_sphere(o: &Vector3<f64>, d: &Vector3<f64>, r: f64) -> Option<f64> {
    let b = o.dot(d);
    let c = o.norm_squared() - r * r;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    let t1 = -b + sq;
    if t0 >= 0.0 {
        Some(t0)
    } else if t1 >= 0.0 {
        Some(t1)
    } else {
        None
    }
}

fn ray_cylinder(o: &Vector3<f64>, d: &Vector3<f64>, r: f64, half_h: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        if t >= 0.0 && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    let a = d.x * d.x + d.y * d.y;
    if a > 1e-15 {
        let b = o.x * d.x + o.y * d.y;
        let c = o.x * o.x + o.y * o.y - r * r;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-b - sq) / a, (-b + sq) / a] {
                let z = o.z + t * d.z;
                if z.abs() <= half_h {
                    consider(t);
                }
            }
        }
    }
    if d.z.abs() > 1e-15 {
        for zc in [-half_h, half_h] {
            let t = (zc - o.z) / d.z;
            let x = o.x + t * d.x;
            let y = o.y + t * d.y;
            if x * x + y * y <= r * r {
                consider(t);
            }
        }
    }
    best
}

fn ray_convex(o: &Vector3<f64>, d: &Vector3<f64>, planes: &[Plane]) -> Option<f64> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for pl in planes {
        let denom = pl.normal.dot(d);
        let dist = pl.offset - pl.normal.dot(o);
        if denom.abs() < 1e-15 {
            if dist < 0.0 {
                return None;
            }
            continue;
        }
        let t = dist / denom;
        if denom < 0.0 {
            t_enter = t_enter.max(t);
        } else {
            t_exit = t_exit.min(t);
        }
        if t_enter > t_exit {
            return None;
        }
    }
    if t_exit < 0.0 {
        return None;
    }
    Some(if t_enter >= 0.0 { t_enter } else { t_exit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn down() -> Vector3<f64> {
        -Vector3::z()
    }

    #[test]
    fn vertical_rays_hit_top_surfaces() {
        let o = Vector3::new(0.0, 0.0, 1.0);
        let cube = Shape::Box {
            size: [0.05, 0.05, 0.05],
        };
        assert_relative_eq!(cube.ray_hit(&o, &down()).unwrap(), 0.975, epsilon = 1e-12);
        let sphere = Shape::Sphere { radius: 0.03 };
        assert_relative_eq!(sphere.ray_hit(&o, &down()).unwrap(), 0.97, epsilon = 1e-12);
        let cyl = Shape::Cylinder {
            radius: 0.02,
            height: 0.06,
        };
        assert_relative_eq!(cyl.ray_hit(&o, &down()).unwrap(), 0.97, epsilon = 1e-12);
        let pyr = Shape::Pyramid {
            base: 0.05,
            height: 0.05,
        };
        assert_relative_eq!(pyr.ray_hit(&o, &down()).unwrap(), 0.975, epsilon = 1e-12);
        // Halfway to the base edge the pyramid surface is at mid height.
        let off = Vector3::new(0.0125, 0.0, 1.0);
        assert_relative_eq!(pyr.ray_hit(&off, &down()).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rays_outside_footprint_miss() {
        let o = Vector3::new(0.1, 0.0, 1.0);
        for s in [
            Shape::Box {
                size: [0.05, 0.05, 0.05],
            },
            Shape::Sphere { radius: 0.03 },
            Shape::HexagonalPrism {
                across_flats: 0.04,
                height: 0.05,
            },
            Shape::TriangularPrism {
                side: 0.04,
                height: 0.05,
            },
        ] {
            assert!(s.ray_hit(&o, &down()).is_none(), "{s:?}");
        }
    }

    #[test]
    fn widths() {
        let cube = Shape::Box {
            size: [0.05, 0.05, 0.05],
        };
        assert_relative_eq!(cube.width_along(&Vector3::x()), 0.05, epsilon = 1e-12);
        assert_relative_eq!(
            cube.width_along(&Vector3::new(1.0, 1.0, 0.0)),
            0.05 * 2f64.sqrt(),
            epsilon = 1e-12
        );
        let hex = Shape::HexagonalPrism {
            across_flats: 0.04,
            height: 0.05,
        };
        assert_relative_eq!(hex.width_along(&Vector3::x()), 0.04, epsilon = 1e-12);
        let tube = Shape::Box {
            size: [0.12, 0.025, 0.025],
        };
        assert_relative_eq!(tube.narrowest_yaw(), PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn containment_matches_planes() {
        let tri = Shape::TriangularPrism {
            side: 0.04,
            height: 0.05,
        };
        assert!(tri.contains(&Vector3::zeros()));
        assert!(!tri.contains(&Vector3::new(0.0, -0.02, 0.0)));
        assert!(tri.contains(&Vector3::new(0.0, 0.02, 0.0)));
    }
}
