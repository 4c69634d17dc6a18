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
use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;
use telebench_core::geometry::{
    distance_to_segment, interpolate_pose, slerp, ArmModel, JointConfig, KinematicsError, Pose, DOF,
};

fn joints() -> impl Strategy<Value = JointConfig> {
    let arm = ArmModel::default();
    let ranges: Vec<_> = arm
        .limits()
        .iter()
        .map(|l| (l.lower * 0.9)..(l.upper * 0.9))
        .collect();
    ranges.prop_map(|v| {
        let mut q = [0.0; DOF];
        q.copy_from_slice(&v);
        JointConfig(q)
    })
}

fn pose() -> impl Strategy<Value = Pose> {
    (
        prop::array::uniform3(-1.0f64..1.0),
        prop::array::uniform3(-3.0f64..3.0),
    )
        .prop_map(|(p, r)| {
            Pose::new(
                Vector3::from(p),
                UnitQuaternion::from_scaled_axis(Vector3::from(r)),
            )
        })
}

proptest! {
    #[test]
    fn ik_results_are_honest(q in joints(), d in prop::array::uniform7(-0.05f64..0.05)) {
        let arm = ArmModel::default();
        let target = arm.forward_kinematics(&q).unwrap();
        let mut start = q;
        for (a, b) in start.0.iter_mut().zip(d) {
            *a += b;
        }
        let start = arm.clamp(&start);
        match arm.solve_ik(&target, &start) {
            Ok(sol) => {
                arm.check_limits(&sol).unwrap();
                let (lin, ang) = arm.forward_kinematics(&sol).unwrap().error_to(&target);
                prop_assert!(lin < 1e-4 && ang < 1e-3, "errors {lin} {ang}");
            }
            Err(KinematicsError::Unreachable { position, orientation, .. }) => {
                prop_assert!(position >= 1e-4 || orientation >= 1e-3);
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn ik_keeps_a_solved_start(q in joints()) {
        let arm = ArmModel::default();
        let target = arm.forward_kinematics(&q).unwrap();
        prop_assert_eq!(arm.solve_ik(&target, &q).unwrap(), q);
    }

    #[test]
    fn fk_is_pure(q in joints()) {
        let arm = ArmModel::default();
        let a = arm.forward_kinematics(&q).unwrap();
        let b = arm.forward_kinematics(&q).unwrap();
        prop_assert_eq!(a.position.map(f64::to_bits), b.position.map(f64::to_bits));
        prop_assert_eq!(a.orientation.coords.map(f64::to_bits), b.orientation.coords.map(f64::to_bits));
    }

    #[test]
    fn interpolation_stays_on_the_segment(a in pose(), b in pose(), s in 0.0f64..=1.0) {
        let p = interpolate_pose(&a, &b, s).unwrap();
        prop_assert!(distance_to_segment(&p.position, &a.position, &b.position) < 1e-12);
        prop_assert!((p.orientation.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn orientations_stay_unit(a in pose(), b in pose(), s in 0.0f64..=1.0) {
        prop_assert!((a.compose(&b).orientation.norm() - 1.0).abs() < 1e-9);
        prop_assert!((a.inverse().orientation.norm() - 1.0).abs() < 1e-9);
        prop_assert!((slerp(&a.orientation, &b.orientation, s).norm() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn round_trip_convergence_rate() {
    use rand::{Rng, SeedableRng};
    let arm = ArmModel::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut converged = 0;
    for _ in 0..300 {
        let mut q = [0.0; DOF];
        for (a, l) in q.iter_mut().zip(arm.limits()) {
            *a = rng.random_range(l.lower..l.upper);
        }
        let target = arm.forward_kinematics(&JointConfig(q)).unwrap();
        let mut start = q;
        for a in start.iter_mut() {
            *a += rng.random_range(-0.05..0.05);
        }
        if arm.solve_ik(&target, &arm.clamp(&JointConfig(start))).is_ok() {
            converged += 1;
        }
    }
    assert!(converged >= 297, "{converged}/300");
}
