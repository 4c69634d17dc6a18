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
use nalgebra::Vector3;
use proptest::prelude::*;
use telebench_core::bench::{generate_poses, run_trial_observed, TrialRunner, TrialSetup};
use telebench_core::control::ControllerKind;
use telebench_core::geometry::Pose;
use telebench_core::operator::OperatorKind;
use telebench_core::world::{
    generate_scene, grasp_hold_check, Benchmark, Environment, MaterialId, ObjectStatus,
    WorldState,
};

fn bottom(env: &Environment, world: &WorldState, i: usize) -> f64 {
    let pose = &world.objects[i].pose;
    let up = pose.orientation.inverse() * Vector3::z();
    pose.position.z - 0.5 * env.object(i).shape.width_along(&up)
}

/// Checks the per-tick world invariants of a running trial.
struct Invariants {
    attached: Option<(usize, Pose)>,
}

impl Invariants {
    fn check(&mut self, r: &TrialRunner) {
        let (env, world) = (r.env(), r.world());
        let held: Vec<usize> = (0..world.objects.len())
            .filter(|&i| world.objects[i].status == ObjectStatus::Held)
            .collect();
        assert!(held.len() <= 1);
        assert_eq!(held.first().copied(), world.attachment.map(|a| a.object));
        match (world.attachment, self.attached) {
            (Some(a), Some((i, rel))) if a.object == i => {
                assert!((a.relative.position - rel.position).norm() < 1e-12);
                assert!(a.relative.orientation.angle_to(&rel.orientation) < 1e-12);
                let expect = world.ee.compose(&rel);
                assert!((world.objects[i].pose.position - expect.position).norm() < 1e-12);
            }
            (a, _) => self.attached = a.map(|a| (a.object, a.relative)),
        }
        for i in 0..world.objects.len() {
            let status = world.objects[i].status;
            if matches!(status, ObjectStatus::Dropped | ObjectStatus::Hidden) {
                continue;
            }
            assert!(bottom(env, world, i) >= -1e-9, "object {i} below the table");
        }
    }
}

fn observe(setup: &TrialSetup) {
    let mut inv = Invariants { attached: None };
    inv.check(&TrialRunner::new(setup.clone()).unwrap());
    run_trial_observed(setup, |r, _| inv.check(r)).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scenes_are_pure(seed in any::<u64>(), which in 0usize..4) {
        let (bm, task, class) = [
            (Benchmark::I, 1, Some(MaterialId::Transparent)),
            (Benchmark::II, 2, Some(MaterialId::Composed)),
            (Benchmark::II, 3, None),
            (Benchmark::III, 1, None),
        ][which];
        let a = generate_scene(bm, task, class, seed).unwrap();
        let b = generate_scene(bm, task, class, seed).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn hold_is_monotone(
        mu in 0.0f64..1.0,
        extra in 0.0f64..1.0,
        force in 1.0f64..60.0,
        load in 0.0f64..20.0,
        less in 0.0f64..20.0,
    ) {
        if grasp_hold_check(mu, force, load) {
            prop_assert!(grasp_hold_check(mu + extra, force, load));
            prop_assert!(grasp_hold_check(mu, force, (load - less).max(0.0)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn single_object_trials_keep_world_invariants(
        seed in any::<u64>(),
        shiny in any::<bool>(),
        object in 0usize..5,
        shared in any::<bool>(),
    ) {
        let class = if shiny { MaterialId::ShinySlippery } else { MaterialId::Standard };
        let (c, o) = if shared {
            (ControllerKind::Shared, OperatorKind::SharedFollower)
        } else {
            (ControllerKind::Baseline, OperatorKind::IdealCartesian)
        };
        let pose = generate_poses(seed, 1)[0];
        let setup = TrialSetup::single(Benchmark::I, 1, class, object, pose, seed, c, o).unwrap();
        observe(&setup);
    }
}

#[test]
fn clutter_and_assembly_keep_world_invariants() {
    for (bm, task, class, c, o) in [
        (Benchmark::II, 2, Some(MaterialId::MetallicSlippery), ControllerKind::Baseline, OperatorKind::IdealCartesian),
        (Benchmark::III, 1, None, ControllerKind::Shared, OperatorKind::SharedFollower),
    ] {
        let mut setup = TrialSetup::scene(bm, task, class, 11, c, o);
        setup.t_max = 120.0;
        observe(&setup);
    }
}
