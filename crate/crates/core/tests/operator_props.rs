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
use telebench_core::bench::{generate_poses, run_trial, TrialSetup};
use telebench_core::control::{ControllerKind, MasterInput, Mode};
use telebench_core::geometry::{top_down, Pose};
use telebench_core::operator::{Observation, Operator, OperatorKind, OperatorParams, PlaceGoal, TaskView};
use telebench_core::record::EventKind;
use telebench_core::world::{Benchmark, MaterialId};

const DT: f64 = 0.01;

fn observations(start: [f64; 3], goal: [f64; 3], yaw: f64, n: usize) -> Vec<Observation> {
    let grasp = Pose::new(Vector3::from(goal), top_down(yaw));
    (0..n)
        .map(|k| {
            // The end effector drifts toward the goal regardless of input.
            let f = k as f64 / n as f64;
            let p = Vector3::from(start) * (1.0 - f) + Vector3::from(goal) * f;
            Observation {
                t: k as f64 * DT,
                ee: Pose::new(p, top_down(0.0)),
                gripper_closed: false,
                holding: false,
                mode: Mode::Baseline,
                s: 0.0,
                candidates: Vec::new(),
                suggestion_version: 0,
                task: Some(TaskView {
                    object: 0,
                    grasp,
                    alternate_grasp: grasp,
                    place: PlaceGoal::Lift { pose: grasp },
                }),
            }
        })
        .collect()
}

fn run(params: OperatorParams, obs: &[Observation]) -> Vec<MasterInput> {
    let mut op = Operator::new(OperatorKind::IdealCartesian, params, DT).unwrap();
    obs.iter().map(|o| op.act(o)).collect()
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    (0.4f64..0.7, -0.3f64..0.3, 0.02f64..0.4).prop_map(|(x, y, z)| [x, y, z])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn same_seed_same_inputs(a in point(), b in point(), yaw in -3.0f64..3.0, seed in any::<u64>()) {
        let obs = observations(a, b, yaw, 300);
        let params = OperatorParams { seed, ..Default::default() };
        prop_assert_eq!(run(params, &obs), run(params, &obs));
    }

    #[test]
    fn recent_observations_do_not_leak(
        a in point(), b in point(), c in point(), yaw in -3.0f64..3.0, seed in any::<u64>(),
    ) {
        let params = OperatorParams { seed, ..Default::default() };
        let delay = (params.tau / DT).round() as usize;
        let base = observations(a, b, yaw, 200);
        let mut altered = base.clone();
        // Everything younger than tau at the last tick is replaced.
        let other = observations(c, a, -yaw, 200);
        let cut = base.len() - delay;
        altered[cut..].clone_from_slice(&other[cut..]);
        prop_assert_eq!(run(params, &base), run(params, &altered));
    }

    #[test]
    fn axis_budget_holds(a in point(), b in point(), yaw in -3.0f64..3.0, k in 1usize..=6, seed in any::<u64>()) {
        let params = OperatorParams { seed, k_axes: k, ..Default::default() };
        for u in run(params, &observations(a, b, yaw, 300)) {
            prop_assert!(u.u.iter().filter(|v| **v != 0.0).count() <= k);
        }
    }
}

/// Time to the first attach of a noiseless baseline operator.
fn time_to_grasp(k: usize) -> f64 {
    let poses = generate_poses(17, 4);
    let mut total = 0.0;
    for (i, pose) in poses.iter().enumerate() {
        let mut setup = TrialSetup::single(
            Benchmark::I,
            1,
            MaterialId::Standard,
            i % 5,
            *pose,
            17,
            ControllerKind::Baseline,
            OperatorKind::IdealCartesian,
        )
        .unwrap();
        setup.params.operator.sigma_u = 0.0;
        setup.params.operator.k_axes = k;
        let r = run_trial(&setup).unwrap();
        let attach = r.events.iter().find(|e| e.kind == EventKind::Attach).expect("grasped");
        total += attach.t;
    }
    total / poses.len() as f64
}

#[test]
fn more_axes_never_slow_the_grasp() {
    let times: Vec<f64> = (1..=6).map(time_to_grasp).collect();
    assert!(times.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{times:?}");
}
