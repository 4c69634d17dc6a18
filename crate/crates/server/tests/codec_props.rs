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
use proptest::prelude::*;
use telebench_core::control::Mode;
use telebench_core::record::EventKind;
use telebench_server::protocol::{
    decode, encode, Envelope, GripperMsg, Message, ModeRequest, PoseMsg, ProtocolError,
    MAX_CLOUD_POINTS,
};

fn frame(payload: &[u8]) -> Vec<u8> {
    let mut out = (payload.len() as u32).to_be_bytes().to_vec();
    out.extend_from_slice(payload);
    out
}

fn finite() -> impl Strategy<Value = f64> {
    -1e6..1e6f64
}

fn pose() -> impl Strategy<Value = PoseMsg> {
    (prop::array::uniform3(finite()), prop::array::uniform4(-1.0..1.0f64))
        .prop_map(|(p, q)| PoseMsg { p, q })
}

fn message() -> impl Strategy<Value = Message> {
    prop_oneof![
        (prop::array::uniform6(-1.0..=1.0f64), any::<bool>())
            .prop_map(|(u, gripper_toggle)| Message::Input { u, gripper_toggle }),
        "[a-z0-9-]{0,12}".prop_map(|id| Message::Select { id }),
        prop_oneof![Just(ModeRequest::Baseline), Just(ModeRequest::Shared)]
            .prop_map(|mode| Message::Mode { mode }),
        (finite(), prop::option::of(0usize..20)).prop_map(|(t, object)| Message::TrialEvent {
            kind: EventKind::Attach,
            t,
            object
        }),
        (prop::collection::vec(prop::array::uniform3(finite()), 0..50), any::<u64>())
            .prop_map(|(points, version)| Message::Cloud { version, points }),
        (finite(), any::<u64>(), prop::array::uniform7(finite()), pose(), finite(), any::<bool>())
            .prop_map(|(t, tick, joints, ee, s, closed)| Message::State {
                t,
                tick,
                joints,
                ee,
                objects: Vec::new(),
                gripper: GripperMsg { closed, opening: 0.04 },
                mode: Mode::SharedUnavailable,
                s,
                feedback: [s, -s, 0.0],
                input: [0.0; 6],
                selected: None,
            }),
    ]
}

proptest! {
    #[test]
    fn any_bytes_decode_or_fail_cleanly(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode(&bytes);
        let _ = decode(&frame(&bytes));
    }

    #[test]
    fn any_json_decodes_or_fails_cleanly(json in r#"\{"v":"teleop\.v1","seq":[0-9]{1,3},"type":"(input|select|mode|trial_ctl|state|cloud|x)"(,"[a-z_]{1,8}":(\[[-0-9e.,]{0,40}\]|"[a-z]{0,6}"|[-0-9e.]{1,8}|true|null|\{\}))*\}"#) {
        match decode(&frame(json.as_bytes())) {
            Ok(env) => {
                if let Message::Input { u, .. } = env.msg {
                    prop_assert!(u.iter().all(|x| (-1.0..=1.0).contains(x)));
                }
            }
            Err(ProtocolError::MalformedMessage(_)) => {}
        }
    }

    #[test]
    fn valid_messages_round_trip(msg in message(), seq in any::<u64>()) {
        let env = Envelope { seq, msg };
        let bytes = encode(&env).unwrap();
        prop_assert_eq!(u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize, bytes.len() - 4);
        prop_assert_eq!(decode(&bytes).unwrap(), env);
    }

    #[test]
    fn decoded_input_is_always_clamped(u in prop::array::uniform6(-1e9..1e9f64)) {
        let json = format!(
            r#"{{"v":"teleop.v1","seq":1,"type":"input","u":{}}}"#,
            serde_json::to_string(&u).unwrap()
        );
        let Message::Input { u: got, gripper_toggle } = decode(&frame(json.as_bytes())).unwrap().msg else {
            panic!("not an input");
        };
        prop_assert!(!gripper_toggle);
        for (g, x) in got.iter().zip(u) {
            prop_assert_eq!(*g, x.clamp(-1.0, 1.0));
        }
    }
}

#[test]
fn oversized_clouds_are_refused_both_ways() {
    let msg = Message::Cloud { version: 1, points: vec![[0.0; 3]; MAX_CLOUD_POINTS + 1] };
    assert!(encode(&Envelope { seq: 1, msg }).is_err());
    let points = serde_json::to_string(&vec![[0.0; 3]; MAX_CLOUD_POINTS + 1]).unwrap();
    let json = format!(r#"{{"v":"teleop.v1","seq":1,"type":"cloud","version":1,"points":{points}}}"#);
    assert!(decode(&frame(json.as_bytes())).is_err());
}
