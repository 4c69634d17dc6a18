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
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use telebench_core::bench::{plan, run_trial, BenchmarkSpec};
use telebench_core::control::{ControllerKind, Mode};
use telebench_core::metrics::aggregate;
use telebench_core::operator::{Operator, OperatorKind};
use telebench_core::record::{parse_lines, EventKind, Outcome};
use telebench_server::protocol::{decode, encode, Envelope, Message, StartSpec, TrialAction};
use telebench_server::session::{Session, SessionConfig, TICK};
use telebench_server::{Server, ServerConfig};
use tokio_tungstenite::tungstenite::Message as Ws;

fn start_msg(controller: ControllerKind) -> Message {
    Message::TrialCtl {
        action: TrialAction::Start,
        spec: Some(StartSpec { seed: 42, controller: Some(controller), ..Default::default() }),
    }
}

#[test]
fn scripted_operator_through_the_session_matches_the_scripted_trial() {
    for controller in [ControllerKind::Shared, ControllerKind::Baseline] {
        let operator = match controller {
            ControllerKind::Shared => OperatorKind::SharedFollower,
            ControllerKind::Baseline => OperatorKind::IdealCartesian,
        };
        let spec = BenchmarkSpec { seed: 42, controller, operator, ..Default::default() };
        let setup = plan(&spec).unwrap().trials.remove(0);
        let scripted = run_trial(&setup).unwrap();

        let mut params = setup.params.operator;
        params.seed = setup.operator_seed;
        let mut op = Operator::new(operator, params, setup.dt).unwrap();
        let mut session = Session::new(1, SessionConfig::default());
        session.connect();
        let mut seq = 0u64;
        let mut last_seq = 0u64;
        let mut check = |out: Vec<Envelope>| {
            for e in out {
                assert!(e.seq > last_seq);
                last_seq = e.seq;
                assert!(!matches!(e.msg, Message::Error { .. }), "{:?}", e.msg);
            }
        };
        let mut send = |session: &mut Session, msg: Message, now: f64| {
            seq += 1;
            session.receive(Envelope { seq, msg }, now)
        };
        check(send(&mut session, start_msg(controller), 0.0));
        let mut k = 0u64;
        while let Some(runner) = session.trial() {
            k += 1;
            let now = k as f64 * TICK;
            let input = op.act(&runner.observation());
            if let Some(id) = input.select_candidate.clone() {
                check(send(&mut session, Message::Select { id }, now));
            }
            let msg = Message::Input { u: input.u, gripper_toggle: input.gripper_toggle };
            check(send(&mut session, msg, now));
            check(session.tick(now));
        }
        let live = session.take_records().remove(0);
        assert_eq!(live.operator, "human");
        assert_eq!(live.outcome, scripted.outcome);
        assert_eq!(live.completion_time, scripted.completion_time);
        assert_eq!(live.events, scripted.events);

        // Same schema: the live line parses as a record and feeds metrics.
        let parsed = parse_lines(live.to_json_line().as_bytes()).unwrap();
        assert_eq!(parsed[0], live);
        let keys = |r: &telebench_core::record::TrialRecord| {
            let v: serde_json::Value = serde_json::from_str(&r.to_json_line()).unwrap();
            v.as_object().unwrap().keys().cloned().collect::<Vec<_>>()
        };
        assert_eq!(keys(&live), keys(&scripted));
        let report = aggregate(&parsed).unwrap();
        assert_eq!(report.rows.iter().map(|r| r.trials).max(), Some(1));
    }
}

#[test]
fn pauses_do_not_count_toward_effort() {
    let spec = BenchmarkSpec { seed: 42, operator: OperatorKind::SharedFollower, ..Default::default() };
    let setup = plan(&spec).unwrap().trials.remove(0);
    let scripted = run_trial(&setup).unwrap();
    let mut params = setup.params.operator;
    params.seed = setup.operator_seed;
    let mut op = Operator::new(OperatorKind::SharedFollower, params, setup.dt).unwrap();
    let mut session = Session::new(1, SessionConfig::default());
    session.connect();
    session.receive(Envelope { seq: 1, msg: start_msg(ControllerKind::Shared) }, 0.0);
    let mut now = 0.0;
    let mut k = 0;
    while let Some(runner) = session.trial() {
        k += 1;
        now += TICK;
        if k == 150 {
            session.disconnect();
            now += 5.0;
            session.connect();
            continue;
        }
        let input = op.act(&runner.observation());
        if let Some(id) = input.select_candidate.clone() {
            session.receive(Envelope { seq: 2, msg: Message::Select { id } }, now);
        }
        let msg = Message::Input { u: input.u, gripper_toggle: input.gripper_toggle };
        session.receive(Envelope { seq: 3, msg }, now);
        session.tick(now);
    }
    let live = session.take_records().remove(0);
    assert_eq!(live.completion_time, scripted.completion_time);
    let kinds: Vec<_> = live.events.iter().map(|e| e.kind).collect();
    assert!(kinds.contains(&EventKind::Pause) && kinds.contains(&EventKind::Resume));
}

async fn recv(ws: &mut (impl StreamExt<Item = Result<Ws, tokio_tungstenite::tungstenite::Error>> + Unpin)) -> Envelope {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("server went quiet")
            .expect("stream open")
            .expect("websocket error");
        if let Ws::Binary(b) = msg {
            return decode(&b).expect("server frames decode");
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn websocket_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("live.jsonl");
    let config = ServerConfig {
        addr: "127.0.0.1:0".parse().unwrap(),
        records: Some(records.clone()),
        ..Default::default()
    };
    let server = Server::bind(config).await.unwrap();
    let addr = server.local_addr();
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let handle = tokio::spawn(server.run_until(async {
        let _ = stopped.await;
    }));

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}")).await.unwrap();
    let send = |seq: u64, msg: Message| Ws::Binary(encode(&Envelope { seq, msg }).unwrap());

    // A second operator is turned away.
    let (mut other, _) = tokio_tungstenite::connect_async(format!("ws://{addr}")).await.unwrap();
    assert!(matches!(recv(&mut other).await.msg, Message::Error { .. }));

    ws.send(send(1, start_msg(ControllerKind::Shared))).await.unwrap();
    let mut last = 0;
    let mut candidate = None;
    let mut states = 0;
    while candidate.is_none() || states < 3 {
        let env = recv(&mut ws).await;
        assert!(env.seq > last);
        last = env.seq;
        match env.msg {
            Message::Suggestions { candidates, .. } => candidate = Some(candidates[0].id.clone()),
            Message::State { .. } => states += 1,
            _ => {}
        }
    }

    // Garbage gets an error in sequence, and the session carries on.
    ws.send(Ws::Binary(vec![0, 0, 0, 3, b'{', b'}', b'x'])).await.unwrap();
    loop {
        let env = recv(&mut ws).await;
        assert!(env.seq > last);
        last = env.seq;
        if matches!(env.msg, Message::Error { .. }) {
            break;
        }
    }

    ws.send(send(2, Message::Select { id: candidate.unwrap() })).await.unwrap();
    loop {
        let env = recv(&mut ws).await;
        assert!(env.seq > last);
        last = env.seq;
        if let Message::State { mode, s, .. } = env.msg {
            if mode == Mode::SharedFollowing {
                assert_eq!(s, 0.0);
                break;
            }
        }
    }

    ws.send(send(3, Message::TrialCtl { action: TrialAction::Abort, spec: None })).await.unwrap();
    loop {
        let env = recv(&mut ws).await;
        if matches!(env.msg, Message::TrialEvent { kind: EventKind::Abort, .. }) {
            break;
        }
    }
    // The record is written on the next sim tick.
    let mut written = Vec::new();
    for _ in 0..200 {
        tokio::time::sleep(Duration::from_millis(10)).await;
        if let Ok(text) = std::fs::read_to_string(&records) {
            written = parse_lines(text.as_bytes()).unwrap();
            if !written.is_empty() {
                break;
            }
        }
    }
    assert_eq!(written.len(), 1);
    assert_eq!(written[0].outcome, Outcome::Aborted);

    ws.close(None).await.unwrap();
    stop.send(()).unwrap();
    handle.await.unwrap().unwrap();
}
