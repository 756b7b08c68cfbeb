use std::sync::atomic::Ordering;
use std::time::Duration;

use compliant_bridge::protocol::{Message, ObservationMessage};
use compliant_bridge::{encode_observation, BridgeError, ClientConfig, ErrorCode, MockServer, RemotePolicy, ServerConfig};
use compliant_core::advisor::BackendHandle;
use compliant_core::datalog::ControlMode;
use compliant_core::orchestrator::{run_episode, EpisodeConfig};
use compliant_core::policy::{Policy, PolicyHandle, ScriptedPolicy};
use compliant_core::sim::{find_scenario, Waypoint};
use compliant_core::types::{ObservationFrame, Vec3};
use tungstenite::Message as WsMessage;

fn line_script() -> PolicyHandle {
    PolicyHandle::scripted(vec![Waypoint { position: Vec3::new(0.3, 0.0, 0.0), gripper: 0.0 }])
}

fn client(server: &MockServer) -> RemotePolicy {
    RemotePolicy::connect(ClientConfig::new(server.url())).unwrap()
}

#[test]
fn origin_observation_gets_a_capped_step_chunk() {
    let server = MockServer::bind("127.0.0.1:0", line_script()).unwrap();
    let mut remote = client(&server);
    let chunk = remote.next_chunk(&ObservationFrame::default()).unwrap();
    assert_eq!(chunk.seq, 1);
    assert_eq!(chunk.actions.len(), 8);
    for a in &chunk.actions {
        assert_eq!(a.to_array(), [0.01, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }
}

#[test]
fn remote_policy_reproduces_the_in_process_episode() {
    let spec = find_scenario("push_box").unwrap();
    let handle = PolicyHandle::noisy(spec.script.clone(), 0.0003, 11);
    let cfg = EpisodeConfig::new(ControlMode::Adaptor);

    let mut local = ScriptedPolicy::new(handle.clone()).unwrap();
    let expected = run_episode(&spec, &mut local, BackendHandle::Heuristic, &cfg).unwrap();

    let server = MockServer::bind("127.0.0.1:0", handle).unwrap();
    let mut remote = client(&server);
    let got = run_episode(&spec, &mut remote, BackendHandle::Heuristic, &cfg).unwrap();

    assert_eq!(got.outcome, expected.outcome);
    assert_eq!(got.stats, expected.stats);
    assert_eq!(got.records.len(), expected.records.len());
    let worst = got
        .records
        .iter()
        .zip(&expected.records)
        .flat_map(|(a, b)| a.pose.iter().zip(&b.pose).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-9, "trajectories differ by {worst}");
}

#[test]
fn malformed_frames_get_bad_request_and_the_connection_survives() {
    let server = MockServer::bind("127.0.0.1:0", line_script()).unwrap();
    let (mut ws, _) = tungstenite::connect(server.url()).unwrap();
    let mut ask = |text: String| -> Message {
        ws.send(WsMessage::text(text)).unwrap();
        loop {
            if let WsMessage::Text(t) = ws.read().unwrap() {
                return Message::from_json(t.as_str()).unwrap();
            }
        }
    };
    for bad in ["{\"type\":", "[]", "{\"type\":\"action_chunk\",\"seq\":1,\"actions\":[],\"horizon\":0}"] {
        match ask(bad.to_string()) {
            Message::Error(e) => assert_eq!(e.code, ErrorCode::BadRequest),
            other => panic!("{other:?}"),
        }
    }
    let good = String::from_utf8(encode_observation(&ObservationFrame::default(), 9)).unwrap();
    match ask(good) {
        Message::ActionChunk(c) => assert_eq!(c.seq, 9),
        other => panic!("{other:?}"),
    }
}

#[test]
fn interleaved_clients_with_different_seeds_are_independent() {
    let handle = PolicyHandle::noisy(line_script().waypoints, 0.002, 0);
    let server = MockServer::bind("127.0.0.1:0", handle.clone()).unwrap();
    let connect = |seed: u64| RemotePolicy::connect(ClientConfig::new(format!("{}/?seed={seed}", server.url()))).unwrap();
    let (mut a, mut b) = (connect(1), connect(2));
    let obs = ObservationFrame::default();
    let mut stream_a = Vec::new();
    let mut stream_b = Vec::new();
    for _ in 0..5 {
        stream_a.push(a.next_chunk(&obs).unwrap().actions);
        stream_b.push(b.next_chunk(&obs).unwrap().actions);
    }
    assert_ne!(stream_a, stream_b);

    // Each stream equals an isolated in-process run with the same seed.
    for (seed, stream) in [(1, &stream_a), (2, &stream_b)] {
        let mut local = ScriptedPolicy::new(PolicyHandle::noisy(handle.waypoints.clone(), 0.002, seed)).unwrap();
        for actions in stream {
            assert_eq!(&local.next_chunk(&obs).unwrap().actions, actions);
        }
    }
}

#[test]
fn reset_restarts_the_remote_script() {
    let server = MockServer::bind("127.0.0.1:0", PolicyHandle::noisy(line_script().waypoints, 0.002, 3)).unwrap();
    let mut remote = client(&server);
    let obs = ObservationFrame::default();
    let first = remote.next_chunk(&obs).unwrap();
    remote.next_chunk(&obs).unwrap();
    remote.reset();
    let again = remote.next_chunk(&obs).unwrap();
    assert_eq!(again.seq, 1);
    assert_eq!(again.actions, first.actions);
}

#[test]
fn second_bind_on_the_same_port_fails() {
    let server = MockServer::bind("127.0.0.1:0", line_script()).unwrap();
    let err = MockServer::bind(&server.local_addr().to_string(), line_script()).err().unwrap();
    assert!(matches!(err, BridgeError::Bind { .. }), "{err}");
}

#[test]
fn connections_past_the_limit_are_told_overloaded() {
    let cfg = ServerConfig { max_connections: 1, ..ServerConfig::default() };
    let server = MockServer::bind_with("127.0.0.1:0", line_script(), cfg).unwrap();
    let mut first = client(&server);
    first.next_chunk(&ObservationFrame::default()).unwrap();
    let mut second = RemotePolicy::connect(ClientConfig { retries: 0, ..ClientConfig::new(server.url()) }).unwrap();
    match second.next_chunk(&ObservationFrame::default()) {
        Err(e) => assert!(e.to_string().contains("Overloaded"), "{e}"),
        Ok(c) => panic!("expected rejection, got {c:?}"),
    }
}

#[test]
fn shutdown_closes_open_connections() {
    let server = MockServer::bind("127.0.0.1:0", line_script()).unwrap();
    let url = server.url();
    let mut remote = client(&server);
    remote.next_chunk(&ObservationFrame::default()).unwrap();
    let flag = server.shutdown_flag();
    let waiter = std::thread::spawn(move || server.wait());
    flag.store(true, Ordering::SeqCst);
    waiter.join().unwrap();
    assert!(remote.next_chunk(&ObservationFrame::default()).is_err());
    let quick = ClientConfig { timeout: Duration::from_millis(200), retries: 0, ..ClientConfig::new(url) };
    assert!(RemotePolicy::connect(quick).is_err());
}

#[test]
fn unreachable_server_fails_after_retries() {
    let addr = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let cfg = ClientConfig { timeout: Duration::from_millis(200), retries: 1, ..ClientConfig::new(format!("ws://{addr}")) };
    assert!(RemotePolicy::connect(cfg).is_err());
}

#[test]
fn observation_message_shape_is_public() {
    let msg: Message = Message::from_json(std::str::from_utf8(&encode_observation(&ObservationFrame::default(), 2)).unwrap()).unwrap();
    assert!(matches!(msg, Message::Observation(ObservationMessage { seq: 2, .. })));
}
