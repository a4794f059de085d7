use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use lft_cli::protocol::{ClientMessage, ServerMessage};
use lft_cli::service::{self, ServiceConfig, Session};
use lft_core::insertion_sim::{streams, SceneConfig};
use lft_core::recording;
use tokio::net::TcpListener;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<tokio::net::TcpStream>>;

async fn start(out_dir: &Path) -> SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let cfg = ServiceConfig::new(SceneConfig::default(), out_dir);
    tokio::spawn(service::serve_on(listener, cfg));
    addr
}

async fn connect(addr: SocketAddr) -> Ws {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    ws
}

async fn next(ws: &mut Ws) -> ServerMessage {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next())
            .await
            .expect("server went quiet")
            .expect("stream ended")
            .unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

/// Skips state frames until a non-state message arrives.
async fn next_reply(ws: &mut Ws) -> ServerMessage {
    loop {
        let m = next(ws).await;
        if !matches!(m, ServerMessage::State { .. }) {
            return m;
        }
    }
}

async fn send(ws: &mut Ws, msg: &ClientMessage) {
    ws.send(Message::Text(serde_json::to_string(msg).unwrap())).await.unwrap();
}

async fn send_raw(ws: &mut Ws, text: &str) {
    ws.send(Message::Text(text.to_string())).await.unwrap();
}

fn actual(m: &ServerMessage) -> [f64; 3] {
    match m {
        ServerMessage::State { actual, .. } => *actual,
        other => panic!("expected state, got {other:?}"),
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn loopback_recording_produces_a_hundred_frames() {
    let dir = tempfile::tempdir().unwrap();
    let addr = start(dir.path()).await;
    let mut ws = connect(addr).await;

    let first = next(&mut ws).await;
    let hold = actual(&first);
    send(&mut ws, &ClientMessage::StartRecording).await;
    let mut recorded = 0;
    while recorded < 100 {
        if let ServerMessage::State { recording, actual, .. } = next(&mut ws).await {
            if recording {
                recorded += 1;
            }
            send(
                &mut ws,
                &ClientMessage::Pose {
                    x: actual[0],
                    y: actual[1],
                    yaw: actual[2],
                    grip: 1.0,
                },
            )
            .await;
        }
    }
    send(&mut ws, &ClientMessage::StopRecording { save_as: "hold".into() }).await;
    let frames = match next_reply(&mut ws).await {
        ServerMessage::Saved { save_as, frames } => {
            assert_eq!(save_as, "hold");
            frames
        }
        other => panic!("{other:?}"),
    };
    assert!((95..=105).contains(&frames), "{frames}");

    let rec = recording::read_archive(&dir.path().join("hold")).unwrap();
    assert_eq!(rec.frames, frames);
    assert!((rec.dt - 0.01).abs() < 1e-15);
    for name in [streams::CMD, streams::POSE, streams::WRENCH, streams::GRIP] {
        assert_eq!(rec.stream(name).unwrap().frames(), frames, "{name}");
    }
    let pose = rec.stream(streams::POSE).unwrap();
    for row in pose.rows() {
        for i in 0..3 {
            assert!((row[i] - hold[i]).abs() < 1e-12);
        }
    }
    assert!(rec.stream(streams::GRIP).unwrap().data.iter().all(|&g| g == 1.0));

    // a second stop is an error and does not touch the saved archive
    send(&mut ws, &ClientMessage::StopRecording { save_as: "hold".into() }).await;
    assert!(matches!(next_reply(&mut ws).await, ServerMessage::Error { .. }));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn sessions_do_not_share_simulators() {
    let dir = tempfile::tempdir().unwrap();
    let addr = start(dir.path()).await;
    let mut a = connect(addr).await;
    let mut b = connect(addr).await;
    let start_a = actual(&next(&mut a).await);
    let start_b = actual(&next(&mut b).await);
    assert_eq!(start_a, start_b);

    send(
        &mut a,
        &ClientMessage::Pose {
            x: start_a[0] + 0.03,
            y: start_a[1],
            yaw: 0.0,
            grip: 1.0,
        },
    )
    .await;
    let mut last_a = start_a;
    let mut last_b = start_b;
    for _ in 0..50 {
        last_a = actual(&next(&mut a).await);
        last_b = actual(&next(&mut b).await);
    }
    assert!(last_a[0] - start_a[0] > 0.02, "{last_a:?}");
    assert_eq!(last_b, start_b);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stop_without_start_is_an_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let addr = start(dir.path()).await;
    let mut ws = connect(addr).await;
    send(&mut ws, &ClientMessage::StopRecording { save_as: "x".into() }).await;
    match next_reply(&mut ws).await {
        ServerMessage::Error { reason } => assert!(reason.contains("without")),
        other => panic!("{other:?}"),
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn malformed_messages_keep_the_session_alive() {
    let dir = tempfile::tempdir().unwrap();
    let addr = start(dir.path()).await;
    let mut ws = connect(addr).await;
    for bad in [
        "not json",
        r#"{"type":"pose","x":"a","y":0,"yaw":0}"#,
        r#"{"type":"teleport"}"#,
        r#"{"type":"pose","x":0,"y":0,"yaw":0,"extra":1}"#,
    ] {
        send_raw(&mut ws, bad).await;
        assert!(matches!(next_reply(&mut ws).await, ServerMessage::Error { .. }), "{bad}");
    }
    assert!(matches!(next(&mut ws).await, ServerMessage::State { .. }));
}

#[test]
fn state_frames_follow_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Session::new(&ServiceConfig::new(SceneConfig::default(), dir.path())).unwrap();
    let frame = serde_json::to_value(s.tick()).unwrap();
    assert_eq!(frame["type"], "state");
    assert!((frame["t"].as_f64().unwrap() - 0.01).abs() < 1e-12);
    for key in ["cmd", "actual", "wrench"] {
        assert_eq!(frame[key].as_array().unwrap().len(), 3, "{key}");
    }
    assert_eq!(frame["contacts"].as_array().unwrap().len(), 5);
    assert_eq!(frame["recording"], false);
    let keys: Vec<&String> = frame.as_object().unwrap().keys().collect();
    assert_eq!(keys.len(), 7);

    let err = serde_json::to_value(ServerMessage::error("x")).unwrap();
    assert_eq!(err, serde_json::json!({"type": "error", "reason": "x"}));
}

#[test]
fn commands_are_latched_between_messages() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Session::new(&ServiceConfig::new(SceneConfig::default(), dir.path())).unwrap();
    assert!(s.handle(r#"{"type":"pose","x":-0.03,"y":0.1,"yaw":0.0}"#).is_none());
    for _ in 0..100 {
        if let ServerMessage::State { cmd, .. } = s.tick() {
            assert_eq!(cmd, [-0.03, 0.1, 0.0]);
        }
    }
    let ServerMessage::State { actual, .. } = s.tick() else { panic!() };
    assert!((actual[0] + 0.03).abs() < 1e-3 && (actual[1] - 0.1).abs() < 1e-3);
}

#[test]
fn reset_and_recording_rules() {
    let dir = tempfile::tempdir().unwrap();
    let scene = SceneConfig::default();
    let mut s = Session::new(&ServiceConfig::new(scene.clone(), dir.path())).unwrap();
    assert!(s.handle(r#"{"type":"reset","dx":0.01}"#).is_none());
    let ServerMessage::State { actual, .. } = s.tick() else { panic!() };
    assert_eq!(actual, [scene.nominal_start_x + 0.01, scene.nominal_start_y, 0.0]);

    assert!(s.handle(r#"{"type":"start_recording"}"#).is_none());
    assert!(s.recording());
    assert!(matches!(s.handle(r#"{"type":"start_recording"}"#), Some(ServerMessage::Error { .. })));
    assert!(matches!(s.handle(r#"{"type":"reset"}"#), Some(ServerMessage::Error { .. })));
    for _ in 0..20 {
        s.tick();
    }
    for bad in ["", "..", "a/b"] {
        let msg = format!(r#"{{"type":"stop_recording","save_as":"{bad}"}}"#);
        assert!(matches!(s.handle(&msg), Some(ServerMessage::Error { .. })), "{bad:?}");
        assert!(!s.recording());
        assert!(s.handle(r#"{"type":"start_recording"}"#).is_none());
        for _ in 0..20 {
            s.tick();
        }
    }
    assert!(matches!(
        s.handle(r#"{"type":"stop_recording","save_as":"ok"}"#),
        Some(ServerMessage::Saved { frames: 20, .. })
    ));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn client_messages_round_trip_through_the_schema() {
    let msgs = [
        ClientMessage::Pose {
            x: 0.1,
            y: 0.2,
            yaw: -0.3,
            grip: 0.5,
        },
        ClientMessage::StartRecording,
        ClientMessage::StopRecording { save_as: "demo1".into() },
        ClientMessage::Reset {
            dx: 0.01,
            dy: 0.0,
            dyaw: -0.1,
        },
    ];
    for m in msgs {
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<ClientMessage>(&text).unwrap(), m);
    }
    let p: ClientMessage = serde_json::from_str(r#"{"type":"pose","x":0.1,"y":0.2,"yaw":0}"#).unwrap();
    assert_eq!(
        p,
        ClientMessage::Pose {
            x: 0.1,
            y: 0.2,
            yaw: 0.0,
            grip: 1.0
        }
    );
}
