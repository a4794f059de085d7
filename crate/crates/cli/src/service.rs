//! Websocket bridge: one isolated simulator per connection, stepped at a fixed
//! wall-clock cadence with the latest commanded pose held between messages.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use lft_core::insertion_sim::{streams, Pose, SceneConfig, Simulator};
use lft_core::recording::{self, Metadata, RawStream, Source};
use tokio::net::TcpListener;
use tokio::time::MissedTickBehavior;

use crate::protocol::{ClientMessage, ServerMessage};
use crate::{CliError, Result};

/// Broadcast and recording period.
pub const TICK: Duration = Duration::from_millis(10);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub scene: SceneConfig,
    /// Directory receiving `save_as` archives.
    pub out_dir: PathBuf,
    pub tick: Duration,
}

impl ServiceConfig {
    pub fn new(scene: SceneConfig, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            scene,
            out_dir: out_dir.into(),
            tick: TICK,
        }
    }
}

pub fn router(cfg: ServiceConfig) -> Router {
    Router::new()
        .route("/", get(upgrade))
        .route("/ws", get(upgrade))
        .with_state(Arc::new(cfg))
}

/// Serves on an already bound listener until the task is cancelled.
pub async fn serve_on(listener: TcpListener, cfg: ServiceConfig) -> Result<()> {
    axum::serve(listener, router(cfg)).await.map_err(CliError::input)
}

pub async fn serve(bind: SocketAddr, cfg: ServiceConfig) -> Result<()> {
    let listener = TcpListener::bind(bind)
        .await
        .map_err(|e| CliError::input(format!("cannot bind {bind}: {e}")))?;
    tracing::info!(addr = %listener.local_addr().map_err(CliError::input)?, "serving");
    serve_on(listener, cfg).await
}

async fn upgrade(ws: WebSocketUpgrade, State(cfg): State<Arc<ServiceConfig>>) -> Response {
    ws.on_upgrade(move |socket| run_session(socket, cfg))
}

struct Recorder {
    cmd: RawStream,
    pose: RawStream,
    wrench: RawStream,
    grip: RawStream,
}

impl Recorder {
    fn new() -> Self {
        Self {
            cmd: RawStream::new(streams::CMD, streams::POSE_UNITS),
            pose: RawStream::new(streams::POSE, streams::POSE_UNITS),
            wrench: RawStream::new(streams::WRENCH, streams::WRENCH_UNITS),
            grip: RawStream::new(streams::GRIP, streams::GRIP_UNITS),
        }
    }
}

/// Per-connection state; never shared with another connection.
pub struct Session {
    sim: Simulator,
    cmd: Pose,
    grip: f64,
    recorder: Option<Recorder>,
    out_dir: PathBuf,
    steps_per_tick: usize,
}

impl Session {
    pub fn new(cfg: &ServiceConfig) -> Result<Self> {
        let scene = cfg.scene.clone();
        let start = scene.nominal_start();
        let steps_per_tick = (cfg.tick.as_secs_f64() / scene.dt).round().max(1.0) as usize;
        Ok(Self {
            sim: Simulator::new(scene, start).map_err(CliError::input)?,
            cmd: start,
            grip: 1.0,
            recorder: None,
            out_dir: cfg.out_dir.clone(),
            steps_per_tick,
        })
    }

    pub fn recording(&self) -> bool {
        self.recorder.is_some()
    }

    /// Advances one tick with the latched command and samples the recorder.
    pub fn tick(&mut self) -> ServerMessage {
        for _ in 0..self.steps_per_tick {
            if let Err(e) = self.sim.step(self.cmd) {
                let start = self.sim.scene().nominal_start();
                self.sim.reset(start);
                self.cmd = start;
                self.recorder = None;
                return ServerMessage::error(format!("simulation reset: {e}"));
            }
        }
        let s = self.sim.state();
        if let Some(r) = &mut self.recorder {
            r.cmd.push(s.time, s.cmd.to_array().to_vec());
            r.pose.push(s.time, s.pose.to_array().to_vec());
            r.wrench.push(s.time, s.wrench.to_array().to_vec());
            r.grip.push(s.time, vec![self.grip]);
        }
        ServerMessage::State {
            t: s.time,
            cmd: s.cmd.to_array(),
            actual: s.pose.to_array(),
            wrench: s.wrench.to_array(),
            contacts: s.contacts.as_vec(),
            recording: self.recorder.is_some(),
        }
    }

    /// Applies one client text frame; returns a reply frame when there is one.
    pub fn handle(&mut self, text: &str) -> Option<ServerMessage> {
        let msg = match serde_json::from_str::<ClientMessage>(text) {
            Ok(m) => m,
            Err(e) => return Some(ServerMessage::error(format!("malformed message: {e}"))),
        };
        match msg {
            ClientMessage::Pose { x, y, yaw, grip } => {
                let pose = Pose::new(x, y, yaw);
                if !pose.is_finite() || !grip.is_finite() {
                    return Some(ServerMessage::error("pose and grip must be finite"));
                }
                self.cmd = pose;
                self.grip = grip.clamp(0.0, 1.0);
                None
            }
            ClientMessage::StartRecording => {
                if self.recorder.is_some() {
                    return Some(ServerMessage::error("already recording"));
                }
                self.recorder = Some(Recorder::new());
                None
            }
            ClientMessage::StopRecording { save_as } => Some(self.stop_recording(&save_as)),
            ClientMessage::Reset { dx, dy, dyaw } => {
                if self.recorder.is_some() {
                    return Some(ServerMessage::error("stop the recording before resetting"));
                }
                let start = self.sim.scene().nominal_start().offset([dx, dy, dyaw]);
                if !start.is_finite() {
                    return Some(ServerMessage::error("reset offsets must be finite"));
                }
                self.sim.reset(start);
                self.cmd = start;
                None
            }
        }
    }

    fn stop_recording(&mut self, save_as: &str) -> ServerMessage {
        let Some(r) = self.recorder.take() else {
            return ServerMessage::error("stop_recording without an active recording");
        };
        if !valid_name(save_as) {
            return ServerMessage::error(format!("invalid archive name {save_as:?}"));
        }
        let raw = [r.cmd, r.pose, r.wrench, r.grip];
        let rec = match recording::synchronize(&raw, recording::DEFAULT_DT, Metadata::new("plug_insertion", Source::Teleop))
        {
            Ok(rec) => rec,
            Err(e) => return ServerMessage::error(format!("recording discarded: {e}")),
        };
        let path = self.out_dir.join(save_as);
        if path.exists() {
            return ServerMessage::error(format!("archive {} already exists", path.display()));
        }
        match recording::write_archive(&rec, &path) {
            Ok(()) => {
                tracing::info!(frames = rec.frames, path = %path.display(), "saved teleoperation recording");
                ServerMessage::Saved {
                    save_as: save_as.to_string(),
                    frames: rec.frames,
                }
            }
            Err(e) => ServerMessage::error(format!("archive write failed: {e}")),
        }
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && Path::new(name).components().count() == 1
        && !name.contains(['/', '\\'])
}

async fn send(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    match serde_json::to_string(msg) {
        Ok(text) => socket.send(Message::Text(text)).await.is_ok(),
        Err(_) => false,
    }
}

async fn run_session(mut socket: WebSocket, cfg: Arc<ServiceConfig>) {
    let mut session = match Session::new(&cfg) {
        Ok(s) => s,
        Err(e) => {
            send(&mut socket, &ServerMessage::error(e.to_string())).await;
            return;
        }
    };
    let mut ticker = tokio::time::interval(cfg.tick);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);
    loop {
        tokio::select! {
            _ = ticker.tick() => {
                let frame = session.tick();
                if !send(&mut socket, &frame).await {
                    break;
                }
            }
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    if let Some(reply) = session.handle(&text) {
                        if !send(&mut socket, &reply).await {
                            break;
                        }
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    if !send(&mut socket, &ServerMessage::error("binary frames are not supported")).await {
                        break;
                    }
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            }
        }
    }
}
