//! Websocket message schema (JSON text frames).

use serde::{Deserialize, Serialize};

fn full_grip() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Pose {
        x: f64,
        y: f64,
        yaw: f64,
        #[serde(default = "full_grip")]
        grip: f64,
    },
    StartRecording,
    StopRecording {
        save_as: String,
    },
    /// Restart the session from the nominal start shifted by the offsets.
    Reset {
        #[serde(default)]
        dx: f64,
        #[serde(default)]
        dy: f64,
        #[serde(default)]
        dyaw: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State {
        t: f64,
        cmd: [f64; 3],
        actual: [f64; 3],
        wrench: [f64; 3],
        /// Per-corner flags followed by the body-collision flag.
        contacts: Vec<bool>,
        recording: bool,
    },
    /// Confirms a `stop_recording`.
    Saved {
        save_as: String,
        frames: usize,
    },
    Error {
        reason: String,
    },
}

impl ServerMessage {
    pub fn error(reason: impl Into<String>) -> Self {
        Self::Error { reason: reason.into() }
    }
}
