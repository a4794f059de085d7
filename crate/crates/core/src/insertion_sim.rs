//! Planar (x, y, yaw) compliant plug insertion.
//!
//! The socket is a strip whose top face lies on `y = 0`, with a slot centered
//! on `x = 0` running down to `y = −socket_depth` and a 45° chamfer at its
//! mouth. The end-effector pose is the gripper point at the top center of the
//! plug; the plug hangs `plug_length` below it along its own axis.
//!
//! Contact is a penalty model on the four plug corners. The end-effector is
//! pulled towards the commanded pose through a spring-damper virtual coupling
//! acting on a unit mass and unit inertia, integrated with semi-implicit Euler.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::SquareMatrix;
use crate::recording::{self, Metadata, RawStream, Recording, Source};

/// Abort threshold for any state component.
const INSTABILITY_LIMIT: f64 = 1e6;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("non-finite command at t = {0}")]
    NonFiniteCommand(f64),
    #[error("simulation unstable at t = {time}: {detail}")]
    Unstable { time: f64, detail: String },
    #[error("demonstrator failed: {0}")]
    PolicyFailure(String),
    #[error(transparent)]
    Recording(#[from] recording::RecordingError),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

/// Planar pose or twist `(x, y, yaw)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.yaw]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn offset(self, d: [f64; 3]) -> Self {
        Self::new(self.x + d[0], self.y + d[1], self.yaw + d[2])
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yaw.is_finite()
    }
}

/// Planar wrench `(Fx, Fy, Mz)` in N, N, N·m. Forces in world axes, moment
/// about the end-effector point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub fx: f64,
    pub fy: f64,
    pub mz: f64,
}

impl Wrench {
    pub fn to_array(self) -> [f64; 3] {
        [self.fx, self.fy, self.mz]
    }

    pub fn force_norm(self) -> f64 {
        self.fx.hypot(self.fy)
    }
}

/// Scene geometry, contact law and coupling parameters (SI units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub slot_width: f64,
    pub socket_depth: f64,
    pub chamfer_width: f64,
    pub chamfer_angle: f64,
    pub plug_width: f64,
    pub plug_length: f64,
    /// Half-width of the strip body around the slot.
    pub wall_extent: f64,
    pub contact_stiffness: f64,
    pub contact_damping: f64,
    pub friction: f64,
    pub friction_v_eps: f64,
    pub coupling_stiffness: f64,
    pub coupling_damping: f64,
    pub coupling_rot_stiffness: f64,
    pub coupling_rot_damping: f64,
    pub dt: f64,
    pub nominal_start_x: f64,
    pub nominal_start_y: f64,
    pub nominal_start_yaw: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        let k = 2000.0;
        let k_rot = 200.0;
        Self {
            slot_width: 0.020,
            socket_depth: 0.030,
            chamfer_width: 0.003,
            chamfer_angle: FRAC_PI_4,
            plug_width: 0.018,
            plug_length: 0.060,
            wall_extent: 0.080,
            contact_stiffness: 5e4,
            contact_damping: 50.0,
            friction: 0.3,
            friction_v_eps: 1e-3,
            coupling_stiffness: k,
            coupling_damping: 2.0 * f64::sqrt(k),
            coupling_rot_stiffness: k_rot,
            coupling_rot_damping: 2.0 * f64::sqrt(k_rot),
            dt: 1e-3,
            nominal_start_x: -0.040,
            nominal_start_y: 0.110,
            nominal_start_yaw: 0.0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::InvalidScene(m));
        let positive = [
            ("slot_width", self.slot_width),
            ("socket_depth", self.socket_depth),
            ("chamfer_width", self.chamfer_width),
            ("plug_width", self.plug_width),
            ("plug_length", self.plug_length),
            ("wall_extent", self.wall_extent),
            ("contact_stiffness", self.contact_stiffness),
            ("coupling_stiffness", self.coupling_stiffness),
            ("coupling_rot_stiffness", self.coupling_rot_stiffness),
            ("friction_v_eps", self.friction_v_eps),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let non_negative = [
            ("contact_damping", self.contact_damping),
            ("friction", self.friction),
            ("coupling_damping", self.coupling_damping),
            ("coupling_rot_damping", self.coupling_rot_damping),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.chamfer_angle > 0.0 && self.chamfer_angle < std::f64::consts::FRAC_PI_2) {
            return bad(format!("chamfer_angle must lie in (0, π/2), got {}", self.chamfer_angle));
        }
        if self.plug_width >= self.slot_width {
            return bad(format!(
                "plug_width ({}) must be smaller than slot_width ({})",
                self.plug_width, self.slot_width
            ));
        }
        if self.chamfer_width * self.chamfer_angle.tan() >= self.socket_depth {
            return bad("chamfer must be shallower than the socket".into());
        }
        if self.wall_extent <= self.slot_width / 2.0 + self.chamfer_width {
            return bad("wall_extent must reach beyond the chamfer".into());
        }
        if !self.nominal_start().is_finite() {
            return bad("nominal start must be finite".into());
        }
        Ok(())
    }

    pub fn nominal_start(&self) -> Pose {
        Pose::new(self.nominal_start_x, self.nominal_start_y, self.nominal_start_yaw)
    }

    fn chamfer_drop(&self) -> f64 {
        self.chamfer_width * self.chamfer_angle.tan()
    }

    /// Plug depth reached when seated at `success_fraction` of the socket.
    pub fn depth_threshold(&self, success_fraction: f64) -> f64 {
        success_fraction * self.socket_depth
    }
}

/// Socket surface a corner is pushed out of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    Top,
    Chamfer,
    Wall,
    Floor,
}

/// Plug corners in order: tip-left, tip-right, top-left, top-right (plug frame).
pub fn plug_corners(pose: Pose, scene: &SceneConfig) -> [[f64; 2]; 4] {
    let a = scene.plug_width / 2.0;
    let l = scene.plug_length;
    let local = [[-a, -l], [a, -l], [-a, 0.0], [a, 0.0]];
    local.map(|p| {
        let r = rotate(p, pose.yaw);
        [pose.x + r[0], pose.y + r[1]]
    })
}

fn rotate(p: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [p[0] * c - p[1] * s, p[0] * s + p[1] * c]
}

/// Center of the plug's leading edge.
pub fn tip_center(pose: Pose, scene: &SceneConfig) -> [f64; 2] {
    let r = rotate([0.0, -scene.plug_length], pose.yaw);
    [pose.x + r[0], pose.y + r[1]]
}

/// Depth of the plug tip below the socket's top face.
pub fn insertion_depth(pose: Pose, scene: &SceneConfig) -> f64 {
    -tip_center(pose, scene)[1]
}

/// Horizontal distance of the plug tip from the slot axis.
pub fn lateral_error(pose: Pose, scene: &SceneConfig) -> f64 {
    tip_center(pose, scene)[0].abs()
}

/// Penetration of a point into the socket solid: `(face, depth, outward normal)`.
pub fn penetration(p: [f64; 2], scene: &SceneConfig) -> Option<(Face, f64, [f64; 2])> {
    let [x, y] = p;
    if y > 0.0 || x.abs() > scene.wall_extent {
        return None;
    }
    let hw = scene.slot_width / 2.0;
    let ax = x.abs();
    let side = if x < 0.0 { -1.0 } else { 1.0 };
    if ax <= hw {
        let depth = -scene.socket_depth - y;
        return (depth > 0.0).then_some((Face::Floor, depth, [0.0, 1.0]));
    }
    // block on the +x side in mirrored coordinates; chamfer from (hw, −drop) to (hw + c, 0)
    let c = scene.chamfer_width;
    let drop = scene.chamfer_drop();
    let len = c.hypot(drop);
    let n_ch = [-drop / len, c / len];
    let chamfer_depth = -((ax - hw) * n_ch[0] + (y + drop) * n_ch[1]);
    if chamfer_depth <= 0.0 {
        return None;
    }
    let candidates = [
        (Face::Top, -y, [0.0, 1.0]),
        (Face::Chamfer, chamfer_depth, n_ch),
        (Face::Wall, ax - hw, [-1.0, 0.0]),
    ];
    let (face, depth, n) = candidates
        .into_iter()
        .fold(None::<(Face, f64, [f64; 2])>, |best, c| match best {
            Some(b) if b.1 <= c.1 => Some(b),
            _ => Some(c),
        })
        .unwrap();
    (depth > 0.0).then_some((face, depth, [n[0] * side, n[1]]))
}

/// Per-corner contact detail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerContact {
    pub corner: usize,
    pub face: Face,
    pub penetration: f64,
    pub normal: [f64; 2],
    /// Non-negative normal force magnitude.
    pub normal_force: f64,
    /// Signed friction force along the tangent `(−n_y, n_x)`.
    pub friction_force: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactFlags {
    pub corners: [bool; 4],
    /// A corner is pressed into the strip's top face outside the slot opening.
    pub body_collision: bool,
}

impl ContactFlags {
    pub fn as_vec(&self) -> Vec<bool> {
        let mut v = self.corners.to_vec();
        v.push(self.body_collision);
        v
    }

    pub fn any(&self) -> bool {
        self.body_collision || self.corners.iter().any(|&c| c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactResult {
    pub wrench: Wrench,
    pub flags: ContactFlags,
    pub contacts: Vec<CornerContact>,
}

/// Penalty contact wrench on the plug for pose and twist `vel`.
pub fn contact_wrench(pose: Pose, vel: Pose, scene: &SceneConfig) -> ContactResult {
    let mut wrench = Wrench::default();
    let mut flags = ContactFlags::default();
    let mut contacts = Vec::new();
    for (i, p) in plug_corners(pose, scene).into_iter().enumerate() {
        let Some((face, depth, n)) = penetration(p, scene) else {
            continue;
        };
        let r = [p[0] - pose.x, p[1] - pose.y];
        let v = [vel.x - vel.yaw * r[1], vel.y + vel.yaw * r[0]];
        let depth_rate = -(v[0] * n[0] + v[1] * n[1]);
        let fn_mag = (scene.contact_stiffness * depth + scene.contact_damping * depth_rate).max(0.0);
        let t = [-n[1], n[0]];
        let v_t = v[0] * t[0] + v[1] * t[1];
        let ft = -scene.friction * fn_mag * (v_t / scene.friction_v_eps).tanh();
        let f = [fn_mag * n[0] + ft * t[0], fn_mag * n[1] + ft * t[1]];
        wrench.fx += f[0];
        wrench.fy += f[1];
        wrench.mz += r[0] * f[1] - r[1] * f[0];
        flags.corners[i] = true;
        if face == Face::Top {
            flags.body_collision = true;
        }
        contacts.push(CornerContact {
            corner: i,
            face,
            penetration: depth,
            normal: n,
            normal_force: fn_mag,
            friction_force: ft,
        });
    }
    ContactResult {
        wrench,
        flags,
        contacts,
    }
}

/// Stepped world state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub time: f64,
    pub cmd: Pose,
    pub pose: Pose,
    pub vel: Pose,
    pub contacts: ContactFlags,
    /// Contact wrench applied during the last step, as a wrist sensor reads it.
    pub wrench: Wrench,
}

impl SimState {
    pub fn at_rest(pose: Pose) -> Self {
        Self {
            time: 0.0,
            cmd: pose,
            pose,
            vel: Pose::default(),
            contacts: ContactFlags::default(),
            wrench: Wrench::default(),
        }
    }

    /// Coupling energy: kinetic plus spring potential (translational and rotational).
    pub fn coupling_energy(&self, scene: &SceneConfig) -> f64 {
        let kinetic = 0.5 * (self.vel.x.powi(2) + self.vel.y.powi(2) + self.vel.yaw.powi(2));
        let dx = self.cmd.x - self.pose.x;
        let dy = self.cmd.y - self.pose.y;
        let dr = self.cmd.yaw - self.pose.yaw;
        kinetic + 0.5 * scene.coupling_stiffness * (dx * dx + dy * dy) + 0.5 * scene.coupling_rot_stiffness * dr * dr
    }
}

/// Advances the state by exactly one `scene.dt`.
///
/// Normal forces are explicit. Friction is applied as a damping term with the
/// secant coefficient `μ·F_n·tanh(v_t/v_eps)/v_t`, solved implicitly in the
/// velocity update and then clamped to `μ·F_n`, so sticking contacts do not
/// chatter at `v_eps` far below `μ·F_n·dt`.
pub fn step(state: &SimState, cmd: Pose, scene: &SceneConfig) -> Result<SimState> {
    if !cmd.is_finite() {
        return Err(SimError::NonFiniteCommand(state.time));
    }
    let p = state.pose;
    let v = state.vel;
    let dt = scene.dt;
    let contact = contact_wrench(p, v, scene);
    let corners = plug_corners(p, scene);

    let mut normal = [0.0; 3];
    let mut sliding = Vec::with_capacity(contact.contacts.len());
    for c in &contact.contacts {
        let q = corners[c.corner];
        let r = [q[0] - p.x, q[1] - p.y];
        let f = [c.normal_force * c.normal[0], c.normal_force * c.normal[1]];
        normal[0] += f[0];
        normal[1] += f[1];
        normal[2] += r[0] * f[1] - r[1] * f[0];
        let t = [-c.normal[1], c.normal[0]];
        // generalized direction of the tangential point velocity
        let g = [t[0], t[1], r[0] * t[1] - r[1] * t[0]];
        let v_t = g[0] * v.x + g[1] * v.y + g[2] * v.yaw;
        let limit = scene.friction * c.normal_force;
        let coef = if v_t.abs() > 1e-12 {
            limit * (v_t / scene.friction_v_eps).tanh() / v_t
        } else {
            limit / scene.friction_v_eps
        };
        sliding.push((g, coef, limit));
    }

    let e = [cmd.x - p.x, cmd.y - p.y, cmd.yaw - p.yaw];
    let stiff = [
        scene.coupling_stiffness,
        scene.coupling_stiffness,
        scene.coupling_rot_stiffness,
    ];
    let damp = [
        scene.coupling_damping,
        scene.coupling_damping,
        scene.coupling_rot_damping,
    ];
    let vv = [v.x, v.y, v.yaw];
    let drive: [f64; 3] = std::array::from_fn(|i| stiff[i] * e[i] - damp[i] * vv[i] + normal[i]);

    let mut friction = [0.0; 3];
    if !sliding.is_empty() {
        let mut a = SquareMatrix::<f64>::identity(3);
        for (g, coef, _) in &sliding {
            for i in 0..3 {
                for j in 0..3 {
                    a[(i, j)] += dt * coef * g[i] * g[j];
                }
            }
        }
        let rhs: Vec<f64> = (0..3).map(|i| vv[i] + dt * drive[i]).collect();
        let v_stick = a
            .cholesky()
            .map(|ch| ch.solve(&rhs))
            .ok_or_else(|| SimError::Unstable {
                time: state.time,
                detail: "friction system is not positive definite".into(),
            })?;
        for (g, coef, limit) in &sliding {
            let v_t = g[0] * v_stick[0] + g[1] * v_stick[1] + g[2] * v_stick[2];
            let f = (-coef * v_t).clamp(-limit, *limit);
            for i in 0..3 {
                friction[i] += f * g[i];
            }
        }
    }
    let w = Wrench {
        fx: normal[0] + friction[0],
        fy: normal[1] + friction[1],
        mz: normal[2] + friction[2],
    };
    let acc: [f64; 3] = std::array::from_fn(|i| drive[i] + friction[i]);
    let vel = Pose::new(v.x + acc[0] * dt, v.y + acc[1] * dt, v.yaw + acc[2] * dt);
    let pose = Pose::new(p.x + vel.x * dt, p.y + vel.y * dt, p.yaw + vel.yaw * dt);
    let next = SimState {
        time: state.time + dt,
        cmd,
        pose,
        vel,
        contacts: contact.flags,
        wrench: w,
    };
    let components = [
        pose.x, pose.y, pose.yaw, vel.x, vel.y, vel.yaw, w.fx, w.fy, w.mz,
    ];
    if components.iter().any(|c| !c.is_finite() || c.abs() > INSTABILITY_LIMIT) {
        return Err(SimError::Unstable {
            time: next.time,
            detail: format!("pose {pose:?} vel {vel:?} wrench {w:?}"),
        });
    }
    Ok(next)
}

/// Single-owner simulator instance.
#[derive(Debug, Clone)]
pub struct Simulator {
    scene: SceneConfig,
    state: SimState,
}

impl Simulator {
    pub fn new(scene: SceneConfig, start: Pose) -> Result<Self> {
        scene.validate()?;
        if !start.is_finite() {
            return Err(SimError::InvalidScene("start pose must be finite".into()));
        }
        Ok(Self {
            state: SimState::at_rest(start),
            scene,
        })
    }

    pub fn scene(&self) -> &SceneConfig {
        &self.scene
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn reset(&mut self, start: Pose) {
        self.state = SimState::at_rest(start);
    }

    pub fn step(&mut self, cmd: Pose) -> Result<&SimState> {
        self.state = step(&self.state, cmd, &self.scene)?;
        Ok(&self.state)
    }

    pub fn depth(&self) -> f64 {
        insertion_depth(self.state.pose, &self.scene)
    }

    pub fn lateral_error(&self) -> f64 {
        lateral_error(self.state.pose, &self.scene)
    }
}

/// Stream names written into demonstration recordings.
pub mod streams {
    pub const POSE: &str = "pose";
    pub const CMD: &str = "cmd";
    pub const WRENCH: &str = "wrench";
    pub const GRIP: &str = "grip";
    pub const POSE_UNITS: &str = "m,m,rad";
    pub const WRENCH_UNITS: &str = "N,N,N*m";
    pub const GRIP_UNITS: &str = "1";
}

/// Accumulates the four demonstration channels at simulator rate.
#[derive(Debug, Clone)]
pub struct DemoLogger {
    pub cmd: RawStream,
    pub pose: RawStream,
    pub wrench: RawStream,
    pub grip: RawStream,
}

impl Default for DemoLogger {
    fn default() -> Self {
        Self::new()
    }
}

impl DemoLogger {
    pub fn new() -> Self {
        use streams::*;
        Self {
            cmd: RawStream::new(CMD, POSE_UNITS),
            pose: RawStream::new(POSE, POSE_UNITS),
            wrench: RawStream::new(WRENCH, WRENCH_UNITS),
            grip: RawStream::new(GRIP, GRIP_UNITS),
        }
    }

    pub fn log(&mut self, state: &SimState, grip: f64) {
        let t = state.time;
        self.cmd.push(t, state.cmd.to_array().to_vec());
        self.pose.push(t, state.pose.to_array().to_vec());
        self.wrench.push(t, state.wrench.to_array().to_vec());
        self.grip.push(t, vec![grip]);
    }

    pub fn len(&self) -> usize {
        self.pose.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn finish(self, dt: f64, metadata: Metadata) -> Result<Recording> {
        Ok(recording::synchronize(
            &[self.pose, self.cmd, self.wrench, self.grip],
            dt,
            metadata,
        )?)
    }
}

/// Expert insertion policy standing in for the human teleoperator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoPolicy {
    /// Tip clearance above the strip when hovering over the slot.
    pub hover_clearance: f64,
    pub approach_time: f64,
    pub descent_speed: f64,
    /// Measured force that counts as touching down.
    pub contact_threshold: f64,
    pub lateral_gain: f64,
    pub target_force: f64,
    pub force_ramp: f64,
    pub force_gain: f64,
    /// Time spent holding the target force after the ramp.
    pub hold_time: f64,
    pub success_fraction: f64,
    pub max_time: f64,
    pub record_dt: f64,
}

impl Default for DemoPolicy {
    fn default() -> Self {
        Self {
            hover_clearance: 0.005,
            approach_time: 0.6,
            descent_speed: 0.025,
            contact_threshold: 0.5,
            lateral_gain: 2e-4,
            target_force: 10.0,
            force_ramp: 0.5,
            force_gain: 2e-3,
            hold_time: 3.0,
            success_fraction: 0.9,
            max_time: 20.0,
            record_dt: recording::DEFAULT_DT,
        }
    }
}

fn min_jerk(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stage {
    Approach,
    Descend,
    Push { since: f64, start_force: f64, anchor_y: f64 },
}

/// Runs the three-stage expert (approach above the slot, descend with lateral
/// compliance until contact, push to a target force) and records it.
pub fn scripted_demonstrate(scene: &SceneConfig, start: Pose, policy: &DemoPolicy) -> Result<Recording> {
    let mut sim = Simulator::new(scene.clone(), start)?;
    let hover = Pose::new(0.0, scene.plug_length + policy.hover_clearance, 0.0);
    let seat_depth = scene.depth_threshold(policy.success_fraction);
    let k = scene.coupling_stiffness;

    let mut logger = DemoLogger::new();
    logger.log(sim.state(), 1.0);
    let mut stage = Stage::Approach;
    let mut cmd = start;
    let mut force_integral = 0.0;
    loop {
        let t = sim.state().time;
        if t > policy.max_time {
            return Err(SimError::PolicyFailure(format!(
                "not seated after {} s (depth {:.4} m)",
                policy.max_time,
                sim.depth()
            )));
        }
        let w = sim.state().wrench;
        match stage {
            Stage::Approach => {
                let s = min_jerk(t / policy.approach_time);
                cmd = Pose::new(
                    start.x + (hover.x - start.x) * s,
                    start.y + (hover.y - start.y) * s,
                    start.yaw + (hover.yaw - start.yaw) * s,
                );
                if t >= policy.approach_time {
                    stage = Stage::Descend;
                }
            }
            Stage::Descend => {
                if w.force_norm() > policy.contact_threshold {
                    stage = Stage::Push {
                        since: t,
                        start_force: w.fy.max(0.0),
                        anchor_y: sim.state().pose.y,
                    };
                } else {
                    cmd.y -= policy.descent_speed * scene.dt;
                    cmd.x += policy.lateral_gain * w.fx;
                }
            }
            Stage::Push {
                since,
                start_force,
                anchor_y,
            } => {
                let elapsed = t - since;
                let target =
                    start_force + (policy.target_force - start_force) * min_jerk(elapsed / policy.force_ramp);
                force_integral += (target - w.fy) * scene.dt;
                cmd.y = anchor_y - target / k - policy.force_gain * force_integral;
                cmd.x += policy.lateral_gain * w.fx;
                if elapsed >= policy.force_ramp + policy.hold_time {
                    if sim.depth() >= seat_depth {
                        break;
                    }
                    return Err(SimError::PolicyFailure(format!(
                        "push finished at depth {:.4} m, below {:.4} m",
                        sim.depth(),
                        seat_depth
                    )));
                }
            }
        }
        sim.step(cmd)?;
        logger.log(sim.state(), 1.0);
    }
    logger.finish(policy.record_dt, Metadata::new("plug_insertion", Source::Scripted))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scene_is_valid() {
        SceneConfig::default().validate().unwrap();
    }

    #[test]
    fn plug_wider_than_slot_is_rejected() {
        let scene = SceneConfig {
            plug_width: 0.021,
            ..SceneConfig::default()
        };
        let err = scene.validate().unwrap_err().to_string();
        assert!(err.contains("plug_width"), "{err}");
    }

    #[test]
    fn separated_plug_has_no_wrench() {
        let scene = SceneConfig::default();
        let pose = Pose::new(0.0, scene.plug_length + 0.01, 0.0);
        let r = contact_wrench(pose, Pose::default(), &scene);
        assert_eq!(r.wrench, Wrench::default());
        assert!(!r.flags.any());
    }

    #[test]
    fn faces_are_classified() {
        let s = SceneConfig::default();
        assert_eq!(penetration([0.03, -0.001], &s).unwrap().0, Face::Top);
        assert_eq!(penetration([-0.0101, -0.02], &s).unwrap().0, Face::Wall);
        assert_eq!(penetration([0.0, -0.0301], &s).unwrap().0, Face::Floor);
        let (face, _, n) = penetration([-0.0115, -0.0016], &s).unwrap();
        assert_eq!(face, Face::Chamfer);
        // left chamfer pushes up and to the right
        assert!(n[0] > 0.0 && n[1] > 0.0);
        assert!(penetration([-0.0115, -0.001], &s).is_none());
        assert!(penetration([0.09, -0.001], &s).is_none());
    }

    #[test]
    fn min_jerk_endpoints() {
        assert_eq!(min_jerk(0.0), 0.0);
        assert_eq!(min_jerk(1.0), 1.0);
        assert_eq!(min_jerk(2.0), 1.0);
        assert!((min_jerk(0.5) - 0.5).abs() < 1e-15);
    }
}
