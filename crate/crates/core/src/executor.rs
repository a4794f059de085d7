//! Task execution: DMP motion plus GMR wrench tracking through an admittance law.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dmp::{self, DmpConfig, DmpError, DmpModel, OrientationDmp};
use crate::insertion_sim::{self, streams, Pose, SceneConfig, SimError, Simulator};
use crate::quaternion::Quaternion;
use crate::recording::Recording;
use crate::scalar::Scalar;
use crate::wrench_gmm::{self, GmmConfig, GmmError, GmmModel, WrenchReference};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Dmp(#[from] DmpError),
    #[error(transparent)]
    Gmm(#[from] GmmError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid skill model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = ExecError> = std::result::Result<T, E>;

/// Demonstration facts kept alongside the learned models for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSummary {
    /// Demonstration duration `τ` in seconds.
    pub tau: f64,
    /// Largest force magnitude `|(Fx, Fy)|` seen in the demonstration.
    pub peak_force: f64,
    /// Phase at which the demonstrated force first exceeded the contact threshold.
    pub contact_phase: f64,
    /// Per-frame phase, decreasing from 1.
    pub phases: Vec<f64>,
    /// Per-frame wrench `(Fx, Fy, Mz)`.
    pub wrench: Vec<[f64; 3]>,
}

impl DemoSummary {
    /// Demonstrated wrench linearly interpolated at phase `x`, clamped to the recorded range.
    pub fn wrench_at(&self, x: f64) -> [f64; 3] {
        let p = &self.phases;
        let n = p.len();
        // phases decrease with frame index
        if x >= p[0] {
            return self.wrench[0];
        }
        if x <= p[n - 1] {
            return self.wrench[n - 1];
        }
        let hi = p.partition_point(|&v| v > x);
        let lo = hi - 1;
        let w = (p[lo] - x) / (p[lo] - p[hi]);
        let (a, b) = (self.wrench[lo], self.wrench[hi]);
        [
            a[0] + w * (b[0] - a[0]),
            a[1] + w * (b[1] - a[1]),
            a[2] + w * (b[2] - a[2]),
        ]
    }
}

/// Everything learned from one demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillModel {
    /// Position and yaw primitive, dims `(x, y, yaw)`.
    pub dmp: DmpModel<f64>,
    pub orientation: Option<OrientationDmp<f64>>,
    pub wrench: GmmModel<f64>,
    pub demo: DemoSummary,
}

impl SkillModel {
    pub fn validate(&self) -> Result<()> {
        self.dmp.validate()?;
        if self.dmp.dims() != 3 {
            return Err(ExecError::InvalidModel(format!(
                "trajectory model must have 3 dims (x, y, yaw), has {}",
                self.dmp.dims()
            )));
        }
        if let Some(o) = &self.orientation {
            o.validate()?;
        }
        self.wrench.validate()?;
        if self.wrench.output_dim() != 3 {
            return Err(ExecError::InvalidModel("wrench model must output (Fx, Fy, Mz)".into()));
        }
        let d = &self.demo;
        if !(d.tau > 0.0) || d.phases.is_empty() || d.phases.len() != d.wrench.len() {
            return Err(ExecError::InvalidModel("demo summary is inconsistent".into()));
        }
        if d.phases.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(ExecError::InvalidModel("demo phases must strictly decrease".into()));
        }
        Ok(())
    }

    pub fn demo_start(&self) -> Pose {
        Pose::from_slice(&self.dmp.y0)
    }

    pub fn demo_goal(&self) -> Pose {
        Pose::from_slice(&self.dmp.goal)
    }
}

/// How the learning phase turns a recording into a [`SkillModel`].
#[derive(Debug, Clone)]
pub struct LearnOptions {
    pub dmp: DmpConfig<f64>,
    pub gmm: GmmConfig<f64>,
    /// Sweep these component counts by BIC instead of using `gmm.k`.
    pub bic_range: Option<Vec<usize>>,
    pub pose_stream: String,
    pub wrench_stream: String,
    /// Optional quaternion stream for a 3D orientation primitive.
    pub orientation_stream: Option<String>,
    pub contact_threshold: f64,
}

impl Default for LearnOptions {
    fn default() -> Self {
        Self {
            dmp: DmpConfig::default(),
            gmm: GmmConfig::default(),
            bic_range: None,
            pose_stream: streams::CMD.to_string(),
            wrench_stream: streams::WRENCH.to_string(),
            orientation_stream: None,
            contact_threshold: 0.5,
        }
    }
}

/// Learning phase: DMP on the pose stream, GMM on `(phase, wrench)`.
pub fn learn(rec: &Recording, opts: &LearnOptions) -> Result<SkillModel> {
    let dmp = dmp::fit_dmp(rec, &opts.pose_stream, &opts.dmp)?;
    if dmp.dims() != 3 {
        return Err(ExecError::InvalidArgument(format!(
            "pose stream `{}` must have 3 components (x, y, yaw)",
            opts.pose_stream
        )));
    }
    let orientation = opts
        .orientation_stream
        .as_deref()
        .map(|s| dmp::fit_orientation_dmp(rec, s, &opts.dmp))
        .transpose()?;

    let phases: Vec<f64> = (0..rec.frames)
        .map(|k| dmp::phase(k as f64 * rec.dt, dmp.tau, opts.dmp.alpha_x))
        .collect();
    let samples = wrench_gmm::build_dataset(rec, &opts.wrench_stream, &phases)?;
    if samples[0].len() != 4 {
        return Err(ExecError::InvalidArgument(format!(
            "wrench stream `{}` must have 3 components (Fx, Fy, Mz)",
            opts.wrench_stream
        )));
    }
    let gmm_cfg = match &opts.bic_range {
        Some(range) => GmmConfig {
            k: wrench_gmm::select_k_bic(&samples, range, &opts.gmm)?,
            ..opts.gmm.clone()
        },
        None => opts.gmm.clone(),
    };
    let wrench = wrench_gmm::fit_gmm(&samples, &gmm_cfg)?;

    let demo_wrench: Vec<[f64; 3]> = samples.iter().map(|s| [s[1], s[2], s[3]]).collect();
    let peak_force = demo_wrench
        .iter()
        .map(|w| w[0].hypot(w[1]))
        .fold(0.0, f64::max);
    let contact_phase = demo_wrench
        .iter()
        .position(|w| w[0].hypot(w[1]) > opts.contact_threshold)
        .map_or(phases[phases.len() - 1], |k| phases[k]);

    let model = SkillModel {
        dmp,
        orientation,
        wrench,
        demo: DemoSummary {
            tau: rec.duration(),
            peak_force,
            contact_phase,
            phases,
            wrench: demo_wrench,
        },
    };
    model.validate()?;
    Ok(model)
}

/// Leaky-integrator admittance gains, one entry per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmittanceConfig<T> {
    /// m/(N·s) on translational axes, rad/(N·m·s) on rotational ones.
    pub gain: Vec<T>,
    /// Leak rate in 1/s.
    pub leak: T,
    /// Per-axis magnitude cap on the offset.
    pub cap: Vec<T>,
}

impl<T: Scalar> AdmittanceConfig<T> {
    /// Planar defaults for `(x, y, yaw)`.
    pub fn planar() -> Self {
        Self {
            gain: vec![T::lit(1e-3), T::lit(1e-3), T::lit(5e-3)],
            leak: T::lit(2.0),
            cap: vec![T::lit(0.02), T::lit(0.02), T::lit(0.2)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gain.len() != self.cap.len() {
            return Err(ExecError::InvalidArgument("gain and cap lengths differ".into()));
        }
        if self.gain.iter().any(|&g| !(g >= T::zero())) {
            return Err(ExecError::InvalidArgument("gains must be non-negative".into()));
        }
        if !(self.leak > T::zero()) || self.cap.iter().any(|&c| !(c > T::zero())) {
            return Err(ExecError::InvalidArgument("leak and caps must be positive".into()));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for AdmittanceConfig<T> {
    fn default() -> Self {
        Self::planar()
    }
}

/// `offset' = clamp(offset + dt·(A·(F_meas − F_ref) − λ·offset), ±cap)` per axis.
pub fn admittance_step<T: Scalar>(
    offset: &[T],
    measured: &[T],
    reference: &[T],
    cfg: &AdmittanceConfig<T>,
    dt: T,
) -> Vec<T> {
    offset
        .iter()
        .enumerate()
        .map(|(i, &o)| {
            let next = o + dt * (cfg.gain[i] * (measured[i] - reference[i]) - cfg.leak * o);
            next.max(-cfg.cap[i]).min(cfg.cap[i])
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecutionLimits {
    pub timeout: f64,
    pub max_force: f64,
    pub success_depth: f64,
    pub lateral_tolerance: f64,
}

impl ExecutionLimits {
    pub fn for_scene(scene: &SceneConfig) -> Self {
        Self {
            timeout: 30.0,
            max_force: 80.0,
            success_depth: scene.depth_threshold(0.9),
            lateral_tolerance: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.timeout, self.max_force, self.success_depth, self.lateral_tolerance];
        if all.iter().any(|v| !(*v > 0.0)) {
            return Err(ExecError::InvalidArgument("execution limits must be positive".into()));
        }
        Ok(())
    }
}

/// Default stretch of the demonstrated duration at reproduction.
pub const DEFAULT_TAU_SCALE: f64 = 1.5;

/// Open-loop pose trajectory with per-step phase and wrench reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionPlan {
    pub dt: f64,
    pub tau: f64,
    pub times: Vec<f64>,
    pub poses: Vec<Pose>,
    pub phases: Vec<f64>,
    pub references: Vec<WrenchReference<f64>>,
    /// Demonstrated wrench resampled at each step's phase.
    pub demo_wrench: Vec<[f64; 3]>,
    /// Steps inside the demonstrated contact window.
    pub in_window: Vec<bool>,
    pub orientations: Option<Vec<Quaternion<f64>>>,
}

impl ExecutionPlan {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }
}

pub fn plan(model: &SkillModel, start: Pose, goal: Pose, tau: f64, dt: f64) -> Result<ExecutionPlan> {
    let rollout = model
        .dmp
        .rollout(&start.to_array(), &goal.to_array(), tau, dt)?;
    let orientations = model
        .orientation
        .as_ref()
        .map(|o| {
            o.rollout(Quaternion::from_yaw(start.yaw), Quaternion::from_yaw(goal.yaw), tau, dt)
                .map(|r| r.orientations)
        })
        .transpose()?;
    let references = rollout.phases.iter().map(|&x| model.wrench.gmr(x)).collect();
    let demo_wrench = rollout.phases.iter().map(|&x| model.demo.wrench_at(x)).collect();
    let in_window = rollout
        .phases
        .iter()
        .map(|&x| x <= model.demo.contact_phase)
        .collect();
    Ok(ExecutionPlan {
        dt,
        tau,
        poses: rollout.positions.iter().map(|p| Pose::from_slice(p)).collect(),
        times: rollout.times,
        phases: rollout.phases,
        references,
        demo_wrench,
        in_window,
        orientations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    None,
    Timeout,
    ForceLimit,
    ApproachCollision,
}

/// One executed control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub t: f64,
    pub phase: f64,
    pub cmd: [f64; 3],
    pub actual: [f64; 3],
    pub offset: [f64; 3],
    pub measured: [f64; 3],
    pub reference: [f64; 3],
    pub demo: [f64; 3],
    pub in_window: bool,
    pub depth: f64,
    pub lateral_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub failure_reason: FailureReason,
    pub duration: f64,
    pub peak_force: f64,
    /// Force RMSE against the demonstration over the contact window; absent
    /// when the episode never reached it.
    pub wrench_rmse_vs_demo: Option<f64>,
    pub final_depth: f64,
    pub final_lateral_error: f64,
    pub log: Vec<StepLog>,
}

/// `sqrt(mean(|F_meas − F_demo|²))` over `(Fx, Fy)` of in-window steps.
pub fn window_force_rmse(log: &[StepLog]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in log.iter().filter(|s| s.in_window) {
        let ex = s.measured[0] - s.demo[0];
        let ey = s.measured[1] - s.demo[1];
        sum += ex * ex + ey * ey;
        n += 1;
    }
    (n > 0).then(|| (sum / n as f64).sqrt())
}

/// Runs the plan on `sim`, which must already sit at the episode's start pose.
pub fn execute(
    plan: &ExecutionPlan,
    sim: &mut Simulator,
    cfg: &AdmittanceConfig<f64>,
    limits: &ExecutionLimits,
) -> Result<EpisodeResult> {
    cfg.validate()?;
    limits.validate()?;
    if cfg.gain.len() != 3 {
        return Err(ExecError::InvalidArgument("planar admittance needs 3 axes".into()));
    }
    if plan.is_empty() {
        return Err(ExecError::InvalidArgument("empty plan".into()));
    }
    if (plan.dt - sim.scene().dt).abs() > 1e-12 * plan.dt {
        return Err(ExecError::InvalidArgument(format!(
            "plan dt {} differs from simulator dt {}",
            plan.dt,
            sim.scene().dt
        )));
    }
    let scene = sim.scene().clone();
    let last = plan.len() - 1;
    let mut offset = [0.0; 3];
    let mut log = Vec::with_capacity(plan.len() + 16);
    let mut peak_force: f64 = 0.0;

    let verdict = |success: bool, reason: FailureReason, sim: &Simulator, log: Vec<StepLog>, peak: f64| {
        let s = sim.state();
        EpisodeResult {
            success,
            failure_reason: reason,
            duration: s.time,
            peak_force: peak,
            wrench_rmse_vs_demo: window_force_rmse(&log),
            final_depth: insertion_sim::insertion_depth(s.pose, &scene),
            final_lateral_error: insertion_sim::lateral_error(s.pose, &scene),
            log,
        }
    };

    for k in 0usize.. {
        let idx = k.min(last);
        if k >= last
            && sim.depth() >= limits.success_depth
            && sim.lateral_error() <= limits.lateral_tolerance
        {
            return Ok(verdict(true, FailureReason::None, sim, log, peak_force));
        }
        if sim.state().time >= limits.timeout {
            return Ok(verdict(false, FailureReason::Timeout, sim, log, peak_force));
        }

        let planned = plan.poses[idx];
        let cmd = planned.offset(offset);
        let before = sim.state().pose;
        let t = sim.state().time;
        let state = sim.step(cmd)?;
        let measured = state.wrench;
        let collided = state.contacts.body_collision;
        let reference = &plan.references[idx].mean;
        log.push(StepLog {
            t,
            phase: plan.phases[idx],
            cmd: cmd.to_array(),
            actual: before.to_array(),
            offset,
            measured: measured.to_array(),
            reference: [reference[0], reference[1], reference[2]],
            demo: plan.demo_wrench[idx],
            in_window: plan.in_window[idx],
            depth: insertion_sim::insertion_depth(before, &scene),
            lateral_error: insertion_sim::lateral_error(before, &scene),
        });
        peak_force = peak_force.max(measured.force_norm());

        if collided {
            return Ok(verdict(false, FailureReason::ApproachCollision, sim, log, peak_force));
        }
        if measured.force_norm() > limits.max_force {
            return Ok(verdict(false, FailureReason::ForceLimit, sim, log, peak_force));
        }
        let next = admittance_step(&offset, &measured.to_array(), reference, cfg, plan.dt);
        offset = [next[0], next[1], next[2]];
    }
    unreachable!("episode loop exits through a verdict")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Nominal,
    Extreme,
}

/// Start-pose perturbation from the scene's nominal start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub id: usize,
    pub dx: f64,
    pub dy: f64,
    pub dyaw: f64,
    #[serde(default = "nominal_regime")]
    pub expected_regime: Regime,
}

fn nominal_regime() -> Regime {
    Regime::Nominal
}

impl InitialCondition {
    pub fn nominal(id: usize, dx: f64, dy: f64) -> Self {
        Self {
            id,
            dx,
            dy,
            dyaw: 0.0,
            expected_regime: Regime::Nominal,
        }
    }

    pub fn start_pose(&self, scene: &SceneConfig) -> Pose {
        scene.nominal_start().offset([self.dx, self.dy, self.dyaw])
    }
}

/// Nine lateral/height jitters plus one large offset with a yaw error that
/// drives the plug into the strip during the approach.
pub fn canonical_conditions() -> Vec<InitialCondition> {
    let mm = 1e-3;
    let mut v: Vec<InitialCondition> = [0.0, -5.0, 5.0, -10.0, 10.0]
        .iter()
        .map(|&dx| (dx, 0.0))
        .chain([-5.0, 5.0, -10.0, 10.0].iter().map(|&dx| (dx, 10.0)))
        .enumerate()
        .map(|(i, (dx, dy))| InitialCondition::nominal(i + 1, dx * mm, dy * mm))
        .collect();
    v.push(InitialCondition {
        id: 10,
        dx: -35.0 * mm,
        dy: 0.0,
        dyaw: -0.35,
        expected_regime: Regime::Extreme,
    });
    v
}

/// Options shared by every episode of an evaluation.
#[derive(Debug, Clone)]
pub struct EpisodeSettings {
    pub admittance: AdmittanceConfig<f64>,
    pub limits: ExecutionLimits,
    pub tau_scale: f64,
}

impl EpisodeSettings {
    pub fn for_scene(scene: &SceneConfig) -> Self {
        Self {
            admittance: AdmittanceConfig::planar(),
            limits: ExecutionLimits::for_scene(scene),
            tau_scale: DEFAULT_TAU_SCALE,
        }
    }
}

/// Plans and executes one episode from `condition`'s start pose.
pub fn run_episode(
    model: &SkillModel,
    condition: &InitialCondition,
    scene: &SceneConfig,
    settings: &EpisodeSettings,
) -> Result<EpisodeResult> {
    if !(settings.tau_scale > 0.0) {
        return Err(ExecError::InvalidArgument("tau scale must be positive".into()));
    }
    let start = condition.start_pose(scene);
    let tau = model.dmp.tau * settings.tau_scale;
    let p = plan(model, start, model.demo_goal(), tau, scene.dt)?;
    let mut sim = Simulator::new(scene.clone(), start)?;
    execute(&p, &mut sim, &settings.admittance, &settings.limits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub condition: InitialCondition,
    pub success: bool,
    pub failure_reason: FailureReason,
    pub duration: f64,
    pub peak_force: f64,
    pub wrench_rmse_vs_demo: Option<f64>,
    pub final_depth: f64,
    pub final_lateral_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: Vec<EpisodeSummary>,
    pub successes: usize,
    pub success_rate: f64,
    pub peak_forces: Vec<f64>,
}

/// Runs every condition (in parallel, one simulator each) and aggregates by condition id.
pub fn evaluate(
    model: &SkillModel,
    conditions: &[InitialCondition],
    scene: &SceneConfig,
    settings: &EpisodeSettings,
) -> Result<EvalReport> {
    if conditions.is_empty() {
        return Err(ExecError::InvalidArgument("no initial conditions to evaluate".into()));
    }
    let mut ordered = conditions.to_vec();
    ordered.sort_by_key(|c| c.id);
    let results: Vec<EpisodeResult> = ordered
        .par_iter()
        .map(|c| run_episode(model, c, scene, settings))
        .collect::<Result<_>>()?;
    let episodes: Vec<EpisodeSummary> = ordered
        .into_iter()
        .zip(results)
        .map(|(condition, r)| EpisodeSummary {
            condition,
            success: r.success,
            failure_reason: r.failure_reason,
            duration: r.duration,
            peak_force: r.peak_force,
            wrench_rmse_vs_demo: r.wrench_rmse_vs_demo,
            final_depth: r.final_depth,
            final_lateral_error: r.final_lateral_error,
        })
        .collect();
    let successes = episodes.iter().filter(|e| e.success).count();
    Ok(EvalReport {
        success_rate: successes as f64 / episodes.len() as f64,
        successes,
        peak_forces: episodes.iter().map(|e| e.peak_force).collect(),
        episodes,
    })
}
