//! One function per subcommand. Each returns `Ok` when the command ran to
//! completion; task-level verdicts live in the written documents.

use std::path::Path;

use lft_core::dmp::{DmpConfig, DmpError};
use lft_core::executor::{
    self, EpisodeSettings, ExecError, InitialCondition, LearnOptions, Regime, DEFAULT_TAU_SCALE,
};
use lft_core::insertion_sim::{self, DemoPolicy, SimError};
use lft_core::recording;
use lft_core::wrench_gmm::{GmmConfig, GmmError};
use serde::{Deserialize, Serialize};

use crate::documents::{self, EpisodeDocument, ReportDocument, DOCUMENT_VERSION};
use crate::{CliError, Result};

/// Runs the scripted demonstrator on the scene and writes the archive.
pub fn demo_gen(scene_path: Option<&Path>, out: &Path) -> Result<usize> {
    let scene = documents::read_scene(scene_path)?;
    let rec = insertion_sim::scripted_demonstrate(&scene, scene.nominal_start(), &DemoPolicy::default())
        .map_err(|e| match e {
            SimError::InvalidScene(_) => CliError::input(e),
            other => CliError::Demonstration(other.to_string()),
        })?;
    recording::write_archive(&rec, out).map_err(CliError::input)?;
    tracing::info!(frames = rec.frames, path = %out.display(), "wrote demonstration");
    Ok(rec.frames)
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub n_basis: usize,
    pub k: usize,
    /// Select `k` by BIC over `1..=bic_max` instead of using `k`.
    pub bic_max: Option<usize>,
    pub pose_stream: String,
    pub orientation_stream: Option<String>,
}

impl Default for FitOptions {
    fn default() -> Self {
        let learn = LearnOptions::default();
        Self {
            n_basis: learn.dmp.n_basis,
            k: learn.gmm.k,
            bic_max: None,
            pose_stream: learn.pose_stream,
            orientation_stream: None,
        }
    }
}

fn classify_fit(e: ExecError) -> CliError {
    match e {
        ExecError::Dmp(DmpError::MissingStream(_) | DmpError::InvalidConfig(_) | DmpError::InvalidArgument(_))
        | ExecError::Gmm(GmmError::MissingStream(_) | GmmError::InvalidConfig(_) | GmmError::EmptyRange)
        | ExecError::InvalidArgument(_) => CliError::input(e),
        other => CliError::Fit(other.to_string()),
    }
}

/// Learns a skill from an archive and writes the skill document.
pub fn fit(archive: &Path, out: &Path, opts: &FitOptions) -> Result<()> {
    let rec = recording::read_archive(archive).map_err(CliError::input)?;
    if rec.frames < 3 {
        return Err(CliError::Fit(format!("need at least 3 frames to fit, archive has {}", rec.frames)));
    }
    if opts.bic_max == Some(0) {
        return Err(CliError::input("--bic needs an upper bound of at least 1"));
    }
    let learn = LearnOptions {
        dmp: DmpConfig::with_basis(opts.n_basis),
        gmm: GmmConfig::with_components(opts.k),
        bic_range: opts.bic_max.map(|m| (1..=m).collect()),
        pose_stream: opts.pose_stream.clone(),
        orientation_stream: opts.orientation_stream.clone(),
        ..LearnOptions::default()
    };
    let model = executor::learn(&rec, &learn).map_err(classify_fit)?;
    documents::write_skill(out, &model)?;
    tracing::info!(k = model.wrench.k(), path = %out.display(), "wrote skill");
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct ReproduceOptions {
    pub dx: f64,
    pub dy: f64,
    pub dyaw: f64,
    pub tau_scale: f64,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self {
            dx: 0.0,
            dy: 0.0,
            dyaw: 0.0,
            tau_scale: DEFAULT_TAU_SCALE,
        }
    }
}

fn episode_error(e: ExecError) -> CliError {
    CliError::input(format!("episode aborted: {e}"))
}

/// Runs one episode from the offset start and writes the result document.
pub fn reproduce(skill: &Path, scene_path: Option<&Path>, opts: &ReproduceOptions, out: &Path) -> Result<EpisodeDocument> {
    let model = documents::read_skill(skill)?;
    let scene = documents::read_scene(scene_path)?;
    if ![opts.dx, opts.dy, opts.dyaw].iter().all(|v| v.is_finite()) {
        return Err(CliError::input("offsets must be finite"));
    }
    if !(opts.tau_scale > 0.0 && opts.tau_scale.is_finite()) {
        return Err(CliError::input(format!("--tau-scale must be positive, got {}", opts.tau_scale)));
    }
    let condition = InitialCondition {
        id: 0,
        dx: opts.dx,
        dy: opts.dy,
        dyaw: opts.dyaw,
        expected_regime: Regime::Nominal,
    };
    let settings = EpisodeSettings {
        tau_scale: opts.tau_scale,
        ..EpisodeSettings::for_scene(&scene)
    };
    let result = executor::run_episode(&model, &condition, &scene, &settings).map_err(episode_error)?;
    tracing::info!(success = result.success, reason = ?result.failure_reason, "episode finished");
    let doc = EpisodeDocument {
        version: DOCUMENT_VERSION.to_string(),
        condition,
        tau_scale: opts.tau_scale,
        result,
    };
    documents::write_json(out, &doc, "result document")?;
    Ok(doc)
}

/// Evaluates every condition and writes the report document.
pub fn evaluate(skill: &Path, scene_path: Option<&Path>, conditions: Option<&Path>, out: &Path) -> Result<ReportDocument> {
    let model = documents::read_skill(skill)?;
    let scene = documents::read_scene(scene_path)?;
    let conditions = match conditions {
        Some(p) => documents::read_conditions(p)?,
        None => executor::canonical_conditions(),
    };
    let report = executor::evaluate(&model, &conditions, &scene, &EpisodeSettings::for_scene(&scene))
        .map_err(episode_error)?;
    tracing::info!(successes = report.successes, episodes = report.episodes.len(), "evaluation finished");
    let doc = ReportDocument {
        version: DOCUMENT_VERSION.to_string(),
        report,
    };
    documents::write_json(out, &doc, "report document")?;
    Ok(doc)
}

/// One CSV row of [`export_profiles`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub t: f64,
    pub phase: f64,
    pub demo_fx: f64,
    pub demo_fy: f64,
    pub demo_mz: f64,
    pub ref_fx: f64,
    pub ref_fy: f64,
    pub ref_mz: f64,
    pub meas_fx: f64,
    pub meas_fy: f64,
    pub meas_mz: f64,
    pub in_window: bool,
}

/// Writes demo, reference and measured wrench per episode step.
pub fn export_profiles(skill: &Path, result: &Path, out: &Path) -> Result<usize> {
    let model = documents::read_skill(skill)?;
    let doc: EpisodeDocument = documents::read_json(result, "result document")?;
    let mut w = csv::Writer::from_path(out).map_err(|e| CliError::input(format!("{}: {e}", out.display())))?;
    for s in &doc.result.log {
        let demo = model.demo.wrench_at(s.phase);
        let reference = model.wrench.gmr(s.phase).mean;
        w.serialize(ProfileRow {
            t: s.t,
            phase: s.phase,
            demo_fx: demo[0],
            demo_fy: demo[1],
            demo_mz: demo[2],
            ref_fx: reference[0],
            ref_fy: reference[1],
            ref_mz: reference[2],
            meas_fx: s.measured[0],
            meas_fy: s.measured[1],
            meas_mz: s.measured[2],
            in_window: s.in_window,
        })
        .map_err(|e| CliError::input(format!("{}: {e}", out.display())))?;
    }
    w.flush().map_err(|e| CliError::input(format!("{}: {e}", out.display())))?;
    Ok(doc.result.log.len())
}
