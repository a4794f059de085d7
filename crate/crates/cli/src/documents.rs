//! JSON documents: skill models, episode results, evaluation reports, scene
//! and condition files.

use std::fs;
use std::path::Path;

use lft_core::dmp::{DmpModel, OrientationDmp};
use lft_core::executor::{DemoSummary, EpisodeResult, EvalReport, InitialCondition, SkillModel};
use lft_core::insertion_sim::SceneConfig;
use lft_core::linalg::SquareMatrix;
use lft_core::wrench_gmm::GmmModel;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

pub const DOCUMENT_VERSION: &str = "1";

/// Mixture block with covariances flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmBlock {
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkillDocument {
    pub version: String,
    pub dmp: DmpModel<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<OrientationDmp<f64>>,
    pub gmm: GmmBlock,
    pub demo_summary: DemoSummary,
}

impl SkillDocument {
    pub fn from_model(model: &SkillModel) -> Self {
        let g = &model.wrench;
        Self {
            version: DOCUMENT_VERSION.to_string(),
            dmp: model.dmp.clone(),
            orientation: model.orientation.clone(),
            gmm: GmmBlock {
                priors: g.priors.clone(),
                means: g.means.clone(),
                covariances: g.covariances.iter().map(|c| c.as_slice().to_vec()).collect(),
            },
            demo_summary: model.demo.clone(),
        }
    }

    /// Rebuilds the model and re-checks every invariant.
    pub fn into_model(self) -> Result<SkillModel> {
        if self.version != DOCUMENT_VERSION {
            return Err(CliError::input(format!("unsupported skill document version \"{}\"", self.version)));
        }
        let dim = self.gmm.means.first().map_or(0, Vec::len);
        let covariances = self
            .gmm
            .covariances
            .into_iter()
            .enumerate()
            .map(|(j, c)| {
                SquareMatrix::from_row_major(dim, c)
                    .ok_or_else(|| CliError::input(format!("gmm covariance {j} is not {dim}x{dim}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let model = SkillModel {
            dmp: self.dmp,
            orientation: self.orientation,
            wrench: GmmModel {
                priors: self.gmm.priors,
                means: self.gmm.means,
                covariances,
                input_dim: 1,
            },
            demo: self.demo_summary,
        };
        model.validate().map_err(CliError::input)?;
        Ok(model)
    }
}

/// Result of one reproduction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeDocument {
    pub version: String,
    pub condition: InitialCondition,
    pub tau_scale: f64,
    #[serde(flatten)]
    pub result: EpisodeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub version: String,
    #[serde(flatten)]
    pub report: EvalReport,
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("malformed {what} {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T, what: &str) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(CliError::input)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text + "\n").map_err(|e| CliError::input(format!("cannot write {what} {}: {e}", path.display())))
}

pub fn read_skill(path: &Path) -> Result<SkillModel> {
    let doc: SkillDocument = read_json(path, "skill document")?;
    doc.into_model()
        .map_err(|e| CliError::input(format!("invalid skill document {}: {e}", path.display())))
}

pub fn write_skill(path: &Path, model: &SkillModel) -> Result<()> {
    write_json(path, &SkillDocument::from_model(model), "skill document")
}

/// Reads and validates a scene file; `None` gives the default scene.
pub fn read_scene(path: Option<&Path>) -> Result<SceneConfig> {
    let scene = match path {
        Some(p) => read_json::<SceneConfig>(p, "scene config")?,
        None => SceneConfig::default(),
    };
    scene.validate().map_err(|e| {
        let origin = path.map_or_else(|| "default scene".to_string(), |p| p.display().to_string());
        CliError::input(format!("{origin}: {e}"))
    })?;
    Ok(scene)
}

/// Reads a JSON array of initial conditions; empty lists and non-finite
/// offsets are rejected.
pub fn read_conditions(path: &Path) -> Result<Vec<InitialCondition>> {
    let conditions: Vec<InitialCondition> = read_json(path, "conditions file")?;
    if conditions.is_empty() {
        return Err(CliError::input(format!("conditions file {} has no entries", path.display())));
    }
    if let Some(c) = conditions
        .iter()
        .find(|c| !(c.dx.is_finite() && c.dy.is_finite() && c.dyaw.is_finite()))
    {
        return Err(CliError::input(format!("condition {} has non-finite offsets", c.id)));
    }
    Ok(conditions)
}
