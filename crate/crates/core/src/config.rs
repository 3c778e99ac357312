//! Run configuration (TOML).
//!
//! ```toml
//! seed = 42
//! output_dir = "out"
//!
//! [run]
//! samples = 1000
//! blocks = [18, 18]
//!
//! [data.patterns]
//! observed = "out/observed_patterns.csv"
//!
//! [data.covariates]
//! cover = "out/covariate_cover.asc"
//!
//! [[model]]
//! name = "thinned"
//! patterns = "observed"
//! covariates = ["cover"]
//! groups = [1, 1]
//! detection = [{ mark = "confidence", transform = "complement_to_one" }]
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::detection::{default_candidate_radii, DetectionComponent, TransformKind};
use crate::error::{Error, Result};
use crate::gp::PcPriorSpec;
use crate::inference::{HyperGrid, ModelSpec, PriorSpec, Tolerances};
use crate::spatial::RasterGrid;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default, rename = "model")]
    pub models: Vec<ModelBlock>,
    pub scenario: Option<ScenarioBlock>,
    /// Directory of the config file; not part of the file itself.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Posterior samples per fit.
    pub samples: usize,
    /// Residual blocks as `[rows, cols]`.
    pub blocks: [usize; 2],
    pub tolerances: Tolerances,
    pub candidate_radii: Vec<f64>,
    pub coverage_target: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            samples: 1000,
            blocks: [18, 18],
            tolerances: Tolerances::default(),
            candidate_radii: default_candidate_radii(),
            coverage_target: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Named point-pattern CSV files.
    pub patterns: BTreeMap<String, PathBuf>,
    /// Named covariate rasters.
    pub covariates: BTreeMap<String, PathBuf>,
    /// Analysis grid when no covariate raster defines it.
    pub grid: Option<GridGeometry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentBlock {
    pub mark: String,
    pub transform: TransformKind,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorBlock {
    pub fixed_precision: Option<f64>,
    pub log_tau_sd: Option<f64>,
    pub pc: Option<Vec<PcPriorSpec>>,
}

/// Hyperparameter axes: one list per GP group (σ, ρ) or detection
/// component (τ). Missing axes fall back to the default grid.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    pub sigma: Option<Vec<Vec<f64>>>,
    pub rho: Option<Vec<Vec<f64>>>,
    pub tau: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub name: String,
    /// Key into `[data.patterns]`.
    pub patterns: String,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub detection: Vec<ComponentBlock>,
    /// GP group per campaign; defaults to one shared group.
    pub groups: Option<Vec<usize>>,
    #[serde(default)]
    pub priors: PriorBlock,
    #[serde(default)]
    pub hyper_grid: GridBlock,
    /// Local-frequency radius; selected from the data when absent.
    pub lf_radius: Option<f64>,
    pub rel_jitter: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridGeometry {
    #[serde(default)]
    pub origin_x: f64,
    #[serde(default)]
    pub origin_y: f64,
    pub n_cols: usize,
    pub n_rows: usize,
    pub cell_size: f64,
}

impl GridGeometry {
    pub fn to_grid(&self) -> Result<RasterGrid> {
        RasterGrid::new(self.origin_x, self.origin_y, self.n_cols, self.n_rows, self.cell_size)
    }
}

/// A raster read from disk or drawn i.i.d. uniform on `[lo, hi]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSource {
    pub path: Option<PathBuf>,
    pub uniform: Option<[f64; 2]>,
    pub constant: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioCovariate {
    pub name: String,
    #[serde(flatten)]
    pub source: LayerSource,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioGp {
    pub sigma: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDetection {
    pub mark: String,
    pub transform: TransformKind,
    pub tau: f64,
    /// One mark layer per campaign, or a single entry reused by every
    /// campaign.
    pub layers: Vec<LayerSource>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBlock {
    pub grid: GridGeometry,
    pub intercepts: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub covariates: Vec<ScenarioCovariate>,
    pub groups: Option<Vec<usize>>,
    pub gp: Vec<ScenarioGp>,
    #[serde(default)]
    pub detection: Vec<ScenarioDetection>,
}

impl RunConfig {
    pub fn from_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, &base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    fn validate(&self) -> Result<()> {
        let mut names = std::collections::BTreeSet::new();
        for m in &self.models {
            if !names.insert(m.name.as_str()) {
                return Err(Error::Config(format!("model name '{}' is used twice", m.name)));
            }
            if m.name.is_empty() || !m.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::Config(format!("model name '{}' must be ASCII letters, digits, '_' or '-'", m.name)));
            }
            if !self.data.patterns.contains_key(&m.patterns) {
                return Err(Error::Config(format!("model '{}' names unknown pattern set '{}'", m.name, m.patterns)));
            }
            for c in &m.covariates {
                if !self.data.covariates.contains_key(c) {
                    return Err(Error::Config(format!("model '{}': covariate '{c}' has no raster in [data.covariates]", m.name)));
                }
            }
        }
        if self.run.samples == 0 {
            return Err(Error::Config("run.samples must be at least 1".into()));
        }
        if self.run.blocks.contains(&0) {
            return Err(Error::Config("run.blocks needs positive dimensions".into()));
        }
        Ok(())
    }

    pub fn model(&self, name: &str) -> Result<&ModelBlock> {
        self.models
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::Config(format!("no model named '{name}' in the configuration")))
    }
}

impl ModelBlock {
    /// Model specification for data with `n_campaigns` campaigns.
    pub fn to_spec(&self, n_campaigns: usize) -> Result<ModelSpec> {
        let groups = self.groups.clone().unwrap_or_else(|| vec![1; n_campaigns]);
        if groups.len() != n_campaigns {
            return Err(Error::Config(format!(
                "model '{}': grouping map has {} entries for {n_campaigns} campaigns",
                self.name,
                groups.len()
            )));
        }
        let detection = self.detection.iter().map(|c| DetectionComponent::new(&c.mark, c.transform)).collect();
        let mut spec = ModelSpec::new(&self.name, self.covariates.clone(), detection, groups);
        let d = PriorSpec::default();
        spec.priors = PriorSpec {
            fixed_precision: self.priors.fixed_precision.unwrap_or(d.fixed_precision),
            pc: self.priors.pc.clone().unwrap_or(d.pc),
            log_tau_sd: self.priors.log_tau_sd.unwrap_or(d.log_tau_sd),
        };
        if let Some(j) = self.rel_jitter {
            spec.rel_jitter = j;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn hyper_grid(&self, spec: &ModelSpec) -> Result<HyperGrid> {
        let around = |m: f64| [0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|f| f * m).collect::<Vec<_>>();
        let l = spec.n_groups();
        let sigma = match &self.hyper_grid.sigma {
            Some(s) => s.clone(),
            None => (1..=l).map(|g| around(spec.priors.pc_for(g).sigma_median())).collect(),
        };
        let rho = match &self.hyper_grid.rho {
            Some(r) => r.clone(),
            None => (1..=l).map(|g| around(spec.priors.pc_for(g).rho_median())).collect(),
        };
        let tau = match &self.hyper_grid.tau {
            Some(t) => t.clone(),
            None => spec.detection.iter().map(|_| around(1.0)).collect(),
        };
        if sigma.len() != l || rho.len() != l || tau.len() != spec.detection.len() {
            return Err(Error::Config(format!(
                "model '{}': hyper grid needs {l} σ axes, {l} ρ axes and {} τ axes",
                self.name,
                spec.detection.len()
            )));
        }
        HyperGrid::product(&sigma, &rho, &tau)
    }
}
