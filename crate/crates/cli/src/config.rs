use agemdp::average::{default_alpha_seq, AverageOptions};
use agemdp::discounted::ViOptions;
use agemdp::{AgeGrid, ModelFile, TransitionRateModel};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

/// Configuration problem, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<(usize, usize)>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some((line, col)) => write!(f, "{}:{line}:{col}: {}", self.path.display(), self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

// serde_json appends "at line L column C", which the diagnostic already leads with.
fn strip_position(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rsplit_once(" at line ") {
        Some((head, _)) => head.to_string(),
        None => s,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Inline model document. Exactly one of `model` and `model_path` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelFile>,
    /// Model document on disk, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Present when the experiment needs the average-cost assumptions;
    /// `validate` then also checks reachability of the reference state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average: Option<AverageConfig>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_nodes: Option<usize>,
    /// Cell width when `n_nodes` is absent (default 0.01).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 1_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AverageConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_seq: Option<Vec<f64>>,
    pub bisection_tol: f64,
    pub reference_state: usize,
    /// Largest accepted Cauchy gap of the vanishing-discount sequence.
    pub tol: f64,
}

impl Default for AverageConfig {
    fn default() -> Self {
        Self { alpha_seq: None, bisection_tol: 1e-8, reference_state: 0, tol: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyChoice {
    DiscountedOptimal,
    AverageOptimal,
    Constant { action: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub paths: usize,
    /// Discounted horizon; derived from `truncation` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    pub truncation: f64,
    pub seed: u64,
    pub start_state: usize,
    /// Jumps per replica for the average-cost estimators; 0 skips them.
    pub n_jumps: usize,
    pub replicas: usize,
    pub policy: PolicyChoice,
    /// Length of the path 0 dump in `trajectory.csv`; absent skips it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_horizon: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            paths: 10_000,
            horizon: None,
            truncation: 1e-3,
            seed: 0,
            start_state: 0,
            n_jumps: 0,
            replicas: 10,
            policy: PolicyChoice::DiscountedOptimal,
            trajectory_horizon: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("out") }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: Some((e.line(), e.column())),
            message: strip_position(&e),
        })?;
        cfg.check(path)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: None,
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_json(&text, path)?;
        if let Some(p) = &cfg.model_path {
            let full = path.parent().map_or_else(|| p.clone(), |dir| dir.join(p));
            let text = std::fs::read_to_string(&full)
                .map_err(|e| ConfigError { path: full.clone(), line: None, message: e.to_string() })?;
            let model = ModelFile::from_json(&text).map_err(|e| match e {
                agemdp::Error::Json(j) => ConfigError { path: full.clone(), line: Some((j.line(), j.column())), message: strip_position(&j) },
                other => ConfigError { path: full.clone(), line: None, message: other.to_string() },
            })?;
            cfg.model = Some(model);
            cfg.model_path = None;
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn check(&self, path: &Path) -> Result<(), ConfigError> {
        let err = |message: String| Err(ConfigError { path: path.to_path_buf(), line: None, message });
        if self.model.is_some() == self.model_path.is_some() {
            return err("exactly one of `model` and `model_path` must be given".into());
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) {
                return err(format!("alpha must be positive, got {a}"));
            }
        }
        if !(self.solver.tol > 0.0) {
            return err("solver.tol must be positive".into());
        }
        if let Some(seq) = self.average.as_ref().and_then(|a| a.alpha_seq.as_ref()) {
            if seq.len() < 2 || seq.iter().any(|&a| !(a > 0.0)) || seq.windows(2).any(|w| w[1] >= w[0]) {
                return err("average.alpha_seq must hold two or more positive, decreasing rates".into());
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> agemdp::Result<TransitionRateModel> {
        TransitionRateModel::from_file(self.model.clone().expect("resolved by load"))
    }

    pub fn build_grid(&self, model: &TransitionRateModel) -> agemdp::Result<AgeGrid> {
        let g = &self.grid;
        match (g.y_max, g.n_nodes) {
            (Some(y), Some(n)) if n >= 2 => AgeGrid::uniform(y, n - 1),
            (Some(_), Some(n)) => Err(agemdp::Error::InvalidArgument(format!("grid.n_nodes = {n}"))),
            (Some(y), None) => {
                let step = g.step.unwrap_or(0.01);
                AgeGrid::uniform(y, (y / step).ceil().max(1.0) as usize)
            }
            (None, Some(_)) => Err(agemdp::Error::InvalidArgument("grid.n_nodes needs grid.y_max".into())),
            (None, None) => AgeGrid::for_model(model, g.step.unwrap_or(0.01)),
        }
    }

    pub fn vi_options(&self) -> ViOptions {
        ViOptions { tol: self.solver.tol, max_iter: self.solver.max_iter, cells: None }
    }

    pub fn average(&self) -> AverageConfig {
        self.average.clone().unwrap_or_default()
    }

    pub fn average_options(&self) -> AverageOptions {
        let avg = self.average();
        AverageOptions {
            reference: avg.reference_state,
            tol: avg.tol,
            bisection_tol: avg.bisection_tol,
            max_iter: self.solver.max_iter,
            ..AverageOptions::default()
        }
    }

    pub fn alpha_seq(&self) -> Vec<f64> {
        self.average().alpha_seq.unwrap_or_else(default_alpha_seq)
    }
}
