//! Experiment configuration, hyperparameters and published presets.
//!
//! A configuration is one JSON document. Relative paths are resolved
//! against the directory holding the document. Example:
//!
//! ```json
//! {
//!   "views": [{ "path": "features.bin" }],
//!   "labels": "labels.csv",
//!   "semantics": [{ "path": "attributes.csv", "kind": "attributes", "layout": "rows" }],
//!   "split": { "train_classes": [0, 1, 2], "test_classes": [3, 4] },
//!   "hyper": { "alpha": 1000, "d_y": 50, "k_g": 5, "k_st": 180 },
//!   "postproc": "none",
//!   "trials": 5
//! }
//! ```

use std::path::{Path, PathBuf};

use bidi_zsl_core::viewselect::KernelFn;
use bidi_zsl_core::{Label, Metric, RealMatrix, SemanticKind};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::io::{load_labels, load_matrix_auto, read_json};

/// Tunable numeric settings of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    /// Ridge term added to `X L Xᵀ`.
    pub alpha: f64,
    /// Latent dimension.
    pub d_y: usize,
    /// Neighbourhood size of the similarity graph.
    pub k_g: usize,
    /// Initial LSM step size.
    pub eta: f64,
    /// Test neighbours used by self-training.
    pub k_st: usize,
    /// Weight of the word-vector distances when two semantic spaces are fused.
    pub gamma: f64,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        let p = preset(AWA_PRESET).expect("shipped preset");
        Self {
            alpha: p.alpha,
            d_y: p.d_y,
            k_g: p.k_g,
            eta: 0.1,
            k_st: p.k_st,
            gamma: 0.5,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(HarnessError::Config(what));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha = {} must be positive", self.alpha));
        }
        if self.d_y == 0 {
            return bad("d_y must be at least 1".into());
        }
        if self.k_g == 0 {
            return bad("k_g must be at least 1".into());
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta = {} must be positive", self.eta));
        }
        if self.k_st == 0 {
            return bad("k_st must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma = {} outside [0, 1]", self.gamma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GraphMode {
    #[default]
    Supervised,
    Unsupervised,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Learner {
    #[default]
    Slpp,
    Lpp,
    Pca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PostProc {
    #[default]
    None,
    SelfTrain,
    Structured,
}

/// How the learner and post-processing are wired together.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Modes {
    pub graph: GraphMode,
    pub learner: Learner,
    /// Fit on the (averaged) kernel of all views. Implied by more than one view.
    pub kernelized: bool,
    pub kernel: KernelFn,
    pub postproc: PostProc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsmSettings {
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Seeded starts per fit; the lowest final cost wins.
    pub restarts: usize,
}

impl Default for LsmSettings {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            rel_tol: 1e-8,
            restarts: 5,
        }
    }
}

/// Class-wise cross-validation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSettings {
    /// Random validation splits per search point.
    pub trials: usize,
    /// Fraction of known classes held out in each trial.
    pub holdout_fraction: f64,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self::single_split()
    }
}

impl CvSettings {
    /// Five trials, for datasets with one standard split.
    pub fn single_split() -> Self {
        Self {
            trials: 5,
            holdout_fraction: 0.2,
        }
    }

    /// Three trials, per split of a dataset with several standard splits.
    pub fn multi_split() -> Self {
        Self {
            trials: 3,
            holdout_fraction: 0.2,
        }
    }
}

/// Matrix orientation on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// One instance (or class) per column.
    #[default]
    Columns,
    /// One instance (or class) per row.
    Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewSource {
    pub path: PathBuf,
    #[serde(default)]
    pub layout: Layout,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

/// Class-level semantic vectors; column (or row) `c` describes class `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticSource {
    pub path: PathBuf,
    pub kind: SemanticKind,
    /// Defaults to Euclidean for attributes and cosine for word vectors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(default)]
    pub layout: Layout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitConfig {
    Explicit {
        train_classes: Vec<Label>,
        test_classes: Vec<Label>,
    },
    /// Unseen classes drawn at random from all labelled classes.
    Generated { test_fraction: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub views: Vec<ViewSource>,
    pub labels: PathBuf,
    pub semantics: Vec<SemanticSource>,
    pub split: SplitConfig,
    #[serde(default)]
    pub hyper: HyperParams,
    #[serde(default, flatten)]
    pub modes: Modes,
    #[serde(default)]
    pub lsm: LsmSettings,
    /// Repeated runs with different LSM initialisations.
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub cv: CvSettings,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = read_json(path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(HarnessError::Config("at least one visual view is required".into()));
        }
        if self.semantics.is_empty() {
            return Err(HarnessError::Config("at least one semantic table is required".into()));
        }
        if self.semantics.len() > 2 {
            return Err(HarnessError::Config("at most two semantic tables can be fused".into()));
        }
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if self.lsm.restarts == 0 {
            return Err(HarnessError::Config("lsm.restarts must be at least 1".into()));
        }
        if self.kernelized() && self.modes.learner == Learner::Pca {
            return Err(HarnessError::Config("the PCA learner has no kernelized form".into()));
        }
        self.hyper.validate()
    }

    pub fn kernelized(&self) -> bool {
        self.modes.kernelized || self.views.len() > 1
    }

    /// Reads every referenced file.
    pub fn load_dataset(&self) -> Result<Dataset> {
        let views = self
            .views
            .iter()
            .map(|v| Ok(orient(load_matrix_auto(&self.resolve(&v.path))?, v.layout)))
            .collect::<Result<Vec<_>>>()?;
        let labels = load_labels(&self.resolve(&self.labels))?;
        let semantics = self
            .semantics
            .iter()
            .map(|s| {
                Ok(SemanticData {
                    matrix: orient(load_matrix_auto(&self.resolve(&s.path))?, s.layout),
                    kind: s.kind,
                    metric: s.metric.unwrap_or(s.kind.default_metric()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(views, labels, semantics)
    }
}

fn orient(m: RealMatrix, layout: Layout) -> RealMatrix {
    match layout {
        Layout::Columns => m,
        Layout::Rows => m.transpose(),
    }
}

/// Semantic vectors for every class, column `c` for class `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticData {
    pub matrix: RealMatrix,
    pub kind: SemanticKind,
    pub metric: Metric,
}

/// In-memory data for an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Each view is `d_v × n`, instances in the same order.
    pub views: Vec<RealMatrix>,
    pub labels: Vec<Label>,
    pub semantics: Vec<SemanticData>,
}

impl Dataset {
    pub fn new(views: Vec<RealMatrix>, labels: Vec<Label>, semantics: Vec<SemanticData>) -> Result<Self> {
        let n = labels.len();
        if views.is_empty() {
            return Err(HarnessError::Config("no views".into()));
        }
        for (i, v) in views.iter().enumerate() {
            if v.cols() != n {
                return Err(HarnessError::Config(format!(
                    "view {i} has {} instances but there are {n} labels",
                    v.cols()
                )));
            }
        }
        let max_label = labels.iter().copied().max().unwrap_or(0) as usize;
        for (i, s) in semantics.iter().enumerate() {
            if s.matrix.cols() <= max_label {
                return Err(HarnessError::Config(format!(
                    "semantic table {i} describes {} classes but label {max_label} occurs",
                    s.matrix.cols()
                )));
            }
        }
        Ok(Self {
            views,
            labels,
            semantics,
        })
    }

    /// Distinct labels, ascending.
    pub fn classes(&self) -> Vec<Label> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Indices of instances whose label is in `classes`, ascending.
    pub fn instances_of(&self, classes: &[Label]) -> Vec<usize> {
        let wanted: std::collections::BTreeSet<Label> = classes.iter().copied().collect();
        (0..self.labels.len())
            .filter(|&i| wanted.contains(&self.labels[i]))
            .collect()
    }
}

/// Published optimum for one dataset / visual / semantic combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub dataset: &'static str,
    pub visual: &'static str,
    pub semantic: &'static str,
    pub alpha: f64,
    pub d_y: usize,
    pub k_g: usize,
    pub k_st: usize,
}

impl Preset {
    /// Copies the preset's values into `hyper`, leaving eta, gamma and seed.
    pub fn apply(&self, hyper: &mut HyperParams) {
        hyper.alpha = self.alpha;
        hyper.d_y = self.d_y;
        hyper.k_g = self.k_g;
        hyper.k_st = self.k_st;
    }
}

/// Default preset for AwA.
pub const AWA_PRESET: &str = "awa-googlenet-att";

macro_rules! presets {
    ($(($name:literal, $ds:literal, $vis:literal, $sem:literal, $a:expr, $d:expr, $k:expr, $st:expr)),* $(,)?) => {
        pub const PRESETS: &[Preset] = &[
            $(Preset { name: $name, dataset: $ds, visual: $vis, semantic: $sem, alpha: $a, d_y: $d, k_g: $k, k_st: $st }),*
        ];
    };
}

presets![
    ("awa-googlenet-wv", "awa", "googlenet", "wv", 1000.0, 300, 15, 200),
    ("awa-googlenet-att", "awa", "googlenet", "att", 1000.0, 50, 5, 180),
    ("awa-googlenet-comb", "awa", "googlenet", "comb", 1000.0, 50, 5, 200),
    ("awa-vgg19-wv", "awa", "vgg19", "wv", 1000.0, 300, 10, 160),
    ("awa-vgg19-att", "awa", "vgg19", "att", 1000.0, 150, 5, 180),
    ("awa-vgg19-comb", "awa", "vgg19", "comb", 1000.0, 150, 5, 200),
    ("cub-googlenet-wv", "cub", "googlenet", "wv", 0.01, 250, 10, 60),
    ("cub-googlenet-att", "cub", "googlenet", "att", 10.0, 100, 30, 40),
    ("cub-googlenet-comb", "cub", "googlenet", "comb", 10.0, 100, 30, 60),
    ("cub-vgg19-wv", "cub", "vgg19", "wv", 1.0, 250, 30, 40),
    ("cub-vgg19-att", "cub", "vgg19", "att", 10.0, 100, 20, 20),
    ("cub-vgg19-comb", "cub", "vgg19", "comb", 1.0, 100, 30, 40),
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let text = r#"{
            "views": [{ "path": "x.bin" }],
            "labels": "labels.csv",
            "semantics": [{ "path": "att.csv", "kind": "attributes", "layout": "rows" }],
            "split": { "test_fraction": 0.2, "seed": 3 },
            "hyper": { "alpha": 10, "d_y": 3, "k_g": 2 },
            "postproc": "self-train"
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.modes.postproc, PostProc::SelfTrain);
        assert_eq!(cfg.hyper.eta, 0.1);
        assert_eq!(cfg.trials, 1);
        assert!(matches!(cfg.split, SplitConfig::Generated { seed: 3, .. }));
        cfg.validate().unwrap();
        let again: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert!(serde_json::from_str::<ExperimentConfig>(&text.replace("\"trials\"", "\"x\"").replace("\"postproc\"", "\"postprocess\"")).is_err());
    }

    #[test]
    fn hyper_validation() {
        assert!(HyperParams::default().validate().is_ok());
        for bad in [
            HyperParams { alpha: 0.0, ..Default::default() },
            HyperParams { d_y: 0, ..Default::default() },
            HyperParams { gamma: 1.5, ..Default::default() },
            HyperParams { eta: -1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
