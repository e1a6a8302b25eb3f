//! Class-wise cross-validated hyperparameter search.
//!
//! Validation splits hold out a fraction of the known classes; the held-out
//! classes play the unseen role. A coarse grid is followed by a sequential
//! fine-tune of α, d_y, k_G and k_ST, and, when two semantic tables are
//! available, a sweep of the fusion weight γ.

use std::cmp::Ordering;

use bidi_zsl_core::{select_representations, Label, RealMatrix, StopRule, ZslError};
use serde::{Deserialize, Serialize};

use crate::config::{CvSettings, Dataset, HyperParams, PostProc};
use crate::error::{HarnessError, Result};
use crate::pipeline::{evaluate_split, infeasibility, par_map, trial_seed, Method, SemanticUse};
use crate::split::{derive_seed, make_classwise_split, SplitSpec};

const CV_STREAM: u64 = 0xC5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseGrid {
    pub alpha: Vec<f64>,
    pub d_y: Vec<usize>,
    pub k_g: Vec<usize>,
}

impl Default for CoarseGrid {
    fn default() -> Self {
        Self {
            alpha: vec![0.1, 10.0],
            d_y: vec![10, 100, 500],
            k_g: vec![1, 10, 50],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineGrid {
    pub alpha: Vec<f64>,
    pub d_y: Vec<usize>,
    pub k_g: Vec<usize>,
    pub k_st: Vec<usize>,
}

impl Default for FineGrid {
    fn default() -> Self {
        Self {
            alpha: vec![0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0],
            d_y: vec![50, 100, 150, 200, 250, 300],
            k_g: vec![5, 10, 15, 20, 25, 30],
            k_st: (1..=10).map(|i| 20 * i).collect(),
        }
    }
}

/// `{0.1, 0.2, …, 0.9}`.
pub fn gamma_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Coarse,
    Alpha,
    DY,
    KG,
    KST,
    Gamma,
}

/// One evaluated search point. `score` is `None` for skipped points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub stage: Stage,
    pub hyper: HyperParams,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: HyperParams,
    /// Mean validation per-class accuracy of `best`.
    pub score: f64,
    pub trace: Vec<TraceEntry>,
}

/// Data and fixed settings shared by every search point.
#[derive(Debug, Clone)]
pub struct SearchSetup<'a> {
    pub dataset: &'a Dataset,
    /// Classes available for validation splits (the training classes).
    pub known_classes: Vec<Label>,
    pub method: Method,
    pub cv: CvSettings,
    pub threads: Option<usize>,
}

impl SearchSetup<'_> {
    /// Validation splits for `seed`; identical for every grid point.
    pub fn splits(&self, seed: u64) -> Result<Vec<SplitSpec>> {
        if self.cv.trials == 0 {
            return Err(HarnessError::Config("cv trials must be at least 1".into()));
        }
        (0..self.cv.trials)
            .map(|t| {
                make_classwise_split(
                    &self.known_classes,
                    self.cv.holdout_fraction,
                    derive_seed(seed, &[CV_STREAM, t as u64]),
                )
            })
            .collect()
    }

    /// Single-table runs when two tables exist, so that the objective is
    /// their average; otherwise the one table.
    fn single_table_usages(&self) -> Vec<SemanticUse> {
        match self.dataset.semantics.len() {
            2 => vec![SemanticUse::Only(0), SemanticUse::Only(1)],
            _ => vec![SemanticUse::Fused],
        }
    }

    /// Mean validation accuracy of each point; `None` marks an infeasible point.
    fn score_points(
        &self,
        points: &[HyperParams],
        postproc: PostProc,
        usages: &[SemanticUse],
    ) -> Result<Vec<Option<f64>>> {
        let Some(first) = points.first() else {
            return Ok(Vec::new());
        };
        let splits = self.splits(first.seed)?;
        let min_train = splits
            .iter()
            .map(|s| self.dataset.instances_of(&s.train_classes).len())
            .min()
            .unwrap_or(0);
        let method = Method {
            modes: crate::config::Modes {
                postproc,
                ..self.method.modes
            },
            lsm: self.method.lsm,
        };
        let feasible: Vec<bool> = points
            .iter()
            .map(|h| match infeasibility(self.dataset, &method.modes, h, min_train) {
                Some(why) => {
                    log::warn!("skipping alpha={} d_y={} k_g={}: {why}", h.alpha, h.d_y, h.k_g);
                    false
                }
                None => true,
            })
            .collect();
        let mut tasks = Vec::new();
        for (p, h) in points.iter().enumerate() {
            if !feasible[p] {
                continue;
            }
            for (t, s) in splits.iter().enumerate() {
                for &u in usages {
                    tasks.push((p, *h, t, s, u));
                }
            }
        }
        let results = par_map(&tasks, self.threads, |&(_, h, t, s, u)| {
            let test = s.validation_classes.as_deref().unwrap_or_default();
            evaluate_split(self.dataset, &h, &method, u, &s.train_classes, test, trial_seed(h.seed, t))
                .map(|o| o.eval.mean_per_class_accuracy)
        });
        let mut sums = vec![0.0; points.len()];
        for (&(p, ..), r) in tasks.iter().zip(results) {
            sums[p] += r?;
        }
        let per_point = (splits.len() * usages.len()) as f64;
        Ok(feasible
            .iter()
            .zip(sums)
            .map(|(&ok, s)| ok.then_some(s / per_point))
            .collect())
    }
}

/// Mean validation accuracy of one point, `None` when it is infeasible.
pub fn cv_score(setup: &SearchSetup<'_>, hyper: &HyperParams) -> Result<Option<f64>> {
    let scores = setup.score_points(std::slice::from_ref(hyper), setup.method.modes.postproc, &setup.single_table_usages())?;
    Ok(scores[0])
}

/// Greedy complementary subset of the dataset's views, named by `names`.
/// Each view is scored alone by cross-validation; neighbourhoods are taken
/// over the instances of the known classes.
pub fn select_views(
    setup: &SearchSetup<'_>,
    hyper: &HyperParams,
    names: &[String],
    k: usize,
    stop: StopRule,
) -> Result<Vec<String>> {
    let ds = setup.dataset;
    if names.len() != ds.views.len() {
        return Err(HarnessError::Usage(format!("{} names for {} views", names.len(), ds.views.len())));
    }
    let idx = ds.instances_of(&setup.known_classes);
    let labels: Vec<Label> = idx.iter().map(|&i| ds.labels[i]).collect();
    let candidates: Vec<(String, RealMatrix)> = names
        .iter()
        .cloned()
        .zip(ds.views.iter().map(|v| v.select_columns(&idx)))
        .collect();
    let scorer = |name: &str, _: &RealMatrix| -> bidi_zsl_core::Result<f64> {
        let v = names.iter().position(|n| n == name).unwrap_or(0);
        let single = Dataset {
            views: vec![ds.views[v].clone()],
            labels: ds.labels.clone(),
            semantics: ds.semantics.clone(),
        };
        let one = SearchSetup {
            dataset: &single,
            ..setup.clone()
        };
        match cv_score(&one, hyper) {
            Ok(Some(s)) => Ok(s),
            Ok(None) => Err(ZslError::Bounds(format!("d_y = {} is infeasible for view {name}", hyper.d_y))),
            Err(HarnessError::Core(e)) | Err(HarnessError::Stage { source: e, .. }) => Err(e),
            Err(e) => Err(ZslError::InvalidInput(e.to_string())),
        }
    };
    Ok(select_representations(&candidates, &labels, k, stop, scorer)?)
}

fn all_infeasible(stage: Stage) -> HarnessError {
    HarnessError::Search(format!("every point of the {stage:?} grid is infeasible"))
}

/// Index of the best score; ties go to the earliest point.
fn best_earliest(scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    best.map(|b| b.0)
}

/// Evaluates every combination of the coarse grid, starting from `base` for
/// the remaining fields. Ties prefer smaller d_y, then α, then k_G.
pub fn coarse_grid_search(setup: &SearchSetup<'_>, base: &HyperParams, grid: &CoarseGrid) -> Result<SearchOutcome> {
    let mut points = Vec::new();
    for &alpha in &grid.alpha {
        for &d_y in &grid.d_y {
            for &k_g in &grid.k_g {
                points.push(HyperParams { alpha, d_y, k_g, ..*base });
            }
        }
    }
    let scores = setup.score_points(&points, setup.method.modes.postproc, &setup.single_table_usages())?;
    let best = (0..points.len())
        .filter(|&i| scores[i].is_some())
        .max_by(|&a, &b| {
            let (pa, pb) = (&points[a], &points[b]);
            scores[a]
                .partial_cmp(&scores[b])
                .unwrap_or(Ordering::Equal)
                .then(pb.d_y.cmp(&pa.d_y))
                .then(pb.alpha.total_cmp(&pa.alpha))
                .then(pb.k_g.cmp(&pa.k_g))
        })
        .ok_or_else(|| all_infeasible(Stage::Coarse))?;
    Ok(SearchOutcome {
        best: points[best],
        score: scores[best].unwrap_or(f64::NAN),
        trace: points
            .into_iter()
            .zip(scores)
            .map(|(hyper, score)| TraceEntry {
                stage: Stage::Coarse,
                hyper,
                score,
            })
            .collect(),
    })
}

/// Sweeps α, then d_y, then k_G, then k_ST, each with the others fixed at
/// their current best. Ties keep the earliest grid value. The k_ST sweep is
/// scored with self-training, the only step that uses it.
pub fn fine_tune_sequence(setup: &SearchSetup<'_>, start: &HyperParams, grid: &FineGrid) -> Result<SearchOutcome> {
    let usages = setup.single_table_usages();
    let mut current = *start;
    let mut score = f64::NAN;
    let mut trace = Vec::new();
    let stages: [(Stage, usize); 4] = [
        (Stage::Alpha, grid.alpha.len()),
        (Stage::DY, grid.d_y.len()),
        (Stage::KG, grid.k_g.len()),
        (Stage::KST, grid.k_st.len()),
    ];
    for (stage, len) in stages {
        let points: Vec<HyperParams> = (0..len)
            .map(|i| {
                let mut h = current;
                match stage {
                    Stage::Alpha => h.alpha = grid.alpha[i],
                    Stage::DY => h.d_y = grid.d_y[i],
                    Stage::KG => h.k_g = grid.k_g[i],
                    _ => h.k_st = grid.k_st[i],
                }
                h
            })
            .collect();
        if points.is_empty() {
            continue;
        }
        let postproc = if stage == Stage::KST {
            PostProc::SelfTrain
        } else {
            setup.method.modes.postproc
        };
        let scores = setup.score_points(&points, postproc, &usages)?;
        let best = best_earliest(&scores).ok_or_else(|| all_infeasible(stage))?;
        current = points[best];
        score = scores[best].unwrap_or(f64::NAN);
        trace.extend(points.into_iter().zip(scores).map(|(hyper, score)| TraceEntry { stage, hyper, score }));
    }
    Ok(SearchOutcome {
        best: current,
        score,
        trace,
    })
}

/// Best fusion weight over `grid` with everything else fixed at `hyper`.
/// Ties go to the smallest γ.
pub fn gamma_search(setup: &SearchSetup<'_>, hyper: &HyperParams, grid: &[f64]) -> Result<SearchOutcome> {
    if setup.dataset.semantics.len() != 2 {
        return Err(HarnessError::Usage(format!(
            "gamma search needs two semantic tables, found {}",
            setup.dataset.semantics.len()
        )));
    }
    let mut order: Vec<f64> = grid.to_vec();
    order.sort_by(f64::total_cmp);
    let points: Vec<HyperParams> = order.iter().map(|&gamma| HyperParams { gamma, ..*hyper }).collect();
    let scores = setup.score_points(&points, setup.method.modes.postproc, &[SemanticUse::Fused])?;
    let best = best_earliest(&scores).ok_or_else(|| all_infeasible(Stage::Gamma))?;
    Ok(SearchOutcome {
        best: points[best],
        score: scores[best].unwrap_or(f64::NAN),
        trace: points
            .into_iter()
            .zip(scores)
            .map(|(hyper, score)| TraceEntry {
                stage: Stage::Gamma,
                hyper,
                score,
            })
            .collect(),
    })
}
