//! End-to-end experiment runs.
//!
//! One run fits the bottom-up subspace on the training classes, places the
//! unseen classes with LSM, optionally adapts to the test set and scores
//! per-class accuracy. Trials differ only in the LSM seed.

use bidi_zsl_core::postproc::{self_train, structured_predict};
use bidi_zsl_core::recognition::per_class_accuracy_over;
use bidi_zsl_core::semantics::semantic_distances;
use bidi_zsl_core::subspace::{fit_lpp, fit_pca};
use bidi_zsl_core::{
    classify, compute_landmarks, embed_training, embed_unseen_multistart, fit_multiview, fit_slpp, fuse_distances,
    EvalReport, Label, LsmConfig, ModelInput, RealMatrix, SemanticDistances, SemanticKind,
    SemanticTable, SubspaceModel, ZslModel,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Dataset, ExperimentConfig, GraphMode, HyperParams, Learner, LsmSettings, Modes, PostProc, SplitConfig};
use crate::error::{HarnessError, Result, StageContext};
use crate::report::MeanSe;
use crate::split::{derive_seed, make_classwise_split, SplitSpec};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "BIDI_ZSL_THREADS";

/// Everything about a run except the data and the hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Method {
    pub modes: Modes,
    pub lsm: LsmSettings,
}

/// Which semantic tables feed LSM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemanticUse {
    /// The single table, or both fused with `gamma`.
    Fused,
    /// Only table `i`.
    Only(usize),
}

/// Worker threads to use: an explicit request, else `BIDI_ZSL_THREADS`,
/// else rayon's default. `Some(1)` means strictly serial.
pub fn resolve_threads(requested: Option<usize>) -> Option<usize> {
    let env = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    match (requested, env) {
        (Some(r), Some(cap)) => Some(r.clamp(1, cap)),
        (Some(r), None) => Some(r.max(1)),
        (None, cap) => cap,
    }
}

/// Order-preserving map, serial or on a dedicated pool.
pub(crate) fn par_map<T, R, F>(items: &[T], threads: Option<usize>, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match resolve_threads(threads) {
        Some(1) => items.iter().map(f).collect(),
        n => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(n) = n {
                builder = builder.num_threads(n);
            }
            match builder.build() {
                Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                Err(e) => {
                    log::warn!("thread pool unavailable ({e}); running serially");
                    items.iter().map(f).collect()
                }
            }
        }
    }
}

fn training_labels(ds: &Dataset, idx: &[usize]) -> Vec<Label> {
    idx.iter().map(|&i| ds.labels[i]).collect()
}

fn views_at(ds: &Dataset, idx: &[usize]) -> Vec<RealMatrix> {
    ds.views.iter().map(|v| v.select_columns(idx)).collect()
}

fn uses_kernel(ds: &Dataset, modes: &Modes) -> bool {
    modes.kernelized || ds.views.len() > 1
}

/// Reason the hyperparameters cannot be fitted on `n_train` instances, if any.
pub fn infeasibility(ds: &Dataset, modes: &Modes, hyper: &HyperParams, n_train: usize) -> Option<String> {
    let limit = if uses_kernel(ds, modes) { n_train } else { ds.views[0].rows() };
    (hyper.d_y > limit).then(|| format!("d_y = {} exceeds the input dimension {limit}", hyper.d_y))
}

/// Fits the subspace and returns it with the normalised training embedding.
fn fit_subspace(ds: &Dataset, hyper: &HyperParams, modes: &Modes, idx: &[usize], labels: &[Label]) -> Result<(SubspaceModel, RealMatrix)> {
    let views = views_at(ds, idx);
    let supervised = modes.graph == GraphMode::Supervised && modes.learner == Learner::Slpp;
    if uses_kernel(ds, modes) {
        if modes.learner == Learner::Pca {
            return Err(HarnessError::Config("the PCA learner has no kernelized form".into()));
        }
        let (mut model, fused) =
            fit_multiview(&views, supervised.then_some(labels), modes.kernel, hyper.alpha, hyper.d_y, hyper.k_g)
                .stage("fit")?;
        let embedded = embed_training(&mut model, ModelInput::Kernel(&fused)).stage("embed")?;
        Ok((model, embedded))
    } else {
        let x = &views[0];
        let mut model = match modes.learner {
            Learner::Pca => fit_pca(x, hyper.d_y),
            _ if supervised => fit_slpp(x, labels, hyper.alpha, hyper.d_y, hyper.k_g),
            _ => fit_lpp(x, hyper.alpha, hyper.d_y, hyper.k_g),
        }
        .stage("fit")?;
        let embedded = embed_training(&mut model, ModelInput::Features(x)).stage("embed")?;
        Ok((model, embedded))
    }
}

fn table_distances(ds: &Dataset, table: usize, known: &[Label], unseen: &[Label]) -> Result<(SemanticKind, SemanticDistances)> {
    let s = ds
        .semantics
        .get(table)
        .ok_or_else(|| HarnessError::Usage(format!("no semantic table {table}")))?;
    let cols = |c: &[Label]| s.matrix.select_columns(&c.iter().map(|&l| l as usize).collect::<Vec<_>>());
    let t = SemanticTable::new(cols(known), cols(unseen), s.metric, s.kind).stage("semantics")?;
    Ok((s.kind, semantic_distances(&t).stage("semantics")?))
}

/// Semantic distance blocks for LSM. With two tables the word-vector table
/// gets weight `gamma`; when neither or both are word vectors the second
/// table does.
pub fn lsm_distances(ds: &Dataset, usage: SemanticUse, gamma: f64, known: &[Label], unseen: &[Label]) -> Result<SemanticDistances> {
    match (usage, ds.semantics.len()) {
        (SemanticUse::Only(i), _) => Ok(table_distances(ds, i, known, unseen)?.1),
        (SemanticUse::Fused, 1) => Ok(table_distances(ds, 0, known, unseen)?.1),
        (SemanticUse::Fused, 2) => {
            let (k0, d0) = table_distances(ds, 0, known, unseen)?;
            let (k1, d1) = table_distances(ds, 1, known, unseen)?;
            let (att, wv) = if k0 == SemanticKind::WordVectors && k1 != SemanticKind::WordVectors {
                (d1, d0)
            } else {
                (d0, d1)
            };
            fuse_distances(&att, &wv, gamma).stage("semantics")
        }
        (SemanticUse::Fused, n) => Err(HarnessError::Config(format!("{n} semantic tables; expected 1 or 2"))),
    }
}

/// Fits the full model: subspace, landmarks and unseen-class embeddings.
pub fn fit_model(
    ds: &Dataset,
    hyper: &HyperParams,
    method: &Method,
    usage: SemanticUse,
    train_classes: &[Label],
    unseen_classes: &[Label],
    lsm_seed: u64,
) -> Result<ZslModel> {
    hyper.validate()?;
    let idx = ds.instances_of(train_classes);
    let labels = training_labels(ds, &idx);
    let (subspace, embedded) = fit_subspace(ds, hyper, &method.modes, &idx, &labels)?;
    let landmarks = compute_landmarks(&embedded, &labels).stage("landmarks")?;
    let delta = lsm_distances(ds, usage, hyper.gamma, &landmarks.class_ids, unseen_classes)?;
    let cfg = LsmConfig {
        eta: hyper.eta,
        seed: lsm_seed,
        max_iters: method.lsm.max_iters,
        rel_tol: method.lsm.rel_tol,
    };
    let unseen = embed_unseen_multistart(&landmarks.embedding, &delta, &cfg, method.lsm.restarts).stage("lsm")?;
    if !unseen.converged {
        log::debug!("LSM stopped after {} iterations, cost {:e}", unseen.iterations, unseen.final_cost);
    }
    ZslModel::new(subspace, landmarks, unseen, unseen_classes.to_vec()).stage("model")
}

/// Projects instances into the model's latent space (centred and normalised).
/// `views` holds one matrix per training view, instances as columns.
pub fn project_views(model: &ZslModel, views: &[RealMatrix]) -> Result<RealMatrix> {
    let projected = match &model.subspace.kernel_basis {
        Some(basis) => {
            let k = basis.kernel_columns(views).stage("project")?;
            bidi_zsl_core::project_test(model, ModelInput::Kernel(&k))
        }
        None => {
            let x = views
                .first()
                .ok_or_else(|| HarnessError::Usage("no test features given".into()))?;
            bidi_zsl_core::project_test(model, ModelInput::Features(x))
        }
    };
    projected.stage("project")
}

/// Labels projected test instances, adapting the model first if asked.
/// Returns the labels and the model actually used for the final decision.
pub fn predict_projected(model: &ZslModel, projected: &RealMatrix, postproc: PostProc, k_st: usize) -> Result<(Vec<Label>, ZslModel)> {
    match postproc {
        PostProc::None => Ok((classify(projected, model).stage("classify")?, model.clone())),
        PostProc::SelfTrain => {
            let adapted = self_train(model, projected, k_st).stage("postproc")?;
            Ok((classify(projected, &adapted).stage("classify")?, adapted))
        }
        PostProc::Structured => Ok((structured_predict(model, projected).stage("postproc")?, model.clone())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsmStats {
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Outcome of one fit-and-score on one split.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub model: ZslModel,
    pub predictions: Vec<Label>,
    pub eval: EvalReport,
}

/// Fits on `train_classes`, scores on all instances of `test_classes`.
pub fn evaluate_split(
    ds: &Dataset,
    hyper: &HyperParams,
    method: &Method,
    usage: SemanticUse,
    train_classes: &[Label],
    test_classes: &[Label],
    lsm_seed: u64,
) -> Result<SplitOutcome> {
    let model = fit_model(ds, hyper, method, usage, train_classes, test_classes, lsm_seed)?;
    let test_idx = ds.instances_of(test_classes);
    let projected = project_views(&model, &views_at(ds, &test_idx))?;
    let (predictions, model) = predict_projected(&model, &projected, method.modes.postproc, hyper.k_st)?;
    let truth = training_labels(ds, &test_idx);
    let eval = per_class_accuracy_over(test_classes, &predictions, &truth).stage("evaluate")?;
    Ok(SplitOutcome { model, predictions, eval })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub lsm: LsmStats,
    pub eval: EvalReport,
}

/// JSON report of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub hyper: HyperParams,
    pub method: Method,
    pub train_classes: Vec<Label>,
    pub test_classes: Vec<Label>,
    pub mean_per_class_accuracy: MeanSe,
    pub per_image_accuracy: MeanSe,
    pub trials: Vec<TrialReport>,
}

/// Seed of trial `t` for a base seed.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    derive_seed(base, &[trial as u64])
}

/// Resolves a split description against the dataset's classes.
pub fn resolve_split(ds: &Dataset, split: &SplitConfig) -> Result<SplitSpec> {
    match split {
        SplitConfig::Explicit {
            train_classes,
            test_classes,
        } => {
            let s = SplitSpec::new(train_classes.clone(), test_classes.clone())?;
            if s.test_classes.is_empty() {
                return Err(HarnessError::Config("split has no test classes".into()));
            }
            Ok(s)
        }
        SplitConfig::Generated { test_fraction, seed } => {
            let s = make_classwise_split(&ds.classes(), *test_fraction, *seed)?;
            SplitSpec::new(s.train_classes, s.validation_classes.unwrap_or_default())
        }
    }
}

/// Runs `trials` seeded repetitions on an in-memory dataset.
pub fn run_on_dataset(
    ds: &Dataset,
    split: &SplitSpec,
    hyper: &HyperParams,
    method: &Method,
    trials: usize,
    threads: Option<usize>,
) -> Result<PipelineReport> {
    split.validate()?;
    let seeds: Vec<(usize, u64)> = (0..trials.max(1)).map(|t| (t, trial_seed(hyper.seed, t))).collect();
    let outcomes = par_map(&seeds, threads, |&(t, seed)| {
        evaluate_split(ds, hyper, method, SemanticUse::Fused, &split.train_classes, &split.test_classes, seed).map(|o| {
            TrialReport {
                trial: t,
                seed,
                lsm: LsmStats {
                    final_cost: o.model.unseen.final_cost,
                    iterations: o.model.unseen.iterations,
                    converged: o.model.unseen.converged,
                },
                eval: o.eval,
            }
        })
    });
    let trials = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let acc: Vec<f64> = trials.iter().map(|t| t.eval.mean_per_class_accuracy).collect();
    let img: Vec<f64> = trials.iter().map(|t| t.eval.per_image_accuracy).collect();
    Ok(PipelineReport {
        hyper: *hyper,
        method: *method,
        train_classes: split.train_classes.clone(),
        test_classes: split.test_classes.clone(),
        mean_per_class_accuracy: MeanSe::of(&acc),
        per_image_accuracy: MeanSe::of(&img),
        trials,
    })
}

/// Loads the configured data and runs it. Worker threads come from
/// `BIDI_ZSL_THREADS` or rayon's default.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<PipelineReport> {
    run_pipeline_with(config, None)
}

pub fn run_pipeline_with(config: &ExperimentConfig, threads: Option<usize>) -> Result<PipelineReport> {
    config.validate()?;
    let ds = config.load_dataset()?;
    let split = resolve_split(&ds, &config.split)?;
    let method = Method {
        modes: config.modes,
        lsm: config.lsm,
    };
    run_on_dataset(&ds, &split, &config.hyper, &method, config.trials, threads)
}

/// Text rendering of a pipeline report.
pub fn render_report(r: &PipelineReport) -> String {
    let first = &r.trials[0].eval;
    let rows: Vec<Vec<String>> = first
        .classes
        .iter()
        .map(|c| {
            let recalls: Vec<f64> = r.trials.iter().map(|t| t.eval.per_class_recall[c]).collect();
            vec![c.to_string(), MeanSe::of(&recalls).percent()]
        })
        .collect();
    let mut out = crate::report::text_table(&["class", "recall %"], &rows);
    out.push_str(&format!(
        "mean per-class accuracy: {} over {} trial(s)\nper-image accuracy: {}\n",
        r.mean_per_class_accuracy.percent(),
        r.trials.len(),
        r.per_image_accuracy.percent()
    ));
    out
}
