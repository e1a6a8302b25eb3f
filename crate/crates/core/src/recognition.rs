//! Nearest-embedding recognition and per-class scoring.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Result, ZslError};
use crate::linalg::{l2_normalize_columns, subtract_from_columns};
use crate::lsm::UnseenEmbedding;
use crate::matrix::{squared_distance, RealMatrix};
use crate::subspace::{Landmarks, ModelInput, SubspaceModel};
use crate::Label;

/// Everything needed to label test instances of unseen classes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ZslModel {
    pub subspace: SubspaceModel,
    pub landmarks: Landmarks,
    pub unseen: UnseenEmbedding,
    /// Class of each column of `unseen.embedding`.
    pub unseen_class_ids: Vec<Label>,
}

impl ZslModel {
    pub fn new(
        subspace: SubspaceModel,
        landmarks: Landmarks,
        unseen: UnseenEmbedding,
        unseen_class_ids: Vec<Label>,
    ) -> Result<Self> {
        let d = subspace.latent_dim();
        if landmarks.embedding.rows() != d || unseen.embedding.rows() != d {
            return Err(ZslError::Shape(format!(
                "latent dimensions differ: subspace {d}, landmarks {}, unseen {}",
                landmarks.embedding.rows(),
                unseen.embedding.rows()
            )));
        }
        if unseen_class_ids.len() != unseen.embedding.cols() {
            return Err(ZslError::Shape(format!(
                "{} unseen class ids for {} embeddings",
                unseen_class_ids.len(),
                unseen.embedding.cols()
            )));
        }
        Ok(Self {
            subspace,
            landmarks,
            unseen,
            unseen_class_ids,
        })
    }
}

/// Projects test instances, subtracts the training mean and normalises
/// each column.
pub fn project_test(model: &ZslModel, input: ModelInput<'_>) -> Result<RealMatrix> {
    project_normalized(&model.subspace, input)
}

pub fn project_normalized(subspace: &SubspaceModel, input: ModelInput<'_>) -> Result<RealMatrix> {
    let latent = subspace.project_raw(input)?;
    if subspace.training_mean.len() != latent.rows() {
        return Err(ZslError::Usage("subspace model has no recorded training mean".into()));
    }
    l2_normalize_columns(&subtract_from_columns(&latent, &subspace.training_mean))
}

/// Index of the nearest column of `centers` for every column of `points`.
/// Ties go to the lowest index.
pub fn nearest_columns(points: &RealMatrix, centers: &RealMatrix) -> Result<Vec<usize>> {
    if centers.cols() == 0 {
        return Err(ZslError::Usage("no class embeddings to compare against".into()));
    }
    if points.rows() != centers.rows() {
        return Err(ZslError::Shape(format!(
            "points in {} dimensions, embeddings in {}",
            points.rows(),
            centers.rows()
        )));
    }
    Ok(points
        .columns()
        .map(|p| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, c) in centers.columns().enumerate() {
                let d = squared_distance(p, c);
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            best
        })
        .collect())
}

/// Nearest unseen-class embedding for each projected test instance.
pub fn classify(projected: &RealMatrix, model: &ZslModel) -> Result<Vec<Label>> {
    let idx = nearest_columns(projected, &model.unseen.embedding)?;
    Ok(idx.into_iter().map(|k| model.unseen_class_ids[k]).collect())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub per_class_recall: BTreeMap<Label, f64>,
    /// Unweighted mean of `per_class_recall`.
    pub mean_per_class_accuracy: f64,
    /// Fraction of instances labelled correctly, for comparison only.
    pub per_image_accuracy: f64,
    /// Axis labels of `confusion`, ascending.
    pub classes: Vec<Label>,
    /// `confusion[t][p]` counts instances of `classes[t]` predicted as `classes[p]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Per-class recall over the classes present in `truth`.
pub fn per_class_accuracy(pred: &[Label], truth: &[Label]) -> Result<EvalReport> {
    let mut classes: Vec<Label> = truth.to_vec();
    classes.sort_unstable();
    classes.dedup();
    per_class_accuracy_over(&classes, pred, truth)
}

/// Per-class recall over an explicit class list. Every listed class must
/// occur in `truth`.
pub fn per_class_accuracy_over(classes: &[Label], pred: &[Label], truth: &[Label]) -> Result<EvalReport> {
    if pred.len() != truth.len() {
        return Err(ZslError::Shape(format!(
            "{} predictions for {} instances",
            pred.len(),
            truth.len()
        )));
    }
    if truth.is_empty() || classes.is_empty() {
        return Err(ZslError::InvalidInput("nothing to evaluate".into()));
    }
    let mut axis: Vec<Label> = classes.iter().chain(pred).chain(truth).copied().collect();
    axis.sort_unstable();
    axis.dedup();
    let pos = |l: Label| axis.binary_search(&l).expect("label on axis");
    let mut confusion = vec![vec![0usize; axis.len()]; axis.len()];
    for (&p, &t) in pred.iter().zip(truth) {
        confusion[pos(t)][pos(p)] += 1;
    }
    let mut per_class_recall = BTreeMap::new();
    for &c in classes {
        let row = &confusion[pos(c)];
        let total: usize = row.iter().sum();
        if total == 0 {
            return Err(ZslError::InvalidInput(format!("class {c} has no instances")));
        }
        per_class_recall.insert(c, row[pos(c)] as f64 / total as f64);
    }
    let mean_per_class_accuracy =
        per_class_recall.values().sum::<f64>() / per_class_recall.len() as f64;
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(EvalReport {
        per_class_recall,
        mean_per_class_accuracy,
        per_image_accuracy: correct as f64 / truth.len() as f64,
        classes: axis,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::{Flavor, LearnerKind, SubspaceHyper};

    fn toy_model(unseen: RealMatrix, ids: Vec<Label>) -> ZslModel {
        let d = unseen.rows();
        ZslModel::new(
            SubspaceModel {
                projection: RealMatrix::identity(d),
                training_mean: vec![0.0; d],
                flavor: Flavor::Raw,
                learner: LearnerKind::Slpp,
                eigenvalues: vec![1.0; d],
                kernel_basis: None,
                hyper: SubspaceHyper { alpha: 1.0, d_y: d, k_g: 1 },
            },
            Landmarks {
                embedding: RealMatrix::identity(d),
                class_ids: (0..d as Label).collect(),
            },
            UnseenEmbedding {
                embedding: unseen,
                final_cost: 0.0,
                iterations: 0,
                converged: true,
                cost_history: Vec::new(),
            },
            ids,
        )
        .unwrap()
    }

    #[test]
    fn projection_normalises() {
        let m = toy_model(RealMatrix::identity(2), vec![7, 8]);
        let x = RealMatrix::from_columns(&[&[3.0, 4.0]]).unwrap();
        let y = project_test(&m, ModelInput::Features(&x)).unwrap();
        assert!((y[(0, 0)] - 0.6).abs() < 1e-15 && (y[(1, 0)] - 0.8).abs() < 1e-15);
        let zero = RealMatrix::zeros(2, 1);
        assert!(matches!(
            project_test(&m, ModelInput::Features(&zero)),
            Err(ZslError::DegenerateVector { .. })
        ));
    }

    #[test]
    fn nearest_and_ties() {
        let m = toy_model(
            RealMatrix::from_columns(&[&[1.0, 0.0], &[-1.0, 0.0]]).unwrap(),
            vec![7, 8],
        );
        let y = RealMatrix::from_columns(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0]]).unwrap();
        assert_eq!(classify(&y, &m).unwrap(), vec![7, 8, 7]);
    }

    #[test]
    fn per_class_metric() {
        let r = per_class_accuracy(&[1, 2, 2, 2], &[1, 1, 2, 2]).unwrap();
        assert_eq!(r.per_class_recall[&1], 0.5);
        assert_eq!(r.per_class_recall[&2], 1.0);
        assert_eq!(r.mean_per_class_accuracy, 0.75);
        assert_eq!(r.confusion, vec![vec![1, 1], vec![0, 2]]);

        let perfect = per_class_accuracy(&[3, 4], &[3, 4]).unwrap();
        assert_eq!(perfect.mean_per_class_accuracy, 1.0);

        let mut truth = vec![0; 9];
        truth.push(1);
        let r = per_class_accuracy(&[0; 10], &truth).unwrap();
        assert_eq!(r.mean_per_class_accuracy, 0.5);
        assert_eq!(r.per_image_accuracy, 0.9);

        assert!(matches!(
            per_class_accuracy_over(&[0, 5], &[0], &[0]),
            Err(ZslError::InvalidInput(_))
        ));
        assert!(matches!(per_class_accuracy(&[], &[]), Err(ZslError::InvalidInput(_))));
        assert!(matches!(per_class_accuracy(&[1], &[1, 2]), Err(ZslError::Shape(_))));
    }
}
