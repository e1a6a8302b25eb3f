//! Bottom-up latent space learning.
//!
//! The supervised learner (SLPP) builds a label-filtered kNN graph over the
//! training instances and keeps the leading generalized eigenvectors of
//!
//! ```text
//! X D Xᵀ p = λ (X L Xᵀ + α I) p
//! ```
//!
//! LPP is the same problem on the unfiltered graph and PCA is provided as a
//! second unsupervised baseline. The kernelized flavor replaces `X` by a
//! (possibly averaged) training kernel matrix.
//!
//! Training embeddings go through a fixed pipeline: project, centre every
//! latent feature on the training mean, then scale each instance to unit
//! norm. Landmarks are the renormalised class means of those embeddings.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Result, ZslError};
use crate::graph::{build_similarity, SimilarityGraph};
use crate::linalg::{
    center_rows, fix_sign, l2_normalize_columns, solve_gsep, symmetric_eigen, EigenPairs,
};
use crate::matrix::{norm, RealMatrix};
use crate::viewselect::{average_kernels, build_kernel, KernelFn};
use crate::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Flavor {
    /// Projection acts on raw feature vectors (`d_x × d_y`).
    Raw,
    /// Projection acts on kernel columns against the training set (`n_l × d_y`).
    Kernelized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LearnerKind {
    #[default]
    Slpp,
    Lpp,
    Pca,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubspaceHyper {
    pub alpha: f64,
    pub d_y: usize,
    pub k_g: usize,
}

/// Training views and kernel kept by a kernelized model so kernel columns
/// can be evaluated for new instances.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelBasis {
    pub kernel: KernelFn,
    pub views: Vec<RealMatrix>,
}

impl KernelBasis {
    /// Averaged kernel columns of `views` (one matrix per view, same order
    /// as training) against the retained training views: `n_l × n`.
    pub fn kernel_columns(&self, views: &[RealMatrix]) -> Result<RealMatrix> {
        if views.len() != self.views.len() {
            return Err(ZslError::Shape(format!(
                "{} views given, model was trained on {}",
                views.len(),
                self.views.len()
            )));
        }
        let kernels = self
            .views
            .iter()
            .zip(views)
            .map(|(train, test)| build_kernel(self.kernel, train, test))
            .collect::<Result<Vec<_>>>()?;
        average_kernels(&kernels)
    }
}

/// A learned projection plus the state needed to normalise new instances.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubspaceModel {
    pub projection: RealMatrix,
    /// Latent row means of the training embedding, subtracted before
    /// normalisation.
    pub training_mean: Vec<f64>,
    pub flavor: Flavor,
    pub learner: LearnerKind,
    pub eigenvalues: Vec<f64>,
    pub kernel_basis: Option<KernelBasis>,
    pub hyper: SubspaceHyper,
}

/// What a model is applied to.
#[derive(Debug, Clone, Copy)]
pub enum ModelInput<'a> {
    Features(&'a RealMatrix),
    /// Kernel columns against the training instances (`n_l × n`).
    Kernel(&'a RealMatrix),
}

impl SubspaceModel {
    pub fn latent_dim(&self) -> usize {
        self.projection.cols()
    }

    /// `Pᵀ · input` with no normalisation.
    pub fn project_raw(&self, input: ModelInput<'_>) -> Result<RealMatrix> {
        let m = match (self.flavor, input) {
            (Flavor::Raw, ModelInput::Features(m)) | (Flavor::Kernelized, ModelInput::Kernel(m)) => m,
            (Flavor::Raw, ModelInput::Kernel(_)) => {
                return Err(ZslError::Usage("raw model applied to kernel columns".into()))
            }
            (Flavor::Kernelized, ModelInput::Features(_)) => {
                return Err(ZslError::Usage("kernelized model applied to raw features".into()))
            }
        };
        if m.rows() != self.projection.rows() {
            return Err(ZslError::Shape(format!(
                "input has {} rows, projection expects {}",
                m.rows(),
                self.projection.rows()
            )));
        }
        self.projection.t_matmul(m)
    }
}

/// Common interface for the bottom-up learners.
pub trait SubspaceLearner {
    fn fit(&self, x: &RealMatrix, labels: &[Label]) -> Result<SubspaceModel>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slpp {
    pub alpha: f64,
    pub d_y: usize,
    pub k_g: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lpp {
    pub alpha: f64,
    pub d_y: usize,
    pub k_g: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pca {
    pub d_y: usize,
}

impl SubspaceLearner for Slpp {
    fn fit(&self, x: &RealMatrix, labels: &[Label]) -> Result<SubspaceModel> {
        fit_slpp(x, labels, self.alpha, self.d_y, self.k_g)
    }
}

impl SubspaceLearner for Lpp {
    fn fit(&self, x: &RealMatrix, _labels: &[Label]) -> Result<SubspaceModel> {
        fit_lpp(x, self.alpha, self.d_y, self.k_g)
    }
}

impl SubspaceLearner for Pca {
    fn fit(&self, x: &RealMatrix, _labels: &[Label]) -> Result<SubspaceModel> {
        fit_pca(x, self.d_y)
    }
}

/// Supervised LPP on raw features.
pub fn fit_slpp(x: &RealMatrix, labels: &[Label], alpha: f64, d_y: usize, k_g: usize) -> Result<SubspaceModel> {
    check_training(x, d_y)?;
    if labels.len() != x.cols() {
        return Err(ZslError::Shape(format!(
            "{} labels for {} instances",
            labels.len(),
            x.cols()
        )));
    }
    let first = labels[0];
    if labels.iter().all(|&l| l == first) {
        log::warn!("all training instances share label {first}; the graph is fully intra-class");
    }
    let graph = build_similarity(x, Some(labels), k_g)?;
    let pairs = solve_graph_pencil(x, &graph, alpha, d_y)?;
    finish(x, pairs, Flavor::Raw, LearnerKind::Slpp, SubspaceHyper { alpha, d_y, k_g })
}

/// Unsupervised LPP: the graph ignores labels.
pub fn fit_lpp(x: &RealMatrix, alpha: f64, d_y: usize, k_g: usize) -> Result<SubspaceModel> {
    check_training(x, d_y)?;
    let graph = build_similarity(x, None, k_g)?;
    let pairs = solve_graph_pencil(x, &graph, alpha, d_y)?;
    finish(x, pairs, Flavor::Raw, LearnerKind::Lpp, SubspaceHyper { alpha, d_y, k_g })
}

/// Leading principal directions of the row-centred data.
pub fn fit_pca(x: &RealMatrix, d_y: usize) -> Result<SubspaceModel> {
    x.check_finite()?;
    let limit = x.rows().min(x.cols());
    if d_y == 0 || d_y > limit {
        return Err(ZslError::Bounds(format!("d_y = {d_y} outside 1..={limit}")));
    }
    let (centred, _) = center_rows(x)?;
    let ones = alloc::vec![1.0; centred.cols()];
    let scatter = centred.weighted_gram(&ones)?;
    let (values, vectors) = symmetric_eigen(&scatter)?;
    let mut projection = vectors.leading_columns(d_y);
    for j in 0..d_y {
        fix_sign(projection.col_mut(j));
    }
    let pairs = EigenPairs {
        values: values[..d_y].to_vec(),
        vectors: projection,
    };
    finish(
        x,
        pairs,
        Flavor::Raw,
        LearnerKind::Pca,
        SubspaceHyper { alpha: 0.0, d_y, k_g: 0 },
    )
}

/// SLPP on a combined kernel `K̃` (`n_l × n_l`) with a combined graph `W̃`.
pub fn fit_slpp_kernelized(
    kernel: &RealMatrix,
    graph: &SimilarityGraph,
    alpha: f64,
    d_y: usize,
) -> Result<SubspaceModel> {
    if !kernel.is_square() {
        return Err(ZslError::Shape(format!("{}x{} kernel", kernel.rows(), kernel.cols())));
    }
    kernel.check_finite()?;
    let asym = kernel.max_asymmetry();
    if asym > 1e-10 * kernel.max_abs().max(1.0) {
        return Err(ZslError::InvalidInput(format!(
            "kernel is not symmetric (max asymmetry {asym:e})"
        )));
    }
    if graph.len() != kernel.rows() {
        return Err(ZslError::Shape(format!(
            "graph has {} nodes, kernel {}",
            graph.len(),
            kernel.rows()
        )));
    }
    check_training(kernel, d_y)?;
    let pairs = solve_graph_pencil(kernel, graph, alpha, d_y)?;
    // graph may be a fusion of several, so there is no single k_G
    finish(
        kernel,
        pairs,
        Flavor::Kernelized,
        LearnerKind::Slpp,
        SubspaceHyper { alpha, d_y, k_g: 0 },
    )
}

fn check_training(x: &RealMatrix, d_y: usize) -> Result<()> {
    x.check_finite()?;
    if x.cols() < 2 {
        return Err(ZslError::InvalidInput("need at least two training instances".into()));
    }
    if d_y == 0 || d_y > x.rows() {
        return Err(ZslError::Bounds(format!("d_y = {d_y} outside 1..={}", x.rows())));
    }
    Ok(())
}

/// The SLPP/LPP pencil `(X D Xᵀ, X L Xᵀ + αI)` for a graph over the
/// columns of `x`.
pub fn graph_pencil(x: &RealMatrix, graph: &SimilarityGraph, alpha: f64) -> Result<(RealMatrix, RealMatrix)> {
    if graph.len() != x.cols() {
        return Err(ZslError::Shape(format!(
            "graph has {} nodes, data {} columns",
            graph.len(),
            x.cols()
        )));
    }
    let a = x.weighted_gram(graph.degrees())?;
    // X W Xᵀ from the sparse rows of W
    let d = x.rows();
    let mut xw = RealMatrix::zeros(d, x.cols());
    for j in 0..x.cols() {
        let dst = xw.col_mut(j);
        for &(i, w) in graph.neighbors(j) {
            for (o, &v) in dst.iter_mut().zip(x.col(i)) {
                *o += w * v;
            }
        }
    }
    let mut xwx = xw.matmul(&x.transpose())?;
    xwx.symmetrize();
    let mut b = a.sub(&xwx)?;
    b.symmetrize();
    b.add_diagonal(alpha);
    Ok((a, b))
}

fn solve_graph_pencil(x: &RealMatrix, graph: &SimilarityGraph, alpha: f64, d_y: usize) -> Result<EigenPairs> {
    let (a, b) = graph_pencil(x, graph, alpha)?;
    solve_gsep(&a, &b, d_y)
}

fn finish(
    x: &RealMatrix,
    pairs: EigenPairs,
    flavor: Flavor,
    learner: LearnerKind,
    hyper: SubspaceHyper,
) -> Result<SubspaceModel> {
    let latent = pairs.vectors.t_matmul(x)?;
    let (_, training_mean) = center_rows(&latent)?;
    Ok(SubspaceModel {
        projection: pairs.vectors,
        training_mean,
        flavor,
        learner,
        eigenvalues: pairs.values,
        kernel_basis: None,
        hyper,
    })
}

/// Projects the training set, centres it (recording the mean in the model)
/// and scales every column to unit norm.
pub fn embed_training(model: &mut SubspaceModel, input: ModelInput<'_>) -> Result<RealMatrix> {
    let latent = model.project_raw(input)?;
    let (centred, mean) = center_rows(&latent)?;
    model.training_mean = mean;
    l2_normalize_columns(&centred)
}

/// Class landmarks in the latent space.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Landmarks {
    /// `d_y × |C^l|`, unit-norm columns.
    pub embedding: RealMatrix,
    /// Class of each column, ascending.
    pub class_ids: Vec<Label>,
}

/// Renormalised per-class means of normalised training embeddings.
pub fn compute_landmarks(embedded: &RealMatrix, labels: &[Label]) -> Result<Landmarks> {
    if labels.len() != embedded.cols() {
        return Err(ZslError::Shape(format!(
            "{} labels for {} embeddings",
            labels.len(),
            embedded.cols()
        )));
    }
    if labels.is_empty() {
        return Err(ZslError::InvalidInput("no training instances".into()));
    }
    let d = embedded.rows();
    let mut sums: BTreeMap<Label, (Vec<f64>, usize)> = BTreeMap::new();
    for (col, &l) in embedded.columns().zip(labels) {
        let entry = sums.entry(l).or_insert_with(|| (alloc::vec![0.0; d], 0));
        for (s, &v) in entry.0.iter_mut().zip(col) {
            *s += v;
        }
        entry.1 += 1;
    }
    let mut embedding = RealMatrix::zeros(d, sums.len());
    let mut class_ids = Vec::with_capacity(sums.len());
    for (j, (class, (sum, count))) in sums.into_iter().enumerate() {
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let n = norm(&mean);
        if !(n > 1e-12) {
            return Err(ZslError::DegenerateLandmark { class });
        }
        for (dst, m) in embedding.col_mut(j).iter_mut().zip(mean) {
            *dst = m / n;
        }
        class_ids.push(class);
    }
    Ok(Landmarks { embedding, class_ids })
}
