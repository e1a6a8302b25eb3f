//! Multi-view fusion and complementarity-driven view selection.
//!
//! Several visual representations of the same instances are fused by
//! averaging their similarity graphs and their kernel matrices with equal
//! weights. Complementarity between representations compares which
//! same-label nearest neighbours each one finds; a greedy loop uses it to
//! pick a complementary subset.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::error::{Result, ZslError};
use crate::graph::{build_similarity, knn_indices, SimilarityGraph};
use crate::matrix::{dot, squared_distance, RealMatrix};
use crate::subspace::{fit_slpp_kernelized, KernelBasis, SubspaceModel};
use crate::Label;

/// Kernel used to map a view into the shared kernel space.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase", tag = "type"))]
pub enum KernelFn {
    /// `xᵀz`.
    #[default]
    Linear,
    /// `exp(−γ‖x − z‖²)`.
    Rbf { gamma: f64 },
}

impl KernelFn {
    pub fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        match *self {
            KernelFn::Linear => dot(x, z),
            KernelFn::Rbf { gamma } => libm::exp(-gamma * squared_distance(x, z)),
        }
    }
}

/// `K_ij = k(x_i, z_j)` over columns.
pub fn build_kernel(kernel: KernelFn, x: &RealMatrix, z: &RealMatrix) -> Result<RealMatrix> {
    if x.rows() != z.rows() {
        return Err(ZslError::Shape(format!(
            "kernel between {}-dimensional and {}-dimensional columns",
            x.rows(),
            z.rows()
        )));
    }
    Ok(RealMatrix::from_fn(x.cols(), z.cols(), |i, j| kernel.eval(x.col(i), z.col(j))))
}

/// Linear kernel `Xᵀ Z`.
pub fn linear_kernel(x: &RealMatrix, z: &RealMatrix) -> Result<RealMatrix> {
    build_kernel(KernelFn::Linear, x, z)
}

/// Equal-weight mean, written as `a₁ + Σ (a_m − a₁)/M` so identical inputs
/// are reproduced exactly.
fn mean_of(first: f64, rest: impl Iterator<Item = f64>, m: usize) -> f64 {
    first + rest.map(|v| (v - first) / m as f64).sum::<f64>()
}

/// Entrywise mean of kernel matrices of identical shape.
pub fn average_kernels(kernels: &[RealMatrix]) -> Result<RealMatrix> {
    let (first, rest) = kernels
        .split_first()
        .ok_or_else(|| ZslError::InvalidInput("no kernels to average".into()))?;
    if let Some(bad) = rest.iter().find(|k| k.shape() != first.shape()) {
        return Err(ZslError::Shape(format!(
            "kernel {}x{} vs {}x{}",
            first.rows(),
            first.cols(),
            bad.rows(),
            bad.cols()
        )));
    }
    let m = kernels.len();
    let data = (0..first.as_slice().len())
        .map(|p| mean_of(first.as_slice()[p], rest.iter().map(|k| k.as_slice()[p]), m))
        .collect();
    Ok(RealMatrix::from_col_major(first.rows(), first.cols(), data)
        .unwrap_or_else(|_| RealMatrix::zeros(first.rows(), first.cols())))
}

/// Entrywise mean of similarity graphs over the same node set.
pub fn average_similarity(graphs: &[SimilarityGraph]) -> Result<SimilarityGraph> {
    let (first, rest) = graphs
        .split_first()
        .ok_or_else(|| ZslError::InvalidInput("no graphs to average".into()))?;
    let n = first.len();
    if let Some(bad) = rest.iter().find(|g| g.len() != n) {
        return Err(ZslError::Shape(format!("graph of {} nodes vs {n}", bad.len())));
    }
    let m = graphs.len();
    let mut adjacency = Vec::with_capacity(n);
    for i in 0..n {
        let mut cols = BTreeSet::new();
        for g in graphs {
            cols.extend(g.neighbors(i).iter().map(|&(j, _)| j));
        }
        let row: Vec<(usize, f64)> = cols
            .into_iter()
            .map(|j| {
                let w = mean_of(first.weight(i, j), rest.iter().map(|g| g.weight(i, j)), m);
                (j, w.clamp(0.0, 1.0))
            })
            .filter(|&(_, w)| w != 0.0)
            .collect();
        adjacency.push(row);
    }
    Ok(SimilarityGraph::from_adjacency(adjacency))
}

/// Fits the kernelized learner on several views of the same training
/// instances. Returns the model (with the views retained for test-time
/// kernels) and the fused training kernel.
pub fn fit_multiview(
    views: &[RealMatrix],
    labels: Option<&[Label]>,
    kernel: KernelFn,
    alpha: f64,
    d_y: usize,
    k_g: usize,
) -> Result<(SubspaceModel, RealMatrix)> {
    let first = views
        .first()
        .ok_or_else(|| ZslError::InvalidInput("no views".into()))?;
    if let Some(bad) = views.iter().find(|v| v.cols() != first.cols()) {
        return Err(ZslError::Shape(format!(
            "views cover {} and {} instances",
            first.cols(),
            bad.cols()
        )));
    }
    let graphs = views
        .iter()
        .map(|v| build_similarity(v, labels, k_g))
        .collect::<Result<Vec<_>>>()?;
    let graph = average_similarity(&graphs)?;
    let kernels = views
        .iter()
        .map(|v| build_kernel(kernel, v, v))
        .collect::<Result<Vec<_>>>()?;
    let fused = average_kernels(&kernels)?;
    let mut model = fit_slpp_kernelized(&fused, &graph, alpha, d_y)?;
    model.hyper.k_g = k_g;
    model.kernel_basis = Some(KernelBasis {
        kernel,
        views: views.to_vec(),
    });
    Ok((model, fused))
}

/// kNN neighbourhoods of one representation split by label agreement.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborPartition {
    pub k: usize,
    /// Same-label neighbours of each instance.
    pub same_label: Vec<Vec<usize>>,
    /// Different-label neighbours of each instance.
    pub diff_label: Vec<Vec<usize>>,
    /// All `(anchor, neighbour)` pairs with matching labels.
    pub union_same: BTreeSet<(usize, usize)>,
}

impl NeighborPartition {
    pub fn len(&self) -> usize {
        self.same_label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.same_label.is_empty()
    }

    /// Partition from explicit same-label pair lists, for callers that
    /// already know the neighbourhoods.
    pub fn from_same_label(k: usize, same_label: Vec<Vec<usize>>) -> Self {
        let union_same = same_label
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |&j| (i, j)))
            .collect();
        let diff_label = alloc::vec![Vec::new(); same_label.len()];
        Self {
            k,
            same_label,
            diff_label,
            union_same,
        }
    }
}

/// Euclidean kNN of every column, split by whether the neighbour shares
/// the anchor's label.
pub fn neighbor_partition(x: &RealMatrix, labels: &[Label], k: usize) -> Result<NeighborPartition> {
    if labels.len() != x.cols() {
        return Err(ZslError::Shape(format!(
            "{} labels for {} instances",
            labels.len(),
            x.cols()
        )));
    }
    let knn = knn_indices(x, k)?;
    let mut same_label = Vec::with_capacity(knn.len());
    let mut diff_label = Vec::with_capacity(knn.len());
    let mut union_same = BTreeSet::new();
    for (i, nbrs) in knn.into_iter().enumerate() {
        let (same, diff): (Vec<usize>, Vec<usize>) = nbrs.into_iter().partition(|&j| labels[j] == labels[i]);
        union_same.extend(same.iter().map(|&j| (i, j)));
        same_label.push(same);
        diff_label.push(diff);
    }
    Ok(NeighborPartition {
        k,
        same_label,
        diff_label,
        union_same,
    })
}

/// `(min(|A|,|B|) − |A∩B|) / (|A| + |B| − |A∩B|)`, zero when both are empty.
pub fn complementarity_of_sets(a: &BTreeSet<(usize, usize)>, b: &BTreeSet<(usize, usize)>) -> f64 {
    let inter = a.intersection(b).count();
    let denom = a.len() + b.len() - inter;
    if denom == 0 {
        return 0.0;
    }
    (a.len().min(b.len()) - inter) as f64 / denom as f64
}

fn check_compatible(p: &NeighborPartition, q: &NeighborPartition) -> Result<()> {
    if p.len() != q.len() || p.k != q.k {
        return Err(ZslError::Usage(format!(
            "partitions over {} instances (k = {}) and {} instances (k = {})",
            p.len(),
            p.k,
            q.len(),
            q.k
        )));
    }
    Ok(())
}

/// Complementarity of two representations, in `[0, 0.5]`.
pub fn complementarity_pair(p1: &NeighborPartition, p2: &NeighborPartition) -> Result<f64> {
    check_compatible(p1, p2)?;
    Ok(complementarity_of_sets(&p1.union_same, &p2.union_same))
}

/// Complementarity of one representation against the union of the
/// same-label pairs found by a selected group.
pub fn complementarity_set(p: &NeighborPartition, selected: &[&NeighborPartition]) -> Result<f64> {
    if selected.is_empty() {
        return Err(ZslError::Usage("complementarity against an empty selection".into()));
    }
    let mut union = BTreeSet::new();
    for s in selected {
        check_compatible(p, s)?;
        union.extend(s.union_same.iter().copied());
    }
    Ok(complementarity_of_sets(&p.union_same, &union))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop once this many representations are selected.
    MaxCount(usize),
    /// Stop when the best remaining complementarity falls below the threshold.
    MinComplementarity(f64),
}

/// Greedy selection over precomputed partitions and scores. Returns
/// candidate indices in selection order; ties go to the lower index.
pub fn select_from_partitions(partitions: &[NeighborPartition], scores: &[f64], stop: StopRule) -> Result<Vec<usize>> {
    if partitions.is_empty() {
        return Err(ZslError::InvalidInput("no candidate representations".into()));
    }
    if scores.len() != partitions.len() {
        return Err(ZslError::Shape(format!(
            "{} scores for {} candidates",
            scores.len(),
            partitions.len()
        )));
    }
    let seed = (0..scores.len()).fold(0, |best, i| if scores[i] > scores[best] { i } else { best });
    let mut selected = alloc::vec![seed];
    let mut remaining: Vec<usize> = (0..partitions.len()).filter(|&i| i != seed).collect();
    // running union of same-label pairs over the selection
    let mut union: BTreeSet<(usize, usize)> = partitions[seed].union_same.clone();

    loop {
        if let StopRule::MaxCount(m) = stop {
            if selected.len() >= m {
                break;
            }
        }
        if remaining.is_empty() {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for (pos, &cand) in remaining.iter().enumerate() {
            check_compatible(&partitions[cand], &partitions[seed])?;
            let c = complementarity_of_sets(&partitions[cand].union_same, &union);
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((pos, c));
            }
        }
        let (pos, c) = best.expect("remaining is non-empty");
        if let StopRule::MinComplementarity(t) = stop {
            if c < t {
                break;
            }
        }
        let chosen = remaining.remove(pos);
        union.extend(partitions[chosen].union_same.iter().copied());
        selected.push(chosen);
    }
    Ok(selected)
}

/// Picks a complementary subset of named representations.
///
/// The scorer rates each candidate on its own (for example single-view
/// recognition accuracy on a validation split); the best-scoring one seeds
/// the selection and the rest are added greedily by complementarity.
pub fn select_representations<F>(
    candidates: &[(String, RealMatrix)],
    labels: &[Label],
    k: usize,
    stop: StopRule,
    mut scorer: F,
) -> Result<Vec<String>>
where
    F: FnMut(&str, &RealMatrix) -> Result<f64>,
{
    if candidates.is_empty() {
        return Err(ZslError::InvalidInput("no candidate representations".into()));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    let mut partitions = Vec::with_capacity(candidates.len());
    for (name, x) in candidates {
        let wrap = |e: ZslError| ZslError::Candidate {
            name: name.clone(),
            source: Box::new(e),
        };
        scores.push(scorer(name, x).map_err(wrap)?);
        partitions.push(neighbor_partition(x, labels, k).map_err(wrap)?);
    }
    let order = select_from_partitions(&partitions, &scores, stop)?;
    Ok(order.into_iter().map(|i| candidates[i].0.to_string()).collect())
}

/// Complementarity of every pair of named representations, keyed by index.
pub fn complementarity_matrix(partitions: &[NeighborPartition]) -> Result<BTreeMap<(usize, usize), f64>> {
    let mut out = BTreeMap::new();
    for i in 0..partitions.len() {
        for j in i + 1..partitions.len() {
            out.insert((i, j), complementarity_pair(&partitions[i], &partitions[j])?);
        }
    }
    Ok(out)
}
