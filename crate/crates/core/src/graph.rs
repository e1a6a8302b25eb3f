//! kNN similarity graphs and their Laplacians.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Result, ZslError};
use crate::matrix::{euclidean, squared_distance, RealMatrix};
use crate::Label;

/// Symmetric sparse weight matrix with cached degrees.
///
/// Rows are stored as `(neighbour, weight)` lists sorted by neighbour index.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimilarityGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
    degrees: Vec<f64>,
}

impl SimilarityGraph {
    /// Graph from a dense weight matrix. The matrix must be exactly
    /// symmetric with a zero diagonal and weights in `[0, 1]`.
    pub fn from_dense(w: &RealMatrix) -> Result<Self> {
        if !w.is_square() {
            return Err(ZslError::Shape(format!("{}x{} weights", w.rows(), w.cols())));
        }
        w.check_finite()?;
        let n = w.rows();
        let mut adjacency = vec![Vec::new(); n];
        for (i, row) in adjacency.iter_mut().enumerate() {
            if w[(i, i)] != 0.0 {
                return Err(ZslError::InvalidInput(format!("self-loop at node {i}")));
            }
            for j in 0..n {
                let v = w[(i, j)];
                if v != w[(j, i)] {
                    return Err(ZslError::InvalidInput(format!("asymmetric weight ({i}, {j})")));
                }
                if !(0.0..=1.0).contains(&v) {
                    return Err(ZslError::InvalidInput(format!("weight {v} outside [0, 1]")));
                }
                if v != 0.0 {
                    row.push((j, v));
                }
            }
        }
        Ok(Self::from_adjacency(adjacency))
    }

    pub(crate) fn from_adjacency(adjacency: Vec<Vec<(usize, f64)>>) -> Self {
        let degrees = adjacency
            .iter()
            .map(|row| row.iter().map(|&(_, w)| w).sum())
            .collect();
        Self { adjacency, degrees }
    }

    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        Self::from_adjacency(vec![Vec::new(); n])
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map_or(0.0, |p| self.adjacency[i][p].1)
    }

    /// `D_ii = Σ_j W_ij`.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Number of stored non-zero weights (each undirected edge counted twice).
    pub fn nnz(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> RealMatrix {
        let n = self.len();
        let mut w = RealMatrix::zeros(n, n);
        for (i, row) in self.adjacency.iter().enumerate() {
            for &(j, v) in row {
                w[(i, j)] = v;
            }
        }
        w
    }

    /// Degree vector and dense Laplacian `L = D − W`.
    pub fn laplacian(&self) -> (Vec<f64>, RealMatrix) {
        let mut l = self.to_dense().scale(-1.0);
        for (i, &d) in self.degrees.iter().enumerate() {
            l[(i, i)] = d;
        }
        (self.degrees.clone(), l)
    }

    /// `xᵀ L x` evaluated edge-wise.
    pub fn laplacian_quadratic_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, row) in self.adjacency.iter().enumerate() {
            s += self.degrees[i] * x[i] * x[i];
            for &(j, w) in row {
                s -= w * x[i] * x[j];
            }
        }
        s
    }
}

/// Indices of the `k` nearest columns of `x` to each column, self excluded.
/// Distance ties go to the lower index. Each list is sorted by distance.
pub fn knn_indices(x: &RealMatrix, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = x.cols();
    if k == 0 || k >= n {
        return Err(ZslError::Bounds(format!("k = {k} must lie in 1..{n}")));
    }
    let mut out = Vec::with_capacity(n);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        cand.clear();
        let xi = x.col(i);
        cand.extend((0..n).filter(|&j| j != i).map(|j| (squared_distance(xi, x.col(j)), j)));
        let by_key = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        };
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, by_key);
            cand.truncate(k);
        }
        cand.sort_by(by_key);
        out.push(cand.iter().map(|&(_, j)| j).collect());
    }
    Ok(out)
}

/// Builds the kNN similarity graph.
///
/// Nodes `i` and `j` are joined when either lies in the other's `k`
/// nearest neighbours, and, with labels given, only when they share a label.
/// The edge weight is `exp(−‖x_i − x_j‖ / 2)` using the plain (unsquared)
/// Euclidean norm. Neighbourhoods are computed over all nodes before the
/// label filter is applied.
pub fn build_similarity(x: &RealMatrix, labels: Option<&[Label]>, k: usize) -> Result<SimilarityGraph> {
    x.check_finite()?;
    let n = x.cols();
    if let Some(l) = labels {
        if l.len() != n {
            return Err(ZslError::Shape(format!("{} labels for {n} instances", l.len())));
        }
    }
    let knn = knn_indices(x, k)?;
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut linked = vec![Vec::<usize>::new(); n];
    for (i, nbrs) in knn.iter().enumerate() {
        for &j in nbrs {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            linked[a].push(b);
        }
    }
    for (a, partners) in linked.iter_mut().enumerate() {
        partners.sort_unstable();
        partners.dedup();
        for &b in partners.iter() {
            if let Some(l) = labels {
                if l[a] != l[b] {
                    continue;
                }
            }
            let w = libm::exp(-euclidean(x.col(a), x.col(b)) / 2.0);
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
    }
    for row in adjacency.iter_mut() {
        row.sort_unstable_by_key(|&(j, _)| j);
    }
    Ok(SimilarityGraph::from_adjacency(adjacency))
}
