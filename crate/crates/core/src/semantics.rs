//! Class-level semantic representations and the distance blocks fed to the
//! landmark Sammon mapping.

use alloc::format;

use crate::error::{Result, ZslError};
use crate::linalg::{l2_normalize_columns, pairwise_distances, Metric};
use crate::matrix::RealMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SemanticKind {
    /// Column-normalised on ingestion.
    Attributes,
    WordVectors,
    Other,
}

impl SemanticKind {
    /// Metric conventionally paired with this kind: Euclidean for attributes,
    /// cosine for word vectors.
    pub fn default_metric(self) -> Metric {
        match self {
            SemanticKind::WordVectors => Metric::Cosine,
            SemanticKind::Attributes | SemanticKind::Other => Metric::Euclidean,
        }
    }
}

/// Semantic vectors for the known (`S^l`) and unseen (`S^u`) classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticTable {
    known: RealMatrix,
    unseen: RealMatrix,
    metric: Metric,
    kind: SemanticKind,
}

impl SemanticTable {
    pub fn new(known: RealMatrix, unseen: RealMatrix, metric: Metric, kind: SemanticKind) -> Result<Self> {
        if known.rows() != unseen.rows() {
            return Err(ZslError::Shape(format!(
                "known classes have {} semantic dimensions, unseen {}",
                known.rows(),
                unseen.rows()
            )));
        }
        known.check_finite()?;
        unseen.check_finite()?;
        let (known, unseen) = match kind {
            SemanticKind::Attributes => (l2_normalize_columns(&known)?, l2_normalize_columns(&unseen)?),
            _ => (known, unseen),
        };
        Ok(Self {
            known,
            unseen,
            metric,
            kind,
        })
    }

    pub fn known(&self) -> &RealMatrix {
        &self.known
    }

    pub fn unseen(&self) -> &RealMatrix {
        &self.unseen
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn kind(&self) -> SemanticKind {
        self.kind
    }
}

/// Known-to-unseen (`|C^l| × |C^u|`) and unseen-to-unseen
/// (`|C^u| × |C^u|`) semantic distances.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SemanticDistances {
    pub known_unseen: RealMatrix,
    pub unseen_unseen: RealMatrix,
}

impl SemanticDistances {
    /// Validates shapes, non-negativity and the zero-diagonal symmetric
    /// unseen block.
    pub fn new(known_unseen: RealMatrix, unseen_unseen: RealMatrix) -> Result<Self> {
        if !unseen_unseen.is_square() || unseen_unseen.rows() != known_unseen.cols() {
            return Err(ZslError::Shape(format!(
                "known-unseen {}x{} with unseen-unseen {}x{}",
                known_unseen.rows(),
                known_unseen.cols(),
                unseen_unseen.rows(),
                unseen_unseen.cols()
            )));
        }
        known_unseen.check_finite()?;
        unseen_unseen.check_finite()?;
        if known_unseen.as_slice().iter().chain(unseen_unseen.as_slice()).any(|&v| v < 0.0) {
            return Err(ZslError::InvalidInput("negative semantic distance".into()));
        }
        let n = unseen_unseen.rows();
        for i in 0..n {
            if unseen_unseen[(i, i)] != 0.0 {
                return Err(ZslError::InvalidInput(format!("non-zero self distance for unseen class {i}")));
            }
        }
        if unseen_unseen.max_asymmetry() != 0.0 {
            return Err(ZslError::InvalidInput("unseen-unseen distances are not symmetric".into()));
        }
        Ok(Self {
            known_unseen,
            unseen_unseen,
        })
    }

    pub fn n_known(&self) -> usize {
        self.known_unseen.rows()
    }

    pub fn n_unseen(&self) -> usize {
        self.known_unseen.cols()
    }
}

/// Distance blocks under the table's metric. The unseen block is computed
/// on its upper triangle and mirrored, with an exact zero diagonal.
pub fn semantic_distances(table: &SemanticTable) -> Result<SemanticDistances> {
    let known_unseen = pairwise_distances(&table.known, &table.unseen, table.metric)?;
    let mut unseen_unseen = pairwise_distances(&table.unseen, &table.unseen, table.metric)?;
    let n = unseen_unseen.rows();
    for i in 0..n {
        unseen_unseen[(i, i)] = 0.0;
        for j in i + 1..n {
            unseen_unseen[(j, i)] = unseen_unseen[(i, j)];
        }
    }
    Ok(SemanticDistances {
        known_unseen,
        unseen_unseen,
    })
}

/// `γ Δ^{wv} + (1 − γ) Δ^{att}` on both blocks.
pub fn fuse_distances(att: &SemanticDistances, wv: &SemanticDistances, gamma: f64) -> Result<SemanticDistances> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(ZslError::Bounds(format!("gamma = {gamma} outside [0, 1]")));
    }
    let mix = |a: f64, w: f64| gamma * w + (1.0 - gamma) * a;
    Ok(SemanticDistances {
        known_unseen: att.known_unseen.zip_with(&wv.known_unseen, mix)?,
        unseen_unseen: att.unseen_unseen.zip_with(&wv.unseen_unseen, mix)?,
    })
}
