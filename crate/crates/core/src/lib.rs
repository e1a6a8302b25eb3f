//! Zero-shot recognition through a bidirectional latent embedding.
//!
//! Visual features are projected bottom-up into a supervised locality
//! preserving subspace, where each known class is summarised by a landmark.
//! Unseen classes are then placed top-down by a landmark-based Sammon
//! mapping of their semantic distances, and test instances are labelled by
//! nearest embedding, optionally refined by self-training or structured
//! prediction.
//!
//! The crate is `no_std` (with `alloc`) and has no IO.

#![no_std]

extern crate alloc;

/// Class identifier.
pub type Label = u32;

pub mod error;
pub mod graph;
pub mod linalg;
pub mod lsm;
pub mod matrix;
pub mod postproc;
pub mod recognition;
pub mod semantics;
pub mod subspace;
pub mod viewselect;

pub use error::{Result, ZslError};
pub use graph::{build_similarity, SimilarityGraph};
pub use linalg::{solve_gsep, EigenPairs, Metric};
pub use lsm::{embed_unseen, embed_unseen_multistart, LsmConfig, UnseenEmbedding};
pub use matrix::RealMatrix;
pub use postproc::{self_train, structured_predict};
pub use recognition::{classify, per_class_accuracy, project_test, EvalReport, ZslModel};
pub use semantics::{fuse_distances, semantic_distances, SemanticDistances, SemanticKind, SemanticTable};
pub use subspace::{compute_landmarks, embed_training, fit_slpp, Landmarks, ModelInput, SubspaceModel};
pub use viewselect::{complementarity_pair, fit_multiview, select_representations, KernelFn, StopRule};
