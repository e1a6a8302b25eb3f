//! Landmark-based Sammon mapping.
//!
//! Unseen classes are placed in the latent space so that their Euclidean
//! distances to the fixed landmarks, and to each other, match the semantic
//! distances. The stress being minimised is
//!
//! ```text
//! E(Bᵘ) = 1/(|Cˡ||Cᵘ|) Σᵢⱼ (dˡᵘᵢⱼ − δˡᵘᵢⱼ)² / δˡᵘᵢⱼ
//!       + 2/(|Cᵘ|(|Cᵘ|−1)) Σ_{i<j} (dᵘᵘᵢⱼ − δᵘᵘᵢⱼ)² / δᵘᵘᵢⱼ
//! ```
//!
//! with the second term taken as zero for a single unseen class. Semantic
//! distances below [`DELTA_FLOOR`] are clamped to it.
//!
//! Matrices follow the crate convention: `Bˡ` is `d_y × |Cˡ|`, `Bᵘ` is
//! `d_y × |Cᵘ|`, and the gradient is returned in the same `d_y × |Cᵘ|`
//! orientation as `Bᵘ` (the transpose of the `|Cᵘ| × d_y` layout).

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Result, ZslError};
use crate::matrix::{euclidean, RealMatrix};
use crate::semantics::SemanticDistances;

/// Lower clamp for semantic distances used as denominators.
pub const DELTA_FLOOR: f64 = 1e-12;

/// Magnitude of the jitter applied to coincident latent points.
pub const COINCIDENT_JITTER: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UnseenEmbedding {
    /// `d_y × |C^u|`.
    pub embedding: RealMatrix,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after initialisation followed by the cost of every accepted step.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub cost_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsmConfig {
    /// Initial (and reset) step size.
    pub eta: f64,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once the relative cost decrease of an accepted step falls below this.
    pub rel_tol: f64,
}

impl Default for LsmConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            seed: 0,
            max_iters: 5000,
            rel_tol: 1e-8,
        }
    }
}

fn check_shapes(landmarks: &RealMatrix, unseen: &RealMatrix, delta: &SemanticDistances) -> Result<()> {
    if landmarks.rows() != unseen.rows() {
        return Err(ZslError::Shape(format!(
            "landmarks live in {} dimensions, unseen embedding in {}",
            landmarks.rows(),
            unseen.rows()
        )));
    }
    if delta.known_unseen.shape() != (landmarks.cols(), unseen.cols())
        || delta.unseen_unseen.shape() != (unseen.cols(), unseen.cols())
    {
        return Err(ZslError::Shape(format!(
            "distances {}x{} / {}x{} for {} landmarks and {} unseen classes",
            delta.known_unseen.rows(),
            delta.known_unseen.cols(),
            delta.unseen_unseen.rows(),
            delta.unseen_unseen.cols(),
            landmarks.cols(),
            unseen.cols()
        )));
    }
    Ok(())
}

#[inline]
fn clamp_delta(d: f64) -> f64 {
    d.max(DELTA_FLOOR)
}

/// Stress `E(Bᵘ)`.
pub fn lsm_cost(landmarks: &RealMatrix, unseen: &RealMatrix, delta: &SemanticDistances) -> Result<f64> {
    check_shapes(landmarks, unseen, delta)?;
    Ok(cost_unchecked(landmarks, unseen, delta))
}

fn cost_unchecked(landmarks: &RealMatrix, unseen: &RealMatrix, delta: &SemanticDistances) -> f64 {
    let nl = landmarks.cols();
    let nu = unseen.cols();
    let mut cross = 0.0;
    for j in 0..nu {
        let bj = unseen.col(j);
        for i in 0..nl {
            let d = euclidean(landmarks.col(i), bj);
            let s = clamp_delta(delta.known_unseen[(i, j)]);
            cross += (d - s) * (d - s) / s;
        }
    }
    let mut cost = cross / (nl * nu) as f64;
    if nu > 1 {
        let mut within = 0.0;
        for i in 0..nu {
            for j in i + 1..nu {
                let d = euclidean(unseen.col(i), unseen.col(j));
                let s = clamp_delta(delta.unseen_unseen[(i, j)]);
                within += (d - s) * (d - s) / s;
            }
        }
        cost += 2.0 * within / (nu * (nu - 1)) as f64;
    }
    cost
}

/// Analytic gradient of [`lsm_cost`], shaped like `Bᵘ` (`d_y × |Cᵘ|`).
///
/// Pairs at zero latent distance contribute nothing: their difference
/// vector vanishes, and no division by zero is performed.
pub fn lsm_gradient(landmarks: &RealMatrix, unseen: &RealMatrix, delta: &SemanticDistances) -> Result<RealMatrix> {
    check_shapes(landmarks, unseen, delta)?;
    Ok(gradient_unchecked(landmarks, unseen, delta))
}

fn gradient_unchecked(landmarks: &RealMatrix, unseen: &RealMatrix, delta: &SemanticDistances) -> RealMatrix {
    let nl = landmarks.cols();
    let nu = unseen.cols();
    let dim = unseen.rows();
    let cross_scale = 2.0 / (nl * nu) as f64;
    let within_scale = if nu > 1 { 4.0 / (nu * (nu - 1)) as f64 } else { 0.0 };
    let mut grad = RealMatrix::zeros(dim, nu);
    for j in 0..nu {
        let bj = unseen.col(j);
        let mut g = alloc::vec![0.0; dim];
        for i in 0..nl {
            let li = landmarks.col(i);
            let d = euclidean(li, bj);
            if d == 0.0 {
                continue;
            }
            let s = clamp_delta(delta.known_unseen[(i, j)]);
            let coef = cross_scale * (d - s) / (s * d);
            for ((gk, &b), &l) in g.iter_mut().zip(bj).zip(li) {
                *gk += coef * (b - l);
            }
        }
        if nu > 1 {
            for i in (0..nu).filter(|&i| i != j) {
                let bi = unseen.col(i);
                let d = euclidean(bi, bj);
                if d == 0.0 {
                    continue;
                }
                let s = clamp_delta(delta.unseen_unseen[(i, j)]);
                let coef = within_scale * (d - s) / (s * d);
                for ((gk, &b), &o) in g.iter_mut().zip(bj).zip(bi) {
                    *gk += coef * (b - o);
                }
            }
        }
        grad.col_mut(j).copy_from_slice(&g);
    }
    grad
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    lo + (hi - lo) * u
}

/// Embeds the unseen classes from a seeded uniform start in
/// `[−1/√d_y, 1/√d_y]`.
pub fn embed_unseen(landmarks: &RealMatrix, delta: &SemanticDistances, config: &LsmConfig) -> Result<UnseenEmbedding> {
    let nu = delta.n_unseen();
    if nu == 0 {
        return Err(ZslError::InvalidInput("no unseen classes to embed".into()));
    }
    let dim = landmarks.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let r = 1.0 / libm::sqrt(dim as f64);
    let init = RealMatrix::from_fn(dim, nu, |_, _| uniform(&mut rng, -r, r));
    descend(landmarks, delta, init, config, &mut rng)
}

/// Runs [`embed_unseen`] from `restarts` seeded starts and keeps the lowest
/// final cost (earliest on ties). Start `r` uses seed `config.seed + r`.
pub fn embed_unseen_multistart(
    landmarks: &RealMatrix,
    delta: &SemanticDistances,
    config: &LsmConfig,
    restarts: usize,
) -> Result<UnseenEmbedding> {
    if restarts == 0 {
        return Err(ZslError::Bounds("at least one LSM start is required".into()));
    }
    let mut best = embed_unseen(landmarks, delta, config)?;
    for r in 1..restarts {
        let cfg = LsmConfig {
            seed: config.seed.wrapping_add(r as u64),
            ..*config
        };
        let run = embed_unseen(landmarks, delta, &cfg)?;
        if run.final_cost < best.final_cost {
            best = run;
        }
    }
    Ok(best)
}

/// Runs the descent from a caller-supplied starting embedding.
pub fn embed_unseen_from(
    landmarks: &RealMatrix,
    delta: &SemanticDistances,
    init: RealMatrix,
    config: &LsmConfig,
) -> Result<UnseenEmbedding> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    descend(landmarks, delta, init, config, &mut rng)
}

fn descend(
    landmarks: &RealMatrix,
    delta: &SemanticDistances,
    mut current: RealMatrix,
    config: &LsmConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UnseenEmbedding> {
    if !(config.eta > 0.0) {
        return Err(ZslError::Bounds(format!("eta = {} must be positive", config.eta)));
    }
    check_shapes(landmarks, &current, delta)?;
    if delta.known_unseen.as_slice().iter().chain(delta.unseen_unseen.as_slice())
        .enumerate()
        .any(|(p, &v)| v < DELTA_FLOOR && !is_diagonal(p, delta))
    {
        log::warn!("semantic distances below {DELTA_FLOOR:e} clamped (duplicate semantic vectors?)");
    }

    let mut cost = cost_unchecked(landmarks, &current, delta);
    if !cost.is_finite() {
        return Err(ZslError::Diverged { iteration: 0, cost });
    }
    let mut history = alloc::vec![cost];
    let min_step = config.eta * libm::ldexp(1.0, -60);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        iterations += 1;
        if separate_coincident(landmarks, &mut current, rng) {
            cost = cost_unchecked(landmarks, &current, delta);
        }
        let grad = gradient_unchecked(landmarks, &current, delta);
        if grad.check_finite().is_err() {
            return Err(ZslError::Diverged { iteration: iterations, cost });
        }
        let mut step = config.eta;
        let accepted = loop {
            let candidate = current.zip_with(&grad, |b, g| b - step * g).expect("same shape");
            let c = cost_unchecked(landmarks, &candidate, delta);
            if c <= cost {
                break Some((candidate, c));
            }
            step *= 0.5;
            if step < min_step {
                break None;
            }
        };
        let Some((candidate, next)) = accepted else {
            // no descent direction left at machine precision
            converged = true;
            break;
        };
        let rel = if cost > 0.0 { (cost - next) / cost } else { 0.0 };
        current = candidate;
        cost = next;
        history.push(cost);
        if rel < config.rel_tol {
            converged = true;
            break;
        }
    }

    Ok(UnseenEmbedding {
        embedding: current,
        final_cost: cost,
        iterations,
        converged,
        cost_history: history,
    })
}

fn is_diagonal(flat: usize, delta: &SemanticDistances) -> bool {
    let ku = delta.known_unseen.as_slice().len();
    if flat < ku {
        return false;
    }
    let p = flat - ku;
    let n = delta.unseen_unseen.rows();
    p % n == p / n
}

/// Nudges unseen points that coincide with a landmark or another unseen
/// point. Returns whether anything moved.
fn separate_coincident(landmarks: &RealMatrix, unseen: &mut RealMatrix, rng: &mut ChaCha8Rng) -> bool {
    let nu = unseen.cols();
    let mut moved = false;
    for j in 0..nu {
        let hit = landmarks.columns().any(|l| euclidean(l, unseen.col(j)) == 0.0)
            || (0..nu).any(|i| i != j && euclidean(unseen.col(i), unseen.col(j)) == 0.0);
        if hit {
            for v in unseen.col_mut(j) {
                *v += uniform(rng, -COINCIDENT_JITTER, COINCIDENT_JITTER);
            }
            moved = true;
        }
    }
    moved
}

/// Column-wise mean of two embeddings of the same classes.
///
/// `final_cost` of the result is the mean of the inputs' costs, not the
/// stress of the averaged embedding; call [`lsm_cost`] for that.
pub fn combine_embeddings(a: &UnseenEmbedding, b: &UnseenEmbedding) -> Result<UnseenEmbedding> {
    let embedding = a.embedding.zip_with(&b.embedding, |x, y| 0.5 * (x + y))?;
    Ok(UnseenEmbedding {
        embedding,
        final_cost: 0.5 * (a.final_cost + b.final_cost),
        iterations: a.iterations.max(b.iterations),
        converged: a.converged && b.converged,
        cost_history: Vec::new(),
    })
}
