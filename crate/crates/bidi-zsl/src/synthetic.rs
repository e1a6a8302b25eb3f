//! Synthetic zero-shot tasks with known geometry.
//!
//! Class means sit on a sphere scaled so that the closest pair is exactly
//! `separation·σ` apart; instances are isotropic Gaussians around them. The
//! semantic vector of a class is its mean, so semantic and visual geometry
//! agree by construction.

use bidi_zsl_core::{Label, Metric, RealMatrix, SemanticKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::config::{Dataset, SemanticData};
use crate::error::{HarnessError, Result};
use crate::split::SplitSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTaskSpec {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub sigma: f64,
    /// Minimum distance between class means, in units of `sigma`.
    pub separation: f64,
    /// Number of training classes; the rest are unseen.
    pub seen: usize,
}

impl Default for GaussianTaskSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            dim: 3,
            per_class: 40,
            sigma: 1.0,
            separation: 8.0,
            seen: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub dataset: Dataset,
    pub split: SplitSpec,
    /// `dim × classes`, column `c` is the mean of class `c`.
    pub means: RealMatrix,
}

/// Unit vectors spread over the 2-sphere by the Fibonacci lattice.
fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            [r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

/// Rotation matrix of a uniformly random unit quaternion.
fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let mut q = [0.0f64; 4];
    for v in q.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|v| v / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn unit_directions(spec: &GaussianTaskSpec, rng: &mut ChaCha8Rng) -> RealMatrix {
    if spec.dim == 3 {
        let rot = random_rotation(rng);
        let pts = fibonacci_sphere(spec.classes);
        RealMatrix::from_fn(3, spec.classes, |i, c| (0..3).map(|k| rot[i][k] * pts[c][k]).sum())
    } else {
        let mut m = RealMatrix::from_fn(spec.dim, spec.classes, |_, _| StandardNormal.sample(rng));
        for c in 0..spec.classes {
            let n = bidi_zsl_core::matrix::norm(m.col(c));
            m.col_mut(c).iter_mut().for_each(|v| *v /= n);
        }
        m
    }
}

pub fn gaussian_task(spec: &GaussianTaskSpec, seed: u64) -> Result<SyntheticTask> {
    if spec.classes < 2 || spec.seen == 0 || spec.seen >= spec.classes || spec.dim == 0 || spec.per_class == 0 {
        return Err(HarnessError::Config(format!("unusable synthetic task {spec:?}")));
    }
    if !(spec.sigma > 0.0 && spec.separation > 0.0) {
        return Err(HarnessError::Config("sigma and separation must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs = unit_directions(spec, &mut rng);
    let mut min_chord = f64::INFINITY;
    for a in 0..spec.classes {
        for b in a + 1..spec.classes {
            min_chord = min_chord.min(bidi_zsl_core::matrix::euclidean(dirs.col(a), dirs.col(b)));
        }
    }
    let radius = spec.separation * spec.sigma / min_chord;
    let means = dirs.scale(radius);

    let noise = Normal::new(0.0, spec.sigma).map_err(|e| HarnessError::Config(e.to_string()))?;
    let n = spec.classes * spec.per_class;
    let labels: Vec<Label> = (0..n).map(|i| (i / spec.per_class) as Label).collect();
    let x = RealMatrix::from_fn(spec.dim, n, |r, i| means[(r, labels[i] as usize)] + noise.sample(&mut rng));

    let mut order: Vec<Label> = (0..spec.classes as Label).collect();
    order.shuffle(&mut rng);
    let split = SplitSpec::new(order[..spec.seen].to_vec(), order[spec.seen..].to_vec())?;

    let semantics = vec![SemanticData {
        matrix: means.clone(),
        kind: SemanticKind::Attributes,
        metric: Metric::Euclidean,
    }];
    let dataset = Dataset::new(vec![x], labels, semantics)?;
    Ok(SyntheticTask { dataset, split, means })
}

/// A semantic table of pure noise over `classes` classes.
pub fn noise_semantics(classes: usize, dim: usize, seed: u64) -> SemanticData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SemanticData {
        matrix: RealMatrix::from_fn(dim, classes, |_, _| rng.random_range(-1.0..1.0)),
        kind: SemanticKind::WordVectors,
        metric: Metric::Cosine,
    }
}
