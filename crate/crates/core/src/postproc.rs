//! Transductive post-processing over a batch of projected test instances.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Result, ZslError};
use crate::matrix::{euclidean, squared_distance, RealMatrix};
use crate::recognition::{nearest_columns, ZslModel};
use crate::Label;

/// Self-training result for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfTrainOutcome {
    /// Mean of the `k` nearest test instances to each class embedding.
    pub neighbor_means: RealMatrix,
    /// Midpoints between the original embeddings and `neighbor_means`.
    pub adjusted: RealMatrix,
}

/// Moves every unseen-class embedding halfway towards the mean of its
/// `k_st` nearest test instances. `k_st` larger than the batch is clamped.
pub fn self_train_embeddings(embedding: &RealMatrix, test: &RealMatrix, k_st: usize) -> Result<SelfTrainOutcome> {
    if k_st == 0 {
        return Err(ZslError::Bounds("k_ST must be at least 1".into()));
    }
    if test.cols() == 0 {
        return Err(ZslError::Usage("self-training needs a non-empty test batch".into()));
    }
    if test.rows() != embedding.rows() {
        return Err(ZslError::Shape(format!(
            "test batch in {} dimensions, embeddings in {}",
            test.rows(),
            embedding.rows()
        )));
    }
    let k = if k_st > test.cols() {
        log::warn!("k_ST = {k_st} exceeds the {} test instances; clamped", test.cols());
        test.cols()
    } else {
        k_st
    };
    let d = embedding.rows();
    let mut neighbor_means = RealMatrix::zeros(d, embedding.cols());
    let mut adjusted = RealMatrix::zeros(d, embedding.cols());
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(test.cols());
    for (c, b) in embedding.columns().enumerate() {
        order.clear();
        order.extend(test.columns().enumerate().map(|(i, y)| (squared_distance(b, y), i)));
        order.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mean = neighbor_means.col_mut(c);
        for &(_, i) in &order[..k] {
            for (m, &v) in mean.iter_mut().zip(test.col(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= k as f64);
        let mean = neighbor_means.col(c).to_vec();
        for ((a, &m), &o) in adjusted.col_mut(c).iter_mut().zip(&mean).zip(b) {
            *a = (m + o) / 2.0;
        }
    }
    Ok(SelfTrainOutcome {
        neighbor_means,
        adjusted,
    })
}

/// Model with self-trained unseen-class embeddings. The adjusted
/// embeddings are not renormalised.
pub fn self_train(model: &ZslModel, test: &RealMatrix, k_st: usize) -> Result<ZslModel> {
    let outcome = self_train_embeddings(&model.unseen.embedding, test, k_st)?;
    let mut out = model.clone();
    out.unseen.embedding = outcome.adjusted;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// `d × k`.
    pub centers: RealMatrix,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after every centre update.
    pub wcss_history: Vec<f64>,
    pub iterations: usize,
}

/// `k` distinct test points chosen uniformly as starting centres.
pub fn random_centers(points: &RealMatrix, k: usize, seed: u64) -> Result<RealMatrix> {
    if k > points.cols() {
        return Err(ZslError::InvalidInput(format!(
            "{k} clusters requested for {} points",
            points.cols()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..points.cols()).collect();
    // partial Fisher-Yates
    for i in 0..k {
        let span = (idx.len() - i) as u64;
        let j = i + (rng.next_u64() % span) as usize;
        idx.swap(i, j);
    }
    Ok(points.select_columns(&idx[..k]))
}

/// Lloyd's algorithm from the given centres.
///
/// A cluster left empty by the assignment step is reseeded with the point
/// farthest from its current centre.
pub fn kmeans(points: &RealMatrix, init_centers: &RealMatrix, max_iters: usize) -> Result<KMeansResult> {
    let k = init_centers.cols();
    let n = points.cols();
    if k == 0 {
        return Err(ZslError::InvalidInput("no initial centres".into()));
    }
    if n < k {
        return Err(ZslError::InvalidInput(format!("{n} points for {k} clusters")));
    }
    if points.rows() != init_centers.rows() {
        return Err(ZslError::Shape(format!(
            "points in {} dimensions, centres in {}",
            points.rows(),
            init_centers.rows()
        )));
    }
    let d = points.rows();
    let mut centers = init_centers.clone();
    let mut assignments = nearest_columns(points, &centers)?;
    let mut wcss_history = Vec::new();
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        repair_empty(points, &centers, &mut assignments, k);

        let mut next = RealMatrix::zeros(d, k);
        let mut counts = vec![0usize; k];
        for (p, &a) in points.columns().zip(&assignments) {
            counts[a] += 1;
            for (s, &v) in next.col_mut(a).iter_mut().zip(p) {
                *s += v;
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            next.col_mut(c).iter_mut().for_each(|s| *s /= count as f64);
        }
        let unchanged = next == centers;
        centers = next;
        wcss_history.push(wcss(points, &centers, &assignments));
        if unchanged {
            break;
        }
        let reassigned = nearest_columns(points, &centers)?;
        if reassigned == assignments {
            break;
        }
        assignments = reassigned;
    }

    Ok(KMeansResult {
        centers,
        assignments,
        wcss_history,
        iterations,
    })
}

fn repair_empty(points: &RealMatrix, centers: &RealMatrix, assignments: &mut [usize], k: usize) {
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    for empty in 0..k {
        if counts[empty] != 0 {
            continue;
        }
        let donor = assignments
            .iter()
            .enumerate()
            .filter(|&(_, &a)| counts[a] > 1)
            .map(|(i, &a)| (squared_distance(points.col(i), centers.col(a)), i))
            .fold(None, |best: Option<(f64, usize)>, cand| match best {
                Some(b) if b.0 >= cand.0 => Some(b),
                _ => Some(cand),
            });
        if let Some((_, i)) = donor {
            counts[assignments[i]] -= 1;
            assignments[i] = empty;
            counts[empty] = 1;
        }
    }
}

fn wcss(points: &RealMatrix, centers: &RealMatrix, assignments: &[usize]) -> f64 {
    points
        .columns()
        .zip(assignments)
        .map(|(p, &a)| squared_distance(p, centers.col(a)))
        .sum()
}

/// One-to-one matching of rows to columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `mapping[row] = column`.
    pub mapping: Vec<usize>,
    pub total_cost: f64,
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian
/// method with row/column potentials, `O(n³)`).
pub fn solve_assignment(cost: &RealMatrix) -> Result<Assignment> {
    if !cost.is_square() {
        return Err(ZslError::Shape(format!(
            "assignment needs a square cost matrix, got {}x{}",
            cost.rows(),
            cost.cols()
        )));
    }
    cost.check_finite()?;
    let n = cost.rows();
    // 1-based potentials; column 0 is a virtual start
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[(r0 - 1, col - 1)] - u[r0] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut mapping = vec![0usize; n];
    for col in 1..=n {
        mapping[owner[col] - 1] = col - 1;
    }
    let total_cost = mapping.iter().enumerate().map(|(r, &c)| cost[(r, c)]).sum();
    Ok(Assignment { mapping, total_cost })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredPrediction {
    pub labels: Vec<Label>,
    pub clustering: KMeansResult,
    /// Cluster `k` is matched to unseen column `assignment.mapping[k]`.
    pub assignment: Assignment,
}

/// Default Lloyd iteration cap for structured prediction.
pub const KMEANS_MAX_ITERS: usize = 300;

/// Clusters the batch from the unseen-class embeddings, matches clusters
/// to classes by minimum total centre-to-embedding distance, and labels
/// each instance by its cluster's class.
pub fn structured_predict(model: &ZslModel, test: &RealMatrix) -> Result<Vec<Label>> {
    Ok(structured_predict_with(model, test, KMEANS_MAX_ITERS)?.labels)
}

pub fn structured_predict_with(model: &ZslModel, test: &RealMatrix, max_iters: usize) -> Result<StructuredPrediction> {
    let embedding = &model.unseen.embedding;
    let clustering = kmeans(test, embedding, max_iters)?;
    let k = embedding.cols();
    let cost = RealMatrix::from_fn(k, k, |m, c| euclidean(clustering.centers.col(m), embedding.col(c)));
    let assignment = solve_assignment(&cost)?;
    let labels = clustering
        .assignments
        .iter()
        .map(|&m| model.unseen_class_ids[assignment.mapping[m]])
        .collect();
    Ok(StructuredPrediction {
        labels,
        clustering,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_train_hand_case() {
        let b = RealMatrix::from_columns(&[&[1.0, 0.0]]).unwrap();
        let y = RealMatrix::from_columns(&[&[0.0, 2.0], &[0.0, 0.0], &[9.0, 9.0]]).unwrap();
        let out = self_train_embeddings(&b, &y, 2).unwrap();
        assert_eq!(out.neighbor_means.col(0), &[0.0, 1.0]);
        assert_eq!(out.adjusted.col(0), &[0.5, 0.5]);
    }

    #[test]
    fn self_train_fixed_point_and_errors() {
        let b = RealMatrix::from_columns(&[&[0.3, -0.4]]).unwrap();
        let y = RealMatrix::from_columns(&[&[0.3, -0.4], &[0.3, -0.4]]).unwrap();
        assert_eq!(self_train_embeddings(&b, &y, 5).unwrap().adjusted, b);
        assert!(matches!(self_train_embeddings(&b, &y, 0), Err(ZslError::Bounds(_))));
        let empty = RealMatrix::zeros(2, 0);
        assert!(matches!(self_train_embeddings(&b, &empty, 1), Err(ZslError::Usage(_))));
    }

    #[test]
    fn assignment_small() {
        let c = RealMatrix::from_rows(&[&[0.0, 5.0], &[5.0, 0.0]]).unwrap();
        let a = solve_assignment(&c).unwrap();
        assert_eq!((a.mapping, a.total_cost), (vec![0, 1], 0.0));
        let c = RealMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        let a = solve_assignment(&c).unwrap();
        assert_eq!((a.mapping, a.total_cost), (vec![1, 0], 2.0));
        let c = RealMatrix::zeros(2, 3);
        assert!(matches!(solve_assignment(&c), Err(ZslError::Shape(_))));
    }

    #[test]
    fn kmeans_fixed_point() {
        let p = RealMatrix::from_columns(&[&[0.0, 0.0], &[5.0, 5.0]]).unwrap();
        let r = kmeans(&p, &p, 10).unwrap();
        assert_eq!(r.centers, p);
        assert_eq!(r.assignments, vec![0, 1]);
        assert_eq!(r.iterations, 1);
        assert!(matches!(
            kmeans(&p, &RealMatrix::zeros(2, 3), 10),
            Err(ZslError::InvalidInput(_))
        ));
    }

    #[test]
    fn kmeans_repairs_empty_cluster() {
        // second centre is far from everything, so it starts empty
        let p = RealMatrix::from_columns(&[&[0.0], &[0.1], &[4.0]]).unwrap();
        let init = RealMatrix::from_columns(&[&[1.0], &[100.0]]).unwrap();
        let r = kmeans(&p, &init, 50).unwrap();
        assert_eq!(r.assignments, vec![0, 0, 1]);
        assert_eq!(r.centers.col(1), &[4.0]);
        assert!((r.centers[(0, 0)] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn random_centers_are_distinct_points() {
        let p = RealMatrix::from_fn(2, 10, |i, j| (i * 10 + j) as f64);
        let c = random_centers(&p, 4, 3).unwrap();
        let mut cols: Vec<f64> = c.columns().map(|col| col[0]).collect();
        cols.sort_by(f64::total_cmp);
        cols.dedup();
        assert_eq!(cols.len(), 4);
        assert_eq!(c, random_centers(&p, 4, 3).unwrap());
    }
}
