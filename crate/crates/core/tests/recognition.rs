use bidi_zsl_core::lsm::UnseenEmbedding;
use bidi_zsl_core::matrix::{norm, squared_distance};
use bidi_zsl_core::recognition::{classify, nearest_columns, per_class_accuracy, project_test};
use bidi_zsl_core::subspace::{compute_landmarks, embed_training, fit_slpp, Landmarks, ModelInput};
use bidi_zsl_core::{Label, RealMatrix, ZslError, ZslModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fitted(seed: u64) -> (ZslModel, RealMatrix, RealMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<Label> = (0..30).map(|i| i % 3).collect();
    let x = RealMatrix::from_fn(4, 30, |r, c| (labels[c] as f64 - 1.0) * (r as f64 + 1.0) + rng.random_range(-0.5..0.5));
    let mut sub = fit_slpp(&x, &labels, 1.0, 3, 3).unwrap();
    let y = embed_training(&mut sub, ModelInput::Features(&x)).unwrap();
    let landmarks = compute_landmarks(&y, &labels).unwrap();
    let unseen = RealMatrix::from_fn(3, 5, |_, _| rng.random_range(-1.0..1.0));
    let model = ZslModel::new(
        sub,
        landmarks,
        UnseenEmbedding {
            embedding: unseen,
            final_cost: 0.0,
            iterations: 0,
            converged: true,
            cost_history: Vec::new(),
        },
        vec![50, 51, 52, 53, 54],
    )
    .unwrap();
    (model, x, y)
}

#[test]
fn training_instance_reprojects_to_its_embedding() {
    let (model, x, y) = fitted(1);
    let again = project_test(&model, ModelInput::Features(&x)).unwrap();
    assert!(again.sub(&y).unwrap().max_abs() < 1e-12);
}

#[test]
fn classification_matches_exhaustive_scan() {
    let (model, _, _) = fitted(2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let raw = RealMatrix::from_fn(4, 20, |_, _| rng.random_range(-2.0..2.0));
    let y = project_test(&model, ModelInput::Features(&raw)).unwrap();
    for c in y.columns() {
        assert!((norm(c) - 1.0).abs() <= 1e-12);
    }
    let labels = classify(&y, &model).unwrap();
    for (j, c) in y.columns().enumerate() {
        let mut best = (f64::INFINITY, 0);
        for k in 0..5 {
            let d = squared_distance(c, model.unseen.embedding.col(k));
            if d < best.0 {
                best = (d, k);
            }
        }
        assert_eq!(labels[j], model.unseen_class_ids[best.1]);
    }
}

#[test]
fn exact_hit_and_empty_set() {
    let (model, _, _) = fitted(4);
    let at = model.unseen.embedding.select_columns(&[3]);
    assert_eq!(classify(&at, &model).unwrap(), vec![53]);
    assert!(matches!(
        nearest_columns(&at, &RealMatrix::zeros(3, 0)),
        Err(ZslError::Usage(_))
    ));
    let lm = Landmarks {
        embedding: RealMatrix::identity(2),
        class_ids: vec![0, 1],
    };
    assert!(ZslModel::new(model.subspace.clone(), lm, model.unseen.clone(), vec![1, 2, 3, 4, 5]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decisions_survive_relabelling_and_scaling(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = RealMatrix::from_fn(3, 6, |_, _| rng.random_range(-1.0..1.0));
        let points = RealMatrix::from_fn(3, 25, |_, _| rng.random_range(-1.0..1.0));
        let base = nearest_columns(&points, &centers).unwrap();
        let mut perm: Vec<usize> = (0..6).collect();
        for i in (1..6).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted = nearest_columns(&points, &centers.select_columns(&perm)).unwrap();
        for (b, p) in base.iter().zip(&permuted) {
            prop_assert_eq!(*b, perm[*p]);
        }
        let scaled = nearest_columns(&points.scale(scale), &centers.scale(scale)).unwrap();
        prop_assert_eq!(scaled, base);
    }

    #[test]
    fn per_class_mean_ignores_duplicated_class(seed in any::<u64>(), dup in 0u32..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<Label> = (0..30).map(|i| i % 3).collect();
        let pred: Vec<Label> = truth.iter().map(|&t| if rng.random_bool(0.6) { t } else { rng.random_range(0..3) }).collect();
        let a = per_class_accuracy(&pred, &truth).unwrap();
        let mut p2 = pred.clone();
        let mut t2 = truth.clone();
        for (p, t) in pred.iter().zip(&truth) {
            if *t == dup {
                p2.push(*p);
                t2.push(*t);
            }
        }
        let b = per_class_accuracy(&p2, &t2).unwrap();
        prop_assert!((a.mean_per_class_accuracy - b.mean_per_class_accuracy).abs() <= 1e-15);
        let mean = a.per_class_recall.values().sum::<f64>() / a.per_class_recall.len() as f64;
        prop_assert_eq!(mean, a.mean_per_class_accuracy);
    }
}
