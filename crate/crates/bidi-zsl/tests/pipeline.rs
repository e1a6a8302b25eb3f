mod common;

use bidi_zsl::config::{ExperimentConfig, HyperParams, Modes, PostProc};
use bidi_zsl::error::HarnessError;
use bidi_zsl::pipeline::{evaluate_split, run_on_dataset, run_pipeline_with, Method, SemanticUse};
use bidi_zsl::synthetic::{gaussian_task, GaussianTaskSpec};
use bidi_zsl_core::viewselect::KernelFn;
use serde_json::json;

fn hyper(seed: u64) -> HyperParams {
    HyperParams {
        alpha: 1.0,
        d_y: 3,
        k_g: 5,
        k_st: 20,
        seed,
        ..HyperParams::default()
    }
}

#[test]
fn separable_synthetic_task_is_solved() {
    let spec = GaussianTaskSpec::default();
    let mut total = 0.0;
    for seed in 0..10 {
        let t = gaussian_task(&spec, seed).unwrap();
        let r = run_on_dataset(&t.dataset, &t.split, &hyper(seed), &Method::default(), 1, Some(1)).unwrap();
        total += r.mean_per_class_accuracy.mean;
    }
    assert!(total / 10.0 >= 0.9, "mean accuracy {}", total / 10.0);
}

#[test]
fn self_training_changes_only_unseen_embeddings() {
    let t = common::small_task(3);
    let h = hyper(3);
    let plain = Method::default();
    let adapted = Method {
        modes: Modes {
            postproc: PostProc::SelfTrain,
            ..Modes::default()
        },
        ..plain
    };
    let run = |m: &Method| {
        evaluate_split(&t.dataset, &h, m, SemanticUse::Fused, &t.split.train_classes, &t.split.test_classes, 9).unwrap()
    };
    let (a, b) = (run(&plain), run(&adapted));
    assert_eq!(a.model.subspace, b.model.subspace);
    assert_eq!(a.model.landmarks, b.model.landmarks);
    assert_eq!(a.model.unseen_class_ids, b.model.unseen_class_ids);
    assert_ne!(a.model.unseen.embedding, b.model.unseen.embedding);
}

#[test]
fn kernelized_single_linear_view_runs() {
    let t = common::small_task(4);
    let method = Method {
        modes: Modes {
            kernelized: true,
            kernel: KernelFn::Linear,
            ..Modes::default()
        },
        ..Method::default()
    };
    let r = run_on_dataset(&t.dataset, &t.split, &hyper(4), &method, 2, Some(1)).unwrap();
    assert_eq!(r.trials.len(), 2);
    assert!(r.mean_per_class_accuracy.mean >= 0.0);
    assert!(r.trials[0].eval.classes == t.split.test_classes);
}

#[test]
fn structured_and_two_view_runs() {
    let mut t = common::small_task(5);
    let second = t.dataset.views[0].map(|v| 2.0 * v + 1.0);
    t.dataset.views.push(second);
    let method = Method {
        modes: Modes {
            postproc: PostProc::Structured,
            kernel: KernelFn::Rbf { gamma: 0.05 },
            ..Modes::default()
        },
        ..Method::default()
    };
    let r = run_on_dataset(&t.dataset, &t.split, &hyper(5), &method, 1, Some(1)).unwrap();
    assert_eq!(r.trials[0].eval.classes, t.split.test_classes);
}

#[test]
fn file_based_runs_are_byte_identical_serial_and_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let t = common::small_task(6);
    let path = common::write_experiment(dir.path(), &t.dataset, &t.split, json!({ "postproc": "self-train" }));
    let cfg = ExperimentConfig::load(&path).unwrap();
    let text = |threads| serde_json::to_string_pretty(&run_pipeline_with(&cfg, threads).unwrap()).unwrap();
    let serial = text(Some(1));
    assert_eq!(serial, text(Some(1)));
    assert_eq!(serial, text(Some(4)));
    assert_eq!(serial, text(None));
}

#[test]
fn stage_errors_carry_context() {
    let t = common::small_task(7);
    let h = HyperParams { d_y: 4, ..hyper(7) };
    let err = run_on_dataset(&t.dataset, &t.split, &h, &Method::default(), 1, Some(1)).unwrap_err();
    match &err {
        HarnessError::Stage { stage, .. } => assert_eq!(*stage, "fit"),
        other => panic!("{other:?}"),
    }
    assert_eq!(err.category(), "bounds");
    assert!(err.to_string().starts_with("fit: "));
}

#[test]
fn config_validation_rejects_bad_modes() {
    let dir = tempfile::tempdir().unwrap();
    let t = common::small_task(8);
    let path = common::write_experiment(
        dir.path(),
        &t.dataset,
        &t.split,
        json!({ "kernelized": true, "learner": "pca" }),
    );
    assert!(matches!(ExperimentConfig::load(&path), Err(HarnessError::Config(_))));
    let path = common::write_experiment(dir.path(), &t.dataset, &t.split, json!({ "trials": 0 }));
    assert!(matches!(ExperimentConfig::load(&path), Err(HarnessError::Config(_))));
}
