#![allow(dead_code)]

use std::path::{Path, PathBuf};

use bidi_zsl::config::Dataset;
use bidi_zsl::io::{save_labels, save_matrix_auto};
use bidi_zsl::synthetic::{gaussian_task, GaussianTaskSpec, SyntheticTask};
use bidi_zsl::SplitSpec;
use serde_json::json;

pub fn small_task(seed: u64) -> SyntheticTask {
    let spec = GaussianTaskSpec {
        per_class: 20,
        ..GaussianTaskSpec::default()
    };
    gaussian_task(&spec, seed).unwrap()
}

/// Writes the dataset next to a config and returns the config path.
pub fn write_experiment(dir: &Path, ds: &Dataset, split: &SplitSpec, extra: serde_json::Value) -> PathBuf {
    let mut views = Vec::new();
    for (i, v) in ds.views.iter().enumerate() {
        let name = format!("view{i}.bin");
        save_matrix_auto(v, &dir.join(&name)).unwrap();
        views.push(json!({ "path": name }));
    }
    save_labels(&ds.labels, &dir.join("labels.csv")).unwrap();
    let mut semantics = Vec::new();
    for (i, s) in ds.semantics.iter().enumerate() {
        let name = format!("sem{i}.csv");
        save_matrix_auto(&s.matrix.transpose(), &dir.join(&name)).unwrap();
        semantics.push(json!({ "path": name, "kind": s.kind, "metric": s.metric, "layout": "rows" }));
    }
    let mut cfg = json!({
        "views": views,
        "labels": "labels.csv",
        "semantics": semantics,
        "split": { "train_classes": split.train_classes, "test_classes": split.test_classes },
        "hyper": { "alpha": 1.0, "d_y": 3, "k_g": 5, "k_st": 20, "seed": 7 },
        "trials": 3
    });
    if let (Some(base), Some(more)) = (cfg.as_object_mut(), extra.as_object()) {
        for (k, v) in more {
            base.insert(k.clone(), v.clone());
        }
    }
    let path = dir.join("experiment.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}
