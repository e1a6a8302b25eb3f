use std::collections::BTreeSet;

use bidi_zsl::split::{derive_seed, make_classwise_split};
use bidi_zsl_core::Label;
use proptest::prelude::*;

#[test]
fn thirty_draws_cover_every_class() {
    let classes: Vec<Label> = (0..10).collect();
    let mut seen = BTreeSet::new();
    for s in 0..30 {
        let split = make_classwise_split(&classes, 0.2, derive_seed(11, &[s])).unwrap();
        seen.extend(split.validation_classes.unwrap());
    }
    assert_eq!(seen.len(), 10);
}

#[test]
fn too_few_classes() {
    let err = make_classwise_split(&[4], 0.2, 0).unwrap_err();
    assert_eq!(err.category(), "invalid-input");
}

#[test]
fn seeds_differ_by_stream() {
    let a = derive_seed(5, &[0]);
    assert_ne!(a, derive_seed(5, &[1]));
    assert_ne!(a, derive_seed(6, &[0]));
    assert_eq!(a, derive_seed(5, &[0]));
}

proptest! {
    #[test]
    fn splits_partition_the_classes(n in 2usize..60, frac in 0.01f64..0.99, seed in any::<u64>()) {
        let classes: Vec<Label> = (0..n as Label).map(|c| c * 3 + 1).collect();
        let held = ((frac * n as f64).floor() as usize).max(1);
        match make_classwise_split(&classes, frac, seed) {
            Ok(s) => {
                let v = s.validation_classes.clone().unwrap();
                prop_assert_eq!(v.len(), held);
                prop_assert_eq!(s.train_classes.len() + v.len(), n);
                let all: BTreeSet<Label> = s.train_classes.iter().chain(&v).copied().collect();
                prop_assert_eq!(all.len(), n);
                s.validate().unwrap();
            }
            Err(_) => prop_assert!(held >= n),
        }
    }
}
