//! Class-level splits.

use std::collections::BTreeSet;

use bidi_zsl_core::Label;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Disjoint known, unseen and (optionally) validation classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_classes: Vec<Label>,
    pub test_classes: Vec<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_classes: Option<Vec<Label>>,
}

impl SplitSpec {
    pub fn new(train: Vec<Label>, test: Vec<Label>) -> Result<Self> {
        let s = Self {
            train_classes: sorted(train),
            test_classes: sorted(test),
            validation_classes: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// Checks that the class sets are non-empty where required and pairwise disjoint.
    pub fn validate(&self) -> Result<()> {
        if self.train_classes.is_empty() {
            return Err(HarnessError::Config("split has no training classes".into()));
        }
        let mut seen = BTreeSet::new();
        let groups = [
            Some(&self.train_classes),
            Some(&self.test_classes),
            self.validation_classes.as_ref(),
        ];
        for group in groups.into_iter().flatten() {
            let mut local = BTreeSet::new();
            for &c in group {
                if !local.insert(c) {
                    return Err(HarnessError::Config(format!("class {c} listed twice in one group")));
                }
                if !seen.insert(c) {
                    return Err(HarnessError::Config(format!("class {c} appears in more than one split group")));
                }
            }
        }
        Ok(())
    }
}

fn sorted(mut v: Vec<Label>) -> Vec<Label> {
    v.sort_unstable();
    v
}

/// Holds out `⌊fraction·|classes|⌋` classes (at least one) drawn uniformly
/// without replacement. The held-out classes form `validation_classes`; the
/// rest are `train_classes`.
pub fn make_classwise_split(classes: &[Label], holdout_fraction: f64, seed: u64) -> Result<SplitSpec> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(HarnessError::Core(bidi_zsl_core::ZslError::InvalidInput(format!(
            "holdout fraction {holdout_fraction} outside (0, 1)"
        ))));
    }
    let unique: Vec<Label> = classes.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if unique.len() != classes.len() {
        return Err(HarnessError::Core(bidi_zsl_core::ZslError::InvalidInput(
            "repeated class in split input".into(),
        )));
    }
    let n = unique.len();
    let held = ((holdout_fraction * n as f64).floor() as usize).max(1);
    if n < 2 || held >= n {
        return Err(HarnessError::Core(bidi_zsl_core::ZslError::InvalidInput(format!(
            "{n} classes are too few to hold out {held} and keep a training class"
        ))));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: BTreeSet<usize> = sample(&mut rng, n, held).into_iter().collect();
    let mut validation = Vec::with_capacity(held);
    let mut train = Vec::with_capacity(n - held);
    for (i, &c) in unique.iter().enumerate() {
        if picked.contains(&i) {
            validation.push(c);
        } else {
            train.push(c);
        }
    }
    Ok(SplitSpec {
        train_classes: train,
        test_classes: Vec::new(),
        validation_classes: Some(validation),
    })
}

/// Stable 64-bit mixing of a base seed with stream indices.
pub fn derive_seed(base: u64, streams: &[u64]) -> u64 {
    let mut z = base;
    for &s in streams {
        z = splitmix(z ^ splitmix(s.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    z
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
