//! Train/test partitioning: seeded stratified random splits and the
//! deterministic "extreme" split that tests on the least intuitive decisions.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::Dataset;
use crate::scalar::{total_cmp, Real};
use crate::scene::domain_key;

/// Fraction of samples held out for testing.
pub const TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SplitMethod {
    RandomStratified { seed: u64 },
    Extreme,
}

impl SplitMethod {
    pub fn name(&self) -> String {
        match self {
            SplitMethod::RandomStratified { seed } => format!("random_stratified({seed})"),
            SplitMethod::Extreme => "extreme".to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub method: SplitMethod,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    /// Similarity of each test sample to the training set; no method to
    /// compute it exists yet, so it is always `None`.
    pub zeta: Option<Vec<f64>>,
}

pub fn split<T: Real>(dataset: &Dataset<T>, method: SplitMethod) -> Result<SplitResult> {
    match method {
        SplitMethod::RandomStratified { seed } => split_random_stratified(dataset, seed),
        SplitMethod::Extreme => split_extreme(dataset),
    }
}

/// `floor(0.2 * n + 0.5)`.
pub fn test_size(n: usize) -> usize {
    (TEST_FRACTION * n as f64 + 0.5).floor() as usize
}

fn check_size<T: Real>(dataset: &Dataset<T>) -> Result<usize> {
    match dataset.len() {
        0 => Err(Error::Empty("dataset")),
        n if n < 5 => Err(Error::InvalidArgument(format!(
            "need at least 5 samples to split, got {n}"
        ))),
        n => Ok(n),
    }
}

/// Per-stratum quotas summing to `test_size(total)`.
///
/// Strata are keyed by `(a, domain info)`. Each stratum with at least two
/// members gets `floor(0.2 n)` plus at most one extra, handed out by largest
/// fractional remainder until the total is reached, never emptying the
/// stratum's training share. Singleton strata stay in training unless the
/// other strata cannot absorb the test share.
fn quotas(sizes: &[usize], total: usize) -> Vec<usize> {
    let target = test_size(total);
    let mut quota = vec![0usize; sizes.len()];
    let mut assigned = 0;
    for (q, &n) in quota.iter_mut().zip(sizes) {
        if n >= 2 {
            *q = ((TEST_FRACTION * n as f64).floor() as usize).min(n - 1);
            assigned += *q;
        }
    }
    // largest remainder first, stratum order breaks ties
    let mut order: Vec<usize> = (0..sizes.len()).filter(|&i| sizes[i] >= 2).collect();
    order.sort_by(|&a, &b| {
        let ra = TEST_FRACTION * sizes[a] as f64 - quota[a] as f64;
        let rb = TEST_FRACTION * sizes[b] as f64 - quota[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in &order {
        if assigned >= target {
            break;
        }
        if quota[i] + 1 < sizes[i] {
            quota[i] += 1;
            assigned += 1;
        }
    }
    // then singletons
    for (q, &n) in quota.iter_mut().zip(sizes) {
        if assigned >= target {
            break;
        }
        if n == 1 {
            *q = 1;
            assigned += 1;
        }
    }
    // unreachable for the 20% fraction, kept so the total always holds
    while assigned < target {
        let Some(i) = (0..sizes.len()).find(|&i| quota[i] < sizes[i]) else {
            break;
        };
        quota[i] += 1;
        assigned += 1;
    }
    quota
}

/// Random 20% per stratum, stratified on `(a, domain info)`.
///
/// Members of a stratum are ordered by `scene_id` before shuffling, so the
/// result does not depend on the order of samples in the dataset.
pub fn split_random_stratified<T: Real>(dataset: &Dataset<T>, seed: u64) -> Result<SplitResult> {
    let n = check_size(dataset)?;
    let mut strata: BTreeMap<(bool, String), Vec<usize>> = BTreeMap::new();
    for (i, s) in dataset.samples.iter().enumerate() {
        strata
            .entry((s.output.accepted, domain_key(&s.input.domain_info)))
            .or_default()
            .push(i);
    }
    let mut groups: Vec<Vec<usize>> = strata.into_values().collect();
    for g in &mut groups {
        g.sort_by(|&a, &b| {
            let (sa, sb) = (&dataset.samples[a].input, &dataset.samples[b].input);
            sa.scene_id.cmp(&sb.scene_id).then(total_cmp(&sa.t_0, &sb.t_0))
        });
    }
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let quota = quotas(&sizes, n);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::with_capacity(n);
    let mut test_idx = Vec::new();
    for (mut g, q) in groups.into_iter().zip(quota) {
        g.shuffle(&mut rng);
        test_idx.extend_from_slice(&g[..q]);
        train_idx.extend_from_slice(&g[q..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(SplitResult {
        method: SplitMethod::RandomStratified { seed },
        train_idx,
        test_idx,
        zeta: None,
    })
}

/// Unintuitiveness of a decision: small accepted gaps and large rejected
/// gaps score high.
pub fn unintuitiveness<T: Real>(accepted: bool, gap_at_t0: T) -> T {
    if accepted {
        -gap_at_t0
    } else {
        gap_at_t0
    }
}

/// The most unintuitive samples of each class form the test set.
///
/// The score puts every rejected gap above every accepted one, so a single
/// global ranking would yield a one-class test set on which AUC and TNR-PR
/// are undefined. Instead each class contributes its share of the 20%
/// (the same quotas as the stratified split, keyed by class only), taking
/// its highest-scoring members. Ties are broken by `scene_id`.
pub fn split_extreme<T: Real>(dataset: &Dataset<T>) -> Result<SplitResult> {
    let n = check_size(dataset)?;
    let score = |i: usize| {
        let s = &dataset.samples[i];
        unintuitiveness(s.output.accepted, s.input.gap_at_t0)
    };
    let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, s) in dataset.samples.iter().enumerate() {
        classes[usize::from(s.output.accepted)].push(i);
    }
    let sizes: Vec<usize> = classes.iter().map(Vec::len).collect();
    let quota = quotas(&sizes, n);
    let mut train_idx = Vec::with_capacity(n);
    let mut test_idx = Vec::new();
    for (mut members, k) in classes.into_iter().zip(quota) {
        members.sort_by(|&a, &b| {
            total_cmp(&score(b), &score(a)).then_with(|| {
                let (sa, sb) = (&dataset.samples[a].input, &dataset.samples[b].input);
                sa.scene_id.cmp(&sb.scene_id)
            })
        });
        test_idx.extend_from_slice(&members[..k]);
        train_idx.extend_from_slice(&members[k..]);
    }
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok(SplitResult {
        method: SplitMethod::Extreme,
        train_idx,
        test_idx,
        zeta: None,
    })
}
