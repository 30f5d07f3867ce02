//! Conversions between binary, timing and trajectory predictions.
//!
//! | from \ to  | binary        | timing | trajectory |
//! |------------|---------------|--------|------------|
//! | binary     | identity      | T3     | T2 ∘ T3    |
//! | timing     | drop deciles  | identity | T2       |
//! | trajectory | T1            | T1     | identity   |

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::extraction::SampleInput;
use crate::geometry::Trajectory;
use crate::models::{DecileSet, Prediction, PredictionForm, RetrievalModel};
use crate::scalar::{round_half_even, total_cmp, Real};
use crate::scenario::ScenarioDefinition;

/// First time a predicted target trajectory touches the contested space.
/// The path starts at the target's position at `t_0`.
pub fn acceptance_time<T: Real>(
    traj: &[crate::geometry::Position<T>],
    input: &SampleInput<T>,
    scenario: &dyn ScenarioDefinition<T>,
) -> Result<Option<T>> {
    if traj.len() != input.output_times.len() {
        return Err(Error::LengthMismatch {
            what: "trajectory vs output times",
            left: traj.len(),
            right: input.output_times.len(),
        });
    }
    let path: Vec<_> = std::iter::once((input.t_0, input.target_anchor()))
        .chain(input.output_times.iter().copied().zip(traj.iter().copied()))
        .collect();
    scenario.target_entry(&input.geometry, &path)
}

/// `f_a`: does the trajectory accept the gap, i.e. enter before `max T_O`?
pub fn f_a<T: Real>(
    traj: &[crate::geometry::Position<T>],
    input: &SampleInput<T>,
    scenario: &dyn ScenarioDefinition<T>,
) -> Result<bool> {
    let horizon_end = *input.output_times.last().ok_or(Error::Empty("output times"))?;
    Ok(acceptance_time(traj, input, scenario)?.is_some_and(|t| t < horizon_end))
}

/// Empirical deciles, linear interpolation between order statistics at
/// rank `(n - 1) p`.
pub fn q9<T: Real>(times: &[T]) -> Result<DecileSet<T>> {
    if times.is_empty() {
        return Err(Error::Empty("decile input"));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(total_cmp);
    let n = sorted.len();
    let mut q = [T::zero(); 9];
    for (j, slot) in q.iter_mut().enumerate() {
        let h = T::from_usize_lossy(n - 1) * T::lit((j + 1) as f64 / 10.0);
        let lo = h.floor().to_usize().unwrap_or(0).min(n - 1);
        let hi = (lo + 1).min(n - 1);
        *slot = sorted[lo] + (h - T::from_usize_lossy(lo)) * (sorted[hi] - sorted[lo]);
    }
    // interpolation can break monotonicity by an ulp
    for j in 1..9 {
        if q[j] < q[j - 1] {
            q[j] = q[j - 1];
        }
    }
    DecileSet::new(q)
}

/// T1: acceptance probability and acceptance-time deciles of a trajectory set.
pub fn t1<T: Real>(
    trajs: &[Trajectory<T>],
    input: &SampleInput<T>,
    scenario: &dyn ScenarioDefinition<T>,
) -> Result<Prediction<T>> {
    if trajs.is_empty() {
        return Err(Error::Empty("trajectory set"));
    }
    let horizon_end = *input.output_times.last().ok_or(Error::Empty("output times"))?;
    let mut times = Vec::new();
    for traj in trajs {
        if let Some(t) = acceptance_time(traj, input, scenario)?.filter(|&t| t < horizon_end) {
            times.push(t);
        }
    }
    let a_pred = T::from_usize_lossy(times.len()) / T::from_usize_lossy(trajs.len());
    let deciles = if times.is_empty() { None } else { Some(q9(&times)?) };
    Ok(Prediction::Timing { a_pred, deciles })
}

/// R: selects `m` of the indices `0..weights.len()`.
///
/// Without replacement (`m <= len`), each index is included with
/// probability proportional to its weight, capped at 1 with the excess
/// redistributed. Selection is systematic over the given order with one
/// uniform start, so callers that sort candidates get a stratified draw.
/// With replacement (`m > len`), draws are independent.
pub fn weighted_select<T: Real, R: Rng>(m: usize, weights: &[T], rng: &mut R) -> Result<Vec<usize>> {
    if weights.is_empty() {
        return Err(Error::Empty("selection candidates"));
    }
    let w: Vec<f64> = weights.iter().map(|x| x.to_f64_lossy()).collect();
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidArgument("selection weights must be finite and non-negative".into()));
    }
    let positive: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::InvalidArgument("selection weights are all zero".into()));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    if m > w.len() {
        let dist = WeightedIndex::new(&w).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        return Ok((0..m).map(|_| dist.sample(rng)).collect());
    }
    if m >= positive.len() {
        // every weighted candidate is certain; fill from the rest uniformly
        let mut rest: Vec<usize> = (0..w.len()).filter(|&i| w[i] == 0.0).collect();
        let mut chosen = positive;
        for _ in chosen.len()..m {
            let k = rng.random_range(0..rest.len());
            chosen.push(rest.swap_remove(k));
        }
        chosen.sort_unstable();
        return Ok(chosen);
    }

    let mut certain = vec![false; w.len()];
    let mut pi = vec![0.0; w.len()];
    loop {
        let left = m - certain.iter().filter(|&&c| c).count();
        let total: f64 = positive.iter().filter(|&&i| !certain[i]).map(|&i| w[i]).sum();
        let mut changed = false;
        for &i in &positive {
            if !certain[i] {
                pi[i] = left as f64 * w[i] / total;
                if pi[i] >= 1.0 {
                    certain[i] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let free: Vec<usize> = positive.iter().copied().filter(|&i| !certain[i]).collect();
    let left = m - certain.iter().filter(|&&c| c).count();
    let mut chosen: Vec<usize> = (0..w.len()).filter(|&i| certain[i]).collect();
    if left > 0 {
        let total: f64 = free.iter().map(|&i| pi[i]).sum();
        let u: f64 = rng.random();
        let mut partial = 0.0;
        let mut prev = 0.0_f64;
        for (k, &i) in free.iter().enumerate() {
            partial += pi[i];
            // normalized so the last cumulative value is exactly `left`
            let cum = if k + 1 == free.len() { left as f64 } else { left as f64 * partial / total };
            if (cum - u).ceil() > (prev - u).ceil() {
                chosen.push(i);
            }
            prev = cum;
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// `W_A`: weights giving each of the ten inter-decile bins
/// `(-inf, q1], (q1, q2], ..., (q9, inf)` total weight 1, spread evenly
/// over the candidates inside. An empty bin hands its weight to the nearest
/// non-empty bin, the earlier one on ties.
pub fn decile_weights<T: Real>(times: &[T], deciles: &DecileSet<T>) -> Vec<T> {
    let q = deciles.values();
    let bin_of = |t: T| q.iter().filter(|&&qj| qj < t).count();
    let bins: Vec<usize> = times.iter().map(|&t| bin_of(t)).collect();
    let mut counts = [0usize; 10];
    for &b in &bins {
        counts[b] += 1;
    }
    if bins.is_empty() {
        return Vec::new();
    }
    let mut totals = [0.0_f64; 10];
    for b in 0..10usize {
        let target = (0..=9usize)
            .flat_map(|d| [b.checked_sub(d), Some(b + d)])
            .flatten()
            .find(|&c| c < 10 && counts[c] > 0)
            .expect("at least one candidate");
        totals[target] += 1.0;
    }
    bins.iter()
        .map(|&b| T::lit(totals[b] / counts[b] as f64))
        .collect()
}

/// Retrieval models and limits used by T2 and T3.
#[derive(Clone, Copy)]
pub struct TransformContext<'a, T: Real> {
    pub scenario: &'a dyn ScenarioDefinition<T>,
    /// `M_A`, trained on accepted-gap training samples.
    pub accepted: Option<&'a RetrievalModel<T>>,
    /// `M_¬A`, trained on rejected-gap training samples.
    pub rejected: Option<&'a RetrievalModel<T>>,
    pub n_p: usize,
    /// Candidates gathered per class before selection.
    pub pool_size: usize,
    /// Extra neighbour pages fetched when a pool is short.
    pub max_requeries: usize,
}

impl<'a, T: Real> TransformContext<'a, T> {
    pub fn new(scenario: &'a dyn ScenarioDefinition<T>, n_p: usize) -> Self {
        Self {
            scenario,
            accepted: None,
            rejected: None,
            n_p,
            pool_size: 10 * n_p,
            max_requeries: 10,
        }
    }

    pub fn with_models(mut self, accepted: &'a RetrievalModel<T>, rejected: &'a RetrievalModel<T>) -> Self {
        self.accepted = Some(accepted);
        self.rejected = Some(rejected);
        self
    }

    fn model(&self, accepted: bool) -> Result<&'a RetrievalModel<T>> {
        let m = if accepted { self.accepted } else { self.rejected };
        m.ok_or_else(|| {
            Error::InvalidArgument(format!(
                "conversion needs the {} conditional model",
                if accepted { "accepted-gap" } else { "rejected-gap" }
            ))
        })
    }
}

struct Candidate<T> {
    traj: Trajectory<T>,
    t_a: Option<T>,
}

/// Class-consistent candidates from a conditional model, fetched one
/// neighbour page of `page` entries at a time.
fn gather<T: Real>(
    ctx: &TransformContext<'_, T>,
    accepted: bool,
    page: usize,
    needed: usize,
    input: &SampleInput<T>,
) -> Result<Vec<Candidate<T>>> {
    let model = ctx.model(accepted)?;
    let horizon_end = *input.output_times.last().ok_or(Error::Empty("output times"))?;
    let ranked = model.ranked(input);
    let page = page.max(1);
    let mut pool = Vec::new();
    for attempt in 0..=ctx.max_requeries {
        let start = attempt * page;
        if start >= ranked.len() {
            break;
        }
        for &idx in &ranked[start..(start + page).min(ranked.len())] {
            let traj = model.aligned(idx, input);
            let t_a = acceptance_time(&traj, input, ctx.scenario)?.filter(|&t| t < horizon_end);
            if t_a.is_some() == accepted {
                pool.push(Candidate { traj, t_a });
            }
        }
        if pool.len() >= page.max(needed) {
            break;
        }
    }
    if pool.len() < needed {
        return Err(Error::InsufficientPool { class: model.class_name(), needed, found: pool.len() });
    }
    Ok(pool)
}

fn check_probability<T: Real>(a_pred: T) -> Result<()> {
    if a_pred >= T::zero() && a_pred <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("a_pred must lie in [0, 1], got {a_pred}")))
    }
}

/// T2: builds `n_p` trajectories matching a timing prediction from the two
/// conditional models. Accepted ones come first.
pub fn t2<T: Real>(
    a_pred: T,
    deciles: Option<&DecileSet<T>>,
    ctx: &TransformContext<'_, T>,
    input: &SampleInput<T>,
    seed: u64,
) -> Result<Prediction<T>> {
    check_probability(a_pred)?;
    let n_p = ctx.n_p;
    let n_rej = round_half_even(T::from_usize_lossy(n_p) * (T::one() - a_pred))
        .to_usize()
        .unwrap_or(0)
        .min(n_p);
    let n_acc = n_p - n_rej;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trajs = Vec::with_capacity(n_p);

    if n_acc > 0 {
        let mut pool = gather(ctx, true, ctx.pool_size, n_acc, input)?;
        pool.sort_by(|a, b| total_cmp(&a.t_a.unwrap_or(T::zero()), &b.t_a.unwrap_or(T::zero())));
        let times: Vec<T> = pool.iter().map(|c| c.t_a.unwrap_or(T::zero())).collect();
        let weights = match deciles {
            Some(d) => decile_weights(&times, d),
            None => vec![T::one(); pool.len()],
        };
        for i in weighted_select(n_acc, &weights, &mut rng)? {
            trajs.push(pool[i].traj.clone());
        }
    }
    if n_rej > 0 {
        let pool = gather(ctx, false, ctx.pool_size, n_rej, input)?;
        let weights = vec![T::one(); pool.len()];
        for i in weighted_select(n_rej, &weights, &mut rng)? {
            trajs.push(pool[i].traj.clone());
        }
    }
    Ok(Prediction::TrajectorySet { trajs })
}

/// T3: acceptance-time deciles from the accepted-gap model; `a_pred` is
/// passed through.
pub fn t3<T: Real>(a_pred: T, ctx: &TransformContext<'_, T>, input: &SampleInput<T>) -> Result<Prediction<T>> {
    check_probability(a_pred)?;
    let pool = gather(ctx, true, ctx.n_p, 1, input)?;
    let times: Vec<T> = pool.iter().take(ctx.n_p).filter_map(|c| c.t_a).collect();
    Ok(Prediction::Timing { a_pred, deciles: Some(q9(&times)?) })
}

/// Names of the transforms `auto_chain` applies, in order.
pub fn chain_path(from: PredictionForm, to: PredictionForm) -> &'static [&'static str] {
    use PredictionForm::*;
    match (from, to) {
        (Binary, Binary) | (Timing, Timing) | (Trajectory, Trajectory) => &[],
        (Binary, Timing) => &["T3"],
        (Binary, Trajectory) => &["T3", "T2"],
        (Timing, Binary) => &["drop_deciles"],
        (Timing, Trajectory) => &["T2"],
        (Trajectory, Binary) => &["T1", "drop_deciles"],
        (Trajectory, Timing) => &["T1"],
    }
}

/// Converts a prediction to the form a metric needs.
pub fn auto_chain<T: Real>(
    pred: &Prediction<T>,
    needed: PredictionForm,
    ctx: &TransformContext<'_, T>,
    input: &SampleInput<T>,
    seed: u64,
) -> Result<Prediction<T>> {
    use PredictionForm::*;
    match (pred, needed) {
        (p, form) if p.form() == form => Ok(p.clone()),
        (Prediction::Binary { a_pred }, Timing) => t3(*a_pred, ctx, input),
        (Prediction::Binary { a_pred }, Trajectory) => {
            let Prediction::Timing { a_pred, deciles } = t3(*a_pred, ctx, input)? else {
                unreachable!("t3 returns timing")
            };
            t2(a_pred, deciles.as_ref(), ctx, input, seed)
        }
        (Prediction::Timing { a_pred, .. }, Binary) => Ok(Prediction::Binary { a_pred: *a_pred }),
        (Prediction::Timing { a_pred, deciles }, Trajectory) => t2(*a_pred, deciles.as_ref(), ctx, input, seed),
        (Prediction::TrajectorySet { trajs }, Timing) => t1(trajs, input, ctx.scenario),
        (Prediction::TrajectorySet { trajs }, Binary) => {
            let timing = t1(trajs, input, ctx.scenario)?;
            Ok(Prediction::Binary { a_pred: timing.a_pred().expect("timing has a_pred") })
        }
        _ => unreachable!("all form pairs covered"),
    }
}
