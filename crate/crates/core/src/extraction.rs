//! Scenario-independent extraction of prediction samples from scenes.
//!
//! Per scene: characteristic times (`t_S`, `t_C`, `t_A`, decision `a`),
//! the critical time `t_crit`, the prediction time `t_0` chosen by a
//! [`T0Policy`], and the input/output windows around `t_0`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Position;
use crate::scalar::{ceil_tolerant, Real};
use crate::scenario::ScenarioDefinition;
use crate::scene::{AgentRole, DomainInfo, Geometry, Scene, ScenarioKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicTimes<T> {
    pub t_s: T,
    pub t_c: T,
    pub t_a: T,
    pub t_crit: T,
    /// Gap accepted (`t_A < t_C`).
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// Neither agent ever entered the contested space.
    NoDecisionObserved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    /// The estimated gap never reached the requested size.
    NoGapOfRequestedSize,
    /// `t_S <= t_0 < min(t_A, t_crit)` does not hold.
    OutsidePredictionWindow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimesOutcome<T> {
    Times(CharacteristicTimes<T>),
    Excluded(ExclusionReason),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum T0Outcome<T> {
    Selected(T),
    Rejected(RejectionReason),
}

/// How the prediction time `t_0` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum T0Policy<T> {
    /// `t_0 = t_S`, when the gap first opens.
    Initial,
    /// First time the estimated remaining gap equals `delta_t`.
    FixedGap { delta_t: T },
    /// `t_0 = t_crit - t_epsilon`, the last useful prediction.
    Critical { t_epsilon: T },
}

impl<T: Real> T0Policy<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            T0Policy::Initial => Ok(()),
            T0Policy::FixedGap { delta_t } if delta_t > T::zero() => Ok(()),
            T0Policy::Critical { t_epsilon } if t_epsilon > T::zero() => Ok(()),
            _ => Err(Error::InvalidArgument(format!("invalid t0 policy {self:?}"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            T0Policy::Initial => "initial".to_owned(),
            T0Policy::FixedGap { delta_t } => format!("fixed_gap({delta_t})"),
            T0Policy::Critical { t_epsilon } => format!("critical({t_epsilon})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionParams<T> {
    pub policy: T0Policy<T>,
    /// Number of input time steps `n_I` (at least 2, so velocities exist).
    pub n_inputs: usize,
    /// Time step `δt` of the input and output windows.
    pub step: T,
    /// Calculation allowance `t_ε` used in the `t_A` and `t_crit` fallbacks.
    pub t_epsilon: T,
}

impl<T: Real> ExtractionParams<T> {
    pub fn new(policy: T0Policy<T>, n_inputs: usize, step: T) -> Self {
        Self {
            policy,
            n_inputs,
            step,
            t_epsilon: T::half(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if self.n_inputs < 2 {
            return Err(Error::InvalidArgument("n_inputs must be at least 2".into()));
        }
        if !(self.step > T::zero()) || !(self.t_epsilon > T::zero()) {
            return Err(Error::InvalidArgument("step and t_epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Positions of one agent over the input window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentWindow<T> {
    pub agent_id: String,
    pub role: AgentRole,
    pub positions: Vec<Position<T>>,
}

/// Everything a model may see when predicting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleInput<T: Real> {
    pub scene_id: String,
    pub scenario_kind: ScenarioKind,
    pub geometry: Geometry<T>,
    pub domain_info: DomainInfo,
    pub t_0: T,
    pub t_s: T,
    /// `T_I`, ending at `t_0` with spacing `δt`.
    pub input_times: Vec<T>,
    /// Ego first, target second, then other agents.
    pub agents: Vec<AgentWindow<T>>,
    /// `T_O`, the timestamps a trajectory prediction must cover.
    pub output_times: Vec<T>,
    /// `t̲_C(t_0) - t_0`.
    pub gap_at_t0: T,
    /// Target distance to the contested space at `t_0`.
    pub target_distance: T,
    /// `Δt_D(t_0)`.
    pub safety_margin: T,
}

impl<T: Real> SampleInput<T> {
    pub fn ego(&self) -> &AgentWindow<T> {
        &self.agents[0]
    }

    pub fn target(&self) -> &AgentWindow<T> {
        &self.agents[1]
    }

    pub fn step(&self) -> T {
        let n = self.input_times.len();
        self.input_times[n - 1] - self.input_times[n - 2]
    }

    /// Target position at `t_0`.
    pub fn target_anchor(&self) -> Position<T> {
        *self.target().positions.last().expect("non-empty input window")
    }

    pub fn horizon(&self) -> usize {
        self.output_times.len()
    }
}

/// Ground truth a model must never see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutput<T> {
    /// Target positions at `T_O`.
    pub target_future: Vec<Position<T>>,
    pub accepted: bool,
    pub t_a: T,
    pub t_c: T,
    pub t_crit: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample<T: Real> {
    pub input: SampleInput<T>,
    pub output: SampleOutput<T>,
}

impl<T: Real> Sample<T> {
    /// Checks the prediction-window bound and label consistency.
    pub fn check_invariants(&self) -> Result<()> {
        let (i, o) = (&self.input, &self.output);
        let fail = |why: String| Err(Error::malformed(&i.scene_id, why));
        if !(i.t_s <= i.t_0 && i.t_0 < o.t_a.min(o.t_crit)) {
            return fail(format!(
                "t_S <= t_0 < min(t_A, t_crit) violated: t_S={} t_0={} t_A={} t_crit={}",
                i.t_s, i.t_0, o.t_a, o.t_crit
            ));
        }
        if o.accepted != (o.t_a < o.t_c) {
            return fail("label inconsistent with t_A < t_C".into());
        }
        if o.target_future.len() != i.output_times.len() || i.output_times.is_empty() {
            return fail("output window length mismatch".into());
        }
        if i.agents.len() < 2 || i.agents.iter().any(|a| a.positions.len() != i.input_times.len()) {
            return fail("input window length mismatch".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub scenes: usize,
    pub retained: usize,
    pub excluded: BTreeMap<ExclusionReason, usize>,
    pub rejected: BTreeMap<RejectionReason, usize>,
    /// `(scene_id, message)` for scenes that failed with an error.
    pub errors: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T: Real> {
    pub samples: Vec<Sample<T>>,
    /// Hash of the extraction configuration and the scene ids.
    pub provenance: String,
    pub stats: ExtractionStats,
}

impl<T: Real> Dataset<T> {
    /// Builds a dataset, refusing samples that break the extraction invariants.
    pub fn new(samples: Vec<Sample<T>>, provenance: String, stats: ExtractionStats) -> Result<Self> {
        for s in &samples {
            s.check_invariants()?;
        }
        Ok(Self {
            samples,
            provenance,
            stats,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Vec<&Sample<T>> {
        indices.iter().map(|&i| &self.samples[i]).collect()
    }
}

/// Characteristic times from conditions sampled on the native grid.
pub fn extract_characteristic_times<T: Real>(
    scene: &Scene<T>,
    scenario: &dyn ScenarioDefinition<T>,
    t_epsilon: T,
) -> Result<TimesOutcome<T>> {
    let grid = scene.grid();
    let mut last_blocked = None;
    let mut first_ego = None;
    let mut first_target = None;
    for &t in grid {
        let c = scenario.conditions(scene, t)?;
        if c.c_s {
            last_blocked = Some(t);
        }
        if c.c_c && first_ego.is_none() {
            first_ego = Some(t);
        }
        if c.c_a && first_target.is_none() {
            first_target = Some(t);
        }
    }
    if first_ego.is_none() && first_target.is_none() {
        return Ok(TimesOutcome::Excluded(ExclusionReason::NoDecisionObserved));
    }
    let t_s = last_blocked.unwrap_or_else(|| scene.start());
    let t_c = match first_ego {
        Some(t) => t,
        None => scenario.t_underline_c(scene, scene.end())?,
    };
    let t_a = first_target.unwrap_or_else(|| scene.end() + t_epsilon);
    let mut times = CharacteristicTimes {
        t_s,
        t_c,
        t_a,
        t_crit: T::nan(),
        accepted: t_a < t_c,
    };
    times.t_crit = compute_t_crit(scene, &times, scenario, t_epsilon)?;
    Ok(TimesOutcome::Times(times))
}

/// Remaining safety margin `Δt_D(t) = t̲_C(t) - t - t_brake(t)`.
pub fn safety_margin<T: Real>(scene: &Scene<T>, scenario: &dyn ScenarioDefinition<T>, t: T) -> Result<T> {
    Ok(scenario.t_underline_c(scene, t)? - t - scenario.t_brake(scene, t)?)
}

/// Last time the ego can still brake comfortably; uses `t_S` and `t_A` of
/// `times` (its `t_crit` field is ignored).
pub fn compute_t_crit<T: Real>(
    scene: &Scene<T>,
    times: &CharacteristicTimes<T>,
    scenario: &dyn ScenarioDefinition<T>,
    t_epsilon: T,
) -> Result<T> {
    let mut prev_t = times.t_s;
    let mut prev_d = safety_margin(scene, scenario, times.t_s)?;
    if prev_d <= T::zero() {
        return Ok(times.t_s);
    }
    for &t in scene
        .grid()
        .iter()
        .skip_while(|&&t| t <= times.t_s)
        .take_while(|&&t| t < times.t_a)
    {
        let d = safety_margin(scene, scenario, t)?;
        if d <= T::zero() {
            return Ok(prev_t + (t - prev_t) * prev_d / (prev_d - d));
        }
        prev_t = t;
        prev_d = d;
    }
    Ok(times.t_a + t_epsilon)
}

/// Prediction time for `policy`, or the reason the scene is rejected.
pub fn select_t0<T: Real>(
    policy: &T0Policy<T>,
    scene: &Scene<T>,
    times: &CharacteristicTimes<T>,
    scenario: &dyn ScenarioDefinition<T>,
) -> Result<T0Outcome<T>> {
    let t_0 = match *policy {
        T0Policy::Initial => times.t_s,
        T0Policy::FixedGap { delta_t } => match first_gap_of_size(scene, scenario, delta_t)? {
            Some(t) => t,
            None => return Ok(T0Outcome::Rejected(RejectionReason::NoGapOfRequestedSize)),
        },
        // gaps accepted before t_crit have no last useful prediction
        T0Policy::Critical { .. } if times.t_a < times.t_crit => {
            return Ok(T0Outcome::Rejected(RejectionReason::OutsidePredictionWindow))
        }
        T0Policy::Critical { t_epsilon } => times.t_crit - t_epsilon,
    };
    if times.t_s <= t_0 && t_0 < times.t_a.min(times.t_crit) {
        Ok(T0Outcome::Selected(t_0))
    } else {
        Ok(T0Outcome::Rejected(RejectionReason::OutsidePredictionWindow))
    }
}

/// `min { t | t̲_C(t) - t = delta_t }` on the native grid, refined by linear
/// interpolation. Crossings that involve a parked-ego horizon value are
/// discontinuities, not solutions, and are skipped.
fn first_gap_of_size<T: Real>(
    scene: &Scene<T>,
    scenario: &dyn ScenarioDefinition<T>,
    delta_t: T,
) -> Result<Option<T>> {
    let clamp = scenario.params().horizon * T::half();
    let mut prev: Option<(T, T)> = None;
    for &t in scene.grid() {
        let g = scenario.t_underline_c(scene, t)? - t - delta_t;
        if g == T::zero() {
            return Ok(Some(t));
        }
        if let Some((pt, pg)) = prev {
            let continuous = pg + delta_t < clamp && g + delta_t < clamp;
            if continuous && (pg > T::zero()) != (g > T::zero()) {
                return Ok(Some(pt + (t - pt) * pg / (pg - g)));
            }
        }
        prev = Some((t, g));
    }
    Ok(None)
}

/// Input and output windows around `t_0`.
pub fn build_sample<T: Real>(
    scene: &Scene<T>,
    t_0: T,
    n_inputs: usize,
    step: T,
    times: &CharacteristicTimes<T>,
    scenario: &dyn ScenarioDefinition<T>,
) -> Result<Sample<T>> {
    if !scene.contains_time(t_0) {
        return Err(Error::malformed(
            &scene.scene_id,
            format!("t_0 = {t_0} outside recorded interval"),
        ));
    }
    if n_inputs == 0 || !(step > T::zero()) {
        return Err(Error::InvalidArgument("need n_inputs >= 1 and step > 0".into()));
    }
    let n_out = ceil_tolerant((times.t_c - t_0) / step).max(1);
    let input_times: Vec<T> = (0..n_inputs)
        .map(|k| t_0 - T::from_usize_lossy(n_inputs - 1 - k) * step)
        .collect();
    let output_times: Vec<T> = (1..=n_out)
        .map(|k| t_0 + T::from_usize_lossy(k) * step)
        .collect();

    let ordered = std::iter::once(scene.ego())
        .chain(std::iter::once(scene.target()))
        .chain(scene.others());
    let agents = ordered
        .map(|track| AgentWindow {
            agent_id: track.agent_id.clone(),
            role: track.role,
            positions: input_times.iter().map(|&t| track.position_at(t)).collect(),
        })
        .collect();
    let target_future = output_times
        .iter()
        .map(|&t| scene.target().position_at(t))
        .collect();

    let space = scenario.contested_space(scene, t_0)?;
    let gap_at_t0 = scenario.t_underline_c(scene, t_0)? - t_0;
    let sample = Sample {
        input: SampleInput {
            scene_id: scene.scene_id.clone(),
            scenario_kind: scene.scenario_kind,
            geometry: scene.geometry.clone(),
            domain_info: scene.domain_info.clone(),
            t_0,
            t_s: times.t_s,
            input_times,
            agents,
            output_times,
            gap_at_t0,
            target_distance: space.region.distance(scene.target().position_at(t_0)),
            safety_margin: gap_at_t0 - scenario.t_brake(scene, t_0)?,
        },
        output: SampleOutput {
            target_future,
            accepted: times.accepted,
            t_a: times.t_a,
            t_c: times.t_c,
            t_crit: times.t_crit,
        },
    };
    Ok(sample)
}

/// Result of running the full per-scene pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum SceneOutcome<T: Real> {
    Sample(Box<Sample<T>>),
    Excluded(ExclusionReason),
    Rejected(RejectionReason),
}

pub fn extract_scene<T: Real>(
    scene: &Scene<T>,
    params: &ExtractionParams<T>,
    scenario: &dyn ScenarioDefinition<T>,
) -> Result<SceneOutcome<T>> {
    let times = match extract_characteristic_times(scene, scenario, params.t_epsilon)? {
        TimesOutcome::Times(times) => times,
        TimesOutcome::Excluded(why) => return Ok(SceneOutcome::Excluded(why)),
    };
    let t_0 = match select_t0(&params.policy, scene, &times, scenario)? {
        T0Outcome::Selected(t) => t,
        T0Outcome::Rejected(why) => return Ok(SceneOutcome::Rejected(why)),
    };
    let sample = build_sample(scene, t_0, params.n_inputs, params.step, &times, scenario)?;
    sample.check_invariants()?;
    Ok(SceneOutcome::Sample(Box::new(sample)))
}

/// Runs extraction over a batch. Scenes are processed in `scene_id` order;
/// per-scene errors are recorded in the stats instead of aborting.
pub fn extract_dataset<T: Real>(
    scenes: &[Scene<T>],
    params: &ExtractionParams<T>,
    scenario: &dyn ScenarioDefinition<T>,
) -> Result<Dataset<T>> {
    params.validate()?;
    scenario.params().validate()?;
    if let Some(first) = scenes.first() {
        if let Some(odd) = scenes.iter().find(|s| s.scenario_kind != first.scenario_kind) {
            return Err(Error::InvalidArgument(format!(
                "mixed scenario kinds: {} and {}",
                first.scenario_kind, odd.scenario_kind
            )));
        }
    }
    let mut order: Vec<&Scene<T>> = scenes.iter().collect();
    order.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));

    let outcomes: Vec<Result<SceneOutcome<T>>> = order
        .par_iter()
        .map(|scene| extract_scene(scene, params, scenario))
        .collect();

    let mut stats = ExtractionStats {
        scenes: scenes.len(),
        ..ExtractionStats::default()
    };
    let mut samples = Vec::new();
    for (scene, outcome) in order.iter().zip(outcomes) {
        match outcome {
            Ok(SceneOutcome::Sample(s)) => samples.push(*s),
            Ok(SceneOutcome::Excluded(why)) => *stats.excluded.entry(why).or_default() += 1,
            Ok(SceneOutcome::Rejected(why)) => *stats.rejected.entry(why).or_default() += 1,
            Err(e) => stats.errors.push((scene.scene_id.clone(), e.to_string())),
        }
    }
    stats.retained = samples.len();

    let mut hasher = Sha256::new();
    hasher.update(format!("{params:?}|{:?}", scenario.params()));
    for scene in &order {
        hasher.update(scene.scene_id.as_bytes());
        hasher.update([0u8]);
    }
    let provenance = hex::encode(hasher.finalize());
    Dataset::new(samples, provenance, stats)
}
