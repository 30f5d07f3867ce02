//! Deterministic kinematic generator of labeled gap-acceptance scenes.
//!
//! Intersection: the ego drives along +x on `y = 0`, the target along +y on
//! `x = 0`, and the conflict zone is the 5 m square around the origin.
//! Lane change: the ego drives along +x in the lane `0 <= y <= 3.5`, the
//! target starts in the lane below (centre `y = -1.75`) and merges.
//!
//! Every motion is a piecewise-constant-acceleration profile, so sampled
//! positions are exact. The target decides once, when the gap opens, with
//! probability `sigmoid((gap - threshold) / scale)` of accepting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Position};
use crate::scalar::Real;
use crate::scene::{AgentRole, AgentTrack, DomainInfo, Geometry, Scene, ScenarioKind, TrackSample};

/// Half side of the intersection conflict square.
pub const ZONE_HALF: f64 = 2.5;
pub const LANE_WIDTH: f64 = 3.5;
/// Longitudinal half length of the lane-change contested space.
pub const LANE_MARGIN: f64 = 5.0;
/// Footprint radius assumed by the generator; matches the default
/// scenario inflation radius.
pub const FOOTPRINT: f64 = 1.0;
/// Distance a rejecting target keeps to the contested space when stopped.
pub const STOP_GAP: f64 = 0.5;
/// Speed targets settle at after starting to cross.
pub const CRUISE_SPEED: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.min.is_finite() && self.max.is_finite() && self.min <= self.max {
            Ok(())
        } else {
            Err(Error::InfeasibleConfig(format!("{what} range {self:?} is empty or not finite")))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..self.max)
        }
    }
}

/// Acceptance probability as a logistic function of the initial gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    /// Gap (s) accepted with probability one half.
    pub threshold: f64,
    /// Logistic scale (s); 0 makes the rule a hard step.
    pub scale: f64,
}

impl DecisionRule {
    pub fn probability(&self, gap: f64) -> f64 {
        if self.scale == 0.0 {
            return match gap.partial_cmp(&self.threshold) {
                Some(std::cmp::Ordering::Greater) => 1.0,
                Some(std::cmp::Ordering::Less) => 0.0,
                _ => 0.5,
            };
        }
        1.0 / (1.0 + (-(gap - self.threshold) / self.scale).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub scenario_kind: ScenarioKind,
    pub n_scenes: usize,
    pub seed: u64,
    pub ego_speed: Range,
    /// Gap duration offered when the gap opens.
    pub gap: Range,
    /// Intersection: target distance to the conflict square when the gap
    /// opens.
    pub target_distance: Range,
    /// Intersection: target speed when the gap opens (ignored if idle).
    pub target_speed: Range,
    /// Lane change: how much slower than the ego the target drives.
    pub speed_deficit: Range,
    /// Preferred acceleration used when a target starts or merges.
    pub nominal_accel: Range,
    pub accel_max: f64,
    /// Delay between the ego clearing and a rejecting target setting off.
    pub reaction: Range,
    pub decision: DecisionRule,
    /// Accepted gaps are used at least this long before the ego arrives.
    pub crossing_margin: f64,
    /// Target waits at standstill when the gap opens.
    pub idle_start: bool,
    /// Intersection: a lead vehicle blocks the gap until this many seconds
    /// after the recording starts.
    pub lead_vehicle: Option<Range>,
    pub locations: Vec<String>,
    pub sample_rate_hz: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            scenario_kind: ScenarioKind::Intersection,
            n_scenes: 100,
            seed: 0,
            ego_speed: Range::new(8.0, 14.0),
            gap: Range::new(1.0, 8.0),
            target_distance: Range::new(3.0, 15.0),
            target_speed: Range::new(0.0, 8.0),
            speed_deficit: Range::new(2.0, 5.0),
            nominal_accel: Range::new(1.0, 2.5),
            accel_max: 3.0,
            reaction: Range::new(0.5, 1.5),
            decision: DecisionRule { threshold: 4.0, scale: 0.5 },
            crossing_margin: 1.0,
            idle_start: false,
            lead_vehicle: None,
            locations: vec!["north".into(), "south".into()],
            sample_rate_hz: 10.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::InfeasibleConfig(why));
        for (name, r) in [
            ("ego_speed", self.ego_speed),
            ("gap", self.gap),
            ("target_distance", self.target_distance),
            ("target_speed", self.target_speed),
            ("speed_deficit", self.speed_deficit),
            ("nominal_accel", self.nominal_accel),
            ("reaction", self.reaction),
        ] {
            r.validate(name)?;
        }
        if let Some(lead) = self.lead_vehicle {
            lead.validate("lead_vehicle")?;
            if self.scenario_kind != ScenarioKind::Intersection || lead.min < 0.0 {
                return bad("lead vehicles need an intersection and a non-negative delay".into());
            }
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad(format!("sample rate must be positive, got {}", self.sample_rate_hz));
        }
        if self.ego_speed.min <= 0.0 || self.gap.min <= 0.0 {
            return bad("ego speed and gap must be positive".into());
        }
        if self.target_speed.min < 0.0 || self.reaction.min < 0.0 || self.speed_deficit.min <= 0.0 {
            return bad("target speed and reaction must be non-negative, speed deficit positive".into());
        }
        if !(self.accel_max > 0.0) || self.nominal_accel.min <= 0.0 || self.nominal_accel.max > self.accel_max {
            return bad(format!(
                "nominal acceleration {:?} must lie in (0, {}]",
                self.nominal_accel, self.accel_max
            ));
        }
        if self.target_distance.min - FOOTPRINT <= STOP_GAP {
            return bad(format!(
                "target must start more than {} m from the conflict zone",
                FOOTPRINT + STOP_GAP
            ));
        }
        if self.gap.max <= self.crossing_margin || self.crossing_margin < 0.0 {
            return bad(format!(
                "no gap up to {} s leaves room for a {} s crossing margin",
                self.gap.max, self.crossing_margin
            ));
        }
        if self.decision.scale < 0.0 || !self.decision.threshold.is_finite() {
            return bad("decision scale must be non-negative".into());
        }
        if self.locations.is_empty() {
            return bad("at least one location tag is needed".into());
        }
        Ok(())
    }

    /// Mean acceptance probability of the decision rule over the gap range.
    pub fn expected_accept_rate(&self) -> f64 {
        let Range { min, max } = self.gap;
        if min == max {
            return self.decision.probability(min);
        }
        // composite Simpson rule
        let n = 10_000;
        let h = (max - min) / n as f64;
        let sum: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * self.decision.probability(min + i as f64 * h)
            })
            .sum();
        sum * h / 3.0 / (max - min)
    }
}

/// Generator-side labels, kept apart from the scenes handed to models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scene_id: String,
    pub accepted: bool,
    /// The sampled decision was "accept" but the crossing was infeasible.
    pub forced_reject: bool,
    pub gap: f64,
    pub t_s: f64,
    pub t_a: f64,
    pub t_c: f64,
}

#[derive(Debug, Clone)]
pub struct Generated<T: Real> {
    pub scenes: Vec<Scene<T>>,
    pub truth: Vec<GroundTruth>,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    t0: f64,
    s0: f64,
    v0: f64,
    a: f64,
}

/// One-dimensional motion with piecewise-constant acceleration. Before the
/// first segment the motion is extrapolated at the initial speed.
#[derive(Debug, Clone)]
struct Profile {
    segs: Vec<Segment>,
}

impl Profile {
    fn new(t0: f64, s0: f64, v0: f64) -> Self {
        Self { segs: vec![Segment { t0, s0, v0, a: 0.0 }] }
    }

    fn end_state(&self, t: f64) -> (f64, f64) {
        let s = self.segs.last().expect("profile has a segment");
        let dt = t - s.t0;
        (s.s0 + s.v0 * dt + 0.5 * s.a * dt * dt, s.v0 + s.a * dt)
    }

    /// Switches to acceleration `a` at time `t`.
    fn change(&mut self, t: f64, a: f64) {
        let (s0, v0) = self.end_state(t);
        let last = self.segs.last_mut().expect("profile has a segment");
        if last.t0 == t {
            last.a = a;
        } else {
            self.segs.push(Segment { t0: t, s0, v0, a });
        }
    }

    fn segment_at(&self, t: f64) -> &Segment {
        let i = self.segs.partition_point(|s| s.t0 <= t);
        &self.segs[i.saturating_sub(1)]
    }

    fn position(&self, t: f64) -> f64 {
        let first = &self.segs[0];
        if t < first.t0 {
            return first.s0 + first.v0 * (t - first.t0);
        }
        let s = self.segment_at(t);
        let dt = t - s.t0;
        s.s0 + s.v0 * dt + 0.5 * s.a * dt * dt
    }

    /// First time at or after the profile start that position reaches `target`.
    fn time_at(&self, target: f64) -> Option<f64> {
        for (i, s) in self.segs.iter().enumerate() {
            let end = self.segs.get(i + 1).map_or(f64::INFINITY, |n| n.t0);
            let ds = target - s.s0;
            if ds <= 0.0 {
                return Some(s.t0);
            }
            let dt = if s.a == 0.0 {
                if s.v0 > 0.0 { ds / s.v0 } else { f64::INFINITY }
            } else {
                let disc = s.v0 * s.v0 + 2.0 * s.a * ds;
                if disc < 0.0 {
                    f64::INFINITY
                } else {
                    (-s.v0 + disc.sqrt()) / s.a
                }
            };
            if dt >= 0.0 && s.t0 + dt <= end {
                return Some(s.t0 + dt);
            }
        }
        None
    }
}

struct Plan {
    ego: Box<dyn Fn(f64) -> Position<f64> + Send + Sync>,
    target: Box<dyn Fn(f64) -> Position<f64> + Send + Sync>,
    lead: Option<Box<dyn Fn(f64) -> Position<f64> + Send + Sync>>,
    geometry: Geometry<f64>,
    accepted: bool,
    forced_reject: bool,
    t_s: f64,
    t_a: f64,
    t_c: f64,
    end: f64,
}

fn accept_accel(nominal: f64, distance: f64, v0: f64, deadline: f64) -> f64 {
    let required = 2.0 * (distance - v0 * deadline) / (deadline * deadline);
    nominal.max(required)
}

fn plan_intersection<R: Rng>(cfg: &GeneratorConfig, rng: &mut R, gap: f64, wants: bool) -> Plan {
    let dt = 1.0 / cfg.sample_rate_hz;
    let v_e = cfg.ego_speed.sample(rng);
    let t_s = match cfg.lead_vehicle {
        Some(r) => (r.sample(rng) * cfg.sample_rate_hz).round() * dt,
        None => 0.0,
    };
    let touch = ZONE_HALF + FOOTPRINT;
    let t_c = t_s + gap;
    let ego_x0 = -touch - v_e * t_c;

    let d = cfg.target_distance.sample(rng);
    let d_touch = d - FOOTPRINT;
    let v0 = if cfg.idle_start {
        0.0
    } else {
        let stoppable = (2.0 * cfg.accel_max * (d_touch - STOP_GAP)).sqrt();
        let r = Range::new(cfg.target_speed.min.min(stoppable), cfg.target_speed.max.min(stoppable));
        r.sample(rng)
    };
    let nominal = cfg.nominal_accel.sample(rng);
    let reaction = cfg.reaction.sample(rng);

    let deadline = gap - cfg.crossing_margin;
    let accel = accept_accel(nominal, d_touch, v0, deadline.max(f64::MIN_POSITIVE));
    let feasible = deadline > 0.0 && accel <= cfg.accel_max;
    let accepted = wants && feasible;
    // the target starts `d` from the zone edge when the gap opens
    let y_start = -ZONE_HALF - d;
    let mut profile = Profile::new(t_s, 0.0, v0);
    if accepted {
        profile.change(t_s, accel);
        let reach = ((CRUISE_SPEED - v0) / accel).max(0.0);
        let touch_time = profile.time_at(d_touch).expect("accelerating target arrives") - t_s;
        profile.change(t_s + reach.max(touch_time), 0.0);
    } else {
        let mut t_stop = t_s;
        if v0 > 0.0 {
            let brake = v0 * v0 / (2.0 * (d_touch - STOP_GAP));
            t_stop = t_s + v0 / brake;
            profile.change(t_s, -brake);
            profile.change(t_stop, 0.0);
        }
        let t_clear = t_c + 2.0 * touch / v_e;
        let t_go = t_stop.max(t_clear) + reaction;
        profile.change(t_go, nominal);
        let (_, v_go) = profile.end_state(t_go);
        profile.change(t_go + (CRUISE_SPEED - v_go) / nominal, 0.0);
    }
    let t_a = profile.time_at(d_touch).expect("target eventually crosses");
    let end = t_a.max(t_c) + 1.5;

    let lead = cfg.lead_vehicle.map(|_| {
        // leaves the blocked corridor right after t_S
        let x_at_ts = touch - 1e-6;
        Box::new(move |t: f64| Position::new(x_at_ts + v_e * (t - t_s), 0.0)) as Box<dyn Fn(f64) -> Position<f64> + Send + Sync>
    });
    let geometry = Geometry::ConflictZone {
        polygon: ConvexPolygon::rectangle(Position::new(-ZONE_HALF, -ZONE_HALF), Position::new(ZONE_HALF, ZONE_HALF))
            .expect("valid square"),
        path_half_width: None,
    };
    Plan {
        ego: Box::new(move |t| Position::new(ego_x0 + v_e * t, 0.0)),
        target: Box::new(move |t| Position::new(0.0, y_start + profile.position(t))),
        lead,
        geometry,
        accepted,
        forced_reject: wants && !accepted,
        t_s,
        t_a,
        t_c,
        end,
    }
}

fn plan_lane_change<R: Rng>(cfg: &GeneratorConfig, rng: &mut R, gap: f64, wants: bool) -> Plan {
    let dt = 1.0 / cfg.sample_rate_hz;
    let v_e = cfg.ego_speed.sample(rng);
    let v_t = (v_e - cfg.speed_deficit.sample(rng)).max(0.0);
    let nominal = cfg.nominal_accel.sample(rng);
    let reaction = cfg.reaction.sample(rng);
    let closing = v_e - v_t;
    let ego_x0 = 0.0;
    // moving contested space starts `gap · v_E` ahead of the ego's footprint
    let x_t0 = ego_x0 + gap * v_e + LANE_MARGIN + FOOTPRINT;
    let lane_centre = LANE_WIDTH / 2.0;
    let start_y = -LANE_WIDTH / 2.0;
    let touch_shift = start_y.abs() - FOOTPRINT;

    let deadline = gap - cfg.crossing_margin;
    let lat = nominal.max(2.0 * touch_shift / (deadline * deadline).max(f64::MIN_POSITIVE));
    let feasible = deadline > 0.0 && lat <= cfg.accel_max;
    let accepted = wants && feasible;
    let (t_start, lat) = if accepted {
        (0.0, lat)
    } else {
        // wait until the ego is fully past the target, then merge behind it
        let t_pass = (x_t0 + LANE_MARGIN + FOOTPRINT - ego_x0) / closing;
        (t_pass + reaction, nominal)
    };
    let half = (LANE_WIDTH / lat).sqrt();
    let mut lateral = Profile::new(t_start, 0.0, 0.0);
    lateral.change(t_start, lat);
    lateral.change(t_start + half, -lat);
    lateral.change(t_start + 2.0 * half, 0.0);
    let t_a = lateral.time_at(touch_shift).expect("merge reaches the lane");

    let target_x = move |t: f64| x_t0 + v_t * t;
    let t_c = if accepted {
        // contested space freezes at the first sample inside the lane
        let t_freeze = (t_a * cfg.sample_rate_hz - 1e-9).ceil() * dt;
        (target_x(t_freeze) - LANE_MARGIN - FOOTPRINT - ego_x0) / v_e
    } else {
        (x_t0 - LANE_MARGIN - FOOTPRINT - ego_x0) / closing
    };
    let end = t_a.max(t_c) + 1.5;
    Plan {
        ego: Box::new(move |t| Position::new(ego_x0 + v_e * t, lane_centre)),
        target: Box::new(move |t| Position::new(target_x(t), start_y + lateral.position(t))),
        lead: None,
        geometry: Geometry::LaneChange { lane_y_min: 0.0, lane_y_max: LANE_WIDTH, margin: LANE_MARGIN },
        accepted,
        forced_reject: wants && !accepted,
        t_s: 0.0,
        t_a,
        t_c,
        end,
    }
}

fn scene_id(kind: ScenarioKind, index: usize) -> String {
    let prefix = match kind {
        ScenarioKind::Intersection => "int",
        ScenarioKind::LaneChange => "lc",
        ScenarioKind::Roundabout => "rb",
    };
    format!("{prefix}-{index:06}")
}

fn generate_one<T: Real>(cfg: &GeneratorConfig, index: usize) -> Result<(Scene<T>, GroundTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let gap = cfg.gap.sample(&mut rng);
    let wants = rng.random::<f64>() < cfg.decision.probability(gap);
    let location = cfg.locations[rng.random_range(0..cfg.locations.len())].clone();
    let plan = match cfg.scenario_kind {
        ScenarioKind::Intersection => plan_intersection(cfg, &mut rng, gap, wants),
        ScenarioKind::LaneChange => plan_lane_change(cfg, &mut rng, gap, wants),
        ScenarioKind::Roundabout => {
            return Err(Error::InfeasibleConfig("the generator has no roundabout layout".into()))
        }
    };

    let n = (plan.end * cfg.sample_rate_hz).ceil() as usize;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 / cfg.sample_rate_hz).collect();
    let track = |id: &str, role: AgentRole, f: &dyn Fn(f64) -> Position<f64>| {
        let samples = times
            .iter()
            .map(|&t| TrackSample { t: T::lit(t), position: f(t).cast() })
            .collect();
        AgentTrack::new(id, role, samples)
    };
    let mut tracks = vec![track("ego", AgentRole::Ego, &plan.ego)?, track("target", AgentRole::Target, &plan.target)?];
    if let Some(lead) = &plan.lead {
        tracks.push(track("lead", AgentRole::Other, lead)?);
    }
    let mut info = DomainInfo::new();
    info.insert("location".into(), location);
    info.insert("source".into(), "synthgen".into());
    let geometry = match plan.geometry {
        Geometry::ConflictZone { polygon, path_half_width } => Geometry::ConflictZone {
            polygon: ConvexPolygon::new(polygon.vertices().iter().map(|p| p.cast()).collect())?,
            path_half_width: path_half_width.map(T::lit),
        },
        Geometry::LaneChange { lane_y_min, lane_y_max, margin } => Geometry::LaneChange {
            lane_y_min: T::lit(lane_y_min),
            lane_y_max: T::lit(lane_y_max),
            margin: T::lit(margin),
        },
    };
    let id = scene_id(cfg.scenario_kind, index);
    let scene = Scene::new(id.clone(), cfg.scenario_kind, info, geometry, tracks)?;
    let truth = GroundTruth {
        scene_id: id,
        accepted: plan.accepted,
        forced_reject: plan.forced_reject,
        gap,
        t_s: plan.t_s,
        t_a: plan.t_a,
        t_c: plan.t_c,
    };
    Ok((scene, truth))
}

/// Generates `n_scenes` scenes. Scene `i` depends only on `(seed, i)`.
pub fn generate<T: Real>(cfg: &GeneratorConfig) -> Result<Generated<T>> {
    cfg.validate()?;
    let results: Vec<Result<(Scene<T>, GroundTruth)>> =
        (0..cfg.n_scenes).into_par_iter().map(|i| generate_one(cfg, i)).collect();
    let mut scenes = Vec::with_capacity(cfg.n_scenes);
    let mut truth = Vec::with_capacity(cfg.n_scenes);
    for r in results {
        let (s, g) = r?;
        scenes.push(s);
        truth.push(g);
    }
    Ok(Generated { scenes, truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::{extract_characteristic_times, TimesOutcome};
    use crate::scenario::{scenario_for, ScenarioParams};

    #[test]
    fn profile_is_exact_integral() {
        let mut p = Profile::new(0.0, 0.0, 2.0);
        p.change(1.0, 3.0);
        p.change(3.0, -1.0);
        // 0..1: 2 m; 1..3: 2*2 + 0.5*3*4 = 10 m, v = 8; 3..4: 8 - 0.5 = 7.5 m
        assert_eq!(p.position(1.0), 2.0);
        assert_eq!(p.position(3.0), 12.0);
        assert_eq!(p.position(4.0), 19.5);
        assert_eq!(p.position(-1.0), -2.0);
        let t = p.time_at(12.0).unwrap();
        assert!((t - 3.0).abs() < 1e-12);
        let t = p.time_at(7.0).unwrap();
        assert!((p.position(t) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn decision_rule_limits() {
        let step = DecisionRule { threshold: 4.0, scale: 0.0 };
        assert_eq!(step.probability(4.1), 1.0);
        assert_eq!(step.probability(3.9), 0.0);
        let soft = DecisionRule { threshold: 4.0, scale: 0.5 };
        assert_eq!(soft.probability(4.0), 0.5);
        let cfg = GeneratorConfig { gap: Range::new(2.0, 6.0), ..Default::default() };
        // symmetric around the threshold
        assert!((cfg.expected_accept_rate() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn step_rule_splits_at_threshold() {
        let cfg = GeneratorConfig {
            n_scenes: 200,
            seed: 5,
            decision: DecisionRule { threshold: 4.0, scale: 0.0 },
            ..Default::default()
        };
        let g = generate::<f64>(&cfg).unwrap();
        for t in &g.truth {
            assert_eq!(t.accepted, t.gap > 4.0, "{t:?}");
        }
    }

    #[test]
    fn deterministic_per_seed_and_index() {
        let cfg = GeneratorConfig { n_scenes: 20, seed: 9, ..Default::default() };
        let a = generate::<f64>(&cfg).unwrap();
        let b = generate::<f64>(&cfg).unwrap();
        assert_eq!(a.scenes, b.scenes);
        let longer = generate::<f64>(&GeneratorConfig { n_scenes: 25, ..cfg.clone() }).unwrap();
        assert_eq!(&longer.scenes[..20], &a.scenes[..]);
        let other = generate::<f64>(&GeneratorConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(other.scenes, a.scenes);
    }

    #[test]
    fn truth_matches_extraction_intersection() {
        for (idle, lead) in [(false, None), (true, None), (false, Some(Range::new(1.0, 3.0)))] {
            let cfg = GeneratorConfig { n_scenes: 60, seed: 3, idle_start: idle, lead_vehicle: lead, ..Default::default() };
            let g = generate::<f64>(&cfg).unwrap();
            let sc = scenario_for(ScenarioKind::Intersection, ScenarioParams::default());
            for (scene, truth) in g.scenes.iter().zip(&g.truth) {
                let TimesOutcome::Times(times) = extract_characteristic_times(scene, sc.as_ref(), 0.5).unwrap() else {
                    panic!("excluded {}", truth.scene_id)
                };
                assert_eq!(times.accepted, truth.accepted, "{truth:?} {times:?}");
                assert!((times.t_c - truth.t_c).abs() <= 0.1 + 1e-9, "{truth:?} {times:?}");
                assert!((times.t_a - truth.t_a).abs() <= 0.1 + 1e-9, "{truth:?} {times:?}");
                assert!((times.t_s - truth.t_s).abs() <= 0.1 + 1e-9, "{truth:?} {times:?}");
            }
        }
    }

    #[test]
    fn truth_matches_extraction_lane_change() {
        let cfg = GeneratorConfig { scenario_kind: ScenarioKind::LaneChange, n_scenes: 40, seed: 4, ..Default::default() };
        let g = generate::<f64>(&cfg).unwrap();
        let sc = scenario_for(ScenarioKind::LaneChange, ScenarioParams::default());
        let mut both = [false; 2];
        for (scene, truth) in g.scenes.iter().zip(&g.truth) {
            let TimesOutcome::Times(times) = extract_characteristic_times(scene, sc.as_ref(), 0.5).unwrap() else {
                panic!("excluded {}", truth.scene_id)
            };
            both[truth.accepted as usize] = true;
            assert_eq!(times.accepted, truth.accepted, "{truth:?} {times:?}");
            assert!((times.t_a - truth.t_a).abs() <= 0.1 + 1e-9, "{truth:?} {times:?}");
            assert!((times.t_c - truth.t_c).abs() <= 0.1 + 1e-9, "{truth:?} {times:?}");
        }
        assert_eq!(both, [true, true]);
    }

    #[test]
    fn infeasible_configs_rejected() {
        let cases = [
            GeneratorConfig { gap: Range::new(0.5, 0.8), crossing_margin: 1.0, ..Default::default() },
            GeneratorConfig { target_distance: Range::new(1.0, 5.0), ..Default::default() },
            GeneratorConfig { sample_rate_hz: 0.0, ..Default::default() },
            GeneratorConfig { ego_speed: Range::new(5.0, 2.0), ..Default::default() },
            GeneratorConfig { nominal_accel: Range::new(1.0, 4.0), ..Default::default() },
            GeneratorConfig { scenario_kind: ScenarioKind::Roundabout, n_scenes: 1, ..Default::default() },
        ];
        for cfg in cases {
            assert!(matches!(generate::<f64>(&cfg), Err(Error::InfeasibleConfig(_))), "{cfg:?}");
        }
    }

    #[test]
    fn accept_rate_near_expectation() {
        let cfg = GeneratorConfig { n_scenes: 1000, seed: 1, ..Default::default() };
        let g = generate::<f64>(&cfg).unwrap();
        let rate = g.truth.iter().filter(|t| t.accepted).count() as f64 / 1000.0;
        assert!((rate - cfg.expected_accept_rate()).abs() < 0.05, "{rate} vs {}", cfg.expected_accept_rate());
    }
}
