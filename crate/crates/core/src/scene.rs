//! Recorded interactions: agent tracks plus declared scenario geometry.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Position};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Ego,
    Target,
    Other,
}

impl AgentRole {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Ego => "ego",
            AgentRole::Target => "target",
            AgentRole::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ego" => Some(AgentRole::Ego),
            "target" => Some(AgentRole::Target),
            "other" => Some(AgentRole::Other),
            _ => None,
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Intersection,
    LaneChange,
    Roundabout,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Intersection => "intersection",
            ScenarioKind::LaneChange => "lane_change",
            ScenarioKind::Roundabout => "roundabout",
        })
    }
}

/// Scenario layout declared alongside the trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Geometry<T: Real> {
    /// Fixed conflict region where the two paths cross (intersections,
    /// roundabout entries).
    ConflictZone {
        polygon: ConvexPolygon<T>,
        /// Half width of the ego's path corridor used to decide whether
        /// another vehicle is blocking it. Falls back to the scenario default.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path_half_width: Option<T>,
    },
    /// Ego lane is the strip `lane_y_min <= y <= lane_y_max`; traffic moves
    /// towards +x.
    LaneChange {
        lane_y_min: T,
        lane_y_max: T,
        /// Longitudinal half extent of the contested space around the target.
        margin: T,
    },
}

/// Opaque domain tags (recording location, subject id, ...).
pub type DomainInfo = BTreeMap<String, String>;

/// Canonical string form of the domain tags, used as a stratum key.
pub fn domain_key(info: &DomainInfo) -> String {
    info.iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample<T> {
    pub t: T,
    pub position: Position<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrack<T: Real> {
    pub agent_id: String,
    pub role: AgentRole,
    samples: Vec<TrackSample<T>>,
}

impl<T: Real> AgentTrack<T> {
    /// Builds a track; timestamps must be strictly increasing and finite.
    pub fn new(
        agent_id: impl Into<String>,
        role: AgentRole,
        samples: Vec<TrackSample<T>>,
    ) -> Result<Self> {
        let agent_id = agent_id.into();
        if samples.is_empty() {
            return Err(Error::InvalidArgument(format!("track {agent_id} is empty")));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.t.is_finite() || !s.position.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "track {agent_id}: non-finite sample at index {i}"
                )));
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(Error::InvalidArgument(format!(
                    "track {agent_id}: timestamps not strictly increasing at index {i}"
                )));
            }
        }
        Ok(Self {
            agent_id,
            role,
            samples,
        })
    }

    pub fn samples(&self) -> &[TrackSample<T>] {
        &self.samples
    }

    pub fn start(&self) -> T {
        self.samples[0].t
    }

    pub fn end(&self) -> T {
        self.samples[self.samples.len() - 1].t
    }

    pub fn covers(&self, t: T) -> bool {
        t >= self.start() && t <= self.end()
    }

    /// Index of the last sample at or before `t`.
    fn last_at_or_before(&self, t: T) -> Option<usize> {
        let idx = self.samples.partition_point(|s| s.t <= t);
        idx.checked_sub(1)
    }

    /// Linear interpolation inside the track, constant-velocity extrapolation
    /// from the first/last two samples outside it.
    pub fn position_at(&self, t: T) -> Position<T> {
        let s = &self.samples;
        if s.len() == 1 {
            return s[0].position;
        }
        let n = s.len();
        let (a, b) = if t <= s[0].t {
            (s[0], s[1])
        } else if t >= s[n - 1].t {
            (s[n - 2], s[n - 1])
        } else {
            let i = self.last_at_or_before(t).unwrap_or(0);
            if s[i].t == t {
                return s[i].position;
            }
            (s[i], s[i + 1])
        };
        let w = (t - a.t) / (b.t - a.t);
        a.position.lerp(b.position, w)
    }

    /// Velocity from the sample interval ending at or before `t` (backward
    /// difference); the first interval is used at the very start.
    pub fn velocity_at(&self, t: T) -> Position<T> {
        let s = &self.samples;
        if s.len() < 2 {
            return Position::zero();
        }
        let i = self.last_at_or_before(t).unwrap_or(0).clamp(1, s.len() - 1);
        let (a, b) = (s[i - 1], s[i]);
        (b.position - a.position) * (T::one() / (b.t - a.t))
    }

    fn clipped(&self, lo: T, hi: T) -> Option<Self> {
        let samples: Vec<_> = self
            .samples
            .iter()
            .copied()
            .filter(|s| s.t >= lo && s.t <= hi)
            .collect();
        (!samples.is_empty()).then(|| Self {
            agent_id: self.agent_id.clone(),
            role: self.role,
            samples,
        })
    }
}

/// One recorded interaction with exactly one ego and one target track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene<T: Real> {
    pub scene_id: String,
    pub scenario_kind: ScenarioKind,
    pub domain_info: DomainInfo,
    pub geometry: Geometry<T>,
    tracks: Vec<AgentTrack<T>>,
    ego: usize,
    target: usize,
    grid: Vec<T>,
}

impl<T: Real> Scene<T> {
    /// Validates roles and clips every track to the interval covered by both
    /// the ego and the target. The evaluation grid is the ego's native
    /// timestamps inside that interval.
    pub fn new(
        scene_id: impl Into<String>,
        scenario_kind: ScenarioKind,
        domain_info: DomainInfo,
        geometry: Geometry<T>,
        tracks: Vec<AgentTrack<T>>,
    ) -> Result<Self> {
        let scene_id = scene_id.into();
        let find = |role: AgentRole| -> Result<usize> {
            let mut it = tracks.iter().enumerate().filter(|(_, t)| t.role == role);
            let first = it
                .next()
                .ok_or_else(|| Error::malformed(&scene_id, format!("no {role} track")))?;
            if it.next().is_some() {
                return Err(Error::malformed(&scene_id, format!("more than one {role} track")));
            }
            Ok(first.0)
        };
        let ego_idx = find(AgentRole::Ego)?;
        let target_idx = find(AgentRole::Target)?;
        match (&geometry, scenario_kind) {
            (Geometry::LaneChange { .. }, ScenarioKind::LaneChange) => {}
            (Geometry::ConflictZone { .. }, ScenarioKind::Intersection | ScenarioKind::Roundabout) => {}
            _ => {
                return Err(Error::malformed(
                    &scene_id,
                    format!("geometry does not match scenario kind {scenario_kind}"),
                ))
            }
        }
        if let Geometry::LaneChange {
            lane_y_min,
            lane_y_max,
            margin,
        } = &geometry
        {
            if !(lane_y_min < lane_y_max) || !(*margin > T::zero()) {
                return Err(Error::malformed(&scene_id, "degenerate lane geometry"));
            }
        }

        let lo = tracks[ego_idx].start().max(tracks[target_idx].start());
        let hi = tracks[ego_idx].end().min(tracks[target_idx].end());
        if !(lo < hi) {
            return Err(Error::malformed(&scene_id, "ego and target tracks do not overlap in time"));
        }
        let mut clipped = Vec::with_capacity(tracks.len());
        let (mut ego, mut target) = (usize::MAX, usize::MAX);
        for (i, track) in tracks.iter().enumerate() {
            if let Some(c) = track.clipped(lo, hi) {
                if i == ego_idx {
                    ego = clipped.len();
                } else if i == target_idx {
                    target = clipped.len();
                }
                clipped.push(c);
            } else if i == ego_idx || i == target_idx {
                return Err(Error::malformed(&scene_id, "no samples inside common interval"));
            }
        }
        let grid: Vec<T> = clipped[ego].samples.iter().map(|s| s.t).collect();
        if grid.len() < 2 {
            return Err(Error::malformed(&scene_id, "fewer than two ego samples in common interval"));
        }
        Ok(Self {
            scene_id,
            scenario_kind,
            domain_info,
            geometry,
            tracks: clipped,
            ego,
            target,
            grid,
        })
    }

    pub fn tracks(&self) -> &[AgentTrack<T>] {
        &self.tracks
    }

    pub fn ego(&self) -> &AgentTrack<T> {
        &self.tracks[self.ego]
    }

    pub fn target(&self) -> &AgentTrack<T> {
        &self.tracks[self.target]
    }

    pub fn others(&self) -> impl Iterator<Item = &AgentTrack<T>> {
        self.tracks.iter().filter(|t| t.role == AgentRole::Other)
    }

    /// Native evaluation timestamps.
    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn start(&self) -> T {
        self.grid[0]
    }

    pub fn end(&self) -> T {
        self.grid[self.grid.len() - 1]
    }

    pub fn contains_time(&self, t: T) -> bool {
        t >= self.start() && t <= self.end()
    }

    /// Ego position at `t`; errors outside the recorded interval.
    pub fn ego_position(&self, t: T) -> Result<Position<T>> {
        if !self.contains_time(t) {
            return Err(Error::malformed(
                &self.scene_id,
                format!("ego position undefined at t = {t}"),
            ));
        }
        Ok(self.ego().position_at(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(id: &str, role: AgentRole, ts: &[f64]) -> AgentTrack<f64> {
        AgentTrack::new(
            id,
            role,
            ts.iter()
                .map(|&t| TrackSample {
                    t,
                    position: Position::new(10.0 * t, 0.0),
                })
                .collect(),
        )
        .unwrap()
    }

    fn zone() -> Geometry<f64> {
        Geometry::ConflictZone {
            polygon: ConvexPolygon::rectangle(Position::new(-1.0, -1.0), Position::new(1.0, 1.0))
                .unwrap(),
            path_half_width: None,
        }
    }

    #[test]
    fn non_monotone_track_is_rejected() {
        let samples = vec![
            TrackSample { t: 0.0, position: Position::zero() },
            TrackSample { t: 0.0, position: Position::zero() },
        ];
        assert!(AgentTrack::<f64>::new("a", AgentRole::Ego, samples).is_err());
    }

    #[test]
    fn clipping_to_common_interval() {
        let scene = Scene::new(
            "s",
            ScenarioKind::Intersection,
            DomainInfo::new(),
            zone(),
            vec![
                track("e", AgentRole::Ego, &[0.0, 0.1, 0.2, 0.3, 0.4]),
                track("t", AgentRole::Target, &[0.1, 0.2, 0.3, 0.4, 0.5]),
            ],
        )
        .unwrap();
        assert_eq!(scene.grid(), &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(scene.target().samples().len(), 4);
    }

    #[test]
    fn duplicate_roles_are_malformed() {
        let err = Scene::new(
            "s",
            ScenarioKind::Intersection,
            DomainInfo::new(),
            zone(),
            vec![
                track("e", AgentRole::Ego, &[0.0, 1.0]),
                track("e2", AgentRole::Ego, &[0.0, 1.0]),
                track("t", AgentRole::Target, &[0.0, 1.0]),
            ],
        );
        assert!(matches!(err, Err(Error::MalformedScene { .. })));
    }

    #[test]
    fn interpolation_and_extrapolation() {
        let tr = track("e", AgentRole::Ego, &[0.0, 1.0, 2.0]);
        assert_eq!(tr.position_at(0.5), Position::new(5.0, 0.0));
        assert_eq!(tr.position_at(-1.0), Position::new(-10.0, 0.0));
        assert_eq!(tr.position_at(3.0), Position::new(30.0, 0.0));
        assert_eq!(tr.velocity_at(0.0), Position::new(10.0, 0.0));
        assert_eq!(tr.velocity_at(1.7), Position::new(10.0, 0.0));
    }

    #[test]
    fn geometry_must_match_kind() {
        let err = Scene::new(
            "s",
            ScenarioKind::LaneChange,
            DomainInfo::new(),
            zone(),
            vec![
                track("e", AgentRole::Ego, &[0.0, 1.0]),
                track("t", AgentRole::Target, &[0.0, 1.0]),
            ],
        );
        assert!(err.is_err());
    }
}
