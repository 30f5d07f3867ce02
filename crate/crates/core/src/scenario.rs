//! Scenario-dependent quantities: the contested space, the conditions
//! `C_S`, `C_C`, `C_A`, the ego's hindsight-free estimate of when it will
//! close the gap, and its safe braking time.
//!
//! Everything downstream of this module is scenario independent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Position};
use crate::scalar::Real;
use crate::scene::{Geometry, Scene, ScenarioKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams<T> {
    /// Agents are discs of this radius around their centroid (m).
    pub inflation_radius: T,
    /// Comfortable deceleration used for the braking time (m/s²).
    pub safe_deceleration: T,
    /// Below this speed the ego counts as parked (m/s).
    pub min_speed: T,
    /// Horizon returned for a parked ego that has not entered yet (s).
    pub horizon: T,
    /// Default half width of the ego path corridor (m).
    pub path_half_width: T,
}

impl<T: Real> Default for ScenarioParams<T> {
    fn default() -> Self {
        Self {
            inflation_radius: T::lit(1.0),
            safe_deceleration: T::lit(4.0),
            min_speed: T::lit(0.1),
            horizon: T::lit(3600.0),
            path_half_width: T::lit(1.75),
        }
    }
}

impl<T: Real> ScenarioParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.inflation_radius >= T::zero())
            || !(self.safe_deceleration > T::zero())
            || !(self.min_speed >= T::zero())
            || !(self.horizon > T::zero())
            || !(self.path_half_width > T::zero())
        {
            return Err(Error::InvalidArgument(format!("invalid scenario parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContestedSpace<T: Real> {
    pub region: ConvexPolygon<T>,
    /// True when the region follows the target (lane changes).
    pub mobile: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conditions {
    /// Gap not yet open: another vehicle is still on the ego path between
    /// the ego and the contested space.
    pub c_s: bool,
    /// Ego overlaps the contested space.
    pub c_c: bool,
    /// Target overlaps the contested space.
    pub c_a: bool,
}

/// Scenario-specific handles used by the extraction pipeline.
///
/// All methods are pure functions of `(scene, t)` and only look at data up
/// to `t`, apart from the interpolation inside one native sample interval.
pub trait ScenarioDefinition<T: Real>: Send + Sync {
    fn params(&self) -> &ScenarioParams<T>;

    fn contested_space(&self, scene: &Scene<T>, t: T) -> Result<ContestedSpace<T>>;

    /// `C_S`: whether the gap is still blocked at `t`.
    fn gap_blocked(&self, scene: &Scene<T>, t: T) -> Result<bool>;

    /// First time the target, following `path`, touches the contested space.
    /// `path` is a time-ordered polyline; motion between vertices is linear.
    fn target_entry(&self, geometry: &Geometry<T>, path: &[(T, Position<T>)]) -> Result<Option<T>>;

    /// Earliest native timestamp `<= t` at which the ego overlapped the
    /// contested space.
    fn ego_entry_so_far(&self, scene: &Scene<T>, t: T) -> Result<Option<T>> {
        let r = self.params().inflation_radius;
        for &ti in scene.grid().iter().take_while(|&&ti| ti <= t) {
            let space = self.contested_space(scene, ti)?;
            if space.region.overlaps_disc(scene.ego().position_at(ti), r) {
                return Ok(Some(ti));
            }
        }
        Ok(None)
    }

    fn conditions(&self, scene: &Scene<T>, t: T) -> Result<Conditions> {
        let r = self.params().inflation_radius;
        let space = self.contested_space(scene, t)?;
        Ok(Conditions {
            c_s: self.gap_blocked(scene, t)?,
            c_c: space.region.overlaps_disc(scene.ego_position(t)?, r),
            c_a: space.region.overlaps_disc(scene.target().position_at(t), r),
        })
    }

    /// Hindsight-free estimate of the gap-closing time made at `t`.
    ///
    /// Returns the ego's first observed entry time once it has entered,
    /// otherwise `t + s_gap / v_E` under constant velocity, or
    /// `t + horizon` if the ego is parked or heading away.
    fn t_underline_c(&self, scene: &Scene<T>, t: T) -> Result<T> {
        let p = self.params();
        let ego_pos = scene.ego_position(t)?;
        if let Some(entered) = self.ego_entry_so_far(scene, t)? {
            return Ok(entered);
        }
        let space = self.contested_space(scene, t)?;
        if space.region.overlaps_disc(ego_pos, p.inflation_radius) {
            return Ok(t);
        }
        let velocity = scene.ego().velocity_at(t);
        let speed = velocity.norm();
        if speed <= p.min_speed {
            return Ok(t + p.horizon);
        }
        let heading = velocity * (T::one() / speed);
        Ok(match space.region.ray_entry(ego_pos, heading, p.inflation_radius) {
            Some(s) => t + (s / speed).min(p.horizon),
            None => t + p.horizon,
        })
    }

    /// Time the ego needs to stop at the comfortable deceleration.
    fn t_brake(&self, scene: &Scene<T>, t: T) -> Result<T> {
        scene.ego_position(t)?;
        Ok(scene.ego().velocity_at(t).norm() / self.params().safe_deceleration)
    }
}

/// Picks the scenario implementation for a scene kind.
pub fn scenario_for<T: Real>(
    kind: ScenarioKind,
    params: ScenarioParams<T>,
) -> Box<dyn ScenarioDefinition<T>> {
    match kind {
        ScenarioKind::Intersection | ScenarioKind::Roundabout => Box::new(ConflictZoneScenario { params }),
        ScenarioKind::LaneChange => Box::new(LaneChangeScenario { params }),
    }
}

/// Is another vehicle on the ego path strictly ahead of the ego and not
/// past the far end of the contested space?
fn path_blocked<T: Real>(
    scene: &Scene<T>,
    t: T,
    region: &ConvexPolygon<T>,
    heading: Position<T>,
    half_width: T,
    radius: T,
) -> bool {
    let ego = scene.ego().position_at(t);
    let lateral = Position::new(-heading.y, heading.x);
    let far = region.max_projection(heading) + radius;
    scene.others().filter(|o| o.covers(t)).any(|other| {
        let pos = other.position_at(t);
        if region.overlaps_disc(pos, radius) {
            return true;
        }
        let rel = pos - ego;
        let along = rel.dot(heading);
        along > T::zero() && pos.dot(heading) <= far && rel.dot(lateral).abs() <= half_width
    })
}

fn first_entry_on_polyline<T: Real>(
    path: &[(T, Position<T>)],
    entered: impl Fn(Position<T>, Position<T>) -> Option<T>,
) -> Option<T> {
    match path {
        [] => None,
        [(t, p)] => entered(*p, *p).map(|_| *t),
        _ => path.windows(2).find_map(|w| {
            let ((ta, pa), (tb, pb)) = (w[0], w[1]);
            entered(pa, pb).map(|frac| ta + (tb - ta) * frac)
        }),
    }
}

/// Static conflict polygon: intersections and roundabout entries.
#[derive(Debug, Clone)]
pub struct ConflictZoneScenario<T> {
    pub params: ScenarioParams<T>,
}

impl<T: Real> ConflictZoneScenario<T> {
    fn zone<'a>(&self, geometry: &'a Geometry<T>) -> Result<(&'a ConvexPolygon<T>, T)> {
        match geometry {
            Geometry::ConflictZone {
                polygon,
                path_half_width,
            } => Ok((polygon, path_half_width.unwrap_or(self.params.path_half_width))),
            Geometry::LaneChange { .. } => Err(Error::InvalidArgument(
                "conflict-zone scenario needs conflict-zone geometry".into(),
            )),
        }
    }
}

impl<T: Real> ScenarioDefinition<T> for ConflictZoneScenario<T> {
    fn params(&self) -> &ScenarioParams<T> {
        &self.params
    }

    fn contested_space(&self, scene: &Scene<T>, _t: T) -> Result<ContestedSpace<T>> {
        let (polygon, _) = self.zone(&scene.geometry)?;
        Ok(ContestedSpace {
            region: polygon.clone(),
            mobile: false,
        })
    }

    fn gap_blocked(&self, scene: &Scene<T>, t: T) -> Result<bool> {
        let (polygon, half_width) = self.zone(&scene.geometry)?;
        let ego_pos = scene.ego_position(t)?;
        let velocity = scene.ego().velocity_at(t);
        let speed = velocity.norm();
        let heading = if speed > self.params.min_speed {
            velocity * (T::one() / speed)
        } else {
            let towards = polygon.centroid() - ego_pos;
            let len = towards.norm();
            if len <= T::zero() {
                return Ok(false);
            }
            towards * (T::one() / len)
        };
        Ok(path_blocked(
            scene,
            t,
            polygon,
            heading,
            half_width,
            self.params.inflation_radius,
        ))
    }

    fn ego_entry_so_far(&self, scene: &Scene<T>, t: T) -> Result<Option<T>> {
        let (polygon, _) = self.zone(&scene.geometry)?;
        let r = self.params.inflation_radius;
        Ok(scene
            .grid()
            .iter()
            .take_while(|&&ti| ti <= t)
            .copied()
            .find(|&ti| polygon.overlaps_disc(scene.ego().position_at(ti), r)))
    }

    fn target_entry(&self, geometry: &Geometry<T>, path: &[(T, Position<T>)]) -> Result<Option<T>> {
        let (polygon, _) = self.zone(geometry)?;
        let r = self.params.inflation_radius;
        Ok(first_entry_on_polyline(path, |a, b| polygon.segment_entry(a, b, r)))
    }
}

/// Lane change onto the ego lane. The contested space is a rectangle on the
/// ego lane spanning the target's longitudinal position `± margin`; it moves
/// with the target until the target first overlaps it and is frozen from
/// then on.
#[derive(Debug, Clone)]
pub struct LaneChangeScenario<T> {
    pub params: ScenarioParams<T>,
}

struct Lane<T> {
    y_min: T,
    y_max: T,
    margin: T,
}

impl<T: Real> LaneChangeScenario<T> {
    fn lane(&self, geometry: &Geometry<T>) -> Result<Lane<T>> {
        match *geometry {
            Geometry::LaneChange {
                lane_y_min,
                lane_y_max,
                margin,
            } => Ok(Lane {
                y_min: lane_y_min,
                y_max: lane_y_max,
                margin,
            }),
            Geometry::ConflictZone { .. } => Err(Error::InvalidArgument(
                "lane-change scenario needs lane geometry".into(),
            )),
        }
    }

    fn rect_at(lane: &Lane<T>, x: T) -> Result<ConvexPolygon<T>> {
        ConvexPolygon::rectangle(
            Position::new(x - lane.margin, lane.y_min),
            Position::new(x + lane.margin, lane.y_max),
        )
    }

    /// The target overlaps the moving rectangle iff it laterally touches the
    /// ego lane, since the rectangle always spans the target's own x.
    fn touches_lane(&self, lane: &Lane<T>, p: Position<T>) -> bool {
        let r = self.params.inflation_radius;
        p.y >= lane.y_min - r && p.y <= lane.y_max + r
    }

    /// Longitudinal anchor of the contested space at `t`.
    fn anchor_x(&self, scene: &Scene<T>, lane: &Lane<T>, t: T) -> T {
        let target = scene.target();
        let frozen = scene
            .grid()
            .iter()
            .take_while(|&&ti| ti <= t)
            .map(|&ti| target.position_at(ti))
            .find(|&p| self.touches_lane(lane, p));
        frozen.unwrap_or_else(|| target.position_at(t)).x
    }
}

impl<T: Real> ScenarioDefinition<T> for LaneChangeScenario<T> {
    fn params(&self) -> &ScenarioParams<T> {
        &self.params
    }

    fn contested_space(&self, scene: &Scene<T>, t: T) -> Result<ContestedSpace<T>> {
        let lane = self.lane(&scene.geometry)?;
        Ok(ContestedSpace {
            region: Self::rect_at(&lane, self.anchor_x(scene, &lane, t))?,
            mobile: true,
        })
    }

    fn gap_blocked(&self, scene: &Scene<T>, t: T) -> Result<bool> {
        let lane = self.lane(&scene.geometry)?;
        scene.ego_position(t)?;
        let region = Self::rect_at(&lane, self.anchor_x(scene, &lane, t))?;
        let half_width = (lane.y_max - lane.y_min) * T::half();
        let centre_line = (lane.y_max + lane.y_min) * T::half();
        // measure the corridor from the lane centre, not the ego centroid
        let ego = scene.ego().position_at(t);
        let heading = Position::new(T::one(), T::zero());
        let r = self.params.inflation_radius;
        let far = region.max_projection(heading) + r;
        Ok(scene.others().filter(|o| o.covers(t)).any(|other| {
            let pos = other.position_at(t);
            region.overlaps_disc(pos, r)
                || (pos.x > ego.x && pos.x <= far && (pos.y - centre_line).abs() <= half_width)
        }))
    }

    fn ego_entry_so_far(&self, scene: &Scene<T>, t: T) -> Result<Option<T>> {
        let lane = self.lane(&scene.geometry)?;
        let r = self.params.inflation_radius;
        let target = scene.target();
        let mut frozen: Option<T> = None;
        for &ti in scene.grid().iter().take_while(|&&ti| ti <= t) {
            let tp = target.position_at(ti);
            if frozen.is_none() && self.touches_lane(&lane, tp) {
                frozen = Some(tp.x);
            }
            let region = Self::rect_at(&lane, frozen.unwrap_or(tp.x))?;
            if region.overlaps_disc(scene.ego().position_at(ti), r) {
                return Ok(Some(ti));
            }
        }
        Ok(None)
    }

    fn target_entry(&self, geometry: &Geometry<T>, path: &[(T, Position<T>)]) -> Result<Option<T>> {
        let lane = self.lane(geometry)?;
        let r = self.params.inflation_radius;
        let (lo, hi) = (lane.y_min - r, lane.y_max + r);
        Ok(first_entry_on_polyline(path, |a, b| {
            let inside = |y: T| y >= lo && y <= hi;
            if inside(a.y) {
                return Some(T::zero());
            }
            if !inside(b.y) && (a.y - lo).signum() == (b.y - lo).signum() {
                return None;
            }
            let edge = if a.y < lo { lo } else { hi };
            Some((edge - a.y) / (b.y - a.y))
        }))
    }
}
