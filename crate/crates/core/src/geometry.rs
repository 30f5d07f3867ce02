//! Planar primitives: points, convex regions, and swept-disc entry tests.
//!
//! Agents are modelled as discs around their track centroid, so "agent
//! overlaps region" means "centroid within `radius` of the region".

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Position<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Linear interpolation, `w = 0` gives `self`.
    pub fn lerp(self, other: Self, w: T) -> Self {
        self + (other - self) * w
    }

    pub fn cast<U: Real>(self) -> Position<U> {
        Position::new(U::lit(self.x.to_f64_lossy()), U::lit(self.y.to_f64_lossy()))
    }
}

impl<T: Real> Add for Position<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Real> Sub for Position<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Real> Mul<T> for Position<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

/// Positions of one agent at consecutive timestamps.
pub type Trajectory<T> = Vec<Position<T>>;

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Position<T>>", into = "Vec<Position<T>>")]
pub struct ConvexPolygon<T: Real> {
    vertices: Vec<Position<T>>,
}

impl<T: Real> TryFrom<Vec<Position<T>>> for ConvexPolygon<T> {
    type Error = Error;
    fn try_from(vertices: Vec<Position<T>>) -> Result<Self> {
        Self::new(vertices)
    }
}

impl<T: Real> From<ConvexPolygon<T>> for Vec<Position<T>> {
    fn from(poly: ConvexPolygon<T>) -> Self {
        poly.vertices
    }
}

impl<T: Real> ConvexPolygon<T> {
    pub fn new(mut vertices: Vec<Position<T>>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("polygon vertex is not finite".into()));
        }
        let n = vertices.len();
        let twice_area: T = (0..n)
            .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
            .sum();
        if twice_area.abs() <= T::epsilon() {
            return Err(Error::InvalidArgument("polygon has zero area".into()));
        }
        if twice_area < T::zero() {
            vertices.reverse();
        }
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if (b - a).cross(c - b) < T::zero() {
                return Err(Error::InvalidArgument("polygon is not convex".into()));
            }
        }
        Ok(Self { vertices })
    }

    pub fn rectangle(min: Position<T>, max: Position<T>) -> Result<Self> {
        Self::new(vec![
            min,
            Position::new(max.x, min.y),
            max,
            Position::new(min.x, max.y),
        ])
    }

    pub fn vertices(&self) -> &[Position<T>] {
        &self.vertices
    }

    pub fn centroid(&self) -> Position<T> {
        let n = T::from_usize_lossy(self.vertices.len());
        self.vertices
            .iter()
            .fold(Position::zero(), |acc, &v| acc + v)
            * (T::one() / n)
    }

    pub fn translated(&self, offset: Position<T>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| v + offset).collect(),
        }
    }

    fn edges(&self) -> impl Iterator<Item = (Position<T>, Position<T>)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    fn outward_normal(a: Position<T>, b: Position<T>) -> Position<T> {
        let d = b - a;
        let n = Position::new(d.y, -d.x);
        n * (T::one() / n.norm())
    }

    pub fn contains(&self, p: Position<T>) -> bool {
        self.edges().all(|(a, b)| (b - a).cross(p - a) >= T::zero())
    }

    /// Euclidean distance from `p` to the region; zero inside.
    pub fn distance(&self, p: Position<T>) -> T {
        if self.contains(p) {
            return T::zero();
        }
        self.edges()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(T::infinity(), T::min)
    }

    /// True if a disc of `radius` centred at `p` overlaps the region.
    pub fn overlaps_disc(&self, p: Position<T>, radius: T) -> bool {
        self.distance(p) <= radius
    }

    /// Largest projection of the region onto `direction`.
    pub fn max_projection(&self, direction: Position<T>) -> T {
        self.vertices
            .iter()
            .map(|&v| v.dot(direction))
            .fold(T::neg_infinity(), T::max)
    }

    /// Smallest `s >= 0` at which a disc of `radius` centred on
    /// `origin + s * direction` touches the region. `direction` must be a
    /// unit vector. `None` if the ray never gets that close.
    pub fn ray_entry(&self, origin: Position<T>, direction: Position<T>, radius: T) -> Option<T> {
        if self.overlaps_disc(origin, radius) {
            return Some(T::zero());
        }
        let mut best = ray_convex_entry(&self.vertices, origin, direction);
        if radius > T::zero() {
            for (a, b) in self.edges() {
                let offset = Self::outward_normal(a, b) * radius;
                let slab = [a, a + offset, b + offset, b];
                best = min_opt(best, ray_convex_entry(&slab, origin, direction));
            }
            for &v in &self.vertices {
                best = min_opt(best, ray_disc_entry(v, radius, origin, direction));
            }
        }
        best
    }

    /// Fraction `w ∈ [0, 1]` along the segment `from → to` at which a disc
    /// of `radius` first touches the region.
    pub fn segment_entry(&self, from: Position<T>, to: Position<T>, radius: T) -> Option<T> {
        let delta = to - from;
        let length = delta.norm();
        if length <= T::zero() {
            return self.overlaps_disc(from, radius).then(T::zero);
        }
        let s = self.ray_entry(from, delta * (T::one() / length), radius)?;
        (s <= length).then(|| s / length)
    }
}

fn min_opt<T: Real>(a: Option<T>, b: Option<T>) -> Option<T> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn segment_distance<T: Real>(p: Position<T>, a: Position<T>, b: Position<T>) -> T {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 <= T::zero() {
        return p.distance(a);
    }
    let w = ((p - a).dot(ab) / len2).max(T::zero()).min(T::one());
    p.distance(a + ab * w)
}

/// Cyrus–Beck clipping of a ray against a convex polygon given in
/// counter-clockwise order.
fn ray_convex_entry<T: Real>(
    vertices: &[Position<T>],
    origin: Position<T>,
    direction: Position<T>,
) -> Option<T> {
    let n = vertices.len();
    let mut enter = T::zero();
    let mut exit = T::infinity();
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let edge = b - a;
        let normal = Position::new(edge.y, -edge.x);
        let num = normal.dot(a - origin);
        let den = normal.dot(direction);
        if den == T::zero() {
            if num < T::zero() {
                return None;
            }
        } else if den > T::zero() {
            exit = exit.min(num / den);
        } else {
            enter = enter.max(num / den);
        }
    }
    (enter <= exit).then_some(enter)
}

fn ray_disc_entry<T: Real>(
    centre: Position<T>,
    radius: T,
    origin: Position<T>,
    direction: Position<T>,
) -> Option<T> {
    let rel = origin - centre;
    let b = direction.dot(rel);
    let c = rel.dot(rel) - radius * radius;
    if c <= T::zero() {
        return Some(T::zero());
    }
    let disc = b * b - c;
    if disc < T::zero() {
        return None;
    }
    let s = -b - disc.sqrt();
    (s >= T::zero()).then_some(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn square() -> ConvexPolygon<f64> {
        ConvexPolygon::rectangle(Position::new(-2.5, -2.5), Position::new(2.5, 2.5)).unwrap()
    }

    #[test]
    fn rejects_degenerate_polygons() {
        assert!(ConvexPolygon::<f64>::new(vec![Position::zero(); 2]).is_err());
        let line = vec![
            Position::new(0.0, 0.0),
            Position::new(1.0, 0.0),
            Position::new(2.0, 0.0),
        ];
        assert!(ConvexPolygon::new(line).is_err());
        let dart = vec![
            Position::new(0.0, 0.0),
            Position::new(2.0, 1.0),
            Position::new(0.0, 2.0),
            Position::new(1.0, 1.0),
        ];
        assert!(ConvexPolygon::new(dart).is_err());
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let cw = vec![
            Position::new(0.0, 0.0),
            Position::new(0.0, 1.0),
            Position::new(1.0, 1.0),
            Position::new(1.0, 0.0),
        ];
        let poly = ConvexPolygon::new(cw).unwrap();
        assert!(poly.contains(Position::new(0.5, 0.5)));
        assert!(!poly.contains(Position::new(1.5, 0.5)));
    }

    #[test]
    fn distance_to_square() {
        let sq = square();
        assert_eq!(sq.distance(Position::new(0.0, 0.0)), 0.0);
        assert_relative_eq!(sq.distance(Position::new(-10.0, 0.0)), 7.5);
        assert_relative_eq!(sq.distance(Position::new(5.5, 6.5)), 5.0);
    }

    #[test]
    fn ray_entry_head_on() {
        let sq = square();
        let s = sq
            .ray_entry(Position::new(-100.0, 0.0), Position::new(1.0, 0.0), 0.0)
            .unwrap();
        assert_relative_eq!(s, 97.5);
        let s = sq
            .ray_entry(Position::new(-100.0, 0.0), Position::new(1.0, 0.0), 1.0)
            .unwrap();
        assert_relative_eq!(s, 96.5);
        assert!(sq
            .ray_entry(Position::new(-100.0, 0.0), Position::new(-1.0, 0.0), 1.0)
            .is_none());
    }

    #[test]
    fn ray_grazing_corner_uses_rounded_offset() {
        let sq = square();
        // passes 0.5 m outside the top edge: first contact is the rounded
        // corner at (-2.5, 2.5)
        let origin = Position::new(-20.0, 3.0);
        let s = sq.ray_entry(origin, Position::new(1.0, 0.0), 1.0).unwrap();
        let expected = 20.0 - 2.5 - (1.0_f64 - 0.25).sqrt();
        assert_relative_eq!(s, expected, epsilon = 1e-12);
        assert!(sq.ray_entry(origin, Position::new(1.0, 0.0), 0.4).is_none());
    }

    #[test]
    fn segment_entry_fraction() {
        let sq = square();
        let w = sq
            .segment_entry(Position::new(0.0, -10.0), Position::new(0.0, 0.0), 0.0)
            .unwrap();
        assert_relative_eq!(w, 0.75);
        assert!(sq
            .segment_entry(Position::new(0.0, -10.0), Position::new(0.0, -5.0), 0.0)
            .is_none());
    }

    proptest! {
        // the entry point lies exactly on the inflated boundary, and the
        // swept disc is disjoint from the region before it
        #[test]
        fn ray_entry_matches_distance_field(
            ox in -30.0..30.0_f64, oy in -30.0..30.0_f64,
            angle in 0.0..std::f64::consts::TAU, radius in 0.0..2.0_f64,
        ) {
            let sq = square();
            let origin = Position::new(ox, oy);
            let dir = Position::new(angle.cos(), angle.sin());
            match sq.ray_entry(origin, dir, radius) {
                Some(s) if s > 0.0 => {
                    prop_assert!((sq.distance(origin + dir * s) - radius).abs() < 1e-7);
                    for k in 0..50 {
                        let before = s * k as f64 / 50.0;
                        prop_assert!(sq.distance(origin + dir * before) >= radius - 1e-7);
                    }
                }
                Some(_) => prop_assert!(sq.distance(origin) <= radius + 1e-12),
                None => {
                    for k in 0..200 {
                        let p = origin + dir * (k as f64 * 0.5);
                        prop_assert!(sq.distance(p) > radius - 1e-7);
                    }
                }
            }
        }
    }
}
