//! Planar vectors and convex polygons: centroids, perimeter queries and
//! ray casting used by the world model and the proximity sensors.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used for on-boundary and orientation tests.
pub const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon has a reflex vertex at index {0}")]
    NotConvex(usize),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("point ({x}, {y}) lies strictly inside the polygon")]
    InteriorPoint { x: f64, y: f64 },
    #[error("non-finite coordinate")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        Self::from_angle(theta) * r
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Counter-clockwise rotation by +π/2.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        if n > 1e-12 && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    /// Scales the vector down so its norm does not exceed `max`.
    pub fn clamp_norm(self, max: f64) -> Vec2 {
        let n = self.norm();
        if n > max && n > 0.0 {
            self * (max / n)
        } else {
            self
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unsigned angle between two vectors in [0, π].
    pub fn angle_between(self, o: Vec2) -> f64 {
        self.cross(o).abs().atan2(self.dot(o))
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl std::iter::Sum for Vec2 {
    fn sum<I: Iterator<Item = Vec2>>(iter: I) -> Vec2 {
        iter.fold(Vec2::ZERO, |a, b| a + b)
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// A point on a polygon boundary together with the inward normal there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcPoint {
    pub position: Vec2,
    pub inward_normal: Vec2,
    /// Boundary length measured counter-clockwise from vertex 0.
    pub arclength: f64,
}

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
}

impl TryFrom<Vec<Vec2>> for ConvexPolygon {
    type Error = GeometryError;
    fn try_from(v: Vec<Vec2>) -> Result<Self, Self::Error> {
        ConvexPolygon::new(v)
    }
}

impl From<ConvexPolygon> for Vec<Vec2> {
    fn from(p: ConvexPolygon) -> Self {
        p.vertices
    }
}

fn signed_area(vs: &[Vec2]) -> f64 {
    let n = vs.len();
    (0..n).map(|i| vs[i].cross(vs[(i + 1) % n])).sum::<f64>() * 0.5
}

impl ConvexPolygon {
    /// Validates convexity. Clockwise input is reversed.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let area = signed_area(&vertices);
        if area.abs() < GEOM_EPS {
            return Err(GeometryError::DegenerateGeometry("zero-area polygon"));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[(i + n - 1) % n];
            let b = vertices[i];
            let c = vertices[(i + 1) % n];
            if (b - a).norm() < GEOM_EPS {
                return Err(GeometryError::DegenerateGeometry("repeated vertex"));
            }
            if (b - a).cross(c - b) < -GEOM_EPS {
                return Err(GeometryError::NotConvex(i));
            }
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle centred on the origin.
    pub fn rectangle(width: f64, height: f64) -> Result<Self, GeometryError> {
        let (hw, hh) = (width / 2.0, height / 2.0);
        Self::new(vec![
            Vec2::new(-hw, -hh),
            Vec2::new(hw, -hh),
            Vec2::new(hw, hh),
            Vec2::new(-hw, hh),
        ])
    }

    /// Regular polygon with circumradius `radius`, centred on the origin.
    pub fn regular(sides: usize, radius: f64) -> Result<Self, GeometryError> {
        let verts = (0..sides)
            .map(|k| Vec2::from_polar(radius, 2.0 * PI * k as f64 / sides as f64))
            .collect();
        Self::new(verts)
    }

    /// Convex hull of a point cloud (monotone chain).
    pub fn hull(points: &[Vec2]) -> Result<Self, GeometryError> {
        let mut pts: Vec<Vec2> = points.to_vec();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup();
        if pts.len() < 3 {
            return Err(GeometryError::TooFewVertices(pts.len()));
        }
        let mut lower: Vec<Vec2> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2 {
                let l = lower.len();
                if (lower[l - 1] - lower[l - 2]).cross(p - lower[l - 1]) <= GEOM_EPS {
                    lower.pop();
                } else {
                    break;
                }
            }
            lower.push(p);
        }
        let mut upper: Vec<Vec2> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2 {
                let l = upper.len();
                if (upper[l - 1] - upper[l - 2]).cross(p - upper[l - 1]) <= GEOM_EPS {
                    upper.pop();
                } else {
                    break;
                }
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Self::new(lower)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges as (start, end) pairs in counter-clockwise order.
    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Rigid transform: rotate about the origin by `yaw`, then translate.
    pub fn transformed(&self, translation: Vec2, yaw: f64) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self
                .vertices
                .iter()
                .map(|v| v.rotate(yaw) + translation)
                .collect(),
        }
    }

    pub fn translated(&self, t: Vec2) -> ConvexPolygon {
        self.transformed(t, 0.0)
    }

    /// Largest distance from `center` to a vertex.
    pub fn circumradius_about(&self, center: Vec2) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.distance(center))
            .fold(0.0, f64::max)
    }

    /// True when `p` lies strictly inside (farther than `GEOM_EPS` from every edge).
    pub fn contains_strict(&self, p: Vec2) -> bool {
        self.edges().all(|(a, b)| {
            let e = b - a;
            e.cross(p - a) / e.norm() > GEOM_EPS
        })
    }

    /// Euclidean distance from `p` to the polygon (zero inside).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        if self.contains_strict(p) {
            return 0.0;
        }
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Signed distance: negative inside, positive outside.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        let d = self
            .edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min);
        if self.contains_strict(p) {
            -d
        } else {
            d
        }
    }

    /// Inward unit normal of edge `i` (from vertex i to i+1).
    pub fn edge_inward_normal(&self, i: usize) -> Vec2 {
        let n = self.vertices.len();
        let e = self.vertices[(i + 1) % n] - self.vertices[i];
        e.perp() / e.norm()
    }

    /// Unit inward bisector at vertex `i`.
    pub fn vertex_inward_normal(&self, i: usize) -> Vec2 {
        let n = self.vertices.len();
        let a = self.edge_inward_normal((i + n - 1) % n);
        let b = self.edge_inward_normal(i);
        (a + b).normalized().unwrap_or(b)
    }
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let e = b - a;
    let t = ((p - a).dot(e) / e.norm_sq()).clamp(0.0, 1.0);
    p.distance(a + e * t)
}

/// Area-weighted centroid.
pub fn polygon_centroid(poly: &ConvexPolygon) -> Result<Vec2, GeometryError> {
    let vs = poly.vertices();
    let n = vs.len();
    // Shift by vertex 0 for numerical stability far from the origin.
    let o = vs[0];
    let mut area2 = 0.0;
    let mut acc = Vec2::ZERO;
    for i in 0..n {
        let a = vs[i] - o;
        let b = vs[(i + 1) % n] - o;
        let c = a.cross(b);
        area2 += c;
        acc += (a + b) * c;
    }
    if area2.abs() < GEOM_EPS {
        return Err(GeometryError::DegenerateGeometry("zero-area polygon"));
    }
    Ok(o + acc / (3.0 * area2))
}

pub fn perimeter_length(poly: &ConvexPolygon) -> f64 {
    poly.edges().map(|(a, b)| a.distance(b)).sum()
}

/// Closest boundary point to an exterior (or boundary) point.
///
/// Interior edge points carry the edge normal; points that resolve to a
/// vertex carry the inward angle bisector.
pub fn closest_boundary_point(poly: &ConvexPolygon, p: Vec2) -> Result<ArcPoint, GeometryError> {
    if poly.contains_strict(p) {
        return Err(GeometryError::InteriorPoint { x: p.x, y: p.y });
    }
    let vs = poly.vertices();
    let n = vs.len();
    let mut best: Option<(f64, ArcPoint)> = None;
    let mut arc = 0.0;
    for i in 0..n {
        let a = vs[i];
        let b = vs[(i + 1) % n];
        let e = b - a;
        let len = e.norm();
        let t = ((p - a).dot(e) / (len * len)).clamp(0.0, 1.0);
        let q = a + e * t;
        let d = p.distance(q);
        let normal = if t <= GEOM_EPS {
            poly.vertex_inward_normal(i)
        } else if t >= 1.0 - GEOM_EPS {
            poly.vertex_inward_normal((i + 1) % n)
        } else {
            poly.edge_inward_normal(i)
        };
        let cand = ArcPoint {
            position: q,
            inward_normal: normal,
            arclength: arc + t * len,
        };
        if best.as_ref().is_none_or(|(bd, _)| d < *bd - 1e-15) {
            best = Some((d, cand));
        }
        arc += len;
    }
    Ok(best.expect("polygon has edges").1)
}

/// Intersection parameter of a ray with a segment, if any.
fn ray_segment(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let e = b - a;
    let denom = dir.cross(e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let w = a - origin;
    let t = w.cross(e) / denom;
    let u = w.cross(dir) / denom;
    if t >= 0.0 && (-GEOM_EPS..=1.0 + GEOM_EPS).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// Distance along a unit ray to the first polygon boundary crossing.
///
/// A ray starting inside the polygon reports the exit distance.
pub fn ray_distance(origin: Vec2, direction: Vec2, poly: &ConvexPolygon, max_range: f64) -> Option<f64> {
    poly.edges()
        .filter_map(|(a, b)| ray_segment(origin, direction, a, b))
        .fold(None, |best: Option<f64>, t| Some(best.map_or(t, |b| b.min(t))))
        .filter(|&t| t <= max_range)
}

/// Distance along a unit ray to a disc, if hit within `max_range`.
pub fn ray_circle_distance(origin: Vec2, direction: Vec2, center: Vec2, radius: f64, max_range: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(direction);
    let c = oc.norm_sq() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0 && t <= max_range).then_some(t)
}

/// Moment of inertia about the area centroid for mass spread uniformly
/// along the boundary (hollow object).
pub fn perimeter_moment(poly: &ConvexPolygon, mass: f64) -> Result<f64, GeometryError> {
    let c = polygon_centroid(poly)?;
    let per = perimeter_length(poly);
    let lambda = mass / per;
    Ok(poly
        .edges()
        .map(|(a, b)| {
            let (a, b) = (a - c, b - c);
            lambda * a.distance(b) * (a.norm_sq() + a.dot(b) + b.norm_sq()) / 3.0
        })
        .sum())
}
