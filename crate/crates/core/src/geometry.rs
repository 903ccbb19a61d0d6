//! Planar geometry on pixel coordinates.
//!
//! Orientation terms ("counter-clockwise", "left of") refer to the sign of the
//! shoelace area computed on raw `(x, y)` values. On an image with `y` pointing
//! down this is visually clockwise; nothing here depends on the screen
//! convention.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Containment tolerance in pixels.
pub const CONTAIN_EPS: f64 = 1e-6;

/// Relative tolerance under which two side lengths count as equal for the
/// canonical square form.
const SQUARE_REL_EPS: f64 = 1e-9;

/// Angles this close to the end of the canonical range wrap to zero.
const ANGLE_WRAP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// z-component of `(a - o) x (b - o)`; positive when `o -> a -> b` turns left.
pub fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn signed_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    let mut s = 0.0;
    for i in 0..n {
        let (p, q) = (pts[i], pts[(i + 1) % n]);
        s += p.x * q.y - q.x * p.y;
    }
    0.5 * s
}

fn extent_sq(pts: &[Point2]) -> f64 {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in pts {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let (dx, dy) = (x1 - x0, y1 - y0);
    dx * dx + dy * dy
}

/// A simple polygon given by its vertex ring (closing edge implicit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon {
    vertices: Vec<Point2>,
}

impl Polygon {
    /// Builds a validated polygon. Consecutive duplicate vertices (including
    /// the wrap-around pair) are dropped before checking.
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        let mut out: Vec<Point2> = Vec::with_capacity(vertices.len());
        for p in vertices {
            if !p.is_finite() {
                return Err(Error::Degenerate("non-finite coordinate".into()));
            }
            if out.last() != Some(&p) {
                out.push(p);
            }
        }
        while out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        let poly = Polygon { vertices: out };
        poly.check()?;
        Ok(poly)
    }

    /// Wraps a vertex ring without validation. Used to represent raw input
    /// that a validation report should be able to flag.
    pub fn from_vertices_unchecked(vertices: Vec<Point2>) -> Self {
        Polygon { vertices }
    }

    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if !coords.len().is_multiple_of(2) {
            return Err(Error::Degenerate("odd number of coordinates".into()));
        }
        Polygon::new(coords.chunks(2).map(|c| Point2::new(c[0], c[1])).collect())
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Checks the validity invariants: at least three vertices, finite
    /// coordinates, no repeated consecutive vertex, non-zero area.
    pub fn check(&self) -> Result<()> {
        let v = &self.vertices;
        if v.len() < 3 {
            return Err(Error::Degenerate(format!("{} distinct vertices", v.len())));
        }
        if v.iter().any(|p| !p.is_finite()) {
            return Err(Error::Degenerate("non-finite coordinate".into()));
        }
        for i in 0..v.len() {
            if v[i] == v[(i + 1) % v.len()] {
                return Err(Error::Degenerate("repeated consecutive vertex".into()));
            }
        }
        let a = signed_area(v);
        if a.abs() <= 1e-12 * extent_sq(v) || a == 0.0 {
            return Err(Error::Degenerate("zero area (collinear vertices)".into()));
        }
        Ok(())
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Clamps every vertex into `[0, width] x [0, height]`.
    pub fn clamped(&self, width: f64, height: f64) -> Polygon {
        Polygon {
            vertices: self
                .vertices
                .iter()
                .map(|p| Point2::new(p.x.clamp(0.0, width), p.y.clamp(0.0, height)))
                .collect(),
        }
    }

    /// Same ring, oriented counter-clockwise.
    pub fn to_ccw(&self) -> Polygon {
        let mut v = self.vertices.clone();
        if signed_area(&v) < 0.0 {
            v.reverse();
        }
        Polygon { vertices: v }
    }
}

/// Axis-aligned box in pixels: top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Aabb {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = Aabb { x, y, w, h };
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) || w <= 0.0 || h <= 0.0 {
            return Err(Error::Degenerate(format!("aabb {b:?}")));
        }
        Ok(b)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn corners(&self) -> [Point2; 4] {
        let (x1, y1) = (self.x + self.w, self.y + self.h);
        [
            Point2::new(self.x, self.y),
            Point2::new(x1, self.y),
            Point2::new(x1, y1),
            Point2::new(self.x, y1),
        ]
    }

    pub fn to_obb(&self) -> Obb {
        Obb::new(self.x + 0.5 * self.w, self.y + 0.5 * self.h, self.w, self.h, 0.0)
    }
}

/// Oriented box: center, side lengths and the angle of the `w` side.
///
/// Canonical form: `w >= h`, `theta` in `[0, pi)`, and for squares `theta`
/// in `[0, pi/2)`. [`Obb::new`] always returns the canonical form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obb {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

impl Obb {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Self {
        let (mut w, mut h, mut t) = (w, h, theta);
        if w < h {
            std::mem::swap(&mut w, &mut h);
            t += FRAC_PI_2;
        }
        let square = (w - h).abs() <= SQUARE_REL_EPS * w;
        let period = if square { FRAC_PI_2 } else { PI };
        t = t.rem_euclid(period);
        if period - t < ANGLE_WRAP_EPS {
            t = 0.0;
        }
        Obb { cx, cy, w, h, theta: t }
    }

    /// Like [`Obb::new`] but rejects non-finite or non-positive sizes.
    pub fn checked(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        if ![cx, cy, w, h, theta].iter().all(|v| v.is_finite()) || w <= 0.0 || h <= 0.0 {
            return Err(Error::Degenerate(format!("obb [{cx}, {cy}, {w}, {h}, {theta}]")));
        }
        Ok(Obb::new(cx, cy, w, h, theta))
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Convex hull (Andrew's monotone chain), counter-clockwise, collinear
/// points removed. Starts at the lexicographically smallest vertex.
pub fn convex_hull(poly: &Polygon) -> Result<Polygon> {
    hull_of_points(poly.vertices())
}

pub(crate) fn hull_of_points(points: &[Point2]) -> Result<Polygon> {
    let mut pts: Vec<Point2> = points.to_vec();
    if pts.iter().any(|p| !p.is_finite()) {
        return Err(Error::Degenerate("non-finite coordinate".into()));
    }
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(Error::Degenerate("degenerate polygon".into()));
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 || signed_area(&hull).abs() <= 1e-12 * extent_sq(&hull) {
        return Err(Error::Degenerate("degenerate polygon".into()));
    }
    Ok(Polygon { vertices: hull })
}

/// Unsigned shoelace area.
pub fn polygon_area(poly: &Polygon) -> f64 {
    poly.signed_area().abs()
}

/// Tightest axis-aligned box around the vertices.
pub fn aabb_of(poly: &Polygon) -> Aabb {
    let v = poly.vertices();
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in v {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    Aabb { x: x0, y: y0, w: x1 - x0, h: y1 - y0 }
}

/// Minimum-area enclosing rectangle.
///
/// One side of the optimal rectangle lies on a hull edge, so every hull edge
/// direction is tried as a caliper. Equal-area candidates resolve to the
/// smallest canonical `theta`.
pub fn min_area_obb(poly: &Polygon) -> Result<Obb> {
    let hull = convex_hull(poly)?;
    let h = hull.vertices();
    let n = h.len();
    let mut best: Option<Obb> = None;
    for i in 0..n {
        let e = h[(i + 1) % n].sub(h[i]);
        let len = e.x.hypot(e.y);
        if len == 0.0 {
            continue;
        }
        let (ux, uy) = (e.x / len, e.y / len);
        let (vx, vy) = (-uy, ux);
        let (mut u0, mut u1, mut v0, mut v1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in h {
            let pu = p.x * ux + p.y * uy;
            let pv = p.x * vx + p.y * vy;
            u0 = u0.min(pu);
            u1 = u1.max(pu);
            v0 = v0.min(pv);
            v1 = v1.max(pv);
        }
        let (mu, mv) = (0.5 * (u0 + u1), 0.5 * (v0 + v1));
        let cand = Obb::new(
            mu * ux + mv * vx,
            mu * uy + mv * vy,
            u1 - u0,
            v1 - v0,
            uy.atan2(ux),
        );
        best = match best {
            None => Some(cand),
            Some(b) => {
                let (ca, ba) = (cand.area(), b.area());
                let tie = (ca - ba).abs() <= 1e-12 * ba.max(ca);
                if (!tie && ca < ba) || (tie && cand.theta < b.theta) {
                    Some(cand)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.ok_or_else(|| Error::Degenerate("degenerate polygon".into()))
}

/// The four corners of `b`, counter-clockwise, starting at `-w/2, -h/2` in
/// the box frame.
pub fn obb_corners(b: &Obb) -> [Point2; 4] {
    let (s, c) = b.theta.sin_cos();
    let (hw, hh) = (0.5 * b.w, 0.5 * b.h);
    let at = |a: f64, bb: f64| Point2::new(b.cx + a * c - bb * s, b.cy + a * s + bb * c);
    [at(-hw, -hh), at(hw, -hh), at(hw, hh), at(-hw, hh)]
}

fn line_intersection(p: Point2, q: Point2, a: Point2, b: Point2) -> Point2 {
    let d1 = cross(a, b, p);
    let d2 = cross(a, b, q);
    let t = d1 / (d1 - d2);
    Point2::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y))
}

pub(crate) fn clip_points(subject: &[Point2], clipper: &[Point2]) -> Vec<Point2> {
    let mut out: Vec<Point2> = subject.to_vec();
    let m = clipper.len();
    for i in 0..m {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clipper[i], clipper[(i + 1) % m]);
        let input = std::mem::take(&mut out);
        let k = input.len();
        for j in 0..k {
            let cur = input[j];
            let prev = input[(j + k - 1) % k];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    out.push(line_intersection(prev, cur, a, b));
                }
                out.push(cur);
            } else if prev_in {
                out.push(line_intersection(prev, cur, a, b));
            }
        }
    }
    out.dedup();
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

/// Intersection of two convex counter-clockwise polygons
/// (Sutherland-Hodgman). `None` when the overlap has no area.
pub fn clip_convex(subject: &Polygon, clipper: &Polygon) -> Option<Polygon> {
    let out = clip_points(subject.vertices(), clipper.vertices());
    if out.len() < 3 || signed_area(&out) <= 0.0 {
        return None;
    }
    Some(Polygon { vertices: out })
}

pub fn iou_aabb(a: &Aabb, b: &Aabb) -> f64 {
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Exact rotated IoU via convex clipping of the corner polygons.
pub fn iou_obb(a: &Obb, b: &Obb) -> f64 {
    if a == b {
        return 1.0;
    }
    let reach = 0.5 * (a.w.hypot(a.h) + b.w.hypot(b.h));
    if (a.cx - b.cx).hypot(a.cy - b.cy) > reach {
        return 0.0;
    }
    let pa = obb_corners(a);
    let pb = obb_corners(b);
    let inter_pts = clip_points(&pa, &pb);
    if inter_pts.len() < 3 {
        return 0.0;
    }
    let inter = signed_area(&inter_pts).max(0.0);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Longer side over shorter side.
pub fn aspect_ratio(b: &Obb) -> f64 {
    b.w.max(b.h) / b.w.min(b.h)
}
