//! Planar geometry in the local harbour frame (x north, y east, metres).
//!
//! All predicates treat shapes as closed sets: touching counts as
//! intersecting.

use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }

    pub fn of_points(points: &[Point]) -> Option<Aabb> {
        let first = *points.first()?;
        let mut b = Aabb {
            min: first,
            max: first,
        };
        for p in points {
            b.min[0] = b.min[0].min(p[0]);
            b.min[1] = b.min[1].min(p[1]);
            b.max[0] = b.max[0].max(p[0]);
            b.max[1] = b.max[1].max(p[1]);
        }
        Some(b)
    }

    fn overlaps(&self, other: &Aabb) -> bool {
        self.min[0] <= other.max[0]
            && other.min[0] <= self.max[0]
            && self.min[1] <= other.max[1]
            && other.min[1] <= self.max[1]
    }
}

/// Simple polygon, vertices in order, implicitly closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Polygon { vertices }
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::of_points(&self.vertices).unwrap_or(Aabb {
            min: [0.0, 0.0],
            max: [0.0, 0.0],
        })
    }

    /// Signed shoelace area (positive counter-clockwise in x-y axes).
    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| cross(a, b)).sum::<f64>()
    }

    /// Closed point-in-polygon: boundary points are inside.
    pub fn contains(&self, p: Point) -> bool {
        if self.vertices.len() < 3 {
            return false;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if on_segment(p, a, b) {
                return true;
            }
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x_cross = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// True when no two non-adjacent edges meet and no edge is degenerate.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let edges: Vec<(Point, Point)> = self.edges().collect();
        if edges.iter().any(|(a, b)| a == b) {
            return false;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(edges[i].0, edges[i].1, edges[j].0, edges[j].1).is_some() {
                    return false;
                }
            }
        }
        true
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Polygon {
        Polygon::new(
            self.vertices
                .iter()
                .map(|v| [v[0] + dx, v[1] + dy])
                .collect(),
        )
    }
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    if cross(sub(b, a), sub(p, a)) != 0.0 {
        return false;
    }
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// A point common to the closed segments ab and cd, if any.
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> Option<Point> {
    let r = sub(b, a);
    let s = sub(d, c);
    let denom = cross(r, s);
    let qp = sub(c, a);
    if denom == 0.0 {
        if cross(qp, r) != 0.0 {
            return None;
        }
        // collinear: any shared endpoint or contained endpoint
        for p in [c, d] {
            if on_segment(p, a, b) {
                return Some(p);
            }
        }
        for p in [a, b] {
            if on_segment(p, c, d) {
                return Some(p);
            }
        }
        return None;
    }
    let t = cross(qp, s) / denom;
    let u = cross(qp, r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some([a[0] + t * r[0], a[1] + t * r[1]])
    } else {
        None
    }
}

/// Polyline length.
pub fn polyline_length(points: &[Point]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
        .sum()
}

/// Ship outline as an oriented rectangle centred at (x, y), heading psi
/// (clockwise from north, so the bow points along (cos psi, sin psi)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub length: f64,
    pub beam: f64,
}

impl Footprint {
    pub fn new(x: f64, y: f64, heading: f64, length: f64, beam: f64) -> Self {
        Footprint {
            x,
            y,
            heading,
            length,
            beam,
        }
    }

    fn axes(&self) -> (Point, Point) {
        let (s, c) = self.heading.sin_cos();
        ([c, s], [-s, c])
    }

    /// Corners: bow-starboard, bow-port, stern-port, stern-starboard.
    pub fn corners(&self) -> [Point; 4] {
        let (fwd, stbd) = self.axes();
        let hl = 0.5 * self.length;
        let hb = 0.5 * self.beam;
        let at = |a: f64, b: f64| {
            [
                self.x + a * fwd[0] + b * stbd[0],
                self.y + a * fwd[1] + b * stbd[1],
            ]
        };
        [at(hl, hb), at(hl, -hb), at(-hl, -hb), at(-hl, hb)]
    }

    pub fn polygon(&self) -> Polygon {
        Polygon::new(self.corners().to_vec())
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Footprint {
        Footprint {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }
}

/// Separating-axis test for two oriented rectangles (closed sets).
pub fn footprints_overlap(a: &Footprint, b: &Footprint) -> bool {
    let ca = a.corners();
    let cb = b.corners();
    let (fa, sa) = a.axes();
    let (fb, sb) = b.axes();
    for axis in [fa, sa, fb, sb] {
        let proj = |pts: &[Point; 4]| {
            pts.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    let d = dot(*p, axis);
                    (lo.min(d), hi.max(d))
                })
        };
        let (amin, amax) = proj(&ca);
        let (bmin, bmax) = proj(&cb);
        if amax < bmin || bmax < amin {
            return false;
        }
    }
    true
}

/// A point shared by two closed polygons, or None when they are disjoint.
/// Vertices inside the other shape are preferred, then edge crossings.
pub fn polygons_contact(a: &Polygon, b: &Polygon) -> Option<Point> {
    if !a.bbox().overlaps(&b.bbox()) {
        return None;
    }
    for v in &a.vertices {
        if b.contains(*v) {
            return Some(*v);
        }
    }
    for v in &b.vertices {
        if a.contains(*v) {
            return Some(*v);
        }
    }
    for (p, q) in a.edges() {
        for (r, s) in b.edges() {
            if let Some(x) = segments_intersect(p, q, r, s) {
                return Some(x);
            }
        }
    }
    None
}

/// Closed disc test.
pub fn circle_contains(center: Point, radius: f64, p: Point) -> bool {
    let d = sub(p, center);
    dot(d, d) <= radius * radius
}
