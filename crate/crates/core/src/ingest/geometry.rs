//! Planar polygon helpers. Coordinates are lon/lat treated as planar,
//! which is adequate at city scale.

use serde::{Deserialize, Serialize};

pub type Point = (f64, f64);
pub type Ring = Vec<Point>;

/// Points closer than this to an edge count as lying on the boundary.
pub const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn empty() -> Self {
        BBox {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        }
    }

    pub fn extend(&mut self, p: Point) {
        self.min_x = self.min_x.min(p.0);
        self.min_y = self.min_y.min(p.1);
        self.max_x = self.max_x.max(p.0);
        self.max_y = self.max_y.max(p.1);
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
        }
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p.0 >= self.min_x - tol && p.0 <= self.max_x + tol && p.1 >= self.min_y - tol && p.1 <= self.max_y + tol
    }

    pub fn intersects(&self, other: &BBox, tol: f64) -> bool {
        self.min_x <= other.max_x + tol
            && other.min_x <= self.max_x + tol
            && self.min_y <= other.max_y + tol
            && other.min_y <= self.max_y + tol
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

pub fn rings_bbox(rings: &[Ring]) -> BBox {
    let mut b = BBox::empty();
    for p in rings.iter().flatten() {
        b.extend(*p);
    }
    b
}

/// Closes a ring in place if its last point differs from the first.
pub fn close_ring(ring: &mut Ring) {
    if let (Some(first), Some(last)) = (ring.first().copied(), ring.last().copied()) {
        if first != last {
            ring.push(first);
        }
    }
}

/// Even-odd crossing test over a single closed ring.
fn ring_crossings(ring: &[Point], p: Point) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.1 > p.1) != (b.1 > p.1) {
            let x = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
            if p.0 < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Even-odd rule over all rings; holes and multipart polygons fall out
/// naturally.
pub fn contains_even_odd(rings: &[Ring], p: Point) -> bool {
    rings.iter().fold(false, |acc, r| acc ^ ring_crossings(r, p))
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

pub fn on_boundary(rings: &[Ring], p: Point, tol: f64) -> bool {
    rings
        .iter()
        .any(|r| r.windows(2).any(|w| point_segment_distance(p, w[0], w[1]) <= tol))
}

pub fn signed_area(ring: &[Point]) -> f64 {
    ring.windows(2)
        .map(|w| w[0].0 * w[1].1 - w[1].0 * w[0].1)
        .sum::<f64>()
        / 2.0
}

/// Area-weighted centroid. Rings nested an odd number of times inside
/// other rings are treated as holes, consistent with the even-odd rule.
pub fn centroid(rings: &[Ring]) -> Point {
    let mut total = 0.0;
    let (mut cx, mut cy) = (0.0, 0.0);
    for (i, ring) in rings.iter().enumerate() {
        if ring.len() < 4 {
            continue;
        }
        let depth = rings
            .iter()
            .enumerate()
            .filter(|(j, other)| *j != i && ring_crossings(other, ring[0]))
            .count();
        let sign = if depth % 2 == 0 { 1.0 } else { -1.0 };
        let a = signed_area(ring);
        let (mut rx, mut ry) = (0.0, 0.0);
        for w in ring.windows(2) {
            let cross = w[0].0 * w[1].1 - w[1].0 * w[0].1;
            rx += (w[0].0 + w[1].0) * cross;
            ry += (w[0].1 + w[1].1) * cross;
        }
        if a != 0.0 {
            // ring centroid times |area|, signed by nesting parity
            let (gx, gy) = (rx / (6.0 * a), ry / (6.0 * a));
            total += sign * a.abs();
            cx += sign * a.abs() * gx;
            cy += sign * a.abs() * gy;
        }
    }
    let bb = rings_bbox(rings);
    if total.abs() <= f64::EPSILON * bb.width() * bb.height() {
        return ((bb.min_x + bb.max_x) / 2.0, (bb.min_y + bb.max_y) / 2.0);
    }
    let c = (cx / total, cy / total);
    // numerical guard: stay inside the bounding box
    (c.0.clamp(bb.min_x, bb.max_x), c.1.clamp(bb.min_y, bb.max_y))
}
