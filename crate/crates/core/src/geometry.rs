//! Small planar geometry helpers shared by the dataset and feature code.

use std::f64::consts::PI;

pub type Vec2 = [f64; 2];

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale(a: Vec2, s: f64) -> Vec2 {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: Vec2, b: Vec2) -> f64 {
    norm(sub(a, b))
}

#[inline]
fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Rotates `p` counter-clockwise by `angle` radians about the origin.
pub fn rotate(p: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

const EDGE_EPS: f64 = 1e-9;

fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len = norm(ab).max(1e-300);
    if (cross(ab, ap) / len).abs() > EDGE_EPS {
        return false;
    }
    let dot = ab[0] * ap[0] + ab[1] * ap[1];
    dot >= -EDGE_EPS * len && dot <= ab[0] * ab[0] + ab[1] * ab[1] + EDGE_EPS * len
}

/// Point-in-polygon test. Points on the boundary count as inside.
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        if on_segment(p, poly[i], poly[(i + 1) % n]) {
            return true;
        }
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (pi, pj) = (poly[i], poly[j]);
        if (pi[1] > p[1]) != (pj[1] > p[1]) {
            let x = pj[0] + (p[1] - pj[1]) * (pi[0] - pj[0]) / (pi[1] - pj[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Returns the parameter `s` in [0, 1] along `p0 -> p1` where it crosses
/// segment `a -> b`, if the two closed segments intersect at a single point.
pub fn segment_crossing(p0: Vec2, p1: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let r = sub(p1, p0);
    let s = sub(b, a);
    let denom = cross(r, s);
    if denom.abs() < 1e-15 {
        return None;
    }
    let qp = sub(a, p0);
    let t = cross(qp, s) / denom;
    let u = cross(qp, r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

fn segments_intersect(p0: Vec2, p1: Vec2, a: Vec2, b: Vec2) -> bool {
    if segment_crossing(p0, p1, a, b).is_some() {
        return true;
    }
    // collinear overlap
    on_segment(p0, a, b) || on_segment(p1, a, b) || on_segment(a, p0, p1) || on_segment(b, p0, p1)
}

/// True when no two non-adjacent edges of the polygon touch.
pub fn is_simple_polygon(poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a0, a1) = (poly[i], poly[(i + 1) % n]);
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (b0, b1) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a0, a1, b0, b1) {
                return false;
            }
        }
    }
    true
}
