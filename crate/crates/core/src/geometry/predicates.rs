//! Orientation and segment predicates in double precision with an absolute
//! snapping tolerance.

use super::Point2;

/// Snapping tolerance for orientation tests.
pub const EPS_GEOM: f64 = 1e-12;

/// Twice the signed area of the triangle `a, b, c`.
#[inline]
pub fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

#[inline]
fn sign(v: f64, eps: f64) -> i8 {
    if v > eps {
        1
    } else if v < -eps {
        -1
    } else {
        0
    }
}

/// Whether `p` lies on the closed segment `[a, b]`, assuming it is collinear.
fn within_box(a: Point2, b: Point2, p: Point2, eps: f64) -> bool {
    p.x >= a.x.min(b.x) - eps
        && p.x <= a.x.max(b.x) + eps
        && p.y >= a.y.min(b.y) - eps
        && p.y <= a.y.max(b.y) + eps
}

/// Closed-segment intersection test (touching counts as intersecting).
pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let scale = 1.0_f64
        .max(a.x.abs())
        .max(a.y.abs())
        .max(b.x.abs())
        .max(b.y.abs())
        .max(c.x.abs())
        .max(c.y.abs())
        .max(d.x.abs())
        .max(d.y.abs());
    let eps = EPS_GEOM * scale * scale;
    let o1 = sign(orient(a, b, c), eps);
    let o2 = sign(orient(a, b, d), eps);
    let o3 = sign(orient(c, d, a), eps);
    let o4 = sign(orient(c, d, b), eps);
    if o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 {
        return true;
    }
    let beps = EPS_GEOM * scale;
    (o1 == 0 && within_box(a, b, c, beps))
        || (o2 == 0 && within_box(a, b, d, beps))
        || (o3 == 0 && within_box(c, d, a, beps))
        || (o4 == 0 && within_box(c, d, b, beps))
}

/// Unsigned angle at `v` between the segments towards `p` and `q`, in `[0, π]`.
pub fn vertex_angle(p: Point2, v: Point2, q: Point2) -> f64 {
    let (ux, uy) = (p.x - v.x, p.y - v.y);
    let (wx, wy) = (q.x - v.x, q.y - v.y);
    let cross = ux * wy - uy * wx;
    let dot = ux * wx + uy * wy;
    cross.abs().atan2(dot)
}

/// Counter-clockwise angle from `next - v` to `prev - v`, in `[0, 2π)`.
///
/// For a loop traversed with the region on its left this is the interior angle.
pub fn interior_angle(prev: Point2, v: Point2, next: Point2) -> f64 {
    let (ux, uy) = (next.x - v.x, next.y - v.y);
    let (wx, wy) = (prev.x - v.x, prev.y - v.y);
    let cross = ux * wy - uy * wx;
    let dot = ux * wx + uy * wy;
    let a = cross.atan2(dot);
    if a < 0.0 {
        a + std::f64::consts::TAU
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn crossing_and_disjoint() {
        assert!(segments_intersect(p(0., 0.), p(1., 1.), p(0., 1.), p(1., 0.)));
        assert!(!segments_intersect(p(0., 0.), p(1., 0.), p(0., 1.), p(1., 1.)));
        // touching at an endpoint
        assert!(segments_intersect(p(0., 0.), p(1., 0.), p(1., 0.), p(2., 5.)));
        // collinear, overlapping
        assert!(segments_intersect(p(0., 0.), p(2., 0.), p(1., 0.), p(3., 0.)));
        // collinear, disjoint
        assert!(!segments_intersect(p(0., 0.), p(1., 0.), p(2., 0.), p(3., 0.)));
    }

    #[test]
    fn angles() {
        let a = interior_angle(p(0., 1.), p(0., 0.), p(1., 0.));
        assert!((a - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let r = interior_angle(p(1., 0.), p(0., 0.), p(0., 1.));
        assert!((r - 1.5 * std::f64::consts::PI).abs() < 1e-15);
        let v = vertex_angle(p(1., 0.), p(0., 0.), p(0., 2.));
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}
