//! Deterministic generators: rectangles, triangles, quadrilaterals, ellipses,
//! annulus sectors, dumbbells and jigsaw pieces.

use std::f64::consts::{PI, TAU};

use super::{boolean, Domain, DomainClass, GeomConfig, Point2, PolyLoop};
use crate::error::{Error, Result};

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must be positive")))
    }
}

fn params(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

/// `[0, 1] × [0, a]`, `a ≥ 1`.
pub fn make_rectangle(a: f64) -> Result<Domain> {
    if !(a >= 1.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("side ratio a = {a} must be ≥ 1")));
    }
    let outer = PolyLoop::new(vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, a),
        Point2::new(0.0, a),
    ])?;
    Domain::new(outer, vec![], DomainClass::Rectangle, params(&[("a", a)]))
}

/// Triangle on the unit base `(0,0)–(1,0)` with angles `alpha` at the origin
/// and `beta` at `(1, 0)` (radians).
pub fn make_triangle(alpha: f64, beta: f64) -> Result<Domain> {
    if !(alpha > 0.0 && beta > 0.0 && alpha + beta < PI) {
        return Err(Error::InvalidParameter(format!(
            "triangle angles ({alpha}, {beta}) must be positive with sum below π"
        )));
    }
    let side = beta.sin() / (alpha + beta).sin();
    let outer = PolyLoop::new(vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(side * alpha.cos(), side * alpha.sin()),
    ])?;
    Domain::new(outer, vec![], DomainClass::Triangle, params(&[("alpha", alpha), ("beta", beta)]))
}

/// Quadrilateral built on a unit diagonal `(0,0)–(1,0)`: the upper triangle has
/// angles `(alpha, beta)` at the diagonal's ends, the lower one `(gamma, delta)`.
pub fn make_quadrilateral(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<Domain> {
    let ok = |p: f64, q: f64| p > 0.0 && q > 0.0 && p < PI && q < PI && p + q < PI;
    if !(ok(alpha, beta) && ok(gamma, delta)) {
        return Err(Error::InvalidParameter(format!(
            "quadrilateral angles ({alpha}, {beta}, {gamma}, {delta}) out of range"
        )));
    }
    let up = beta.sin() / (alpha + beta).sin();
    let down = delta.sin() / (gamma + delta).sin();
    let outer = PolyLoop::new(vec![
        Point2::new(0.0, 0.0),
        Point2::new(down * gamma.cos(), -down * gamma.sin()),
        Point2::new(1.0, 0.0),
        Point2::new(up * alpha.cos(), up * alpha.sin()),
    ])?;
    Domain::new(
        outer,
        vec![],
        DomainClass::Quadrilateral,
        params(&[("alpha", alpha), ("beta", beta), ("gamma", gamma), ("delta", delta)]),
    )
}

/// Regular `n`-gon inscribed in the circle of radius `r` about `c`,
/// counter-clockwise, first vertex at angle 0.
pub fn circle_loop(c: Point2, r: f64, n: usize) -> Vec<Point2> {
    (0..n)
        .map(|k| {
            let t = TAU * k as f64 / n as f64;
            Point2::new(c.x + r * t.cos(), c.y + r * t.sin())
        })
        .collect()
}

/// Polygonal unit disk with `arc_segments` vertices.
pub fn make_disk(arc_segments: usize) -> Result<Domain> {
    let cfg = GeomConfig { arc_segments, ..GeomConfig::default() };
    let outer = PolyLoop::new(circle_loop(Point2::new(0.0, 0.0), 1.0, arc_segments))?;
    Domain::with_config(outer, vec![], DomainClass::Ellipse, params(&[("b", 1.0)]), &cfg)
}

/// Ellipse with semi-axes `1` and `b ≥ 1`.
pub fn make_ellipse(b: f64, cfg: &GeomConfig) -> Result<Domain> {
    if !(b >= 1.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("axis ratio {b} must be ≥ 1")));
    }
    let n = cfg.arc_segments;
    let pts = (0..n)
        .map(|k| {
            let t = TAU * k as f64 / n as f64;
            Point2::new(t.cos(), b * t.sin())
        })
        .collect();
    Domain::with_config(PolyLoop::new(pts)?, vec![], DomainClass::Ellipse, params(&[("b", b)]), cfg)
}

/// Sector `{1 ≤ ρ ≤ r, 0 ≤ φ ≤ theta}` of the annulus.
pub fn make_sector(r: f64, theta: f64) -> Result<Domain> {
    make_sector_with(r, theta, &GeomConfig::default())
}

pub fn make_sector_with(r: f64, theta: f64, cfg: &GeomConfig) -> Result<Domain> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("outer radius {r} must exceed 1")));
    }
    let (lo, hi) = (0.01 * PI, 1.99 * PI);
    if !(theta >= lo - 1e-12 && theta <= hi + 1e-12) {
        return Err(Error::InvalidParameter(format!("sector angle {theta} outside [0.01π, 1.99π]")));
    }
    let segs = ((cfg.arc_segments as f64 * theta / TAU).ceil() as usize).max(2);
    let mut pts = Vec::with_capacity(2 * segs + 2);
    for k in 0..=segs {
        let t = theta * k as f64 / segs as f64;
        pts.push(Point2::new(r * t.cos(), r * t.sin()));
    }
    for k in (0..=segs).rev() {
        let t = theta * k as f64 / segs as f64;
        pts.push(Point2::new(t.cos(), t.sin()));
    }
    Domain::with_config(
        PolyLoop::new(pts)?,
        vec![],
        DomainClass::Sector,
        params(&[("r", r), ("theta", theta)]),
        cfg,
    )
}

/// `([0,l] × [−h/2,h/2]) ∪ C((0,0), r1) ∪ C((l,0), r2)`; `h` is the full strip height.
pub fn make_dumbbell(l: f64, h: f64, r1: f64, r2: f64) -> Result<Domain> {
    make_dumbbell_with(l, h, r1, r2, &GeomConfig::default())
}

pub fn make_dumbbell_with(l: f64, h: f64, r1: f64, r2: f64, cfg: &GeomConfig) -> Result<Domain> {
    for (name, v) in [("l", l), ("h", h), ("r1", r1), ("r2", r2)] {
        positive(name, v)?;
    }
    let n = cfg.arc_segments;
    let rect = vec![
        Point2::new(0.0, -0.5 * h),
        Point2::new(l, -0.5 * h),
        Point2::new(l, 0.5 * h),
        Point2::new(0.0, 0.5 * h),
    ];
    let c1 = circle_loop(Point2::new(0.0, 0.0), r1, n);
    let c2 = circle_loop(Point2::new(l, 0.0), r2, n);
    let chord = TAU * r1.min(r2) / n as f64;
    let parts = boolean::union(&[rect, c1, c2], 0.25 * chord)?;
    if parts.len() != 1 {
        return Err(Error::Geometry(format!("dumbbell union has {} components", parts.len())));
    }
    let (outer, holes) = parts.into_iter().next().unwrap();
    Domain::with_config(
        outer,
        holes,
        DomainClass::Dumbbell,
        params(&[("l", l), ("h", h), ("r1", r1), ("r2", r2)]),
        cfg,
    )
}

/// Jigsaw piece `([0,a] × [0,1]) \ C((cx,cy), r)`. The disk must cross the
/// rectangle's boundary.
pub fn make_jigsaw(a: f64, cx: f64, cy: f64, r: f64) -> Result<Domain> {
    make_jigsaw_with(a, cx, cy, r, &GeomConfig::default())
}

pub fn make_jigsaw_with(a: f64, cx: f64, cy: f64, r: f64, cfg: &GeomConfig) -> Result<Domain> {
    if !(a >= 1.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("side ratio a = {a} must be ≥ 1")));
    }
    positive("r", r)?;
    if !(cx.is_finite() && cy.is_finite()) {
        return Err(Error::InvalidParameter("circle centre must be finite".into()));
    }
    let dist_to_edge = cx.min(a - cx).min(cy).min(1.0 - cy);
    if dist_to_edge > r {
        return Err(Error::Geometry("circle lies strictly inside the rectangle".into()));
    }
    let corners = [(0.0, 0.0), (a, 0.0), (a, 1.0), (0.0, 1.0)];
    if corners.iter().all(|&(x, y)| (x - cx).hypot(y - cy) <= r) {
        return Err(Error::Geometry("circle covers the rectangle".into()));
    }
    let rect = corners.iter().map(|&(x, y)| Point2::new(x, y)).collect::<Vec<_>>();
    let disk = circle_loop(Point2::new(cx, cy), r, cfg.arc_segments);
    let chord = TAU * r / cfg.arc_segments as f64;
    let parts = boolean::difference(&[rect], &[disk], 0.25 * chord.min(1e-2))?;
    match parts.len() {
        0 => Err(Error::Geometry("circle covers the rectangle".into())),
        1 => {
            let (outer, holes) = parts.into_iter().next().unwrap();
            Domain::with_config(
                outer,
                holes,
                DomainClass::Jigsaw,
                params(&[("a", a), ("cx", cx), ("cy", cy), ("r", r)]),
                cfg,
            )
        }
        k => Err(Error::Geometry(format!("jigsaw piece splits into {k} components"))),
    }
}
