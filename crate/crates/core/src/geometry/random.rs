//! Seeded random generators: incremental simple polygons, star-shaped
//! polygons, jittered rectangles and differences of stars with the optimal
//! rectangle.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::predicates::{segments_intersect, vertex_angle};
use super::{boolean, Domain, DomainClass, GeomConfig, Point2, PolyLoop};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Random simple polygon with `n` vertices in `[0,1]²`.
pub fn random_simple_polygon(n: usize, seed: u64) -> Result<Domain> {
    random_simple_polygon_with(n, seed, &GeomConfig::default())
}

/// Vertices are appended one at a time; a candidate is redrawn while its new
/// side crosses an earlier side or makes an angle below the floor. The last
/// vertex must also close the loop cleanly. A stage that needs more than
/// `max_attempts` draws fails the whole construction.
pub fn random_simple_polygon_with(n: usize, seed: u64, cfg: &GeomConfig) -> Result<Domain> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("polygon needs ≥ 3 vertices, got {n}")));
    }
    let floor = cfg.min_angle();
    let mut rng = Stream::new(seed);
    let draw = |rng: &mut Stream| Point2::new(rng.uniform(), rng.uniform());

    let mut v: Vec<Point2> = Vec::with_capacity(n);
    v.push(draw(&mut rng));
    v.push(draw(&mut rng));
    for stage in 2..n {
        let closing = stage == n - 1;
        let mut placed = false;
        for _ in 0..cfg.max_attempts {
            let c = draw(&mut rng);
            if accept(&v, c, closing, floor) {
                v.push(c);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::GenerationFailed { stage: stage + 1, attempts: cfg.max_attempts });
        }
    }
    let outer = PolyLoop::new(v)?.oriented(true);
    Domain::with_config(outer, vec![], DomainClass::Polygon, vec![("n".into(), n as f64)], cfg)
        .map_err(|_| Error::GenerationFailed { stage: n, attempts: cfg.max_attempts })
}

fn accept(v: &[Point2], c: Point2, closing: bool, floor: f64) -> bool {
    let j = v.len();
    let last = v[j - 1];
    if c.dist(last) < 1e-9 {
        return false;
    }
    // new side [v_{j-1}, c] against sides [v_{k-1}, v_k], k ≤ j-2
    for k in 1..j.saturating_sub(1) {
        if segments_intersect(last, c, v[k - 1], v[k]) {
            return false;
        }
    }
    if vertex_angle(v[j - 2], last, c) < floor {
        return false;
    }
    if closing {
        let first = v[0];
        // closing side [c, v_0] against sides not touching v_0 or c
        for k in 2..j {
            if segments_intersect(c, first, v[k - 1], v[k]) {
                return false;
            }
        }
        if vertex_angle(last, c, first) < floor || vertex_angle(c, first, v[1]) < floor {
            return false;
        }
        // interior angles below the floor can also be reflex-side slivers
        let mut all = v.to_vec();
        all.push(c);
        let l = match PolyLoop::new(all) {
            Ok(l) => l.oriented(true),
            Err(_) => return false,
        };
        if l.interior_angles().iter().any(|&a| a < floor) {
            return false;
        }
    }
    true
}

/// Star-shaped polygon `r_k e^{iθ_k}` with sorted uniform angles and radii
/// uniform in `[r1, r2]`, centred at the origin.
pub fn random_star_polygon(n: usize, r1: f64, r2: f64, seed: u64) -> Result<Domain> {
    random_star_polygon_with(n, r1, r2, seed, &GeomConfig::default())
}

pub fn random_star_polygon_with(n: usize, r1: f64, r2: f64, seed: u64, cfg: &GeomConfig) -> Result<Domain> {
    let outer = star_loop(n, r1, r2, &mut Stream::new(seed), cfg)?;
    Domain::with_config(
        outer,
        vec![],
        DomainClass::Star,
        vec![("n".into(), n as f64), ("r1".into(), r1), ("r2".into(), r2)],
        cfg,
    )
}

/// Smallest angular gap allowed between consecutive star vertices.
const STAR_ANGLE_FLOOR: f64 = 1e-3;

fn star_loop(n: usize, r1: f64, r2: f64, rng: &mut Stream, cfg: &GeomConfig) -> Result<PolyLoop> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("star needs ≥ 3 vertices, got {n}")));
    }
    if !(r1 > 0.0 && r1 <= r2 && r2.is_finite()) {
        return Err(Error::InvalidParameter(format!("star radii must satisfy 0 < r1 ≤ r2, got ({r1}, {r2})")));
    }
    for _ in 0..cfg.max_attempts {
        let mut pairs: Vec<(f64, f64)> = (0..n).map(|_| (rng.range(0.0, TAU), rng.range(r1, r2))).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let gaps_ok = (0..n).all(|i| {
            let next = if i + 1 < n { pairs[i + 1].0 } else { pairs[0].0 + TAU };
            let gap = next - pairs[i].0;
            (STAR_ANGLE_FLOOR..std::f64::consts::PI).contains(&gap)
        });
        if !gaps_ok {
            continue;
        }
        let pts: Vec<Point2> = pairs.iter().map(|&(t, r)| Point2::new(r * t.cos(), r * t.sin())).collect();
        let Ok(l) = PolyLoop::new(pts) else { continue };
        if l.interior_angles().iter().all(|&a| a >= cfg.min_angle()) && l.is_simple() {
            return Ok(l.oriented(true));
        }
    }
    Err(Error::GenerationFailed { stage: 1, attempts: cfg.max_attempts })
}

/// `R_a` with `extra` points on its sides; all `4 + extra` points are then
/// moved by at most `0.1·a`.
pub fn perturbed_rectangle(a: f64, extra: usize, seed: u64, cfg: &GeomConfig) -> Result<Domain> {
    if !(a >= 1.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("side ratio a = {a} must be ≥ 1")));
    }
    let mut rng = Stream::new(seed);
    let perim = 2.0 + 2.0 * a;
    let on_boundary = |s: f64| -> Point2 {
        if s < 1.0 {
            Point2::new(s, 0.0)
        } else if s < 1.0 + a {
            Point2::new(1.0, s - 1.0)
        } else if s < 2.0 + a {
            Point2::new(2.0 + a - s, a)
        } else {
            Point2::new(0.0, perim - s)
        }
    };
    for _ in 0..cfg.max_attempts {
        let mut arcs = vec![0.0, 1.0, 1.0 + a, 2.0 + a];
        for _ in 0..extra {
            arcs.push(rng.range(0.0, perim));
        }
        arcs.sort_by(f64::total_cmp);
        let pts: Vec<Point2> = arcs
            .iter()
            .map(|&s| {
                let p = on_boundary(s);
                let rho = 0.1 * a * rng.uniform().sqrt();
                let phi = rng.range(0.0, TAU);
                Point2::new(p.x + rho * phi.cos(), p.y + rho * phi.sin())
            })
            .collect();
        let Ok(l) = PolyLoop::new(pts) else { continue };
        let params = vec![("a".into(), a), ("extra".into(), extra as f64)];
        if let Ok(d) = Domain::with_config(l, vec![], DomainClass::Polygon, params, cfg) {
            return Ok(d);
        }
    }
    Err(Error::GenerationFailed { stage: 1, attempts: cfg.max_attempts })
}

/// Which difference to build around `R_{√(8/3)}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StarDifferenceKind {
    /// Rectangle minus a star inside it.
    RectMinusStar,
    /// Star containing the rectangle, minus the rectangle.
    StarMinusRect,
    /// One star minus another, overlapping, star.
    StarMinusStar,
}

impl StarDifferenceKind {
    pub fn code(self) -> f64 {
        match self {
            StarDifferenceKind::RectMinusStar => 0.0,
            StarDifferenceKind::StarMinusRect => 1.0,
            StarDifferenceKind::StarMinusStar => 2.0,
        }
    }
}

/// Difference domains built from random stars and `R_{√(8/3)}`. Returns the
/// connected components; more than one means a disjoint union.
pub fn star_difference(kind: StarDifferenceKind, n: usize, seed: u64, cfg: &GeomConfig) -> Result<Vec<Domain>> {
    let a = (8.0f64 / 3.0).sqrt();
    let centre = Point2::new(0.5, 0.5 * a);
    let rect = vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, a),
        Point2::new(0.0, a),
    ];
    let half_diag = 0.5 * (1.0 + a * a).sqrt();
    let shift = |l: &PolyLoop, c: Point2| -> Vec<Point2> {
        l.vertices().iter().map(|p| Point2::new(p.x + c.x, p.y + c.y)).collect()
    };
    let mut rng = Stream::new(seed);
    let params = vec![("kind".to_string(), kind.code()), ("n".to_string(), n as f64)];
    let min_sep = 1e-4;
    for _ in 0..cfg.max_attempts {
        let pieces = match kind {
            StarDifferenceKind::RectMinusStar => {
                let s = star_loop(n, 0.15, 0.45, &mut rng, cfg)?;
                boolean::difference(std::slice::from_ref(&rect), &[shift(&s, centre)], min_sep)?
            }
            StarDifferenceKind::StarMinusRect => {
                let s = star_loop(n, 1.05 * half_diag, 2.0 * half_diag, &mut rng, cfg)?;
                let s = shift(&s, centre);
                let sl = PolyLoop::new(s.clone())?;
                if !rect.iter().all(|&p| sl.contains(p)) || rect_crosses(&sl, &rect) {
                    continue;
                }
                boolean::difference(&[s], std::slice::from_ref(&rect), min_sep)?
            }
            StarDifferenceKind::StarMinusStar => {
                let s1 = star_loop(n, 0.5, 1.0, &mut rng, cfg)?;
                let s2 = star_loop(n, 0.2, 0.6, &mut rng, cfg)?;
                let off = Point2::new(rng.range(-0.5, 0.5), rng.range(-0.5, 0.5));
                boolean::difference(&[s1.vertices().to_vec()], &[shift(&s2, off)], min_sep)?
            }
        };
        if pieces.is_empty() {
            continue;
        }
        let domains: Result<Vec<Domain>> = pieces
            .into_iter()
            .map(|(o, h)| Domain::with_config(o, h, DomainClass::Difference, params.clone(), cfg))
            .collect();
        if let Ok(d) = domains {
            return Ok(d);
        }
    }
    Err(Error::GenerationFailed { stage: 1, attempts: cfg.max_attempts })
}

fn rect_crosses(l: &PolyLoop, rect: &[Point2]) -> bool {
    let n = rect.len();
    l.segments().any(|(a, b)| (0..n).any(|i| segments_intersect(a, b, rect[i], rect[(i + 1) % n])))
}
