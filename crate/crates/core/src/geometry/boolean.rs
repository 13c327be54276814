//! Polygon union and difference on discretized loops, backed by `geo`.

use geo::{BooleanOps, Coord, LineString, MultiPolygon, Polygon};

use super::{clean_vertices, Point2, PolyLoop};
use crate::error::{Error, Result};

/// One connected piece: outer loop and holes.
pub type Piece = (PolyLoop, Vec<PolyLoop>);

fn to_polygon(pts: &[Point2]) -> Polygon<f64> {
    let ring: Vec<Coord<f64>> = pts.iter().map(|p| Coord { x: p.x, y: p.y }).collect();
    Polygon::new(LineString::from(ring), vec![])
}

fn to_multi(loops: &[Vec<Point2>]) -> MultiPolygon<f64> {
    let mut acc = MultiPolygon::new(vec![]);
    for l in loops {
        acc = acc.union(&to_polygon(l));
    }
    acc
}

fn ring_points(ring: &LineString<f64>, min_sep: f64) -> Result<Option<PolyLoop>> {
    let mut pts: Vec<Point2> = ring.coords().map(|c| Point2::new(c.x, c.y)).collect();
    if pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    let pts = clean_vertices(pts, min_sep);
    if pts.len() < 3 {
        return Ok(None);
    }
    PolyLoop::new(pts).map(Some)
}

fn pieces(mp: MultiPolygon<f64>, min_sep: f64) -> Result<Vec<Piece>> {
    let mut out = Vec::new();
    for poly in mp {
        let Some(outer) = ring_points(poly.exterior(), min_sep)? else { continue };
        if outer.signed_area().abs() < min_sep * min_sep {
            continue;
        }
        let mut holes = Vec::new();
        for ring in poly.interiors() {
            if let Some(h) = ring_points(ring, min_sep)? {
                if h.signed_area().abs() >= min_sep * min_sep {
                    holes.push(h.oriented(false));
                }
            }
        }
        out.push((outer.oriented(true), holes));
    }
    Ok(out)
}

fn check_input(loops: &[Vec<Point2>]) -> Result<()> {
    for l in loops {
        if l.len() < 3 || l.iter().any(|p| !p.is_finite()) {
            return Err(Error::Geometry("boolean operand must be a finite loop with ≥ 3 vertices".into()));
        }
    }
    Ok(())
}

/// Union of simple loops. Vertices closer than `min_sep` are merged in the
/// output, and collinear vertices are dropped.
pub fn union(loops: &[Vec<Point2>], min_sep: f64) -> Result<Vec<Piece>> {
    check_input(loops)?;
    pieces(to_multi(loops), min_sep)
}

/// `(∪ a) \ (∪ b)`, split into connected pieces.
pub fn difference(a: &[Vec<Point2>], b: &[Vec<Point2>], min_sep: f64) -> Result<Vec<Piece>> {
    check_input(a)?;
    check_input(b)?;
    let res = to_multi(a).difference(&to_multi(b));
    pieces(res, min_sep)
}
