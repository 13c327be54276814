//! Planar domains: polygonal loops, validation, JSON interchange and the
//! generators for every domain family used by the campaigns.

mod boolean;
pub mod predicates;
mod random;
mod shapes;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use predicates::{interior_angle, segments_intersect};

pub use boolean::{difference, union};
pub use random::{
    perturbed_rectangle, random_simple_polygon, random_simple_polygon_with, random_star_polygon,
    random_star_polygon_with, star_difference, StarDifferenceKind,
};
pub use shapes::{
    circle_loop, make_disk, make_dumbbell, make_dumbbell_with, make_ellipse, make_jigsaw,
    make_jigsaw_with, make_quadrilateral, make_rectangle, make_sector, make_sector_with,
    make_triangle,
};

/// Point in the plane. Domains carry no units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn midpoint(self, o: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + o.x), 0.5 * (self.y + o.y))
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

/// Knobs shared by the generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeomConfig {
    /// Number of chords used for a full circle; arcs get a proportional share.
    pub arc_segments: usize,
    /// Smallest admissible interior angle, in degrees.
    pub min_angle_deg: f64,
    /// Random draws allowed per construction stage.
    pub max_attempts: usize,
}

impl Default for GeomConfig {
    fn default() -> Self {
        Self { arc_segments: 256, min_angle_deg: 5.0, max_attempts: 200 }
    }
}

impl GeomConfig {
    pub fn min_angle(&self) -> f64 {
        self.min_angle_deg.to_radians()
    }
}

/// Closed polygonal chain; the closing edge is implicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolyLoop {
    vertices: Vec<Point2>,
}

impl PolyLoop {
    /// Builds a loop, checking vertex count, finiteness and that consecutive
    /// vertices are distinct. Simplicity is checked by [`PolyLoop::is_simple`].
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Geometry(format!("loop has {} vertices, need at least 3", vertices.len())));
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(Error::Geometry(format!("non-finite vertex {p:?}")));
        }
        let n = vertices.len();
        for i in 0..n {
            if vertices[i] == vertices[(i + 1) % n] {
                return Err(Error::Geometry(format!("repeated consecutive vertex at index {i}")));
            }
        }
        Ok(Self { vertices })
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

    /// Segments `(v_i, v_{i+1})`, including the closing one.
    pub fn segments(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area; positive for counter-clockwise loops.
    pub fn signed_area(&self) -> f64 {
        self.segments().map(|(a, b)| a.x * b.y - b.x * a.y).sum::<f64>() * 0.5
    }

    pub fn perimeter(&self) -> f64 {
        self.segments().map(|(a, b)| a.dist(b)).sum()
    }

    pub fn reversed(&self) -> PolyLoop {
        let mut v = self.vertices.clone();
        v.reverse();
        PolyLoop { vertices: v }
    }

    /// Same loop with the requested orientation.
    pub fn oriented(self, ccw: bool) -> PolyLoop {
        if (self.signed_area() > 0.0) == ccw {
            self
        } else {
            self.reversed()
        }
    }

    /// No two non-adjacent segments intersect. O(n²).
    pub fn is_simple(&self) -> bool {
        let v = &self.vertices;
        let n = v.len();
        for i in 0..n {
            let (a, b) = (v[i], v[(i + 1) % n]);
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (c, d) = (v[j], v[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        // Adjacent segments folding back onto each other.
        (0..n).all(|i| {
            let p = v[(i + n - 1) % n];
            let q = v[(i + 1) % n];
            predicates::vertex_angle(p, v[i], q) > 0.0
        })
    }

    /// Even-odd point containment (points on the boundary are unspecified).
    pub fn contains(&self, p: Point2) -> bool {
        let mut inside = false;
        for (a, b) in self.segments() {
            if (a.y > p.y) != (b.y > p.y) {
                let t = (p.y - a.y) / (b.y - a.y);
                if p.x < a.x + t * (b.x - a.x) {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Interior angles assuming the region lies to the left of the traversal.
    pub fn interior_angles(&self) -> Vec<f64> {
        let v = &self.vertices;
        let n = v.len();
        (0..n).map(|i| interior_angle(v[(i + n - 1) % n], v[i], v[(i + 1) % n])).collect()
    }

    fn map(&self, f: impl Fn(Point2) -> Point2) -> PolyLoop {
        PolyLoop { vertices: self.vertices.iter().map(|&p| f(p)).collect() }
    }

    fn intersects_loop(&self, other: &PolyLoop) -> bool {
        self.segments().any(|(a, b)| other.segments().any(|(c, d)| segments_intersect(a, b, c, d)))
    }
}

/// Family a domain was drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainClass {
    Rectangle,
    Triangle,
    Quadrilateral,
    Ellipse,
    Sector,
    Polygon,
    Star,
    Dumbbell,
    Jigsaw,
    Difference,
    Custom,
}

impl DomainClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainClass::Rectangle => "rectangle",
            DomainClass::Triangle => "triangle",
            DomainClass::Quadrilateral => "quadrilateral",
            DomainClass::Ellipse => "ellipse",
            DomainClass::Sector => "sector",
            DomainClass::Polygon => "polygon",
            DomainClass::Star => "star",
            DomainClass::Dumbbell => "dumbbell",
            DomainClass::Jigsaw => "jigsaw",
            DomainClass::Difference => "difference",
            DomainClass::Custom => "custom",
        }
    }
}

impl fmt::Display for DomainClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A bounded planar region: one counter-clockwise outer loop and clockwise
/// holes, validated at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    outer: PolyLoop,
    holes: Vec<PolyLoop>,
    class: DomainClass,
    params: Vec<(String, f64)>,
    arc_segments: usize,
}

impl Domain {
    /// Validates with the default [`GeomConfig`].
    pub fn new(
        outer: PolyLoop,
        holes: Vec<PolyLoop>,
        class: DomainClass,
        params: Vec<(String, f64)>,
    ) -> Result<Self> {
        Self::with_config(outer, holes, class, params, &GeomConfig::default())
    }

    pub fn with_config(
        outer: PolyLoop,
        holes: Vec<PolyLoop>,
        class: DomainClass,
        params: Vec<(String, f64)>,
        cfg: &GeomConfig,
    ) -> Result<Self> {
        let outer = outer.oriented(true);
        let holes: Vec<PolyLoop> = holes.into_iter().map(|h| h.oriented(false)).collect();
        let d = Domain { outer, holes, class, params, arc_segments: cfg.arc_segments };
        d.validate(cfg.min_angle())?;
        Ok(d)
    }

    fn validate(&self, min_angle: f64) -> Result<()> {
        if !self.outer.is_simple() {
            return Err(Error::Geometry("outer loop is not simple".into()));
        }
        for (k, h) in self.holes.iter().enumerate() {
            if !h.is_simple() {
                return Err(Error::Geometry(format!("hole {k} is not simple")));
            }
            if h.intersects_loop(&self.outer) || !h.vertices().iter().all(|&p| self.outer.contains(p)) {
                return Err(Error::Geometry(format!("hole {k} is not strictly inside the outer loop")));
            }
            for (j, g) in self.holes.iter().enumerate().take(k) {
                if h.intersects_loop(g)
                    || g.contains(h.vertices()[0])
                    || h.contains(g.vertices()[0])
                {
                    return Err(Error::Geometry(format!("holes {j} and {k} overlap")));
                }
            }
        }
        if self.area() <= 0.0 {
            return Err(Error::Geometry("domain has non-positive area".into()));
        }
        let tol = 1e-9;
        for l in std::iter::once(&self.outer).chain(&self.holes) {
            if let Some(a) = l.interior_angles().into_iter().find(|&a| a < min_angle - tol) {
                return Err(Error::Geometry(format!(
                    "interior angle {:.3}° below the {:.3}° floor",
                    a.to_degrees(),
                    min_angle.to_degrees()
                )));
            }
        }
        Ok(())
    }

    pub fn outer(&self) -> &PolyLoop {
        &self.outer
    }

    pub fn holes(&self) -> &[PolyLoop] {
        &self.holes
    }

    pub fn class(&self) -> DomainClass {
        self.class
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub fn arc_segments(&self) -> usize {
        self.arc_segments
    }

    /// All loops, outer first.
    pub fn loops(&self) -> impl Iterator<Item = &PolyLoop> {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }

    /// Area (outer minus holes).
    pub fn area(&self) -> f64 {
        self.outer.signed_area() + self.holes.iter().map(PolyLoop::signed_area).sum::<f64>()
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.outer.contains(p) && !self.holes.iter().any(|h| h.contains(p))
    }

    /// Largest distance between two outer vertices.
    pub fn diameter(&self) -> f64 {
        let v = self.outer.vertices();
        let mut d: f64 = 0.0;
        for i in 0..v.len() {
            for j in (i + 1)..v.len() {
                d = d.max(v[i].dist(v[j]));
            }
        }
        d
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bbox(&self) -> (Point2, Point2) {
        let v = self.outer.vertices();
        let mut lo = v[0];
        let mut hi = v[0];
        for p in v {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// Dilation about the origin by `t > 0`.
    pub fn dilate(&self, t: f64) -> Result<Domain> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("dilation factor {t} must be positive")));
        }
        Ok(self.map_points(|p| Point2::new(t * p.x, t * p.y)))
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Domain {
        self.map_points(|p| Point2::new(p.x + dx, p.y + dy))
    }

    fn map_points(&self, f: impl Fn(Point2) -> Point2 + Copy) -> Domain {
        Domain {
            outer: self.outer.map(f),
            holes: self.holes.iter().map(|h| h.map(f)).collect(),
            class: self.class,
            params: self.params.clone(),
            arc_segments: self.arc_segments,
        }
    }

    pub fn to_json(&self) -> DomainFile {
        DomainFile {
            class: self.class,
            params: self.params.iter().map(|(k, v)| (k.clone(), serde_json::json!(v))).collect(),
            outer: self.outer.vertices().iter().map(|&p| p.into()).collect(),
            holes: self.holes.iter().map(|h| h.vertices().iter().map(|&p| p.into()).collect()).collect(),
            arc_segments: Some(self.arc_segments),
        }
    }

    pub fn from_json(file: &DomainFile) -> Result<Domain> {
        let cfg = GeomConfig {
            arc_segments: file.arc_segments.unwrap_or(GeomConfig::default().arc_segments),
            ..GeomConfig::default()
        };
        let loop_of = |pts: &Vec<[f64; 2]>| PolyLoop::new(pts.iter().map(|&p| p.into()).collect());
        let outer = loop_of(&file.outer)?;
        let holes = file.holes.iter().map(loop_of).collect::<Result<Vec<_>>>()?;
        let params = file
            .params
            .iter()
            .map(|(k, v)| {
                v.as_f64()
                    .map(|x| (k.clone(), x))
                    .ok_or_else(|| Error::InvalidArgument(format!("parameter {k} is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        Domain::with_config(outer, holes, file.class, params, &cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Domain> {
        let text = std::fs::read_to_string(path)?;
        let file: DomainFile = serde_json::from_str(&text)?;
        Domain::from_json(&file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// On-disk domain description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainFile {
    pub class: DomainClass,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    pub outer: Vec<[f64; 2]>,
    #[serde(default)]
    pub holes: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arc_segments: Option<usize>,
}

/// Removes vertices closer than `min_sep` to their predecessor and vertices
/// whose two incident segments are collinear.
pub(crate) fn clean_vertices(mut v: Vec<Point2>, min_sep: f64) -> Vec<Point2> {
    loop {
        let n = v.len();
        if n < 4 {
            return v;
        }
        let mut out: Vec<Point2> = Vec::with_capacity(n);
        for &p in &v {
            if out.last().is_some_and(|q: &Point2| q.dist(p) < min_sep) {
                continue;
            }
            out.push(p);
        }
        while out.len() > 3 && out[0].dist(*out.last().unwrap()) < min_sep {
            out.pop();
        }
        let m = out.len();
        let keep: Vec<bool> = (0..m)
            .map(|i| {
                let (a, b, c) = (out[(i + m - 1) % m], out[i], out[(i + 1) % m]);
                let cross = predicates::orient(a, b, c);
                let dot = (b.x - a.x) * (c.x - b.x) + (b.y - a.y) * (c.y - b.y);
                cross.abs() > 1e-10 * a.dist(b) * b.dist(c) || dot < 0.0
            })
            .collect();
        let cleaned: Vec<Point2> = out.iter().zip(&keep).filter(|(_, &k)| k).map(|(&p, _)| p).collect();
        if cleaned.len() == n {
            return cleaned;
        }
        v = cleaned;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> PolyLoop {
        PolyLoop::new(vec![
            Point2::new(0., 0.),
            Point2::new(1., 0.),
            Point2::new(1., 1.),
            Point2::new(0., 1.),
        ])
        .unwrap()
    }

    #[test]
    fn loop_basics() {
        let s = square();
        assert_eq!(s.signed_area(), 1.0);
        assert_eq!(s.reversed().signed_area(), -1.0);
        assert!(s.is_simple());
        assert!(s.contains(Point2::new(0.5, 0.5)));
        assert!(!s.contains(Point2::new(1.5, 0.5)));
        assert!(PolyLoop::new(vec![Point2::new(0., 0.), Point2::new(1., 0.)]).is_err());
        assert!(PolyLoop::new(vec![Point2::new(0., 0.), Point2::new(0., 0.), Point2::new(1., 1.)]).is_err());
    }

    #[test]
    fn bowtie_is_not_simple() {
        let b = PolyLoop::new(vec![
            Point2::new(0., 0.),
            Point2::new(1., 1.),
            Point2::new(1., 0.),
            Point2::new(0., 1.),
        ])
        .unwrap();
        assert!(!b.is_simple());
        assert!(Domain::new(b, vec![], DomainClass::Custom, vec![]).is_err());
    }

    #[test]
    fn orientation_is_canonicalized() {
        let d = Domain::new(square().reversed(), vec![], DomainClass::Custom, vec![]).unwrap();
        assert!(d.outer().signed_area() > 0.0);
        let hole = PolyLoop::new(vec![
            Point2::new(0.4, 0.4),
            Point2::new(0.6, 0.4),
            Point2::new(0.6, 0.6),
            Point2::new(0.4, 0.6),
        ])
        .unwrap();
        let d = Domain::new(square(), vec![hole], DomainClass::Custom, vec![]).unwrap();
        assert!(d.holes()[0].signed_area() < 0.0);
        assert!((d.area() - 0.96).abs() < 1e-14);
        assert!(!d.contains(Point2::new(0.5, 0.5)));
        assert!(d.contains(Point2::new(0.2, 0.5)));
    }

    #[test]
    fn hole_outside_rejected() {
        let hole = PolyLoop::new(vec![
            Point2::new(0.9, 0.4),
            Point2::new(1.2, 0.4),
            Point2::new(1.2, 0.6),
            Point2::new(0.9, 0.6),
        ])
        .unwrap();
        assert!(matches!(
            Domain::new(square(), vec![hole], DomainClass::Custom, vec![]),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn small_angle_rejected() {
        let sliver = PolyLoop::new(vec![Point2::new(0., 0.), Point2::new(1., 0.), Point2::new(1., 0.03)]).unwrap();
        assert!(Domain::new(sliver, vec![], DomainClass::Custom, vec![]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let d = make_sector(2.0, 1.0).unwrap();
        let text = serde_json::to_string(&d.to_json()).unwrap();
        let back = Domain::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.outer().vertices(), d.outer().vertices());
        assert_eq!(back.class(), DomainClass::Sector);
        assert_eq!(back.param("r"), Some(2.0));
    }

    #[test]
    fn json_layout() {
        let d = make_rectangle(1.0).unwrap();
        let v = serde_json::to_value(d.to_json()).unwrap();
        assert_eq!(v["class"], "rectangle");
        assert_eq!(v["params"]["a"], 1.0);
        assert_eq!(v["outer"][2], serde_json::json!([1.0, 1.0]));
        assert_eq!(v["holes"], serde_json::json!([]));
    }

    #[test]
    fn clean_drops_collinear_and_near_duplicates() {
        let v = vec![
            Point2::new(0., 0.),
            Point2::new(0.5, 0.),
            Point2::new(1., 0.),
            Point2::new(1., 1e-9),
            Point2::new(1., 1.),
            Point2::new(0., 1.),
        ];
        let c = clean_vertices(v, 1e-6);
        assert_eq!(c.len(), 4);
    }
}
