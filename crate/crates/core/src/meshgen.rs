//! Conforming triangulations for P1 elements: Delaunay-refined initial meshes
//! and uniform red refinement.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use spade::{AngleLimit, ConstrainedDelaunayTriangulation, RefinementParameters, Triangulation};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point2};

/// Minimum angle requested from the Delaunay refinement, in degrees.
pub const MIN_ANGLE_DEG: f64 = 20.0;

/// Triangle mesh with counter-clockwise triangles and boundary marks.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    points: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    generation: u32,
}

/// Boundary edge `a → b` with the domain on its left, and the triangle that owns it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub triangle: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshQuality {
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
    pub max_edge: f64,
    pub min_area: f64,
    pub triangle_count: usize,
}

fn tri_area(p: [Point2; 3]) -> f64 {
    0.5 * ((p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[1].y - p[0].y) * (p[2].x - p[0].x))
}

fn edge_key(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl Mesh {
    /// Builds a mesh from raw parts; boundary marks are derived from edges
    /// that belong to exactly one triangle.
    pub fn from_parts(points: Vec<Point2>, triangles: Vec<[usize; 3]>, generation: u32) -> Result<Mesh> {
        let np = points.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= np) {
                return Err(Error::Geometry(format!("triangle {t} references a missing point")));
            }
            let a = tri_area([points[tri[0]], points[tri[1]], points[tri[2]]]);
            if !(a > 0.0) {
                return Err(Error::Geometry(format!("triangle {t} is not positively oriented (area {a:e})")));
            }
        }
        let mut counts: HashMap<(usize, usize), u32> = HashMap::new();
        for tri in &triangles {
            for e in 0..3 {
                *counts.entry(edge_key(tri[e], tri[(e + 1) % 3])).or_default() += 1;
            }
        }
        if let Some((e, c)) = counts.iter().find(|(_, &c)| c > 2) {
            return Err(Error::Geometry(format!("edge {e:?} shared by {c} triangles")));
        }
        let mut boundary = vec![false; np];
        for (&(i, j), &c) in &counts {
            if c == 1 {
                boundary[i] = true;
                boundary[j] = true;
            }
        }
        Ok(Mesh { points, triangles, boundary, generation })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn interior_count(&self) -> usize {
        self.boundary.iter().filter(|&&b| !b).count()
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        let [i, j, k] = self.triangles[t];
        [self.points[i], self.points[j], self.points[k]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        tri_area(self.triangle_points(t))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Number of triangles sharing each undirected edge.
    pub fn edge_counts(&self) -> HashMap<(usize, usize), u32> {
        let mut counts: HashMap<(usize, usize), u32> = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                *counts.entry(edge_key(tri[e], tri[(e + 1) % 3])).or_default() += 1;
            }
        }
        counts
    }

    /// Boundary edges in triangle order.
    pub fn boundary_edges(&self) -> Vec<BoundaryEdge> {
        let counts = self.edge_counts();
        let mut out = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                if counts[&edge_key(a, b)] == 1 {
                    out.push(BoundaryEdge { a, b, triangle: t });
                }
            }
        }
        out
    }

    /// Same mesh with every point mapped through `f`; topology is kept.
    pub fn map_points(&self, f: impl Fn(Point2) -> Point2) -> Result<Mesh> {
        let pts = self.points.iter().map(|&p| f(p)).collect();
        let m = Mesh { points: pts, triangles: self.triangles.clone(), boundary: self.boundary.clone(), generation: self.generation };
        for t in 0..m.triangles.len() {
            if !(m.triangle_area(t) > 0.0) {
                return Err(Error::Geometry(format!("mapping inverts triangle {t}")));
            }
        }
        Ok(m)
    }

    /// Plain-text dump: `NP NT`, then `x y b` per point, then `i j k` per triangle.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.points.len(), self.triangles.len())?;
        for (p, &b) in self.points.iter().zip(&self.boundary) {
            writeln!(w, "{} {} {}", p.x, p.y, u8::from(b))?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn read_dump<R: BufRead>(r: R) -> Result<Mesh> {
        let bad = |msg: &str| Error::InvalidArgument(format!("mesh dump: {msg}"));
        let mut lines = r.lines();
        let mut next = || -> Result<String> { lines.next().ok_or_else(|| bad("truncated"))?.map_err(Error::from) };
        let head = next()?;
        let mut it = head.split_whitespace().map(str::parse::<usize>);
        let (np, nt) = match (it.next(), it.next()) {
            (Some(Ok(a)), Some(Ok(b))) => (a, b),
            _ => return Err(bad("bad header")),
        };
        let mut points = Vec::with_capacity(np);
        for _ in 0..np {
            let l = next()?;
            let f: Vec<f64> = l.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| bad("bad point"))?;
            if f.len() != 3 {
                return Err(bad("bad point"));
            }
            points.push(Point2::new(f[0], f[1]));
        }
        let mut tris = Vec::with_capacity(nt);
        for _ in 0..nt {
            let l = next()?;
            let f: Vec<usize> = l.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| bad("bad triangle"))?;
            if f.len() != 3 {
                return Err(bad("bad triangle"));
            }
            tris.push([f[0], f[1], f[2]]);
        }
        Mesh::from_parts(points, tris, 0)
    }
}

fn subdivide(loop_pts: &[Point2], h: f64, out: &mut Vec<spade::Point2<f64>>, edges: &mut Vec<[usize; 2]>) {
    let start = out.len();
    let n = loop_pts.len();
    for i in 0..n {
        let (a, b) = (loop_pts[i], loop_pts[(i + 1) % n]);
        let pieces = (a.dist(b) / h).ceil().max(1.0) as usize;
        for k in 0..pieces {
            let t = k as f64 / pieces as f64;
            out.push(spade::Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
        }
    }
    let m = out.len() - start;
    for i in 0..m {
        edges.push([start + i, start + (i + 1) % m]);
    }
}

/// Constrained Delaunay triangulation of `d` refined until every edge is at
/// most `h_target` long and angles are at least [`MIN_ANGLE_DEG`] (except
/// where the input itself has a smaller corner).
pub fn triangulate(d: &Domain, h_target: f64) -> Result<Mesh> {
    if !(h_target > 0.0 && h_target.is_finite()) {
        return Err(Error::InvalidParameter(format!("h_target = {h_target} must be positive")));
    }
    let mut verts = Vec::new();
    let mut edges = Vec::new();
    for l in d.loops() {
        subdivide(l.vertices(), h_target, &mut verts, &mut edges);
    }
    let mut cdt: ConstrainedDelaunayTriangulation<spade::Point2<f64>> =
        ConstrainedDelaunayTriangulation::bulk_load_cdt(verts, edges)
            .map_err(|e| Error::Geometry(format!("constrained triangulation failed: {e:?}")))?;

    // Refine to the equilateral area for h, then split any edge still longer
    // than h at its midpoint (slivers at sharp input corners are below the
    // area threshold and would otherwise never be split).
    let max_area = 0.25 * 3f64.sqrt() * h_target * h_target;
    let budget = 50 * (d.area() / max_area).ceil() as usize + 10_000;
    let mut result = None;
    for _ in 0..50 {
        let params = RefinementParameters::<f64>::new()
            .exclude_outer_faces(true)
            .with_angle_limit(AngleLimit::from_deg(MIN_ANGLE_DEG))
            .with_max_allowed_area(max_area)
            .with_min_required_area(1e-4 * max_area)
            .with_max_additional_vertices(budget);
        let res = cdt.refine(params);
        let excluded: std::collections::HashSet<_> = res.excluded_faces.iter().copied().collect();
        let mut long = Vec::new();
        for f in cdt.inner_faces() {
            if excluded.contains(&f.fix()) {
                continue;
            }
            let p = f.vertices().map(|v| v.position());
            for e in 0..3 {
                let (a, b) = (p[e], p[(e + 1) % 3]);
                if (a.x - b.x).hypot(a.y - b.y) > h_target * (1.0 + 1e-9) {
                    long.push(spade::Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)));
                }
            }
        }
        if long.is_empty() {
            result = Some(excluded);
            break;
        }
        if cdt.num_vertices() > budget {
            break;
        }
        long.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        long.dedup();
        for m in long {
            cdt.insert(m).map_err(|e| Error::Geometry(format!("midpoint insertion failed: {e:?}")))?;
        }
    }
    let excluded = result.ok_or_else(|| Error::Geometry("refinement could not meet the edge-length target".into()))?;

    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut points = Vec::new();
    let mut tris = Vec::new();
    let mut faces: Vec<[usize; 3]> = cdt
        .inner_faces()
        .filter(|f| !excluded.contains(&f.fix()))
        .map(|f| f.vertices().map(|v| v.fix().index()))
        .collect();
    faces.sort_unstable();
    let mut used: Vec<usize> = faces.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    for vi in used {
        let p = cdt.vertex(spade::handles::FixedVertexHandle::from_index(vi)).position();
        index.insert(vi, points.len());
        points.push(Point2::new(p.x, p.y));
    }
    for f in faces {
        let t = f.map(|v| index[&v]);
        let a = tri_area([points[t[0]], points[t[1]], points[t[2]]]);
        tris.push(if a > 0.0 { t } else { [t[0], t[2], t[1]] });
    }
    let mesh = Mesh::from_parts(points, tris, 0)?;
    let (ma, da) = (mesh.area(), d.area());
    if (ma - da).abs() > 1e-10 * da.max(1.0) {
        return Err(Error::Geometry(format!("mesh area {ma} differs from domain area {da}")));
    }
    Ok(mesh)
}

/// Uniform red refinement: every triangle splits into four through its edge
/// midpoints.
pub fn refine(m: &Mesh) -> Mesh {
    let counts = m.edge_counts();
    let mut points = m.points.clone();
    let mut boundary = m.boundary.clone();
    let mut mid: HashMap<(usize, usize), usize> = HashMap::with_capacity(counts.len());
    let mut tris = Vec::with_capacity(4 * m.triangles.len());
    let mut midpoint = |i: usize, j: usize, points: &mut Vec<Point2>, boundary: &mut Vec<bool>| -> usize {
        let key = edge_key(i, j);
        *mid.entry(key).or_insert_with(|| {
            points.push(points[i].midpoint(points[j]));
            boundary.push(counts[&key] == 1);
            points.len() - 1
        })
    };
    for &[a, b, c] in &m.triangles {
        let ab = midpoint(a, b, &mut points, &mut boundary);
        let bc = midpoint(b, c, &mut points, &mut boundary);
        let ca = midpoint(c, a, &mut points, &mut boundary);
        tris.push([a, ab, ca]);
        tris.push([ab, b, bc]);
        tris.push([ca, bc, c]);
        tris.push([ab, bc, ca]);
    }
    Mesh { points, triangles: tris, boundary, generation: m.generation + 1 }
}

/// Exact extreme angles, longest edge and smallest area over all triangles.
pub fn mesh_quality(m: &Mesh) -> MeshQuality {
    let mut q = MeshQuality {
        min_angle_deg: f64::INFINITY,
        max_angle_deg: 0.0,
        max_edge: 0.0,
        min_area: f64::INFINITY,
        triangle_count: m.triangles.len(),
    };
    for t in 0..m.triangles.len() {
        let p = m.triangle_points(t);
        for e in 0..3 {
            let (a, b, c) = (p[e], p[(e + 1) % 3], p[(e + 2) % 3]);
            q.max_edge = q.max_edge.max(a.dist(b));
            let ang = crate::geometry::predicates::vertex_angle(c, a, b).to_degrees();
            q.min_angle_deg = q.min_angle_deg.min(ang);
            q.max_angle_deg = q.max_angle_deg.max(ang);
        }
        q.min_area = q.min_area.min(m.triangle_area(t));
    }
    q
}
