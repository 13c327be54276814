//! P1 finite-element pencil `K u = λ M u` for the Dirichlet Laplacian.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::meshgen::{BoundaryEdge, Mesh};

/// Symmetric sparse matrix stored as its lower triangle, entries sorted by
/// `(row, col)` with duplicates summed.
#[derive(Clone, Debug, PartialEq)]
pub struct SymSparse {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SymSparse {
    /// Builds from arbitrary triplets; upper entries are mirrored into the
    /// lower triangle. Duplicates are summed in input order.
    pub fn from_triplets(n: usize, mut trips: Vec<(usize, usize, f64)>) -> SymSparse {
        for t in trips.iter_mut() {
            if t.1 > t.0 {
                *t = (t.1, t.0, t.2);
            }
        }
        trips.sort_by_key(|&(r, c, _)| (r, c));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(trips.len() / 2);
        for (r, c, v) in trips {
            match entries.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => entries.push((r, c, v)),
            }
        }
        SymSparse { n, entries }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored lower-triangle entries `(row, col, value)` with `col ≤ row`.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let key = if j > i { (j, i) } else { (i, j) };
        self.entries
            .binary_search_by_key(&key, |&(r, c, _)| (r, c))
            .map(|p| self.entries[p].2)
            .unwrap_or(0.0)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
            if r != c {
                y[c] += v * x[r];
            }
        }
        y
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, v)| if r == c { v * x[r] * x[r] } else { 2.0 * v * x[r] * x[c] })
            .sum()
    }

    /// Sum of all entries of the full symmetric matrix.
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|&(r, c, v)| if r == c { v } else { 2.0 * v }).sum()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut a = nalgebra::DMatrix::zeros(self.n, self.n);
        for &(r, c, v) in &self.entries {
            a[(r, c)] = v;
            a[(c, r)] = v;
        }
        a
    }

    /// Principal submatrix on `keep` (old index → new index or `None`).
    pub fn restrict(&self, keep: &[Option<usize>], n: usize) -> SymSparse {
        let entries = self
            .entries
            .iter()
            .filter_map(|&(r, c, v)| match (keep[r], keep[c]) {
                (Some(i), Some(j)) => Some(if j > i { (j, i, v) } else { (i, j, v) }),
                _ => None,
            })
            .collect();
        SymSparse::from_triplets(n, entries)
    }

    /// Matrix Market coordinate format, symmetric, 1-based lower triangle.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "{} {} {}", self.n, self.n, self.entries.len())?;
        for &(r, c, v) in &self.entries {
            writeln!(w, "{} {} {:e}", r + 1, c + 1, v)?;
        }
        Ok(())
    }
}

/// Stiffness and mass restricted to interior points.
#[derive(Clone, Debug)]
pub struct Pencil {
    pub stiffness: SymSparse,
    pub mass: SymSparse,
    /// Mesh point → matrix row; `None` for boundary points.
    pub interior_index: Vec<Option<usize>>,
}

impl Pencil {
    pub fn dim(&self) -> usize {
        self.stiffness.dim()
    }

    /// Nodal values on the whole mesh from interior coefficients; zero on the boundary.
    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        self.interior_index.iter().map(|i| i.map_or(0.0, |i| u[i])).collect()
    }
}

/// Gradients of the three barycentric basis functions and the area.
pub fn basis_gradients(p: [Point2; 3]) -> ([[f64; 2]; 3], f64) {
    let area2 = (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[1].y - p[0].y) * (p[2].x - p[0].x);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(p[j].y - p[k].y) / area2, (p[k].x - p[j].x) / area2];
    }
    (g, 0.5 * area2)
}

/// Element stiffness by the cotangent formula: `K_ij = −cot θ_k / 2` for the
/// angle `θ_k` opposite edge `ij`.
fn element_stiffness(p: [Point2; 3]) -> [[f64; 3]; 3] {
    let area2 = (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[1].y - p[0].y) * (p[2].x - p[0].x);
    let mut k = [[0.0; 3]; 3];
    for o in 0..3 {
        let (i, j) = ((o + 1) % 3, (o + 2) % 3);
        let (ax, ay) = (p[i].x - p[o].x, p[i].y - p[o].y);
        let (bx, by) = (p[j].x - p[o].x, p[j].y - p[o].y);
        let cot = (ax * bx + ay * by) / area2;
        k[i][j] = -0.5 * cot;
        k[j][i] = -0.5 * cot;
    }
    for i in 0..3 {
        k[i][i] = -(0..3).filter(|&j| j != i).map(|j| k[i][j]).sum::<f64>();
    }
    k
}

/// Full stiffness and mass over all mesh points, before boundary elimination.
pub fn assemble_full(m: &Mesh) -> (SymSparse, SymSparse) {
    let nt = m.triangles().len();
    let mut kt = Vec::with_capacity(6 * nt);
    let mut mt = Vec::with_capacity(6 * nt);
    for (t, tri) in m.triangles().iter().enumerate() {
        let p = m.triangle_points(t);
        let ke = element_stiffness(p);
        let area = m.triangle_area(t);
        for a in 0..3 {
            for b in 0..=a {
                let (r, c) = if tri[a] >= tri[b] { (tri[a], tri[b]) } else { (tri[b], tri[a]) };
                kt.push((r, c, ke[a][b]));
                mt.push((r, c, area / 12.0 * if a == b { 2.0 } else { 1.0 }));
            }
        }
    }
    let n = m.points().len();
    (SymSparse::from_triplets(n, kt), SymSparse::from_triplets(n, mt))
}

/// Assembles the pencil and eliminates boundary rows and columns.
pub fn assemble(m: &Mesh) -> Result<Pencil> {
    let mut interior_index = Vec::with_capacity(m.points().len());
    let mut n = 0;
    for &b in m.boundary_mask() {
        interior_index.push(if b {
            None
        } else {
            n += 1;
            Some(n - 1)
        });
    }
    if n == 0 {
        return Err(Error::MeshTooCoarse("mesh has no interior points".into()));
    }
    let (k, mm) = assemble_full(m);
    Ok(Pencil { stiffness: k.restrict(&interior_index, n), mass: mm.restrict(&interior_index, n), interior_index })
}

/// Outward unit normal of a boundary edge.
pub fn edge_normal(m: &Mesh, e: &BoundaryEdge) -> [f64; 2] {
    let (a, b) = (m.points()[e.a], m.points()[e.b]);
    let len = a.dist(b);
    [(b.y - a.y) / len, -(b.x - a.x) / len]
}

fn edge_derivative(m: &Mesh, u: &[f64], e: &BoundaryEdge) -> f64 {
    let (g, _) = basis_gradients(m.triangle_points(e.triangle));
    let tri = m.triangles()[e.triangle];
    let mut grad = [0.0; 2];
    for i in 0..3 {
        grad[0] += u[tri[i]] * g[i][0];
        grad[1] += u[tri[i]] * g[i][1];
    }
    let n = edge_normal(m, e);
    grad[0] * n[0] + grad[1] * n[1]
}

/// `∂u/∂n` on the boundary edge `{a, b}` from the gradient of its triangle.
/// `u` holds nodal values on every mesh point (see [`Pencil::expand`]).
pub fn boundary_normal_derivative(m: &Mesh, u: &[f64], a: usize, b: usize) -> Result<f64> {
    if u.len() != m.points().len() {
        return Err(Error::InvalidArgument(format!("expected {} nodal values, got {}", m.points().len(), u.len())));
    }
    let e = m
        .boundary_edges()
        .into_iter()
        .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
        .ok_or_else(|| Error::InvalidArgument(format!("({a}, {b}) is not a boundary edge")))?;
    Ok(edge_derivative(m, u, &e))
}

/// `∂u/∂n` on every boundary edge, in [`Mesh::boundary_edges`] order.
pub fn boundary_normal_derivatives(m: &Mesh, u: &[f64]) -> Vec<(BoundaryEdge, f64)> {
    m.boundary_edges().into_iter().map(|e| (e, edge_derivative(m, u, &e))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_rectangle;
    use crate::meshgen::{refine, triangulate};

    fn centred_square() -> Mesh {
        let pts = vec![
            Point2::new(0., 0.),
            Point2::new(1., 0.),
            Point2::new(1., 1.),
            Point2::new(0., 1.),
            Point2::new(0.5, 0.5),
        ];
        Mesh::from_parts(pts, vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]], 0).unwrap()
    }

    // Dense assembly from basis gradients, independent of the cotangent form.
    fn dense_oracle(m: &Mesh) -> (nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>) {
        let n = m.points().len();
        let mut k = nalgebra::DMatrix::zeros(n, n);
        let mut mm = nalgebra::DMatrix::zeros(n, n);
        for (t, tri) in m.triangles().iter().enumerate() {
            let (g, area) = basis_gradients(m.triangle_points(t));
            for a in 0..3 {
                for b in 0..3 {
                    k[(tri[a], tri[b])] += area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                    mm[(tri[a], tri[b])] += area / 12.0 * if a == b { 2.0 } else { 1.0 };
                }
            }
        }
        (k, mm)
    }

    #[test]
    fn single_interior_point() {
        let m = centred_square();
        let p = assemble(&m).unwrap();
        assert_eq!(p.dim(), 1);
        // centre: four right isosceles triangles, K = 4, M = 4 · (1/4)/12 · 2 = 1/6
        assert!((p.stiffness.get(0, 0) - 4.0).abs() < 1e-14);
        assert!((p.mass.get(0, 0) - 1.0 / 6.0).abs() < 1e-14);
        let (k, mm) = dense_oracle(&m);
        assert!((k[(4, 4)] / mm[(4, 4)] - 24.0).abs() < 1e-12);
    }

    #[test]
    fn matches_dense_oracle() {
        let m = refine(&triangulate(&make_rectangle(1.3).unwrap(), 0.4).unwrap());
        let (k, mm) = assemble_full(&m);
        let (ko, mo) = dense_oracle(&m);
        assert!((k.to_dense() - ko).abs().max() < 1e-12);
        assert!((mm.to_dense() - mo).abs().max() < 1e-14);
    }

    #[test]
    fn row_sums_and_mass() {
        let m = triangulate(&make_rectangle(1.7).unwrap(), 0.2).unwrap();
        let (k, mm) = assemble_full(&m);
        let ones = vec![1.0; m.points().len()];
        assert!(k.mul_vec(&ones).iter().all(|r| r.abs() < 1e-12));
        assert!((mm.total() - 1.7).abs() < 1e-10);
    }

    #[test]
    fn no_interior_is_too_coarse() {
        let m = Mesh::from_parts(
            vec![Point2::new(0., 0.), Point2::new(1., 0.), Point2::new(0., 1.)],
            vec![[0, 1, 2]],
            0,
        )
        .unwrap();
        assert!(matches!(assemble(&m), Err(Error::MeshTooCoarse(_))));
    }

    #[test]
    fn permutation_invariance() {
        let m = triangulate(&make_rectangle(1.2).unwrap(), 0.3).unwrap();
        let mut tris = m.triangles().to_vec();
        tris.reverse();
        tris.iter_mut().for_each(|t| t.rotate_left(1));
        let m2 = Mesh::from_parts(m.points().to_vec(), tris, 0).unwrap();
        let (a, _) = assemble_full(&m);
        let (b, _) = assemble_full(&m2);
        for (x, y) in a.entries().iter().zip(b.entries()) {
            assert_eq!((x.0, x.1), (y.0, y.1));
            assert!((x.2 - y.2).abs() <= 1e-13 * x.2.abs().max(1.0));
        }
    }

    #[test]
    fn normal_derivative_of_linear_field() {
        // u = y on the unit square: ∂u/∂n = −1 on the bottom edge, +1 on top.
        let m = refine(&centred_square());
        let u: Vec<f64> = m.points().iter().map(|p| p.y).collect();
        for (e, d) in boundary_normal_derivatives(&m, &u) {
            let mid = m.points()[e.a].midpoint(m.points()[e.b]);
            let want = if mid.y < 1e-12 {
                -1.0
            } else if mid.y > 1.0 - 1e-12 {
                1.0
            } else {
                0.0
            };
            assert!((d - want).abs() < 1e-12);
        }
        let zero = vec![0.0; m.points().len()];
        assert!(boundary_normal_derivatives(&m, &zero).iter().all(|(_, d)| *d == 0.0));
        assert!(boundary_normal_derivative(&m, &zero, 0, 4).is_err());
    }

    #[test]
    fn matrix_market_header() {
        let p = assemble(&centred_square()).unwrap();
        let mut buf = Vec::new();
        p.stiffness.write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real symmetric\n1 1 1\n1 1 4e0"));
    }
}
