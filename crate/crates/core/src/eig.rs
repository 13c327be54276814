//! Smallest eigenpairs of a sparse SPD pencil by shift-invert block subspace
//! iteration with Rayleigh–Ritz, on a sparse Cholesky factor of `K`.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{Pencil, SymSparse};
use crate::rng::Stream;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_K: usize = 4;
pub const MAX_ITERATIONS: usize = 1000;
const START_SEED: u64 = 0x005e_ed0f_b10c;
/// Pencils at most this large go straight to the dense solver.
const DENSE_LIMIT: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// M-orthonormal coefficient vectors over the pencil's rows.
    pub vectors: Vec<Vec<f64>>,
    /// `‖K u − λ M u‖ / (λ ‖M u‖)` per pair.
    pub residuals: Vec<f64>,
}

impl Spectrum {
    pub fn ratio(&self, i: usize) -> f64 {
        self.values[i] / self.values[0]
    }
}

fn residual(k: &SymSparse, m: &SymSparse, u: &[f64], lam: f64) -> f64 {
    let ku = k.mul_vec(u);
    let mu = m.mul_vec(u);
    let r: f64 = ku.iter().zip(&mu).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
    let nm: f64 = mu.iter().map(|x| x * x).sum::<f64>().sqrt();
    r / (lam.abs() * nm)
}

/// Fixes the sign so that the entry of largest magnitude is positive.
fn normalize_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best * (1.0 + 1e-9) {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Dense generalized eigenproblem `A x = λ B x` with `B` SPD; ascending.
fn dense_pencil(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((vals, linv.transpose() * y))
}

fn finish(p: &Pencil, k: usize, vals: Vec<f64>, vecs: Vec<Vec<f64>>, tol: f64) -> Result<Spectrum> {
    let residuals: Vec<f64> = vals.iter().zip(&vecs).map(|(&l, v)| residual(&p.stiffness, &p.mass, v, l)).collect();
    if vals.first().is_some_and(|&l| !(l > 0.0)) {
        return Err(Error::Numerical(format!("non-positive eigenvalue {}", vals[0])));
    }
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    if worst > tol {
        return Err(Error::Convergence {
            iterations: 0,
            max_residual: worst,
            partial_values: vals,
            partial_residuals: residuals,
        });
    }
    debug_assert_eq!(vals.len(), k);
    Ok(Spectrum { values: vals, vectors: vecs, residuals })
}

/// Dense solve of the whole pencil; used for small systems and as a test oracle.
pub fn dense_eigenpairs(p: &Pencil, k: usize, tol: f64) -> Result<Spectrum> {
    check_args(p, k, tol)?;
    let (vals, x) = dense_pencil(&p.stiffness.to_dense(), &p.mass.to_dense())?;
    let vecs: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            let mut v: Vec<f64> = x.column(c).iter().copied().collect();
            normalize_sign(&mut v);
            v
        })
        .collect();
    finish(p, k, vals[..k].to_vec(), vecs, tol)
}

fn check_args(p: &Pencil, k: usize, tol: f64) -> Result<()> {
    if k == 0 || k > p.dim() {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..={}", p.dim())));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol = {tol} must be positive")));
    }
    Ok(())
}

fn to_faer(a: &SymSparse) -> Result<SparseColMat<usize, f64>> {
    let trips: Vec<Triplet<usize, usize, f64>> =
        a.entries().iter().map(|&(r, c, v)| Triplet { row: r, col: c, val: v }).collect();
    SparseColMat::try_new_from_triplets(a.dim(), a.dim(), &trips)
        .map_err(|e| Error::Numerical(format!("sparse matrix construction failed: {e:?}")))
}

fn mul_block(a: &SymSparse, x: &Mat<f64>) -> Mat<f64> {
    let mut y = Mat::<f64>::zeros(x.nrows(), x.ncols());
    for &(r, c, v) in a.entries() {
        for j in 0..x.ncols() {
            y[(r, j)] += v * x[(c, j)];
            if r != c {
                y[(c, j)] += v * x[(r, j)];
            }
        }
    }
    y
}

/// `Xᵀ A Y` as a dense nalgebra matrix.
fn project(x: &Mat<f64>, ay: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.ncols(), ay.ncols(), |i, j| (0..x.nrows()).map(|r| x[(r, i)] * ay[(r, j)]).sum())
}

/// The `k` smallest eigenpairs of `K u = λ M u`, each with relative residual ≤ `tol`.
pub fn smallest_eigenpairs(p: &Pencil, k: usize, tol: f64) -> Result<Spectrum> {
    check_args(p, k, tol)?;
    let n = p.dim();
    let b = (k + 2).max(2 * k).min(n);
    if n <= DENSE_LIMIT || b == n {
        return dense_eigenpairs(p, k, tol);
    }
    let chol = to_faer(&p.stiffness)?
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Cholesky factorization failed: {e:?}")))?;

    let mut rng = Stream::new(START_SEED);
    let mut x = Mat::<f64>::from_fn(n, b, |_, _| rng.uniform() - 0.5);
    let mut vals = vec![0.0; b];
    let mut res = vec![f64::INFINITY; k];
    for it in 1..=MAX_ITERATIONS {
        let mut y = mul_block(&p.mass, &x);
        chol.solve_in_place(y.as_mut());
        let ky = mul_block(&p.stiffness, &y);
        let my = mul_block(&p.mass, &y);
        let kr = project(&y, &ky);
        let mr = project(&y, &my);
        let mr = (&mr + mr.transpose()) * 0.5;
        let kr = (&kr + kr.transpose()) * 0.5;
        let (theta, q) = dense_pencil(&kr, &mr)?;
        vals.copy_from_slice(&theta);
        x = Mat::from_fn(n, b, |r, c| (0..b).map(|s| y[(r, s)] * q[(s, c)]).sum());
        // residuals from the already-computed products, rotated by q
        let kx = Mat::<f64>::from_fn(n, k, |r, c| (0..b).map(|s| ky[(r, s)] * q[(s, c)]).sum());
        let mx = Mat::<f64>::from_fn(n, k, |r, c| (0..b).map(|s| my[(r, s)] * q[(s, c)]).sum());
        for c in 0..k {
            let mut num = 0.0;
            let mut den = 0.0;
            for r in 0..n {
                num += (kx[(r, c)] - vals[c] * mx[(r, c)]).powi(2);
                den += mx[(r, c)].powi(2);
            }
            res[c] = num.sqrt() / (vals[c].abs() * den.sqrt());
        }
        if res.iter().all(|&r| r <= tol) {
            let vecs = (0..k)
                .map(|c| {
                    let mut v: Vec<f64> = (0..n).map(|r| x[(r, c)]).collect();
                    normalize_sign(&mut v);
                    v
                })
                .collect();
            return finish(p, k, vals[..k].to_vec(), vecs, tol).map_err(|e| match e {
                Error::Convergence { max_residual, partial_values, partial_residuals, .. } => {
                    Error::Convergence { iterations: it, max_residual, partial_values, partial_residuals }
                }
                other => other,
            });
        }
    }
    Err(Error::Convergence {
        iterations: MAX_ITERATIONS,
        max_residual: res.iter().cloned().fold(0.0, f64::max),
        partial_values: vals[..k].to_vec(),
        partial_residuals: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::geometry::make_rectangle;
    use crate::meshgen::{refine, triangulate};
    use std::f64::consts::PI;

    fn diag_pencil(d: &[f64]) -> Pencil {
        let n = d.len();
        Pencil {
            stiffness: SymSparse::from_triplets(n, d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect()),
            mass: SymSparse::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect()),
            interior_index: (0..n).map(Some).collect(),
        }
    }

    #[test]
    fn diagonal_pencil() {
        let s = smallest_eigenpairs(&diag_pencil(&[6.0, 2.0]), 2, 1e-10).unwrap();
        assert!((s.values[0] - 2.0).abs() < 1e-12 && (s.values[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn bad_arguments() {
        let p = diag_pencil(&[1.0, 2.0]);
        assert!(matches!(smallest_eigenpairs(&p, 0, 1e-8), Err(Error::InvalidArgument(_))));
        assert!(matches!(smallest_eigenpairs(&p, 3, 1e-8), Err(Error::InvalidArgument(_))));
        assert!(matches!(smallest_eigenpairs(&p, 1, 0.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn indefinite_stiffness_fails() {
        let mut d: Vec<f64> = (1..=100).map(f64::from).collect();
        d[10] = -1.0;
        assert!(smallest_eigenpairs(&diag_pencil(&d), 4, 1e-8).is_err());
    }

    #[test]
    fn iterative_matches_dense() {
        let m = refine(&triangulate(&make_rectangle(1.4).unwrap(), 0.15).unwrap());
        let p = assemble(&m).unwrap();
        assert!(p.dim() > DENSE_LIMIT);
        let a = smallest_eigenpairs(&p, 4, 1e-9).unwrap();
        let b = dense_eigenpairs(&p, 4, 1e-6).unwrap();
        for i in 0..4 {
            assert!((a.values[i] - b.values[i]).abs() < 1e-8 * b.values[i]);
        }
        for i in 0..4 {
            for j in 0..4 {
                let mij = p.mass.mul_vec(&a.vectors[i]).iter().zip(&a.vectors[j]).map(|(x, y)| x * y).sum::<f64>();
                assert!((mij - f64::from(u8::from(i == j))).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn unit_square_double_eigenvalue() {
        let mut m = triangulate(&make_rectangle(1.0).unwrap(), 0.1).unwrap();
        for _ in 0..2 {
            m = refine(&m);
        }
        let s = smallest_eigenpairs(&assemble(&m).unwrap(), 4, DEFAULT_TOL).unwrap();
        assert!((s.values[0] / (2.0 * PI * PI) - 1.0).abs() < 3e-3);
        assert!((s.values[1] - s.values[2]).abs() < 0.02 * s.values[1]);
        assert!(s.residuals.iter().all(|&r| r <= DEFAULT_TOL));
    }
}
