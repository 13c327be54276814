//! Domain → eigenvalues: mesh, refine, assemble, solve.

use serde::{Deserialize, Serialize};

use crate::eig::{smallest_eigenpairs, Spectrum, DEFAULT_K, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::fem::{assemble, Pencil};
use crate::geometry::Domain;
use crate::meshgen::{mesh_quality, refine, triangulate, Mesh, MeshQuality};

pub const DEFAULT_LEVELS: u32 = 3;
/// Coarse edge target as a fraction of the domain diameter.
pub const DEFAULT_H_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Coarse max edge; `None` means diameter × [`DEFAULT_H_FRACTION`].
    pub h_target: Option<f64>,
    pub levels: u32,
    pub k: usize,
    pub tol: f64,
    /// Richardson extrapolation over the last two levels.
    pub extrapolate: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { h_target: None, levels: DEFAULT_LEVELS, k: DEFAULT_K, tol: DEFAULT_TOL, extrapolate: false }
    }
}

impl SolveOptions {
    pub fn at_level(levels: u32) -> Self {
        SolveOptions { levels, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Eigenvalues on the finest mesh.
    pub raw: Vec<f64>,
    /// `λ_fine + (λ_fine − λ_coarse)/3`, when requested.
    pub extrapolated: Option<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub level: u32,
    pub dofs: usize,
    pub triangles: usize,
    pub min_angle_deg: f64,
}

impl SolveReport {
    /// Extrapolated values when present, raw otherwise.
    pub fn reported(&self) -> &[f64] {
        self.extrapolated.as_deref().unwrap_or(&self.raw)
    }

    pub fn x(&self) -> f64 {
        let v = self.reported();
        v[1] / v[0]
    }

    pub fn y(&self) -> f64 {
        let v = self.reported();
        v[2] / v[0]
    }

    /// `(λ₄ − λ₃)/λ₃`, if λ₄ was computed.
    pub fn delta4(&self) -> Option<f64> {
        let v = self.reported();
        (v.len() >= 4).then(|| (v[3] - v[2]) / v[2])
    }
}

/// Everything produced on the finest level.
#[derive(Clone, Debug)]
pub struct Solution {
    pub report: SolveReport,
    pub mesh: Mesh,
    pub pencil: Pencil,
    pub spectrum: Spectrum,
}

/// Richardson step for an O(h²) method under halving of h.
pub fn richardson(fine: &[f64], coarse: &[f64]) -> Vec<f64> {
    fine.iter().zip(coarse).map(|(f, c)| f + (f - c) / 3.0).collect()
}

pub fn coarse_mesh(d: &Domain, opts: &SolveOptions) -> Result<Mesh> {
    let h = opts.h_target.unwrap_or(DEFAULT_H_FRACTION * d.diameter());
    triangulate(d, h)
}

/// Solves on a given coarse mesh after `opts.levels` red refinements.
pub fn solve_mesh(coarse: &Mesh, opts: &SolveOptions) -> Result<Solution> {
    let mut mesh = coarse.clone();
    let mut prev: Option<Vec<f64>> = None;
    for level in 0..=opts.levels {
        if level > 0 {
            mesh = refine(&mesh);
        }
        let need_prev = opts.extrapolate && opts.levels > 0 && level + 1 == opts.levels;
        if level == opts.levels || need_prev {
            let pencil = assemble(&mesh)?;
            if pencil.dim() < opts.k {
                if level == opts.levels {
                    return Err(Error::MeshTooCoarse(format!(
                        "{} interior points, need at least {}",
                        pencil.dim(),
                        opts.k
                    )));
                }
                continue;
            }
            let spectrum = smallest_eigenpairs(&pencil, opts.k, opts.tol)?;
            if level < opts.levels {
                prev = Some(spectrum.values);
                continue;
            }
            let q: MeshQuality = mesh_quality(&mesh);
            let extrapolated = match (opts.extrapolate, &prev) {
                (true, Some(c)) => Some(richardson(&spectrum.values, c)),
                _ => None,
            };
            let report = SolveReport {
                raw: spectrum.values.clone(),
                extrapolated,
                residuals: spectrum.residuals.clone(),
                level: opts.levels,
                dofs: pencil.dim(),
                triangles: q.triangle_count,
                min_angle_deg: q.min_angle_deg,
            };
            return Ok(Solution { report, mesh, pencil, spectrum });
        }
    }
    unreachable!("loop returns on the last level")
}

pub fn solve_domain(d: &Domain, opts: &SolveOptions) -> Result<Solution> {
    solve_mesh(&coarse_mesh(d, opts)?, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_rectangle;

    #[test]
    fn richardson_step() {
        assert_eq!(richardson(&[4.0], &[7.0]), vec![3.0]);
    }

    #[test]
    fn extrapolation_improves_square() {
        let d = make_rectangle(1.0).unwrap();
        let exact = 2.0 * std::f64::consts::PI.powi(2);
        let opts = SolveOptions { levels: 2, extrapolate: true, ..Default::default() };
        let s = solve_domain(&d, &opts).unwrap();
        let e = s.report.extrapolated.as_ref().unwrap();
        assert!((e[0] - exact).abs() < (s.report.raw[0] - exact).abs());
        assert!(s.report.raw[0] > exact);
    }

    #[test]
    fn too_few_dofs() {
        let d = make_rectangle(1.0).unwrap();
        let opts = SolveOptions { h_target: Some(2.0), levels: 0, ..Default::default() };
        assert!(matches!(solve_domain(&d, &opts), Err(Error::MeshTooCoarse(_))));
    }
}
