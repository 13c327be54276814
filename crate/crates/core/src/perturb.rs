//! First-order eigenvalue perturbation under a boundary displacement `ε f`
//! along the outward normal, with closed forms on rectangles and FEM checks.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::analytic::{rectangle_curve, rectangle_modes, RectMode};
use crate::error::{Error, Result};
use crate::fem::{boundary_normal_derivatives, edge_normal};
use crate::geometry::{make_rectangle, Point2};
use crate::meshgen::Mesh;
use crate::rng::Stream;
use crate::solve::{coarse_mesh, solve_domain, solve_mesh, SolveOptions};

/// Relative gap below which two eigenvalues are treated as one double eigenvalue.
pub const GAP_TOL_REL: f64 = 1e-6;
/// Side ratio of the rectangle maximizing λ₃/λ₁.
pub fn optimal_side() -> f64 {
    (8.0f64 / 3.0).sqrt()
}

/// `g(x₁) = c₀ + Σ_{l≥1} √2 c_l cos(lπx₁)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineProfile {
    pub coeffs: Vec<f64>,
}

impl CosineProfile {
    pub fn eval(&self, x1: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(l, &c)| if l == 0 { c } else { SQRT_2 * c * (l as f64 * PI * x1).cos() })
            .sum()
    }
}

/// Normal displacement on `∂R_a`, `R_a = [0,1] × [0,a]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RectField {
    /// Cosine profile on the top edge `x₂ = a`, zero elsewhere.
    Cosine(CosineProfile),
    /// `f = p + q x₁ + r x₂` on all four edges.
    Linear { p: f64, q: f64, r: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Edge {
    Top,
    Bottom,
    Left,
    Right,
}

impl RectField {
    /// Field value at a boundary point of `R_a`.
    pub fn eval(&self, a: f64, x: Point2) -> f64 {
        match self {
            RectField::Cosine(g) => {
                if (x.y - a).abs() <= 1e-9 * a {
                    g.eval(x.x)
                } else {
                    0.0
                }
            }
            RectField::Linear { p, q, r } => p + q * x.x + r * x.y,
        }
    }

    /// `∫₀¹ f(edge(t)) sin(jπt) sin(kπt) dt` along the edge, parametrized on [0, 1].
    fn edge_moment(&self, a: f64, edge: Edge, j: u32, k: u32) -> f64 {
        match self {
            RectField::Cosine(g) => {
                if edge != Edge::Top {
                    return 0.0;
                }
                g.coeffs
                    .iter()
                    .enumerate()
                    .map(|(l, &c)| {
                        let w = if l == 0 { c } else { SQRT_2 * c };
                        w * cos_sin_sin(l as u32, j, k)
                    })
                    .sum()
            }
            RectField::Linear { p, q, r } => {
                // f along the edge as α + β t
                let (alpha, beta) = match edge {
                    Edge::Top => (p + r * a, *q),
                    Edge::Bottom => (*p, *q),
                    Edge::Left => (*p, r * a),
                    Edge::Right => (p + q, r * a),
                };
                alpha * sin_sin(j, k) + beta * t_sin_sin(j, k)
            }
        }
    }
}

/// `∫₀¹ cos(lπt) cos(kπt) dt` for integers.
fn cos_cos(l: u32, k: u32) -> f64 {
    match (l == k, l == 0) {
        (true, true) => 1.0,
        (true, false) => 0.5,
        _ => 0.0,
    }
}

/// `∫₀¹ cos(lπt) sin(jπt) sin(kπt) dt`.
fn cos_sin_sin(l: u32, j: u32, k: u32) -> f64 {
    0.5 * (cos_cos(l, j.abs_diff(k)) - cos_cos(l, j + k))
}

fn sin_sin(j: u32, k: u32) -> f64 {
    if j == k {
        0.5
    } else {
        0.0
    }
}

/// `∫₀¹ t cos(kπt) dt`.
fn t_cos(k: u32) -> f64 {
    if k == 0 {
        0.5
    } else {
        let kp = f64::from(k) * PI;
        (if k % 2 == 0 { 0.0 } else { -2.0 }) / (kp * kp)
    }
}

/// `∫₀¹ t sin(jπt) sin(kπt) dt`.
fn t_sin_sin(j: u32, k: u32) -> f64 {
    0.5 * (t_cos(j.abs_diff(k)) - t_cos(j + k))
}

fn sign(n: u32) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `F_{p,q} = ∫_{∂R_a} f (∂u_p/∂n)(∂u_q/∂n) dσ` for the normalized modes
/// `u_mn = (2/√a) sin(mπx₁) sin(nπx₂/a)`, in closed form.
pub fn rect_f_pq(a: f64, p: RectMode, q: RectMode, field: &RectField) -> f64 {
    let pi2 = PI * PI;
    let (mp, np, mq, nq) = (f64::from(p.m), f64::from(p.n), f64::from(q.m), f64::from(q.n));
    // horizontal edges: ∂u/∂n = ±(2/√a)(nπ/a) sin(mπx₁), length 1
    let horiz = 4.0 / a * np * nq * pi2 / (a * a);
    let top = horiz * sign(p.n + q.n) * field.edge_moment(a, Edge::Top, p.m, q.m);
    let bottom = horiz * field.edge_moment(a, Edge::Bottom, p.m, q.m);
    // vertical edges: ∂u/∂n = ±(2/√a) mπ sin(nπx₂/a), length a
    let vert = 4.0 / a * mp * mq * pi2 * a;
    let right = vert * sign(p.m + q.m) * field.edge_moment(a, Edge::Right, p.n, q.n);
    let left = vert * field.edge_moment(a, Edge::Left, p.n, q.n);
    top + bottom + right + left
}

/// Nodal field values on every mesh point.
pub fn nodal_field(m: &Mesh, f: impl Fn(Point2) -> f64) -> Vec<f64> {
    m.points().iter().map(|&p| f(p)).collect()
}

/// Discrete `F_{p,q}`: composite midpoint rule over boundary edges with the
/// piecewise-constant normal derivatives and the field averaged over each edge.
pub fn mesh_f_pq(m: &Mesh, up: &[f64], uq: &[f64], f: &[f64]) -> Result<f64> {
    let np = m.points().len();
    if up.len() != np || uq.len() != np || f.len() != np {
        return Err(Error::InvalidArgument(format!(
            "field and eigenfunctions need {np} nodal values (got {}, {}, {})",
            f.len(),
            up.len(),
            uq.len()
        )));
    }
    let dp = boundary_normal_derivatives(m, up);
    let dq = boundary_normal_derivatives(m, uq);
    let mut sum = 0.0;
    for ((e, a), (_, b)) in dp.iter().zip(&dq) {
        let len = m.points()[e.a].dist(m.points()[e.b]);
        sum += len * 0.5 * (f[e.a] + f[e.b]) * (a * b);
    }
    Ok(sum)
}

/// `λ̃_{j,1} = −F_{j,j}` for a simple eigenvalue `lams[j]`.
pub fn first_order_simple(lams: &[f64], j: usize, f_jj: f64) -> Result<f64> {
    let l = *lams.get(j).ok_or_else(|| Error::InvalidArgument(format!("no eigenvalue {j}")))?;
    let tol = GAP_TOL_REL * l;
    for nb in [j.checked_sub(1), Some(j + 1)].into_iter().flatten() {
        if let Some(&v) = lams.get(nb) {
            if (v - l).abs() <= tol {
                return Err(Error::DegenerateEigenvalue { index: j, gap: (v - l).abs() });
            }
        }
    }
    Ok(-f_jj)
}

/// Roots `μ₁ ≤ μ₂` of `(F_kk + μ)(F_ll + μ) − F_kl² = 0`.
pub fn first_order_double(f_kk: f64, f_ll: f64, f_kl: f64) -> Result<(f64, f64)> {
    let disc = (f_kk - f_ll).powi(2) + 4.0 * f_kl * f_kl;
    let scale = (f_kk.abs() + f_ll.abs() + f_kl.abs()).powi(2);
    if disc < -1e-14 * scale {
        return Err(Error::Numerical(format!("negative discriminant {disc:e}")));
    }
    let s = disc.max(0.0).sqrt();
    let mid = -0.5 * (f_kk + f_ll);
    Ok((mid - 0.5 * s, mid + 0.5 * s))
}

/// First-order coefficient of `λ_j/λ₁`: `(λ̃_j λ₁ − λ̃₁ λ_j)/λ₁²`.
pub fn ratio_slope(l1: f64, lt1: f64, lj: f64, ltj: f64) -> f64 {
    (ltj * l1 - lt1 * lj) / (l1 * l1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstOrder {
    pub values: Vec<f64>,
    /// First-order coefficients for `ε > 0`; inside a double pair the lower
    /// eigenvalue takes `min(μ₁, μ₂)`.
    pub corrections: Vec<f64>,
    /// Double pairs as `(index of lower member, μ₁, μ₂)`.
    pub doubles: Vec<(usize, f64, f64)>,
    pub modes: Vec<RectMode>,
}

impl FirstOrder {
    /// Corrections for `ε < 0` (the lower member of a pair takes `max(μ₁, μ₂)`).
    pub fn corrections_negative(&self) -> Vec<f64> {
        let mut c = self.corrections.clone();
        for &(i, m1, m2) in &self.doubles {
            c[i] = m2;
            c[i + 1] = m1;
        }
        c
    }
}

/// Closed-form first-order corrections of the first `k` eigenvalues of `R_a`.
pub fn rectangle_first_order(a: f64, k: usize, field: &RectField) -> Result<FirstOrder> {
    // one extra mode so a pair straddling index k−1 is detected
    let modes = rectangle_modes(a, k + 1)?;
    let values: Vec<f64> = modes.iter().map(|m| m.value).collect();
    let mut corrections = vec![0.0; k + 1];
    let mut doubles = Vec::new();
    let mut j = 0;
    while j < k {
        let tol = GAP_TOL_REL * values[j];
        if j < k && (values[j + 1] - values[j]).abs() <= tol {
            if j + 2 <= k && (values[j + 2] - values[j]).abs() <= tol {
                return Err(Error::InvalidArgument("eigenvalue multiplicity above 2".into()));
            }
            let f = |p: usize, q: usize| rect_f_pq(a, modes[p], modes[q], field);
            let (m1, m2) = first_order_double(f(j, j), f(j + 1, j + 1), f(j, j + 1))?;
            corrections[j] = m1;
            corrections[j + 1] = m2;
            doubles.push((j, m1, m2));
            j += 2;
        } else {
            corrections[j] = first_order_simple(&values, j, rect_f_pq(a, modes[j], modes[j], field))?;
            j += 1;
        }
    }
    let keep = |v: &mut Vec<_>| v.truncate(k);
    let mut values = values;
    let mut modes = modes;
    keep(&mut values);
    keep(&mut corrections);
    modes.truncate(k);
    doubles.retain(|d| d.0 + 1 < k);
    Ok(FirstOrder { values, corrections, doubles, modes })
}

/// How the FEM finite difference builds perturbed domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FemMethod {
    /// Move the nodes of one fixed mesh by `ε g(x₁) x₂/a`.
    Morph,
    /// Build the perturbed polygon and mesh it from scratch.
    Remesh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FemCheck {
    pub method: FemMethod,
    pub epsilon: f64,
    pub level: u32,
    pub y_minus: f64,
    pub y_zero: f64,
    pub y_plus: f64,
    pub fem_slope: f64,
    pub relative_error: f64,
    pub within_2pct: bool,
    /// `y(+ε) > 35/11`.
    pub exceeds_rectangle_max: bool,
    /// `y(+ε) > y(0)` on the same discretization.
    pub exceeds_unperturbed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineReport {
    pub a: f64,
    pub coeffs: [f64; 5],
    pub f33: f64,
    pub f44: f64,
    pub f34: f64,
    pub f11: f64,
    pub conditions_hold: bool,
    pub mu: (f64, f64),
    /// Which root attaches to λ₃ for each sign of ε.
    pub lambda3_root_eps_pos: String,
    pub lambda3_root_eps_neg: String,
    pub slope: f64,
    pub slope_formula: f64,
    pub fem: Option<FemCheck>,
}

/// Top-edge profile on `R_{√(8/3)}` with `c₃ = c₁`, `c₄ = 9c₂ − 8√2 c₀`, which
/// keeps `λ₃ = λ₄` to first order.
pub fn cosine_profile(c0: f64, c1: f64, c2: f64) -> CosineProfile {
    CosineProfile { coeffs: vec![c0, c1, c2, c1, 9.0 * c2 - 8.0 * SQRT_2 * c0] }
}

fn cosine_domain_mesh(a: f64, g: &CosineProfile, eps: f64, opts: &SolveOptions, method: FemMethod, base: &Mesh) -> Result<f64> {
    match method {
        FemMethod::Morph => {
            let m = base.map_points(|p| Point2::new(p.x, p.y + eps * g.eval(p.x) * p.y / a))?;
            Ok(solve_mesh(&m, &SolveOptions { levels: 0, ..opts.clone() })?.report.y())
        }
        FemMethod::Remesh => {
            let d = perturbed_rectangle_domain(a, g, eps, 256)?;
            Ok(solve_domain(&d, opts)?.report.y())
        }
    }
}

/// `R_a` with its top edge replaced by `x₂ = a + ε g(x₁)`, sampled at `n` points.
pub fn perturbed_rectangle_domain(a: f64, g: &CosineProfile, eps: f64, n: usize) -> Result<crate::geometry::Domain> {
    use crate::geometry::{Domain, DomainClass, PolyLoop};
    let mut pts = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)];
    for i in (0..=n).rev() {
        let x = i as f64 / n as f64;
        pts.push(Point2::new(x, a + eps * g.eval(x)));
    }
    pts.dedup();
    Domain::new(PolyLoop::new(pts)?, vec![], DomainClass::Custom, vec![("a".into(), a), ("eps".into(), eps)])
}

/// Closed-form check of the cosine family on `R_{√(8/3)}` plus an optional FEM
/// central difference of `λ₃/λ₁` at `±ε`.
pub fn rectangle_cosine_check(
    c0: f64,
    c1: f64,
    c2: f64,
    fem: Option<(FemMethod, f64, u32)>,
) -> Result<CosineReport> {
    let a = optimal_side();
    let g = cosine_profile(c0, c1, c2);
    let field = RectField::Cosine(g.clone());
    let fo = rectangle_first_order(a, 4, &field)?;
    let (i, m1, m2) = *fo
        .doubles
        .iter()
        .find(|d| d.0 == 2)
        .ok_or_else(|| Error::Numerical("λ₃ = λ₄ not detected on the optimal rectangle".into()))?;
    debug_assert_eq!(i, 2);
    let f = |p: usize, q: usize| rect_f_pq(a, fo.modes[p], fo.modes[q], &field);
    let (f11, f33, f44, f34) = (f(0, 0), f(2, 2), f(3, 3), f(2, 3));
    let scale = f33.abs().max(f44.abs()).max(1.0);
    let conditions_hold = (f33 - f44).abs() <= 1e-10 * scale && f34.abs() <= 1e-10 * scale;
    let slope = ratio_slope(fo.values[0], fo.corrections[0], fo.values[2], fo.corrections[2]);
    let slope_formula = 96.0 * 3f64.sqrt() / 121.0 * (c2 - SQRT_2 * c0);

    let fem = match fem {
        None => None,
        Some((method, eps, level)) => {
            let opts = SolveOptions::at_level(level);
            let d = make_rectangle(a)?;
            let mut base = coarse_mesh(&d, &opts)?;
            for _ in 0..level {
                base = crate::meshgen::refine(&base);
            }
            let y_minus = cosine_domain_mesh(a, &g, -eps, &opts, method, &base)?;
            let y_zero = cosine_domain_mesh(a, &g, 0.0, &opts, method, &base)?;
            let y_plus = cosine_domain_mesh(a, &g, eps, &opts, method, &base)?;
            let fem_slope = (y_plus - y_minus) / (2.0 * eps);
            let relative_error = (fem_slope - slope).abs() / slope.abs().max(1e-300);
            Some(FemCheck {
                method,
                epsilon: eps,
                level,
                y_minus,
                y_zero,
                y_plus,
                fem_slope,
                relative_error,
                within_2pct: relative_error <= 0.02,
                exceeds_rectangle_max: y_plus > 35.0 / 11.0,
                exceeds_unperturbed: y_plus > y_zero,
            })
        }
    };
    Ok(CosineReport {
        a,
        coeffs: [g.coeffs[0], g.coeffs[1], g.coeffs[2], g.coeffs[3], g.coeffs[4]],
        f33,
        f44,
        f34,
        f11,
        conditions_hold,
        mu: (m1, m2),
        lambda3_root_eps_pos: "min(mu1, mu2)".into(),
        lambda3_root_eps_neg: "max(mu1, mu2)".into(),
        slope,
        slope_formula,
        fem,
    })
}

/// FEM eigenvalues of `R_a` with its top edge displaced by `±ε g`, from one
/// morphed mesh, and the resulting difference quotients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FemSlopes {
    pub zero: Vec<f64>,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    /// `(λ(+ε) − λ(0))/ε`
    pub forward: Vec<f64>,
    /// `(λ(+ε) − λ(−ε))/(2ε)`
    pub central: Vec<f64>,
}

impl FemSlopes {
    /// First-order roots `μ₁ ≤ μ₂` of the pair `(j, j+1)`. The mesh splits a
    /// double eigenvalue slightly, so the roots come from the pair sum (linear
    /// in ε) and the ε² coefficient of the squared gap, which is `(μ₂ − μ₁)²`.
    pub fn pair_roots(&self, j: usize, eps: f64) -> (f64, f64) {
        let gap2 = |v: &[f64]| (v[j + 1] - v[j]).powi(2);
        let c2 = (gap2(&self.plus) + gap2(&self.minus) - 2.0 * gap2(&self.zero)) / (2.0 * eps * eps);
        let half = 0.5 * c2.max(0.0).sqrt();
        let mid = 0.5 * (self.central[j] + self.central[j + 1]);
        (mid - half, mid + half)
    }
}

pub fn fem_eigenvalue_slopes(a: f64, g: &CosineProfile, eps: f64, level: u32) -> Result<FemSlopes> {
    let opts = SolveOptions::at_level(level);
    let mut base = coarse_mesh(&make_rectangle(a)?, &opts)?;
    for _ in 0..level {
        base = crate::meshgen::refine(&base);
    }
    let raw = |e: f64| -> Result<Vec<f64>> {
        let m = base.map_points(|p| Point2::new(p.x, p.y + e * g.eval(p.x) * p.y / a))?;
        Ok(solve_mesh(&m, &SolveOptions { levels: 0, ..opts.clone() })?.report.raw)
    };
    let (zero, plus, minus) = (raw(0.0)?, raw(eps)?, raw(-eps)?);
    let forward = plus.iter().zip(&zero).map(|(p, z)| (p - z) / eps).collect();
    let central = plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * eps)).collect();
    Ok(FemSlopes { zero, plus, minus, forward, central })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangencyReport {
    pub a: f64,
    pub field: [f64; 3],
    pub x: f64,
    pub y: f64,
    /// First-order coefficients of `x^ε`, `y^ε`.
    pub dx: f64,
    pub dy: f64,
    /// `dy/dx`, when `dx ≠ 0`.
    pub slope: Option<f64>,
    pub curve_slope: f64,
    pub deviation: f64,
}

/// First-order motion of `(x, y)` on `R_a` under the linear field
/// `p + q x₁ + r x₂`, compared with the slope of the rectangle curve.
pub fn quadrilateral_tangency_check(a: f64, p: f64, q: f64, r: f64) -> Result<TangencyReport> {
    let fo = rectangle_first_order(a, 4, &RectField::Linear { p, q, r })?;
    let v = &fo.values;
    let c = &fo.corrections;
    let (x, y) = (v[1] / v[0], v[2] / v[0]);
    let dx = ratio_slope(v[0], c[0], v[1], c[1]);
    let dy = ratio_slope(v[0], c[0], v[2], c[2]);
    let curve_slope = if x <= 20.0 / 11.0 { 8.0 / 3.0 } else { -1.0 };
    rectangle_curve(x.min(2.5))?;
    let scale = dx.abs().max(dy.abs());
    let slope = (scale > 0.0 && dx.abs() > 1e-12 * scale).then(|| dy / dx);
    let deviation = if scale == 0.0 { 0.0 } else { (dy - curve_slope * dx).abs() / dx.abs().max(1e-300) };
    Ok(TangencyReport { a, field: [p, q, r], x, y, dx, dy, slope, curve_slope, deviation })
}

/// `count` random linear fields with coefficients in `[-1, 1]`.
pub fn random_linear_fields(seed: u64, count: usize) -> Vec<[f64; 3]> {
    let mut s = Stream::new(seed);
    (0..count).map(|_| [s.range(-1.0, 1.0), s.range(-1.0, 1.0), s.range(-1.0, 1.0)]).collect()
}

/// Outward normal of a boundary edge, re-exported for field construction.
pub fn boundary_edge_normal(m: &Mesh, e: &crate::meshgen::BoundaryEdge) -> [f64; 2] {
    edge_normal(m, e)
}
