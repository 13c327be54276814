//! Closed-form spectra: rectangles, disks, disjoint unions, and Bessel
//! functions with their zeros.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect;

/// Largest supported Bessel order.
pub const MAX_ORDER: f64 = 50.0;
const SERIES_LIMIT: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub x: f64,
    pub y: f64,
}

impl RatioPoint {
    pub fn from_values(v: &[f64]) -> Result<RatioPoint> {
        if v.len() < 3 {
            return Err(Error::InvalidArgument(format!("need 3 eigenvalues, got {}", v.len())));
        }
        Ok(RatioPoint { x: v[1] / v[0], y: v[2] / v[0] })
    }
}

fn check_order(p: f64) -> Result<()> {
    let twice = 2.0 * p;
    if !(p >= 0.0 && p <= MAX_ORDER && twice == twice.round()) {
        return Err(Error::InvalidArgument(format!("unsupported Bessel order {p}")));
    }
    Ok(())
}

/// `Γ(p + 1)` for integer or half-integer `p ≥ 0`.
fn gamma_p1(p: f64) -> f64 {
    // Γ(1) = 1, Γ(3/2) = √π/2, then Γ(s + 1) = s Γ(s)
    let (mut g, mut s) = if p.fract() == 0.0 { (1.0, 1.0) } else { (PI.sqrt() / 2.0, 1.5) };
    while s <= p {
        g *= s;
        s += 1.0;
    }
    g
}

fn series(p: f64, t: f64) -> f64 {
    let h = 0.5 * t;
    let mut term = h.powf(p) / gamma_p1(p);
    let mut sum = term;
    let q = -h * h;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + p));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Backward recurrence from a high order, normalized with a known value.
fn miller(p: f64, t: f64) -> f64 {
    let frac = p.fract();
    let top = (p.max(t) + 30.0 + 2.0 * t.sqrt()).ceil() + frac;
    let mut hi = 0.0;
    let mut cur = 1e-300;
    let mut nu = top;
    let mut at_p = 0.0;
    let mut even_sum = 0.0;
    let low: [f64; 2];
    // descend: J_{ν−1} = (2ν/t) J_ν − J_{ν+1}
    loop {
        if (nu - p).abs() < 0.25 {
            at_p = cur;
        }
        if frac == 0.0 && (nu as u64) % 2 == 0 && nu > 0.5 {
            even_sum += cur;
        }
        if nu < 1.0 {
            low = [cur, hi];
            break;
        }
        let next = 2.0 * nu / t * cur - hi;
        hi = cur;
        cur = next;
        nu -= 1.0;
        if cur.abs() > 1e250 {
            hi *= 1e-250;
            cur *= 1e-250;
            at_p *= 1e-250;
            even_sum *= 1e-250;
        }
    }
    let scale = if frac == 0.0 {
        // J₀ + 2 Σ J_{2k} = 1
        1.0 / (low[0] + 2.0 * even_sum)
    } else {
        // low = [J_{1/2}, J_{3/2}] up to scale; continue one step to J_{−1/2}
        let jm = 2.0 * 0.5 / t * low[0] - low[1];
        let c = (2.0 / (PI * t)).sqrt();
        let (s, co) = (c * t.sin(), c * t.cos());
        if s.abs() > co.abs() {
            s / low[0]
        } else {
            co / jm
        }
    };
    at_p * scale
}

/// Bessel function of the first kind `J_p(t)` for integer or half-integer
/// `0 ≤ p ≤ 50` and `t ≥ 0`.
pub fn bessel_j(p: f64, t: f64) -> Result<f64> {
    check_order(p)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("Bessel argument {t} must be finite and ≥ 0")));
    }
    if t == 0.0 {
        return Ok(if p == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(if t <= SERIES_LIMIT { series(p, t) } else { miller(p, t) })
}

fn j(p: f64, t: f64) -> f64 {
    bessel_j(p, t).expect("order checked by caller")
}

/// `q`-th positive zero of `J_p`.
pub fn bessel_zero(p: f64, q: usize) -> Result<f64> {
    check_order(p)?;
    if q == 0 {
        return Err(Error::InvalidArgument("zero index starts at 1".into()));
    }
    let step = 0.05;
    let limit = p + PI * (q as f64 + 2.0) + 10.0;
    let mut a = p.max(step);
    let mut fa = j(p, a);
    let mut found = 0;
    while a < limit {
        let b = a + step;
        let fb = j(p, b);
        if fa != 0.0 && fa.signum() != fb.signum() {
            found += 1;
            if found == q {
                let mut z = bisect(|t| j(p, t), a, b, 1e-12)?;
                // one Newton step: J_p' = (p/t) J_p − J_{p+1}
                let d = p / z * j(p, z) - j(p + 1.0, z);
                if d != 0.0 {
                    z -= j(p, z) / d;
                }
                return Ok(z);
            }
        }
        a = b;
        fa = fb;
    }
    Err(Error::Numerical(format!("zero {q} of J_{p} not bracketed below {limit}")))
}

/// `K₂ = j₁,₁² / j₀,₁²`, the sharp bound on λ₂/λ₁ in the plane.
pub fn k2() -> f64 {
    static K2: OnceLock<f64> = OnceLock::new();
    *K2.get_or_init(|| {
        let (a, b) = (bessel_zero(0.0, 1).expect("j01"), bessel_zero(1.0, 1).expect("j11"));
        (b / a).powi(2)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectMode {
    pub value: f64,
    /// Half-wavelengths along the unit side.
    pub m: u32,
    /// Half-wavelengths along the side of length `a`.
    pub n: u32,
}

/// First `k` Dirichlet eigenvalues of `[0,1] × [0,a]`, `π²(m² + n²/a²)`,
/// ascending with multiplicity; ties break by `(m, n)`.
pub fn rectangle_modes(a: f64, k: usize) -> Result<Vec<RectMode>> {
    if !(a >= 1.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("side ratio a = {a} must be ≥ 1")));
    }
    let value = |m: u32, n: u32| PI * PI * (f64::from(m * m) + f64::from(n * n) / (a * a));
    let k32 = u32::try_from(k.max(1)).map_err(|_| Error::InvalidArgument("k too large".into()))?;
    // (m, 1) for m ≤ k are k candidates, so the k-th value is at most value(k, 1).
    let cap = value(k32, 1);
    let mut modes = Vec::new();
    let mut m = 1;
    while value(m, 1) <= cap {
        let mut n = 1;
        while value(m, n) <= cap {
            modes.push(RectMode { value: value(m, n), m, n });
            n += 1;
        }
        m += 1;
    }
    modes.sort_by(|x, y| x.value.total_cmp(&y.value).then((x.m, x.n).cmp(&(y.m, y.n))));
    modes.truncate(k);
    Ok(modes)
}

pub fn rectangle_spectrum(a: f64, k: usize) -> Result<Vec<f64>> {
    Ok(rectangle_modes(a, k)?.into_iter().map(|m| m.value).collect())
}

/// Upper boundary of the rectangle ratio curve `y*(x)`.
pub fn rectangle_curve(x: f64) -> Result<f64> {
    if !(1.0..=2.5).contains(&x) {
        return Err(Error::InvalidArgument(format!("x = {x} outside [1, 5/2]")));
    }
    Ok(if x <= 20.0 / 11.0 { (8.0 * x - 5.0) / 3.0 } else { 5.0 - x })
}

/// `y*(x)` over disjoint unions of disks: constant K₂.
pub fn circles_curve(x: f64) -> Result<f64> {
    let k = k2();
    if !(x >= 1.0 && x <= k) {
        return Err(Error::InvalidArgument(format!("x = {x} outside [1, K₂]")));
    }
    Ok(k)
}

/// First `k` eigenvalues of the unit disk, `j_{p,q}²`, with multiplicity 2 for `p ≥ 1`.
pub fn disk_spectrum(k: usize) -> Result<Vec<f64>> {
    let mut vals = Vec::new();
    let mut p = 0.0;
    // zeros increase with order, so once j_{p,1} exceeds the k-th value we stop
    loop {
        let first = bessel_zero(p, 1)?;
        if vals.len() >= k {
            let mut sorted = vals.clone();
            sorted.sort_by(f64::total_cmp);
            if first * first > sorted[k - 1] {
                break;
            }
        }
        let mult = if p == 0.0 { 1 } else { 2 };
        for q in 1..=k {
            let z = bessel_zero(p, q)?;
            for _ in 0..mult {
                vals.push(z * z);
            }
        }
        p += 1.0;
        if p > MAX_ORDER {
            return Err(Error::Numerical("disk spectrum needs orders beyond the supported range".into()));
        }
    }
    vals.sort_by(f64::total_cmp);
    vals.truncate(k);
    Ok(vals)
}

/// Ratios of the merged spectrum of a disjoint union.
pub fn disjoint_union_ratios(a: &[f64], b: &[f64]) -> Result<RatioPoint> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    RatioPoint::from_values(&all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_values() {
        assert_eq!(bessel_j(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(1.0, 0.0).unwrap(), 0.0);
        // reference values
        assert!((bessel_j(0.0, 1.0).unwrap() - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j(1.0, 2.5).unwrap() - 0.497_094_102_464_274_4).abs() < 1e-13);
        assert!((bessel_j(0.0, 20.0).unwrap() - 0.167_024_664_340_583_2).abs() < 1e-12);
        assert!((bessel_j(1.0, 30.0).unwrap() - (-0.118_751_062_616_623)).abs() < 1e-12);
        assert!(bessel_j(0.0, 2.404825557695773).unwrap().abs() < 1e-10);
        assert!(bessel_j(0.3, 1.0).is_err());
        assert!(bessel_j(0.0, -1.0).is_err());
    }

    #[test]
    fn half_integer_closed_forms() {
        for &t in &[0.3, 2.0, 7.5, 11.9, 12.1, 25.0, 40.0] {
            let c = (2.0 / (PI * t)).sqrt();
            assert!((bessel_j(0.5, t).unwrap() - c * t.sin()).abs() < 1e-12, "t={t}");
            let j32 = c * (t.sin() / t - t.cos());
            assert!((bessel_j(1.5, t).unwrap() - j32).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn series_and_recurrence_agree_at_switch() {
        for p in [0.0, 1.0, 2.0, 5.0, 2.5] {
            for t in [10.0, 12.0, 14.0] {
                assert!((series(p, t) - miller(p, t)).abs() < 1e-11, "p={p} t={t}");
            }
        }
    }

    #[test]
    fn zeros() {
        let j01 = bessel_zero(0.0, 1).unwrap();
        let j11 = bessel_zero(1.0, 1).unwrap();
        assert!((j01 - 2.404_825_557_70).abs() < 1e-10);
        assert!((j11 - 3.831_705_970_21).abs() < 1e-10);
        assert!((bessel_zero(0.0, 2).unwrap() - 5.520_078_110_286_3).abs() < 1e-10);
        assert!((bessel_zero(2.0, 1).unwrap() - 5.135_622_301_840_7).abs() < 1e-10);
        assert!(((k2() * 1e4).round() / 1e4 - 2.5387).abs() < 1e-12);
        assert!(bessel_zero(0.0, 0).is_err());
    }

    #[test]
    fn rectangle_examples() {
        let pi2 = PI * PI;
        let s = rectangle_spectrum(1.0, 3).unwrap();
        for (v, want) in s.iter().zip([2.0, 5.0, 5.0]) {
            assert!((v - want * pi2).abs() < 1e-12);
        }
        let a = (8.0f64 / 3.0).sqrt();
        let m = rectangle_modes(a, 4).unwrap();
        assert!((m[1].value / m[0].value - 20.0 / 11.0).abs() < 1e-13);
        assert!((m[2].value / m[0].value - 35.0 / 11.0).abs() < 1e-13);
        assert!((m[2].value - m[3].value).abs() < 1e-12 * m[2].value);
        assert_eq!(((m[2].m, m[2].n), (m[3].m, m[3].n)), ((1, 3), (2, 1)));
        let s = rectangle_spectrum(2.0, 3).unwrap();
        assert!((s[1] / s[0] - 1.6).abs() < 1e-14 && (s[2] / s[0] - 2.6).abs() < 1e-14);
        assert!(rectangle_spectrum(0.5, 3).is_err());
        // extreme aspect: low modes all run along the long side
        let s = rectangle_spectrum(20.0, 5).unwrap();
        assert!((s[4] / (PI * PI) - (1.0 + 25.0 / 400.0)).abs() < 1e-12);
    }

    #[test]
    fn curves() {
        assert!((rectangle_curve(20.0 / 11.0).unwrap() - 35.0 / 11.0).abs() < 1e-14);
        assert_eq!(rectangle_curve(1.0).unwrap(), 1.0);
        assert_eq!(rectangle_curve(2.5).unwrap(), 2.5);
        assert!(rectangle_curve(2.6).is_err());
        let k = k2();
        assert_eq!(circles_curve(1.0).unwrap(), k);
        assert_eq!(circles_curve(k).unwrap(), k);
        assert!(circles_curve(3.0).is_err());
    }

    #[test]
    fn disk_and_unions() {
        let d = disk_spectrum(6).unwrap();
        let j01 = bessel_zero(0.0, 1).unwrap();
        let j11 = bessel_zero(1.0, 1).unwrap();
        assert!((d[0] - j01 * j01).abs() < 1e-12);
        assert_eq!(d[1], d[2]);
        assert!((d[1] - j11 * j11).abs() < 1e-12);
        let p = disjoint_union_ratios(&d[..3], &d[..3]).unwrap();
        assert_eq!(p.x, 1.0);
        assert!((p.y - k2()).abs() < 1e-12);
        let sq = rectangle_spectrum(1.0, 3).unwrap();
        let tiny: Vec<f64> = sq.iter().map(|v| v * 100.0).collect();
        let p = disjoint_union_ratios(&sq, &tiny).unwrap();
        assert!((p.x - 2.5).abs() < 1e-14 && (p.y - 2.5).abs() < 1e-14);
        assert!(disjoint_union_ratios(&[1.0], &[2.0]).is_err());
    }
}
