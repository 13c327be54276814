//! Experiment campaigns: sample a domain class, solve each domain, bin the
//! ratio points by `x`, optimize promising candidates and summarize.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{disjoint_union_ratios, k2};
use crate::error::{Error, Result};
use crate::geometry::{
    make_dumbbell_with, make_ellipse, make_jigsaw_with, make_quadrilateral, make_rectangle,
    make_sector_with, make_triangle, perturbed_rectangle, random_simple_polygon_with,
    random_star_polygon_with, star_difference, Domain, GeomConfig, StarDifferenceKind,
};
use crate::numeric::nelder_mead;
use crate::rng::{child_seed, Stream};
use crate::solve::{solve_domain, SolveOptions};

/// Slack on `x ≤ K₂` before a record is flagged as a probable FEM error.
pub const X_SLACK: f64 = 0.02;
/// Records within this distance of their bin maximum are re-solved one level finer.
pub const CONFIRM_WITHIN: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanClass {
    Rectangle,
    Triangle,
    Quadrilateral,
    Ellipse,
    Sector,
    Polygon,
    PerturbedRectangle,
    Star,
    StarDifference,
    Dumbbell,
    Jigsaw,
}

impl ScanClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ScanClass::Rectangle => "rectangle",
            ScanClass::Triangle => "triangle",
            ScanClass::Quadrilateral => "quadrilateral",
            ScanClass::Ellipse => "ellipse",
            ScanClass::Sector => "sector",
            ScanClass::Polygon => "polygon",
            ScanClass::PerturbedRectangle => "perturbed_rectangle",
            ScanClass::Star => "star",
            ScanClass::StarDifference => "star_difference",
            ScanClass::Dumbbell => "dumbbell",
            ScanClass::Jigsaw => "jigsaw",
        }
    }

    /// Names of the parameter vector; angles are in degrees.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ScanClass::Rectangle => &["a"],
            ScanClass::Triangle => &["alpha_deg", "beta_deg"],
            ScanClass::Quadrilateral => &["alpha_deg", "beta_deg", "gamma_deg", "delta_deg"],
            ScanClass::Ellipse => &["b"],
            ScanClass::Sector => &["r", "theta"],
            ScanClass::Polygon => &["n"],
            ScanClass::PerturbedRectangle => &["a", "extra"],
            ScanClass::Star => &["n", "r1", "r2"],
            ScanClass::StarDifference => &["kind", "n"],
            ScanClass::Dumbbell => &["l", "h", "r1", "r2"],
            ScanClass::Jigsaw => &["a", "cx", "cy", "r"],
        }
    }

    /// Parameters that the local optimizer moves, with their box; `None` for
    /// classes without a continuous parameterization.
    fn free_box(self) -> Option<(Vec<usize>, Vec<f64>, Vec<f64>)> {
        let b = |idx: &[usize], lo: &[f64], hi: &[f64]| Some((idx.to_vec(), lo.to_vec(), hi.to_vec()));
        match self {
            ScanClass::Rectangle => b(&[0], &[1.0], &[5.0]),
            ScanClass::Triangle => b(&[0, 1], &[1.0, 1.0], &[178.0, 178.0]),
            ScanClass::Quadrilateral => b(&[0, 1, 2, 3], &[1.0; 4], &[178.0; 4]),
            ScanClass::Ellipse => b(&[0], &[1.0], &[5.0]),
            ScanClass::Sector => b(&[0, 1], &[1.0 + 1e-6, 0.01 * 180.0], &[20.0, 1.99 * 180.0]),
            // the problem is scale invariant, so l stays fixed
            ScanClass::Dumbbell => b(&[1, 2, 3], &[0.05, 0.05, 0.05], &[4.0, 3.0, 3.0]),
            ScanClass::Jigsaw => b(&[0, 1, 2, 3], &[1.0, -1.0, -1.0, 0.02], &[5.0, 6.0, 2.0, 2.0]),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Grid,
    Random,
    List,
}

/// Re-scan with a finer angle step around the best grid records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalRescan {
    /// Only records with `y` at least this high are re-scanned around.
    pub threshold: f64,
    pub step_deg: f64,
    pub radius_deg: f64,
    /// Number of highest records used as centres.
    pub centres: usize,
}

impl Default for LocalRescan {
    fn default() -> Self {
        Self { threshold: 0.0, step_deg: 0.5, radius_deg: 5.0, centres: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Plan {
    pub class: ScanClass,
    pub sampler: Sampler,
    /// Random: number of samples. Grid: cap on the cycle (`None` runs all of it).
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_refinement")]
    pub refinement: u32,
    #[serde(default = "default_dx")]
    pub dx: f64,
    /// Grid step: degrees for triangles and quadrilaterals, otherwise in parameter units.
    #[serde(default)]
    pub step: Option<f64>,
    /// Grid or random range of the primary parameter.
    #[serde(default)]
    pub range: Option<[f64; 2]>,
    /// Smallest admissible grid angle for triangles and quadrilaterals, degrees.
    #[serde(default)]
    pub min_angle_deg: Option<f64>,
    /// Drop grid shapes congruent to an earlier one.
    #[serde(default)]
    pub dedupe: bool,
    /// Vertex counts drawn uniformly for polygons and stars.
    #[serde(default)]
    pub vertices: Option<Vec<usize>>,
    /// Radii range for stars.
    #[serde(default)]
    pub radii: Option<[f64; 2]>,
    #[serde(default)]
    pub kind: Option<StarDifferenceKind>,
    /// Explicit parameter vectors for the `list` sampler.
    #[serde(default)]
    pub samples: Vec<Vec<f64>>,
    #[serde(default)]
    pub arc_segments: Option<usize>,
    #[serde(default)]
    pub local_rescan: Option<LocalRescan>,
    /// Locally optimize from this many of the best records.
    #[serde(default)]
    pub optimize_best: usize,
    /// Re-solve records near their bin maximum one level finer.
    #[serde(default = "default_true")]
    pub confirm: bool,
}

fn default_refinement() -> u32 {
    2
}
fn default_dx() -> f64 {
    0.05
}
fn default_true() -> bool {
    true
}

impl Plan {
    pub fn new(class: ScanClass, sampler: Sampler) -> Self {
        Plan {
            class,
            sampler,
            count: None,
            seed: 0,
            refinement: default_refinement(),
            dx: default_dx(),
            step: None,
            range: None,
            min_angle_deg: None,
            dedupe: false,
            vertices: None,
            radii: None,
            kind: None,
            samples: Vec::new(),
            arc_segments: None,
            local_rescan: None,
            optimize_best: 0,
            confirm: true,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Plan> {
        let text = std::fs::read_to_string(path)?;
        let plan: Plan = serde_json::from_str(&text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return bad(format!("dx = {} must be positive", self.dx));
        }
        if let Some(s) = self.step {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("step = {s} must be positive"));
            }
        }
        if let Some([lo, hi]) = self.range {
            if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
                return bad(format!("range [{lo}, {hi}] is empty"));
            }
        }
        match self.sampler {
            Sampler::Random if self.count.is_none() => return bad("random sampler needs a count".into()),
            Sampler::Random if !matches!(
                self.class,
                ScanClass::Sector
                    | ScanClass::Polygon
                    | ScanClass::PerturbedRectangle
                    | ScanClass::Star
                    | ScanClass::StarDifference
                    | ScanClass::Dumbbell
                    | ScanClass::Jigsaw
            ) =>
            {
                return bad(format!("no random sampler for {}", self.class.as_str()))
            }
            Sampler::Grid if !matches!(
                self.class,
                ScanClass::Rectangle | ScanClass::Triangle | ScanClass::Quadrilateral | ScanClass::Ellipse
            ) =>
            {
                return bad(format!("no grid sampler for {}", self.class.as_str()))
            }
            Sampler::List => {
                let n = self.class.param_names().len();
                if let Some(s) = self.samples.iter().find(|s| s.len() != n) {
                    return bad(format!("{} needs {n} parameters, sample has {}", self.class.as_str(), s.len()));
                }
            }
            _ => {}
        }
        if self.local_rescan.is_some()
            && !matches!(self.class, ScanClass::Triangle | ScanClass::Quadrilateral)
        {
            return bad("local re-scan applies to triangles and quadrilaterals".into());
        }
        if self.optimize_best > 0 && self.class.free_box().is_none() {
            return bad(format!("{} has no continuous parameterization to optimize", self.class.as_str()));
        }
        if let Some(v) = &self.vertices {
            if v.is_empty() || v.iter().any(|&n| n < 3) {
                return bad("vertex counts must be ≥ 3".into());
            }
        }
        Ok(())
    }

    fn geom(&self) -> GeomConfig {
        let mut g = GeomConfig::default();
        if let Some(n) = self.arc_segments {
            g.arc_segments = n;
        }
        g
    }

    fn solve_options(&self, level: u32) -> SolveOptions {
        SolveOptions::at_level(level)
    }
}

/// One sample of the campaign, fixed before any solving.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkItem {
    pub id: usize,
    pub seed: u64,
    pub params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub id: usize,
    pub class: ScanClass,
    pub seed: u64,
    pub params: Vec<f64>,
    pub lambdas: [f64; 4],
    pub x: f64,
    pub y: f64,
    pub delta4: f64,
    pub level: u32,
    pub residual: f64,
    /// Connected components solved (more than one for a disjoint union).
    pub components: usize,
    /// `probable_fem_error`, `optimized`, or empty.
    pub tag: String,
}

impl ScanRecord {
    fn from_values(item: &WorkItem, class: ScanClass, lams: &[f64], level: u32, residual: f64, components: usize) -> Result<Self> {
        if lams.len() < 4 || lams[0] <= 0.0 {
            return Err(Error::Numerical(format!("need four positive eigenvalues, got {lams:?}")));
        }
        let l = [lams[0], lams[1], lams[2], lams[3]];
        let mut tag = String::new();
        let x = l[1] / l[0];
        if x > k2() + X_SLACK {
            tag = "probable_fem_error".into();
        }
        Ok(ScanRecord {
            id: item.id,
            class,
            seed: item.seed,
            params: item.params.clone(),
            lambdas: l,
            x,
            y: l[2] / l[0],
            delta4: (l[3] - l[2]) / l[2],
            level,
            residual,
            components,
            tag,
        })
    }
}

/// Why a work item produced no record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkipEvent {
    pub id: usize,
    pub seed: u64,
    pub params: Vec<f64>,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanOutcome {
    pub records: Vec<ScanRecord>,
    pub skipped: Vec<SkipEvent>,
}

fn deg(v: f64) -> f64 {
    v.to_radians()
}

/// Domain components for a parameter vector of `class`.
pub fn build_domains(class: ScanClass, params: &[f64], seed: u64, geom: &GeomConfig) -> Result<Vec<Domain>> {
    let want = class.param_names().len();
    if params.len() != want {
        return Err(Error::InvalidArgument(format!("{} needs {want} parameters", class.as_str())));
    }
    let p = params;
    let count = |v: f64| -> Result<usize> {
        if v >= 3.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::InvalidParameter(format!("vertex count {v} must be an integer ≥ 3")))
        }
    };
    let one = |d: Result<Domain>| d.map(|d| vec![d]);
    match class {
        ScanClass::Rectangle => one(make_rectangle(p[0])),
        ScanClass::Triangle => one(make_triangle(deg(p[0]), deg(p[1]))),
        ScanClass::Quadrilateral => one(make_quadrilateral(deg(p[0]), deg(p[1]), deg(p[2]), deg(p[3]))),
        ScanClass::Ellipse => one(make_ellipse(p[0], geom)),
        ScanClass::Sector => one(make_sector_with(p[0], p[1].to_radians(), geom)),
        ScanClass::Polygon => one(random_simple_polygon_with(count(p[0])?, seed, geom)),
        ScanClass::PerturbedRectangle => one(perturbed_rectangle(p[0], p[1] as usize, seed, geom)),
        ScanClass::Star => one(random_star_polygon_with(count(p[0])?, p[1], p[2], seed, geom)),
        ScanClass::StarDifference => {
            let kind = match p[0] as i64 {
                0 => StarDifferenceKind::RectMinusStar,
                1 => StarDifferenceKind::StarMinusRect,
                2 => StarDifferenceKind::StarMinusStar,
                k => return Err(Error::InvalidParameter(format!("unknown difference kind {k}"))),
            };
            star_difference(kind, count(p[1])?, seed, geom)
        }
        ScanClass::Dumbbell => one(make_dumbbell_with(p[0], p[1], p[2], p[3], geom)),
        ScanClass::Jigsaw => one(make_jigsaw_with(p[0], p[1], p[2], p[3], geom)),
    }
}

/// Lowest four eigenvalues of the union of the components, and the largest residual.
fn solve_components(domains: &[Domain], opts: &SolveOptions) -> Result<(Vec<f64>, f64)> {
    let mut all = Vec::new();
    let mut residual: f64 = 0.0;
    for d in domains {
        let s = solve_domain(d, opts)?;
        all.extend_from_slice(s.report.reported());
        residual = residual.max(s.report.residuals.iter().copied().fold(0.0, f64::max));
    }
    all.sort_by(f64::total_cmp);
    all.truncate(4);
    Ok((all, residual))
}

/// Solves one work item at `level`.
pub fn solve_item(plan: &Plan, item: &WorkItem, level: u32) -> Result<ScanRecord> {
    let geom = plan.geom();
    let domains = build_domains(plan.class, &item.params, item.seed, &geom)?;
    let (lams, res) = solve_components(&domains, &plan.solve_options(level))?;
    ScanRecord::from_values(item, plan.class, &lams, level, res, domains.len())
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

/// Angle pairs `(p, q)` in units of `step` with `p, q, 180 − p − q ≥ floor`.
fn angle_pairs(step: f64, floor: f64) -> Vec<(f64, f64)> {
    let total = (180.0 / step).round() as i64;
    let f = (floor / step).ceil().max(1.0) as i64;
    let mut out = Vec::new();
    for p in f..total {
        for q in f..total {
            if total - p - q >= f {
                out.push((p as f64 * step, q as f64 * step));
            }
        }
    }
    out
}

fn canonical_quad(q: [i64; 4]) -> [i64; 4] {
    let [a, b, c, d] = q;
    *[[a, b, c, d], [c, d, a, b], [b, a, d, c], [d, c, b, a]].iter().min().unwrap()
}

/// The deterministic work list of a plan, before any re-scan or optimization.
pub fn work_list(plan: &Plan) -> Result<Vec<WorkItem>> {
    plan.validate()?;
    let mut params: Vec<Vec<f64>> = Vec::new();
    let mut rng = Stream::new(plan.seed);
    let count = plan.count.unwrap_or(usize::MAX);
    let range = |lo: f64, hi: f64| plan.range.unwrap_or([lo, hi]);
    match plan.sampler {
        Sampler::List => params = plan.samples.clone(),
        Sampler::Grid => match plan.class {
            ScanClass::Rectangle => {
                let [lo, hi] = range(1.0, 5.0);
                params = grid(lo, hi, plan.step.unwrap_or(0.01)).into_iter().map(|a| vec![a]).collect();
            }
            ScanClass::Ellipse => {
                let [lo, hi] = range(1.0, 5.0);
                params = grid(lo, hi, plan.step.unwrap_or(0.1)).into_iter().map(|b| vec![b]).collect();
            }
            ScanClass::Triangle => {
                let step = plan.step.unwrap_or(2.5);
                let floor = plan.min_angle_deg.unwrap_or(3.0 * step);
                for (a, b) in angle_pairs(step, floor) {
                    let c = 180.0 - a - b;
                    if plan.dedupe && !(a <= b && b <= c) {
                        continue;
                    }
                    params.push(vec![a, b]);
                }
            }
            ScanClass::Quadrilateral => {
                let step = plan.step.unwrap_or(15.0);
                let floor = plan.min_angle_deg.unwrap_or(step);
                let pairs = angle_pairs(step, floor);
                for &(a, b) in &pairs {
                    for &(c, d) in &pairs {
                        let u = |v: f64| (v / step).round() as i64;
                        let key = [u(a), u(b), u(c), u(d)];
                        if plan.dedupe && canonical_quad(key) != key {
                            continue;
                        }
                        params.push(vec![a, b, c, d]);
                    }
                }
            }
            _ => unreachable!("validated"),
        },
        Sampler::Random => {
            for _ in 0..count {
                let p = match plan.class {
                    ScanClass::Sector => {
                        let [lo, hi] = range(1.0, 20.0);
                        vec![rng.range(lo.max(1.0 + 1e-9), hi), rng.range(0.01 * 180.0, 1.99 * 180.0)]
                    }
                    ScanClass::Polygon => vec![pick(&mut rng, plan.vertices.as_deref().unwrap_or(&[5, 6, 10]))],
                    ScanClass::PerturbedRectangle => {
                        let [lo, hi] = range(1.0, 5.0);
                        vec![rng.range(lo, hi), rng.int_range(1, 8) as f64]
                    }
                    ScanClass::Star => {
                        let n = match &plan.vertices {
                            Some(v) => pick(&mut rng, v),
                            None => rng.int_range(4, 30) as f64,
                        };
                        let [r1, r2] = plan.radii.unwrap_or([0.5, 1.0]);
                        vec![n, r1, r2]
                    }
                    ScanClass::StarDifference => {
                        let kind = plan.kind.unwrap_or(StarDifferenceKind::RectMinusStar);
                        let n = match &plan.vertices {
                            Some(v) => pick(&mut rng, v),
                            None => rng.int_range(4, 30) as f64,
                        };
                        vec![kind.code(), n]
                    }
                    ScanClass::Dumbbell => {
                        let [lo, hi] = range(0.2, 2.0);
                        vec![1.0, rng.range(lo, hi), rng.range(0.3, 1.2), rng.range(0.3, 1.2)]
                    }
                    ScanClass::Jigsaw => {
                        let [lo, hi] = range(1.0, 3.0);
                        let a = rng.range(lo, hi);
                        let r = rng.range(0.05, 0.5);
                        // centre within r of a random side
                        let t = rng.uniform();
                        let off = rng.range(-r, r);
                        let (cx, cy) = match rng.int_range(0, 3) {
                            0 => (t * a, off),
                            1 => (a + off, t),
                            2 => (t * a, 1.0 + off),
                            _ => (off, t),
                        };
                        vec![a, cx, cy, r]
                    }
                    _ => unreachable!("validated"),
                };
                params.push(p);
            }
        }
    }
    params.truncate(count);
    Ok(params
        .into_iter()
        .enumerate()
        .map(|(id, params)| WorkItem { id, seed: child_seed(plan.seed, id as u64), params })
        .collect())
}

fn pick(rng: &mut Stream, v: &[usize]) -> f64 {
    v[rng.int_range(0, v.len() as u64 - 1) as usize] as f64
}

fn solve_items(plan: &Plan, items: &[WorkItem], level: u32) -> ScanOutcome {
    let results: Vec<(WorkItem, Result<ScanRecord>)> =
        items.par_iter().map(|it| (it.clone(), solve_item(plan, it, level))).collect();
    let mut out = ScanOutcome::default();
    for (it, r) in results {
        match r {
            Ok(rec) => out.records.push(rec),
            Err(e) => out.skipped.push(SkipEvent { id: it.id, seed: it.seed, params: it.params, reason: e.to_string() }),
        }
    }
    out
}

/// Runs a campaign: the work list, optional local re-scan and optimization,
/// then confirmation one level finer of records near their bin maximum.
/// The result depends only on the plan, not on the number of worker threads.
pub fn run_scan(plan: &Plan) -> Result<ScanOutcome> {
    let items = work_list(plan)?;
    let mut out = solve_items(plan, &items, plan.refinement);
    let mut next_id = items.len();

    if let Some(lr) = &plan.local_rescan {
        let mut best: Vec<&ScanRecord> = out.records.iter().filter(|r| r.y >= lr.threshold).collect();
        best.sort_by(|a, b| b.y.total_cmp(&a.y).then(a.id.cmp(&b.id)));
        best.truncate(lr.centres);
        let mut seen: Vec<Vec<i64>> = out.records.iter().map(|r| key(&r.params, lr.step_deg)).collect();
        let mut extra = Vec::new();
        for c in best.iter().map(|r| r.params.clone()).collect::<Vec<_>>() {
            for p in local_grid(&c, lr.radius_deg, lr.step_deg) {
                let k = key(&p, lr.step_deg);
                if seen.contains(&k) {
                    continue;
                }
                seen.push(k);
                extra.push(WorkItem { id: next_id, seed: child_seed(plan.seed, next_id as u64), params: p });
                next_id += 1;
            }
        }
        let more = solve_items(plan, &extra, plan.refinement);
        out.records.extend(more.records);
        out.skipped.extend(more.skipped);
    }

    if plan.optimize_best > 0 {
        let mut order: Vec<&ScanRecord> = out.records.iter().filter(|r| r.tag.is_empty()).collect();
        order.sort_by(|a, b| b.y.total_cmp(&a.y).then(a.id.cmp(&b.id)));
        let starts: Vec<Vec<f64>> = order.iter().take(plan.optimize_best).map(|r| r.params.clone()).collect();
        for s in starts {
            if let Ok(mut r) = optimize_ratio(plan, &s) {
                r.id = next_id;
                r.seed = child_seed(plan.seed, next_id as u64);
                out.records.push(r);
            }
            next_id += 1;
        }
    }

    if plan.confirm {
        confirm(plan, &mut out);
    }
    Ok(out)
}

fn key(p: &[f64], step: f64) -> Vec<i64> {
    p.iter().map(|v| (v / step).round() as i64).collect()
}

fn local_grid(centre: &[f64], radius: f64, step: f64) -> Vec<Vec<f64>> {
    let offs = grid(-radius, radius, step);
    let mut out = vec![Vec::new()];
    for &c in centre {
        out = out
            .into_iter()
            .flat_map(|p| {
                offs.iter().map(move |o| {
                    let mut q = p.clone();
                    q.push(c + o);
                    q
                })
            })
            .collect();
    }
    out.retain(|p| p.iter().all(|&v| v > 0.0) && p.chunks(2).all(|w| w.iter().sum::<f64>() < 180.0));
    out
}

fn confirm(plan: &Plan, out: &mut ScanOutcome) {
    let level = plan.refinement + 1;
    let table = bin_max(&out.records, plan.dx);
    let near: Vec<usize> = out
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.level < level && r.tag.is_empty())
        .filter(|(_, r)| table.bin_of(r.x).and_then(|b| table.best(b)).is_some_and(|best| best.y - r.y <= CONFIRM_WITHIN))
        .map(|(i, _)| i)
        .collect();
    let redo: Vec<(usize, Result<ScanRecord>)> = near
        .par_iter()
        .map(|&i| {
            let r = &out.records[i];
            let item = WorkItem { id: r.id, seed: r.seed, params: r.params.clone() };
            (i, solve_item(plan, &item, level))
        })
        .collect();
    for (i, r) in redo {
        if let Ok(mut new) = r {
            if out.records[i].tag == "optimized" && new.tag.is_empty() {
                new.tag = "optimized".into();
            }
            out.records[i] = new;
        }
    }
}

/// Per-bin best records over `[1, K₂]` in bins of width `dx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinTable {
    pub dx: f64,
    /// `(bin index, best record)`, ascending by index; empty bins are omitted.
    pub bins: Vec<(usize, ScanRecord)>,
}

impl BinTable {
    pub fn n_bins(&self) -> usize {
        ((k2() - 1.0) / self.dx).ceil() as usize
    }

    /// Bin of `x`; `x` slightly below 1 joins the first bin and `x` up to
    /// `K₂ + X_SLACK` joins the last.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if !(x >= 1.0 - 1e-6 && x <= k2() + X_SLACK) {
            return None;
        }
        let i = ((x - 1.0) / self.dx).floor().max(0.0) as usize;
        Some(i.min(self.n_bins().saturating_sub(1)))
    }

    pub fn best(&self, bin: usize) -> Option<&ScanRecord> {
        self.bins.binary_search_by_key(&bin, |b| b.0).ok().map(|i| &self.bins[i].1)
    }

    pub fn range(&self, bin: usize) -> (f64, f64) {
        (1.0 + bin as f64 * self.dx, 1.0 + (bin + 1) as f64 * self.dx)
    }
}

/// Record with maximal `y` in each bin; ties keep the lower id. Records
/// flagged as probable FEM errors are left out.
pub fn bin_max(records: &[ScanRecord], dx: f64) -> BinTable {
    let mut t = BinTable { dx, bins: Vec::new() };
    let mut best: BTreeMap<usize, &ScanRecord> = BTreeMap::new();
    for r in records.iter().filter(|r| r.tag != "probable_fem_error") {
        let Some(b) = t.bin_of(r.x) else { continue };
        let e = best.entry(b).or_insert(r);
        if r.y > e.y || (r.y == e.y && r.id < e.id) {
            *e = r;
        }
    }
    t.bins = best.into_iter().map(|(b, r)| (b, r.clone())).collect();
    t
}

/// Per-class campaign summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub class: ScanClass,
    pub count: usize,
    pub y_star: f64,
    pub delta4: f64,
    pub argmax_id: usize,
    pub argmax_params: Vec<f64>,
}

pub fn summarize(records: &[ScanRecord]) -> Result<Summary> {
    let ok: Vec<&ScanRecord> = records.iter().filter(|r| r.tag != "probable_fem_error").collect();
    let best = ok
        .iter()
        .copied()
        .reduce(|a, b| if b.y > a.y || (b.y == a.y && b.id < a.id) { b } else { a })
        .ok_or_else(|| Error::InvalidArgument("no records to summarize".into()))?;
    Ok(Summary {
        class: best.class,
        count: records.len(),
        y_star: best.y,
        delta4: best.delta4,
        argmax_id: best.id,
        argmax_params: best.params.clone(),
    })
}

/// Ratio point of the disjoint union of two solved domains.
pub fn merge_disjoint(a: &ScanRecord, b: &ScanRecord) -> Result<(f64, f64)> {
    let p = disjoint_union_ratios(&a.lambdas, &b.lambdas)?;
    Ok((p.x, p.y))
}

/// Nelder–Mead maximization of `y` over the class parameters from `init`,
/// followed by a solve one level finer at the best point.
pub fn optimize_ratio(plan: &Plan, init: &[f64]) -> Result<ScanRecord> {
    let (free, lo, hi) = plan
        .class
        .free_box()
        .ok_or_else(|| Error::InvalidArgument(format!("{} cannot be optimized", plan.class.as_str())))?;
    let start_item = WorkItem { id: 0, seed: plan.seed, params: init.to_vec() };
    let start = solve_item(plan, &start_item, plan.refinement)
        .map_err(|e| Error::InvalidArgument(format!("initial point fails: {e}")))?;
    let full = |v: &[f64]| -> Vec<f64> {
        let mut p = init.to_vec();
        for (k, &i) in free.iter().enumerate() {
            p[i] = v[k];
        }
        p
    };
    let objective = |v: &[f64]| -> f64 {
        let item = WorkItem { id: 0, seed: plan.seed, params: full(v) };
        match solve_item(plan, &item, plan.refinement) {
            Ok(r) if r.tag.is_empty() => -r.y,
            _ => f64::INFINITY,
        }
    };
    let x0: Vec<f64> = free.iter().map(|&i| init[i]).collect();
    let step: Vec<f64> = x0.iter().zip(&lo).zip(&hi).map(|((x, l), h)| (0.05 * x.abs()).max(0.02 * (h - l)).min(0.25 * (h - l))).collect();
    let ftol = 1e-5 / start.y.abs().max(1.0);
    let (best, _, _) = nelder_mead(objective, &x0, &step, &lo, &hi, ftol, 1e-4, 400);
    let item = WorkItem { id: 0, seed: plan.seed, params: full(&best) };
    let mut r = solve_item(plan, &item, plan.refinement + 1)?;
    r.tag = "optimized".into();
    Ok(r)
}

/// Metadata lines written at the top of every output file.
pub fn header_lines(subcommand: &str, config: &serde_json::Value, seed: Option<u64>) -> Vec<String> {
    let mut v = vec![
        format!("# tool: spectra {}", env!("CARGO_PKG_VERSION")),
        format!("# subcommand: {subcommand}"),
        format!("# config: {}", serde_json::to_string(config).unwrap_or_default()),
    ];
    if let Some(s) = seed {
        v.push(format!("# seed: {s}"));
    }
    v
}

fn write_header(w: &mut impl Write, header: &[String]) -> Result<()> {
    for h in header {
        writeln!(w, "{h}")?;
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Results CSV: `id,class,seed,<params>,lam1..lam4,x,y,delta4,level,residual,components,tag`.
pub fn write_results(w: &mut impl Write, header: &[String], class: ScanClass, out: &ScanOutcome) -> Result<()> {
    write_header(w, header)?;
    let mut c = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let mut cols: Vec<String> = ["id", "class", "seed"].iter().map(|s| s.to_string()).collect();
    cols.extend(class.param_names().iter().map(|s| s.to_string()));
    cols.extend(
        ["lam1", "lam2", "lam3", "lam4", "x", "y", "delta4", "level", "residual", "components", "tag"]
            .iter()
            .map(|s| s.to_string()),
    );
    c.write_record(&cols).map_err(csv_error)?;
    for r in &out.records {
        let mut row = vec![r.id.to_string(), r.class.as_str().to_string(), r.seed.to_string()];
        row.extend(r.params.iter().map(|v| v.to_string()));
        row.extend(r.lambdas.iter().map(|v| v.to_string()));
        row.extend([r.x, r.y, r.delta4].iter().map(|v| v.to_string()));
        row.push(r.level.to_string());
        row.push(format!("{:e}", r.residual));
        row.push(r.components.to_string());
        row.push(r.tag.clone());
        c.write_record(&row).map_err(csv_error)?;
    }
    c.flush()?;
    Ok(())
}

/// Skip events: `id,seed,<params>,reason`.
pub fn write_skipped(w: &mut impl Write, header: &[String], class: ScanClass, out: &ScanOutcome) -> Result<()> {
    write_header(w, header)?;
    let mut c = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let mut cols = vec!["id".to_string(), "seed".to_string()];
    cols.extend(class.param_names().iter().map(|s| s.to_string()));
    cols.push("reason".into());
    c.write_record(&cols).map_err(csv_error)?;
    for s in &out.skipped {
        let mut row = vec![s.id.to_string(), s.seed.to_string()];
        row.extend(s.params.iter().map(|v| v.to_string()));
        row.push(s.reason.clone());
        c.write_record(&row).map_err(csv_error)?;
    }
    c.flush()?;
    Ok(())
}

/// Bin table CSV: `bin,x_lo,x_hi,id,x,y,delta4`.
pub fn write_bins(w: &mut impl Write, header: &[String], table: &BinTable) -> Result<()> {
    write_header(w, header)?;
    let mut c = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    c.write_record(["bin", "x_lo", "x_hi", "id", "x", "y", "delta4"]).map_err(csv_error)?;
    for (b, r) in &table.bins {
        let (lo, hi) = table.range(*b);
        c.write_record([
            b.to_string(),
            format!("{lo:.6}"),
            format!("{hi:.6}"),
            r.id.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.delta4.to_string(),
        ])
        .map_err(csv_error)?;
    }
    c.flush()?;
    Ok(())
}

/// Summary CSV with columns `class,experiments,y_star,delta4`.
pub fn write_summary(w: &mut impl Write, header: &[String], s: &Summary) -> Result<()> {
    write_header(w, header)?;
    let mut c = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    c.write_record(["class", "experiments", "y_star", "delta4", "argmax_id"]).map_err(csv_error)?;
    c.write_record([
        s.class.as_str().to_string(),
        s.count.to_string(),
        format!("{:.6}", s.y_star),
        format!("{:.3e}", s.delta4),
        s.argmax_id.to_string(),
    ])
    .map_err(csv_error)?;
    c.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: usize, x: f64, y: f64) -> ScanRecord {
        ScanRecord {
            id,
            class: ScanClass::Rectangle,
            seed: 0,
            params: vec![1.0],
            lambdas: [1.0, x, y, y + 0.1],
            x,
            y,
            delta4: 0.1 / y,
            level: 2,
            residual: 0.0,
            components: 1,
            tag: String::new(),
        }
    }

    #[test]
    fn triangle_grid_count() {
        let mut p = Plan::new(ScanClass::Triangle, Sampler::Grid);
        assert_eq!(work_list(&p).unwrap().len(), 2080);
        p.dedupe = true;
        let w = work_list(&p).unwrap();
        assert!(w.iter().all(|i| i.params[0] <= i.params[1] && i.params[1] <= 180.0 - i.params[0] - i.params[1]));
        assert!(w.len() < 2080 / 4);
    }

    #[test]
    fn quadrilateral_dedupe_is_a_quotient() {
        let mut p = Plan::new(ScanClass::Quadrilateral, Sampler::Grid);
        p.step = Some(30.0);
        let all = work_list(&p).unwrap();
        p.dedupe = true;
        let canon = work_list(&p).unwrap();
        let u = |v: &[f64]| -> [i64; 4] { [0, 1, 2, 3].map(|i| (v[i] / 30.0).round() as i64) };
        let mut classes: Vec<[i64; 4]> = all.iter().map(|w| canonical_quad(u(&w.params))).collect();
        classes.sort();
        classes.dedup();
        assert_eq!(classes.len(), canon.len());
    }

    #[test]
    fn empty_and_invalid_plans() {
        let mut p = Plan::new(ScanClass::Dumbbell, Sampler::Random);
        p.count = Some(0);
        assert!(run_scan(&p).unwrap().records.is_empty());
        p.count = None;
        assert!(run_scan(&p).is_err());
        let mut q = Plan::new(ScanClass::Polygon, Sampler::Grid);
        assert!(work_list(&q).is_err());
        q.sampler = Sampler::Random;
        q.count = Some(1);
        q.optimize_best = 1;
        assert!(q.validate().is_err());
        let mut r = Plan::new(ScanClass::Rectangle, Sampler::Grid);
        r.dx = 0.0;
        assert!(r.validate().is_err());
    }

    #[test]
    fn random_work_lists_are_seeded() {
        let mut p = Plan::new(ScanClass::Jigsaw, Sampler::Random);
        p.count = Some(20);
        p.seed = 5;
        assert_eq!(work_list(&p).unwrap(), work_list(&p).unwrap());
        let first = work_list(&p).unwrap();
        p.seed = 6;
        assert_ne!(first, work_list(&p).unwrap());
    }

    #[test]
    fn bins_keep_the_highest() {
        let t = bin_max(&[rec(0, 1.51, 3.0)], 0.05);
        assert_eq!(t.bins.len(), 1);
        let t = bin_max(&[rec(0, 1.51, 3.0), rec(1, 1.52, 2.9)], 0.05);
        assert_eq!(t.bins[0].1.id, 0);
        let t = bin_max(&[rec(0, 1.51, 2.9), rec(1, 1.52, 3.0)], 0.05);
        assert_eq!(t.bins[0].1.id, 1);
        for (b, r) in &t.bins {
            let (lo, hi) = t.range(*b);
            assert!(r.x >= lo && r.x < hi);
        }
        let mut bad = rec(2, 2.7, 3.5);
        bad.tag = "probable_fem_error".into();
        assert!(bin_max(&[bad], 0.05).bins.is_empty());
    }

    #[test]
    fn summary_rows() {
        assert!(summarize(&[]).is_err());
        let s = summarize(&[rec(3, 1.2, 2.2)]).unwrap();
        assert_eq!((s.count, s.y_star, s.argmax_id), (1, 2.2, 3));
        let s = summarize(&[rec(0, 1.2, 2.2), rec(1, 1.6, 2.6)]).unwrap();
        assert_eq!(s.argmax_id, 1);
        assert!((s.delta4 - 0.1 / 2.6).abs() < 1e-15);
    }
}
