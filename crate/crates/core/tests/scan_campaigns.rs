use spectra_core::analytic::{disjoint_union_ratios, k2, rectangle_curve};
use spectra_core::bounds::envelope;
use spectra_core::scan::{
    bin_max, header_lines, optimize_ratio, run_scan, summarize, write_bins, write_results, Plan, Sampler, ScanClass,
};

fn rectangle_plan(step: f64, level: u32) -> Plan {
    let mut p = Plan::new(ScanClass::Rectangle, Sampler::Grid);
    p.step = Some(step);
    p.refinement = level;
    p.confirm = false;
    p
}

#[test]
fn rectangle_sweep_bins_follow_the_curve() {
    let out = run_scan(&rectangle_plan(0.01, 2)).unwrap();
    assert_eq!(out.records.len(), 401);
    assert!(out.skipped.is_empty());
    let table = bin_max(&out.records, 0.05);
    assert!(!table.bins.is_empty());
    for (b, r) in &table.bins {
        let (lo, hi) = table.range(*b);
        assert!(r.x >= lo - 1e-6 && r.x < hi, "record x {} outside bin [{lo}, {hi})", r.x);
        let exact = rectangle_curve(r.x.min(2.5)).unwrap();
        assert!((r.y - exact).abs() < 0.02, "bin {b}: y {} vs {exact}", r.y);
    }
}

#[test]
fn rectangle_records_at_level_three() {
    let out = run_scan(&rectangle_plan(0.1, 3)).unwrap();
    for r in &out.records {
        let exact = rectangle_curve(r.x.min(2.5)).unwrap();
        assert!((r.y - exact).abs() <= 0.02, "a = {}: y {} vs {exact}", r.params[0], r.y);
        assert!(r.x >= 1.0 - 1e-9 && r.y >= r.x - 1e-9 && r.delta4 >= -1e-9);
    }
}

#[test]
fn optimal_dumbbell_sample() {
    let mut p = Plan::new(ScanClass::Dumbbell, Sampler::List);
    p.samples = vec![vec![1.0, 1.4510, 0.7814, 0.7818]];
    let out = run_scan(&p).unwrap();
    let r = &out.records[0];
    assert_eq!(r.level, 3, "a bin maximum is confirmed one level finer");
    assert!((r.y - 3.202).abs() < 0.01, "y = {}", r.y);
}

#[test]
fn optimizer_finds_the_optimal_rectangle() {
    let p = rectangle_plan(0.01, 2);
    let r = optimize_ratio(&p, &[1.5]).unwrap();
    assert!((r.params[0] - (8.0f64 / 3.0).sqrt()).abs() < 0.01, "a = {}", r.params[0]);
    assert!((r.y - 35.0 / 11.0).abs() < 0.01, "y = {}", r.y);
    assert_eq!(r.level, 3);
    assert!(optimize_ratio(&p, &[0.5]).is_err());
}

#[test]
fn optimizer_on_ellipses() {
    let mut p = Plan::new(ScanClass::Ellipse, Sampler::Grid);
    p.arc_segments = Some(128);
    let r = optimize_ratio(&p, &[1.0]).unwrap();
    assert!((r.y - 3.167).abs() < 0.02, "y = {} at b = {}", r.y, r.params[0]);
}

#[test]
fn campaign_is_deterministic_across_thread_counts() {
    let mut p = Plan::new(ScanClass::Dumbbell, Sampler::Random);
    p.count = Some(10);
    p.seed = 42;
    p.arc_segments = Some(64);
    let csv = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let out = pool.install(|| run_scan(&p)).unwrap();
        let header = header_lines("scan", &serde_json::to_value(&p).unwrap(), Some(p.seed));
        let mut buf = Vec::new();
        write_results(&mut buf, &header, p.class, &out).unwrap();
        write_bins(&mut buf, &header, &bin_max(&out.records, p.dx)).unwrap();
        buf
    };
    let one = csv(1);
    assert_eq!(one, csv(1));
    assert_eq!(one, csv(3));
}

#[test]
fn triangle_bins_stay_below_the_envelope() {
    let mut p = Plan::new(ScanClass::Triangle, Sampler::Grid);
    p.step = Some(10.0);
    p.min_angle_deg = Some(10.0);
    let out = run_scan(&p).unwrap();
    let table = bin_max(&out.records, p.dx);
    for (_, r) in &table.bins {
        assert!(r.x <= k2() + 0.02);
        let (env, _) = envelope(r.x.min(k2())).unwrap();
        assert!(r.y <= env + 0.05, "({}, {}) above the envelope {env}", r.x, r.y);
    }
    let s = summarize(&out.records).unwrap();
    assert_eq!(s.count, out.records.len());
}

#[test]
fn disjoint_union_never_beats_its_parts() {
    let mut p = Plan::new(ScanClass::Rectangle, Sampler::List);
    p.samples = vec![vec![1.0], vec![1.6], vec![3.0]];
    p.refinement = 1;
    p.confirm = false;
    let out = run_scan(&p).unwrap();
    for a in &out.records {
        for b in &out.records {
            let u = disjoint_union_ratios(&a.lambdas, &b.lambdas).unwrap();
            assert!(u.y <= a.y.max(b.y).max(k2()) + 1e-12);
        }
    }
}
