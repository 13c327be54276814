use spectra_core::perturb::{
    fem_eigenvalue_slopes, optimal_side, quadrilateral_tangency_check, random_linear_fields, rectangle_cosine_check,
    rectangle_first_order, CosineProfile, FemMethod, RectField,
};
use spectra_core::rng::Stream;

fn random_profile(s: &mut Stream) -> CosineProfile {
    CosineProfile { coeffs: (0..5).map(|_| s.range(-1.0, 1.0)).collect() }
}

#[test]
fn fem_slopes_match_first_order_predictions() {
    let a = optimal_side();
    let eps = 1e-3;
    let mut s = Stream::new(2024);
    let mut worst_simple = 0.0f64;
    let mut worst_pair = 0.0f64;
    for _ in 0..20 {
        let g = random_profile(&mut s);
        let fo = rectangle_first_order(a, 4, &RectField::Cosine(g.clone())).unwrap();
        let fem = fem_eigenvalue_slopes(a, &g, eps, 3).unwrap();
        let scale = fo.corrections.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        for j in 0..2 {
            let err = (fem.central[j] - fo.corrections[j]).abs() / fo.corrections[j].abs().max(0.1 * scale);
            worst_simple = worst_simple.max(err);
        }
        let (_, m1, m2) = fo.doubles[0];
        let (r1, r2) = fem.pair_roots(2, eps);
        let err = (r1 - m1).abs().max((r2 - m2).abs()) / m1.abs().max(m2.abs());
        worst_pair = worst_pair.max(err);
    }
    assert!(worst_simple <= 0.02, "simple eigenvalue slopes off by {worst_simple}");
    assert!(worst_pair <= 0.05, "split pair roots off by {worst_pair}");
}

#[test]
fn cosine_witness_beats_the_optimal_rectangle() {
    let r = rectangle_cosine_check(0.0, 0.0, 1.0, Some((FemMethod::Morph, 1e-3, 4))).unwrap();
    assert!(r.conditions_hold);
    assert!((r.slope - r.slope_formula).abs() <= 1e-5);
    let fem = r.fem.unwrap();
    assert!(fem.within_2pct, "relative error {}", fem.relative_error);
    assert!(fem.y_plus > 35.0 / 11.0 && fem.exceeds_unperturbed);
}

#[test]
fn tangency_on_both_quadrilateral_branches() {
    for a in [1.2, 2.0] {
        for [p, q, r] in random_linear_fields(7, 10) {
            let t = quadrilateral_tangency_check(a, p, q, r).unwrap();
            assert!(t.deviation <= 1e-6, "a = {a}: deviation {}", t.deviation);
        }
    }
}
