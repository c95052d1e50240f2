use std::f64::consts::{FRAC_PI_2, PI};

use phimin_core::experiments::{
    decay_bound_check, moving_plane_check, perturbed_cylinder_build, quotient_formula_check, Strip,
    UbarFamily,
};
use phimin_core::geometry::{first_variation, weighted_area};
use phimin_core::profile::{half_width, integrate_profile};
use phimin_core::weight::{classify_integrability, Integrability};
use phimin_core::{GraphPatch, Grid, ProfileOptions, WeightSpec};
use proptest::prelude::*;

fn strip_for(lambda: f64) -> Strip {
    Strip {
        x_lo: 0.5 * lambda,
        x_hi: 0.95 * lambda,
        y_lo: 0.0,
        y_hi: 2.0 * PI,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // phi = k x3 is the grim reaper rescaled by 1/k, at any height
    #[test]
    fn linear_weights_have_width_pi_over_2k(k in 0.2f64..5.0, h in -3.0f64..3.0) {
        let w = half_width(&WeightSpec::linear(k).unwrap(), h, 1e-10).unwrap();
        prop_assert!(w.certified);
        prop_assert!((w.value - FRAC_PI_2 / k).abs() <= 1e-8 * (1.0 + 1.0 / k));
    }

    #[test]
    fn alpha_log_integrability_threshold(alpha in 0.2f64..4.0, h in 0.5f64..5.0) {
        prop_assume!((alpha - 1.0).abs() > 0.05);
        let c = classify_integrability(&WeightSpec::alpha_log(alpha).unwrap(), h).unwrap();
        let expected = if alpha > 1.0 { Integrability::Finite } else { Integrability::Infinite };
        prop_assert_eq!(c, expected);
    }

    #[test]
    fn profiles_are_even_and_increasing(k in 0.5f64..3.0, h in -2.0f64..2.0) {
        let p = integrate_profile(&WeightSpec::linear(k).unwrap(), h, &ProfileOptions::default()).unwrap();
        let full = p.mirrored();
        let n = full.len();
        for i in 0..n {
            let (a, b) = (full[i], full[n - 1 - i]);
            prop_assert_eq!(a.x, -b.x);
            prop_assert_eq!(a.u, b.u);
        }
        prop_assert!(p.samples.windows(2).all(|w| w[1].x > w[0].x && w[1].u >= w[0].u));
    }

    #[test]
    fn quotient_routes_agree_for_any_wave(
        eps in -0.02f64..0.02,
        k in 0.5f64..4.0,
        phase in 0.0f64..6.3,
        which in 0usize..3,
    ) {
        let (spec, h) = [
            (WeightSpec::identity(), 0.0),
            (WeightSpec::alpha_log(2.0).unwrap(), 1.0),
            (WeightSpec::quadratic(), 1.0),
        ][which].clone();
        let p = integrate_profile(&spec, h, &ProfileOptions::default()).unwrap();
        let pc = perturbed_cylinder_build(
            &p,
            UbarFamily::Wave { eps, k, phase },
            strip_for(p.lambda_estimate),
            13,
            13,
        )
        .unwrap();
        let r = quotient_formula_check(&pc, &spec).unwrap();
        prop_assert!(r.denominator_ok);
        prop_assert!(r.max_discrepancy <= 1e-10, "{}", r.max_discrepancy);
    }

    #[test]
    fn even_patches_have_no_reflection_defect(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0) {
        let g = Grid::new([-1.0, 1.0], [-1.0, 1.0], 21, 7).unwrap();
        let p = GraphPatch::from_fn(g, |x, y| a * x * x + b * x.powi(4) * y + c * (x * x * y).cos()).unwrap();
        prop_assert!(moving_plane_check(&p, 0.0).unwrap().max_abs_gap <= 1e-12);
    }

    #[test]
    fn patch_json_round_trips(n in 3usize..8, m in 3usize..8, seed in proptest::collection::vec(-5.0f64..5.0, 64)) {
        let g = Grid::new([-1.0, 2.0], [0.5, 1.5], n, m).unwrap();
        let p = GraphPatch::new(g, seed[..n * m].to_vec()).unwrap();
        let back = GraphPatch::from_json(&serde_json::to_string(&p).unwrap()).unwrap();
        prop_assert_eq!(back, p);
    }

    // A(u + c) = e^c A(u) for phi = identity, so dA/dc = A
    #[test]
    fn vertical_shift_scales_the_identity_area(a in -0.5f64..0.5, b in -0.5f64..0.5) {
        let g = Grid::new([-1.0, 1.0], [-1.0, 1.0], 17, 17).unwrap();
        let p = GraphPatch::from_fn(g, |x, y| a * x + b * y).unwrap();
        let spec = WeightSpec::identity();
        let area = weighted_area(&p, &spec).unwrap();
        let shifted = GraphPatch::from_fn(g, |x, y| a * x + b * y + 0.3).unwrap();
        prop_assert!((weighted_area(&shifted, &spec).unwrap() - 0.3f64.exp() * area).abs() <= 1e-12 * area);
    }
}

#[test]
fn decay_bound_holds_for_every_decaying_family() {
    let families = [
        UbarFamily::Zero,
        UbarFamily::SinQuadratic { eps: 0.01 },
        UbarFamily::CosCubic { eps: 0.01 },
        UbarFamily::Wave {
            eps: 0.01,
            k: 3.0,
            phase: 1.0,
        },
    ];
    for (spec, h) in [
        (WeightSpec::identity(), 0.0),
        (WeightSpec::quadratic(), 1.0),
        (WeightSpec::linear(2.0).unwrap(), 0.0),
    ] {
        let p = integrate_profile(&spec, h, &ProfileOptions::default()).unwrap();
        for f in families {
            let pc = perturbed_cylinder_build(&p, f, strip_for(p.lambda_estimate), 21, 21).unwrap();
            let r = decay_bound_check(&pc).unwrap();
            assert!(r.passed && r.violations == 0, "{f:?} on {spec:?}: {r:?}");
        }
    }
}

#[test]
fn plane_is_critical_only_for_the_trivial_weight_direction() {
    // u = 0 with phi = identity: the first variation along a compactly
    // supported speed v is int e^0 (-v) (H-term vanishes, weight term -phi' v)
    let g = Grid::new([-1.0, 1.0], [-1.0, 1.0], 65, 65).unwrap();
    let flat = GraphPatch::from_fn(g, |_, _| 0.0).unwrap();
    let v = g.sample(|x, y| {
        let q = x * x + y * y;
        if q < 0.25 {
            (1.0 - 4.0 * q).powi(3)
        } else {
            0.0
        }
    });
    // normal speed v moves the plane down by v (downward normal), so
    // dA = -int v = -(pi / 4) / 4 for the cubic bump of radius 1/2
    let expected = -PI / 16.0;
    let fv = first_variation(&flat, &WeightSpec::identity(), &v).unwrap();
    assert!((fv - expected).abs() < 1e-4, "{fv} vs {expected}");
}
