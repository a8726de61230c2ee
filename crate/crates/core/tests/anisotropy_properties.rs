use anisoeig::anisotropy::{anisotropic_perimeter, isoperimetric_deficit};
use anisoeig::{NormSpec, Polygon};
use proptest::prelude::*;

fn spd() -> impl Strategy<Value = NormSpec> {
    (0.3f64..5.0, 0.3f64..5.0, -0.9f64..0.9).prop_map(|(a, c, t)| {
        let b = t * (a * c).sqrt();
        NormSpec::ellipse(2, &[a, b, b, c]).unwrap()
    })
}

fn any_norm() -> impl Strategy<Value = NormSpec> {
    prop_oneof![
        Just(NormSpec::euclidean(2).unwrap()),
        spd(),
        (1.2f64..6.0).prop_map(|s| NormSpec::power(2, s).unwrap()),
    ]
}

fn closed_form_norm() -> impl Strategy<Value = NormSpec> {
    prop_oneof![Just(NormSpec::euclidean(2).unwrap()), spd()]
}

fn nonzero() -> impl Strategy<Value = [f64; 2]> {
    (0.0f64..std::f64::consts::TAU, -3.0f64..3.0).prop_map(|(t, lr)| [lr.exp() * t.cos(), lr.exp() * t.sin()])
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn homogeneity(spec in any_norm(), xi in nonzero(), t in -50.0f64..50.0) {
        let h = spec.eval(&xi).unwrap();
        let ht = spec.eval(&[t * xi[0], t * xi[1]]).unwrap();
        prop_assert!((ht - t.abs() * h).abs() <= 1e-12 * h * t.abs().max(1.0));
    }

    #[test]
    fn euler_identity(spec in any_norm(), xi in nonzero()) {
        let g = spec.grad(&xi).unwrap();
        let h = spec.eval(&xi).unwrap();
        prop_assert!(rel(g[0] * xi[0] + g[1] * xi[1], h) <= 1e-10);
    }

    #[test]
    fn duality(spec in any_norm(), xi in nonzero()) {
        let g = spec.grad(&xi).unwrap();
        prop_assert!((spec.polar(&g).unwrap() - 1.0).abs() <= 1e-8);
        let gp = spec.polar_grad(&xi).unwrap();
        prop_assert!((spec.eval(&gp).unwrap() - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn inversion(spec in closed_form_norm(), xi in nonzero()) {
        let hp = spec.polar(&xi).unwrap();
        let g = spec.grad(&spec.polar_grad(&xi).unwrap()).unwrap();
        for k in 0..2 {
            prop_assert!((hp * g[k] - xi[k]).abs() <= 1e-6 * xi[k].abs().max(1.0));
        }
    }

    #[test]
    fn gradient_matches_central_differences(spec in any_norm(), t in 0.15f64..1.42, quadrant in 0usize..4, r in 0.5f64..2.0) {
        // directions at least 0.15 rad off the coordinate axes
        let a = t + quadrant as f64 * std::f64::consts::FRAC_PI_2;
        let xi = [r * a.cos(), r * a.sin()];
        let g = spec.grad(&xi).unwrap();
        let step = 1e-6;
        for k in 0..2 {
            let mut hi = xi;
            let mut lo = xi;
            hi[k] += step;
            lo[k] -= step;
            let fd = (spec.eval(&hi).unwrap() - spec.eval(&lo).unwrap()) / (2.0 * step);
            prop_assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1e-3), "{} vs {}", fd, g[k]);
        }
    }

    #[test]
    fn bounds_enclose_the_norm(spec in any_norm(), xi in nonzero()) {
        let (lo, hi) = spec.bounds();
        let ratio = spec.eval(&xi).unwrap() / (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        prop_assert!(lo * (1.0 - 1e-12) <= ratio && ratio <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn wulff_polygon_boundary_is_unit_polar_sphere(spec in any_norm(), radius in 0.2f64..3.0) {
        let poly = Polygon::wulff(&spec, radius, 256).unwrap();
        for v in poly.vertices() {
            prop_assert!(rel(spec.polar(v).unwrap(), radius) <= 1e-9);
        }
    }

    #[test]
    fn wulff_shape_has_least_deficit(spec in any_norm(), stretch in 1.2f64..3.0) {
        // the Wulff polygon is nearly optimal; a stretched copy is not
        let poly = Polygon::wulff(&spec, 1.0, 512).unwrap();
        let d = isoperimetric_deficit(&spec, &poly).unwrap();
        let stretched = Polygon::new(poly.vertices().iter().map(|v| [stretch * v[0], v[1]]).collect()).unwrap();
        let ds = isoperimetric_deficit(&spec, &stretched).unwrap();
        let p = anisotropic_perimeter(&spec, &poly).unwrap();
        prop_assert!(d.abs() <= 1e-3 * p);
        prop_assert!(ds > d);
    }
}

#[test]
fn wulff_perimeter_is_n_times_measure() {
    // P_H(W_1) = n·k_n
    for spec in [
        NormSpec::euclidean(2).unwrap(),
        NormSpec::ellipse(2, &[4.0, 0.0, 0.0, 1.0]).unwrap(),
        NormSpec::power(2, 3.0).unwrap(),
    ] {
        let poly = Polygon::wulff(&spec, 1.0, 4096).unwrap();
        let p = anisotropic_perimeter(&spec, &poly).unwrap();
        assert!(rel(p, 2.0 * spec.wulff_measure()) < 1e-5, "{p}");
    }
}
