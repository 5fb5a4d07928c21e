use approx::assert_relative_eq;
use conestab::cone::SolidCone;
use conestab::density::HomogeneousDensity;
use conestab::surface::DiscreteHypersurface;
use conestab::{measures, Cone, Density, Geometry, Surface};
use proptest::prelude::*;

fn families(k: f64) -> Vec<(Density, Cone)> {
    vec![
        (Density::radial(k), Cone::full(3).unwrap()),
        (
            Density::linear_power([0.2, 0.1, 1.0], k).unwrap(),
            SolidCone::circular(3, [0.0, 0.0, 1.0], 0.8).unwrap(),
        ),
        (
            Density::perturbed_radial(k, [0.3, -0.2, 0.1], [[0.1, 0.0, 0.2], [0.0, -0.3, 0.0], [0.2, 0.0, 0.05]], 0.7).unwrap(),
            Cone::half_space(3).unwrap(),
        ),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn homogeneity_ladder(k in -4.0f64..3.0, t in 0.1f64..10.0, th in 0.05f64..0.7, ph in 0.0f64..std::f64::consts::TAU, r in 0.2f64..3.0) {
        let p = [r * th.sin() * ph.cos(), r * th.sin() * ph.sin(), r * th.cos()];
        for (d, cone) in families(k) {
            let f = d.evaluate(&cone, &p).unwrap();
            let mut q = p;
            // f(t^j p) = t^{jk} f(p) along a ladder of dilations
            for j in 1..=3 {
                q = [q[0] * t, q[1] * t, q[2] * t];
                let g = d.evaluate(&cone, &q).unwrap();
                assert_relative_eq!(g, t.powf(j as f64 * k) * f, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn ellipse_area_and_mean_curvature_scale(k in -3.0f64..3.0, a in 0.3f64..1.0, b in 0.3f64..1.0, t in 0.3f64..3.0) {
        let plane = Cone::full(2).unwrap();
        let d = Density::radial(k);
        let s = Surface::ellipsoid(&plane, [2.0, 0.5, 0.0], [a, b, 0.0], 128).unwrap();
        let big = s.dilate(t, &plane).unwrap();
        let a0 = measures::weighted_area(&s, &d, &plane).unwrap();
        let a1 = measures::weighted_area(&big, &d, &plane).unwrap();
        assert_relative_eq!(a1, t.powf(1.0 + k) * a0, max_relative = 1e-10);
        let g0 = Geometry::compute(&s, &d, &plane).unwrap();
        let g1 = Geometry::compute(&big, &d, &plane).unwrap();
        for (x, y) in g0.samples.iter().zip(&g1.samples) {
            assert_relative_eq!(y.h_f * t, x.h_f, max_relative = 1e-8, epsilon = 1e-10);
        }
        // closed curves: the pointwise Minkowski integral vanishes
        let m = measures::minkowski(&s, &d, &plane, 1e-6).unwrap();
        prop_assert!(m.pointwise_residual.abs() <= 1e-8 * m.area, "{} vs {}", m.pointwise_residual, m.area);
    }
}

#[test]
fn single_precision_cap() {
    let cone = SolidCone::<f32>::circular(3, [0.0, 0.0, 1.0], 1.0).unwrap();
    let d = HomogeneousDensity::<f32>::radial(1.5);
    let s = DiscreteHypersurface::<f32>::cap(&cone, 2.0, 16).unwrap();
    let geo = conestab::surface::GeometryCache::compute(&s, &d, &cone).unwrap();
    for x in &geo.samples {
        assert!((x.h_f - 1.75).abs() < 1e-3, "{}", x.h_f);
    }
    let m = measures::minkowski(&s, &d, &cone, 1e-3).unwrap();
    assert!(m.relative_residual.abs() < 1e-4);
}
