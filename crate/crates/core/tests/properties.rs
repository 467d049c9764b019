use nalgebra::DMatrix;
use proptest::prelude::*;

use falseconf::config::{ExperimentConfig, SeedValue};
use falseconf::output::num;
use falseconf::presets::Preset;
use falseconf::special::{chi2_cdf, noncentral_chi2_cdf, normal_cdf, normal_quantile};
use falseconf::{GaussianExperiment, Hypothesis, PossibilityContour, SeedSpec, SeriesTolerance};

fn spd2() -> impl Strategy<Value = DMatrix<f64>> {
    (0.2f64..3.0, 0.2f64..3.0, -0.9f64..0.9).prop_map(|(a, b, rho)| {
        let off = rho * (a * b).sqrt();
        DMatrix::from_row_slice(2, 2, &[a, off, off, b])
    })
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 200,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn normal_cdf_symmetry_and_quantile(z in -8.0f64..8.0) {
        let p = normal_cdf(z).unwrap().value();
        let q = normal_cdf(-z).unwrap().value();
        prop_assert!((p + q - 1.0).abs() < 1e-14);
        // Invert on the lower tail, where p keeps full relative precision.
        let low = -z.abs();
        let back = normal_quantile(normal_cdf(low).unwrap().value()).unwrap();
        prop_assert!((back - low).abs() < 1e-8 * low.abs().max(1.0));
    }

    #[test]
    fn chi2_cdf_is_monotone(x in 0.0f64..60.0, dx in 0.0f64..5.0, df in 1u32..12) {
        let a = chi2_cdf(x, df).unwrap();
        let b = chi2_cdf(x + dx, df).unwrap();
        prop_assert!(a <= b);
    }

    #[test]
    fn noncentral_cdf_decreases_in_ncp(x in 0.1f64..30.0, ncp in 0.0f64..20.0, dn in 0.01f64..5.0, df in 1u32..6) {
        let tol = SeriesTolerance::default();
        let a = noncentral_chi2_cdf(x, df, ncp, tol).unwrap().value();
        let b = noncentral_chi2_cdf(x, df, ncp + dn, tol).unwrap().value();
        prop_assert!(b <= a + 1e-12);
    }

    #[test]
    fn search_is_a_certified_lower_bound(
        sigma in spd2(),
        x0 in -3.0f64..3.0,
        x1 in -3.0f64..3.0,
        r in 0.3f64..2.0,
        seed in any::<u64>(),
    ) {
        let exp = GaussianExperiment::new(vec![0.0, 0.0], sigma).unwrap();
        let pc = PossibilityContour::unconstrained(&exp, &[x0, x1]).unwrap();
        let h = Hypothesis::ball_complement(vec![0.0, 0.0], r).unwrap();
        for set in [h.clone(), h.complement()] {
            let exact = pc.upper_prob(&set, 400, SeedSpec::new(0)).unwrap().value();
            let search = pc.upper_search(&set, 400, SeedSpec::new(seed)).unwrap().value.value();
            prop_assert!(search <= exact + 1e-9, "{search} > {exact}");
        }
    }

    #[test]
    fn maxitivity_and_conjugacy(
        sigma in spd2(),
        x0 in -3.0f64..3.0,
        x1 in -3.0f64..3.0,
        g0 in -1.0f64..1.0,
        a0 in -2.0f64..2.0,
    ) {
        let exp = GaussianExperiment::new(vec![0.0, 0.0], sigma).unwrap();
        let pc = PossibilityContour::unconstrained(&exp, &[x0, x1]).unwrap();
        let ball = Hypothesis::ball_complement(vec![0.5, 0.0], 1.0).unwrap().complement();
        let half = Hypothesis::half_space(vec![g0, 1.0], vec![a0, 0.0]).unwrap();
        let s = SeedSpec::new(1);
        let ub = pc.upper_prob(&ball, 100, s).unwrap();
        let uh = pc.upper_prob(&half, 100, s).unwrap();
        let uu = pc.upper_prob(&ball.clone().union(half.clone()), 100, s).unwrap();
        prop_assert_eq!(uu, if ub >= uh { ub } else { uh });

        let lower = pc.lower_prob(&half, 100, s).unwrap();
        let upper_c = pc.upper_prob(&half.complement(), 100, s).unwrap();
        prop_assert!((lower.value() + upper_c.value() - 1.0).abs() < 1e-15);
        prop_assert!(lower <= uh);
    }

    #[test]
    fn constrained_contour_peaks_at_the_mle(x in -4.0f64..4.0, lb in -1.0f64..1.0, d in 0.0f64..5.0) {
        let exp = GaussianExperiment::isotropic(vec![lb], 1.0).unwrap();
        let pc = PossibilityContour::halfline_constrained(&exp, lb, x).unwrap();
        let mle = pc.mle()[0];
        prop_assert_eq!(pc.contour(&[mle]).unwrap().value(), 1.0);
        let v = pc.contour(&[mle + d]).unwrap().value();
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(v <= pc.contour(&[mle + 0.5 * d]).unwrap().value() + 1e-15);
    }

    #[test]
    fn numbers_roundtrip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(num(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn config_echo_is_a_fixed_point(seed in any::<u64>(), n_reps in 100usize..100_000, theta in 0.0f64..5.0) {
        let cfg = ExperimentConfig {
            preset: Some(Preset::Example2),
            example2_theta: Some(theta),
            n_reps: Some(n_reps),
            base_seed: Some(SeedValue::from_u64(seed)),
            ..Default::default()
        };
        let first = cfg.resolve().unwrap();
        let reloaded = ExperimentConfig::from_toml_str(&first.echo.to_toml_string()).unwrap().resolve().unwrap();
        prop_assert_eq!(&reloaded.echo, &first.echo);
        prop_assert_eq!(reloaded.seed, first.seed);
    }

    #[test]
    fn derived_seeds_are_distinct(base in any::<u64>(), i in 0u64..1000, j in 0u64..1000) {
        prop_assume!(i != j);
        let s = SeedSpec::new(base);
        prop_assert_ne!(s.derive(i), s.derive(j));
        let a = s.derive(i).normals().next_normal();
        let b = s.derive(j).normals().next_normal();
        prop_assert_ne!(a, b);
    }
}
