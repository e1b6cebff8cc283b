use proptest::prelude::*;

use quintic_blowup::cone::ConeField;
use quintic_blowup::duhamel::{bisect, nonlinearity, nonlinearity_increment, SolveSummary};
use quintic_blowup::ensemble::{BlowupRecord, SampleStatus, Template};
use quintic_blowup::error::Error;
use quintic_blowup::nlw_direct::estimate_blowup_time;
use quintic_blowup::numerics::{linear_fit, wilson_interval};
use quintic_blowup::radial_spectral::{forward_transform, inverse_transform, sobolev_norm, RadialGrid, RadialProfile};
use quintic_blowup::randomization::{hs_norm_samples, randomize, CoefficientLaw, RandomSeed};
use quintic_blowup::similarity::{from_similarity, to_similarity, TauGrid, UnitGrid};
use quintic_blowup::KAPPA;

fn gaussian_mix(c: &[(f64, f64)]) -> RadialProfile {
    let grid = RadialGrid::new(16.0, 512).unwrap();
    let f = RadialProfile::from_fn(grid, |r| c.iter().map(|(a, w)| a * (-w * r * r).exp()).sum()).unwrap();
    forward_transform(&f).unwrap()
}

fn law() -> impl Strategy<Value = CoefficientLaw> {
    prop::sample::select(CoefficientLaw::RANDOM.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn nonlinearity_matches_direct_expansion(p in -0.5f64..0.5, f in -0.5f64..0.5) {
        let direct = (KAPPA + f + p).powi(5) - KAPPA.powi(5) - 5.0 * KAPPA.powi(4) * p;
        prop_assert!((nonlinearity(p, f) - direct).abs() < 1e-13);
    }

    #[test]
    fn nonlinearity_is_quadratic_in_small_perturbations(p in -1.0f64..1.0, scale in 1e-8f64..1e-3) {
        let v = nonlinearity(scale * p, 0.0);
        prop_assert!((v - 10.0 * KAPPA.powi(3) * (scale * p).powi(2)).abs() <= 1e2 * scale.powi(3));
    }

    #[test]
    fn increment_is_the_difference(a in -0.5f64..0.5, b in -0.5f64..0.5, f in -0.5f64..0.5) {
        let diff = nonlinearity(a, f) - nonlinearity(b, f);
        prop_assert!((nonlinearity_increment(a, b, f) - diff).abs() < 1e-12);
        prop_assert_eq!(nonlinearity_increment(a, a, f), 0.0);
        prop_assert!((nonlinearity_increment(a, b, f) + nonlinearity_increment(b, a, f)).abs() < 1e-13);
    }

    #[test]
    fn transform_round_trip_and_plancherel(
        c in prop::collection::vec((-2.0f64..2.0, 0.2f64..3.0), 1..4),
    ) {
        let fh = gaussian_mix(&c);
        let back = inverse_transform(&fh).unwrap();
        let scale = fh.values().iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        for (a, b) in fh.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() <= 1e-10 * scale);
        }
        let (p, s) = (fh.physical_l2_norm(), fh.spectral_l2_norm().unwrap());
        prop_assert!((p - s).abs() <= 1e-10 * p.max(1e-300));
    }

    #[test]
    fn randomized_norm_is_annulus_weighted(
        c in prop::collection::vec((-2.0f64..2.0, 0.2f64..3.0), 1..3),
        law in law(),
        seed in any::<u64>(),
        s in -0.5f64..1.5,
    ) {
        let f = gaussian_mix(&c);
        let direct = sobolev_norm(&randomize(&f, law, RandomSeed::new(seed, 0)).unwrap(), s).unwrap();
        let via_energies = hs_norm_samples(&f, s, law, 1, seed).unwrap()[0];
        prop_assert!((direct - via_energies).abs() <= 1e-12 * direct.max(1e-300));
    }

    #[test]
    fn bisection_halves_the_bracket(root in -0.9f64..0.9, slope in 0.1f64..10.0) {
        let out = bisect(-1.0, 1.0, 0.0, 1e-9, 80, |x| Ok((slope * (x - root), ()))).unwrap();
        for w in out.widths.windows(2) {
            prop_assert_eq!(w[1], w[0] / 2.0);
        }
        prop_assert!((out.root - root).abs() <= 1e-9);
    }

    #[test]
    fn bisection_rejects_bad_brackets(root in 1.5f64..3.0) {
        let out = bisect(-1.0, 1.0, 1e-12, 1e-12, 60, |x| Ok((x - root, ())));
        prop_assert!(matches!(out, Err(Error::BracketFailure { .. })), "bracket failure expected");
    }

    #[test]
    fn wilson_interval_contains_the_rate(n in 1usize..5000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).round() as usize;
        let (lo, hi) = wilson_interval(k, n, 1.96);
        let p = k as f64 / n as f64;
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        prop_assert!(lo <= p + 1e-15 && p <= hi + 1e-15);
    }

    #[test]
    fn linear_fit_is_exact_on_lines(a in -5.0f64..5.0, b in -5.0f64..5.0, n in 3usize..40) {
        let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|t| a + b * t).collect();
        let fit = linear_fit(&x, &y).unwrap();
        prop_assert!((fit.slope - b).abs() < 1e-10 && (fit.intercept - a).abs() < 1e-10);
    }

    #[test]
    fn similarity_chart_round_trip(t_frac in 0.0f64..0.999, rho in 0.0f64..=1.0, big_t in 0.5f64..1.5) {
        let t = t_frac * big_t;
        let (t2, r2) = from_similarity(0.0, 0.0, big_t);
        prop_assert_eq!((t2, r2), (0.0, 0.0));
        let r = rho * (big_t - t);
        let (tau, rho2) = to_similarity(t, r, big_t).unwrap();
        let (tb, rb) = from_similarity(tau, rho2, big_t);
        prop_assert!((tb - t).abs() < 1e-12 && (rb - r).abs() < 1e-12);
    }

    #[test]
    fn cone_field_binary_round_trip(seed in any::<u32>(), t in 0.5f64..1.5) {
        let taus = TauGrid::new(2.0, 8).unwrap();
        let rhos = UnitGrid::new(9).unwrap();
        let field = ConeField::from_fn(t, taus, rhos, |a, b| (a * 3.1 + b * seed as f64).sin());
        let back = ConeField::decode_binary(&field.encode_binary()).unwrap();
        prop_assert_eq!(back, field);
    }

    #[test]
    fn blowup_fit_recovers_time_under_noise(t_blow in 0.9f64..1.1, noise in 0.0f64..1e-3, phase in 0.0f64..6.0) {
        let times: Vec<f64> = (0..400).map(|i| t_blow * (1.0 - 10f64.powf(-3.0 * i as f64 / 399.0))).collect();
        let values: Vec<f64> = times
            .iter()
            .enumerate()
            .map(|(i, t)| KAPPA / (t_blow - t).sqrt() * (1.0 + noise * (i as f64 * 1.7 + phase).sin()))
            .collect();
        let est = estimate_blowup_time(&times, &values).unwrap();
        prop_assert!((est.blowup_time - t_blow).abs() < 1e-4 + 10.0 * noise * 1e-2);
        prop_assert!((est.slope_ratio - 1.0).abs() < 0.01 + 10.0 * noise);
    }

    #[test]
    fn record_json_round_trip(
        index in any::<u64>(),
        seed in any::<u64>(),
        eps in 0.0f64..1.0,
        t in prop::option::of(0.5f64..1.5),
        status in prop::sample::select(vec![
            SampleStatus::Stable,
            SampleStatus::BracketFailure,
            SampleStatus::PicardDivergence,
            SampleStatus::SolverError,
        ]),
        template in prop::sample::select(Template::ALL.to_vec()),
        coeffs in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let record = BlowupRecord {
            sample_index: index,
            master_seed: seed,
            epsilon: eps,
            delta: 0.1,
            s: 0.71,
            template,
            status,
            blowup_time: t,
            direct_blowup_time: t.map(|v| v + 1e-7),
            weighted_l2_l4: t.map(|v| v * 1e-3),
            l5_l10: Some(eps / 3.0),
            bisection_steps: Some(7),
            solve: t.map(|v| SolveSummary {
                unstable_coefficient: v - 1.0,
                iterations: 5,
                ratios: vec![1e-3, 2e-3],
                residual: 1e-19,
                z_norm: v,
                sup_h1: v,
                l2_linf: v / 2.0,
                nonlinearity_l1h: 1e-6,
                truncation_bound: 1e-9,
                truncation_warning: false,
                forcing_l1_l2: 1e-4,
                forcing_l5_l10: 2e-4,
                data_norm: 0.1,
            }),
            position_coefficients: coeffs.clone(),
            velocity_coefficients: coeffs,
            error: None,
            wall_time: 0.25,
        };
        let line = serde_json::to_string(&record).unwrap();
        prop_assert!(!line.contains('\n'));
        let back: BlowupRecord = serde_json::from_str(&line).unwrap();
        prop_assert_eq!(back, record);
    }
}
