//! Property tests over randomly drawn systems and designs.

use nalgebra::DMatrix;
use proptest::prelude::*;

use delayrate::bound::{closed_loop_maps, snr_and_variance, snr_and_variance_shifted, LoopDesign};
use delayrate::lqg::{d_inf, solve_dare};
use delayrate::lti::{realize, FrequencyGrid, RationalFilter, TwoByTwoPlant};
use delayrate::sim::empirical_entropy_rate;

fn stable_filter(max_order: usize) -> impl Strategy<Value = RationalFilter> {
    (1..=max_order)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(-0.85..0.85f64, n),
                prop::collection::vec(-2.0..2.0f64, 1..=n + 1),
            )
        })
        .prop_map(|(poles, num)| {
            let den = RationalFilter::from_roots(1.0, &[], &poles).unwrap().den().to_vec();
            RationalFilter::new(num, den).unwrap()
        })
}

fn test_plant() -> TwoByTwoPlant {
    let g = RationalFilter::new(vec![0.5], vec![1.0, -0.7]).unwrap();
    let g11 = RationalFilter::new(vec![1.0, 0.1], vec![1.0, -0.4]).unwrap();
    let g21 = RationalFilter::new(vec![0.3, 0.2], vec![1.0, 0.2]).unwrap();
    TwoByTwoPlant::new(vec![vec![g11]], vec![g.clone()], vec![g21], g).unwrap()
}

fn small_filter() -> impl Strategy<Value = RationalFilter> {
    (-0.5..0.5f64, -0.5..0.5f64, -0.6..0.6f64)
        .prop_map(|(b0, b1, a1)| RationalFilter::new(vec![b0, b1], vec![1.0, -a1]).unwrap())
}

fn random_design() -> impl Strategy<Value = LoopDesign> {
    (small_filter(), small_filter(), small_filter(), 0.05..5.0f64, 0usize..4).prop_map(|(b_r, b_y, j, s2, h)| {
        let j = RationalFilter::new(j.num().iter().map(|c| c + 1.0).collect(), j.den().to_vec()).unwrap();
        LoopDesign::from_filters(b_r, b_y, j, s2, h).unwrap()
    })
}

fn loop_radius(plant: &TwoByTwoPlant, design: &LoopDesign) -> f64 {
    closed_loop_maps(plant, design).unwrap().sys.spectral_radius()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn h2_by_lyapunov_matches_impulse_energy(f in stable_filter(4)) {
        let sys = realize(&f);
        let lyap = sys.h2_norm_sq().unwrap();
        let taps: f64 = sys.impulse_response(3000).iter().map(|g| g[(0, 0)].powi(2)).sum();
        prop_assert!((lyap - taps).abs() <= 1e-9 * (1.0 + taps), "{lyap} vs {taps}");
    }

    #[test]
    fn dare_residual_is_small(
        a in prop::collection::vec(-1.5..1.5f64, 9),
        b in prop::collection::vec(-1.0..1.0f64, 3),
        q in 0.1..10.0f64,
        r in 0.01..10.0f64,
    ) {
        let a = DMatrix::from_row_slice(3, 3, &a);
        let b = DMatrix::from_column_slice(3, 1, &b);
        let sol = solve_dare(&a, &b, &(DMatrix::identity(3, 3) * q), &DMatrix::from_element(1, 1, r));
        if let Ok(sol) = sol {
            prop_assert!(sol.residual <= 1e-9, "residual {}", sol.residual);
            prop_assert!(sol.closed_loop_radius < 1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn state_space_and_closed_form_evaluations_agree(design in random_design()) {
        let plant = test_plant();
        prop_assume!(loop_radius(&plant, &design) < 0.9);
        let a = snr_and_variance(&plant, &design).unwrap();
        let b = snr_and_variance_shifted(&plant, &design, &FrequencyGrid::new(1 << 14).unwrap()).unwrap();
        prop_assert!((a.snr - b.snr).abs() <= 1e-8 * (1.0 + a.snr), "{} vs {}", a.snr, b.snr);
        prop_assert!((a.sigma_z_sq - b.sigma_z_sq).abs() <= 1e-8 * (1.0 + a.sigma_z_sq));
    }

    #[test]
    fn encoder_decoder_scaling_is_invisible(design in random_design(), alpha in prop::sample::select(vec![0.1, 1.0, 10.0])) {
        let plant = test_plant();
        prop_assume!(loop_radius(&plant, &design) < 0.95);
        let base = snr_and_variance(&plant, &design).unwrap();
        let scaled = snr_and_variance(&plant, &design.scaled(alpha).unwrap()).unwrap();
        prop_assert!((base.snr - scaled.snr).abs() <= 1e-10 * (1.0 + base.snr));
        prop_assert!((base.sigma_z_sq - scaled.sigma_z_sq).abs() <= 1e-10 * (1.0 + base.sigma_z_sq));
    }

    #[test]
    fn floor_grows_with_delay(p1 in -2.5..2.5f64, p2 in -0.9..0.9f64, gain in 0.05..2.0f64) {
        let g = RationalFilter::from_roots(gain, &[], &[p1, p2]).unwrap();
        let plant = TwoByTwoPlant::shared_channel(g).unwrap();
        let floors: Vec<f64> = (0..4).map(|h| d_inf(&plant, h).unwrap().value).collect();
        for w in floors.windows(2) {
            prop_assert!(w[1] >= w[0] * (1.0 - 1e-9), "{floors:?}");
        }
    }

    #[test]
    fn entropy_does_not_grow_with_context(seed in 0u64..1000, flip in 0.01..0.5f64) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut s = vec![0i64];
        for _ in 0..50_000 {
            let last = *s.last().unwrap();
            let next = if rng.random::<f64>() < flip { (last + rng.random_range(1..4)) % 4 } else { last };
            s.push(next);
        }
        let h: Vec<f64> = (0..3).map(|m| empirical_entropy_rate(&s, m).unwrap()).collect();
        prop_assert!(h[2] <= h[1] + 0.02 && h[1] <= h[0] + 0.02, "{h:?}");
    }
}
