#![allow(clippy::excessive_precision)]

use amgm::bounds::{self, WeightedSample};
use amgm::gamma;
use amgm::sphere::{self, McConfig, SphereVector};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / b).abs()
    }
}

/// Positive values spread over several orders of magnitude, paired with
/// positive raw weights (normalized by the constructor).
fn sample_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-4.0f64..4.0, n).prop_map(|l| l.into_iter().map(f64::exp).collect()),
            prop::collection::vec(0.01f64..1.0, n),
        )
    })
}

fn build(values: Vec<f64>, raw: Vec<f64>) -> WeightedSample {
    let total: f64 = raw.iter().sum();
    WeightedSample::new(values, Some(raw.into_iter().map(|w| w / total).collect())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn refined_chain_holds((values, raw) in sample_strategy()) {
        let r = bounds::refined_am_gm_report(&build(values, raw));
        let slack = 1.0 + 1e-12;
        prop_assert!(0.0 <= r.gm);
        prop_assert!(r.gm <= r.variance_bound * slack);
        prop_assert!(r.variance_bound <= r.refined_bound * slack);
        prop_assert!(r.refined_bound <= r.am * slack);
        prop_assert!((0.0..1.0).contains(&r.c));
        prop_assert!((0.0..=1.0).contains(&r.variance));
    }

    #[test]
    fn scale_invariance((values, raw) in sample_strategy(), log_lambda in -20.0f64..20.0) {
        let lambda = log_lambda.exp();
        let scaled: Vec<f64> = values.iter().map(|v| v * lambda).collect();
        let a = bounds::refined_am_gm_report(&build(values, raw.clone()));
        let b = bounds::refined_am_gm_report(&build(scaled, raw));
        prop_assume!(a.c > 1e-6);
        prop_assert!(rel(b.c, a.c) < 1e-12, "c {} vs {}", b.c, a.c);
        prop_assert!(rel(b.refined_bound, lambda * a.refined_bound) < 1e-12);
    }

    #[test]
    fn permutation_leaves_report_unchanged((values, raw) in sample_strategy(), seed in any::<u64>()) {
        let mut idx: Vec<usize> = (0..values.len()).collect();
        let mut state = seed;
        for i in (1..idx.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            idx.swap(i, (state >> 33) as usize % (i + 1));
        }
        let pv: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        let pw: Vec<f64> = idx.iter().map(|&i| raw[i]).collect();
        let a = bounds::refined_am_gm_report(&build(values, raw));
        let b = bounds::refined_am_gm_report(&build(pv, pw));
        for (x, y) in [(a.am, b.am), (a.gm, b.gm), (a.c, b.c), (a.refined_bound, b.refined_bound),
                       (a.variance, b.variance), (a.variance_bound, b.variance_bound)] {
            prop_assert!(rel(x, y) <= 1e-14);
        }
    }

    #[test]
    fn sandwich_holds((values, raw) in sample_strategy()) {
        let v = bounds::variance_sandwich(&build(values, raw));
        prop_assert!(v.holds);
        prop_assert!(v.t > 0.0 && v.t <= 1.0);
    }

    #[test]
    fn refinement_never_weaker_than_am_gm((values, raw) in sample_strategy()) {
        let r = bounds::refined_am_gm_report(&build(values, raw));
        prop_assert!((2.0 * r.c).exp() >= 1.0);
        prop_assert!(r.refined_bound >= r.gm);
    }

    #[test]
    fn holder_refinement_randomized((values, raw) in sample_strategy(), s in 1e-3f64..10.0, frac in 1e-6f64..0.999_999) {
        let r = frac * s / 2.0;
        let h = bounds::holder_refinement_check(&build(values, raw), r, s).unwrap();
        prop_assert!(h.holds, "lhs {} rhs {}", h.lhs, h.rhs);
    }

    #[test]
    fn gm_matches_expanded_multiset_product(
        q in 1u64..=12,
        picks in prop::collection::vec((1u64..=12, 0.2f64..5.0), 1..6),
    ) {
        // weights p_i / q with sum p_i = q; build the matching multiset
        let mut counts: Vec<u64> = Vec::new();
        let mut left = q;
        for (p, _) in &picks {
            if left == 0 { break; }
            let take = (*p).min(left);
            counts.push(take);
            left -= take;
        }
        if left > 0 {
            *counts.last_mut().unwrap() += left;
        }
        let values: Vec<f64> = picks.iter().take(counts.len()).map(|(_, v)| *v).collect();
        let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / q as f64).collect();
        let gm = bounds::refined_am_gm_report(&bounds::make_sample(&values, Some(&weights)).unwrap()).gm;

        let mut product = 1.0f64;
        for (v, c) in values.iter().zip(&counts) {
            for _ in 0..*c {
                product *= v;
            }
        }
        let brute = product.powf(1.0 / q as f64);
        prop_assert!(rel(gm, brute) < 1e-12, "{gm} vs {brute}");
    }

    #[test]
    fn near_equal_values_have_tiny_correction(base in 1e-3f64..1e3, jitter in prop::collection::vec(-1.0f64..1.0, 2..10)) {
        let values: Vec<f64> = jitter.iter().map(|j| base * (1.0 + j * 1e-15)).collect();
        let max = values.iter().copied().fold(0.0, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assume!(max - min < 1e-14 * max);
        let c = bounds::refined_am_gm_report(&bounds::make_sample(&values, None).unwrap()).c;
        prop_assert!(c < 1e-14);
    }

    #[test]
    fn spread_values_have_visible_correction(base in 1e-3f64..1e3, spread in 1e-5f64..10.0, n in 2usize..20) {
        let mut values = vec![base; n];
        values[0] = base * (1.0 + spread);
        let c = bounds::refined_am_gm_report(&bounds::make_sample(&values, None).unwrap()).c;
        prop_assert!(c >= 1e-14, "c = {c}");
    }

    #[test]
    fn sign_flips_leave_sphere_stats_unchanged(coords in prop::collection::vec(-3.0f64..3.0, 2..50), mask in any::<u64>()) {
        prop_assume!(coords.iter().any(|c| *c != 0.0));
        let flipped: Vec<f64> = coords.iter().enumerate()
            .map(|(i, v)| if (mask >> (i % 64)) & 1 == 1 { -v } else { *v })
            .collect();
        let y = SphereVector::from_direction(coords).unwrap();
        let z = SphereVector::from_direction(flipped).unwrap();
        let (a, b) = (sphere::per_sample_stats(&y), sphere::per_sample_stats(&z));
        prop_assert_eq!(a.s1, b.s1);
        prop_assert_eq!(a.bound, b.bound);
        prop_assert_eq!(a.gm_side, b.gm_side);
    }

    #[test]
    fn pointwise_bound_on_random_directions(coords in prop::collection::vec(-3.0f64..3.0, 1..200)) {
        prop_assume!(coords.iter().any(|c| *c != 0.0));
        let y = SphereVector::from_direction(coords).unwrap();
        prop_assert!(sphere::per_sample_stats(&y).holds_eq8);
    }
}

#[test]
fn expected_l1_increasing_and_bounded() {
    let mut previous = 0.0;
    for k in 1..=20u32 {
        let n = 1u64 << k;
        let e = gamma::expected_l1_norm(n).unwrap();
        assert!(e > previous, "n={n}");
        assert!(e >= 1.0 && e <= (n as f64).sqrt(), "n={n}");
        assert!(gamma::normalized_expectation_bounds(n).unwrap().holds, "n={n}");
        previous = e;
    }
    let mut previous = 0.0;
    for n in 1..=2000u64 {
        let e = gamma::expected_l1_norm(n).unwrap();
        assert!(e > previous, "n={n}");
        previous = e;
    }
}

#[test]
fn guarantee_value_strictly_decreasing() {
    let mut previous = f64::INFINITY;
    let mut n = 2u64;
    while n < 1 << 40 {
        let g = gamma::theorem2_threshold(n).unwrap().guarantee_value;
        assert!(g < previous, "n={n}");
        previous = g;
        n = n + n / 3 + 1;
    }
    let first = gamma::first_certified_dimension();
    assert!((1_000_000..=10_000_000).contains(&first));
}

#[test]
fn stirling_error_shrinks_along_powers_of_two() {
    let dev = |n: u64| {
        let exact = gamma::expected_l1_norm(n).unwrap();
        ((gamma::stirling_expectation(n).unwrap() - exact) / exact).abs()
    };
    let mut previous = dev(10);
    for k in 4..=12 {
        let d = dev(1 << k);
        assert!(d < previous, "n=2^{k}: {d} >= {previous}");
        previous = d;
    }
}

#[test]
fn monte_carlo_mean_matches_lemma_within_four_standard_errors() {
    for (n, trials) in [(3usize, 50_000usize), (40, 20_000), (1000, 5_000)] {
        let s = sphere::run_experiment(&McConfig::new(n, trials, n as u64)).unwrap();
        let se = s.l1.std_error(trials);
        assert!((s.l1.mean - s.analytic_expected_l1).abs() <= 4.0 * se, "n={n}");
        let b = gamma::normalized_expectation_bounds(n as u64).unwrap();
        let widen = 4.0 * s.s1.std_error(trials);
        assert!(s.s1.mean >= b.lower - widen && s.s1.mean <= b.upper + widen, "n={n}");
        assert_eq!(s.pointwise_violations, 0);
    }
}

#[test]
fn gm_gap_shrinks_with_dimension() {
    let gap = |n: usize| {
        sphere::gm_concentration_for(&McConfig::new(n, 2_000, 5))
            .unwrap()
            .abs_gap_to_constant
    };
    assert!(gap(10_000) < gap(100));
}
