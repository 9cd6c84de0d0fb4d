use crsn::energy::transmission_rate;
use crsn::inter::{DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE_J};
use crsn::lp::equal_fill;
use crsn::model::{CadExponent, CognitiveParams};
use crsn::oracle::{random_ptap_instance, random_tap_instance, run_oracle_suite};
use crsn::sim::par::{map_ordered, Execution};
use crsn::sim::rng::{stream, Purpose};
use crsn::spectrum::{channel_available_duration, fused_detection, idle_probability};
use proptest::prelude::*;

fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    stream(seed, Purpose::Deployment, 99, 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn params_construction_never_panics(
        es in -1.0f64..1.0, ew in -1.0f64..1.0, ec in -1.0f64..1.0, eta in -0.5f64..1.5,
        pr in -0.5f64..1.5, fi in -0.5f64..1.5, k in 0usize..6, pmax in -1.0f64..1.0,
    ) {
        if let Ok(p) = CognitiveParams::new(es, ew, ec, eta, pr, fi, k, pmax) {
            prop_assert!(p.amplifier_efficiency() > 0.0 && p.amplifier_efficiency() <= 1.0);
            prop_assert!(p.coop_set_size() >= 1);
            prop_assert!(p.max_power_w() > 0.0);
            prop_assert!(p.sense_energy_j() >= 0.0);
        }
    }

    #[test]
    fn idle_probability_in_unit_interval(v in 1e-6f64..1e3, l in 1e-6f64..1e3) {
        let p = idle_probability(v, l).unwrap();
        prop_assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn cad_round_trip_and_monotone(
        p_off in 0.2f64..0.95, ff in 0.0f64..0.2, frac in 0.01f64..0.9, v in 0.01f64..5.0,
    ) {
        let avail = p_off * (1.0 - ff);
        let pr = frac * avail;
        let t = channel_available_duration(pr, p_off, ff, v, CadExponent::MeanInverse).unwrap();
        let back = avail * (1.0 - (-t / v).exp());
        prop_assert!((back - pr).abs() <= 1e-12 * pr.max(1e-12) + 1e-15);
        let more = channel_available_duration(pr * 1.05_f64.min(0.99 / frac), p_off, ff, v, CadExponent::MeanInverse)
            .unwrap();
        prop_assert!(more >= t);
        let longer = channel_available_duration(pr, p_off, ff, v * 1.5, CadExponent::MeanInverse).unwrap();
        prop_assert!(longer >= t);
    }

    #[test]
    fn fusion_never_drops_with_more_nodes(pd in prop::collection::vec(0.0f64..1.0, 1..8), extra in 0.0f64..1.0) {
        let base = fused_detection(&pd);
        let mut more = pd.clone();
        more.push(extra);
        prop_assert!(fused_detection(&more) >= base - 1e-15);
        prop_assert!(base >= pd.iter().cloned().fold(0.0, f64::max) - 1e-15);
    }

    #[test]
    fn rate_is_concave_in_power(
        g in 1e-9f64..1e-5, n in 1e-10f64..1e-7, a in 0.0f64..0.2, b in 0.0f64..0.2,
    ) {
        let mid = transmission_rate(1e6, g, 0.5 * (a + b), n);
        let avg = 0.5 * (transmission_rate(1e6, g, a, n) + transmission_rate(1e6, g, b, n));
        prop_assert!(mid >= avg * (1.0 - 1e-12));
    }

    #[test]
    fn baseline_grows_with_loss(seed in any::<u64>(), bump in 0.0f64..0.3) {
        let mut tap = random_tap_instance(&mut rng(seed));
        let before = tap.baseline_j();
        for m in &mut tap.members {
            m.loss = (m.loss + bump).min(0.95);
        }
        prop_assert!(tap.baseline_j() >= before * (1.0 - 1e-12));
    }

    #[test]
    fn tap_optimum_non_increasing_in_cad(seed in any::<u64>(), grow in 1.0f64..4.0) {
        let mut tap = random_tap_instance(&mut rng(seed));
        let e = tap.solve_greedy().objective_j;
        prop_assert!(e <= tap.baseline_j() * (1.0 + 1e-12));
        tap.cad_s *= grow;
        prop_assert!(tap.solve_greedy().objective_j <= e * (1.0 + 1e-12));
    }

    #[test]
    fn equal_fill_respects_caps_and_budget(caps in prop::collection::vec(0.0f64..1.0, 0..10), budget in 0.0f64..3.0) {
        let x = equal_fill(&caps, budget);
        let sum: f64 = x.iter().sum();
        prop_assert!(sum <= budget + 1e-12);
        for (xi, ci) in x.iter().zip(&caps) {
            prop_assert!(*xi >= 0.0 && xi <= ci);
        }
        if sum < budget - 1e-12 {
            prop_assert!(x.iter().zip(&caps).all(|(a, b)| a == b));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn acs_trace_non_increasing_and_below_baseline(seed in any::<u64>(), heads in 1usize..12) {
        let inst = random_ptap_instance(&mut rng(seed), heads);
        let (a, trace) = inst.acs_solve(DEFAULT_TOLERANCE_J, DEFAULT_MAX_ITERATIONS);
        prop_assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(a.objective_j <= inst.baseline_j() + 1e-12);
        prop_assert!(a.per_head_time_s.iter().sum::<f64>() <= inst.cad_s * (1.0 + 1e-12));
    }

    #[test]
    fn parallel_matches_sequential(seed in any::<u64>()) {
        let items: Vec<u64> = (0..64).collect();
        let f = |&k: &u64| random_tap_instance(&mut stream(seed, Purpose::Deployment, 5, k)).solve_greedy().objective_j;
        let a = map_ordered(Execution::Sequential, &items, f);
        let b = map_ordered(Execution::Parallel, &items, f);
        prop_assert_eq!(a, b);
    }
}

#[test]
fn oracle_suite_is_execution_independent() {
    let a = run_oracle_suite(40, 3, Execution::Sequential);
    let b = run_oracle_suite(40, 3, Execution::Parallel);
    assert_eq!(a, b);
    assert!(a.passed());
}
