mod common;

use std::f64::consts::LN_2;

use common::{fixture, licensed, rel, table2_channel};
use crsn::inter::{
    acs_solve, expected_inter_energy, inter_accessible_channels, inter_channel_prospects,
    run_inter_phase, PtapHead, PtapInstance, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE_J,
};
use crsn::oracle::random_ptap_instance;
use crsn::phase::{PhaseOptions, Strategy};
use crsn::sim::rng::{stream, PhaseStreams, Purpose, INTER_OWNER};
use crsn::spectrum::SensingMode;
use rand::Rng;

fn head(gain: f64, bits: f64, er: f64, loss: f64) -> PtapHead {
    PtapHead {
        circuit_w: 0.005,
        gain,
        bits,
        c0_energy_rate: er,
        loss,
    }
}

fn instance(heads: Vec<PtapHead>, cad_s: f64) -> PtapInstance {
    PtapInstance {
        heads,
        bandwidth_hz: 2e6,
        noise_w: 2e-8,
        efficiency: 0.9,
        max_power_w: 0.2,
        cad_s,
    }
}

#[test]
fn zero_times_give_zero_equivalent_objective() {
    let inst = instance(vec![head(1e-7, 6e4, 5e-8, 0.2); 3], 0.1);
    assert_eq!(inst.equivalent_objective(&[0.1, 0.2, 0.0], &[0.0; 3]), 0.0);
    assert_eq!(
        inst.energy_at(&[0.1, 0.2, 0.0], &[0.0; 3]),
        inst.baseline_j()
    );
}

#[test]
fn zero_weight_leaves_pure_transmit_cost() {
    let inst = instance(vec![head(1e-7, 6e4, 0.0, 0.0)], 0.1);
    let v = inst.equivalent_objective(&[0.1], &[0.02]);
    assert!(rel(v, 0.105 / 0.9 * 0.02) < 1e-15);
}

#[test]
fn power_step_branches() {
    // weak link: stationary point below zero
    let weak = instance(vec![head(1e-12, 6e4, 5e-8, 0.0)], 0.1);
    assert!(weak.weight(0) * 0.9 / LN_2 <= 2e-8 / 1e-12);
    assert_eq!(weak.optimal_power_given_time(&[0.05]), vec![0.0]);
    // very valuable licensed time: clamped at the bound
    let strong = instance(vec![head(1e-7, 1e9, 1e-3, 0.9)], 0.1);
    let p = strong.optimal_power_given_time(&[0.05]);
    assert_eq!(p[0], strong.power_bound(0, 0.05));
    assert_eq!(p[0], 0.2);
    // heads with no time transmit nothing
    assert_eq!(strong.optimal_power_given_time(&[0.0]), vec![0.0]);
}

#[test]
fn interior_power_is_stationary() {
    let inst = instance(vec![head(2.5e-7, 6e4, 6e-8, 0.3)], 0.1);
    let t = 0.01;
    let p = inst.optimal_power_given_time(&[t])[0];
    assert!(p > 0.0 && p < inst.power_bound(0, t));
    assert!(inst.head_slope(0, p).abs() < 1e-9);
    let closed = inst.weight(0) * 0.9 / LN_2 - 2e-8 / 2.5e-7;
    assert!(rel(p, closed) < 1e-12);
}

#[test]
fn time_step_branches() {
    let useless = instance(vec![head(1e-12, 6e4, 5e-8, 0.0); 2], 1.0);
    assert_eq!(
        useless.optimal_time_given_power(&[0.1, 0.1]),
        vec![0.0, 0.0]
    );
    let single = instance(vec![head(2.5e-7, 6e4, 6e-8, 0.4)], 10.0);
    let t = single.optimal_time_given_power(&[0.05]);
    assert!(rel(t[0], 6e4 / single.rate(0, 0.05)) < 1e-12);
}

#[test]
fn time_step_matches_simplex() {
    let mut rng = stream(5, Purpose::Deployment, 2, 0);
    for _ in 0..50 {
        let inst = random_ptap_instance(&mut rng, 10);
        let p: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..0.2)).collect();
        let g = inst.equivalent_objective(&p, &inst.optimal_time_given_power(&p));
        let l = inst.equivalent_objective(&p, &inst.optimal_time_given_power_lp(&p).unwrap());
        assert!((g - l).abs() <= 1e-9 * g.abs().max(l.abs()).max(1e-12));
    }
}

#[test]
fn zero_cad_converges_to_baseline_at_once() {
    let mut rng = stream(6, Purpose::Deployment, 0, 0);
    let mut inst = random_ptap_instance(&mut rng, 10);
    inst.cad_s = 0.0;
    let (a, _) = inst.acs_solve(DEFAULT_TOLERANCE_J, DEFAULT_MAX_ITERATIONS);
    assert_eq!(a.iterations, 1);
    assert!(a.converged);
    assert!(rel(a.objective_j, inst.baseline_j()) < 1e-15);
}

#[test]
fn acs_beats_random_feasible_points() {
    let mut rng = stream(7, Purpose::Deployment, 0, 0);
    for _ in 0..5 {
        let inst = random_ptap_instance(&mut rng, 10);
        let (a, trace) = inst.acs_solve(DEFAULT_TOLERANCE_J, DEFAULT_MAX_ITERATIONS);
        assert!(
            a.converged && a.iterations <= 6,
            "{} iterations",
            a.iterations
        );
        assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(a.objective_j <= inst.baseline_j());
        let t_sum: f64 = a.per_head_time_s.iter().sum();
        assert!(t_sum <= inst.cad_s + 1e-12);
        for (i, h) in inst.heads.iter().enumerate() {
            assert!((0.0..=inst.max_power_w).contains(&a.per_head_power_w[i]));
            assert!(inst.rate(i, a.per_head_power_w[i]) * a.per_head_time_s[i] <= h.bits + 1e-9);
        }
        for _ in 0..100 {
            let p: Vec<f64> = (0..10)
                .map(|_| rng.random_range(0.0..inst.max_power_w))
                .collect();
            let mut t: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..1.0)).collect();
            let scale = inst.cad_s / t.iter().sum::<f64>();
            for (i, ti) in t.iter_mut().enumerate() {
                let r = inst.rate(i, p[i]);
                *ti = (*ti * scale).min(inst.heads[i].bits / r);
            }
            assert!(a.objective_j <= inst.energy_at(&p, &t) + 1e-12);
        }
    }
}

fn options(strategy: Strategy) -> PhaseOptions {
    PhaseOptions {
        strategy,
        sensing: SensingMode::Paper,
        ..Default::default()
    }
}

#[test]
fn expected_energy_limits_and_two_branch() {
    let f = fixture(3, 19, 5000.0, 0.0, 0.3, vec![table2_channel(1, 2e6)], 1.0);
    let bits = f.net.aggregated_bits();
    let a = acs_solve(
        f.ctx(),
        &bits,
        &f.channels[0],
        0.1,
        DEFAULT_TOLERANCE_J,
        DEFAULT_MAX_ITERATIONS,
    )
    .unwrap();
    let base = PtapInstance::build(f.ctx(), &bits, &f.channels[0], 0.1)
        .unwrap()
        .baseline_j();
    let es = 3.0 * 1.31e-4;
    let ew = 2.0 * 3.0 * 1e-5;
    assert!(rel(expected_inter_energy(f.ctx(), &a, base, 0.0), base + es) < 1e-15);
    let f_s = 0.38;
    let oracle = f_s * (a.objective_j + es + ew) + (1.0 - f_s) * (base + es);
    assert!(rel(expected_inter_energy(f.ctx(), &a, base, f_s), oracle) < 1e-12);
}

#[test]
fn accessibility_matches_sign_without_loss() {
    let f = fixture(10, 19, 5000.0, 0.0, 0.0, vec![table2_channel(1, 2e6)], 1.0);
    let bits = f.net.aggregated_bits();
    let inst = PtapInstance::build(f.ctx(), &bits, &f.channels[0], 0.1).unwrap();
    let (a, _) = inst.acs_solve(DEFAULT_TOLERANCE_J, DEFAULT_MAX_ITERATIONS);
    let f_s = 0.4 * 0.95;
    let sign = (a.objective_j - inst.baseline_j()) * f_s + 2.0 * 10.0 * 1e-5 * f_s + 3.0 * 1.31e-4;
    let accessible = !inter_accessible_channels(f.ctx(), &bits, &f.slots(0.1))
        .unwrap()
        .is_empty();
    assert_eq!(accessible, sign < 0.0);
}

#[test]
fn heavy_traffic_at_low_loss_is_accessible() {
    let f = fixture(10, 19, 5000.0, 0.0, 0.1, vec![table2_channel(1, 2e6)], 1.0);
    let p = inter_accessible_channels(f.ctx(), &f.net.aggregated_bits(), &f.slots(0.1)).unwrap();
    assert_eq!(p.len(), 1);
}

#[test]
fn inter_ties_ordered_by_id_and_flag_consistent() {
    let f = fixture(
        10,
        19,
        5000.0,
        0.0,
        0.3,
        vec![table2_channel(3, 2e6), table2_channel(1, 2e6)],
        1.0,
    );
    let bits = f.net.aggregated_bits();
    let ids: Vec<usize> = inter_accessible_channels(f.ctx(), &bits, &f.slots(0.1))
        .unwrap()
        .iter()
        .map(|p| p.channel_id.0)
        .collect();
    assert_eq!(ids, vec![1, 3]);
    for p in inter_channel_prospects(f.ctx(), &bits, &f.slots(0.1)).unwrap() {
        assert_eq!(p.accessible, p.expected_energy_j < p.baseline_j);
    }
}

#[test]
fn no_prospects_means_inter_baseline() {
    let f = fixture(3, 19, 5000.0, 0.0, 0.2, vec![table2_channel(1, 2e6)], 1.0);
    let slots = f.slots(0.1);
    let out = run_inter_phase(
        f.ctx(),
        &f.net.aggregated_bits(),
        &slots,
        options(Strategy::C0Only),
        &mut PhaseStreams::new(1, 0, INTER_OWNER),
    )
    .unwrap();
    let baseline = crsn::energy::baseline_inter_energy(&f.net, &f.c0, &f.params).unwrap();
    assert!(rel(out.ledger.total(), baseline) < 1e-12);
}

#[test]
fn inter_all_busy_and_forced_idle() {
    let busy = |id| licensed(id, 2e6, 1e-6, 1e3, 0.05);
    let f = fixture(3, 19, 5000.0, 0.0, 0.2, vec![busy(1), busy(2)], 1.0);
    let bits = f.net.aggregated_bits();
    let slots = f.slots(0.1);
    let out = run_inter_phase(
        f.ctx(),
        &bits,
        &slots,
        options(Strategy::Asa),
        &mut PhaseStreams::new(1, 0, INTER_OWNER),
    )
    .unwrap();
    let baseline = crsn::energy::baseline_inter_energy(&f.net, &f.c0, &f.params).unwrap();
    assert!(rel(out.ledger.total(), baseline + 2.0 * 3.0 * 1.31e-4) < 1e-12);

    let f = fixture(
        3,
        19,
        5000.0,
        0.0,
        0.4,
        vec![licensed(1, 2e6, 1e3, 1e-6, 0.0)],
        1.0,
    );
    let bits = f.net.aggregated_bits();
    let slots = f.slots(10.0);
    let out = run_inter_phase(
        f.ctx(),
        &bits,
        &slots,
        options(Strategy::Proposed),
        &mut PhaseStreams::new(1, 0, INTER_OWNER),
    )
    .unwrap();
    let e_star = acs_solve(
        f.ctx(),
        &bits,
        &f.channels[0],
        10.0,
        DEFAULT_TOLERANCE_J,
        DEFAULT_MAX_ITERATIONS,
    )
    .unwrap()
    .objective_j;
    let oracle = e_star + 3.0 * 1.31e-4 + 2.0 * 3.0 * 1e-5;
    assert!(rel(out.ledger.total(), oracle) < 1e-9);
    assert_eq!(out.ledger.accesses(), 1);
}

#[test]
fn average_allocation_uses_maximum_power() {
    let mut rng = stream(8, Purpose::Deployment, 0, 0);
    let inst = random_ptap_instance(&mut rng, 10);
    let a = inst.average_allocation();
    assert!(a.per_head_power_w.iter().all(|&p| p == inst.max_power_w));
    assert!(a.per_head_time_s.iter().sum::<f64>() <= inst.cad_s * (1.0 + 1e-12));
    let (best, _) = inst.acs_solve(DEFAULT_TOLERANCE_J, DEFAULT_MAX_ITERATIONS);
    assert!(best.objective_j <= a.objective_j);
}
