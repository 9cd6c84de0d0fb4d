//! Randomized solver cross-checks: greedy allocation against the dense
//! simplex, and the closed-form power step against golden-section search.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::energy::{transmission_rate, MIN_RATE_BPS};
use crate::error::Result;
use crate::inter::{PtapHead, PtapInstance};
use crate::intra::{TapInstance, TapMember};
use crate::lp::BudgetedBoxLp;
use crate::sim::par::{map_ordered, Execution};
use crate::sim::rng::{stream, Purpose};

pub const OBJECTIVE_REL_TOL: f64 = 1e-9;
pub const POWER_ABS_TOL_W: f64 = 1e-6;
pub const SLOPE_REL_TOL: f64 = 1e-6;

/// Table-2 flavoured C0 energy rate for a link with rate `r`.
fn c0_rate(power: f64, circuit: f64, eta: f64, e_c: f64, r: f64) -> f64 {
    e_c + (power + circuit) / (eta * r)
}

pub fn random_tap_instance<R: Rng + ?Sized>(rng: &mut R) -> TapInstance {
    let n = rng.random_range(1..=10);
    let eta = 0.9;
    let members = (0..n)
        .map(|_| {
            let r0 = rng.random_range(2e5..5e6);
            TapMember {
                power_w: 0.02,
                circuit_w: 0.005,
                rate_bps: rng.random_range(1e5..1e7),
                residual_bits: rng.random_range(1_000.0..10_000.0),
                c0_energy_rate: c0_rate(0.02, 0.005, eta, 5e-9, r0),
                loss: rng.random_range(0.0..0.6),
            }
        })
        .collect();
    TapInstance {
        members,
        efficiency: eta,
        cad_s: rng.random_range(0.0..0.02),
    }
}

/// Ten heads at 100–250 m from the sink with Rayleigh gains.
pub fn random_ptap_instance<R: Rng + ?Sized>(rng: &mut R, heads: usize) -> PtapInstance {
    let eta = 0.9;
    let bandwidth_hz: f64 = rng.random_range(1.0e6..3.0e6);
    let hs = (0..heads)
        .map(|_| {
            let d: f64 = rng.random_range(100.0..250.0);
            let fade = |rng: &mut R| -> f64 { f64::max(Exp1.sample(rng), 1e-3) };
            let gain = fade(rng) * d.powi(-3);
            let c0_gain = fade(rng) * d.powi(-3);
            let r0 = transmission_rate(1e6, c0_gain, 0.04, 1e-8).max(MIN_RATE_BPS);
            PtapHead {
                circuit_w: 0.005,
                gain,
                bits: rng.random_range(50_000.0..80_000.0),
                c0_energy_rate: c0_rate(0.04, 0.005, eta, 5e-9, r0),
                loss: rng.random_range(0.0..0.5),
            }
        })
        .collect();
    PtapInstance {
        heads: hs,
        bandwidth_hz,
        noise_w: bandwidth_hz * 1e-14,
        efficiency: eta,
        max_power_w: 0.2,
        cad_s: rng.random_range(0.05..0.15),
    }
}

/// Minimizer of a unimodal `f` on [a, b].
pub fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn lp_gap(lp: &BudgetedBoxLp, baseline: f64) -> Result<f64> {
    let greedy = baseline + lp.objective(&lp.solve_greedy());
    let simplex = baseline + lp.objective(&lp.solve_simplex()?);
    Ok(relative_gap(greedy, simplex))
}

/// Worst deviations seen by [`run_oracle_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct OracleReport {
    pub instances: usize,
    pub tap_max_rel_gap: f64,
    pub time_step_max_rel_gap: f64,
    pub power_max_abs_gap_w: f64,
    pub slope_max_rel_gap: f64,
    pub failures: usize,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Case {
    tap: f64,
    time: f64,
    power: f64,
    slope: f64,
    failed: bool,
}

fn one_case(seed: u64, k: u64) -> Case {
    let mut rng: ChaCha8Rng = stream(seed, Purpose::Deployment, 0xABCDEF, k);
    let tap = random_tap_instance(&mut rng);
    let ptap = random_ptap_instance(&mut rng, 10);
    let mut case = Case::default();
    match lp_gap(&tap.lp(), tap.baseline_j()) {
        Ok(g) => case.tap = g,
        Err(_) => case.failed = true,
    }
    let powers: Vec<f64> = (0..ptap.heads.len())
        .map(|_| rng.random_range(0.0..ptap.max_power_w))
        .collect();
    match lp_gap(&ptap.time_lp(&powers), ptap.baseline_j()) {
        Ok(g) => case.time = g,
        Err(_) => case.failed = true,
    }
    let i = rng.random_range(0..ptap.heads.len());
    let t = rng.random_range(1e-3..ptap.cad_s);
    let closed = ptap.optimal_power_given_time(&vec![t; ptap.heads.len()])[i];
    let upper = ptap.power_bound(i, t);
    let searched = golden_section_min(|p| ptap.head_term(i, p, t), 0.0, upper, 1e-10);
    case.power = (closed - searched).abs();
    let p = ptap.max_power_w * 10f64.powf(-rng.random_range(0.0..4.0));
    let h = p * 1e-5;
    let fd = (ptap.head_term(i, p + h, 1.0) - ptap.head_term(i, p - h, 1.0)) / (2.0 * h);
    let an = ptap.head_slope(i, p);
    case.slope = (fd - an).abs() / an.abs().max(1.0 / ptap.efficiency * 1e-3);
    case.failed |= case.tap > OBJECTIVE_REL_TOL
        || case.time > OBJECTIVE_REL_TOL
        || case.power > POWER_ABS_TOL_W
        || case.slope > SLOPE_REL_TOL;
    case
}

pub fn run_oracle_suite(instances: usize, seed: u64, execution: Execution) -> OracleReport {
    let ks: Vec<u64> = (0..instances as u64).collect();
    let cases = map_ordered(execution, &ks, |&k| one_case(seed, k));
    let mut r = OracleReport {
        instances,
        ..Default::default()
    };
    for c in cases {
        r.tap_max_rel_gap = r.tap_max_rel_gap.max(c.tap);
        r.time_step_max_rel_gap = r.time_step_max_rel_gap.max(c.time);
        r.power_max_abs_gap_w = r.power_max_abs_gap_w.max(c.power);
        r.slope_max_rel_gap = r.slope_max_rel_gap.max(c.slope);
        r.failures += c.failed as usize;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let x = golden_section_min(|x| (x - 0.3).powi(2), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-9);
    }

    #[test]
    fn small_suite_passes() {
        let r = run_oracle_suite(50, 7, Execution::Sequential);
        assert!(r.passed(), "{r:?}");
    }
}
