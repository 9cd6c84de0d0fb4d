//! Inter-cluster control: joint power/time allocation by alternating convex
//! search, expected energy, accessible-channel ordering and the head-set
//! sense/access controller.

use std::f64::consts::LN_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{inter_energy_rate, transmission_energy, transmission_rate, MIN_RATE_BPS};
use crate::error::Result;
use crate::intra::{sort_by_bandwidth, sort_by_expected_energy, ChannelProspect};
use crate::lp::{equal_fill, BudgetedBoxLp};
use crate::model::Channel;
use crate::phase::{
    finish_backlogs_on_c0, plan_sensing, run_phase, two_branch_expectation, AccessOutcome,
    AccessProblem, Accounting, Candidate, ChannelSlot, PhaseContext, PhaseOptions, PhaseOutcome,
    PhaseRng, Strategy, RESIDUAL_EPS_BITS,
};

pub const DEFAULT_TOLERANCE_J: f64 = 1e-6;
pub const DEFAULT_MAX_ITERATIONS: usize = 50;

const BUDGET_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTimeAllocation {
    pub per_head_power_w: Vec<f64>,
    pub per_head_time_s: Vec<f64>,
    /// E*₂,ₓ: baseline plus the equivalent objective.
    pub objective_j: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// One cluster head as seen by the power/time problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtapHead {
    pub circuit_w: f64,
    /// Gain towards the sink on the licensed channel.
    pub gain: f64,
    pub bits: f64,
    /// ER₂ on C0.
    pub c0_energy_rate: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtapInstance {
    pub heads: Vec<PtapHead>,
    pub bandwidth_hz: f64,
    pub noise_w: f64,
    pub efficiency: f64,
    pub max_power_w: f64,
    pub cad_s: f64,
}

impl PtapInstance {
    pub fn build(
        ctx: PhaseContext<'_>,
        head_bits: &[f64],
        channel: &Channel,
        cad_s: f64,
    ) -> Result<Self> {
        let mut heads = Vec::with_capacity(head_bits.len());
        for (ci, (cluster, &bits)) in ctx.network.clusters().iter().zip(head_bits).enumerate() {
            let head = ctx.network.head(ci);
            heads.push(PtapHead {
                circuit_w: head.circuit_power_w(),
                gain: head.link_gain(channel.id()),
                bits,
                c0_energy_rate: inter_energy_rate(head, ctx.c0, ctx.params)?.value(),
                loss: cluster.head_loss_c0(),
            });
        }
        Ok(Self {
            heads,
            bandwidth_hz: channel.bandwidth_hz(),
            noise_w: channel.noise_power_w(),
            efficiency: ctx.params.amplifier_efficiency(),
            max_power_w: ctx.params.max_power_w(),
            cad_s,
        })
    }

    /// W_i = B·ER₂/(1−λ).
    pub fn weight(&self, i: usize) -> f64 {
        let h = &self.heads[i];
        self.bandwidth_hz * h.c0_energy_rate / (1.0 - h.loss)
    }

    pub fn rate(&self, i: usize, power_w: f64) -> f64 {
        transmission_rate(self.bandwidth_hz, self.heads[i].gain, power_w, self.noise_w)
    }

    /// E₂,₀ over the current backlogs.
    pub fn baseline_j(&self) -> f64 {
        self.heads
            .iter()
            .map(|h| h.bits * h.c0_energy_rate / (1.0 - h.loss))
            .sum()
    }

    /// Per-head f(P)·t with f(P) = (P+α)/η − W·log₂(1 + gP/σ²).
    pub fn head_term(&self, i: usize, power_w: f64, time_s: f64) -> f64 {
        let h = &self.heads[i];
        let spectral = (h.gain * power_w / self.noise_w).ln_1p() / LN_2;
        ((power_w + h.circuit_w) / self.efficiency - self.weight(i) * spectral) * time_s
    }

    /// d/dP of f(P).
    pub fn head_slope(&self, i: usize, power_w: f64) -> f64 {
        let h = &self.heads[i];
        1.0 / self.efficiency - self.weight(i) * h.gain / (LN_2 * (self.noise_w + h.gain * power_w))
    }

    /// E₂,ₓ′: the objective with the constant baseline removed.
    pub fn equivalent_objective(&self, powers: &[f64], times: &[f64]) -> f64 {
        (0..self.heads.len())
            .map(|i| self.head_term(i, powers[i], times[i]))
            .sum()
    }

    /// E₂,ₓ = Σ (licensed transmit energy + remaining backlog over C0).
    pub fn energy_at(&self, powers: &[f64], times: &[f64]) -> f64 {
        self.heads
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let licensed =
                    transmission_energy(powers[i], h.circuit_w, self.efficiency, times[i]);
                let left = h.bits - self.rate(i, powers[i]) * times[i];
                licensed + left * h.c0_energy_rate / (1.0 - h.loss)
            })
            .sum()
    }

    /// Unconstrained stationary point W·η/ln2 − σ²/g.
    pub fn stationary_power(&self, i: usize) -> f64 {
        let h = &self.heads[i];
        if h.gain <= 0.0 {
            return 0.0;
        }
        self.weight(i) * self.efficiency / LN_2 - self.noise_w / h.gain
    }

    /// P_B: the power at which the head's backlog exactly fits `time_s`,
    /// capped at P_max.
    pub fn power_bound(&self, i: usize, time_s: f64) -> f64 {
        let h = &self.heads[i];
        if time_s <= 0.0 || h.gain <= 0.0 {
            return self.max_power_w;
        }
        let needed =
            (h.bits / (self.bandwidth_hz * time_s) * LN_2).exp_m1() * self.noise_w / h.gain;
        needed.min(self.max_power_w)
    }

    fn clamp_power(&self, i: usize, time_s: f64) -> f64 {
        self.stationary_power(i)
            .clamp(0.0, self.power_bound(i, time_s).max(0.0))
    }

    /// Closed-form power step; heads without airtime get zero power.
    pub fn optimal_power_given_time(&self, times: &[f64]) -> Vec<f64> {
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| if t > 0.0 { self.clamp_power(i, t) } else { 0.0 })
            .collect()
    }

    /// Power step used inside the alternation: heads without airtime take
    /// the t → 0⁺ limit so they can re-enter the time step.
    fn search_power(&self, times: &[f64]) -> Vec<f64> {
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| self.clamp_power(i, t))
            .collect()
    }

    pub fn time_lp(&self, powers: &[f64]) -> BudgetedBoxLp {
        let mut coefficients = Vec::with_capacity(self.heads.len());
        let mut caps = Vec::with_capacity(self.heads.len());
        for (i, h) in self.heads.iter().enumerate() {
            let rate = self.rate(i, powers[i]);
            coefficients.push(self.head_term(i, powers[i], 1.0));
            caps.push(if rate >= MIN_RATE_BPS {
                h.bits / rate
            } else {
                0.0
            });
        }
        BudgetedBoxLp {
            coefficients,
            caps,
            budget: self.cad_s,
        }
    }

    pub fn optimal_time_given_power(&self, powers: &[f64]) -> Vec<f64> {
        self.time_lp(powers).solve_greedy()
    }

    pub fn optimal_time_given_power_lp(&self, powers: &[f64]) -> Result<Vec<f64>> {
        self.time_lp(powers).solve_simplex()
    }

    /// Deterministic start: CAD split equally over heads with data, zero power.
    pub fn start_point(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self
            .heads
            .iter()
            .filter(|h| h.bits > RESIDUAL_EPS_BITS)
            .count();
        let share = if n == 0 { 0.0 } else { self.cad_s / n as f64 };
        let times = self
            .heads
            .iter()
            .map(|h| {
                if h.bits > RESIDUAL_EPS_BITS {
                    share
                } else {
                    0.0
                }
            })
            .collect();
        (vec![0.0; self.heads.len()], times)
    }

    /// Alternating convex search. Returns the allocation and the full
    /// objective after the start point and every iteration.
    pub fn acs_solve(
        &self,
        tolerance_j: f64,
        max_iterations: usize,
    ) -> (PowerTimeAllocation, Vec<f64>) {
        let baseline = self.baseline_j();
        let (mut powers, mut times) = self.start_point();
        let mut trace = vec![baseline + self.equivalent_objective(&powers, &times)];
        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iterations.max(1) {
            powers = self.search_power(&times);
            times = self.optimal_time_given_power(&powers);
            iterations += 1;
            let e = baseline + self.equivalent_objective(&powers, &times);
            let prev = *trace.last().expect("trace starts non-empty");
            trace.push(e);
            if (e - prev).abs() <= tolerance_j {
                converged = true;
                break;
            }
        }
        for (p, &t) in powers.iter_mut().zip(&times) {
            if t <= 0.0 {
                *p = 0.0;
            }
        }
        let objective_j = baseline + self.equivalent_objective(&powers, &times);
        (
            PowerTimeAllocation {
                per_head_power_w: powers,
                per_head_time_s: times,
                objective_j,
                iterations,
                converged,
            },
            trace,
        )
    }

    fn average_caps(&self) -> Vec<f64> {
        (0..self.heads.len())
            .map(|i| {
                let r = self.rate(i, self.max_power_w);
                if self.heads[i].bits > RESIDUAL_EPS_BITS && r >= MIN_RATE_BPS {
                    self.heads[i].bits / r
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Heads with residual data cannot all finish within the CAD at maximum power.
    pub fn average_share_limited(&self) -> bool {
        self.average_caps().iter().sum::<f64>() > self.cad_s * (1.0 + BUDGET_SLACK)
    }

    /// Heads with data at maximum power; CAD shared equally, with unneeded
    /// time returned to the others.
    pub fn average_allocation(&self) -> PowerTimeAllocation {
        let caps = self.average_caps();
        let times = equal_fill(&caps, self.cad_s);
        let powers: Vec<f64> = caps
            .iter()
            .map(|&c| if c > 0.0 { self.max_power_w } else { 0.0 })
            .collect();
        PowerTimeAllocation {
            objective_j: self.baseline_j() + self.equivalent_objective(&powers, &times),
            per_head_power_w: powers,
            per_head_time_s: times,
            iterations: 0,
            converged: true,
        }
    }
}

pub fn acs_solve(
    ctx: PhaseContext<'_>,
    head_bits: &[f64],
    channel: &Channel,
    cad_s: f64,
    tolerance_j: f64,
    max_iterations: usize,
) -> Result<PowerTimeAllocation> {
    let inst = PtapInstance::build(ctx, head_bits, channel, cad_s)?;
    Ok(inst.acs_solve(tolerance_j, max_iterations).0)
}

/// E̅₂,ₓ for an ACS allocation.
pub fn expected_inter_energy(
    ctx: PhaseContext<'_>,
    allocation: &PowerTimeAllocation,
    baseline_j: f64,
    access_prob: f64,
) -> f64 {
    two_branch_expectation(
        access_prob,
        allocation.objective_j,
        baseline_j,
        ctx.params.sensing_cost_j(),
        2.0 * ctx.network.clusters().len() as f64 * ctx.params.switch_energy_j(),
    )
}

/// Every licensed slot evaluated for the head set, in slot order.
pub fn inter_channel_prospects(
    ctx: PhaseContext<'_>,
    head_bits: &[f64],
    slots: &[ChannelSlot<'_>],
) -> Result<Vec<ChannelProspect<PowerTimeAllocation>>> {
    let heads: Vec<_> = (0..ctx.network.clusters().len())
        .map(|ci| ctx.network.head(ci))
        .collect();
    let mut out = Vec::with_capacity(slots.len());
    for (i, slot) in slots.iter().enumerate() {
        let plan = plan_sensing(heads.iter().copied(), slot.channel, ctx.params)?;
        let inst = PtapInstance::build(ctx, head_bits, slot.channel, slot.cad_s)?;
        let (allocation, _) = inst.acs_solve(DEFAULT_TOLERANCE_J, DEFAULT_MAX_ITERATIONS);
        let baseline_j = inst.baseline_j();
        let expected = expected_inter_energy(ctx, &allocation, baseline_j, plan.access_prob);
        out.push(ChannelProspect {
            channel_id: slot.channel.id(),
            slot: i,
            cad_s: slot.cad_s,
            expected_energy_j: expected,
            baseline_j,
            allocation,
            accessible: expected < baseline_j,
            sensing_set: plan.sensing_set,
            fusion: plan.fusion,
            access_prob: plan.access_prob,
        });
    }
    Ok(out)
}

pub fn inter_accessible_channels(
    ctx: PhaseContext<'_>,
    head_bits: &[f64],
    slots: &[ChannelSlot<'_>],
) -> Result<Vec<ChannelProspect<PowerTimeAllocation>>> {
    let mut p: Vec<_> = inter_channel_prospects(ctx, head_bits, slots)?
        .into_iter()
        .filter(|p| p.accessible)
        .collect();
    sort_by_expected_energy(&mut p);
    Ok(p)
}

/// Algorithm state for the inter phase of one period.
pub struct InterProblem<'a> {
    ctx: PhaseContext<'a>,
    head_bits: Vec<f64>,
    slots: &'a [ChannelSlot<'a>],
}

impl<'a> InterProblem<'a> {
    pub fn new(ctx: PhaseContext<'a>, head_bits: Vec<f64>, slots: &'a [ChannelSlot<'a>]) -> Self {
        Self {
            ctx,
            head_bits,
            slots,
        }
    }

    pub fn head_bits(&self) -> &[f64] {
        &self.head_bits
    }
}

impl AccessProblem for InterProblem<'_> {
    fn candidates(&self, strategy: Strategy) -> Result<Vec<Candidate>> {
        let prospects = match strategy {
            Strategy::C0Only => return Ok(Vec::new()),
            Strategy::Proposed | Strategy::AverageAllocation => {
                inter_accessible_channels(self.ctx, &self.head_bits, self.slots)?
            }
            Strategy::Asa => {
                let mut p = inter_channel_prospects(self.ctx, &self.head_bits, self.slots)?;
                sort_by_bandwidth(&mut p, self.slots);
                p
            }
        };
        Ok(prospects.iter().map(ChannelProspect::candidate).collect())
    }

    fn slot(&self, index: usize) -> ChannelSlot<'_> {
        self.slots[index]
    }

    fn switching_cost_j(&self) -> f64 {
        2.0 * self.ctx.network.clusters().len() as f64 * self.ctx.params.switch_energy_j()
    }

    fn sensing_cost_j(&self) -> f64 {
        self.ctx.params.sensing_cost_j()
    }

    fn access(&mut self, candidate: &Candidate, strategy: Strategy) -> Result<AccessOutcome> {
        let slot = self.slots[candidate.slot];
        let inst = PtapInstance::build(self.ctx, &self.head_bits, slot.channel, slot.cad_s)?;
        let allocation = match strategy {
            Strategy::AverageAllocation => inst.average_allocation(),
            _ => {
                inst.acs_solve(DEFAULT_TOLERANCE_J, DEFAULT_MAX_ITERATIONS)
                    .0
            }
        };
        let mut out = AccessOutcome::default();
        for (i, left) in self.head_bits.iter_mut().enumerate() {
            let (p, t) = (
                allocation.per_head_power_w[i],
                allocation.per_head_time_s[i],
            );
            if t <= 0.0 {
                continue;
            }
            let bits = (inst.rate(i, p) * t).min(*left);
            *left = if *left - bits <= RESIDUAL_EPS_BITS {
                0.0
            } else {
                *left - bits
            };
            out.tx_j += transmission_energy(p, inst.heads[i].circuit_w, inst.efficiency, t);
            out.bits += bits;
            out.used_s += t;
        }
        let pending = self.head_bits.iter().sum::<f64>() > RESIDUAL_EPS_BITS;
        out.wants_more = pending
            && match strategy {
                Strategy::AverageAllocation => inst.average_share_limited(),
                _ => out.used_s >= slot.cad_s * (1.0 - BUDGET_SLACK),
            };
        Ok(out)
    }

    fn finish_on_c0<R: Rng>(
        &mut self,
        accounting: Accounting,
        rng: &mut R,
    ) -> Result<(f64, f64, f64)> {
        let net = self.ctx.network;
        let backlogs = self
            .head_bits
            .iter()
            .enumerate()
            .map(|(ci, &bits)| (net.head(ci), net.clusters()[ci].head_loss_c0(), bits));
        let out = finish_backlogs_on_c0(backlogs, self.ctx.c0, self.ctx.params, accounting, rng)?;
        self.head_bits.iter_mut().for_each(|b| *b = 0.0);
        Ok(out)
    }

    fn residual_bits(&self) -> f64 {
        self.head_bits.iter().sum()
    }
}

/// Run the inter phase for the given aggregated head backlogs.
pub fn run_inter_phase<G: PhaseRng>(
    ctx: PhaseContext<'_>,
    head_bits: &[f64],
    slots: &[ChannelSlot<'_>],
    options: PhaseOptions,
    rngs: &mut G,
) -> Result<PhaseOutcome> {
    let mut problem = InterProblem::new(ctx, head_bits.to_vec(), slots);
    run_phase(&mut problem, options, rngs)
}
