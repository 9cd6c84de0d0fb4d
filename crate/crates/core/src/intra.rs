//! Intra-cluster control: the time-allocation LP (TAP), the expected energy
//! of accessing a licensed channel, accessible-channel ordering and the
//! cluster's sense/access controller.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{intra_energy_rate, node_rate, transmission_energy, MIN_RATE_BPS};
use crate::error::Result;
use crate::lp::{equal_fill, BudgetedBoxLp};
use crate::model::{Channel, ChannelId, ClusterState, NodeId};
use crate::phase::{
    finish_backlogs_on_c0, plan_sensing, run_phase, two_branch_expectation, AccessOutcome,
    AccessProblem, Accounting, Candidate, ChannelSlot, PhaseContext, PhaseOptions, PhaseOutcome,
    PhaseRng, Strategy, RESIDUAL_EPS_BITS,
};
use crate::spectrum::Fusion;

/// Relative slack for deciding that an allocation used the whole CAD.
const BUDGET_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAllocation {
    pub per_member_time_s: Vec<f64>,
    /// E*₁,ₓ: baseline plus the LP gain.
    pub objective_j: f64,
}

impl TimeAllocation {
    pub fn total_time_s(&self) -> f64 {
        self.per_member_time_s.iter().sum()
    }
}

/// One member as seen by TAP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapMember {
    pub power_w: f64,
    pub circuit_w: f64,
    /// Rate on the licensed channel; below [`MIN_RATE_BPS`] the member is excluded.
    pub rate_bps: f64,
    pub residual_bits: f64,
    /// ER₁ on C0.
    pub c0_energy_rate: f64,
    pub loss: f64,
}

impl TapMember {
    fn usable(&self) -> bool {
        self.rate_bps >= MIN_RATE_BPS
    }

    /// (P+α)/η − R·ER₁/(1−λ).
    pub fn coefficient(&self, efficiency: f64) -> f64 {
        let rate = if self.usable() { self.rate_bps } else { 0.0 };
        (self.power_w + self.circuit_w) / efficiency
            - rate * self.c0_energy_rate / (1.0 - self.loss)
    }

    pub fn cap_s(&self) -> f64 {
        if self.usable() {
            self.residual_bits / self.rate_bps
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TapInstance {
    pub members: Vec<TapMember>,
    pub efficiency: f64,
    pub cad_s: f64,
}

impl TapInstance {
    pub fn build(
        ctx: PhaseContext<'_>,
        cluster: &ClusterState,
        channel: &Channel,
        cad_s: f64,
    ) -> Result<Self> {
        let mut members = Vec::with_capacity(cluster.len());
        for ((id, &loss), &bits) in cluster
            .member_ids()
            .iter()
            .zip(cluster.packet_loss_c0())
            .zip(cluster.residual_bits())
        {
            let node = ctx.network.node(*id);
            members.push(TapMember {
                power_w: node.tx_power_w(),
                circuit_w: node.circuit_power_w(),
                rate_bps: node_rate(node, channel),
                residual_bits: bits,
                c0_energy_rate: intra_energy_rate(node, ctx.c0, ctx.params)?.value(),
                loss,
            });
        }
        Ok(Self {
            members,
            efficiency: ctx.params.amplifier_efficiency(),
            cad_s,
        })
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| m.coefficient(self.efficiency))
            .collect()
    }

    /// E₁,₀ over the residual backlog.
    pub fn baseline_j(&self) -> f64 {
        self.members
            .iter()
            .map(|m| m.residual_bits * m.c0_energy_rate / (1.0 - m.loss))
            .sum()
    }

    pub fn lp(&self) -> BudgetedBoxLp {
        BudgetedBoxLp {
            coefficients: self.coefficients(),
            caps: self.members.iter().map(TapMember::cap_s).collect(),
            budget: self.cad_s,
        }
    }

    /// E₁,ₓ(t) evaluated term by term: licensed transmit energy plus the
    /// remaining backlog over C0.
    pub fn energy_at(&self, times: &[f64]) -> f64 {
        self.members
            .iter()
            .zip(times)
            .map(|(m, &t)| {
                let rate = if m.usable() { m.rate_bps } else { 0.0 };
                let licensed = transmission_energy(m.power_w, m.circuit_w, self.efficiency, t);
                let left = m.residual_bits - rate * t;
                licensed + left * m.c0_energy_rate / (1.0 - m.loss)
            })
            .sum()
    }

    fn allocation(&self, lp: &BudgetedBoxLp, times: Vec<f64>) -> TimeAllocation {
        TimeAllocation {
            objective_j: self.baseline_j() + lp.objective(&times),
            per_member_time_s: times,
        }
    }

    pub fn solve_greedy(&self) -> TimeAllocation {
        let lp = self.lp();
        let t = lp.solve_greedy();
        self.allocation(&lp, t)
    }

    pub fn solve_lp(&self) -> Result<TimeAllocation> {
        let lp = self.lp();
        let t = lp.solve_simplex()?;
        Ok(self.allocation(&lp, t))
    }

    fn average_caps(&self) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| {
                if m.usable() && m.residual_bits > RESIDUAL_EPS_BITS {
                    m.cap_s()
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Members with residual data cannot all finish within the CAD.
    pub fn average_share_limited(&self) -> bool {
        self.average_caps().iter().sum::<f64>() > self.cad_s * (1.0 + BUDGET_SLACK)
    }

    /// CAD shared equally among members with residual data; time a member
    /// does not need goes back to the others.
    pub fn average_allocation(&self) -> TimeAllocation {
        let times = equal_fill(&self.average_caps(), self.cad_s);
        let lp = self.lp();
        self.allocation(&lp, times)
    }
}

pub fn tap_coefficients(
    ctx: PhaseContext<'_>,
    cluster: &ClusterState,
    channel: &Channel,
) -> Result<Vec<f64>> {
    Ok(TapInstance::build(ctx, cluster, channel, 0.0)?.coefficients())
}

pub fn tap_solve_greedy(
    ctx: PhaseContext<'_>,
    cluster: &ClusterState,
    channel: &Channel,
    cad_s: f64,
) -> Result<TimeAllocation> {
    Ok(TapInstance::build(ctx, cluster, channel, cad_s)?.solve_greedy())
}

pub fn tap_solve_lp(
    ctx: PhaseContext<'_>,
    cluster: &ClusterState,
    channel: &Channel,
    cad_s: f64,
) -> Result<TimeAllocation> {
    TapInstance::build(ctx, cluster, channel, cad_s)?.solve_lp()
}

/// E̅₁,ₓ for a TAP-optimal allocation.
pub fn expected_intra_energy(
    ctx: PhaseContext<'_>,
    cluster: &ClusterState,
    allocation: &TimeAllocation,
    baseline_j: f64,
    access_prob: f64,
) -> f64 {
    two_branch_expectation(
        access_prob,
        allocation.objective_j,
        baseline_j,
        ctx.params.sensing_cost_j(),
        2.0 * cluster.len() as f64 * ctx.params.switch_energy_j(),
    )
}

/// A licensed channel evaluated for one cluster (or for the head set).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProspect<A = TimeAllocation> {
    pub channel_id: ChannelId,
    /// Index into the period's channel slots.
    pub slot: usize,
    pub cad_s: f64,
    pub expected_energy_j: f64,
    pub baseline_j: f64,
    pub allocation: A,
    pub accessible: bool,
    pub sensing_set: Vec<NodeId>,
    pub fusion: Fusion,
    pub access_prob: f64,
}

impl<A> ChannelProspect<A> {
    pub fn candidate(&self) -> Candidate {
        Candidate {
            slot: self.slot,
            channel_id: self.channel_id,
            fused_detection: self.fusion.detection,
            fused_false_alarm: self.fusion.false_alarm,
        }
    }
}

/// Ascending expected energy, ties by channel id.
pub(crate) fn sort_by_expected_energy<A>(prospects: &mut [ChannelProspect<A>]) {
    prospects.sort_by(|a, b| {
        a.expected_energy_j
            .total_cmp(&b.expected_energy_j)
            .then(a.channel_id.cmp(&b.channel_id))
    });
}

/// Widest first, ties by channel id.
pub(crate) fn sort_by_bandwidth<A>(
    prospects: &mut [ChannelProspect<A>],
    slots: &[ChannelSlot<'_>],
) {
    prospects.sort_by(|a, b| {
        slots[b.slot]
            .channel
            .bandwidth_hz()
            .total_cmp(&slots[a.slot].channel.bandwidth_hz())
            .then(a.channel_id.cmp(&b.channel_id))
    });
}

/// Every licensed slot evaluated for `cluster`, in slot order.
pub fn channel_prospects(
    ctx: PhaseContext<'_>,
    cluster: &ClusterState,
    slots: &[ChannelSlot<'_>],
) -> Result<Vec<ChannelProspect>> {
    let members: Vec<_> = cluster
        .member_ids()
        .iter()
        .map(|id| ctx.network.node(*id))
        .collect();
    let mut out = Vec::with_capacity(slots.len());
    for (i, slot) in slots.iter().enumerate() {
        let plan = plan_sensing(members.iter().copied(), slot.channel, ctx.params)?;
        let tap = TapInstance::build(ctx, cluster, slot.channel, slot.cad_s)?;
        let allocation = tap.solve_greedy();
        let baseline_j = tap.baseline_j();
        let expected =
            expected_intra_energy(ctx, cluster, &allocation, baseline_j, plan.access_prob);
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

/// Expected accessible channels in sensing order.
pub fn accessible_channels(
    ctx: PhaseContext<'_>,
    cluster: &ClusterState,
    slots: &[ChannelSlot<'_>],
) -> Result<Vec<ChannelProspect>> {
    let mut p: Vec<_> = channel_prospects(ctx, cluster, slots)?
        .into_iter()
        .filter(|p| p.accessible)
        .collect();
    sort_by_expected_energy(&mut p);
    Ok(p)
}

/// Algorithm state for one cluster's intra phase.
pub struct IntraProblem<'a> {
    ctx: PhaseContext<'a>,
    cluster: ClusterState,
    slots: &'a [ChannelSlot<'a>],
}

impl<'a> IntraProblem<'a> {
    pub fn new(ctx: PhaseContext<'a>, cluster: ClusterState, slots: &'a [ChannelSlot<'a>]) -> Self {
        Self {
            ctx,
            cluster,
            slots,
        }
    }

    pub fn cluster(&self) -> &ClusterState {
        &self.cluster
    }
}

impl AccessProblem for IntraProblem<'_> {
    fn candidates(&self, strategy: Strategy) -> Result<Vec<Candidate>> {
        let prospects = match strategy {
            Strategy::C0Only => return Ok(Vec::new()),
            Strategy::Proposed | Strategy::AverageAllocation => {
                accessible_channels(self.ctx, &self.cluster, self.slots)?
            }
            Strategy::Asa => {
                let mut p = channel_prospects(self.ctx, &self.cluster, self.slots)?;
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
        2.0 * self.cluster.len() as f64 * self.ctx.params.switch_energy_j()
    }

    fn sensing_cost_j(&self) -> f64 {
        self.ctx.params.sensing_cost_j()
    }

    fn access(&mut self, candidate: &Candidate, strategy: Strategy) -> Result<AccessOutcome> {
        let slot = self.slots[candidate.slot];
        let tap = TapInstance::build(self.ctx, &self.cluster, slot.channel, slot.cad_s)?;
        let allocation = match strategy {
            Strategy::AverageAllocation => tap.average_allocation(),
            _ => tap.solve_greedy(),
        };
        let mut residual = self.cluster.residual_bits().to_vec();
        let mut out = AccessOutcome::default();
        for ((m, &t), left) in tap
            .members
            .iter()
            .zip(&allocation.per_member_time_s)
            .zip(&mut residual)
        {
            if t <= 0.0 {
                continue;
            }
            let bits = (m.rate_bps * t).min(*left);
            *left = if *left - bits <= RESIDUAL_EPS_BITS {
                0.0
            } else {
                *left - bits
            };
            out.tx_j += transmission_energy(m.power_w, m.circuit_w, tap.efficiency, t);
            out.bits += bits;
            out.used_s += t;
        }
        let pending = residual.iter().sum::<f64>() > RESIDUAL_EPS_BITS;
        out.wants_more = pending
            && match strategy {
                Strategy::AverageAllocation => tap.average_share_limited(),
                _ => out.used_s >= slot.cad_s * (1.0 - BUDGET_SLACK),
            };
        self.cluster.set_residual_bits(residual)?;
        Ok(out)
    }

    fn finish_on_c0<R: Rng>(
        &mut self,
        accounting: Accounting,
        rng: &mut R,
    ) -> Result<(f64, f64, f64)> {
        let backlogs = self
            .cluster
            .member_ids()
            .iter()
            .zip(self.cluster.packet_loss_c0())
            .zip(self.cluster.residual_bits())
            .map(|((id, &loss), &bits)| (self.ctx.network.node(*id), loss, bits));
        let out = finish_backlogs_on_c0(backlogs, self.ctx.c0, self.ctx.params, accounting, rng)?;
        self.cluster
            .set_residual_bits(vec![0.0; self.cluster.len()])?;
        Ok(out)
    }

    fn residual_bits(&self) -> f64 {
        self.cluster.total_residual_bits()
    }
}

/// Run one cluster's intra phase to completion.
pub fn run_intra_phase<G: PhaseRng>(
    ctx: PhaseContext<'_>,
    cluster: &ClusterState,
    slots: &[ChannelSlot<'_>],
    options: PhaseOptions,
    rngs: &mut G,
) -> Result<PhaseOutcome> {
    let mut problem = IntraProblem::new(ctx, cluster.clone(), slots);
    run_phase(&mut problem, options, rngs)
}
