//! The sense-then-access control loop shared by the intra-cluster and
//! inter-cluster controllers.
//!
//! A phase repeatedly builds an ordered candidate list, senses candidates in
//! order until one is declared idle, accesses it for its CAD, and goes back to
//! the candidate list when the CAD expires with data pending. Whatever is
//! left when no candidate remains, or every candidate is sensed busy, goes
//! over C0.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::energy::c0_energy_split;
use crate::error::Result;
use crate::model::{
    Channel, ChannelId, CognitiveParams, EnergyLedger, Network, NodeId, SensorNode,
};
use crate::spectrum::{
    access_probability, fused_detection, sample_channel_state, sample_sensing_outcome,
    select_sensing_set, ChannelState, Fusion, Occupancy, SensingMode,
};

/// Residual data below this many bits counts as delivered.
pub const RESIDUAL_EPS_BITS: f64 = 1e-6;

/// Upper bound on CAD rounds per phase.
const MAX_ROUNDS: usize = 10_000;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Expected-accessible channels, optimal allocation.
    #[default]
    Proposed,
    /// Never leave the license-free channel.
    C0Only,
    /// Always sense and access, widest channel first, optimal allocation.
    Asa,
    /// Expected-accessible channels, CAD split equally (heads at maximum power).
    AverageAllocation,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Proposed,
        Strategy::C0Only,
        Strategy::Asa,
        Strategy::AverageAllocation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Proposed => "proposed",
            Strategy::C0Only => "c0_only",
            Strategy::Asa => "asa",
            Strategy::AverageAllocation => "average_allocation",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

/// How retransmissions over C0 are charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accounting {
    /// Deterministic 1/(1−λ) multiplier.
    #[default]
    Expected,
    /// Geometric number of attempts per backlog.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseOptions {
    pub strategy: Strategy,
    pub sensing: SensingMode,
    pub accounting: Accounting,
}

/// Random streams a phase draws from.
pub trait PhaseRng {
    type Stream: Rng;
    /// Stream for sensing outcomes of one licensed channel.
    fn sensing(&mut self, channel: ChannelId) -> &mut Self::Stream;
    /// Stream for sampled C0 retransmissions.
    fn retransmission(&mut self) -> &mut Self::Stream;
}

/// Read-only scenario pieces every controller needs.
#[derive(Debug, Clone, Copy)]
pub struct PhaseContext<'a> {
    pub network: &'a Network,
    pub c0: &'a Channel,
    pub params: &'a CognitiveParams,
}

/// A licensed channel as it stands in one period.
#[derive(Debug, Clone, Copy)]
pub struct ChannelSlot<'a> {
    pub channel: &'a Channel,
    pub cad_s: f64,
}

/// One channel to sense, in sensing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Index into the phase's channel slots.
    pub slot: usize,
    pub channel_id: ChannelId,
    pub fused_detection: f64,
    pub fused_false_alarm: f64,
}

/// Result of transmitting over an accessed channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AccessOutcome {
    pub tx_j: f64,
    pub bits: f64,
    /// Airtime actually used (TDMA, so the sum of allocated times).
    pub used_s: f64,
    /// The allocation wanted more airtime than the CAD offered.
    pub wants_more: bool,
}

/// Per-channel slice of a phase's energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranscriptEvent {
    /// `None` for C0.
    pub channel: Option<ChannelId>,
    pub ledger: EnergyLedger,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseOutcome {
    pub ledger: EnergyLedger,
    pub transcript: Vec<TranscriptEvent>,
    pub rounds: usize,
}

/// What a phase controller supplies to the shared loop.
pub trait AccessProblem {
    fn candidates(&self, strategy: Strategy) -> Result<Vec<Candidate>>;
    fn slot(&self, index: usize) -> ChannelSlot<'_>;
    /// Energy to switch every participating radio out and back.
    fn switching_cost_j(&self) -> f64;
    fn sensing_cost_j(&self) -> f64;
    /// Allocate the accessed channel and deduct what was sent.
    fn access(&mut self, candidate: &Candidate, strategy: Strategy) -> Result<AccessOutcome>;
    /// Send all residual data over C0: returns (tx, rx, bits).
    fn finish_on_c0<R: Rng>(
        &mut self,
        accounting: Accounting,
        rng: &mut R,
    ) -> Result<(f64, f64, f64)>;
    fn residual_bits(&self) -> f64;
}

pub fn run_phase<P: AccessProblem, G: PhaseRng>(
    problem: &mut P,
    options: PhaseOptions,
    rngs: &mut G,
) -> Result<PhaseOutcome> {
    let mut out = PhaseOutcome::default();
    while out.rounds < MAX_ROUNDS && problem.residual_bits() > RESIDUAL_EPS_BITS {
        let candidates = problem.candidates(options.strategy)?;
        let mut accessed = None;
        for cand in candidates {
            let mut event = EnergyLedger::new();
            event.charge_sensing(problem.sensing_cost_j());
            let slot = problem.slot(cand.slot);
            let rng = rngs.sensing(cand.channel_id);
            let state = sample_channel_state(slot.channel, rng)?;
            let outcome = sample_sensing_outcome(
                state.occupancy(),
                cand.fused_detection,
                cand.fused_false_alarm,
                options.sensing,
                rng,
            );
            if outcome.declared_state == Occupancy::Idle {
                accessed = Some((cand, state, event));
                break;
            }
            out.ledger.merge(&event);
            out.transcript.push(TranscriptEvent {
                channel: Some(cand.channel_id),
                ledger: event,
            });
        }
        let Some((cand, state, mut event)) = accessed else {
            break;
        };
        out.rounds += 1;
        event.charge_switching(problem.switching_cost_j());
        let access = problem.access(&cand, options.strategy)?;
        event.charge_tx(access.tx_j);
        event.deliver(access.bits);
        if options.sensing == SensingMode::Strict && access.used_s > 0.0 {
            let collided = match state {
                ChannelState::Busy => true,
                ChannelState::Idle { remaining_idle_s } => remaining_idle_s < access.used_s,
            };
            if collided {
                event.record_interference();
            }
        }
        out.ledger.merge(&event);
        out.transcript.push(TranscriptEvent {
            channel: Some(cand.channel_id),
            ledger: event,
        });
        if !access.wants_more || access.bits <= 0.0 {
            break;
        }
    }
    if problem.residual_bits() > 0.0 {
        let (tx, rx, bits) = problem.finish_on_c0(options.accounting, rngs.retransmission())?;
        let mut event = EnergyLedger::new();
        event.charge_tx(tx);
        event.charge_rx(rx);
        event.deliver(bits);
        out.ledger.merge(&event);
        out.transcript.push(TranscriptEvent {
            channel: None,
            ledger: event,
        });
    }
    Ok(out)
}

/// Cooperative sensing set of a channel and what it buys.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingPlan {
    pub sensing_set: Vec<NodeId>,
    pub fusion: Fusion,
    /// F_s = p_off·(1 − F_f).
    pub access_prob: f64,
}

/// Pick the sensing set among `nodes` and fuse its detection probabilities.
/// The false-alarm probability is the channel's configured fused value.
pub fn plan_sensing<'a>(
    nodes: impl IntoIterator<Item = &'a SensorNode> + Clone,
    channel: &Channel,
    params: &CognitiveParams,
) -> Result<SensingPlan> {
    let set = select_sensing_set(nodes.clone(), channel, params)?;
    let pds: Vec<f64> = set
        .iter()
        .map(|id| {
            nodes
                .clone()
                .into_iter()
                .find(|n| n.id() == *id)
                .map_or(0.0, |n| n.detection_prob(channel.id()))
        })
        .collect();
    Ok(SensingPlan {
        sensing_set: set,
        fusion: Fusion {
            detection: fused_detection(&pds),
            false_alarm: channel.pu()?.false_alarm_prob,
        },
        access_prob: access_probability(channel)?,
    })
}

/// F_s·(E* + sensing + switching) + (1 − F_s)·(E₀ + sensing).
pub fn two_branch_expectation(
    access_prob: f64,
    optimal_j: f64,
    baseline_j: f64,
    sensing_j: f64,
    switching_j: f64,
) -> f64 {
    access_prob * (optimal_j + sensing_j + switching_j)
        + (1.0 - access_prob) * (baseline_j + sensing_j)
}

/// Send every `(node, loss, bits)` backlog over C0: returns (tx, rx, bits).
pub(crate) fn finish_backlogs_on_c0<'a, R: Rng + ?Sized>(
    backlogs: impl IntoIterator<Item = (&'a SensorNode, f64, f64)>,
    c0: &Channel,
    params: &CognitiveParams,
    accounting: Accounting,
    rng: &mut R,
) -> Result<(f64, f64, f64)> {
    let (mut tx, mut rx, mut delivered) = (0.0, 0.0, 0.0);
    for (node, loss, bits) in backlogs {
        if bits <= 0.0 {
            continue;
        }
        let (t, r) = match accounting {
            Accounting::Expected => c0_energy_split(node, c0, params, bits, loss)?,
            Accounting::Sampled => {
                let attempts = sample_attempts(loss, rng);
                c0_energy_split(node, c0, params, bits * attempts, 0.0)?
            }
        };
        tx += t;
        rx += r;
        delivered += bits;
    }
    Ok((tx, rx, delivered))
}

/// Number of attempts until the first success, success probability 1 − λ.
pub(crate) fn sample_attempts<R: Rng + ?Sized>(loss: f64, rng: &mut R) -> f64 {
    if loss <= 0.0 {
        return 1.0;
    }
    let u: f64 = rng.random();
    // inverse CDF of the geometric distribution on {1, 2, ...}
    ((1.0 - u).ln() / loss.ln()).floor() + 1.0
}
