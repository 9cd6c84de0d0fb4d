//! Period-driven simulation engine.

pub mod par;
pub mod rng;
pub mod sweep;
pub mod topology;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::config::{CadConfig, LossSpec, ScenarioConfig, BITS_PER_KB};
use crate::error::{domain, Error, Result};
use crate::inter::{run_inter_phase, PtapInstance, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE_J};
use crate::intra::{run_intra_phase, TapInstance};
use crate::model::{
    CadMode, Channel, ChannelId, ClusterState, CognitiveParams, EnergyLedger, Network, NodeId,
    PuStats, SensorNode,
};
use crate::phase::{ChannelSlot, PhaseContext, PhaseOptions, PhaseOutcome, Strategy};
use crate::spectrum::{channel_available_duration, idle_probability};
use rng::{stream, PhaseStreams, Purpose, INTER_OWNER};
use topology::{link_gain, sample_deployment, Deployment};

/// Lower truncation of sampled CADs.
pub const MIN_CAD_S: f64 = 1e-3;
/// Lower truncation of sampled licensed bandwidths.
pub const MIN_BANDWIDTH_HZ: f64 = 0.1e6;

fn truncated_normal<R: Rng + ?Sized>(mean: f64, var: f64, floor: f64, rng: &mut R) -> Result<f64> {
    let n = Normal::new(mean, var.max(0.0).sqrt()).map_err(|e| domain(e.to_string()))?;
    Ok(n.sample(rng).max(floor))
}

fn draw_loss<R: Rng + ?Sized>(spec: LossSpec, rng: &mut R) -> f64 {
    match spec {
        LossSpec::Fixed { value } => value,
        LossSpec::Uniform { low, high } => {
            let u: f64 = rng.random();
            low + (high - low) * u
        }
    }
}

/// Everything fixed for one (config, seed): placement, gains, channels.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub digest: String,
    pub seed: u64,
    pub params: CognitiveParams,
    pub deployment: Deployment,
    pub c0: Channel,
    pub channels: Vec<Channel>,
    network: Network,
}

impl Scenario {
    pub fn build(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        let report = crate::config::validate_scenario(config);
        if !report.is_empty() {
            return Err(Error::Config(report.to_string()));
        }
        let params = config.cognitive_params()?;
        let t = &config.topology;
        let ch = &config.channels;

        let deployment = sample_deployment(
            t,
            params.coop_set_size(),
            &mut stream(seed, Purpose::Deployment, 0, 0),
        )?;

        let c0 = Channel::license_free(
            ch.c0_bandwidth_mhz * 1e6,
            ch.c0_bandwidth_mhz * 1e6 * ch.noise_density_w_per_hz,
        )?;
        let mean_idle_s = ch.mean_idle_ms * 1e-3;
        let cad_mode = match ch.cad {
            CadConfig::Derived { exponent } => CadMode::Derived(exponent),
            CadConfig::FixedDistribution { mean_ms, var_ms2 } => CadMode::FixedDistribution {
                mean_s: mean_ms * 1e-3,
                var_s: var_ms2 * 1e-6,
            },
        };
        let pu = PuStats {
            mean_idle_s,
            mean_busy_s: mean_idle_s * ch.p_on / (1.0 - ch.p_on),
            false_alarm_prob: ch.false_alarm,
            cad_mode,
        };
        let mut channels = Vec::with_capacity(ch.count);
        for x in 1..=ch.count {
            let bw = match ch.fixed_bandwidth_mhz {
                Some(b) => b * 1e6,
                None => {
                    let mut rng = stream(seed, Purpose::Bandwidth, 0, x as u64);
                    truncated_normal(
                        ch.bandwidth_mhz.mean,
                        ch.bandwidth_mhz.var,
                        MIN_BANDWIDTH_HZ * 1e-6,
                        &mut rng,
                    )? * 1e6
                }
            };
            channels.push(Channel::licensed(
                ChannelId(x),
                bw,
                bw * ch.noise_density_w_per_hz,
                pu,
            )?);
        }

        let n = t.node_count;
        let mut gains: Vec<BTreeMap<ChannelId, f64>> = vec![BTreeMap::new(); n];
        for x in 0..=ch.count {
            let mut rng = stream(seed, Purpose::Gains, 0, x as u64);
            for (node, g) in gains.iter_mut().enumerate() {
                let d = deployment.link_distance(node);
                g.insert(
                    ChannelId(x),
                    link_gain(d, t.path_loss_exponent, t.fading, &mut rng),
                );
            }
        }
        let detection: BTreeMap<ChannelId, f64> = (1..=ch.count)
            .map(|x| (ChannelId(x), t.detection_prob))
            .collect();
        let mut nodes = Vec::with_capacity(n);
        for (i, g) in gains.into_iter().enumerate() {
            let power = if deployment.is_head(i) {
                t.head_power_mw
            } else {
                t.member_power_mw
            };
            nodes.push(SensorNode::new(
                NodeId(i),
                deployment.cluster_of[i],
                power * 1e-3,
                t.circuit_power_mw * 1e-3,
                0.0,
                detection.clone(),
                g,
            )?);
        }
        let clusters = (0..t.cluster_count)
            .map(|k| {
                let members: Vec<NodeId> = deployment.members(k).into_iter().map(NodeId).collect();
                let m = members.len();
                ClusterState::new(
                    NodeId(deployment.heads[k]),
                    members,
                    vec![0.0; m],
                    0.0,
                    t.aggregation_rate,
                    vec![0.0; m],
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let network = Network::new(nodes, clusters)?;

        Ok(Self {
            config: config.clone(),
            digest: config.digest(),
            seed,
            params,
            deployment,
            c0,
            channels,
            network,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    /// Per-period draws: backlogs, C0 losses and CADs.
    pub fn period_state(&self, period: usize) -> Result<PeriodState> {
        let t = &self.config.topology;
        let p = period as u64;
        let mut rng = stream(self.seed, Purpose::PeriodData, p, 0);
        let data: Vec<f64> = (0..t.node_count)
            .map(|i| {
                let a = truncated_normal(t.data_kb.mean, t.data_kb.var, 0.0, &mut rng)?;
                Ok(if self.deployment.is_head(i) {
                    0.0
                } else {
                    a * BITS_PER_KB * t.data_scale
                })
            })
            .collect::<Result<_>>()?;
        let mut rng = stream(self.seed, Purpose::PeriodLoss, p, 0);
        let mut member_loss = Vec::with_capacity(t.cluster_count);
        let mut head_loss = Vec::with_capacity(t.cluster_count);
        for c in self.network.clusters() {
            member_loss.push(
                (0..c.len())
                    .map(|_| draw_loss(self.config.loss.intra, &mut rng))
                    .collect(),
            );
            head_loss.push(draw_loss(self.config.loss.inter, &mut rng));
        }
        let mut cad_s = Vec::with_capacity(self.channels.len());
        for ch in &self.channels {
            let pu = ch.pu()?;
            let cad = match pu.cad_mode {
                CadMode::Derived(exponent) => channel_available_duration(
                    self.params.pu_protection(),
                    idle_probability(pu.mean_idle_s, pu.mean_busy_s)?,
                    pu.false_alarm_prob,
                    pu.mean_idle_s,
                    exponent,
                )?,
                CadMode::FixedDistribution { mean_s, var_s } => {
                    let mut rng = stream(self.seed, Purpose::PeriodCad, p, ch.id().0 as u64);
                    truncated_normal(mean_s, var_s, MIN_CAD_S, &mut rng)?
                }
            };
            cad_s.push(cad);
        }
        Ok(PeriodState {
            data,
            member_loss,
            head_loss,
            cad_s,
        })
    }

    /// Network with the period's backlogs and losses applied.
    pub fn network_for(&self, state: &PeriodState) -> Result<Network> {
        let mut net = self.network.clone();
        net.refresh_period(&state.data, &state.member_loss, &state.head_loss)?;
        Ok(net)
    }

    pub fn slots<'a>(&'a self, state: &PeriodState) -> Vec<ChannelSlot<'a>> {
        self.channels
            .iter()
            .zip(&state.cad_s)
            .map(|(channel, &cad_s)| ChannelSlot { channel, cad_s })
            .collect()
    }

    /// One transmission period: every cluster's intra phase, then the inter phase.
    pub fn run_period(&self, period: usize, options: PhaseOptions) -> Result<PeriodRecord> {
        let state = self.period_state(period)?;
        let net = self.network_for(&state)?;
        let slots = self.slots(&state);
        let ctx = PhaseContext {
            network: &net,
            c0: &self.c0,
            params: &self.params,
        };
        let mut intra = Vec::with_capacity(net.clusters().len());
        for (k, cluster) in net.clusters().iter().enumerate() {
            let mut rngs = PhaseStreams::new(self.seed, period as u64, k as u64);
            intra.push(run_intra_phase(ctx, cluster, &slots, options, &mut rngs)?);
        }
        let mut rngs = PhaseStreams::new(self.seed, period as u64, INTER_OWNER);
        let inter = run_inter_phase(ctx, &net.aggregated_bits(), &slots, options, &mut rngs)?;
        Ok(PeriodRecord {
            period,
            intra,
            inter,
        })
    }

    /// Intra energy of one access to the first licensed channel at `cad_s`,
    /// summed over clusters.
    pub fn intra_allocation_energy(
        &self,
        period: usize,
        strategy: Strategy,
        cad_s: Option<f64>,
    ) -> Result<f64> {
        let state = self.period_state(period)?;
        let net = self.network_for(&state)?;
        let ctx = PhaseContext {
            network: &net,
            c0: &self.c0,
            params: &self.params,
        };
        let channel = self.first_channel()?;
        let cad = cad_s.unwrap_or(state.cad_s[0]);
        let mut total = 0.0;
        for cluster in net.clusters() {
            let tap = TapInstance::build(ctx, cluster, channel, cad)?;
            total += match strategy {
                Strategy::AverageAllocation => tap.average_allocation().objective_j,
                Strategy::C0Only => tap.baseline_j(),
                _ => tap.solve_greedy().objective_j,
            };
        }
        Ok(total)
    }

    fn first_channel(&self) -> Result<&Channel> {
        self.channels
            .first()
            .ok_or_else(|| domain("allocation metrics need at least one licensed channel"))
    }

    fn ptap(&self, period: usize, cad_s: Option<f64>) -> Result<PtapInstance> {
        let state = self.period_state(period)?;
        let net = self.network_for(&state)?;
        let ctx = PhaseContext {
            network: &net,
            c0: &self.c0,
            params: &self.params,
        };
        let cad = cad_s.unwrap_or(state.cad_s[0]);
        PtapInstance::build(ctx, &net.aggregated_bits(), self.first_channel()?, cad)
    }

    /// Inter energy of one access to the first licensed channel at `cad_s`.
    pub fn inter_allocation_energy(
        &self,
        period: usize,
        strategy: Strategy,
        cad_s: Option<f64>,
    ) -> Result<f64> {
        let inst = self.ptap(period, cad_s)?;
        Ok(match strategy {
            Strategy::AverageAllocation => inst.average_allocation().objective_j,
            Strategy::C0Only => inst.baseline_j(),
            _ => {
                inst.acs_solve(DEFAULT_TOLERANCE_J, DEFAULT_MAX_ITERATIONS)
                    .0
                    .objective_j
            }
        })
    }

    /// ACS objective trace on the first licensed channel.
    pub fn acs_trace(&self, period: usize) -> Result<Vec<f64>> {
        Ok(self
            .ptap(period, None)?
            .acs_solve(DEFAULT_TOLERANCE_J, DEFAULT_MAX_ITERATIONS)
            .1)
    }
}

/// Draws that change every period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodState {
    pub data: Vec<f64>,
    pub member_loss: Vec<Vec<f64>>,
    pub head_loss: Vec<f64>,
    pub cad_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord {
    pub period: usize,
    /// One outcome per cluster.
    pub intra: Vec<PhaseOutcome>,
    pub inter: PhaseOutcome,
}

impl PeriodRecord {
    pub fn intra_ledger(&self) -> EnergyLedger {
        self.intra.iter().map(|o| o.ledger).sum()
    }

    pub fn total_ledger(&self) -> EnergyLedger {
        let mut l = self.intra_ledger();
        l.merge(&self.inter.ledger);
        l
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub scenario_digest: String,
    pub seed: u64,
    pub strategy: Strategy,
    pub periods: Vec<PeriodRecord>,
    pub intra: EnergyLedger,
    pub inter: EnergyLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSummary {
    pub strategy: Strategy,
    pub periods: usize,
    pub intra_j: f64,
    pub inter_j: f64,
    pub total_j: f64,
    pub bits_delivered: f64,
    pub accesses: u64,
    pub interference_events: u64,
}

impl SimulationReport {
    pub fn total(&self) -> EnergyLedger {
        let mut l = self.intra;
        l.merge(&self.inter);
        l
    }

    pub fn mean_intra_j(&self) -> f64 {
        per_period(self.intra.total(), self.periods.len())
    }

    pub fn mean_inter_j(&self) -> f64 {
        per_period(self.inter.total(), self.periods.len())
    }

    pub fn mean_total_j(&self) -> f64 {
        per_period(self.total().total(), self.periods.len())
    }

    /// Interference events per licensed-channel access.
    pub fn interference_rate(&self) -> f64 {
        let t = self.total();
        if t.accesses() == 0 {
            0.0
        } else {
            t.interference_events() as f64 / t.accesses() as f64
        }
    }

    pub fn summary(&self) -> ReportSummary {
        let t = self.total();
        ReportSummary {
            strategy: self.strategy,
            periods: self.periods.len(),
            intra_j: self.intra.total(),
            inter_j: self.inter.total(),
            total_j: t.total(),
            bits_delivered: t.bits_delivered(),
            accesses: t.accesses(),
            interference_events: t.interference_events(),
        }
    }
}

fn per_period(total: f64, periods: usize) -> f64 {
    if periods == 0 {
        0.0
    } else {
        total / periods as f64
    }
}

/// Run `config.periods` periods of one strategy.
pub fn run_scenario(
    config: &ScenarioConfig,
    seed: u64,
    strategy: Strategy,
) -> Result<SimulationReport> {
    let scenario = Scenario::build(config, seed)?;
    run_built(&scenario, strategy)
}

pub fn run_built(scenario: &Scenario, strategy: Strategy) -> Result<SimulationReport> {
    let options = PhaseOptions {
        strategy,
        sensing: scenario.config.sensing,
        accounting: scenario.config.accounting,
    };
    let mut periods = Vec::with_capacity(scenario.config.periods);
    let mut intra = EnergyLedger::new();
    let mut inter = EnergyLedger::new();
    for p in 0..scenario.config.periods {
        let rec = scenario.run_period(p, options)?;
        intra.merge(&rec.intra_ledger());
        inter.merge(&rec.inter.ledger);
        periods.push(rec);
    }
    Ok(SimulationReport {
        scenario_digest: scenario.digest.clone(),
        seed: scenario.seed,
        strategy,
        periods,
        intra,
        inter,
    })
}
