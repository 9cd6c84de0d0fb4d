//! Domain types shared by every other module.
//!
//! All quantities use one unit system: bits, joules, watts, seconds, hertz.
//! Values are validated on construction and are immutable afterwards, except
//! for the per-period fields of [`ClusterState`] and [`SensorNode`] which are
//! replaced through validating setters.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelId(pub usize);

impl ChannelId {
    /// The license-free default channel C0.
    pub const LICENSE_FREE: ChannelId = ChannelId(0);

    pub fn is_license_free(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// How the exponential in the CAD expression is parameterised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CadExponent {
    /// `exp(-T / mean_idle)`: the idle duration is exponential with the given mean.
    #[default]
    MeanInverse,
    /// `exp(-mean_idle * T)`: the mean idle time used literally as a rate.
    RawVx,
}

/// Source of the channel available duration of a licensed channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CadMode {
    /// Computed from the protection requirement and the PU idle statistics.
    Derived(CadExponent),
    /// Drawn per period from a normal distribution (mean and variance in s, s²).
    FixedDistribution { mean_s: f64, var_s: f64 },
}

/// Primary-user statistics carried by licensed channels only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PuStats {
    pub mean_idle_s: f64,
    pub mean_busy_s: f64,
    /// Fused cooperative false-alarm probability F_f.
    pub false_alarm_prob: f64,
    pub cad_mode: CadMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    id: ChannelId,
    bandwidth_hz: f64,
    noise_power_w: f64,
    pu: Option<PuStats>,
}

fn positive(field: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(field: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be finite and >= 0, got {v}")))
    }
}

fn loss_rate(field: &'static str, v: f64) -> Result<f64> {
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(invalid(
            field,
            format!("packet loss must lie in [0, 1), got {v}; 1/(1-λ) diverges at 1"),
        ))
    }
}

impl Channel {
    pub fn license_free(bandwidth_hz: f64, noise_power_w: f64) -> Result<Self> {
        Ok(Self {
            id: ChannelId::LICENSE_FREE,
            bandwidth_hz: positive("bandwidth_hz", bandwidth_hz)?,
            noise_power_w: positive("noise_power_w", noise_power_w)?,
            pu: None,
        })
    }

    pub fn licensed(
        id: ChannelId,
        bandwidth_hz: f64,
        noise_power_w: f64,
        pu: PuStats,
    ) -> Result<Self> {
        if id.is_license_free() {
            return Err(invalid("id", "channel 0 is the license-free channel"));
        }
        positive("mean_idle_s", pu.mean_idle_s)?;
        positive("mean_busy_s", pu.mean_busy_s)?;
        if !(0.0..1.0).contains(&pu.false_alarm_prob) {
            return Err(invalid(
                "false_alarm_prob",
                format!("must lie in [0, 1), got {}", pu.false_alarm_prob),
            ));
        }
        if let CadMode::FixedDistribution { mean_s, var_s } = pu.cad_mode {
            positive("cad mean_s", mean_s)?;
            non_negative("cad var_s", var_s)?;
        }
        Ok(Self {
            id,
            bandwidth_hz: positive("bandwidth_hz", bandwidth_hz)?,
            noise_power_w: positive("noise_power_w", noise_power_w)?,
            pu: Some(pu),
        })
    }

    pub fn id(&self) -> ChannelId {
        self.id
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn noise_power_w(&self) -> f64 {
        self.noise_power_w
    }

    pub fn is_licensed(&self) -> bool {
        self.pu.is_some()
    }

    /// PU statistics; C0 has none.
    pub fn pu(&self) -> Result<&PuStats> {
        self.pu
            .as_ref()
            .ok_or_else(|| Error::Domain("the license-free channel has no PU statistics".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorNode {
    id: NodeId,
    cluster_id: usize,
    tx_power_w: f64,
    circuit_power_w: f64,
    data_bits: f64,
    detection_prob: BTreeMap<ChannelId, f64>,
    /// Average channel gain h² towards this node's destination (its head, or
    /// the sink for heads), per channel.
    link_gain: BTreeMap<ChannelId, f64>,
}

impl SensorNode {
    pub fn new(
        id: NodeId,
        cluster_id: usize,
        tx_power_w: f64,
        circuit_power_w: f64,
        data_bits: f64,
        detection_prob: BTreeMap<ChannelId, f64>,
        link_gain: BTreeMap<ChannelId, f64>,
    ) -> Result<Self> {
        positive("tx_power_w", tx_power_w)?;
        non_negative("circuit_power_w", circuit_power_w)?;
        non_negative("data_bits", data_bits)?;
        for (&ch, &p) in &detection_prob {
            if !(p > 0.0 && p <= 1.0) {
                return Err(invalid(
                    "detection_prob",
                    format!("{ch} entry must lie in (0, 1], got {p}"),
                ));
            }
        }
        for &g in link_gain.values() {
            non_negative("link_gain", g)?;
        }
        Ok(Self {
            id,
            cluster_id,
            tx_power_w,
            circuit_power_w,
            data_bits,
            detection_prob,
            link_gain,
        })
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn cluster_id(&self) -> usize {
        self.cluster_id
    }

    pub fn tx_power_w(&self) -> f64 {
        self.tx_power_w
    }

    pub fn circuit_power_w(&self) -> f64 {
        self.circuit_power_w
    }

    pub fn data_bits(&self) -> f64 {
        self.data_bits
    }

    pub fn set_data_bits(&mut self, bits: f64) -> Result<()> {
        self.data_bits = non_negative("data_bits", bits)?;
        Ok(())
    }

    /// Per-node detection probability on `channel`; 0 when unknown.
    pub fn detection_prob(&self, channel: ChannelId) -> f64 {
        self.detection_prob.get(&channel).copied().unwrap_or(0.0)
    }

    /// Average gain towards the destination on `channel`; 0 when unknown.
    pub fn link_gain(&self, channel: ChannelId) -> f64 {
        self.link_gain.get(&channel).copied().unwrap_or(0.0)
    }
}

/// One cluster: a head plus members. Per-member collections are aligned with
/// `member_ids` by position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    head_id: NodeId,
    member_ids: Vec<NodeId>,
    packet_loss_c0: Vec<f64>,
    head_loss_c0: f64,
    aggregation_rate: f64,
    residual_bits: Vec<f64>,
}

impl ClusterState {
    pub fn new(
        head_id: NodeId,
        member_ids: Vec<NodeId>,
        packet_loss_c0: Vec<f64>,
        head_loss_c0: f64,
        aggregation_rate: f64,
        residual_bits: Vec<f64>,
    ) -> Result<Self> {
        if member_ids.contains(&head_id) {
            return Err(invalid(
                "member_ids",
                format!("head {head_id} listed as a member"),
            ));
        }
        if packet_loss_c0.len() != member_ids.len() || residual_bits.len() != member_ids.len() {
            return Err(invalid(
                "member_ids",
                "per-member collections must align with members",
            ));
        }
        for &l in &packet_loss_c0 {
            loss_rate("packet_loss_c0", l)?;
        }
        loss_rate("head_loss_c0", head_loss_c0)?;
        if !(aggregation_rate > 0.0 && aggregation_rate <= 1.0) {
            return Err(invalid(
                "aggregation_rate",
                format!("must lie in (0, 1], got {aggregation_rate}"),
            ));
        }
        for &r in &residual_bits {
            non_negative("residual_bits", r)?;
        }
        Ok(Self {
            head_id,
            member_ids,
            packet_loss_c0,
            head_loss_c0,
            aggregation_rate,
            residual_bits,
        })
    }

    pub fn head_id(&self) -> NodeId {
        self.head_id
    }

    pub fn member_ids(&self) -> &[NodeId] {
        &self.member_ids
    }

    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }

    pub fn packet_loss_c0(&self) -> &[f64] {
        &self.packet_loss_c0
    }

    pub fn head_loss_c0(&self) -> f64 {
        self.head_loss_c0
    }

    pub fn aggregation_rate(&self) -> f64 {
        self.aggregation_rate
    }

    pub fn residual_bits(&self) -> &[f64] {
        &self.residual_bits
    }

    pub fn total_residual_bits(&self) -> f64 {
        self.residual_bits.iter().sum()
    }

    pub fn set_packet_loss(&mut self, member_loss: Vec<f64>, head_loss: f64) -> Result<()> {
        if member_loss.len() != self.member_ids.len() {
            return Err(invalid("packet_loss_c0", "must align with members"));
        }
        for &l in &member_loss {
            loss_rate("packet_loss_c0", l)?;
        }
        self.head_loss_c0 = loss_rate("head_loss_c0", head_loss)?;
        self.packet_loss_c0 = member_loss;
        Ok(())
    }

    pub fn set_residual_bits(&mut self, residual: Vec<f64>) -> Result<()> {
        if residual.len() != self.member_ids.len() {
            return Err(invalid("residual_bits", "must align with members"));
        }
        for &r in &residual {
            non_negative("residual_bits", r)?;
        }
        self.residual_bits = residual;
        Ok(())
    }
}

/// Nodes plus their clustering. Node ids equal their index in `nodes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    nodes: Vec<SensorNode>,
    clusters: Vec<ClusterState>,
}

impl Network {
    pub fn new(nodes: Vec<SensorNode>, clusters: Vec<ClusterState>) -> Result<Self> {
        for (idx, n) in nodes.iter().enumerate() {
            if n.id.0 != idx {
                return Err(invalid(
                    "nodes",
                    format!("node at index {idx} has id {}", n.id),
                ));
            }
        }
        let net = Self { nodes, clusters };
        for (ci, c) in net.clusters.iter().enumerate() {
            let head = net
                .nodes
                .get(c.head_id.0)
                .ok_or_else(|| invalid("head_id", format!("unknown node {}", c.head_id)))?;
            if head.cluster_id != ci {
                return Err(invalid(
                    "head_id",
                    format!("head {} not in cluster {ci}", c.head_id),
                ));
            }
            for (k, m) in c.member_ids.iter().enumerate() {
                let node = net
                    .nodes
                    .get(m.0)
                    .ok_or_else(|| invalid("member_ids", format!("unknown node {m}")))?;
                if node.cluster_id != ci {
                    return Err(invalid("member_ids", format!("{m} not in cluster {ci}")));
                }
                if c.residual_bits[k] > node.data_bits * (1.0 + 1e-12) {
                    return Err(invalid(
                        "residual_bits",
                        format!("{m} residual exceeds its data"),
                    ));
                }
            }
        }
        Ok(net)
    }

    pub fn nodes(&self) -> &[SensorNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &SensorNode {
        &self.nodes[id.0]
    }

    pub fn clusters(&self) -> &[ClusterState] {
        &self.clusters
    }

    pub fn head(&self, cluster: usize) -> &SensorNode {
        &self.nodes[self.clusters[cluster].head_id.0]
    }

    /// Per-period update: new backlogs and loss rates. Residuals reset to the
    /// full backlog.
    pub fn refresh_period(
        &mut self,
        data_bits: &[f64],
        member_loss: &[Vec<f64>],
        head_loss: &[f64],
    ) -> Result<()> {
        if data_bits.len() != self.nodes.len()
            || member_loss.len() != self.clusters.len()
            || head_loss.len() != self.clusters.len()
        {
            return Err(invalid("period refresh", "dimension mismatch"));
        }
        for (n, &a) in self.nodes.iter_mut().zip(data_bits) {
            n.set_data_bits(a)?;
        }
        for (ci, c) in self.clusters.iter_mut().enumerate() {
            c.set_packet_loss(member_loss[ci].clone(), head_loss[ci])?;
            let residual = c
                .member_ids
                .iter()
                .map(|m| self.nodes[m.0].data_bits)
                .collect();
            c.set_residual_bits(residual)?;
        }
        Ok(())
    }

    /// Aggregated inter-cluster data A_i = ψ_i · Σ_j A_j for every cluster.
    pub fn aggregated_bits(&self) -> Vec<f64> {
        self.clusters
            .iter()
            .map(|c| {
                c.aggregation_rate
                    * c.member_ids
                        .iter()
                        .map(|m| self.nodes[m.0].data_bits)
                        .sum::<f64>()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CognitiveParams {
    sense_energy_j: f64,
    switch_energy_j: f64,
    rx_energy_j_per_bit: f64,
    amplifier_efficiency: f64,
    pu_protection: f64,
    interference_threshold: f64,
    coop_set_size: usize,
    max_power_w: f64,
}

impl CognitiveParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sense_energy_j: f64,
        switch_energy_j: f64,
        rx_energy_j_per_bit: f64,
        amplifier_efficiency: f64,
        pu_protection: f64,
        interference_threshold: f64,
        coop_set_size: usize,
        max_power_w: f64,
    ) -> Result<Self> {
        positive("sense_energy_j", sense_energy_j)?;
        positive("switch_energy_j", switch_energy_j)?;
        positive("rx_energy_j_per_bit", rx_energy_j_per_bit)?;
        if !(amplifier_efficiency > 0.0 && amplifier_efficiency <= 1.0) {
            return Err(invalid(
                "amplifier_efficiency",
                format!("must lie in (0, 1], got {amplifier_efficiency}"),
            ));
        }
        for (field, p) in [
            ("pu_protection", pu_protection),
            ("interference_threshold", interference_threshold),
        ] {
            if !(p > 0.0 && p < 1.0) {
                return Err(invalid(field, format!("must lie in (0, 1), got {p}")));
            }
        }
        if coop_set_size == 0 {
            return Err(invalid(
                "coop_set_size",
                "at least one sensing node is required",
            ));
        }
        positive("max_power_w", max_power_w)?;
        Ok(Self {
            sense_energy_j,
            switch_energy_j,
            rx_energy_j_per_bit,
            amplifier_efficiency,
            pu_protection,
            interference_threshold,
            coop_set_size,
            max_power_w,
        })
    }

    pub fn sense_energy_j(&self) -> f64 {
        self.sense_energy_j
    }

    pub fn switch_energy_j(&self) -> f64 {
        self.switch_energy_j
    }

    pub fn rx_energy_j_per_bit(&self) -> f64 {
        self.rx_energy_j_per_bit
    }

    pub fn amplifier_efficiency(&self) -> f64 {
        self.amplifier_efficiency
    }

    pub fn pu_protection(&self) -> f64 {
        self.pu_protection
    }

    pub fn interference_threshold(&self) -> f64 {
        self.interference_threshold
    }

    pub fn coop_set_size(&self) -> usize {
        self.coop_set_size
    }

    pub fn max_power_w(&self) -> f64 {
        self.max_power_w
    }

    /// Copy with a different power ceiling.
    pub fn with_max_power(self, max_power_w: f64) -> Result<Self> {
        positive("max_power_w", max_power_w)?;
        Ok(Self {
            max_power_w,
            ..self
        })
    }

    /// Energy to sense one channel with the cooperative set, |y|·e_s.
    pub fn sensing_cost_j(&self) -> f64 {
        self.coop_set_size as f64 * self.sense_energy_j
    }
}

/// Energy accumulated by one phase of one period (or any sum of them).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    sensing_j: f64,
    switching_j: f64,
    tx_j: f64,
    rx_j: f64,
    bits_delivered: f64,
    interference_events: u64,
    channels_sensed: u64,
    accesses: u64,
}

fn charge(slot: &mut f64, v: f64) {
    assert!(
        v.is_finite() && v >= 0.0,
        "ledger charge must be finite and >= 0, got {v}"
    );
    *slot += v;
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sensing_j(&self) -> f64 {
        self.sensing_j
    }

    pub fn switching_j(&self) -> f64 {
        self.switching_j
    }

    pub fn tx_j(&self) -> f64 {
        self.tx_j
    }

    pub fn rx_j(&self) -> f64 {
        self.rx_j
    }

    pub fn bits_delivered(&self) -> f64 {
        self.bits_delivered
    }

    pub fn interference_events(&self) -> u64 {
        self.interference_events
    }

    pub fn channels_sensed(&self) -> u64 {
        self.channels_sensed
    }

    pub fn accesses(&self) -> u64 {
        self.accesses
    }

    pub fn total(&self) -> f64 {
        self.sensing_j + self.switching_j + self.tx_j + self.rx_j
    }

    pub fn charge_sensing(&mut self, j: f64) {
        charge(&mut self.sensing_j, j);
        self.channels_sensed += 1;
    }

    pub fn charge_switching(&mut self, j: f64) {
        charge(&mut self.switching_j, j);
        self.accesses += 1;
    }

    pub fn charge_tx(&mut self, j: f64) {
        charge(&mut self.tx_j, j);
    }

    pub fn charge_rx(&mut self, j: f64) {
        charge(&mut self.rx_j, j);
    }

    pub fn deliver(&mut self, bits: f64) {
        charge(&mut self.bits_delivered, bits);
    }

    pub fn record_interference(&mut self) {
        self.interference_events += 1;
    }

    pub fn merge(&mut self, other: &EnergyLedger) {
        self.sensing_j += other.sensing_j;
        self.switching_j += other.switching_j;
        self.tx_j += other.tx_j;
        self.rx_j += other.rx_j;
        self.bits_delivered += other.bits_delivered;
        self.interference_events += other.interference_events;
        self.channels_sensed += other.channels_sensed;
        self.accesses += other.accesses;
    }
}

impl std::iter::Sum for EnergyLedger {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |mut acc, l| {
            acc.merge(&l);
            acc
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> CognitiveParams {
        CognitiveParams::new(1.31e-4, 1e-5, 5e-9, 0.9, 0.05, 0.05, 3, 0.2).unwrap()
    }

    #[test]
    fn c0_has_no_pu_stats() {
        let c0 = Channel::license_free(1e6, 1e-8).unwrap();
        assert!(!c0.is_licensed());
        assert!(c0.pu().is_err());
    }

    #[test]
    fn licensed_channel_rejects_id_zero() {
        let pu = PuStats {
            mean_idle_s: 1.0,
            mean_busy_s: 1.0,
            false_alarm_prob: 0.05,
            cad_mode: CadMode::Derived(CadExponent::MeanInverse),
        };
        assert!(Channel::licensed(ChannelId(0), 2e6, 2e-8, pu).is_err());
        assert!(Channel::licensed(ChannelId(1), 2e6, 2e-8, pu).is_ok());
        let bad = PuStats {
            false_alarm_prob: 1.0,
            ..pu
        };
        assert!(Channel::licensed(ChannelId(1), 2e6, 2e-8, bad).is_err());
    }

    #[test]
    fn cluster_rejects_unit_loss_and_head_as_member() {
        let ok = ClusterState::new(NodeId(0), vec![NodeId(1)], vec![0.2], 0.1, 0.7, vec![1.0]);
        assert!(ok.is_ok());
        let unit = ClusterState::new(NodeId(0), vec![NodeId(1)], vec![1.0], 0.1, 0.7, vec![1.0]);
        assert!(unit.is_err());
        let head = ClusterState::new(NodeId(0), vec![NodeId(0)], vec![0.0], 0.1, 0.7, vec![1.0]);
        assert!(head.is_err());
    }

    #[test]
    fn coop_set_size_zero_rejected() {
        assert!(CognitiveParams::new(1.31e-4, 1e-5, 5e-9, 0.9, 0.05, 0.05, 0, 0.2).is_err());
        assert_eq!(params().sensing_cost_j(), 3.0 * 1.31e-4);
    }

    #[test]
    fn ledger_total_is_sum_of_categories() {
        let mut l = EnergyLedger::new();
        l.charge_sensing(1.0);
        l.charge_switching(2.0);
        l.charge_tx(3.0);
        l.charge_rx(4.0);
        assert_eq!(l.total(), 10.0);
        let sum: EnergyLedger = [l, l].into_iter().sum();
        assert_eq!(sum.total(), 20.0);
        assert_eq!(sum.channels_sensed(), 2);
    }

    #[test]
    #[should_panic]
    fn ledger_rejects_negative_charge() {
        EnergyLedger::new().charge_tx(-1.0);
    }

    #[test]
    fn network_checks_residual_against_data() {
        let node = |id: usize, cluster: usize, data: f64| {
            SensorNode::new(
                NodeId(id),
                cluster,
                0.02,
                0.005,
                data,
                BTreeMap::new(),
                BTreeMap::new(),
            )
            .unwrap()
        };
        let nodes = vec![node(0, 0, 0.0), node(1, 0, 100.0)];
        let good = ClusterState::new(NodeId(0), vec![NodeId(1)], vec![0.0], 0.0, 1.0, vec![100.0]);
        assert!(Network::new(nodes.clone(), vec![good.unwrap()]).is_ok());
        let bad = ClusterState::new(NodeId(0), vec![NodeId(1)], vec![0.0], 0.0, 1.0, vec![101.0]);
        assert!(Network::new(nodes, vec![bad.unwrap()]).is_err());
    }
}
