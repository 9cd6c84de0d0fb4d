//! Rate and energy formulas, and the license-free (C0) baseline energies of
//! both phases.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::{Channel, ChannelId, ClusterState, CognitiveParams, Network, SensorNode};

/// Links slower than this are zero-capacity.
pub const MIN_RATE_BPS: f64 = 1.0;

/// Shannon rate B·log₂(1 + h²P/σ²) in bit/s.
pub fn transmission_rate(bandwidth_hz: f64, gain: f64, power_w: f64, noise_power_w: f64) -> f64 {
    bandwidth_hz * (gain * power_w / noise_power_w).ln_1p() / std::f64::consts::LN_2
}

/// Rate of `node` towards its destination on `channel` at its fixed power.
pub fn node_rate(node: &SensorNode, channel: &Channel) -> f64 {
    node_rate_at(node, channel, node.tx_power_w())
}

pub fn node_rate_at(node: &SensorNode, channel: &Channel, power_w: f64) -> f64 {
    transmission_rate(
        channel.bandwidth_hz(),
        node.link_gain(channel.id()),
        power_w,
        channel.noise_power_w(),
    )
}

/// (P + α_c)·t / η.
pub fn transmission_energy(
    power_w: f64,
    circuit_power_w: f64,
    efficiency: f64,
    duration_s: f64,
) -> f64 {
    (power_w + circuit_power_w) * duration_s / efficiency
}

pub fn reception_energy(rx_energy_j_per_bit: f64, bits: f64) -> f64 {
    rx_energy_j_per_bit * bits
}

/// Joules per successfully delivered bit over C0, receiver energy included.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EnergyRate(f64);

impl EnergyRate {
    pub fn value(self) -> f64 {
        self.0
    }
}

fn energy_rate(node: &SensorNode, c0: &Channel, params: &CognitiveParams) -> Result<EnergyRate> {
    debug_assert_eq!(c0.id(), ChannelId::LICENSE_FREE);
    let rate = node_rate(node, c0);
    if !(rate >= MIN_RATE_BPS) {
        return Err(domain(format!(
            "{} has zero capacity on C0 ({rate} bit/s)",
            node.id()
        )));
    }
    let eta = params.amplifier_efficiency();
    Ok(EnergyRate(
        (eta * rate * params.rx_energy_j_per_bit() + node.tx_power_w() + node.circuit_power_w())
            / (eta * rate),
    ))
}

/// ER₁ of a cluster member towards its head.
pub fn intra_energy_rate(
    node: &SensorNode,
    c0: &Channel,
    params: &CognitiveParams,
) -> Result<EnergyRate> {
    energy_rate(node, c0, params)
}

/// ER₂ of a cluster head towards the sink at its fixed C0 power.
pub fn inter_energy_rate(
    head: &SensorNode,
    c0: &Channel,
    params: &CognitiveParams,
) -> Result<EnergyRate> {
    energy_rate(head, c0, params)
}

/// E₁,₀: energy for the cluster's residual data over C0, Σ A′·ER₁/(1−λ).
pub fn baseline_intra_energy(
    network: &Network,
    cluster: &ClusterState,
    c0: &Channel,
    params: &CognitiveParams,
) -> Result<f64> {
    let mut total = 0.0;
    for ((id, &loss), &bits) in cluster
        .member_ids()
        .iter()
        .zip(cluster.packet_loss_c0())
        .zip(cluster.residual_bits())
    {
        if bits == 0.0 {
            continue;
        }
        let er = intra_energy_rate(network.node(*id), c0, params)?;
        total += bits * er.value() / (1.0 - loss);
    }
    Ok(total)
}

/// Transmit/receive split of sending `bits` over C0 at `loss`, via the
/// transmission-time route: (tx, rx).
pub fn c0_energy_split(
    node: &SensorNode,
    c0: &Channel,
    params: &CognitiveParams,
    bits: f64,
    loss: f64,
) -> Result<(f64, f64)> {
    if bits == 0.0 {
        return Ok((0.0, 0.0));
    }
    if !(0.0..1.0).contains(&loss) {
        return Err(domain(format!("packet loss {loss} outside [0, 1)")));
    }
    let rate = node_rate(node, c0);
    if !(rate >= MIN_RATE_BPS) {
        return Err(domain(format!("{} has zero capacity on C0", node.id())));
    }
    let sent = bits / (1.0 - loss);
    let tx = transmission_energy(
        node.tx_power_w(),
        node.circuit_power_w(),
        params.amplifier_efficiency(),
        sent / rate,
    );
    let rx = reception_energy(params.rx_energy_j_per_bit(), sent);
    Ok((tx, rx))
}

/// E₂,₀ for explicit per-head backlogs (aligned with clusters).
pub fn inter_baseline_for(
    network: &Network,
    head_bits: &[f64],
    c0: &Channel,
    params: &CognitiveParams,
) -> Result<f64> {
    let mut total = 0.0;
    for (ci, (cluster, &bits)) in network.clusters().iter().zip(head_bits).enumerate() {
        if bits == 0.0 {
            continue;
        }
        let er = inter_energy_rate(network.head(ci), c0, params)?;
        total += bits * er.value() / (1.0 - cluster.head_loss_c0());
    }
    Ok(total)
}

/// E₂,₀ with A_i = ψ_i·Σ_j A_j.
pub fn baseline_inter_energy(
    network: &Network,
    c0: &Channel,
    params: &CognitiveParams,
) -> Result<f64> {
    inter_baseline_for(network, &network.aggregated_bits(), c0, params)
}
