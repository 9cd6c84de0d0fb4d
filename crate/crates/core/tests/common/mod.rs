//! Synthetic networks with hand-picked link qualities.
#![allow(dead_code)]

use std::collections::BTreeMap;

use crsn::model::{
    CadMode, Channel, ChannelId, ClusterState, CognitiveParams, Network, NodeId, PuStats,
    SensorNode,
};
use crsn::phase::{ChannelSlot, PhaseContext};

pub const NOISE_DENSITY: f64 = 1e-14;

pub fn table2_params() -> CognitiveParams {
    CognitiveParams::new(1.31e-4, 1e-5, 5e-9, 0.9, 0.05, 0.05, 3, 0.2).unwrap()
}

pub fn c0() -> Channel {
    Channel::license_free(1e6, 1e6 * NOISE_DENSITY).unwrap()
}

/// Licensed channel `id` with the given bandwidth and PU means.
pub fn licensed(
    id: usize,
    bandwidth_hz: f64,
    mean_idle_s: f64,
    mean_busy_s: f64,
    false_alarm: f64,
) -> Channel {
    Channel::licensed(
        ChannelId(id),
        bandwidth_hz,
        bandwidth_hz * NOISE_DENSITY,
        PuStats {
            mean_idle_s,
            mean_busy_s,
            false_alarm_prob: false_alarm,
            cad_mode: CadMode::FixedDistribution {
                mean_s: 0.1,
                var_s: 0.0,
            },
        },
    )
    .unwrap()
}

/// Table-2 style channel: p_on = 0.6, mean idle 0.7 s, F_f = 0.05.
pub fn table2_channel(id: usize, bandwidth_hz: f64) -> Channel {
    licensed(id, bandwidth_hz, 0.7, 1.05, 0.05)
}

pub struct Fixture {
    pub net: Network,
    pub c0: Channel,
    pub channels: Vec<Channel>,
    pub params: CognitiveParams,
}

impl Fixture {
    pub fn ctx(&self) -> PhaseContext<'_> {
        PhaseContext {
            network: &self.net,
            c0: &self.c0,
            params: &self.params,
        }
    }

    pub fn slots(&self, cad_s: f64) -> Vec<ChannelSlot<'_>> {
        self.channels
            .iter()
            .map(|channel| ChannelSlot { channel, cad_s })
            .collect()
    }
}

/// `clusters` clusters of `members` members each. Every link has unit SNR
/// on C0 at the node's own power and gain `licensed_gain_scale` times the C0
/// gain on every licensed channel.
pub fn fixture(
    clusters: usize,
    members: usize,
    bits: f64,
    member_loss: f64,
    head_loss: f64,
    channels: Vec<Channel>,
    licensed_gain_scale: f64,
) -> Fixture {
    let c0 = c0();
    let mut nodes = Vec::new();
    let mut states = Vec::new();
    for ci in 0..clusters {
        let head = nodes.len();
        let mut ids = Vec::new();
        for k in 0..=members {
            let id = nodes.len();
            let is_head = k == 0;
            let power = if is_head { 0.04 } else { 0.02 };
            let g0 = c0.noise_power_w() / power;
            let mut gains = BTreeMap::from([(ChannelId(0), g0)]);
            let mut pd = BTreeMap::new();
            for ch in &channels {
                gains.insert(ch.id(), g0 * licensed_gain_scale);
                pd.insert(ch.id(), 0.9);
            }
            let data = if is_head { 0.0 } else { bits };
            nodes.push(SensorNode::new(NodeId(id), ci, power, 0.005, data, pd, gains).unwrap());
            if !is_head {
                ids.push(NodeId(id));
            }
        }
        let n = ids.len();
        states.push(
            ClusterState::new(
                NodeId(head),
                ids,
                vec![member_loss; n],
                head_loss,
                0.7,
                vec![bits; n],
            )
            .unwrap(),
        );
    }
    Fixture {
        net: Network::new(nodes, states).unwrap(),
        c0,
        channels,
        params: table2_params(),
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
