//! Keyed random streams. Every draw in a run comes from a ChaCha stream
//! selected by (root seed, purpose, period, index), so strategies see the
//! same topology, data and channel draws.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::ChannelId;
use crate::phase::PhaseRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Deployment = 1,
    Gains = 2,
    Bandwidth = 3,
    PeriodData = 4,
    PeriodLoss = 5,
    PeriodCad = 6,
    Sensing = 7,
    Retransmission = 8,
}

/// Owner index of the inter phase in sensing/retransmission keys.
pub const INTER_OWNER: u64 = 0xFFFF;

pub fn stream(seed: u64, purpose: Purpose, period: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | ((period & 0xFF_FFFF) << 32) | (index & 0xFFFF_FFFF));
    rng
}

/// Streams of one phase instance (a cluster's intra phase or the inter phase).
#[derive(Debug, Clone)]
pub struct PhaseStreams {
    seed: u64,
    period: u64,
    owner: u64,
    sensing: BTreeMap<ChannelId, ChaCha8Rng>,
    retransmission: ChaCha8Rng,
}

impl PhaseStreams {
    pub fn new(seed: u64, period: u64, owner: u64) -> Self {
        Self {
            seed,
            period,
            owner,
            sensing: BTreeMap::new(),
            retransmission: stream(seed, Purpose::Retransmission, period, owner),
        }
    }
}

impl PhaseRng for PhaseStreams {
    type Stream = ChaCha8Rng;

    fn sensing(&mut self, channel: ChannelId) -> &mut ChaCha8Rng {
        let (seed, period, owner) = (self.seed, self.period, self.owner);
        self.sensing.entry(channel).or_insert_with(|| {
            stream(
                seed,
                Purpose::Sensing,
                period,
                (owner << 16) | channel.0 as u64,
            )
        })
    }

    fn retransmission(&mut self) -> &mut ChaCha8Rng {
        &mut self.retransmission
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn keys_select_distinct_streams() {
        let a: u64 = stream(7, Purpose::PeriodData, 3, 0).random();
        let b: u64 = stream(7, Purpose::PeriodData, 3, 0).random();
        let c: u64 = stream(7, Purpose::PeriodData, 4, 0).random();
        let d: u64 = stream(7, Purpose::PeriodLoss, 3, 0).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
