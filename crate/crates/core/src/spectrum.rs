//! PU activity statistics, energy-detection probabilities, cooperative OR
//! fusion, the PU protection check, channel available durations and the
//! stochastic channel/sensing samplers.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{CadExponent, Channel, CognitiveParams, NodeId, SensorNode};

/// Standard-normal tail probability Q(x) = P(Z > x).
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(domain(format!("{name} must be a probability, got {p}")))
    }
}

/// Stationary probability that an ON/OFF channel is idle, v / (v + l).
pub fn idle_probability(mean_idle_s: f64, mean_busy_s: f64) -> Result<f64> {
    if !(mean_idle_s > 0.0 && mean_busy_s > 0.0) {
        return Err(domain(format!(
            "idle/busy means must be > 0, got {mean_idle_s} and {mean_busy_s}"
        )));
    }
    Ok(mean_idle_s / (mean_idle_s + mean_busy_s))
}

/// Busy probability p_on of a licensed channel.
pub fn busy_probability(channel: &Channel) -> Result<f64> {
    let pu = channel.pu()?;
    Ok(1.0 - idle_probability(pu.mean_idle_s, pu.mean_busy_s)?)
}

fn check_detector(noise_power: f64, sense_duration_s: f64, sample_rate_hz: f64) -> Result<f64> {
    if !(noise_power > 0.0) {
        return Err(domain(format!(
            "noise power must be > 0, got {noise_power}"
        )));
    }
    let samples = sense_duration_s * sample_rate_hz;
    if !(samples >= 1.0) {
        return Err(domain(format!(
            "need at least one sample, got φ·f_s = {samples}"
        )));
    }
    Ok(samples)
}

/// Energy-detector false-alarm probability Q((δ/σ² − 1)·√(φ f_s)).
pub fn false_alarm_probability(
    threshold: f64,
    noise_power: f64,
    sense_duration_s: f64,
    sample_rate_hz: f64,
) -> Result<f64> {
    let samples = check_detector(noise_power, sense_duration_s, sample_rate_hz)?;
    Ok(q_function((threshold / noise_power - 1.0) * samples.sqrt()))
}

/// Energy-detector detection probability
/// Q((δ/σ² − γ̄ − 1)·√(φ f_s / (2γ̄ + 1))).
pub fn detection_probability(
    threshold: f64,
    noise_power: f64,
    mean_snr: f64,
    sense_duration_s: f64,
    sample_rate_hz: f64,
) -> Result<f64> {
    let samples = check_detector(noise_power, sense_duration_s, sample_rate_hz)?;
    if !(mean_snr >= 0.0) {
        return Err(domain(format!("mean SNR must be >= 0, got {mean_snr}")));
    }
    let arg =
        (threshold / noise_power - mean_snr - 1.0) * (samples / (2.0 * mean_snr + 1.0)).sqrt();
    Ok(q_function(arg))
}

/// OR-rule fused probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fusion {
    pub detection: f64,
    pub false_alarm: f64,
}

fn or_fuse(ps: &[f64]) -> f64 {
    1.0 - ps.iter().map(|p| 1.0 - p).product::<f64>()
}

/// Cooperative OR fusion: F = 1 − Π(1 − p), separately for detection and
/// false alarm.
pub fn cooperative_fusion(per_node_pd: &[f64], per_node_pf: &[f64]) -> Result<Fusion> {
    if per_node_pd.is_empty() || per_node_pd.len() != per_node_pf.len() {
        return Err(domain(
            "fusion needs equal-length, non-empty probability lists",
        ));
    }
    for &p in per_node_pd.iter().chain(per_node_pf) {
        check_prob("per-node probability", p)?;
    }
    Ok(Fusion {
        detection: or_fuse(per_node_pd),
        false_alarm: or_fuse(per_node_pf),
    })
}

/// Fused detection probability of a sensing set, F_d = 1 − Π(1 − p_d).
pub fn fused_detection(per_node_pd: &[f64]) -> f64 {
    or_fuse(per_node_pd)
}

/// True iff p_on · Π(1 − p_d) ≤ F_I.
pub fn pu_protection_satisfied(
    p_on: f64,
    per_node_pd: &[f64],
    interference_threshold: f64,
) -> bool {
    let missed: f64 = per_node_pd.iter().map(|p| 1.0 - p).product();
    p_on * missed <= interference_threshold
}

/// Choose `coop_set_size` sensing nodes for `channel`: highest detection
/// probability first, ties by ascending id. Deterministic.
pub fn select_sensing_set<'a>(
    candidates: impl IntoIterator<Item = &'a SensorNode>,
    channel: &Channel,
    params: &CognitiveParams,
) -> Result<Vec<NodeId>> {
    let size = params.coop_set_size();
    let mut ranked: Vec<(NodeId, f64)> = candidates
        .into_iter()
        .map(|n| (n.id(), n.detection_prob(channel.id())))
        .collect();
    if ranked.len() < size {
        return Err(domain(format!(
            "{} candidates cannot supply a sensing set of size {size}",
            ranked.len()
        )));
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(size);
    let pds: Vec<f64> = ranked.iter().map(|(_, p)| *p).collect();
    let p_on = busy_probability(channel)?;
    if !pu_protection_satisfied(p_on, &pds, params.interference_threshold()) {
        return Err(Error::InfeasibleProtection {
            channel: channel.id().0,
            size,
        });
    }
    Ok(ranked.into_iter().map(|(id, _)| id).collect())
}

/// Maximum CAD keeping p_off·(1−F_f)·(1 − e^{−T/v}) at the protection budget.
pub fn channel_available_duration(
    pu_protection: f64,
    p_off: f64,
    fused_false_alarm: f64,
    mean_idle_s: f64,
    exponent: CadExponent,
) -> Result<f64> {
    if !(pu_protection > 0.0) {
        return Err(domain(format!("p_r must be > 0, got {pu_protection}")));
    }
    if !(mean_idle_s > 0.0) {
        return Err(domain(format!(
            "mean idle time must be > 0, got {mean_idle_s}"
        )));
    }
    let available = p_off * (1.0 - fused_false_alarm);
    if pu_protection >= available {
        return Err(Error::UnboundedCad);
    }
    let log_term = -(-pu_protection / available).ln_1p();
    Ok(match exponent {
        CadExponent::MeanInverse => mean_idle_s * log_term,
        CadExponent::RawVx => log_term / mean_idle_s,
    })
}

/// Probability that a sensed channel is idle and declared idle, F_s = p_off·(1−F_f).
pub fn access_probability(channel: &Channel) -> Result<f64> {
    let pu = channel.pu()?;
    Ok(idle_probability(pu.mean_idle_s, pu.mean_busy_s)? * (1.0 - pu.false_alarm_prob))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Occupancy {
    Idle,
    Busy,
}

/// Sampled true state of a licensed channel at sensing time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelState {
    Idle { remaining_idle_s: f64 },
    Busy,
}

impl ChannelState {
    pub fn occupancy(&self) -> Occupancy {
        match self {
            ChannelState::Idle { .. } => Occupancy::Idle,
            ChannelState::Busy => Occupancy::Busy,
        }
    }
}

/// Draw the channel state: idle with probability p_off, in which case the
/// remaining idle time is a fresh exponential with the mean idle time.
pub fn sample_channel_state<R: Rng + ?Sized>(
    channel: &Channel,
    rng: &mut R,
) -> Result<ChannelState> {
    let pu = channel.pu()?;
    let p_off = idle_probability(pu.mean_idle_s, pu.mean_busy_s)?;
    if rng.random::<f64>() < p_off {
        let exp = Exp::new(1.0 / pu.mean_idle_s).map_err(|e| domain(e.to_string()))?;
        Ok(ChannelState::Idle {
            remaining_idle_s: exp.sample(rng),
        })
    } else {
        Ok(ChannelState::Busy)
    }
}

/// How sensing errors on busy channels are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingMode {
    /// Busy channels are always declared busy (misdetection ignored).
    #[default]
    Paper,
    /// Busy channels are declared idle with probability 1 − F_d.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingOutcome {
    pub true_state: Occupancy,
    pub declared_state: Occupancy,
    pub fused_detection: f64,
    pub fused_false_alarm: f64,
}

pub fn sample_sensing_outcome<R: Rng + ?Sized>(
    true_state: Occupancy,
    fused_detection: f64,
    fused_false_alarm: f64,
    mode: SensingMode,
    rng: &mut R,
) -> SensingOutcome {
    // one uniform per call keeps stream consumption independent of the branch
    let u: f64 = rng.random();
    let declared = match (true_state, mode) {
        (Occupancy::Idle, _) if u < 1.0 - fused_false_alarm => Occupancy::Idle,
        (Occupancy::Idle, _) => Occupancy::Busy,
        (Occupancy::Busy, SensingMode::Paper) => Occupancy::Busy,
        (Occupancy::Busy, SensingMode::Strict) if u < 1.0 - fused_detection => Occupancy::Idle,
        (Occupancy::Busy, SensingMode::Strict) => Occupancy::Busy,
    };
    SensingOutcome {
        true_state,
        declared_state: declared,
        fused_detection,
        fused_false_alarm,
    }
}
