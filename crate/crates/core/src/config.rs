//! Scenario configuration: JSON with units in key names, converted to SI at
//! ingestion, plus report-style validation.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{CadExponent, CognitiveParams};
use crate::phase::{Accounting, Strategy};
use crate::spectrum::SensingMode;

pub const BITS_PER_KB: f64 = 1000.0;

/// Normal distribution given by mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalSpec {
    pub mean: f64,
    pub var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    /// γ exponential with mean 1.
    #[default]
    Rayleigh,
    /// γ = 1.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub node_count: usize,
    pub radius_m: f64,
    pub cluster_count: usize,
    pub path_loss_exponent: f64,
    #[serde(default)]
    pub fading: Fading,
    pub data_kb: NormalSpec,
    #[serde(default = "one")]
    pub data_scale: f64,
    pub aggregation_rate: f64,
    pub member_power_mw: f64,
    pub head_power_mw: f64,
    pub circuit_power_mw: f64,
    /// Per-node detection probability on every licensed channel.
    pub detection_prob: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CadConfig {
    Derived {
        #[serde(default)]
        exponent: CadExponent,
    },
    FixedDistribution {
        mean_ms: f64,
        var_ms2: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub count: usize,
    pub c0_bandwidth_mhz: f64,
    pub bandwidth_mhz: NormalSpec,
    pub noise_density_w_per_hz: f64,
    pub p_on: f64,
    pub mean_idle_ms: f64,
    /// Fused false-alarm probability F_f.
    pub false_alarm: f64,
    pub cad: CadConfig,
    /// Use one fixed channel (index 1) with this bandwidth instead of draws.
    #[serde(default)]
    pub fixed_bandwidth_mhz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CognitiveConfig {
    pub sense_energy_j: f64,
    pub switch_energy_j: f64,
    pub rx_energy_nj_per_bit: f64,
    pub amplifier_efficiency: f64,
    pub pu_protection: f64,
    pub interference_threshold: f64,
    pub coop_set_size: usize,
    pub max_power_mw: f64,
}

/// Per-link packet loss over C0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSpec {
    Fixed { value: f64 },
    Uniform { low: f64, high: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub intra: LossSpec,
    pub inter: LossSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    IntraLoss,
    InterLoss,
    /// Fixed CAD in ms.
    CadMs,
    DataScale,
    ChannelCount,
    MaxPowerMw,
    /// ACS iteration index; no scenario change.
    Iteration,
}

impl SweepVariable {
    pub fn column(self) -> &'static str {
        match self {
            SweepVariable::IntraLoss | SweepVariable::InterLoss => "loss_rate",
            SweepVariable::CadMs => "cad_ms",
            SweepVariable::DataScale => "data_scale",
            SweepVariable::ChannelCount => "channel_count",
            SweepVariable::MaxPowerMw => "max_power_mw",
            SweepVariable::Iteration => "iteration",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Mean per-period intra-phase energy over all clusters.
    Intra,
    /// Mean per-period inter-phase energy.
    Inter,
    #[default]
    Total,
    /// Intra energy of one access to channel 1, no sensing.
    IntraAllocation,
    /// Inter energy of one access to channel 1, no sensing.
    InterAllocation,
    /// ACS objective after each iteration.
    AcsTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    #[serde(default)]
    pub metric: Metric,
}

impl SweepConfig {
    pub fn points(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.stop < self.start {
            return vec![self.start];
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    /// Seeds per sweep point.
    pub seeds: usize,
    pub periods: usize,
    pub topology: TopologyConfig,
    pub channels: ChannelConfig,
    pub cognitive: CognitiveConfig,
    pub loss: LossConfig,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub accounting: Accounting,
    #[serde(default)]
    pub sensing: SensingMode,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn all_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn cognitive_params(&self) -> Result<CognitiveParams> {
        let c = &self.cognitive;
        CognitiveParams::new(
            c.sense_energy_j,
            c.switch_energy_j,
            c.rx_energy_nj_per_bit * 1e-9,
            c.amplifier_efficiency,
            c.pu_protection,
            c.interference_threshold,
            c.coop_set_size,
            c.max_power_mw * 1e-3,
        )
    }

    /// Copy with one sweep variable applied.
    pub fn at_sweep_point(&self, variable: SweepVariable, x: f64) -> Self {
        let mut c = self.clone();
        match variable {
            SweepVariable::IntraLoss => c.loss.intra = LossSpec::Fixed { value: x },
            SweepVariable::InterLoss => c.loss.inter = LossSpec::Fixed { value: x },
            SweepVariable::CadMs => {
                c.channels.cad = CadConfig::FixedDistribution {
                    mean_ms: x,
                    var_ms2: 0.0,
                }
            }
            SweepVariable::DataScale => c.topology.data_scale = x,
            SweepVariable::ChannelCount => c.channels.count = x.round() as usize,
            SweepVariable::MaxPowerMw => c.cognitive.max_power_mw = x,
            SweepVariable::Iteration => {}
        }
        c
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let config = ScenarioConfig::from_json(&text)?;
    let report = validate_scenario(&config);
    if report.is_empty() {
        Ok(config)
    } else {
        Err(Error::Config(report.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.violations.push(msg());
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

fn pos(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

fn check_loss(r: &mut ValidationReport, name: &str, spec: LossSpec) {
    let ok = |v: f64| (0.0..1.0).contains(&v);
    match spec {
        LossSpec::Fixed { value } => r.check(ok(value), || {
            format!("loss.{name}: packet loss {value} must lie in [0, 1); retransmissions diverge at 1")
        }),
        LossSpec::Uniform { low, high } => r.check(ok(low) && ok(high) && low <= high, || {
            format!("loss.{name}: range [{low}, {high}] must lie in [0, 1); retransmissions diverge at 1")
        }),
    }
}

/// Every violated invariant; empty iff the scenario is runnable.
pub fn validate_scenario(c: &ScenarioConfig) -> ValidationReport {
    let mut r = ValidationReport::default();
    let t = &c.topology;
    r.check(t.cluster_count >= 1, || {
        "topology.cluster_count must be >= 1".into()
    });
    r.check(t.node_count > t.cluster_count, || {
        "topology.node_count must exceed cluster_count".into()
    });
    r.check(pos(t.radius_m), || "topology.radius_m must be > 0".into());
    r.check(pos(t.path_loss_exponent), || {
        "topology.path_loss_exponent must be > 0".into()
    });
    r.check(
        pos(t.data_kb.mean) && t.data_kb.var.is_finite() && t.data_kb.var >= 0.0,
        || "topology.data_kb needs mean > 0 and var >= 0".into(),
    );
    r.check(pos(t.data_scale), || {
        "topology.data_scale must be > 0".into()
    });
    r.check(
        t.aggregation_rate > 0.0 && t.aggregation_rate <= 1.0,
        || "topology.aggregation_rate must lie in (0, 1]".into(),
    );
    r.check(pos(t.member_power_mw), || {
        "topology.member_power_mw must be > 0".into()
    });
    r.check(pos(t.head_power_mw), || {
        "topology.head_power_mw must be > 0".into()
    });
    r.check(
        t.circuit_power_mw.is_finite() && t.circuit_power_mw >= 0.0,
        || "topology.circuit_power_mw must be >= 0".into(),
    );
    r.check(t.detection_prob > 0.0 && t.detection_prob <= 1.0, || {
        "topology.detection_prob must lie in (0, 1]".into()
    });

    let ch = &c.channels;
    r.check(pos(ch.c0_bandwidth_mhz), || {
        "channels.c0_bandwidth_mhz must be > 0".into()
    });
    r.check(
        pos(ch.bandwidth_mhz.mean) && ch.bandwidth_mhz.var >= 0.0,
        || "channels.bandwidth_mhz needs mean > 0 and var >= 0".into(),
    );
    r.check(pos(ch.noise_density_w_per_hz), || {
        "channels.noise_density_w_per_hz must be > 0".into()
    });
    r.check(ch.p_on > 0.0 && ch.p_on < 1.0, || {
        "channels.p_on must lie in (0, 1)".into()
    });
    r.check(pos(ch.mean_idle_ms), || {
        "channels.mean_idle_ms must be > 0".into()
    });
    r.check((0.0..1.0).contains(&ch.false_alarm), || {
        "channels.false_alarm must lie in [0, 1)".into()
    });
    if let Some(b) = ch.fixed_bandwidth_mhz {
        r.check(pos(b), || "channels.fixed_bandwidth_mhz must be > 0".into());
    }
    match ch.cad {
        CadConfig::Derived { .. } => {
            let available = (1.0 - ch.p_on) * (1.0 - ch.false_alarm);
            r.check(c.cognitive.pu_protection < available, || {
                format!(
                    "cognitive.pu_protection {} must be below p_off·(1−F_f) = {available} for a bounded CAD",
                    c.cognitive.pu_protection
                )
            });
        }
        CadConfig::FixedDistribution { mean_ms, var_ms2 } => {
            r.check(
                pos(mean_ms) && var_ms2.is_finite() && var_ms2 >= 0.0,
                || "channels.cad needs mean_ms > 0 and var_ms2 >= 0".into(),
            );
        }
    }

    let cg = &c.cognitive;
    r.check(
        cg.sense_energy_j.is_finite() && cg.sense_energy_j >= 0.0,
        || "cognitive.sense_energy_j must be >= 0".into(),
    );
    r.check(
        cg.switch_energy_j.is_finite() && cg.switch_energy_j >= 0.0,
        || "cognitive.switch_energy_j must be >= 0".into(),
    );
    r.check(
        cg.rx_energy_nj_per_bit.is_finite() && cg.rx_energy_nj_per_bit >= 0.0,
        || "cognitive.rx_energy_nj_per_bit must be >= 0".into(),
    );
    r.check(
        cg.amplifier_efficiency > 0.0 && cg.amplifier_efficiency <= 1.0,
        || "cognitive.amplifier_efficiency must lie in (0, 1]".into(),
    );
    r.check(cg.pu_protection > 0.0 && cg.pu_protection < 1.0, || {
        "cognitive.pu_protection must lie in (0, 1)".into()
    });
    r.check(
        cg.interference_threshold > 0.0 && cg.interference_threshold < 1.0,
        || "cognitive.interference_threshold must lie in (0, 1)".into(),
    );
    r.check(cg.coop_set_size >= 1, || {
        "cognitive.coop_set_size must be >= 1: at least one sensing node is required".into()
    });
    r.check(cg.coop_set_size <= t.cluster_count, || {
        "cognitive.coop_set_size exceeds the number of cluster heads".into()
    });
    r.check(pos(cg.max_power_mw), || {
        "cognitive.max_power_mw must be > 0".into()
    });
    if pos(t.detection_prob) && cg.coop_set_size >= 1 {
        let missed = (1.0 - t.detection_prob).powi(cg.coop_set_size as i32);
        r.check(ch.p_on * missed <= cg.interference_threshold, || {
            format!(
                "no sensing set of size {} meets the interference threshold: p_on·(1−p_d)^|y| = {}",
                cg.coop_set_size,
                ch.p_on * missed
            )
        });
    }

    check_loss(&mut r, "intra", c.loss.intra);
    check_loss(&mut r, "inter", c.loss.inter);
    r.check(!c.strategies.is_empty(), || {
        "strategies must not be empty".into()
    });
    if let Some(s) = &c.sweep {
        r.check(
            s.start.is_finite() && s.stop.is_finite() && s.stop >= s.start,
            || "sweep needs finite start <= stop".into(),
        );
        r.check(s.step.is_finite() && s.step > 0.0, || {
            "sweep.step must be > 0".into()
        });
        if matches!(
            s.variable,
            SweepVariable::IntraLoss | SweepVariable::InterLoss
        ) {
            r.check(s.stop < 1.0 && s.start >= 0.0, || {
                "loss sweep must stay in [0, 1); retransmissions diverge at 1".into()
            });
        }
        if s.variable == SweepVariable::ChannelCount {
            r.check(s.start >= 1.0, || {
                "channel_count sweep must start at >= 1".into()
            });
        }
    }
    r
}

pub const BUNDLED: [(&str, &str); 8] = [
    ("table2", include_str!("../configs/table2.json")),
    ("fig1", include_str!("../configs/fig1.json")),
    ("fig2", include_str!("../configs/fig2.json")),
    ("fig3", include_str!("../configs/fig3.json")),
    ("fig4", include_str!("../configs/fig4.json")),
    ("fig5", include_str!("../configs/fig5.json")),
    ("fig6", include_str!("../configs/fig6.json")),
    ("fig7", include_str!("../configs/fig7.json")),
];

pub fn bundled(name: &str) -> Result<ScenarioConfig> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("no bundled scenario `{name}`")))?;
    ScenarioConfig::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_validate() {
        for (name, _) in BUNDLED {
            let c = bundled(name).unwrap();
            let r = validate_scenario(&c);
            assert!(r.is_empty(), "{name}: {r}");
        }
    }

    #[test]
    fn loss_of_one_is_reported() {
        let mut c = bundled("table2").unwrap();
        c.loss.intra = LossSpec::Fixed { value: 1.0 };
        let r = validate_scenario(&c);
        assert_eq!(r.violations.len(), 1);
        assert!(r.violations[0].contains("diverge"));
    }

    #[test]
    fn zero_coop_set_is_reported() {
        let mut c = bundled("table2").unwrap();
        c.cognitive.coop_set_size = 0;
        let r = validate_scenario(&c);
        assert!(r.violations.iter().any(|v| v.contains("coop_set_size")));
    }

    #[test]
    fn missing_field_named() {
        let text = bundled("table2")
            .unwrap()
            .to_json()
            .replace("\"periods\"", "\"periodz\"");
        let err = ScenarioConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("periodz") || err.contains("periods"), "{err}");
    }

    #[test]
    fn sweep_points() {
        let s = SweepConfig {
            variable: SweepVariable::IntraLoss,
            start: 0.0,
            stop: 0.5,
            step: 0.05,
            metric: Metric::Intra,
        };
        assert_eq!(s.points().len(), 11);
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = bundled("table2").unwrap();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed += 1;
        assert_ne!(a.digest(), b.digest());
    }
}
