//! Sweeps over one scenario variable, aggregated over seeds.

use serde::Serialize;

use super::par::{map_ordered, Execution};
use super::{run_built, Scenario};
use crate::config::{Metric, ScenarioConfig, SweepConfig, SweepVariable};
use crate::error::{Error, Result};
use crate::phase::Strategy;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub x: f64,
    pub strategy: Strategy,
    /// Per-seed value, in seed order.
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub scenario_digest: String,
    pub variable: SweepVariable,
    pub metric: Metric,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn point(&self, x: f64, strategy: Strategy) -> Option<&SweepPoint> {
        self.points
            .iter()
            .find(|p| p.strategy == strategy && (p.x - x).abs() < 1e-9)
    }

    pub fn series(&self, strategy: Strategy) -> Vec<&SweepPoint> {
        self.points
            .iter()
            .filter(|p| p.strategy == strategy)
            .collect()
    }
}

/// Sample mean and normal-approximation 95% half-width.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

pub fn seeds(config: &ScenarioConfig) -> Vec<u64> {
    (0..config.seeds as u64)
        .map(|k| config.seed.wrapping_add(k))
        .collect()
}

fn mean(values: impl Iterator<Item = Result<f64>>, n: usize) -> Result<f64> {
    let mut s = 0.0;
    for v in values {
        s += v?;
    }
    Ok(if n == 0 { 0.0 } else { s / n as f64 })
}

/// Metric value of one (scenario point, seed, strategy).
fn evaluate(
    config: &ScenarioConfig,
    sweep: &SweepConfig,
    x: f64,
    seed: u64,
    strategy: Strategy,
) -> Result<f64> {
    let point = config.at_sweep_point(sweep.variable, x);
    let scenario = Scenario::build(&point, seed)?;
    let periods = point.periods;
    let cad = (sweep.variable == SweepVariable::CadMs).then_some(x * 1e-3);
    match sweep.metric {
        Metric::Intra | Metric::Inter | Metric::Total => {
            let report = run_built(&scenario, strategy)?;
            Ok(match sweep.metric {
                Metric::Intra => report.mean_intra_j(),
                Metric::Inter => report.mean_inter_j(),
                _ => report.mean_total_j(),
            })
        }
        Metric::IntraAllocation => mean(
            (0..periods).map(|p| scenario.intra_allocation_energy(p, strategy, cad)),
            periods,
        ),
        Metric::InterAllocation => mean(
            (0..periods).map(|p| scenario.inter_allocation_energy(p, strategy, cad)),
            periods,
        ),
        Metric::AcsTrace => {
            let k = x.round() as usize;
            mean(
                (0..periods).map(|p| {
                    let trace = scenario.acs_trace(p)?;
                    Ok(trace[k.min(trace.len() - 1)])
                }),
                periods,
            )
        }
    }
}

pub fn run_sweep(config: &ScenarioConfig, execution: Execution) -> Result<SweepResult> {
    let sweep = config
        .sweep
        .ok_or_else(|| Error::Config("scenario has no sweep section".into()))?;
    let report = crate::config::validate_scenario(config);
    if !report.is_empty() {
        return Err(Error::Config(report.to_string()));
    }
    let seeds = seeds(config);
    let mut jobs = Vec::new();
    for x in sweep.points() {
        for &strategy in &config.strategies {
            for &seed in &seeds {
                jobs.push((x, strategy, seed));
            }
        }
    }
    let values = map_ordered(execution, &jobs, |&(x, strategy, seed)| {
        evaluate(config, &sweep, x, seed, strategy)
    });
    let mut points = Vec::new();
    let mut it = values.into_iter();
    for x in sweep.points() {
        for &strategy in &config.strategies {
            let per_seed = it
                .by_ref()
                .take(seeds.len())
                .collect::<Result<Vec<f64>>>()?;
            let (mean, ci95) = mean_ci95(&per_seed);
            points.push(SweepPoint {
                x,
                strategy,
                per_seed,
                mean,
                ci95,
            });
        }
    }
    Ok(SweepResult {
        scenario_digest: config.digest(),
        variable: sweep.variable,
        metric: sweep.metric,
        points,
    })
}

/// Per-seed reports of one strategy, in seed order.
pub fn run_seeds(
    config: &ScenarioConfig,
    strategy: Strategy,
    execution: Execution,
) -> Result<Vec<super::SimulationReport>> {
    map_ordered(execution, &seeds(config), |&seed| {
        super::run_scenario(config, seed, strategy)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_of_constant_is_zero() {
        assert_eq!(mean_ci95(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        assert_eq!(mean_ci95(&[]), (0.0, 0.0));
        let (m, c) = mean_ci95(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((c - 1.96 * (2.0f64 / 2.0).sqrt()).abs() < 1e-15);
    }
}
