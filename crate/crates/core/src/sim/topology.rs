//! Node placement, cluster formation and link gains.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::config::{Fading, TopologyConfig};
use crate::error::{domain, Result};

/// Lower bound on Rayleigh power draws; keeps C0 rates away from zero.
pub const FADING_FLOOR: f64 = 1e-3;

/// Distances below this are treated as this (near-field guard).
const MIN_DISTANCE_M: f64 = 1.0;

const MAX_PLACEMENT_TRIES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    /// Positions relative to the sink at the origin.
    pub positions: Vec<(f64, f64)>,
    /// Node index of each cluster head.
    pub heads: Vec<usize>,
    /// Cluster of every node (heads included).
    pub cluster_of: Vec<usize>,
}

impl Deployment {
    pub fn is_head(&self, node: usize) -> bool {
        self.heads[self.cluster_of[node]] == node
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.positions.len())
            .filter(|&n| self.cluster_of[n] == cluster && !self.is_head(n))
            .collect()
    }

    /// Distance of each node to its destination: members to their head,
    /// heads to the sink.
    pub fn link_distance(&self, node: usize) -> f64 {
        let (x, y) = self.positions[node];
        let (hx, hy) = if self.is_head(node) {
            (0.0, 0.0)
        } else {
            self.positions[self.heads[self.cluster_of[node]]]
        };
        (x - hx).hypot(y - hy).max(MIN_DISTANCE_M)
    }
}

fn sample_disc<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let a = 2.0 * PI * rng.random::<f64>();
            (r * a.cos(), r * a.sin())
        })
        .collect()
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Heads are the nodes nearest to the centroids of `m` equal angular
/// sectors; every other node joins its nearest head.
pub fn form_clusters(positions: &[(f64, f64)], m: usize, radius: f64) -> Vec<usize> {
    let half = PI / m as f64;
    let centroid_r = if m == 1 {
        0.0
    } else {
        2.0 * radius * half.sin() / (3.0 * half)
    };
    let mut heads = Vec::with_capacity(m);
    for k in 0..m {
        let a = (2 * k + 1) as f64 * half;
        let c = (centroid_r * a.cos(), centroid_r * a.sin());
        let best = (0..positions.len())
            .filter(|n| !heads.contains(n))
            .min_by(|&a, &b| {
                dist2(positions[a], c)
                    .total_cmp(&dist2(positions[b], c))
                    .then(a.cmp(&b))
            })
            .expect("more nodes than clusters");
        heads.push(best);
    }
    heads
}

fn assign(positions: &[(f64, f64)], heads: &[usize]) -> Vec<usize> {
    positions
        .iter()
        .enumerate()
        .map(|(n, &p)| {
            if let Some(k) = heads.iter().position(|&h| h == n) {
                return k;
            }
            (0..heads.len())
                .min_by(|&a, &b| {
                    dist2(p, positions[heads[a]]).total_cmp(&dist2(p, positions[heads[b]]))
                })
                .expect("at least one head")
        })
        .collect()
}

/// Uniform placement in the disc; redrawn until every cluster has at least
/// `min_members` members.
pub fn sample_deployment<R: Rng + ?Sized>(
    cfg: &TopologyConfig,
    min_members: usize,
    rng: &mut R,
) -> Result<Deployment> {
    for _ in 0..MAX_PLACEMENT_TRIES {
        let positions = sample_disc(cfg.node_count, cfg.radius_m, rng);
        let heads = form_clusters(&positions, cfg.cluster_count, cfg.radius_m);
        let cluster_of = assign(&positions, &heads);
        let d = Deployment {
            positions,
            heads,
            cluster_of,
        };
        if (0..cfg.cluster_count).all(|c| d.members(c).len() >= min_members) {
            return Ok(d);
        }
    }
    Err(domain(format!(
        "no placement gave every cluster {min_members} members in {MAX_PLACEMENT_TRIES} tries"
    )))
}

/// Power gain γ·d^(−μ).
pub fn link_gain<R: Rng + ?Sized>(
    distance_m: f64,
    exponent: f64,
    fading: Fading,
    rng: &mut R,
) -> f64 {
    let gamma = match fading {
        Fading::Rayleigh => {
            let g: f64 = Exp1.sample(rng);
            g.max(FADING_FLOOR)
        }
        Fading::None => 1.0,
    };
    gamma * distance_m.max(MIN_DISTANCE_M).powf(-exponent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::rng::{stream, Purpose};

    fn cfg() -> TopologyConfig {
        crate::config::bundled("table2").unwrap().topology
    }

    #[test]
    fn deployment_shape() {
        let c = cfg();
        let mut rng = stream(1, Purpose::Deployment, 0, 0);
        let d = sample_deployment(&c, 3, &mut rng).unwrap();
        assert_eq!(d.positions.len(), 200);
        assert_eq!(d.heads.len(), 10);
        let members: usize = (0..10).map(|k| d.members(k).len()).sum();
        assert_eq!(members, 190);
        assert!(d.positions.iter().all(|p| p.0.hypot(p.1) <= 250.0));
    }

    #[test]
    fn unfaded_gain_is_power_law() {
        let mut rng = stream(1, Purpose::Gains, 0, 0);
        for d in [10.0, 50.0, 200.0] {
            let g = link_gain(d, 3.0, Fading::None, &mut rng);
            assert!((g - d.powi(-3)).abs() <= 1e-15 * g);
        }
    }

    #[test]
    fn fading_mean_is_one() {
        let mut rng = stream(2, Purpose::Gains, 0, 0);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| link_gain(1.0, 3.0, Fading::Rayleigh, &mut rng))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }
}
