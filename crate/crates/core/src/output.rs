//! CSV and manifest serialization, and all-or-nothing output directories.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::sweep::SweepResult;
use crate::sim::SimulationReport;

#[derive(Debug, Serialize)]
struct TranscriptRow<'a> {
    scenario_digest: &'a str,
    seed: u64,
    period: usize,
    phase: &'static str,
    cluster_id: i64,
    strategy: &'static str,
    channel_id: i64,
    sensing_j: f64,
    switching_j: f64,
    tx_j: f64,
    rx_j: f64,
    bits_delivered: f64,
    interference_events: u64,
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

pub fn write_transcript_csv<W: Write>(reports: &[SimulationReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        for rec in &r.periods {
            let phases = rec
                .intra
                .iter()
                .enumerate()
                .map(|(k, o)| ("intra", k as i64, o))
                .chain(std::iter::once(("inter", -1, &rec.inter)));
            for (phase, cluster_id, outcome) in phases {
                for ev in &outcome.transcript {
                    let l = &ev.ledger;
                    w.serialize(TranscriptRow {
                        scenario_digest: &r.scenario_digest,
                        seed: r.seed,
                        period: rec.period,
                        phase,
                        cluster_id,
                        strategy: r.strategy.name(),
                        channel_id: ev.channel.map_or(-1, |c| c.0 as i64),
                        sensing_j: l.sensing_j(),
                        switching_j: l.switching_j(),
                        tx_j: l.tx_j(),
                        rx_j: l.rx_j(),
                        bits_delivered: l.bits_delivered(),
                        interference_events: l.interference_events(),
                    })
                    .map_err(io)?;
                }
            }
        }
    }
    w.flush().map_err(io)
}

pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        result.variable.column(),
        "strategy",
        "mean_energy_j",
        "ci95_j",
        "scenario_digest",
    ])
    .map_err(io)?;
    for p in &result.points {
        w.write_record([
            p.x.to_string(),
            p.strategy.name().to_string(),
            p.mean.to_string(),
            p.ci95.to_string(),
            result.scenario_digest.clone(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Files staged into an output directory. Each file is written to a
/// temporary name and renamed; if the set is dropped before [`commit`],
/// every file it produced is removed.
///
/// [`commit`]: OutputSet::commit
pub struct OutputSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(io)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            committed: false,
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.partial"));
        let res = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, &target));
        if let Err(e) = res {
            let _ = fs::remove_file(&tmp);
            return Err(io(e));
        }
        self.written.push(target.clone());
        Ok(target)
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}
