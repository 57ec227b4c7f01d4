use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::simulate::Trajectory;
use super::summary::{summarize, Estimate};
use super::HarnessError;
use crate::mechanism::EpochEnd;

#[derive(Serialize)]
struct EpochRow {
    replication: usize,
    epoch: u64,
    start_round: u64,
    rounds: u64,
    end: &'static str,
    m_g: usize,
    m_b: usize,
    r_g: f64,
    r_b: f64,
    good_revenue: f64,
    bad_revenue: f64,
}

#[derive(Serialize)]
struct SummaryRow {
    row: String,
    seed: Option<u64>,
    rounds: u64,
    mean_revenue: f64,
    se: Option<f64>,
    ci_lo: Option<f64>,
    ci_hi: Option<f64>,
    good_revenue: f64,
    bad_revenue: f64,
    uncleared_good_fraction: f64,
    bad_occupancy: f64,
}

fn end_label(e: Option<EpochEnd>) -> &'static str {
    match e {
        Some(EpochEnd::Completed) => "completed",
        Some(EpochEnd::Horizon) => "horizon",
        Some(EpochEnd::Reset) => "reset",
        None => "open",
    }
}

pub fn write_epochs_csv<W: Write>(runs: &[Trajectory], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for (rep, t) in runs.iter().enumerate() {
        for e in &t.epochs {
            let c = &e.record.config;
            w.serialize(EpochRow {
                replication: rep,
                epoch: c.index,
                start_round: e.record.start_round,
                rounds: e.record.rounds_run(),
                end: end_label(e.record.end),
                m_g: c.m_g,
                m_b: c.m_b,
                r_g: c.r_g,
                r_b: c.r_b,
                good_revenue: e.record.good_revenue,
                bad_revenue: e.record.bad_revenue,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per replication followed by an `aggregate` row with the standard
/// error and 95% interval of the per-round revenue across replications.
pub fn write_summary_csv<W: Write>(runs: &[Trajectory], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    let summaries: Vec<_> = runs.iter().map(summarize).collect();
    let occupancy = |s: &super::summary::RunSummary| {
        s.agents.iter().map(|a| a.bad_fraction).sum::<f64>() / s.agents.len().max(1) as f64
    };
    for (rep, s) in summaries.iter().enumerate() {
        w.serialize(SummaryRow {
            row: rep.to_string(),
            seed: s.seed,
            rounds: s.rounds,
            mean_revenue: s.mean_revenue,
            se: None,
            ci_lo: None,
            ci_hi: None,
            good_revenue: s.good_revenue,
            bad_revenue: s.bad_revenue,
            uncleared_good_fraction: s.uncleared_good_fraction,
            bad_occupancy: occupancy(s),
        })?;
    }
    let mean = |f: &dyn Fn(&super::summary::RunSummary) -> f64| {
        summaries.iter().map(f).sum::<f64>() / summaries.len().max(1) as f64
    };
    let revenue = Estimate::from_samples(&summaries.iter().map(|s| s.mean_revenue).collect::<Vec<_>>());
    w.serialize(SummaryRow {
        row: "aggregate".into(),
        seed: None,
        rounds: summaries.iter().map(|s| s.rounds).sum(),
        mean_revenue: revenue.mean,
        se: Some(revenue.se),
        ci_lo: Some(revenue.ci_lo),
        ci_hi: Some(revenue.ci_hi),
        good_revenue: mean(&|s| s.good_revenue),
        bad_revenue: mean(&|s| s.bad_revenue),
        uncleared_good_fraction: mean(&|s| s.uncleared_good_fraction),
        bad_occupancy: mean(&occupancy),
    })?;
    w.flush()?;
    Ok(())
}

/// Writes `trajectory_<rep>.jsonl`, `epochs.csv` and `summary.csv` into `dir`.
pub fn write_outputs(dir: &Path, runs: &[Trajectory]) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (rep, t) in runs.iter().enumerate() {
        let path = dir.join(format!("trajectory_{rep}.jsonl"));
        let mut f = BufWriter::new(File::create(&path)?);
        t.write_jsonl(&mut f)?;
        f.flush()?;
        written.push(path);
    }
    let epochs = dir.join("epochs.csv");
    write_epochs_csv(runs, BufWriter::new(File::create(&epochs)?))?;
    written.push(epochs);
    let summary = dir.join("summary.csv");
    write_summary_csv(runs, BufWriter::new(File::create(&summary)?))?;
    written.push(summary);
    Ok(written)
}
