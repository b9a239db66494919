//! CSV writers for search traces and episode summaries.

use std::io::Write;

use super::episode::EpisodeTrace;
use crate::error::Result;
use crate::policy::{BanditState, SpsaRecord};

/// `iteration,cost_plus,cost_minus,cost,theta_0..`
pub fn write_spsa_trace<W: Write>(writer: W, trace: &[SpsaRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let params = trace.first().map_or(0, |r| r.parameters.len());
    let mut header = vec![
        "iteration".to_string(),
        "cost_plus".into(),
        "cost_minus".into(),
        "cost".into(),
    ];
    header.extend((0..params).map(|j| format!("theta_{j}")));
    w.write_record(&header)?;
    for r in trace {
        let mut row = vec![
            r.iteration.to_string(),
            format!("{:.9}", r.cost_plus),
            format!("{:.9}", r.cost_minus),
            format!("{:.9}", r.cost()),
        ];
        row.extend(r.parameters.iter().map(|t| format!("{t:.6}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `episode,arm,cumulative_regret`
pub fn write_ucb_trace<W: Write>(writer: W, state: &BanditState) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["episode", "arm", "cumulative_regret"])?;
    for (t, (arm, regret)) in state.pulls.iter().zip(&state.regret).enumerate() {
        w.write_record([t.to_string(), arm.to_string(), format!("{regret:.9}")])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per episode.
pub fn write_episodes<W: Write>(writer: W, traces: &[EpisodeTrace]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "episode",
        "total_cost",
        "terminal_cost",
        "final_queue",
        "spend",
        "final_belief",
        "map_correct",
        "grad_norm_sq",
    ])?;
    for (k, t) in traces.iter().enumerate() {
        w.write_record([
            k.to_string(),
            format!("{:.9}", t.total_cost),
            format!("{:.9}", t.terminal_cost),
            t.final_queue.to_string(),
            format!("{:.3}", t.spend),
            format!("{:.9}", t.final_belief),
            u8::from(t.map_correct).to_string(),
            format!("{:.9}", t.gradient_norm_sq),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per query of a single episode.
pub fn write_steps<W: Write>(writer: W, trace: &EpisodeTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "n",
        "o",
        "b",
        "u",
        "learn",
        "incentive",
        "success",
        "belief",
        "cost",
    ])?;
    for s in &trace.steps {
        w.write_record([
            s.n.to_string(),
            s.oracle_state.to_string(),
            s.queue.to_string(),
            s.action.to_string(),
            u8::from(s.learn).to_string(),
            format!("{}", s.incentive),
            u8::from(s.success).to_string(),
            format!("{:.9}", s.belief),
            format!("{:.9}", s.cost),
        ])?;
    }
    w.flush()?;
    Ok(())
}
