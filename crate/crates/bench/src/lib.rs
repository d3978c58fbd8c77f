//! Experiment harness: JSON configs, synthetic and embedding-backed
//! markets, per-run records with aggregation, plot data and EMBED1 files.

pub mod config;
pub mod embed;
pub mod experiments;
pub mod plot;
pub mod records;

use config::{ExperimentConfig, ExperimentId};
use experiments::{run_experiment, ExperimentOutput};
use plot::{emit_plot_data, PlotKind};
use std::path::Path;

/// Plot kinds that make sense for an experiment.
pub fn plot_kinds(id: ExperimentId) -> &'static [PlotKind] {
    match id {
        ExperimentId::S4ThresholdFrontier | ExperimentId::HoldoutSweep => &[PlotKind::Frontier],
        ExperimentId::S5NoiseGrid | ExperimentId::S6DeltaProxy => &[PlotKind::Grid, PlotKind::Allocation],
        ExperimentId::S7AllocationRules => &[PlotKind::Allocation],
        _ => &[],
    }
}

/// Runs the experiment and writes every report into `out_dir`.
pub fn run_and_write(cfg: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<ExperimentOutput> {
    let out = run_experiment(cfg)?;
    records::write_reports(out_dir, &out.records, &out.summary)?;
    for &kind in plot_kinds(cfg.experiment) {
        let f = std::fs::File::create(out_dir.join(format!("plot_{kind}.csv")))?;
        emit_plot_data(f, &out.records, kind)?;
    }
    Ok(out)
}
