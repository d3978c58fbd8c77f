//! Long-format plot data: `x, series, mean, se` of the multiplicative gain.

use crate::records::{mean_se, RunRecord};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Gain against cosine θ, with identity baselines and non-cosine
    /// mechanisms repeated at every θ as reference lines.
    Frontier,
    /// Gain against `p_fm`, one series per `p_fs`.
    Grid,
    /// Gain against `p_fm` at `p_fs = 0`, one series per allocation rule and
    /// attack.
    Allocation,
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlotKind::Frontier => "frontier",
            PlotKind::Grid => "grid",
            PlotKind::Allocation => "allocation",
        })
    }
}

impl FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "frontier" => Ok(PlotKind::Frontier),
            "grid" => Ok(PlotKind::Grid),
            "allocation" => Ok(PlotKind::Allocation),
            other => Err(format!("unknown plot kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotRow {
    pub x: f64,
    pub series: String,
    pub mean: f64,
    pub se: f64,
}

fn collect(groups: BTreeMap<(String, u64), Vec<f64>>) -> Vec<PlotRow> {
    groups
        .into_iter()
        .filter_map(|((series, xbits), vals)| {
            mean_se(vals).map(|m| PlotRow { x: f64::from_bits(xbits), series, mean: m.mean, se: m.se })
        })
        .collect()
}

pub fn plot_rows(records: &[RunRecord], kind: PlotKind) -> Vec<PlotRow> {
    let mut groups: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    let mut push = |series: String, x: f64, g: Option<f64>| {
        groups.entry((series, x.to_bits())).or_default().extend(g);
    };
    match kind {
        PlotKind::Frontier => {
            let thetas: BTreeSet<u64> = records.iter().filter_map(|r| r.theta).map(f64::to_bits).collect();
            for r in records {
                match r.theta {
                    Some(t) => push(format!("{}|{}", r.mechanism, r.attack), t, r.g),
                    None => {
                        for &t in &thetas {
                            push(format!("ref:{}|{}", r.mechanism, r.attack), f64::from_bits(t), r.g);
                        }
                    }
                }
            }
        }
        PlotKind::Grid => {
            for r in records {
                if let (Some(fs), Some(fm)) = (r.p_fs, r.p_fm) {
                    push(format!("{}|{}|{}|p_fs={fs}", r.mechanism, r.allocation, r.attack), fm, r.g);
                }
            }
        }
        PlotKind::Allocation => {
            for r in records {
                if let (Some(fs), Some(fm)) = (r.p_fs, r.p_fm) {
                    if fs == 0.0 {
                        push(format!("{}|{}", r.allocation, r.attack), fm, r.g);
                    }
                }
            }
        }
    }
    let mut rows = collect(groups);
    rows.sort_by(|a, b| a.series.cmp(&b.series).then(a.x.total_cmp(&b.x)));
    rows
}

pub fn emit_plot_data<W: Write>(w: W, records: &[RunRecord], kind: PlotKind) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "series", "mean", "se"])?;
    for r in plot_rows(records, kind) {
        out.write_record([r.x.to_string(), r.series, r.mean.to_string(), r.se.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
