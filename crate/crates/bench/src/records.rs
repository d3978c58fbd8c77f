//! Per-run records, per-cell aggregation and report files.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// One row per (setting, mechanism, attack, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: String,
    /// DGP variant or sweep parameter; empty when unused.
    pub setting: String,
    pub mechanism: String,
    pub evidence: String,
    pub representative: String,
    pub allocation: String,
    pub semivalue: String,
    pub estimator: String,
    pub attack: String,
    pub seed: u64,
    pub theta: Option<f64>,
    pub p_fs: Option<f64>,
    pub p_fm: Option<f64>,
    #[serde(rename = "G")]
    pub g: Option<f64>,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    pub bound: Option<f64>,
    pub oracle_l1: Option<f64>,
    pub mcf: Option<f64>,
    pub k: usize,
    pub estimator_l1: Option<f64>,
    pub runtime_ms: u64,
}

impl RunRecord {
    /// Aggregation key: every label column except the seed.
    pub fn cell_key(&self) -> CellKey {
        CellKey {
            experiment: self.experiment.clone(),
            setting: self.setting.clone(),
            mechanism: self.mechanism.clone(),
            evidence: self.evidence.clone(),
            representative: self.representative.clone(),
            allocation: self.allocation.clone(),
            semivalue: self.semivalue.clone(),
            estimator: self.estimator.clone(),
            attack: self.attack.clone(),
        }
    }

    fn sort_key(&self) -> (CellKey, u64) {
        (self.cell_key(), self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub experiment: String,
    pub setting: String,
    pub mechanism: String,
    pub evidence: String,
    pub representative: String,
    pub allocation: String,
    pub semivalue: String,
    pub estimator: String,
    pub attack: String,
}

/// Mean and standard error (`sample std / √n`) of the finite values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

pub fn mean_se(values: impl IntoIterator<Item = f64>) -> Option<MeanSe> {
    let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Some(MeanSe { mean, se, n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    #[serde(flatten)]
    pub key: CellKey,
    pub runs: usize,
    pub g: Option<MeanSe>,
    pub gamma: Option<MeanSe>,
    pub l: Option<MeanSe>,
    pub d: Option<MeanSe>,
    pub oracle_l1: Option<MeanSe>,
    pub mcf: Option<MeanSe>,
    pub k: Option<MeanSe>,
    pub estimator_l1: Option<MeanSe>,
    pub theta: Option<f64>,
    pub p_fs: Option<f64>,
    pub p_fm: Option<f64>,
}

/// Stable order: cells sorted by key, then runs by seed.
pub fn sort_records(records: &mut [RunRecord]) {
    records.sort_by_key(|a| a.sort_key());
}

pub fn aggregate(records: &[RunRecord]) -> Vec<AggregateRow> {
    let mut cells: BTreeMap<CellKey, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        cells.entry(r.cell_key()).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|(key, rs)| {
            let col = |f: &dyn Fn(&RunRecord) -> Option<f64>| mean_se(rs.iter().filter_map(|r| f(r)));
            AggregateRow {
                runs: rs.len(),
                g: col(&|r| r.g),
                gamma: col(&|r| Some(r.gamma)),
                l: col(&|r| r.l),
                d: col(&|r| r.d),
                oracle_l1: col(&|r| r.oracle_l1),
                mcf: col(&|r| r.mcf),
                k: col(&|r| Some(r.k as f64)),
                estimator_l1: col(&|r| r.estimator_l1),
                theta: rs[0].theta,
                p_fs: rs[0].p_fs,
                p_fm: rs[0].p_fm,
                key,
            }
        })
        .collect()
}

pub fn write_records_csv<W: Write>(w: W, records: &[RunRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records_csv<R: std::io::Read>(r: R) -> csv::Result<Vec<RunRecord>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

const AGGREGATE_HEADER: [&str; 26] = [
    "experiment", "setting", "mechanism", "evidence", "representative", "allocation", "semivalue", "estimator",
    "attack", "runs", "theta", "p_fs", "p_fm", "G_mean", "G_se", "Gamma_mean", "Gamma_se", "L_mean", "D_mean",
    "oracle_l1_mean", "oracle_l1_se", "mcf_mean", "mcf_se", "k_mean", "estimator_l1_mean", "estimator_l1_se",
];

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

pub fn write_aggregate_csv<W: Write>(w: W, rows: &[AggregateRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        let k = &r.key;
        let m = |x: &Option<MeanSe>| opt(x.map(|v| v.mean));
        let s = |x: &Option<MeanSe>| opt(x.map(|v| v.se));
        out.write_record([
            k.experiment.clone(),
            k.setting.clone(),
            k.mechanism.clone(),
            k.evidence.clone(),
            k.representative.clone(),
            k.allocation.clone(),
            k.semivalue.clone(),
            k.estimator.clone(),
            k.attack.clone(),
            r.runs.to_string(),
            opt(r.theta),
            opt(r.p_fs),
            opt(r.p_fm),
            m(&r.g),
            s(&r.g),
            m(&r.gamma),
            s(&r.gamma),
            m(&r.l),
            m(&r.d),
            m(&r.oracle_l1),
            s(&r.oracle_l1),
            m(&r.mcf),
            s(&r.mcf),
            m(&r.k),
            m(&r.estimator_l1),
            s(&r.estimator_l1),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `runs.csv`, `aggregate.csv` and `summary.json` into `dir`.
pub fn write_reports(dir: &Path, records: &[RunRecord], summary: &serde_json::Value) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_records_csv(std::fs::File::create(dir.join("runs.csv"))?, records)?;
    write_aggregate_csv(std::fs::File::create(dir.join("aggregate.csv"))?, &aggregate(records))?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary)?)?;
    Ok(())
}
