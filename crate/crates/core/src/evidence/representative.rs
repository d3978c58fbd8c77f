use crate::error::{invalid, Error, Result};
use crate::market::{Payload, Unit, WeightedUnit};
use crate::names::{parse_call, Args};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapSelector {
    Centroid,
    Medoid,
    FirstKappa,
}

/// Canonicalization applied to each cluster before utility evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub enum RepresentativeConfig {
    Identity,
    #[default]
    ExactDupCollapse,
    Capped { kappa: usize, selector: CapSelector },
    WeightNormalized { budget: f64 },
    ProvenanceSelect,
}


impl RepresentativeConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RepresentativeConfig::Capped { kappa: 0, .. } => invalid("kappa must be >= 1"),
            RepresentativeConfig::WeightNormalized { budget } if !(budget > 0.0) || !budget.is_finite() => {
                invalid("budget must be positive")
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for RepresentativeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RepresentativeConfig::Identity => write!(f, "identity"),
            RepresentativeConfig::ExactDupCollapse => write!(f, "exact_dup_collapse"),
            RepresentativeConfig::Capped { kappa, selector } => {
                let sel = match selector {
                    CapSelector::Centroid => "centroid",
                    CapSelector::Medoid => "medoid",
                    CapSelector::FirstKappa => "first_kappa",
                };
                write!(f, "capped(kappa={kappa},selector={sel})")
            }
            RepresentativeConfig::WeightNormalized { budget } => write!(f, "weight_normalized(budget={budget})"),
            RepresentativeConfig::ProvenanceSelect => write!(f, "provenance_select"),
        }
    }
}

impl FromStr for RepresentativeConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s)?;
        let mut a = Args::new(&name, args);
        let cfg = match name.as_str() {
            "identity" => RepresentativeConfig::Identity,
            "exact_dup_collapse" => RepresentativeConfig::ExactDupCollapse,
            "capped" => {
                let kappa = a.take(&["kappa", "k"], Some(1))?;
                let sel: String = a.take(&["selector"], Some("medoid".to_string()))?;
                let selector = match sel.as_str() {
                    "centroid" => CapSelector::Centroid,
                    "medoid" => CapSelector::Medoid,
                    "first_kappa" | "first" => CapSelector::FirstKappa,
                    other => return Err(Error::Parse(format!("unknown cap selector {other:?}"))),
                };
                RepresentativeConfig::Capped { kappa, selector }
            }
            "weight_normalized" => RepresentativeConfig::WeightNormalized { budget: a.take(&["budget"], Some(1.0))? },
            "provenance_select" => RepresentativeConfig::ProvenanceSelect,
            other => return Err(Error::Parse(format!("unknown representative {other:?}"))),
        };
        a.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn unit_weight(units: Vec<Unit>) -> Vec<WeightedUnit> {
    units.into_iter().map(WeightedUnit::unit_weight).collect()
}

fn by_id(units: &[Unit]) -> Vec<Unit> {
    let mut v = units.to_vec();
    v.sort_by_key(|u| u.unit_id);
    v
}

/// Canonical multiset for one cluster, ordered by unit id.
pub fn apply_representative(cluster: &[Unit], cfg: &RepresentativeConfig) -> Result<Vec<WeightedUnit>> {
    cfg.validate()?;
    if cluster.is_empty() {
        return invalid("representative of an empty cluster");
    }
    let sorted = by_id(cluster);
    Ok(match *cfg {
        RepresentativeConfig::Identity => unit_weight(sorted),
        RepresentativeConfig::ExactDupCollapse => unit_weight(collapse_exact(sorted)),
        RepresentativeConfig::Capped { kappa, .. } if sorted.len() <= kappa => unit_weight(sorted),
        RepresentativeConfig::Capped { kappa, selector: CapSelector::FirstKappa } => {
            let mut v = sorted;
            v.sort_by_key(|u| (u.timestamp, u.unit_id));
            v.truncate(kappa);
            unit_weight(by_id(&v))
        }
        RepresentativeConfig::Capped { kappa, selector: CapSelector::Medoid } => {
            let picks = greedy_medoids(&sorted, kappa);
            let mut v: Vec<Unit> = picks.into_iter().map(|i| sorted[i].clone()).collect();
            v.sort_by_key(|u| u.unit_id);
            unit_weight(v)
        }
        RepresentativeConfig::Capped { kappa, selector: CapSelector::Centroid } => {
            unit_weight(centroids(&sorted, kappa))
        }
        RepresentativeConfig::WeightNormalized { budget } => {
            let w = budget / sorted.len() as f64;
            sorted.into_iter().map(|unit| WeightedUnit { unit, weight: w }).collect()
        }
        RepresentativeConfig::ProvenanceSelect => {
            let origin = sorted.iter().map(|u| u.source_id).min().expect("nonempty");
            unit_weight(sorted.into_iter().filter(|u| u.source_id == origin).collect())
        }
    })
}

fn collapse_exact(sorted: Vec<Unit>) -> Vec<Unit> {
    let mut seen: HashMap<u64, Vec<usize>> = HashMap::new();
    let mut kept: Vec<Unit> = Vec::new();
    for u in sorted {
        let bucket = seen.entry(u.payload.digest()).or_default();
        if bucket.iter().any(|&i| kept[i].payload.bit_eq(&u.payload)) {
            continue;
        }
        bucket.push(kept.len());
        kept.push(u);
    }
    kept
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

fn similarity_matrix(units: &[Unit]) -> Vec<Vec<f64>> {
    units
        .iter()
        .map(|a| units.iter().map(|b| cosine(&a.payload.features, &b.payload.features)).collect())
        .collect()
}

/// Greedy facility location: repeatedly add the unit that most increases
/// `Σ_u max_{m ∈ M} cos(u, m)`; ties go to the lowest unit id.
fn greedy_medoids(units: &[Unit], kappa: usize) -> Vec<usize> {
    let sim = similarity_matrix(units);
    let n = units.len();
    let mut best = vec![f64::NEG_INFINITY; n];
    let mut picked: Vec<usize> = Vec::new();
    while picked.len() < kappa.min(n) {
        let mut choice = None;
        let mut choice_gain = f64::NEG_INFINITY;
        for c in (0..n).filter(|c| !picked.contains(c)) {
            let cover: f64 = (0..n).map(|u| best[u].max(sim[u][c])).sum();
            if cover > choice_gain {
                choice_gain = cover;
                choice = Some(c);
            }
        }
        let c = choice.expect("candidates remain");
        for u in 0..n {
            best[u] = best[u].max(sim[u][c]);
        }
        picked.push(c);
    }
    picked
}

/// Mean-feature units of the groups formed around greedy medoids.
fn centroids(units: &[Unit], kappa: usize) -> Vec<Unit> {
    let medoids = greedy_medoids(units, kappa);
    let sim = similarity_matrix(units);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); medoids.len()];
    for (u, row) in sim.iter().enumerate() {
        let mut g = 0;
        for (gi, &m) in medoids.iter().enumerate() {
            if row[m] > row[medoids[g]] {
                g = gi;
            }
        }
        groups[g].push(u);
    }
    let dim = units[0].payload.features.len();
    let mut out: Vec<Unit> = groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|g| {
            let mut mean = vec![0.0; dim];
            let mut votes: HashMap<usize, usize> = HashMap::new();
            for &i in &g {
                for (m, x) in mean.iter_mut().zip(&units[i].payload.features) {
                    *m += x;
                }
                *votes.entry(units[i].payload.label).or_default() += 1;
            }
            mean.iter_mut().for_each(|m| *m /= g.len() as f64);
            let top = votes.values().copied().max().unwrap_or(0);
            let label = votes.iter().filter(|(_, &c)| c == top).map(|(&l, _)| l).min().unwrap_or(0);
            let anchor = g.iter().map(|&i| &units[i]).min_by_key(|u| u.unit_id).expect("nonempty group");
            Unit { payload: Payload { features: mean, label }, ..anchor.clone() }
        })
        .collect();
    out.sort_by_key(|u| u.unit_id);
    out
}
