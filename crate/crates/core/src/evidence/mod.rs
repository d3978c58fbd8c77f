//! Evidence graphs over submitted units, their connected components, and
//! the per-cluster representative operators.

mod representative;
mod union_find;

pub use representative::{apply_representative, CapSelector, RepresentativeConfig};
pub use union_find::DisjointSet;

use crate::error::{invalid, Error, Result};
use crate::market::SubmittedProfile;
use crate::names::{parse_call, Args};
use crate::rng::{uniform_from_keys, STREAM_NOISY_ORACLE};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EvidenceLayer {
    None,
    OracleLatent,
    OracleSource,
    ExactHash,
    Cosine { theta: f64 },
    HybridSourceCosine { theta: f64 },
    HybridHashCosine { theta: f64 },
    /// Latent-owner oracle corrupted at the level of submitted identities:
    /// every same-owner identity pair loses its link with probability
    /// `p_fs` and every cross-owner pair gains one with probability `p_fm`.
    NoisyOracleLatent { p_fs: f64, p_fm: f64, seed: u64 },
}

impl EvidenceLayer {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EvidenceLayer::Cosine { theta }
            | EvidenceLayer::HybridSourceCosine { theta }
            | EvidenceLayer::HybridHashCosine { theta } => {
                if theta > -1.0 && theta <= 1.0 {
                    Ok(())
                } else {
                    invalid(format!("cosine threshold {theta} outside (-1, 1]"))
                }
            }
            EvidenceLayer::NoisyOracleLatent { p_fs, p_fm, .. } => {
                if (0.0..=1.0).contains(&p_fs) && (0.0..=1.0).contains(&p_fm) {
                    Ok(())
                } else {
                    invalid("noise probabilities must lie in [0, 1]")
                }
            }
            _ => Ok(()),
        }
    }

    pub fn theta(&self) -> Option<f64> {
        match *self {
            EvidenceLayer::Cosine { theta }
            | EvidenceLayer::HybridSourceCosine { theta }
            | EvidenceLayer::HybridHashCosine { theta } => Some(theta),
            _ => None,
        }
    }

    /// Replaces the seed of a noisy oracle; other layers are unchanged.
    pub fn reseeded(self, seed: u64) -> Self {
        match self {
            EvidenceLayer::NoisyOracleLatent { p_fs, p_fm, .. } => EvidenceLayer::NoisyOracleLatent { p_fs, p_fm, seed },
            other => other,
        }
    }
}

impl fmt::Display for EvidenceLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvidenceLayer::None => write!(f, "none"),
            EvidenceLayer::OracleLatent => write!(f, "oracle_latent"),
            EvidenceLayer::OracleSource => write!(f, "oracle_source"),
            EvidenceLayer::ExactHash => write!(f, "exact_hash"),
            EvidenceLayer::Cosine { theta } => write!(f, "cosine(theta={theta})"),
            EvidenceLayer::HybridSourceCosine { theta } => write!(f, "hybrid_source_cosine(theta={theta})"),
            EvidenceLayer::HybridHashCosine { theta } => write!(f, "hybrid_hash_cosine(theta={theta})"),
            EvidenceLayer::NoisyOracleLatent { p_fs, p_fm, seed } => {
                write!(f, "noisy_oracle_latent(p_fs={p_fs},p_fm={p_fm},seed={seed})")
            }
        }
    }
}

impl FromStr for EvidenceLayer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s)?;
        let mut a = Args::new(&name, args);
        let layer = match name.as_str() {
            "none" => EvidenceLayer::None,
            "oracle_latent" => EvidenceLayer::OracleLatent,
            "oracle_source" => EvidenceLayer::OracleSource,
            "exact_hash" => EvidenceLayer::ExactHash,
            "cosine" => EvidenceLayer::Cosine { theta: a.take(&["theta"], None)? },
            "hybrid_source_cosine" => EvidenceLayer::HybridSourceCosine { theta: a.take(&["theta"], None)? },
            "hybrid_hash_cosine" => EvidenceLayer::HybridHashCosine { theta: a.take(&["theta"], None)? },
            "noisy_oracle_latent" => EvidenceLayer::NoisyOracleLatent {
                p_fs: a.take(&["p_fs"], Some(0.0))?,
                p_fm: a.take(&["p_fm"], Some(0.0))?,
                seed: a.take(&["seed"], Some(0))?,
            },
            other => return Err(Error::Parse(format!("unknown evidence layer {other:?}"))),
        };
        a.finish()?;
        layer.validate()?;
        Ok(layer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceConfig {
    pub layer: EvidenceLayer,
    /// Decimal places kept by the exact-hash layer.
    pub hash_precision: u32,
    /// Links all units submitted under one identity.
    pub bundle_identities: bool,
}

impl EvidenceConfig {
    pub fn new(layer: EvidenceLayer) -> Self {
        EvidenceConfig { layer, hash_precision: 8, bundle_identities: true }
    }
}

/// Unit → cluster map. Cluster ids are ordered by smallest unit id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    unit_ids: Vec<u64>,
    assignment: Vec<usize>,
    k: usize,
}

impl Clustering {
    /// Builds from per-unit labels aligned with `unit_ids`, renumbering
    /// clusters by smallest unit id.
    pub fn from_labels(unit_ids: Vec<u64>, labels: &[usize]) -> Result<Self> {
        if unit_ids.len() != labels.len() {
            return invalid("labels must align with units");
        }
        let mut order: Vec<usize> = (0..unit_ids.len()).collect();
        order.sort_by_key(|&i| unit_ids[i]);
        let mut remap: HashMap<usize, usize> = HashMap::new();
        let mut assignment = vec![0; labels.len()];
        for &i in &order {
            let next = remap.len();
            assignment[i] = *remap.entry(labels[i]).or_insert(next);
        }
        Ok(Clustering { unit_ids, k: remap.len(), assignment })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Cluster of the unit at position `i` of the profile.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_of(&self, unit_id: u64) -> Option<usize> {
        self.unit_ids.iter().position(|&u| u == unit_id).map(|i| self.assignment[i])
    }

    /// Profile positions of each cluster's units.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.k];
        for (i, &c) in self.assignment.iter().enumerate() {
            m[c].push(i);
        }
        m
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &c in &self.assignment {
            s[c] += 1;
        }
        s
    }

    /// `unit_id,cluster_id` rows in profile order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "unit_id,cluster_id")?;
        for (u, c) in self.unit_ids.iter().zip(&self.assignment) {
            writeln!(w, "{u},{c}")?;
        }
        Ok(())
    }
}

fn unit_norms(profile: &SubmittedProfile) -> Result<Vec<f64>> {
    profile
        .units()
        .iter()
        .map(|u| {
            let n = u.payload.features.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 && n.is_finite() {
                Ok(n)
            } else {
                Err(Error::ZeroNorm { unit_id: u.unit_id })
            }
        })
        .collect()
}

fn link_groups<K: std::hash::Hash + Eq>(ds: &mut DisjointSet, keys: impl Iterator<Item = K>) {
    let mut first: HashMap<K, usize> = HashMap::new();
    for (i, key) in keys.enumerate() {
        match first.get(&key) {
            Some(&j) => {
                ds.union(i, j);
            }
            None => {
                first.insert(key, i);
            }
        }
    }
}

fn hash_key(features: &[f64], label: usize, precision: u32) -> (usize, Vec<i64>) {
    let scale = 10f64.powi(precision as i32);
    (label, features.iter().map(|x| (x * scale).round() as i64).collect())
}

fn link_cosine(ds: &mut DisjointSet, profile: &SubmittedProfile, theta: f64) -> Result<()> {
    let norms = unit_norms(profile)?;
    let units = profile.units();
    for i in 0..units.len() {
        let a = &units[i].payload.features;
        for j in i + 1..units.len() {
            if ds.find(i) == ds.find(j) {
                continue;
            }
            let b = &units[j].payload.features;
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            if dot / (norms[i] * norms[j]) >= theta {
                ds.union(i, j);
            }
        }
    }
    Ok(())
}

/// Identity-level noisy oracle. Draws are keyed by each identity's
/// `(latent owner, rank among that owner's identities)`, so an attacked
/// profile reuses the honest profile's draws for every pre-existing pair.
fn link_noisy_oracle(ds: &mut DisjointSet, profile: &SubmittedProfile, p_fs: f64, p_fm: f64, seed: u64) {
    let latent = profile.latent_of_identity();
    let m = latent.len();
    let mut slot = vec![0u64; m];
    let mut seen: HashMap<usize, u64> = HashMap::new();
    for j in 0..m {
        let s = seen.entry(latent[j]).or_insert(0);
        slot[j] = *s;
        *s += 1;
    }
    let mut anchor = vec![usize::MAX; m];
    for (i, u) in profile.units().iter().enumerate() {
        if anchor[u.identity] == usize::MAX {
            anchor[u.identity] = i;
        }
    }
    for a in 0..m {
        for b in a + 1..m {
            if anchor[a] == usize::MAX || anchor[b] == usize::MAX {
                continue;
            }
            let ka = (latent[a] as u64, slot[a]);
            let kb = (latent[b] as u64, slot[b]);
            let (lo, hi) = if ka <= kb { (ka, kb) } else { (kb, ka) };
            let u = uniform_from_keys(&[seed, STREAM_NOISY_ORACLE, lo.0, lo.1, hi.0, hi.1]);
            let linked = if latent[a] == latent[b] { u >= p_fs } else { u < p_fm };
            if linked {
                ds.union(anchor[a], anchor[b]);
            }
        }
    }
}

/// Connected components of the evidence graph.
pub fn build_clusters(profile: &SubmittedProfile, cfg: &EvidenceConfig) -> Result<Clustering> {
    cfg.layer.validate()?;
    let units = profile.units();
    let mut ds = DisjointSet::new(units.len());
    if cfg.bundle_identities {
        link_groups(&mut ds, units.iter().map(|u| u.identity));
    }
    let hash_groups = |ds: &mut DisjointSet| {
        link_groups(ds, units.iter().map(|u| hash_key(&u.payload.features, u.payload.label, cfg.hash_precision)))
    };
    match cfg.layer {
        EvidenceLayer::None => {}
        EvidenceLayer::OracleLatent => link_groups(&mut ds, units.iter().map(|u| u.latent_owner)),
        EvidenceLayer::OracleSource => link_groups(&mut ds, units.iter().map(|u| u.source_id)),
        EvidenceLayer::ExactHash => hash_groups(&mut ds),
        EvidenceLayer::Cosine { theta } => link_cosine(&mut ds, profile, theta)?,
        EvidenceLayer::HybridSourceCosine { theta } => {
            link_groups(&mut ds, units.iter().map(|u| u.source_id));
            link_cosine(&mut ds, profile, theta)?;
        }
        EvidenceLayer::HybridHashCosine { theta } => {
            hash_groups(&mut ds);
            link_cosine(&mut ds, profile, theta)?;
        }
        EvidenceLayer::NoisyOracleLatent { p_fs, p_fm, seed } => {
            if !cfg.bundle_identities {
                link_groups(&mut ds, units.iter().map(|u| u.identity));
            }
            link_noisy_oracle(&mut ds, profile, p_fs, p_fm, seed);
        }
    }
    let roots: Vec<usize> = (0..units.len()).map(|i| ds.find(i)).collect();
    Clustering::from_labels(units.iter().map(|u| u.unit_id).collect(), &roots)
}

/// Share of clusters whose units span two or more latent owners.
pub fn mixed_component_fraction(clustering: &Clustering, profile: &SubmittedProfile) -> f64 {
    if clustering.k() == 0 {
        return 0.0;
    }
    let mut owner: Vec<Option<usize>> = vec![None; clustering.k()];
    let mut mixed = vec![false; clustering.k()];
    for (u, &c) in profile.units().iter().zip(clustering.assignment()) {
        match owner[c] {
            None => owner[c] = Some(u.latent_owner),
            Some(o) if o != u.latent_owner => mixed[c] = true,
            _ => {}
        }
    }
    mixed.iter().filter(|&&m| m).count() as f64 / clustering.k() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{apply_attack, generate_synthetic_market, SyntheticDgpConfig};

    fn honest() -> SubmittedProfile {
        generate_synthetic_market(&SyntheticDgpConfig::default()).unwrap().0
    }

    fn cfg(layer: &str) -> EvidenceConfig {
        EvidenceConfig::new(layer.parse().unwrap())
    }

    #[test]
    fn oracle_latent_recovers_providers() {
        let p = honest();
        let c = build_clusters(&p, &cfg("oracle_latent")).unwrap();
        assert_eq!(c.k(), 8);
        assert_eq!(c.sizes(), vec![60; 8]);
        assert_eq!(mixed_component_fraction(&c, &p), 0.0);
        let a = apply_attack(&p, &"sybil_split_k(k=3)".parse().unwrap(), 0).unwrap();
        assert_eq!(build_clusters(&a, &cfg("oracle_latent")).unwrap().k(), 8);
    }

    #[test]
    fn zero_noise_equals_oracle() {
        let p = honest();
        let a = apply_attack(&p, &"near_duplicate_2x_sybils(sigma=0.03)".parse().unwrap(), 1).unwrap();
        for seed in 0..5 {
            let layer = format!("noisy_oracle_latent(p_fs=0,p_fm=0,seed={seed})");
            assert_eq!(build_clusters(&a, &cfg(&layer)).unwrap(), build_clusters(&a, &cfg("oracle_latent")).unwrap());
        }
    }

    #[test]
    fn exact_hash_links_copies_to_origin() {
        let p = honest();
        let a = apply_attack(&p, &"exact_dup_2x_sybils(f=1)".parse().unwrap(), 2).unwrap();
        let mut c = cfg("exact_hash");
        c.bundle_identities = false;
        let cl = build_clusters(&a, &c).unwrap();
        for u in a.units().iter().filter(|u| u.identity >= 8) {
            assert_eq!(cl.cluster_of(u.unit_id), cl.cluster_of(u.source_id));
        }
    }

    #[test]
    fn layer_none_keeps_identities() {
        let p = honest();
        let a = apply_attack(&p, &"sybil_split_k(k=3)".parse().unwrap(), 0).unwrap();
        assert_eq!(build_clusters(&a, &cfg("none")).unwrap().k(), 10);
        let mut c = cfg("none");
        c.bundle_identities = false;
        assert_eq!(build_clusters(&a, &c).unwrap().k(), 480);
    }

    #[test]
    fn giant_cluster_is_fully_mixed() {
        let p = honest();
        let c = build_clusters(&p, &cfg("cosine(theta=-0.99)")).unwrap();
        assert_eq!(c.k(), 1);
        assert_eq!(mixed_component_fraction(&c, &p), 1.0);
    }

    #[test]
    fn high_false_merge_rate_mixes_clusters() {
        let mut total = 0.0;
        for seed in 0..20 {
            let (p, _) = generate_synthetic_market(&SyntheticDgpConfig { seed, ..Default::default() }).unwrap();
            let layer = format!("noisy_oracle_latent(p_fs=0,p_fm=0.4,seed={seed})");
            total += mixed_component_fraction(&build_clusters(&p, &cfg(&layer)).unwrap(), &p);
        }
        assert!(total / 20.0 > 0.5);
    }

    #[test]
    fn merging_is_monotone() {
        let p = honest();
        let a = apply_attack(&p, &"near_duplicate_2x_sybils(sigma=0.03)".parse().unwrap(), 3).unwrap();
        let mut last = usize::MAX;
        for p_fm in [0.0, 0.05, 0.1, 0.2, 0.4, 0.8] {
            let k = build_clusters(&a, &cfg(&format!("noisy_oracle_latent(p_fs=0.2,p_fm={p_fm},seed=4)"))).unwrap().k();
            assert!(k <= last);
            last = k;
        }
        let mut last = usize::MAX;
        for theta in [0.99, 0.95, 0.9, 0.85, 0.8] {
            let k = build_clusters(&a, &cfg(&format!("cosine(theta={theta})"))).unwrap().k();
            assert!(k <= last);
            last = k;
        }
    }

    #[test]
    fn zero_norm_is_reported() {
        let mut units = honest().units().to_vec();
        units[5].payload.features.iter_mut().for_each(|x| *x = 0.0);
        let p = SubmittedProfile::new(units, (0..8).collect(), 8, 4, 24).unwrap();
        assert_eq!(build_clusters(&p, &cfg("cosine(theta=0.9)")), Err(Error::ZeroNorm { unit_id: 5 }));
    }

    #[test]
    fn csv_export() {
        let p = honest();
        let c = build_clusters(&p, &cfg("oracle_latent")).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("unit_id,cluster_id\n0,"));
        assert_eq!(text.lines().count(), 481);
    }

    #[test]
    fn names_round_trip() {
        for s in ["none", "oracle_latent", "oracle_source", "exact_hash", "cosine(theta=0.9)", "hybrid_source_cosine(theta=0.95)", "hybrid_hash_cosine(theta=0.99)", "noisy_oracle_latent(p_fs=0.1,p_fm=0.2,seed=3)"] {
            assert_eq!(s.parse::<EvidenceLayer>().unwrap().to_string(), s);
        }
        assert!("cosine(theta=1.5)".parse::<EvidenceLayer>().is_err());
        assert!("cosine".parse::<EvidenceLayer>().is_err());
    }
}
