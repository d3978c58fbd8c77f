//! Units, submitted profiles, the synthetic market generator and the attack
//! library.

mod attack;
mod baseline;
mod dgp;

pub use attack::{apply_attack, AttackFamily, AttackSpec, SplitScheme};
pub use baseline::{baseline_payments, reported_training_sets, BaselineRule};
pub use dgp::{generate_synthetic_market, SyntheticDgpConfig};

use crate::error::{invalid, Result};
use crate::learner::LabeledDataset;
use crate::rng::hash_keys;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub features: Vec<f64>,
    pub label: usize,
}

impl Payload {
    /// Content hash over the exact feature bits and label.
    pub fn digest(&self) -> u64 {
        let mut keys: Vec<u64> = self.features.iter().map(|x| x.to_bits()).collect();
        keys.push(self.label as u64);
        keys.push(self.features.len() as u64);
        hash_keys(&keys)
    }

    /// Bitwise equality (distinguishes `0.0` from `-0.0`).
    pub fn bit_eq(&self, other: &Payload) -> bool {
        self.label == other.label
            && self.features.len() == other.features.len()
            && self.features.iter().zip(&other.features).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub unit_id: u64,
    pub payload: Payload,
    pub latent_owner: usize,
    pub identity: usize,
    pub source_id: u64,
    pub timestamp: u64,
}

/// A canonical unit as fed to the learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedUnit {
    pub unit: Unit,
    pub weight: f64,
}

impl WeightedUnit {
    pub fn unit_weight(unit: Unit) -> Self {
        WeightedUnit { unit, weight: 1.0 }
    }
}

/// Submitted units grouped by identity, with the identity → latent map.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmittedProfile {
    units: Vec<Unit>,
    latent_of_identity: Vec<usize>,
    n_latent: usize,
    n_classes: usize,
    dim: usize,
    honest_reference: Option<Arc<SubmittedProfile>>,
    attack: Option<AttackSpec>,
}

impl SubmittedProfile {
    pub fn new(
        units: Vec<Unit>,
        latent_of_identity: Vec<usize>,
        n_latent: usize,
        n_classes: usize,
        dim: usize,
    ) -> Result<Self> {
        if latent_of_identity.iter().any(|&l| l >= n_latent) {
            return invalid("identity mapped to an unknown latent provider");
        }
        let mut seen = std::collections::HashSet::new();
        for u in &units {
            if u.identity >= latent_of_identity.len() {
                return invalid(format!("unit {} has unknown identity {}", u.unit_id, u.identity));
            }
            if latent_of_identity[u.identity] != u.latent_owner {
                return invalid(format!("unit {} latent owner disagrees with its identity", u.unit_id));
            }
            if u.payload.features.len() != dim {
                return invalid(format!("unit {} has dim {}, expected {dim}", u.unit_id, u.payload.features.len()));
            }
            if u.payload.label >= n_classes {
                return invalid(format!("unit {} label outside [0, {n_classes})", u.unit_id));
            }
            if !seen.insert(u.unit_id) {
                return invalid(format!("duplicate unit id {}", u.unit_id));
            }
        }
        Ok(SubmittedProfile {
            units,
            latent_of_identity,
            n_latent,
            n_classes,
            dim,
            honest_reference: None,
            attack: None,
        })
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn identity_count(&self) -> usize {
        self.latent_of_identity.len()
    }

    pub fn latent_count(&self) -> usize {
        self.n_latent
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn latent_of_identity(&self) -> &[usize] {
        &self.latent_of_identity
    }

    pub fn identity_units(&self, identity: usize) -> impl Iterator<Item = &Unit> {
        self.units.iter().filter(move |u| u.identity == identity)
    }

    pub fn identity_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.identity_count()];
        for u in &self.units {
            sizes[u.identity] += 1;
        }
        sizes
    }

    pub fn identities_of_latent(&self, latent: usize) -> Vec<usize> {
        (0..self.identity_count())
            .filter(|&j| self.latent_of_identity[j] == latent)
            .collect()
    }

    /// Honest profiles have one identity per latent provider.
    pub fn is_honest(&self) -> bool {
        self.identity_count() == self.n_latent
            && self.latent_of_identity.iter().enumerate().all(|(j, &l)| j == l)
    }

    pub fn honest_reference(&self) -> Option<&SubmittedProfile> {
        self.honest_reference.as_deref()
    }

    pub fn attack(&self) -> Option<&AttackSpec> {
        self.attack.as_ref()
    }

    pub fn max_unit_id(&self) -> Option<u64> {
        self.units.iter().map(|u| u.unit_id).max()
    }

    pub(crate) fn with_reference(mut self, honest: Arc<SubmittedProfile>, attack: AttackSpec) -> Self {
        self.honest_reference = Some(honest);
        self.attack = Some(attack);
        self
    }

    pub fn to_dataset(&self) -> LabeledDataset {
        units_to_dataset(self.units.iter().map(|u| (u, 1.0)), self.dim, self.n_classes)
    }

    /// One JSON object per unit.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for u in &self.units {
            serde_json::to_writer(&mut w, u)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Rebuilds an honest-or-attacked profile from a JSON-lines dump.
    pub fn read_jsonl<R: BufRead>(r: R, n_classes: usize) -> Result<Self> {
        let mut units = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| crate::Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let u: Unit = serde_json::from_str(&line)
                .map_err(|e| crate::Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            units.push(u);
        }
        let m = units.iter().map(|u| u.identity + 1).max().unwrap_or(0);
        let mut latent = vec![usize::MAX; m];
        for u in &units {
            latent[u.identity] = u.latent_owner;
        }
        if latent.contains(&usize::MAX) {
            return invalid("identity without units in dump");
        }
        let n_latent = latent.iter().map(|l| l + 1).max().unwrap_or(0);
        let dim = units.first().map_or(0, |u| u.payload.features.len());
        SubmittedProfile::new(units, latent, n_latent, n_classes, dim)
    }
}

pub fn units_to_dataset<'a>(
    units: impl Iterator<Item = (&'a Unit, f64)>,
    dim: usize,
    n_classes: usize,
) -> LabeledDataset {
    let mut ds = LabeledDataset::empty(dim, n_classes);
    for (u, w) in units {
        ds.push(&u.payload.features, u.payload.label, w)
            .expect("profile units are validated on construction");
    }
    ds
}
