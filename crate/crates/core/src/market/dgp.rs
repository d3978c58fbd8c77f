use super::{Payload, SubmittedProfile, Unit};
use crate::error::{invalid, Result};
use crate::learner::LabeledDataset;
use crate::rng::{stream_rng, STREAM_DGP};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Gaussian class-mixture market.
///
/// Class means are `sqrt(2) * class_separation` along orthonormal random
/// directions, so two class means sit `2 * class_separation` apart. Every
/// mean is also shifted by `embedding_offset` along one further orthonormal
/// direction; this common offset mimics the anisotropy of real embedding
/// spaces and matters only to cosine evidence, since the learner
/// standardizes it away.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticDgpConfig {
    pub n_providers: usize,
    pub examples_per_provider: usize,
    pub n_classes: usize,
    pub n_features: usize,
    pub class_separation: f64,
    pub seed: u64,
    pub validation_size: usize,
    pub embedding_offset: f64,
}

impl Default for SyntheticDgpConfig {
    fn default() -> Self {
        SyntheticDgpConfig {
            n_providers: 8,
            examples_per_provider: 60,
            n_classes: 4,
            n_features: 24,
            class_separation: 1.2,
            seed: 0,
            validation_size: 200,
            embedding_offset: 4.0,
        }
    }
}

impl SyntheticDgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_providers == 0 || self.examples_per_provider == 0 || self.n_classes < 2 {
            return invalid("DGP needs providers, examples and at least two classes");
        }
        if self.n_features < self.n_classes {
            return invalid("DGP needs n_features >= n_classes");
        }
        if self.validation_size == 0 {
            return invalid("validation_size must be positive");
        }
        if !(self.class_separation >= 0.0) || !self.embedding_offset.is_finite() {
            return invalid("class_separation must be >= 0 and the offset finite");
        }
        Ok(())
    }
}

fn orthonormal_directions<R: Rng>(rng: &mut R, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

fn draw<R: Rng>(rng: &mut R, mean: &[f64]) -> Vec<f64> {
    mean.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Honest profile (provider `i` submits identity `i`) plus a disjoint
/// balanced validation set.
pub fn generate_synthetic_market(cfg: &SyntheticDgpConfig) -> Result<(SubmittedProfile, LabeledDataset)> {
    cfg.validate()?;
    let d = cfg.n_features;
    let c = cfg.n_classes;
    let with_offset = cfg.embedding_offset != 0.0 && d > c;
    let mut rng = stream_rng(cfg.seed, STREAM_DGP, 0);
    let dirs = orthonormal_directions(&mut rng, c + usize::from(with_offset), d);
    let scale = std::f64::consts::SQRT_2 * cfg.class_separation;
    let means: Vec<Vec<f64>> = (0..c)
        .map(|k| {
            (0..d)
                .map(|j| scale * dirs[k][j] + if with_offset { cfg.embedding_offset * dirs[c][j] } else { 0.0 })
                .collect()
        })
        .collect();

    let total = cfg.n_providers * cfg.examples_per_provider;
    let mut labels: Vec<usize> = (0..total).map(|i| i % c).collect();
    let mut rng = stream_rng(cfg.seed, STREAM_DGP, 1);
    labels.shuffle(&mut rng);
    let units = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let owner = i / cfg.examples_per_provider;
            Unit {
                unit_id: i as u64,
                payload: Payload { features: draw(&mut rng, &means[y]), label: y },
                latent_owner: owner,
                identity: owner,
                source_id: i as u64,
                timestamp: i as u64,
            }
        })
        .collect();
    let profile = SubmittedProfile::new(units, (0..cfg.n_providers).collect(), cfg.n_providers, c, d)?;

    let mut rng = stream_rng(cfg.seed, STREAM_DGP, 2);
    let mut val = LabeledDataset::empty(d, c);
    for i in 0..cfg.validation_size {
        let y = i % c;
        val.push(&draw(&mut rng, &means[y]), y, 1.0)?;
    }
    Ok((profile, val))
}
