use super::{PaymentReport, PipelineRun};
use crate::error::{invalid, Error, Result};
use crate::game::{Coalition, CoalitionGame, TableGame};
use crate::market::SubmittedProfile;
use crate::rng::{stream_rng, STREAM_GAME};
use crate::scalar::Scalar;
use crate::semivalue::{estimate, semivalue_from_table, Estimator, SemivalueFamily, SemivalueSpec, EXACT_LIMIT};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};

/// Decomposition of the attacker's gain into value that escaped matching
/// and drift on matched clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageTerms {
    /// `L`: total absolute raw value of attacked clusters holding attacker
    /// units that share no canonical payload with an honest attacker cluster.
    pub escaped_mass: f64,
    /// `D`: total absolute raw-value change over matched clusters.
    pub matched_drift: f64,
    pub eta: f64,
    pub k_attacked: usize,
    /// `L + D + 2Kη`.
    pub bound: f64,
    pub escaped_clusters: Vec<usize>,
    /// `(attacked cluster, honest cluster)` pairs.
    pub matched_clusters: Vec<(usize, usize)>,
    /// Set when some match had to be broken by overlap size or cluster id.
    pub ambiguous: bool,
}

fn clusters_of_latent(profile: &SubmittedProfile, run: &PipelineRun, latent: usize) -> BTreeSet<usize> {
    profile
        .units()
        .iter()
        .zip(run.clustering.assignment())
        .filter(|(u, _)| u.latent_owner == latent)
        .map(|(_, &c)| c)
        .collect()
}

pub fn leakage_terms(
    honest_profile: &SubmittedProfile,
    honest: &PipelineRun,
    attacked_profile: &SubmittedProfile,
    attacked: &PipelineRun,
    attacker: usize,
) -> LeakageTerms {
    let honest_clusters: Vec<(usize, HashSet<u64>)> = clusters_of_latent(honest_profile, honest, attacker)
        .into_iter()
        .map(|h| (h, honest.canonical_digests[h].iter().copied().collect()))
        .collect();
    let mut escaped = Vec::new();
    let mut matched = Vec::new();
    let mut ambiguous = false;
    for k in clusters_of_latent(attacked_profile, attacked, attacker) {
        let digests: HashSet<u64> = attacked.canonical_digests[k].iter().copied().collect();
        let overlaps: Vec<(usize, usize)> = honest_clusters
            .iter()
            .map(|(h, set)| (*h, digests.intersection(set).count()))
            .filter(|&(_, n)| n > 0)
            .collect();
        ambiguous |= overlaps.len() > 1;
        // Largest overlap, then lowest honest id.
        match overlaps.iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))) {
            Some(&(h, _)) => matched.push((k, h)),
            None => escaped.push(k),
        }
    }
    let targets: HashSet<usize> = matched.iter().map(|&(_, h)| h).collect();
    ambiguous |= targets.len() < matched.len();
    let escaped_mass = escaped.iter().map(|&k| attacked.raw_values[k].abs()).sum();
    let matched_drift = matched.iter().map(|&(k, h)| (attacked.raw_values[k] - honest.raw_values[h]).abs()).sum();
    let eta = honest.eta.max(attacked.eta);
    let k_attacked = attacked.k();
    LeakageTerms {
        escaped_mass,
        matched_drift,
        eta,
        k_attacked,
        bound: escaped_mass + matched_drift + 2.0 * k_attacked as f64 * eta,
        escaped_clusters: escaped,
        matched_clusters: matched,
        ambiguous,
    }
}

/// The base game with players merged into blocks: `v(Q) = base(∪_{k∈Q} block_k)`.
pub struct MergedGame<'a, G> {
    base: &'a G,
    blocks: Vec<Coalition>,
}

impl<'a, G> MergedGame<'a, G> {
    /// `assignment[i]` is the block of base player `i`; every block in
    /// `0..blocks` must be non-empty.
    pub fn new<T: Scalar>(base: &'a G, assignment: &[usize], blocks: usize) -> Result<Self>
    where
        G: CoalitionGame<T>,
    {
        if assignment.len() != base.player_count() {
            return invalid("assignment must cover every base player");
        }
        let mut masks = vec![Coalition::EMPTY; blocks];
        for (i, &b) in assignment.iter().enumerate() {
            if b >= blocks {
                return invalid(format!("player {i} assigned to block {b} of {blocks}"));
            }
            masks[b] = masks[b].with(i);
        }
        if masks.iter().any(|m| m.is_empty()) {
            return invalid("every block needs at least one player");
        }
        Ok(MergedGame { base, blocks: masks })
    }
}

impl<'a, T: Scalar, G: CoalitionGame<T>> CoalitionGame<T> for MergedGame<'a, G> {
    fn player_count(&self) -> usize {
        self.blocks.len()
    }

    fn value(&self, coalition: Coalition) -> Result<T> {
        let mask = coalition.members().fold(Coalition::EMPTY, |m, k| m.union(self.blocks[k]));
        self.base.value(mask)
    }

    fn value_range(&self) -> T {
        self.base.value_range()
    }
}

/// Gap between the semivalue of the merged game and of the quotient game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessLoss<T> {
    pub per_cluster: Vec<T>,
    pub max_loss: T,
    /// Largest `|v_merge(Q) − v_quot(Q)|` seen.
    pub delta: T,
    /// `2 Δ`, valid because every family's size weights sum to one per player.
    pub bound: T,
    /// False when coalitions were sampled; `delta` is then a lower bound.
    pub exhaustive: bool,
}

const FAIRNESS_SAMPLES: usize = 4096;
const FAIRNESS_ESTIMATOR_SAMPLES: usize = 512;

pub fn fairness_loss<T, G, Q>(
    base: &G,
    assignment: &[usize],
    quotient: &Q,
    family: SemivalueFamily,
) -> Result<FairnessLoss<T>>
where
    T: Scalar,
    G: CoalitionGame<T>,
    Q: CoalitionGame<T>,
{
    let k = quotient.player_count();
    let merged = MergedGame::new(base, assignment, k)?;
    let family = family.raw();
    let (phi_m, phi_q, delta, exhaustive) = if k <= EXACT_LIMIT {
        let tm = TableGame::tabulate(&merged)?;
        let tq = TableGame::tabulate(quotient)?;
        let delta = tm
            .values()
            .iter()
            .zip(tq.values())
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), |m, x| if x > m { x } else { m });
        (
            semivalue_from_table(tm.values(), k, family)?,
            semivalue_from_table(tq.values(), k, family)?,
            delta,
            true,
        )
    } else {
        let mut rng = stream_rng(0, STREAM_GAME, k as u64);
        let mut delta = T::zero();
        for _ in 0..FAIRNESS_SAMPLES {
            let bits = if k == 64 { rng.gen::<u64>() } else { rng.gen::<u64>() & ((1u64 << k) - 1) };
            let c = Coalition::from_bits(bits);
            let d = (merged.value(c)? - quotient.value(c)?).abs();
            if d > delta {
                delta = d;
            }
        }
        let spec = SemivalueSpec {
            estimator: Estimator::Stratified { samples: FAIRNESS_ESTIMATOR_SAMPLES },
            ..SemivalueSpec::sampled(family, FAIRNESS_ESTIMATOR_SAMPLES, 0)
        };
        (estimate(&merged, &spec)?.values, estimate(quotient, &spec)?.values, delta, false)
    };
    let per_cluster: Vec<T> = phi_m.iter().zip(&phi_q).map(|(&a, &b)| (a - b).abs()).collect();
    let max_loss = per_cluster.iter().fold(T::zero(), |m, &x| if x > m { x } else { m });
    Ok(FairnessLoss { per_cluster, max_loss, delta, bound: delta + delta, exhaustive })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedBoundCheck {
    pub gamma: f64,
    /// `L + D` from raw scores.
    pub sigma: f64,
    /// `Σ + 2Kη + V Σ / S_min`.
    pub rhs: f64,
    pub pass: bool,
}

/// Gain bound for rescaled payments, valid when both raw-score sums have
/// magnitude at least `s_min`.
pub fn normalized_bound_check(report: &PaymentReport, s_min: f64, value_range: f64) -> Result<NormalizedBoundCheck> {
    for run in [&report.honest, &report.attacked] {
        let sum: f64 = run.raw_values.iter().sum();
        if !(sum.abs() >= s_min) {
            return Err(Error::DegenerateNormalization { sum, floor: s_min });
        }
    }
    let l = &report.leakage;
    let sigma = l.escaped_mass + l.matched_drift;
    let rhs = sigma + 2.0 * l.k_attacked as f64 * l.eta + value_range * sigma / s_min;
    let gamma = report.gain.additive;
    Ok(NormalizedBoundCheck { gamma, sigma, rhs, pass: gamma <= rhs + 1e-9 })
}

/// `Σ_i |a_i − b_i|`.
pub fn oracle_l1(mechanism: &[f64], oracle: &[f64]) -> f64 {
    mechanism.iter().zip(oracle).map(|(a, b)| (a - b).abs()).sum()
}
