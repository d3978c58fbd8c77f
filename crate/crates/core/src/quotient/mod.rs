//! Quotient mechanisms: cluster the submitted units with an evidence layer,
//! canonicalize each cluster, value the clusters as players of a data-value
//! game, and split each cluster's value among the identities inside it.

mod allocation;
mod diagnostics;

pub use allocation::{allocate_within_cluster, AllocationRule};
pub use diagnostics::{
    fairness_loss, leakage_terms, normalized_bound_check, oracle_l1, FairnessLoss, LeakageTerms, MergedGame,
    NormalizedBoundCheck,
};

use crate::error::Result;
use crate::evidence::{
    apply_representative, build_clusters, mixed_component_fraction, Clustering, EvidenceConfig, EvidenceLayer,
    RepresentativeConfig,
};
use crate::game::{make_data_value_game, Coalition, CoalitionGame, DataValueGame, UtilityMemo};
use crate::learner::{LabeledDataset, LearnerConfig};
use crate::market::{SubmittedProfile, Unit, WeightedUnit};
use crate::semivalue::{estimate, normalize_payments, Estimator, SemivalueSpec, DEFAULT_NORMALIZATION_FLOOR};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Payments below this are treated as zero when forming ratios.
pub const PAYMENT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub evidence: EvidenceConfig,
    pub representative: RepresentativeConfig,
    pub allocation: AllocationRule,
    pub semivalue: SemivalueSpec,
}

impl Mechanism {
    pub fn new(
        layer: EvidenceLayer,
        representative: RepresentativeConfig,
        allocation: AllocationRule,
        semivalue: SemivalueSpec,
    ) -> Self {
        Mechanism { evidence: EvidenceConfig::new(layer), representative, allocation, semivalue }
    }

    pub fn validate(&self) -> Result<()> {
        self.evidence.layer.validate()?;
        self.representative.validate()?;
        self.semivalue.family.validate()
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "quotient[{}|{}|{}|{}|{}]",
            self.evidence.layer, self.representative, self.allocation, self.semivalue.family, self.semivalue.estimator
        )
    }
}

/// Learner, validation set and an optional memo shared by every game built
/// from this context.
#[derive(Clone)]
pub struct UtilityContext {
    pub learner: LearnerConfig,
    pub valset: Arc<LabeledDataset>,
    pub memo: Option<Arc<UtilityMemo>>,
}

impl UtilityContext {
    pub fn new(learner: LearnerConfig, valset: Arc<LabeledDataset>) -> Self {
        UtilityContext { learner, valset, memo: None }
    }

    pub fn with_shared_memo(mut self) -> Self {
        self.memo = Some(Arc::new(UtilityMemo::new(&self.learner, &self.valset)));
        self
    }

    pub fn game(&self, training_sets: Vec<Vec<WeightedUnit>>) -> Result<DataValueGame> {
        let g = make_data_value_game(training_sets, &self.learner, self.valset.clone())?;
        match &self.memo {
            Some(m) => g.with_memo(m.clone()),
            None => Ok(g),
        }
    }
}

pub struct QuotientGame {
    pub clustering: Clustering,
    pub canonical: Vec<Vec<WeightedUnit>>,
    pub game: DataValueGame,
}

/// With the `None` layer the identities themselves are the players and no
/// canonicalization is applied.
pub fn build_quotient_game(
    profile: &SubmittedProfile,
    evidence: &EvidenceConfig,
    representative: &RepresentativeConfig,
    ctx: &UtilityContext,
) -> Result<QuotientGame> {
    let (evidence, representative) = match evidence.layer {
        EvidenceLayer::None => (
            EvidenceConfig { bundle_identities: true, ..*evidence },
            RepresentativeConfig::Identity,
        ),
        _ => (*evidence, *representative),
    };
    representative.validate()?;
    let clustering = build_clusters(profile, &evidence)?;
    let canonical = clustering
        .members()
        .iter()
        .map(|m| {
            let units: Vec<Unit> = m.iter().map(|&i| profile.units()[i].clone()).collect();
            apply_representative(&units, &representative)
        })
        .collect::<Result<Vec<_>>>()?;
    let game = ctx.game(canonical.clone())?;
    Ok(QuotientGame { clustering, canonical, game })
}

/// Everything computed by one mechanism on one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub clustering: Clustering,
    /// Payload digests of each cluster's canonical units.
    pub canonical_digests: Vec<Vec<u64>>,
    /// Semivalue before any rescaling.
    pub raw_values: Vec<f64>,
    /// Cluster payments (rescaled for normalized families).
    pub values: Vec<f64>,
    pub estimator: Estimator,
    pub samples_used: usize,
    pub eta: f64,
    pub grand_value: f64,
    pub allocation: Vec<Vec<(usize, f64)>>,
    pub per_identity: Vec<f64>,
    pub per_latent: Vec<f64>,
    pub mcf: f64,
}

impl PipelineRun {
    pub fn k(&self) -> usize {
        self.clustering.k()
    }
}

pub fn run_mechanism(profile: &SubmittedProfile, mech: &Mechanism, ctx: &UtilityContext) -> Result<PipelineRun> {
    mech.validate()?;
    let q = build_quotient_game(profile, &mech.evidence, &mech.representative, ctx)?;
    let k = q.game.player_count();
    let spec = SemivalueSpec { family: mech.semivalue.family.raw(), ..mech.semivalue };
    let raw = estimate(&q.game, &spec)?;
    let grand_value = q.game.value(Coalition::full(k))?;
    let values = if mech.semivalue.family.is_normalized() {
        normalize_payments(&raw, grand_value, DEFAULT_NORMALIZATION_FLOOR)?.values
    } else {
        raw.values.clone()
    };
    let members = q.clustering.members();
    let allocation: Vec<Vec<(usize, f64)>> = members
        .iter()
        .zip(&q.canonical)
        .map(|(m, canon)| {
            let raw_units: Vec<&Unit> = m.iter().map(|&i| &profile.units()[i]).collect();
            let rule = match mech.evidence.layer {
                EvidenceLayer::None => AllocationRule::CountRaw,
                _ => mech.allocation,
            };
            allocate_within_cluster(&raw_units, canon, rule, profile)
        })
        .collect();
    let mut per_identity = vec![0.0; profile.identity_count()];
    for (shares, &v) in allocation.iter().zip(&values) {
        for &(j, a) in shares {
            per_identity[j] += a * v;
        }
    }
    let per_latent = latent_totals(profile, &per_identity);
    Ok(PipelineRun {
        mcf: mixed_component_fraction(&q.clustering, profile),
        canonical_digests: q.canonical.iter().map(|c| c.iter().map(|wu| wu.unit.payload.digest()).collect()).collect(),
        clustering: q.clustering,
        raw_values: raw.values,
        values,
        estimator: raw.estimator,
        samples_used: raw.samples_used,
        eta: raw.eta_bound,
        grand_value,
        allocation,
        per_identity,
        per_latent,
    })
}

/// Sums identity payments per latent provider.
pub fn latent_totals(profile: &SubmittedProfile, per_identity: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; profile.latent_count()];
    for (j, &p) in per_identity.iter().enumerate() {
        out[profile.latent_of_identity()[j]] += p;
    }
    out
}

/// Additive and multiplicative gain of a latent provider relative to its
/// honest payment; the ratio is undefined when the honest payment is not
/// positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gain {
    pub additive: f64,
    pub multiplicative: Option<f64>,
}

impl Gain {
    pub fn new(attacked: f64, honest: f64) -> Self {
        Gain {
            additive: attacked - honest,
            multiplicative: (honest > PAYMENT_FLOOR).then(|| attacked / honest),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentReport {
    pub mechanism: String,
    pub attack: String,
    pub attacker: usize,
    pub per_identity: Vec<f64>,
    pub per_latent: Vec<f64>,
    pub honest_per_latent: Vec<f64>,
    pub latent_gains: Vec<Gain>,
    pub gain: Gain,
    pub leakage: LeakageTerms,
    pub attacked: PipelineRun,
    pub honest: PipelineRun,
}

/// Runs the mechanism on a profile and on its honest reference with
/// identical estimator streams. A profile without a reference is its own
/// reference.
pub fn pay(profile: &SubmittedProfile, mech: &Mechanism, ctx: &UtilityContext) -> Result<PaymentReport> {
    let attacked = run_mechanism(profile, mech, ctx)?;
    let (honest_profile, honest) = match profile.honest_reference() {
        Some(h) => (h, run_mechanism(h, mech, ctx)?),
        None => (profile, attacked.clone()),
    };
    let attacker = profile.attack().map_or(0, |a| a.attacker);
    let latent_gains: Vec<Gain> = attacked
        .per_latent
        .iter()
        .zip(&honest.per_latent)
        .map(|(&a, &h)| Gain::new(a, h))
        .collect();
    let leakage = leakage_terms(honest_profile, &honest, profile, &attacked, attacker);
    Ok(PaymentReport {
        mechanism: mech.to_string(),
        attack: profile.attack().map_or_else(|| "honest".to_string(), |a| a.to_string()),
        attacker,
        per_identity: attacked.per_identity.clone(),
        per_latent: attacked.per_latent.clone(),
        honest_per_latent: honest.per_latent.clone(),
        gain: latent_gains.get(attacker).copied().unwrap_or(Gain { additive: 0.0, multiplicative: None }),
        latent_gains,
        leakage,
        attacked,
        honest,
    })
}
