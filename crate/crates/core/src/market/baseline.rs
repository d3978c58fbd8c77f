use super::{SubmittedProfile, WeightedUnit};
use crate::error::Result;
use crate::game::{Coalition, CoalitionGame};
use crate::semivalue::{estimate, SemivalueSpec};
use serde::{Deserialize, Serialize};

/// Payment rules that ignore evidence and pay submitted identities directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BaselineRule {
    UniformIdentity,
    PerExampleUniform,
    LeaveOneOut,
    Semivalue(SemivalueSpec),
}

/// Raw submitted multisets, one player per identity.
pub fn reported_training_sets(profile: &SubmittedProfile) -> Vec<Vec<WeightedUnit>> {
    (0..profile.identity_count())
        .map(|j| profile.identity_units(j).cloned().map(WeightedUnit::unit_weight).collect())
        .collect()
}

/// Per-identity payments under `rule`, where `game` is the reported game
/// whose players are the profile's identities.
pub fn baseline_payments<G: CoalitionGame<f64>>(profile: &SubmittedProfile, rule: &BaselineRule, game: &G) -> Result<Vec<f64>> {
    let m = game.player_count();
    debug_assert_eq!(m, profile.identity_count());
    let full = Coalition::full(m);
    match rule {
        BaselineRule::UniformIdentity => {
            let v = game.value(full)?;
            Ok(vec![v / m as f64; m])
        }
        BaselineRule::PerExampleUniform => {
            let v = game.value(full)?;
            let sizes = profile.identity_sizes();
            let r: usize = sizes.iter().sum();
            Ok(sizes.iter().map(|&s| if r == 0 { 0.0 } else { v * s as f64 / r as f64 }).collect())
        }
        BaselineRule::LeaveOneOut => {
            let v = game.value(full)?;
            (0..m).map(|j| Ok(v - game.value(full.without(j))?)).collect()
        }
        BaselineRule::Semivalue(spec) => Ok(estimate(game, spec)?.values),
    }
}
