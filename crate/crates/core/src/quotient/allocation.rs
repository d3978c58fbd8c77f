use crate::error::{Error, Result};
use crate::market::{SubmittedProfile, Unit, WeightedUnit};
use crate::names::parse_call;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

/// Within-cluster share rule.
///
/// `LatentShare` measures each latent owner's presence by the number of
/// distinct `source_id`s it contributes to the cluster, so copies and
/// pseudonyms of the same origin never add weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationRule {
    EqualSubmitted,
    CountCanonical,
    CountRaw,
    LatentShare,
}

impl fmt::Display for AllocationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AllocationRule::EqualSubmitted => "equal_submitted",
            AllocationRule::CountCanonical => "count_canonical",
            AllocationRule::CountRaw => "count_raw",
            AllocationRule::LatentShare => "latent_share",
        })
    }
}

impl FromStr for AllocationRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s)?;
        if !args.is_empty() {
            return Err(Error::Parse(format!("allocation rule {name:?} takes no parameters")));
        }
        match name.as_str() {
            "equal_submitted" => Ok(AllocationRule::EqualSubmitted),
            "count_canonical" => Ok(AllocationRule::CountCanonical),
            "count_raw" => Ok(AllocationRule::CountRaw),
            "latent_share" => Ok(AllocationRule::LatentShare),
            other => Err(Error::Parse(format!("unknown allocation rule {other:?}"))),
        }
    }
}

/// `(identity, share)` pairs for one cluster, ascending by identity; shares
/// sum to one.
pub fn allocate_within_cluster(
    raw_units: &[&Unit],
    canonical: &[WeightedUnit],
    rule: AllocationRule,
    profile: &SubmittedProfile,
) -> Vec<(usize, f64)> {
    let identities: BTreeSet<usize> = raw_units.iter().map(|u| u.identity).collect();
    let counts: BTreeMap<usize, f64> = match rule {
        AllocationRule::EqualSubmitted => identities.iter().map(|&j| (j, 1.0)).collect(),
        AllocationRule::CountCanonical => {
            let mut m: BTreeMap<usize, f64> = identities.iter().map(|&j| (j, 0.0)).collect();
            for wu in canonical {
                *m.entry(wu.unit.identity).or_default() += 1.0;
            }
            m
        }
        AllocationRule::CountRaw => {
            let mut m = BTreeMap::new();
            for u in raw_units {
                *m.entry(u.identity).or_default() += 1.0;
            }
            m
        }
        AllocationRule::LatentShare => {
            let latent = profile.latent_of_identity();
            let mut sources: BTreeMap<usize, BTreeSet<u64>> = BTreeMap::new();
            for u in raw_units {
                sources.entry(u.latent_owner).or_default().insert(u.source_id);
            }
            identities
                .iter()
                .map(|&j| {
                    let owner = latent[j];
                    let siblings = identities.iter().filter(|&&i| latent[i] == owner).count();
                    (j, sources[&owner].len() as f64 / siblings as f64)
                })
                .collect()
        }
    };
    let total: f64 = counts.values().sum();
    if !(total > 0.0) {
        let h = counts.len() as f64;
        return counts.into_keys().map(|j| (j, 1.0 / h)).collect();
    }
    counts.into_iter().map(|(j, c)| (j, c / total)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Payload;

    fn unit(id: u64, identity: usize, latent: usize, source: u64) -> Unit {
        Unit {
            unit_id: id,
            payload: Payload { features: vec![id as f64], label: 0 },
            latent_owner: latent,
            identity,
            source_id: source,
            timestamp: id,
        }
    }

    fn profile(latent: Vec<usize>) -> SubmittedProfile {
        let n = latent.iter().max().unwrap() + 1;
        SubmittedProfile::new(Vec::new(), latent, n, 1, 1).unwrap()
    }

    #[test]
    fn single_identity_gets_everything() {
        let p = profile(vec![0]);
        let u = [unit(1, 0, 0, 1), unit(2, 0, 0, 2)];
        let raw: Vec<&Unit> = u.iter().collect();
        for rule in [AllocationRule::EqualSubmitted, AllocationRule::CountCanonical, AllocationRule::CountRaw, AllocationRule::LatentShare] {
            assert_eq!(allocate_within_cluster(&raw, &[], rule, &p).iter().map(|x| x.1).sum::<f64>(), 1.0);
            assert_eq!(allocate_within_cluster(&raw, &[], rule, &p)[0].0, 0);
        }
    }

    #[test]
    fn canonical_counts_are_proportional() {
        let p = profile(vec![0, 1]);
        let u = [unit(1, 0, 0, 1), unit(2, 0, 0, 2), unit(3, 1, 1, 3)];
        let raw: Vec<&Unit> = u.iter().collect();
        let canon: Vec<WeightedUnit> = u.iter().cloned().map(WeightedUnit::unit_weight).collect();
        let a = allocate_within_cluster(&raw, &canon, AllocationRule::CountCanonical, &p);
        assert_eq!(a, vec![(0, 2.0 / 3.0), (1, 1.0 / 3.0)]);
    }

    #[test]
    fn equal_submitted_rewards_splitting() {
        let p = profile(vec![0, 1, 0]);
        let u = [unit(1, 0, 0, 1), unit(2, 2, 0, 2), unit(3, 1, 1, 3)];
        let raw: Vec<&Unit> = u.iter().collect();
        let a = allocate_within_cluster(&raw, &[], AllocationRule::EqualSubmitted, &p);
        assert!((a[0].1 + a[2].1 - 2.0 / 3.0).abs() < 1e-15);
        let neutral = allocate_within_cluster(&raw, &[], AllocationRule::LatentShare, &p);
        assert!((neutral[0].1 + neutral[2].1 - 2.0 / 3.0).abs() < 1e-15);
        let honest = profile(vec![0, 1]);
        let h = [unit(1, 0, 0, 1), unit(2, 0, 0, 2), unit(3, 1, 1, 3)];
        let hraw: Vec<&Unit> = h.iter().collect();
        let hs = allocate_within_cluster(&hraw, &[], AllocationRule::LatentShare, &honest);
        assert!((hs[0].1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn names_round_trip() {
        for r in [AllocationRule::EqualSubmitted, AllocationRule::CountCanonical, AllocationRule::CountRaw, AllocationRule::LatentShare] {
            assert_eq!(r.to_string().parse::<AllocationRule>().unwrap(), r);
        }
        assert!("proportional".parse::<AllocationRule>().is_err());
    }
}
