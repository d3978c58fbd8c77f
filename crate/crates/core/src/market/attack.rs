use super::{SubmittedProfile, Unit};
use crate::error::{invalid, Error, Result};
use crate::names::{parse_call, Args};
use crate::rng::{stream_rng, STREAM_ATTACK};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitScheme {
    RoundRobin,
    Block,
}

/// Attack families with stable names such as `sybil_split_k(k=3)`.
///
/// The two duplication families keep the attacker's original identity and
/// add two sybil pseudonyms; the copies are dealt alternately to the sybils.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AttackFamily {
    Honest,
    ExactDup2xSybils { fraction: f64 },
    NearDuplicate2xSybils { sigma: f64, fraction: f64 },
    SybilSplitK { k: usize, scheme: SplitScheme },
    LabelNoise { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub family: AttackFamily,
    pub attacker: usize,
}

impl AttackSpec {
    pub fn new(family: AttackFamily) -> Self {
        AttackSpec { family, attacker: 0 }
    }

    /// Wrapper fixing the attacker to provider 0.
    pub fn provider_zero_attack(family: AttackFamily) -> Self {
        AttackSpec { family, attacker: 0 }
    }

    pub fn honest() -> Self {
        AttackSpec::new(AttackFamily::Honest)
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            AttackFamily::Honest => Ok(()),
            AttackFamily::ExactDup2xSybils { fraction } => check_fraction(fraction),
            AttackFamily::NearDuplicate2xSybils { sigma, fraction } => {
                if !(sigma >= 0.0) || !sigma.is_finite() {
                    return invalid("sigma must be >= 0");
                }
                check_fraction(fraction)
            }
            AttackFamily::SybilSplitK { k, .. } if k < 2 => invalid("sybil split needs k >= 2"),
            AttackFamily::SybilSplitK { .. } => Ok(()),
            AttackFamily::LabelNoise { p } if !(0.0..=0.5).contains(&p) => {
                invalid("label noise p must lie in [0, 0.5]")
            }
            AttackFamily::LabelNoise { .. } => Ok(()),
        }
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if (0.0..=1.0).contains(&f) {
        Ok(())
    } else {
        invalid("duplication fraction must lie in [0, 1]")
    }
}

impl fmt::Display for AttackFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackFamily::Honest => write!(f, "honest"),
            AttackFamily::ExactDup2xSybils { fraction } => write!(f, "exact_dup_2x_sybils(f={fraction})"),
            AttackFamily::NearDuplicate2xSybils { sigma, fraction } if *fraction == 1.0 => {
                write!(f, "near_duplicate_2x_sybils(sigma={sigma})")
            }
            AttackFamily::NearDuplicate2xSybils { sigma, fraction } => {
                write!(f, "near_duplicate_2x_sybils(sigma={sigma},f={fraction})")
            }
            AttackFamily::SybilSplitK { k, scheme: SplitScheme::RoundRobin } => write!(f, "sybil_split_k(k={k})"),
            AttackFamily::SybilSplitK { k, scheme: SplitScheme::Block } => {
                write!(f, "sybil_split_k(k={k},scheme=block)")
            }
            AttackFamily::LabelNoise { p } => write!(f, "label_noise(p={p})"),
        }
    }
}

impl fmt::Display for AttackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.attacker == 0 {
            write!(f, "{}", self.family)
        } else {
            write!(f, "{}@{}", self.family, self.attacker)
        }
    }
}

impl FromStr for AttackFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s)?;
        let mut a = Args::new(&name, args);
        let family = match name.as_str() {
            "honest" => AttackFamily::Honest,
            "exact_dup_2x_sybils" => AttackFamily::ExactDup2xSybils { fraction: a.take(&["f", "fraction"], Some(1.0))? },
            "near_duplicate_2x_sybils" | "near_dup" => AttackFamily::NearDuplicate2xSybils {
                sigma: a.take(&["sigma"], Some(0.03))?,
                fraction: a.take(&["f", "fraction"], Some(1.0))?,
            },
            "sybil_split_k" => {
                let k = a.take(&["k"], Some(3))?;
                let scheme: String = a.take(&["scheme"], Some("round_robin".to_string()))?;
                let scheme = match scheme.as_str() {
                    "round_robin" => SplitScheme::RoundRobin,
                    "block" => SplitScheme::Block,
                    other => return Err(Error::Parse(format!("unknown split scheme {other:?}"))),
                };
                AttackFamily::SybilSplitK { k, scheme }
            }
            "label_noise" => AttackFamily::LabelNoise { p: a.take(&["p"], Some(0.3))? },
            other => return Err(Error::Parse(format!("unknown attack {other:?}"))),
        };
        a.finish()?;
        Ok(family)
    }
}

impl FromStr for AttackSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let spec = if let Some(inner) = s.strip_prefix("provider_zero_attack(").and_then(|r| r.strip_suffix(')')) {
            AttackSpec::provider_zero_attack(inner.parse()?)
        } else if let Some((fam, who)) = s.rsplit_once('@') {
            let attacker = who
                .parse()
                .map_err(|_| Error::Parse(format!("bad attacker index in {s:?}")))?;
            AttackSpec { family: fam.parse()?, attacker }
        } else {
            AttackSpec::new(s.parse()?)
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Applies the attack to an honest profile. The result links back to the
/// honest profile.
pub fn apply_attack(profile: &SubmittedProfile, spec: &AttackSpec, seed: u64) -> Result<SubmittedProfile> {
    spec.validate()?;
    if !profile.is_honest() {
        return invalid("attacks apply to honest profiles only");
    }
    let att = spec.attacker;
    if att >= profile.latent_count() {
        return invalid(format!("attacker {att} outside {} providers", profile.latent_count()));
    }
    let honest = Arc::new(profile.clone());
    if spec.family == AttackFamily::Honest {
        return Ok(profile.clone().with_reference(honest, *spec));
    }
    let own: Vec<usize> = (0..profile.units().len())
        .filter(|&i| profile.units()[i].latent_owner == att)
        .collect();
    if own.is_empty() {
        return invalid(format!("attacker {att} holds no units"));
    }
    let mut rng = stream_rng(seed, STREAM_ATTACK, att as u64);
    let mut units: Vec<Unit> = profile.units().to_vec();
    let mut latent_of_identity = profile.latent_of_identity().to_vec();
    let mut next_id = profile.max_unit_id().map_or(0, |m| m + 1);
    let mut next_ts = units.iter().map(|u| u.timestamp).max().map_or(0, |t| t + 1);

    match spec.family {
        AttackFamily::Honest => unreachable!(),
        AttackFamily::ExactDup2xSybils { fraction } | AttackFamily::NearDuplicate2xSybils { fraction, .. } => {
            let sigma = match spec.family {
                AttackFamily::NearDuplicate2xSybils { sigma, .. } => sigma,
                _ => 0.0,
            };
            let count = ((fraction * own.len() as f64).round() as usize).min(own.len());
            let mut chosen = own.clone();
            chosen.shuffle(&mut rng);
            chosen.truncate(count);
            chosen.sort_unstable();
            let first = latent_of_identity.len();
            latent_of_identity.extend([att, att]);
            for (j, &i) in chosen.iter().enumerate() {
                let mut copy = profile.units()[i].clone();
                if sigma > 0.0 {
                    for x in copy.payload.features.iter_mut() {
                        *x += sigma * rng.sample::<f64, _>(StandardNormal);
                    }
                }
                copy.unit_id = next_id;
                copy.identity = first + j % 2;
                copy.timestamp = next_ts;
                next_id += 1;
                next_ts += 1;
                units.push(copy);
            }
        }
        AttackFamily::SybilSplitK { k, scheme } => {
            let first = latent_of_identity.len();
            latent_of_identity.extend(std::iter::repeat_n(att, k - 1));
            let block = own.len().div_ceil(k);
            for (j, &i) in own.iter().enumerate() {
                let slot = match scheme {
                    SplitScheme::RoundRobin => j % k,
                    SplitScheme::Block => j / block,
                };
                units[i].identity = if slot == 0 { att } else { first + slot - 1 };
            }
        }
        AttackFamily::LabelNoise { p } => {
            let classes = profile.n_classes();
            let count = ((p * own.len() as f64) - 1e-9).ceil().max(0.0) as usize;
            let mut chosen = own.clone();
            chosen.shuffle(&mut rng);
            chosen.truncate(count);
            chosen.sort_unstable();
            for &i in &chosen {
                let old = units[i].payload.label;
                units[i].payload.label = (old + 1 + rng.gen_range(0..classes - 1)) % classes;
            }
        }
    }
    let attacked = SubmittedProfile::new(
        units,
        latent_of_identity,
        profile.latent_count(),
        profile.n_classes(),
        profile.dim(),
    )?;
    Ok(attacked.with_reference(honest, *spec))
}
