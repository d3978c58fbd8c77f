use crate::error::{invalid, Error, Result};
use crate::names::{parse_call, Args};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Coalition-size weight families.
///
/// Beta weights use the Beta-binomial convention
/// `ω_{K,s} = B(s+β, K−s−1+α) / B(α, β)`, so `Beta(1,1)` is Shapley and
/// larger `β` tilts mass toward large coalitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SemivalueFamily {
    Shapley,
    BanzhafRaw,
    BanzhafNormalized,
    Beta { alpha: f64, beta: f64 },
    BetaNormalized { alpha: f64, beta: f64 },
}

impl SemivalueFamily {
    /// Whether payments are rescaled to sum to the grand value.
    pub fn is_normalized(self) -> bool {
        matches!(self, SemivalueFamily::BanzhafNormalized | SemivalueFamily::BetaNormalized { .. })
    }

    /// The same weights without the final rescaling.
    pub fn raw(self) -> SemivalueFamily {
        match self {
            SemivalueFamily::BanzhafNormalized => SemivalueFamily::BanzhafRaw,
            SemivalueFamily::BetaNormalized { alpha, beta } => SemivalueFamily::Beta { alpha, beta },
            other => other,
        }
    }

    pub fn is_banzhaf(self) -> bool {
        matches!(self, SemivalueFamily::BanzhafRaw | SemivalueFamily::BanzhafNormalized)
    }

    pub fn validate(self) -> Result<()> {
        match self {
            SemivalueFamily::Beta { alpha, beta } | SemivalueFamily::BetaNormalized { alpha, beta }
                if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) =>
            {
                invalid("Beta parameters must be positive and finite")
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SemivalueFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemivalueFamily::Shapley => write!(f, "shapley"),
            SemivalueFamily::BanzhafRaw => write!(f, "banzhaf_raw"),
            SemivalueFamily::BanzhafNormalized => write!(f, "banzhaf_normalized"),
            SemivalueFamily::Beta { alpha, beta } => write!(f, "beta(alpha={alpha},beta={beta})"),
            SemivalueFamily::BetaNormalized { alpha, beta } => {
                write!(f, "beta_normalized(alpha={alpha},beta={beta})")
            }
        }
    }
}

impl FromStr for SemivalueFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s)?;
        let mut a = Args::new(&name, args);
        let fam = match name.as_str() {
            "shapley" => SemivalueFamily::Shapley,
            "banzhaf_raw" | "banzhaf" => SemivalueFamily::BanzhafRaw,
            "banzhaf_normalized" => SemivalueFamily::BanzhafNormalized,
            "beta" => SemivalueFamily::Beta { alpha: a.take(&["alpha"], Some(2.0))?, beta: a.take(&["beta"], Some(2.0))? },
            "beta_normalized" => SemivalueFamily::BetaNormalized {
                alpha: a.take(&["alpha"], Some(2.0))?,
                beta: a.take(&["beta"], Some(2.0))?,
            },
            other => return Err(Error::Parse(format!("unknown semivalue family {other:?}"))),
        };
        a.finish()?;
        fam.validate()?;
        Ok(fam)
    }
}

/// `ω_{K,s}` for `0 <= s <= K-1`. Normalized families share the weights of
/// their raw counterpart.
pub fn weight<T: Scalar>(family: SemivalueFamily, players: usize, s: usize) -> Result<T> {
    family.validate()?;
    if players == 0 || s >= players {
        return invalid(format!("coalition size {s} outside [0, {players})"));
    }
    let one = T::one();
    let n = |x: usize| T::from_count(x);
    Ok(match family {
        SemivalueFamily::Shapley => one / (n(players) * binomial::<T>(players - 1, s)),
        SemivalueFamily::BanzhafRaw | SemivalueFamily::BanzhafNormalized => {
            let mut w = one;
            let half = one / n(2);
            for _ in 0..players - 1 {
                w = w * half;
            }
            w
        }
        SemivalueFamily::Beta { alpha, beta } | SemivalueFamily::BetaNormalized { alpha, beta } => {
            let a = T::from_f64_lossy(alpha);
            let b = T::from_f64_lossy(beta);
            let mut num = one;
            for i in 0..s {
                num = num * (b + n(i));
            }
            for j in 0..players - s - 1 {
                num = num * (a + n(j));
            }
            let mut den = one;
            for l in 0..players - 1 {
                den = den * (a + b + n(l));
            }
            num / den
        }
    })
}

pub fn binomial<T: Scalar>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut acc = T::one();
    for i in 0..k {
        acc = acc * T::from_count(n - i) / T::from_count(i + 1);
    }
    acc
}

/// All weights `ω_{K,0..K-1}`.
pub fn weight_vector<T: Scalar>(family: SemivalueFamily, players: usize) -> Result<Vec<T>> {
    (0..players).map(|s| weight(family, players, s)).collect()
}
