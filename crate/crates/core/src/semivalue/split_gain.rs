use super::{exact_semivalue, weight, SemivalueFamily};
use crate::error::{invalid, Error, Result};
use crate::game::{make_unanimity_game, Coalition};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitGain<T> {
    pub additive: T,
    pub multiplicative: T,
}

fn check(family: SemivalueFamily, n: usize, k: usize) -> Result<()> {
    if n < 2 || k < 2 {
        return invalid("split gain needs n >= 2 and k >= 2");
    }
    if family.is_normalized() {
        return Err(Error::Unsupported(format!("no closed-form split gain for {family}")));
    }
    Ok(())
}

/// Gain of one provider splitting into `k` pseudonyms in an `n`-player
/// unanimity game: each player is pivotal only for the coalition of all the
/// others, so the attacker moves from `ω_{n,n−1}` to `k·ω_{n+k−1,n+k−2}`.
pub fn closed_form_split_gain<T: Scalar>(family: SemivalueFamily, n: usize, k: usize) -> Result<SplitGain<T>> {
    check(family, n, k)?;
    let honest: T = weight(family, n, n - 1)?;
    let split = T::from_count(k) * weight::<T>(family, n + k - 1, n + k - 2)?;
    Ok(SplitGain { additive: split - honest, multiplicative: split / honest })
}

/// The same quantity measured by exact enumeration on the two unanimity
/// games.
pub fn measured_split_gain<T: Scalar>(family: SemivalueFamily, n: usize, k: usize) -> Result<SplitGain<T>> {
    check(family, n, k)?;
    let honest = make_unanimity_game(n, Coalition::full(n))?;
    let honest_pay = exact_semivalue::<T, _>(&honest, family)?.values[0];
    let m = n + k - 1;
    let split = make_unanimity_game(m, Coalition::full(m))?;
    let phi = exact_semivalue::<T, _>(&split, family)?.values;
    let attacker = phi[n - 1..].iter().fold(T::zero(), |a, &b| a + b);
    Ok(SplitGain { additive: attacker - honest_pay, multiplicative: attacker / honest_pay })
}
