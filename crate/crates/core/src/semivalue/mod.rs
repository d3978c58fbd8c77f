//! Semivalues: exact enumeration, Monte Carlo estimators, normalization,
//! sample budgets and closed-form split gains.

mod split_gain;
mod weights;

pub use split_gain::{closed_form_split_gain, measured_split_gain, SplitGain};
pub use weights::{binomial, weight, weight_vector, SemivalueFamily};

use crate::error::{invalid, Error, Result};
use crate::game::{Coalition, CoalitionGame};
use crate::names::{parse_call, Args};
use crate::rng::{stream_rng, STREAM_PERMUTATION, STREAM_STRATIFIED, STREAM_SUBSET};
use crate::scalar::Scalar;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Largest player count for exhaustive enumeration.
pub const EXACT_LIMIT: usize = 16;
pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_NORMALIZATION_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    Exact,
    /// Random permutations; Shapley only.
    Permutation { samples: usize },
    /// Uniform random subsets per player; Banzhaf only.
    RandomSubset { samples: usize },
    /// Coalition size drawn from the family's size distribution, then a
    /// uniform subset of that size; valid for every family.
    Stratified { samples: usize },
    /// The natural sampler for the family.
    Auto { samples: usize },
}

impl Estimator {
    pub fn samples(self) -> usize {
        match self {
            Estimator::Exact => 0,
            Estimator::Permutation { samples }
            | Estimator::RandomSubset { samples }
            | Estimator::Stratified { samples }
            | Estimator::Auto { samples } => samples,
        }
    }

    /// Resolves `Auto` and checks compatibility with the family.
    pub fn resolve(self, family: SemivalueFamily) -> Result<Estimator> {
        let est = match self {
            Estimator::Auto { samples } => match family {
                SemivalueFamily::Shapley => Estimator::Permutation { samples },
                f if f.is_banzhaf() => Estimator::RandomSubset { samples },
                _ => Estimator::Stratified { samples },
            },
            other => other,
        };
        match est {
            Estimator::Permutation { .. } if family != SemivalueFamily::Shapley => {
                Err(Error::Unsupported(format!("permutation estimator requires Shapley weights, got {family}")))
            }
            Estimator::RandomSubset { .. } if !family.is_banzhaf() => {
                Err(Error::Unsupported(format!("random-subset estimator requires Banzhaf weights, got {family}")))
            }
            e if e != Estimator::Exact && e.samples() == 0 => invalid("sampled estimators need at least one sample"),
            e => Ok(e),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Exact => write!(f, "exact"),
            Estimator::Permutation { samples } => write!(f, "permutation(R={samples})"),
            Estimator::RandomSubset { samples } => write!(f, "subset(R={samples})"),
            Estimator::Stratified { samples } => write!(f, "stratified(R={samples})"),
            Estimator::Auto { samples } => write!(f, "auto(R={samples})"),
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s)?;
        let mut a = Args::new(&name, args);
        let est = match name.as_str() {
            "exact" => Estimator::Exact,
            "permutation" => Estimator::Permutation { samples: a.take(&["R", "samples"], Some(256))? },
            "subset" | "random_subset" => Estimator::RandomSubset { samples: a.take(&["R", "samples"], Some(256))? },
            "stratified" => Estimator::Stratified { samples: a.take(&["R", "samples"], Some(256))? },
            "auto" => Estimator::Auto { samples: a.take(&["R", "samples"], Some(256))? },
            other => return Err(Error::Parse(format!("unknown estimator {other:?}"))),
        };
        a.finish()?;
        Ok(est)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemivalueSpec {
    pub family: SemivalueFamily,
    pub estimator: Estimator,
    /// Games with at most this many players are always enumerated exactly.
    pub exact_n_limit: usize,
    pub master_seed: u64,
    pub delta: f64,
}

impl SemivalueSpec {
    pub fn exact(family: SemivalueFamily) -> Self {
        SemivalueSpec { family, estimator: Estimator::Exact, exact_n_limit: 4, master_seed: 0, delta: DEFAULT_DELTA }
    }

    pub fn sampled(family: SemivalueFamily, samples: usize, master_seed: u64) -> Self {
        SemivalueSpec {
            family,
            estimator: Estimator::Auto { samples },
            exact_n_limit: 4,
            master_seed,
            delta: DEFAULT_DELTA,
        }
    }

    pub fn with_exact_limit(mut self, limit: usize) -> Self {
        self.exact_n_limit = limit;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemivalueResult<T> {
    pub values: Vec<T>,
    pub estimator: Estimator,
    pub samples_used: usize,
    /// Per-player half-width at confidence `1 - delta`; zero when exact.
    pub eta_bound: f64,
    /// Set once the values have been rescaled to the grand value.
    pub normalized: bool,
}

/// Hoeffding half-width `V * sqrt(ln(2K/δ) / (2R))`.
pub fn eta_bound(value_range: f64, players: usize, samples: usize, delta: f64) -> f64 {
    if samples == 0 {
        return 0.0;
    }
    value_range * ((2.0 * players as f64 / delta).ln() / (2.0 * samples as f64)).sqrt()
}

/// Samples needed for half-width `eta`: `ceil(V² ln(2K/δ) / (2η²))`.
pub fn sample_budget(value_range: f64, eta: f64, players: usize, delta: f64) -> Result<usize> {
    if !(eta > 0.0) || !(delta > 0.0 && delta < 1.0) || players == 0 {
        return invalid("sample_budget needs eta > 0, 0 < delta < 1 and K >= 1");
    }
    let r = value_range * value_range * (2.0 * players as f64 / delta).ln() / (2.0 * eta * eta);
    Ok((r.ceil() as usize).max(1))
}

/// Estimates (or enumerates) the semivalue and rescales for normalized
/// families.
pub fn estimate<T: Scalar, G: CoalitionGame<T>>(game: &G, spec: &SemivalueSpec) -> Result<SemivalueResult<T>> {
    spec.family.validate()?;
    let k = game.player_count();
    let raw = if spec.estimator == Estimator::Exact || k <= spec.exact_n_limit {
        exact_semivalue(game, spec.family)?
    } else {
        match spec.estimator.resolve(spec.family)? {
            Estimator::Permutation { samples } => permutation_shapley_with(game, samples, spec.master_seed, spec.delta)?,
            Estimator::RandomSubset { samples } => random_subset_banzhaf_with(game, samples, spec.master_seed, spec.delta)?,
            Estimator::Stratified { samples } => {
                stratified_semivalue(game, spec.family, samples, spec.master_seed, spec.delta)?
            }
            Estimator::Exact | Estimator::Auto { .. } => unreachable!("resolved above"),
        }
    };
    if spec.family.is_normalized() {
        let grand = game.value(Coalition::full(k))?;
        normalize_payments(&raw, grand, DEFAULT_NORMALIZATION_FLOOR)
    } else {
        Ok(raw)
    }
}

fn value_table<T: Scalar, G: CoalitionGame<T>>(game: &G) -> Result<Vec<T>> {
    let k = game.player_count();
    (0..1u64 << k)
        .into_par_iter()
        .map(|bits| game.value(Coalition::from_bits(bits)))
        .collect()
}

/// Exhaustive `φ_k = Σ_{Q ∌ k} ω_{K,|Q|} (v(Q ∪ k) − v(Q))`.
pub fn exact_semivalue<T: Scalar, G: CoalitionGame<T>>(game: &G, family: SemivalueFamily) -> Result<SemivalueResult<T>> {
    let k = game.player_count();
    if k == 0 {
        return invalid("game has no players");
    }
    if k > EXACT_LIMIT {
        return Err(Error::BudgetExceeded { players: k, limit: EXACT_LIMIT });
    }
    let table = value_table(game)?;
    Ok(SemivalueResult {
        values: semivalue_from_table(&table, k, family)?,
        estimator: Estimator::Exact,
        samples_used: 0,
        eta_bound: 0.0,
        normalized: false,
    })
}

/// Exact semivalue of a tabulated game (`table[bits] = v(bits)`).
pub fn semivalue_from_table<T: Scalar>(table: &[T], players: usize, family: SemivalueFamily) -> Result<Vec<T>> {
    if table.len() != 1usize << players {
        return invalid("value table length must be 2^K");
    }
    let w = weight_vector::<T>(family, players)?;
    let mut phi = vec![T::zero(); players];
    for bits in 0..table.len() {
        let size = (bits as u64).count_ones() as usize;
        for (i, p) in phi.iter_mut().enumerate() {
            if bits & (1 << i) == 0 {
                *p = *p + w[size] * (table[bits | (1 << i)] - table[bits]);
            }
        }
    }
    Ok(phi)
}

pub fn permutation_shapley<T: Scalar, G: CoalitionGame<T>>(
    game: &G,
    samples: usize,
    master_seed: u64,
) -> Result<SemivalueResult<T>> {
    permutation_shapley_with(game, samples, master_seed, DEFAULT_DELTA)
}

fn permutation_shapley_with<T: Scalar, G: CoalitionGame<T>>(
    game: &G,
    samples: usize,
    master_seed: u64,
    delta: f64,
) -> Result<SemivalueResult<T>> {
    let k = game.player_count();
    if samples == 0 || k == 0 {
        return invalid("permutation estimator needs R >= 1 and K >= 1");
    }
    let draws: Vec<Vec<T>> = (0..samples)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(master_seed, STREAM_PERMUTATION, r as u64);
            let mut order: Vec<usize> = (0..k).collect();
            order.shuffle(&mut rng);
            let mut prefix = Coalition::EMPTY;
            let mut prev = game.value(prefix)?;
            let mut out = vec![T::zero(); k];
            for &i in &order {
                prefix = prefix.with(i);
                let cur = game.value(prefix)?;
                out[i] = cur - prev;
                prev = cur;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(average(draws, k, samples, Estimator::Permutation { samples }, game, delta))
}

pub fn random_subset_banzhaf<T: Scalar, G: CoalitionGame<T>>(
    game: &G,
    samples: usize,
    master_seed: u64,
) -> Result<SemivalueResult<T>> {
    random_subset_banzhaf_with(game, samples, master_seed, DEFAULT_DELTA)
}

fn random_subset_banzhaf_with<T: Scalar, G: CoalitionGame<T>>(
    game: &G,
    samples: usize,
    master_seed: u64,
    delta: f64,
) -> Result<SemivalueResult<T>> {
    let k = game.player_count();
    if samples == 0 || k == 0 {
        return invalid("random-subset estimator needs R >= 1 and K >= 1");
    }
    let draws = per_player_draws(game, samples, |i, r| {
        let mut rng = stream_rng(master_seed, STREAM_SUBSET, ((i as u64) << 32) | r as u64);
        (0..k).filter(|&j| j != i && rng.gen_bool(0.5)).collect()
    })?;
    Ok(average(draws, k, samples, Estimator::RandomSubset { samples }, game, delta))
}

/// Stratified-size sampler for an arbitrary weight family.
pub fn stratified_semivalue<T: Scalar, G: CoalitionGame<T>>(
    game: &G,
    family: SemivalueFamily,
    samples: usize,
    master_seed: u64,
    delta: f64,
) -> Result<SemivalueResult<T>> {
    let k = game.player_count();
    if samples == 0 || k == 0 {
        return invalid("stratified estimator needs R >= 1 and K >= 1");
    }
    let w = weight_vector::<f64>(family, k)?;
    let mut cdf = Vec::with_capacity(k);
    let mut acc = 0.0;
    for (s, ws) in w.iter().enumerate() {
        acc += binomial::<f64>(k - 1, s) * ws;
        cdf.push(acc);
    }
    let draws = per_player_draws(game, samples, |i, r| {
        let mut rng = stream_rng(master_seed, STREAM_STRATIFIED, ((i as u64) << 32) | r as u64);
        let u: f64 = rng.gen::<f64>() * acc;
        let size = cdf.iter().position(|&c| u < c).unwrap_or(k - 1);
        let mut others: Vec<usize> = (0..k).filter(|&j| j != i).collect();
        others.shuffle(&mut rng);
        others.truncate(size);
        others
    })?;
    Ok(average(draws, k, samples, Estimator::Stratified { samples }, game, delta))
}

/// One marginal contribution per (player, sample); `draw` picks the
/// coalition of other players.
fn per_player_draws<T: Scalar, G: CoalitionGame<T>>(
    game: &G,
    samples: usize,
    draw: impl Fn(usize, usize) -> Vec<usize> + Sync,
) -> Result<Vec<Vec<T>>> {
    let k = game.player_count();
    (0..samples)
        .into_par_iter()
        .map(|r| {
            (0..k)
                .map(|i| {
                    let q = Coalition::from_members(draw(i, r));
                    Ok(game.value(q.with(i))? - game.value(q)?)
                })
                .collect::<Result<Vec<T>>>()
        })
        .collect()
}

fn average<T: Scalar, G: CoalitionGame<T>>(
    draws: Vec<Vec<T>>,
    k: usize,
    samples: usize,
    estimator: Estimator,
    game: &G,
    delta: f64,
) -> SemivalueResult<T> {
    let mut sum = vec![T::zero(); k];
    for d in &draws {
        for (s, x) in sum.iter_mut().zip(d) {
            *s = *s + *x;
        }
    }
    let r = T::from_count(samples);
    SemivalueResult {
        values: sum.into_iter().map(|s| s / r).collect(),
        estimator,
        samples_used: samples,
        eta_bound: eta_bound(game.value_range().to_f64_lossy().abs(), k, samples, delta),
        normalized: false,
    }
}

/// Rescales so the values sum to `grand_value`.
pub fn normalize_payments<T: Scalar>(result: &SemivalueResult<T>, grand_value: T, floor: f64) -> Result<SemivalueResult<T>> {
    let sum = result.values.iter().fold(T::zero(), |a, &b| a + b);
    let s = sum.to_f64_lossy();
    if !(s.abs() >= floor) {
        return Err(Error::DegenerateNormalization { sum: s, floor });
    }
    Ok(SemivalueResult {
        values: result.values.iter().map(|&v| grand_value * v / sum).collect(),
        normalized: true,
        ..result.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{make_random_monotone_game, make_unanimity_game, TableGame};
    use crate::scalar::Rational;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn unanimity_semivalues() {
        let g2 = make_unanimity_game(2, Coalition::full(2)).unwrap();
        let g3 = make_unanimity_game(3, Coalition::full(3)).unwrap();
        let sh: SemivalueResult<Rational> = exact_semivalue(&g2, SemivalueFamily::Shapley).unwrap();
        assert_eq!(sh.values, vec![r(1, 2); 2]);
        let sh: SemivalueResult<Rational> = exact_semivalue(&g3, SemivalueFamily::Shapley).unwrap();
        assert_eq!(sh.values, vec![r(1, 3); 3]);
        let bz: SemivalueResult<Rational> = exact_semivalue(&g3, SemivalueFamily::BanzhafRaw).unwrap();
        assert_eq!(bz.values, vec![r(1, 4); 3]);
        assert_eq!(bz.eta_bound, 0.0);
    }

    #[test]
    fn exact_rejects_large_games() {
        let g = make_unanimity_game(17, Coalition::singleton(0)).unwrap();
        let e = exact_semivalue::<f64, _>(&g, SemivalueFamily::Shapley).unwrap_err();
        assert!(matches!(e, Error::BudgetExceeded { players: 17, .. }));
    }

    #[test]
    fn permutation_estimator_examples() {
        let g3 = make_unanimity_game(3, Coalition::full(3)).unwrap();
        let est: SemivalueResult<f64> = permutation_shapley(&g3, 4096, 0).unwrap();
        assert!(est.values.iter().all(|v| (v - 1.0 / 3.0).abs() < 0.03));
        let again: SemivalueResult<f64> = permutation_shapley(&g3, 4096, 0).unwrap();
        assert_eq!(est, again);
        let g1 = make_unanimity_game(1, Coalition::singleton(0)).unwrap();
        let one: SemivalueResult<f64> = permutation_shapley(&g1, 7, 3).unwrap();
        assert_eq!(one.values, vec![1.0]);
    }

    #[test]
    fn subset_estimator_examples() {
        let g2 = make_unanimity_game(2, Coalition::full(2)).unwrap();
        let g3 = make_unanimity_game(3, Coalition::full(3)).unwrap();
        let e2: SemivalueResult<f64> = random_subset_banzhaf(&g2, 4096, 1).unwrap();
        assert!(e2.values.iter().all(|v| (v - 0.5).abs() < 0.03));
        let e3: SemivalueResult<f64> = random_subset_banzhaf(&g3, 4096, 1).unwrap();
        assert!(e3.values.iter().all(|v| (v - 0.25).abs() < 0.03));
        let g1 = make_unanimity_game(1, Coalition::singleton(0)).unwrap();
        let one: SemivalueResult<f64> = random_subset_banzhaf(&g1, 5, 1).unwrap();
        assert_eq!(one.values, vec![1.0]);
    }

    #[test]
    fn stratified_matches_exact_beta() {
        let g = make_random_monotone_game(5, 3).unwrap();
        let fam = SemivalueFamily::Beta { alpha: 2.0, beta: 2.0 };
        let exact = exact_semivalue(&g, fam).unwrap();
        let est = stratified_semivalue(&g, fam, 20_000, 4, DEFAULT_DELTA).unwrap();
        for (a, b) in exact.values.iter().zip(&est.values) {
            assert!((a - b).abs() < 0.01, "{a} vs {b}");
        }
    }

    #[test]
    fn estimator_family_compatibility() {
        let g = make_random_monotone_game(6, 1).unwrap();
        let bad = SemivalueSpec {
            estimator: Estimator::Permutation { samples: 10 },
            ..SemivalueSpec::exact(SemivalueFamily::BanzhafRaw)
        };
        assert!(matches!(estimate(&g, &bad), Err(Error::Unsupported(_))));
        let bad = SemivalueSpec {
            estimator: Estimator::RandomSubset { samples: 10 },
            ..SemivalueSpec::exact(SemivalueFamily::Shapley)
        };
        assert!(matches!(estimate(&g, &bad), Err(Error::Unsupported(_))));
        let small = SemivalueSpec { estimator: Estimator::Permutation { samples: 10 }, ..bad };
        let g3 = make_random_monotone_game(3, 1).unwrap();
        assert_eq!(estimate(&g3, &small).unwrap().estimator, Estimator::Exact);
    }

    #[test]
    fn normalization_examples() {
        let mk = |v: Vec<f64>| SemivalueResult { values: v, estimator: Estimator::Exact, samples_used: 0, eta_bound: 0.0, normalized: false };
        let n = normalize_payments(&mk(vec![0.25, 0.25, 0.25]), 1.0, 1e-6).unwrap();
        assert!(n.values.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let n = normalize_payments(&mk(vec![0.2, 0.3]), 1.0, 1e-6).unwrap();
        assert!((n.values[0] - 0.4).abs() < 1e-15 && (n.values[1] - 0.6).abs() < 1e-15);
        assert!(matches!(
            normalize_payments(&mk(vec![1e-8, -1e-8]), 1.0, 1e-6),
            Err(Error::DegenerateNormalization { .. })
        ));
        let g = make_random_monotone_game(4, 2).unwrap().map(|v| Rational::new((v * 1000.0).round() as i128, 1000));
        let sh: SemivalueResult<Rational> = exact_semivalue(&g, SemivalueFamily::Shapley).unwrap();
        let grand = sh.values.iter().fold(Rational::from_integer(0), |a, &b| a + b);
        assert_eq!(normalize_payments(&sh, grand, 1e-6).unwrap().values, sh.values);
    }

    #[test]
    fn budget_arithmetic() {
        assert_eq!(sample_budget(1.0, 0.1, 4, 0.05).unwrap(), 254);
        assert!(sample_budget(1.0, 1.0, 4, 0.05).unwrap() >= 1);
        let a = sample_budget(1.0, 0.05, 8, 0.05).unwrap() as f64;
        let b = sample_budget(1.0, 0.1, 8, 0.05).unwrap() as f64;
        assert!((a / b - 4.0).abs() < 0.05);
        assert!(sample_budget(1.0, 0.0, 4, 0.05).is_err());
    }

    #[test]
    fn null_player_and_symmetry() {
        let g = TableGame::from_fn(4, |c| {
            let c = c.without(3);
            (c.len() * c.len()) as f64 + if c.contains(0) && c.contains(1) { 1.0 } else { 0.0 }
        })
        .unwrap();
        for fam in [SemivalueFamily::Shapley, SemivalueFamily::BanzhafRaw, SemivalueFamily::Beta { alpha: 2.0, beta: 2.0 }] {
            let phi = exact_semivalue(&g, fam).unwrap().values;
            assert_eq!(phi[3], 0.0);
            assert!((phi[0] - phi[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn estimator_names_round_trip() {
        for e in [Estimator::Exact, Estimator::Permutation { samples: 64 }, Estimator::RandomSubset { samples: 8 }, Estimator::Stratified { samples: 3 }, Estimator::Auto { samples: 256 }] {
            assert_eq!(e.to_string().parse::<Estimator>().unwrap(), e);
        }
    }
}
