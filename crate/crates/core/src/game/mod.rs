//! Cooperative games over bitmask coalitions.

mod cache;
mod coalition;
mod data_value;

pub use cache::{CacheStats, CachedGame, GameCache};
pub use coalition::{Coalition, Members, MAX_PLAYERS};
pub use data_value::{make_data_value_game, DataValueGame, UtilityMemo};

use crate::error::{invalid, Result};
use crate::rng::{stream_rng, STREAM_GAME};
use crate::scalar::Scalar;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Player count up to which random monotone games are tabulated.
pub const TABLE_LIMIT: usize = 16;

/// A player count plus a coalition value oracle with `value(∅) = 0`.
pub trait CoalitionGame<T: Scalar>: Sync {
    fn player_count(&self) -> usize;

    fn value(&self, coalition: Coalition) -> Result<T>;

    /// Upper bound `V` on `|value|`.
    fn value_range(&self) -> T {
        T::one()
    }

    fn is_monotone_hint(&self) -> bool {
        false
    }
}

impl<T: Scalar, G: CoalitionGame<T> + ?Sized> CoalitionGame<T> for &G {
    fn player_count(&self) -> usize {
        (**self).player_count()
    }
    fn value(&self, coalition: Coalition) -> Result<T> {
        (**self).value(coalition)
    }
    fn value_range(&self) -> T {
        (**self).value_range()
    }
    fn is_monotone_hint(&self) -> bool {
        (**self).is_monotone_hint()
    }
}

impl<T: Scalar, G: CoalitionGame<T> + ?Sized + Send> CoalitionGame<T> for Box<G> {
    fn player_count(&self) -> usize {
        (**self).player_count()
    }
    fn value(&self, coalition: Coalition) -> Result<T> {
        (**self).value(coalition)
    }
    fn value_range(&self) -> T {
        (**self).value_range()
    }
    fn is_monotone_hint(&self) -> bool {
        (**self).is_monotone_hint()
    }
}

/// Value 1 exactly when the required players are all present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnanimityGame {
    players: usize,
    required: Coalition,
}

pub fn make_unanimity_game(players: usize, required: Coalition) -> Result<UnanimityGame> {
    if players == 0 || players > MAX_PLAYERS {
        return invalid(format!("player count {players} outside 1..={MAX_PLAYERS}"));
    }
    if required.is_empty() {
        return invalid("unanimity game needs a nonempty required coalition");
    }
    if !required.fits(players) {
        return invalid(format!("required coalition {required:?} exceeds {players} players"));
    }
    Ok(UnanimityGame { players, required })
}

impl UnanimityGame {
    pub fn required(&self) -> Coalition {
        self.required
    }
}

impl<T: Scalar> CoalitionGame<T> for UnanimityGame {
    fn player_count(&self) -> usize {
        self.players
    }

    fn value(&self, coalition: Coalition) -> Result<T> {
        check_fits(coalition, self.players)?;
        Ok(if self.required.is_subset_of(coalition) { T::one() } else { T::zero() })
    }

    fn is_monotone_hint(&self) -> bool {
        true
    }
}

pub(crate) fn check_fits(coalition: Coalition, players: usize) -> Result<()> {
    if coalition.fits(players) {
        Ok(())
    } else {
        invalid(format!("coalition {coalition:?} exceeds {players} players"))
    }
}

/// A fully tabulated game indexed by coalition bits.
#[derive(Debug, Clone, PartialEq)]
pub struct TableGame<T> {
    players: usize,
    values: Vec<T>,
    range: T,
    monotone: bool,
}

impl<T: Scalar> TableGame<T> {
    /// Tabulates `f` and subtracts `f(∅)` so the empty coalition is worth zero.
    pub fn from_fn(players: usize, mut f: impl FnMut(Coalition) -> T) -> Result<Self> {
        if players == 0 || players > TABLE_LIMIT {
            return invalid(format!("table games support 1..={TABLE_LIMIT} players, got {players}"));
        }
        let base = f(Coalition::EMPTY);
        let values: Vec<T> = (0..1u64 << players)
            .map(|bits| f(Coalition::from_bits(bits)) - base)
            .collect();
        let range = values
            .iter()
            .fold(T::zero(), |m, v| crate::scalar::max(m, v.abs()));
        let range = if range.is_zero() { T::one() } else { range };
        Ok(TableGame { players, values, range, monotone: false })
    }

    pub fn tabulate<G: CoalitionGame<T>>(game: &G) -> Result<Self> {
        let players = game.player_count();
        if players == 0 || players > TABLE_LIMIT {
            return invalid(format!("table games support 1..={TABLE_LIMIT} players, got {players}"));
        }
        let values = (0..1u64 << players)
            .map(|bits| game.value(Coalition::from_bits(bits)))
            .collect::<Result<Vec<T>>>()?;
        Ok(TableGame {
            players,
            values,
            range: game.value_range(),
            monotone: game.is_monotone_hint(),
        })
    }

    pub fn with_monotone_hint(mut self, monotone: bool) -> Self {
        self.monotone = monotone;
        self
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> TableGame<U> {
        TableGame {
            players: self.players,
            values: self.values.iter().map(|&v| f(v)).collect(),
            range: f(self.range),
            monotone: self.monotone,
        }
    }

    /// Exhaustive monotonicity check.
    pub fn is_monotone(&self) -> bool {
        (0..self.values.len()).all(|bits| {
            (0..self.players).all(|i| {
                let sup = bits | (1 << i);
                self.values[bits] <= self.values[sup]
            })
        })
    }
}

impl<T: Scalar> CoalitionGame<T> for TableGame<T> {
    fn player_count(&self) -> usize {
        self.players
    }

    fn value(&self, coalition: Coalition) -> Result<T> {
        check_fits(coalition, self.players)?;
        Ok(self.values[coalition.bits() as usize])
    }

    fn value_range(&self) -> T {
        self.range
    }

    fn is_monotone_hint(&self) -> bool {
        self.monotone
    }
}

/// Random monotone game: i.i.d. Exp(1) increments accumulated along a random
/// linear extension of the subset lattice, scaled so the grand coalition is
/// worth 1.
///
/// The extension is drawn by repeatedly picking a uniformly random coalition
/// among those whose immediate subsets have all been placed. This is a
/// stand-in generator; it is not uniform over linear extensions.
pub fn make_random_monotone_game(players: usize, seed: u64) -> Result<TableGame<f64>> {
    if players == 0 || players > TABLE_LIMIT {
        return invalid(format!("random monotone games support 1..={TABLE_LIMIT} players, got {players}"));
    }
    let size = 1usize << players;
    let mut rng = stream_rng(seed, STREAM_GAME, players as u64);
    let mut missing: Vec<u32> = (0..size).map(|b| (b as u64).count_ones()).collect();
    let mut ready: Vec<usize> = vec![0];
    let mut raw = vec![0.0f64; size];
    let mut acc = 0.0f64;
    let mut first = true;
    while !ready.is_empty() {
        let pick = rng.gen_range(0..ready.len());
        let bits = ready.swap_remove(pick);
        if first {
            first = false;
        } else {
            let inc: f64 = Exp1.sample(&mut rng);
            acc += inc;
        }
        raw[bits] = acc;
        for i in 0..players {
            let sup = bits | (1 << i);
            if sup != bits {
                missing[sup] -= 1;
                if missing[sup] == 0 {
                    ready.push(sup);
                }
            }
        }
    }
    let total = raw[size - 1];
    let values = raw.iter().map(|&v| if total > 0.0 { v / total } else { 0.0 }).collect();
    Ok(TableGame { players, values, range: 1.0, monotone: true })
}
