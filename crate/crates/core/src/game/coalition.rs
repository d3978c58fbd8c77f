use serde::{Deserialize, Serialize};
use std::fmt;

pub const MAX_PLAYERS: usize = 64;

/// A set of player indices encoded as a 64-bit mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Coalition(u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub const fn from_bits(bits: u64) -> Self {
        Coalition(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    /// All players `0..k`.
    pub fn full(k: usize) -> Self {
        assert!(k <= MAX_PLAYERS, "at most {MAX_PLAYERS} players");
        if k == MAX_PLAYERS {
            Coalition(u64::MAX)
        } else {
            Coalition((1u64 << k) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        assert!(i < MAX_PLAYERS);
        Coalition(1u64 << i)
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I) -> Self {
        members
            .into_iter()
            .fold(Coalition::EMPTY, |c, i| c.with(i))
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_PLAYERS && self.0 & (1u64 << i) != 0
    }

    pub fn with(self, i: usize) -> Self {
        assert!(i < MAX_PLAYERS);
        Coalition(self.0 | (1u64 << i))
    }

    pub fn without(self, i: usize) -> Self {
        assert!(i < MAX_PLAYERS);
        Coalition(self.0 & !(1u64 << i))
    }

    pub fn union(self, other: Self) -> Self {
        Coalition(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        Coalition(self.0 & other.0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// True when every member index is below `k`.
    pub fn fits(self, k: usize) -> bool {
        self.is_subset_of(Coalition::full(k.min(MAX_PLAYERS)))
    }

    pub fn members(self) -> Members {
        Members(self.0)
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

impl FromIterator<usize> for Coalition {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Coalition::from_members(iter)
    }
}

/// Ascending iterator over member indices.
pub struct Members(u64);

impl Iterator for Members {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Members {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_set_ops() {
        let c = Coalition::from_members([0, 3, 5]);
        assert_eq!(c.len(), 3);
        assert!(c.contains(3) && !c.contains(2));
        assert_eq!(c.members().collect::<Vec<_>>(), vec![0, 3, 5]);
        assert_eq!(c.without(3).with(1).members().collect::<Vec<_>>(), vec![0, 1, 5]);
        assert!(Coalition::EMPTY.is_empty());
        assert_ne!(Coalition::EMPTY, Coalition::singleton(0));
        assert!(c.fits(6) && !c.fits(5));
        assert_eq!(Coalition::full(64).len(), 64);
        assert_eq!(Coalition::full(0), Coalition::EMPTY);
    }
}
