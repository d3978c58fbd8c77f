use super::{Coalition, CoalitionGame};
use crate::error::Result;
use crate::scalar::Scalar;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

/// Coalition-keyed memo with hit/miss counters.
#[derive(Debug, Default)]
pub struct GameCache<T> {
    memo: Mutex<HashMap<Coalition, T>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<T: Copy> GameCache<T> {
    pub fn new() -> Self {
        GameCache {
            memo: Mutex::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// Returns the cached value or evaluates `f` and stores it. The lock is
    /// not held during evaluation, so two threads may race on a miss; both
    /// compute the same pure value.
    pub fn get_or_try_insert(&self, c: Coalition, f: impl FnOnce() -> Result<T>) -> Result<T> {
        if let Some(&v) = self.memo.lock().unwrap().get(&c) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(v);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let v = f()?;
        self.memo.lock().unwrap().entry(c).or_insert(v);
        Ok(v)
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }

    pub fn len(&self) -> usize {
        self.memo.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Memoizing wrapper around any game.
pub struct CachedGame<G, T> {
    inner: G,
    cache: GameCache<T>,
}

impl<G, T: Copy> CachedGame<G, T> {
    pub fn new(inner: G) -> Self {
        CachedGame { inner, cache: GameCache::new() }
    }

    pub fn stats(&self) -> CacheStats {
        self.cache.stats()
    }

    pub fn inner(&self) -> &G {
        &self.inner
    }
}

impl<T: Scalar, G: CoalitionGame<T>> CoalitionGame<T> for CachedGame<G, T> {
    fn player_count(&self) -> usize {
        self.inner.player_count()
    }

    fn value(&self, coalition: Coalition) -> Result<T> {
        self.cache.get_or_try_insert(coalition, || self.inner.value(coalition))
    }

    fn value_range(&self) -> T {
        self.inner.value_range()
    }

    fn is_monotone_hint(&self) -> bool {
        self.inner.is_monotone_hint()
    }
}
