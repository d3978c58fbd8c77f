use super::{check_fits, Coalition, CoalitionGame, GameCache, CacheStats, MAX_PLAYERS};
use crate::error::{invalid, Error, Result};
use crate::learner::{accuracy, train, LabeledDataset, LearnerConfig, Model};
use crate::market::{units_to_dataset, WeightedUnit};
use crate::rng::hash_keys;
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

/// Accuracy memo keyed by the content of the training multiset, shareable
/// across games that use the same learner and validation set.
#[derive(Debug)]
pub struct UtilityMemo {
    fingerprint: u64,
    map: Mutex<HashMap<[u8; 32], f64>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

fn context_fingerprint(learner: &LearnerConfig, valset: &LabeledDataset) -> u64 {
    let mut keys = vec![
        learner.max_iter as u64,
        learner.l2_strength.to_bits(),
        learner.standardize as u64,
        learner.gradient_tol.to_bits(),
        valset.dim() as u64,
        valset.n_classes() as u64,
        valset.len() as u64,
    ];
    for i in 0..valset.len() {
        keys.push(valset.label(i) as u64);
        keys.extend(valset.row(i).iter().map(|x| x.to_bits()));
    }
    hash_keys(&keys)
}

impl UtilityMemo {
    pub fn new(learner: &LearnerConfig, valset: &LabeledDataset) -> Self {
        UtilityMemo {
            fingerprint: context_fingerprint(learner, valset),
            map: Mutex::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats { hits: self.hits.load(Ordering::Relaxed), misses: self.misses.load(Ordering::Relaxed) }
    }

    fn get(&self, key: &[u8; 32]) -> Option<f64> {
        let v = self.map.lock().unwrap().get(key).copied();
        if v.is_some() {
            self.hits.fetch_add(1, Ordering::Relaxed);
        }
        v
    }

    fn put(&self, key: [u8; 32], v: f64) {
        self.misses.fetch_add(1, Ordering::Relaxed);
        self.map.lock().unwrap().insert(key, v);
    }
}

/// Held-out accuracy of the learner trained on the union of the selected
/// players' canonical units, minus the accuracy of the majority-class
/// predictor of the whole training pool.
pub struct DataValueGame {
    sets: Vec<Vec<WeightedUnit>>,
    keys: Vec<Vec<(u64, u64)>>,
    learner: LearnerConfig,
    valset: Arc<LabeledDataset>,
    baseline: f64,
    cache: GameCache<f64>,
    memo: Option<Arc<UtilityMemo>>,
}

pub fn make_data_value_game(
    training_sets: Vec<Vec<WeightedUnit>>,
    learner: &LearnerConfig,
    valset: Arc<LabeledDataset>,
) -> Result<DataValueGame> {
    learner.validate()?;
    if valset.is_empty() {
        return invalid("validation set is empty");
    }
    if training_sets.is_empty() || training_sets.len() > MAX_PLAYERS {
        return invalid(format!("data-value games need 1..={MAX_PLAYERS} players"));
    }
    for wu in training_sets.iter().flatten() {
        if wu.unit.payload.features.len() != valset.dim() {
            return invalid(format!("unit {} dim differs from the validation set", wu.unit.unit_id));
        }
        if wu.unit.payload.label >= valset.n_classes() {
            return invalid(format!("unit {} label outside the validation classes", wu.unit.unit_id));
        }
    }
    let pool = units_to_dataset(
        training_sets.iter().flatten().map(|wu| (&wu.unit, wu.weight)),
        valset.dim(),
        valset.n_classes(),
    );
    let majority = pool.majority_class().unwrap_or(learner.empty_class);
    let baseline = accuracy(&Model::Constant { class: majority, n_classes: valset.n_classes() }, &valset);
    let keys = training_sets
        .iter()
        .map(|set| set.iter().map(|wu| (wu.unit.payload.digest(), wu.weight.to_bits())).collect())
        .collect();
    let learner = LearnerConfig { n_classes: valset.n_classes(), empty_class: majority, ..learner.clone() };
    Ok(DataValueGame { sets: training_sets, keys, learner, valset, baseline, cache: GameCache::new(), memo: None })
}

impl DataValueGame {
    /// Attaches a shared content-keyed memo.
    pub fn with_memo(mut self, memo: Arc<UtilityMemo>) -> Result<Self> {
        if memo.fingerprint != context_fingerprint(&self.learner, &self.valset) {
            return invalid("utility memo belongs to a different learner or validation set");
        }
        self.memo = Some(memo);
        Ok(self)
    }

    pub fn training_sets(&self) -> &[Vec<WeightedUnit>] {
        &self.sets
    }

    pub fn baseline_accuracy(&self) -> f64 {
        self.baseline
    }

    pub fn cache_stats(&self) -> CacheStats {
        self.cache.stats()
    }

    fn content_key(&self, coalition: Coalition) -> Option<[u8; 32]> {
        let mut entries: Vec<(u64, u64)> = coalition.members().flat_map(|p| self.keys[p].iter().copied()).collect();
        if entries.is_empty() {
            return None;
        }
        entries.sort_unstable();
        let mut h = Sha256::new();
        for (d, w) in entries {
            h.update(d.to_le_bytes());
            h.update(w.to_le_bytes());
        }
        Some(h.finalize().into())
    }

    /// Accuracy of the model trained on the coalition's units.
    pub fn accuracy_of(&self, coalition: Coalition) -> Result<f64> {
        check_fits(coalition, self.sets.len())?;
        let Some(key) = self.content_key(coalition) else {
            return Ok(self.baseline);
        };
        if let Some(v) = self.memo.as_ref().and_then(|m| m.get(&key)) {
            return Ok(v);
        }
        let data = units_to_dataset(
            coalition.members().flat_map(|p| self.sets[p].iter()).map(|wu| (&wu.unit, wu.weight)),
            self.valset.dim(),
            self.valset.n_classes(),
        );
        let model = train(&data, &self.learner).map_err(|e| Error::Evaluation { coalition, reason: e.to_string() })?;
        let acc = accuracy(&model, &self.valset);
        if let Some(m) = &self.memo {
            m.put(key, acc);
        }
        Ok(acc)
    }
}

impl CoalitionGame<f64> for DataValueGame {
    fn player_count(&self) -> usize {
        self.sets.len()
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        self.cache
            .get_or_try_insert(coalition, || Ok(self.accuracy_of(coalition)? - self.baseline))
    }
}
