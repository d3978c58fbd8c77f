//! Embedding-geometry predictions of the admissible cosine threshold: a
//! pairwise floor from same-class similarities, a chaining floor from a
//! simulated provider market, and a near-duplicate ceiling.

use crate::error::{invalid, Error, Result};
use crate::evidence::DisjointSet;
use crate::rng::{stream_rng, STREAM_THETA};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Labeled embedding matrix, row-major `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPool {
    name: String,
    dim: usize,
    vectors: Vec<f32>,
    labels: Vec<usize>,
}

impl EmbeddingPool {
    /// Rejects ragged input, non-finite entries and zero-norm rows.
    pub fn new(name: impl Into<String>, dim: usize, vectors: Vec<f32>, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 || vectors.len() != dim * labels.len() {
            return invalid("vector buffer must hold rows × dim entries with one label per row");
        }
        for (i, row) in vectors.chunks(dim).enumerate() {
            if row.iter().any(|x| !x.is_finite()) {
                return invalid(format!("row {i} has a non-finite entry"));
            }
            if row.iter().all(|&x| x == 0.0) {
                return Err(Error::ZeroNorm { unit_id: i as u64 });
            }
        }
        Ok(EmbeddingPool { name: name.into(), dim, vectors, labels })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn norms(&self) -> Vec<f64> {
        self.vectors.chunks(self.dim).map(|r| r.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt()).collect()
    }

    pub fn median_norm(&self) -> f64 {
        let mut n = self.norms();
        n.sort_by(f64::total_cmp);
        percentile_sorted(&n, 0.5)
    }

    /// Row indices per class, classes ascending.
    pub fn classes(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &c) in self.labels.iter().enumerate() {
            m.entry(c).or_default().push(i);
        }
        m
    }

    fn unit_rows(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.vectors.len());
        for r in self.vectors.chunks(self.dim) {
            let n = r.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            out.extend(r.iter().map(|&x| x as f64 / n));
        }
        out
    }
}

/// Linear-interpolation percentile of ascending data, `q ∈ [0, 1]`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionProtocol {
    /// Each provider draws from a single class, classes assigned round-robin.
    ClassStratified,
    /// Seeded permutation of the pool cut into blocks.
    Random,
}

impl fmt::Display for PartitionProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartitionProtocol::ClassStratified => "class",
            PartitionProtocol::Random => "random",
        })
    }
}

impl FromStr for PartitionProtocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "class" | "class_stratified" => Ok(PartitionProtocol::ClassStratified),
            "random" => Ok(PartitionProtocol::Random),
            other => Err(Error::Parse(format!("unknown partition protocol {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketShape {
    pub n_providers: usize,
    pub units_each: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaConfig {
    pub cutoff: f64,
    pub trials: usize,
    pub sigma: f64,
    pub neardup_samples: usize,
    pub pair_samples: usize,
    pub protocol: PartitionProtocol,
    pub seed: u64,
}

impl Default for ThetaConfig {
    fn default() -> Self {
        ThetaConfig {
            cutoff: 0.10,
            trials: 30,
            sigma: 0.02,
            neardup_samples: 5000,
            pair_samples: 100_000,
            protocol: PartitionProtocol::ClassStratified,
            seed: 0,
        }
    }
}

/// 90th percentile of same-class cosine similarities; exhaustive when the
/// pool has at most `pair_samples` same-class pairs.
pub fn pairwise_floor(pool: &EmbeddingPool, pair_samples: usize, seed: u64) -> Result<f64> {
    let unit = pool.unit_rows();
    let d = pool.dim;
    let classes: Vec<Vec<usize>> = pool.classes().into_values().filter(|m| m.len() >= 2).collect();
    if classes.is_empty() {
        return invalid("pairwise floor needs a class with at least two examples");
    }
    let pair_counts: Vec<usize> = classes.iter().map(|m| m.len() * (m.len() - 1) / 2).collect();
    let total: usize = pair_counts.iter().sum();
    let cos = |a: usize, b: usize| dot(&unit[a * d..(a + 1) * d], &unit[b * d..(b + 1) * d]);
    let mut sims: Vec<f64> = if total <= pair_samples {
        classes
            .par_iter()
            .flat_map_iter(|m| {
                let cos = &cos;
                (0..m.len()).flat_map(move |i| (i + 1..m.len()).map(move |j| cos(m[i], m[j])))
            })
            .collect()
    } else {
        let mut rng = stream_rng(seed, STREAM_THETA, 1);
        let pairs: Vec<(usize, usize)> = (0..pair_samples)
            .map(|_| {
                let mut t = rng.gen_range(0..total);
                let mut c = 0;
                while t >= pair_counts[c] {
                    t -= pair_counts[c];
                    c += 1;
                }
                let m = &classes[c];
                let a = rng.gen_range(0..m.len());
                let mut b = rng.gen_range(0..m.len() - 1);
                if b >= a {
                    b += 1;
                }
                (m[a], m[b])
            })
            .collect();
        pairs.par_iter().map(|&(a, b)| cos(a, b)).collect()
    };
    sims.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sims, 0.9))
}

/// 10th percentile of `cos(x, x + η)`, `η ~ N(0, σ²I)`, over rows drawn
/// with replacement.
pub fn neardup_ceiling(pool: &EmbeddingPool, sigma: f64, n_samples: usize, seed: u64) -> Result<f64> {
    if !(sigma >= 0.0 && sigma.is_finite()) || n_samples == 0 || pool.is_empty() {
        return invalid("near-duplicate ceiling needs sigma >= 0, samples > 0 and a non-empty pool");
    }
    if sigma == 0.0 {
        return Ok(1.0);
    }
    let normal = Normal::new(0.0, sigma).expect("validated sigma");
    let mut rng = stream_rng(seed, STREAM_THETA, 2);
    let mut sims: Vec<f64> = (0..n_samples)
        .map(|_| {
            let x = pool.row(rng.gen_range(0..pool.len()));
            let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
            for &xi in x {
                let xi = xi as f64;
                let yi = xi + normal.sample(&mut rng);
                xy += xi * yi;
                xx += xi * xi;
                yy += yi * yi;
            }
            (xy / (xx.sqrt() * yy.sqrt())).min(1.0)
        })
        .collect();
    sims.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sims, 0.1))
}

/// Cross-provider maximum cosine for each simulated market.
#[derive(Debug, Clone)]
pub struct ChainingSimulation {
    n_providers: usize,
    /// Per trial, row-major `n × n` matrix of max cross-provider cosine.
    links: Vec<Vec<f64>>,
}

fn partition(pool: &EmbeddingPool, shape: MarketShape, protocol: PartitionProtocol, rng: &mut impl Rng) -> Result<Vec<Vec<usize>>> {
    let MarketShape { n_providers, units_each } = shape;
    match protocol {
        PartitionProtocol::Random => {
            if n_providers * units_each > pool.len() {
                return invalid("pool smaller than the simulated market");
            }
            let mut idx: Vec<usize> = (0..pool.len()).collect();
            idx.shuffle(rng);
            Ok(idx.chunks(units_each).take(n_providers).map(|c| c.to_vec()).collect())
        }
        PartitionProtocol::ClassStratified => {
            let classes: Vec<Vec<usize>> = pool.classes().into_values().collect();
            let mut shuffled: Vec<Vec<usize>> = classes
                .into_iter()
                .map(|mut m| {
                    m.shuffle(rng);
                    m
                })
                .collect();
            let c = shuffled.len();
            let mut out = Vec::with_capacity(n_providers);
            for p in 0..n_providers {
                let pool_c = &mut shuffled[p % c];
                if pool_c.len() < units_each {
                    return invalid(format!("class {} too small for {n_providers} providers of {units_each}", p % c));
                }
                out.push(pool_c.split_off(pool_c.len() - units_each));
            }
            Ok(out)
        }
    }
}

impl ChainingSimulation {
    pub fn new(pool: &EmbeddingPool, shape: MarketShape, protocol: PartitionProtocol, trials: usize, seed: u64) -> Result<Self> {
        if shape.n_providers < 2 || shape.units_each == 0 || trials == 0 {
            return invalid("chaining simulation needs two providers, one unit each and one trial");
        }
        let unit = pool.unit_rows();
        let d = pool.dim;
        let parts = (0..trials)
            .map(|t| {
                let mut rng = stream_rng(seed, STREAM_THETA, 100 + t as u64);
                partition(pool, shape, protocol, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let n = shape.n_providers;
        let links = parts
            .par_iter()
            .map(|providers| {
                let mut m = vec![f64::NEG_INFINITY; n * n];
                for a in 0..n {
                    for b in a + 1..n {
                        let mut best = f64::NEG_INFINITY;
                        for &i in &providers[a] {
                            let ri = &unit[i * d..(i + 1) * d];
                            for &j in &providers[b] {
                                best = best.max(dot(ri, &unit[j * d..(j + 1) * d]));
                            }
                        }
                        m[a * n + b] = best;
                        m[b * n + a] = best;
                    }
                }
                m
            })
            .collect();
        Ok(ChainingSimulation { n_providers: n, links })
    }

    pub fn trials(&self) -> usize {
        self.links.len()
    }

    /// Share of providers whose cosine component at `theta` holds another
    /// provider.
    pub fn trial_mcf(&self, trial: usize, theta: f64) -> f64 {
        let n = self.n_providers;
        let m = &self.links[trial];
        let mut ds = DisjointSet::new(n);
        for a in 0..n {
            for b in a + 1..n {
                if m[a * n + b] >= theta {
                    ds.union(a, b);
                }
            }
        }
        let mut size = vec![0usize; n];
        let roots: Vec<usize> = (0..n).map(|i| ds.find(i)).collect();
        for &r in &roots {
            size[r] += 1;
        }
        roots.iter().filter(|&&r| size[r] > 1).count() as f64 / n as f64
    }

    pub fn mean_mcf(&self, theta: f64) -> f64 {
        (0..self.trials()).map(|t| self.trial_mcf(t, theta)).sum::<f64>() / self.trials() as f64
    }

    /// Smallest coarse-grid θ with mean MCF below `cutoff`, refined on the
    /// 0.02 lattice within the preceding 0.05; `None` when no grid θ
    /// qualifies.
    pub fn floor(&self, cutoff: f64) -> Option<f64> {
        let coarse = coarse_grid();
        let pos = coarse.iter().position(|&t| self.mean_mcf(t) < cutoff)?;
        let tc = coarse[pos];
        if pos == 0 {
            return Some(tc);
        }
        let hundredths = (tc * 100.0).round() as i64;
        let refined = ((hundredths - 5)..hundredths)
            .filter(|h| h % 2 == 0)
            .map(|h| h as f64 / 100.0)
            .find(|&t| self.mean_mcf(t) < cutoff);
        Some(refined.unwrap_or(tc))
    }
}

/// `{0.50, 0.55, …, 0.95}`.
pub fn coarse_grid() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

pub fn chaining_floor(pool: &EmbeddingPool, shape: MarketShape, cfg: &ThetaConfig) -> Result<Option<f64>> {
    Ok(ChainingSimulation::new(pool, shape, cfg.protocol, cfg.trials, cfg.seed)?.floor(cfg.cutoff))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingRegime {
    Pairwise,
    Chaining,
    Tie,
}

/// Two floors closer than this are reported as a tie.
pub const TIE_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaPrediction {
    pub pool: String,
    pub dim: usize,
    pub median_norm: f64,
    pub pairwise_floor: f64,
    /// `None` when no grid θ reaches the cutoff.
    pub chaining_floor: Option<f64>,
    pub no_admissible_floor: bool,
    /// Raw ceiling before clamping to 1.
    pub neardup_ceiling: f64,
    pub binding_floor: Option<f64>,
    pub regime: Option<BindingRegime>,
    pub admissible_interval: Option<(f64, f64)>,
    pub interval_empty: bool,
    pub cutoff: f64,
    /// `(θ, mean MCF)` on the coarse grid.
    pub mcf_curve: Vec<(f64, f64)>,
}

pub fn predict(pool: &EmbeddingPool, shape: MarketShape, cfg: &ThetaConfig) -> Result<ThetaPrediction> {
    if !(cfg.cutoff > 0.0 && cfg.cutoff <= 1.0) {
        return invalid("MCF cutoff must lie in (0, 1]");
    }
    let pairwise = pairwise_floor(pool, cfg.pair_samples, cfg.seed)?;
    let ceiling = neardup_ceiling(pool, cfg.sigma, cfg.neardup_samples, cfg.seed)?;
    let sim = ChainingSimulation::new(pool, shape, cfg.protocol, cfg.trials, cfg.seed)?;
    let chaining = sim.floor(cfg.cutoff);
    let (binding, regime) = match chaining {
        None => (None, None),
        Some(c) if (c - pairwise).abs() <= TIE_TOLERANCE => (Some(c.max(pairwise)), Some(BindingRegime::Tie)),
        Some(c) if c > pairwise => (Some(c), Some(BindingRegime::Chaining)),
        Some(_) => (Some(pairwise), Some(BindingRegime::Pairwise)),
    };
    let interval = binding.map(|lo| (lo, ceiling.min(1.0)));
    Ok(ThetaPrediction {
        pool: pool.name().to_string(),
        dim: pool.dim(),
        median_norm: pool.median_norm(),
        pairwise_floor: pairwise,
        chaining_floor: chaining,
        no_admissible_floor: chaining.is_none(),
        neardup_ceiling: ceiling,
        binding_floor: binding,
        regime,
        interval_empty: interval.is_none_or(|(lo, hi)| lo > hi),
        admissible_interval: interval,
        cutoff: cfg.cutoff,
        mcf_curve: coarse_grid().into_iter().map(|t| (t, sim.mean_mcf(t))).collect(),
    })
}
