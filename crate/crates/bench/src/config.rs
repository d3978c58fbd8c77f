//! Versioned JSON experiment configuration.

use qattr_core::evidence::{EvidenceLayer, RepresentativeConfig};
use qattr_core::learner::LearnerConfig;
use qattr_core::market::{AttackSpec, BaselineRule, SyntheticDgpConfig};
use qattr_core::quotient::{AllocationRule, Mechanism};
use qattr_core::semivalue::{Estimator, SemivalueFamily, SemivalueSpec, DEFAULT_DELTA};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config field `{field}`: {msg}")]
    Field { field: String, msg: String },
}

fn field_err<T>(field: impl Into<String>, msg: impl ToString) -> Result<T, ConfigError> {
    Err(ConfigError::Field { field: field.into(), msg: msg.to_string() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    S1SplitGain,
    S2MainTable,
    S3SampleBudget,
    S4ThresholdFrontier,
    S5NoiseGrid,
    S6DeltaProxy,
    S7AllocationRules,
    S8DgpRobustness,
    HoldoutSweep,
}

impl ExperimentId {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::S1SplitGain => "s1_split_gain",
            ExperimentId::S2MainTable => "s2_main_table",
            ExperimentId::S3SampleBudget => "s3_sample_budget",
            ExperimentId::S4ThresholdFrontier => "s4_threshold_frontier",
            ExperimentId::S5NoiseGrid => "s5_noise_grid",
            ExperimentId::S6DeltaProxy => "s6_delta_proxy",
            ExperimentId::S7AllocationRules => "s7_allocation_rules",
            ExperimentId::S8DgpRobustness => "s8_dgp_robustness",
            ExperimentId::HoldoutSweep => "holdout_sweep",
        }
    }
}

/// A string or a list of strings; lists expand into a cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn values(&self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Either a quotient mechanism (`evidence` set) or an identity-level
/// baseline (`baseline` set: `uniform`, `per_example`, `loo`, or a
/// semivalue family).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSpec {
    pub label: String,
    #[serde(default)]
    pub baseline: Option<String>,
    #[serde(default)]
    pub evidence: Option<OneOrMany>,
    #[serde(default)]
    pub representative: Option<OneOrMany>,
    #[serde(default)]
    pub allocation: Option<OneOrMany>,
    #[serde(default)]
    pub semivalue: Option<OneOrMany>,
    #[serde(default)]
    pub estimator: Option<OneOrMany>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSource {
    pub path: PathBuf,
    pub n_providers: usize,
    pub units_each: usize,
    #[serde(default = "default_holdout_val")]
    pub validation_size: usize,
}

fn default_holdout_val() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitGainGrid {
    pub n_values: Vec<usize>,
    pub k_values: Vec<usize>,
}

impl Default for SplitGainGrid {
    fn default() -> Self {
        SplitGainGrid { n_values: (2..=6).collect(), k_values: (2..=6).collect() }
    }
}

fn default_samples() -> usize {
    256
}

fn default_exact_limit() -> usize {
    10
}

fn default_true() -> bool {
    true
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentId,
    #[serde(default)]
    pub dgp: SyntheticDgpConfig,
    /// Partial DGP overrides; each entry is merged onto `dgp`.
    #[serde(default)]
    pub dgp_variants: Vec<serde_json::Map<String, serde_json::Value>>,
    #[serde(default)]
    pub embeddings: Option<EmbeddingSource>,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub mechanisms: Vec<MechanismSpec>,
    #[serde(default)]
    pub attacks: Vec<String>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Sample count for `auto` estimators.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Games with at most this many players are enumerated exactly.
    #[serde(default = "default_exact_limit")]
    pub exact_n_limit: usize,
    /// S3 budgets; the largest is the reference.
    #[serde(default)]
    pub sample_sweep: Vec<usize>,
    /// Compute oracle-L1 against latent-oracle quotient Shapley.
    #[serde(default = "default_true")]
    pub oracle_reference: bool,
    #[serde(default)]
    pub split_gain: SplitGainGrid,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MechanismKind {
    Quotient(Mechanism),
    Baseline(BaselineRule),
}

/// One concrete mechanism after list expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismEntry {
    pub label: String,
    pub kind: MechanismKind,
}

impl MechanismEntry {
    pub fn evidence(&self) -> String {
        match &self.kind {
            MechanismKind::Quotient(m) => match m.evidence.layer {
                EvidenceLayer::NoisyOracleLatent { p_fs, p_fm, .. } => format!("noisy_oracle_latent(p_fs={p_fs},p_fm={p_fm})"),
                layer => layer.to_string(),
            },
            MechanismKind::Baseline(_) => "none".into(),
        }
    }

    pub fn representative(&self) -> String {
        match &self.kind {
            MechanismKind::Quotient(m) => m.representative.to_string(),
            MechanismKind::Baseline(_) => "identity".into(),
        }
    }

    pub fn allocation(&self) -> String {
        match &self.kind {
            MechanismKind::Quotient(m) => m.allocation.to_string(),
            MechanismKind::Baseline(_) => String::new(),
        }
    }

    pub fn semivalue(&self) -> String {
        match &self.kind {
            MechanismKind::Quotient(m) => m.semivalue.family.to_string(),
            MechanismKind::Baseline(BaselineRule::Semivalue(s)) => s.family.to_string(),
            MechanismKind::Baseline(BaselineRule::UniformIdentity) => "uniform".into(),
            MechanismKind::Baseline(BaselineRule::PerExampleUniform) => "per_example".into(),
            MechanismKind::Baseline(BaselineRule::LeaveOneOut) => "loo".into(),
        }
    }

    pub fn semivalue_spec(&self) -> Option<SemivalueSpec> {
        match &self.kind {
            MechanismKind::Quotient(m) => Some(m.semivalue),
            MechanismKind::Baseline(BaselineRule::Semivalue(s)) => Some(*s),
            _ => None,
        }
    }

    /// Replaces the estimator sample count and seed.
    pub fn with_run(&self, samples: Option<usize>, seed: u64) -> MechanismEntry {
        let adjust = |mut s: SemivalueSpec| {
            if let Some(r) = samples {
                s.estimator = match s.estimator {
                    Estimator::Exact => Estimator::Exact,
                    Estimator::Permutation { .. } => Estimator::Permutation { samples: r },
                    Estimator::RandomSubset { .. } => Estimator::RandomSubset { samples: r },
                    Estimator::Stratified { .. } => Estimator::Stratified { samples: r },
                    Estimator::Auto { .. } => Estimator::Auto { samples: r },
                };
            }
            s.master_seed = seed;
            s
        };
        let kind = match &self.kind {
            MechanismKind::Quotient(m) => {
                let mut m = *m;
                m.semivalue = adjust(m.semivalue);
                if let EvidenceLayer::NoisyOracleLatent { .. } = m.evidence.layer {
                    m.evidence.layer = m.evidence.layer.reseeded(seed);
                }
                MechanismKind::Quotient(m)
            }
            MechanismKind::Baseline(BaselineRule::Semivalue(s)) => MechanismKind::Baseline(BaselineRule::Semivalue(adjust(*s))),
            other => other.clone(),
        };
        MechanismEntry { label: self.label.clone(), kind }
    }
}

fn parse_field<T: std::str::FromStr>(field: &str, s: &str) -> Result<T, ConfigError>
where
    T::Err: ToString,
{
    s.parse::<T>().or_else(|e| field_err(field, format!("{s:?}: {}", e.to_string())))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    fn needs_market(&self) -> bool {
        self.experiment != ExperimentId::S1SplitGain
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return field_err("schema_version", format!("expected {SCHEMA_VERSION}, got {}", self.schema_version));
        }
        self.dgp.validate().or_else(|e| field_err("dgp", e))?;
        self.learner.validate().or_else(|e| field_err("learner", e))?;
        self.dgp_configs()?;
        if self.samples == 0 {
            return field_err("samples", "must be positive");
        }
        if self.needs_market() {
            if self.seeds.is_empty() {
                return field_err("seeds", "at least one explicit seed is required");
            }
            if self.attacks.is_empty() {
                return field_err("attacks", "attack list is empty");
            }
            if self.mechanisms.is_empty() {
                return field_err("mechanisms", "mechanism list is empty");
            }
            self.attack_specs()?;
            self.mechanism_entries()?;
        } else {
            let g = &self.split_gain;
            if g.n_values.iter().chain(&g.k_values).any(|&v| !(2..=12).contains(&v)) {
                return field_err("split_gain", "n and k must lie in 2..=12");
            }
        }
        if self.experiment == ExperimentId::S3SampleBudget && self.sample_sweep.is_empty() {
            return field_err("sample_sweep", "S3 needs at least one budget");
        }
        if self.sample_sweep.contains(&0) {
            return field_err("sample_sweep", "budgets must be positive");
        }
        if let Some(e) = &self.embeddings {
            if e.n_providers == 0 || e.units_each == 0 {
                return field_err("embeddings", "n_providers and units_each must be positive");
            }
        }
        Ok(())
    }

    /// The base DGP, or one merged config per variant.
    pub fn dgp_configs(&self) -> Result<Vec<(String, SyntheticDgpConfig)>, ConfigError> {
        if self.dgp_variants.is_empty() {
            return Ok(vec![(String::new(), self.dgp.clone())]);
        }
        self.dgp_variants
            .iter()
            .enumerate()
            .map(|(i, over)| {
                let field = format!("dgp_variants[{i}]");
                let mut base = serde_json::to_value(&self.dgp).expect("DGP config serializes");
                let obj = base.as_object_mut().expect("DGP config is an object");
                let mut label = Vec::new();
                for (k, v) in over {
                    obj.insert(k.clone(), v.clone());
                    label.push(format!("{k}={v}"));
                }
                let cfg: SyntheticDgpConfig = serde_json::from_value(base).or_else(|e| field_err(&field, e))?;
                cfg.validate().or_else(|e| field_err(&field, e))?;
                Ok((label.join(";"), cfg))
            })
            .collect()
    }

    pub fn attack_specs(&self) -> Result<Vec<AttackSpec>, ConfigError> {
        self.attacks
            .iter()
            .enumerate()
            .map(|(i, a)| parse_field(&format!("attacks[{i}]"), a))
            .collect()
    }

    fn estimator(&self, field: &str, s: &str) -> Result<Estimator, ConfigError> {
        if s == "auto" {
            Ok(Estimator::Auto { samples: self.samples })
        } else {
            parse_field(field, s)
        }
    }

    pub fn mechanism_entries(&self) -> Result<Vec<MechanismEntry>, ConfigError> {
        let mut out = Vec::new();
        for (i, m) in self.mechanisms.iter().enumerate() {
            let f = |name: &str| format!("mechanisms[{i}].{name}");
            let values = |o: &Option<OneOrMany>, default: &str| {
                o.as_ref().map_or_else(|| vec![default.to_string()], OneOrMany::values)
            };
            let families: Vec<SemivalueFamily> = values(&m.semivalue, "shapley")
                .iter()
                .map(|s| parse_field(&f("semivalue"), s))
                .collect::<Result<_, _>>()?;
            let estimators: Vec<Estimator> = values(&m.estimator, "auto")
                .iter()
                .map(|s| self.estimator(&f("estimator"), s))
                .collect::<Result<_, _>>()?;
            let mut specs = Vec::new();
            for &family in &families {
                for &est in &estimators {
                    if est != Estimator::Exact {
                        est.resolve(family).or_else(|e| field_err(f("estimator"), e))?;
                    }
                    specs.push(SemivalueSpec {
                        family,
                        estimator: est,
                        exact_n_limit: self.exact_n_limit,
                        master_seed: 0,
                        delta: DEFAULT_DELTA,
                    });
                }
            }
            match (&m.baseline, &m.evidence) {
                (Some(_), Some(_)) => return field_err(f("baseline"), "set either `baseline` or `evidence`, not both"),
                (None, None) => return field_err(f("evidence"), "quotient mechanisms need an evidence layer"),
                (Some(b), None) => {
                    if m.representative.is_some() || m.allocation.is_some() {
                        return field_err(f("baseline"), "baselines take no representative or allocation");
                    }
                    let rules: Vec<BaselineRule> = match b.as_str() {
                        "uniform" => vec![BaselineRule::UniformIdentity],
                        "per_example" => vec![BaselineRule::PerExampleUniform],
                        "loo" => vec![BaselineRule::LeaveOneOut],
                        fam => {
                            let family: SemivalueFamily = parse_field(&f("baseline"), fam)?;
                            estimators
                                .iter()
                                .map(|&est| {
                                    if est != Estimator::Exact {
                                        est.resolve(family).or_else(|e| field_err(f("estimator"), e))?;
                                    }
                                    Ok(BaselineRule::Semivalue(SemivalueSpec {
                                        family,
                                        estimator: est,
                                        exact_n_limit: self.exact_n_limit,
                                        master_seed: 0,
                                        delta: DEFAULT_DELTA,
                                    }))
                                })
                                .collect::<Result<_, ConfigError>>()?
                        }
                    };
                    out.extend(rules.into_iter().map(|r| MechanismEntry { label: m.label.clone(), kind: MechanismKind::Baseline(r) }));
                }
                (None, Some(ev)) => {
                    let layers: Vec<EvidenceLayer> =
                        ev.values().iter().map(|s| parse_field(&f("evidence"), s)).collect::<Result<_, _>>()?;
                    let reps: Vec<RepresentativeConfig> = values(&m.representative, "exact_dup_collapse")
                        .iter()
                        .map(|s| parse_field(&f("representative"), s))
                        .collect::<Result<_, _>>()?;
                    let allocs: Vec<AllocationRule> = values(&m.allocation, "equal_submitted")
                        .iter()
                        .map(|s| parse_field(&f("allocation"), s))
                        .collect::<Result<_, _>>()?;
                    for &layer in &layers {
                        for &rep in &reps {
                            for &alloc in &allocs {
                                for &spec in &specs {
                                    let mech = Mechanism::new(layer, rep, alloc, spec);
                                    mech.validate().or_else(|e| field_err(f("evidence"), e))?;
                                    out.push(MechanismEntry { label: m.label.clone(), kind: MechanismKind::Quotient(mech) });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}
