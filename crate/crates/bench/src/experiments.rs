//! Experiment runners. Every run of a seed shares one utility memo, so a
//! training multiset is fitted once no matter how many mechanisms, attacks
//! or sweep cells contain it.

use crate::config::{ExperimentConfig, ExperimentId, MechanismEntry, MechanismKind};
use crate::embed::read_embeddings;
use crate::records::{aggregate, sort_records, RunRecord};
use anyhow::Context;
use qattr_core::evidence::{EvidenceLayer, RepresentativeConfig};
use qattr_core::learner::LabeledDataset;
use qattr_core::market::{
    apply_attack, baseline_payments, generate_synthetic_market, reported_training_sets, AttackSpec, Payload,
    SubmittedProfile, SyntheticDgpConfig, Unit,
};
use qattr_core::quotient::{
    latent_totals, oracle_l1, pay, AllocationRule, Gain, Mechanism, UtilityContext,
};
use qattr_core::rng::{hash_keys, stream_rng, STREAM_DGP};
use qattr_core::semivalue::{closed_form_split_gain, measured_split_gain, SemivalueFamily, SemivalueSpec};
use qattr_core::theta::EmbeddingPool;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde_json::json;
use std::sync::Arc;
use std::time::Instant;

/// A honest profile with its validation set.
#[derive(Debug, Clone)]
pub struct Market {
    pub profile: SubmittedProfile,
    pub valset: Arc<LabeledDataset>,
}

pub fn synthetic_market(dgp: &SyntheticDgpConfig, seed: u64) -> qattr_core::Result<Market> {
    let (profile, val) = generate_synthetic_market(&SyntheticDgpConfig { seed, ..dgp.clone() })?;
    Ok(Market { profile, valset: Arc::new(val) })
}

/// Seeded permutation of the pool: the first `n_providers × units_each`
/// rows go to providers in consecutive blocks, the next `validation_size`
/// rows form the validation set.
pub fn market_from_pool(
    pool: &EmbeddingPool,
    n_providers: usize,
    units_each: usize,
    validation_size: usize,
    seed: u64,
) -> qattr_core::Result<Market> {
    let need = n_providers * units_each + validation_size;
    if need > pool.len() {
        return Err(qattr_core::Error::InvalidArgument(format!("pool has {} rows, market needs {need}", pool.len())));
    }
    let n_classes = pool.labels().iter().max().map_or(0, |m| m + 1).max(2);
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    idx.shuffle(&mut stream_rng(seed, STREAM_DGP, 3));
    let row = |i: usize| pool.row(i).iter().map(|&x| x as f64).collect::<Vec<f64>>();
    let units = idx[..n_providers * units_each]
        .iter()
        .enumerate()
        .map(|(pos, &i)| Unit {
            unit_id: pos as u64,
            payload: Payload { features: row(i), label: pool.labels()[i] },
            latent_owner: pos / units_each,
            identity: pos / units_each,
            source_id: i as u64,
            timestamp: pos as u64,
        })
        .collect();
    let profile = SubmittedProfile::new(units, (0..n_providers).collect(), n_providers, n_classes, pool.dim())?;
    let mut val = LabeledDataset::empty(pool.dim(), n_classes);
    for &i in &idx[n_providers * units_each..need] {
        val.push(&row(i), pool.labels()[i], 1.0)?;
    }
    Ok(Market { profile, valset: Arc::new(val) })
}

/// Outcome of one mechanism on one attacked profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub per_latent: Vec<f64>,
    pub honest_per_latent: Vec<f64>,
    pub gain: Gain,
    pub leakage: Option<(f64, f64, f64)>,
    pub mcf: Option<f64>,
    pub k: usize,
}

pub fn evaluate(entry: &MechanismEntry, attacked: &SubmittedProfile, ctx: &UtilityContext) -> qattr_core::Result<Evaluation> {
    let attacker = attacked.attack().map_or(0, |a| a.attacker);
    match &entry.kind {
        MechanismKind::Quotient(m) => {
            let r = pay(attacked, m, ctx)?;
            Ok(Evaluation {
                gain: r.gain,
                leakage: Some((r.leakage.escaped_mass, r.leakage.matched_drift, r.leakage.bound)),
                mcf: Some(r.attacked.mcf),
                k: r.attacked.k(),
                per_latent: r.per_latent,
                honest_per_latent: r.honest_per_latent,
            })
        }
        MechanismKind::Baseline(rule) => {
            let run = |p: &SubmittedProfile| -> qattr_core::Result<Vec<f64>> {
                let game = ctx.game(reported_training_sets(p))?;
                Ok(latent_totals(p, &baseline_payments(p, rule, &game)?))
            };
            let per_latent = run(attacked)?;
            let honest_per_latent = match attacked.honest_reference() {
                Some(h) => run(h)?,
                None => per_latent.clone(),
            };
            Ok(Evaluation {
                gain: Gain::new(per_latent[attacker], honest_per_latent[attacker]),
                leakage: None,
                mcf: None,
                k: attacked.identity_count(),
                per_latent,
                honest_per_latent,
            })
        }
    }
}

/// Latent-oracle quotient Shapley on the honest profile.
pub fn oracle_payments(profile: &SubmittedProfile, ctx: &UtilityContext, cfg: &ExperimentConfig, seed: u64) -> qattr_core::Result<Vec<f64>> {
    let spec = SemivalueSpec {
        exact_n_limit: cfg.exact_n_limit,
        ..SemivalueSpec::sampled(SemivalueFamily::Shapley, cfg.samples, seed)
    };
    let mech = Mechanism::new(EvidenceLayer::OracleLatent, RepresentativeConfig::ExactDupCollapse, AllocationRule::EqualSubmitted, spec);
    Ok(pay(profile, &mech, ctx)?.per_latent)
}

pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub failures: Vec<String>,
    pub summary: serde_json::Value,
}

fn base_record(cfg: &ExperimentConfig, setting: &str, entry: &MechanismEntry, attack: &AttackSpec, seed: u64) -> RunRecord {
    let (theta, p_fs, p_fm) = match &entry.kind {
        MechanismKind::Quotient(m) => match m.evidence.layer {
            EvidenceLayer::NoisyOracleLatent { p_fs, p_fm, .. } => (None, Some(p_fs), Some(p_fm)),
            layer => (layer.theta(), None, None),
        },
        MechanismKind::Baseline(_) => (None, None, None),
    };
    let estimator = entry.semivalue_spec().map_or_else(String::new, |s| s.estimator.to_string());
    RunRecord {
        experiment: cfg.experiment.name().to_string(),
        setting: setting.to_string(),
        mechanism: entry.label.clone(),
        evidence: entry.evidence(),
        representative: entry.representative(),
        allocation: entry.allocation(),
        semivalue: entry.semivalue(),
        estimator,
        attack: attack.to_string(),
        seed,
        theta,
        p_fs,
        p_fm,
        g: None,
        gamma: 0.0,
        l: None,
        d: None,
        bound: None,
        oracle_l1: None,
        mcf: None,
        k: 0,
        estimator_l1: None,
        runtime_ms: 0,
    }
}

fn fill(record: &mut RunRecord, ev: &Evaluation, oracle: Option<&[f64]>, elapsed_ms: u64) {
    record.g = ev.gain.multiplicative;
    record.gamma = ev.gain.additive;
    if let Some((l, d, b)) = ev.leakage {
        record.l = Some(l);
        record.d = Some(d);
        record.bound = Some(b);
    }
    record.mcf = ev.mcf;
    record.k = ev.k;
    record.oracle_l1 = oracle.map(|o| oracle_l1(&ev.per_latent, o));
    record.runtime_ms = elapsed_ms;
}

struct Job {
    setting: String,
    seed: u64,
    market: Market,
}

fn build_jobs(cfg: &ExperimentConfig) -> anyhow::Result<Vec<Job>> {
    let mut jobs = Vec::new();
    if let Some(src) = &cfg.embeddings {
        let file = read_embeddings(&src.path).with_context(|| format!("loading {}", src.path.display()))?;
        for &seed in &cfg.seeds {
            let market = market_from_pool(&file.pool, src.n_providers, src.units_each, src.validation_size, seed)?;
            jobs.push(Job { setting: String::new(), seed, market });
        }
    } else {
        for (setting, dgp) in cfg.dgp_configs()? {
            for &seed in &cfg.seeds {
                jobs.push(Job { setting: setting.clone(), seed, market: synthetic_market(&dgp, seed)? });
            }
        }
    }
    Ok(jobs)
}

fn run_job(cfg: &ExperimentConfig, job: &Job, entries: &[MechanismEntry], attacks: &[AttackSpec]) -> (Vec<RunRecord>, Vec<String>) {
    let ctx = UtilityContext::new(cfg.learner.clone(), job.market.valset.clone()).with_shared_memo();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let tag = |what: &str| format!("setting={:?} seed={} {what}", job.setting, job.seed);
    let oracle = if cfg.oracle_reference {
        match oracle_payments(&job.market.profile, &ctx, cfg, job.seed) {
            Ok(o) => Some(o),
            Err(e) => {
                failures.push(tag(&format!("oracle reference: {e}")));
                None
            }
        }
    } else {
        None
    };
    for attack in attacks {
        let attacked = match apply_attack(&job.market.profile, attack, job.seed) {
            Ok(p) => p,
            Err(e) => {
                failures.push(tag(&format!("attack {attack}: {e}")));
                continue;
            }
        };
        for entry in entries {
            let sweep: Vec<Option<usize>> = if cfg.experiment == ExperimentId::S3SampleBudget {
                cfg.sample_sweep.iter().map(|&s| Some(s)).collect()
            } else {
                vec![None]
            };
            let reference = if cfg.experiment == ExperimentId::S3SampleBudget {
                let r = *cfg.sample_sweep.iter().max().expect("validated non-empty");
                let ref_seed = hash_keys(&[job.seed, 0x5e_f0]);
                evaluate(&entry.with_run(Some(r), ref_seed), &attacked, &ctx).ok().map(|e| e.per_latent)
            } else {
                None
            };
            for samples in sweep {
                let run = entry.with_run(samples, job.seed);
                let mut rec = base_record(cfg, &job.setting, &run, attack, job.seed);
                if let Some(s) = samples {
                    rec.setting = if job.setting.is_empty() { format!("samples={s}") } else { format!("{};samples={s}", job.setting) };
                }
                let t0 = Instant::now();
                match evaluate(&run, &attacked, &ctx) {
                    Ok(ev) => {
                        fill(&mut rec, &ev, oracle.as_deref(), t0.elapsed().as_millis() as u64);
                        rec.estimator_l1 = reference.as_ref().map(|r| oracle_l1(&ev.per_latent, r));
                        records.push(rec);
                    }
                    Err(e) => failures.push(tag(&format!("{} on {attack}: {e}", run.label))),
                }
            }
        }
    }
    (records, failures)
}

fn run_grid(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentOutput> {
    let entries = cfg.mechanism_entries()?;
    let attacks = cfg.attack_specs()?;
    let jobs = build_jobs(cfg)?;
    let results: Vec<(Vec<RunRecord>, Vec<String>)> = jobs.par_iter().map(|j| run_job(cfg, j, &entries, &attacks)).collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in results {
        records.extend(r);
        failures.extend(f);
    }
    sort_records(&mut records);
    let summary = json!({
        "experiment": cfg.experiment.name(),
        "seeds": cfg.seeds,
        "cells": aggregate(&records),
        "failures": failures,
    });
    Ok(ExperimentOutput { records, failures, summary })
}

fn run_split_gain(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentOutput> {
    let mut records = Vec::new();
    let mut table = serde_json::Map::new();
    for family in [SemivalueFamily::Shapley, SemivalueFamily::BanzhafRaw] {
        let mut rows = Vec::new();
        for &k in &cfg.split_gain.k_values {
            let (mut pred, mut meas) = (0.0, 0.0);
            for &n in &cfg.split_gain.n_values {
                let t0 = Instant::now();
                let p = closed_form_split_gain::<f64>(family, n, k)?;
                let m = measured_split_gain::<f64>(family, n, k)?;
                pred += p.multiplicative;
                meas += m.multiplicative;
                records.push(RunRecord {
                    experiment: cfg.experiment.name().to_string(),
                    setting: format!("n={n};k={k}"),
                    mechanism: "unanimity_split".into(),
                    evidence: "none".into(),
                    representative: "identity".into(),
                    allocation: String::new(),
                    semivalue: family.to_string(),
                    estimator: "exact".into(),
                    attack: format!("sybil_split_k(k={k})"),
                    seed: 0,
                    theta: None,
                    p_fs: None,
                    p_fm: None,
                    g: Some(m.multiplicative),
                    gamma: m.additive,
                    l: None,
                    d: None,
                    bound: None,
                    oracle_l1: Some((m.multiplicative - p.multiplicative).abs()),
                    mcf: None,
                    k: n + k - 1,
                    estimator_l1: None,
                    runtime_ms: t0.elapsed().as_millis() as u64,
                });
            }
            let count = cfg.split_gain.n_values.len() as f64;
            rows.push(json!({"k": k, "predicted": pred / count, "measured": meas / count}));
        }
        table.insert(family.to_string(), serde_json::Value::Array(rows));
    }
    sort_records(&mut records);
    let summary = json!({"experiment": cfg.experiment.name(), "split_gain": table, "cells": aggregate(&records)});
    Ok(ExperimentOutput { records, failures: Vec::new(), summary })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentId::S1SplitGain => run_split_gain(cfg),
        _ => run_grid(cfg),
    }
}
