//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use qattr_bench::config::{ExperimentConfig, MechanismKind, OneOrMany};
use qattr_bench::experiments::{run_experiment, synthetic_market};
use qattr_bench::records::RunRecord;
use qattr_core::evidence::{apply_representative, build_clusters, CapSelector, EvidenceLayer, RepresentativeConfig};
use qattr_core::game::{make_random_monotone_game, make_unanimity_game, Coalition, TableGame};
use qattr_core::learner::LearnerConfig;
use qattr_core::market::{apply_attack, AttackFamily, AttackSpec, Payload, SplitScheme, SyntheticDgpConfig, Unit, WeightedUnit};
use qattr_core::quotient::{fairness_loss, pay, AllocationRule, Mechanism, UtilityContext};
use qattr_core::rng::stream_rng;
use qattr_core::semivalue::{
    estimate, exact_semivalue, measured_split_gain, sample_budget, Estimator, SemivalueFamily, SemivalueSpec,
};
use qattr_core::theta::{neardup_ceiling, ChainingSimulation, EmbeddingPool, MarketShape, PartitionProtocol};
use qattr_core::Rational;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

type Outcome = anyhow::Result<(bool, String)>;

struct Suite {
    results: Vec<(String, bool)>,
}

impl Suite {
    fn run(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        let t0 = Instant::now();
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e:#}")),
        };
        println!(
            "[{}] {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
        self.results.push((name.to_string(), pass));
    }
}

fn config(name: &str) -> anyhow::Result<ExperimentConfig> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    Ok(ExperimentConfig::load(path)?)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean multiplicative gain per (evidence, allocation, attack) cell.
fn gain_cells(records: &[RunRecord]) -> BTreeMap<(String, String, String), f64> {
    let mut cells: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(g) = r.g {
            cells.entry((r.evidence.clone(), r.allocation.clone(), r.attack.clone())).or_default().push(g);
        }
    }
    cells.into_iter().map(|(k, v)| (k, mean(&v))).collect()
}

fn noisy_label(p_fs: &str, p_fm: &str) -> String {
    format!("noisy_oracle_latent(p_fs={p_fs},p_fm={p_fm})")
}

const P_FM: [&str; 5] = ["0", "0.05", "0.1", "0.2", "0.4"];
const NEAR_DUP: &str = "near_duplicate_2x_sybils(sigma=0.03)";
const PURE_SYBIL: &str = "sybil_split_k(k=3)";

fn split_gain_table() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut exact_ok = true;
    for n in 2..=6usize {
        for k in 2..=6usize {
            let sh = measured_split_gain::<f64>(SemivalueFamily::Shapley, n, k)?.multiplicative;
            let bz = measured_split_gain::<f64>(SemivalueFamily::BanzhafRaw, n, k)?.multiplicative;
            worst = worst.max((sh - (n * k) as f64 / (n + k - 1) as f64).abs());
            worst = worst.max((bz - k as f64 / 2f64.powi(k as i32 - 1)).abs());
            let q = measured_split_gain::<Rational>(SemivalueFamily::Shapley, n, k)?.multiplicative;
            exact_ok &= q == Rational::new((n * k) as i128, (n + k - 1) as i128);
        }
    }
    let table_sh = [1.563, 1.939, 2.210, 2.417, 2.581];
    let table_bz = [1.000, 0.750, 0.500, 0.312, 0.187];
    let mut worst_avg: f64 = 0.0;
    for (i, k) in (2..=6usize).enumerate() {
        let avg = |f: SemivalueFamily| -> anyhow::Result<f64> {
            let s: f64 = (2..=6)
                .map(|n| measured_split_gain::<f64>(f, n, k).map(|g| g.multiplicative))
                .sum::<Result<f64, _>>()?;
            Ok(s / 5.0)
        };
        worst_avg = worst_avg.max((avg(SemivalueFamily::Shapley)? - table_sh[i]).abs());
        worst_avg = worst_avg.max((avg(SemivalueFamily::BanzhafRaw)? - table_bz[i]).abs());
    }
    // The printed table truncates 0.3125 and 0.1875 to three decimals.
    let pass = worst <= 1e-9 && exact_ok && worst_avg <= 5e-4 + 1e-12;
    Ok((pass, format!("max |measured - closed form| = {worst:.2e}, rational exact = {exact_ok}, max |avg - table| = {worst_avg:.2e}")))
}

fn impossibility_example() -> Outcome {
    let honest = make_unanimity_game(2, Coalition::full(2))?;
    let split = make_unanimity_game(3, Coalition::full(3))?;
    let latent_of = [0usize, 0, 1];
    let a_honest = exact_semivalue::<Rational, _>(&honest, SemivalueFamily::Shapley)?.values[0];
    let phi = exact_semivalue::<Rational, _>(&split, SemivalueFamily::Shapley)?.values;
    let a_split: Rational = phi.iter().zip(latent_of).filter(|(_, l)| *l == 0).map(|(v, _)| *v).sum();
    let exact = a_honest == Rational::new(1, 2) && a_split == Rational::new(2, 3) && a_split - a_honest == Rational::new(1, 6);
    let f_honest = exact_semivalue::<f64, _>(&honest, SemivalueFamily::Shapley)?.values[0];
    let f_phi = exact_semivalue::<f64, _>(&split, SemivalueFamily::Shapley)?.values;
    let gain = f_phi[0] + f_phi[1] - f_honest;
    let pass = exact && (gain - 1.0 / 6.0).abs() <= 1e-12;
    Ok((pass, format!("honest {f_honest}, split {}, gain {gain:.15}", f_phi[0] + f_phi[1])))
}

fn exact_false_name_proofness() -> Outcome {
    let dgp = SyntheticDgpConfig { n_providers: 6, ..Default::default() };
    let attacks = [
        (AttackFamily::SybilSplitK { k: 2, scheme: SplitScheme::RoundRobin }, true),
        (AttackFamily::SybilSplitK { k: 3, scheme: SplitScheme::RoundRobin }, true),
        (AttackFamily::SybilSplitK { k: 4, scheme: SplitScheme::RoundRobin }, true),
        (AttackFamily::ExactDup2xSybils { fraction: 1.0 }, false),
        (AttackFamily::NearDuplicate2xSybils { sigma: 0.0, fraction: 1.0 }, false),
    ];
    let families = [
        SemivalueFamily::Shapley,
        SemivalueFamily::BanzhafRaw,
        SemivalueFamily::BanzhafNormalized,
        SemivalueFamily::Beta { alpha: 2.0, beta: 2.0 },
    ];
    let (mut runs, mut worst_gamma, mut worst_g, mut undefined_g) = (0usize, 0.0f64, 0.0f64, 0usize);
    for seed in 0..10u64 {
        let market = synthetic_market(&dgp, seed)?;
        let ctx = UtilityContext::new(LearnerConfig::default(), market.valset.clone()).with_shared_memo();
        for (family, partition) in attacks {
            let attacked = apply_attack(&market.profile, &AttackSpec::new(family), seed)?;
            // Raw counts are neutral only for pure partitions.
            let mut rules = vec![AllocationRule::EqualSubmitted, AllocationRule::CountCanonical, AllocationRule::LatentShare];
            if partition {
                rules.push(AllocationRule::CountRaw);
            }
            for fam in families {
                for &rule in &rules {
                    let spec = SemivalueSpec::exact(fam).with_seed(seed).with_exact_limit(16);
                    let mech = Mechanism::new(EvidenceLayer::OracleLatent, RepresentativeConfig::ExactDupCollapse, rule, spec);
                    let r = pay(&attacked, &mech, &ctx)?;
                    runs += 1;
                    worst_gamma = worst_gamma.max(r.gain.additive.abs());
                    match r.gain.multiplicative {
                        Some(g) => worst_g = worst_g.max((g - 1.0).abs()),
                        None => undefined_g += 1,
                    }
                }
            }
        }
    }
    let pass = worst_gamma <= 1e-9 && worst_g <= 1e-9 && undefined_g == 0;
    Ok((pass, format!("{runs} runs, max |Gamma| = {worst_gamma:.2e}, max |G - 1| = {worst_g:.2e}, undefined G = {undefined_g}")))
}

/// S4 sweep and S5 grid at n=6 with exact enumeration, evaluated under the
/// false-name-neutral latent-share rule and, for reference, equal shares.
fn bound_suite_configs() -> anyhow::Result<Vec<ExperimentConfig>> {
    let rules = OneOrMany::Many(vec!["latent_share".into(), "equal_submitted".into()]);
    let mut out = Vec::new();
    for name in ["s4_threshold_frontier.json", "s5_noise_grid.json"] {
        let mut cfg = config(name)?;
        cfg.dgp.n_providers = 6;
        cfg.seeds = (0..10).collect();
        cfg.attacks = vec!["near_duplicate_2x_sybils(sigma=0.03)".into()];
        cfg.oracle_reference = false;
        cfg.mechanisms.retain(|m| m.baseline.is_none());
        for m in &mut cfg.mechanisms {
            m.allocation = Some(rules.clone());
            m.estimator = Some(OneOrMany::One("exact".into()));
        }
        cfg.validate()?;
        out.push(cfg);
    }
    Ok(out)
}

fn approximate_bound(configs: &[ExperimentConfig], s4_records: &mut Vec<RunRecord>) -> Outcome {
    let (mut checked, mut violated, mut worst_slack) = (0usize, 0usize, f64::INFINITY);
    let (mut eq_checked, mut eq_violated) = (0usize, 0usize);
    for (i, cfg) in configs.iter().enumerate() {
        let out = run_experiment(cfg)?;
        anyhow::ensure!(out.failures.is_empty(), "run failures: {:?}", out.failures);
        for r in &out.records {
            let bound = r.bound.ok_or_else(|| anyhow::anyhow!("missing bound for {}", r.mechanism))?;
            let ok = r.gamma <= bound + 1e-9;
            if r.allocation == "latent_share" {
                checked += 1;
                violated += usize::from(!ok);
                worst_slack = worst_slack.min(bound - r.gamma);
            } else {
                eq_checked += 1;
                eq_violated += usize::from(!ok);
            }
        }
        if i == 0 {
            s4_records.extend(out.records);
        }
    }
    println!("  note: equal_submitted is not false-name-neutral in mixed clusters; {eq_violated}/{eq_checked} of its runs exceed L + D");
    Ok((
        violated == 0,
        format!("latent_share: {violated}/{checked} runs with Gamma > L + D + 1e-9, min slack {worst_slack:.3e}"),
    ))
}

fn approximate_bound_sampled(configs: &[ExperimentConfig]) -> Outcome {
    let eta = 0.05;
    let (mut runs, mut hold) = (0usize, 0usize);
    let mut budgets = Vec::new();
    for cfg in configs {
        let entries = cfg.mechanism_entries()?;
        for &seed in &cfg.seeds {
            let market = synthetic_market(&cfg.dgp, seed)?;
            let ctx = UtilityContext::new(cfg.learner.clone(), market.valset.clone()).with_shared_memo();
            let attacked = apply_attack(&market.profile, &cfg.attack_specs()?[0], seed)?;
            for entry in &entries {
                if entry.allocation() != "latent_share" {
                    continue;
                }
                let MechanismKind::Quotient(mut m) = entry.with_run(None, seed).kind else { continue };
                let k_att = build_clusters(&attacked, &m.evidence)?.k();
                let k_hon = build_clusters(&market.profile, &m.evidence)?.k();
                let r = sample_budget(1.0, eta, k_att.max(k_hon), 0.05)?;
                budgets.push(r);
                m.semivalue = SemivalueSpec { estimator: Estimator::Permutation { samples: r }, exact_n_limit: 0, ..m.semivalue };
                let rep = pay(&attacked, &m, &ctx)?;
                let l = &rep.leakage;
                runs += 1;
                hold += usize::from(rep.gain.additive <= l.escaped_mass + l.matched_drift + 2.0 * k_att as f64 * eta);
            }
        }
    }
    let frac = hold as f64 / runs as f64;
    let (lo, hi) = (budgets.iter().min().copied().unwrap_or(0), budgets.iter().max().copied().unwrap_or(0));
    Ok((frac >= 0.95, format!("{hold}/{runs} sampled runs within L + D + 2K*0.05 (R from {lo} to {hi})")))
}

fn threshold_direction(s4: &[RunRecord]) -> Outcome {
    let cells = gain_cells(s4);
    let g = |ev: &str| cells.get(&(ev.to_string(), "equal_submitted".to_string(), NEAR_DUP.to_string())).copied();
    let (Some(g85), Some(g95), Some(oracle)) = (g("cosine(theta=0.85)"), g("cosine(theta=0.95)"), g("oracle_latent")) else {
        return Ok((false, format!("missing cells in {:?}", cells.keys().collect::<Vec<_>>())));
    };
    let high: Vec<f64> = ["cosine(theta=0.95)", "cosine(theta=0.97)", "cosine(theta=0.99)"].iter().filter_map(|e| g(e)).collect();
    let worst = high.iter().map(|x| (x - oracle).abs()).fold(0.0, f64::max);
    let pass = g85 > g95 && high.len() == 3 && worst <= 0.15;
    Ok((pass, format!("G(0.85) = {g85:.3}, G(0.95) = {g95:.3}, oracle G = {oracle:.3}, max |G(theta>=0.95) - oracle| = {worst:.3}")))
}

/// Random monotone utility over weighted units: concave saturation per
/// prototype, each unit counted toward its nearest prototype.
struct CoverageUtility {
    prototypes: Vec<[f64; 2]>,
    scale: Vec<f64>,
    rate: Vec<f64>,
}

impl CoverageUtility {
    fn value(&self, units: &[WeightedUnit]) -> f64 {
        let mut mass = vec![0.0; self.prototypes.len()];
        for wu in units {
            let f = &wu.unit.payload.features;
            let t = (0..self.prototypes.len())
                .min_by(|&a, &b| {
                    let d = |p: &[f64; 2]| (f[0] - p[0]).powi(2) + (f[1] - p[1]).powi(2);
                    d(&self.prototypes[a]).total_cmp(&d(&self.prototypes[b]))
                })
                .expect("prototypes");
            mass[t] += wu.weight;
        }
        mass.iter().zip(&self.scale).zip(&self.rate).map(|((m, a), b)| a * (1.0 - (-b * m).exp())).sum()
    }
}

fn representative_modes() -> Vec<RepresentativeConfig> {
    let mut modes = vec![
        RepresentativeConfig::Identity,
        RepresentativeConfig::ExactDupCollapse,
        RepresentativeConfig::WeightNormalized { budget: 1.0 },
        RepresentativeConfig::WeightNormalized { budget: 2.5 },
        RepresentativeConfig::ProvenanceSelect,
    ];
    for kappa in [1, 2] {
        for selector in [CapSelector::Centroid, CapSelector::Medoid, CapSelector::FirstKappa] {
            modes.push(RepresentativeConfig::Capped { kappa, selector });
        }
    }
    modes
}

fn fairness_bound() -> Outcome {
    let modes = representative_modes();
    let families = [
        SemivalueFamily::Shapley,
        SemivalueFamily::BanzhafRaw,
        SemivalueFamily::Beta { alpha: 2.0, beta: 2.0 },
        SemivalueFamily::Beta { alpha: 1.0, beta: 4.0 },
    ];
    let (mut checks, mut violations, mut max_ratio, mut nonzero) = (0usize, 0usize, 0.0f64, 0usize);
    for trial in 0..200u64 {
        let mut rng = stream_rng(trial, 0xacc, 4);
        let k = rng.gen_range(1..=8usize);
        let n = rng.gen_range(k..=12usize);
        let n_types = rng.gen_range(2..=4usize);
        let utility = CoverageUtility {
            prototypes: (0..n_types).map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]).collect(),
            scale: (0..n_types).map(|_| rng.gen_range(0.1..1.0)).collect(),
            rate: (0..n_types).map(|_| rng.gen_range(0.2..2.0)).collect(),
        };
        let mut units: Vec<Unit> = Vec::with_capacity(n);
        for i in 0..n {
            let payload = if i > 0 && rng.gen_bool(0.3) {
                units[rng.gen_range(0..i)].payload.clone()
            } else {
                let p = utility.prototypes[rng.gen_range(0..n_types)];
                Payload { features: vec![p[0] + rng.gen_range(-0.3..0.3), p[1] + rng.gen_range(-0.3..0.3)], label: 0 }
            };
            units.push(Unit {
                unit_id: i as u64,
                payload,
                latent_owner: i % 3,
                identity: i % 3,
                source_id: rng.gen_range(0..4),
                timestamp: i as u64,
            });
        }
        let mut assignment: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect();
        assignment.shuffle(&mut rng);
        let mode = modes[trial as usize % modes.len()];
        let canonical: Vec<Vec<WeightedUnit>> = (0..k)
            .map(|c| {
                let members: Vec<Unit> = units.iter().zip(&assignment).filter(|(_, &a)| a == c).map(|(u, _)| u.clone()).collect();
                apply_representative(&members, &mode)
            })
            .collect::<Result<_, _>>()?;
        let base = TableGame::from_fn(n, |s| {
            let set: Vec<WeightedUnit> = s.members().map(|i| WeightedUnit::unit_weight(units[i].clone())).collect();
            utility.value(&set)
        })?;
        let quotient = TableGame::from_fn(k, |q| {
            let set: Vec<WeightedUnit> = q.members().flat_map(|c| canonical[c].iter().cloned()).collect();
            utility.value(&set)
        })?;
        anyhow::ensure!(base.is_monotone(), "trial {trial}: base game not monotone");
        for fam in families {
            let fl = fairness_loss(&base, &assignment, &quotient, fam)?;
            anyhow::ensure!(fl.exhaustive, "trial {trial}: K = {k} should be exhaustive");
            checks += 1;
            violations += usize::from(fl.max_loss > fl.bound + 1e-9);
            if fl.delta > 1e-12 {
                nonzero += 1;
                max_ratio = max_ratio.max(fl.max_loss / fl.bound);
            }
        }
    }
    Ok((
        violations == 0,
        format!("{violations}/{checks} (game, family) pairs exceed 2*Delta; {nonzero} with Delta > 0, max loss/(2*Delta) = {max_ratio:.3}"),
    ))
}

fn noise_grid(s5: &[RunRecord]) -> Outcome {
    let cells = gain_cells(s5);
    let gains: Vec<f64> = P_FM
        .iter()
        .map(|p| cells.get(&(noisy_label("0", p), "equal_submitted".into(), NEAR_DUP.into())).copied())
        .collect::<Option<_>>()
        .ok_or_else(|| anyhow::anyhow!("missing S5 cells in {:?}", cells.keys().collect::<Vec<_>>()))?;
    let baseline = cells
        .get(&("none".to_string(), String::new(), NEAR_DUP.to_string()))
        .copied()
        .ok_or_else(|| anyhow::anyhow!("missing baseline cell"))?;
    let increasing = gains.windows(2).all(|w| w[1] > w[0]);
    let (g0, g4) = (gains[0], gains[4]);
    let pass = increasing && g4 > baseline && g0 < 1.1 && (g0 - 0.958).abs() <= 0.35 && (g4 - 2.457).abs() <= 0.35;
    let series = gains.iter().map(|g| format!("{g:.3}")).collect::<Vec<_>>().join(", ");
    Ok((pass, format!("G along p_fm at p_fs=0: [{series}], baseline Shapley {baseline:.3}")))
}

fn allocation_rules(s7: &[RunRecord]) -> Outcome {
    let cells = gain_cells(s7);
    let g = |p: &str, rule: &str, attack: &str| {
        cells
            .get(&(noisy_label("0", p), rule.to_string(), attack.to_string()))
            .copied()
            .ok_or_else(|| anyhow::anyhow!("missing S7 cell p_fm={p} {rule} {attack}"))
    };
    let eq = g("0.2", "equal_submitted", NEAR_DUP)?;
    let cc = g("0.2", "count_canonical", NEAR_DUP)?;
    let pure: Vec<f64> = P_FM[1..].iter().map(|p| g(p, "count_canonical", PURE_SYBIL)).collect::<anyhow::Result<_>>()?;
    let pass = eq - cc >= 0.2 && pure.iter().all(|&x| x < 1.0);
    let series = pure.iter().map(|g| format!("{g:.3}")).collect::<Vec<_>>().join(", ");
    Ok((pass, format!("near_dup at p_fm=0.2: equal {eq:.3} vs count_canonical {cc:.3}; pure sybil count_canonical for p_fm>0: [{series}]")))
}

fn estimator_statistics() -> Outcome {
    let budget = sample_budget(1.0, 0.1, 4, 0.05)?;
    let samples = 256;
    let (mut perm_ok, mut subset_ok) = (0usize, 0usize);
    for trial in 0..100u64 {
        let game = make_random_monotone_game(6, 1000 + trial)?;
        for (family, estimator, hits) in [
            (SemivalueFamily::Shapley, Estimator::Permutation { samples }, &mut perm_ok),
            (SemivalueFamily::BanzhafRaw, Estimator::RandomSubset { samples }, &mut subset_ok),
        ] {
            let exact = exact_semivalue::<f64, _>(&game, family)?.values;
            let spec = SemivalueSpec { estimator, exact_n_limit: 0, ..SemivalueSpec::sampled(family, samples, trial) };
            let est = estimate::<f64, _>(&game, &spec)?;
            let err = est.values.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            *hits += usize::from(err <= est.eta_bound);
        }
    }
    let pass = budget == 254 && perm_ok >= 95 && subset_ok >= 95;
    Ok((pass, format!("sample_budget(1, 0.1, 4, 0.05) = {budget}; within eta_bound: permutation {perm_ok}/100, subset {subset_ok}/100")))
}

fn clustered_pool(classes: usize, per_class: usize, dim: usize, spread: f64, seed: u64) -> anyhow::Result<EmbeddingPool> {
    let mut rng = stream_rng(seed, 0x9001, 0);
    let normal = Normal::new(0.0, 1.0)?;
    let mut vectors = Vec::with_capacity(classes * per_class * dim);
    let mut labels = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        let center: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
        let cn = center.iter().map(|x| x * x).sum::<f64>().sqrt();
        for _ in 0..per_class {
            let row: Vec<f64> = center.iter().map(|x| x / cn + spread * normal.sample(&mut rng) / (dim as f64).sqrt()).collect();
            let rn = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            vectors.extend(row.iter().map(|x| (x / rn) as f32));
            labels.push(c);
        }
    }
    Ok(EmbeddingPool::new("synthetic", dim, vectors, labels)?)
}

fn theta_prediction() -> Outcome {
    let dim = 384;
    let pool = clustered_pool(6, 80, dim, 0.6, 7)?;
    let proxy_gap = |sigma: f64| -> anyhow::Result<f64> {
        let c = neardup_ceiling(&pool, sigma, 5000, 3)?;
        Ok((c - 1.0 / (1.0 + sigma * sigma * dim as f64).sqrt()).abs())
    };
    let mut worst_ceiling: f64 = 0.0;
    for sigma in [0.01, 0.02, 0.03] {
        worst_ceiling = worst_ceiling.max(proxy_gap(sigma)?);
    }
    // Outside the near-duplicate regime the 10th percentile drifts below
    // the mean-based proxy; reported, not checked.
    println!("  note: ceiling gap at sigma=0.05 is {:.4}", proxy_gap(0.05)?);
    let shape = MarketShape { n_providers: 8, units_each: 40 };
    let sim = ChainingSimulation::new(&pool, shape, PartitionProtocol::ClassStratified, 30, 11)?;
    let grid: Vec<f64> = (0..=100).map(|i| 0.5 + 0.005 * i as f64).collect();
    let curve: Vec<f64> = grid.iter().map(|&t| sim.mean_mcf(t)).collect();
    let monotone = curve.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let reference = sim.floor(0.10);
    let floors: Vec<Option<f64>> = [0.05, 0.075, 0.10, 0.125, 0.15, 0.175, 0.20].iter().map(|&c| sim.floor(c)).collect();
    let spread = match reference {
        Some(r) => floors.iter().map(|f| f.map_or(f64::INFINITY, |x| (x - r).abs())).fold(0.0, f64::max),
        None => f64::INFINITY,
    };
    let pass = worst_ceiling <= 0.02 && monotone && spread <= 0.05;
    Ok((
        pass,
        format!("max |ceiling - 1/sqrt(1+sigma^2 d)| over sigma in [0.01, 0.03] = {worst_ceiling:.4}; MCF monotone = {monotone}; floor(0.10) = {reference:?}, max deviation over cutoffs = {spread:.3}"),
    ))
}

fn main() {
    let mut suite = Suite { results: Vec::new() };
    suite.run("S1 split-gain table", split_gain_table);
    suite.run("Theorem 1 impossibility example", impossibility_example);
    suite.run("Theorem 2 exact false-name-proofness", exact_false_name_proofness);

    let mut s4 = Vec::new();
    match bound_suite_configs() {
        Ok(configs) => {
            suite.run("Theorem 3 bound, exact enumeration", || approximate_bound(&configs, &mut s4));
            suite.run("Theorem 3 bound, sampled estimation", || approximate_bound_sampled(&configs));
            suite.run("Theorem 3 threshold direction", || threshold_direction(&s4));
        }
        Err(e) => suite.run("Theorem 3 bound suite", || Err(e)),
    }
    suite.run("Theorem 4 fairness bound", fairness_bound);

    let s5 = config("s5_noise_grid.json").and_then(|mut cfg| {
        for m in &mut cfg.mechanisms {
            if let Some(OneOrMany::Many(ev)) = &mut m.evidence {
                ev.retain(|e| e.starts_with("noisy_oracle_latent(p_fs=0,"));
            }
        }
        cfg.oracle_reference = false;
        Ok(run_experiment(&cfg)?.records)
    });
    suite.run("S5 noise grid", || noise_grid(&s5.map_err(|e| anyhow::anyhow!("{e:#}"))?));
    let s7 = config("s7_allocation_rules.json").and_then(|mut cfg| {
        cfg.oracle_reference = false;
        Ok(run_experiment(&cfg)?.records)
    });
    suite.run("S7 allocation rules", || allocation_rules(&s7.map_err(|e| anyhow::anyhow!("{e:#}"))?));
    suite.run("Estimator statistics", estimator_statistics);
    suite.run("Theta prediction on synthetic geometry", theta_prediction);

    let failed: Vec<&str> = suite.results.iter().filter(|(_, p)| !p).map(|(n, _)| n.as_str()).collect();
    println!("acceptance: {}/{} criteria passed", suite.results.len() - failed.len(), suite.results.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join("; "));
        std::process::exit(1);
    }
}
