use proptest::prelude::*;
use qattr_bench::config::{ConfigError, ExperimentConfig};
use qattr_bench::embed::{encode_embeddings, parse_embeddings, read_embeddings, write_embeddings, LoadError};
use qattr_bench::experiments::run_experiment;
use qattr_bench::plot::{emit_plot_data, PlotKind};
use qattr_bench::records::{aggregate, read_records_csv, write_records_csv, RunRecord};
use qattr_core::theta::EmbeddingPool;
use serde_json::json;

fn pool(n: usize, dim: usize, seed: u32) -> EmbeddingPool {
    let vectors: Vec<f32> = (0..n * dim).map(|i| (((i as u32).wrapping_mul(2654435761) ^ seed) % 1000) as f32 / 997.0 + 0.01).collect();
    let labels = (0..n).map(|i| i % 3).collect();
    EmbeddingPool::new("t", dim, vectors, labels).unwrap()
}

proptest! {
    #[test]
    fn embed_round_trip_is_bit_exact(
        n in 1usize..20,
        dim in 1usize..12,
        seed in any::<u32>(),
        with_meta in any::<bool>(),
    ) {
        let p = pool(n, dim, seed);
        let meta = with_meta.then(|| json!({"encoder": "test", "n": n}));
        let bytes = encode_embeddings(&p, meta.as_ref());
        let back = parse_embeddings("t", &bytes).unwrap();
        prop_assert_eq!(back.pool.labels(), p.labels());
        prop_assert!(back.pool.vectors().iter().zip(p.vectors()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(back.metadata, meta);
    }

    #[test]
    fn truncation_is_a_format_error_except_at_the_metadata_boundary(n in 1usize..6, dim in 1usize..6, cut_frac in 0.0f64..1.0) {
        let bytes = encode_embeddings(&pool(n, dim, 1), Some(&json!({"k": 1})));
        let cut = ((bytes.len() as f64) * cut_frac) as usize;
        // Metadata is optional, so dropping the whole blob leaves a valid file.
        let body = encode_embeddings(&pool(n, dim, 1), None).len();
        let parsed = parse_embeddings("t", &bytes[..cut]);
        if cut == body {
            prop_assert!(parsed.is_ok_and(|f| f.metadata.is_none()));
        } else {
            let is_format = matches!(parsed, Err(LoadError::Format { .. }));
            prop_assert!(is_format);
        }
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.embed1");
    let p = pool(7, 5, 3);
    write_embeddings(&path, &p, None).unwrap();
    let back = read_embeddings(&path).unwrap();
    assert_eq!(back.pool.vectors(), p.vectors());
    assert!(back.metadata.is_none());
    assert!(matches!(read_embeddings(dir.path().join("missing")), Err(LoadError::Io { .. })));
}

#[test]
fn label_count_mismatch_is_rejected() {
    let p = pool(4, 3, 9);
    let mut bytes = encode_embeddings(&p, None);
    // Header claims one more row than the payload holds.
    let n_offset = 7;
    bytes[n_offset..n_offset + 4].copy_from_slice(&5u32.to_le_bytes());
    assert!(matches!(parse_embeddings("t", &bytes), Err(LoadError::Format { .. })));
    let mut trailing = encode_embeddings(&p, None);
    trailing.push(0);
    assert!(parse_embeddings("t", &trailing).is_err());
}

fn small_config(extra: serde_json::Value) -> serde_json::Value {
    let mut base = json!({
        "schema_version": 1,
        "experiment": "s2_main_table",
        "dgp": {"n_providers": 3, "examples_per_provider": 20, "validation_size": 60},
        "learner": {"max_iter": 40},
        "seeds": [0, 1],
        "attacks": ["honest", "sybil_split_k(k=2)"],
        "mechanisms": [
            {"label": "shapley", "baseline": "shapley"},
            {"label": "sh_oracle", "evidence": "oracle_latent", "allocation": ["equal_submitted", "latent_share"]}
        ]
    });
    for (k, v) in extra.as_object().unwrap() {
        base[k] = v.clone();
    }
    base
}

fn field_of(err: ConfigError) -> String {
    match err {
        ConfigError::Field { field, .. } => field,
        other => panic!("expected a field error, got {other}"),
    }
}

#[test]
fn config_errors_name_the_field() {
    let e = ExperimentConfig::from_json(&small_config(json!({"attacks": []})).to_string()).unwrap_err();
    assert_eq!(field_of(e), "attacks");
    let e = ExperimentConfig::from_json(
        &small_config(json!({"mechanisms": [{"label": "x", "evidence": "telepathy"}]})).to_string(),
    )
    .unwrap_err();
    assert!(field_of(e).starts_with("mechanisms[0]"));
    let e = ExperimentConfig::from_json(&small_config(json!({"seeds": []})).to_string()).unwrap_err();
    assert_eq!(field_of(e), "seeds");
    let e = ExperimentConfig::from_json(&small_config(json!({"schema_version": 2})).to_string()).unwrap_err();
    assert_eq!(field_of(e), "schema_version");
    let e = ExperimentConfig::from_json(&small_config(json!({"colour": "blue"})).to_string()).unwrap_err();
    assert!(matches!(e, ConfigError::Json(_)) && e.to_string().contains("colour"));
}

#[test]
fn shipped_configs_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 9);
}

#[test]
fn empty_records_give_header_only_plot_data() {
    for kind in [PlotKind::Frontier, PlotKind::Grid, PlotKind::Allocation] {
        let mut out = Vec::new();
        emit_plot_data(&mut out, &[], kind).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().trim_end(), "x,series,mean,se");
    }
}

fn strip_runtime(mut records: Vec<RunRecord>) -> Vec<RunRecord> {
    for r in &mut records {
        r.runtime_ms = 0;
    }
    records
}

#[test]
fn reruns_are_identical_and_aggregates_recompute_from_csv() {
    let cfg = ExperimentConfig::from_json(&small_config(json!({})).to_string()).unwrap();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert!(a.failures.is_empty(), "{:?}", a.failures);
    assert_eq!(a.records.len(), 2 * 2 * 3);
    assert_eq!(strip_runtime(a.records.clone()), strip_runtime(b.records));

    let mut csv = Vec::new();
    write_records_csv(&mut csv, &a.records).unwrap();
    let back = read_records_csv(csv.as_slice()).unwrap();
    assert_eq!(back, a.records);
    assert_eq!(aggregate(&back), aggregate(&a.records));

    let honest: Vec<&RunRecord> = a.records.iter().filter(|r| r.attack == "honest").collect();
    assert!(honest.iter().all(|r| r.gamma.abs() < 1e-12));
    let oracle_split: Vec<&RunRecord> =
        a.records.iter().filter(|r| r.mechanism == "sh_oracle" && r.attack != "honest").collect();
    assert!(oracle_split.iter().all(|r| r.gamma.abs() < 1e-9), "{oracle_split:?}");
}

#[test]
fn cutting_exactly_the_metadata_blob_gives_a_plain_file() {
    let p = pool(3, 2, 4);
    let full = encode_embeddings(&p, Some(&json!({"k": 1})));
    let body = encode_embeddings(&p, None);
    assert!(full.starts_with(&body));
    assert!(parse_embeddings("t", &full[..body.len()]).unwrap().metadata.is_none());
    assert!(matches!(parse_embeddings("t", &full[..body.len() + 2]), Err(LoadError::Format { .. })));
}
