use std::fs;
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use surrogate_mcmc::artifacts::{self, Metadata, RunStatus};
use surrogate_mcmc::config::{parse_config_str, Method, RunConfig, ScenarioKind};
use surrogate_mcmc::runner::{compare_dirs, run_scenario, RunOptions};
use surrogate_mcmc_core::adaptive::DesignRule;
use surrogate_mcmc_core::gp::NoiseMode;
use surrogate_mcmc_core::strategy::{Incorporation, StrategyLabel};

const BIN: &str = env!("CARGO_BIN_EXE_surrogate-mcmc");

/// A smoke run small enough for the default test pass.
fn tiny(method: Method, seed: u64, iterations: usize) -> RunConfig {
    let mut cfg = RunConfig::new(ScenarioKind::SyntheticSmoke, method);
    cfg.seed = seed;
    cfg.adaptive.n_initial = Some(12);
    cfg.adaptive.n_add = Some(4);
    cfg.adaptive.n_iterations = Some(iterations);
    cfg.mcmc.n_chains = 6;
    cfg.mcmc.n_generations = 300;
    cfg.high_fidelity.n_generations = Some(60);
    cfg.surrogate.gp.restarts = 2;
    cfg
}

fn run(cfg: &RunConfig, out: &Path, resume: bool) -> surrogate_mcmc::runner::RunReport {
    run_scenario(cfg, &RunOptions { out: out.to_path_buf(), resume }).unwrap()
}

fn method() -> impl Strategy<Value = Method> {
    prop_oneof![
        Just(Method::HighFidelity),
        (0..StrategyLabel::ALL.len()).prop_map(|i| Method::Surrogate(StrategyLabel::ALL[i])),
    ]
}

fn scenario() -> impl Strategy<Value = ScenarioKind> {
    prop_oneof![
        Just(ScenarioKind::Example1KlTruth),
        Just(ScenarioKind::Example1SgsTruth),
        Just(ScenarioKind::Example2Multimodal),
        Just(ScenarioKind::SyntheticSmoke),
    ]
}

fn design_rule() -> impl Strategy<Value = DesignRule> {
    prop_oneof![
        Just(DesignRule::Random),
        Just(DesignRule::Quintile),
        (1.0f64..3.0).prop_map(|factor| DesignRule::Stretch { factor }),
    ]
}

prop_compose! {
    fn config()(
        scenario in scenario(),
        method in method(),
        seed in any::<u64>(),
        flags in (any::<bool>(), any::<bool>()),
        counts in (prop::option::of(4usize..500), prop::option::of(1usize..50), prop::option::of(0usize..30)),
        rule in design_rule(),
        subset in prop::option::of(5usize..500),
        inject in any::<bool>(),
        ensemble in 2usize..200,
        chains in 3usize..40,
        gens in 10usize..10_000,
        burn_in in 0.0f64..0.9,
        snooker in 0.0f64..1.0,
        noise in prop_oneof![
            (1e-9f64..1e-2).prop_map(|floor| NoiseMode::Optimized { floor }),
            (1e-9f64..1e-2).prop_map(|std| NoiseMode::Fixed { std }),
        ],
        orders in prop::collection::vec(1u32..6, 1..4),
        q_norm in 0.3f64..1.0,
        hf in prop::option::of(10usize..100_000),
    ) -> RunConfig {
        let mut c = RunConfig::new(scenario, method);
        c.seed = seed;
        (c.full_grid, c.long) = flags;
        (c.adaptive.n_initial, c.adaptive.n_add, c.adaptive.n_iterations) = counts;
        c.adaptive.design_rule = rule;
        c.adaptive.subset_max = subset;
        c.adaptive.strategy_a.mode = if inject { Incorporation::RealizationInjection } else { Incorporation::VarianceInflation };
        c.adaptive.strategy_a.ensemble_size = ensemble;
        c.mcmc.n_chains = chains;
        c.mcmc.n_generations = gens;
        c.mcmc.burn_in = burn_in;
        c.mcmc.p_snooker = snooker;
        c.surrogate.gp.noise = noise;
        c.surrogate.pce.orders = orders;
        c.surrogate.pce.q_norm = q_norm;
        c.high_fidelity.n_generations = hf;
        c
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn config_round_trips_through_toml_and_json(cfg in config()) {
        let toml_back = parse_config_str(&cfg.to_toml()).unwrap();
        prop_assert_eq!(&toml_back, &cfg);
        prop_assert_eq!(parse_config_str(&toml_back.to_toml()).unwrap(), toml_back);
        let json_back = parse_config_str(&cfg.to_json()).unwrap();
        prop_assert_eq!(&json_back, &cfg);
        prop_assert_eq!(json_back.hash(), cfg.hash());
    }

    #[test]
    fn valid_configs_conform_to_the_schema(cfg in config()) {
        let v: serde_json::Value = serde_json::from_str(&cfg.to_json()).unwrap();
        let errors: Vec<String> = schema().iter_errors(&v).map(|e| e.to_string()).collect();
        prop_assert!(errors.is_empty(), "{errors:?}");
    }
}

fn schema() -> &'static jsonschema::Validator {
    static CELL: std::sync::OnceLock<jsonschema::Validator> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("config.schema.json")).unwrap();
        jsonschema::draft202012::new(&serde_json::from_str(&text).unwrap()).unwrap()
    })
}

/// Config text as a JSON value, whichever format it is in.
fn as_json(path: &Path) -> serde_json::Value {
    let text = fs::read_to_string(path).unwrap();
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).unwrap()
    } else {
        serde_json::to_value(toml::from_str::<toml::Value>(&text).unwrap()).unwrap()
    }
}

#[test]
fn checked_in_examples_conform_to_the_schema() {
    for entry in fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let errors: Vec<String> = schema().iter_errors(&as_json(&path)).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{}: {errors:?}", path.display());
    }
}

#[test]
fn schema_rejects_what_the_parser_rejects() {
    let bad = [
        r#"{"scenario": "synthetic-smoke", "method": "b-pce-gp", "sede": 3}"#,
        r#"{"scenario": "synthetic-smoke", "method": "c-pce"}"#,
        r#"{"scenario": "custom", "method": "none-pce"}"#,
        r#"{"scenario": "synthetic-smoke", "method": "none-pce", "mcmc": {"n_chains": 2}}"#,
        r#"{"scenario": "synthetic-smoke", "method": "none-pce", "adaptive": {"design_rule": {"rule": "stretch"}}}"#,
    ];
    for text in bad {
        assert!(parse_config_str(text).is_err(), "parser accepted {text}");
        assert!(!schema().is_valid(&serde_json::from_str(text).unwrap()), "schema accepted {text}");
    }
}

#[test]
fn checked_in_examples_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        parse_config_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 3);
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(Method::Surrogate(StrategyLabel::BPceGp), 5, 2);
    run(&cfg, &dir.path().join("a"), false);
    run(&cfg, &dir.path().join("b"), false);
    for name in
        [artifacts::CHAINS, artifacts::DESIGN_POINTS, artifacts::RECORDS, artifacts::SUMMARY, artifacts::DENSITIES]
    {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
    let cmp = compare_dirs(&dir.path().join("a"), &dir.path().join("b")).unwrap();
    assert!(cmp.iter().all(|c| c.mean_delta == 0.0 && (c.density_overlap - 1.0).abs() < 1e-9));
}

#[test]
fn metadata_counts_every_model_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(Method::Surrogate(StrategyLabel::APce), 2, 3);
    let report = run(&cfg, dir.path(), false);
    assert_eq!(report.metadata.high_fidelity_calls, 12 + 4 * 3);
    let meta: Metadata = artifacts::read_json(&dir.path().join(artifacts::METADATA)).unwrap();
    assert_eq!(meta.status, RunStatus::Complete);
    assert_eq!(meta.seed, 2);
    assert_eq!(meta.config_hash, cfg.hash());
    assert_eq!(meta.strategy_a_mode.as_deref(), Some("variance-inflation"));
    let records = artifacts::read_records(&dir.path().join(artifacts::RECORDS)).unwrap();
    assert_eq!(records.len(), 4);
    let design = fs::read_to_string(dir.path().join(artifacts::DESIGN_POINTS)).unwrap();
    assert_eq!(design.lines().count(), 1 + 24);
}

#[test]
fn high_fidelity_rows_are_chains_times_generations() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&tiny(Method::HighFidelity, 1, 1), dir.path(), false);
    let table = artifacts::read_chains(&dir.path().join(artifacts::CHAINS)).unwrap();
    assert_eq!(table.rows.len(), 6 * 60);
    assert_eq!(report.summary.n_samples, 6 * 30);
    assert!(report.metadata.high_fidelity_calls > 0);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let full = tiny(Method::Surrogate(StrategyLabel::NonePce), 9, 3);
    run(&full, &dir.path().join("full"), false);
    let part = tiny(Method::Surrogate(StrategyLabel::NonePce), 9, 1);
    run(&part, &dir.path().join("resumed"), false);
    let report = run(&full, &dir.path().join("resumed"), true);
    assert_eq!(report.metadata.high_fidelity_calls, 12 + 4 * 3);
    for name in [artifacts::CHAINS, artifacts::DESIGN_POINTS, artifacts::RECORDS] {
        let a = fs::read(dir.path().join("full").join(name)).unwrap();
        let b = fs::read(dir.path().join("resumed").join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
}

#[test]
fn resume_refuses_a_different_seed() {
    let dir = tempfile::tempdir().unwrap();
    run(&tiny(Method::Surrogate(StrategyLabel::NonePce), 1, 1), dir.path(), false);
    let err = run_scenario(
        &tiny(Method::Surrogate(StrategyLabel::NonePce), 2, 2),
        &RunOptions { out: dir.path().into(), resume: true },
    )
    .unwrap_err();
    assert_eq!(err.kind(), "invalid-config");
}

#[test]
fn binary_writes_every_artifact_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    fs::write(&cfg_path, tiny(Method::Surrogate(StrategyLabel::NoneGp), 0, 1).to_toml()).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(BIN)
        .args(["run", cfg_path.to_str().unwrap(), "--seed", "4", "--out", out.to_str().unwrap()])
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for name in [
        artifacts::CHAINS,
        artifacts::DESIGN_POINTS,
        artifacts::RECORDS,
        artifacts::SUMMARY,
        artifacts::DENSITIES,
        artifacts::METADATA,
    ] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let meta: Metadata = artifacts::read_json(&out.join(artifacts::METADATA)).unwrap();
    assert_eq!(meta.seed, 4);

    let summary = Command::new(BIN).args(["summarize", out.to_str().unwrap()]).env("RUST_LOG", "off").output().unwrap();
    assert!(summary.status.success());
    let v: serde_json::Value = serde_json::from_slice(&summary.stdout).unwrap();
    assert_eq!(v["params"].as_array().unwrap().len(), 4);

    let cmp = Command::new(BIN)
        .args(["compare", out.to_str().unwrap(), out.to_str().unwrap()])
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    assert!(cmp.status.success());
    let v: serde_json::Value = serde_json::from_slice(&cmp.stdout).unwrap();
    assert_eq!(v["params"][0]["mean_delta"], 0.0);
}

#[test]
fn binary_reports_invalid_config_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.toml");
    fs::write(
        &cfg_path,
        "scenario = \"synthetic-smoke\"\nmethod = \"b-pce-gp\"\n[adaptive]\nn_add = 0\n[mcmc]\nn_chains = 1\n",
    )
    .unwrap();
    let out = Command::new(BIN)
        .args(["run", cfg_path.to_str().unwrap(), "--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"], "invalid-config");
    let list = v["violations"].as_array().unwrap();
    assert_eq!(list.len(), 2, "{list:?}");
    assert!(list[0].as_str().unwrap().contains("adaptive.n_add"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn binary_rejects_unknown_keys_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.json");
    fs::write(&cfg_path, r#"{"scenario": "synthetic-smoke", "method": "a-pce", "sede": 3}"#).unwrap();
    let out = Command::new(BIN).args(["run", cfg_path.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"], "parse");
    assert!(v["message"].as_str().unwrap().contains("sede"));

    let out = Command::new(BIN).args(["summarize", dir.path().join("nothing").to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"], "artifact");
}

#[test]
fn readme_config_example_parses() {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    let block = text.split("```toml\n").nth(1).and_then(|s| s.split("```").next()).unwrap();
    let cfg = parse_config_str(block).unwrap();
    assert_eq!(cfg.scenario, ScenarioKind::Example2Multimodal);
    let v = serde_json::to_value(toml::from_str::<toml::Value>(block).unwrap()).unwrap();
    assert!(schema().is_valid(&v));
}
