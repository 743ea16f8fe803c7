//! End-to-end checks of the experiment harness on tiny budgets.

use std::path::Path;

use esn_oa::agent::Method;
use esn_oa::harness::{
    self, checkpoint_path, parse_sweep_long, run_bench, run_sweep, run_switch_demo, run_train,
    summarize_long, Checkpoint, RunConfig, SCHEMA_VERSION,
};
use esn_oa::oracles::{rls_ridge_discrepancy, run_oracles, Scale};
use esn_oa::Error;

fn tiny(method: Method) -> RunConfig {
    let mut cfg = RunConfig::from_json(
        br#"{
            "experiment": "tiny",
            "reservoir": {"n_x": 20},
            "sac": {"hidden": [16, 16], "batch_size": 16, "warmup_steps": 200},
            "seeds": [0, 1],
            "total_steps": 600,
            "eval_episodes": 2,
            "sweep_grid": [0.0, 5.0],
            "pretrain_episodes": 3,
            "bench_steps": 200,
            "bench_warmup": 20
        }"#,
    )
    .unwrap();
    cfg.method = method;
    cfg
}

fn tiny_sled(method: Method) -> RunConfig {
    let mut cfg = tiny(method);
    cfg.env = serde_json::from_str(
        r#"{"kind": "sled", "friction_multiplier": 10.0, "max_steps": 200, "switch_step": 100}"#,
    )
    .unwrap();
    cfg.total_steps = Some(400);
    cfg
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn training_curve_is_reproducible() {
    let cfg = tiny(Method::EsnOa);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_train(&cfg, a.path()).unwrap();
    run_train(&cfg, b.path()).unwrap();
    let curve = read(a.path(), "training_curve.csv");
    assert_eq!(curve, read(b.path(), "training_curve.csv"));
    let text = String::from_utf8(curve).unwrap();
    assert!(text.starts_with(&format!("#schema={SCHEMA_VERSION}\n")));
    for seed in &cfg.seeds {
        let path = checkpoint_path(&harness::default_checkpoint_dir(a.path()), *seed);
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(checkpoint_path(
                &harness::default_checkpoint_dir(b.path()),
                *seed
            ))
            .unwrap()
        );
    }
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    for method in Method::ALL {
        let trained = harness::train_seed(&tiny(method), 3).unwrap();
        let json = trained.checkpoint.to_json().unwrap();
        let back = Checkpoint::parse(json.as_bytes()).unwrap();
        assert_eq!(back, trained.checkpoint, "{method}");
        assert_eq!(back.to_json().unwrap(), json, "{method}");
    }
}

#[test]
fn pretrained_readout_is_not_zero() {
    let trained = harness::train_seed(&tiny(Method::EsnOaPt), 0).unwrap();
    let esn = trained.checkpoint.esn.unwrap();
    assert!(esn.initial_readout.w_out.frobenius_norm() > 0.0);
}

#[test]
fn sweep_outputs_are_reproducible_and_consistent() {
    let cfg = tiny(Method::EsnOa);
    let train_dir = tempfile::tempdir().unwrap();
    run_train(&cfg, train_dir.path()).unwrap();
    let ck = harness::default_checkpoint_dir(train_dir.path());
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let summary = run_sweep(&cfg, &ck, a.path()).unwrap();
    run_sweep(&cfg, &ck, b.path()).unwrap();
    for name in ["sweep_long.csv", "sweep_summary.csv"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }

    let long = parse_sweep_long(&read(a.path(), "sweep_long.csv")).unwrap();
    assert_eq!(
        long.len(),
        cfg.seeds.len() * cfg.sweep_grid.len() * cfg.eval_episodes
    );
    let recomputed = summarize_long(&long);
    assert_eq!(recomputed.len(), summary.rows.len());
    for (r, s) in recomputed.iter().zip(&summary.rows) {
        assert_eq!(r.sweep_value, s.sweep_value);
        assert_eq!(s.per_seed.len(), cfg.seeds.len());
        assert!(s.std >= 0.0);
        assert!((r.mean - s.mean).abs() <= 1e-12);
        assert!((r.std - s.std).abs() <= 1e-12);
    }
}

#[test]
fn single_sample_sweep_has_zero_std() {
    let mut cfg = tiny(Method::Sac);
    cfg.seeds = vec![5];
    cfg.eval_episodes = 1;
    cfg.sweep_grid = vec![3.0];
    let ck = harness::train_seed(&cfg, 5).unwrap().checkpoint;
    let summary = harness::sweep_checkpoints(&cfg, &[ck]).unwrap();
    assert_eq!(summary.rows.len(), 1);
    assert_eq!(summary.rows[0].std, 0.0);
}

#[test]
fn mismatched_checkpoints_are_rejected() {
    let cfg = tiny(Method::Sac);
    let dir = tempfile::tempdir().unwrap();
    run_train(&cfg, dir.path()).unwrap();
    let ck = harness::default_checkpoint_dir(dir.path());

    let other_method = tiny(Method::EsnOa);
    let err = run_sweep(&other_method, &ck, dir.path()).unwrap_err();
    assert!(matches!(err, Error::CheckpointMismatch(_)), "{err:?}");

    let mut other_env = tiny(Method::Sac);
    other_env.env = serde_json::from_str(r#"{"kind": "sled"}"#).unwrap();
    let err = run_sweep(&other_env, &ck, dir.path()).unwrap_err();
    assert!(matches!(err, Error::CheckpointMismatch(_)), "{err:?}");

    // A file renamed to another seed's slot.
    std::fs::copy(checkpoint_path(&ck, 0), checkpoint_path(&ck, 9)).unwrap();
    let mut wrong_seed = tiny(Method::Sac);
    wrong_seed.seeds = vec![9];
    assert!(matches!(
        run_sweep(&wrong_seed, &ck, dir.path()),
        Err(Error::CheckpointMismatch(_))
    ));
}

#[test]
fn switch_log_schema_depends_on_method() {
    for (method, header) in [
        (Method::Sac, "seed,t,reward"),
        (Method::EsnOa, "seed,t,reward,error_norm,dw_norm"),
    ] {
        let cfg = tiny_sled(method);
        let dir = tempfile::tempdir().unwrap();
        run_train(&cfg, dir.path()).unwrap();
        let logs = run_switch_demo(
            &cfg,
            &harness::default_checkpoint_dir(dir.path()),
            dir.path(),
        )
        .unwrap();
        assert_eq!(logs.len(), cfg.seeds.len());
        let text = String::from_utf8(read(dir.path(), "switch_log.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("#schema=1"));
        assert_eq!(lines.next(), Some(header));
        assert_eq!(lines.count(), 200 * cfg.seeds.len());
        for log in &logs {
            assert_eq!(log.rewards.len(), log.length);
            assert!(log.latencies_us.iter().all(|&l| l > 0.0));
        }
    }
}

#[test]
fn switch_demo_requires_the_sled() {
    let cfg = tiny(Method::EsnOa);
    let ck = harness::train_seed(&cfg, 0).unwrap().checkpoint;
    assert!(harness::switch_demo_checkpoints(&cfg, &[ck]).is_err());
}

#[test]
fn bench_report_has_the_documented_fields() {
    let cfg = tiny(Method::EsnOa);
    let dir = tempfile::tempdir().unwrap();
    let report = run_bench(&cfg, dir.path()).unwrap();
    let json: serde_json::Value = serde_json::from_slice(&read(dir.path(), "bench.json")).unwrap();
    for key in ["median_us", "p99_us", "n_x", "obs_dim"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert_eq!(json["n_x"], 20);
    assert_eq!(json["obs_dim"], 4);
    assert!(report.median_us > 0.0 && report.p99_us >= report.median_us);
}

#[test]
fn bench_time_grows_with_reservoir_size() {
    let time = |n_x: usize| {
        let mut cfg = tiny(Method::EsnOa);
        cfg.reservoir.n_x = n_x;
        cfg.bench_steps = 2000;
        cfg.bench_warmup = 200;
        harness::bench(&cfg).unwrap().median_us
    };
    let small = time(100);
    let large = time(500);
    assert!(large >= small, "n_x=500 {large} us < n_x=100 {small} us");
}

#[test]
fn small_oracles_pass_quickly() {
    let start = std::time::Instant::now();
    let report = run_oracles(Scale::Small).unwrap();
    assert!(report.all_passed, "{report:#?}");
    assert!(report.results.len() >= 5);
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn perturbed_forgetting_breaks_ridge_equivalence() {
    assert!(rls_ridge_discrepancy(&[0, 1, 2], 10, 300, 1.0).unwrap() <= 1e-8);
    assert!(rls_ridge_discrepancy(&[0, 1, 2], 10, 300, 1.0 - 1e-3).unwrap() > 1e-8);
}
