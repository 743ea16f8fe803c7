//! Acceptance suite. Prints one PASS/FAIL line per criterion, then the
//! supporting experiment checks, and exits non-zero if anything failed.
//!
//! Training-based criteria take tens of minutes on one core.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use esn_oa::adapt::{RlsConfig, RlsReadout};
use esn_oa::agent::{EpisodeLog, Frontend, Method};
use esn_oa::harness::setup::build_adapter;
use esn_oa::harness::stats::{mean, median, spearman};
use esn_oa::harness::{self, Checkpoint, RunConfig, SweepSummary};
use esn_oa::numerics::Rng;
use esn_oa::oracles::{rls_ridge_discrepancy, sac_gradient_errors};
use esn_oa::reservoir::{Reservoir, ReservoirConfig};

type Outcome = Result<(bool, String), String>;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, kind: &str, name: &str, outcome: Outcome) {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        if !passed {
            self.failures += 1;
        }
        println!("{kind} {} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn rls_ridge() -> Outcome {
    let start = Instant::now();
    let seeds: Vec<u64> = (0..10).collect();
    let worst = rls_ridge_discrepancy(&seeds, 20, 500, 1.0).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    Ok((worst <= 1e-8 && secs < 5.0, format!("max rel. Frobenius {worst:.2e} (<= 1e-8), {secs:.2} s (< 5 s)")))
}

fn scalar_rls() -> Outcome {
    let mut rls = RlsReadout::new(RlsConfig { lambda: 1.0, delta: 100.0 }, 1, 1).map_err(err)?;
    rls.step(&[1.0], &[1.0]).map_err(err)?;
    let expect = 100.0 / 101.0;
    let (w, p) = (rls.w_out().get(0, 0), rls.p().get(0, 0));
    let worst = (w - expect).abs().max((p - expect).abs());
    Ok((worst <= 1e-12, format!("W={w:.15} P={p:.15}, |err| {worst:.1e} (<= 1e-12)")))
}

fn echo_state_property() -> Outcome {
    let mut worst: f64 = 0.0;
    for n_x in [50, 300] {
        for seed in 0..20u64 {
            let mut a = Reservoir::build(ReservoirConfig { n_x, n_u: 4, rho: 0.9, alpha: 0.3, input_scale: 1.0, seed })
                .map_err(err)?;
            let mut b = a.clone();
            let mut rng = Rng::with_stream(seed, 40);
            let xa: Vec<f64> = (0..n_x).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let xb: Vec<f64> = (0..n_x).map(|_| rng.uniform(-1.0, 1.0)).collect();
            a.set_state(&xa).map_err(err)?;
            b.set_state(&xb).map_err(err)?;
            for _ in 0..1000 {
                let u: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
                a.update(&u).map_err(err)?;
                b.update(&u).map_err(err)?;
            }
            let d = a.state().iter().zip(b.state()).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(d);
        }
    }
    Ok((worst < 1e-6, format!("max state gap {worst:.2e} over 40 reservoirs (< 1e-6)")))
}

fn sac_gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = [0.0f64; 3];
    for hidden in [&[2][..], &[16, 16][..]] {
        for seed in 0..3 {
            let errs = sac_gradient_errors(hidden, seed, 100, 1e-5).map_err(err)?;
            for (w, e) in worst.iter_mut().zip(errs) {
                *w = w.max(e);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst.iter().all(|&e| e <= 1e-4) && secs < 10.0;
    Ok((
        ok,
        format!(
            "max rel. error critic {:.1e} actor {:.1e} temperature {:.1e} (<= 1e-4), {secs:.2} s (< 10 s)",
            worst[0], worst[1], worst[2]
        ),
    ))
}

/// Per-step one-step prediction MSE of a fresh adapter under uniform random actions.
fn random_policy_mse(cfg: &RunConfig, seed: u64, steps: usize) -> Result<Vec<f64>, String> {
    let mut frontend = Frontend::Esn(Box::new(build_adapter(cfg, seed).map_err(err)?));
    let env_cfg = cfg.training_env();
    let spec = env_cfg.spec();
    let mut env = env_cfg.build().map_err(err)?;
    let mut rng = Rng::with_stream(seed, 50);
    let s0 = env.reset(&mut rng);
    frontend.begin_episode(&s0).map_err(err)?;
    let mut mse = Vec::with_capacity(steps);
    while mse.len() < steps {
        let a: Vec<f64> = (0..spec.act_dim).map(|i| rng.uniform(spec.act_low[i], spec.act_high[i])).collect();
        let tr = env.step(&a).map_err(err)?;
        let (_, rec) = frontend.step(&a, &tr.s_next).map_err(err)?;
        let rec = rec.ok_or("adapter produced no record")?;
        mse.push(rec.error_norm.powi(2) / spec.obs_dim as f64);
        if tr.done || tr.truncated {
            let s0 = env.reset(&mut rng);
            frontend.begin_episode(&s0).map_err(err)?;
        }
    }
    Ok(mse)
}

fn online_prediction() -> Outcome {
    let cfg = RunConfig::default();
    let mut good = 0;
    let mut ratios = Vec::new();
    for seed in 0..10 {
        let mse = random_policy_mse(&cfg, seed, 1000)?;
        let ratio = mean(&mse[900..1000]) / mean(&mse[0..100]);
        if ratio <= 0.1 {
            good += 1;
        }
        ratios.push(ratio);
    }
    Ok((
        good >= 8,
        format!("{good}/10 seeds with late/early MSE <= 0.1 (need 8); median ratio {:.3}", median(&ratios)),
    ))
}

fn train_all(cfg: &RunConfig) -> Result<Vec<Checkpoint>, String> {
    cfg.seeds.iter().map(|&s| harness::train_seed(cfg, s).map(|t| t.checkpoint).map_err(err)).collect()
}

fn with_friction(cfg: &RunConfig, f: f64) -> RunConfig {
    let mut c = cfg.clone();
    c.env = c.env.with_disturbance(f);
    c
}

/// `max(dw_norm[500..510]) / median(dw_norm[400..500])`.
fn spike_ratio(log: &EpisodeLog) -> f64 {
    let post = log.dw_norms[500..510].iter().copied().fold(0.0, f64::max);
    post / median(&log.dw_norms[400..500])
}

struct Sled {
    esn: Vec<Checkpoint>,
    sac: Vec<Checkpoint>,
    cfg: RunConfig,
}

fn sled_config() -> RunConfig {
    RunConfig::from_json(
        br#"{
            "experiment": "acceptance-sled",
            "env": {"kind": "sled", "switch_step": 500, "max_steps": 1000},
            "sac": {"batch_size": 64},
            "seeds": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9],
            "total_steps": 20000
        }"#,
    )
    .expect("sled config")
}

fn train_sled() -> Result<Sled, String> {
    let cfg = sled_config();
    let mut esn_cfg = cfg.clone();
    esn_cfg.method = Method::EsnOa;
    let mut sac_cfg = cfg.clone();
    sac_cfg.method = Method::Sac;
    sac_cfg.seeds.truncate(5);
    Ok(Sled { esn: train_all(&esn_cfg).map_err(err)?, sac: train_all(&sac_cfg).map_err(err)?, cfg })
}

fn adaptation_spike(sled: &Sled) -> Outcome {
    let mut cfg = sled.cfg.clone();
    cfg.method = Method::EsnOa;
    let spikes = harness::switch_demo_checkpoints(&with_friction(&cfg, 10.0), &sled.esn).map_err(err)?;
    let nulls = harness::switch_demo_checkpoints(&with_friction(&cfg, 1.0), &sled.esn).map_err(err)?;
    let spike: Vec<f64> = spikes.iter().map(spike_ratio).collect();
    let null: Vec<f64> = nulls.iter().map(spike_ratio).collect();
    let spiked = spike.iter().filter(|&&r| r >= 5.0).count();
    let quiet = null.iter().filter(|&&r| r < 2.0).count();
    Ok((
        spiked >= 8 && quiet == null.len(),
        format!(
            "F=10: {spiked}/10 seeds with ratio >= 5 (min {:.3e}); F=1: {quiet}/10 seeds with ratio < 2 (need all; max {:.3})",
            spike.iter().copied().fold(f64::INFINITY, f64::min),
            null.iter().copied().fold(0.0, f64::max)
        ),
    ))
}

/// Mean per-step reward over steps 600..1000 divided by that over 300..500,
/// with both windows averaged across seeds.
fn retention(logs: &[EpisodeLog]) -> f64 {
    let post: Vec<f64> = logs.iter().map(|l| mean(&l.rewards[600..1000])).collect();
    let pre: Vec<f64> = logs.iter().map(|l| mean(&l.rewards[300..500])).collect();
    mean(&post) / mean(&pre)
}

fn intra_episode_recovery(sled: &Sled) -> Outcome {
    let mut esn_cfg = with_friction(&sled.cfg, 4.0);
    esn_cfg.method = Method::EsnOa;
    let mut sac_cfg = esn_cfg.clone();
    sac_cfg.method = Method::Sac;
    let esn = harness::switch_demo_checkpoints(&esn_cfg, &sled.esn[..5]).map_err(err)?;
    let sac = harness::switch_demo_checkpoints(&sac_cfg, &sled.sac).map_err(err)?;
    let (re, rs) = (retention(&esn), retention(&sac));
    Ok((
        re >= 0.7 && rs < 0.7,
        format!("F=4 over 5 seeds: esn-oa retains {re:.3} (need >= 0.7), sac retains {rs:.3} (need < 0.7)"),
    ))
}

struct Cartpole {
    sac: SweepSummary,
    esn: SweepSummary,
    dr: SweepSummary,
    /// Wall time of training and evaluating sac and esn-oa.
    robustness_secs: f64,
}

fn cartpole_config(method: Method) -> RunConfig {
    let mut cfg = RunConfig::from_json(
        br#"{
            "experiment": "acceptance-cartpole",
            "sac": {"batch_size": 64},
            "seeds": [0, 1, 2, 3, 4],
            "total_steps": 100000,
            "eval_episodes": 10,
            "sweep_grid": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
        }"#,
    )
    .expect("cartpole config");
    cfg.method = method;
    cfg
}

fn sweep_method(method: Method) -> Result<SweepSummary, String> {
    let cfg = cartpole_config(method);
    let cks = train_all(&cfg)?;
    harness::sweep_checkpoints(&cfg, &cks).map_err(err)
}

fn train_cartpole() -> Result<Cartpole, String> {
    let start = Instant::now();
    let sac = sweep_method(Method::Sac)?;
    let esn = sweep_method(Method::EsnOa)?;
    let robustness_secs = start.elapsed().as_secs_f64();
    let dr = sweep_method(Method::Dr)?;
    Ok(Cartpole { sac, esn, dr, robustness_secs })
}

fn robustness(cp: &Cartpole) -> Outcome {
    let Some(row) = cp.sac.rows.iter().rev().find(|r| r.mean_length >= 50.0) else {
        return Ok((false, "sac never completes 50 steps".into()));
    };
    let a = row.sweep_value;
    let esn = cp.esn.row(a).ok_or("missing esn-oa row")?.mean;
    let hours = cp.robustness_secs / 3600.0;
    Ok((
        esn >= 2.0 * row.mean && hours <= 2.0,
        format!(
            "A={a}: esn-oa {esn:.1} vs sac {:.1} (need >= 2x) over 5 seeds; {:.1} min (<= 2 h)",
            row.mean,
            cp.robustness_secs / 60.0
        ),
    ))
}

fn latency() -> Outcome {
    let report = harness::bench(&RunConfig::default()).map_err(err)?;
    Ok((
        report.median_us < 1000.0,
        format!(
            "n_x={} median {:.1} us (< 1000 us), p99 {:.1} us over {} steps",
            report.n_x, report.median_us, report.p99_us, report.steps
        ),
    ))
}

fn cli_sweep(config: &Path, out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_esn-oa"))
        .args(["sweep", "--quick", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .status()
        .map_err(err)?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("sweep exited with {status}"))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"experiment": "determinism", "total_steps": 4000, "sac": {"batch_size": 64}, "sweep_grid": [0, 4, 8]}"#,
    )
    .map_err(err)?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cli_sweep(&config, &a)?;
    cli_sweep(&config, &b)?;
    let mut same = Vec::new();
    for name in ["sweep_long.csv", "sweep_summary.csv", "training_curve.csv"] {
        let x = std::fs::read(a.join(name)).map_err(err)?;
        let y = std::fs::read(b.join(name)).map_err(err)?;
        same.push((name, x == y, x.len()));
    }
    let ok = same.iter().all(|s| s.1);
    let detail = same
        .iter()
        .map(|(n, eq, len)| format!("{n} {} ({len} B)", if *eq { "identical" } else { "differs" }))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((ok, detail))
}

fn sac_fits_nominal(cp: &Cartpole) -> Outcome {
    let r = cp.sac.row(0.0).ok_or("missing A=0")?;
    Ok((r.mean >= 900.0, format!("sac mean return at A=0 {:.1} (>= 900)", r.mean)))
}

fn sac_degrades_with_wind(cp: &Cartpole) -> Outcome {
    let a: Vec<f64> = cp.sac.rows.iter().map(|r| r.sweep_value).collect();
    let ret: Vec<f64> = cp.sac.rows.iter().map(|r| r.mean).collect();
    let rho = spearman(&a, &ret);
    Ok((rho < 0.0, format!("Spearman(A, sac return) {rho:.3} (< 0)")))
}

fn dr_beats_sac_in_range(cp: &Cartpole) -> Outcome {
    let a = 6.0;
    let dr = cp.dr.row(a).ok_or("missing dr row")?.mean;
    let sac = cp.sac.row(a).ok_or("missing sac row")?.mean;
    Ok((dr > sac, format!("A={a} (inside [0, 6]): dr {dr:.1} vs sac {sac:.1}")))
}

fn esn_beats_dr_out_of_range(cp: &Cartpole) -> Outcome {
    let a = 9.0;
    let esn = cp.esn.row(a).ok_or("missing esn-oa row")?.mean;
    let dr = cp.dr.row(a).ok_or("missing dr row")?.mean;
    Ok((esn > dr, format!("A={a} (outside [0, 6]): esn-oa {esn:.1} vs dr {dr:.1}")))
}

fn main() -> ExitCode {
    let mut r = Report { failures: 0 };
    let total = Instant::now();
    r.line("criterion", "rls matches batch ridge", rls_ridge());
    r.line("criterion", "scalar rls hand case", scalar_rls());
    r.line("criterion", "echo state property", echo_state_property());
    r.line("criterion", "sac gradients match finite differences", sac_gradients());
    r.line("criterion", "online prediction learning", online_prediction());

    let sled = train_sled();
    match &sled {
        Ok(s) => {
            r.line("criterion", "adaptation spike at friction switch", adaptation_spike(s));
            r.line("criterion", "intra-episode recovery", intra_episode_recovery(s));
        }
        Err(e) => {
            r.line("criterion", "adaptation spike at friction switch", Err(e.clone()));
            r.line("criterion", "intra-episode recovery", Err(e.clone()));
        }
    }

    let cartpole = train_cartpole();
    match &cartpole {
        Ok(cp) => r.line("criterion", "robustness ordering under wind", robustness(cp)),
        Err(e) => r.line("criterion", "robustness ordering under wind", Err(e.clone())),
    }
    r.line("criterion", "per-step latency", latency());
    r.line("criterion", "sweep --quick is byte-reproducible", determinism());

    if let Ok(cp) = &cartpole {
        r.line("check", "sac learns the nominal task", sac_fits_nominal(cp));
        r.line("check", "sac degrades as wind grows", sac_degrades_with_wind(cp));
        r.line("check", "dr beats sac inside its range", dr_beats_sac_in_range(cp));
        r.line("check", "esn-oa beats dr beyond its range", esn_beats_dr_out_of_range(cp));
        for (name, s) in [("sac", &cp.sac), ("esn-oa", &cp.esn), ("dr", &cp.dr)] {
            let row: Vec<String> = s.rows.iter().map(|x| format!("{}:{:.0}", x.sweep_value, x.mean)).collect();
            println!("info {name} mean return by A: {}", row.join(" "));
        }
    }
    println!(
        "acceptance finished in {:.1} min with {} failure(s)",
        total.elapsed().as_secs_f64() / 60.0,
        r.failures
    );
    if r.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
