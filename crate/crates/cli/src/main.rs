use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use esn_oa::harness::{self, RunConfig};
use esn_oa::oracles::{run_oracles, Scale};

#[derive(Parser)]
#[command(name = "esn-oa", version, about = "Reservoir-augmented SAC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured seed; writes checkpoints/ and training_curve.csv.
    Train(Common),
    /// Evaluate checkpoints over the sweep grid; writes sweep_long.csv and sweep_summary.csv.
    Sweep(WithCheckpoint),
    /// One long sled episode per seed with a mid-episode friction switch; writes switch_log.csv.
    SwitchDemo(WithCheckpoint),
    /// Per-step latency of the adaptation pipeline; writes bench.json.
    Bench(Common),
    /// Run the independent reference checks; writes oracles.json.
    Oracles(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration (defaults apply to missing fields).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Added to every configured seed.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
    /// Five seeds and reduced budgets.
    #[arg(long)]
    quick: bool,
}

#[derive(Args)]
struct WithCheckpoint {
    #[command(flatten)]
    common: Common,
    /// Directory with seed_<s>.json checkpoints. Defaults to <out>/checkpoints,
    /// training first if it does not exist.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
            None => RunConfig::default(),
        };
        if self.quick {
            cfg = cfg.quick();
        }
        cfg = cfg.with_seed_offset(self.seed_offset);
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(cfg)
    }
}

fn checkpoints(cfg: &RunConfig, args: &WithCheckpoint) -> Result<PathBuf> {
    if let Some(dir) = &args.checkpoint {
        return Ok(dir.clone());
    }
    let dir = harness::default_checkpoint_dir(&args.common.out);
    if !dir.exists() {
        log::info!("no checkpoints at {}; training first", dir.display());
        harness::run_train(cfg, &args.common.out).context("training")?;
    }
    Ok(dir)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.load()?;
            let trained = harness::run_train(&cfg, &args.out)?;
            println!("trained {} seed(s) of {} into {}", trained.len(), cfg.method, args.out.display());
        }
        Command::Sweep(args) => {
            let cfg = args.common.load()?;
            let dir = checkpoints(&cfg, &args)?;
            let summary = harness::run_sweep(&cfg, &dir, &args.common.out)?;
            for r in &summary.rows {
                println!("{} {:>6} {:9.2} ± {:.2}", r.method, r.sweep_value, r.mean, r.std);
            }
        }
        Command::SwitchDemo(args) => {
            let cfg = args.common.load()?;
            let dir = checkpoints(&cfg, &args)?;
            let logs = harness::run_switch_demo(&cfg, &dir, &args.common.out)?;
            println!("logged {} episode(s) to {}", logs.len(), args.common.out.display());
        }
        Command::Bench(args) => {
            let cfg = args.load()?;
            let report = harness::run_bench(&cfg, &args.out)?;
            println!(
                "median {:.1} us, p99 {:.1} us (n_x={}, obs_dim={})",
                report.median_us, report.p99_us, report.n_x, report.obs_dim
            );
        }
        Command::Oracles(args) => {
            // The config is validated for consistency but the oracles are self-contained.
            args.load()?;
            let scale = if args.quick { Scale::Small } else { Scale::Full };
            let report = run_oracles(scale)?;
            write_json(&args.out.join("oracles.json"), &report)?;
            for r in &report.results {
                let mark = if r.passed { "pass" } else { "FAIL" };
                println!("{mark} {:<40} error={:.3e} tol={:.1e}", r.name, r.error, r.tolerance);
            }
            return Ok(report.all_passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"{
        "reservoir": {"n_x": 20},
        "sac": {"hidden": [8], "batch_size": 8, "warmup_steps": 50},
        "seeds": [0],
        "total_steps": 150,
        "eval_episodes": 1,
        "sweep_grid": [0.0, 3.0],
        "bench_steps": 100,
        "bench_warmup": 10
    }"#;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("esn-oa").chain(args.iter().copied())).unwrap()
    }

    fn tiny_config(dir: &Path) -> String {
        let path = dir.join("tiny.json");
        std::fs::write(&path, TINY).unwrap();
        path.to_str().unwrap().to_string()
    }

    #[test]
    fn sweep_trains_first_and_writes_csvs() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let out = dir.path().join("out");
        assert!(run(cli(&["sweep", "--config", &config, "--out", out.to_str().unwrap()])).unwrap());
        for name in ["training_curve.csv", "sweep_long.csv", "sweep_summary.csv", "checkpoints/seed_0.json"] {
            assert!(out.join(name).exists(), "{name}");
        }
    }

    #[test]
    fn seed_offset_shifts_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let out = dir.path().join("out");
        let args = ["train", "--config", &config, "--out", out.to_str().unwrap(), "--seed-offset", "7"];
        assert!(run(cli(&args)).unwrap());
        assert!(out.join("checkpoints/seed_7.json").exists());
    }

    #[test]
    fn bench_and_oracles_write_json() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let out = dir.path().to_str().unwrap();
        assert!(run(cli(&["bench", "--config", &config, "--out", out])).unwrap());
        assert!(run(cli(&["oracles", "--quick", "--out", out])).unwrap());
        let bench: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("bench.json")).unwrap()).unwrap();
        assert_eq!(bench["n_x"], 20);
        let oracles: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("oracles.json")).unwrap()).unwrap();
        assert_eq!(oracles["all_passed"], true);
    }

    #[test]
    fn bad_config_key_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"sac": {"gama": 0.9}}"#).unwrap();
        let err = run(cli(&["train", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]))
            .unwrap_err();
        assert!(format!("{err:#}").contains("sac"), "{err:#}");
    }

    #[test]
    fn switch_demo_rejects_cartpole() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let out = dir.path().join("out");
        assert!(run(cli(&["switch-demo", "--config", &config, "--out", out.to_str().unwrap()])).is_err());
    }

    #[test]
    fn out_is_required() {
        assert!(Cli::try_parse_from(["esn-oa", "train"]).is_err());
        assert!(Cli::try_parse_from(["esn-oa", "fly", "--out", "x"]).is_err());
    }
}
