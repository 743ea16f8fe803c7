//! Train, sweep, switch-demo and latency-bench protocols.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{
    run_episode, train, EpisodeLog, EpisodeOptions, Frontend, Method, SacAgent, TrainOptions,
};
use crate::envs::EnvConfig;
use crate::error::{Error, Result};

use super::checkpoint::{checkpoint_path, Checkpoint, EsnCheckpoint, CHECKPOINT_FORMAT};
use super::config::{EvalReadout, RunConfig};
use super::csvio::{self, fmt_f64, LongRow};
use super::setup::{build_components, eval_stream, stream, Stream};
use super::stats;

pub const TRAINING_CURVE_CSV: &str = "training_curve.csv";
pub const SWEEP_LONG_CSV: &str = "sweep_long.csv";
pub const SWEEP_SUMMARY_CSV: &str = "sweep_summary.csv";
pub const SWITCH_LOG_CSV: &str = "switch_log.csv";
pub const BENCH_JSON: &str = "bench.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// One finished training episode.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub seed: u64,
    pub episode: usize,
    pub env_steps: usize,
    pub ret: f64,
    pub length: usize,
    pub disturbance: f64,
}

#[derive(Clone, Debug)]
pub struct TrainedSeed {
    pub checkpoint: Checkpoint,
    pub curve: Vec<CurvePoint>,
}

/// Trains one seed of the configured method and returns its checkpoint.
pub fn train_seed(cfg: &RunConfig, seed: u64) -> Result<TrainedSeed> {
    let mut c = build_components(cfg, seed)?;
    let (env, randomize) = match cfg.method {
        Method::Dr => (cfg.env.clone(), Some(cfg.dr_range())),
        _ => (cfg.training_env(), None),
    };
    let opts = TrainOptions {
        total_steps: cfg.total_steps(),
        randomize,
    };
    let mut curve = Vec::new();
    let mut env_steps = 0;
    train(
        &mut c.agent,
        &mut c.frontend,
        &env,
        opts,
        &mut stream(seed, Stream::TrainEnv),
        &mut stream(seed, Stream::TrainAgent),
        |log| {
            env_steps += log.length;
            curve.push(CurvePoint {
                seed,
                episode: curve.len(),
                env_steps,
                ret: log.ret,
                length: log.length,
                disturbance: log.sweep_value,
            });
        },
    )?;
    let esn = match (c.frontend.esn(), c.initial_readout) {
        (Some(adapter), Some(initial)) => Some(EsnCheckpoint::from_adapter(
            adapter,
            initial,
            cfg.env.obs_scale(),
            cfg.include_action,
            cfg.carry_reservoir_state,
        )),
        _ => None,
    };
    let checkpoint = Checkpoint {
        format: CHECKPOINT_FORMAT.to_string(),
        method: cfg.method,
        seed,
        env: cfg.env.clone(),
        agent: c.agent.to_state(),
        esn,
    };
    Ok(TrainedSeed { checkpoint, curve })
}

pub fn training_curve_csv(method: Method, points: &[CurvePoint]) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                method.to_string(),
                p.seed.to_string(),
                p.episode.to_string(),
                p.env_steps.to_string(),
                fmt_f64(p.ret),
                p.length.to_string(),
                fmt_f64(p.disturbance),
            ]
        })
        .collect();
    csvio::render(&csvio::TRAINING_CURVE_HEADER, &rows)
}

/// Trains every configured seed (in parallel), writing
/// `checkpoints/seed_<s>.json` and `training_curve.csv` under `out`.
pub fn run_train(cfg: &RunConfig, out: &Path) -> Result<Vec<TrainedSeed>> {
    cfg.validate()?;
    let trained: Vec<TrainedSeed> = cfg
        .seeds
        .par_iter()
        .map(|&seed| train_seed(cfg, seed))
        .collect::<Result<_>>()?;
    let dir = out.join(CHECKPOINT_DIR);
    std::fs::create_dir_all(&dir)?;
    for t in &trained {
        t.checkpoint
            .save(&checkpoint_path(&dir, t.checkpoint.seed))?;
    }
    let curve: Vec<CurvePoint> = trained
        .iter()
        .flat_map(|t| t.curve.iter().cloned())
        .collect();
    std::fs::write(
        out.join(TRAINING_CURVE_CSV),
        training_curve_csv(cfg.method, &curve)?,
    )?;
    Ok(trained)
}

fn check_compatible(cfg: &RunConfig, ck: &Checkpoint) -> Result<()> {
    if ck.method != cfg.method {
        return Err(Error::CheckpointMismatch(format!(
            "checkpoint method {} but config method {}",
            ck.method, cfg.method
        )));
    }
    if ck.env.name() != cfg.env.name() {
        return Err(Error::CheckpointMismatch(format!(
            "checkpoint environment {} but config environment {}",
            ck.env.name(),
            cfg.env.name()
        )));
    }
    Ok(())
}

/// Loads the checkpoint of every configured seed from `dir`.
pub fn load_checkpoints(cfg: &RunConfig, dir: &Path) -> Result<Vec<Checkpoint>> {
    cfg.seeds
        .iter()
        .map(|&seed| {
            let ck = Checkpoint::load(&checkpoint_path(dir, seed))?;
            if ck.seed != seed {
                return Err(Error::CheckpointMismatch(format!(
                    "file for seed {seed} holds seed {}",
                    ck.seed
                )));
            }
            check_compatible(cfg, &ck)?;
            Ok(ck)
        })
        .collect()
}

fn restore(cfg: &RunConfig, ck: &Checkpoint) -> Result<(SacAgent, Frontend)> {
    check_compatible(cfg, ck)?;
    ck.restore(cfg.eval_readout == EvalReadout::Initial)
}

/// Evaluates `episodes` episodes at one disturbance value with a frozen
/// policy; the readout (if any) keeps adapting and carries across episodes.
/// Actions are sampled from the policy unless `deterministic` is set.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    agent: &mut SacAgent,
    frontend: &mut Frontend,
    env_cfg: &EnvConfig,
    episodes: usize,
    deterministic: bool,
    seed: u64,
    value: f64,
) -> Result<Vec<EpisodeLog>> {
    let mut env = env_cfg.with_disturbance(value).build()?;
    let mut env_rng = eval_stream(seed, value, Stream::EvalEnv);
    let mut agent_rng = eval_stream(seed, value, Stream::EvalAgent);
    let mut steps = 0;
    (0..episodes)
        .map(|_| {
            let mut log = run_episode(
                agent,
                frontend,
                &mut env,
                EpisodeOptions::eval(deterministic),
                &mut steps,
                &mut env_rng,
                &mut agent_rng,
            )?;
            log.seed = seed;
            log.sweep_value = value;
            Ok(log)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub sweep_value: f64,
    /// `(seed, mean return over episodes)`.
    pub per_seed: Vec<(u64, f64)>,
    pub mean: f64,
    pub std: f64,
    pub mean_length: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub long: Vec<LongRow>,
    pub rows: Vec<SummaryRow>,
}

impl SweepSummary {
    pub fn row(&self, value: f64) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.sweep_value == value)
    }
}

/// Aggregates per-episode returns: per-seed means, then mean ± std over seeds.
pub fn summarize(
    method: Method,
    values: &[f64],
    logs: &[(u64, f64, Vec<f64>, Vec<usize>)],
) -> Vec<SummaryRow> {
    values
        .iter()
        .map(|&v| {
            let mut per_seed = Vec::new();
            let mut lengths = Vec::new();
            for (seed, value, rets, lens) in logs {
                if *value == v {
                    per_seed.push((*seed, stats::mean(rets)));
                    lengths.extend(lens.iter().map(|&l| l as f64));
                }
            }
            let means: Vec<f64> = per_seed.iter().map(|p| p.1).collect();
            SummaryRow {
                method,
                sweep_value: v,
                mean: stats::mean(&means),
                std: stats::std_dev(&means),
                mean_length: stats::mean(&lengths),
                per_seed,
            }
        })
        .collect()
}

/// Recomputes summary rows from long-format rows.
pub fn summarize_long(long: &[LongRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Method, u64), BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    let mut order: Vec<(Method, f64)> = Vec::new();
    for r in long {
        let key = (r.method, r.sweep_value.to_bits());
        if !groups.contains_key(&key) {
            order.push((r.method, r.sweep_value));
        }
        groups
            .entry(key)
            .or_default()
            .entry(r.seed)
            .or_default()
            .push(r.ret);
    }
    order
        .into_iter()
        .map(|(method, v)| {
            let per_seed: Vec<(u64, f64)> = groups[&(method, v.to_bits())]
                .iter()
                .map(|(s, rets)| (*s, stats::mean(rets)))
                .collect();
            let means: Vec<f64> = per_seed.iter().map(|p| p.1).collect();
            SummaryRow {
                method,
                sweep_value: v,
                mean: stats::mean(&means),
                std: stats::std_dev(&means),
                mean_length: f64::NAN,
                per_seed,
            }
        })
        .collect()
}

/// Runs the sweep from in-memory checkpoints.
pub fn sweep_checkpoints(cfg: &RunConfig, checkpoints: &[Checkpoint]) -> Result<SweepSummary> {
    cfg.validate()?;
    cfg.validate_sweep()?;
    let grid = &cfg.sweep_grid;
    // (seed, value, returns, lengths) in seed-major, grid order.
    let results: Vec<(u64, f64, Vec<f64>, Vec<usize>)> = if cfg.carry_readout_across_values {
        checkpoints
            .par_iter()
            .map(|ck| {
                let (mut agent, mut frontend) = restore(cfg, ck)?;
                grid.iter()
                    .map(|&v| {
                        let logs = evaluate(
                            &mut agent,
                            &mut frontend,
                            &cfg.env,
                            cfg.eval_episodes,
                            cfg.deterministic_eval,
                            ck.seed,
                            v,
                        )?;
                        Ok(pack(ck.seed, v, &logs))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect()
    } else {
        let jobs: Vec<(&Checkpoint, f64)> = checkpoints
            .iter()
            .flat_map(|ck| grid.iter().map(move |&v| (ck, v)))
            .collect();
        jobs.par_iter()
            .map(|&(ck, v)| {
                let (mut agent, mut frontend) = restore(cfg, ck)?;
                let logs = evaluate(
                    &mut agent,
                    &mut frontend,
                    &cfg.env,
                    cfg.eval_episodes,
                    cfg.deterministic_eval,
                    ck.seed,
                    v,
                )?;
                Ok(pack(ck.seed, v, &logs))
            })
            .collect::<Result<_>>()?
    };
    let long = results
        .iter()
        .flat_map(|(seed, v, rets, _)| {
            rets.iter().enumerate().map(move |(episode, &ret)| LongRow {
                method: cfg.method,
                sweep_value: *v,
                seed: *seed,
                episode,
                ret,
            })
        })
        .collect();
    Ok(SweepSummary {
        long,
        rows: summarize(cfg.method, grid, &results),
    })
}

fn pack(seed: u64, v: f64, logs: &[EpisodeLog]) -> (u64, f64, Vec<f64>, Vec<usize>) {
    (
        seed,
        v,
        logs.iter().map(|l| l.ret).collect(),
        logs.iter().map(|l| l.length).collect(),
    )
}

pub fn sweep_long_csv(long: &[LongRow]) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = long.iter().map(LongRow::to_record).collect();
    csvio::render(&csvio::SWEEP_LONG_HEADER, &rows)
}

pub fn sweep_summary_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    let recs: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.method.to_string(),
                fmt_f64(r.sweep_value),
                r.per_seed.len().to_string(),
                fmt_f64(r.mean),
                fmt_f64(r.std),
                fmt_f64(r.mean_length),
            ]
        })
        .collect();
    csvio::render(&csvio::SWEEP_SUMMARY_HEADER, &recs)
}

/// Loads checkpoints from `checkpoint_dir`, sweeps, and writes
/// `sweep_long.csv` and `sweep_summary.csv` under `out`.
pub fn run_sweep(cfg: &RunConfig, checkpoint_dir: &Path, out: &Path) -> Result<SweepSummary> {
    cfg.validate_sweep()?;
    let checkpoints = load_checkpoints(cfg, checkpoint_dir)?;
    let summary = sweep_checkpoints(cfg, &checkpoints)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(SWEEP_LONG_CSV), sweep_long_csv(&summary.long)?)?;
    std::fs::write(
        out.join(SWEEP_SUMMARY_CSV),
        sweep_summary_csv(&summary.rows)?,
    )?;
    Ok(summary)
}

/// One evaluation episode per seed on the configured sled (friction switch
/// at `switch_step` to the configured multiplier).
pub fn switch_demo_checkpoints(
    cfg: &RunConfig,
    checkpoints: &[Checkpoint],
) -> Result<Vec<EpisodeLog>> {
    if !matches!(cfg.env, EnvConfig::Sled(_)) {
        return Err(Error::InvalidConfig(
            "switch-demo requires the sled environment".into(),
        ));
    }
    let value = cfg.env.disturbance();
    checkpoints
        .par_iter()
        .map(|ck| {
            let (mut agent, mut frontend) = restore(cfg, ck)?;
            let mut logs = evaluate(
                &mut agent,
                &mut frontend,
                &cfg.env,
                1,
                cfg.deterministic_eval,
                ck.seed,
                value,
            )?;
            Ok(logs.remove(0))
        })
        .collect()
}

pub fn switch_log_csv(logs: &[EpisodeLog], with_adaptation: bool) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for log in logs {
        for t in 0..log.length {
            let mut row = vec![log.seed.to_string(), t.to_string(), fmt_f64(log.rewards[t])];
            if with_adaptation {
                row.push(fmt_f64(log.error_norms[t]));
                row.push(fmt_f64(log.dw_norms[t]));
            }
            rows.push(row);
        }
    }
    if with_adaptation {
        csvio::render(&csvio::SWITCH_LOG_HEADER_ESN, &rows)
    } else {
        csvio::render(&csvio::SWITCH_LOG_HEADER_RAW, &rows)
    }
}

pub fn run_switch_demo(
    cfg: &RunConfig,
    checkpoint_dir: &Path,
    out: &Path,
) -> Result<Vec<EpisodeLog>> {
    let checkpoints = load_checkpoints(cfg, checkpoint_dir)?;
    let logs = switch_demo_checkpoints(cfg, &checkpoints)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(
        out.join(SWITCH_LOG_CSV),
        switch_log_csv(&logs, cfg.method.uses_esn())?,
    )?;
    Ok(logs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub median_us: f64,
    pub p99_us: f64,
    pub mean_us: f64,
    pub n_x: usize,
    pub obs_dim: usize,
    pub method: Method,
    pub steps: usize,
}

/// Per-step latency of action selection plus adaptation (reservoir update,
/// prediction, augmentation, actor forward, RLS step) with an untrained
/// policy on the nominal environment, single-threaded.
pub fn bench(cfg: &RunConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let seed = cfg.seeds[0];
    let mut c = build_components(cfg, seed)?;
    let mut env = cfg.training_env().build()?;
    let mut env_rng = stream(seed, Stream::Bench);
    let mut agent_rng = stream(seed, Stream::EvalAgent);
    let needed = cfg.bench_warmup + cfg.bench_steps.max(1);
    let mut lat = Vec::with_capacity(needed);
    let mut steps = 0;
    while lat.len() < needed {
        let opts = EpisodeOptions {
            max_steps: Some(needed - lat.len()),
            ..EpisodeOptions::eval(cfg.deterministic_eval)
        };
        let log = run_episode(
            &mut c.agent,
            &mut c.frontend,
            &mut env,
            opts,
            &mut steps,
            &mut env_rng,
            &mut agent_rng,
        )?;
        lat.extend(log.latencies_us);
    }
    let timed = &lat[cfg.bench_warmup..];
    Ok(BenchReport {
        median_us: stats::median(timed),
        p99_us: stats::percentile(timed, 99.0),
        mean_us: stats::mean(timed),
        n_x: if cfg.method.uses_esn() {
            cfg.reservoir.n_x
        } else {
            0
        },
        obs_dim: cfg.env.spec().obs_dim,
        method: cfg.method,
        steps: timed.len(),
    })
}

pub fn run_bench(cfg: &RunConfig, out: &Path) -> Result<BenchReport> {
    let report = bench(cfg)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(BENCH_JSON), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

/// Default checkpoint location for a run directory.
pub fn default_checkpoint_dir(out: &Path) -> PathBuf {
    out.join(CHECKPOINT_DIR)
}
