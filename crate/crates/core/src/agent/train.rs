//! Episode loop shared by training and evaluation.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::augment::Frontend;
use super::sac::SacAgent;
use crate::envs::{Env, EnvConfig};
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// SAC on raw observations.
    Sac,
    /// SAC on observations augmented by a reservoir with a zero-initialized RLS readout.
    EsnOa,
    /// As `EsnOa`, with the readout ridge-pretrained on nominal rollouts.
    EsnOaPt,
    /// SAC on raw observations, trained with per-episode randomized disturbance.
    Dr,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Sac, Method::EsnOa, Method::EsnOaPt, Method::Dr];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sac => "sac",
            Method::EsnOa => "esn-oa",
            Method::EsnOaPt => "esn-oa-pt",
            Method::Dr => "dr",
        }
    }

    pub fn uses_esn(self) -> bool {
        matches!(self, Method::EsnOa | Method::EsnOaPt)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown method `{s}`")))
    }
}

/// Per-step traces and per-episode scalars of one episode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeLog {
    pub rewards: Vec<f64>,
    /// A-priori prediction error norm (normalized units); empty without a reservoir.
    pub error_norms: Vec<f64>,
    /// `‖e‖·‖k‖` of each readout update; empty without a reservoir.
    pub dw_norms: Vec<f64>,
    /// Wall time of policy + adaptation per step, in microseconds.
    pub latencies_us: Vec<f64>,
    pub ret: f64,
    pub length: usize,
    /// Ended in a terminal state (as opposed to the step limit or budget).
    pub terminated: bool,
    pub seed: u64,
    pub sweep_value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeOptions {
    /// Store transitions and run SAC updates.
    pub learn: bool,
    /// Use `tanh(mean)` instead of sampling.
    pub deterministic: bool,
    /// Hard cap on steps in this episode (besides the environment's own limit).
    pub max_steps: Option<usize>,
}

impl EpisodeOptions {
    /// Frozen policy; the readout still adapts.
    pub fn eval(deterministic: bool) -> Self {
        EpisodeOptions {
            learn: false,
            deterministic,
            max_steps: None,
        }
    }
}

/// Runs one episode. `env_steps` counts learning steps across episodes and
/// decides warmup; it only advances when `opts.learn` is set.
pub fn run_episode(
    agent: &mut SacAgent,
    frontend: &mut Frontend,
    env: &mut Env,
    opts: EpisodeOptions,
    env_steps: &mut usize,
    env_rng: &mut Rng,
    agent_rng: &mut Rng,
) -> Result<EpisodeLog> {
    let cap = opts.max_steps.unwrap_or(usize::MAX);
    let warmup = agent.config().warmup_steps;
    let batch_size = agent.config().batch_size;
    let act_dim = agent.act_dim();
    let mut log = EpisodeLog::default();

    let s0 = env.reset(env_rng);
    let mut input = frontend.begin_episode(&s0)?;
    let mut a_sq = vec![0.0; act_dim];
    while log.length < cap {
        let t0 = Instant::now();
        if opts.learn && *env_steps < warmup {
            for a in a_sq.iter_mut() {
                *a = agent_rng.uniform(-1.0, 1.0);
            }
        } else {
            a_sq = agent.act_squashed(&input, opts.deterministic, agent_rng)?;
        }
        let mut elapsed = t0.elapsed();
        let a_env = agent.to_env_action(&a_sq);
        let tr = env.step(&a_env)?;

        let t1 = Instant::now();
        let (next_input, record) = frontend.step(&a_env, &tr.s_next)?;
        elapsed += t1.elapsed();

        if opts.learn {
            agent
                .replay
                .push(&input, &a_sq, tr.r, &next_input, tr.done)?;
            *env_steps += 1;
            if *env_steps >= warmup && agent.replay.len() >= batch_size {
                let batch = agent.replay.sample(batch_size, agent_rng);
                agent.update(&batch, agent_rng)?;
            }
        }

        log.rewards.push(tr.r);
        log.latencies_us
            .push((elapsed.as_secs_f64() * 1e6).max(f64::MIN_POSITIVE));
        if let Some(rec) = record {
            log.error_norms.push(rec.error_norm);
            log.dw_norms.push(rec.dw_norm);
        }
        log.ret += tr.r;
        log.length += 1;
        input = next_input;
        if tr.done || tr.truncated {
            log.terminated = tr.done;
            break;
        }
    }
    Ok(log)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub total_steps: usize,
    /// Per-episode uniform range of the disturbance parameter; `None` keeps
    /// the environment config fixed.
    pub randomize: Option<(f64, f64)>,
}

/// Trains until `total_steps` environment steps have been taken. The final
/// episode is cut short at the budget. `on_episode` sees each finished
/// episode, with `sweep_value` set to the disturbance used.
pub fn train(
    agent: &mut SacAgent,
    frontend: &mut Frontend,
    env_cfg: &EnvConfig,
    opts: TrainOptions,
    env_rng: &mut Rng,
    agent_rng: &mut Rng,
    mut on_episode: impl FnMut(&EpisodeLog),
) -> Result<()> {
    env_cfg.validate()?;
    if let Some((lo, hi)) = opts.randomize {
        if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "invalid randomization range [{lo}, {hi}]"
            )));
        }
    }
    let mut env_steps = 0usize;
    let mut env = env_cfg.build()?;
    while env_steps < opts.total_steps {
        let value = match opts.randomize {
            Some((lo, hi)) => {
                let v = if lo == hi {
                    lo
                } else {
                    env_rng.uniform(lo, hi)
                };
                env = env_cfg.with_disturbance(v).build()?;
                v
            }
            None => env_cfg.disturbance(),
        };
        let ep_opts = EpisodeOptions {
            learn: true,
            deterministic: false,
            max_steps: Some(opts.total_steps - env_steps),
        };
        let mut log = run_episode(
            agent,
            frontend,
            &mut env,
            ep_opts,
            &mut env_steps,
            env_rng,
            agent_rng,
        )?;
        log.sweep_value = value;
        on_episode(&log);
    }
    Ok(())
}

/// Domain-randomized training on raw observations.
pub fn train_dr(
    agent: &mut SacAgent,
    env_cfg: &EnvConfig,
    range: (f64, f64),
    total_steps: usize,
    env_rng: &mut Rng,
    agent_rng: &mut Rng,
    on_episode: impl FnMut(&EpisodeLog),
) -> Result<()> {
    let opts = TrainOptions {
        total_steps,
        randomize: Some(range),
    };
    train(
        agent,
        &mut Frontend::Raw,
        env_cfg,
        opts,
        env_rng,
        agent_rng,
        on_episode,
    )
}
