use super::{ridge_fit, RlsConfig, RlsReadout};
use crate::envs::{EnvConfig, Transition};
use crate::error::{Error, Result};
use crate::numerics::{Mat, Rng};
use crate::reservoir::Reservoir;

/// Fraction of steps where the rule-based data policy is replaced by a uniform random action.
pub const RANDOM_ACTION_FRACTION: f64 = 0.3;

/// How raw observations (and optionally the previous action) become reservoir input.
#[derive(Clone, Debug, PartialEq)]
pub struct InputEncoding {
    pub scale: Vec<f64>,
    pub include_action: bool,
    pub act_dim: usize,
}

impl InputEncoding {
    pub fn new(scale: Vec<f64>, include_action: bool, act_dim: usize) -> Result<Self> {
        if scale.is_empty() || scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig(
                "observation scales must be finite and > 0".into(),
            ));
        }
        Ok(InputEncoding {
            scale,
            include_action,
            act_dim,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.scale.len()
    }

    pub fn n_u(&self) -> usize {
        self.obs_dim() + if self.include_action { self.act_dim } else { 0 }
    }

    pub fn normalize_into(&self, s: &[f64], out: &mut [f64]) {
        for ((o, v), k) in out.iter_mut().zip(s).zip(&self.scale) {
            *o = v / k;
        }
    }

    pub fn normalize(&self, s: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; s.len()];
        self.normalize_into(s, &mut out);
        out
    }

    pub fn denormalize_into(&self, s: &[f64], out: &mut [f64]) {
        for ((o, v), k) in out.iter_mut().zip(s).zip(&self.scale) {
            *o = v * k;
        }
    }

    /// Reservoir input for observation `s`; `prev_action` is appended when enabled.
    pub fn encode_into(&self, s: &[f64], prev_action: &[f64], out: &mut [f64]) {
        let d = self.obs_dim();
        self.normalize_into(s, &mut out[..d]);
        if self.include_action {
            out[d..d + self.act_dim].copy_from_slice(prev_action);
        }
    }
}

/// Drives the reservoir through each episode (state reset at every
/// boundary), fits the readout by ridge regression on `(x_t, s_{t+1})` pairs
/// in normalized units, and returns a readout that keeps adapting online
/// from `P = δI`.
pub fn pretrain_readout(
    episodes: &[Vec<Transition>],
    reservoir: &mut Reservoir,
    encoding: &InputEncoding,
    reg: f64,
    rls: RlsConfig,
) -> Result<RlsReadout> {
    let total: usize = episodes.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::Empty("pretraining rollouts"));
    }
    let n_x = reservoir.config().n_x;
    let n_y = encoding.obs_dim();
    // Column-major accumulation, transposed at the end into n_x × T / n_y × T.
    let mut xs = Vec::with_capacity(total * n_x);
    let mut ys = Vec::with_capacity(total * n_y);
    let mut input = vec![0.0; encoding.n_u()];
    let mut target = vec![0.0; n_y];
    for episode in episodes {
        reservoir.reset_state();
        let mut prev_action = vec![0.0; encoding.act_dim];
        for tr in episode {
            encoding.encode_into(&tr.s, &prev_action, &mut input);
            xs.extend_from_slice(reservoir.update(&input)?);
            encoding.normalize_into(&tr.s_next, &mut target);
            ys.extend_from_slice(&target);
            prev_action.copy_from_slice(&tr.a);
        }
    }
    reservoir.reset_state();
    let states = Mat::from_vec(total, n_x, xs)?.transpose();
    let targets = Mat::from_vec(total, n_y, ys)?.transpose();
    let w = ridge_fit(&states, &targets, reg)?;
    RlsReadout::with_weights(rls, w)
}

/// Rule-based data policy with 30 % uniform random actions. Cart-pole:
/// push toward the side the pole leans, `sign(θ + 0.5·θ̇)`. Sled: full drive.
pub fn noisy_rule_action(env: &EnvConfig, s: &[f64], rng: &mut Rng) -> f64 {
    if rng.unit() < RANDOM_ACTION_FRACTION {
        return rng.uniform(-1.0, 1.0);
    }
    match env {
        EnvConfig::Cartpole(_) => {
            if s[2] + 0.5 * s[3] >= 0.0 {
                1.0
            } else {
                -1.0
            }
        }
        EnvConfig::Sled(_) => 1.0,
    }
}

/// Collects `episodes` rollouts on the (nominal) environment with the noisy rule policy.
pub fn collect_rule_rollouts(
    env_cfg: &EnvConfig,
    episodes: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<Transition>>> {
    let mut env = env_cfg.build()?;
    let mut out = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut s = env.reset(rng);
        let mut ep = Vec::new();
        loop {
            let a = noisy_rule_action(env_cfg, &s, rng);
            let tr = env.step(&[a])?;
            s = tr.s_next.clone();
            let end = tr.done || tr.truncated;
            ep.push(tr);
            if end {
                break;
            }
        }
        out.push(ep);
    }
    Ok(out)
}
