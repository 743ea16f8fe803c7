//! Soft Actor-Critic: tanh-squashed Gaussian actor, twin critics with
//! Polyak-averaged targets, and an automatically tuned entropy temperature.
//!
//! Actions are handled in the squashed space `(-1, 1)` throughout; they are
//! mapped affinely onto the environment bounds only when emitted.

use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::mlp::{Activation, Mlp, Tape};
use super::replay::{Batch, ReplayBuffer};
use crate::error::{check_len, Error, Result};
use crate::numerics::Rng;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Emitted squashed actions are kept strictly inside `(-1, 1)`.
const ACTION_EDGE: f64 = 1.0 - 1e-9;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub lr: f64,
    pub gamma: f64,
    pub tau_polyak: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub init_temperature: f64,
    /// Defaults to `−act_dim` when absent.
    pub target_entropy: Option<f64>,
    pub warmup_steps: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            hidden: vec![64, 64],
            activation: Activation::Relu,
            lr: 3e-4,
            gamma: 0.99,
            tau_polyak: 0.005,
            batch_size: 256,
            replay_capacity: 1_000_000,
            init_temperature: 1.0,
            target_entropy: None,
            warmup_steps: 1000,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.tau_polyak > 0.0 && self.tau_polyak <= 1.0) {
            return bad(format!(
                "tau_polyak must lie in (0, 1], got {}",
                self.tau_polyak
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad(format!(
                "hidden sizes must be non-empty and positive, got {:?}",
                self.hidden
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.init_temperature > 0.0 && self.init_temperature.is_finite()) {
            return bad(format!(
                "init_temperature must be > 0, got {}",
                self.init_temperature
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossReport {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub temperature_loss: f64,
    pub temperature: f64,
}

#[derive(Clone, Debug)]
pub struct CriticLoss {
    pub loss: f64,
    pub grad1: Vec<f64>,
    pub grad2: Vec<f64>,
    /// Bootstrapped regression target per sample.
    pub target: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ActorLoss {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Log-density of each reparameterized sample.
    pub logp: Vec<f64>,
}

/// Reparameterized draw from the squashed Gaussian for a batch.
#[derive(Clone, Debug)]
struct PolicySample {
    /// Whether each raw log-std lay inside the clamp range.
    log_std_free: Vec<bool>,
    std: Vec<f64>,
    eps: Vec<f64>,
    /// tanh(z), unclipped.
    squashed: Vec<f64>,
    logp: Vec<f64>,
}

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(1 − tanh²(z))`, stable for large |z|.
#[inline]
fn log_one_minus_tanh_sq(z: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - z - softplus(-2.0 * z))
}

fn sample_policy(actor_out: &[f64], batch: usize, act_dim: usize, eps: &[f64]) -> PolicySample {
    let mut s = PolicySample {
        log_std_free: Vec::with_capacity(batch * act_dim),
        std: Vec::with_capacity(batch * act_dim),
        eps: eps.to_vec(),
        squashed: Vec::with_capacity(batch * act_dim),
        logp: Vec::with_capacity(batch),
    };
    for b in 0..batch {
        let row = &actor_out[b * 2 * act_dim..(b + 1) * 2 * act_dim];
        let mut logp = 0.0;
        for j in 0..act_dim {
            let mean = row[j];
            let raw = row[act_dim + j];
            let log_std = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
            let std = log_std.exp();
            let e = eps[b * act_dim + j];
            let z = mean + std * e;
            logp += -0.5 * e * e - log_std - HALF_LN_2PI - log_one_minus_tanh_sq(z);
            s.log_std_free
                .push((LOG_STD_MIN..=LOG_STD_MAX).contains(&raw));
            s.std.push(std);
            s.squashed.push(z.tanh());
        }
        s.logp.push(logp);
    }
    s
}

fn concat_rows(a: &[f64], da: usize, b: &[f64], db: usize, batch: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch * (da + db));
    for i in 0..batch {
        out.extend_from_slice(&a[i * da..(i + 1) * da]);
        out.extend_from_slice(&b[i * db..(i + 1) * db]);
    }
    out
}

/// `(loss, d loss / d log_alpha)` for `L = −log_α · mean(logπ + H̄)`, logπ held constant.
pub fn temperature_loss(log_alpha: f64, logp: &[f64], target_entropy: f64) -> (f64, f64) {
    let mean = logp.iter().map(|l| l + target_entropy).sum::<f64>() / logp.len() as f64;
    (-log_alpha * mean, -mean)
}

#[derive(Clone, Debug)]
pub struct SacAgent {
    pub(crate) cfg: SacConfig,
    pub(crate) input_dim: usize,
    pub(crate) act_low: Vec<f64>,
    pub(crate) act_high: Vec<f64>,
    pub(crate) actor: Mlp,
    pub(crate) critic1: Mlp,
    pub(crate) critic2: Mlp,
    pub(crate) target1: Mlp,
    pub(crate) target2: Mlp,
    pub(crate) log_temperature: f64,
    pub(crate) actor_opt: Adam,
    pub(crate) critic1_opt: Adam,
    pub(crate) critic2_opt: Adam,
    pub(crate) temperature_opt: Adam,
    pub(crate) updates: u64,
    pub replay: ReplayBuffer,
}

impl SacAgent {
    pub fn new(
        cfg: SacConfig,
        input_dim: usize,
        act_low: Vec<f64>,
        act_high: Vec<f64>,
        rng: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        check_len("action bounds", act_low.len(), act_high.len())?;
        let act_dim = act_low.len();
        if input_dim == 0 || act_dim == 0 {
            return Err(Error::InvalidConfig("agent dims must be >= 1".into()));
        }
        if act_low.iter().zip(&act_high).any(|(l, h)| !(l < h)) {
            return Err(Error::InvalidConfig("act_low must be < act_high".into()));
        }
        let mut actor_sizes = vec![input_dim];
        actor_sizes.extend(&cfg.hidden);
        actor_sizes.push(2 * act_dim);
        let mut critic_sizes = vec![input_dim + act_dim];
        critic_sizes.extend(&cfg.hidden);
        critic_sizes.push(1);

        let actor = Mlp::new(&actor_sizes, cfg.activation, rng)?;
        let critic1 = Mlp::new(&critic_sizes, cfg.activation, rng)?;
        let critic2 = Mlp::new(&critic_sizes, cfg.activation, rng)?;
        let lr = cfg.lr;
        Ok(SacAgent {
            input_dim,
            target1: critic1.clone(),
            target2: critic2.clone(),
            actor_opt: Adam::new(actor.num_params(), lr),
            critic1_opt: Adam::new(critic1.num_params(), lr),
            critic2_opt: Adam::new(critic2.num_params(), lr),
            temperature_opt: Adam::new(1, lr),
            log_temperature: cfg.init_temperature.ln(),
            replay: ReplayBuffer::new(cfg.replay_capacity, input_dim, act_dim),
            updates: 0,
            actor,
            critic1,
            critic2,
            act_low,
            act_high,
            cfg,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_low.len()
    }

    pub fn temperature(&self) -> f64 {
        self.log_temperature.exp()
    }

    pub fn log_temperature(&self) -> f64 {
        self.log_temperature
    }

    pub fn set_log_temperature(&mut self, v: f64) {
        self.log_temperature = v;
    }

    pub fn target_entropy(&self) -> f64 {
        self.cfg.target_entropy.unwrap_or(-(self.act_dim() as f64))
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    pub fn critics(&self) -> (&Mlp, &Mlp) {
        (&self.critic1, &self.critic2)
    }

    pub fn critics_mut(&mut self) -> (&mut Mlp, &mut Mlp) {
        (&mut self.critic1, &mut self.critic2)
    }

    pub fn targets(&self) -> (&Mlp, &Mlp) {
        (&self.target1, &self.target2)
    }

    /// Maps a squashed action in `(-1, 1)` onto the environment bounds.
    pub fn to_env_action(&self, squashed: &[f64]) -> Vec<f64> {
        squashed
            .iter()
            .zip(self.act_low.iter().zip(&self.act_high))
            .map(|(a, (l, h))| l + 0.5 * (a + 1.0) * (h - l))
            .collect()
    }

    pub fn to_squashed_action(&self, env_action: &[f64]) -> Vec<f64> {
        env_action
            .iter()
            .zip(self.act_low.iter().zip(&self.act_high))
            .map(|(a, (l, h))| 2.0 * (a - l) / (h - l) - 1.0)
            .collect()
    }

    /// Squashed action for one policy input. Stochastic mode samples
    /// `tanh(mean + std·ε)`; deterministic mode returns `tanh(mean)`.
    pub fn act_squashed(
        &self,
        input: &[f64],
        deterministic: bool,
        rng: &mut Rng,
    ) -> Result<Vec<f64>> {
        check_len("policy input", self.input_dim, input.len())?;
        let out = self.actor.predict(input, 1)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("actor output"));
        }
        let k = self.act_dim();
        let mut a = Vec::with_capacity(k);
        for j in 0..k {
            let mean = out[j];
            let z = if deterministic {
                mean
            } else {
                let std = out[k + j].clamp(LOG_STD_MIN, LOG_STD_MAX).exp();
                mean + std * rng.normal()
            };
            a.push(z.tanh().clamp(-ACTION_EDGE, ACTION_EDGE));
        }
        Ok(a)
    }

    /// Action in environment units.
    pub fn act(&self, input: &[f64], deterministic: bool, rng: &mut Rng) -> Result<Vec<f64>> {
        let a = self.act_squashed(input, deterministic, rng)?;
        Ok(self.to_env_action(&a))
    }

    fn critic_input(&self, s: &[f64], a: &[f64], batch: usize) -> Vec<f64> {
        concat_rows(s, self.input_dim, a, self.act_dim(), batch)
    }

    /// Clipped double-Q regression loss `½·mean((Q₁−y)²) + ½·mean((Q₂−y)²)` with
    /// `y = r + γ(1−d)(min(Q₁', Q₂')(s', a') − α·logπ(a'|s'))` and `a'` drawn
    /// with the given noise.
    pub fn critic_loss(
        &self,
        batch: &Batch,
        next_noise: &[f64],
        alpha: f64,
        with_grads: bool,
    ) -> Result<CriticLoss> {
        let b = batch.size;
        let k = self.act_dim();
        check_len("next-action noise", b * k, next_noise.len())?;

        let next_out = self.actor.predict(&batch.s_next, b)?;
        let next = sample_policy(&next_out, b, k, next_noise);
        let q_in_next = self.critic_input(&batch.s_next, &next.squashed, b);
        let tq1 = self.target1.predict(&q_in_next, b)?;
        let tq2 = self.target2.predict(&q_in_next, b)?;
        let target: Vec<f64> = (0..b)
            .map(|i| {
                let soft = tq1[i].min(tq2[i]) - alpha * next.logp[i];
                batch.r[i] + self.cfg.gamma * (1.0 - batch.done[i]) * soft
            })
            .collect();

        let q_in = self.critic_input(&batch.s, &batch.a, b);
        let tape1 = self.critic1.forward(&q_in, b)?;
        let tape2 = self.critic2.forward(&q_in, b)?;
        let (q1, q2) = (tape1.output(), tape2.output());
        let mut loss = 0.0;
        let mut d1 = Vec::with_capacity(b);
        let mut d2 = Vec::with_capacity(b);
        for i in 0..b {
            let (e1, e2) = (q1[i] - target[i], q2[i] - target[i]);
            loss += 0.5 * (e1 * e1 + e2 * e2);
            d1.push(e1 / b as f64);
            d2.push(e2 / b as f64);
        }
        loss /= b as f64;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                which: "critic",
                value: loss,
            });
        }
        let mut grad1 = Vec::new();
        let mut grad2 = Vec::new();
        if with_grads {
            grad1 = vec![0.0; self.critic1.num_params()];
            grad2 = vec![0.0; self.critic2.num_params()];
            self.critic1
                .backward(&tape1, &d1, Some(&mut grad1), false)?;
            self.critic2
                .backward(&tape2, &d2, Some(&mut grad2), false)?;
        }
        Ok(CriticLoss {
            loss,
            grad1,
            grad2,
            target,
        })
    }

    /// Reparameterized policy loss `mean(α·logπ(a|s) − min(Q₁, Q₂)(s, a))`,
    /// `a = tanh(mean + std·ε)`, differentiated w.r.t. the actor only.
    pub fn actor_loss(
        &self,
        states: &[f64],
        batch: usize,
        noise: &[f64],
        alpha: f64,
        with_grads: bool,
    ) -> Result<ActorLoss> {
        let tape = self.actor.forward(states, batch)?;
        self.actor_loss_from_tape(&tape, states, batch, noise, alpha, with_grads)
    }

    fn actor_loss_from_tape(
        &self,
        tape: &Tape,
        states: &[f64],
        batch: usize,
        noise: &[f64],
        alpha: f64,
        with_grads: bool,
    ) -> Result<ActorLoss> {
        let k = self.act_dim();
        check_len("policy noise", batch * k, noise.len())?;
        let sample = sample_policy(tape.output(), batch, k, noise);
        let q_in = self.critic_input(states, &sample.squashed, batch);
        let tape1 = self.critic1.forward(&q_in, batch)?;
        let tape2 = self.critic2.forward(&q_in, batch)?;
        let (q1, q2) = (tape1.output(), tape2.output());

        let mut loss = 0.0;
        for i in 0..batch {
            loss += alpha * sample.logp[i] - q1[i].min(q2[i]);
        }
        loss /= batch as f64;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                which: "actor",
                value: loss,
            });
        }
        if !with_grads {
            return Ok(ActorLoss {
                loss,
                grad: Vec::new(),
                logp: sample.logp,
            });
        }

        // dL/dQ = −1/B routed to whichever critic attains the minimum.
        let inv_b = 1.0 / batch as f64;
        let mut dq1 = vec![0.0; batch];
        let mut dq2 = vec![0.0; batch];
        for i in 0..batch {
            if q1[i] <= q2[i] {
                dq1[i] = -inv_b;
            } else {
                dq2[i] = -inv_b;
            }
        }
        let g1 = self
            .critic1
            .backward(&tape1, &dq1, None, true)?
            .unwrap_or_default();
        let g2 = self
            .critic2
            .backward(&tape2, &dq2, None, true)?
            .unwrap_or_default();
        let width = self.input_dim + k;

        let mut d_out = vec![0.0; batch * 2 * k];
        for i in 0..batch {
            for j in 0..k {
                let idx = i * k + j;
                let col = i * width + self.input_dim + j;
                let dq_da = g1[col] + g2[col];
                let a = sample.squashed[idx];
                let da_dz = 1.0 - a * a;
                let std = sample.std[idx];
                let e = sample.eps[idx];
                // logπ depends on z through −ln(1 − tanh²z), whose z-derivative is 2·tanh z.
                let dlogp_dz = 2.0 * a;
                let d_mean = inv_b * alpha * dlogp_dz + dq_da * da_dz;
                let d_log_std =
                    inv_b * alpha * (-1.0 + dlogp_dz * std * e) + dq_da * da_dz * std * e;
                d_out[i * 2 * k + j] = d_mean;
                d_out[i * 2 * k + k + j] = if sample.log_std_free[idx] {
                    d_log_std
                } else {
                    0.0
                };
            }
        }
        let mut grad = vec![0.0; self.actor.num_params()];
        self.actor.backward(tape, &d_out, Some(&mut grad), false)?;
        Ok(ActorLoss {
            loss,
            grad,
            logp: sample.logp,
        })
    }

    /// One SAC iteration: temperature, critics, actor (each one Adam step),
    /// then Polyak averaging of the target critics.
    pub fn update(&mut self, batch: &Batch, rng: &mut Rng) -> Result<LossReport> {
        let b = batch.size;
        let k = self.act_dim();
        let alpha = self.temperature();
        let mut noise = vec![0.0; b * k];
        rng.fill_normal(&mut noise);
        let mut next_noise = vec![0.0; b * k];
        rng.fill_normal(&mut next_noise);

        let actor_tape = self.actor.forward(&batch.s, b)?;
        let logp = sample_policy(actor_tape.output(), b, k, &noise).logp;
        let (temperature_loss, g_temp) =
            temperature_loss(self.log_temperature, &logp, self.target_entropy());
        if !temperature_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                which: "temperature",
                value: temperature_loss,
            });
        }
        let mut lt = [self.log_temperature];
        self.temperature_opt.step(&mut lt, &[g_temp]);
        self.log_temperature = lt[0];

        let critic = self.critic_loss(batch, &next_noise, alpha, true)?;
        self.critic1_opt
            .step(self.critic1.params_mut(), &critic.grad1);
        self.critic2_opt
            .step(self.critic2.params_mut(), &critic.grad2);

        let actor = self.actor_loss_from_tape(&actor_tape, &batch.s, b, &noise, alpha, true)?;
        self.actor_opt.step(self.actor.params_mut(), &actor.grad);

        self.polyak_update();
        self.updates += 1;
        Ok(LossReport {
            critic_loss: critic.loss,
            actor_loss: actor.loss,
            temperature_loss,
            temperature: alpha,
        })
    }

    pub fn polyak_update(&mut self) {
        let tau = self.cfg.tau_polyak;
        self.target1.polyak_from(&self.critic1, tau);
        self.target2.polyak_from(&self.critic2, tau);
    }

    /// Serializable state (the replay buffer is not included).
    pub fn to_state(&self) -> SacState {
        SacState {
            config: self.cfg.clone(),
            input_dim: self.input_dim,
            act_low: self.act_low.clone(),
            act_high: self.act_high.clone(),
            actor: self.actor.clone(),
            critic1: self.critic1.clone(),
            critic2: self.critic2.clone(),
            target1: self.target1.clone(),
            target2: self.target2.clone(),
            log_temperature: self.log_temperature,
            actor_opt: self.actor_opt.clone(),
            critic1_opt: self.critic1_opt.clone(),
            critic2_opt: self.critic2_opt.clone(),
            temperature_opt: self.temperature_opt.clone(),
            updates: self.updates,
        }
    }

    pub fn from_state(s: SacState) -> Result<Self> {
        s.config.validate()?;
        let act_dim = s.act_low.len();
        check_len("action bounds", act_dim, s.act_high.len())?;
        if act_dim == 0 || s.input_dim == 0 {
            return Err(Error::CheckpointMismatch("agent dims must be >= 1".into()));
        }
        let expect_actor = (s.input_dim, 2 * act_dim);
        let expect_critic = (s.input_dim + act_dim, 1);
        let io = |m: &Mlp| (m.input_dim(), m.output_dim());
        if io(&s.actor) != expect_actor {
            return Err(Error::CheckpointMismatch(format!(
                "actor io {:?}, expected {:?}",
                io(&s.actor),
                expect_actor
            )));
        }
        for m in [&s.critic1, &s.critic2, &s.target1, &s.target2] {
            if io(m) != expect_critic {
                return Err(Error::CheckpointMismatch(format!(
                    "critic io {:?}, expected {:?}",
                    io(m),
                    expect_critic
                )));
            }
        }
        if s.target1.num_params() != s.critic1.num_params()
            || s.target2.num_params() != s.critic2.num_params()
        {
            return Err(Error::CheckpointMismatch(
                "target/critic shapes differ".into(),
            ));
        }
        let opt_ok = |o: &Adam, n: usize| o.m.len() == n && o.v.len() == n;
        if !opt_ok(&s.actor_opt, s.actor.num_params())
            || !opt_ok(&s.critic1_opt, s.critic1.num_params())
            || !opt_ok(&s.critic2_opt, s.critic2.num_params())
            || !opt_ok(&s.temperature_opt, 1)
        {
            return Err(Error::CheckpointMismatch("optimizer state size".into()));
        }
        if !s.log_temperature.is_finite() {
            return Err(Error::NonFinite("log temperature"));
        }
        Ok(SacAgent {
            replay: ReplayBuffer::new(s.config.replay_capacity, s.input_dim, act_dim),
            cfg: s.config,
            input_dim: s.input_dim,
            act_low: s.act_low,
            act_high: s.act_high,
            actor: s.actor,
            critic1: s.critic1,
            critic2: s.critic2,
            target1: s.target1,
            target2: s.target2,
            log_temperature: s.log_temperature,
            actor_opt: s.actor_opt,
            critic1_opt: s.critic1_opt,
            critic2_opt: s.critic2_opt,
            temperature_opt: s.temperature_opt,
            updates: s.updates,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SacState {
    pub config: SacConfig,
    pub input_dim: usize,
    pub act_low: Vec<f64>,
    pub act_high: Vec<f64>,
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target1: Mlp,
    pub target2: Mlp,
    pub log_temperature: f64,
    pub actor_opt: Adam,
    pub critic1_opt: Adam,
    pub critic2_opt: Adam,
    pub temperature_opt: Adam,
    pub updates: u64,
}
