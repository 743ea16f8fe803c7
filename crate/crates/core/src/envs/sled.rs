//! One-dimensional driven sled with viscous and quadratic drag. The viscous
//! friction coefficient is multiplied by `friction_multiplier` from
//! `switch_step` onward, reproducing an abrupt mid-episode friction change.
//!
//! Observation: `(velocity, applied drive force, resistive deceleration)`.
//! The deceleration is what a finite-difference estimate over one step would
//! report: `(F_drive − m·Δv/τ)/m`.

use serde::{Deserialize, Serialize};

use super::{check_action, EnvSpec, Transition};
use crate::error::{check_finite, check_len, Error, Result};
use crate::numerics::Rng;

pub const OBS_DIM: usize = 3;
pub const RESET_VELOCITY_NOISE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrictionSledConfig {
    pub body_mass: f64,
    pub drive_gain: f64,
    pub base_friction: f64,
    pub friction_multiplier: f64,
    pub switch_step: usize,
    pub quadratic_drag: f64,
    pub tau: f64,
    pub max_steps: usize,
    pub ctrl_cost: f64,
}

impl Default for FrictionSledConfig {
    fn default() -> Self {
        FrictionSledConfig {
            body_mass: 1.0,
            drive_gain: 6.0,
            base_friction: 0.5,
            friction_multiplier: 1.0,
            switch_step: 500,
            quadratic_drag: 0.05,
            tau: 0.02,
            max_steps: 1000,
            ctrl_cost: 0.1,
        }
    }
}

impl FrictionSledConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("body_mass", self.body_mass),
            ("drive_gain", self.drive_gain),
            ("base_friction", self.base_friction),
            ("quadratic_drag", self.quadratic_drag),
            ("tau", self.tau),
            ("ctrl_cost", self.ctrl_cost),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "sled {name} must be > 0, got {v}"
                )));
            }
        }
        if !(self.friction_multiplier >= 1.0 && self.friction_multiplier.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "friction_multiplier must be >= 1, got {}",
                self.friction_multiplier
            )));
        }
        if self.switch_step == 0 || self.switch_step >= self.max_steps {
            return Err(Error::InvalidConfig(format!(
                "switch_step must lie in [1, max_steps), got {} (max_steps {})",
                self.switch_step, self.max_steps
            )));
        }
        Ok(())
    }

    pub fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: OBS_DIM,
            act_dim: 1,
            act_low: vec![-1.0],
            act_high: vec![1.0],
            max_steps: self.max_steps,
        }
    }

    /// Viscous friction coefficient in force at step `t`.
    pub fn effective_friction(&self, t: usize) -> f64 {
        if t < self.switch_step {
            self.base_friction
        } else {
            self.base_friction * self.friction_multiplier
        }
    }

    /// Observation scales used before feeding the reservoir.
    pub fn obs_scale(&self) -> Vec<f64> {
        vec![8.0, self.drive_gain, 8.0]
    }

    /// Positive root of `drive = μ·v + c·v²` for a constant full-throttle drive.
    pub fn terminal_velocity(&self, mu: f64) -> f64 {
        let (a, b, c) = (self.quadratic_drag, mu, -self.drive_gain);
        (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a)
    }
}

pub fn sled_reset(_cfg: &FrictionSledConfig, rng: &mut Rng) -> Vec<f64> {
    let v = rng.uniform(-RESET_VELOCITY_NOISE, RESET_VELOCITY_NOISE);
    vec![v, 0.0, 0.0]
}

pub fn sled_step(
    cfg: &FrictionSledConfig,
    state: &[f64],
    action: &[f64],
    t: usize,
) -> Result<Transition> {
    check_len("sled state", OBS_DIM, state.len())?;
    check_len("sled action", 1, action.len())?;
    check_finite("sled state", state)?;
    check_action(action)?;

    let v = state[0];
    let a = action[0];
    let drive = a * cfg.drive_gain;
    let resist = cfg.effective_friction(t) * v + cfg.quadratic_drag * v * v.abs();
    let acc = (drive - resist) / cfg.body_mass;
    let v_next = v + cfg.tau * acc;
    let decel = (drive - cfg.body_mass * (v_next - v) / cfg.tau) / cfg.body_mass;
    let s_next = vec![v_next, drive, decel];
    check_finite("sled next state", &s_next)?;
    Ok(Transition {
        s: state.to_vec(),
        a: action.to_vec(),
        r: v_next - cfg.ctrl_cost * a * a,
        s_next,
        done: false,
        truncated: t + 1 >= cfg.max_steps,
    })
}

#[derive(Clone, Debug)]
pub struct FrictionSled {
    pub cfg: FrictionSledConfig,
    state: Vec<f64>,
    t: usize,
}

impl FrictionSled {
    pub fn new(cfg: FrictionSledConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(FrictionSled {
            cfg,
            state: vec![0.0; OBS_DIM],
            t: 0,
        })
    }

    pub fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        self.state = sled_reset(&self.cfg, rng);
        self.t = 0;
        self.state.clone()
    }

    pub fn step(&mut self, action: &[f64]) -> Result<Transition> {
        let tr = sled_step(&self.cfg, &self.state, action, self.t)?;
        self.state.copy_from_slice(&tr.s_next);
        self.t += 1;
        Ok(tr)
    }

    pub fn t(&self) -> usize {
        self.t
    }
}
