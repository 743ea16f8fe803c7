//! Continuous-action cart-pole with a periodic horizontal wind on the cart.
//!
//! Equations of motion follow Barto, Sutton & Anderson (1983) as used by the
//! classic-control reference implementation, integrated with semi-implicit
//! Euler. The agent's action in `[-1, 1]` scales `force_mag`; the wind
//! `A·cos(ω·t)` (t = step index) is added to the same horizontal force.

use serde::{Deserialize, Serialize};

use super::{check_action, EnvSpec, Transition};
use crate::error::{check_finite, check_len, Error, Result};
use crate::numerics::Rng;

pub const OBS_DIM: usize = 4;
pub const X_THRESHOLD: f64 = 2.4;
pub const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const RESET_HALF_WIDTH: f64 = 0.05;

/// Fixed per-component scales mapping observations to roughly `[-1, 1]`.
pub const OBS_SCALE: [f64; OBS_DIM] = [2.4, 3.0, 0.21, 3.5];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartPoleWindConfig {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_half_length: f64,
    pub force_mag: f64,
    pub tau: f64,
    pub wind_amplitude: f64,
    /// Radians per step.
    pub wind_omega: f64,
    pub max_steps: usize,
}

impl Default for CartPoleWindConfig {
    fn default() -> Self {
        CartPoleWindConfig {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_half_length: 0.5,
            force_mag: 10.0,
            tau: 0.02,
            wind_amplitude: 0.0,
            wind_omega: 0.05,
            max_steps: 1000,
        }
    }
}

impl CartPoleWindConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gravity", self.gravity),
            ("cart_mass", self.cart_mass),
            ("pole_mass", self.pole_mass),
            ("pole_half_length", self.pole_half_length),
            ("force_mag", self.force_mag),
            ("tau", self.tau),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "cartpole {name} must be > 0, got {v}"
                )));
            }
        }
        if !(self.wind_amplitude >= 0.0 && self.wind_amplitude.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "wind_amplitude must be >= 0, got {}",
                self.wind_amplitude
            )));
        }
        if !self.wind_omega.is_finite() {
            return Err(Error::InvalidConfig("wind_omega must be finite".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be >= 1".into()));
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

    /// Wind force in newtons at step `t`.
    pub fn wind_force(&self, t: usize) -> f64 {
        self.wind_amplitude * (self.wind_omega * t as f64).cos()
    }
}

/// Draws `(x, ẋ, θ, θ̇)` i.i.d. uniform on `[-0.05, 0.05]`.
pub fn cartpole_reset(_cfg: &CartPoleWindConfig, rng: &mut Rng) -> Vec<f64> {
    (0..OBS_DIM)
        .map(|_| rng.uniform(-RESET_HALF_WIDTH, RESET_HALF_WIDTH))
        .collect()
}

/// Integrates one step of length `tau` under `action·force_mag + wind(t)`.
pub fn cartpole_dynamics(cfg: &CartPoleWindConfig, state: &[f64], force: f64) -> [f64; OBS_DIM] {
    let (x, x_dot, theta, theta_dot) = (state[0], state[1], state[2], state[3]);
    let total_mass = cfg.cart_mass + cfg.pole_mass;
    let polemass_length = cfg.pole_mass * cfg.pole_half_length;
    let (sin, cos) = theta.sin_cos();

    let temp = (force + polemass_length * theta_dot * theta_dot * sin) / total_mass;
    let theta_acc = (cfg.gravity * sin - cos * temp)
        / (cfg.pole_half_length * (4.0 / 3.0 - cfg.pole_mass * cos * cos / total_mass));
    let x_acc = temp - polemass_length * theta_acc * cos / total_mass;

    let x_dot = x_dot + cfg.tau * x_acc;
    let x = x + cfg.tau * x_dot;
    let theta_dot = theta_dot + cfg.tau * theta_acc;
    let theta = theta + cfg.tau * theta_dot;
    [x, x_dot, theta, theta_dot]
}

pub fn cartpole_step(
    cfg: &CartPoleWindConfig,
    state: &[f64],
    action: &[f64],
    t: usize,
) -> Result<Transition> {
    check_len("cartpole state", OBS_DIM, state.len())?;
    check_len("cartpole action", 1, action.len())?;
    check_finite("cartpole state", state)?;
    check_action(action)?;

    let force = action[0] * cfg.force_mag + cfg.wind_force(t);
    let next = cartpole_dynamics(cfg, state, force);
    check_finite("cartpole next state", &next)?;
    let done = next[0].abs() > X_THRESHOLD || next[2].abs() > THETA_THRESHOLD;
    Ok(Transition {
        s: state.to_vec(),
        a: action.to_vec(),
        r: 1.0,
        s_next: next.to_vec(),
        done,
        truncated: !done && t + 1 >= cfg.max_steps,
    })
}

/// Mechanical energy of the cart and a uniform pole of half-length `l`.
pub fn mechanical_energy(cfg: &CartPoleWindConfig, state: &[f64]) -> f64 {
    let (x_dot, theta, theta_dot) = (state[1], state[2], state[3]);
    let (m_c, m_p, l) = (cfg.cart_mass, cfg.pole_mass, cfg.pole_half_length);
    let (sin, cos) = theta.sin_cos();
    let vx = x_dot + l * theta_dot * cos;
    let vy = -l * theta_dot * sin;
    let cart = 0.5 * m_c * x_dot * x_dot;
    let pole = 0.5 * m_p * (vx * vx + vy * vy) + 0.5 * (m_p * l * l / 3.0) * theta_dot * theta_dot;
    cart + pole + m_p * cfg.gravity * l * cos
}

#[derive(Clone, Debug)]
pub struct CartPoleWind {
    pub cfg: CartPoleWindConfig,
    state: Vec<f64>,
    t: usize,
}

impl CartPoleWind {
    pub fn new(cfg: CartPoleWindConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(CartPoleWind {
            cfg,
            state: vec![0.0; OBS_DIM],
            t: 0,
        })
    }

    pub fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        self.state = cartpole_reset(&self.cfg, rng);
        self.t = 0;
        self.state.clone()
    }

    pub fn step(&mut self, action: &[f64]) -> Result<Transition> {
        let tr = cartpole_step(&self.cfg, &self.state, action, self.t)?;
        self.state.copy_from_slice(&tr.s_next);
        self.t += 1;
        Ok(tr)
    }

    pub fn t(&self) -> usize {
        self.t
    }
}
