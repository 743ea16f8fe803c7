//! Seedable physics environments with controllable non-stationarity.

pub mod cartpole;
pub mod sled;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Rng;

pub use cartpole::{cartpole_reset, cartpole_step, CartPoleWind, CartPoleWindConfig};
pub use sled::{sled_reset, sled_step, FrictionSled, FrictionSledConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub act_low: Vec<f64>,
    pub act_high: Vec<f64>,
    pub max_steps: usize,
}

/// `(s_t, a_t, r_t, s_{t+1})` plus termination flags.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    /// Terminal state reached (no bootstrapping).
    pub done: bool,
    /// Episode cut off by the step limit.
    pub truncated: bool,
}

pub(crate) fn check_action(action: &[f64]) -> Result<()> {
    for &a in action {
        if !a.is_finite() {
            return Err(Error::NonFinite("action"));
        }
        if a.abs() > 1.0 {
            return Err(Error::ActionOutOfBounds(a));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    Cartpole(CartPoleWindConfig),
    Sled(FrictionSledConfig),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::Cartpole(CartPoleWindConfig::default())
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnvConfig::Cartpole(c) => c.validate(),
            EnvConfig::Sled(c) => c.validate(),
        }
    }

    pub fn spec(&self) -> EnvSpec {
        match self {
            EnvConfig::Cartpole(c) => c.spec(),
            EnvConfig::Sled(c) => c.spec(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Cartpole(_) => "cartpole",
            EnvConfig::Sled(_) => "sled",
        }
    }

    /// Fixed observation scales applied before the reservoir.
    pub fn obs_scale(&self) -> Vec<f64> {
        match self {
            EnvConfig::Cartpole(_) => cartpole::OBS_SCALE.to_vec(),
            EnvConfig::Sled(c) => c.obs_scale(),
        }
    }

    /// The swept non-stationarity parameter: wind amplitude `A` or friction multiplier `F`.
    pub fn disturbance(&self) -> f64 {
        match self {
            EnvConfig::Cartpole(c) => c.wind_amplitude,
            EnvConfig::Sled(c) => c.friction_multiplier,
        }
    }

    pub fn with_disturbance(&self, value: f64) -> EnvConfig {
        let mut out = self.clone();
        match &mut out {
            EnvConfig::Cartpole(c) => c.wind_amplitude = value,
            EnvConfig::Sled(c) => c.friction_multiplier = value,
        }
        out
    }

    /// The parameter value that counts as stationary / nominal.
    pub fn nominal_disturbance(&self) -> f64 {
        match self {
            EnvConfig::Cartpole(_) => 0.0,
            EnvConfig::Sled(_) => 1.0,
        }
    }

    pub fn build(&self) -> Result<Env> {
        Ok(match self {
            EnvConfig::Cartpole(c) => Env::Cartpole(CartPoleWind::new(c.clone())?),
            EnvConfig::Sled(c) => Env::Sled(FrictionSled::new(c.clone())?),
        })
    }
}

#[derive(Clone, Debug)]
pub enum Env {
    Cartpole(CartPoleWind),
    Sled(FrictionSled),
}

impl Env {
    pub fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        match self {
            Env::Cartpole(e) => e.reset(rng),
            Env::Sled(e) => e.reset(rng),
        }
    }

    pub fn step(&mut self, action: &[f64]) -> Result<Transition> {
        match self {
            Env::Cartpole(e) => e.step(action),
            Env::Sled(e) => e.step(action),
        }
    }

    pub fn spec(&self) -> EnvSpec {
        match self {
            Env::Cartpole(e) => e.cfg.spec(),
            Env::Sled(e) => e.cfg.spec(),
        }
    }

    pub fn t(&self) -> usize {
        match self {
            Env::Cartpole(e) => e.t(),
            Env::Sled(e) => e.t(),
        }
    }
}

/// Writes a trajectory as CSV: `t, s0.., a0.., r, done`.
pub fn write_trajectory_csv<W: Write>(out: W, transitions: &[Transition]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = transitions.first() {
        let mut header = vec!["t".to_string()];
        header.extend((0..first.s.len()).map(|i| format!("s{i}")));
        header.extend((0..first.a.len()).map(|i| format!("a{i}")));
        header.push("r".into());
        header.push("done".into());
        w.write_record(&header)?;
    }
    for (t, tr) in transitions.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(tr.s.iter().map(|v| v.to_string()));
        row.extend(tr.a.iter().map(|v| v.to_string()));
        row.push(tr.r.to_string());
        row.push(u8::from(tr.done).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
