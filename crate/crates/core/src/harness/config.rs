use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapt::RlsConfig;
use crate::agent::{Method, SacConfig};
use crate::envs::EnvConfig;
use crate::error::{Error, Result};

/// Seeds used by quick mode.
pub const QUICK_SEEDS: usize = 5;
/// Evaluation episodes per sweep point in quick mode (upper bound).
pub const QUICK_EVAL_EPISODES: usize = 3;
/// Training budget in quick mode (upper bound).
pub const QUICK_TOTAL_STEPS: usize = 20_000;

/// Reservoir hyperparameters. The input width follows from the environment
/// and the per-trial seed from `reservoir.seed` mixed with the run seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReservoirSettings {
    pub n_x: usize,
    pub rho: f64,
    pub alpha: f64,
    pub input_scale: f64,
    pub seed: u64,
}

impl Default for ReservoirSettings {
    fn default() -> Self {
        ReservoirSettings {
            n_x: 300,
            rho: 0.9,
            alpha: 0.3,
            input_scale: 1.0,
            seed: 0,
        }
    }
}

/// RLS hyperparameters; the forgetting factor defaults per environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlsSettings {
    pub lambda: Option<f64>,
    pub delta: f64,
}

impl Default for RlsSettings {
    fn default() -> Self {
        RlsSettings {
            lambda: None,
            delta: RlsConfig::default().delta,
        }
    }
}

/// Which readout an evaluation starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalReadout {
    /// The readout as it stood when training ended.
    Trained,
    /// The readout as it stood when training began (zero for esn-oa, pretrained for esn-oa-pt).
    Initial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    pub method: Method,
    pub env: EnvConfig,
    pub reservoir: ReservoirSettings,
    pub rls: RlsSettings,
    pub sac: SacConfig,
    pub seeds: Vec<u64>,
    /// Training budget in environment steps; defaults per environment.
    pub total_steps: Option<usize>,
    pub eval_episodes: usize,
    pub sweep_grid: Vec<f64>,
    pub output_dir: Option<PathBuf>,
    /// Append the previous action to the reservoir input.
    pub include_action: bool,
    /// Keep the reservoir state across episode boundaries.
    pub carry_reservoir_state: bool,
    /// Rollouts of the noisy rule policy used by esn-oa-pt.
    pub pretrain_episodes: usize,
    pub pretrain_ridge: f64,
    /// Per-episode disturbance range for dr; defaults per environment.
    pub dr_range: Option<[f64; 2]>,
    pub eval_readout: EvalReadout,
    /// Act with `tanh(mean)` during evaluation instead of sampling.
    pub deterministic_eval: bool,
    /// Carry the readout from one sweep value to the next instead of restarting it.
    pub carry_readout_across_values: bool,
    pub bench_steps: usize,
    pub bench_warmup: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: "default".into(),
            method: Method::EsnOa,
            env: EnvConfig::default(),
            reservoir: ReservoirSettings::default(),
            rls: RlsSettings::default(),
            sac: SacConfig::default(),
            seeds: (0..10).collect(),
            total_steps: None,
            eval_episodes: 10,
            sweep_grid: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
            output_dir: None,
            include_action: false,
            carry_reservoir_state: false,
            pretrain_episodes: 50,
            pretrain_ridge: 1e-6,
            dr_range: None,
            eval_readout: EvalReadout::Initial,
            deterministic_eval: true,
            carry_readout_across_values: false,
            bench_steps: 10_000,
            bench_warmup: 1_000,
        }
    }
}

impl RunConfig {
    /// Parses JSON, reporting the offending key path on failure.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        let cfg: RunConfig =
            serde_path_to_error::deserialize(de).map_err(|e| Error::ConfigKey {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.total_steps == Some(0) {
            return bad("total_steps must be >= 1".into());
        }
        if self.sweep_grid.iter().any(|v| !v.is_finite()) {
            return bad("sweep grid values must be finite".into());
        }
        if self.method == Method::EsnOaPt && self.pretrain_episodes == 0 {
            return bad("esn-oa-pt needs pretrain_episodes >= 1".into());
        }
        if !(self.pretrain_ridge >= 0.0 && self.pretrain_ridge.is_finite()) {
            return bad(format!(
                "pretrain_ridge must be >= 0, got {}",
                self.pretrain_ridge
            ));
        }
        if let Some([lo, hi]) = self.dr_range {
            if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
                return bad(format!("dr_range must satisfy lo <= hi, got [{lo}, {hi}]"));
            }
        }
        self.env.validate()?;
        self.rls_config().validate()?;
        self.sac.validate()?;
        let r = &self.reservoir;
        if r.n_x == 0 {
            return bad("reservoir.n_x must be >= 1".into());
        }
        if !(r.rho > 0.0 && r.rho < 1.0) {
            return bad(format!("reservoir.rho must lie in (0, 1), got {}", r.rho));
        }
        if !(r.alpha > 0.0 && r.alpha <= 1.0) {
            return bad(format!(
                "reservoir.alpha must lie in (0, 1], got {}",
                r.alpha
            ));
        }
        if !(r.input_scale > 0.0 && r.input_scale.is_finite()) {
            return bad(format!(
                "reservoir.input_scale must be > 0, got {}",
                r.input_scale
            ));
        }
        Ok(())
    }

    pub fn validate_sweep(&self) -> Result<()> {
        if self.sweep_grid.is_empty() {
            return Err(Error::InvalidConfig("sweep_grid must be non-empty".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::InvalidConfig("eval_episodes must be >= 1".into()));
        }
        Ok(())
    }

    /// Shifts every seed by `offset` (wrapping).
    pub fn with_seed_offset(mut self, offset: u64) -> Self {
        for s in &mut self.seeds {
            *s = s.wrapping_add(offset);
        }
        self
    }

    /// Quick mode: at most five seeds and reduced budgets.
    pub fn quick(mut self) -> Self {
        self.seeds.truncate(QUICK_SEEDS);
        self.eval_episodes = self.eval_episodes.min(QUICK_EVAL_EPISODES);
        self.total_steps = Some(self.total_steps().min(QUICK_TOTAL_STEPS));
        self
    }

    /// Training budget: 100k steps on CartPole and 200k on the sled unless set.
    pub fn total_steps(&self) -> usize {
        self.total_steps.unwrap_or(match self.env {
            EnvConfig::Cartpole(_) => 100_000,
            EnvConfig::Sled(_) => 200_000,
        })
    }

    /// Forgetting factor 0.99 on CartPole and 0.95 on the sled unless set.
    pub fn rls_config(&self) -> RlsConfig {
        let lambda = self.rls.lambda.unwrap_or(match self.env {
            EnvConfig::Cartpole(_) => 0.99,
            EnvConfig::Sled(_) => 0.95,
        });
        RlsConfig {
            lambda,
            delta: self.rls.delta,
        }
    }

    /// Randomization range for dr training.
    pub fn dr_range(&self) -> (f64, f64) {
        match self.dr_range {
            Some([lo, hi]) => (lo, hi),
            None => match self.env {
                EnvConfig::Cartpole(_) => (0.0, 6.0),
                EnvConfig::Sled(_) => (1.0, 4.0),
            },
        }
    }

    /// The environment used for (non-randomized) training.
    pub fn training_env(&self) -> EnvConfig {
        self.env.with_disturbance(self.env.nominal_disturbance())
    }
}
