//! Versioned JSON checkpoints of a trained agent and its adaptation module.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapt::{InputEncoding, RlsReadout, RlsSnapshot};
use crate::agent::{EsnAdapter, Frontend, Method, SacAgent, SacState};
use crate::envs::EnvConfig;
use crate::error::{check_len, Error, Result};
use crate::reservoir::{Reservoir, ReservoirArtifact};

pub const CHECKPOINT_FORMAT: &str = "esn-oa/checkpoint/v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsnCheckpoint {
    pub reservoir: ReservoirArtifact,
    /// Readout when training began.
    pub initial_readout: RlsSnapshot,
    /// Readout when training ended.
    pub readout: RlsSnapshot,
    pub obs_scale: Vec<f64>,
    pub include_action: bool,
    pub carry_state: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub method: Method,
    pub seed: u64,
    pub env: EnvConfig,
    pub agent: SacState,
    pub esn: Option<EsnCheckpoint>,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses and fully validates a checkpoint.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let c: Checkpoint = serde_json::from_slice(bytes)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Parse(format!(
                "unsupported checkpoint format `{}`",
                self.format
            )));
        }
        self.env.validate()?;
        match (&self.esn, self.method.uses_esn()) {
            (Some(_), false) => {
                return Err(Error::CheckpointMismatch(format!(
                    "method {} carries no reservoir",
                    self.method
                )))
            }
            (None, true) => {
                return Err(Error::CheckpointMismatch(format!(
                    "method {} requires a reservoir",
                    self.method
                )))
            }
            _ => {}
        }
        self.restore(false)?;
        Ok(())
    }

    /// Rebuilds the agent and its frontend. With `initial_readout`, the
    /// readout is the one from the start of training.
    pub fn restore(&self, initial_readout: bool) -> Result<(SacAgent, Frontend)> {
        let agent = SacAgent::from_state(self.agent.clone())?;
        let spec = self.env.spec();
        check_len("checkpoint action dim", spec.act_dim, agent.act_dim())?;
        let frontend = match &self.esn {
            None => Frontend::Raw,
            Some(e) => Frontend::Esn(Box::new(e.restore(initial_readout, spec.act_dim)?)),
        };
        check_len(
            "checkpoint policy input",
            frontend.policy_dim(spec.obs_dim),
            agent.input_dim(),
        )?;
        Ok((agent, frontend))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

impl EsnCheckpoint {
    pub fn from_adapter(
        adapter: &EsnAdapter,
        initial: RlsSnapshot,
        obs_scale: Vec<f64>,
        include_action: bool,
        carry_state: bool,
    ) -> Self {
        EsnCheckpoint {
            reservoir: adapter.reservoir().to_artifact(),
            initial_readout: initial,
            readout: adapter.readout().snapshot(),
            obs_scale,
            include_action,
            carry_state,
        }
    }

    fn restore(&self, initial_readout: bool, act_dim: usize) -> Result<EsnAdapter> {
        let reservoir = Reservoir::from_artifact(self.reservoir.clone())?;
        let snap = if initial_readout {
            &self.initial_readout
        } else {
            &self.readout
        };
        let readout = RlsReadout::from_snapshot(snap.clone())?;
        let encoding = InputEncoding::new(self.obs_scale.clone(), self.include_action, act_dim)?;
        let mut adapter = EsnAdapter::new(reservoir, readout, encoding)?;
        adapter.set_carry_state(self.carry_state);
        Ok(adapter)
    }
}

pub fn checkpoint_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.json"))
}
