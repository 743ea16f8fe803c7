//! Construction of per-seed components and the random streams they draw from.

use crate::adapt::{
    collect_rule_rollouts, pretrain_readout, InputEncoding, RlsReadout, RlsSnapshot,
};
use crate::agent::{EsnAdapter, Frontend, Method, SacAgent};
use crate::error::Result;
use crate::numerics::{mix_seed, Rng};
use crate::reservoir::{Reservoir, ReservoirConfig};

use super::config::RunConfig;

/// Independent random streams derived from one run seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    TrainEnv = 2,
    TrainAgent = 3,
    Pretrain = 4,
    EvalEnv = 5,
    EvalAgent = 6,
    Bench = 7,
}

pub fn stream(seed: u64, s: Stream) -> Rng {
    Rng::with_stream(seed, s as u64)
}

/// Stream for one evaluation job, keyed by the sweep value.
pub fn eval_stream(seed: u64, value: f64, s: Stream) -> Rng {
    Rng::with_stream(mix_seed(seed, value.to_bits()), s as u64)
}

pub struct Components {
    pub agent: SacAgent,
    pub frontend: Frontend,
    /// Readout before any online learning; `None` without a reservoir.
    pub initial_readout: Option<RlsSnapshot>,
}

pub fn reservoir_config(cfg: &RunConfig, seed: u64, n_u: usize) -> ReservoirConfig {
    let r = &cfg.reservoir;
    ReservoirConfig {
        n_x: r.n_x,
        n_u,
        rho: r.rho,
        alpha: r.alpha,
        input_scale: r.input_scale,
        seed: mix_seed(r.seed, seed),
    }
}

pub fn input_encoding(cfg: &RunConfig) -> Result<InputEncoding> {
    InputEncoding::new(
        cfg.env.obs_scale(),
        cfg.include_action,
        cfg.env.spec().act_dim,
    )
}

/// Builds the adapter for esn variants; runs readout pretraining for esn-oa-pt.
pub fn build_adapter(cfg: &RunConfig, seed: u64) -> Result<EsnAdapter> {
    let encoding = input_encoding(cfg)?;
    let mut reservoir = Reservoir::build(reservoir_config(cfg, seed, encoding.n_u()))?;
    let readout = if cfg.method == Method::EsnOaPt {
        let mut rng = stream(seed, Stream::Pretrain);
        let episodes = collect_rule_rollouts(&cfg.training_env(), cfg.pretrain_episodes, &mut rng)?;
        pretrain_readout(
            &episodes,
            &mut reservoir,
            &encoding,
            cfg.pretrain_ridge,
            cfg.rls_config(),
        )?
    } else {
        RlsReadout::new(cfg.rls_config(), encoding.obs_dim(), cfg.reservoir.n_x)?
    };
    let mut adapter = EsnAdapter::new(reservoir, readout, encoding)?;
    adapter.set_carry_state(cfg.carry_reservoir_state);
    Ok(adapter)
}

pub fn build_components(cfg: &RunConfig, seed: u64) -> Result<Components> {
    let spec = cfg.env.spec();
    let frontend = if cfg.method.uses_esn() {
        Frontend::Esn(Box::new(build_adapter(cfg, seed)?))
    } else {
        Frontend::Raw
    };
    let initial_readout = frontend.esn().map(|e| e.readout().snapshot());
    let mut rng = stream(seed, Stream::Init);
    let agent = SacAgent::new(
        cfg.sac.clone(),
        frontend.policy_dim(spec.obs_dim),
        spec.act_low.clone(),
        spec.act_high.clone(),
        &mut rng,
    )?;
    Ok(Components {
        agent,
        frontend,
        initial_readout,
    })
}
