//! Policy input construction: the raw observation, optionally followed by
//! the reservoir's one-step-ahead prediction of the next observation.

use crate::adapt::{InputEncoding, PredictionRecord, RlsReadout};
use crate::error::{check_len, Error, Result};
use crate::reservoir::Reservoir;

/// `[s, ŝ_next]`: the raw observation followed by the predicted next observation.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedState {
    data: Vec<f64>,
    obs_dim: usize,
}

impl AugmentedState {
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn raw(&self) -> &[f64] {
        &self.data[..self.obs_dim]
    }

    pub fn prediction(&self) -> &[f64] {
        &self.data[self.obs_dim..]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

pub fn augment(s: &[f64], s_hat_next: &[f64]) -> Result<AugmentedState> {
    check_len("augmentation", s.len(), s_hat_next.len())?;
    let mut data = Vec::with_capacity(2 * s.len());
    data.extend_from_slice(s);
    data.extend_from_slice(s_hat_next);
    Ok(AugmentedState {
        data,
        obs_dim: s.len(),
    })
}

/// Reservoir plus online RLS readout, driven one observation at a time.
///
/// Per control step the caller first calls [`EsnAdapter::adapt`] with the
/// newly observed state (the readout learns to map `x_t` to `s_{t+1}`), then
/// [`EsnAdapter::observe`] to advance the reservoir and form the next prediction.
#[derive(Clone, Debug)]
pub struct EsnAdapter {
    reservoir: Reservoir,
    readout: RlsReadout,
    encoding: InputEncoding,
    prev_action: Vec<f64>,
    input: Vec<f64>,
    target: Vec<f64>,
    pred_norm: Vec<f64>,
    prediction: Vec<f64>,
    adapting: bool,
    carry_state: bool,
    covariance_resets: u64,
}

impl EsnAdapter {
    pub fn new(reservoir: Reservoir, readout: RlsReadout, encoding: InputEncoding) -> Result<Self> {
        check_len("reservoir input", encoding.n_u(), reservoir.config().n_u)?;
        check_len("readout state", reservoir.config().n_x, readout.n_x())?;
        check_len("readout output", encoding.obs_dim(), readout.n_y())?;
        let d = encoding.obs_dim();
        Ok(EsnAdapter {
            prev_action: vec![0.0; encoding.act_dim],
            input: vec![0.0; encoding.n_u()],
            target: vec![0.0; d],
            pred_norm: vec![0.0; d],
            prediction: vec![0.0; d],
            reservoir,
            readout,
            encoding,
            adapting: true,
            carry_state: false,
            covariance_resets: 0,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.encoding.obs_dim()
    }

    pub fn reservoir(&self) -> &Reservoir {
        &self.reservoir
    }

    pub fn readout(&self) -> &RlsReadout {
        &self.readout
    }

    pub fn set_readout(&mut self, readout: RlsReadout) -> Result<()> {
        check_len("readout state", self.reservoir.config().n_x, readout.n_x())?;
        check_len("readout output", self.obs_dim(), readout.n_y())?;
        self.readout = readout;
        Ok(())
    }

    /// Disables (or re-enables) readout learning; predictions continue.
    pub fn set_adapting(&mut self, on: bool) {
        self.adapting = on;
    }

    /// Keep the reservoir state across episode boundaries instead of zeroing it.
    pub fn set_carry_state(&mut self, on: bool) {
        self.carry_state = on;
    }

    /// Starts an episode at `s0` and returns the first prediction.
    pub fn begin_episode(&mut self, s0: &[f64]) -> Result<&[f64]> {
        if !self.carry_state {
            self.reservoir.reset_state();
        }
        self.prev_action.fill(0.0);
        self.observe(s0)
    }

    /// Feeds observation `s` into the reservoir and returns `ŝ_next` in raw units.
    pub fn observe(&mut self, s: &[f64]) -> Result<&[f64]> {
        check_len("observation", self.obs_dim(), s.len())?;
        self.encoding
            .encode_into(s, &self.prev_action, &mut self.input);
        let x = self.reservoir.update(&self.input)?;
        self.readout.predict_into(x, &mut self.pred_norm)?;
        self.encoding
            .denormalize_into(&self.pred_norm, &mut self.prediction);
        Ok(&self.prediction)
    }

    /// One RLS step on `(x_t, normalize(s_next))`. Returns `None` when frozen.
    ///
    /// Under weak excitation `P` grows without bound in unexcited directions
    /// and eventually loses positive definiteness to round-off. When the step
    /// reports that collapse, `P` is reinitialized to `δI` (`W_out` is kept)
    /// and the step is retried once.
    pub fn adapt(&mut self, s_next: &[f64]) -> Result<Option<PredictionRecord>> {
        if !self.adapting {
            return Ok(None);
        }
        check_len("observation", self.obs_dim(), s_next.len())?;
        self.encoding.normalize_into(s_next, &mut self.target);
        match self.readout.step(self.reservoir.state(), &self.target) {
            Err(Error::CovarianceCollapse { denominator, step }) => {
                log::warn!("RLS covariance collapse at step {step} (denominator {denominator:e}); resetting P");
                self.readout.reset_covariance();
                self.covariance_resets += 1;
                self.readout
                    .step(self.reservoir.state(), &self.target)
                    .map(Some)
            }
            other => other.map(Some),
        }
    }

    /// Number of covariance reinitializations so far.
    pub fn covariance_resets(&self) -> u64 {
        self.covariance_resets
    }

    /// Action appended to the next reservoir input (when the encoding uses it).
    pub fn record_action(&mut self, a: &[f64]) -> Result<()> {
        check_len("action", self.prev_action.len(), a.len())?;
        self.prev_action.copy_from_slice(a);
        Ok(())
    }

    pub fn prediction(&self) -> &[f64] {
        &self.prediction
    }
}

/// What the policy sees.
#[derive(Clone, Debug)]
pub enum Frontend {
    /// Raw observation only.
    Raw,
    /// Observation augmented with the reservoir prediction.
    Esn(Box<EsnAdapter>),
}

impl Frontend {
    pub fn policy_dim(&self, obs_dim: usize) -> usize {
        match self {
            Frontend::Raw => obs_dim,
            Frontend::Esn(_) => 2 * obs_dim,
        }
    }

    pub fn esn(&self) -> Option<&EsnAdapter> {
        match self {
            Frontend::Raw => None,
            Frontend::Esn(e) => Some(e),
        }
    }

    pub fn esn_mut(&mut self) -> Option<&mut EsnAdapter> {
        match self {
            Frontend::Raw => None,
            Frontend::Esn(e) => Some(e),
        }
    }

    pub fn begin_episode(&mut self, s0: &[f64]) -> Result<Vec<f64>> {
        match self {
            Frontend::Raw => Ok(s0.to_vec()),
            Frontend::Esn(e) => {
                let pred = e.begin_episode(s0)?;
                Ok(augment(s0, pred)?.into_vec())
            }
        }
    }

    /// Consumes `(a_t, s_{t+1})`: adapts the readout, advances the reservoir,
    /// and returns the next policy input with the adaptation record.
    pub fn step(
        &mut self,
        action: &[f64],
        s_next: &[f64],
    ) -> Result<(Vec<f64>, Option<PredictionRecord>)> {
        match self {
            Frontend::Raw => Ok((s_next.to_vec(), None)),
            Frontend::Esn(e) => {
                let record = e.adapt(s_next)?;
                e.record_action(action)?;
                let pred = e.observe(s_next)?;
                let aug = augment(s_next, pred)?.into_vec();
                if aug.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("augmented state"));
                }
                Ok((aug, record))
            }
        }
    }
}
