//! Echo State Network reservoir: fixed random input and recurrent weights
//! driving a leaky-tanh state,
//!
//! ```text
//! x_t = (1 − α)·x_{t−1} + α·tanh(W_in·u_t + W_res·x_{t−1})
//! ```
//!
//! and the linear readout `ŷ_t = W_out·x_t`.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};
use crate::numerics::{rescale_to_radius, Mat, Rng};

/// Attempts at drawing a usable recurrent matrix before giving up.
const BUILD_ATTEMPTS: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    pub n_x: usize,
    pub n_u: usize,
    pub rho: f64,
    pub alpha: f64,
    pub input_scale: f64,
    pub seed: u64,
}

impl ReservoirConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_x == 0 || self.n_u == 0 {
            return bad(format!(
                "reservoir dims must be >= 1 (n_x={}, n_u={})",
                self.n_x, self.n_u
            ));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {}", self.rho));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.input_scale > 0.0 && self.input_scale.is_finite()) {
            return bad(format!("input_scale must be > 0, got {}", self.input_scale));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Reservoir {
    cfg: ReservoirConfig,
    w_in: Mat,
    w_res: Mat,
    x: Vec<f64>,
    pre: Vec<f64>,
}

impl Reservoir {
    /// Draws `W_in ~ U[−s, s]` and dense Gaussian `W_res`, then rescales `W_res`
    /// to spectral radius `rho`. A draw whose radius cannot be resolved is
    /// retried on the next random stream.
    pub fn build(cfg: ReservoirConfig) -> Result<Self> {
        cfg.validate()?;
        let mut last_err = None;
        for attempt in 0..BUILD_ATTEMPTS {
            let mut rng = Rng::with_stream(cfg.seed, attempt);
            let w_in = Mat::from_fn(cfg.n_x, cfg.n_u, |_, _| {
                rng.uniform(-cfg.input_scale, cfg.input_scale)
            });
            let raw = Mat::from_fn(cfg.n_x, cfg.n_x, |_, _| rng.normal());
            match rescale_to_radius(&raw, cfg.rho) {
                Ok(w_res) => return Self::from_parts(cfg, w_in, w_res),
                Err(e @ (Error::ZeroSpectralRadius | Error::NoConvergence { .. })) => {
                    log::warn!("reservoir draw {attempt} rejected: {e}");
                    last_err = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err.unwrap_or(Error::ZeroSpectralRadius))
    }

    /// Assembles a reservoir from explicit weights (state starts at zero).
    pub fn from_parts(cfg: ReservoirConfig, w_in: Mat, w_res: Mat) -> Result<Self> {
        check_len("W_in rows", cfg.n_x, w_in.rows())?;
        check_len("W_in cols", cfg.n_u, w_in.cols())?;
        check_len("W_res rows", cfg.n_x, w_res.rows())?;
        check_len("W_res cols", cfg.n_x, w_res.cols())?;
        if !w_in.is_finite() || !w_res.is_finite() {
            return Err(Error::NonFinite("reservoir weights"));
        }
        let n_x = cfg.n_x;
        Ok(Reservoir {
            cfg,
            w_in,
            w_res,
            x: vec![0.0; n_x],
            pre: vec![0.0; n_x],
        })
    }

    pub fn config(&self) -> &ReservoirConfig {
        &self.cfg
    }

    pub fn w_in(&self) -> &Mat {
        &self.w_in
    }

    pub fn w_res(&self) -> &Mat {
        &self.w_res
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    /// Overwrites the internal state; used to probe contraction from distinct starts.
    pub fn set_state(&mut self, x: &[f64]) -> Result<()> {
        check_len("reservoir state", self.cfg.n_x, x.len())?;
        check_finite("reservoir state", x)?;
        self.x.copy_from_slice(x);
        Ok(())
    }

    /// Advances the state by one step with input `u` and returns the new state.
    pub fn update(&mut self, u: &[f64]) -> Result<&[f64]> {
        check_len("reservoir input", self.cfg.n_u, u.len())?;
        check_finite("reservoir input", u)?;
        let alpha = self.cfg.alpha;
        let n_u = self.cfg.n_u;
        let n_x = self.cfg.n_x;
        let w_in = self.w_in.as_slice();
        let w_res = self.w_res.as_slice();
        for i in 0..n_x {
            let drive = crate::numerics::dot(&w_in[i * n_u..(i + 1) * n_u], u)
                + crate::numerics::dot(&w_res[i * n_x..(i + 1) * n_x], &self.x);
            self.pre[i] = drive.tanh();
        }
        if alpha == 1.0 {
            self.x.copy_from_slice(&self.pre);
        } else {
            for (x, p) in self.x.iter_mut().zip(&self.pre) {
                *x = (1.0 - alpha) * *x + alpha * p;
            }
        }
        Ok(&self.x)
    }

    pub fn reset_state(&mut self) {
        self.x.fill(0.0);
    }

    pub fn to_artifact(&self) -> ReservoirArtifact {
        ReservoirArtifact {
            format: ARTIFACT_FORMAT.to_string(),
            config: self.cfg.clone(),
            w_in: self.w_in.clone(),
            w_res: self.w_res.clone(),
        }
    }

    pub fn from_artifact(a: ReservoirArtifact) -> Result<Self> {
        if a.format != ARTIFACT_FORMAT {
            return Err(Error::Parse(format!(
                "unsupported reservoir artifact format `{}`",
                a.format
            )));
        }
        a.config.validate()?;
        Self::from_parts(a.config, a.w_in, a.w_res)
    }
}

/// Applies a linear readout: `W_out · x`.
pub fn readout(w_out: &Mat, x: &[f64]) -> Result<Vec<f64>> {
    w_out.matvec(x)
}

pub const ARTIFACT_FORMAT: &str = "esn-oa/reservoir/v1";

/// Persisted reservoir weights. The state `x` is never stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirArtifact {
    pub format: String,
    pub config: ReservoirConfig,
    pub w_in: Mat,
    pub w_res: Mat,
}

impl ReservoirArtifact {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses and validates an artifact; every malformed input yields an error.
    pub fn parse(bytes: &[u8]) -> Result<Reservoir> {
        let a: ReservoirArtifact = serde_json::from_slice(bytes)?;
        Reservoir::from_artifact(a)
    }
}
