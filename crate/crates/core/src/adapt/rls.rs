use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};
use crate::numerics::{dot, norm2, Mat};

/// Guard on the gain denominator `λ + xᵀPx`.
pub const DENOMINATOR_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlsConfig {
    /// Forgetting factor in `(0, 1]`.
    pub lambda: f64,
    /// Initial inverse-covariance scale, `P₀ = δI`.
    pub delta: f64,
}

impl Default for RlsConfig {
    fn default() -> Self {
        RlsConfig {
            lambda: 0.99,
            delta: 100.0,
        }
    }
}

impl RlsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "RLS forgetting factor must lie in (0, 1], got {}",
                self.lambda
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "RLS delta must be > 0, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Outcome of one online update.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRecord {
    /// A-priori error `target − W_out·x`.
    pub error: Vec<f64>,
    pub error_norm: f64,
    /// Frobenius norm of the weight change made by this step.
    pub dw_norm: f64,
}

/// Linear readout adapted online by exponentially weighted recursive least squares.
#[derive(Clone, Debug)]
pub struct RlsReadout {
    cfg: RlsConfig,
    w_out: Mat,
    p: Mat,
    step_count: u64,
    px: Vec<f64>,
    gain: Vec<f64>,
}

impl RlsReadout {
    /// Zero weights and `P = δI`.
    pub fn new(cfg: RlsConfig, n_y: usize, n_x: usize) -> Result<Self> {
        if n_y == 0 || n_x == 0 {
            return Err(Error::InvalidConfig(format!(
                "readout dims must be >= 1 (n_y={n_y}, n_x={n_x})"
            )));
        }
        Self::with_weights(cfg, Mat::zeros(n_y, n_x))
    }

    /// Starts from given weights with a fresh `P = δI`.
    pub fn with_weights(cfg: RlsConfig, w_out: Mat) -> Result<Self> {
        cfg.validate()?;
        if !w_out.is_finite() {
            return Err(Error::NonFinite("initial W_out"));
        }
        let n_x = w_out.cols();
        let p = Mat::from_diag(&vec![cfg.delta; n_x]);
        Ok(RlsReadout {
            cfg,
            w_out,
            p,
            step_count: 0,
            px: vec![0.0; n_x],
            gain: vec![0.0; n_x],
        })
    }

    pub fn config(&self) -> &RlsConfig {
        &self.cfg
    }

    pub fn w_out(&self) -> &Mat {
        &self.w_out
    }

    pub fn p(&self) -> &Mat {
        &self.p
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn n_x(&self) -> usize {
        self.w_out.cols()
    }

    pub fn n_y(&self) -> usize {
        self.w_out.rows()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.w_out.matvec(x)
    }

    pub fn predict_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.w_out.matvec_into(x, out)
    }

    /// One RLS update on the pair `(x, target)`:
    ///
    /// ```text
    /// e = target − W·x
    /// k = P·x / (λ + xᵀ·P·x)
    /// W ← W + e·kᵀ
    /// P ← (P − k·xᵀ·P) / λ
    /// ```
    ///
    /// `P` is re-symmetrized afterwards.
    pub fn step(&mut self, x: &[f64], target: &[f64]) -> Result<PredictionRecord> {
        let n_x = self.n_x();
        let n_y = self.n_y();
        check_len("RLS regressor", n_x, x.len())?;
        check_len("RLS target", n_y, target.len())?;
        check_finite("RLS regressor", x)?;
        check_finite("RLS target", target)?;

        let mut error = self.w_out.matvec(x)?;
        for (e, t) in error.iter_mut().zip(target) {
            *e = t - *e;
        }

        self.p.matvec_into(x, &mut self.px)?;
        let denominator = self.cfg.lambda + dot(x, &self.px);
        if !denominator.is_finite() {
            return Err(Error::NonFinite("RLS gain denominator"));
        }
        if denominator <= DENOMINATOR_EPS {
            return Err(Error::CovarianceCollapse {
                denominator,
                step: self.step_count,
            });
        }
        for (g, px) in self.gain.iter_mut().zip(&self.px) {
            *g = px / denominator;
        }

        for (i, &e) in error.iter().enumerate() {
            if e != 0.0 {
                for (w, g) in self.w_out.row_mut(i).iter_mut().zip(&self.gain) {
                    *w += e * g;
                }
            }
        }

        // P is symmetric, so xᵀP = (Px)ᵀ.
        let inv_lambda = 1.0 / self.cfg.lambda;
        for i in 0..n_x {
            let gi = self.gain[i];
            for (pij, pxj) in self.p.row_mut(i).iter_mut().zip(&self.px) {
                *pij = (*pij - gi * pxj) * inv_lambda;
            }
        }
        self.p.symmetrize();

        let error_norm = norm2(&error);
        let dw_norm = error_norm * norm2(&self.gain);
        if !dw_norm.is_finite() || !self.w_out.is_finite() {
            return Err(Error::NonFinite("RLS weights"));
        }
        self.step_count += 1;
        Ok(PredictionRecord {
            error,
            error_norm,
            dw_norm,
        })
    }

    /// Reinitializes `P = δI`, keeping `W_out` and the step count.
    pub fn reset_covariance(&mut self) {
        self.p = Mat::from_diag(&vec![self.cfg.delta; self.n_x()]);
    }

    /// The gain vector from the most recent step.
    pub fn last_gain(&self) -> &[f64] {
        &self.gain
    }

    pub fn snapshot(&self) -> RlsSnapshot {
        RlsSnapshot {
            config: self.cfg,
            w_out: self.w_out.clone(),
            p: self.p.clone(),
            step_count: self.step_count,
        }
    }

    pub fn from_snapshot(s: RlsSnapshot) -> Result<Self> {
        s.config.validate()?;
        check_len("RLS snapshot P rows", s.w_out.cols(), s.p.rows())?;
        check_len("RLS snapshot P cols", s.w_out.cols(), s.p.cols())?;
        if s.w_out.rows() == 0 || s.w_out.cols() == 0 {
            return Err(Error::InvalidConfig("empty RLS snapshot".into()));
        }
        if !s.w_out.is_finite() || !s.p.is_finite() {
            return Err(Error::NonFinite("RLS snapshot"));
        }
        let n_x = s.w_out.cols();
        Ok(RlsReadout {
            cfg: s.config,
            w_out: s.w_out,
            p: s.p,
            step_count: s.step_count,
            px: vec![0.0; n_x],
            gain: vec![0.0; n_x],
        })
    }
}

/// Serializable state of an [`RlsReadout`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlsSnapshot {
    pub config: RlsConfig,
    pub w_out: Mat,
    pub p: Mat,
    pub step_count: u64,
}
