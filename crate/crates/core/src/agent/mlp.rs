//! Fully connected network over batches, with reverse-mode gradients.
//!
//! Parameters live in one flat vector so optimizers, Polyak averaging,
//! checkpoints and finite-difference probes can all treat a network as a
//! single `&[f64]`. Layer `l` stores `W_l` (`in × out`, row-major) followed by
//! `b_l` (`out`); a layer computes `act(X·W + b)` for a row-major batch `X`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numerics::{gemm, MatRef, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `a`.
    #[inline]
    fn grad_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRepr")]
pub struct Mlp {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpRepr {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

impl TryFrom<MlpRepr> for Mlp {
    type Error = Error;

    fn try_from(r: MlpRepr) -> Result<Self> {
        Mlp::from_parts(r.sizes, r.activations, r.params)
    }
}

/// Activations recorded during a forward pass, consumed by [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct Tape {
    batch: usize,
    /// `layers[0]` is the input; `layers[l + 1]` the output of layer `l`.
    layers: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.layers.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

impl Mlp {
    /// `sizes = [in, h1, …, out]`; hidden layers use `hidden`, the last layer is linear.
    /// Weights and biases start uniform on `±1/√fan_in`.
    pub fn new(sizes: &[usize], hidden: Activation, rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "invalid MLP layer sizes {sizes:?}"
            )));
        }
        let n_layers = sizes.len() - 1;
        let activations = (0..n_layers)
            .map(|l| {
                if l + 1 == n_layers {
                    Activation::Identity
                } else {
                    hidden
                }
            })
            .collect();
        let n_params = param_count(sizes);
        let mut params = Vec::with_capacity(n_params);
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] * w[1] + w[1]) {
                params.push(rng.uniform(-bound, bound));
            }
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            activations,
            params,
        })
    }

    pub fn from_parts(
        sizes: Vec<usize>,
        activations: Vec<Activation>,
        params: Vec<f64>,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "invalid MLP layer sizes {sizes:?}"
            )));
        }
        check_len("MLP activations", sizes.len() - 1, activations.len())?;
        check_len("MLP parameters", param_count(&sizes), params.len())?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("MLP parameters"));
        }
        Ok(Mlp {
            sizes,
            activations,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Forward pass over `batch` row-major inputs, keeping the tape.
    pub fn forward(&self, input: &[f64], batch: usize) -> Result<Tape> {
        check_len("MLP input", batch * self.input_dim(), input.len())?;
        let mut layers = Vec::with_capacity(self.sizes.len());
        layers.push(input.to_vec());
        let mut offset = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let bias = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;

            let mut out = Vec::with_capacity(batch * fan_out);
            for _ in 0..batch {
                out.extend_from_slice(bias);
            }
            gemm(
                batch,
                fan_in,
                fan_out,
                1.0,
                MatRef::row_major(&layers[l], fan_in),
                MatRef::row_major(weights, fan_out),
                1.0,
                &mut out,
            );
            let act = self.activations[l];
            if act != Activation::Identity {
                out.iter_mut().for_each(|v| *v = act.apply(*v));
            }
            layers.push(out);
        }
        Ok(Tape { batch, layers })
    }

    /// Convenience forward pass returning only the output.
    pub fn predict(&self, input: &[f64], batch: usize) -> Result<Vec<f64>> {
        let mut tape = self.forward(input, batch)?;
        Ok(tape.layers.pop().unwrap_or_default())
    }

    /// Reverse pass for upstream gradient `d_out` (`batch × out`).
    ///
    /// Parameter gradients are *added* into `param_grads` when given; the
    /// gradient with respect to the input is returned when `want_input` is set.
    pub fn backward(
        &self,
        tape: &Tape,
        d_out: &[f64],
        mut param_grads: Option<&mut [f64]>,
        want_input: bool,
    ) -> Result<Option<Vec<f64>>> {
        let batch = tape.batch;
        check_len(
            "MLP upstream gradient",
            batch * self.output_dim(),
            d_out.len(),
        )?;
        if let Some(g) = param_grads.as_deref() {
            check_len("MLP gradient buffer", self.params.len(), g.len())?;
        }
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }

        let mut delta = d_out.to_vec();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let act = self.activations[l];
            if act != Activation::Identity {
                for (d, a) in delta.iter_mut().zip(&tape.layers[l + 1]) {
                    *d *= act.grad_from_output(*a);
                }
            }
            let offset = offsets[l];
            if let Some(g) = param_grads.as_deref_mut() {
                let (gw, rest) = g[offset..].split_at_mut(fan_in * fan_out);
                gemm(
                    fan_in,
                    batch,
                    fan_out,
                    1.0,
                    MatRef::transposed(&tape.layers[l], fan_in),
                    MatRef::row_major(&delta, fan_out),
                    1.0,
                    gw,
                );
                let gb = &mut rest[..fan_out];
                for row in delta.chunks_exact(fan_out) {
                    for (b, d) in gb.iter_mut().zip(row) {
                        *b += d;
                    }
                }
            }
            if l == 0 && !want_input {
                return Ok(None);
            }
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let mut prev = vec![0.0; batch * fan_in];
            gemm(
                batch,
                fan_out,
                fan_in,
                1.0,
                MatRef::row_major(&delta, fan_out),
                MatRef::transposed(weights, fan_out),
                0.0,
                &mut prev,
            );
            delta = prev;
        }
        Ok(Some(delta))
    }

    /// `self ← (1 − tau)·self + tau·source`, parameter-wise.
    pub fn polyak_from(&mut self, source: &Mlp, tau: f64) {
        debug_assert_eq!(self.params.len(), source.params.len());
        for (t, s) in self.params.iter_mut().zip(&source.params) {
            *t = (1.0 - tau) * *t + tau * s;
        }
    }
}

/// Saturates instead of overflowing so absurd shapes fail the length check.
pub fn param_count(sizes: &[usize]) -> usize {
    sizes
        .windows(2)
        .map(|w| w[0].saturating_mul(w[1]).saturating_add(w[1]))
        .fold(0, usize::saturating_add)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss(m: &Mlp, x: &[f64], batch: usize, weights: &[f64]) -> f64 {
        let y = m.predict(x, batch).unwrap();
        y.iter().zip(weights).map(|(a, w)| a * w).sum()
    }

    fn check_grads(act: Activation) {
        let mut rng = Rng::new(2);
        let m = Mlp::new(&[3, 5, 4, 2], act, &mut rng).unwrap();
        let batch = 4;
        let x: Vec<f64> = (0..batch * 3).map(|_| rng.normal()).collect();
        let w: Vec<f64> = (0..batch * 2).map(|_| rng.normal()).collect();
        let tape = m.forward(&x, batch).unwrap();
        let mut g = vec![0.0; m.num_params()];
        let dx = m.backward(&tape, &w, Some(&mut g), true).unwrap().unwrap();
        let h = 1e-6;
        for i in 0..m.num_params() {
            let mut p = m.clone();
            p.params_mut()[i] += h;
            let up = loss(&p, &x, batch, &w);
            p.params_mut()[i] -= 2.0 * h;
            let down = loss(&p, &x, batch, &w);
            let fd = (up - down) / (2.0 * h);
            assert!(
                (fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()),
                "param {i}: {fd} vs {}",
                g[i]
            );
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += h;
            let up = loss(&m, &xp, batch, &w);
            xp[i] -= 2.0 * h;
            let down = loss(&m, &xp, batch, &w);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - dx[i]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn gradients_tanh() {
        check_grads(Activation::Tanh);
    }

    #[test]
    fn gradients_relu() {
        check_grads(Activation::Relu);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut rng = Rng::new(0);
        let mut m = Mlp::new(&[4, 8, 2], Activation::Relu, &mut rng).unwrap();
        m.params_mut().fill(0.0);
        assert_eq!(m.predict(&[1.0, 2.0, 3.0, 4.0], 1).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn batch_rows_are_independent() {
        let mut rng = Rng::new(4);
        let m = Mlp::new(&[2, 6, 1], Activation::Tanh, &mut rng).unwrap();
        let both = m.predict(&[0.1, 0.2, -0.3, 0.4], 2).unwrap();
        assert_eq!(both[0], m.predict(&[0.1, 0.2], 1).unwrap()[0]);
        assert_eq!(both[1], m.predict(&[-0.3, 0.4], 1).unwrap()[0]);
    }

    #[test]
    fn polyak_full_copy_is_bitwise() {
        let mut rng = Rng::new(5);
        let src = Mlp::new(&[2, 3, 1], Activation::Relu, &mut rng).unwrap();
        let mut dst = Mlp::new(&[2, 3, 1], Activation::Relu, &mut rng).unwrap();
        dst.polyak_from(&src, 1.0);
        assert_eq!(dst.params(), src.params());
    }

    #[test]
    fn from_parts_validates() {
        assert!(Mlp::from_parts(vec![2, 1], vec![Activation::Identity], vec![0.0; 3]).is_ok());
        assert!(Mlp::from_parts(vec![2, 1], vec![Activation::Identity], vec![0.0; 2]).is_err());
        assert!(Mlp::from_parts(vec![2, 1], vec![], vec![0.0; 3]).is_err());
    }
}
