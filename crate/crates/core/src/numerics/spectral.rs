//! Spectral radius by power iteration, and rescaling to a target radius.
//!
//! Plain power iteration stalls when several dominant eigenvalues share
//! nearly the same magnitude, which is the common case for random
//! non-symmetric matrices (complex pairs on the edge of the spectrum). Each
//! iteration therefore spans a small Krylov space from the current iterate
//! and reads the radius off its Ritz values, then takes an ordinary power
//! step. The estimate converges like `|λ_{k+1} / λ_1|^t` instead of
//! `|λ_2 / λ_1|^t`.

use num_complex::Complex64;

use super::mat::{axpy, dot, norm2, Mat};
use super::rng::Rng;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;
const START_SEED: u64 = 0x005E_ED0F_5EC7;
/// Krylov dimension behind each estimate.
const KRYLOV_DIM: usize = 8;
/// Power steps per estimate.
const ESTIMATE_EVERY: usize = 4;

pub fn spectral_radius(m: &Mat, tol: f64, max_iter: usize) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "spectral_radius (square)",
            expected: m.rows(),
            actual: m.cols(),
        });
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("spectral_radius input"));
    }
    let n = m.rows();
    if n == 0 || m.as_slice().iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroSpectralRadius);
    }

    let mut rng = Rng::new(START_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
    normalize(&mut v)?;
    let mut krylov = Krylov::new(n, KRYLOV_DIM.min(n));
    let mut power = vec![0.0; n];

    let mut prev = f64::NAN;
    let mut last_change = f64::INFINITY;
    for it in 0..max_iter {
        let estimate = if it % ESTIMATE_EVERY == 0 {
            krylov.build(m, &v, &mut power)?;
            Some(krylov.ritz_radius())
        } else {
            m.matvec_into(&v, &mut power)?;
            None
        };
        let n1 = norm2(&power);
        if n1 == 0.0 {
            // v fell into the null space; the nilpotent part has radius zero.
            return Err(Error::ZeroSpectralRadius);
        }
        if let Some(estimate) = estimate {
            if !estimate.is_finite() {
                return Err(Error::NonFinite("spectral_radius estimate"));
            }
            if prev.is_finite() {
                last_change = (estimate - prev).abs();
                if last_change <= tol * estimate.max(f64::MIN_POSITIVE) {
                    if estimate == 0.0 {
                        return Err(Error::ZeroSpectralRadius);
                    }
                    return Ok(estimate);
                }
            }
            prev = estimate;
        }
        for (vi, pi) in v.iter_mut().zip(&power) {
            *vi = pi / n1;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        last_change,
    })
}

/// Returns `m · (rho / spectral_radius(m))`.
pub fn rescale_to_radius(m: &Mat, rho: f64) -> Result<Mat> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "target spectral radius must lie in (0, 1), got {rho}"
        )));
    }
    let r = spectral_radius(m, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    if r == 0.0 {
        return Err(Error::ZeroSpectralRadius);
    }
    Ok(m.scaled(rho / r))
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let n = norm2(v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::NonFinite("power iteration start vector"));
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(())
}

/// Arnoldi basis `q` and upper Hessenberg projection `h` (row-major, `k+1 × k`).
struct Krylov {
    k: usize,
    dim: usize,
    q: Vec<Vec<f64>>,
    h: Vec<f64>,
    w: Vec<f64>,
}

impl Krylov {
    fn new(n: usize, k: usize) -> Self {
        Krylov {
            k,
            dim: 0,
            q: vec![vec![0.0; n]; k + 1],
            h: vec![0.0; (k + 1) * k],
            w: vec![0.0; n],
        }
    }

    fn h(&self, i: usize, j: usize) -> f64 {
        self.h[i * self.k + j]
    }

    /// Arnoldi from the unit vector `v`; `power` receives `A v`. Stops early
    /// when the space becomes invariant.
    fn build(&mut self, m: &Mat, v: &[f64], power: &mut [f64]) -> Result<()> {
        self.h.iter_mut().for_each(|x| *x = 0.0);
        self.q[0].copy_from_slice(v);
        self.dim = self.k;
        for j in 0..self.k {
            m.matvec_into(&self.q[j], &mut self.w)?;
            if j == 0 {
                power.copy_from_slice(&self.w);
            }
            let scale = norm2(&self.w);
            // Two Gram-Schmidt passes keep the basis orthogonal to rounding.
            for _ in 0..2 {
                for i in 0..=j {
                    let c = dot(&self.q[i], &self.w);
                    self.h[i * self.k + j] += c;
                    axpy(-c, &self.q[i], &mut self.w);
                }
            }
            let next = norm2(&self.w);
            self.h[(j + 1) * self.k + j] = next;
            if next <= 1e-12 * scale {
                self.dim = j + 1;
                break;
            }
            for (t, w) in self.q[j + 1].iter_mut().zip(&self.w) {
                *t = w / next;
            }
        }
        Ok(())
    }

    /// Largest Ritz value magnitude: the roots of `det(zI − H)` by Durand-Kerner.
    fn ritz_radius(&self) -> f64 {
        let d = self.dim;
        let bound = (0..d)
            .map(|i| (0..d).map(|j| self.h(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
            + self.h(d.min(self.k), d - 1).abs() * 0.0;
        if bound == 0.0 {
            return 0.0;
        }
        let radius = bound;
        let mut z: Vec<Complex64> = (0..d)
            .map(|i| {
                Complex64::from_polar(radius, 0.4 + std::f64::consts::TAU * i as f64 / d as f64)
            })
            .collect();
        for _ in 0..1000 {
            let mut moved = 0.0f64;
            for i in 0..d {
                let mut denom = Complex64::new(1.0, 0.0);
                for j in 0..d {
                    if j != i {
                        denom *= z[i] - z[j];
                    }
                }
                if denom.norm() == 0.0 {
                    continue;
                }
                let step = self.char_poly(z[i]) / denom;
                z[i] -= step;
                moved = moved.max(step.norm());
            }
            if moved <= 1e-15 * radius {
                break;
            }
        }
        z.iter().map(|r| r.norm()).fold(0.0, f64::max)
    }

    /// `det(zI − H)` for the leading `dim × dim` block, by the Hessenberg recurrence.
    fn char_poly(&self, z: Complex64) -> Complex64 {
        let d = self.dim;
        let mut p = Vec::with_capacity(d + 1);
        p.push(Complex64::new(1.0, 0.0));
        for j in 0..d {
            let mut pj = (z - self.h(j, j)) * p[j];
            let mut sub = 1.0;
            for i in (0..j).rev() {
                sub *= self.h(i + 1, i);
                pj -= p[i] * (self.h(i, j) * sub);
            }
            p.push(pj);
        }
        p[d]
    }
}
