//! Independent reference computations used to verify the main code paths.
//!
//! Each oracle computes the same quantity by a different route (dense
//! Gaussian elimination instead of recursive updates, characteristic-polynomial
//! roots instead of power iteration, finite differences instead of reverse
//! mode) and reports the observed discrepancy against a tolerance.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::adapt::{RlsConfig, RlsReadout};
use crate::agent::{Activation, Batch, SacAgent, SacConfig};
use crate::envs::cartpole::cartpole_dynamics;
use crate::envs::{CartPoleWindConfig, FrictionSled, FrictionSledConfig};
use crate::error::Result;
use crate::numerics::{spectral_radius, Mat, Rng, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::reservoir::{Reservoir, ReservoirConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Small,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed discrepancy (or, for sensitivity checks, the smallest).
    pub error: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub scale: Scale,
    pub all_passed: bool,
    pub results: Vec<OracleResult>,
}

fn result(name: &str, error: f64, tolerance: f64, detail: String) -> OracleResult {
    OracleResult {
        name: name.to_string(),
        passed: error <= tolerance,
        error,
        tolerance,
        detail,
    }
}

/// Solves `A·X = B` by Gaussian elimination with partial pivoting.
/// `a` is `n × n`, `b` is `n × m`; returns `None` for a numerically singular `A`.
pub fn gauss_solve(a: &Mat, b: &Mat) -> Option<Mat> {
    let n = a.rows();
    let m = b.cols();
    let mut aug: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a.row(i).to_vec();
            row.extend_from_slice(b.row(i));
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))?;
        if aug[pivot][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, pivot);
        for r in col + 1..n {
            let f = aug[r][col] / aug[col][col];
            if f != 0.0 {
                for c in col..n + m {
                    aug[r][c] -= f * aug[col][c];
                }
            }
        }
    }
    let mut x = Mat::zeros(n, m);
    for k in 0..m {
        for i in (0..n).rev() {
            let mut s = aug[i][n + k];
            for j in i + 1..n {
                s -= aug[i][j] * x.get(j, k);
            }
            x.set(i, k, s / aug[i][i]);
        }
    }
    Some(x)
}

/// Batch solution of the exponentially weighted least-squares problem that
/// RLS solves recursively with `λ = 1`, `P₀ = δI`, `W₀ = 0`:
/// `W = Y·Xᵀ·(X·Xᵀ + I/δ)⁻¹`, with `X` as `n_x × T`, `Y` as `n_y × T`.
pub fn ridge_reference(states: &Mat, targets: &Mat, delta: f64) -> Option<Mat> {
    let n_x = states.rows();
    let mut gram = states.matmul(&states.transpose()).ok()?;
    for i in 0..n_x {
        gram.set(i, i, gram.get(i, i) + 1.0 / delta);
    }
    let rhs = states.matmul(&targets.transpose()).ok()?;
    Some(gauss_solve(&gram, &rhs)?.transpose())
}

/// Reservoir-driven regression data: `n_x × T` states and `n_y × T` targets.
pub fn regression_data(seed: u64, n_x: usize, t: usize, n_y: usize) -> Result<(Mat, Mat)> {
    let mut rng = Rng::with_stream(seed, 11);
    let mut res = Reservoir::build(ReservoirConfig {
        n_x,
        n_u: 2,
        rho: 0.9,
        alpha: 0.3,
        input_scale: 1.0,
        seed,
    })?;
    let truth = Mat::from_fn(n_y, n_x, |_, _| rng.normal());
    let mut xs = Mat::zeros(n_x, t);
    let mut ys = Mat::zeros(n_y, t);
    for k in 0..t {
        let u = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
        let x = res.update(&u)?.to_vec();
        let y = truth.matvec(&x)?;
        for i in 0..n_x {
            xs.set(i, k, x[i]);
        }
        for i in 0..n_y {
            ys.set(i, k, y[i] + 0.1 * rng.normal());
        }
    }
    Ok((xs, ys))
}

fn run_rls(cfg: RlsConfig, xs: &Mat, ys: &Mat) -> Result<Mat> {
    let mut rls = RlsReadout::new(cfg, ys.rows(), xs.rows())?;
    let xt = xs.transpose();
    let yt = ys.transpose();
    for k in 0..xs.cols() {
        rls.step(xt.row(k), yt.row(k))?;
    }
    Ok(rls.w_out().clone())
}

/// Worst relative Frobenius discrepancy between RLS run with `lambda` and the
/// `λ = 1` batch solution, over `seeds`.
pub fn rls_ridge_discrepancy(seeds: &[u64], n_x: usize, t: usize, lambda: f64) -> Result<f64> {
    let delta = 100.0;
    let mut worst: f64 = 0.0;
    for &seed in seeds {
        let (xs, ys) = regression_data(seed, n_x, t, 3)?;
        let w_rls = run_rls(RlsConfig { lambda, delta }, &xs, &ys)?;
        let w_ref = ridge_reference(&xs, &ys, delta)
            .ok_or(crate::Error::Singular { pivot: 0.0, row: 0 })?;
        worst = worst.max(w_rls.frobenius_distance(&w_ref) / w_ref.frobenius_norm());
    }
    Ok(worst)
}

pub fn rls_ridge_oracle(seeds: &[u64], n_x: usize, t: usize) -> Result<OracleResult> {
    let err = rls_ridge_discrepancy(seeds, n_x, t, 1.0)?;
    Ok(result(
        "rls_vs_ridge",
        err,
        1e-8,
        format!(
            "relative Frobenius error, lambda=1, delta=100, n_x={n_x}, T={t}, {} seeds",
            seeds.len()
        ),
    ))
}

/// Sensitivity check: a forgetting factor off by 1e-3 must break the equivalence.
pub fn rls_tamper_oracle(seeds: &[u64], n_x: usize, t: usize) -> Result<OracleResult> {
    let mut worst = f64::INFINITY;
    for &seed in seeds {
        worst = worst.min(rls_ridge_discrepancy(&[seed], n_x, t, 1.0 - 1e-3)?);
    }
    let tol = 1e-8;
    Ok(OracleResult {
        name: "rls_tamper_detected".into(),
        passed: worst > tol,
        error: worst,
        tolerance: tol,
        detail: "lambda perturbed by 1e-3; smallest discrepancy must exceed the tolerance".into(),
    })
}

pub fn scalar_rls_oracle() -> Result<OracleResult> {
    let mut rls = RlsReadout::new(
        RlsConfig {
            lambda: 1.0,
            delta: 100.0,
        },
        1,
        1,
    )?;
    rls.step(&[1.0], &[1.0])?;
    let expect = 100.0 / 101.0;
    let err = (rls.w_out().get(0, 0) - expect)
        .abs()
        .max((rls.p().get(0, 0) - expect).abs());
    Ok(result(
        "scalar_rls",
        err,
        1e-12,
        "W and P after one step equal 100/101".into(),
    ))
}

/// Characteristic polynomial coefficients `c[0..=n]` (`c[n] = 1`) via Faddeev–LeVerrier.
pub fn char_poly(a: &Mat) -> Vec<f64> {
    let n = a.rows();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m = Mat::zeros(n, n);
    for k in 1..=n {
        // M_k = A·M_{k−1} + c_{n−k+1}·I
        let mut next = a.matmul(&m).expect("square");
        for i in 0..n {
            next.set(i, i, next.get(i, i) + c[n - k + 1]);
        }
        let am = a.matmul(&next).expect("square");
        let trace: f64 = (0..n).map(|i| am.get(i, i)).sum();
        c[n - k] = -trace / k as f64;
        m = next;
    }
    c
}

/// All roots of the monic polynomial `c` (ascending coefficients) by Durand–Kerner.
pub fn poly_roots(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let eval = |z: Complex64| {
        c.iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &k| acc * z + k)
    };
    let bound = 1.0 + c[..n].iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32) * bound * 0.5).collect();
    for _ in 0..5000 {
        let mut change: f64 = 0.0;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            change = change.max(step.norm());
        }
        if change < 1e-15 * bound {
            break;
        }
    }
    roots
}

pub fn dense_spectral_radius(a: &Mat) -> f64 {
    poly_roots(&char_poly(a))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn eigen_oracle(seeds: &[u64], n: usize) -> Result<OracleResult> {
    let mut worst: f64 = 0.0;
    for &seed in seeds {
        let mut rng = Rng::with_stream(seed, 12);
        let a = Mat::from_fn(n, n, |_, _| rng.normal() / (n as f64).sqrt());
        let reference = dense_spectral_radius(&a);
        let power = spectral_radius(&a, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        worst = worst.max((power - reference).abs() / reference);
    }
    Ok(result(
        "spectral_radius_vs_dense_eigensolver",
        worst,
        1e-6,
        format!(
            "relative error, {n}x{n} Gaussian matrices, {} seeds",
            seeds.len()
        ),
    ))
}

/// Cart-pole accelerations from the coupled equations of motion
/// `[M, m·l·cosθ; m·l·cosθ, (4/3)·m·l²]·[ẍ; θ̈] = [F + m·l·θ̇²·sinθ; m·g·l·sinθ]`,
/// followed by the same semi-implicit Euler step.
pub fn cartpole_reference(cfg: &CartPoleWindConfig, s: &[f64], force: f64) -> [f64; 4] {
    let (m, mc, l, g) = (
        cfg.pole_mass,
        cfg.cart_mass,
        cfg.pole_half_length,
        cfg.gravity,
    );
    let (sin, cos) = s[2].sin_cos();
    let a = Mat::from_rows(&[
        &[m + mc, m * l * cos],
        &[m * l * cos, 4.0 / 3.0 * m * l * l],
    ]);
    let b = Mat::from_rows(&[&[force + m * l * s[3] * s[3] * sin], &[m * g * l * sin]]);
    let acc = gauss_solve(&a, &b).expect("mass matrix is positive definite");
    let x_dot = s[1] + cfg.tau * acc.get(0, 0);
    let theta_dot = s[3] + cfg.tau * acc.get(1, 0);
    [
        s[0] + cfg.tau * x_dot,
        x_dot,
        s[2] + cfg.tau * theta_dot,
        theta_dot,
    ]
}

pub fn cartpole_oracle(samples: usize) -> OracleResult {
    let cfg = CartPoleWindConfig::default();
    let mut rng = Rng::with_stream(0, 13);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let s = [
            rng.uniform(-2.4, 2.4),
            rng.uniform(-3.0, 3.0),
            rng.uniform(-0.5, 0.5),
            rng.uniform(-3.0, 3.0),
        ];
        let f = rng.uniform(-20.0, 20.0);
        let got = cartpole_dynamics(&cfg, &s, f);
        let want = cartpole_reference(&cfg, &s, f);
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
    }
    result(
        "cartpole_dynamics_vs_mass_matrix_solve",
        worst,
        1e-12,
        format!("max abs state difference after one step, {samples} random states"),
    )
}

/// Terminal velocity under full drive by bisection on `drive − μv − c·v·|v|`.
pub fn terminal_velocity_bisection(drive: f64, mu: f64, c: f64) -> f64 {
    let f = |v: f64| drive - mu * v - c * v * v.abs();
    let (mut lo, mut hi) = (0.0, drive / mu);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn sled_terminal_velocity_oracle() -> Result<OracleResult> {
    // Long enough for the transient (time constant about 1 s) to decay to round-off.
    let cfg = FrictionSledConfig {
        friction_multiplier: 4.0,
        switch_step: 2500,
        max_steps: 5000,
        ..Default::default()
    };
    let mut sled = FrictionSled::new(cfg.clone())?;
    sled.reset(&mut Rng::new(0));
    let mut v_pre = 0.0;
    let mut v_post = 0.0;
    for t in 0..cfg.max_steps {
        let tr = sled.step(&[1.0])?;
        if t + 1 == cfg.switch_step {
            v_pre = tr.s_next[0];
        }
        v_post = tr.s_next[0];
    }
    let mu0 = cfg.base_friction;
    let want_pre = terminal_velocity_bisection(cfg.drive_gain, mu0, cfg.quadratic_drag);
    let want_post = terminal_velocity_bisection(
        cfg.drive_gain,
        mu0 * cfg.friction_multiplier,
        cfg.quadratic_drag,
    );
    let err = ((v_pre - want_pre).abs() / want_pre).max((v_post - want_post).abs() / want_post);
    Ok(result(
        "sled_terminal_velocity",
        err,
        1e-9,
        format!("simulated {v_pre:.6}/{v_post:.6} vs closed form {want_pre:.6}/{want_post:.6}"),
    ))
}

/// Relative error used by the gradient checks.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn central_difference(h: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    Ok((f(h)? - f(-h)?) / (2.0 * h))
}

/// Small SAC agent with tanh hidden units for gradient checking.
pub fn toy_agent(
    hidden: &[usize],
    input_dim: usize,
    act_dim: usize,
    seed: u64,
) -> Result<(SacAgent, Batch)> {
    let mut rng = Rng::with_stream(seed, 14);
    let cfg = SacConfig {
        hidden: hidden.to_vec(),
        activation: Activation::Tanh,
        init_temperature: 0.3,
        ..Default::default()
    };
    let mut agent = SacAgent::new(
        cfg,
        input_dim,
        vec![-1.0; act_dim],
        vec![1.0; act_dim],
        &mut rng,
    )?;
    // Move targets away from the critics so the bootstrap term is non-trivial.
    for p in agent.target1.params_mut() {
        *p += 0.1 * rng.normal();
    }
    let b = 6;
    let batch = Batch {
        size: b,
        s: (0..b * input_dim).map(|_| rng.normal()).collect(),
        a: (0..b * act_dim).map(|_| rng.uniform(-0.9, 0.9)).collect(),
        r: (0..b).map(|_| rng.normal()).collect(),
        s_next: (0..b * input_dim).map(|_| rng.normal()).collect(),
        done: (0..b).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
    };
    Ok((agent, batch))
}

/// Worst relative error of the analytic critic, actor and temperature
/// gradients against central differences, over `max_coords` coordinates per
/// network (all of them when the network is smaller).
pub fn sac_gradient_errors(
    hidden: &[usize],
    seed: u64,
    max_coords: usize,
    h: f64,
) -> Result<[f64; 3]> {
    let (agent, batch) = toy_agent(hidden, 3, 2, seed)?;
    let k = agent.act_dim();
    let mut rng = Rng::with_stream(seed, 15);
    let mut noise = vec![0.0; batch.size * k];
    rng.fill_normal(&mut noise);
    let mut next_noise = vec![0.0; batch.size * k];
    rng.fill_normal(&mut next_noise);
    let alpha = agent.temperature();
    let coords = |n: usize, rng: &mut Rng| -> Vec<usize> {
        if n <= max_coords {
            (0..n).collect()
        } else {
            (0..max_coords).map(|_| rng.below(n)).collect()
        }
    };

    let critic = agent.critic_loss(&batch, &next_noise, alpha, true)?;
    let mut critic_err: f64 = 0.0;
    for which in 0..2 {
        let grads = if which == 0 {
            &critic.grad1
        } else {
            &critic.grad2
        };
        for i in coords(grads.len(), &mut rng) {
            let num = central_difference(h, |d| {
                let mut a = agent.clone();
                let (c1, c2) = a.critics_mut();
                let net = if which == 0 { c1 } else { c2 };
                net.params_mut()[i] += d;
                Ok(a.critic_loss(&batch, &next_noise, alpha, false)?.loss)
            })?;
            critic_err = critic_err.max(relative_error(grads[i], num));
        }
    }

    let actor = agent.actor_loss(&batch.s, batch.size, &noise, alpha, true)?;
    let mut actor_err: f64 = 0.0;
    for i in coords(actor.grad.len(), &mut rng) {
        let num = central_difference(h, |d| {
            let mut a = agent.clone();
            a.actor_mut().params_mut()[i] += d;
            Ok(a.actor_loss(&batch.s, batch.size, &noise, alpha, false)?
                .loss)
        })?;
        actor_err = actor_err.max(relative_error(actor.grad[i], num));
    }

    let target = agent.target_entropy();
    let lt = agent.log_temperature();
    let (_, g) = crate::agent::temperature_loss(lt, &actor.logp, target);
    let num = central_difference(h, |d| {
        Ok(crate::agent::temperature_loss(lt + d, &actor.logp, target).0)
    })?;
    let temp_err = relative_error(g, num);
    Ok([critic_err, actor_err, temp_err])
}

pub fn sac_gradient_oracle(seeds: &[u64]) -> Result<OracleResult> {
    let mut worst = [0.0f64; 3];
    for &seed in seeds {
        for hidden in [&[2usize][..], &[16, 16][..]] {
            let e = sac_gradient_errors(hidden, seed, 100, 1e-5)?;
            for (w, v) in worst.iter_mut().zip(e) {
                *w = w.max(v);
            }
        }
    }
    let err = worst.iter().cloned().fold(0.0, f64::max);
    Ok(result(
        "sac_gradients_vs_finite_differences",
        err,
        1e-4,
        format!(
            "max relative error critic={:.2e} actor={:.2e} temperature={:.2e}",
            worst[0], worst[1], worst[2]
        ),
    ))
}

/// Runs every oracle. `Small` finishes in seconds.
pub fn run_oracles(scale: Scale) -> Result<OracleReport> {
    let (n_seeds, samples) = match scale {
        Scale::Small => (3u64, 200),
        Scale::Full => (10u64, 2000),
    };
    let seeds: Vec<u64> = (0..n_seeds).collect();
    let results = vec![
        rls_ridge_oracle(&seeds, 20, 500)?,
        rls_tamper_oracle(&seeds, 20, 500)?,
        scalar_rls_oracle()?,
        eigen_oracle(&seeds, 6)?,
        cartpole_oracle(samples),
        sled_terminal_velocity_oracle()?,
        sac_gradient_oracle(&seeds)?,
    ];
    Ok(OracleReport {
        scale,
        all_passed: results.iter().all(|r| r.passed),
        results,
    })
}
