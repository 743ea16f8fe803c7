//! Property tests for the numerical and agent invariants.

use esn_oa::adapt::{ridge_fit, RlsConfig, RlsReadout};
use esn_oa::agent::{augment, ReplayBuffer, SacAgent, SacConfig};
use esn_oa::envs::{CartPoleWindConfig, EnvConfig, FrictionSledConfig};
use esn_oa::numerics::{
    rescale_to_radius, spectral_radius, Mat, Rng, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use esn_oa::reservoir::{Reservoir, ReservoirConfig};
use proptest::prelude::*;

fn random_mat(rows: usize, cols: usize, rng: &mut Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.normal())
}

fn random_vec(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
}

fn reservoir(n_x: usize, n_u: usize, seed: u64) -> Reservoir {
    Reservoir::build(ReservoirConfig {
        n_x,
        n_u,
        rho: 0.9,
        alpha: 0.3,
        input_scale: 1.0,
        seed,
    })
    .unwrap()
}

fn rel_frobenius(a: &Mat, b: &Mat) -> f64 {
    a.frobenius_distance(b) / b.frobenius_norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matvec_is_linear(rows in 1usize..=16, cols in 1usize..=16, a in -5.0f64..5.0, b in -5.0f64..5.0, seed: u64) {
        let mut rng = Rng::new(seed);
        let m = random_mat(rows, cols, &mut rng);
        let u = random_vec(cols, &mut rng);
        let v = random_vec(cols, &mut rng);
        let mixed: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = m.matvec(&mixed).unwrap();
        let mu = m.matvec(&u).unwrap();
        let mv = m.matvec(&v).unwrap();
        for i in 0..rows {
            prop_assert!((lhs[i] - (a * mu[i] + b * mv[i])).abs() <= 1e-12 * (1.0 + lhs[i].abs()));
        }
    }

    #[test]
    fn rescale_is_idempotent(n in 2usize..=12, rho in 0.1f64..0.99, seed: u64) {
        let mut rng = Rng::new(seed);
        let m = random_mat(n, n, &mut rng);
        let once = rescale_to_radius(&m, rho).unwrap();
        let twice = rescale_to_radius(&once, rho).unwrap();
        prop_assert!(twice.max_abs_diff(&once) <= 1e-9);
        let r = spectral_radius(&once, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        prop_assert!((r - rho).abs() <= 1e-6);
    }

    #[test]
    fn rng_streams_replay(seed: u64, stream in 0u64..16) {
        let mut a = Rng::with_stream(seed, stream);
        let mut b = Rng::with_stream(seed, stream);
        for _ in 0..10_000 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn reservoir_state_stays_in_unit_ball(n_x in 1usize..=40, n_u in 1usize..=4, seed: u64, amp in 0.0f64..1e6) {
        let mut res = reservoir(n_x, n_u, seed);
        let mut rng = Rng::new(seed ^ 1);
        for _ in 0..50 {
            let u: Vec<f64> = random_vec(n_u, &mut rng).into_iter().map(|v| v * amp).collect();
            let x = res.update(&u).unwrap();
            prop_assert!(x.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn reservoir_replay_after_reset_is_bit_exact(seed: u64) {
        let mut res = reservoir(30, 3, seed);
        let mut rng = Rng::new(seed);
        let inputs: Vec<Vec<f64>> = (0..40).map(|_| random_vec(3, &mut rng)).collect();
        let first: Vec<Vec<f64>> = inputs.iter().map(|u| res.update(u).unwrap().to_vec()).collect();
        res.reset_state();
        for (u, x) in inputs.iter().zip(&first) {
            prop_assert_eq!(res.update(u).unwrap(), x.as_slice());
        }
    }

    #[test]
    fn rls_matches_ridge_without_forgetting(n_x in 1usize..=20, n_y in 1usize..=3, t in 1usize..=200, seed: u64) {
        let mut rng = Rng::new(seed);
        let xs = random_mat(t, n_x, &mut rng);
        let ys = random_mat(t, n_y, &mut rng);
        let mut rls = RlsReadout::new(RlsConfig { lambda: 1.0, delta: 100.0 }, n_y, n_x).unwrap();
        for i in 0..t {
            rls.step(xs.row(i), ys.row(i)).unwrap();
        }
        let ridge = ridge_fit(&xs.transpose(), &ys.transpose(), 1.0 / 100.0).unwrap();
        prop_assert!(rel_frobenius(rls.w_out(), &ridge) <= 1e-8);
    }

    #[test]
    fn rls_covariance_stays_positive_definite(n_x in 1usize..=12, lambda in 0.9f64..=1.0, seed: u64) {
        let mut rng = Rng::new(seed);
        let mut rls = RlsReadout::new(RlsConfig { lambda, delta: 100.0 }, 2, n_x).unwrap();
        for _ in 0..60 {
            let x = random_vec(n_x, &mut rng);
            let y = random_vec(2, &mut rng);
            rls.step(&x, &y).unwrap();
            prop_assert!(rls.p().max_asymmetry() <= 1e-9);
            for _ in 0..20 {
                let probe = random_vec(n_x, &mut rng);
                prop_assert!(rls.p().quadratic_form(&probe).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn rls_residual_identity(n_x in 1usize..=10, lambda in 0.5f64..=1.0, seed: u64) {
        let mut rng = Rng::new(seed);
        let mut rls = RlsReadout::new(RlsConfig { lambda, delta: 10.0 }, 3, n_x).unwrap();
        for _ in 0..20 {
            let x = random_vec(n_x, &mut rng);
            let y = random_vec(3, &mut rng);
            let rec = rls.step(&x, &y).unwrap();
            let xk: f64 = x.iter().zip(rls.last_gain()).map(|(a, b)| a * b).sum();
            let after = rls.predict(&x).unwrap();
            for i in 0..3 {
                let residual = y[i] - after[i];
                prop_assert!((residual - (1.0 - xk) * rec.error[i]).abs() <= 1e-10);
            }
            let norm = rec.error.iter().map(|e| e * e).sum::<f64>().sqrt();
            prop_assert!((rec.error_norm - norm).abs() <= 1e-12);
            prop_assert!(rec.dw_norm >= 0.0);
        }
    }

    #[test]
    fn rls_zero_error_gives_zero_update(n_x in 1usize..=10, seed: u64) {
        let mut rng = Rng::new(seed);
        let mut rls = RlsReadout::new(RlsConfig { lambda: 0.99, delta: 100.0 }, 2, n_x).unwrap();
        let x = random_vec(n_x, &mut rng);
        let y = rls.predict(&x).unwrap();
        let rec = rls.step(&x, &y).unwrap();
        prop_assert_eq!(rec.dw_norm, 0.0);
    }

    #[test]
    fn replay_round_trips_transitions(n in 1usize..=50, cap in 1usize..=20, seed: u64) {
        let mut rng = Rng::new(seed);
        let mut buf = ReplayBuffer::new(cap, 3, 1);
        let mut pushed = Vec::new();
        for i in 0..n {
            let s = random_vec(3, &mut rng);
            let a = random_vec(1, &mut rng);
            let s2 = random_vec(3, &mut rng);
            let r = rng.normal();
            let done = i % 7 == 0;
            buf.push(&s, &a, r, &s2, done).unwrap();
            pushed.push((s, a, r, s2, done));
        }
        prop_assert_eq!(buf.len(), n.min(cap));
        let kept = &pushed[n - buf.len()..];
        let mut stored: Vec<_> = (0..buf.len()).map(|i| {
            let (s, a, r, s2, d) = buf.get(i);
            (s.to_vec(), a.to_vec(), r, s2.to_vec(), d)
        }).collect();
        let mut expected = kept.to_vec();
        let key = |t: &(Vec<f64>, Vec<f64>, f64, Vec<f64>, bool)| t.2.to_bits();
        stored.sort_by_key(key);
        expected.sort_by_key(key);
        prop_assert_eq!(stored, expected);
    }

    #[test]
    fn augmentation_keeps_raw_prefix(s in prop::collection::vec(-1e6f64..1e6, 1..8), seed: u64) {
        let mut rng = Rng::new(seed);
        let pred = random_vec(s.len(), &mut rng);
        let aug = augment(&s, &pred).unwrap();
        prop_assert_eq!(&aug.as_slice()[..s.len()], s.as_slice());
        prop_assert_eq!(aug.prediction(), pred.as_slice());
        prop_assert!(augment(&s, &pred[..s.len() - 1]).is_err());
    }

    #[test]
    fn emitted_actions_stay_inside_bounds(lo in -10.0f64..0.0, width in 1e-3f64..20.0, scale in 0.0f64..1e3, seed: u64) {
        let mut rng = Rng::new(seed);
        let cfg = SacConfig { hidden: vec![8], ..SacConfig::default() };
        let mut agent = SacAgent::new(cfg, 4, vec![lo], vec![lo + width], &mut rng).unwrap();
        // Large weights drive the pre-squash mean deep into saturation.
        for p in agent.actor_mut().params_mut() {
            *p *= scale;
        }
        for _ in 0..20 {
            let input: Vec<f64> = random_vec(4, &mut rng).into_iter().map(|v| v * 100.0).collect();
            for det in [true, false] {
                let a = agent.act(&input, det, &mut rng).unwrap();
                prop_assert!(a[0] > lo && a[0] < lo + width, "{} not in ({lo}, {})", a[0], lo + width);
            }
        }
    }

    #[test]
    fn polyak_update_is_exact(tau in 1e-3f64..=1.0, seed: u64) {
        let mut rng = Rng::new(seed);
        let cfg = SacConfig { hidden: vec![6, 5], tau_polyak: tau, ..SacConfig::default() };
        let mut agent = SacAgent::new(cfg, 3, vec![-1.0], vec![1.0], &mut rng).unwrap();
        {
            let (c1, c2) = agent.critics_mut();
            for p in c1.params_mut().iter_mut().chain(c2.params_mut()) {
                *p += rng.normal();
            }
        }
        let (old1, old2) = {
            let (t1, t2) = agent.targets();
            (t1.params().to_vec(), t2.params().to_vec())
        };
        agent.polyak_update();
        let (c1, c2) = agent.critics();
        let (t1, t2) = agent.targets();
        for (old, c, t) in [(&old1, c1, t1), (&old2, c2, t2)] {
            for ((o, cp), tp) in old.iter().zip(c.params()).zip(t.params()) {
                prop_assert!((tp - ((1.0 - tau) * o + tau * cp)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn environments_are_deterministic(seed: u64, actions in prop::collection::vec(-1.0f64..=1.0, 1..200)) {
        for env_cfg in [
            EnvConfig::Cartpole(CartPoleWindConfig { wind_amplitude: 6.0, ..Default::default() }),
            EnvConfig::Sled(FrictionSledConfig { friction_multiplier: 4.0, ..Default::default() }),
        ] {
            let run = || {
                let mut env = env_cfg.build().unwrap();
                let mut rng = Rng::new(seed);
                let mut trace = vec![env.reset(&mut rng)];
                for a in &actions {
                    let tr = env.step(&[*a]).unwrap();
                    trace.push(tr.s_next.clone());
                    trace.push(vec![tr.r]);
                    if tr.done || tr.truncated {
                        break;
                    }
                }
                trace
            };
            let a = run();
            let b = run();
            prop_assert!(a.iter().flatten().map(|v| v.to_bits()).eq(b.iter().flatten().map(|v| v.to_bits())));
        }
    }
}

#[test]
fn echo_state_property_holds_across_seeds() {
    for n_x in [50, 300] {
        for seed in 0..20u64 {
            let mut a = reservoir(n_x, 4, seed);
            let mut b = a.clone();
            let mut rng = Rng::new(seed);
            let x0 = random_vec(n_x, &mut rng);
            b.set_state(&x0).unwrap();
            for _ in 0..1000 {
                let u = random_vec(4, &mut rng);
                a.update(&u).unwrap();
                b.update(&u).unwrap();
            }
            let d: f64 = a
                .state()
                .iter()
                .zip(b.state())
                .map(|(p, q)| (p - q).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(d < 1e-6, "n_x={n_x} seed={seed} diff={d}");
        }
    }
}

/// Fits a linear map with RLS on data from `a1`, switches to `a2`, and reports
/// the prediction error of the final readout on fresh `a2` data.
fn error_after_switch(lambda: f64, seed: u64) -> f64 {
    let (n_x, n_y) = (6, 2);
    let mut rng = Rng::new(seed);
    let a1 = random_mat(n_y, n_x, &mut rng);
    let a2 = random_mat(n_y, n_x, &mut rng);
    let mut rls = RlsReadout::new(
        RlsConfig {
            lambda,
            delta: 100.0,
        },
        n_y,
        n_x,
    )
    .unwrap();
    for a in [&a1, &a2] {
        for _ in 0..200 {
            let x = random_vec(n_x, &mut rng);
            rls.step(&x, &a.matvec(&x).unwrap()).unwrap();
        }
    }
    let mut err = 0.0;
    for _ in 0..100 {
        let x = random_vec(n_x, &mut rng);
        let y = a2.matvec(&x).unwrap();
        let p = rls.predict(&x).unwrap();
        err += y.iter().zip(&p).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
    }
    err
}

#[test]
fn forgetting_tracks_a_switched_system() {
    for seed in 0..10 {
        let forgetful = error_after_switch(0.95, seed);
        let exact = error_after_switch(1.0, seed);
        assert!(forgetful < exact, "seed {seed}: {forgetful} vs {exact}");
    }
}

#[test]
fn sled_terminal_velocity_drops_with_friction() {
    let terminal = |f: f64| {
        let cfg = EnvConfig::Sled(FrictionSledConfig {
            friction_multiplier: f,
            switch_step: 1,
            max_steps: 3000,
            ..Default::default()
        });
        let mut env = cfg.build().unwrap();
        env.reset(&mut Rng::new(0));
        let mut v = 0.0;
        for _ in 0..2999 {
            v = env.step(&[1.0]).unwrap().s_next[0];
        }
        v
    };
    assert!(terminal(10.0) < terminal(1.0));
}
