use invsde::harness::catalog;
use invsde::simulate::{
    euler_step, milstein_step, simulate_trajectory, Integrator, SimConfig,
};
use invsde::synthesis::{Interpretation, SdeSystem};
use proptest::prelude::*;

fn config(t0: f64, t_end: f64, h: f64, integrator: Integrator, x0: Vec<f64>) -> SimConfig {
    SimConfig { t0, t_end, h, x0, integrator, seed: 1, trajectory_index: 0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn grid_ends_exactly_at_t(t0 in -5.0f64..5.0, span in 0.1f64..10.0, steps in 1usize..500) {
        let h = span / steps as f64;
        let cfg = config(t0, t0 + span, h, Integrator::Milstein, vec![0.0, 1.0, 1.0]);
        let n = cfg.steps().unwrap();
        prop_assert_eq!(n, steps);
        prop_assert!((cfg.time(n, n) - cfg.t_end).abs() <= 1e-9);
        prop_assert_eq!(cfg.time(0, n), t0);
    }

    #[test]
    fn analytic_sphere_conserves_m(seed in any::<u64>(), index in 0u64..1000) {
        let e = catalog::sphere();
        let cfg = SimConfig { seed, trajectory_index: index, ..config(0.0, 5.0, 0.01, Integrator::AnalyticSphere, e.initial_states[0].clone()) };
        let tr = simulate_trajectory(&e.system, &cfg).unwrap();
        let m = tr.invariant.unwrap();
        for v in &m {
            prop_assert!((v - m[0]).abs() <= 1e-12 * m[0].abs());
        }
    }

    #[test]
    fn milstein_equals_euler_without_noise(
        x in proptest::collection::vec(-2.0f64..2.0, 2),
        t in 0.0f64..3.0,
        xi in -3.0f64..3.0,
    ) {
        // σ ≡ 0 makes Σ = 0, so f = a and both schemes reduce to explicit Euler.
        let drift = vec!["x2 * cos(t)".parse().unwrap(), "-x1 + sin(x2)".parse().unwrap()];
        let zero = vec![vec!["0".parse().unwrap(), "0".parse().unwrap()]];
        let strat = SdeSystem::explicit(Interpretation::Stratonovich, drift.clone(), zero.clone(), None).unwrap();
        let ito = SdeSystem::explicit(Interpretation::Ito, drift, zero, None).unwrap();
        let h = 0.01;
        let a = milstein_step(&strat, t, &x, h, xi).unwrap();
        let b = euler_step(&ito, t, &x, h, &[h.sqrt() * xi]).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() <= 1e-14);
        }
    }

    #[test]
    fn identical_configs_give_identical_trajectories(seed in any::<u64>(), index in any::<u64>(), which in 0usize..3) {
        let e = catalog::catenoid();
        let integrator = [Integrator::Milstein, Integrator::Artemiev, Integrator::Euler][which];
        let cfg = SimConfig { seed, trajectory_index: index, ..config(0.0, 0.5, 0.01, integrator, e.initial_states[0].clone()) };
        let a = simulate_trajectory(&e.system, &cfg).unwrap();
        let b = simulate_trajectory(&e.system, &cfg).unwrap();
        prop_assert_eq!(a.to_csv(), b.to_csv());
        let bits = |s: &[Vec<f64>]| s.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a.states), bits(&b.states));
    }
}
