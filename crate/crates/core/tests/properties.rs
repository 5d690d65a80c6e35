use proptest::prelude::*;

use raq_swipt::approx::{log_bound, product_bound};
use raq_swipt::gp::{solve, GpProblem, Monomial, Posynomial, SolveStatus, SolverOptions};
use raq_swipt::harness::{mean_se, num, task_seed, Experiment, ExperimentKind};
use raq_swipt::scenario::ScenarioConfig;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_bound_is_a_tangent_minorant(xh in 1e-6f64..1e6, x in 1e-6f64..1e6) {
        let b = log_bound(xh).unwrap();
        prop_assert!(b.eval(x) <= (1.0 + x).log2() * (1.0 + 1e-12) + 1e-12);
        prop_assert!((b.eval(xh) - (1.0 + xh).log2()).abs() <= 1e-9 * (1.0 + xh).log2().max(1.0));
    }

    #[test]
    fn product_bound_is_a_minorant(xh in prop::collection::vec(1e-4f64..1e4, 1..5), scale in prop::collection::vec(0.01f64..100.0, 5)) {
        let b = product_bound(&xh).unwrap();
        let x: Vec<f64> = xh.iter().zip(&scale).map(|(a, s)| a * s).collect();
        let exact: f64 = x.iter().map(|v| 1.0 + v).product();
        prop_assert!(b.eval(&x) <= exact * (1.0 + 1e-9));
    }

    #[test]
    fn scenario_config_round_trips(k in 1usize..8, extra in 1usize..40, ps in 1.0f64..100.0, r in 0.0f64..2.0) {
        let mut cfg = ScenarioConfig::default();
        cfg.system = cfg.system.with_devices(k);
        cfg.system.m = k + extra;
        cfg.system.ps_max = ps;
        cfg.system.rreq_dl = (0..k).map(|i| r + i as f64 * 0.1).collect();
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn experiment_grids_must_increase(grid in prop::collection::vec(-100.0f64..100.0, 1..8)) {
        let mut exp = Experiment::new(ExperimentKind::PowerSweep);
        exp.grid = grid.clone();
        let increasing = grid.windows(2).all(|w| w[1] > w[0]);
        prop_assert_eq!(exp.validate().is_ok(), increasing);
    }

    #[test]
    fn csv_numbers_round_trip(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        prop_assert_eq!(num(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn standard_error_scales_like_root_n(v in prop::collection::vec(-10.0f64..10.0, 2..30)) {
        let (m, se) = mean_se(&v);
        let doubled: Vec<f64> = v.iter().chain(&v).copied().collect();
        let (m2, se2) = mean_se(&doubled);
        prop_assert!((m - m2).abs() < 1e-12);
        prop_assert!(se2 <= se + 1e-12);
    }

    #[test]
    fn task_seeds_are_pure(seed in any::<u64>(), i in 0u64..1000) {
        prop_assert_eq!(task_seed(seed, i), task_seed(seed, i));
    }

    /// min x + y + z s.t. a/(xyz) <= 1 has optimum 3 a^{1/3}.
    #[test]
    fn gp_solver_finds_the_am_gm_optimum(a in 1e-3f64..1e3) {
        let mut gp = GpProblem::new();
        let v: Vec<usize> = (0..3).map(|i| gp.add_var(format!("x{i}"), 1e-6, 1e6)).collect();
        gp.set_objective(Posynomial::new(v.iter().map(|&i| Monomial::var(i)).collect()));
        gp.add_le(Monomial::new(a, v.iter().map(|&i| (i, -1.0))), Monomial::constant(1.0));
        let r = solve(&gp, &SolverOptions::default()).unwrap();
        prop_assert_eq!(r.status, SolveStatus::Optimal);
        let best = 3.0 * a.cbrt();
        prop_assert!((r.objective - best).abs() <= 1e-6 * best, "{} vs {}", r.objective, best);
        prop_assert!(gp.max_violation(&r.x) <= 1e-9);
    }
}
