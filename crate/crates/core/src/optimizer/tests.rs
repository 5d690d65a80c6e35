use super::*;
use crate::scenario::ScenarioConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scenario(seed: u64) -> Scenario {
    let cfg = ScenarioConfig::default();
    cfg.sample(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn opts() -> OptimizerOptions {
    OptimizerOptions::default()
}

fn even_start(p: &Problem<'_>) -> Allocation {
    let n = p.scenario.system.data_symbols();
    p.initial_allocation(n - n / 2, n / 2).unwrap()
}

#[test]
fn single_device_chi_matches_closed_form() {
    let mut cfg = ScenarioConfig::default();
    cfg.system = cfg.system.with_devices(1);
    let sc = Scenario::with_beta(&cfg, vec![3e-9]);
    let p = Problem::full(&sc, Scheme::Mrc);
    let init = even_start(&p);
    let built = p.build_gp(&init).unwrap();
    let r = solve(&built.gp, &SolverOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    let a = built.allocation(&r.x, &init);
    let (cu, cd) = built.chi(&r.x);
    let su = p.model().sinr_mrc_ul(0, &a);
    let sd = p.model().sinr_mrt_dl(0, &a);
    assert!((cu[0] / su - 1.0).abs() < 1e-6, "{} vs {su}", cu[0]);
    assert!((cd[0] / sd - 1.0).abs() < 1e-6, "{} vs {sd}", cd[0]);
}

#[test]
fn rebuilt_gp_is_tight_at_its_anchor() {
    let sc = scenario(4);
    for scheme in [Scheme::Mrc, Scheme::Zf] {
        let p = Problem::full(&sc, scheme);
        let (a, _) = p.solve_powers(&even_start(&p), &opts()).unwrap();
        let built = p.build_gp(&a).unwrap();
        let (u, d) = p.true_sinrs(&a).unwrap();
        let x = built.point(&a, &u, &d, 1.0);
        let n = sc.k();
        // the first 2K inequalities are the SINR constraints, the last K the
        // condensed energy constraints
        let ratio = |i: usize| {
            let (lhs, rhs) = &built.gp.ineq[i];
            lhs.eval(&x) / rhs.eval(&x)
        };
        for i in 0..2 * n {
            assert!((ratio(i) - 1.0).abs() < 1e-10, "{scheme:?} SINR row {i}: {}", ratio(i));
        }
        let m = built.gp.ineq.len();
        let model = p.model();
        for k in 0..n {
            let spend = model.uplink_energy(k, &a);
            let avail = sc.system.t as f64 * model.energy(scheme, k, &a).unwrap();
            // lhs / S = (1 - alpha) spend / (T E) + alpha
            let al = a.alpha[k];
            let exact = (1.0 - al) * spend / avail + al;
            assert!((ratio(m - n + k) - exact).abs() < 1e-10, "{scheme:?} energy {k}");
        }
        assert!(built.gp.max_violation(&x) < 1e-10);
    }
}

#[test]
fn zero_rate_floors_are_omitted() {
    let mut cfg = ScenarioConfig::default();
    cfg.system.rreq_ul = vec![0.0; cfg.system.k];
    cfg.system.rreq_dl = vec![0.0; cfg.system.k];
    let sc = cfg.sample(&mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let p = Problem::full(&sc, Scheme::Mrc);
    let built = p.build_gp(&even_start(&p)).unwrap();
    assert_eq!(built.gp.ineq.len(), 3 * sc.k() + 1);
    let sc1 = scenario(1);
    let with = Problem::full(&sc1, Scheme::Mrc);
    let built = with.build_gp(&even_start(&with)).unwrap();
    assert_eq!(built.gp.ineq.len(), 5 * sc.k() + 1);
    assert_eq!(built.gp.n_vars(), 6 * sc.k());
}

#[test]
fn tied_and_fixed_designs_drop_variables() {
    let sc = scenario(2);
    let design = Design {
        tie_ul: true,
        fix_alpha: true,
        ..Design::full()
    };
    let p = Problem::new(&sc, Scheme::Zf, design);
    let built = p.build_gp(&even_start(&p)).unwrap();
    assert_eq!(built.gp.n_vars(), 4 * sc.k());
    let (a, tr) = p.solve_powers(&even_start(&p), &opts()).unwrap();
    assert_eq!(a.p_p, a.p_d);
    assert!(a.alpha.iter().all(|&x| x == 0.5));
    assert!(tr.final_violation <= 1e-10);
}

#[test]
fn inner_loops_are_monotone_and_feasible() {
    for seed in 0..3 {
        let sc = scenario(seed);
        for (scheme, solver) in [
            (Scheme::Mrc, solve_mrc as fn(&Scenario, &Allocation, &OptimizerOptions) -> Result<(Allocation, IterationTrace)>),
            (Scheme::Zf, solve_zf),
        ] {
            let p = Problem::full(&sc, scheme);
            let (a, tr) = solver(&sc, &even_start(&p), &opts()).unwrap();
            assert!(tr.converged && tr.iterations <= 10, "{scheme:?} {tr:?}");
            assert!(tr.objective.windows(2).all(|w| w[1] >= w[0]));
            assert!(tr.residuals.iter().all(|&r| r <= 1e-10), "{:?}", tr.residuals);
            assert!(p.original_violation(&a).unwrap() <= 1e-10);
            assert_eq!(tr.final_objective(), p.sum_rate(&a).unwrap());
            let n = tr.objective.len();
            assert!(tr.objective[n - 1] - tr.objective[n - 2] < 0.01 * tr.objective[n - 2]);
        }
    }
}

#[test]
fn zf_with_near_perfect_estimates_approaches_perfect_csi() {
    let mut cfg = ScenarioConfig::default();
    cfg.raqr.sigma2 *= 1e-6;
    let sc = cfg.sample(&mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let p = Problem::full(&sc, Scheme::Zf);
    let (a, _) = p.solve_powers(&even_start(&p), &opts()).unwrap();
    let model = p.model();
    let nn = sc.raqr.normalized_noise();
    let mk = (sc.system.m - sc.system.k) as f64;
    for k in 0..sc.k() {
        let est = crate::rates::rate_lb(model.sinr_zf_ul(k, &a).unwrap(), a.t_u, sc.system.t, 1.0);
        let perfect = crate::rates::rate_lb(mk * a.p_d[k] * sc.beta[k] / nn, a.t_u, sc.system.t, 1.0);
        assert!(est <= perfect && est > 0.95 * perfect, "{est} vs {perfect}");
    }
}

#[test]
fn unreachable_floors_are_infeasible() {
    let mut cfg = ScenarioConfig::default();
    cfg.system.rreq_ul = vec![20.0; cfg.system.k];
    let sc = cfg.sample(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let p = Problem::full(&sc, Scheme::Mrc);
    assert!(matches!(
        p.solve_powers(&even_start(&p), &opts()),
        Err(Error::Infeasible(_))
    ));
    assert!(matches!(alternate(&p, None, &opts()), Err(Error::Infeasible(_))));
}

#[test]
fn blocks_without_floors_favor_the_better_link() {
    let mut cfg = ScenarioConfig::default();
    cfg.system.rreq_ul = vec![0.0; cfg.system.k];
    cfg.system.rreq_dl = vec![0.0; cfg.system.k];
    let sc = cfg.sample(&mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let p = Problem::full(&sc, Scheme::Mrc);
    let a = even_start(&p);
    let model = p.model();
    let (t_u, t_d) = optimize_blocks(&p, &a).unwrap();
    let n = sc.system.data_symbols();
    assert!(t_u + t_d <= n);
    let ul: f64 = (0..sc.k()).map(|k| model.sinr_mrc_ul(k, &a).ln_1p()).sum();
    let dl: f64 = (0..sc.k()).map(|k| model.sinr_mrt_dl(k, &a).ln_1p()).sum();
    if ul > dl {
        // smallest T_D whose harvest pays for the uplink, the rest uplink
        assert_eq!(t_u + t_d, n);
        assert!(blocks_feasible(&p, &a, t_u, t_d).unwrap());
        assert!(!blocks_feasible(&p, &a, t_u + 1, t_d - 1).unwrap());
    } else {
        assert_eq!((t_u, t_d), (0, n));
    }
}

#[test]
fn block_choice_never_lowers_the_rate() {
    let sc = scenario(6);
    let p = Problem::full(&sc, Scheme::Zf);
    let a = even_start(&p);
    let (a, _) = p.solve_powers(&a, &opts()).unwrap();
    let (t_u, t_d) = optimize_blocks(&p, &a).unwrap();
    let moved = Allocation { t_u, t_d, ..a.clone() };
    assert!(p.sum_rate(&moved).unwrap() >= p.sum_rate(&a).unwrap());
    assert!(p.original_violation(&moved).unwrap() <= BLOCK_TOL);
}

#[test]
fn alternation_is_monotone_and_short() {
    let sc = scenario(7);
    for scheme in [Scheme::Mrc, Scheme::Zf] {
        let p = Problem::full(&sc, scheme);
        let sol = alternate(&p, None, &opts()).unwrap();
        assert!(sol.outer.windows(2).all(|w| w[1] >= w[0]), "{:?}", sol.outer);
        assert!(sol.passes() <= 5, "{:?}", sol.outer);
        assert_eq!(sol.sum_rate, p.sum_rate(&sol.allocation).unwrap());
        assert!(p.original_violation(&sol.allocation).unwrap() <= 1e-8);
    }
}

#[test]
fn one_pass_when_blocks_are_already_optimal() {
    let sc = scenario(8);
    let p = Problem::full(&sc, Scheme::Mrc);
    let sol = alternate(&p, None, &opts()).unwrap();
    let again = alternate(&p, Some(&sol.allocation), &OptimizerOptions { max_outer: 1, ..opts() }).unwrap();
    assert_eq!(again.passes(), 1);
    let (_, inner) = p.solve_powers(&sol.allocation, &opts()).unwrap();
    assert_eq!(again.sum_rate, inner.final_objective());
}

#[test]
fn full_design_dominates_its_restriction() {
    for seed in 0..2 {
        let sc = scenario(seed);
        for scheme in [Scheme::Mrc, Scheme::Zf] {
            let r = optimize_full(&sc, scheme, &opts()).unwrap();
            assert!(r.full.sum_rate >= r.equal_ul.sum_rate);
            assert!((r.report.sum_rate - r.full.sum_rate).abs() < 1e-12);
            assert!(r.equal_ul.allocation.p_p == r.equal_ul.allocation.p_d);
        }
    }
}

#[test]
fn rf_baselines_use_the_battery() {
    let sc = scenario(9);
    let (sol, report) = run_benchmark(&BenchmarkSpec::new(BenchmarkKind::RfFullOpt), &sc, Scheme::Mrc, &opts()).unwrap();
    let design = BenchmarkSpec::new(BenchmarkKind::RfFullOpt).design(&sc);
    let p = Problem::new(&sc, Scheme::Mrc, design);
    assert!(p.original_violation(&sol.allocation).unwrap() <= 1e-8);
    assert!(sol.allocation.alpha.iter().all(|&a| a > 0.99));
    assert!((report.uplink + report.downlink - report.sum_rate).abs() < 1e-12);
    let (tied, _) = run_benchmark(&BenchmarkSpec::new(BenchmarkKind::RfEqualUl), &sc, Scheme::Mrc, &opts()).unwrap();
    assert_eq!(tied.allocation.p_p, tied.allocation.p_d);
}
